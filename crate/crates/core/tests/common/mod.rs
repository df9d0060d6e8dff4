//! Oracles shared by the property and acceptance suites. Nothing here calls
//! into the code under test except for plain accessors.

#![allow(dead_code)]

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fs;
use std::path::Path as FsPath;

use crowdff::ffa::{JumpRecord, BODY_RADIUS, SLIDE_STEP};
use crowdff::harness::{self, ExperimentPlan, Mode};
use crowdff::personality;
use crowdff::scenario::{Cell, Grid, OceanVector, Scenario};
use crowdff::Vec2;

/// Plain Dijkstra over the 8-connected cell graph. Diagonal moves are
/// refused when both orthogonal cells beside them are blocked.
pub fn dijkstra_cost(grid: &Grid, from: Cell, to: Cell) -> Option<f64> {
    let (cols, rows) = (grid.cols as i64, grid.rows as i64);
    let id = |c: i64, r: i64| (r * cols + c) as usize;
    let blocked = |c: i64, r: i64| grid.is_blocked(Cell::new(c as usize, r as usize));
    let mut dist = vec![f64::INFINITY; (cols * rows) as usize];
    let mut heap = BinaryHeap::new();
    let start = (from.col as i64, from.row as i64);
    dist[id(start.0, start.1)] = 0.0;
    // distances are scaled to integers so the heap can order them
    heap.push(Reverse((0u64, start)));
    let scale = 1e9;
    while let Some(Reverse((_, (c, r)))) = heap.pop() {
        let here = dist[id(c, r)];
        if (c as usize, r as usize) == (to.col, to.row) {
            return Some(here);
        }
        for dc in -1..=1i64 {
            for dr in -1..=1i64 {
                if dc == 0 && dr == 0 {
                    continue;
                }
                let (nc, nr) = (c + dc, r + dr);
                if nc < 0 || nr < 0 || nc >= cols || nr >= rows || blocked(nc, nr) {
                    continue;
                }
                let step = if dc != 0 && dr != 0 {
                    if blocked(nc, r) && blocked(c, nr) {
                        continue;
                    }
                    grid.cell_size * 2f64.sqrt()
                } else {
                    grid.cell_size
                };
                let nd = here + step;
                if nd < dist[id(nc, nr)] - 1e-12 {
                    dist[id(nc, nr)] = nd;
                    heap.push(Reverse(((nd * scale) as u64, (nc, nr))));
                }
            }
        }
    }
    None
}

/// Distance from `p` to the polyline through `pts`.
pub fn distance_to_polyline(p: Vec2, pts: &[Vec2]) -> f64 {
    if pts.len() == 1 {
        return p.distance(pts[0]);
    }
    pts.windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            let ab = b - a;
            let t = if ab.norm_sq() == 0.0 {
                0.0
            } else {
                ((p - a).dot(ab) / ab.norm_sq()).clamp(0.0, 1.0)
            };
            p.distance(a + ab * t)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Point at arc length `d` of the polyline, walking segment by segment.
pub fn walk_polyline(pts: &[Vec2], d: f64) -> Vec2 {
    let mut left = d.max(0.0);
    for w in pts.windows(2) {
        let len = w[0].distance(w[1]);
        if left <= len {
            return if len == 0.0 { w[0] } else { w[0].lerp(w[1], left / len) };
        }
        left -= len;
    }
    *pts.last().unwrap()
}

pub fn polyline_length(pts: &[Vec2]) -> f64 {
    pts.windows(2).map(|w| w[0].distance(w[1])).sum()
}

/// Checks the state of one fast-forward: every repositioned agent lies on
/// its route and outside obstacles, and bodies keep clear of those placed
/// before them unless the whole route was already occupied.
pub fn check_jump_invariants(scenario: &Scenario, records: &[JumpRecord]) -> Result<(), String> {
    let min_gap = 2.0 * BODY_RADIUS;
    let mut placed: Vec<Vec2> = Vec::new();
    for r in records {
        let pts = r.route.waypoints();
        let off = distance_to_polyline(r.pos_projected, pts);
        if off > 1e-6 {
            return Err(format!("agent {} is {off:e} m off its route", r.agent_id));
        }
        if !scenario.bounds().contains(r.pos_projected)
            || scenario.obstacles.iter().any(|o| o.contains(r.pos_projected))
        {
            return Err(format!("agent {} landed inside an obstacle", r.agent_id));
        }
        let clash = |p: Vec2| placed.iter().any(|q| q.distance(p) < min_gap - 1e-6);
        if clash(r.pos_projected) {
            // legitimate only when no slide position along the route is free
            let total = polyline_length(pts);
            let wanted = r.magnitude.min(total);
            let mut k = 0.0;
            while wanted - k * SLIDE_STEP >= 0.0 || wanted + k * SLIDE_STEP <= total {
                for d in [wanted - k * SLIDE_STEP, wanted + k * SLIDE_STEP] {
                    if (0.0..=total).contains(&d) && !clash(walk_polyline(pts, d)) {
                        return Err(format!(
                            "agent {} overlaps a neighbor although arc length {d:.2} was free",
                            r.agent_id
                        ));
                    }
                }
                k += 1.0;
            }
        }
        placed.push(r.pos_projected);
    }
    Ok(())
}

/// Every trait vector on an even grid with `steps` points per axis.
pub fn ocean_grid(steps: usize) -> impl Iterator<Item = OceanVector> {
    let v = move |i: usize| i as f64 / (steps - 1) as f64;
    (0..steps.pow(5)).map(move |mut k| {
        let mut t = [0.0; 5];
        for x in &mut t {
            *x = v(k % steps);
            k /= steps;
        }
        OceanVector::new(t[0], t[1], t[2], t[3], t[4])
    })
}

/// Checks that every formula stays in its documented range over the grid.
/// Returns the number of points checked.
pub fn check_ocean_ranges(steps: usize) -> Result<usize, String> {
    let mut n = 0;
    for o in ocean_grid(steps) {
        let psi = personality::walking_speed(&o);
        let omega = personality::leadership(&o);
        let beta = personality::impatience(&o);
        let zeta = personality::cohesion(beta);
        let speed = personality::desired_speed(psi);
        let radius = personality::personal_radius_for(zeta);
        let tol = 1e-12;
        let within = |x: f64, lo: f64, hi: f64| x >= lo - tol && x <= hi + tol;
        let ok = within(psi, 1.0, 2.0)
            && within(omega, 0.0, 1.0)
            && within(beta, 0.0, 1.0)
            && within(zeta, 0.0, 3.0)
            && within(speed, 0.0, 1.2)
            && within(radius, 0.4, 1.0);
        if !ok {
            return Err(format!(
                "{o:?}: psi {psi} omega {omega} beta {beta} zeta {zeta} speed {speed} radius {radius}"
            ));
        }
        n += 1;
    }
    Ok(n)
}

/// Runs `plan` into `dir` and returns every written file with its bytes,
/// keyed by the path relative to `dir`.
pub fn run_and_collect(mut plan: ExperimentPlan, dir: &FsPath) -> Vec<(String, Vec<u8>)> {
    plan.out_dir = dir.to_path_buf();
    let report = harness::run(&plan).expect("experiment runs");
    let mut out: Vec<(String, Vec<u8>)> = report
        .files
        .iter()
        .map(|p| {
            let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
            (rel, fs::read(p).unwrap())
        })
        .collect();
    out.sort();
    out
}

pub fn plan_for(name: &str, scenario: Scenario, mode: Mode, repeats: usize, seed: u64) -> ExperimentPlan {
    ExperimentPlan {
        scenario,
        sim_id: name.to_string(),
        mode,
        repeats,
        seed: Some(seed),
        out_dir: Default::default(),
        check: false,
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}
