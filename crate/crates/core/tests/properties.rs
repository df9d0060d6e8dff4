mod common;

use std::sync::Arc;

use crowdff::engine::{self, SimState};
use crowdff::ffa::{fast_forward, fast_forward_with, IpParams, JumpRequest};
use crowdff::harness::Mode;
use crowdff::metrics::{avg_error, relative_dif};
use crowdff::pathplan::{advance_path, astar_cells, point_at_distance, Path};
use crowdff::presets;
use crowdff::scenario::{parse_scenario, Cell, Grid, Scenario};
use crowdff::Vec2;
use proptest::prelude::*;

use common::*;

fn random_grid() -> impl Strategy<Value = (Grid, Cell, Cell)> {
    (
        proptest::collection::vec(proptest::bool::weighted(0.2), 225),
        (0..15usize, 0..15usize),
        (0..15usize, 0..15usize),
    )
        .prop_map(|(blocked, (c0, r0), (c1, r1))| {
            let mut g = Grid::open(15, 15, 1.0);
            for (i, b) in blocked.into_iter().enumerate() {
                g.set_blocked(Cell::new(i % 15, i / 15), b);
            }
            let (from, to) = (Cell::new(c0, r0), Cell::new(c1, r1));
            g.set_blocked(from, false);
            g.set_blocked(to, false);
            (g, from, to)
        })
}

fn polyline() -> impl Strategy<Value = Vec<Vec2>> {
    proptest::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 2..8).prop_map(|pts| {
        let mut out: Vec<Vec2> = Vec::new();
        for (x, y) in pts {
            let p = Vec2::new(x, y);
            if out.last().is_none_or(|q| q.distance(p) > 1e-3) {
                out.push(p);
            }
        }
        if out.len() < 2 {
            out.push(out[0] + Vec2::new(1.0, 0.0));
        }
        out
    })
}

fn accuracy_preset() -> impl Strategy<Value = Scenario> {
    (1..=4usize, any::<bool>()).prop_map(|(sim, obs)| presets::accuracy(sim, obs))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn astar_matches_dijkstra((grid, from, to) in random_grid()) {
        let oracle = dijkstra_cost(&grid, from, to);
        match (astar_cells(&grid, from, to), oracle) {
            (Some((cells, cost)), Some(best)) => {
                prop_assert!((cost - best).abs() < 1e-9, "A* {cost} vs Dijkstra {best}");
                prop_assert_eq!(cells[0], from);
                prop_assert_eq!(*cells.last().unwrap(), to);
                for w in cells.windows(2) {
                    prop_assert!(!grid.is_blocked(w[1]));
                    prop_assert!(w[0].col.abs_diff(w[1].col) <= 1 && w[0].row.abs_diff(w[1].row) <= 1);
                }
            }
            (None, None) => {}
            (got, want) => prop_assert!(false, "reachability differs: {:?} vs {:?}", got.map(|g| g.1), want),
        }
    }

    #[test]
    fn waypoints_sit_at_their_arc_lengths(pts in polyline()) {
        let path = Path::new(pts.clone()).unwrap();
        let cum = path.cumulative_length();
        for (p, d) in pts.iter().zip(cum) {
            prop_assert!(point_at_distance(&path, *d).distance(*p) < 1e-9);
        }
        prop_assert!((path.total_length() - polyline_length(&pts)).abs() < 1e-9);
        prop_assert_eq!(point_at_distance(&path, -1.0), pts[0]);
        prop_assert_eq!(point_at_distance(&path, path.total_length() + 1.0), *pts.last().unwrap());
    }

    #[test]
    fn advance_then_walk_composes(pts in polyline(), a in 0.0..1.0f64, b in 0.0..1.0f64) {
        let path = Path::new(pts.clone()).unwrap();
        let total = path.total_length();
        let d1 = a * total;
        let d2 = b * (total - d1);
        let p = point_at_distance(&path, d1);
        prop_assert!(p.distance(walk_polyline(&pts, d1)) < 1e-9);
        let rest = advance_path(&path, p).unwrap();
        prop_assert_eq!(rest.start(), p);
        prop_assert!((rest.total_length() - (total - d1)).abs() < 1e-9);
        let q = point_at_distance(&rest, d2);
        prop_assert!(q.distance(point_at_distance(&path, d1 + d2)) < 1e-9);
    }

    #[test]
    fn advance_rejects_points_off_the_path(pts in polyline(), off in 0.01..5.0f64) {
        let path = Path::new(pts.clone()).unwrap();
        let far = pts.iter().fold(Vec2::new(0.0, 0.0), |m, p| Vec2::new(m.x.max(p.x), m.y.max(p.y)));
        prop_assert!(advance_path(&path, far + Vec2::new(off, off)).is_err());
    }

    #[test]
    fn avg_error_is_a_metric(
        a in proptest::collection::vec((-20.0..20.0f64, -20.0..20.0f64), 1..12),
        shift in proptest::collection::vec((-3.0..3.0f64, -3.0..3.0f64), 12),
        shift2 in proptest::collection::vec((-3.0..3.0f64, -3.0..3.0f64), 12),
    ) {
        let pa: Vec<(usize, Vec2)> = a.iter().enumerate().map(|(i, &(x, y))| (i, Vec2::new(x, y))).collect();
        let pb: Vec<(usize, Vec2)> = pa.iter().map(|&(i, p)| (i, p + Vec2::new(shift[i].0, shift[i].1))).collect();
        let pc: Vec<(usize, Vec2)> = pb.iter().map(|&(i, p)| (i, p + Vec2::new(shift2[i].0, shift2[i].1))).collect();
        let ab = avg_error(&pa, &pb).unwrap();
        prop_assert_eq!(avg_error(&pa, &pa).unwrap(), 0.0);
        prop_assert!((ab - avg_error(&pb, &pa).unwrap()).abs() < 1e-12);
        prop_assert!(avg_error(&pa, &pc).unwrap() <= ab + avg_error(&pb, &pc).unwrap() + 1e-12);
        let oracle = mean(&pa.iter().zip(&pb).map(|(p, q)| p.1.distance(q.1)).collect::<Vec<_>>());
        prop_assert!((ab - oracle).abs() < 1e-12);
        // order of the matched lists does not matter
        let mut rev = pb.clone();
        rev.reverse();
        prop_assert!((avg_error(&pa, &rev).unwrap() - ab).abs() < 1e-12);
    }

    #[test]
    fn dif_ignores_rigid_motions(
        p in (-10.0..10.0f64, -10.0..10.0f64),
        walk in (0.5..5.0f64, 0.0..6.3f64),
        miss in (-2.0..2.0f64, -2.0..2.0f64),
        theta in 0.0..6.3f64,
        t in (-100.0..100.0f64, -100.0..100.0f64),
    ) {
        let bc_t = Vec2::new(p.0, p.1);
        let bc_target = bc_t + Vec2::new(walk.0 * walk.1.cos(), walk.0 * walk.1.sin());
        let ffa_target = bc_target + Vec2::new(miss.0, miss.1);
        let d = relative_dif(bc_t, bc_target, ffa_target).unwrap();
        prop_assert!((d - ffa_target.distance(bc_target) / walk.0).abs() < 1e-9);
        prop_assert_eq!(relative_dif(bc_t, bc_target, bc_target), Some(0.0));
        let (s, c) = theta.sin_cos();
        let moved = |v: Vec2| Vec2::new(c * v.x - s * v.y + t.0, s * v.x + c * v.y + t.1);
        let d2 = relative_dif(moved(bc_t), moved(bc_target), moved(ffa_target)).unwrap();
        prop_assert!((d - d2).abs() < 1e-9);
    }

    #[test]
    fn scenario_survives_json(sc in accuracy_preset(), seed in any::<u64>(), dt in 0.005..0.05f64) {
        let mut sc = sc;
        sc.world.seed = seed;
        sc.world.frame_dt = dt;
        let back = parse_scenario(&sc.to_json()).unwrap();
        prop_assert_eq!(back, sc);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn jumps_keep_agents_on_path_apart_and_clear(
        sc in accuracy_preset(),
        seed in 0..1000u64,
        stop in 0..300u64,
        span in 1..900u64,
    ) {
        let mut state = SimState::with_seed(Arc::new(sc), seed).unwrap();
        engine::run_continuous(&mut state, |s| s.frame >= stop);
        let records = fast_forward(&mut state, JumpRequest::new(stop, stop + span)).unwrap();
        prop_assert_eq!(state.frame, stop + span);
        if let Err(e) = check_jump_invariants(&state.scenario, &records) {
            prop_assert!(false, "{}", e);
        }
        for r in &records {
            prop_assert!(r.ip_multiplier > 0.0 && r.ip_multiplier <= 1.0);
            prop_assert!(r.traveled >= 0.0 && r.traveled <= r.route.total_length() + 1e-9);
            prop_assert_eq!(state.agents[r.agent_id].position, r.pos_projected);
        }
    }

    #[test]
    fn zero_span_jump_changes_nothing(sc in accuracy_preset(), seed in 0..1000u64, stop in 0..200u64) {
        let mut state = SimState::with_seed(Arc::new(sc), seed).unwrap();
        engine::run_continuous(&mut state, |s| s.frame >= stop);
        let before = state.positions();
        let records = fast_forward(&mut state, JumpRequest::new(stop, stop)).unwrap();
        prop_assert_eq!(state.positions(), before);
        prop_assert_eq!(state.frame, stop);
        prop_assert!(records.iter().all(|r| r.traveled == 0.0 && r.pos_projected == r.pos_t));
    }

    #[test]
    fn a_milder_penalty_never_shortens_a_lone_jump(
        obs in any::<bool>(),
        seed in 0..1000u64,
        stop in 1..300u64,
        span in 1..900u64,
        lambdas in (0.5..20.0f64, 0.5..20.0f64),
    ) {
        let mut state = SimState::with_seed(Arc::new(presets::accuracy(1, obs)), seed).unwrap();
        engine::run_continuous(&mut state, |s| s.frame >= stop);
        let (lo, hi) = if lambdas.0 < lambdas.1 { lambdas } else { (lambdas.1, lambdas.0) };
        let base = IpParams::from(&state.scenario.ff);
        let mut a = state.clone();
        let mut b = state.clone();
        let ra = fast_forward_with(&mut a, JumpRequest::new(stop, stop + span), &IpParams { scale: lo, ..base }).unwrap();
        let rb = fast_forward_with(&mut b, JumpRequest::new(stop, stop + span), &IpParams { scale: hi, ..base }).unwrap();
        for (x, y) in ra.iter().zip(&rb) {
            prop_assert!(x.ip_multiplier <= y.ip_multiplier + 1e-12);
            prop_assert!(x.traveled <= y.traveled + 1e-9);
        }
    }

    #[test]
    fn engine_respects_speed_cap_and_obstacles(sim in 1..=4usize, seed in 0..1000u64) {
        let mut state = SimState::with_seed(Arc::new(presets::accuracy(sim, true)), seed).unwrap();
        for _ in 0..250 {
            let before = state.positions();
            engine::step(&mut state);
            let dt = state.frame_dt();
            for (a, p0) in state.agents.iter().zip(&before) {
                prop_assert!(a.speed() <= a.max_speed + 1e-9);
                prop_assert!(a.position.distance(*p0) <= a.max_speed * dt + 1e-9);
                prop_assert!(state.scenario.is_free(a.position), "agent {} at {:?}", a.id, a.position);
            }
            // ownership was decided from the positions before this step
            for (i, owner) in state.markers.owner.iter().enumerate() {
                if let Some(id) = owner {
                    let a = &state.agents[*id];
                    prop_assert!(state.markers.markers[i].distance(before[*id]) <= a.personal_radius + 1e-9);
                }
            }
        }
    }
}

#[test]
fn every_preset_survives_json() {
    for (name, sc) in presets::presets() {
        assert_eq!(parse_scenario(&sc.to_json()).unwrap(), sc, "{name}");
    }
}

#[test]
fn ocean_formulas_stay_in_range() {
    assert_eq!(check_ocean_ranges(11).unwrap(), 161_051);
}

#[test]
fn fixed_seed_outputs_are_byte_identical() {
    for mode in [Mode::Compare, Mode::Fog] {
        let (name, sc) = match mode {
            Mode::Fog => ("fog-demo", presets::fog_demo()),
            _ => ("accuracy-sim3-obstacles", presets::accuracy(3, true)),
        };
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let first = run_and_collect(plan_for(name, sc.clone(), mode, 2, 11), a.path());
        let second = run_and_collect(plan_for(name, sc, mode, 2, 11), b.path());
        assert!(!first.is_empty());
        assert_eq!(first.len(), second.len());
        for ((na, ba), (nb, bb)) in first.iter().zip(&second) {
            assert_eq!(na, nb);
            assert!(ba == bb, "{na} differs between runs");
        }
    }
}
