//! Fog of war on top of the fast forward.
//!
//! Agents standing in hidden fog cells are suspended: the engine skips them
//! entirely. While suspended, every fog cell along the agent's route holds a
//! callback with the estimated frames and positions of entering and leaving
//! it. When such a cell becomes visible during its estimated frame span, the
//! agent is re-materialized at the interpolated point and resumes normal
//! simulation. Reaching the jump's target frame without an activation puts
//! the agent at the final estimated position.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::engine::{self, AgentState, SimState, Termination, ARRIVAL_RADIUS};
use crate::ffa::{self, IpParams, JumpRequest};
use crate::geom::{Rect, Vec2};
use crate::pathplan::Path;
use crate::scenario::{FogSpec, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    /// Stationary structure.
    #[default]
    Tower,
    /// Moving unit; its shape is updated by the caller between frames.
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Circle { x: f64, y: f64, r: f64 },
    Rect(Rect),
}

impl Shape {
    pub fn contains(&self, p: Vec2) -> bool {
        match *self {
            Shape::Circle { x, y, r } => p.distance_sq(Vec2::new(x, y)) <= r * r,
            Shape::Rect(rect) => rect.contains(p),
        }
    }

    pub fn is_valid(&self) -> bool {
        match *self {
            Shape::Circle { r, .. } => r > 0.0,
            Shape::Rect(rect) => rect.w > 0.0 && rect.h > 0.0,
        }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VisionSource {
    #[serde(default)]
    pub kind: SourceKind,
    pub shape: Shape,
    #[serde(default = "default_true")]
    pub active: bool,
}

impl VisionSource {
    pub fn tower(shape: Shape) -> Self {
        VisionSource {
            kind: SourceKind::Tower,
            shape,
            active: true,
        }
    }
}

/// Visibility cells, `subdivision²` per simulation cell.
#[derive(Debug, Clone, PartialEq)]
pub struct FogGrid {
    pub subdivision: u32,
    pub cols: usize,
    pub rows: usize,
    pub cell_size: f64,
    visible: Vec<bool>,
}

pub fn build_fog(grid: &Grid, subdivision: u32) -> FogGrid {
    let s = subdivision.max(1) as usize;
    let cols = grid.cols * s;
    let rows = grid.rows * s;
    FogGrid {
        subdivision: s as u32,
        cols,
        rows,
        cell_size: grid.cell_size / s as f64,
        visible: vec![false; cols * rows],
    }
}

impl FogGrid {
    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.visible.is_empty()
    }

    pub fn cell_of(&self, p: Vec2) -> Option<usize> {
        if p.x < 0.0 || p.y < 0.0 {
            return None;
        }
        let col = (p.x / self.cell_size).floor() as usize;
        let row = (p.y / self.cell_size).floor() as usize;
        // the far world edge belongs to the last cell
        let col = if col == self.cols && p.x <= self.cols as f64 * self.cell_size { col - 1 } else { col };
        let row = if row == self.rows && p.y <= self.rows as f64 * self.cell_size { row - 1 } else { row };
        (col < self.cols && row < self.rows).then(|| row * self.cols + col)
    }

    pub fn center(&self, index: usize) -> Vec2 {
        let (col, row) = (index % self.cols, index / self.cols);
        Vec2::new(
            (col as f64 + 0.5) * self.cell_size,
            (row as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn is_visible(&self, index: usize) -> bool {
        self.visible[index]
    }

    /// Points outside the fog grid count as hidden.
    pub fn is_visible_at(&self, p: Vec2) -> bool {
        self.cell_of(p).is_some_and(|i| self.visible[i])
    }

    pub fn visible_count(&self) -> usize {
        self.visible.iter().filter(|v| **v).count()
    }
}

/// A cell is visible iff its center lies in at least one active source.
pub fn update_visibility(fog: &mut FogGrid, sources: &[VisionSource]) {
    for i in 0..fog.len() {
        let c = fog.center(i);
        fog.visible[i] = sources.iter().any(|s| s.active && s.shape.contains(c));
    }
}

/// Estimated passage of a suspended agent through one fog cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Callback {
    pub agent_id: usize,
    pub fog_cell: usize,
    pub enter_frame: u64,
    pub leave_frame: u64,
    pub enter_pos: Vec2,
    pub leave_pos: Vec2,
    /// Arc lengths on the registered route.
    pub enter_dist: f64,
    pub leave_dist: f64,
    pub active: bool,
}

impl Callback {
    pub fn covers(&self, frame: u64) -> bool {
        (self.enter_frame..=self.leave_frame).contains(&frame)
    }

    /// Arc length at `frame`, interpolated linearly between the entry and
    /// exit estimates.
    pub fn distance_at(&self, frame: u64) -> f64 {
        if self.leave_frame <= self.enter_frame || frame <= self.enter_frame {
            return self.enter_dist;
        }
        if frame >= self.leave_frame {
            return self.leave_dist;
        }
        let frac = (frame - self.enter_frame) as f64 / (self.leave_frame - self.enter_frame) as f64;
        self.enter_dist + frac * (self.leave_dist - self.enter_dist)
    }

    /// Re-materialization point at `frame` on `route`.
    pub fn position_at(&self, frame: u64, route: &Path) -> Vec2 {
        if frame <= self.enter_frame {
            return self.enter_pos;
        }
        if frame >= self.leave_frame {
            return self.leave_pos;
        }
        route.point_at_distance(self.distance_at(frame))
    }
}

/// Maximal runs of the route inside single fog cells, as
/// `(cell, enter_dist, leave_dist)`.
pub fn cell_visits(fog: &FogGrid, route: &Path) -> Vec<(usize, f64, f64)> {
    let pts = route.waypoints();
    let cum = route.cumulative_length();
    let mut visits: Vec<(usize, f64, f64)> = Vec::new();
    let mut push = |cell: usize, from: f64, to: f64| match visits.last_mut() {
        Some(last) if last.0 == cell => last.2 = to,
        _ => visits.push((cell, from, to)),
    };
    if pts.len() == 1 {
        if let Some(c) = fog.cell_of(pts[0]) {
            push(c, 0.0, 0.0);
        }
        return visits;
    }
    let h = fog.cell_size;
    for (i, seg) in pts.windows(2).enumerate() {
        let (a, b) = (seg[0], seg[1]);
        let len = cum[i + 1] - cum[i];
        let mut ts = vec![0.0, 1.0];
        for (a0, b0) in [(a.x, b.x), (a.y, b.y)] {
            if a0 == b0 {
                continue;
            }
            let (lo, hi) = (a0.min(b0), a0.max(b0));
            let mut k = (lo / h).floor() + 1.0;
            while k * h < hi {
                ts.push((k * h - a0) / (b0 - a0));
                k += 1.0;
            }
        }
        ts.sort_by(f64::total_cmp);
        for w in ts.windows(2) {
            if w[1] - w[0] <= 0.0 {
                continue;
            }
            let mid = a.lerp(b, 0.5 * (w[0] + w[1]));
            if let Some(cell) = fog.cell_of(mid) {
                push(cell, cum[i] + w[0] * len, cum[i] + w[1] * len);
            }
        }
    }
    visits
}

/// One callback per fog-cell visit along `route`, timed by walking it at
/// `speed_estimate` m/s from `current_frame`.
pub fn register_callbacks(
    agent_id: usize,
    route: &Path,
    speed_estimate: f64,
    current_frame: u64,
    frame_dt: f64,
    fog: &FogGrid,
) -> Vec<Callback> {
    let meters_per_frame = speed_estimate * frame_dt;
    let to_frame = |d: f64| -> u64 {
        if meters_per_frame > 0.0 {
            current_frame + (d / meters_per_frame).round() as u64
        } else if d > 0.0 {
            u64::MAX
        } else {
            current_frame
        }
    };
    cell_visits(fog, route)
        .into_iter()
        .map(|(cell, d0, d1)| Callback {
            agent_id,
            fog_cell: cell,
            enter_frame: to_frame(d0),
            leave_frame: to_frame(d1),
            enter_pos: route.point_at_distance(d0),
            leave_pos: route.point_at_distance(d1),
            enter_dist: d0,
            leave_dist: d1,
            active: true,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FogEventKind {
    Suspend,
    Activate,
    Finalize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FogEvent {
    pub frame: u64,
    pub agent_id: usize,
    pub event: FogEventKind,
    pub x: f64,
    pub y: f64,
    pub fog_cell: Option<usize>,
}

pub fn write_fog_csv<W: Write>(events: &[FogEvent], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if events.is_empty() {
        w.write_record(["frame", "agent_id", "event", "x", "y", "fog_cell"])?;
    }
    for e in events {
        w.serialize(e)?;
    }
    w.flush()?;
    Ok(())
}

/// Suspension bookkeeping of one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Suspension {
    pub since: u64,
    pub route: Path,
    pub speed_estimate: f64,
    pub callbacks: Vec<Callback>,
    /// Arc length where the agent is placed if the target frame arrives
    /// first.
    pub final_dist: f64,
}

impl Suspension {
    pub fn final_position(&self) -> Vec2 {
        self.route.point_at_distance(self.final_dist)
    }
}

/// Fog state owned by the simulation loop.
#[derive(Debug, Clone)]
pub struct FogWorld {
    pub fog: FogGrid,
    pub sources: Vec<VisionSource>,
    pub request: JumpRequest,
    pub ip: IpParams,
    pub suspensions: Vec<Option<Suspension>>,
    pub events: Vec<FogEvent>,
}

impl FogWorld {
    pub fn new(state: &SimState, spec: &FogSpec, request: JumpRequest) -> Self {
        let mut fog = build_fog(&state.grid, spec.subdivision);
        update_visibility(&mut fog, &spec.sources);
        FogWorld {
            fog,
            sources: spec.sources.clone(),
            request,
            ip: IpParams::from(&state.scenario.ff),
            suspensions: vec![None; state.agents.len()],
            events: Vec::new(),
        }
    }

    fn log(&mut self, frame: u64, agent_id: usize, event: FogEventKind, p: Vec2) {
        let fog_cell = self.fog.cell_of(p);
        self.events.push(FogEvent {
            frame,
            agent_id,
            event,
            x: p.x,
            y: p.y,
            fog_cell,
        });
    }
}

fn suspend(state: &mut SimState, world: &mut FogWorld, id: usize) {
    let Ok(route) = state.current_path(id) else {
        return;
    };
    let agent = &state.agents[id];
    let speed_estimate = ffa::reckoning_speed(agent) * ffa::ip_factor(agent, &state.agents, &world.ip);
    let remaining = world.request.target_frame.saturating_sub(state.frame);
    let final_dist = speed_estimate * (remaining as f64 * state.frame_dt());
    let callbacks = register_callbacks(
        id,
        &route,
        speed_estimate,
        state.frame,
        state.frame_dt(),
        &world.fog,
    );
    let at = agent.position;
    state.agents[id].state = AgentState::Suspended;
    world.suspensions[id] = Some(Suspension {
        since: state.frame,
        route,
        speed_estimate,
        callbacks,
        final_dist,
    });
    world.log(state.frame, id, FogEventKind::Suspend, at);
}

fn resume(state: &mut SimState, id: usize, route: &Path, dist: f64) -> Vec2 {
    let d = dist.min(route.total_length());
    let p = route.point_at_distance(d);
    let agent = &mut state.agents[id];
    agent.position = p;
    agent.path = route.suffix_from(d);
    agent.state = if p.distance(agent.goal) < ARRIVAL_RADIUS {
        AgentState::Arrived
    } else {
        AgentState::Active
    };
    p
}

/// One frame of the fogged simulation: suspend hidden agents, activate or
/// finalize suspended ones, then step the engine.
pub fn fog_step(state: &mut SimState, world: &mut FogWorld) {
    update_visibility(&mut world.fog, &world.sources);
    let frame = state.frame;
    let in_window = frame >= world.request.stop_frame && frame < world.request.target_frame;
    for id in 0..state.agents.len() {
        match state.agents[id].state {
            AgentState::Active => {
                if in_window && !world.fog.is_visible_at(state.agents[id].position) {
                    suspend(state, world, id);
                }
            }
            AgentState::Suspended => {
                let Some(mut susp) = world.suspensions[id].take() else {
                    continue;
                };
                if frame >= world.request.target_frame {
                    let p = resume(state, id, &susp.route, susp.final_dist);
                    world.log(frame, id, FogEventKind::Finalize, p);
                    continue;
                }
                let hit = susp
                    .callbacks
                    .iter()
                    .find(|cb| cb.active && cb.covers(frame) && world.fog.is_visible(cb.fog_cell))
                    .cloned();
                match hit {
                    Some(cb) => {
                        susp.callbacks.iter_mut().for_each(|c| c.active = false);
                        let p = resume(state, id, &susp.route, cb.distance_at(frame));
                        world.log(frame, id, FogEventKind::Activate, p);
                    }
                    None => world.suspensions[id] = Some(susp),
                }
            }
            AgentState::Arrived => {}
        }
    }
    engine::step(state);
}

/// Plain simulation up to the stop frame, then fogged frames until all
/// agents arrive or the frame limit is hit.
pub fn run_fogged(state: &mut SimState, world: &mut FogWorld) -> Termination {
    let stop = world.request.stop_frame;
    engine::run_continuous(state, |s| s.frame >= stop || s.all_arrived());
    let limit = state.scenario.world.max_frames;
    loop {
        let pending = world.suspensions.iter().any(Option::is_some);
        if state.all_arrived() && !pending {
            return Termination::Satisfied;
        }
        if state.frame >= limit {
            return Termination::FrameLimit;
        }
        fog_step(state, world);
    }
}
