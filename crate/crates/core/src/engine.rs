//! Frame-by-frame marker-competition crowd simulation.
//!
//! Markers are scattered once over the free cells. Every frame each active
//! agent claims the markers in its personal radius that are closer to it
//! than to any other agent, and walks along the goal-weighted mean of the
//! vectors to its claimed markers.

use std::io::Write;
use std::sync::Arc;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::geom::{Rect, Vec2};
use crate::pathplan::{plan_path, Path, PathError};
use crate::personality::{self, Behaviors, GroupProfile};
use crate::scenario::{build_grid, Grid, Scenario};

pub const DEFAULT_MAX_SPEED: f64 = 1.5;
pub const DEFAULT_PERSONAL_RADIUS: f64 = 1.0;
pub const ARRIVAL_RADIUS: f64 = 0.5;
pub const WAYPOINT_RADIUS: f64 = 0.5;
const SPAWN_ATTEMPTS: usize = 10_000;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("could not find a free spawn position for group {group}")]
    SpawnFailed { group: usize },
    #[error("path planning failed for agent {agent}: {source}")]
    Path {
        agent: usize,
        #[source]
        source: PathError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AgentState {
    Active,
    Suspended,
    Arrived,
}

impl AgentState {
    pub fn as_str(self) -> &'static str {
        match self {
            AgentState::Active => "active",
            AgentState::Suspended => "suspended",
            AgentState::Arrived => "arrived",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub id: usize,
    pub group: usize,
    pub goal_id: String,
    pub goal: Vec2,
    pub position: Vec2,
    /// Velocity of the last step, m/s.
    pub velocity: Vec2,
    pub max_speed: f64,
    pub personal_radius: f64,
    /// Remaining route; the first waypoint is the last one reached (or the
    /// point the path was planned from) and the second is the steering
    /// target.
    pub path: Path,
    pub state: AgentState,
}

impl Agent {
    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }

    /// Point the agent currently steers to.
    pub fn next_waypoint(&self) -> Vec2 {
        let w = self.path.waypoints();
        if w.len() >= 2 {
            w[1]
        } else {
            w[0]
        }
    }

    pub fn is_active(&self) -> bool {
        self.state == AgentState::Active
    }
}

/// Static markers plus the per-frame ownership map.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkerField {
    pub markers: Vec<Vec2>,
    /// Marker indices bucketed by grid cell index.
    buckets: Vec<Vec<u32>>,
    cell_size: f64,
    cols: usize,
    rows: usize,
    /// Owner agent id of each marker in the current frame.
    pub owner: Vec<Option<usize>>,
}

impl MarkerField {
    pub fn len(&self) -> usize {
        self.markers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.markers.is_empty()
    }

    /// Indices of markers in cells overlapping the square around `center`.
    fn candidates(&self, center: Vec2, radius: f64) -> impl Iterator<Item = usize> + '_ {
        let lo_c = ((center.x - radius) / self.cell_size).floor().max(0.0) as usize;
        let lo_r = ((center.y - radius) / self.cell_size).floor().max(0.0) as usize;
        let hi_c = (((center.x + radius) / self.cell_size).floor().max(0.0) as usize).min(self.cols - 1);
        let hi_r = (((center.y + radius) / self.cell_size).floor().max(0.0) as usize).min(self.rows - 1);
        (lo_r..=hi_r).flat_map(move |r| {
            (lo_c..=hi_c).flat_map(move |c| self.buckets[r * self.cols + c].iter().map(|&m| m as usize))
        })
    }

    /// True when a marker within `radius` of `center` on the `heading` side
    /// is owned by an agent other than `agent`.
    pub fn contested_ahead(&self, agent: usize, center: Vec2, heading: Vec2, radius: f64) -> bool {
        let r_sq = radius * radius;
        self.candidates(center, radius).any(|m| {
            let to = self.markers[m] - center;
            to.norm_sq() <= r_sq
                && to.dot(heading) > 0.0
                && self.owner[m].is_some_and(|o| o != agent)
        })
    }

    /// Markers owned by `agent` in the current ownership map.
    pub fn owned_by(&self, agent: usize) -> impl Iterator<Item = Vec2> + '_ {
        self.owner
            .iter()
            .zip(&self.markers)
            .filter(move |(o, _)| **o == Some(agent))
            .map(|(_, m)| *m)
    }
}

/// Fills every free cell with `round(density * area)` samples, where area is
/// the part of the cell inside the world. Samples are jittered over a
/// near-square subdivision of the cell so no large marker-free holes form.
pub fn scatter_markers<R: Rng + ?Sized>(grid: &Grid, density: f64, rng: &mut R) -> MarkerField {
    let world = Rect::new(0.0, 0.0, grid.width, grid.height);
    let mut markers = Vec::new();
    let mut buckets = vec![Vec::new(); grid.len()];
    for cell in grid.cells() {
        if grid.is_blocked(cell) {
            continue;
        }
        let Some(area) = grid.cell_rect(cell).intersection(&world) else {
            continue;
        };
        let count = (density * area.area()).round() as usize;
        if count == 0 {
            continue;
        }
        let bucket = &mut buckets[grid.index(cell)];
        // jittered strata: one sample in each of `count` sub-rectangles
        let sx = ((count as f64 * area.w / area.h).sqrt().ceil() as usize).clamp(1, count);
        let sy = count.div_ceil(sx);
        let (w, h) = (area.w / sx as f64, area.h / sy as f64);
        let mut strata = index::sample(rng, sx * sy, count).into_vec();
        strata.sort_unstable();
        for k in strata {
            let p = Vec2::new(
                area.x + ((k % sx) as f64 + rng.random::<f64>()) * w,
                area.y + ((k / sx) as f64 + rng.random::<f64>()) * h,
            );
            bucket.push(markers.len() as u32);
            markers.push(p);
        }
    }
    let owner = vec![None; markers.len()];
    MarkerField {
        markers,
        buckets,
        cell_size: grid.cell_size,
        cols: grid.cols,
        rows: grid.rows,
        owner,
    }
}

/// One row of the trajectory log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub frame: u64,
    pub agent_id: usize,
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    pub state: AgentState,
}

/// Per-frame positions of every agent that was simulated in that frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub frame_dt: f64,
    /// Group of each agent, indexed by agent id.
    pub agent_groups: Vec<usize>,
    pub records: Vec<TrajectoryRecord>,
    /// Frame counter when the run stopped.
    pub final_frame: u64,
    /// Number of engine steps actually executed.
    pub steps: u64,
}

impl Trajectory {
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(r)?;
        }
        if self.records.is_empty() {
            w.write_record(["frame", "agent_id", "x", "y", "speed", "state"])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Work done per agent; a suspended agent must not accumulate any.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AgentWork {
    pub marker_checks: u64,
    pub motion_updates: u64,
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub frame: u64,
    pub agents: Vec<Agent>,
    pub markers: MarkerField,
    pub grid: Arc<Grid>,
    pub scenario: Arc<Scenario>,
    pub rng: ChaCha8Rng,
    pub profiles: Vec<Option<GroupProfile>>,
    pub trajectory: Trajectory,
    pub work: Vec<AgentWork>,
}

/// Why [`run_continuous`] returned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    /// The stop predicate held.
    Satisfied,
    /// The scenario's frame limit was reached first.
    FrameLimit,
}

impl SimState {
    /// Builds the initial state with the scenario's own seed.
    pub fn new(scenario: Arc<Scenario>) -> Result<Self, EngineError> {
        let seed = scenario.world.seed;
        Self::with_seed(scenario, seed)
    }

    /// Builds the initial state: elect leaders, spawn agents, plan paths,
    /// scatter markers, apply personality features.
    pub fn with_seed(scenario: Arc<Scenario>, seed: u64) -> Result<Self, EngineError> {
        let grid = Arc::new(build_grid(&scenario));
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let mut profiles = Vec::with_capacity(scenario.groups.len());
        for g in &scenario.groups {
            let profile = match &g.ocean {
                Some(ocean) => {
                    let members = vec![Behaviors::from_ocean(ocean); g.count];
                    Some(
                        personality::group_features(&members, &mut rng)
                            .expect("validated groups are non-empty"),
                    )
                }
                None => None,
            };
            profiles.push(profile);
        }

        let mut agents = Vec::with_capacity(scenario.agent_count());
        for (gi, g) in scenario.groups.iter().enumerate() {
            let goal = scenario
                .goal(&g.goal)
                .expect("validated goal reference")
                .position();
            for _ in 0..g.count {
                let id = agents.len();
                let position = spawn_point(&scenario, &grid, &g.spawn, &mut rng)
                    .ok_or(EngineError::SpawnFailed { group: gi })?;
                let path = plan_path(&grid, position, goal)
                    .map_err(|source| EngineError::Path { agent: id, source })?;
                let state = if position.distance(goal) < ARRIVAL_RADIUS {
                    AgentState::Arrived
                } else {
                    AgentState::Active
                };
                agents.push(Agent {
                    id,
                    group: gi,
                    goal_id: g.goal.clone(),
                    goal,
                    position,
                    velocity: Vec2::ZERO,
                    max_speed: DEFAULT_MAX_SPEED,
                    personal_radius: DEFAULT_PERSONAL_RADIUS,
                    path,
                    state,
                });
            }
        }

        let markers = scatter_markers(&grid, scenario.world.marker_density, &mut rng);
        let trajectory = Trajectory {
            frame_dt: scenario.world.frame_dt,
            agent_groups: agents.iter().map(|a| a.group).collect(),
            ..Trajectory::default()
        };
        let work = vec![AgentWork::default(); agents.len()];
        let mut state = SimState {
            frame: 0,
            agents,
            markers,
            grid,
            scenario,
            rng,
            profiles,
            trajectory,
            work,
        };
        personality::apply_features(&mut state);
        Ok(state)
    }

    pub fn frame_dt(&self) -> f64 {
        self.scenario.world.frame_dt
    }

    pub fn all_arrived(&self) -> bool {
        self.agents.iter().all(|a| a.state == AgentState::Arrived)
    }

    pub fn positions(&self) -> Vec<Vec2> {
        self.agents.iter().map(|a| a.position).collect()
    }

    /// The agent's route from where it stands now. Replans when the straight
    /// hop to the next waypoint would cut through an obstacle.
    pub fn current_path(&self, agent: usize) -> Result<Path, PathError> {
        let a = &self.agents[agent];
        let rest = a.path.waypoints();
        let tail = if rest.len() >= 2 { &rest[1..] } else { rest };
        let hop_blocked = self
            .scenario
            .obstacles
            .iter()
            .any(|o| crate::geom::segment_enters_polygon(a.position, tail[0], &o.polygon));
        if hop_blocked {
            return plan_path(&self.grid, a.position, a.goal);
        }
        Path::new(std::iter::once(a.position).chain(tail.iter().copied()))
    }
}

fn spawn_point<R: Rng + ?Sized>(
    scenario: &Scenario,
    grid: &Grid,
    region: &Rect,
    rng: &mut R,
) -> Option<Vec2> {
    for _ in 0..SPAWN_ATTEMPTS {
        let p = Vec2::new(
            region.x + rng.random::<f64>() * region.w,
            region.y + rng.random::<f64>() * region.h,
        );
        let free_cell = grid.cell_of(p).is_some_and(|c| !grid.is_blocked(c));
        if free_cell && scenario.is_free(p) {
            return Some(p);
        }
    }
    None
}

/// Recomputes the ownership map: each marker inside some active agent's
/// personal radius goes to the nearest such agent, lower id on ties.
pub fn assign_markers(state: &mut SimState) {
    let field = &mut state.markers;
    let mut best = vec![f64::INFINITY; field.len()];
    field.owner.iter_mut().for_each(|o| *o = None);
    for agent in state.agents.iter().filter(|a| a.is_active()) {
        let r = agent.personal_radius;
        let r_sq = r * r;
        let mut checks = 0;
        let candidates: Vec<usize> = field.candidates(agent.position, r).collect();
        for m in candidates {
            checks += 1;
            let d = field.markers[m].distance_sq(agent.position);
            if d <= r_sq && d < best[m] {
                best[m] = d;
                field.owner[m] = Some(agent.id);
            }
        }
        state.work[agent.id].marker_checks += checks;
    }
}

/// Goal-weighted mean of the vectors to the owned markers, as a velocity
/// capped at the agent's maximum speed.
pub fn motion_vector(agent: &Agent, owned_markers: &[Vec2], frame_dt: f64) -> Vec2 {
    let x = agent.position;
    let Some(desired) = (agent.next_waypoint() - x).normalized() else {
        return Vec2::ZERO;
    };
    let mut weighted = Vec2::ZERO;
    let mut total = 0.0;
    for &a in owned_markers {
        let to_marker = a - x;
        let len = to_marker.norm();
        if len == 0.0 {
            continue;
        }
        let f = (to_marker.dot(desired) / len).max(0.0);
        weighted += to_marker * f;
        total += f;
    }
    if total <= 0.0 {
        return Vec2::ZERO;
    }
    let m = weighted * (1.0 / total);
    let Some(dir) = m.normalized() else {
        return Vec2::ZERO;
    };
    let speed = agent.max_speed.min(m.norm() / frame_dt);
    dir * speed
}

/// Advances the simulation by one frame.
pub fn step(state: &mut SimState) {
    assign_markers(state);
    let dt = state.frame_dt();

    let mut owned: Vec<Vec<Vec2>> = vec![Vec::new(); state.agents.len()];
    for (m, owner) in state.markers.owner.iter().enumerate() {
        if let Some(a) = owner {
            owned[*a].push(state.markers.markers[m]);
        }
    }

    let moving: Vec<usize> = state
        .agents
        .iter()
        .filter(|a| a.is_active())
        .map(|a| a.id)
        .collect();
    let velocities: Vec<Vec2> = moving
        .iter()
        .map(|&i| {
            let agent = &state.agents[i];
            let v = motion_vector(agent, &owned[i], dt);
            hole_crossing(agent, v, &state.markers, dt).unwrap_or(v)
        })
        .collect();

    state.frame += 1;
    state.trajectory.steps += 1;
    for (&i, &v) in moving.iter().zip(&velocities) {
        state.work[i].motion_updates += 1;
        let candidate = state.agents[i].position + v * dt;
        let agent = &mut state.agents[i];
        if state.scenario.is_free(candidate) {
            agent.position = candidate;
            agent.velocity = v;
        } else {
            agent.velocity = Vec2::ZERO;
        }
        trim_reached_waypoints(agent);
        if agent.position.distance(agent.goal) < ARRIVAL_RADIUS {
            agent.state = AgentState::Arrived;
        }
        state.trajectory.records.push(TrajectoryRecord {
            frame: state.frame,
            agent_id: i,
            x: agent.position.x,
            y: agent.position.y,
            speed: agent.velocity.norm(),
            state: agent.state,
        });
    }
    state.trajectory.final_frame = state.frame;
}

/// Progress toward the waypoint, as a fraction of top speed, below which an
/// uncontested agent is considered stuck on a gap in the markers.
const STUCK_PROGRESS: f64 = 0.1;

/// Straight walk toward the next waypoint for an agent whose own markers
/// barely move it forward, e.g. a hole in the field ahead or only markers
/// at right angles. Agents held back by neighbors' markers stay put.
fn hole_crossing(agent: &Agent, v: Vec2, field: &MarkerField, dt: f64) -> Option<Vec2> {
    let to_wp = agent.next_waypoint() - agent.position;
    let dir = to_wp.normalized()?;
    if v.dot(dir) >= STUCK_PROGRESS * agent.max_speed
        || field.contested_ahead(agent.id, agent.position, dir, agent.personal_radius)
    {
        return None;
    }
    Some(dir * agent.max_speed.min(to_wp.norm() / dt))
}

fn trim_reached_waypoints(agent: &mut Agent) {
    let mut reached = 0;
    let w = agent.path.waypoints();
    // never drop the final waypoint (the goal)
    while reached + 2 < w.len() && agent.position.distance(w[reached + 1]) < WAYPOINT_RADIUS {
        reached += 1;
    }
    agent.path.drop_front(reached);
}

/// Steps until `until` holds or the frame limit is hit.
pub fn run_continuous(
    state: &mut SimState,
    mut until: impl FnMut(&SimState) -> bool,
) -> Termination {
    let limit = state.scenario.world.max_frames;
    loop {
        if until(state) {
            return Termination::Satisfied;
        }
        if state.frame >= limit {
            return Termination::FrameLimit;
        }
        step(state);
    }
}

/// Runs until every agent has arrived.
pub fn run_to_completion(state: &mut SimState) -> Termination {
    run_continuous(state, SimState::all_arrived)
}
