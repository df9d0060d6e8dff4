//! Fast forward: jump agents from a stop frame to a target frame without
//! simulating the frames in between.
//!
//! Each agent's straight-line dead-reckoned displacement is penalized by a
//! crowding multiplier, and the resulting travel distance is laid along the
//! agent's planned route, so the new position respects obstacles.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::engine::{Agent, AgentState, SimState, ARRIVAL_RADIUS};
use crate::geom::Vec2;
use crate::pathplan::Path;
use crate::scenario::{
    FastForwardSpec, DEFAULT_IP_RADIUS, DEFAULT_WEIBULL_SCALE, DEFAULT_WEIBULL_SHAPE,
};

/// Radius of an agent's body for the repositioning overlap check.
pub const BODY_RADIUS: f64 = 0.3;
/// Backward step along the path while searching for a free spot.
pub const SLIDE_STEP: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum FfaError {
    #[error("simulation is at frame {actual}, jump starts at {expected}")]
    StopFrameMismatch { expected: u64, actual: u64 },
    #[error("target frame {target} precedes stop frame {stop}")]
    BackwardJump { stop: u64, target: u64 },
    #[error("agent {agent} has no route to its goal")]
    MissingPath { agent: usize },
}

/// Crowding penalty parameters: Weibull shape and scale over the neighbor
/// count, and the neighborhood radius in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IpParams {
    pub shape: f64,
    pub scale: f64,
    pub radius: f64,
}

impl Default for IpParams {
    fn default() -> Self {
        IpParams {
            shape: DEFAULT_WEIBULL_SHAPE,
            scale: DEFAULT_WEIBULL_SCALE,
            radius: DEFAULT_IP_RADIUS,
        }
    }
}

impl From<&FastForwardSpec> for IpParams {
    fn from(ff: &FastForwardSpec) -> Self {
        IpParams {
            shape: ff.weibull_k,
            scale: ff.weibull_lambda,
            radius: ff.ip_radius,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JumpRequest {
    pub stop_frame: u64,
    pub target_frame: u64,
}

impl JumpRequest {
    pub fn new(stop_frame: u64, target_frame: u64) -> Self {
        JumpRequest {
            stop_frame,
            target_frame,
        }
    }

    pub fn from_spec(ff: &FastForwardSpec) -> Self {
        JumpRequest::new(ff.stop_frame, ff.target_frame)
    }

    /// Number of skipped frames.
    pub fn span(&self) -> u64 {
        self.target_frame.saturating_sub(self.stop_frame)
    }
}

/// What happened to one agent during a jump.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpRecord {
    pub agent_id: usize,
    pub pos_t: Vec2,
    pub pdr_estimate: Vec2,
    pub ip_multiplier: f64,
    pub magnitude: f64,
    /// Arc length actually traveled along the route after the overlap slide.
    pub traveled: f64,
    pub pos_projected: Vec2,
    /// Route the projection was laid on.
    pub route: Path,
}

#[derive(Serialize)]
struct JumpRow {
    agent_id: usize,
    x_t: f64,
    y_t: f64,
    pdr_x: f64,
    pdr_y: f64,
    ip: f64,
    magnitude: f64,
    x_proj: f64,
    y_proj: f64,
}

/// Writes `agent_id,x_t,y_t,pdr_x,pdr_y,ip,magnitude,x_proj,y_proj`.
pub fn write_jump_csv<W: Write>(records: &[JumpRecord], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record([
            "agent_id", "x_t", "y_t", "pdr_x", "pdr_y", "ip", "magnitude", "x_proj", "y_proj",
        ])?;
    }
    for r in records {
        w.serialize(JumpRow {
            agent_id: r.agent_id,
            x_t: r.pos_t.x,
            y_t: r.pos_t.y,
            pdr_x: r.pdr_estimate.x,
            pdr_y: r.pdr_estimate.y,
            ip: r.ip_multiplier,
            magnitude: r.magnitude,
            x_proj: r.pos_projected.x,
            y_proj: r.pos_projected.y,
        })?;
    }
    w.flush()?;
    Ok(())
}

/// Speed used for dead reckoning: the current speed, or the maximum speed
/// for an agent standing still.
pub fn reckoning_speed(agent: &Agent) -> f64 {
    let s = agent.speed();
    if s > 0.0 {
        s
    } else {
        agent.max_speed
    }
}

/// Straight-line dead reckoning toward the final goal.
pub fn pdr_estimate(agent: &Agent, span_frames: u64, frame_dt: f64) -> Vec2 {
    let Some(dir) = (agent.goal - agent.position).normalized() else {
        return agent.position;
    };
    agent.position + dir * (reckoning_speed(agent) * span_frames as f64 * frame_dt)
}

/// Weibull survival function `exp(-(x / scale)^shape)`.
pub fn weibull_survival(x: f64, shape: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    (-(x / scale).powf(shape)).exp()
}

/// Number of other non-arrived agents within `radius` of `agent`.
pub fn neighbor_count(agent: &Agent, agents: &[Agent], radius: f64) -> usize {
    let r_sq = radius * radius;
    agents
        .iter()
        .filter(|o| o.id != agent.id && o.state != AgentState::Arrived)
        .filter(|o| o.position.distance_sq(agent.position) <= r_sq)
        .count()
}

/// Neighbors per square meter in the disc of `radius` around `agent`.
pub fn local_density(agent: &Agent, agents: &[Agent], radius: f64) -> f64 {
    neighbor_count(agent, agents, radius) as f64 / (std::f64::consts::PI * radius * radius)
}

/// Crowding multiplier in `(0, 1]`; exactly 1 without neighbors. The
/// Weibull scale is a density in agents per m^2, so the default of 6 sits
/// at pedestrian jam density.
pub fn ip_factor(agent: &Agent, agents_at_t: &[Agent], params: &IpParams) -> f64 {
    let rho = local_density(agent, agents_at_t, params.radius);
    weibull_survival(rho, params.shape, params.scale)
}

pub fn jump_magnitude(pos_t: Vec2, pdr_pos: Vec2, ip: f64) -> f64 {
    ip * pdr_pos.distance(pos_t)
}

fn overlaps(p: Vec2, placed: &[Vec2]) -> bool {
    let min_sq = (2.0 * BODY_RADIUS) * (2.0 * BODY_RADIUS);
    // bodies exactly touching do not overlap
    placed.iter().any(|q| q.distance_sq(p) < min_sq - 1e-9)
}

/// Arc length on `route` near `d` that keeps clear of `placed` bodies:
/// first sliding back in fixed steps, then forward if the whole prefix is
/// occupied. Falls back to `d` when nothing along the route is free.
fn free_distance(route: &Path, d: f64, placed: &[Vec2]) -> f64 {
    if !overlaps(route.point_at_distance(d), placed) {
        return d;
    }
    let mut k = 1.0;
    loop {
        let back = d - k * SLIDE_STEP;
        if back < 0.0 {
            break;
        }
        if !overlaps(route.point_at_distance(back), placed) {
            return back;
        }
        k += 1.0;
    }
    let total = route.total_length();
    let mut k = 1.0;
    loop {
        let fwd = d + k * SLIDE_STEP;
        if fwd > total {
            break;
        }
        if !overlaps(route.point_at_distance(fwd), placed) {
            return fwd;
        }
        k += 1.0;
    }
    d
}

/// Jumps every active agent from `request.stop_frame` to
/// `request.target_frame`. Agents are repositioned in ascending id order.
pub fn fast_forward(state: &mut SimState, request: JumpRequest) -> Result<Vec<JumpRecord>, FfaError> {
    fast_forward_with(state, request, &IpParams::from(&state.scenario.ff))
}

pub fn fast_forward_with(
    state: &mut SimState,
    request: JumpRequest,
    params: &IpParams,
) -> Result<Vec<JumpRecord>, FfaError> {
    if state.frame != request.stop_frame {
        return Err(FfaError::StopFrameMismatch {
            expected: request.stop_frame,
            actual: state.frame,
        });
    }
    if request.target_frame < request.stop_frame {
        return Err(FfaError::BackwardJump {
            stop: request.stop_frame,
            target: request.target_frame,
        });
    }
    let span = request.span();
    let dt = state.frame_dt();
    let snapshot = state.agents.clone();

    // Estimation only reads the snapshot.
    let mut plans = Vec::new();
    for agent in snapshot.iter().filter(|a| a.is_active()) {
        let route = state
            .current_path(agent.id)
            .map_err(|_| FfaError::MissingPath { agent: agent.id })?;
        let pdr = pdr_estimate(agent, span, dt);
        let ip = ip_factor(agent, &snapshot, params);
        let magnitude = jump_magnitude(agent.position, pdr, ip);
        plans.push((agent.id, route, pdr, ip, magnitude));
    }

    if span == 0 {
        return Ok(plans
            .into_iter()
            .map(|(id, route, pdr, ip, magnitude)| JumpRecord {
                agent_id: id,
                pos_t: snapshot[id].position,
                pdr_estimate: pdr,
                ip_multiplier: ip,
                magnitude,
                traveled: 0.0,
                pos_projected: snapshot[id].position,
                route,
            })
            .collect());
    }

    let mut placed: Vec<Vec2> = Vec::with_capacity(plans.len());
    let mut records = Vec::with_capacity(plans.len());
    for (id, route, pdr, ip, magnitude) in plans {
        let wanted = magnitude.min(route.total_length());
        let traveled = free_distance(&route, wanted, &placed);
        let projected = route.point_at_distance(traveled);
        placed.push(projected);

        let agent = &mut state.agents[id];
        agent.position = projected;
        agent.path = route.suffix_from(traveled);
        if projected.distance(agent.goal) < ARRIVAL_RADIUS {
            agent.state = AgentState::Arrived;
        }
        records.push(JumpRecord {
            agent_id: id,
            pos_t: snapshot[id].position,
            pdr_estimate: pdr,
            ip_multiplier: ip,
            magnitude,
            traveled,
            pos_projected: projected,
            route,
        });
    }
    state.frame = request.target_frame;
    state.trajectory.final_frame = state.frame;
    Ok(records)
}
