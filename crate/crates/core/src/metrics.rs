//! Comparison quantities between continuous and fast-forwarded runs, and
//! summary statistics of a trajectory.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::engine::Trajectory;
use crate::geom::Vec2;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("position sets cover different agents")]
    MismatchedAgents,
    #[error("no agents to compare")]
    Empty,
    #[error("agent {agent} did not move between the stop and target frames")]
    DegenerateDenominator { agent: usize },
}

/// Mean Euclidean distance between matched agent positions.
pub fn avg_error(bc: &[(usize, Vec2)], ffa: &[(usize, Vec2)]) -> Result<f64, MetricsError> {
    if bc.len() != ffa.len() {
        return Err(MetricsError::MismatchedAgents);
    }
    if bc.is_empty() {
        return Err(MetricsError::Empty);
    }
    let ffa: BTreeMap<usize, Vec2> = ffa.iter().copied().collect();
    if ffa.len() != bc.len() {
        return Err(MetricsError::MismatchedAgents);
    }
    let mut sum = 0.0;
    for (id, p) in bc {
        let q = ffa.get(id).ok_or(MetricsError::MismatchedAgents)?;
        sum += p.distance(*q);
    }
    Ok(sum / bc.len() as f64)
}

/// Continuous travel below this, in meters, counts as standing still. Jammed
/// agents jitter by micrometers, which would otherwise blow up the ratio.
pub const STATIONARY_TOLERANCE: f64 = 0.01;

/// Fast-forward displacement error relative to how far the continuous
/// agent actually traveled over the skipped window. `None` for agents that
/// stood still.
pub fn relative_dif(bc_t: Vec2, bc_target: Vec2, ffa_target: Vec2) -> Option<f64> {
    let traveled = bc_t.distance(bc_target);
    (traveled >= STATIONARY_TOLERANCE).then(|| bc_target.distance(ffa_target) / traveled)
}

/// Agent-averaged relative error of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct DifSummary {
    /// `None` when every agent was excluded.
    pub mean: Option<f64>,
    /// Agents that stood still in the continuous run.
    pub excluded: Vec<usize>,
}

/// Mean relative error over agents, skipping stationary ones.
/// Each entry is `(agent, bc_t, bc_target, ffa_target)`.
pub fn mean_dif(entries: &[(usize, Vec2, Vec2, Vec2)]) -> DifSummary {
    let mut sum = 0.0;
    let mut n = 0usize;
    let mut excluded = Vec::new();
    for &(id, t, target, ffa) in entries {
        match relative_dif(t, target, ffa) {
            Some(d) => {
                sum += d;
                n += 1;
            }
            None => excluded.push(id),
        }
    }
    DifSummary {
        mean: (n > 0).then(|| sum / n as f64),
        excluded,
    }
}

/// Per-agent check used by callers that prefer an error.
pub fn relative_dif_checked(
    agent: usize,
    bc_t: Vec2,
    bc_target: Vec2,
    ffa_target: Vec2,
) -> Result<f64, MetricsError> {
    relative_dif(bc_t, bc_target, ffa_target).ok_or(MetricsError::DegenerateDenominator { agent })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    /// Simulated seconds until the run stopped.
    pub total_time: f64,
    /// Mean speed of moving agents, m/s.
    pub avg_speed: f64,
    /// Mean absolute per-frame heading change, degrees.
    pub avg_ang_var: f64,
    /// Mean same-group pairwise distance; absent without any pair.
    pub avg_dist: Option<f64>,
    pub frames_simulated: u64,
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut a = a % two_pi;
    if a > std::f64::consts::PI {
        a -= two_pi;
    } else if a < -std::f64::consts::PI {
        a += two_pi;
    }
    a
}

pub fn simulation_stats(trajectory: &Trajectory) -> RunStats {
    let mut speed_sum = 0.0;
    let mut speed_n = 0usize;
    for r in &trajectory.records {
        if r.speed > 0.0 {
            speed_sum += r.speed;
            speed_n += 1;
        }
    }

    // per agent: last (frame, position, heading)
    let mut last: BTreeMap<usize, (u64, Vec2, Option<f64>)> = BTreeMap::new();
    let mut ang_sum = 0.0;
    let mut ang_n = 0usize;
    for r in &trajectory.records {
        let p = Vec2::new(r.x, r.y);
        let entry = last.get(&r.agent_id).copied();
        let mut heading = None;
        if let Some((frame, prev, prev_heading)) = entry {
            if r.frame == frame + 1 {
                let d = p - prev;
                if d.norm_sq() > 0.0 {
                    heading = Some(d.heading());
                    if let Some(h0) = prev_heading {
                        ang_sum += wrap_angle(d.heading() - h0).abs().to_degrees();
                        ang_n += 1;
                    }
                }
            }
        }
        last.insert(r.agent_id, (r.frame, p, heading));
    }

    let mut by_frame: BTreeMap<u64, Vec<(usize, Vec2)>> = BTreeMap::new();
    for r in &trajectory.records {
        let group = trajectory.agent_groups.get(r.agent_id).copied().unwrap_or(0);
        by_frame
            .entry(r.frame)
            .or_default()
            .push((group, Vec2::new(r.x, r.y)));
    }
    let mut dist_sum = 0.0;
    let mut dist_frames = 0usize;
    for agents in by_frame.values() {
        let mut pair_sum = 0.0;
        let mut pairs = 0usize;
        for (i, (gi, pi)) in agents.iter().enumerate() {
            for (gj, pj) in &agents[i + 1..] {
                if gi == gj {
                    pair_sum += pi.distance(*pj);
                    pairs += 1;
                }
            }
        }
        if pairs > 0 {
            dist_sum += pair_sum / pairs as f64;
            dist_frames += 1;
        }
    }

    RunStats {
        total_time: trajectory.final_frame as f64 * trajectory.frame_dt,
        avg_speed: if speed_n > 0 { speed_sum / speed_n as f64 } else { 0.0 },
        avg_ang_var: if ang_n > 0 { ang_sum / ang_n as f64 } else { 0.0 },
        avg_dist: (dist_frames > 0).then(|| dist_sum / dist_frames as f64),
        frames_simulated: trajectory.steps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{AgentState, TrajectoryRecord};

    fn rec(frame: u64, agent_id: usize, x: f64, y: f64, speed: f64) -> TrajectoryRecord {
        TrajectoryRecord {
            frame,
            agent_id,
            x,
            y,
            speed,
            state: AgentState::Active,
        }
    }

    #[test]
    fn error_values() {
        let a = [(0, Vec2::new(0.0, 0.0)), (1, Vec2::new(5.0, 5.0))];
        assert_eq!(avg_error(&a, &a).unwrap(), 0.0);
        let b = [(1, Vec2::new(5.0, 8.0)), (0, Vec2::new(1.0, 0.0))];
        assert_eq!(avg_error(&a, &b).unwrap(), 2.0);
        let c = [(0, Vec2::ZERO), (2, Vec2::ZERO)];
        assert_eq!(avg_error(&a, &c), Err(MetricsError::MismatchedAgents));
        assert_eq!(avg_error(&a, &a[..1]), Err(MetricsError::MismatchedAgents));
    }

    #[test]
    fn dif_values() {
        let t = Vec2::ZERO;
        let target = Vec2::new(10.0, 0.0);
        assert_eq!(relative_dif(t, target, target), Some(0.0));
        assert_eq!(relative_dif(t, target, Vec2::new(10.0, 1.0)), Some(0.1));
        assert_eq!(relative_dif(t, target, Vec2::new(25.0, 0.0)), Some(1.5));
        assert_eq!(relative_dif(t, t, target), None);
    assert_eq!(relative_dif(t, Vec2::new(0.005, 0.0), target), None);
        assert_eq!(
            relative_dif_checked(4, t, t, target),
            Err(MetricsError::DegenerateDenominator { agent: 4 })
        );
    }

    #[test]
    fn dif_mean_excludes_stationary() {
        let s = mean_dif(&[
            (0, Vec2::ZERO, Vec2::new(10.0, 0.0), Vec2::new(10.0, 1.0)),
            (1, Vec2::ZERO, Vec2::ZERO, Vec2::new(3.0, 0.0)),
            (2, Vec2::ZERO, Vec2::new(0.0, 4.0), Vec2::new(0.0, 5.0)),
        ]);
        assert_eq!(s.excluded, vec![1]);
        assert!((s.mean.unwrap() - 0.175).abs() < 1e-12);
    }

    #[test]
    fn stationary_agent_stats() {
        let tr = Trajectory {
            frame_dt: 0.02,
            agent_groups: vec![0],
            records: (1..=10).map(|f| rec(f, 0, 3.0, 3.0, 0.0)).collect(),
            final_frame: 10,
            steps: 10,
        };
        let s = simulation_stats(&tr);
        assert_eq!(s.avg_speed, 0.0);
        assert_eq!(s.avg_ang_var, 0.0);
        assert_eq!(s.avg_dist, None);
        assert!((s.total_time - 0.2).abs() < 1e-12);
    }

    #[test]
    fn straight_mover_stats() {
        let tr = Trajectory {
            frame_dt: 0.02,
            agent_groups: vec![0],
            records: (1..=50)
                .map(|f| rec(f, 0, 0.03 * f as f64, 1.0, 1.5))
                .collect(),
            final_frame: 50,
            steps: 50,
        };
        let s = simulation_stats(&tr);
        assert_eq!(s.avg_speed, 1.5);
        assert!(s.avg_ang_var.abs() < 1e-9);
        assert_eq!(s.frames_simulated, 50);
    }

    #[test]
    fn same_group_distance_only() {
        let tr = Trajectory {
            frame_dt: 0.02,
            agent_groups: vec![0, 0, 1],
            records: vec![
                rec(1, 0, 0.0, 0.0, 1.0),
                rec(1, 1, 3.0, 4.0, 1.0),
                rec(1, 2, 100.0, 0.0, 1.0),
                rec(2, 0, 0.0, 0.0, 1.0),
                rec(2, 1, 0.0, 1.0, 1.0),
            ],
            final_frame: 2,
            steps: 2,
        };
        assert_eq!(simulation_stats(&tr).avg_dist, Some(3.0));
    }

    #[test]
    fn right_angle_turn() {
        let tr = Trajectory {
            frame_dt: 1.0,
            agent_groups: vec![0],
            records: vec![
                rec(1, 0, 1.0, 0.0, 1.0),
                rec(2, 0, 2.0, 0.0, 1.0),
                rec(3, 0, 2.0, 1.0, 1.0),
            ],
            final_frame: 3,
            steps: 3,
        };
        assert!((simulation_stats(&tr).avg_ang_var - 90.0).abs() < 1e-9);
    }
}
