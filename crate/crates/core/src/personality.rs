//! OCEAN personality layer: individual behaviors, group features, leader
//! election, and the coupling of those features into agent parameters.

use rand::Rng;
use thiserror::Error;

use crate::engine::{SimState, DEFAULT_MAX_SPEED, DEFAULT_PERSONAL_RADIUS};
use crate::scenario::OceanVector;

/// Weight of extraversion against emotional stability in leadership.
pub const LEADERSHIP_WEIGHT: f64 = 0.5;
/// Weight of the extraversion term in impatience.
pub const IMPATIENCE_EXTRAVERSION_WEIGHT: f64 = 0.1;
/// Weight of each of the agreeableness and conscientiousness terms.
pub const IMPATIENCE_AC_WEIGHT: f64 = 0.45;
/// Minimum leadership for a member to be eligible as group leader.
pub const LEADER_THRESHOLD: f64 = 0.9;
pub const MAX_COHESION: f64 = 3.0;
pub const MAX_DESIRED_SPEED: f64 = 1.2;

#[derive(Debug, Error, PartialEq)]
pub enum PersonalityError {
    #[error("a group needs at least one member")]
    EmptyGroup,
}

/// Behaviors derived from one agent's OCEAN vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Behaviors {
    /// Walking speed factor in `[1, 2]`.
    pub walking_speed: f64,
    /// Leadership in `[0, 1]`.
    pub leadership: f64,
    /// Impatience in `[0, 1]`.
    pub impatience: f64,
}

impl Behaviors {
    pub fn from_ocean(ocean: &OceanVector) -> Self {
        Behaviors {
            walking_speed: walking_speed(ocean),
            leadership: leadership(ocean),
            impatience: impatience(ocean),
        }
    }
}

pub fn walking_speed(ocean: &OceanVector) -> f64 {
    ocean.e + 1.0
}

pub fn leadership(ocean: &OceanVector) -> f64 {
    LEADERSHIP_WEIGHT * ocean.e + (1.0 - LEADERSHIP_WEIGHT) * (1.0 - ocean.n)
}

/// Extraversion term of impatience: zero below the midpoint, then linear.
pub fn extraversion_term(e: f64) -> f64 {
    if e >= 0.5 {
        2.0 * e - 1.0
    } else {
        0.0
    }
}

pub fn impatience(ocean: &OceanVector) -> f64 {
    IMPATIENCE_EXTRAVERSION_WEIGHT * extraversion_term(ocean.e)
        + IMPATIENCE_AC_WEIGHT * (1.0 - ocean.a)
        + IMPATIENCE_AC_WEIGHT * (1.0 - ocean.c)
}

pub fn cohesion(impatience: f64) -> f64 {
    (1.0 - impatience) * MAX_COHESION
}

pub fn desired_speed(walking_speed: f64) -> f64 {
    MAX_DESIRED_SPEED * (walking_speed - 1.0)
}

/// Marker reach of a member given its group's cohesion, in `[0.4, 1.0]` m.
/// Cohesive groups keep less personal space, so members pack closer.
pub fn personal_radius_for(cohesion: f64) -> f64 {
    0.4 + 0.2 * (MAX_COHESION - cohesion)
}

/// Features shared by every member of a group.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupProfile {
    /// Cohesion in `[0, 3]`.
    pub cohesion: f64,
    /// Desired speed in m/s, `[0, 1.2]`.
    pub desired_speed: f64,
    /// Index into the member list of the elected leader.
    pub leader: Option<usize>,
    /// Behaviors the group adopted (leader's, or the member mean).
    pub behaviors: Behaviors,
}

impl GroupProfile {
    pub fn personal_radius(&self) -> f64 {
        personal_radius_for(self.cohesion)
    }
}

/// Elects a leader among members at or above the threshold (uniformly at
/// random when several qualify) and derives the group features.
pub fn group_features<R: Rng + ?Sized>(
    members: &[Behaviors],
    rng: &mut R,
) -> Result<GroupProfile, PersonalityError> {
    if members.is_empty() {
        return Err(PersonalityError::EmptyGroup);
    }
    let qualifiers: Vec<usize> = members
        .iter()
        .enumerate()
        .filter(|(_, b)| b.leadership >= LEADER_THRESHOLD)
        .map(|(i, _)| i)
        .collect();
    let leader = match qualifiers.len() {
        0 => None,
        1 => Some(qualifiers[0]),
        n => Some(qualifiers[rng.random_range(0..n)]),
    };
    let behaviors = match leader {
        Some(i) => members[i],
        None => {
            let n = members.len() as f64;
            Behaviors {
                walking_speed: members.iter().map(|b| b.walking_speed).sum::<f64>() / n,
                leadership: members.iter().map(|b| b.leadership).sum::<f64>() / n,
                impatience: members.iter().map(|b| b.impatience).sum::<f64>() / n,
            }
        }
    };
    Ok(GroupProfile {
        cohesion: cohesion(behaviors.impatience),
        desired_speed: desired_speed(behaviors.walking_speed),
        leader,
        behaviors,
    })
}

/// Writes each member's max speed and personal radius from its group
/// profile. Groups without a profile keep the engine defaults. Idempotent.
pub fn apply_features(state: &mut SimState) {
    for agent in &mut state.agents {
        match &state.profiles[agent.group] {
            Some(profile) => {
                agent.max_speed = profile.desired_speed;
                agent.personal_radius = profile.personal_radius();
            }
            None => {
                agent.max_speed = DEFAULT_MAX_SPEED;
                agent.personal_radius = DEFAULT_PERSONAL_RADIUS;
            }
        }
    }
}
