//! Crowd simulation with marker-based steering, a fast-forward jump that
//! skips ahead without stepping, OCEAN-driven group behavior and
//! fog-of-war suspension.

pub mod engine;
pub mod ffa;
pub mod fog;
pub mod geom;
pub mod harness;
pub mod metrics;
pub mod pathplan;
pub mod personality;
pub mod presets;
pub mod scenario;

pub use engine::{step, SimState};
pub use ffa::{fast_forward, JumpRequest};
pub use geom::Vec2;
pub use scenario::{parse_scenario, Scenario};
