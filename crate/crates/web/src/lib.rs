//! Browser bindings: step a preset crowd, fast-forward it, and evaluate the
//! crowding penalty and personality formulas.

use std::sync::Arc;

use crowdff::engine::{self, AgentState, SimState};
use crowdff::ffa::{self, JumpRequest};
use crowdff::personality::{self, Behaviors};
use crowdff::presets;
use crowdff::scenario::OceanVector;
use wasm_bindgen::prelude::*;

#[wasm_bindgen]
pub struct DemoSim {
    state: SimState,
}

#[wasm_bindgen]
impl DemoSim {
    /// Loads a built-in preset by name.
    #[wasm_bindgen(constructor)]
    pub fn new(preset: &str, seed: u64) -> Result<DemoSim, JsError> {
        let (_, scenario) = presets::presets()
            .into_iter()
            .find(|(n, _)| n == preset)
            .ok_or_else(|| JsError::new(&format!("unknown preset {preset}")))?;
        let state = SimState::with_seed(Arc::new(scenario), seed)
            .map_err(|e| JsError::new(&e.to_string()))?;
        Ok(DemoSim { state })
    }

    pub fn preset_names() -> Vec<String> {
        presets::presets().into_iter().map(|(n, _)| n).collect()
    }

    pub fn width(&self) -> f64 {
        self.state.scenario.world.width
    }

    pub fn height(&self) -> f64 {
        self.state.scenario.world.height
    }

    pub fn frame(&self) -> u64 {
        self.state.frame
    }

    pub fn frame_dt(&self) -> f64 {
        self.state.frame_dt()
    }

    pub fn all_arrived(&self) -> bool {
        self.state.all_arrived()
    }

    /// Advances `frames` frames, stopping early once everyone arrived.
    pub fn step(&mut self, frames: u32) {
        for _ in 0..frames {
            if self.state.all_arrived() {
                break;
            }
            engine::step(&mut self.state);
        }
    }

    /// Jumps `frames` frames ahead without stepping. Returns the mean
    /// crowding multiplier applied.
    pub fn fast_forward(&mut self, frames: u32) -> Result<f64, JsError> {
        let stop = self.state.frame;
        let records = ffa::fast_forward(&mut self.state, JumpRequest::new(stop, stop + frames as u64))
            .map_err(|e| JsError::new(&e.to_string()))?;
        if records.is_empty() {
            return Ok(1.0);
        }
        Ok(records.iter().map(|r| r.ip_multiplier).sum::<f64>() / records.len() as f64)
    }

    /// Flat `[x, y, group, arrived]` quadruples, one per agent.
    pub fn agents(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.state.agents.len() * 4);
        for a in &self.state.agents {
            out.extend([
                a.position.x,
                a.position.y,
                a.group as f64,
                if a.state == AgentState::Arrived { 1.0 } else { 0.0 },
            ]);
        }
        out
    }

    /// Obstacle outlines as `[n, x1, y1, ..., xn, yn]` runs.
    pub fn obstacles(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for o in &self.state.scenario.obstacles {
            out.push(o.polygon.len() as f64);
            out.extend(o.polygon.iter().flat_map(|v| [v.x, v.y]));
        }
        out
    }

    /// Flat `[x, y]` goal positions.
    pub fn goals(&self) -> Vec<f64> {
        self.state
            .scenario
            .goals
            .iter()
            .flat_map(|g| [g.x, g.y])
            .collect()
    }
}

/// Crowding multiplier sampled at `samples` densities from 0 to `max_density`
/// agents per m^2.
#[wasm_bindgen]
pub fn ip_curve(shape: f64, scale: f64, max_density: f64, samples: u32) -> Vec<f64> {
    let n = samples.max(2);
    (0..n)
        .map(|i| {
            let rho = max_density * i as f64 / (n - 1) as f64;
            ffa::weibull_survival(rho, shape, scale)
        })
        .collect()
}

/// `[walking speed, leadership, impatience, cohesion, desired speed,
/// personal radius]` of a group whose members all share the given traits.
#[wasm_bindgen]
pub fn ocean_profile(o: f64, c: f64, e: f64, a: f64, n: f64) -> Result<Vec<f64>, JsError> {
    let ocean = OceanVector::new(o, c, e, a, n);
    if !ocean.is_valid() {
        return Err(JsError::new("traits must lie in [0, 1]"));
    }
    let b = Behaviors::from_ocean(&ocean);
    let cohesion = personality::cohesion(b.impatience);
    Ok(vec![
        b.walking_speed,
        b.leadership,
        b.impatience,
        cohesion,
        personality::desired_speed(b.walking_speed),
        personality::personal_radius_for(cohesion),
    ])
}
