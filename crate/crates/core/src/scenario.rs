//! World description: the scenario file format, its validation, and the
//! discretization of the world into the planning/marker grid.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fog::VisionSource;
use crate::geom::{self, Rect, Vec2};

pub const DEFAULT_CELL_SIZE: f64 = 2.0;
pub const DEFAULT_MARKER_DENSITY: f64 = 5.0;
pub const DEFAULT_FRAME_DT: f64 = 0.02;
pub const DEFAULT_MAX_FRAMES: u64 = 20_000;
pub const DEFAULT_WEIBULL_SHAPE: f64 = 1.5;
pub const DEFAULT_WEIBULL_SCALE: f64 = 6.0;
pub const DEFAULT_IP_RADIUS: f64 = 2.0;
pub const DEFAULT_FOG_SUBDIVISION: u32 = 2;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

impl From<serde_json::Error> for ScenarioError {
    fn from(err: serde_json::Error) -> Self {
        ScenarioError::Syntax {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct World {
    pub width: f64,
    pub height: f64,
    #[serde(default = "default_cell_size")]
    pub cell_size: f64,
    /// Markers per square meter.
    #[serde(default = "default_marker_density")]
    pub marker_density: f64,
    /// Seconds per frame.
    #[serde(default = "default_frame_dt")]
    pub frame_dt: f64,
    #[serde(default)]
    pub seed: u64,
    /// Hard stop for continuous runs.
    #[serde(default = "default_max_frames")]
    pub max_frames: u64,
}

fn default_cell_size() -> f64 {
    DEFAULT_CELL_SIZE
}
fn default_marker_density() -> f64 {
    DEFAULT_MARKER_DENSITY
}
fn default_frame_dt() -> f64 {
    DEFAULT_FRAME_DT
}
fn default_max_frames() -> u64 {
    DEFAULT_MAX_FRAMES
}
fn default_weibull_shape() -> f64 {
    DEFAULT_WEIBULL_SHAPE
}
fn default_weibull_scale() -> f64 {
    DEFAULT_WEIBULL_SCALE
}
fn default_ip_radius() -> f64 {
    DEFAULT_IP_RADIUS
}
fn default_subdivision() -> u32 {
    DEFAULT_FOG_SUBDIVISION
}

mod xy_list {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::geom::Vec2;

    pub fn serialize<S: Serializer>(pts: &[Vec2], s: S) -> Result<S::Ok, S::Error> {
        let raw: Vec<[f64; 2]> = pts.iter().map(|p| [p.x, p.y]).collect();
        raw.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec2>, D::Error> {
        let raw: Vec<[f64; 2]> = Vec::deserialize(d)?;
        Ok(raw.into_iter().map(|[x, y]| Vec2::new(x, y)).collect())
    }
}

/// A static obstacle: a simple polygon in world coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Obstacle {
    #[serde(with = "xy_list")]
    pub polygon: Vec<Vec2>,
}

impl Obstacle {
    pub fn rect(r: Rect) -> Self {
        Obstacle {
            polygon: r.corners().to_vec(),
        }
    }

    pub fn area(&self) -> f64 {
        geom::signed_area(&self.polygon).abs()
    }

    pub fn contains(&self, p: Vec2) -> bool {
        geom::point_strictly_inside(p, &self.polygon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Goal {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

impl Goal {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// Five-factor personality vector, each component in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OceanVector {
    pub o: f64,
    pub c: f64,
    pub e: f64,
    pub a: f64,
    pub n: f64,
}

impl OceanVector {
    pub const fn new(o: f64, c: f64, e: f64, a: f64, n: f64) -> Self {
        OceanVector { o, c, e, a, n }
    }

    pub fn is_valid(&self) -> bool {
        [self.o, self.c, self.e, self.a, self.n]
            .iter()
            .all(|v| (0.0..=1.0).contains(v))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub count: usize,
    pub spawn: Rect,
    /// Id of the goal every member walks to.
    pub goal: String,
    /// Without a personality vector members use the engine defaults.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ocean: Option<OceanVector>,
}

/// Fast-forward window and the interaction penalty parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FastForwardSpec {
    pub stop_frame: u64,
    pub target_frame: u64,
    #[serde(default = "default_weibull_shape")]
    pub weibull_k: f64,
    #[serde(default = "default_weibull_scale")]
    /// Weibull scale of the crowding penalty, agents per m^2.
    pub weibull_lambda: f64,
    #[serde(default = "default_ip_radius")]
    pub ip_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FogSpec {
    #[serde(default = "default_subdivision")]
    pub subdivision: u32,
    #[serde(default)]
    pub sources: Vec<VisionSource>,
}

impl Default for FogSpec {
    fn default() -> Self {
        FogSpec {
            subdivision: DEFAULT_FOG_SUBDIVISION,
            sources: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub world: World,
    #[serde(default)]
    pub obstacles: Vec<Obstacle>,
    pub goals: Vec<Goal>,
    pub groups: Vec<GroupSpec>,
    pub ff: FastForwardSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fog: Option<FogSpec>,
}

/// Parse and validate a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let scenario: Scenario = serde_json::from_str(text)?;
    scenario.validate()?;
    Ok(scenario)
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        parse_scenario(text)
    }

    /// Pretty JSON with every default written out.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn bounds(&self) -> Rect {
        Rect::new(0.0, 0.0, self.world.width, self.world.height)
    }

    pub fn goal(&self, id: &str) -> Option<&Goal> {
        self.goals.iter().find(|g| g.id == id)
    }

    pub fn agent_count(&self) -> usize {
        self.groups.iter().map(|g| g.count).sum()
    }

    pub fn total_obstacle_area(&self) -> f64 {
        self.obstacles.iter().map(Obstacle::area).sum()
    }

    /// Inside the world and not strictly inside any obstacle.
    pub fn is_free(&self, p: Vec2) -> bool {
        self.bounds().contains(p) && !self.obstacles.iter().any(|o| o.contains(p))
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let w = &self.world;
        for (name, v) in [
            ("world.width", w.width),
            ("world.height", w.height),
            ("world.cell_size", w.cell_size),
            ("world.frame_dt", w.frame_dt),
            ("world.marker_density", w.marker_density),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.ff.target_frame <= self.ff.stop_frame {
            return Err(invalid(format!(
                "ff.target_frame ({}) must be greater than ff.stop_frame ({})",
                self.ff.target_frame, self.ff.stop_frame
            )));
        }
        for (name, v) in [
            ("ff.weibull_k", self.ff.weibull_k),
            ("ff.weibull_lambda", self.ff.weibull_lambda),
            ("ff.ip_radius", self.ff.ip_radius),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        let bounds = self.bounds();
        for (i, ob) in self.obstacles.iter().enumerate() {
            if ob.polygon.iter().any(|p| !p.is_finite()) {
                return Err(invalid(format!("obstacle {i} has non-finite coordinates")));
            }
            if !geom::is_simple_polygon(&ob.polygon) {
                return Err(invalid(format!("obstacle {i} is not a simple polygon")));
            }
            if ob.area() <= 0.0 {
                return Err(invalid(format!("obstacle {i} has zero area")));
            }
        }
        for (i, g) in self.goals.iter().enumerate() {
            if self.goals[..i].iter().any(|other| other.id == g.id) {
                return Err(invalid(format!("duplicate goal id {:?}", g.id)));
            }
            if !bounds.contains(g.position()) {
                return Err(invalid(format!("goal {:?} lies outside the world", g.id)));
            }
            if self.obstacles.iter().any(|o| o.contains(g.position())) {
                return Err(invalid(format!("goal {:?} lies inside an obstacle", g.id)));
            }
        }
        for (i, g) in self.groups.iter().enumerate() {
            if g.count == 0 {
                return Err(invalid(format!("group {i} must have count >= 1")));
            }
            if self.goal(&g.goal).is_none() {
                return Err(invalid(format!("unknown goal {:?} in group {i}", g.goal)));
            }
            if g.spawn.w < 0.0 || g.spawn.h < 0.0 || !bounds.contains_rect(&g.spawn) {
                return Err(invalid(format!(
                    "group {i} spawn region must lie inside the world bounds"
                )));
            }
            if let Some(ocean) = &g.ocean {
                if !ocean.is_valid() {
                    return Err(invalid(format!(
                        "group {i} ocean components must lie in [0, 1]"
                    )));
                }
            }
        }
        if let Some(fog) = &self.fog {
            if fog.subdivision == 0 {
                return Err(invalid("fog.subdivision must be >= 1"));
            }
            for (i, s) in fog.sources.iter().enumerate() {
                if !s.shape.is_valid() {
                    return Err(invalid(format!("fog source {i} has a degenerate shape")));
                }
            }
        }
        Ok(())
    }
}

/// Cell grid covering the world; the graph for path planning and the
/// buckets for markers.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub cols: usize,
    pub rows: usize,
    pub cell_size: f64,
    pub width: f64,
    pub height: f64,
    blocked: Vec<bool>,
}

/// Discretize the world. A cell is blocked when its square overlaps an
/// obstacle with positive area.
pub fn build_grid(s: &Scenario) -> Grid {
    let cell = s.world.cell_size;
    let cols = ((s.world.width / cell).ceil() as usize).max(1);
    let rows = ((s.world.height / cell).ceil() as usize).max(1);
    let mut blocked = vec![false; cols * rows];
    let eps = 1e-12 * cell * cell;
    for r in 0..rows {
        for c in 0..cols {
            let rect = Rect::new(c as f64 * cell, r as f64 * cell, cell, cell);
            blocked[r * cols + c] = s
                .obstacles
                .iter()
                .any(|o| geom::polygon_rect_overlap_area(&o.polygon, &rect) > eps);
        }
    }
    Grid {
        cols,
        rows,
        cell_size: cell,
        width: s.world.width,
        height: s.world.height,
        blocked,
    }
}

/// Column/row address of a grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub col: usize,
    pub row: usize,
}

impl Cell {
    pub const fn new(col: usize, row: usize) -> Self {
        Cell { col, row }
    }
}

impl Grid {
    /// An unobstructed grid, mostly for tests.
    pub fn open(cols: usize, rows: usize, cell_size: f64) -> Self {
        Grid {
            cols,
            rows,
            cell_size,
            width: cols as f64 * cell_size,
            height: rows as f64 * cell_size,
            blocked: vec![false; cols * rows],
        }
    }

    pub fn len(&self) -> usize {
        self.cols * self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, cell: Cell) -> usize {
        cell.row * self.cols + cell.col
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new(index % self.cols, index / self.cols)
    }

    pub fn is_blocked(&self, cell: Cell) -> bool {
        self.blocked[self.index(cell)]
    }

    pub fn set_blocked(&mut self, cell: Cell, blocked: bool) {
        let i = self.index(cell);
        self.blocked[i] = blocked;
    }

    pub fn blocked_count(&self) -> usize {
        self.blocked.iter().filter(|b| **b).count()
    }

    /// Cell containing `p`; points on the far world edge map to the last
    /// column/row.
    pub fn cell_of(&self, p: Vec2) -> Option<Cell> {
        if !(p.x >= 0.0 && p.y >= 0.0 && p.x <= self.width && p.y <= self.height) {
            return None;
        }
        let col = ((p.x / self.cell_size).floor() as usize).min(self.cols - 1);
        let row = ((p.y / self.cell_size).floor() as usize).min(self.rows - 1);
        Some(Cell::new(col, row))
    }

    pub fn center(&self, cell: Cell) -> Vec2 {
        Vec2::new(
            (cell.col as f64 + 0.5) * self.cell_size,
            (cell.row as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn cell_rect(&self, cell: Cell) -> Rect {
        Rect::new(
            cell.col as f64 * self.cell_size,
            cell.row as f64 * self.cell_size,
            self.cell_size,
            self.cell_size,
        )
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.len()).map(|i| self.cell_at(i))
    }
}
