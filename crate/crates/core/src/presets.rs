//! Built-in experiment scenarios.
//!
//! Geometry is reconstructed: world sizes, agent counts, goal counts, jump
//! windows and obstacle areas follow the experiment descriptions, while the
//! exact coordinates are fixtures of this crate.

use crate::fog::{Shape, VisionSource};
use crate::geom::Rect;
use crate::scenario::{
    FastForwardSpec, FogSpec, Goal, GroupSpec, Obstacle, OceanVector, Scenario, World,
    DEFAULT_CELL_SIZE, DEFAULT_FRAME_DT, DEFAULT_IP_RADIUS, DEFAULT_MARKER_DENSITY,
    DEFAULT_WEIBULL_SCALE, DEFAULT_WEIBULL_SHAPE,
};

/// Agent counts of the four jump-accuracy simulations.
pub const ACCURACY_AGENT_COUNTS: [usize; 4] = [1, 5, 10, 20];
/// Total agent counts of the comparison suite.
pub const COMPARISON_AGENT_COUNTS: [usize; 3] = [8, 80, 160];

/// OCEAN vectors of the four personality simulations (O, C, E, A, N).
pub const PERSONALITY_OCEAN: [OceanVector; 4] = [
    OceanVector::new(0.5, 0.5, 0.8, 0.5, 0.8),
    OceanVector::new(0.5, 0.5, 0.2, 0.5, 0.8),
    OceanVector::new(0.5, 0.8, 0.2, 0.8, 0.5),
    OceanVector::new(0.5, 0.2, 0.8, 0.2, 0.5),
];

/// Marker density for worlds whose agents carry a personality. Cohesive
/// groups shrink the personal radius toward 0.4 m, so markers are packed
/// denser to keep a comparable number inside each agent's reach.
pub const PERSONALITY_MARKER_DENSITY: f64 = 20.0;

/// Obstacle layouts of the comparison suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComparisonLayout {
    Open,
    TwoObstacles,
    SevenObstacles,
    FourObstacles,
}

impl ComparisonLayout {
    pub const ALL: [ComparisonLayout; 4] = [
        ComparisonLayout::Open,
        ComparisonLayout::TwoObstacles,
        ComparisonLayout::SevenObstacles,
        ComparisonLayout::FourObstacles,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            ComparisonLayout::Open => "open",
            ComparisonLayout::TwoObstacles => "2obs",
            ComparisonLayout::SevenObstacles => "7obs",
            ComparisonLayout::FourObstacles => "4obs",
        }
    }

    /// Total obstacle area in square meters.
    pub fn obstacle_area(self) -> f64 {
        match self {
            ComparisonLayout::Open => 0.0,
            ComparisonLayout::TwoObstacles => 109.71,
            ComparisonLayout::SevenObstacles => 128.68,
            ComparisonLayout::FourObstacles => 582.22,
        }
    }

    pub fn jump(self) -> (u64, u64) {
        match self {
            ComparisonLayout::FourObstacles => (200, 370),
            _ => (200, 400),
        }
    }
}

fn world(width: f64, height: f64, max_frames: u64) -> World {
    World {
        width,
        height,
        cell_size: DEFAULT_CELL_SIZE,
        marker_density: DEFAULT_MARKER_DENSITY,
        frame_dt: DEFAULT_FRAME_DT,
        seed: 0,
        max_frames,
    }
}

fn ff(stop_frame: u64, target_frame: u64) -> FastForwardSpec {
    FastForwardSpec {
        stop_frame,
        target_frame,
        weibull_k: DEFAULT_WEIBULL_SHAPE,
        weibull_lambda: DEFAULT_WEIBULL_SCALE,
        ip_radius: DEFAULT_IP_RADIUS,
    }
}

fn goal(id: &str, x: f64, y: f64) -> Goal {
    Goal {
        id: id.to_string(),
        x,
        y,
    }
}

fn group(count: usize, spawn: Rect, goal: &str, ocean: Option<OceanVector>) -> GroupSpec {
    GroupSpec {
        count,
        spawn,
        goal: goal.to_string(),
        ocean,
    }
}

/// The three obstacles of the 30 x 30 m accuracy world.
pub fn accuracy_obstacles() -> Vec<Obstacle> {
    vec![
        Obstacle::rect(Rect::new(9.0, 9.0, 4.0, 4.0)),
        Obstacle::rect(Rect::new(17.0, 13.0, 3.0, 6.0)),
        Obstacle::rect(Rect::new(12.0, 20.0, 5.0, 3.0)),
    ]
}

const BOTTOM_LEFT: Rect = Rect::new(1.0, 1.0, 5.0, 5.0);
// The two-group worlds split the corner so each group starts on the side of
// its own goal.
const BOTTOM_LEFT_EAST: Rect = Rect::new(4.0, 1.0, 4.0, 3.0);
const BOTTOM_LEFT_NORTH: Rect = Rect::new(1.0, 4.0, 3.0, 4.0);

/// Jump-accuracy simulation `sim` (1 to 4), optionally with obstacles.
pub fn accuracy(sim: usize, with_obstacles: bool) -> Scenario {
    assert!((1..=4).contains(&sim), "accuracy simulations are numbered 1 to 4");
    let count = ACCURACY_AGENT_COUNTS[sim - 1];
    let (goals, groups) = if sim <= 2 {
        (
            vec![goal("g1", 27.0, 27.0)],
            vec![group(count, BOTTOM_LEFT, "g1", None)],
        )
    } else {
        (
            vec![goal("g1", 27.0, 20.0), goal("g2", 20.0, 27.0)],
            vec![
                group(count / 2, BOTTOM_LEFT_EAST, "g1", None),
                group(count / 2, BOTTOM_LEFT_NORTH, "g2", None),
            ],
        )
    };
    Scenario {
        world: world(30.0, 30.0, 20_000),
        obstacles: if with_obstacles {
            accuracy_obstacles()
        } else {
            Vec::new()
        },
        goals,
        groups,
        ff: ff(600, 1000),
        fog: None,
    }
}

/// Personality simulation `sim` (1 to 4): the two-group obstacle world with
/// every agent carrying the given OCEAN vector.
pub fn personality(sim: usize) -> Scenario {
    assert!((1..=4).contains(&sim), "personality simulations are numbered 1 to 4");
    let ocean = PERSONALITY_OCEAN[sim - 1];
    let mut s = accuracy(3, true);
    for g in &mut s.groups {
        g.ocean = Some(ocean);
    }
    s.world.max_frames = 40_000;
    s.world.marker_density = PERSONALITY_MARKER_DENSITY;
    s
}

fn comparison_obstacles(layout: ComparisonLayout) -> Vec<Obstacle> {
    match layout {
        ComparisonLayout::Open => Vec::new(),
        ComparisonLayout::TwoObstacles => {
            // two 4.5 x 12.19 blocks across the horizontal line of travel
            let h = 12.19;
            let y = (23.0 - h) / 2.0;
            vec![
                Obstacle::rect(Rect::new(12.0, y, 4.5, h)),
                Obstacle::rect(Rect::new(23.5, y, 4.5, h)),
            ]
        }
        ComparisonLayout::SevenObstacles => vec![
            Obstacle::rect(Rect::new(8.0, 2.0, 3.0, 6.0)),
            Obstacle::rect(Rect::new(8.0, 15.0, 3.0, 6.0)),
            Obstacle::rect(Rect::new(14.0, 8.5, 3.0, 6.0)),
            Obstacle::rect(Rect::new(18.0, 8.915, 4.0, 5.17)),
            Obstacle::rect(Rect::new(25.0, 8.5, 3.0, 6.0)),
            Obstacle::rect(Rect::new(31.0, 2.0, 3.0, 6.0)),
            Obstacle::rect(Rect::new(31.0, 15.0, 3.0, 6.0)),
        ],
        ComparisonLayout::FourObstacles => {
            // corner blocks leaving a cross of corridors
            let h = 8.5;
            let w = 582.22 / 4.0 / h;
            vec![
                Obstacle::rect(Rect::new(0.0, 0.0, w, h)),
                Obstacle::rect(Rect::new(40.0 - w, 0.0, w, h)),
                Obstacle::rect(Rect::new(0.0, 23.0 - h, w, h)),
                Obstacle::rect(Rect::new(40.0 - w, 23.0 - h, w, h)),
            ]
        }
    }
}

/// Comparison-suite scenario on the 40 x 23 m world.
pub fn comparison(layout: ComparisonLayout, agents: usize) -> Scenario {
    let (stop, target) = layout.jump();
    let (goals, groups) = match layout {
        ComparisonLayout::FourObstacles => {
            let per = agents / 4;
            (
                vec![
                    goal("east", 39.0, 12.0),
                    goal("west", 1.0, 12.0),
                    goal("north", 20.0, 22.0),
                    goal("south", 20.0, 1.0),
                ],
                vec![
                    group(per, Rect::new(0.5, 10.2, 5.0, 3.6), "east", None),
                    group(per, Rect::new(34.5, 10.2, 5.0, 3.6), "west", None),
                    group(per, Rect::new(18.2, 0.5, 3.6, 5.0), "north", None),
                    group(per, Rect::new(18.2, 17.5, 3.6, 5.0), "south", None),
                ],
            )
        }
        _ => {
            let per = agents / 2;
            (
                vec![goal("east", 38.5, 11.5), goal("west", 1.5, 11.5)],
                vec![
                    group(per, Rect::new(1.0, 2.0, 4.0, 19.0), "east", None),
                    group(per, Rect::new(35.0, 2.0, 4.0, 19.0), "west", None),
                ],
            )
        }
    };
    Scenario {
        world: world(40.0, 23.0, 6_000),
        obstacles: comparison_obstacles(layout),
        goals,
        groups,
        ff: ff(stop, target),
        fog: None,
    }
}

/// Single unit crossing a fogged 30 x 30 m world past a central obstacle,
/// watched by a round and a square tower near the obstacle's corners.
pub fn fog_demo() -> Scenario {
    let mut w = world(30.0, 30.0, 10_000);
    w.marker_density = PERSONALITY_MARKER_DENSITY;
    Scenario {
        world: w,
        obstacles: vec![Obstacle::rect(Rect::new(10.0, 12.0, 10.0, 6.0))],
        goals: vec![goal("top", 15.0, 28.0)],
        groups: vec![group(
            1,
            Rect::new(15.0, 2.0, 0.0, 0.0),
            "top",
            Some(OceanVector::new(0.5, 0.5, 0.5, 0.5, 0.5)),
        )],
        ff: ff(100, 3500),
        fog: Some(FogSpec {
            subdivision: 2,
            sources: vec![
                VisionSource::tower(Shape::Circle {
                    x: 8.5,
                    y: 19.5,
                    r: 2.5,
                }),
                VisionSource::tower(Shape::Rect(Rect::new(20.0, 9.0, 3.0, 3.0))),
            ],
        }),
    }
}

/// Every built-in scenario with its file stem.
pub fn presets() -> Vec<(String, Scenario)> {
    let mut out = Vec::new();
    for sim in 1..=4 {
        out.push((format!("accuracy-sim{sim}"), accuracy(sim, false)));
    }
    for sim in 1..=4 {
        out.push((format!("accuracy-sim{sim}-obstacles"), accuracy(sim, true)));
    }
    for sim in 1..=4 {
        out.push((format!("personality-sim{sim}"), personality(sim)));
    }
    for layout in ComparisonLayout::ALL {
        for n in COMPARISON_AGENT_COUNTS {
            out.push((format!("comparison-{}-{n}", layout.slug()), comparison(layout, n)));
        }
    }
    out.push(("fog-demo".to_string(), fog_demo()));
    out
}
