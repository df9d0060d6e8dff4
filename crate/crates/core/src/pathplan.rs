//! Global navigation: A* over the free cells of the grid and the
//! arc-length parameterized polyline the fast-forward projects onto.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::Write;

use thiserror::Error;

use crate::geom::{point_segment_distance, segment_enters_polygon, Vec2};
use crate::scenario::{Cell, Grid};

/// Distance below which a point counts as lying on a path.
pub const ON_PATH_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum PathError {
    #[error("no path from {start:?} to {goal:?}")]
    NoPath { start: Vec2, goal: Vec2 },
    #[error("{which} point {point:?} lies in a blocked or out-of-bounds cell")]
    BlockedEndpoint { which: &'static str, point: Vec2 },
    #[error("point {point:?} is {distance} m away from the path")]
    OffPath { point: Vec2, distance: f64 },
    #[error("path needs at least one waypoint")]
    Empty,
}

/// Polyline with prefix arc lengths. Consecutive waypoints are distinct,
/// so `cumulative` is strictly increasing from 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    waypoints: Vec<Vec2>,
    cumulative: Vec<f64>,
}

impl Path {
    /// Builds a path, collapsing consecutive duplicate points.
    pub fn new(points: impl IntoIterator<Item = Vec2>) -> Result<Self, PathError> {
        let mut waypoints: Vec<Vec2> = Vec::new();
        for p in points {
            if waypoints.last() != Some(&p) {
                waypoints.push(p);
            }
        }
        if waypoints.is_empty() {
            return Err(PathError::Empty);
        }
        let mut cumulative = Vec::with_capacity(waypoints.len());
        cumulative.push(0.0);
        for w in waypoints.windows(2) {
            let prev = *cumulative.last().unwrap();
            cumulative.push(prev + w[0].distance(w[1]));
        }
        Ok(Path {
            waypoints,
            cumulative,
        })
    }

    pub fn single(p: Vec2) -> Self {
        Path {
            waypoints: vec![p],
            cumulative: vec![0.0],
        }
    }

    pub fn waypoints(&self) -> &[Vec2] {
        &self.waypoints
    }

    pub fn cumulative_length(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }

    pub fn start(&self) -> Vec2 {
        self.waypoints[0]
    }

    pub fn end(&self) -> Vec2 {
        *self.waypoints.last().unwrap()
    }

    pub fn total_length(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    /// Point at arc length `d`, clamped to the ends. Exact at waypoints.
    pub fn point_at_distance(&self, d: f64) -> Vec2 {
        if d.is_nan() || d <= 0.0 {
            return self.waypoints[0];
        }
        if d >= self.total_length() {
            return self.end();
        }
        // last index with cumulative <= d
        let i = self.cumulative.partition_point(|&c| c <= d) - 1;
        let (c0, c1) = (self.cumulative[i], self.cumulative[i + 1]);
        if d == c0 {
            return self.waypoints[i];
        }
        self.waypoints[i].lerp(self.waypoints[i + 1], (d - c0) / (c1 - c0))
    }

    /// Arc length of the closest point on the polyline and its distance.
    /// The earliest segment wins ties, so revisiting paths resolve to the
    /// first pass.
    pub fn project(&self, p: Vec2) -> (f64, f64) {
        if self.waypoints.len() == 1 {
            return (0.0, p.distance(self.waypoints[0]));
        }
        let mut best = (f64::INFINITY, 0.0);
        for (i, w) in self.waypoints.windows(2).enumerate() {
            let (dist, t) = point_segment_distance(p, w[0], w[1]);
            if dist < best.0 {
                let seg = self.cumulative[i + 1] - self.cumulative[i];
                best = (dist, self.cumulative[i] + t * seg);
            }
        }
        (best.1, best.0)
    }

    /// Remaining path from arc length `d`: waypoints at or before `d` are
    /// dropped and the point at `d` becomes the new start.
    pub fn suffix_from(&self, d: f64) -> Path {
        let start = self.point_at_distance(d);
        if d >= self.total_length() {
            return Path::single(self.end());
        }
        let first_kept = self.cumulative.partition_point(|&c| c <= d.max(0.0));
        Path::new(std::iter::once(start).chain(self.waypoints[first_kept..].iter().copied()))
            .expect("suffix keeps at least the start point")
    }

    /// Drops the first `n` waypoints, keeping at least the last one.
    pub fn drop_front(&mut self, n: usize) {
        let n = n.min(self.waypoints.len() - 1);
        if n == 0 {
            return;
        }
        let offset = self.cumulative[n];
        self.waypoints.drain(..n);
        self.cumulative.drain(..n);
        for c in &mut self.cumulative {
            *c -= offset;
        }
        // Re-anchor exactly at zero against rounding.
        self.cumulative[0] = 0.0;
    }

    /// Writes `x,y` rows with a header.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y"])?;
        for p in &self.waypoints {
            w.serialize((p.x, p.y))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Point at arc length `d` along `path`.
pub fn point_at_distance(path: &Path, d: f64) -> Vec2 {
    path.point_at_distance(d)
}

/// Moves the start of `path` to `new_position`, which must lie on it.
pub fn advance_path(path: &Path, new_position: Vec2) -> Result<Path, PathError> {
    let (d, dist) = path.project(new_position);
    if dist > ON_PATH_TOLERANCE {
        return Err(PathError::OffPath {
            point: new_position,
            distance: dist,
        });
    }
    let mut suffix = path.suffix_from(d);
    // Keep the caller's point exactly, not its re-evaluation.
    if suffix.len() == 1 {
        return Ok(Path::single(suffix.end()));
    }
    suffix.waypoints[0] = new_position;
    Path::new(suffix.waypoints)
}

#[derive(Clone, Copy, PartialEq)]
struct Frontier {
    f: f64,
    g: f64,
    index: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on f, then prefer larger g, then lower index
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| self.g.total_cmp(&other.g))
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const NEIGHBORS: [(isize, isize); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

/// Free 8-connected neighbors of `cell` and the center-to-center edge cost.
/// Diagonals are skipped when both orthogonal cells they pass are blocked.
pub fn neighbors(grid: &Grid, cell: Cell) -> impl Iterator<Item = (Cell, f64)> + '_ {
    NEIGHBORS.iter().filter_map(move |&(dc, dr)| {
        let col = cell.col as isize + dc;
        let row = cell.row as isize + dr;
        if col < 0 || row < 0 || col >= grid.cols as isize || row >= grid.rows as isize {
            return None;
        }
        let next = Cell::new(col as usize, row as usize);
        if grid.is_blocked(next) {
            return None;
        }
        if dc != 0 && dr != 0 {
            let side_a = Cell::new(col as usize, cell.row);
            let side_b = Cell::new(cell.col, row as usize);
            if grid.is_blocked(side_a) && grid.is_blocked(side_b) {
                return None;
            }
            return Some((next, grid.cell_size * std::f64::consts::SQRT_2));
        }
        Some((next, grid.cell_size))
    })
}

/// A* over free cells; returns the cell sequence and its cost.
pub fn astar_cells(grid: &Grid, from: Cell, to: Cell) -> Option<(Vec<Cell>, f64)> {
    let n = grid.len();
    let mut g_score = vec![f64::INFINITY; n];
    let mut came_from = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let goal_center = grid.center(to);
    let h = |c: Cell| grid.center(c).distance(goal_center);

    let start = grid.index(from);
    g_score[start] = 0.0;
    let mut open = BinaryHeap::new();
    open.push(Frontier {
        f: h(from),
        g: 0.0,
        index: start,
    });
    let target = grid.index(to);
    while let Some(Frontier { g, index, .. }) = open.pop() {
        if closed[index] {
            continue;
        }
        closed[index] = true;
        if index == target {
            let mut cells = vec![to];
            let mut cur = index;
            while came_from[cur] != usize::MAX {
                cur = came_from[cur];
                cells.push(grid.cell_at(cur));
            }
            cells.reverse();
            return Some((cells, g));
        }
        let cell = grid.cell_at(index);
        for (next, cost) in neighbors(grid, cell) {
            let ni = grid.index(next);
            if closed[ni] {
                continue;
            }
            let tentative = g + cost;
            if tentative < g_score[ni] {
                g_score[ni] = tentative;
                came_from[ni] = index;
                open.push(Frontier {
                    f: tentative + h(next),
                    g: tentative,
                    index: ni,
                });
            }
        }
    }
    None
}

/// Plans `start -> cell centers -> goal`. Start and goal in the same cell
/// give the direct two-point path.
pub fn plan_path(grid: &Grid, start: Vec2, goal: Vec2) -> Result<Path, PathError> {
    let from = grid
        .cell_of(start)
        .filter(|c| !grid.is_blocked(*c))
        .ok_or(PathError::BlockedEndpoint {
            which: "start",
            point: start,
        })?;
    let to = grid
        .cell_of(goal)
        .filter(|c| !grid.is_blocked(*c))
        .ok_or(PathError::BlockedEndpoint {
            which: "goal",
            point: goal,
        })?;
    if from == to {
        return Path::new([start, goal]);
    }
    let (cells, _) = astar_cells(grid, from, to).ok_or(PathError::NoPath { start, goal })?;
    let mut centers: Vec<Vec2> = cells.iter().map(|c| grid.center(*c)).collect();
    // The endpoint cells' own centers are detours unless needed to get
    // around a blocked corner.
    if centers.len() >= 2 && segment_clear(grid, start, centers[1]) {
        centers.remove(0);
    }
    let before_last = match centers.len() {
        0 => None,
        1 => Some(start),
        n => Some(centers[n - 2]),
    };
    if before_last.is_some_and(|p| segment_clear(grid, p, goal)) {
        centers.pop();
    }
    let points = std::iter::once(start)
        .chain(centers)
        .chain(std::iter::once(goal));
    Path::new(points)
}

/// True when the segment does not pass through the interior of any blocked
/// cell. Touching a blocked cell's edge or corner is allowed.
pub fn segment_clear(grid: &Grid, a: Vec2, b: Vec2) -> bool {
    let lo = Vec2::new(a.x.min(b.x), a.y.min(b.y));
    let hi = Vec2::new(a.x.max(b.x), a.y.max(b.y));
    let cs = grid.cell_size;
    let c0 = ((lo.x / cs).floor().max(0.0) as usize).min(grid.cols - 1);
    let c1 = ((hi.x / cs).floor().max(0.0) as usize).min(grid.cols - 1);
    let r0 = ((lo.y / cs).floor().max(0.0) as usize).min(grid.rows - 1);
    let r1 = ((hi.y / cs).floor().max(0.0) as usize).min(grid.rows - 1);
    for row in r0..=r1 {
        for col in c0..=c1 {
            let cell = Cell::new(col, row);
            if grid.is_blocked(cell) && segment_enters_polygon(a, b, &grid.cell_rect(cell).corners()) {
                return false;
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l_path() -> Path {
        Path::new([Vec2::new(0.0, 0.0), Vec2::new(3.0, 0.0), Vec2::new(3.0, 4.0)]).unwrap()
    }

    #[test]
    fn arc_length_queries() {
        let p = l_path();
        assert_eq!(p.total_length(), 7.0);
        assert_eq!(p.point_at_distance(5.0), Vec2::new(3.0, 2.0));
        assert_eq!(p.point_at_distance(0.0), Vec2::new(0.0, 0.0));
        assert_eq!(p.point_at_distance(17.0), Vec2::new(3.0, 4.0));
        assert_eq!(p.point_at_distance(3.0), Vec2::new(3.0, 0.0));
    }

    #[test]
    fn advance_on_l_path() {
        let p = l_path();
        let q = advance_path(&p, p.point_at_distance(5.0)).unwrap();
        assert_eq!(q.waypoints(), &[Vec2::new(3.0, 2.0), Vec2::new(3.0, 4.0)]);
        assert_eq!(advance_path(&p, p.start()).unwrap(), p);
        let at_goal = advance_path(&p, p.end()).unwrap();
        assert_eq!(at_goal.waypoints(), &[Vec2::new(3.0, 4.0)]);
        assert_eq!(at_goal.total_length(), 0.0);
    }

    #[test]
    fn advance_rejects_off_path_points() {
        let err = advance_path(&l_path(), Vec2::new(1.0, 1.0)).unwrap_err();
        assert!(matches!(err, PathError::OffPath { .. }));
    }

    #[test]
    fn duplicate_waypoints_collapse() {
        let p = Path::new([Vec2::new(1.0, 1.0), Vec2::new(1.0, 1.0), Vec2::new(2.0, 1.0)]).unwrap();
        assert_eq!(p.len(), 2);
        assert!(Path::new(std::iter::empty()).is_err());
    }

    #[test]
    fn drop_front_rebases_lengths() {
        let mut p = l_path();
        p.drop_front(1);
        assert_eq!(p.cumulative_length(), &[0.0, 4.0]);
        p.drop_front(5);
        assert_eq!(p.waypoints(), &[Vec2::new(3.0, 4.0)]);
    }

    #[test]
    fn same_cell_is_direct() {
        let g = Grid::open(15, 15, 2.0);
        let p = plan_path(&g, Vec2::new(0.5, 0.5), Vec2::new(1.5, 1.2)).unwrap();
        assert_eq!(p.waypoints(), &[Vec2::new(0.5, 0.5), Vec2::new(1.5, 1.2)]);
    }

    #[test]
    fn wall_gives_no_path() {
        let mut g = Grid::open(15, 15, 2.0);
        for r in 0..15 {
            g.set_blocked(Cell::new(7, r), true);
        }
        let err = plan_path(&g, Vec2::new(1.0, 1.0), Vec2::new(29.0, 29.0)).unwrap_err();
        assert!(matches!(err, PathError::NoPath { .. }));
        let err = plan_path(&g, Vec2::new(15.0, 1.0), Vec2::new(29.0, 29.0)).unwrap_err();
        assert!(matches!(err, PathError::BlockedEndpoint { which: "start", .. }));
    }

    #[test]
    fn corner_cut_requires_one_free_side() {
        let mut g = Grid::open(3, 3, 2.0);
        g.set_blocked(Cell::new(1, 0), true);
        g.set_blocked(Cell::new(0, 1), true);
        let diag: Vec<_> = neighbors(&g, Cell::new(0, 0)).collect();
        assert!(diag.is_empty());
        g.set_blocked(Cell::new(0, 1), false);
        let diag: Vec<_> = neighbors(&g, Cell::new(0, 0)).map(|(c, _)| c).collect();
        assert!(diag.contains(&Cell::new(1, 1)));
    }

    #[test]
    fn open_grid_diagonal_cost() {
        let g = Grid::open(15, 15, 2.0);
        let (cells, cost) = astar_cells(&g, Cell::new(0, 0), Cell::new(14, 14)).unwrap();
        assert_eq!(cells.len(), 15);
        assert!((cost - 14.0 * 2.0 * std::f64::consts::SQRT_2).abs() < 1e-9);
    }

    #[test]
    fn csv_export() {
        let mut buf = Vec::new();
        l_path().write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "x,y\n0.0,0.0\n3.0,0.0\n3.0,4.0\n");
    }
}
