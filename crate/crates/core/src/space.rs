//! One-dimensional state spaces, uniform grids and unions of grid cells.
//!
//! A [`Grid`] splits the unit interval (or the unit circle) into `G` cells of
//! equal Lebesgue measure `1/G`. Cell `i` is the half-open interval
//! `[i/G, (i+1)/G)`; the right endpoint `1` is folded into the last cell on the
//! interval and identified with `0` on the circle. A [`CellSet`] is a union of
//! closed cells and stands in for a compact candidate set.

use std::fmt;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// The ambient space and its metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateSpace {
    /// `[0, 1)` with the wraparound metric, circumference 1.
    Circle,
    /// `[0, 1]` with the usual metric.
    Interval,
}

impl StateSpace {
    pub fn distance(self, a: f64, b: f64) -> f64 {
        let d = (a - b).abs();
        match self {
            StateSpace::Interval => d,
            StateSpace::Circle => {
                let d = d - d.floor();
                d.min(1.0 - d)
            }
        }
    }

    pub fn contains(self, x: f64) -> bool {
        match self {
            StateSpace::Interval => (0.0..=1.0).contains(&x),
            StateSpace::Circle => (0.0..1.0).contains(&x),
        }
    }
}

impl fmt::Display for StateSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StateSpace::Circle => f.write_str("circle"),
            StateSpace::Interval => f.write_str("interval"),
        }
    }
}

/// Uniform partition of a [`StateSpace`] into `resolution` cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GridFields")]
pub struct Grid {
    space: StateSpace,
    resolution: usize,
}

#[derive(Deserialize)]
struct GridFields {
    space: StateSpace,
    resolution: usize,
}

impl TryFrom<GridFields> for Grid {
    type Error = Error;

    fn try_from(f: GridFields) -> Result<Self> {
        Grid::new(f.space, f.resolution)
    }
}

impl Grid {
    pub fn new(space: StateSpace, resolution: usize) -> Result<Self> {
        if resolution == 0 {
            return Err(invalid("grid resolution must be positive"));
        }
        Ok(Grid { space, resolution })
    }

    pub fn circle(resolution: usize) -> Result<Self> {
        Grid::new(StateSpace::Circle, resolution)
    }

    pub fn interval(resolution: usize) -> Result<Self> {
        Grid::new(StateSpace::Interval, resolution)
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Lebesgue measure of a single cell.
    pub fn cell_measure(&self) -> f64 {
        1.0 / self.resolution as f64
    }

    /// Index of the cell containing `x`.
    pub fn cell_of(&self, x: f64) -> usize {
        let g = self.resolution;
        let x = match self.space {
            StateSpace::Circle => x - x.floor(),
            StateSpace::Interval => x.clamp(0.0, 1.0),
        };
        let i = (x * g as f64).floor();
        if i < 0.0 {
            return 0;
        }
        let i = i as usize;
        if i < g {
            i
        } else {
            match self.space {
                StateSpace::Circle => 0,
                StateSpace::Interval => g - 1,
            }
        }
    }

    /// Distance between the closed extents of two cells; adjacent cells are at
    /// distance zero.
    pub fn cell_distance(&self, i: usize, j: usize) -> f64 {
        let steps = self.index_gap(i, j);
        steps.saturating_sub(1) as f64 / self.resolution as f64
    }

    fn index_gap(&self, i: usize, j: usize) -> usize {
        let d = i.abs_diff(j);
        match self.space {
            StateSpace::Interval => d,
            StateSpace::Circle => d.min(self.resolution - d),
        }
    }

    /// Largest index gap `d` whose closed cells are at distance `< eps`.
    pub(crate) fn neighborhood_radius(&self, eps: f64) -> usize {
        let g = self.resolution as f64;
        let gap_ok = |d: usize| (d.saturating_sub(1) as f64) / g < eps;
        let mut d = ((eps * g).floor().max(0.0) as usize).saturating_add(1);
        d = d.min(self.resolution);
        while d > 0 && !gap_ok(d) {
            d -= 1;
        }
        while d < self.resolution && gap_ok(d + 1) {
            d += 1;
        }
        d
    }

    /// Midpoint of cell `i`.
    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) / self.resolution as f64
    }

    pub(crate) fn ensure_same(&self, other: &Grid) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::GridMismatch {
                left: self.to_string(),
                right: other.to_string(),
            })
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]", self.space, self.resolution)
    }
}

/// A union of closed grid cells.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "CellList", try_from = "CellList")]
pub struct CellSet {
    grid: Grid,
    members: Vec<bool>,
}

/// Serialized form of a [`CellSet`]: the grid and its cells in ascending order.
#[derive(Serialize, Deserialize)]
struct CellList {
    grid: Grid,
    cells: Vec<usize>,
}

impl From<CellSet> for CellList {
    fn from(set: CellSet) -> Self {
        CellList {
            cells: set.cells(),
            grid: set.grid,
        }
    }
}

impl TryFrom<CellList> for CellSet {
    type Error = Error;

    fn try_from(list: CellList) -> Result<Self> {
        CellSet::from_cells(list.grid, list.cells)
    }
}

impl CellSet {
    pub fn empty(grid: Grid) -> Self {
        CellSet {
            grid,
            members: vec![false; grid.resolution()],
        }
    }

    pub fn full(grid: Grid) -> Self {
        CellSet {
            grid,
            members: vec![true; grid.resolution()],
        }
    }

    pub fn from_cells(grid: Grid, cells: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut set = CellSet::empty(grid);
        for c in cells {
            if c >= grid.resolution() {
                return Err(invalid(format!("cell {c} outside {grid}")));
            }
            set.members[c] = true;
        }
        Ok(set)
    }

    pub(crate) fn from_mask(grid: Grid, members: Vec<bool>) -> Self {
        debug_assert_eq!(members.len(), grid.resolution());
        CellSet { grid, members }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn contains(&self, cell: usize) -> bool {
        self.members.get(cell).copied().unwrap_or(false)
    }

    pub fn insert(&mut self, cell: usize) {
        self.members[cell] = true;
    }

    pub fn remove(&mut self, cell: usize) {
        self.members[cell] = false;
    }

    pub fn len(&self) -> usize {
        self.members.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.members.iter().any(|&m| m)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
    }

    pub fn cells(&self) -> Vec<usize> {
        self.iter().collect()
    }

    pub(crate) fn mask(&self) -> &[bool] {
        &self.members
    }

    pub fn union(&self, other: &CellSet) -> Result<CellSet> {
        self.zip_with(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &CellSet) -> Result<CellSet> {
        self.zip_with(other, |a, b| a && b)
    }

    pub fn difference(&self, other: &CellSet) -> Result<CellSet> {
        self.zip_with(other, |a, b| a && !b)
    }

    pub fn symmetric_difference(&self, other: &CellSet) -> Result<CellSet> {
        self.zip_with(other, |a, b| a != b)
    }

    pub fn complement(&self) -> CellSet {
        CellSet {
            grid: self.grid,
            members: self.members.iter().map(|m| !m).collect(),
        }
    }

    pub fn is_subset(&self, other: &CellSet) -> bool {
        self.grid == other.grid
            && self
                .members
                .iter()
                .zip(&other.members)
                .all(|(&a, &b)| !a || b)
    }

    fn zip_with(&self, other: &CellSet, op: impl Fn(bool, bool) -> bool) -> Result<CellSet> {
        self.grid.ensure_same(&other.grid)?;
        Ok(CellSet {
            grid: self.grid,
            members: self
                .members
                .iter()
                .zip(&other.members)
                .map(|(&a, &b)| op(a, b))
                .collect(),
        })
    }

    /// All cells whose closed extent lies at distance `< eps` from some cell of
    /// `self`.
    pub fn eps_neighborhood(&self, eps: f64) -> Result<CellSet> {
        if !(eps > 0.0) {
            return Err(invalid(format!("eps must be positive, got {eps}")));
        }
        if self.is_empty() {
            return Err(Error::EmptyCandidate);
        }
        let radius = self.grid.neighborhood_radius(eps);
        Ok(CellSet::from_mask(self.grid, dilate(&self.grid, &self.members, radius)))
    }

    /// Normalized Lebesgue measure of the union.
    pub fn lebesgue_fraction(&self) -> f64 {
        self.len() as f64 / self.grid.resolution() as f64
    }
}

/// Marks every cell within `radius` index steps of a marked cell.
pub(crate) fn dilate(grid: &Grid, members: &[bool], radius: usize) -> Vec<bool> {
    let g = grid.resolution();
    if radius == 0 {
        return members.to_vec();
    }
    let wrap = grid.space() == StateSpace::Circle;
    if wrap && 2 * radius + 1 >= g && members.iter().any(|&m| m) {
        return vec![true; g];
    }
    // Difference array over coverage intervals.
    let mut delta = vec![0i64; g + 1];
    let mut cover = |lo: usize, hi: usize| {
        delta[lo] += 1;
        delta[hi + 1] -= 1;
    };
    for (i, _) in members.iter().enumerate().filter(|(_, &m)| m) {
        if wrap {
            let lo = i as isize - radius as isize;
            let hi = i + radius;
            if lo < 0 {
                cover(0, hi);
                cover((g as isize + lo) as usize, g - 1);
            } else if hi >= g {
                cover(lo as usize, g - 1);
                cover(0, hi - g);
            } else {
                cover(lo as usize, hi);
            }
        } else {
            cover(i.saturating_sub(radius), (i + radius).min(g - 1));
        }
    }
    let mut out = Vec::with_capacity(g);
    let mut running = 0i64;
    for d in delta.iter().take(g) {
        running += d;
        out.push(running > 0);
    }
    out
}

/// Draws `n` independent uniform points of the grid's space, reproducibly from
/// `seed`.
pub fn sample_lebesgue(grid: &Grid, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(invalid("sample count must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = grid.space();
    Ok((0..n)
        .map(|_| match space {
            StateSpace::Circle => rng.gen::<f64>(),
            StateSpace::Interval => rng.gen_range(0.0..=1.0),
        })
        .collect())
}
