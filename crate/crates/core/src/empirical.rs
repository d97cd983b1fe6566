//! Empirical measures along orbits and the weak* geometry used to compare them.
//!
//! An [`EmpiricalAccumulator`] holds integer visit counts per grid cell; its
//! [`snapshot`](EmpiricalAccumulator::snapshot) is the gridded empirical
//! probability `ν_n = (1/n) Σ_{j<n} δ_{f^j(x)}`. Measures are compared with a
//! multi-scale dyadic metric ([`weakstar_dist`]) that is exactly computable in
//! `O(G)` and metrizes weak* convergence down to grid resolution.

use serde::{Deserialize, Serialize};

use crate::dynamics::OrbitTrace;
use crate::error::{invalid, Error, Result};
use crate::space::{CellSet, Grid};

/// Integer visit counts per cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmpiricalAccumulator {
    grid: Grid,
    counts: Vec<u64>,
    total: u64,
}

impl EmpiricalAccumulator {
    pub fn new(grid: Grid) -> Self {
        EmpiricalAccumulator {
            grid,
            counts: vec![0; grid.resolution()],
            total: 0,
        }
    }

    pub fn from_counts(grid: Grid, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != grid.resolution() {
            return Err(invalid(format!(
                "{} counts for a grid of {} cells",
                counts.len(),
                grid.resolution()
            )));
        }
        let total = counts.iter().sum();
        Ok(EmpiricalAccumulator {
            grid,
            counts,
            total,
        })
    }

    #[inline]
    pub fn record_cell(&mut self, cell: usize) {
        self.counts[cell] += 1;
        self.total += 1;
    }

    pub fn record(&mut self, x: f64) {
        let c = self.grid.cell_of(x);
        self.record_cell(c);
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Cellwise sum of two accumulators on the same grid.
    pub fn merge(&self, other: &EmpiricalAccumulator) -> Result<EmpiricalAccumulator> {
        self.grid.ensure_same(&other.grid)?;
        Ok(EmpiricalAccumulator {
            grid: self.grid,
            counts: self
                .counts
                .iter()
                .zip(&other.counts)
                .map(|(a, b)| a + b)
                .collect(),
            total: self.total + other.total,
        })
    }

    pub fn snapshot(&self) -> Result<GriddedMeasure> {
        if self.total == 0 {
            return Err(Error::EmptyAccumulator);
        }
        let n = self.total as f64;
        Ok(GriddedMeasure {
            grid: self.grid,
            weights: self.counts.iter().map(|&c| c as f64 / n).collect(),
        })
    }

    /// Number of visits to the cells of `set`.
    pub fn visits(&self, set: &CellSet) -> u64 {
        self.counts
            .iter()
            .zip(set.mask())
            .filter_map(|(&c, &m)| m.then_some(c))
            .sum()
    }
}

/// A probability vector over the cells of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GriddedMeasure {
    grid: Grid,
    weights: Vec<f64>,
}

impl GriddedMeasure {
    /// Builds a measure from nonnegative weights summing to one (up to `1e-9`,
    /// after which they are renormalized).
    pub fn from_weights(grid: Grid, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.resolution() {
            return Err(invalid("weight vector does not match grid"));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(invalid("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(GriddedMeasure {
            grid,
            weights: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn point_mass(grid: Grid, cell: usize) -> Result<Self> {
        if cell >= grid.resolution() {
            return Err(invalid(format!("cell {cell} outside {grid}")));
        }
        let mut weights = vec![0.0; grid.resolution()];
        weights[cell] = 1.0;
        Ok(GriddedMeasure { grid, weights })
    }

    pub fn uniform(grid: Grid) -> Self {
        let g = grid.resolution();
        GriddedMeasure {
            grid,
            weights: vec![1.0 / g as f64; g],
        }
    }

    /// `t·a + (1-t)·b`.
    pub fn mixture(a: &GriddedMeasure, b: &GriddedMeasure, t: f64) -> Result<Self> {
        a.grid.ensure_same(&b.grid)?;
        if !(0.0..=1.0).contains(&t) {
            return Err(invalid(format!("mixture weight {t} outside [0, 1]")));
        }
        Ok(GriddedMeasure {
            grid: a.grid,
            weights: a
                .weights
                .iter()
                .zip(&b.weights)
                .map(|(x, y)| t * x + (1.0 - t) * y)
                .collect(),
        })
    }

    /// Equal-weight average of several measures on one grid.
    pub fn average(measures: &[GriddedMeasure]) -> Result<Self> {
        let first = measures.first().ok_or_else(|| invalid("no measures to average"))?;
        let mut weights = vec![0.0; first.grid.resolution()];
        for m in measures {
            first.grid.ensure_same(&m.grid)?;
            for (acc, w) in weights.iter_mut().zip(&m.weights) {
                *acc += w;
            }
        }
        let k = measures.len() as f64;
        weights.iter_mut().for_each(|w| *w /= k);
        Ok(GriddedMeasure {
            grid: first.grid,
            weights,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn mass(&self, set: &CellSet) -> f64 {
        self.weights
            .iter()
            .zip(set.mask())
            .filter_map(|(&w, &m)| m.then_some(w))
            .sum()
    }

    /// Cells carrying weight strictly above `threshold`.
    pub fn support(&self, threshold: f64) -> CellSet {
        CellSet::from_mask(self.grid, self.weights.iter().map(|&w| w > threshold).collect())
    }
}

/// Multi-scale dyadic distance between two gridded measures.
///
/// `D(μ,ν) = Σ_{l=0}^{log₂G} 2^{-l} · ½ Σ_{blocks B at level l} |μ(B) − ν(B)|`,
/// where level `l` splits the space into `2^l` equal dyadic blocks. Each level
/// contributes at most `2^{-l}`, so `D ≤ 2`.
pub fn weakstar_dist(mu: &GriddedMeasure, nu: &GriddedMeasure) -> Result<f64> {
    mu.grid.ensure_same(&nu.grid)?;
    let g = mu.grid.resolution();
    if !g.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(g));
    }
    let mut diff: Vec<f64> = mu
        .weights
        .iter()
        .zip(&nu.weights)
        .map(|(a, b)| a - b)
        .collect();
    Ok(dyadic_sum(&mut diff))
}

/// Evaluates the dyadic metric on a signed difference vector, consuming it as
/// scratch space.
fn dyadic_sum(diff: &mut Vec<f64>) -> f64 {
    let mut level = diff.len().trailing_zeros() as i32;
    let mut total = 0.0;
    loop {
        let tv: f64 = diff.iter().map(|d| d.abs()).sum();
        total += 0.5 * tv * 2f64.powi(-level);
        if diff.len() == 1 {
            break;
        }
        let coarser: Vec<f64> = diff.chunks_exact(2).map(|p| p[0] + p[1]).collect();
        *diff = coarser;
        level -= 1;
    }
    total
}

/// Frequency of visits to the `eps`-neighborhood of `set` at each checkpoint of
/// `trace`, as `(n, ω_n)` pairs.
pub fn visit_frequency(trace: &OrbitTrace, set: &CellSet, eps: f64) -> Result<Vec<(u64, f64)>> {
    trace.grid().ensure_same(set.grid())?;
    let near = set.eps_neighborhood(eps)?;
    Ok(trace
        .checkpoints()
        .iter()
        .map(|acc| {
            let n = acc.total();
            (n, acc.visits(&near) as f64 / n as f64)
        })
        .collect())
}

/// Distance thresholds for limit-set classification, in metric units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitThresholds {
    /// Diameter below which a tail counts as a single point.
    pub point: f64,
    /// Minimal chord length for a segment.
    pub segment: f64,
    /// Maximal distance of tail snapshots from the chord.
    pub line: f64,
}

impl Default for LimitThresholds {
    fn default() -> Self {
        LimitThresholds {
            point: 0.02,
            segment: 0.2,
            line: 0.05,
        }
    }
}

/// Shape of the weak* limit set suggested by a tail of snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LimitShape {
    Point { center: GriddedMeasure },
    Segment { from: GriddedMeasure, to: GriddedMeasure, samples: usize },
    Cluster { centers: Vec<GriddedMeasure> },
    Undetermined,
}

impl LimitShape {
    pub fn name(&self) -> &'static str {
        match self {
            LimitShape::Point { .. } => "point",
            LimitShape::Segment { .. } => "segment",
            LimitShape::Cluster { .. } => "cluster",
            LimitShape::Undetermined => "undetermined",
        }
    }
}

/// Classified tail of one orbit, keeping the snapshots it was computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSetClass {
    pub shape: LimitShape,
    /// Largest pairwise distance among tail snapshots.
    pub diameter: f64,
    /// Mean pairwise distance among tail snapshots.
    pub mean_pairwise: f64,
    pub tail: Vec<GriddedMeasure>,
}

/// Minimum number of tail snapshots accepted by [`limit_set_classify`].
pub const MIN_TAIL_SNAPSHOTS: usize = 8;

/// Distance from `nu` to the chord `{t·a + (1-t)·b : t ∈ [0,1]}`.
///
/// The metric is a sum of absolute values of affine functions of `t`, hence
/// convex along the chord; ternary search finds the minimum.
pub fn chord_distance(a: &GriddedMeasure, b: &GriddedMeasure, nu: &GriddedMeasure) -> Result<f64> {
    a.grid.ensure_same(&b.grid)?;
    a.grid.ensure_same(&nu.grid)?;
    if !a.grid.resolution().is_power_of_two() {
        return Err(Error::NotPowerOfTwo(a.grid.resolution()));
    }
    let eval = |t: f64| {
        let mut diff: Vec<f64> = a
            .weights
            .iter()
            .zip(&b.weights)
            .zip(&nu.weights)
            .map(|((x, y), z)| t * x + (1.0 - t) * y - z)
            .collect();
        dyadic_sum(&mut diff)
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..100 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if eval(m1) <= eval(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    Ok(eval(0.5 * (lo + hi)).min(eval(0.0)).min(eval(1.0)))
}

/// Classifies the weak* limit set suggested by a tail of empirical snapshots.
///
/// Checks, in order: a point (diameter `< point`), a segment (diameter
/// `> segment`, at least three snapshots, all within `line` of the chord
/// through the two farthest snapshots), and a cluster (at least two
/// single-linkage groups at threshold `point`, each of diameter `< point`).
pub fn limit_set_classify(
    snapshots: &[GriddedMeasure],
    thresholds: &LimitThresholds,
) -> Result<LimitSetClass> {
    if snapshots.len() < MIN_TAIL_SNAPSHOTS {
        return Err(invalid(format!(
            "need at least {MIN_TAIL_SNAPSHOTS} tail snapshots, got {}",
            snapshots.len()
        )));
    }
    let k = snapshots.len();
    let mut dist = vec![vec![0.0; k]; k];
    let (mut diameter, mut far, mut sum) = (0.0f64, (0, 0), 0.0);
    for i in 0..k {
        for j in (i + 1)..k {
            let d = weakstar_dist(&snapshots[i], &snapshots[j])?;
            dist[i][j] = d;
            dist[j][i] = d;
            sum += d;
            if d > diameter {
                diameter = d;
                far = (i, j);
            }
        }
    }
    let mean_pairwise = sum / (k * (k - 1) / 2) as f64;

    let shape = if diameter < thresholds.point {
        LimitShape::Point {
            center: GriddedMeasure::average(snapshots)?,
        }
    } else if diameter > thresholds.segment && on_chord(snapshots, far, thresholds.line)? {
        LimitShape::Segment {
            from: snapshots[far.0].clone(),
            to: snapshots[far.1].clone(),
            samples: k,
        }
    } else {
        let groups = single_linkage(&dist, thresholds.point);
        let tight = groups.iter().all(|g| {
            g.iter()
                .all(|&i| g.iter().all(|&j| dist[i][j] < thresholds.point))
        });
        if groups.len() >= 2 && tight {
            let centers = groups
                .iter()
                .map(|g| {
                    let members: Vec<_> = g.iter().map(|&i| snapshots[i].clone()).collect();
                    GriddedMeasure::average(&members)
                })
                .collect::<Result<Vec<_>>>()?;
            LimitShape::Cluster { centers }
        } else {
            LimitShape::Undetermined
        }
    };
    Ok(LimitSetClass {
        shape,
        diameter,
        mean_pairwise,
        tail: snapshots.to_vec(),
    })
}

fn on_chord(snapshots: &[GriddedMeasure], ends: (usize, usize), tol: f64) -> Result<bool> {
    let (a, b) = (&snapshots[ends.0], &snapshots[ends.1]);
    for s in snapshots {
        if chord_distance(a, b, s)? > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

fn single_linkage(dist: &[Vec<f64>], threshold: f64) -> Vec<Vec<usize>> {
    let k = dist.len();
    let mut label = vec![usize::MAX; k];
    let mut groups = Vec::new();
    for start in 0..k {
        if label[start] != usize::MAX {
            continue;
        }
        let id = groups.len();
        let mut members = vec![start];
        label[start] = id;
        let mut cursor = 0;
        while cursor < members.len() {
            let i = members[cursor];
            cursor += 1;
            for j in 0..k {
                if label[j] == usize::MAX && dist[i][j] < threshold {
                    label[j] = id;
                    members.push(j);
                }
            }
        }
        members.sort_unstable();
        groups.push(members);
    }
    groups
}

/// One element of the SRB-like net.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SrbLikeRepresentative {
    pub measure: GriddedMeasure,
    /// Share of all tail snapshots whose nearest representative is this one.
    pub weight: f64,
}

/// Greedy `radius`-net over the tail snapshots of every classified orbit.
///
/// Every tail snapshot lies within `radius` of some representative, and every
/// representative is itself a tail snapshot. Representatives are kept in the
/// order they were first met.
pub fn srb_like_estimate(
    classes: &[LimitSetClass],
    radius: f64,
) -> Result<Vec<SrbLikeRepresentative>> {
    if classes.is_empty() {
        return Err(invalid("no classified initial conditions"));
    }
    if !(radius > 0.0) {
        return Err(invalid("net radius must be positive"));
    }
    let snapshots: Vec<&GriddedMeasure> = classes.iter().flat_map(|c| c.tail.iter()).collect();
    let mut reps: Vec<&GriddedMeasure> = Vec::new();
    let mut nearest = Vec::with_capacity(snapshots.len());
    for s in &snapshots {
        let mut best = (f64::INFINITY, usize::MAX);
        for (r, rep) in reps.iter().enumerate() {
            let d = weakstar_dist(rep, s)?;
            if d < best.0 {
                best = (d, r);
            }
        }
        if best.0 < radius {
            nearest.push(best.1);
        } else {
            nearest.push(reps.len());
            reps.push(s);
        }
    }
    // Reassign against the final net so weights reflect the nearest representative.
    let mut counts = vec![0usize; reps.len()];
    for (s, first) in snapshots.iter().zip(nearest) {
        let mut best = (weakstar_dist(reps[first], s)?, first);
        for (r, rep) in reps.iter().enumerate() {
            let d = weakstar_dist(rep, s)?;
            if d < best.0 {
                best = (d, r);
            }
        }
        counts[best.1] += 1;
    }
    let total = snapshots.len() as f64;
    Ok(reps
        .into_iter()
        .zip(counts)
        .map(|(m, c)| SrbLikeRepresentative {
            measure: m.clone(),
            weight: c as f64 / total,
        })
        .collect())
}
