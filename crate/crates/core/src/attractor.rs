//! Basins of statistical attraction and minimal α-observable attractors.
//!
//! A candidate `K` attracts an orbit when, along the tail of its run, the
//! orbit spends almost all of its time near `K`. Two checks make up the
//! verdict:
//!
//! * for every `ε` in the ladder, the cumulative frequency `ω_{n,K,ε}` stays
//!   at least `1 − δ_tol` at every tail checkpoint;
//! * over the tail window (between the first and last tail checkpoints) the
//!   share of visits falling outside `K`'s own cells is at most the
//!   resolution tolerance, `δ_tol / G` unless configured.
//!
//! The second check resolves single cells: every `ε` in the ladder spans at
//! least two cells, so neighborhoods alone cannot tell whether one isolated
//! cell is still visited. Both checks are monotone in `K`: enlarging `K`
//! never turns a verdict from true to false.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bowen::BowenLedger;
use crate::dynamics::{MapSystem, OrbitTrace};
use crate::empirical::{
    limit_set_classify, srb_like_estimate, GriddedMeasure, LimitSetClass, LimitThresholds,
};
use crate::error::{invalid, Error, Result};
use crate::space::{CellSet, Grid, StateSpace};

/// Neighborhood ladder and tolerances of the basin verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinConfig {
    /// Strictly decreasing radii; the smallest must be at least `2/G`.
    pub ladder: Vec<f64>,
    pub delta_tol: f64,
    /// Largest admissible share of tail-window visits outside `K`'s cells.
    /// `None` means `delta_tol / G`.
    pub resolution_tol: Option<f64>,
}

impl BasinConfig {
    /// `{0.2, 0.1, 0.05, 2/G}` (radii not above `2/G` dropped) with `δ_tol = 0.05`.
    pub fn for_grid(grid: &Grid) -> Self {
        BasinConfig {
            ladder: Self::default_ladder(grid),
            delta_tol: 0.05,
            resolution_tol: None,
        }
    }

    pub fn default_ladder(grid: &Grid) -> Vec<f64> {
        let finest = 2.0 / grid.resolution() as f64;
        let mut ladder: Vec<f64> = [0.2, 0.1, 0.05].into_iter().filter(|&e| e > finest).collect();
        ladder.push(finest);
        ladder
    }

    pub fn resolution_tol(&self, grid: &Grid) -> f64 {
        self.resolution_tol
            .unwrap_or(self.delta_tol / grid.resolution() as f64)
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if self.ladder.is_empty() {
            return Err(invalid("ε-ladder is empty"));
        }
        if self.ladder.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(invalid("ε-ladder entries must be positive"));
        }
        if self.ladder.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("ε-ladder must be strictly decreasing"));
        }
        let finest = 2.0 / grid.resolution() as f64;
        let smallest = *self.ladder.last().expect("nonempty");
        if smallest < finest * (1.0 - 1e-12) {
            return Err(invalid(format!(
                "smallest ε {smallest} is below 2/G = {finest} on {grid}"
            )));
        }
        if !(0.0..1.0).contains(&self.delta_tol) {
            return Err(invalid(format!("δ_tol {} outside [0, 1)", self.delta_tol)));
        }
        if let Some(r) = self.resolution_tol {
            if !(r >= 0.0 && r < 1.0) {
                return Err(invalid(format!("resolution tolerance {r} outside [0, 1)")));
            }
        }
        Ok(())
    }

    fn radii(&self, grid: &Grid) -> Vec<usize> {
        self.ladder.iter().map(|&e| grid.neighborhood_radius(e)).collect()
    }
}

/// The part of a run the basin verdict looks at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailProfile {
    grid: Grid,
    /// Cumulative occupation fractions at each tail checkpoint.
    rows: Vec<Vec<f64>>,
    /// Occupation fractions of the visits made inside the tail window.
    window: Vec<f64>,
    /// Snapshots handed to the limit-set classifier.
    classification: Vec<GriddedMeasure>,
}

/// Absorbs summation rounding in threshold comparisons.
const SLACK: f64 = 1e-12;

fn tail_len(k: usize, at_least: usize) -> usize {
    k.div_ceil(3).max(at_least).min(k)
}

impl TailProfile {
    /// The tail is the last third of the checkpoints (at least two); the
    /// classifier sees the last third or the last eight, whichever is longer.
    pub fn from_trace(trace: &OrbitTrace) -> Result<Self> {
        let cps = trace.checkpoints();
        if cps.is_empty() {
            return Err(invalid("trace has no checkpoints"));
        }
        let grid = *trace.grid();
        let tail = &cps[cps.len() - tail_len(cps.len(), 2)..];
        let rows = tail
            .iter()
            .map(|acc| acc.snapshot().map(|m| m.weights().to_vec()))
            .collect::<Result<Vec<_>>>()?;
        let (first, last) = (&tail[0], &tail[tail.len() - 1]);
        let window = if last.total() > first.total() {
            let span = (last.total() - first.total()) as f64;
            last.counts()
                .iter()
                .zip(first.counts())
                .map(|(l, f)| (l - f) as f64 / span)
                .collect()
        } else {
            rows[rows.len() - 1].clone()
        };
        let classification = cps[cps.len() - tail_len(cps.len(), crate::empirical::MIN_TAIL_SNAPSHOTS)..]
            .iter()
            .map(|acc| acc.snapshot())
            .collect::<Result<Vec<_>>>()?;
        Ok(TailProfile {
            grid,
            rows,
            window,
            classification,
        })
    }

    /// Tail of the stopping samples of a reduced-model run, on the symbolic grid.
    pub fn from_ledger(ledger: &BowenLedger) -> Result<Self> {
        let tail = ledger.tail();
        if tail.len() < 2 {
            return Err(invalid("ledger tail needs at least two samples"));
        }
        let classification: Vec<GriddedMeasure> = tail.iter().map(|s| s.measure()).collect();
        let rows: Vec<Vec<f64>> = classification.iter().map(|m| m.weights().to_vec()).collect();
        let (first, last) = (&tail[0], &tail[tail.len() - 1]);
        let rho = (first.ln_n - last.ln_n).exp();
        let window = if rho < 1.0 {
            rows[rows.len() - 1]
                .iter()
                .zip(&rows[0])
                .map(|(l, f)| ((l - rho * f) / (1.0 - rho)).max(0.0))
                .collect()
        } else {
            rows[rows.len() - 1].clone()
        };
        Ok(TailProfile {
            grid: *classification[0].grid(),
            rows,
            window,
            classification,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    pub fn classification_tail(&self) -> &[GriddedMeasure] {
        &self.classification
    }

    pub fn classify(&self, thresholds: &LimitThresholds) -> Result<LimitSetClass> {
        limit_set_classify(&self.classification, thresholds)
    }
}

/// Tail profiles of many traces, computed in parallel.
pub fn profiles(traces: &[OrbitTrace]) -> Result<Vec<TailProfile>> {
    traces.par_iter().map(TailProfile::from_trace).collect()
}

/// Verdict of [`in_basin`] with the scores it was decided on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinVerdict {
    pub member: bool,
    /// Per ladder radius, the smallest tail frequency of the neighborhood.
    pub scores: Vec<f64>,
    /// Share of tail-window visits outside `K`'s own cells.
    pub deficit: f64,
}

/// Whether the orbit behind `profile` lies in the estimated basin of `k`.
pub fn in_basin(profile: &TailProfile, k: &CellSet, config: &BasinConfig) -> Result<BasinVerdict> {
    if k.is_empty() {
        return Err(Error::EmptyCandidate);
    }
    k.grid().ensure_same(profile.grid())?;
    config.validate(profile.grid())?;
    Ok(verdict(profile, k, config))
}

fn verdict(profile: &TailProfile, k: &CellSet, config: &BasinConfig) -> BasinVerdict {
    let scores: Vec<f64> = config
        .ladder
        .iter()
        .map(|&eps| {
            let near = k.eps_neighborhood(eps).expect("validated candidate and ladder");
            profile
                .rows
                .iter()
                .map(|row| near.iter().map(|c| row[c]).sum::<f64>())
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let own: f64 = k.iter().map(|c| profile.window[c]).sum();
    let deficit = (1.0 - own).max(0.0);
    let member = scores.iter().all(|&s| s >= 1.0 - config.delta_tol - SLACK)
        && deficit <= config.resolution_tol(profile.grid()) + SLACK;
    BasinVerdict {
        member,
        scores,
        deficit,
    }
}

/// Monte-Carlo estimate of the basin measure of a candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasinEstimate {
    pub candidate: CellSet,
    pub ladder: Vec<f64>,
    pub verdicts: Vec<BasinVerdict>,
    pub fraction: f64,
}

pub fn basin_fraction(profiles: &[TailProfile], k: &CellSet, config: &BasinConfig) -> Result<BasinEstimate> {
    if profiles.is_empty() {
        return Err(invalid("basin fraction needs at least one trace"));
    }
    if k.is_empty() {
        return Err(Error::EmptyCandidate);
    }
    config.validate(k.grid())?;
    for p in profiles {
        k.grid().ensure_same(p.grid())?;
    }
    let verdicts: Vec<BasinVerdict> = profiles.par_iter().map(|p| verdict(p, k, config)).collect();
    let hits = verdicts.iter().filter(|v| v.member).count();
    Ok(BasinEstimate {
        candidate: k.clone(),
        ladder: config.ladder.clone(),
        fraction: hits as f64 / profiles.len() as f64,
        verdicts,
    })
}

/// One accepted step of the greedy descent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Removal {
    pub cell: usize,
    /// Basin fraction after the removal.
    pub fraction: f64,
}

/// The next cell in greedy order, tried once more against the final set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub cell: usize,
    pub fraction_without: f64,
    pub holds: bool,
}

/// Second construction of an attracting set: union of the supports of the
/// SRB-like representatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportCheck {
    pub tau: f64,
    pub representatives: usize,
    pub support_union: CellSet,
    pub symmetric_difference: CellSet,
}

/// Where the map sends the cells of `K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageDiagnostic {
    pub image: CellSet,
    /// Share of image cells lying in `K`.
    pub retained: f64,
    /// Mean tail-window occupation of the image among basin members.
    pub occupation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttractorReport {
    pub cells: CellSet,
    pub alpha: f64,
    pub basin_fraction: f64,
    /// Verdict for every profile passed in, masked or not.
    pub members: Vec<bool>,
    pub removals: Vec<Removal>,
    /// `None` when a single cell is left.
    pub certificate: Option<Certificate>,
    /// Removals that were attempted and refused.
    pub rejected: usize,
    pub support: Option<SupportCheck>,
    pub image: Option<ImageDiagnostic>,
}

/// Cells within index gap `radius` of `c`.
fn ball(grid: &Grid, c: usize, radius: usize) -> Vec<usize> {
    let g = grid.resolution();
    match grid.space() {
        StateSpace::Circle if 2 * radius + 1 >= g => (0..g).collect(),
        StateSpace::Circle => (0..=2 * radius).map(|o| (c + g + o - radius) % g).collect(),
        StateSpace::Interval => (c.saturating_sub(radius)..=(c + radius).min(g - 1)).collect(),
    }
}

/// Greedy descent from the full space, with neighborhood masses updated
/// incrementally as cells leave `K`.
struct Descent<'a> {
    profiles: &'a [TailProfile],
    grid: Grid,
    radii: Vec<usize>,
    threshold: f64,
    res_tol: f64,
    in_k: Vec<bool>,
    k_len: usize,
    /// Per rung, how many cells of `K` cover each cell.
    cover: Vec<Vec<u32>>,
    alive: Vec<usize>,
    /// Per profile, neighborhood mass of each (rung, row).
    mass: Vec<Vec<f64>>,
    own: Vec<f64>,
}

impl<'a> Descent<'a> {
    fn new(profiles: &'a [TailProfile], population: &[usize], config: &BasinConfig) -> Self {
        let grid = *profiles[0].grid();
        let g = grid.resolution();
        let radii = config.radii(&grid);
        let cover = radii
            .iter()
            .map(|&r| (0..g).map(|j| ball(&grid, j, r).len() as u32).collect())
            .collect();
        let full = CellSet::full(grid);
        let alive = population
            .iter()
            .copied()
            .filter(|&p| verdict(&profiles[p], &full, config).member)
            .collect();
        let mass = profiles
            .iter()
            .map(|p| {
                let sums: Vec<f64> = p.rows.iter().map(|row| row.iter().sum()).collect();
                radii.iter().flat_map(|_| sums.iter().copied()).collect()
            })
            .collect();
        let own = profiles.iter().map(|p| p.window.iter().sum()).collect();
        Descent {
            profiles,
            grid,
            radii,
            threshold: 1.0 - config.delta_tol - SLACK,
            res_tol: config.resolution_tol(&grid) + SLACK,
            in_k: vec![true; g],
            k_len: g,
            cover,
            alive,
            mass,
            own,
        }
    }

    /// Cells that would leave each neighborhood if `c` left `K`.
    fn lost(&self, c: usize) -> Vec<Vec<usize>> {
        self.radii
            .iter()
            .enumerate()
            .map(|(ri, &r)| {
                ball(&self.grid, c, r)
                    .into_iter()
                    .filter(|&j| self.cover[ri][j] == 1)
                    .collect()
            })
            .collect()
    }

    fn survives(&self, p: usize, c: usize, lost: &[Vec<usize>]) -> bool {
        let prof = &self.profiles[p];
        if 1.0 - (self.own[p] - prof.window[c]) > self.res_tol {
            return false;
        }
        let rows = prof.rows.len();
        lost.iter().enumerate().all(|(ri, cells)| {
            prof.rows.iter().enumerate().all(|(i, row)| {
                let drop: f64 = cells.iter().map(|&j| row[j]).sum();
                self.mass[p][ri * rows + i] - drop >= self.threshold
            })
        })
    }

    fn survivors(&self, c: usize, lost: &[Vec<usize>]) -> Vec<usize> {
        self.alive
            .par_iter()
            .copied()
            .filter(|&p| self.survives(p, c, lost))
            .collect()
    }

    fn accept(&mut self, c: usize, survivors: Vec<usize>, lost: &[Vec<usize>]) {
        for &p in &survivors {
            let prof = &self.profiles[p];
            let rows = prof.rows.len();
            self.own[p] -= prof.window[c];
            for (ri, cells) in lost.iter().enumerate() {
                for (i, row) in prof.rows.iter().enumerate() {
                    self.mass[p][ri * rows + i] -= cells.iter().map(|&j| row[j]).sum::<f64>();
                }
            }
        }
        for (ri, &r) in self.radii.iter().enumerate() {
            for j in ball(&self.grid, c, r) {
                self.cover[ri][j] -= 1;
            }
        }
        self.in_k[c] = false;
        self.k_len -= 1;
        self.alive = survivors;
    }

    fn occupation(&self) -> Vec<f64> {
        let mut occ = vec![0.0; self.grid.resolution()];
        for &p in &self.alive {
            for (o, w) in occ.iter_mut().zip(&self.profiles[p].window) {
                *o += w;
            }
        }
        occ
    }

    /// Next cell of `K` in greedy order, skipping `skip`.
    fn next_cell(&self, occ: &[f64], skip: &[bool]) -> Option<usize> {
        (0..self.grid.resolution())
            .filter(|&c| self.in_k[c] && !skip[c])
            .min_by(|&a, &b| occ[a].total_cmp(&occ[b]).then(a.cmp(&b)))
    }

    /// Removes cells while at least `required` profiles stay in the basin.
    fn run(&mut self, required: usize, total: usize) -> (Vec<Removal>, usize) {
        let g = self.grid.resolution();
        let mut refused = vec![false; g];
        let mut removals = Vec::new();
        let mut rejected = 0;
        let mut occ = self.occupation();
        while let Some(c) = self.next_cell(&occ, &refused) {
            if self.k_len == 1 {
                break;
            }
            let lost = self.lost(c);
            let survivors = self.survivors(c, &lost);
            if survivors.len() >= required {
                let changed = survivors.len() != self.alive.len();
                removals.push(Removal {
                    cell: c,
                    fraction: survivors.len() as f64 / total as f64,
                });
                self.accept(c, survivors, &lost);
                if changed {
                    occ = self.occupation();
                }
            } else {
                // A refused cell stays refused: the basin only shrinks with K.
                refused[c] = true;
                rejected += 1;
            }
        }
        (removals, rejected)
    }

    fn cells(&self) -> CellSet {
        CellSet::from_cells(self.grid, (0..self.in_k.len()).filter(|&c| self.in_k[c]))
            .expect("cells on grid")
    }
}

fn check_profiles(profiles: &[TailProfile], config: &BasinConfig) -> Result<()> {
    let first = profiles
        .first()
        .ok_or_else(|| invalid("at least one trace is required"))?;
    for p in profiles {
        first.grid().ensure_same(p.grid())?;
    }
    config.validate(first.grid())
}

fn population(profiles: &[TailProfile], mask: &[bool]) -> Result<Vec<usize>> {
    if mask.len() != profiles.len() {
        return Err(invalid(format!(
            "mask has {} entries for {} traces",
            mask.len(),
            profiles.len()
        )));
    }
    Ok((0..mask.len()).filter(|&i| mask[i]).collect())
}

fn required_count(alpha: f64, total: usize) -> usize {
    ((alpha * total as f64) - 1e-9).ceil().max(1.0) as usize
}

fn descend(
    profiles: &[TailProfile],
    members_of: &[usize],
    required: usize,
    alpha: f64,
    config: &BasinConfig,
) -> Result<AttractorReport> {
    let total = profiles.len();
    let mut descent = Descent::new(profiles, members_of, config);
    if descent.alive.len() < required {
        return Err(Error::AlphaUnreachable {
            alpha,
            achieved: descent.alive.len() as f64 / total as f64,
        });
    }
    let (removals, rejected) = descent.run(required, total);
    let cells = descent.cells();

    let in_population = {
        let mut m = vec![false; total];
        members_of.iter().for_each(|&i| m[i] = true);
        m
    };
    let members: Vec<bool> = profiles
        .par_iter()
        .map(|p| verdict(p, &cells, config).member)
        .collect();
    let hits = |set: &[bool]| {
        set.iter()
            .zip(&in_population)
            .filter(|(m, p)| **m && **p)
            .count()
    };
    let basin_fraction = hits(&members) as f64 / total as f64;

    let certificate = if cells.len() > 1 {
        let occ = descent.occupation();
        descent.next_cell(&occ, &vec![false; descent.in_k.len()]).map(|c| {
            let mut smaller = cells.clone();
            smaller.remove(c);
            let without: Vec<bool> = profiles
                .par_iter()
                .map(|p| verdict(p, &smaller, config).member)
                .collect();
            let count = hits(&without);
            Certificate {
                cell: c,
                fraction_without: count as f64 / total as f64,
                holds: count < required,
            }
        })
    } else {
        None
    };

    Ok(AttractorReport {
        cells,
        alpha,
        basin_fraction,
        members,
        removals,
        certificate,
        rejected,
        support: None,
        image: None,
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(invalid(format!("α = {alpha} outside (0, 1]")))
    }
}

/// Greedy minimal `K` whose basin holds at least a fraction `alpha` of the traces.
pub fn minimal_alpha_attractor(
    profiles: &[TailProfile],
    alpha: f64,
    config: &BasinConfig,
) -> Result<AttractorReport> {
    minimal_restricted(profiles, &vec![true; profiles.len()], alpha, config)
}

/// As [`minimal_alpha_attractor`], counting only masked traces towards the
/// basin; fractions stay relative to all traces.
pub fn minimal_restricted(
    profiles: &[TailProfile],
    mask: &[bool],
    alpha: f64,
    config: &BasinConfig,
) -> Result<AttractorReport> {
    check_alpha(alpha)?;
    check_profiles(profiles, config)?;
    let pop = population(profiles, mask)?;
    let required = required_count(alpha, profiles.len());
    if pop.len() < required {
        return Err(Error::AlphaUnreachable {
            alpha,
            achieved: pop.len() as f64 / profiles.len() as f64,
        });
    }
    descend(profiles, &pop, required, alpha, config)
}

/// Greedy minimal `K` attracting every masked trace, cross-checked against
/// the union of supports (weight above `1/(4G)`) of the SRB-like
/// representatives of the masked traces.
pub fn minimal_attracting(
    profiles: &[TailProfile],
    mask: &[bool],
    config: &BasinConfig,
    thresholds: &LimitThresholds,
) -> Result<AttractorReport> {
    let mut report = attracting_greedy(profiles, mask, config)?;
    let pop = population(profiles, mask)?;
    let classes = pop
        .par_iter()
        .map(|&i| profiles[i].classify(thresholds))
        .collect::<Result<Vec<_>>>()?;
    let reps = srb_like_estimate(&classes, thresholds.point)?;
    let grid = *report.cells.grid();
    let tau = 0.25 / grid.resolution() as f64;
    let mut union = CellSet::empty(grid);
    for r in &reps {
        union = union.union(&r.measure.support(tau))?;
    }
    report.support = Some(SupportCheck {
        tau,
        representatives: reps.len(),
        symmetric_difference: union.symmetric_difference(&report.cells)?,
        support_union: union,
    });
    Ok(report)
}

fn attracting_greedy(profiles: &[TailProfile], mask: &[bool], config: &BasinConfig) -> Result<AttractorReport> {
    check_profiles(profiles, config)?;
    let pop = population(profiles, mask)?;
    if pop.is_empty() {
        return Err(invalid("mask selects no traces"));
    }
    let share = pop.len() as f64 / profiles.len() as f64;
    descend(profiles, &pop, pop.len(), share, config)
}

/// Local minimality check: the first cell of `report` whose removal keeps the
/// masked basin fraction at or above the report's `alpha`, if any.
pub fn minimality_violation(
    profiles: &[TailProfile],
    mask: &[bool],
    report: &AttractorReport,
    config: &BasinConfig,
) -> Result<Option<usize>> {
    check_profiles(profiles, config)?;
    let pop = population(profiles, mask)?;
    let required = required_count(report.alpha, profiles.len());
    if report.cells.len() <= 1 {
        return Ok(None);
    }
    for c in report.cells.iter() {
        let mut smaller = report.cells.clone();
        smaller.remove(c);
        let count = pop
            .par_iter()
            .filter(|&&i| verdict(&profiles[i], &smaller, config).member)
            .count();
        if count >= required {
            return Ok(Some(c));
        }
    }
    Ok(None)
}

/// Images of the quarter points of `K`'s cells under the map.
pub fn image_diagnostic(
    sys: &MapSystem,
    k: &CellSet,
    profiles: &[TailProfile],
    members: &[bool],
) -> Result<ImageDiagnostic> {
    if k.is_empty() {
        return Err(Error::EmptyCandidate);
    }
    let grid = *k.grid();
    let g = grid.resolution() as f64;
    let mut image = CellSet::empty(grid);
    for c in k.iter() {
        for q in [0.25, 0.5, 0.75] {
            let y = sys.step((c as f64 + q) / g);
            if y.is_finite() {
                image.insert(grid.cell_of(y));
            }
        }
    }
    let retained = image.intersection(k)?.len() as f64 / image.len().max(1) as f64;
    let chosen: Vec<&TailProfile> = profiles
        .iter()
        .zip(members)
        .filter(|(_, m)| **m)
        .map(|(p, _)| p)
        .collect();
    let occupation = if chosen.is_empty() {
        0.0
    } else {
        chosen
            .iter()
            .map(|p| image.iter().map(|c| p.window[c]).sum::<f64>())
            .sum::<f64>()
            / chosen.len() as f64
    };
    Ok(ImageDiagnostic {
        image,
        retained,
        occupation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionEntry {
    pub cells: CellSet,
    /// `α` for regular steps, the remaining share for the final attracting step.
    pub alpha: f64,
    /// Basin fraction over all traces.
    pub basin_fraction: f64,
    /// Share of all traces removed by this step.
    pub peeled: f64,
    /// Share of all traces left after this step.
    pub residual: f64,
    pub attracting: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub alpha: f64,
    pub entries: Vec<DecompositionEntry>,
    /// Share of traces inside the union of the basins.
    pub covered: f64,
}

/// Largest number of attractors [`decompose`] returns at level `alpha`.
pub fn decomposition_budget(alpha: f64) -> usize {
    (1.0 / alpha + 1e-9).floor() as usize + 1
}

/// Peels off basins of minimal `α`-observable attractors until at most
/// `δ_tol` of the traces are left, finishing with one attractor for the
/// remainder when it is positive but below `α`.
pub fn decompose(profiles: &[TailProfile], alpha: f64, config: &BasinConfig) -> Result<Decomposition> {
    check_alpha(alpha)?;
    check_profiles(profiles, config)?;
    let total = profiles.len();
    let required = required_count(alpha, total);
    let mut remaining = vec![true; total];
    let mut left = total;
    let mut entries = Vec::new();

    while left as f64 / total as f64 > config.delta_tol && entries.len() < decomposition_budget(alpha) {
        let attracting = left < required;
        let report = if attracting {
            attracting_greedy(profiles, &remaining, config)?
        } else {
            minimal_restricted(profiles, &remaining, alpha, config)?
        };
        let mut peeled = 0;
        for (r, m) in remaining.iter_mut().zip(&report.members) {
            if *r && *m {
                *r = false;
                peeled += 1;
            }
        }
        left -= peeled;
        let all_hits = report.members.iter().filter(|&&m| m).count();
        entries.push(DecompositionEntry {
            alpha: if attracting { peeled as f64 / total as f64 } else { alpha },
            basin_fraction: all_hits as f64 / total as f64,
            peeled: peeled as f64 / total as f64,
            residual: left as f64 / total as f64,
            cells: report.cells,
            attracting,
        });
        if attracting || peeled == 0 {
            break;
        }
    }
    Ok(Decomposition {
        alpha,
        covered: (total - left) as f64 / total as f64,
        entries,
    })
}
