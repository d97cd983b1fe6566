//! Reduced symbolic model of an orbit shuttling around a heteroclinic cycle
//! between two saddles `x₁` and `x₂`.
//!
//! Each visit to the neighborhood `U_j` of a saddle enters at distance `d`
//! from its stable separatrix and stays `N ≈ −ln d / ln σ_j` steps, where
//! `σ_j` is the expanding eigenvalue. The regime rule decides how the entry
//! distance of the next visit depends on the previous one:
//!
//! | rule | next `L = −ln d` at `U₂` | next `L′` at `U₁` |
//! |------|--------------------------|-------------------|
//! | A    | `L′² + ln r`             | `L′ + ln r`       |
//! | B    | `L′ + ln r`              | `L + ln r`        |
//! | C    | `L′² + ln r`             | `L² + ln r`       |
//!
//! Distances underflow doubly exponentially under rule C, so everything is
//! carried in the log domain: `L` itself, staying times as `ln N`, and the
//! cumulative times in each neighborhood through log-sum-exp.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::empirical::GriddedMeasure;
use crate::error::{invalid, Error, Result};
use crate::space::Grid;

/// Cell of the symbolic grid holding mass near `x₁`.
pub const X1_CELL: usize = 0;
/// Cell of the symbolic grid holding mass in transit between the saddles.
pub const TRANSIT_CELL: usize = 3;
/// Cell of the symbolic grid holding mass near `x₂`.
pub const X2_CELL: usize = 7;
/// Resolution of the symbolic grid.
pub const SYMBOLIC_CELLS: usize = 8;

/// Eight-cell interval carrying the symbols `{x₁, transit, x₂}`; the other
/// cells stay empty. The saddles sit at opposite ends, so the finest
/// admissible neighborhood (`ε = 2/8`) of one never reaches the other.
pub fn symbolic_grid() -> Grid {
    Grid::interval(SYMBOLIC_CELLS).expect("positive resolution")
}

/// `ln(e^a + e^b)` without overflow; `-∞` is the log of zero.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// How the entry distances of successive visits are coupled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// Hyper-dissipative towards `x₂` only: the orbit statistics converge to `δ_{x₂}`.
    A,
    /// Weakly dissipative near both saddles: convergence to `t·δ_{x₁} + (1−t)·δ_{x₂}`.
    B,
    /// Hyper-dissipative near both saddles: the statistics oscillate along the
    /// whole segment `[δ_{x₁}, δ_{x₂}]`.
    C,
}

impl Regime {
    /// Fixed division ratio used when none is configured.
    pub fn default_ratio(self) -> f64 {
        match self {
            Regime::A | Regime::C => 2.5,
            Regime::B => 2.0,
        }
    }

    /// Entry `L` at `U₂` following a visit to `U₁` entered at `l1`.
    fn enter_u2(self, l1: f64, ln_r: f64) -> f64 {
        match self {
            Regime::A | Regime::C => l1 * l1 + ln_r,
            Regime::B => l1 + ln_r,
        }
    }

    /// Entry `L′` at `U₁` following visits entered at `l1` and then `l2`.
    fn enter_u1(self, l2: f64, l1: f64, ln_r: f64) -> f64 {
        match self {
            Regime::A => l1 + ln_r,
            Regime::B => l2 + ln_r,
            Regime::C => l2 * l2 + ln_r,
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(Regime::A),
            "B" | "b" => Ok(Regime::B),
            "C" | "c" => Ok(Regime::C),
            other => Err(invalid(format!("unknown regime `{other}` (expected A, B or C)"))),
        }
    }
}

/// Per-transit division factor of the distance to the separatrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "ratio", rename_all = "snake_case")]
pub enum RatioChoice {
    Fixed { r: f64 },
    /// A fresh uniform draw in `[2, 3]` at every transit.
    Sampled { seed: u64 },
}

/// Saddle eigenvalues and transit constants of the reduced model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleParams {
    pub sigma1: f64,
    pub sigma2: f64,
    /// `L₀′ = −ln d₁′`, the first entry into `U₁`.
    pub initial_log_distance: f64,
    /// Steps spent in each half-transit between the neighborhoods.
    pub transit_steps: u64,
    /// `None` picks [`Regime::default_ratio`].
    pub ratio: Option<RatioChoice>,
}

impl SaddleParams {
    pub fn new(sigma1: f64, sigma2: f64) -> Result<Self> {
        let p = SaddleParams {
            sigma1,
            sigma2,
            initial_log_distance: 3.0,
            transit_steps: 10,
            ratio: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma1 > 1.0 && self.sigma2 > 1.0) || !self.sigma1.is_finite() || !self.sigma2.is_finite() {
            return Err(invalid(format!(
                "saddle eigenvalues must exceed 1, got {} and {}",
                self.sigma1, self.sigma2
            )));
        }
        if !(self.initial_log_distance > 0.0 && self.initial_log_distance.is_finite()) {
            return Err(invalid("initial log-distance must be positive"));
        }
        if let Some(RatioChoice::Fixed { r }) = self.ratio {
            if !(2.0..=3.0).contains(&r) {
                return Err(invalid(format!("division ratio {r} outside [2, 3]")));
            }
        }
        Ok(())
    }
}

/// `ln N` for the staying time `N = L / ln σ` near a saddle with expanding
/// eigenvalue `σ`, entered at log-distance `L`.
pub fn staying_time(log_distance: f64, sigma: f64) -> Result<f64> {
    if !(log_distance > 0.0) || !(sigma > 1.0) {
        return Err(invalid(format!(
            "staying time needs L > 0 and σ > 1, got L={log_distance}, σ={sigma}"
        )));
    }
    Ok(log_distance.ln() - sigma.ln().ln())
}

/// `ln` of the whole number of steps: `⌈L / ln σ⌉` (at least 1) while that
/// is below 2^52, the real `ln N` beyond.
fn whole_steps(log_distance: f64, sigma: f64) -> Result<f64> {
    let ln_n = staying_time(log_distance, sigma)?;
    let n = log_distance / sigma.ln();
    Ok(if n < 4_503_599_627_370_496.0 {
        n.ceil().max(1.0).ln()
    } else {
        ln_n
    })
}

/// Limit of `ω_n(U₁)` under rule B, as printed in the closed form
/// `(1 + a)/(2 + a + 1/a)` with `a = ln σ₂ / ln σ₁`.
pub fn predicted_t(sigma1: f64, sigma2: f64) -> Result<f64> {
    if !(sigma1 > 1.0 && sigma2 > 1.0) {
        return Err(invalid("saddle eigenvalues must exceed 1"));
    }
    let a = sigma2.ln() / sigma1.ln();
    Ok((1.0 + a) / (2.0 + a + 1.0 / a))
}

/// Limits of `1/ω_n(U₁)` and `1/ω_n(U₂)` under rule B.
pub fn inverse_frequency_limits(sigma1: f64, sigma2: f64) -> Result<(f64, f64)> {
    if !(sigma1 > 1.0 && sigma2 > 1.0) {
        return Err(invalid("saddle eigenvalues must exceed 1"));
    }
    let (l1, l2) = (sigma1.ln(), sigma2.ln());
    Ok((1.0 + l1 / l2, 1.0 + l2 / l1))
}

/// Neighborhood visited during a stay.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Saddle {
    U1,
    U2,
}

/// One visit to a saddle neighborhood.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stay {
    pub cycle: usize,
    pub saddle: Saddle,
    /// `L = −ln d` at entry.
    pub log_distance: f64,
    /// `ln N`, the log of the whole number of steps spent inside.
    pub ln_steps: f64,
}

/// Frequencies at one stopping time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingSample {
    /// 1-based index of the stay this instant falls in.
    pub visit: usize,
    pub cycle: usize,
    pub saddle: Saddle,
    /// Whether the instant is the last step of the stay.
    pub end_of_stay: bool,
    /// `ln n`.
    pub ln_n: f64,
    pub omega_u1: f64,
    pub omega_u2: f64,
    pub omega_transit: f64,
}

impl StoppingSample {
    /// The empirical measure at this instant on the [`symbolic_grid`].
    pub fn measure(&self) -> GriddedMeasure {
        let mut w = vec![0.0; SYMBOLIC_CELLS];
        w[X1_CELL] = self.omega_u1;
        w[TRANSIT_CELL] = self.omega_transit;
        w[X2_CELL] = self.omega_u2;
        GriddedMeasure::from_weights(symbolic_grid(), w).expect("frequencies sum to one")
    }
}

/// Geometric stopping times inside a stay, at offsets `H·2^{j/per_octave}`
/// from its start for `|j| ≤ per_octave·octaves`, where `H` is the time
/// elapsed before the stay. They resolve the frequencies while one stay
/// overtakes the whole history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntraLadder {
    pub per_octave: u32,
    pub octaves: u32,
}

/// Sampling and range options for [`run_cycles`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerOptions {
    /// Runs halt (marking the ledger truncated) once an entry `L` would exceed this.
    pub log_distance_cap: f64,
    /// Stopping times at these fractions of every stay (the end is always sampled).
    pub stay_fractions: Vec<f64>,
    pub ladder: Option<IntraLadder>,
}

impl Default for LedgerOptions {
    fn default() -> Self {
        LedgerOptions {
            log_distance_cap: 1e100,
            stay_fractions: vec![0.25, 0.5, 0.75],
            ladder: Some(IntraLadder {
                per_octave: 16,
                octaves: 8,
            }),
        }
    }
}

/// Staying times and frequency samples of one run of the reduced model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowenLedger {
    pub params: SaddleParams,
    pub regime: Regime,
    pub stays: Vec<Stay>,
    pub samples: Vec<StoppingSample>,
    /// `ln` of the total time spent in `U₁`, `U₂` and transit.
    pub ln_time_u1: f64,
    pub ln_time_u2: f64,
    pub ln_time_transit: f64,
    pub cycles_completed: usize,
    pub truncated: bool,
}

impl BowenLedger {
    pub fn ln_total(&self) -> f64 {
        log_add_exp(log_add_exp(self.ln_time_u1, self.ln_time_u2), self.ln_time_transit)
    }

    /// Samples of the last third of the run (at least one).
    pub fn tail(&self) -> &[StoppingSample] {
        let k = self.samples.len();
        let keep = k.div_ceil(3).max(1).min(k);
        &self.samples[k - keep..]
    }

    pub fn tail_measures(&self) -> Vec<GriddedMeasure> {
        self.tail().iter().map(StoppingSample::measure).collect()
    }

    pub fn last_omega_u1(&self) -> Option<f64> {
        self.samples.last().map(|s| s.omega_u1)
    }

    /// `ω(U₁)` at the end of every stay in `U₁`.
    pub fn cycle_end_omega_u1(&self) -> Vec<f64> {
        self.samples
            .iter()
            .filter(|s| s.end_of_stay && s.saddle == Saddle::U1)
            .map(|s| s.omega_u1)
            .collect()
    }
}

struct Clock {
    ln_u1: f64,
    ln_u2: f64,
    ln_transit: f64,
}

impl Clock {
    fn ln_total(&self) -> f64 {
        log_add_exp(log_add_exp(self.ln_u1, self.ln_u2), self.ln_transit)
    }

    fn sample(&self, visit: usize, cycle: usize, saddle: Saddle, end: bool) -> StoppingSample {
        let ln_n = self.ln_total();
        StoppingSample {
            visit,
            cycle,
            saddle,
            end_of_stay: end,
            ln_n,
            omega_u1: (self.ln_u1 - ln_n).exp(),
            omega_u2: (self.ln_u2 - ln_n).exp(),
            omega_transit: (self.ln_transit - ln_n).exp(),
        }
    }

    fn slot(&mut self, saddle: Saddle) -> &mut f64 {
        match saddle {
            Saddle::U1 => &mut self.ln_u1,
            Saddle::U2 => &mut self.ln_u2,
        }
    }
}

struct Ratios {
    fixed: Option<f64>,
    rng: Option<ChaCha8Rng>,
}

impl Ratios {
    fn ln_next(&mut self) -> f64 {
        match (&self.fixed, &mut self.rng) {
            (Some(r), _) => r.ln(),
            (None, Some(rng)) => rng.gen_range(2.0f64..=3.0).ln(),
            (None, None) => unreachable!("ratio source always configured"),
        }
    }
}

/// Runs `cycles` full cycles (a stay in `U₁`, a transit, a stay in `U₂`, a
/// transit) of the reduced model.
pub fn run_cycles(
    params: &SaddleParams,
    regime: Regime,
    cycles: usize,
    options: &LedgerOptions,
) -> Result<BowenLedger> {
    params.validate()?;
    if cycles == 0 {
        return Err(invalid("cycle count must be at least 1"));
    }
    if options.stay_fractions.iter().any(|f| !(*f > 0.0 && *f < 1.0)) {
        return Err(invalid("stay fractions must lie in (0, 1)"));
    }
    let mut ratios = match params.ratio {
        None => Ratios {
            fixed: Some(regime.default_ratio()),
            rng: None,
        },
        Some(RatioChoice::Fixed { r }) => Ratios {
            fixed: Some(r),
            rng: None,
        },
        Some(RatioChoice::Sampled { seed }) => Ratios {
            fixed: None,
            rng: Some(ChaCha8Rng::seed_from_u64(seed)),
        },
    };
    let ln_transit_step = if params.transit_steps > 0 {
        (params.transit_steps as f64).ln()
    } else {
        f64::NEG_INFINITY
    };

    let mut clock = Clock {
        ln_u1: f64::NEG_INFINITY,
        ln_u2: f64::NEG_INFINITY,
        ln_transit: f64::NEG_INFINITY,
    };
    let mut stays = Vec::new();
    let mut samples = Vec::new();
    let mut truncated = false;
    let mut cycles_completed = 0;
    let mut l1 = params.initial_log_distance;

    let within = |l: f64| -> Result<bool> {
        if !l.is_finite() {
            return Err(Error::CycleDepthOverflow);
        }
        Ok(l <= options.log_distance_cap)
    };

    for cycle in 1..=cycles {
        visit(
            &mut clock, &mut stays, &mut samples, options, cycle, Saddle::U1, l1, params.sigma1,
        )?;
        clock.ln_transit = log_add_exp(clock.ln_transit, ln_transit_step);

        let l2 = regime.enter_u2(l1, ratios.ln_next());
        if !within(l2)? {
            truncated = true;
            break;
        }
        visit(
            &mut clock, &mut stays, &mut samples, options, cycle, Saddle::U2, l2, params.sigma2,
        )?;
        clock.ln_transit = log_add_exp(clock.ln_transit, ln_transit_step);
        cycles_completed = cycle;

        let next = regime.enter_u1(l2, l1, ratios.ln_next());
        if !within(next)? {
            truncated = cycle < cycles;
            break;
        }
        l1 = next;
    }

    Ok(BowenLedger {
        params: *params,
        regime,
        stays,
        samples,
        ln_time_u1: clock.ln_u1,
        ln_time_u2: clock.ln_u2,
        ln_time_transit: clock.ln_transit,
        cycles_completed,
        truncated,
    })
}

#[allow(clippy::too_many_arguments)]
fn visit(
    clock: &mut Clock,
    stays: &mut Vec<Stay>,
    samples: &mut Vec<StoppingSample>,
    options: &LedgerOptions,
    cycle: usize,
    saddle: Saddle,
    log_distance: f64,
    sigma: f64,
) -> Result<()> {
    let ln_steps = whole_steps(log_distance, sigma)?;
    if !ln_steps.is_finite() {
        return Err(Error::CycleDepthOverflow);
    }
    stays.push(Stay {
        cycle,
        saddle,
        log_distance,
        ln_steps,
    });
    let index = stays.len();
    let ln_elapsed = clock.ln_total();

    let mut offsets: Vec<f64> = options
        .stay_fractions
        .iter()
        .map(|f| ln_steps + f.ln())
        .collect();
    if let (Some(ladder), true) = (options.ladder, ln_elapsed.is_finite()) {
        let span = (ladder.per_octave * ladder.octaves) as i64;
        let step = std::f64::consts::LN_2 / ladder.per_octave as f64;
        offsets.extend(
            (-span..=span)
                .map(|j| ln_elapsed + j as f64 * step)
                .filter(|&s| s < ln_steps),
        );
    }
    offsets.sort_by(|a, b| a.total_cmp(b));
    offsets.dedup();

    let before = *clock.slot(saddle);
    for ln_offset in offsets {
        *clock.slot(saddle) = log_add_exp(before, ln_offset);
        samples.push(clock.sample(index, cycle, saddle, false));
    }
    *clock.slot(saddle) = log_add_exp(before, ln_steps);
    samples.push(clock.sample(index, cycle, saddle, true));
    Ok(())
}

/// `count` runs whose first log-distance is `L₀′ + u`, with `u` drawn
/// uniformly from `[0, 1)` by a generator seeded with `seed`.
pub fn ledger_ensemble(
    params: &SaddleParams,
    regime: Regime,
    cycles: usize,
    count: usize,
    seed: u64,
    options: &LedgerOptions,
) -> Result<Vec<BowenLedger>> {
    if count == 0 {
        return Err(invalid("ensemble size must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let mut p = *params;
            p.initial_log_distance += rng.gen::<f64>();
            run_cycles(&p, regime, cycles, options)
        })
        .collect()
}

/// Which of the three statistical behaviors a ledger shows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum RegimeVerdict {
    /// `ω_n(U₁) → 0`: the empirical measures converge to `δ_{x₂}`.
    ConvergentToX2,
    /// `ω_n(U₁) → t`, estimated by the tail mean.
    ConvergentMix { t_hat: f64 },
    /// `ω_n(U₁)` keeps sweeping between `lo` and `hi`.
    Oscillatory { lo: f64, hi: f64 },
}

/// Minimum number of stopping samples accepted by [`classify_regime`].
pub const MIN_LEDGER_SAMPLES: usize = 20;

/// Reads the regime off the last third of a ledger's samples.
pub fn classify_regime(ledger: &BowenLedger) -> Result<RegimeVerdict> {
    if ledger.samples.len() < MIN_LEDGER_SAMPLES {
        return Err(invalid(format!(
            "ledger has {} samples, need at least {MIN_LEDGER_SAMPLES}",
            ledger.samples.len()
        )));
    }
    let tail = ledger.tail();
    let values: Vec<f64> = tail.iter().map(|s| s.omega_u1).collect();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ends: Vec<f64> = tail
        .iter()
        .filter(|s| s.end_of_stay && s.saddle == Saddle::U1)
        .map(|s| s.omega_u1)
        .collect();

    if hi < 0.05 && ends.len() >= 2 && ends.windows(2).all(|w| w[1] <= w[0]) {
        Ok(RegimeVerdict::ConvergentToX2)
    } else if hi - lo < 0.02 {
        let t_hat = values.iter().sum::<f64>() / values.len() as f64;
        Ok(RegimeVerdict::ConvergentMix { t_hat })
    } else if hi - lo > 0.5 {
        Ok(RegimeVerdict::Oscillatory { lo, hi })
    } else {
        Err(Error::InconclusiveLedger(format!(
            "tail ω(U₁) spans [{lo:.4}, {hi:.4}]"
        )))
    }
}
