//! Built-in one-dimensional maps and checkpointed orbit accumulation.
//!
//! [`run_orbit`] streams an orbit into an [`EmpiricalAccumulator`] and keeps a
//! copy of the counts at every checkpoint of a [`Schedule`], so the trace
//! holds the gridded empirical measures `ν_{n_k}(x₀)`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::empirical::EmpiricalAccumulator;
use crate::error::{invalid, Error, Result};
use crate::space::{sample_lebesgue, Grid, StateSpace};

/// Reduces `y` into `[0, 1)`; never returns `-0.0` or `1.0`.
#[inline]
pub fn wrap_unit(y: f64) -> f64 {
    let r = y - y.floor();
    if r >= 1.0 || r <= 0.0 {
        0.0
    } else {
        r
    }
}

/// The deterministic step rule of a [`MapSystem`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "map", rename_all = "snake_case")]
pub enum MapKind {
    /// `x ↦ 2x mod 1`.
    Doubling,
    /// `x ↦ x + θ mod 1`.
    Rotation { theta: f64 },
    /// `f(0) = 1`, `f(x) = x/2` otherwise; every orbit from `x > 0` tends to 0.
    Contraction,
    /// `x ↦ x + x^{1+γ} mod 1`, neutral fixed point at 0.
    Intermittent { gamma: f64 },
    /// `x ↦ x + (b/4π)·sin(4πx) mod 1`: attracting fixed points at 1/4 and
    /// 3/4, repelling ones at 0 and 1/2.
    TwoBasin { strength: f64 },
}

/// A map of a one-dimensional [`StateSpace`] into itself.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapSystem {
    kind: MapKind,
    space: StateSpace,
}

/// Golden-ratio rotation number `(√5 − 1)/2`.
pub const GOLDEN_ROTATION: f64 = 0.618_033_988_749_894_8;

impl MapSystem {
    pub fn doubling() -> Self {
        MapSystem {
            kind: MapKind::Doubling,
            space: StateSpace::Circle,
        }
    }

    pub fn rotation(theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(invalid("rotation angle must be finite"));
        }
        Ok(MapSystem {
            kind: MapKind::Rotation {
                theta: wrap_unit(theta),
            },
            space: StateSpace::Circle,
        })
    }

    pub fn contraction() -> Self {
        MapSystem {
            kind: MapKind::Contraction,
            space: StateSpace::Interval,
        }
    }

    pub fn intermittent(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(invalid(format!("intermittency exponent must be positive, got {gamma}")));
        }
        Ok(MapSystem {
            kind: MapKind::Intermittent { gamma },
            space: StateSpace::Interval,
        })
    }

    /// `strength` in `(0, 1)` keeps the map an orientation-preserving circle
    /// homeomorphism with `f'(1/4) = f'(3/4) = 1 − strength`.
    pub fn two_basin(strength: f64) -> Result<Self> {
        if !(strength > 0.0 && strength < 1.0) {
            return Err(invalid(format!("two-basin strength must lie in (0, 1), got {strength}")));
        }
        Ok(MapSystem {
            kind: MapKind::TwoBasin { strength },
            space: StateSpace::Circle,
        })
    }

    /// Looks a map up by name. Recognized names and parameters: `doubling`,
    /// `rotation` (`theta`, default golden), `contraction`, `intermittent`
    /// (`gamma`, default 1.5) and `two-basin` (`strength`, default 0.5).
    pub fn from_name(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let allowed: &[&str] = match name {
            "doubling" | "contraction" => &[],
            "rotation" => &["theta"],
            "intermittent" => &["gamma"],
            "two-basin" | "two_basin" => &["strength"],
            other => return Err(invalid(format!("unknown map name `{other}`"))),
        };
        if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(invalid(format!("map `{name}` has no parameter `{k}`")));
        }
        let get = |k: &str, default: f64| params.get(k).copied().unwrap_or(default);
        match name {
            "doubling" => Ok(MapSystem::doubling()),
            "contraction" => Ok(MapSystem::contraction()),
            "rotation" => MapSystem::rotation(get("theta", GOLDEN_ROTATION)),
            "intermittent" => MapSystem::intermittent(get("gamma", 1.5)),
            _ => MapSystem::two_basin(get("strength", 0.5)),
        }
    }

    pub fn kind(&self) -> MapKind {
        self.kind
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            MapKind::Doubling => "doubling",
            MapKind::Rotation { .. } => "rotation",
            MapKind::Contraction => "contraction",
            MapKind::Intermittent { .. } => "intermittent",
            MapKind::TwoBasin { .. } => "two-basin",
        }
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        let mut p = BTreeMap::new();
        match self.kind {
            MapKind::Rotation { theta } => {
                p.insert("theta".into(), theta);
            }
            MapKind::Intermittent { gamma } => {
                p.insert("gamma".into(), gamma);
            }
            MapKind::TwoBasin { strength } => {
                p.insert("strength".into(), strength);
            }
            MapKind::Doubling | MapKind::Contraction => {}
        }
        p
    }

    #[inline]
    pub fn step(&self, x: f64) -> f64 {
        match self.kind {
            MapKind::Doubling => wrap_unit(2.0 * x),
            MapKind::Rotation { theta } => wrap_unit(x + theta),
            MapKind::Contraction => {
                if x == 0.0 {
                    1.0
                } else {
                    // Halving the smallest subnormal rounds to zero, which would
                    // send a positive orbit to 1; keep positive orbits positive.
                    (0.5 * x).max(f64::from_bits(1))
                }
            }
            MapKind::Intermittent { gamma } => wrap_unit(x + x.powf(1.0 + gamma)),
            MapKind::TwoBasin { strength } => {
                wrap_unit(x + strength / (4.0 * PI) * (4.0 * PI * x).sin())
            }
        }
    }
}

impl fmt::Display for MapSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())?;
        for (k, v) in self.params() {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}

/// Initial condition of an orbit.
///
/// A floating-point start is a dyadic rational, and the doubling map sends
/// every dyadic rational to 0 within 64 steps. A Lebesgue-typical initial
/// condition has infinitely many binary digits; `digits` seeds the stream of
/// digits beyond the 64-bit window that the doubling orbit shifts in. Other
/// maps ignore it. `digits = None` means all further digits are zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitStart {
    pub x: f64,
    pub digits: Option<u64>,
}

impl OrbitStart {
    pub fn exact(x: f64) -> Self {
        OrbitStart { x, digits: None }
    }
}

impl From<f64> for OrbitStart {
    fn from(x: f64) -> Self {
        OrbitStart::exact(x)
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `n` Lebesgue-random initial conditions, each with its own digit stream.
pub fn lebesgue_starts(grid: &Grid, n: usize, seed: u64) -> Result<Vec<OrbitStart>> {
    let xs = sample_lebesgue(grid, n, seed)?;
    let mut state = seed ^ 0xD1B5_4A32_D192_ED03;
    Ok(xs
        .into_iter()
        .map(|x| OrbitStart {
            x,
            digits: Some(splitmix64(&mut state)),
        })
        .collect())
}

/// Checkpoint instants for [`run_orbit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "schedule", rename_all = "snake_case")]
pub enum Schedule {
    /// `n_k = ⌈first · ratio^k⌉` up to the orbit length, which is always the
    /// last checkpoint.
    Geometric { first: u64, ratio: f64 },
    /// An explicit strictly increasing list inside `[1, n_max]`.
    Explicit { instants: Vec<u64> },
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule::Geometric {
            first: 1000,
            ratio: 1.5,
        }
    }
}

impl Schedule {
    pub fn checkpoints(&self, n_max: u64) -> Result<Vec<u64>> {
        if n_max == 0 {
            return Err(invalid("orbit length must be at least 1"));
        }
        match self {
            Schedule::Geometric { first, ratio } => {
                if *first == 0 || !(*ratio > 1.0) {
                    return Err(invalid("geometric schedule needs first ≥ 1 and ratio > 1"));
                }
                let mut out: Vec<u64> = Vec::new();
                let mut k = 0i32;
                loop {
                    let n = (*first as f64 * ratio.powi(k)).ceil() as u64;
                    if n >= n_max {
                        break;
                    }
                    if out.last() != Some(&n) {
                        out.push(n);
                    }
                    k += 1;
                }
                out.push(n_max);
                Ok(out)
            }
            Schedule::Explicit { instants } => {
                if instants.is_empty()
                    || instants[0] == 0
                    || *instants.last().unwrap() > n_max
                    || instants.windows(2).any(|w| w[0] >= w[1])
                {
                    return Err(invalid("explicit schedule must increase strictly within [1, n_max]"));
                }
                Ok(instants.clone())
            }
        }
    }
}

/// Checkpointed empirical accumulators along one orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitTrace {
    start: OrbitStart,
    grid: Grid,
    checkpoints: Vec<EmpiricalAccumulator>,
}

impl OrbitTrace {
    pub fn from_parts(
        start: OrbitStart,
        grid: Grid,
        checkpoints: Vec<EmpiricalAccumulator>,
    ) -> Result<Self> {
        for acc in &checkpoints {
            grid.ensure_same(acc.grid())?;
        }
        if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[0].total() >= w[1].total()) {
            return Err(invalid("checkpoints must be nonempty with increasing totals"));
        }
        Ok(OrbitTrace {
            start,
            grid,
            checkpoints,
        })
    }

    pub fn start(&self) -> OrbitStart {
        self.start
    }

    pub fn x0(&self) -> f64 {
        self.start.x
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Accumulators at each checkpoint, in increasing `n`.
    pub fn checkpoints(&self) -> &[EmpiricalAccumulator] {
        &self.checkpoints
    }

    pub fn instants(&self) -> Vec<u64> {
        self.checkpoints.iter().map(|a| a.total()).collect()
    }

    pub fn last(&self) -> &EmpiricalAccumulator {
        self.checkpoints.last().expect("trace has at least one checkpoint")
    }
}

/// Exact doubling-map orbit over a 64-bit window of binary digits.
struct ShiftRegister {
    window: u64,
    digits: Option<u64>,
    buffer: u64,
    left: u32,
}

impl ShiftRegister {
    fn new(start: OrbitStart) -> Self {
        let x = wrap_unit(start.x);
        ShiftRegister {
            window: (x * 18_446_744_073_709_551_616.0) as u64,
            digits: start.digits,
            buffer: 0,
            left: 0,
        }
    }

    fn point(&self) -> f64 {
        // Round to nearest; a window within 2^-54 of 1 stays in the last cell.
        (self.window as f64 * (1.0 / 18_446_744_073_709_551_616.0)).min(1.0 - f64::EPSILON / 2.0)
    }

    fn shift(&mut self) {
        let bit = match self.digits.as_mut() {
            None => 0,
            Some(state) => {
                if self.left == 0 {
                    self.buffer = splitmix64(state);
                    self.left = 64;
                }
                self.left -= 1;
                (self.buffer >> self.left) & 1
            }
        };
        self.window = (self.window << 1) | bit;
    }
}

/// Runs `n_max` steps from `start`, recording `ν_n` at every checkpoint.
pub fn run_orbit(
    sys: &MapSystem,
    start: impl Into<OrbitStart>,
    n_max: u64,
    grid: &Grid,
    schedule: &Schedule,
) -> Result<OrbitTrace> {
    let start = start.into();
    if !start.x.is_finite() {
        return Err(Error::OrbitEscaped { step: 0 });
    }
    if !sys.space().contains(start.x) {
        return Err(invalid(format!("initial point {} outside the {}", start.x, sys.space())));
    }
    let instants = schedule.checkpoints(n_max)?;
    let mut acc = EmpiricalAccumulator::new(*grid);
    let mut snapshots = Vec::with_capacity(instants.len());
    let mut next = instants.iter().copied().peekable();

    if sys.kind() == MapKind::Doubling {
        let mut reg = ShiftRegister::new(start);
        for j in 0..n_max {
            acc.record(reg.point());
            if next.peek() == Some(&(j + 1)) {
                next.next();
                snapshots.push(acc.clone());
            }
            reg.shift();
        }
    } else {
        let mut x = start.x;
        for j in 0..n_max {
            if !x.is_finite() {
                return Err(Error::OrbitEscaped { step: j });
            }
            acc.record(x);
            if next.peek() == Some(&(j + 1)) {
                next.next();
                snapshots.push(acc.clone());
            }
            x = sys.step(x);
        }
    }
    Ok(OrbitTrace {
        start,
        grid: *grid,
        checkpoints: snapshots,
    })
}

/// Runs one orbit per start in parallel; the output order follows `starts`.
pub fn run_orbits(
    sys: &MapSystem,
    starts: &[OrbitStart],
    n_max: u64,
    grid: &Grid,
    schedule: &Schedule,
) -> Result<Vec<OrbitTrace>> {
    starts
        .par_iter()
        .map(|&s| run_orbit(sys, s, n_max, grid, schedule))
        .collect()
}
