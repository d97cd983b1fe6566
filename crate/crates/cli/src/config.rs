use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use statattr::attractor::BasinConfig;
use statattr::bowen::Regime;
use statattr::dynamics::Schedule;
use statattr::space::Grid;

use crate::error::CliError;

/// Everything a command needs; every field is settable as `key = value` in
/// a config file and by the flag `--key value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub map: String,
    pub params: BTreeMap<String, f64>,
    pub grid: usize,
    pub ics: usize,
    pub seed: u64,
    pub steps: u64,
    pub schedule_first: u64,
    pub schedule_ratio: f64,
    pub alpha: f64,
    pub eps_ladder: Option<Vec<f64>>,
    pub delta_tol: f64,
    pub resolution_tol: Option<f64>,
    pub net_radius: f64,
    pub out: PathBuf,
    pub workers: usize,
    pub sigma1: f64,
    pub sigma2: f64,
    pub regime: Regime,
    pub cycles: usize,
    pub ratio: Option<f64>,
    pub ratio_sampled: bool,
    pub log_cap: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            map: "doubling".into(),
            params: BTreeMap::new(),
            grid: 1024,
            ics: 200,
            seed: 0,
            steps: 1_000_000,
            schedule_first: 1000,
            schedule_ratio: 1.5,
            alpha: 1.0,
            eps_ladder: None,
            delta_tol: 0.05,
            resolution_tol: None,
            net_radius: 0.02,
            out: PathBuf::from("statattr-out"),
            workers: 0,
            sigma1: 2.0,
            sigma2: 4.0,
            regime: Regime::B,
            cycles: 10_000,
            ratio: None,
            ratio_sampled: false,
            log_cap: 1e100,
        }
    }
}

#[cfg(test)]
const KEYS: &[&str] = &[
    "map",
    "param",
    "grid",
    "ics",
    "seed",
    "steps",
    "schedule-first",
    "schedule-ratio",
    "alpha",
    "eps-ladder",
    "delta-tol",
    "resolution-tol",
    "net-radius",
    "out",
    "workers",
    "sigma1",
    "sigma2",
    "regime",
    "cycles",
    "ratio",
    "ratio-sampled",
    "log-cap",
];

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("{key}: cannot parse `{value}`")))
}

fn float_list(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    value.split(',').map(|v| num(key, v)).collect()
}

impl RunConfig {
    /// Sets one key. `param` takes `name=value`; `param.name` takes a number.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        if let Some(name) = key.strip_prefix("param.") {
            self.params.insert(name.to_string(), num(&key, value)?);
            return Ok(());
        }
        match key.as_str() {
            "map" => self.map = value.to_string(),
            "param" => {
                let (name, v) = value
                    .split_once('=')
                    .ok_or_else(|| CliError::Config(format!("param: expected name=value, got `{value}`")))?;
                self.params.insert(name.trim().to_string(), num("param", v)?);
            }
            "grid" => self.grid = num(&key, value)?,
            "ics" => self.ics = num(&key, value)?,
            "seed" => self.seed = num(&key, value)?,
            "steps" => self.steps = num(&key, value)?,
            "schedule-first" => self.schedule_first = num(&key, value)?,
            "schedule-ratio" => self.schedule_ratio = num(&key, value)?,
            "alpha" => self.alpha = num(&key, value)?,
            "eps-ladder" => self.eps_ladder = Some(float_list(&key, value)?),
            "delta-tol" => self.delta_tol = num(&key, value)?,
            "resolution-tol" => self.resolution_tol = Some(num(&key, value)?),
            "net-radius" => self.net_radius = num(&key, value)?,
            "out" => self.out = PathBuf::from(value),
            "workers" => self.workers = num(&key, value)?,
            "sigma1" => self.sigma1 = num(&key, value)?,
            "sigma2" => self.sigma2 = num(&key, value)?,
            "regime" => {
                self.regime = value
                    .parse()
                    .map_err(|e: statattr::Error| CliError::Config(format!("regime: {e}")))?
            }
            "cycles" => self.cycles = num(&key, value)?,
            "ratio" => self.ratio = Some(num(&key, value)?),
            "ratio-sampled" => self.ratio_sampled = num(&key, value)?,
            "log-cap" => self.log_cap = num(&key, value)?,
            other => return Err(CliError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies a flat `key = value` file; `#` starts a comment.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("{}:{}: expected key = value", path.display(), i + 1))
            })?;
            self.apply(k, v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha must lie in (0, 1], got {}", self.alpha));
        }
        if self.grid == 0 || !self.grid.is_power_of_two() {
            return bad(format!("grid must be a power of two, got {}", self.grid));
        }
        if self.ics == 0 {
            return bad("ics must be at least 1".into());
        }
        if self.steps == 0 {
            return bad("steps must be at least 1".into());
        }
        if self.schedule_first == 0 || !(self.schedule_ratio > 1.0) {
            return bad("schedule needs first >= 1 and ratio > 1".into());
        }
        if !(0.0..1.0).contains(&self.delta_tol) {
            return bad(format!("delta-tol must lie in [0, 1), got {}", self.delta_tol));
        }
        if !(self.net_radius > 0.0) {
            return bad("net-radius must be positive".into());
        }
        if !(self.log_cap > 0.0) {
            return bad("log-cap must be positive".into());
        }
        if self.cycles == 0 {
            return bad("cycles must be at least 1".into());
        }
        Ok(())
    }

    pub fn schedule(&self) -> Schedule {
        Schedule::Geometric {
            first: self.schedule_first,
            ratio: self.schedule_ratio,
        }
    }

    pub fn basin(&self, grid: &Grid) -> BasinConfig {
        let mut cfg = BasinConfig::for_grid(grid);
        if let Some(l) = &self.eps_ladder {
            cfg.ladder = l.clone();
        }
        cfg.delta_tol = self.delta_tol;
        cfg.resolution_tol = self.resolution_tol;
        cfg
    }

    /// The config as a file [`RunConfig::apply_file`] reads back unchanged,
    /// except for `out` and `workers`, which do not affect any output.
    pub fn to_flat(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        line("map", self.map.clone());
        for (k, v) in &self.params {
            line(&format!("param.{k}"), v.to_string());
        }
        line("grid", self.grid.to_string());
        line("ics", self.ics.to_string());
        line("seed", self.seed.to_string());
        line("steps", self.steps.to_string());
        line("schedule-first", self.schedule_first.to_string());
        line("schedule-ratio", self.schedule_ratio.to_string());
        line("alpha", self.alpha.to_string());
        if let Some(l) = &self.eps_ladder {
            line("eps-ladder", l.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
        }
        line("delta-tol", self.delta_tol.to_string());
        if let Some(r) = self.resolution_tol {
            line("resolution-tol", r.to_string());
        }
        line("net-radius", self.net_radius.to_string());
        line("sigma1", self.sigma1.to_string());
        line("sigma2", self.sigma2.to_string());
        line("regime", format!("{:?}", self.regime));
        line("cycles", self.cycles.to_string());
        if let Some(r) = self.ratio {
            line("ratio", r.to_string());
        }
        line("ratio-sampled", self.ratio_sampled.to_string());
        line("log-cap", format!("{:e}", self.log_cap));
        s
    }
}
