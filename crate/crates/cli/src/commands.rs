use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use statattr::attractor::{
    self, decompose, image_diagnostic, minimal_alpha_attractor, Certificate, ImageDiagnostic,
    Removal, TailProfile,
};
use statattr::bowen::{
    classify_regime, predicted_t, run_cycles, LedgerOptions, RatioChoice, RegimeVerdict,
    SaddleParams,
};
use statattr::dynamics::{lebesgue_starts, run_orbits, MapSystem, OrbitTrace};
use statattr::empirical::{srb_like_estimate, weakstar_dist, LimitThresholds};
use statattr::space::Grid;

use crate::config::RunConfig;
use crate::error::CliError;

/// Floats in CSV files carry 17 significant digits.
fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let path = dir.join(name);
    let file = File::create(&path).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    Ok((path, BufWriter::new(file)))
}

fn csv_writer(dir: &Path, name: &str) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    let (_, w) = create(dir, name)?;
    Ok(csv::Writer::from_writer(w))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let (path, mut w) = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|source| CliError::Io { path, source })
}

fn write_config(cfg: &RunConfig) -> Result<(), CliError> {
    let (path, mut w) = create(&cfg.out, "run.conf")?;
    w.write_all(cfg.to_flat().as_bytes())
        .and_then(|_| w.flush())
        .map_err(|source| CliError::Io { path, source })
}

struct Ensemble {
    sys: MapSystem,
    grid: Grid,
    traces: Vec<OrbitTrace>,
}

fn simulate_ensemble(cfg: &RunConfig) -> Result<Ensemble, CliError> {
    let sys = MapSystem::from_name(&cfg.map, &cfg.params)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let grid = Grid::new(sys.space(), cfg.grid)?;
    let starts = lebesgue_starts(&grid, cfg.ics, cfg.seed)?;
    let traces = run_orbits(&sys, &starts, cfg.steps, &grid, &cfg.schedule())?;
    Ok(Ensemble { sys, grid, traces })
}

#[derive(Serialize)]
struct MapHeader {
    map: String,
    params: BTreeMap<String, f64>,
    space: String,
    grid: usize,
    ics: usize,
    seed: u64,
    steps: u64,
}

impl MapHeader {
    fn new(cfg: &RunConfig, e: &Ensemble) -> Self {
        MapHeader {
            map: e.sys.name().to_string(),
            params: e.sys.params(),
            space: e.grid.space().to_string(),
            grid: e.grid.resolution(),
            ics: cfg.ics,
            seed: cfg.seed,
            steps: cfg.steps,
        }
    }
}

/// `orbits.csv` (nonzero counts per checkpoint) and `snapshots.csv`
/// (distance of each checkpoint to the final one).
pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let e = simulate_ensemble(cfg)?;
    let mut orbits = csv_writer(&cfg.out, "orbits.csv")?;
    orbits.write_record(["ic_id", "checkpoint_n", "cell", "count"])?;
    let mut snaps = csv_writer(&cfg.out, "snapshots.csv")?;
    snaps.write_record(["ic_id", "checkpoint_n", "weakstar_dist"])?;
    for (id, trace) in e.traces.iter().enumerate() {
        let last = trace.last().snapshot()?;
        for acc in trace.checkpoints() {
            let n = acc.total().to_string();
            for (cell, &count) in acc.counts().iter().enumerate().filter(|(_, &c)| c > 0) {
                orbits.write_record([id.to_string(), n.clone(), cell.to_string(), count.to_string()])?;
            }
            let d = weakstar_dist(&acc.snapshot()?, &last)?;
            snaps.write_record([id.to_string(), n, sci(d)])?;
        }
    }
    orbits.flush().map_err(csv::Error::from)?;
    snaps.flush().map_err(csv::Error::from)?;
    write_config(cfg)
}

#[derive(Serialize)]
struct BowenVerdictOut {
    regime: String,
    sigma1: f64,
    sigma2: f64,
    cycles: usize,
    cycles_completed: usize,
    truncated: bool,
    classification: String,
    t_hat: Option<f64>,
    lo: Option<f64>,
    hi: Option<f64>,
    detail: Option<String>,
    predicted_t: f64,
    final_omega_u1: f64,
}

/// `ledger.csv` (every stopping sample) and `verdict.json`.
pub fn bowen(cfg: &RunConfig) -> Result<(), CliError> {
    let mut params = SaddleParams::new(cfg.sigma1, cfg.sigma2)
        .map_err(|e| CliError::Config(e.to_string()))?;
    params.ratio = match (cfg.ratio_sampled, cfg.ratio) {
        (true, _) => Some(RatioChoice::Sampled { seed: cfg.seed }),
        (false, Some(r)) => Some(RatioChoice::Fixed { r }),
        (false, None) => None,
    };
    params.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let options = LedgerOptions {
        log_distance_cap: cfg.log_cap,
        ..LedgerOptions::default()
    };
    let ledger = run_cycles(&params, cfg.regime, cfg.cycles, &options)?;

    let mut w = csv_writer(&cfg.out, "ledger.csv")?;
    w.write_record(["visit_index", "stopping_n_log", "omega_u1", "omega_u2"])?;
    for s in &ledger.samples {
        w.write_record([s.visit.to_string(), sci(s.ln_n), sci(s.omega_u1), sci(s.omega_u2)])?;
    }
    w.flush().map_err(csv::Error::from)?;

    let (mut t_hat, mut lo, mut hi, mut detail) = (None, None, None, None);
    let classification = match classify_regime(&ledger) {
        Ok(RegimeVerdict::ConvergentToX2) => "convergent_to_x2",
        Ok(RegimeVerdict::ConvergentMix { t_hat: t }) => {
            t_hat = Some(t);
            "convergent_mix"
        }
        Ok(RegimeVerdict::Oscillatory { lo: l, hi: h }) => {
            lo = Some(l);
            hi = Some(h);
            "oscillatory"
        }
        Err(statattr::Error::InconclusiveLedger(m)) | Err(statattr::Error::InvalidInput(m)) => {
            detail = Some(m);
            "inconclusive"
        }
        Err(e) => return Err(e.into()),
    };
    let out = BowenVerdictOut {
        regime: format!("{:?}", cfg.regime),
        sigma1: cfg.sigma1,
        sigma2: cfg.sigma2,
        cycles: cfg.cycles,
        cycles_completed: ledger.cycles_completed,
        truncated: ledger.truncated,
        classification: classification.to_string(),
        t_hat,
        lo,
        hi,
        detail,
        predicted_t: predicted_t(cfg.sigma1, cfg.sigma2)?,
        final_omega_u1: ledger.last_omega_u1().unwrap_or(f64::NAN),
    };
    write_json(&cfg.out, "verdict.json", &out)?;
    write_config(cfg)
}

fn profiles_of(e: &Ensemble) -> Result<Vec<TailProfile>, CliError> {
    Ok(attractor::profiles(&e.traces)?)
}

#[derive(Serialize)]
struct AttractorOut {
    #[serde(flatten)]
    header: MapHeader,
    alpha: f64,
    ladder: Vec<f64>,
    delta_tol: f64,
    cells: Vec<usize>,
    basin_fraction: f64,
    removals: Vec<Removal>,
    certificate: Option<Certificate>,
    rejected: usize,
    members: Vec<bool>,
    image: ImageDiagnostic,
}

/// `attractor.json`: the greedy minimal α-observable attractor.
pub fn attractor(cfg: &RunConfig) -> Result<(), CliError> {
    let e = simulate_ensemble(cfg)?;
    let profiles = profiles_of(&e)?;
    let basin = cfg.basin(&e.grid);
    basin.validate(&e.grid).map_err(|x| CliError::Config(x.to_string()))?;
    let report = minimal_alpha_attractor(&profiles, cfg.alpha, &basin)?;
    let image = image_diagnostic(&e.sys, &report.cells, &profiles, &report.members)?;
    let out = AttractorOut {
        header: MapHeader::new(cfg, &e),
        alpha: cfg.alpha,
        ladder: basin.ladder.clone(),
        delta_tol: basin.delta_tol,
        cells: report.cells.cells(),
        basin_fraction: report.basin_fraction,
        removals: report.removals,
        certificate: report.certificate,
        rejected: report.rejected,
        members: report.members,
        image,
    };
    write_json(&cfg.out, "attractor.json", &out)?;
    write_config(cfg)
}

#[derive(Serialize)]
struct EntryOut {
    cells: Vec<usize>,
    alpha: f64,
    basin_fraction: f64,
    peeled: f64,
    residual: f64,
    attracting: bool,
}

#[derive(Serialize)]
struct DecompositionOut {
    #[serde(flatten)]
    header: MapHeader,
    alpha: f64,
    covered: f64,
    entries: Vec<EntryOut>,
}

/// `decomposition.json`: attractors peeled off until the basins cover the run.
pub fn decompose_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let e = simulate_ensemble(cfg)?;
    let profiles = profiles_of(&e)?;
    let basin = cfg.basin(&e.grid);
    basin.validate(&e.grid).map_err(|x| CliError::Config(x.to_string()))?;
    let d = decompose(&profiles, cfg.alpha, &basin)?;
    let out = DecompositionOut {
        header: MapHeader::new(cfg, &e),
        alpha: d.alpha,
        covered: d.covered,
        entries: d
            .entries
            .into_iter()
            .map(|x| EntryOut {
                cells: x.cells.cells(),
                alpha: x.alpha,
                basin_fraction: x.basin_fraction,
                peeled: x.peeled,
                residual: x.residual,
                attracting: x.attracting,
            })
            .collect(),
    };
    write_json(&cfg.out, "decomposition.json", &out)?;
    write_config(cfg)
}

#[derive(Serialize)]
struct ClassOut {
    ic_id: usize,
    shape: String,
    diameter: f64,
    mean_pairwise: f64,
}

#[derive(Serialize)]
struct RepresentativeOut {
    weight: f64,
    measure: Vec<f64>,
}

#[derive(Serialize)]
struct SrbOut {
    #[serde(flatten)]
    header: MapHeader,
    net_radius: f64,
    classes: Vec<ClassOut>,
    representatives: Vec<RepresentativeOut>,
}

/// `srb_like.json`: limit-set shapes per initial condition and the SRB-like net.
pub fn limits(cfg: &RunConfig) -> Result<(), CliError> {
    let e = simulate_ensemble(cfg)?;
    let profiles = profiles_of(&e)?;
    let thresholds = LimitThresholds::default();
    let classes = {
        use rayon::prelude::*;
        profiles
            .par_iter()
            .map(|p| p.classify(&thresholds))
            .collect::<statattr::Result<Vec<_>>>()
            .map_err(|x| match x {
                statattr::Error::InvalidInput(m) => {
                    CliError::Config(format!("{m}; raise steps or lower schedule-first"))
                }
                other => other.into(),
            })?
    };
    let reps = srb_like_estimate(&classes, cfg.net_radius)?;
    let out = SrbOut {
        header: MapHeader::new(cfg, &e),
        net_radius: cfg.net_radius,
        classes: classes
            .iter()
            .enumerate()
            .map(|(i, c)| ClassOut {
                ic_id: i,
                shape: c.shape.name().to_string(),
                diameter: c.diameter,
                mean_pairwise: c.mean_pairwise,
            })
            .collect(),
        representatives: reps
            .into_iter()
            .map(|r| RepresentativeOut {
                weight: r.weight,
                measure: r.measure.weights().to_vec(),
            })
            .collect(),
    };
    write_json(&cfg.out, "srb_like.json", &out)?;
    write_config(cfg)
}
