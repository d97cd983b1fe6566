mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use error::CliError;

/// Orbit statistics, statistical attractors and heteroclinic-cycle regimes.
#[derive(Parser)]
#[command(name = "statattr", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run orbits and write checkpoint counts and snapshot distances.
    Simulate(Common),
    /// Run the reduced heteroclinic-cycle model and classify its regime.
    Bowen(BowenArgs),
    /// Estimate the minimal α-observable statistical attractor.
    Attractor(Common),
    /// Decompose the sampled initial conditions into basins of attractors.
    Decompose(Common),
    /// Classify weak* limit sets and estimate SRB-like measures.
    Limits(Common),
}

/// Flags shared by all subcommands; each overrides the config key of the same name.
#[derive(Args)]
struct Common {
    /// Flat `key = value` file applied before the flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    map: Option<String>,
    /// Map parameter as `name=value`; repeatable.
    #[arg(long = "param")]
    params: Vec<String>,
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    ics: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long)]
    schedule_first: Option<String>,
    #[arg(long)]
    schedule_ratio: Option<String>,
    #[arg(long)]
    alpha: Option<String>,
    /// Comma-separated, strictly decreasing.
    #[arg(long)]
    eps_ladder: Option<String>,
    #[arg(long)]
    delta_tol: Option<String>,
    #[arg(long)]
    resolution_tol: Option<String>,
    #[arg(long)]
    net_radius: Option<String>,
    #[arg(long)]
    out: Option<String>,
    /// Worker threads; 0 picks one per core. Outputs do not depend on it.
    #[arg(long)]
    workers: Option<String>,
}

#[derive(Args)]
struct BowenArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    sigma1: Option<String>,
    #[arg(long)]
    sigma2: Option<String>,
    /// A, B or C.
    #[arg(long)]
    regime: Option<String>,
    #[arg(long)]
    cycles: Option<String>,
    /// Fixed division ratio in [2, 3].
    #[arg(long)]
    ratio: Option<String>,
    /// Draw a fresh ratio per transit from the seed.
    #[arg(long)]
    ratio_sampled: Option<String>,
    /// Halt once an entry log-distance exceeds this; `inf` disables the cap.
    #[arg(long)]
    log_cap: Option<String>,
}

impl Common {
    fn resolve(&self, extra: &[(&str, &Option<String>)]) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::default();
        if let Some(path) = &self.config {
            cfg.apply_file(path)?;
        }
        let flags: [(&str, &Option<String>); 13] = [
            ("map", &self.map),
            ("grid", &self.grid),
            ("ics", &self.ics),
            ("seed", &self.seed),
            ("steps", &self.steps),
            ("schedule-first", &self.schedule_first),
            ("schedule-ratio", &self.schedule_ratio),
            ("alpha", &self.alpha),
            ("eps-ladder", &self.eps_ladder),
            ("delta-tol", &self.delta_tol),
            ("resolution-tol", &self.resolution_tol),
            ("net-radius", &self.net_radius),
            ("out", &self.out),
        ];
        for (k, v) in flags.iter().chain(extra).chain(&[("workers", &self.workers)]) {
            if let Some(v) = v {
                cfg.apply(k, v)?;
            }
        }
        for p in &self.params {
            cfg.apply("param", p)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (cfg, command): (RunConfig, fn(&RunConfig) -> Result<(), CliError>) = match &cli.command {
        Command::Simulate(c) => (c.resolve(&[])?, commands::simulate),
        Command::Attractor(c) => (c.resolve(&[])?, commands::attractor),
        Command::Decompose(c) => (c.resolve(&[])?, commands::decompose_cmd),
        Command::Limits(c) => (c.resolve(&[])?, commands::limits),
        Command::Bowen(b) => (
            b.common.resolve(&[
                ("sigma1", &b.sigma1),
                ("sigma2", &b.sigma2),
                ("regime", &b.regime),
                ("cycles", &b.cycles),
                ("ratio", &b.ratio),
                ("ratio-sampled", &b.ratio_sampled),
                ("log-cap", &b.log_cap),
            ])?,
            commands::bowen,
        ),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| CliError::Config(format!("workers: {e}")))?;
    pool.install(|| command(&cfg))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("statattr: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
