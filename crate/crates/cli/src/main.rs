//! `chromahom`: delay scans, pump calibration, time-tag Monte Carlo and
//! reference comparison reports for two-color HOM interference.

mod commands;
mod config;
mod output;
mod units;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::ScenarioConfig;

#[derive(Debug)]
pub enum CliError {
    /// Bad or inconsistent configuration; exit code 2.
    Config(String),
    /// Anything that fails after the configuration was accepted; exit code 3.
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl From<chromahom_core::Error> for CliError {
    fn from(e: chromahom_core::Error) -> Self {
        use chromahom_core::Error as E;
        match e {
            E::Config(_) | E::Domain(_) => CliError::Config(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(format!("i/o error: {e}"))
    }
}

#[derive(Parser)]
#[command(
    name = "chromahom",
    version,
    about = "Two-color Hong-Ou-Mandel interference simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cross-color dip and both anti-dips versus delay, with Gaussian fits.
    Dip(Common),
    /// Same-color anti-dips only.
    Antidip(Common),
    /// Transition probability versus pump power and the peak-ratio table.
    Calibrate(Common),
    /// Generate time-tag files for every Monte Carlo delay point.
    Timetags(Common),
    /// Correlate tag files and analyze the coincidence peaks and dip.
    Correlate {
        #[command(flatten)]
        common: Common,
        /// Directory written by `timetags` [default: <out>/tags].
        #[arg(long)]
        tags: Option<PathBuf>,
    },
    /// Compare simulated values with the reference measurements.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario JSON; omitted sections take their defaults.
    #[arg(long)]
    config: PathBuf,
    /// Output directory [default: output_dir from the config].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides monte_carlo.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads [default: all cores].
    #[arg(long, env = "CHROMAHOM_THREADS")]
    threads: Option<usize>,
}

impl Common {
    fn context(&self) -> Result<commands::Context, CliError> {
        if let Some(n) = self.threads {
            if n == 0 {
                return Err(CliError::Config("--threads must be positive".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| CliError::Runtime(e.to_string()))?;
        }
        let mut cfg = ScenarioConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            cfg.monte_carlo.seed = seed;
        }
        let dir = self
            .out
            .clone()
            .or_else(|| cfg.output_dir.clone())
            .ok_or_else(|| CliError::Config("no --out given and no output_dir in the config".into()))?;
        cfg.validate()?;
        commands::Context::new(cfg, dir)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Dip(c) => commands::dip(&c.context()?),
        Command::Antidip(c) => commands::antidip(&c.context()?),
        Command::Calibrate(c) => commands::calibrate(&c.context()?),
        Command::Timetags(c) => commands::timetags(&c.context()?),
        Command::Correlate { common, tags } => {
            let ctx = common.context()?;
            let tags = tags.unwrap_or_else(|| ctx.out.dir().join(commands::TAG_DIR));
            commands::correlate(&ctx, &tags)
        }
        Command::Report(c) => commands::report(&c.context()?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("chromahom: {e}");
            ExitCode::from(match e {
                CliError::Config(_) => 2,
                CliError::Runtime(_) => 3,
            })
        }
    }
}
