//! `telemask`: batch runner for telemetry anonymization experiments.

mod commands;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use telemask_core::Error as CoreError;

pub const DEFAULT_SEED: u64 = 2025;

#[derive(Parser, Debug)]
#[command(
    name = "telemask",
    version,
    about = "Privacy mechanisms for XR telemetry"
)]
struct Cli {
    /// Master seed (default 2025, or `seed` from the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// TOML file with `seed`, `jobs` and one table per subcommand.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic multimodal population.
    Synth(commands::SynthArgs),
    /// Pair gaze identities with body identities from two datasets.
    Chimera(commands::ChimeraArgs),
    /// Apply mechanisms to a trace file or a dataset.
    Anonymize(commands::AnonymizeArgs),
    /// Utility metrics between original and anonymized telemetry.
    Metrics(commands::MetricsArgs),
    /// Re-identification rates under one mechanism pairing.
    Reid(commands::ReidArgs),
    /// Parameter sweep with threshold-based operating point selection.
    Sweep(commands::SweepArgs),
    /// Eye x body mechanism pairing grid.
    Grid(commands::GridArgs),
}

#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Core(e) => match e {
                CoreError::MechanismSyntax { .. }
                | CoreError::InvalidConfig(_)
                | CoreError::IncompatibleMetric { .. }
                | CoreError::ModalityMismatch { .. } => 1,
                CoreError::ThresholdInfeasible { .. } => 3,
                _ => 2,
            },
        }
    }
}

pub type Outcome<T = ()> = Result<T, Failure>;

#[derive(Deserialize, Default, Debug)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    seed: Option<u64>,
    jobs: Option<usize>,
    synth: commands::SynthArgs,
    chimera: commands::ChimeraArgs,
    anonymize: commands::AnonymizeArgs,
    metrics: commands::MetricsArgs,
    reid: commands::ReidArgs,
    sweep: commands::SweepArgs,
    grid: commands::GridArgs,
}

fn load_config(path: &Path) -> Outcome<ConfigFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

/// Written next to every command's outputs; `config` is a valid table for
/// the same subcommand in a `--config` file.
#[derive(Serialize)]
pub struct Manifest<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub config: &'a T,
    #[serde(flatten)]
    pub extra: serde_json::Map<String, serde_json::Value>,
}

/// `extra` holds command-specific fields such as dataset listings.
pub fn write_manifest<T: Serialize>(
    dir: &Path,
    command: &'static str,
    seed: u64,
    config: &T,
    extra: serde_json::Map<String, serde_json::Value>,
) -> Outcome {
    let m = Manifest {
        tool: "telemask",
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed,
        config,
        extra,
    };
    let mut bytes = serde_json::to_vec_pretty(&m).map_err(CoreError::from)?;
    bytes.push(b'\n');
    telemask_core::telemetry::write_atomic(&dir.join("manifest.json"), &bytes)?;
    Ok(())
}

/// Fills unset options of `self` from `base`.
pub trait Layer: Sized {
    fn over(self, base: Self) -> Self;
}

#[macro_export]
macro_rules! layered {
    ($t:ty { $($opt:ident),* $(,)? } $([ $($vec:ident),* ])? $(< $($sub:ident),* >)?) => {
        impl $crate::Layer for $t {
            fn over(mut self, base: Self) -> Self {
                $( self.$opt = self.$opt.or(base.$opt); )*
                $($( if self.$vec.is_empty() { self.$vec = base.$vec; } )*)?
                $($( self.$sub = self.$sub.over(base.$sub); )*)?
                self
            }
        }
    };
}

/// Protocol flags shared by reid, sweep and grid.
#[derive(Args, Serialize, Deserialize, Default, Debug, Clone)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolArgs {
    /// Cross-validation folds.
    #[arg(long)]
    pub folds: Option<usize>,
    /// Feature window length in seconds.
    #[arg(long)]
    pub window: Option<f64>,
    /// Window stride in seconds.
    #[arg(long)]
    pub stride: Option<f64>,
}

layered!(ProtocolArgs {
    folds,
    window,
    stride
});

impl ProtocolArgs {
    /// Fills defaults and returns the protocol for `seed`.
    pub fn resolve(&mut self, seed: u64) -> telemask_core::identifier::Protocol {
        let d = telemask_core::identifier::Protocol::with_seed(seed);
        telemask_core::identifier::Protocol {
            folds: *self.folds.get_or_insert(d.folds),
            window: *self.window.get_or_insert(d.window),
            stride: *self.stride.get_or_insert(d.stride),
            seed,
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let file = match &cli.config {
        Some(p) => load_config(p)?,
        None => ConfigFile::default(),
    };
    let seed = cli.seed.or(file.seed).unwrap_or(DEFAULT_SEED);
    if let Some(j) = cli.jobs.or(file.jobs) {
        if j == 0 {
            return Err(Failure::Usage("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| Failure::Usage(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Synth(a) => commands::synth(a.over(file.synth), seed),
        Command::Chimera(a) => commands::chimera(a.over(file.chimera), seed),
        Command::Anonymize(a) => commands::anonymize(a.over(file.anonymize), seed),
        Command::Metrics(a) => commands::metrics(a.over(file.metrics), seed),
        Command::Reid(a) => commands::reid(a.over(file.reid), seed),
        Command::Sweep(a) => commands::sweep(a.over(file.sweep), seed),
        Command::Grid(a) => commands::grid(a.over(file.grid), seed),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = if cli.verbose { "debug" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("telemask: {e}");
            ExitCode::from(e.code())
        }
    }
}
