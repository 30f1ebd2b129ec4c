//! Run configuration: command-line flags over a TOML file over defaults.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use heavy_atom::KAPPA_CRIT;

use crate::error::{CliError, CliResult};

/// Environment variable that overrides `--cache-dir`.
pub const CACHE_ENV: &str = "HEAVY_ATOM_CACHE";

pub const DEFAULT_Z_GRID: [f64; 4] = [10.0, 100.0, 1000.0, 10000.0];
pub const DEFAULT_KAPPA: f64 = 0.5;
pub const DEFAULT_DELTA: f64 = 5.0 / 9.0;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_MC_SAMPLES: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Solve the universal TF equation and cache per-Z atoms.
    TfSolve,
    /// Upper-bound error terms and their scaling fits.
    BoundsUpper,
    /// Semiclassical lower bounds.
    BoundsLower,
    /// Exchange-hole scans and the correlation-inequality sweep.
    HoleScan,
    /// Upper and lower bounds around E_TF on the Z grid.
    Sandwich,
    /// Invariant suite; exits 1 on any violation.
    Check,
}

impl Command {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::TfSolve => "tf_solve",
            Self::BoundsUpper => "bounds_upper",
            Self::BoundsLower => "bounds_lower",
            Self::HoleScan => "hole_scan",
            Self::Sandwich => "sandwich",
            Self::Check => "check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(
    name = "heavy-atom",
    version,
    about = "Thomas-Fermi bounds for heavy neutral atoms"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArgs,
    #[command(flatten)]
    pub options: Options,
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum CommandArgs {
    /// Solve the universal TF equation and cache per-Z atoms.
    TfSolve,
    /// Upper-bound error terms and their scaling fits.
    BoundsUpper,
    /// Semiclassical lower bounds.
    BoundsLower,
    /// Exchange-hole scans and the correlation-inequality sweep.
    HoleScan,
    /// Upper and lower bounds around E_TF on the Z grid.
    Sandwich,
    /// Invariant suite; exits 1 on any violation.
    Check,
}

impl From<CommandArgs> for Command {
    fn from(value: CommandArgs) -> Self {
        match value {
            CommandArgs::TfSolve => Self::TfSolve,
            CommandArgs::BoundsUpper => Self::BoundsUpper,
            CommandArgs::BoundsLower => Self::BoundsLower,
            CommandArgs::HoleScan => Self::HoleScan,
            CommandArgs::Sandwich => Self::Sandwich,
            CommandArgs::Check => Self::Check,
        }
    }
}

/// Flags shared by every command; unset flags fall back to the config file.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Options {
    /// Comma-separated nuclear charges.
    #[arg(long, global = true, value_delimiter = ',')]
    pub z_grid: Option<Vec<f64>>,
    /// Z/c, in (0, 0.906).
    #[arg(long, global = true)]
    pub kappa: Option<f64>,
    /// Coherent-state width exponent, in (1/3, 2/3).
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte-Carlo samples per point; 0 disables the Monte-Carlo mode.
    #[arg(long, global = true)]
    pub mc_samples: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Cache directory; `HEAVY_ATOM_CACHE` takes precedence.
    #[arg(long, global = true)]
    pub cache_dir: Option<PathBuf>,
    /// TOML file with any of the options above (snake_case keys).
    #[arg(long, global = true)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl Options {
    /// Fields set here win over `fallback`.
    fn or(self, fallback: Options) -> Options {
        Options {
            z_grid: self.z_grid.or(fallback.z_grid),
            kappa: self.kappa.or(fallback.kappa),
            delta: self.delta.or(fallback.delta),
            seed: self.seed.or(fallback.seed),
            mc_samples: self.mc_samples.or(fallback.mc_samples),
            jobs: self.jobs.or(fallback.jobs),
            output_dir: self.output_dir.or(fallback.output_dir),
            format: self.format.or(fallback.format),
            cache_dir: self.cache_dir.or(fallback.cache_dir),
            config: self.config,
        }
    }
}

/// Fully resolved and validated settings of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub z_grid: Vec<f64>,
    pub kappa: f64,
    pub delta: f64,
    pub seed: u64,
    pub mc_samples: u64,
    pub jobs: usize,
    pub output_dir: PathBuf,
    pub format: Format,
    pub cache_dir: PathBuf,
}

fn load_file(path: &Path) -> CliResult<Options> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config("config", format!("cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| CliError::config("config", e.to_string()))
}

impl RunConfig {
    /// Resolves `options` against the optional config file and defaults.
    /// `cache_env` is the value of [`CACHE_ENV`], if set.
    pub fn resolve(
        command: Command,
        options: Options,
        cache_env: Option<PathBuf>,
    ) -> CliResult<Self> {
        let file = match &options.config {
            Some(path) => load_file(path)?,
            None => Options::default(),
        };
        let merged = options.or(file);
        let output_dir = merged.output_dir.unwrap_or_else(|| PathBuf::from("out"));
        let cache_dir = cache_env
            .or(merged.cache_dir)
            .unwrap_or_else(|| output_dir.join("cache"));
        let config = RunConfig {
            command,
            z_grid: merged.z_grid.unwrap_or_else(|| DEFAULT_Z_GRID.to_vec()),
            kappa: merged.kappa.unwrap_or(DEFAULT_KAPPA),
            delta: merged.delta.unwrap_or(DEFAULT_DELTA),
            seed: merged.seed.unwrap_or(DEFAULT_SEED),
            mc_samples: merged.mc_samples.unwrap_or(DEFAULT_MC_SAMPLES),
            jobs: merged
                .jobs
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
            output_dir,
            format: merged.format.unwrap_or(Format::Csv),
            cache_dir,
        };
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> CliResult<()> {
        if self.z_grid.is_empty() {
            return Err(CliError::config("z_grid", "must not be empty"));
        }
        if let Some(z) = self.z_grid.iter().find(|z| !(z.is_finite() && **z > 0.0)) {
            return Err(CliError::config(
                "z_grid",
                format!("{z} is not a positive charge"),
            ));
        }
        if !(self.kappa > 0.0 && self.kappa < KAPPA_CRIT) {
            return Err(CliError::config(
                "kappa",
                format!("{} is outside (0, {KAPPA_CRIT:.6})", self.kappa),
            ));
        }
        if !(self.delta > 1.0 / 3.0 && self.delta < 2.0 / 3.0) {
            return Err(CliError::config(
                "delta",
                format!("{} is outside (1/3, 2/3)", self.delta),
            ));
        }
        if self.jobs == 0 {
            return Err(CliError::config("jobs", "must be at least 1"));
        }
        if self.mc_samples == 1 {
            return Err(CliError::config("mc_samples", "must be 0 or at least 2"));
        }
        if self.command == Command::Sandwich {
            let increasing = self.z_grid.windows(2).all(|w| w[1] > w[0]);
            let span = (self.z_grid[self.z_grid.len() - 1] / self.z_grid[0]).log10();
            if self.z_grid.len() < 3 || !increasing || span < 2.0 - 1e-12 {
                return Err(CliError::config(
                    "z_grid",
                    "sandwich needs at least 3 increasing charges spanning two decades",
                ));
            }
        }
        Ok(())
    }
}
