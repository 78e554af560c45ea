//! Command-line front end: `fit`, `simulate` and `compare`.
//!
//! Every command reads a JSON run configuration, writes CSV tables and a
//! `manifest.json` into the output directory, and maps failures to exit codes
//! (2 for input or configuration problems, 3 when inference fails).

mod fit;
mod output;
mod simulate;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::model::{PriorConfig, ZeroPolicy};
use crate::sampler::SamplerConfig;
use crate::simulation::{GridSpec, ScenarioSpec};
use crate::{Error, Result};

pub use fit::{cmd_fit, run_fit, read_dataset, LoadedData};
pub use output::{format_float, CsvTable};
pub use simulate::{cmd_compare, cmd_simulate, run_compare, run_simulate, study_scenarios};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_INFERENCE: i32 = 3;

fn default_n_quantiles() -> usize {
    4
}

fn default_simplex_tolerance() -> f64 {
    1e-6
}

fn default_acf_lags() -> usize {
    40
}

/// Run configuration shared by all commands. Paths are resolved relative to
/// the directory of the configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Optional; when present it must match the invoked command.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default)]
    pub outcome_columns: Vec<String>,
    #[serde(default)]
    pub exposure_columns: Vec<String>,
    #[serde(default)]
    pub covariate_columns: Vec<String>,
    #[serde(default = "default_n_quantiles")]
    pub n_quantiles: usize,
    #[serde(default)]
    pub priors: PriorConfig,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Overrides `sampler.seed` for fits and seeds the scenario grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub zero_policy: ZeroPolicy,
    /// Allowed deviation of an outcome row sum from 1 before renormalizing.
    #[serde(default = "default_simplex_tolerance")]
    pub simplex_tolerance: f64,
    /// Write every posterior draw to `draws.csv`.
    #[serde(default)]
    pub write_draws: bool,
    #[serde(default = "default_acf_lags")]
    pub acf_max_lag: usize,
    /// Scenario grid for `simulate`; lists default to the full study.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    /// Explicit scenarios for `simulate`, used instead of `grid`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenarios: Option<Vec<ScenarioSpec>>,
    /// Single scenario for `compare`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<ScenarioSpec>,
    /// Only enumerate the work and write the manifest.
    #[serde(default)]
    pub dry_run: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("every field has a default")
    }
}

impl RunConfig {
    /// Reads a configuration file, resolving relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut config: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut config.input, &mut config.output_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    fn check_command(&self, name: &str) -> Result<()> {
        match &self.command {
            Some(c) if c != name => Err(Error::Config(format!("config is for '{c}' but '{name}' was invoked"))),
            _ => Ok(()),
        }
    }

    fn output_dir(&self) -> PathBuf {
        self.output_dir.clone().unwrap_or_else(|| PathBuf::from("dbwqs-out"))
    }

    fn effective_seed(&self) -> u64 {
        self.seed.unwrap_or(self.sampler.seed)
    }

    fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig { seed: self.effective_seed(), ..self.sampler.clone() }
    }
}

/// Exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Adaptation(_) | Error::Sampling(_) => EXIT_INFERENCE,
        _ => EXIT_INPUT,
    }
}

fn report(result: Result<()>) -> i32 {
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "dbwqs", version, about = "Dirichlet Bayesian weighted quantile sum regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the model to a CSV dataset.
    Fit(CommonArgs),
    /// Run a simulation study over a scenario grid.
    Simulate(CommonArgs),
    /// Compare the joint model with separate two-category fits.
    Compare(CommonArgs),
}

#[derive(Debug, clap::Args)]
pub struct CommonArgs {
    /// JSON run configuration.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `reject` or `replace:EPS`.
    #[arg(long)]
    pub zero_policy: Option<ZeroPolicy>,
}

impl CommonArgs {
    /// Loads the configuration and applies command-line overrides.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut config = RunConfig::load(&self.config)?;
        if let Some(seed) = self.seed {
            config.seed = Some(seed);
        }
        if let Some(out) = &self.out {
            config.output_dir = Some(out.clone());
        }
        if let Some(policy) = self.zero_policy {
            config.zero_policy = policy;
        }
        Ok(config)
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let (args, run): (&CommonArgs, fn(&RunConfig) -> i32) = match &cli.command {
        Command::Fit(a) => (a, cmd_fit),
        Command::Simulate(a) => (a, cmd_simulate),
        Command::Compare(a) => (a, cmd_compare),
    };
    match args.resolve() {
        Ok(config) => run(&config),
        Err(e) => report(Err(e)),
    }
}
