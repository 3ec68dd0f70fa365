//! Command-line front end: argument parsing, config resolution and dispatch.

pub mod commands;
pub mod config;
pub mod output;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::steadystate::ModelOptions;
use config::{Format, Length, RunConfig, CONFIG_ENV};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error(transparent)]
    Model(#[from] Error),
}

impl CliError {
    /// 2 for bad configuration, 3 for numerical failures, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 1,
            CliError::Model(e) if e.is_numerical() => 3,
            CliError::Model(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "cavity-array", version, about = "Collective cavity scattering by atom arrays")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Photon-number ratio n2/n1 against the separation of two atoms.
    TwoAtomFringe,
    /// n_N/(N n1) for arrays translated away from an antinode.
    OffsetSweep,
    /// Peak photon number against atom number for both spacing types.
    Scaling,
    /// z/y intensity split and polarizer transmission curves.
    Polarization,
    /// Emission spectra against probe detuning, with Lorentzian fits.
    Spectrum,
    /// Detuning at which the Rayleigh amplitude is independent of m_F.
    Magic,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::TwoAtomFringe => "two-atom-fringe",
            Command::OffsetSweep => "offset-sweep",
            Command::Scaling => "scaling",
            Command::Polarization => "polarization",
            Command::Spectrum => "spectrum",
            Command::Magic => "magic",
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON config, or an earlier output file to rerun. Defaults to $CAVITY_ARRAY_CONFIG.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte Carlo samples per estimate.
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output file; standard output if absent.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
    #[arg(long, global = true)]
    pub n_atoms: Option<usize>,
    /// Array spacing in nm, or e.g. "5.5λ" / "5.5lambda".
    #[arg(long, global = true)]
    pub spacing: Option<Length>,
    #[arg(long, global = true)]
    pub sigma_nm: Option<f64>,
    #[arg(long = "delta-ca-mhz", global = true, allow_negative_numbers = true)]
    pub delta_ca_mhz: Option<f64>,
    /// Treat every atom as a two-level emitter.
    #[arg(long, global = true)]
    pub two_level: bool,
    /// Neglect the atom-induced cavity shift and broadening.
    #[arg(long, global = true)]
    pub bare_cavity: bool,
}

/// Config file (explicit, then environment), then flag overrides.
pub fn resolve_config(common: &CommonArgs) -> Result<RunConfig, CliError> {
    let path = common.config.clone().or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    let mut config = match path {
        Some(p) => RunConfig::load(&p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.mc.seed = seed;
    }
    if let Some(n) = common.samples {
        config.mc.n_samples = n;
    }
    if let Some(n) = common.n_atoms {
        config.array.n_atoms = n;
    }
    if let Some(spacing) = common.spacing {
        config.array.spacing_nm = spacing.resolve(config.cavity.lambda_nm);
    }
    if let Some(sigma) = common.sigma_nm {
        config.array.sigma_nm = sigma;
    }
    if let Some(delta) = common.delta_ca_mhz {
        config.cavity.delta_ca_mhz = delta;
    }
    if common.two_level {
        config.model = ModelOptions { cavity_modification: config.model.cavity_modification, ..ModelOptions::two_level() };
    }
    if common.bare_cavity {
        config.model.cavity_modification = false;
    }
    if let Some(format) = common.format {
        config.output.format = format;
    }
    if let Some(path) = &common.output {
        config.output.path = Some(path.clone());
    }
    config.validate()?;
    Ok(config)
}

/// Runs one command and writes its output.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let mut config = resolve_config(&cli.common)?;
    let report = match cli.common.threads {
        Some(0) => return Err(CliError::Config("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Config(e.to_string()))?
            .install(|| commands::execute(cli.command, &mut config))?,
        None => commands::execute(cli.command, &mut config)?,
    };
    let text = output::render(&report, &config, cli.command.name(), config.output.format);
    output::emit(&text, config.output.path.as_deref())
}
