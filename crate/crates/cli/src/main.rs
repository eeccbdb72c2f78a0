mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] tlfim::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            CliError::Core(e) if e.is_resource() => 4,
            CliError::Io(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "tlfim", version, about = "False vacuum dynamics of the transverse and longitudinal field Ising ring")]
struct Cli {
    /// Worker threads for scan, orbital and disorder (0 = all cores).
    #[arg(long, global = true, env = "TLFIM_JOBS")]
    jobs: Option<usize>,

    /// Model JSON with an optional `options` block; earlier outputs work too.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output file (stdout if absent).
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

/// Model flags shared by every command. Each one overrides the config file.
#[derive(Args, Debug, Default, Clone)]
pub struct BaseArgs {
    /// Number of sites.
    #[arg(long = "L")]
    pub sites: Option<usize>,
    /// Ising coupling.
    #[arg(long = "J", allow_hyphen_values = true)]
    pub coupling: Option<f64>,
    /// nn, power-law or squeeze.
    #[arg(long)]
    pub interaction: Option<String>,
    /// Power-law exponent (default 3).
    #[arg(long)]
    pub exponent: Option<f64>,
    /// Squeezing strength.
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    /// Bond disorder of this single model instance.
    #[arg(long)]
    pub disorder_sigma: Option<f64>,
    #[arg(long)]
    pub disorder_seed: Option<u64>,
    #[arg(long)]
    pub realization: Option<u64>,
}

/// Base flags plus the two fields.
#[derive(Args, Debug, Default, Clone)]
pub struct ModelArgs {
    #[command(flatten)]
    pub base: BaseArgs,
    /// Transverse field.
    #[arg(long, allow_hyphen_values = true)]
    pub g: Option<f64>,
    /// Longitudinal field.
    #[arg(long, allow_hyphen_values = true)]
    pub h: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Quench dynamics: Loschmidt echo, magnetization, correlators.
    Evolve {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        opts: commands::EvolveOpts,
    },
    /// Phase-diagram sweep over an (h, g) grid.
    Scan {
        #[command(flatten)]
        model: BaseArgs,
        #[command(flatten)]
        opts: commands::ScanOpts,
    },
    /// Overlap spectrum of a state, with a two-level fit when it applies.
    Spectrum {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        opts: commands::SpectrumOpts,
    },
    /// Effective two-level model and predicted period.
    Swt {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        opts: commands::SwtOpts,
    },
    /// Exact magnetization and correlators of a bubble state.
    Predict {
        #[command(flatten)]
        model: BaseArgs,
        #[command(flatten)]
        opts: commands::PredictOpts,
    },
    /// P_sub sweep of a reference state other than the false vacuum.
    Orbital {
        #[command(flatten)]
        model: BaseArgs,
        #[command(flatten)]
        opts: commands::OrbitalOpts,
    },
    /// Disorder-averaged quench dynamics.
    Disorder {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        opts: commands::DisorderOpts,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let doc = match &cli.config {
        Some(path) => config::load(path)?,
        None => config::ConfigDoc::default(),
    };
    let ctx = |model: &ModelArgs| -> Result<commands::Context, CliError> {
        Ok(commands::Context {
            spec: config::resolve_spec(&doc, model)?,
            doc: &doc,
            out: cli.out.clone(),
            jobs: cli.jobs.unwrap_or(0),
        })
    };
    let fields = |base: BaseArgs| ModelArgs {
        base,
        ..Default::default()
    };
    match cli.command {
        Command::Evolve { model, opts } => commands::evolve(&ctx(&model)?, opts),
        Command::Scan { model, opts } => commands::scan(&ctx(&fields(model))?, opts),
        Command::Spectrum { model, opts } => commands::spectrum(&ctx(&model)?, opts),
        Command::Swt { model, opts } => commands::swt(&ctx(&model)?, opts),
        Command::Predict { model, opts } => commands::predict(&ctx(&fields(model))?, opts),
        Command::Orbital { model, opts } => commands::orbital(&ctx(&fields(model))?, opts),
        Command::Disorder { model, opts } => commands::disorder(&ctx(&model)?, opts),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
