//! `baybn`: simulate linear Bayesian networks, learn their structure from
//! data, score estimates, sweep replication grids and check theory
//! quantities, with deterministic outputs given a seed.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Numeric(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric failure: {m}"),
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numeric(_) => 4,
        }
    }
}

impl From<baybn::Error> for CliError {
    fn from(e: baybn::Error) -> Self {
        use baybn::Error::*;
        match e {
            InvalidArgument(m) => CliError::Config(m),
            NotPositiveDefinite(m) => CliError::Numeric(m),
            InvalidModel(m) | Data(m) | Dimension(m) => CliError::Data(m),
            Cyclic => CliError::Data("graph contains a directed cycle".into()),
            Io(e) => CliError::Data(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "baybn",
    about = "Linear Bayesian network structure learning via spike-and-slab precision estimation",
    version
)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the sweep harness (0 = all cores). The
    /// BAYBN_THREADS environment variable supplies the default.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scenario: dataset CSV plus ground-truth JSON.
    Simulate {
        #[arg(long)]
        p: Option<usize>,
        /// Maximum moralized-graph degree of the generated DAG.
        #[arg(long = "d-m")]
        d_m: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        /// gaussian | subgaussian_mix | student_t
        #[arg(long)]
        error: Option<String>,
    },
    /// Learn a structure from a dataset CSV.
    Learn {
        /// Dataset CSV path (header row = column names).
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Score an estimate against a ground-truth model.
    Eval {
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        estimate: Option<PathBuf>,
    },
    /// Run a replication sweep over a (p, d_M, n, error) grid.
    Sweep {
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Compute theory quantities and recommended hyper-parameters for a model.
    Theory {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        epsilon1: Option<f64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut config = match &cli.common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.common.seed {
        config.seed = Some(seed);
    }
    if let Some(out) = &cli.common.out {
        config.out = Some(out.display().to_string());
    }
    if let Some(threads) = cli.common.threads {
        config.threads = Some(threads);
    } else if config.threads.is_none() {
        if let Ok(v) = std::env::var("BAYBN_THREADS") {
            let parsed = v.parse().map_err(|_| {
                CliError::Config(format!("BAYBN_THREADS must be an integer, got '{v}'"))
            })?;
            config.threads = Some(parsed);
        }
    }

    match cli.command {
        Command::Simulate { p, d_m, n, error } => {
            commands::simulate(config, p, d_m, n, error)
        }
        Command::Learn { data } => commands::learn(config, data),
        Command::Eval { truth, estimate } => commands::eval(config, truth, estimate),
        Command::Sweep { replications } => commands::sweep(config, replications),
        Command::Theory { model, n, epsilon1 } => commands::theory(config, model, n, epsilon1),
    }
}
