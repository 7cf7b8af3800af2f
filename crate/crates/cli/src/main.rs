use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod report;

#[derive(Parser, Debug)]
#[command(name = "reachcert", version)]
#[command(about = "Almost-sure reachability verdicts and certificates for stochastic systems")]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// JSON system description.
    #[arg(long, global = true)]
    system: Option<PathBuf>,

    /// Target radius; overrides the system file.
    #[arg(long, global = true)]
    target_radius: Option<f64>,

    /// Target center as comma-separated values; overrides the system file.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    target_center: Option<Vec<f64>>,

    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Sample count; the default depends on the subcommand.
    #[arg(long, global = true)]
    samples: Option<usize>,

    #[arg(long, global = true)]
    horizon: Option<usize>,

    #[arg(long, global = true)]
    trajectories: Option<usize>,

    #[arg(long, global = true)]
    unit_tol: Option<f64>,

    #[arg(long, global = true)]
    rank_tol: Option<f64>,

    /// Directory for report.json, timings.json and any CSVs. Without it the
    /// report goes to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Also write CSV tables into the output directory.
    #[arg(long, global = true)]
    csv: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the decision tree on a linear system.
    Classify,
    /// Synthesize the certificate the classifier advises.
    Certify {
        /// Where to write the certificate (default: <out>/certificate.json).
        #[arg(long)]
        certificate: Option<PathBuf>,
    },
    /// Check drift and variant conditions of a certificate file.
    Verify {
        #[arg(long)]
        certificate: PathBuf,
    },
    /// Monte-Carlo hitting statistics, optionally with an occupancy decay fit.
    Simulate {
        /// Initial state as comma-separated values (default: the origin).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x0: Option<Vec<f64>>,

        /// Fit the decay exponent of P(x_k ∈ G) from x0 = 0.
        #[arg(long)]
        decay: bool,
    },
    /// Reproduce the worked examples.
    Repro {
        #[arg(value_enum)]
        example: Example,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Example {
    Example1Bounds,
    Example1Certificate,
    Example1Refute,
    Example2,
}

fn configure_threads() -> Result<(), commands::Failure> {
    let Ok(value) = std::env::var("REACHCERT_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| {
            commands::Failure::Usage(format!(
                "REACHCERT_THREADS must be a positive integer, got '{value}'"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| commands::Failure::Usage(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Classify => commands::classify(&cli.common),
        Command::Certify { certificate } => commands::certify(&cli.common, certificate.as_deref()),
        Command::Verify { certificate } => commands::verify(&cli.common, &certificate),
        Command::Simulate { x0, decay } => commands::simulate(&cli.common, x0.as_deref(), decay),
        Command::Repro { example } => commands::repro(&cli.common, example),
    });
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(commands::Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(commands::Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
