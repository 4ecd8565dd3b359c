//! `fbmsig`: batch front end for the fbm-signature experiments.

mod commands;
mod config;
mod error;
mod output;

use clap::{Args, Parser, Subcommand};
use config::RunFile;
use error::{CliError, EXIT_OK, EXIT_USAGE, EXIT_VERIFICATION};
use output::{Format, Table};
use std::path::PathBuf;
use std::process::ExitCode;

/// Environment variable capping the worker-thread count.
pub const THREADS_VAR: &str = "FBMSIG_THREADS";

#[derive(Debug, Parser)]
#[command(name = "fbmsig", version, about = "Expected signatures of fractional Brownian motion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone, Default)]
struct Common {
    /// Flat key = value run file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Omit the generation timestamp so reruns are byte-identical.
    #[arg(long)]
    no_timestamp: bool,
    /// Absolute tolerance on each expected value.
    #[arg(long)]
    tolerance: Option<f64>,
}

#[derive(Debug, Args, Clone, Default)]
struct WordArgs {
    /// Hurst indices, comma-separated.
    #[arg(long = "H", value_delimiter = ',', allow_negative_numbers = true)]
    hurst: Vec<f64>,
    /// A word such as 1,2,1,2; repeat the flag for several.
    #[arg(long = "word")]
    words: Vec<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Expected signature coefficients with decay-bound checks.
    ExpectedSig {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        words: WordArgs,
        /// Use every even-length spatial word up to this length.
        #[arg(long)]
        depth: Option<usize>,
        /// Spatial dimension for --depth.
        #[arg(long)]
        d: Option<usize>,
    },
    /// Expected signatures of the uniform-grid approximation.
    ApproxSig {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        words: WordArgs,
        /// Grid sizes, comma-separated.
        #[arg(long, value_delimiter = ',')]
        m: Vec<usize>,
    },
    /// Gap between exact and grid expected signatures, with slope fits.
    Convergence {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        words: WordArgs,
        #[arg(long, value_delimiter = ',')]
        m: Vec<usize>,
    },
    /// Build, solve or verify the three-path cubature formula.
    Cubature {
        #[command(subcommand)]
        action: CubatureAction,
    },
    /// Weak approximation of a test SDE.
    Sde {
        #[command(subcommand)]
        action: SdeAction,
    },
    /// Error constants and weak-error bound shapes.
    Bounds {
        #[command(flatten)]
        common: Common,
        #[arg(long = "H", value_delimiter = ',')]
        hurst: Vec<f64>,
        /// Horizons for the bound shape, comma-separated.
        #[arg(long = "T", value_delimiter = ',')]
        horizon: Vec<f64>,
        /// Growth constant of the observable's derivatives.
        #[arg(long = "M")]
        growth: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long)]
        degree: Option<u32>,
        #[arg(long)]
        d: Option<usize>,
    },
}

#[derive(Debug, Subcommand)]
enum CubatureAction {
    /// Compare both sides of the cubature identity word by word.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long = "H", value_delimiter = ',')]
        hurst: Vec<f64>,
        /// Defaults to the degree claimed for each H.
        #[arg(long)]
        degree: Option<u32>,
        /// Verify the ansatz root instead of the explicit formula.
        #[arg(long)]
        branch: Option<String>,
    },
    /// Solve the moment system and print its residuals.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long = "H", value_delimiter = ',')]
        hurst: Vec<f64>,
        /// plus or minus; both when omitted.
        #[arg(long)]
        branch: Option<String>,
    },
}

#[derive(Debug, Subcommand)]
enum SdeAction {
    /// Cubature against Monte Carlo for dy = dB, f(y) = y².
    Compare {
        #[command(flatten)]
        common: Common,
        #[arg(long = "H")]
        hurst: Option<f64>,
        #[arg(long = "T")]
        horizon: Option<f64>,
        #[arg(long)]
        paths: Option<usize>,
        /// Grid cells of each Monte-Carlo path.
        #[arg(long)]
        steps: Option<usize>,
        /// Runge-Kutta steps per linear piece.
        #[arg(long)]
        rk_steps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        x0: Option<f64>,
    },
}

/// Output settings after merging flags over the run file.
pub struct Sink {
    format: Format,
    output: Option<PathBuf>,
    stamp: bool,
}

/// What a command produced: tables, and whether every check held.
pub struct Outcome {
    pub command: &'static str,
    pub tables: Vec<Table>,
    pub verified: bool,
}

fn resolve(common: &Common) -> Result<(RunFile, Sink, f64), CliError> {
    let rf = match &common.config {
        Some(p) => RunFile::load(p)?,
        None => RunFile::default(),
    };
    let format = match common.format {
        Some(f) => f,
        None => rf.value::<Format>("format")?.unwrap_or(Format::Csv),
    };
    let output = common
        .output
        .clone()
        .or_else(|| rf.raw("output").map(PathBuf::from));
    let stamp = !(common.no_timestamp || rf.flag("no_timestamp")?);
    let tolerance = match common.tolerance {
        Some(t) => t,
        None => rf.value("tolerance")?.unwrap_or(1e-10),
    };
    Ok((rf, Sink { format, output, stamp }, tolerance))
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_VAR) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_VAR} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("cannot size thread pool: {e}")))
}

fn run(cli: Cli) -> Result<u8, CliError> {
    configure_threads()?;
    let (outcome, sink) = match cli.command {
        Command::ExpectedSig {
            common,
            words,
            depth,
            d,
        } => {
            let (rf, sink, tol) = resolve(&common)?;
            (commands::expected_sig(&rf, &words, depth, d, tol)?, sink)
        }
        Command::ApproxSig { common, words, m } => {
            let (rf, sink, _) = resolve(&common)?;
            (commands::approx_sig(&rf, &words, &m)?, sink)
        }
        Command::Convergence { common, words, m } => {
            let (rf, sink, tol) = resolve(&common)?;
            (commands::convergence(&rf, &words, &m, tol)?, sink)
        }
        Command::Cubature {
            action:
                CubatureAction::Verify {
                    common,
                    hurst,
                    degree,
                    branch,
                },
        } => {
            let (rf, sink, tol) = resolve(&common)?;
            (commands::cubature_verify(&rf, &hurst, degree, branch, tol)?, sink)
        }
        Command::Cubature {
            action: CubatureAction::Solve { common, hurst, branch },
        } => {
            let (rf, sink, _) = resolve(&common)?;
            (commands::cubature_solve(&rf, &hurst, branch)?, sink)
        }
        Command::Sde {
            action:
                SdeAction::Compare {
                    common,
                    hurst,
                    horizon,
                    paths,
                    steps,
                    rk_steps,
                    seed,
                    x0,
                },
        } => {
            let (rf, sink, _) = resolve(&common)?;
            let args = commands::SdeArgs {
                hurst,
                horizon,
                paths,
                steps,
                rk_steps,
                seed,
                x0,
            };
            let stamp = sink.stamp;
            (commands::sde_compare(&rf, &args, stamp)?, sink)
        }
        Command::Bounds {
            common,
            hurst,
            horizon,
            growth,
            gamma,
            degree,
            d,
        } => {
            let (rf, sink, _) = resolve(&common)?;
            let args = commands::BoundArgs {
                hurst,
                horizon,
                growth,
                gamma,
                degree,
                d,
            };
            (commands::bounds(&rf, &args)?, sink)
        }
    };
    let doc = output::Document {
        command: outcome.command,
        tables: outcome.tables,
    };
    let bytes = output::render(&doc, sink.format, sink.stamp)?;
    output::emit(&bytes, sink.output.as_deref())?;
    Ok(if outcome.verified { EXIT_OK } else { EXIT_VERIFICATION })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("fbmsig: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
