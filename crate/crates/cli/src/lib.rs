//! Command-line orchestration of the synthesis pipeline.

pub mod commands;
pub mod formats;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use switchsynth::cycle::DEFAULT_SELECTION_CAP;
use switchsynth::lmi::FeasibilityOptions;

use commands::{Exit, GenTracesArgs, SimulateArgs, StabilizeArgs, EXIT_INPUT, EXIT_OK};

#[derive(Debug, Parser)]
#[command(
    name = "switchsynth",
    version,
    about = "Stabilizing periodic switching logics from trajectory data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a dataset and report the Ψ window of every subsystem.
    Validate { dataset: PathBuf },
    /// Synthesize a stabilizing periodic switching logic.
    Stabilize {
        dataset: PathBuf,
        #[arg(long, default_value_t = 0.1)]
        hs: f64,
        #[arg(long, default_value_t = 0.1)]
        hu: f64,
        #[arg(long, default_value_t = FeasibilityOptions::default().eps_feas)]
        eps: f64,
        #[arg(long, default_value_t = FeasibilityOptions::default().max_iters)]
        max_iters: usize,
        #[arg(long, default_value_t = DEFAULT_SELECTION_CAP)]
        selection_cap: usize,
        /// JSON file `{"stable": [...], "unstable": [...]}`.
        #[arg(long)]
        classification_path: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate a synthesized schedule on known models and check contraction.
    Simulate {
        models: PathBuf,
        result: PathBuf,
        #[arg(long, default_value_t = 100)]
        x0_count: usize,
        #[arg(long, default_value_t = 600)]
        horizon: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        norms_out: Option<PathBuf>,
    },
    /// Generate a dataset by simulating known models.
    GenTraces {
        models: PathBuf,
        /// Number of subsystems; must match the models file.
        #[arg(long)]
        n: Option<usize>,
        /// Minimum dwell time δ.
        #[arg(long)]
        delta: usize,
        /// Maximum dwell time Δ.
        #[arg(long)]
        delta_max: usize,
        /// Comma-separated edges such as `1-2,2-1`.
        #[arg(long, value_delimiter = ',', value_parser = parse_edge)]
        edges: Vec<(usize, usize)>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_edge(s: &str) -> Result<(usize, usize), String> {
    let (i, j) = s
        .trim()
        .split_once('-')
        .ok_or_else(|| format!("edge `{s}` is not of the form i-j"))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<usize>()
            .map_err(|e| format!("edge `{s}`: {e}"))
    };
    Ok((parse(i)?, parse(j)?))
}

/// Runs the command line and returns the exit status.
pub fn run<I, T>(args: I, out: &mut impl Write, err: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let outcome = match &cli.command {
        Command::Validate { dataset } => commands::validate(dataset, out),
        Command::Stabilize {
            dataset,
            hs,
            hu,
            eps,
            max_iters,
            selection_cap,
            classification_path,
            out: path,
        } => commands::stabilize(
            &StabilizeArgs {
                dataset,
                h_s: *hs,
                h_u: *hu,
                eps: *eps,
                max_iters: *max_iters,
                selection_cap: *selection_cap,
                classification: classification_path.as_deref(),
                out: path,
            },
            out,
        ),
        Command::Simulate {
            models,
            result,
            x0_count,
            horizon,
            seed,
            norms_out,
        } => commands::simulate(
            &SimulateArgs {
                models,
                result,
                x0_count: *x0_count,
                horizon: *horizon,
                seed: *seed,
                norms_out: norms_out.as_deref(),
            },
            out,
        ),
        Command::GenTraces {
            models,
            n,
            delta,
            delta_max,
            edges,
            seed,
            out: path,
        } => commands::gen_traces(
            &GenTracesArgs {
                models,
                n: *n,
                delta: *delta,
                delta_max: *delta_max,
                edges,
                seed: *seed,
                out: path,
            },
            out,
        ),
    };
    match outcome {
        Ok(()) => EXIT_OK,
        Err(Exit { code, message }) => {
            if code == commands::EXIT_FAIL {
                let _ = writeln!(out, "FAIL");
            }
            let _ = writeln!(err, "error: {message}");
            code
        }
    }
}
