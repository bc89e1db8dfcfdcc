mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "bellforge", version, about = "Multisetting Bell inequalities and quantum violation criteria")]
struct Cli {
    /// Worker threads for parallel enumeration and restarts.
    #[arg(long, env = "BELLFORGE_THREADS", global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Correlation tensor of a state (nonzero components).
    Tensor {
        /// State file (JSON) or catalog name: ghz:N:alpha, w:N, psi4.
        #[arg(long)]
        state: String,
        /// Also write the component list to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build inequality files.
    #[command(subcommand)]
    Inequality(InequalityCommand),
    /// Exhaustive classical bound, saturating vertices, rank and tightness.
    #[command(alias = "tight")]
    Certify {
        #[arg(long)]
        ineq: PathBuf,
    },
    /// Exhaustive classical bound only.
    Bound {
        #[arg(long)]
        ineq: PathBuf,
    },
    /// Violation criterion of a state.
    Criterion {
        #[arg(long)]
        state: String,
        #[arg(long, value_enum, default_value_t = Mode::Multisetting)]
        mode: Mode,
        #[command(flatten)]
        search: SearchArgs,
        /// Print the full JSON report instead of a summary.
        #[arg(long)]
        json: bool,
    },
    /// Largest quantum value of an inequality on a state.
    QuantumMax {
        #[arg(long)]
        ineq: PathBuf,
        #[arg(long)]
        state: String,
        #[command(flatten)]
        search: SearchArgs,
    },
    /// Criterion values over a family of catalog states, as CSV.
    ///
    /// Columns: family, n_parties, alpha, multisetting, multisetting_threshold,
    /// standard, standard_threshold, wwzb, wwzb_threshold. Values of modes that
    /// were not requested are left empty; alpha is empty for W states. The
    /// thresholds are critical visibilities: 1/√value for the squared criteria,
    /// 1/value for the two-setting ratio, 1 without violation.
    Scan {
        #[arg(long, value_enum)]
        family: Family,
        /// Party counts (comma separated).
        #[arg(long, value_delimiter = ',', required = true)]
        parties: Vec<usize>,
        /// GHZ angles in radians (comma separated).
        #[arg(long, value_delimiter = ',')]
        alphas: Vec<f64>,
        /// Evenly spaced GHZ angles: `start:stop:count`, both ends included.
        #[arg(long)]
        alpha_grid: Option<String>,
        /// Criteria to evaluate (comma separated).
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Mode::Multisetting, Mode::Standard, Mode::Wwzb])]
        modes: Vec<Mode>,
        #[command(flatten)]
        search: SearchArgs,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum InequalityCommand {
    /// Generating inequality for N parties.
    Gen {
        #[arg(long)]
        parties: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Member of the 4x4x2 family, by index or by sign-function indices.
    Family {
        /// Index in 0..4096 (lexicographic in the three sign functions).
        #[arg(long, conflicts_with = "signs", required_unless_present = "signs")]
        index: Option<usize>,
        /// Three sign-function indices in 0..16, comma separated.
        #[arg(long, value_delimiter = ',')]
        signs: Option<Vec<u8>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Identify settings of an inequality and recertify its bound.
    Merge {
        #[arg(long)]
        ineq: PathBuf,
        /// JSON `{"parties": [[r_1, ..., r_m], ...]}` mapping each setting to its representative.
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Clone, Copy)]
struct SearchArgs {
    /// Local searches per optimization.
    #[arg(long, default_value_t = 32)]
    restarts: usize,
    /// Seed for all randomized starts.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    Multisetting,
    Standard,
    Wwzb,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Ghz,
    W,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            log::warn!("could not size the worker pool: {e}");
        }
    }
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_guard_refusal() { 3 } else { 2 })
        }
    }
}
