//! `oinv`: decomposability checks, functional sweeps and reproduction runs
//! for multilinear orthogonal matrix invariants.

mod check;
mod repro;
mod sweep;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use oinv_core::oracle::{Flavor, DEFAULT_MAX_DIMENSION};

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok = 0,
    Usage = 1,
    Verdict = 2,
    Resource = 3,
}

/// An error carrying the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub status: Status,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { status: Status::Usage, message: message.into() }
    }

    pub fn resource(message: impl Into<String>) -> Self {
        Self { status: Status::Resource, message: message.into() }
    }
}

#[derive(Parser, Debug)]
#[command(name = "oinv", version, about = "Exact decomposability of multilinear O(n) matrix invariants")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide whether a multilinear trace expression is decomposable.
    Check(CheckArgs),
    /// Evaluate the coefficient-sum and uniform-decoration functionals on
    /// every relation generator over a grid.
    Sweep(SweepArgs),
    /// tr(X1...Xd) and tr(X1+...Xd+) are indecomposable for n = 3, p = 3, d = 4, 5.
    ReproduceGeneral(ReproArgs),
    /// tr(X1-...X4-) is indecomposable for n = 6, p = 3.
    ReproduceSkew(ReproArgs),
    /// Generator coefficient sums vanish mod 3 for n = 3 and not mod 5.
    SumSweep(ReproArgs),
    /// The uniform-decoration functional vanishes on generators mod 3 for n = 6.
    GammaSweep(ReproArgs),
    /// Every multilinear degree-7 invariant of 3x3 matrices is decomposable
    /// for p = 5 (long run).
    Do3Bound(ReproArgs),
    /// List the canonical trace-word classes of degree d.
    Basis {
        #[arg(long)]
        d: usize,
    },
    /// Print the signed path sum of a triple such as "u=[x1] v=[x2] w=[x3]".
    Sigma {
        triple: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Strategy {
    /// Direct up to degree 6, split by flip characters beyond.
    Auto,
    Direct,
    Isotypic,
}

#[derive(Args, Debug, Clone)]
pub struct CheckArgs {
    /// Matrix size.
    #[arg(long)]
    pub n: usize,
    /// Degree (number of matrices).
    #[arg(long)]
    pub d: usize,
    /// Characteristic: 0 for the rationals or an odd prime.
    #[arg(long)]
    pub p: u64,
    /// Matrix space of the slots.
    #[arg(long, value_parser = parse_flavor)]
    pub flavor: Option<Flavor>,
    /// Target expression, e.g. "tr(x1 x2 x3) - 2*tr(x1 x3' x2)"; defaults to tr(x1 ... xd).
    #[arg(long, conflicts_with_all = ["target_sym", "target_antisym"])]
    pub target: Option<String>,
    /// Target tr(x1 ... xd) on symmetric matrices.
    #[arg(long, conflicts_with = "target_antisym")]
    pub target_sym: bool,
    /// Target tr(x1 ... xd) on skew-symmetric matrices.
    #[arg(long)]
    pub target_antisym: bool,
    /// Also decide with the evaluation oracle and require agreement.
    #[arg(long)]
    pub oracle: bool,
    /// Allow degree 7 and above (long runs).
    #[arg(long)]
    pub slow: bool,
    #[arg(long, value_enum, default_value_t = Strategy::Auto)]
    pub strategy: Strategy,
    #[arg(long, value_enum, default_value_t = Strategy::Auto)]
    pub oracle_strategy: Strategy,
    /// Use undecorated generators only.
    #[arg(long)]
    pub plain_triples_only: bool,
    /// Skip generator combination tracking.
    #[arg(long)]
    pub no_certificate: bool,
    /// Seed for the random evaluation cross-check.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Random tuples for the evaluation cross-check (with --oracle).
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    /// Ceiling on oracle evaluation coordinates.
    #[arg(long, env = "OINV_ORACLE_MAX_DIM", default_value_t = DEFAULT_MAX_DIMENSION)]
    pub max_dim: u128,
    /// Also write the JSON document to this file.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Permit p = 2 for oracle-only runs. Unsupported.
    #[arg(long, hide = true)]
    pub unsupported_allow_p2: bool,
}

#[derive(Args, Debug, Clone)]
pub struct SweepArgs {
    /// Matrix sizes, e.g. "3" or "2,3".
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    /// Degrees, e.g. "2,3,4,5".
    #[arg(long, value_delimiter = ',', required = true)]
    pub d: Vec<usize>,
    /// Characteristics.
    #[arg(long, value_delimiter = ',', required = true)]
    pub p: Vec<u64>,
    /// Only undecorated generators.
    #[arg(long)]
    pub plain_triples_only: bool,
    /// Only one letter order per relabelling orbit.
    #[arg(long)]
    pub sorted_labels: bool,
    /// Also compare engine and oracle quotient dimensions.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long, env = "OINV_ORACLE_MAX_DIM", default_value_t = DEFAULT_MAX_DIMENSION)]
    pub max_dim: u128,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ReproArgs {
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, env = "OINV_ORACLE_MAX_DIM", default_value_t = DEFAULT_MAX_DIMENSION)]
    pub max_dim: u128,
}

fn parse_flavor(s: &str) -> Result<Flavor, String> {
    s.parse().map_err(|e: oinv_core::oracle::OracleError| e.to_string())
}

/// Writes the document to stdout and, when asked, to a file.
pub fn emit(value: &serde_json::Value, output: Option<&PathBuf>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).expect("documents serialize");
    println!("{text}");
    if let Some(path) = output {
        std::fs::write(path, format!("{text}\n"))
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<Status, Failure> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Failure::usage(e.to_string()))?;
    }
    match cli.command {
        Command::Check(args) => check::run(&args),
        Command::Sweep(args) => sweep::run(&args),
        Command::ReproduceGeneral(args) => repro::general(&args),
        Command::ReproduceSkew(args) => repro::skew(&args),
        Command::SumSweep(args) => repro::sum_sweep(&args),
        Command::GammaSweep(args) => repro::gamma_sweep(&args),
        Command::Do3Bound(args) => repro::do3_bound(&args),
        Command::Basis { d } => {
            if d == 0 {
                return Err(Failure::usage("d must be positive"));
            }
            for class in oinv_core::words::enumerate_basis(d) {
                println!("{class}");
            }
            Ok(Status::Ok)
        }
        Command::Sigma { triple } => {
            let t: oinv_core::sigma::MultilinearTriple =
                triple.parse().map_err(|e| Failure::usage(format!("{e}")))?;
            for path in oinv_core::sigma::omega(&t) {
                eprintln!("{path}");
            }
            println!("{}", oinv_core::sigma::sigma_lin(&t));
            Ok(Status::Ok)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { Status::Usage as u8 } else { Status::Ok as u8 });
        }
    };
    match run(cli) {
        Ok(status) => ExitCode::from(status as u8),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.status as u8)
        }
    }
}
