//! Batch driver: builds formal-power solution families, runs residual
//! verification suites, and emits comparison tables against the catalog's
//! closed forms. All outputs are CSV/JSON files; identical configurations
//! produce bit-identical output.
//!
//! Exit codes: 0 success, 2 usage/config, 3 construction, 4 verification
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod ops;

#[derive(Parser)]
#[command(
    name = "hypan",
    version,
    about = "Klein-Gordon solution families via hyperbolic pseudoanalytic function theory"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ProblemArgs {
    /// Catalog example: wave | saddle | rational | xt-eta
    #[arg(long, conflicts_with = "problem")]
    example: Option<String>,
    /// JSON problem description (potential/f from the built-in catalog)
    #[arg(long)]
    problem: Option<PathBuf>,
    /// Quadrature tolerance override
    #[arg(long)]
    quad_tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Construct formal powers and write powers_{n}_{a}.csv plus metadata.
    Build {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Highest exponent to construct
        #[arg(long, default_value_t = 1)]
        n_max: u32,
        /// Center z0 as "x,t"
        #[arg(long)]
        center: Option<String>,
        /// Integration base point as "x,t"
        #[arg(long)]
        base: Option<String>,
        /// Evaluation grid as "NXxNT"
        #[arg(long, default_value = "21x21")]
        grid: String,
        /// Output directory
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a residual suite and write a report CSV.
    Verify {
        #[command(flatten)]
        problem: ProblemArgs,
        /// factorization | transfer | eta | vekua | successor | phi | kg | all
        #[arg(long)]
        suite: String,
        /// Output directory for the report
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Compare a completed build against the catalog's closed forms.
    Table {
        /// Catalog example name
        #[arg(long)]
        example: String,
        /// Exponent n of the power to compare
        #[arg(long)]
        n: u32,
        /// Coefficient label: 1 | j
        #[arg(long)]
        a: String,
        /// Build directory holding powers_{n}_{a}.csv and metadata.json
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            // the Display form already leads with the module error name
            eprintln!("error: {e}");
            debug_assert!(!e.name().is_empty());
            // configuration mistakes exit 2, construction failures 3
            match e {
                hypan::Error::Parse(_) => ExitCode::from(2),
                _ => ExitCode::from(3),
            }
        }
    }
}

fn run(cli: Cli) -> hypan::Result<ExitCode> {
    // Every invocation re-validates the catalog's (nu, f) pairs.
    hypan::catalog::self_check()?;
    match cli.command {
        Command::Build {
            problem,
            n_max,
            center,
            base,
            grid,
            out,
        } => ops::build(&problem, n_max, center, base, &grid, &out),
        Command::Verify {
            problem,
            suite,
            out,
        } => ops::verify(&problem, &suite, &out),
        Command::Table { example, n, a, out } => ops::table(&example, n, &a, &out),
    }
}
