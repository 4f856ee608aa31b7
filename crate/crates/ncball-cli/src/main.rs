//! `ncball`: command-line front end for the ncball-core library.
//!
//! Exit codes: 0 on success, 1 on a mathematical rejection (a failed check,
//! a refused certificate, a non-member), 2 on usage, input or I/O errors.

mod commands;
mod output;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "ncball", version, about = "Noncommutative polynomials, matrix balls and ball maps")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Base seed for every randomised step.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Override the command's default tolerance.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value = "json")]
    pub format: output::Format,
}

/// A polynomial given as a `.ncp` JSON file or as text over a grid.
#[derive(Args, Debug, Clone)]
pub struct PolyInput {
    /// Polynomial file: `{"gprime", "g", "text", "coefficients"}`.
    #[arg(long, conflicts_with = "text")]
    pub poly: Option<PathBuf>,
    /// Polynomial text; needs `--grid`.
    #[arg(long, requires = "grid")]
    pub text: Option<String>,
    /// Grid as `ROWS,COLS`.
    #[arg(long)]
    pub grid: Option<String>,
    /// JSON object of named coefficient matrices used by `--text`.
    #[arg(long)]
    pub coeffs: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse a polynomial and print its canonical form.
    Parse(PolyInput),
    /// Evaluate a polynomial on a matrix tuple.
    Eval {
        #[command(flatten)]
        poly: PolyInput,
        #[arg(long)]
        tuple: PathBuf,
    },
    #[command(subcommand)]
    Ball(BallCmd),
    #[command(subcommand)]
    Pencil(PencilCmd),
    #[command(subcommand)]
    Moebius(MoebiusCmd),
    #[command(subcommand)]
    Fock(FockCmd),
    #[command(subcommand)]
    Iso(IsoCmd),
    #[command(subcommand)]
    Cling(ClingCmd),
    #[command(subcommand)]
    Ballmap(BallmapCmd),
    #[command(subcommand)]
    Nullss(NullssCmd),
    /// Run the verification suite.
    Suite {
        /// Only run checks whose name contains this string.
        #[arg(long)]
        filter: Option<String>,
        /// Corrupt the input of the named check.
        #[arg(long)]
        inject_fault: Option<String>,
        /// Include per-check runtimes (the report is then not reproducible).
        #[arg(long)]
        timings: bool,
    },
}

#[derive(Subcommand, Debug)]
pub enum BallCmd {
    /// Locate a tuple relative to the matrix ball.
    Classify {
        #[arg(long)]
        tuple: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum PencilCmd {
    /// Membership of a tuple in the pencil ball.
    Member {
        #[arg(long)]
        pencil: PathBuf,
        #[arg(long)]
        tuple: PathBuf,
    },
    /// Compare the ball verdict with the monic LMI at the embedded point.
    Embed {
        #[arg(long)]
        pencil: PathBuf,
        #[arg(long)]
        tuple: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
pub enum MoebiusCmd {
    /// Apply the automorphism exchanging 0 and V to U.
    Apply {
        #[arg(long)]
        v: PathBuf,
        #[arg(long)]
        u: PathBuf,
    },
    /// Sampled involution, ball and boundary checks.
    Verify {
        #[arg(long, default_value_t = 300)]
        samples: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum FockCmd {
    /// Exact identities of the truncated shift model.
    Identities {
        #[arg(long)]
        gprime: usize,
        #[arg(long)]
        g: usize,
        #[arg(long)]
        n: usize,
    },
    /// Search the shift models for a violation certificate of `x + p`.
    Unique {
        #[command(flatten)]
        poly: PolyInput,
        /// Largest model level.
        #[arg(long = "N", default_value_t = 3)]
        max_n: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum IsoCmd {
    /// Certify a linear map as a complete isometry onto a corner.
    Certify {
        /// Linear map in pencil format.
        #[arg(long)]
        map: PathBuf,
        #[arg(long, default_value_t = 4)]
        samples: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum ClingCmd {
    /// Gram positivity, scalar and sampled matrix clinging, orthotropy.
    Analyze {
        #[arg(long)]
        pencil: PathBuf,
        #[arg(long, default_value_t = 4)]
        levels: usize,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Random search for three-variable pencils that cling at scalar points
    /// but not at matrix points.
    Search3 {
        #[arg(long, default_value_t = 100)]
        budget: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum BallmapCmd {
    /// Canonical form of a ball map (optionally composed with a pencil).
    Canon {
        #[arg(long)]
        series: PathBuf,
        #[arg(long)]
        pencil: Option<PathBuf>,
    },
    /// Sampled Schwarz inequality on the column ball.
    Schwarz {
        #[arg(long)]
        series: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Decomposition through the isometric subspace of the linear part.
    Bidisk {
        #[arg(long)]
        series: PathBuf,
        #[arg(long, default_value_t = 24)]
        samples: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum NullssCmd {
    /// Find `G` with `Q = G P`, or evidence that the kernel hypothesis fails.
    Solve {
        #[arg(long)]
        p: PathBuf,
        #[arg(long)]
        q: PathBuf,
        #[arg(long)]
        max_degree: Option<usize>,
        #[arg(long, value_enum, default_value = "exact")]
        mode: commands::ModeArg,
        /// Number of variables; inferred from the texts when omitted.
        #[arg(long)]
        vars: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(outcome) => {
            let text = output::render(&outcome.report, cli.global.format);
            let written = match &cli.global.out {
                Some(path) => std::fs::write(path, text).map_err(|e| format!("cannot write {}: {e}", path.display())),
                None => {
                    print!("{text}");
                    Ok(())
                }
            };
            match written {
                Err(msg) => {
                    eprintln!("error: {msg}");
                    ExitCode::from(2)
                }
                Ok(()) if outcome.ok => ExitCode::SUCCESS,
                Ok(()) => ExitCode::from(1),
            }
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
