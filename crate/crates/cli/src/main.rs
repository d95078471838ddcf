use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod cmd;

use cmd::CliError;

/// Renormalization fixed point of area-preserving twist maps, its Cantor set,
/// Lipschitz curves through it, and the tip direction obstruction.
#[derive(Debug, Parser)]
#[command(name = "twistren", version)]
pub struct Cli {
    /// Run configuration (JSON); missing keys take their defaults.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Output artifact path (each command has its own default).
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// No progress messages on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the fixed point by degree continuation.
    Solve {
        /// Comma-separated increasing degrees, e.g. 6,10,14,20.
        #[arg(long, value_delimiter = ',')]
        degree_schedule: Option<Vec<usize>>,
    },
    /// Evaluate the map at points and print one JSON line per point.
    Map {
        /// `x,y`; may be repeated.
        #[arg(long = "point", required = true, allow_hyphen_values = true)]
        points: Vec<String>,
        #[command(flatten)]
        input: Input,
    },
    /// Cantor-set points of a level, or the hulls of its pieces.
    Cantor {
        #[arg(long)]
        level: usize,
        /// Write the piece hulls as JSON instead of the point cloud.
        #[arg(long)]
        boxes: bool,
        #[command(flatten)]
        input: Input,
    },
    /// Refine the diagonal seed curve `iters` times.
    Curve {
        #[arg(long)]
        iters: usize,
        #[command(flatten)]
        input: Input,
    },
    /// Tip derivative chain and direction clash experiment.
    Obstruct {
        #[arg(long)]
        max_depth: Option<usize>,
        /// Angle of the seed direction at the tip, degrees from horizontal.
        #[arg(long, default_value_t = 45.0, allow_hyphen_values = true)]
        seed_angle: f64,
        /// Print only the tip derivative chain.
        #[arg(long)]
        chain: bool,
        #[command(flatten)]
        input: Input,
    },
    /// Run the invariant suite and print a pass/fail report.
    Verify {
        /// Restrict to these check groups (comma-separated).
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        #[command(flatten)]
        input: Input,
    },
}

#[derive(Debug, Args)]
pub struct Input {
    /// Fixed-point file written by `solve`.
    #[arg(long = "in", value_name = "FILE", default_value = "fixed_point.json")]
    pub path: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let err = CliError::usage("UsageError", e.to_string().trim().to_string());
            err.report("cli");
            return ExitCode::from(1);
        }
    };
    let module = cmd::module_of(&cli.command);
    match cmd::run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            e.report(module);
            ExitCode::from(e.exit)
        }
    }
}
