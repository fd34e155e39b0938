//! `algorec`: command-line front end of the recommendation-equilibrium engine.

mod commands;
mod figures;
mod output;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use algorec::Error as CoreError;

#[derive(Parser, Debug)]
#[command(name = "algorec", version, about = "Optimal recommendation algorithms and equilibrium pricing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Directory for summary.json and curve files.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// Format of curve outputs (summary.json is always written).
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// Absolute accuracy of conditional expectations.
    #[arg(long, global = true)]
    pub quad_tol: Option<f64>,

    /// Bracket width at which root finding stops.
    #[arg(long, global = true)]
    pub root_tol: Option<f64>,

    /// Monte Carlo sample count (overrides configs and defaults).
    #[arg(long, global = true)]
    pub mc_samples: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Single-seller equilibrium under the optimal algorithm for weight alpha.
    Solve {
        #[arg(long = "F")]
        f: String,
        #[arg(long = "G")]
        g: String,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
    },
    /// Segmented market, optionally compared against other segmentations.
    Segment {
        #[arg(long = "F")]
        f: String,
        #[arg(long = "G")]
        g: String,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        /// Partition: `none`, `full`, `0,0.5,1` or `seg:0,0.5,1;modes=p,r`.
        #[arg(long)]
        seg: String,
        /// Comma- or `|`-separated partitions to compare against.
        #[arg(long)]
        compare: Option<String>,
    },
    /// Competing sellers described by a JSON market file.
    Compete {
        #[arg(long)]
        market: PathBuf,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Known-product equilibrium, or the no-purchase obedience check.
    Informed {
        #[arg(long = "G")]
        g: String,
        #[arg(long)]
        c0: Option<f64>,
        #[arg(long)]
        check_ic: bool,
        #[arg(long = "F")]
        f: Option<String>,
    },
    /// Run the audit battery; exit 0 iff every check passes.
    Verify {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Write the figure CSVs.
    Export {
        #[arg(long = "F", default_value = "uniform")]
        f: String,
        #[arg(long = "G", default_value = "uniform")]
        g: String,
    },
}

/// Failed input validation (exit 1).
#[derive(Debug)]
pub struct Invalid(pub String);

impl std::fmt::Display for Invalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Invalid {}

/// Exit status: 1 for bad input, 2 for numerical failure.
fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<CoreError>() {
            return match e {
                CoreError::ZeroMass { .. } | CoreError::RegularityViolated(_) | CoreError::ThinEvent { .. } => 2,
                _ => 1,
            };
        }
    }
    1
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("ALGOREC_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Invalid(format!("ALGOREC_THREADS must be a nonnegative integer, got `{v}`")))?;
        if n > 0 {
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = configure_threads().and_then(|_| commands::run(&cli));
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
