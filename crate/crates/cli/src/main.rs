//! `slag`: command-line front end for the special Lagrangian toolkit.
//!
//! Exit codes: 0 success, 1 I/O or malformed input, 2 validation or regime
//! error, 3 a check ran and failed.

mod commands;
mod output;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::CheckFailed;

#[derive(Debug, Parser)]
#[command(name = "slag", version, about = "Special Lagrangian verification toolkit")]
struct Cli {
    /// Seed for randomized probes.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Derive the phase parameters and classify a phase.
    Phase {
        #[arg(long)]
        n: usize,
        /// The phase Θ.
        #[arg(long, allow_hyphen_values = true)]
        theta: f64,
    },
    /// Run the residual suite of a solution family.
    Verify {
        /// Spec as a JSON file path or an inline JSON object.
        spec: String,
        #[arg(long, default_value_t = 1000)]
        probes: usize,
        #[arg(long, default_value_t = 1e-3)]
        fd_step: f64,
    },
    /// Effective-estimate sweep over a range of M.
    Sweep {
        /// Inclusive integer range `a:b`.
        #[arg(long = "m")]
        m: String,
        /// Semi-convexity angle of the embedded example.
        #[arg(long, allow_hyphen_values = true)]
        theta: f64,
        #[arg(long)]
        n: usize,
        /// Chain radius.
        #[arg(long, default_value_t = 0.02)]
        r: f64,
        #[arg(short, long)]
        output: Option<std::path::PathBuf>,
    },
    /// Ball chain along a polyline given as JSON.
    Chain {
        #[arg(long)]
        curve: std::path::PathBuf,
        #[arg(long)]
        r: f64,
    },
    /// Rotate a sampled function.
    Rotate {
        /// GridFunction text file.
        #[arg(long)]
        grid: std::path::PathBuf,
        #[arg(long)]
        n: usize,
        /// The phase Θ.
        #[arg(long, allow_hyphen_values = true)]
        theta: f64,
        /// Semi-convexity constant; defaults to tan θ for the derived θ.
        #[arg(long, allow_hyphen_values = true)]
        k: Option<f64>,
        #[arg(short, long)]
        output: Option<std::path::PathBuf>,
    },
    /// Discrete Legendre transform of a sampled function.
    Legendre {
        #[arg(long)]
        grid: std::path::PathBuf,
        /// Report the sup error of the double conjugate instead.
        #[arg(long)]
        involution: bool,
        /// Slope box `lo:hi` per axis for the conjugate grid.
        #[arg(long, allow_hyphen_values = true)]
        slopes: Option<String>,
        #[arg(short, long)]
        output: Option<std::path::PathBuf>,
    },
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(v) = std::env::var("SLAG_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| slag_core::Error::InvalidInput(format!("SLAG_THREADS={v} is not a count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| slag_core::Error::InvalidInput(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Phase { n, theta } => commands::phase(n, theta),
        Command::Verify {
            spec,
            probes,
            fd_step,
        } => commands::verify(&spec, probes, cli.seed, fd_step),
        Command::Sweep {
            m,
            theta,
            n,
            r,
            output,
        } => commands::sweep(&m, theta, n, r, output.as_deref()),
        Command::Chain { curve, r } => commands::chain(&curve, r),
        Command::Rotate {
            grid,
            n,
            theta,
            k,
            output,
        } => commands::rotate(&grid, n, theta, k, output.as_deref()),
        Command::Legendre {
            grid,
            involution,
            slopes,
            output,
        } => commands::legendre(&grid, involution, slopes.as_deref(), output.as_deref()),
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<CheckFailed>().is_some() {
        return 3;
    }
    if let Some(e) = err.downcast_ref::<slag_core::Error>() {
        return match e {
            slag_core::Error::Parse(_) => 1,
            _ => 2,
        };
    }
    if err.downcast_ref::<std::io::Error>().is_some() || err.downcast_ref::<serde_json::Error>().is_some() {
        return 1;
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
