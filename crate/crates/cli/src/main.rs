//! Command-line front end: certification, scale search, oracle checks and
//! desk-scale experiments on computation-graph files.
//!
//! Exit codes are a stable scripting contract:
//! 0 success/certified, 1 check failure, 2 input error, 3 circle detected.

mod commands;
mod config;
mod manifest;

use clap::{Parser, Subcommand};
use config::{FlagOverrides, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "convexcert",
    version,
    about = "Per-variable convexity certificates, scale-factor search, finite-difference checks and seeded training studies for computation graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Configuration file (JSON or TOML); flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Graph description file (JSON).
    #[arg(long, global = true)]
    graph: Option<PathBuf>,

    /// Output directory (the CONVEXCERT_OUT environment variable wins).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Master seed; all randomness derives from it through named streams.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Variable (parameter node) to certify; defaults to the first parameter.
    #[arg(long, global = true)]
    variable: Option<String>,

    /// Scale-factor grid, descending, e.g. 1.0,0.5,0.3,0.1.
    #[arg(long, global = true, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,

    /// Number of sampled points (or demo grid points).
    #[arg(long, global = true)]
    grid_points: Option<usize>,

    /// Finite-difference step for both gradient and Hessian probes.
    #[arg(long, global = true)]
    fd_step: Option<f64>,

    /// Built-in dataset name (blobs, digits, moons, parity) or a digits CSV path.
    #[arg(long, global = true)]
    dataset: Option<String>,

    /// Training seeds, e.g. 1,2,3,4,5.
    #[arg(long, global = true, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,

    /// Training epoch cap.
    #[arg(long, global = true)]
    epochs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Certify convexity of the objective in one variable at sampled points.
    Certify,
    /// Find the largest uniform scale factor that certifies everywhere.
    ScaleSearch,
    /// Check analytic gradients and curvature against finite differences.
    Gradcheck,
    /// Reproduce the sin^2 margin and scaling illustration.
    DemoSin2,
    /// Multi-seed accuracy-spread study over a factor grid.
    Variance,
    /// Multi-seed convergence-speed study over a factor grid.
    Converge,
}

fn flag_overrides(cli: &Cli) -> FlagOverrides {
    FlagOverrides {
        config: cli.config.clone(),
        graph: cli.graph.clone(),
        out: cli.out.clone(),
        seed: cli.seed,
        variable: cli.variable.clone(),
        deltas: cli.deltas.clone(),
        grid_points: cli.grid_points,
        fd_step: cli.fd_step,
        dataset: cli.dataset.clone(),
        seeds: cli.seeds.clone(),
        epochs: cli.epochs,
    }
}

fn run(cli: &Cli) -> anyhow::Result<i32> {
    let flags = flag_overrides(cli);
    match cli.command {
        Command::Certify => {
            let cfg = RunConfig::resolve(&flags, &[1.0, 0.5, 0.3, 0.1])?;
            commands::certify::run(&cfg)
        }
        Command::ScaleSearch => {
            let cfg = RunConfig::resolve(&flags, &[1.0, 0.5, 0.3, 0.1])?;
            commands::scale_search::run(&cfg)
        }
        Command::Gradcheck => {
            let cfg = RunConfig::resolve(&flags, &[1.0, 0.5, 0.3, 0.1])?;
            commands::gradcheck::run(&cfg)
        }
        Command::DemoSin2 => {
            let cfg = RunConfig::resolve(&flags, &[1.0, 0.3])?;
            commands::demo_sin2::run(&cfg)
        }
        Command::Variance => {
            let cfg = RunConfig::resolve(&flags, &[1.0, 0.5])?;
            commands::experiments::run_variance(&cfg)
        }
        Command::Converge => {
            let cfg = RunConfig::resolve(&flags, &[1.0, 0.5])?;
            commands::experiments::run_converge(&cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
