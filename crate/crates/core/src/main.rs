use std::path::PathBuf;

use clap::Parser;
use odi_solve::cli::{run, Overrides};

/// Solve and certify `-(p u')' + q u ∈ λ F(u)` boundary value problems.
#[derive(Parser)]
#[command(name = "odi-solve", version, disable_help_subcommand = true)]
struct Cli {
    /// Pipeline to run: check | window | solve | sweep | certify
    mode: String,

    /// Path to the JSON run configuration
    #[arg(long)]
    config: PathBuf,

    /// Override the configured lambda with a single value
    #[arg(long)]
    lambda: Option<f64>,

    /// Override the configured mesh element count
    #[arg(long)]
    n: Option<usize>,

    /// Override the multistart RNG seed
    #[arg(long)]
    seed: Option<u64>,

    /// Exit nonzero unless at least three solutions certify
    #[arg(long)]
    require_three: bool,

    /// Reject lambda values outside the computed multiplicity window
    #[arg(long)]
    inside_window: bool,

    /// Override the configured output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    let ov = Overrides {
        lambda: cli.lambda,
        n: cli.n,
        seed: cli.seed,
        require_three: cli.require_three,
        inside_window: cli.inside_window,
        out: cli.out,
    };
    std::process::exit(run(&cli.mode, &cli.config, &ov));
}
