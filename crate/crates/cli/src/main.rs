//! `zoomlab`: build measures, run zooming dynamics and estimate dimensions
//! from the command line. Every run is a pure function of its flags.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::run;

#[derive(Parser, Debug)]
#[command(
    name = "zoomlab",
    version,
    about = "Zooming dynamics and dimension experiments on fractal measures"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    /// Worker threads; output does not depend on it.
    #[arg(long, env = "ZOOMLAB_THREADS", global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by all commands. Unset values take the command's default,
/// which is echoed in the output header.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Measure: a preset name or a TOML file.
    #[arg(long, global = true)]
    pub spec: Option<String>,
    /// Main depth of the command (tree depth, or the upper end of a fit).
    #[arg(long, global = true)]
    pub depth: Option<u32>,
    /// Base override for Lebesgue-type specs; a check for the others.
    #[arg(long, global = true)]
    pub base: Option<u32>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Sample count (points, atoms or fibers, per command).
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Time horizon of scenery runs.
    #[arg(long = "T", global = true)]
    pub horizon: Option<f64>,
    #[arg(long, global = true)]
    pub t_step: Option<f64>,
    /// Deepest moment of the distribution metric.
    #[arg(long, global = true)]
    pub metric_depth: Option<u32>,
    /// Output path: the tree file, the manifest directory, or the report.
    #[arg(long, global = true)]
    pub out: Option<std::path::PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Refine a measure to a depth and write its tree.
    MeasureBuild,
    /// Scenery distributions at sampled points: convergence across points
    /// and horizons, distance to the final distribution per time, and the
    /// translation-randomization score.
    Scenery {
        /// Half-width of the translation window around the origin.
        #[arg(long, default_value_t = 0.5)]
        palm_radius: f64,
    },
    /// Entropy dimension, local dimension and its spread over points.
    Dimension {
        #[arg(long, default_value_t = 4)]
        n_min: u32,
    },
    /// Projection dimension profile, optionally against the scenery
    /// ensemble profile (when --samples is given).
    Project {
        /// TOML file with `maps = [[[row], ...], ...]`.
        #[arg(long)]
        maps: Option<std::path::PathBuf>,
        #[arg(long, default_value_t = 4)]
        n_min: u32,
    },
    /// Projection, fiber and total dimension bookkeeping for one map.
    Conserve {
        #[arg(long)]
        maps: Option<std::path::PathBuf>,
        /// Coordinate axes of the projection when no map file is given.
        #[arg(long, value_delimiter = ',', default_value = "0")]
        axes: Vec<usize>,
        #[arg(long, default_value_t = 4)]
        n_min: u32,
    },
    /// Magnification run from a sampled pair of a digit measure: measure
    /// constancy, adaptedness and the dimension of the centered ensemble.
    Cp {
        #[arg(long, default_value_t = 2)]
        m: u32,
        /// Atoms kept for centering; 0 skips centering.
        #[arg(long, default_value_t = 500)]
        center_atoms: usize,
        #[arg(long, default_value_t = 16)]
        t_steps: usize,
        #[arg(long, default_value_t = 10)]
        center_depth: u32,
        #[arg(long, default_value_t = 1.0 / 3.0)]
        radius: f64,
    },
    /// Injective planar image of a Cantor product with a dimension drop:
    /// growth constraints, exhaustive injectivity, cover estimates.
    Counterexample {
        #[arg(long, value_delimiter = ',')]
        n: Option<Vec<u32>>,
        #[arg(long, default_value_t = 3)]
        trend_steps: usize,
    },
    /// Spliced measures: local dimension oscillation across scales. Without
    /// --spec, runs the rotated/alternating splice projection experiment.
    Splice {
        #[arg(long, default_value_t = 16)]
        points: usize,
        #[arg(long, default_value_t = 1)]
        n_min: u32,
    },
    /// Dimension of the sum of a base-2 Bernoulli and a base-3 Cantor
    /// variable against the two factors.
    PairSum {
        #[arg(long, default_value_t = 4)]
        n_min: u32,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli.command, &cli.common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
