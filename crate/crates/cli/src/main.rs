//! Experiment driver for the energy-based model laboratory.
//!
//! Exit codes: 0 on success, 1 on configuration/validation errors, 2 when
//! a training run aborts on non-finite numbers (the last good checkpoint
//! is still written).

mod commands;
mod config;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "ebmlab",
    version,
    about = "Train, probe, and reproduce desk-scale energy-based models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct CommonOpts {
    /// Experiment config (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dotted-path override, e.g. `training.epochs=50` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Output directory override.
    #[arg(long)]
    out: Option<String>,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a training experiment from a config file.
    Train {
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Minimize a trained model's energy (or evaluate free energies).
    Infer {
        /// Model archive to load.
        #[arg(long)]
        archive: PathBuf,
        /// Conditioning inputs for input-conditioned models (repeatable).
        #[arg(long = "x", value_name = "VALUE")]
        xs: Vec<f64>,
        /// Points `a,b` for models scoring 2-D outputs (repeatable).
        #[arg(long = "point", value_name = "A,B")]
        points: Vec<String>,
        /// Binary states like `0110` for Boltzmann free energies.
        #[arg(long = "bits", value_name = "BITS")]
        bits: Vec<String>,
        /// Output-domain lower bounds, comma-separated.
        #[arg(long, default_value = "-2")]
        lo: String,
        /// Output-domain upper bounds, comma-separated.
        #[arg(long, default_value = "2")]
        hi: String,
        /// Grid resolution per dimension for the search.
        #[arg(long, default_value_t = 101)]
        grid: usize,
        /// `min` or `marginal` for latent-variable free energies.
        #[arg(long, default_value = "min")]
        mode: String,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long)]
        out: Option<String>,
    },
    /// Export an energy landscape over a rectangular grid as CSV.
    Landscape {
        #[arg(long)]
        archive: PathBuf,
        /// Lower bounds, comma-separated per dimension.
        #[arg(long)]
        lo: String,
        /// Upper bounds, comma-separated per dimension.
        #[arg(long)]
        hi: String,
        /// Resolution per dimension, comma-separated.
        #[arg(long)]
        res: String,
        #[arg(long, default_value = "min")]
        mode: String,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value = "out")]
        out: String,
    },
    /// Draw Gibbs-chain samples from a Boltzmann machine archive.
    Sample {
        #[arg(long)]
        archive: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        sweeps: usize,
        #[arg(long, default_value_t = 1000)]
        burn_in: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: String,
    },
    /// Check every registered analytic gradient against finite differences.
    Gradcheck,
    /// Run a canned, seeded, fully reproducible experiment.
    Demo {
        /// One of: parabola-hinge (hinge-trained implicit energy on y=x²),
        /// ellipse (latent-angle model fit and landscapes), spiral-dae
        /// (denoiser on the noisy spiral), rbm-tiny (contrastive-divergence
        /// RBM on a four-pattern set), jepa-collapse (regularized vs
        /// unregularized embedding training), hjepa-seq (two-level
        /// predictor on a two-timescale sequence).
        name: String,
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Train { common } => commands::train::run(&common),
        Command::Infer {
            archive,
            xs,
            points,
            bits,
            lo,
            hi,
            grid,
            mode,
            beta,
            out,
        } => commands::tools::infer(
            &archive,
            &xs,
            &points,
            &bits,
            &lo,
            &hi,
            grid,
            &mode,
            beta,
            out.as_deref(),
        ),
        Command::Landscape {
            archive,
            lo,
            hi,
            res,
            mode,
            beta,
            out,
        } => commands::tools::landscape(&archive, &lo, &hi, &res, &mode, beta, &out),
        Command::Sample {
            archive,
            sweeps,
            burn_in,
            seed,
            out,
        } => commands::tools::sample(&archive, sweeps, burn_in, seed, &out),
        Command::Gradcheck => commands::tools::gradcheck(),
        Command::Demo { name, common } => commands::demo::run(&name, &common),
    };
    match outcome {
        Ok(commands::Outcome::Success) => ExitCode::SUCCESS,
        Ok(commands::Outcome::NumericalAbort) => {
            eprintln!(
                "numerical abort: training hit non-finite values; last good checkpoint kept"
            );
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
