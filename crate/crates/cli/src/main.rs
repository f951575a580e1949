//! `slowfast`: config-driven simulations of two-layer network learning
//! dynamics on single-index data, with sweeps, closed-form overlays, trace
//! analysis and static SVG plots.

mod commands;
mod config;
mod csvio;
mod manifest;
mod runner;
mod svg;

use anyhow::Result;
use clap::{Parser, Subcommand};
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "slowfast", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print or export Hermite coefficients and kernels of a named function
    Hermite {
        /// Selector: "relu", "erf", "he_k:<k>", "poly:<c0,c1,...>"
        #[arg(long = "function", alias = "fn")]
        function: String,
        #[arg(long, default_value_t = 16)]
        truncation: usize,
        /// Write CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Integrate or iterate one configured system and write its trace
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the config seed
        #[arg(long)]
        seed: Option<u64>,
        /// Override the checkpoint cadence of discrete systems
        #[arg(long = "checkpoint-every")]
        checkpoint_every: Option<usize>,
    },
    /// Run a one-parameter grid of simulations with per-cell analysis
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker pool size (defaults to the logical core count)
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Emit the closed-form predicted risk curve for a config's time grid
    Asymptotics {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Analyze run directories into a scenario verdict
    Analyze {
        /// Run directories containing trace.csv + manifest.json
        #[arg(long, required = true, num_args = 1..)]
        runs: Vec<PathBuf>,
        /// Highest level to check
        #[arg(long, default_value_t = 2)]
        level: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Plot traces (and optional overlays / per-particle panels) as SVG
    Plot {
        #[arg(long, required = true, num_args = 1..)]
        runs: Vec<PathBuf>,
        /// Overlay the closed-form predicted risk of each run's config
        #[arg(long)]
        overlay: bool,
        /// Emit per-particle a_i(t) and s_i(t) panels (needs dump_state)
        #[arg(long)]
        panels: bool,
        #[arg(long, default_value = "plot.svg")]
        out: PathBuf,
    },
    /// Reproduce a canned figure: 1 (piecewise prediction), 2 (mean-field
    /// risk curves), 3 (per-particle evolution)
    #[command(name = "reproduce-figure")]
    ReproduceFigure {
        /// 1, 2 or 3
        figure: u8,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Hermite {
            function,
            truncation,
            out,
        } => commands::hermite(&function, truncation, out.as_deref()),
        Command::Simulate {
            config,
            out,
            seed,
            checkpoint_every,
        } => commands::simulate(&config, &out, seed, checkpoint_every),
        Command::Sweep { config, out, jobs } => commands::sweep(&config, &out, jobs),
        Command::Asymptotics { config, out } => commands::asymptotics(&config, &out),
        Command::Analyze { runs, level, out } => commands::analyze(&runs, level, &out),
        Command::Plot {
            runs,
            overlay,
            panels,
            out,
        } => commands::plot(&runs, overlay, panels, &out),
        Command::ReproduceFigure {
            figure,
            out,
            jobs,
            seed,
        } => commands::reproduce_figure(figure, &out, jobs, seed),
    }
}
