//! Batch front-end: structure ingestion, experiment orchestration, report
//! emission. Every command prints a JSON report (or CSV tables with
//! `--format csv`) and exits nonzero when any requested check fails.

mod commands;
mod report;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "ramified",
    about = "Resistance forms, Hodge decompositions and Fredholm modules on finitely ramified cell structures",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Target {
    /// builtin structure: interval | gasket | vicsek | quantum_graph | theta | triangle | path
    #[arg(long, conflicts_with = "file")]
    builtin: Option<String>,
    /// structure description file (self-similar or rule-only JSON)
    #[arg(long)]
    file: Option<PathBuf>,
    /// expansion depth
    #[arg(long, default_value_t = 2)]
    depth: usize,
    /// per-cell conductance override file
    #[arg(long)]
    overrides: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct OutputOpts {
    /// json (full report) or csv (tabular payload only)
    #[arg(long, default_value = "json")]
    format: String,
    /// write the report to a file instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// omit the timestamp field so identical runs emit identical bytes
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Vertex/cell counts, cycle ranks, tree verdict and validation
    Structure {
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Validation report only
    Validate {
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Cycle ranks per level and the tree dichotomy
    TreeCheck {
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        output: OutputOpts,
    },
    /// Hodge decomposition: dimension table and orthogonality residuals
    Hodge {
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        output: OutputOpts,
        /// basis level (default: depth)
        #[arg(long)]
        level: Option<usize>,
    },
    /// Cross-check the split-vertex projection against the Neumann solve
    Project {
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        output: OutputOpts,
        /// projection level (default: min(depth, 2))
        #[arg(long)]
        level: Option<usize>,
        /// seed for the random Pythagoras sample
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Commutator spectrum of [F, a] with summability diagnostics
    Commutator {
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        output: OutputOpts,
        /// multiplier: constant:<v> | indicator:<level>:<cell> | harmonic[:<k>] | cells:<v0,v1,...>
        #[arg(long, default_value = "harmonic:0")]
        multiplier: String,
        /// multiplier level (default 1)
        #[arg(long, default_value_t = 1)]
        level: usize,
        /// summability exponents, comma list or start:end:count
        #[arg(long, default_value = "1.2,1.5,1.8,2.0")]
        p: String,
    },
    /// Level spectra, Weyl slope and the eigenbasis projection trend
    Spectral {
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        output: OutputOpts,
        /// lowest level of the fit window (default: depth saturating-sub 3)
        #[arg(long)]
        level: Option<usize>,
        /// exponents for the eigenbasis projection trend
        #[arg(long, default_value = "1.5,1.8")]
        p: String,
        /// neumann | dirichlet
        #[arg(long, default_value = "dirichlet")]
        boundary: String,
    },
    /// Pressure curve, critical exponent, convexity and Lyapunov estimates
    Pressure {
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        output: OutputOpts,
        /// p-grid, comma list or start:end:count
        #[arg(long, default_value = "0.1:2.5:25")]
        p: String,
        /// Monte Carlo seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// matrix norm: energy-hs | rowsum
        #[arg(long, default_value = "energy-hs")]
        norm: String,
        /// Monte Carlo sample count
        #[arg(long, default_value_t = 20_000)]
        samples: u64,
    },
}

fn main() -> ExitCode {
    if let Ok(threads) = std::env::var("RAMIFIED_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build_global();
        }
    }
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Structure { target, output } => commands::cmd_structure(&target, &output),
        Command::Validate { target, output } => commands::cmd_validate(&target, &output),
        Command::TreeCheck { target, output } => commands::cmd_tree_check(&target, &output),
        Command::Hodge {
            target,
            output,
            level,
        } => commands::cmd_hodge(&target, &output, level),
        Command::Project {
            target,
            output,
            level,
            seed,
        } => commands::cmd_project(&target, &output, level, seed),
        Command::Commutator {
            target,
            output,
            multiplier,
            level,
            p,
        } => commands::cmd_commutator(&target, &output, &multiplier, level, &p),
        Command::Spectral {
            target,
            output,
            level,
            p,
            boundary,
        } => commands::cmd_spectral(&target, &output, level, &p, &boundary),
        Command::Pressure {
            target,
            output,
            p,
            seed,
            norm,
            samples,
        } => commands::cmd_pressure(&target, &output, &p, seed, &norm, samples),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
