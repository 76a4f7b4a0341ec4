//! `gssp`: encode, decode, and inspect layered splat containers.

mod commands;
mod config;

use clap::{Args, Parser, Subcommand};
use config::Config;
use gssp_core::{Error, Result};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "gssp", about = "Structure-aware codec for Gaussian splat scenes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct EncodeOpts {
    /// Flat `key = value` config file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    eps_spatial: Option<f64>,
    #[arg(long)]
    eps_direction: Option<f64>,
    #[arg(long)]
    eps_color: Option<f64>,
    #[arg(long)]
    min_samples: Option<usize>,
    #[arg(long)]
    tau_max: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    s_min: Option<usize>,
    #[arg(long)]
    t_max: Option<usize>,
    #[arg(long)]
    downsample: Option<u64>,
    /// Comma-separated cumulative layer fractions, e.g. `0.25,0.5,1.0`.
    #[arg(long)]
    fractions: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Compress a binary splat PLY into a layered container.
    Encode {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        opts: EncodeOpts,
    },
    /// Reconstruct a PLY from a container (optionally a layer prefix).
    Decode {
        input: PathBuf,
        output: PathBuf,
        /// Decode layers 0..=LAYER only (default: all layers).
        #[arg(long)]
        layer: Option<usize>,
    },
    /// Per-category statistics and byte breakdown for a PLY or container.
    Stats { input: PathBuf },
    /// List the container layer table.
    Layers { input: PathBuf },
    /// Dump one sketch cluster's fitted models.
    Inspect {
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        cluster: usize,
    },
}

fn build_config(opts: &EncodeOpts) -> Result<Config> {
    let mut config = Config::default();
    if let Some(path) = &opts.config {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Input(format!("cannot read config {}: {e}", path.display()))
        })?;
        config.apply_file(&text)?;
    }
    if let Some(v) = opts.seed {
        config.seed = v;
    }
    if let Some(v) = opts.eps_spatial {
        config.set("eps_spatial", &v.to_string())?;
    }
    if let Some(v) = opts.eps_direction {
        config.eps_direction = v;
    }
    if let Some(v) = opts.eps_color {
        config.eps_color = v;
    }
    if let Some(v) = opts.min_samples {
        config.min_samples = v;
    }
    if let Some(v) = opts.tau_max {
        config.tau_max = v;
    }
    if let Some(v) = opts.beta {
        config.beta = v;
    }
    if let Some(v) = opts.s_min {
        config.s_min = v;
    }
    if let Some(v) = opts.t_max {
        config.t_max = v;
    }
    if let Some(v) = opts.downsample {
        config.set("downsample", &v.to_string())?;
    }
    if let Some(v) = &opts.fractions {
        config.fractions = config::parse_fractions(v)?;
    }
    Ok(config)
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Encode {
            input,
            output,
            opts,
        } => commands::cmd_encode(input, output, &build_config(opts)?),
        Command::Decode {
            input,
            output,
            layer,
        } => commands::cmd_decode(input, output, *layer),
        Command::Stats { input } => commands::cmd_stats(input),
        Command::Layers { input } => commands::cmd_layers(input),
        Command::Inspect { input, cluster } => commands::cmd_inspect(input, *cluster),
    }
}

fn exit_for(error: &Error) -> u8 {
    match error {
        Error::Input(_) => 2,
        Error::Incomplete { .. } => 3,
        Error::Parse(_) | Error::Schema(_) | Error::Format { .. } | Error::Version(_) => 4,
        Error::Data(_) | Error::Io(_) => 5,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}
