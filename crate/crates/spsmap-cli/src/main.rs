use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use spsmap_cli::commands;
use spsmap_cli::config::ExperimentConfig;

#[derive(Parser)]
#[command(name = "spsmap", about = "Stochastic Poisson surface maps with contact fusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file with `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Inline overrides, e.g. `--set grid_k=24` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Output directory (falls back to config, then $SPSMAP_OUT_DIR, then .).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a map to an oriented point cloud, emit map.grid + surface.ply.
    Reconstruct {
        cloud: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Turn a wrench log into per-measurement contact hypothesis clouds.
    Sense {
        log: PathBuf,
        peg: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Sequentially fuse a wrench log into a map built from a cloud.
    Fuse {
        cloud: PathBuf,
        log: PathBuf,
        peg: PathBuf,
        model: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Run the sensing-modality matrix, emit metrics.csv + boxplot-data.csv.
    Evaluate {
        #[command(flatten)]
        common: Common,
    },
    /// Render the synthetic peg-in-hole scene artifacts.
    SimulateScene {
        #[command(flatten)]
        common: Common,
    },
    /// Contact-count sweep summary.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
}

fn build_config(common: &Common) -> Result<ExperimentConfig, spsmap_cli::CliError> {
    let mut cfg = ExperimentConfig::default();
    if let Some(path) = &common.config {
        cfg.merge_file(path)?;
    }
    for assignment in &common.sets {
        let (key, value) = assignment.split_once('=').ok_or_else(|| {
            spsmap_cli::config::ConfigError::InvalidValue {
                key: assignment.clone(),
                message: "expected KEY=VALUE".to_string(),
            }
        })?;
        cfg.set(key.trim(), value)?;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), spsmap_cli::CliError> {
    match &cli.command {
        Command::Reconstruct { cloud, common } => {
            let cfg = build_config(common)?;
            let out = cfg.resolve_out_dir(common.out.as_deref());
            commands::cmd_reconstruct(cloud, &cfg, &out)
        }
        Command::Sense { log, peg, common } => {
            let cfg = build_config(common)?;
            let out = cfg.resolve_out_dir(common.out.as_deref());
            commands::cmd_sense(log, peg, &cfg, &out)
        }
        Command::Fuse {
            cloud,
            log,
            peg,
            model,
            common,
        } => {
            let cfg = build_config(common)?;
            let out = cfg.resolve_out_dir(common.out.as_deref());
            commands::cmd_fuse(cloud, log, peg, model, &cfg, &out)
        }
        Command::Evaluate { common } => {
            let cfg = build_config(common)?;
            let out = cfg.resolve_out_dir(common.out.as_deref());
            commands::cmd_evaluate(&cfg, &out)
        }
        Command::SimulateScene { common } => {
            let cfg = build_config(common)?;
            let out = cfg.resolve_out_dir(common.out.as_deref());
            commands::cmd_simulate_scene(&cfg, &out)
        }
        Command::Sweep { common } => {
            let cfg = build_config(common)?;
            let out = cfg.resolve_out_dir(common.out.as_deref());
            commands::cmd_sweep(&cfg, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
