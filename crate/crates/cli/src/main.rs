use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use duet_cli::{load_config, run, ExperimentConfig, Mode};

/// Dual-transfer cross-domain recommendation experiments.
///
/// Log verbosity is read from DUET_LOG (e.g. `DUET_LOG=info`).
#[derive(Parser)]
#[command(name = "duet", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic domain pair with known ground truth.
    Synth {
        #[arg(long)]
        rho: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Train a dual model on a dataset directory and save it.
    Train {
        #[arg(long)]
        alpha: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Cross-validate on a dataset, or score a saved model with --model.
    Eval {
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Cross-validate once per transfer rate.
    AlphaSweep {
        /// Comma-separated transfer rates.
        #[arg(long)]
        alphas: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the dual NMF convergence experiment.
    NmfLab {
        #[arg(long)]
        alpha: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Flat key = value configuration file.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Dataset directory.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override any config key, e.g. `--set epochs=20`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

fn build(cli: Cli) -> Result<ExperimentConfig> {
    let (mode, common, mut flags) = match cli.command {
        Command::Synth { rho, common } => (Mode::Synth, common, vec![("rho", rho.map(|v| v.to_string()))]),
        Command::Train { alpha, common } => (Mode::Train, common, vec![("alpha", alpha.map(|v| v.to_string()))]),
        Command::Eval { alpha, model, common } => (
            Mode::Eval,
            common,
            vec![
                ("alpha", alpha.map(|v| v.to_string())),
                ("model", model.map(|p| p.to_string_lossy().into_owned())),
            ],
        ),
        Command::AlphaSweep { alphas, common } => (Mode::AlphaSweep, common, vec![("alphas", alphas)]),
        Command::NmfLab { alpha, common } => (Mode::NmfLab, common, vec![("alpha", alpha.map(|v| v.to_string()))]),
    };
    let mut cfg = match &common.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.mode = mode;
    for s in &common.sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| anyhow::anyhow!("--set expects KEY=VALUE, got `{s}`"))?;
        cfg.set(k.trim(), v.trim())?;
    }
    flags.push(("seed", common.seed.map(|v| v.to_string())));
    flags.push(("data", common.data.map(|p| p.to_string_lossy().into_owned())));
    flags.push(("out", common.out.map(|p| p.to_string_lossy().into_owned())));
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Joins the error chain into one line, dropping causes already spelled out
/// by the message above them.
fn one_line(e: &anyhow::Error) -> String {
    let mut msg = String::new();
    for cause in e.chain() {
        let text = cause.to_string().replace(['\n', '\r'], " ");
        if msg.ends_with(&text) {
            continue;
        }
        if !msg.is_empty() {
            msg.push_str(": ");
        }
        msg.push_str(&text);
    }
    msg
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DUET_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = build(cli).and_then(|cfg| run(&cfg));
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("duet: error: {}", one_line(&e));
            ExitCode::FAILURE
        }
    }
}
