//! `skf`: run simulations, filters and convergence studies from a config file.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde::Serialize;

use commands::{Command, Failure, Outputs};
use config::Config;

#[derive(Debug, Parser)]
#[command(name = "skf", version, about = "Sampled-output Kalman filtering experiments")]
struct Cli {
    /// What to run.
    #[arg(value_enum)]
    command: Command,
    /// Configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Random seed; overrides `[run] seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `[run] out`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a config entry, `section.key=value`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Serialize)]
struct Versions {
    skf: &'static str,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'static str,
    config_path: String,
    /// The configuration file exactly as read.
    config: &'a str,
    overrides: &'a [String],
    seed: u64,
    versions: Versions,
    duration_seconds: f64,
    outputs: Vec<String>,
}

fn execute(cli: &Cli) -> Result<(), Failure> {
    let start = Instant::now();
    let text = std::fs::read_to_string(&cli.config)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", cli.config.display())))?;
    let mut cfg = Config::parse(&text)?;
    for assignment in &cli.overrides {
        cfg.set(assignment)?;
    }
    let seed = match cli.seed {
        Some(s) => s,
        None => cfg.scalar_or("run", "seed", 0u64)?,
    };
    let out_dir = match &cli.out {
        Some(dir) => dir.clone(),
        None => PathBuf::from(cfg.raw("run", "out").unwrap_or("skf-out")),
    };
    let mut outputs = Outputs::new(out_dir)?;
    commands::run(cli.command, &cfg, seed, &mut outputs)?;

    let mut files = outputs.files.clone();
    files.push("manifest.json".to_string());
    let manifest = RunManifest {
        command: cli.command.name(),
        config_path: cli.config.display().to_string(),
        config: &text,
        overrides: &cli.overrides,
        seed,
        versions: Versions { skf: env!("CARGO_PKG_VERSION") },
        duration_seconds: start.elapsed().as_secs_f64(),
        outputs: files,
    };
    let mut json = serde_json::to_string_pretty(&manifest).map_err(|e| Failure::Io(e.to_string()))?;
    json.push('\n');
    outputs.write("manifest.json", &json)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("skf: {failure}");
            ExitCode::from(failure.exit_code())
        }
    }
}
