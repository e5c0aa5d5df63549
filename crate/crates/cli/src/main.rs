// SPDX-License-Identifier: Apache-2.0

mod config;
mod experiments;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use serde_json::json;

use crate::output::OutputDir;

#[derive(Parser)]
#[command(name = "lskin", version, about = "Skin-effect and Sinai transport experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List the named experiments.
    List,
    /// Run one experiment and write CSV data, summary.json and manifest.json.
    Run {
        experiment: String,
        /// TOML file overriding the experiment defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        realizations: Option<usize>,
        /// Output directory. Defaults to `$LSKIN_OUT/<experiment>`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Root for default output directories.
        #[arg(long, env = "LSKIN_OUT", default_value = "lskin-out", hide_env_values = true)]
        out_root: PathBuf,
    },
}

fn run(experiment: &str, config: Option<PathBuf>, seed: Option<u64>, realizations: Option<usize>, out: PathBuf) -> Result<()> {
    let mut cfg = config::load(&experiments::defaults(experiment)?, config.as_deref())?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(r) = realizations {
        cfg.realizations = r;
    }
    let mut dir = OutputDir::create(&out)?;
    let results = experiments::run(&cfg, &mut dir)?;
    let summary = json!({
        "experiment": cfg.experiment,
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "results": results,
    });
    dir.write_json("summary.json", &summary)?;
    let root = dir.root().to_path_buf();
    let files = dir.finish()?;
    eprintln!("{}: wrote {} files to {}", cfg.experiment, files.len() + 1, root.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::List => {
            for e in experiments::EXPERIMENTS {
                println!("{:<20} {}", e.name, e.about);
            }
            Ok(())
        }
        Command::Run { experiment, config, seed, realizations, out, out_root } => {
            let out = out.unwrap_or_else(|| out_root.join(&experiment));
            run(&experiment, config, seed, realizations, out)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
