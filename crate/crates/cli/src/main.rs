//! Experiment runner for two-agent learning-to-teach.
//!
//! Every command reads the same TOML config (all keys optional), applies
//! `--set key=value` overrides, and writes deterministic CSV/JSON artifacts
//! under the output directory. Exit codes: 0 success, 1 configuration or
//! policy-file error, 2 runtime failure.

use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use lectr_core::harness::{
    compare, evaluate_policies, export_directory, policy_file_for, save_policies, seed_list,
    sweep, train_run, transfer_run, write_comparison, write_sweep, write_train_outputs,
    ExperimentConfig, ExportFormat,
};
use lectr_core::{Error, Result};

#[derive(Parser)]
#[command(name = "lectr", version, about = "Two-agent learning-to-teach experiments")]
struct Cli {
    /// TOML config file; built-in defaults apply when omitted.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Override one config key (repeatable), e.g. --set cost=0.5.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,

    /// Base random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Seed count for multi-seed commands (seed, seed+1, ...).
    #[arg(long, global = true)]
    seeds: Option<usize>,

    /// Output directory for artifacts.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run and save its curve, summary, and policies.
    Train {
        /// Algorithm name, e.g. none, lectr, lectr_qtr, importance_advising.
        #[arg(long)]
        algorithm: Option<String>,
    },
    /// Report the mean greedy advice-free return of saved policies.
    Evaluate {
        /// Policy file produced by train.
        #[arg(long, value_name = "FILE")]
        policies: PathBuf,
        /// Rollouts to average over.
        #[arg(long, default_value_t = 10)]
        rollouts: usize,
    },
    /// Run several algorithms across seeds and test the differences.
    Compare {
        /// Comma-separated algorithm names.
        #[arg(long, value_delimiter = ',', required = true)]
        algorithms: Vec<String>,
    },
    /// Train fresh learners on the mirrored domain, teaching from saved policies.
    Transfer {
        /// Source policy file.
        #[arg(long, value_name = "FILE")]
        policies: PathBuf,
    },
    /// Repeat a comparison across several values of one config key.
    Sweep {
        /// Config key to vary, e.g. reward, rotation_degrees, cost.
        #[arg(long)]
        key: String,
        /// Comma-separated values for the key.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        /// Comma-separated algorithm names.
        #[arg(long, value_delimiter = ',', required = true)]
        algorithms: Vec<String>,
    },
    /// Bundle a results directory into one JSON or CSV document on stdout.
    Export {
        /// Results directory written by train, compare, or sweep.
        #[arg(long, value_name = "DIR")]
        dir: PathBuf,
        /// "json" or "csv".
        #[arg(long, default_value = "json")]
        format: String,
        /// Write to this file instead of stdout.
        #[arg(long, value_name = "FILE")]
        file: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    for pair in &cli.set {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{pair}'")))?;
        cfg.apply_override(key, value)?;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(seeds) = cli.seeds {
        cfg.seeds = seeds;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.display().to_string();
    }
    Ok(cfg)
}

/// One-line machine-readable result summary on stdout.
fn print_summary(result: &lectr_core::harness::RunResult) -> Result<()> {
    let line = serde_json::json!({
        "algorithm": result.algorithm,
        "domain": result.domain,
        "seed": result.seed,
        "final_value": result.final_value,
        "auc": result.auc,
        "norm_auc": result.norm_auc,
        "advice_per_episode": result.advice_per_episode,
    });
    println!("{line}");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli)?;
    match &cli.command {
        Command::Train { algorithm } => {
            if let Some(name) = algorithm {
                cfg.algorithm = name.clone();
            }
            let out = train_run(&cfg, cfg.seed)?;
            let dir = Path::new(&cfg.out);
            write_train_outputs(dir, &out.result)?;
            save_policies(&dir.join("policies.json"), &policy_file_for(&cfg, &out)?)?;
            eprintln!("wrote {}", dir.display());
            print_summary(&out.result)
        }
        Command::Evaluate { policies, rollouts } => {
            let value = evaluate_policies(policies, *rollouts)?;
            println!("{}", serde_json::json!({ "value": value, "rollouts": rollouts }));
            Ok(())
        }
        Command::Compare { algorithms } => {
            let seeds = seed_list(&cfg);
            let (report, rows) = compare(&cfg, algorithms, &seeds)?;
            let dir = Path::new(&cfg.out);
            write_comparison(dir, &report, &rows)?;
            for failure in &report.failures {
                eprintln!(
                    "warning: {} seed {} failed: {}",
                    failure.algorithm, failure.seed, failure.message
                );
            }
            eprintln!("wrote {}", dir.display());
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Transfer { policies } => {
            let out = transfer_run(&cfg, policies, cfg.seed)?;
            let dir = Path::new(&cfg.out);
            write_train_outputs(dir, &out.result)?;
            eprintln!("wrote {}", dir.display());
            print_summary(&out.result)
        }
        Command::Sweep { key, values, algorithms } => {
            let seeds = seed_list(&cfg);
            let report = sweep(&cfg, key, values, algorithms, &seeds)?;
            let dir = Path::new(&cfg.out);
            write_sweep(dir, &report)?;
            eprintln!("wrote {}", dir.display());
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
        Command::Export { dir, format, file } => {
            let text = export_directory(dir, ExportFormat::parse(format)?)?;
            match file {
                Some(path) => {
                    if let Some(parent) = path.parent() {
                        std::fs::create_dir_all(parent)?;
                    }
                    std::fs::write(path, text)?;
                    eprintln!("wrote {}", path.display());
                }
                None => print!("{text}"),
            }
            Ok(())
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::PolicyFile(_) => 1,
        _ => 2,
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}
