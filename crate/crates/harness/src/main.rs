use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use cmm_harness::experiment::{dump_truth, run_experiment};
use cmm_harness::summary::{aggregate, read_summary_csv, write_table_csv};
use cmm_harness::{Method, NoiseModel, ScenarioConfig};

#[derive(Parser)]
#[command(name = "cmm", version, about = "Cooperative map matching experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every method × noise model × seed combination of a config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Replaces the config's seed list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        method: Option<Method>,
        #[arg(long = "noise-model")]
        noise_model: Option<NoiseModel>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Also write the ground-truth CSVs.
        #[arg(long)]
        dump_truth: bool,
    },
    /// Average summary.csv over seeds and print one line per cell.
    Summarize {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, seed, method, noise_model, out, dump_truth: truth } => {
            let mut cfg = ScenarioConfig::from_file(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            if let Some(s) = seed {
                cfg.seeds = vec![s];
            }
            if let Some(m) = method {
                cfg.methods = vec![m];
            }
            if let Some(n) = noise_model {
                cfg.noise_models = vec![n];
            }
            if truth {
                dump_truth(&cfg, &out)?;
            }
            let rows = run_experiment(&cfg, &out)?;
            for r in &rows {
                let rms = r.metrics.as_ref().map_or(f64::NAN, |m| m.rms);
                let status = if r.ok { "ok" } else { "FAILED" };
                println!("{:<16} {:<24} seed {:<6} rms {rms:.3} m  {status} {}", r.method, r.noise_model, r.seed, r.diagnostics);
            }
            println!("wrote {}", out.join("summary.csv").display());
        }
        Command::Summarize { out } => {
            let path = out.join("summary.csv");
            let rows = read_summary_csv(File::open(&path).with_context(|| format!("opening {}", path.display()))?)?;
            let cells = aggregate(&rows);
            println!("{:<16} {:<24} {:>5} {:>7} {:>10} {:>14}", "method", "noise_model", "runs", "failed", "rms [m]", "cov_det [m^4]");
            for c in &cells {
                println!(
                    "{:<16} {:<24} {:>5} {:>7} {:>10.3} {:>14.3e}",
                    c.method, c.noise_model, c.runs, c.failed, c.mean_rms, c.mean_median_cov_det
                );
            }
            write_table_csv(BufWriter::new(File::create(out.join("table.csv"))?), &cells)?;
        }
    }
    Ok(())
}
