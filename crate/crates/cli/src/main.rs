use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use onebit_core::harness::{
    format_significant, run_experiment, scan_objective, write_results, ExperimentConfig, ThetaGrid,
    SCAN_HEADER,
};

#[derive(Parser)]
#[command(
    name = "onebit",
    version,
    about = "1-bit ADC angle estimation and analog beamforming experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo experiment and write one CSV row per cell.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of worker threads.
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Dump the elevation likelihood curves of the first realization.
    ScanObjective {
        #[arg(long)]
        config: PathBuf,
        /// Angles in radians as `lo:hi:step`.
        #[arg(long, allow_hyphen_values = true)]
        theta_grid: String,
        #[arg(long)]
        out: PathBuf,
    },
}

fn create(path: &PathBuf) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            seed,
            parallel,
        } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let out = out
                .or_else(|| cfg.output.clone())
                .context("no output path: pass --out or set `output` in the config")?;
            let rows = run_experiment(&cfg, parallel)?;
            let mut w = create(&out)?;
            write_results(&mut w, &rows)?;
            w.flush()?;
            log::info!("wrote {} rows to {}", rows.len(), out.display());
        }
        Command::ScanObjective {
            config,
            theta_grid,
            out,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            let grid = ThetaGrid::parse(&theta_grid)?;
            let rows = scan_objective(&cfg, &grid)?;
            let mut w = csv::Writer::from_writer(create(&out)?);
            w.write_record(SCAN_HEADER)?;
            let f = |v: f64| format_significant(v, 9);
            for r in rows {
                w.write_record([
                    r.n_d.to_string(),
                    f(r.pre_snr_db),
                    f(r.theta),
                    f(r.coherent),
                    f(r.noncoherent),
                ])?;
            }
            w.flush()?;
        }
    }
    Ok(())
}
