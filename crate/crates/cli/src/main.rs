use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use gfra_sim::harness::{
    emit_plot_data, parse_config, read_csv, run_experiment, run_experiment_with_workers, write_csv,
    ExperimentConfig, PlotKind,
};
use gfra_sim::model::DegreeDistribution;

/// Monte Carlo simulator for grant-free random access protocols.
#[derive(Parser)]
#[command(name = "gfra", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the load sweep of a config and write `<protocol>.csv`.
    Run {
        config: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Run a config with the load sweep replaced by `--loads`.
    Sweep {
        config: PathBuf,
        /// Comma-separated loads, e.g. `0.1,0.5,1.0`.
        #[arg(long, value_delimiter = ',', required = true)]
        loads: Vec<f64>,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Turn a results CSV into two-column plot data.
    PlotData {
        csv: PathBuf,
        /// One of throughput, plr, delay, acr.
        #[arg(long)]
        kind: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Config whose degree distribution drives the asymptotic curve.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Parse and check a config without running it.
    Validate { config: PathBuf },
}

#[derive(Args)]
struct RunOpts {
    /// Output directory (defaults to the config's output_path, then `.`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    realizations: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    workers: Option<usize>,
}

fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).with_context(|| format!("parsing {}", path.display()))
}

fn run(mut cfg: ExperimentConfig, opts: RunOpts) -> Result<()> {
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(r) = opts.realizations {
        cfg.realizations = r;
    }
    cfg.validate()?;
    let reports = match opts.workers {
        Some(0) => bail!("--workers must be at least 1"),
        Some(w) => run_experiment_with_workers(&cfg, w)?,
        None => run_experiment(&cfg)?,
    };
    let dir = opts.out.or_else(|| cfg.output_path.clone()).unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(format!("{}.csv", cfg.protocol.name()));
    write_csv(&reports, &path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn main_inner(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, opts } => run(load_config(&config)?, opts),
        Command::Sweep { config, loads, opts } => {
            let mut cfg = load_config(&config)?;
            cfg.load_sweep = loads;
            run(cfg, opts)
        }
        Command::PlotData { csv, kind, out, config } => {
            let kind: PlotKind = kind.parse()?;
            let dist = match config {
                Some(p) => load_config(&p)?.dist,
                None => DegreeDistribution::lambda8(),
            };
            let reports = read_csv(&csv).with_context(|| format!("reading {}", csv.display()))?;
            for p in emit_plot_data(&reports, kind, &out, &dist)? {
                println!("wrote {}", p.display());
            }
            Ok(())
        }
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            println!(
                "ok: {} with {} load point(s), {} realization(s)",
                cfg.protocol,
                cfg.load_sweep.len(),
                cfg.realizations
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
