use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use multisplit_core::backtest::{evaluate_forecasts, figure_series, run_experiment, ExperimentConfig};
use multisplit_core::data::{dst_normalize, generate_synthetic_panel, load_panel, write_panel, DgpConfig, ModelData};
use multisplit_core::{Error, Result};

#[derive(Parser)]
#[command(name = "multisplit", version, about = "Probabilistic electricity market forecasts and trading backtests")]
struct Cli {
    /// Experiment config file (`key = value` lines).
    #[arg(long, global = true, env = "MULTISPLIT_CONFIG")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Overrides {
    /// Hourly panel CSV.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads, 0 for all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Any config key, e.g. `--set methods=HS,MS`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Check the config and the input panel.
    Validate(Overrides),
    /// Write a synthetic panel.
    Synth {
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = 1461)]
        days: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        start: Option<NaiveDate>,
    },
    /// Forecast one target day and write its forecasts.
    Forecast {
        #[arg(long)]
        date: NaiveDate,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Coverage and CRPS of an existing forecasts.csv.
    Evaluate {
        #[arg(long)]
        forecasts: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Rolling-window experiment over the evaluation period.
    Backtest(Overrides),
    /// Figure series from a backtest output directory.
    Report {
        /// Directory holding strategies.csv and decisions.csv.
        #[arg(long)]
        dir: PathBuf,
        /// Defaults to `dir`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>, o: &Overrides) -> Result<ExperimentConfig> {
    let mut config = match path {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(v) = &o.input {
        config.input = Some(v.clone());
    }
    if let Some(v) = &o.output {
        config.output = v.clone();
    }
    if let Some(v) = o.seed {
        config.seed = v;
    }
    if let Some(v) = o.threads {
        config.threads = v;
    }
    for kv in &o.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("`--set {kv}` is not KEY=VALUE")))?;
        config.set(k.trim(), v.trim())?;
    }
    config.validate()?;
    Ok(config)
}

fn load_data(config: &ExperimentConfig) -> Result<ModelData> {
    let input = config
        .input
        .as_ref()
        .ok_or_else(|| Error::Config("no input panel; pass --input or set `input`".into()))?;
    let raw = load_panel(input, &config.schema)?;
    Ok(ModelData::new(dst_normalize(&raw)?))
}

fn run(cli: Cli) -> Result<()> {
    let config_path = cli.config.as_deref();
    match cli.command {
        Command::Validate(o) => {
            let config = load_config(config_path, &o)?;
            let data = load_data(&config)?;
            println!(
                "panel: {} days, {} .. {}",
                data.days(),
                data.date(0),
                data.date(data.days() - 1)
            );
            multisplit_core::backtest::Backtest::new(&config, &data)?;
            println!("config ok");
        }
        Command::Synth { output, days, seed, start } => {
            let mut dgp = DgpConfig {
                days,
                ..DgpConfig::default()
            };
            if let Some(s) = start {
                dgp.start = s;
            }
            write_panel(&generate_synthetic_panel(&dgp, seed)?, &output)?;
            println!("wrote {days} days to {}", output.display());
        }
        Command::Forecast { date, overrides } => {
            let mut config = load_config(config_path, &overrides)?;
            config.first_evaluation_date = Some(date);
            config.evaluation_days = 1;
            config.write_forecasts = true;
            let data = load_data(&config)?;
            let exp = run_experiment(&config, &data)?;
            let bundle = exp.bundle(&config)?;
            std::fs::create_dir_all(&config.output)?;
            for name in ["forecasts.csv", "points.csv", "decisions.csv", "ensembles_meta.csv"] {
                if let Some(text) = bundle.get(name) {
                    std::fs::write(config.output.join(name), text)?;
                }
            }
            println!("forecasts for {date} in {}", config.output.display());
        }
        Command::Evaluate { forecasts, output } => {
            let (_, bundle) = evaluate_forecasts(File::open(&forecasts)?)?;
            bundle.write_to(&output)?;
            println!("wrote coverage.csv and crps.csv to {}", output.display());
        }
        Command::Backtest(o) => {
            let config = load_config(config_path, &o)?;
            let data = load_data(&config)?;
            let exp = run_experiment(&config, &data)?;
            let bundle = exp.bundle(&config)?;
            bundle.write_to(&config.output)?;
            print!("{}", bundle.get("summary.txt").unwrap_or_default());
        }
        Command::Report { dir, output } => {
            let bundle = figure_series(
                File::open(dir.join("strategies.csv"))?,
                File::open(dir.join("decisions.csv"))?,
            )?;
            let out = output.unwrap_or(dir);
            bundle.write_to(&out)?;
            println!("wrote {} figure files to {}", bundle.files.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
