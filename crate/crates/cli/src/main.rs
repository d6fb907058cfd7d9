//! `panelcast` command-line driver.
//!
//! Exit codes: 0 success, 1 usage error, 2 bad config or input data,
//! 3 a modelling stage could not produce a result.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Deserialize;

use panelcast::pipeline::{self, PipelineError, RunConfig, Stage};

#[derive(Debug, Parser)]
#[command(name = "panelcast", version, about = "Per-country indicator panel forecasting")]
struct Cli {
    /// TOML run config (for run-all, a file listing configs).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Repeat for more detail (-v info, -vv debug).
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load the panel and target and audit missingness.
    Ingest,
    /// Drop sparse indicators and impute the rest.
    Impute,
    /// Rank indicators against the target.
    Select,
    /// Fit ARIMA models to the selected indicators and simulate them.
    Simulate,
    /// Grid-search the boosting parameters.
    Tune,
    /// Score the tuned model on the held-out years.
    Evaluate,
    /// Forecast the target over the horizon.
    Forecast,
    /// Run every stage and write the full report.
    Run,
    /// Run several configs listed as `configs = [...]`, one output
    /// directory per country.
    RunAll,
    /// Summarise an existing output directory.
    Report,
    /// Print the default config as TOML.
    DefaultConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunAllManifest {
    configs: Vec<PathBuf>,
}

fn load_config(cli: &Cli, path: &Path) -> Result<RunConfig, PipelineError> {
    let mut cfg = RunConfig::from_file(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(t) = cli.threads {
        cfg.threads = t;
    }
    Ok(cfg)
}

fn require_config(cli: &Cli) -> Result<&Path, PipelineError> {
    cli.config
        .as_deref()
        .ok_or_else(|| PipelineError::config("--config is required"))
}

fn stage_of(cmd: &Command) -> Option<Stage> {
    Some(match cmd {
        Command::Ingest => Stage::DropSparse,
        Command::Impute => Stage::Impute,
        Command::Select => Stage::Select,
        Command::Simulate => Stage::Simulate,
        Command::Tune => Stage::Tune,
        Command::Evaluate => Stage::Evaluate,
        Command::Forecast => Stage::Forecast,
        _ => return None,
    })
}

fn print_written(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn run_one(cfg: &RunConfig) -> Result<(), PipelineError> {
    let result = pipeline::run_pipeline(cfg)?;
    let written = pipeline::emit_report(&result, &cfg.output_dir)?;
    print_written(&written);
    println!(
        "{}: test MAPE {:.3}%, {} features, forecast {}",
        result.country,
        result.eval.test_mape,
        result.features.len(),
        result
            .horizon
            .iter()
            .map(|h| format!("{}={:.2}", h.year, h.spi_predicted))
            .collect::<Vec<_>>()
            .join(" ")
    );
    Ok(())
}

fn run_all(cli: &Cli) -> Result<(), PipelineError> {
    let path = require_config(cli)?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| PipelineError::config(format!("{}: {e}", path.display())))?;
    let manifest: RunAllManifest =
        toml::from_str(&text).map_err(|e| PipelineError::config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    let mut first_failure = None;
    for rel in &manifest.configs {
        let cfg_path = base.join(rel);
        let outcome = load_config(cli, &cfg_path).and_then(|mut cfg| {
            if cli.out.is_some() {
                cfg.output_dir = cfg.output_dir.join(&cfg.country);
            }
            run_one(&cfg)
        });
        match outcome {
            Ok(()) => println!("{}: ok", cfg_path.display()),
            Err(e) => {
                eprintln!("{}: {e}", cfg_path.display());
                first_failure.get_or_insert(e);
            }
        }
    }
    first_failure.map_or(Ok(()), Err)
}

fn report(cli: &Cli) -> Result<(), PipelineError> {
    let dir = match (&cli.out, &cli.config) {
        (Some(out), _) => out.clone(),
        (None, Some(_)) => load_config(cli, require_config(cli)?)?.output_dir,
        (None, None) => return Err(PipelineError::config("report needs --out or --config")),
    };
    let run_json = dir.join("run.json");
    let text = std::fs::read_to_string(&run_json)
        .map_err(|e| PipelineError::config(format!("{}: {e}", run_json.display())))?;
    let v: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| PipelineError::config(format!("{}: {e}", run_json.display())))?;
    println!("country      {}", v["country"].as_str().unwrap_or("?"));
    println!("config hash  {}", v["provenance"]["config_hash"].as_str().unwrap_or("?"));
    println!("timestamp    {}", v["provenance"]["timestamp"].as_str().unwrap_or("?"));
    println!("train MAPE   {}", v["train_mape"]);
    println!("test MAPE    {}", v["test_mape"]);
    println!("features     {}", v["features"]);
    for h in pipeline::read_forecast_csv(&dir.join("forecast.csv"))? {
        println!("forecast     {} {:.3}", h.year, h.spi_predicted);
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<(), PipelineError> {
    match &cli.command {
        Command::DefaultConfig => {
            print!("{}", RunConfig::default().to_toml_string());
            Ok(())
        }
        Command::Report => report(cli),
        Command::RunAll => run_all(cli),
        Command::Run => run_one(&load_config(cli, require_config(cli)?)?),
        cmd => {
            let stage = stage_of(cmd).expect("remaining commands are stages");
            let cfg = load_config(cli, require_config(cli)?)?;
            let run = pipeline::with_threads(cfg.threads, || pipeline::run_until(&cfg, stage))?;
            print_written(&pipeline::write_partial(&run, &cfg.output_dir)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
