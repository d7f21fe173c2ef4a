//! `embedprobe`: generate a world, run a batch, analyze the log, render a
//! report.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime
//! failure.

mod manifest;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};

use embedprobe::analysis::{analyze, read_analysis, write_analysis};
use embedprobe::config::{AnalysisSettings, RunConfig};
use embedprobe::harness::{read_log, run_batch, BatchSpec};
use embedprobe::report::render_report;
use embedprobe::world::{preview_samples, write_samples};
use embedprobe::{LandCoverClass, Metric};

use manifest::Manifest;

pub const SEED_ENV: &str = "EMBEDPROBE_SEED";
const PREVIEW_ROWS: usize = 100;

#[derive(Parser)]
#[command(name = "embedprobe", version, about = "Probe which embedding dimensions drive land-cover classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Materialize a configuration into a world file plus a sample preview.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a batch of experiments and write the results log.
    Run {
        /// World file written by `generate`.
        #[arg(long)]
        world: PathBuf,
        /// Experiments per land-cover class.
        #[arg(long)]
        per_class: usize,
        /// Global seed; EMBEDPROBE_SEED takes precedence when set.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
        /// Results log path (JSON Lines).
        #[arg(long)]
        out: PathBuf,
    },
    /// Association matrix, tipping points and taxonomy from a results log.
    Analyze {
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value = "accuracy")]
        metric: String,
        #[arg(long, default_value_t = 0.98)]
        recovery: f64,
        /// Heatmap cell side in degrees.
        #[arg(long, default_value_t = 1.0)]
        cell_deg: f64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Render an analysis directory as one HTML file.
    Report {
        #[arg(long)]
        analysis: PathBuf,
        /// Output HTML path.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Failure split by exit code.
enum Failure {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }
}

fn usage<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Usage(e.into())
}

fn runtime<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Runtime(e.into())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let code = f.code();
            let (Failure::Usage(e) | Failure::Runtime(e)) = f;
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Generate { config, out } => generate(&config, &out),
        Command::Run { world, per_class, seed, parallelism, out } => {
            let seed = match std::env::var(SEED_ENV) {
                Ok(v) => v.trim().parse().map_err(|_| usage(anyhow!("{SEED_ENV}={v:?} is not an unsigned integer")))?,
                Err(_) => seed,
            };
            run(&world, per_class, seed, parallelism, &out)
        }
        Command::Analyze { log, metric, recovery, cell_deg, out } => {
            let metric: Metric = metric.parse().map_err(usage)?;
            let settings = AnalysisSettings { metric, recovery, heatmap_cell_deg: cell_deg };
            settings.validate().map_err(usage)?;
            analyze_cmd(&log, &settings, &out)
        }
        Command::Report { analysis, out } => report(&analysis, &out),
    }
}

fn read_config(path: &Path) -> Result<(RunConfig, Vec<u8>), Failure> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display())).map_err(usage)?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| usage(anyhow!("{}: not UTF-8", path.display())))?;
    let config = RunConfig::from_toml(&text)
        .with_context(|| path.display().to_string())
        .map_err(usage)?;
    Ok((config, bytes))
}

fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn generate(config_path: &Path, out: &Path) -> Result<(), Failure> {
    let (config, bytes) = read_config(config_path)?;
    let materialized = config.materialize().map_err(usage)?;
    let world = materialized.world().map_err(usage)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display())).map_err(runtime)?;

    let world_path = out.join("world.toml");
    let text = materialized.to_toml().map_err(runtime)?;
    std::fs::write(&world_path, text).with_context(|| world_path.display().to_string()).map_err(runtime)?;

    let preview_path = out.join("preview.csv");
    let samples = preview_samples(&world, PREVIEW_ROWS).map_err(runtime)?;
    let file = std::fs::File::create(&preview_path)
        .with_context(|| preview_path.display().to_string())
        .map_err(runtime)?;
    write_samples(file, &samples).map_err(runtime)?;

    Manifest::record(out, "generate", config_path, &bytes, Some(world.seed), &[world_path, preview_path])
        .map_err(runtime)
}

fn run(world_path: &Path, per_class: usize, seed: u64, parallelism: usize, out: &Path) -> Result<(), Failure> {
    let (config, bytes) = read_config(world_path)?;
    let world = config.world().map_err(usage)?;
    if parallelism == 0 {
        return Err(usage(anyhow!("--parallelism must be at least 1")));
    }
    let out_dir = parent_dir(out);
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display())).map_err(runtime)?;
    let spec = BatchSpec {
        targets: LandCoverClass::ALL.to_vec(),
        per_class_count: per_class,
        global_seed: seed,
        protocol: config.experiment.clone(),
        learners: config.learners.clone(),
    };
    let outcome = run_batch(&spec, &world, parallelism, Some(out)).map_err(runtime)?;
    eprintln!(
        "{} experiments, {} flagged invalid, log {}",
        outcome.records.len(),
        outcome.n_invalid,
        out.display()
    );
    let timing = embedprobe::harness::timing_path(out);
    Manifest::record(&out_dir, "run", world_path, &bytes, Some(seed), &[out.to_path_buf(), timing]).map_err(runtime)
}

fn analyze_cmd(log_path: &Path, settings: &AnalysisSettings, out: &Path) -> Result<(), Failure> {
    let log = read_log(log_path).with_context(|| log_path.display().to_string()).map_err(runtime)?;
    let bundle = analyze(&log, settings).map_err(runtime)?;
    write_analysis(out, &bundle).map_err(runtime)?;
    if let Some(s) = &bundle.summary {
        eprintln!("{} valid experiments, {} excluded", s.valid_experiments, s.excluded_experiments);
    }
    let bytes = std::fs::read(log_path).with_context(|| log_path.display().to_string()).map_err(runtime)?;
    let seed = log.first().map(|r| r.global_seed);
    let outputs: Vec<PathBuf> = std::fs::read_dir(out)
        .map_err(runtime)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().is_some_and(|n| n != manifest::FILE_NAME))
        .collect();
    Manifest::record(out, "analyze", log_path, &bytes, seed, &outputs).map_err(runtime)
}

fn report(analysis: &Path, out: &Path) -> Result<(), Failure> {
    if !analysis.is_dir() {
        return Err(usage(anyhow!("{} is not a directory", analysis.display())));
    }
    let (bundle, missing) = read_analysis(analysis).map_err(runtime)?;
    for m in &missing {
        eprintln!("warning: {m} missing from {}; section rendered as unavailable", analysis.display());
    }
    let html = render_report(&bundle);
    let out_dir = parent_dir(out);
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display())).map_err(runtime)?;
    std::fs::write(out, html).with_context(|| out.display().to_string()).map_err(runtime)?;
    let summary = analysis.join(embedprobe::analysis::files::SUMMARY);
    let bytes = std::fs::read(&summary).unwrap_or_default();
    Manifest::record(&out_dir, "report", &summary, &bytes, None, &[out.to_path_buf()]).map_err(runtime)
}
