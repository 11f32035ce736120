//! Command-line entry point.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::Parser;

use crate::error::{Error, Result};

use super::config::{ExperimentConfig, ExperimentKind};
use super::experiments::{run, ExperimentOutput};
use super::output::{write_atomic, write_sidecar, RunMetadata};

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

/// Env var capping the number of worker threads (0 = automatic).
pub const THREADS_ENV: &str = "MASSIM_THREADS";

#[derive(Debug, Parser)]
#[command(name = "massim", version = VERSION, about = "Massive MIMO matched-filter downlink simulator")]
struct Cli {
    /// Flat key = value config file.
    config: Option<PathBuf>,
    /// Experiment to run (overrides the file).
    #[arg(long)]
    experiment: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "n-drops")]
    n_drops: Option<usize>,
    /// Output CSV path; the JSON sidecar is written next to it.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let kind = cli
        .experiment
        .as_deref()
        .map(str::parse::<ExperimentKind>)
        .transpose()?;
    let mut config = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Error::config(format!("cannot read config {}: {e}", path.display()))
            })?;
            ExperimentConfig::parse(&text, kind)?
        }
        None => ExperimentConfig::defaults(kind.ok_or_else(|| {
            Error::config("no config file given; pass a config path or --experiment")
        })?),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(n) = cli.n_drops {
        config.n_drops = n;
    }
    if let Some(out) = &cli.output {
        config.output_path = out.clone();
    }
    for kv in &cli.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        config.set(k.trim(), v.trim())?;
    }
    config.validate()?;
    Ok(config)
}

fn thread_count() -> Result<usize> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(0),
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("{THREADS_ENV} must be a nonnegative integer, got '{v}'"))),
    }
}

/// Runs `config` on a pool of `threads` workers (0 = automatic).
pub fn run_with_threads(config: &ExperimentConfig, threads: usize) -> Result<ExperimentOutput> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config(format!("cannot build thread pool: {e}")))?;
    pool.install(|| run(config))
}

fn execute(config: &ExperimentConfig) -> Result<String> {
    let start = Instant::now();
    let output = run_with_threads(config, thread_count()?)?;
    let csv = output.to_csv();
    write_atomic(&config.output_path, csv.as_bytes())?;
    let meta = RunMetadata {
        experiment: config.experiment.name(),
        version: VERSION,
        seed: config.seed,
        n_drops: config.n_drops,
        n_fading_realizations: config.n_fading_realizations,
        wall_time_s: start.elapsed().as_secs_f64(),
        rows: output.rows(),
        config,
    };
    write_sidecar(&config.output_path, &meta)?;
    Ok(format!(
        "{}: {} -> {} ({:.1} s)",
        config.experiment,
        output.summary(),
        config.output_path.display(),
        meta.wall_time_s
    ))
}

/// Parses `args` (including the program name), runs the experiment and
/// returns the process exit code: 0 on success, 2 for usage or config
/// errors, 1 for model errors.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let config = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("massim: {e}");
            return 2;
        }
    };
    match execute(&config) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("massim: {e}");
            let code = exit_code(&e);
            if code == 1 {
                match serde_json::to_string(&config) {
                    Ok(json) => eprintln!("massim: parameters: {json}"),
                    Err(_) => eprintln!("massim: parameters: {config:?}"),
                }
            }
            code
        }
    }
}

/// Exit code for a failed run: 2 for config or usage problems, 1 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_config_error() {
        2
    } else {
        1
    }
}
