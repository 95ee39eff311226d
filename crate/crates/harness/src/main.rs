use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use escape_lab_harness::config::ENV_PREFIX;
use escape_lab_harness::{
    emit_report, fit_csv, run_experiment, ExperimentConfig, FitKind, RawConfig, RunReport,
};

#[derive(Parser)]
#[command(
    name = "escape-lab",
    version,
    about = "Escape-rate experiments for open intermittent maps"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Survival curve of the hitting time and its power-law fit
    Survival(RunArgs),
    /// Preimage sequence and return-time tails of the first-return tower
    Tower(RunArgs),
    /// Induced Ulam spectrum and induced exponential escape
    Ulam(RunArgs),
    /// Maximal large-deviation curve of base-visit frequencies
    Mld(RunArgs),
    /// Plain and truncated-sup Birkhoff norm curves
    Norms(RunArgs),
    /// Re-fit a column of an emitted CSV
    Fit(FitArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file of `key = value` lines
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of trajectories or orbits
    #[arg(long)]
    samples: Option<u64>,
    /// Simulation horizon n_max
    #[arg(long)]
    horizon: Option<u64>,
    /// Worker threads; never changes results
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Extra `key=value` overrides, applied last
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct FitArgs {
    /// CSV with an `n` column
    #[arg(long)]
    input: PathBuf,
    /// Column to fit against `n`
    #[arg(long, default_value = "p_hat")]
    column: String,
    /// Fit window as `lo,hi`
    #[arg(long, default_value = "100,10000", value_parser = parse_window)]
    window: (f64, f64),
    /// Fit an exponential rate instead of a power law
    #[arg(long)]
    rate: bool,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected `lo,hi`")?;
    let p = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
    Ok((p(a)?, p(b)?))
}

enum Failure {
    Config(String),
    Run(String),
}

fn resolve(experiment: &str, args: &RunArgs) -> Result<ExperimentConfig, Failure> {
    let cfg = |e: escape_lab_harness::ConfigError| Failure::Config(e.to_string());
    let mut raw = match &args.config {
        Some(p) => RawConfig::from_file(p).map_err(cfg)?,
        None => RawConfig::default(),
    };
    raw.apply_env(std::env::vars().filter(|(k, _)| k.starts_with(ENV_PREFIX)))
        .map_err(cfg)?;
    if let Some(e) = raw.get("experiment") {
        if e != experiment {
            return Err(Failure::Config(format!(
                "config field `experiment`: is `{e}` but the `{experiment}` subcommand was invoked"
            )));
        }
    }
    raw.set("experiment", experiment).map_err(cfg)?;
    let flags = [
        ("seed", args.seed.map(|v| v.to_string())),
        ("samples", args.samples.map(|v| v.to_string())),
        ("horizon", args.horizon.map(|v| v.to_string())),
        ("workers", args.workers.map(|v| v.to_string())),
        (
            "out_dir",
            args.out_dir.as_ref().map(|v| v.display().to_string()),
        ),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            raw.set(k, v).map_err(cfg)?;
        }
    }
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("--set expects KEY=VALUE, found `{kv}`")))?;
        raw.set(k.trim(), v.trim()).map_err(cfg)?;
    }
    ExperimentConfig::from_raw(&raw).map_err(cfg)
}

fn summarize(report: &RunReport, json: &std::path::Path) {
    println!("report: {}", json.display());
    for (label, f) in report.fit_labels.iter().zip(&report.fits) {
        println!(
            "  {label}: exponent {:.4} ± {:.4} on [{}, {}], r² {:.4}",
            f.exponent, f.stderr, f.window.0, f.window.1, f.r_squared
        );
    }
    for (label, f) in report.rate_fit_labels.iter().zip(&report.rate_fits) {
        println!(
            "  {label}: rate {:.5} ± {:.5} on [{}, {}], r² {:.4}",
            f.rate, f.stderr, f.window.0, f.window.1, f.r_squared
        );
    }
    if let (Some(p), Some(pass)) = (report.predicted_exponent, report.pass) {
        println!(
            "  predicted {p:.4}: {}",
            if pass {
                "within tolerance"
            } else {
                "outside tolerance"
            }
        );
    }
    eprintln!("wall clock: {:.3} s", report.wall_clock.as_secs_f64());
}

fn run(cli: Cli) -> Result<(), Failure> {
    let runtime = |e: &dyn std::fmt::Display| Failure::Run(e.to_string());
    let (report, out_dir) = match cli.command {
        Command::Fit(a) => {
            let kind = if a.rate {
                FitKind::Rate
            } else {
                FitKind::PowerLaw
            };
            let start = std::time::Instant::now();
            let mut report =
                fit_csv(&a.input, &a.column, a.window, kind).map_err(|e| runtime(&e))?;
            report.wall_clock = start.elapsed();
            (report, a.out_dir)
        }
        Command::Survival(a) => run_named("survival", &a)?,
        Command::Tower(a) => run_named("tower", &a)?,
        Command::Ulam(a) => run_named("ulam", &a)?,
        Command::Mld(a) => run_named("mld", &a)?,
        Command::Norms(a) => run_named("norms", &a)?,
    };
    let json = emit_report(&report, &out_dir).map_err(|e| runtime(&e))?;
    summarize(&report, &json);
    Ok(())
}

fn run_named(experiment: &str, args: &RunArgs) -> Result<(RunReport, PathBuf), Failure> {
    let config = resolve(experiment, args)?;
    let report = run_experiment(&config).map_err(|e| Failure::Run(e.to_string()))?;
    Ok((report, config.out_dir.clone()))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
