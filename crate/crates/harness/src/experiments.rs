//! Dispatch from a validated configuration to the numerical pipelines.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use escape_lab::maps::{Intermittent, Map};
use escape_lab::measure::{
    base_mass, induced_ulam, orbit, return_tail, stationary_density, LebesgueBurnIn,
};
use escape_lab::open_systems::{
    geometric_grid, induced_survival, leading_eigenvalue, open_ulam, survival_curve,
    tower_survival_curve, SolenoidStarts, SurvivalCurve,
};
use escape_lab::stats::{
    birkhoff_norm_curves, fit_exponential_rate, fit_power_law, fit_survival, max_deviation_curve,
    PowerLawFit,
};
use escape_lab::text::sig17;
use escape_lab::tower::SyntheticTower;
use escape_lab::{
    FareyMap, Hole1D, HoleCylinder, LsvMap, RotationMap, SolenoidMap, Tower, TowerSampler,
};
use num_complex::Complex;

use crate::config::{Estimator, Experiment, ExperimentConfig, Observable, SamplerKind, System};
use crate::report::{FitRecord, RateRecord, RunReport};

/// Preimage levels kept for induced Ulam matrices.
const ULAM_LEVELS: usize = 200_000;
/// Orbit length for the base-visit frequency used by deviation curves.
const BASE_MASS_ORBIT: usize = 100_000_000;
const BASE_MASS_BURN_IN: usize = 1_000;
const EIGEN_TOL: f64 = 1e-13;
const EIGEN_ITER_MAX: usize = 100_000;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{context}: {source}")]
    Model {
        context: &'static str,
        #[source]
        source: escape_lab::Error,
    },
    #[error("cannot build worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Input(String),
}

trait Context<T> {
    fn ctx(self, context: &'static str) -> Result<T, RunError>;
}

impl<T> Context<T> for escape_lab::Result<T> {
    fn ctx(self, context: &'static str) -> Result<T, RunError> {
        self.map_err(|source| RunError::Model { context, source })
    }
}

/// Runs the configured experiment on a pool of `config.workers` threads
/// (or the global pool). Results never depend on the worker count.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunReport, RunError> {
    let start = Instant::now();
    let mut report = match config.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()?
            .install(|| dispatch(config))?,
        None => dispatch(config)?,
    };
    report.wall_clock = start.elapsed();
    Ok(report)
}

fn dispatch(c: &ExperimentConfig) -> Result<RunReport, RunError> {
    let mut report = RunReport::new(c.experiment.name(), c.system.name(), &c.name, c.echo());
    match (c.experiment, c.system) {
        (Experiment::Survival, System::Lsv { alpha }) => {
            survival_intermittent(c, &mut report, LsvMap::new(alpha).ctx("alpha")?)?
        }
        (Experiment::Survival, System::Farey { theta }) => {
            survival_intermittent(c, &mut report, FareyMap::new(theta).ctx("theta")?)?
        }
        (Experiment::Survival, System::Solenoid { alpha, theta_c }) => {
            survival_solenoid(c, &mut report, alpha, theta_c)?
        }
        (Experiment::Survival, System::Rotation { gamma }) => {
            let map = RotationMap::new(gamma).ctx("gamma")?;
            let starts = LebesgueBurnIn {
                map,
                burn_in: c.burn_in,
            };
            let hole = c.hole_1d().expect("validated");
            let curve = survival_curve(&map, &hole, &starts, c.samples, c.horizon, c.seed)
                .ctx("survival")?;
            record_survival(c, &mut report, &curve)?;
        }
        (Experiment::Survival, System::SyntheticTower { beta }) => {
            survival_synthetic(c, &mut report, beta)?
        }
        (Experiment::Tower, System::Lsv { alpha }) => {
            tower_tails(c, &mut report, LsvMap::new(alpha).ctx("alpha")?)?
        }
        (Experiment::Tower, System::Farey { theta }) => {
            tower_tails(c, &mut report, FareyMap::new(theta).ctx("theta")?)?
        }
        (Experiment::Ulam, System::Lsv { alpha }) => {
            ulam(c, &mut report, LsvMap::new(alpha).ctx("alpha")?)?
        }
        (Experiment::Ulam, System::Farey { theta }) => {
            ulam(c, &mut report, FareyMap::new(theta).ctx("theta")?)?
        }
        (Experiment::Mld, System::Lsv { alpha }) => {
            mld(c, &mut report, LsvMap::new(alpha).ctx("alpha")?)?
        }
        (Experiment::Mld, System::Farey { theta }) => {
            mld(c, &mut report, FareyMap::new(theta).ctx("theta")?)?
        }
        (Experiment::Norms, System::Rotation { gamma }) => {
            norms(c, &mut report, RotationMap::new(gamma).ctx("gamma")?)?
        }
        (Experiment::Norms, System::Lsv { alpha }) => {
            norms(c, &mut report, LsvMap::new(alpha).ctx("alpha")?)?
        }
        (Experiment::Norms, System::Farey { theta }) => {
            norms(c, &mut report, FareyMap::new(theta).ctx("theta")?)?
        }
        _ => unreachable!("rejected at validation"),
    }
    Ok(report)
}

fn record_survival(
    c: &ExperimentConfig,
    report: &mut RunReport,
    curve: &SurvivalCurve,
) -> Result<(), RunError> {
    report.add_artifact("survival_curve", "curve.csv", curve.to_csv());
    report.diagnostics.insert(
        "censored_fraction".into(),
        curve.censored as f64 / curve.total as f64,
    );
    let fit = fit_survival(curve, c.fit_window).ctx("survival fit")?;
    report.add_fit("survival", FitRecord::new(&fit, c.samples, Some(c.seed)));
    report.judge(c.system.predicted_exponent(), c.tolerance);
    Ok(())
}

fn survival_intermittent<M: Intermittent<f64> + Sync>(
    c: &ExperimentConfig,
    report: &mut RunReport,
    map: M,
) -> Result<(), RunError> {
    let hole = c.hole_1d().expect("validated");
    let curve = match c.sampler {
        SamplerKind::Tower => {
            let sampler = TowerSampler::for_hole(map, &hole, c.base_extra, c.horizon, c.seed)
                .ctx("tower sampler")?;
            report
                .diagnostics
                .insert("base_index".into(), sampler.tower().base_index() as f64);
            report
                .diagnostics
                .insert("kac_base_mass".into(), sampler.kac_base_mass());
            tower_survival_curve(
                sampler.tower(),
                &hole,
                &sampler,
                c.samples,
                c.horizon,
                c.seed,
            )
            .ctx("survival")?
        }
        SamplerKind::Lebesgue => {
            let starts = LebesgueBurnIn {
                map: map.clone(),
                burn_in: c.burn_in,
            };
            survival_curve(&map, &hole, &starts, c.samples, c.horizon, c.seed).ctx("survival")?
        }
    };
    record_survival(c, report, &curve)
}

fn survival_solenoid(
    c: &ExperimentConfig,
    report: &mut RunReport,
    alpha: f64,
    theta_c: f64,
) -> Result<(), RunError> {
    let sol = SolenoidMap::new(alpha, theta_c).ctx("theta_c")?;
    let x_hole = c.hole_1d().expect("validated");
    let cyl = HoleCylinder::new(
        x_hole.clone(),
        c.disk.map(|(re, im, r)| (Complex::new(re, im), r)),
    )
    .ctx("disk")?;
    let base = *sol.base();
    let curve = match c.sampler {
        SamplerKind::Tower => {
            let x_starts =
                TowerSampler::for_hole(base, &x_hole, c.base_extra, c.horizon + c.burn_in, c.seed)
                    .ctx("tower sampler")?;
            report
                .diagnostics
                .insert("base_index".into(), x_starts.tower().base_index() as f64);
            let starts = SolenoidStarts {
                map: sol,
                x_starts: &x_starts,
                burn_in: c.burn_in,
            };
            survival_curve(&sol, &cyl, &starts, c.samples, c.horizon, c.seed).ctx("survival")?
        }
        SamplerKind::Lebesgue => {
            let x_starts = LebesgueBurnIn {
                map: base,
                burn_in: 0,
            };
            let starts = SolenoidStarts {
                map: sol,
                x_starts: &x_starts,
                burn_in: c.burn_in,
            };
            survival_curve(&sol, &cyl, &starts, c.samples, c.horizon, c.seed).ctx("survival")?
        }
    };
    record_survival(c, report, &curve)
}

fn survival_synthetic(
    c: &ExperimentConfig,
    report: &mut RunReport,
    beta: f64,
) -> Result<(), RunError> {
    let st = SyntheticTower::new(beta).ctx("beta")?;
    report
        .diagnostics
        .insert("mean_return".into(), st.mean_return());
    match c.estimator {
        Estimator::Plain => {
            let curve = st
                .survival(c.hole_mass, c.samples, c.horizon, c.seed)
                .ctx("survival")?;
            record_survival(c, report, &curve)
        }
        Estimator::RemainingTime => {
            let est = st
                .survival_by_remaining_time(c.hole_mass, c.samples, c.horizon, c.seed)
                .ctx("survival")?;
            let mut csv = String::from("n,p_hat,stderr\n");
            for i in 0..est.times.len() {
                let _ = writeln!(
                    csv,
                    "{},{},{}",
                    est.times[i],
                    sig17(est.values[i]),
                    sig17(est.stderr[i])
                );
            }
            report.add_artifact("survival_estimate", "estimate.csv", csv);
            let fit = fit_power_law(&est.series(), c.fit_window).ctx("survival fit")?;
            report.add_fit("survival", FitRecord::new(&fit, c.samples, Some(c.seed)));
            report.judge(c.system.predicted_exponent(), c.tolerance);
            Ok(())
        }
    }
}

fn tower_tails<M: Intermittent<f64> + Sync>(
    c: &ExperimentConfig,
    report: &mut RunReport,
    map: M,
) -> Result<(), RunError> {
    let hole = c.hole_1d().expect("validated");
    let tower = Tower::for_hole(map, &hole, c.base_extra, 10 * c.horizon as usize).ctx("tower")?;
    let ns = geometric_grid(c.horizon);
    let rt = return_tail(&tower, &ns).ctx("return tails")?;
    let seq = tower.sequence();
    let mut csv = String::from("n,preimage,tail,tail_sum\n");
    for (i, &n) in rt.n.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{n},{},{},{}",
            sig17(seq.get(n as usize)),
            sig17(rt.tail[i]),
            sig17(rt.tail_sum[i])
        );
    }
    report.add_artifact("return_tails", "tails.csv", csv);
    report
        .diagnostics
        .insert("base_index".into(), tower.base_index() as f64);
    report
        .diagnostics
        .insert("base_length".into(), tower.base_length());
    report
        .diagnostics
        .insert("tail_sum_remainder".into(), rt.remainder);
    let series = |v: &[f64]| -> Vec<(f64, f64)> {
        rt.n.iter().zip(v).map(|(&n, &y)| (n as f64, y)).collect()
    };
    let preimage: Vec<f64> = rt.n.iter().map(|&n| seq.get(n as usize)).collect();
    let n_levels = seq.len() as u64;
    let mut add = |label: &str, s: &[(f64, f64)]| -> Result<(), RunError> {
        let fit = fit_power_law(s, c.fit_window).ctx("tail fit")?;
        report.add_fit(label, FitRecord::new(&fit, n_levels, None));
        Ok(())
    };
    add("return_tail_sum", &series(&rt.tail_sum))?;
    add("return_tail", &series(&rt.tail))?;
    add("preimage", &series(&preimage))?;
    report.judge(c.system.predicted_exponent(), c.tolerance);
    Ok(())
}

fn open_lambda<M: Intermittent<f64> + Sync>(
    tower: &Tower<M>,
    hole: &Hole1D,
    cells: usize,
    c: &ExperimentConfig,
) -> Result<
    (
        escape_lab::measure::UlamOperator,
        f64,
        escape_lab::measure::GridDensity,
    ),
    RunError,
> {
    let op = induced_ulam(tower, cells, c.samples_per_cell, c.seed).ctx("induced Ulam matrix")?;
    let open = open_ulam(&op, hole).ctx("open Ulam matrix")?;
    let (lambda, qsd) =
        leading_eigenvalue(&open, EIGEN_TOL, EIGEN_ITER_MAX).ctx("leading eigenvalue")?;
    Ok((op, lambda, qsd))
}

fn ulam<M: Intermittent<f64> + Sync>(
    c: &ExperimentConfig,
    report: &mut RunReport,
    map: M,
) -> Result<(), RunError> {
    let hole = c.hole_1d().expect("validated");
    let tower = Tower::for_hole(map, &hole, c.base_extra, ULAM_LEVELS).ctx("tower")?;
    let (op, lambda, qsd) = open_lambda(&tower, &hole, c.cells, c)?;
    let (_, lambda_fine, _) = open_lambda(&tower, &hole, 2 * c.cells, c)?;
    let density = stationary_density(&op, EIGEN_TOL, EIGEN_ITER_MAX).ctx("induced density")?;
    let curve = induced_survival(&tower, &hole, &density, c.samples, c.j_max, c.seed)
        .ctx("induced survival")?;
    let fit = fit_exponential_rate(&curve.series(), c.rate_window).ctx("rate fit")?;
    let ulam_rate = -lambda.ln();
    report.add_rate_fit(
        "induced_survival",
        RateRecord::new(&fit, c.samples, Some(c.seed)),
    );
    let d = &mut report.diagnostics;
    d.insert("base_index".into(), tower.base_index() as f64);
    d.insert("lambda".into(), lambda);
    d.insert("lambda_refined".into(), lambda_fine);
    d.insert(
        "lambda_relative_change".into(),
        ((lambda_fine - lambda) / lambda).abs(),
    );
    d.insert("ulam_rate".into(), ulam_rate);
    d.insert(
        "rate_relative_gap".into(),
        ((fit.rate - ulam_rate) / ulam_rate).abs(),
    );
    report.add_artifact("ulam_operator", "operator.csv", op.to_csv());
    report.add_artifact("induced_density", "density.csv", density.to_csv());
    report.add_artifact("quasi_stationary_density", "qsd.csv", qsd.to_csv());
    report.add_artifact("induced_survival", "induced_survival.csv", curve.to_csv());
    Ok(())
}

fn mld<M: Intermittent<f64> + Sync>(
    c: &ExperimentConfig,
    report: &mut RunReport,
    map: M,
) -> Result<(), RunError> {
    let hole = c.hole_1d().expect("validated");
    let sampler = TowerSampler::for_hole(map.clone(), &hole, c.base_extra, c.horizon, c.seed)
        .ctx("tower sampler")?;
    let low = sampler.tower().base_low();
    let k = match c.k {
        Some(k) => k,
        None => {
            let m = base_mass(
                orbit(&map, 0.3),
                |&x: &f64| x > low,
                BASE_MASS_ORBIT,
                BASE_MASS_BURN_IN,
            )
            .ctx("base mass")?;
            report.diagnostics.insert("k_stderr".into(), m.stderr);
            m.value
        }
    };
    let threshold = c.threshold.unwrap_or(k / 2.0);
    let grid: Vec<u64> = geometric_grid(c.horizon)
        .into_iter()
        .filter(|&n| n >= c.grid_min)
        .collect();
    let curve = max_deviation_curve(
        &map,
        |x| x > low,
        &sampler,
        k,
        threshold,
        &grid,
        c.horizon,
        c.samples,
        c.seed,
    )
    .ctx("deviation curve")?;
    let mut csv = String::from("n,probability,count\n");
    for i in 0..curve.n_grid.len() {
        let _ = writeln!(
            csv,
            "{},{},{}",
            curve.n_grid[i],
            sig17(curve.probabilities[i]),
            curve.counts[i]
        );
    }
    report.add_artifact("max_deviation_curve", "curve.csv", csv);
    let d = &mut report.diagnostics;
    d.insert("k".into(), k);
    d.insert("kac_base_mass".into(), sampler.kac_base_mass());
    d.insert("threshold".into(), threshold);
    d.insert("base_index".into(), sampler.tower().base_index() as f64);
    let fit = fit_power_law(&curve.series(), c.fit_window).ctx("deviation fit")?;
    report.add_fit(
        "max_deviation",
        FitRecord::new(&fit, c.samples, Some(c.seed)),
    );
    report.judge(c.system.predicted_exponent(), c.tolerance);
    Ok(())
}

fn norms<M: Map<Point = f64> + Clone>(
    c: &ExperimentConfig,
    report: &mut RunReport,
    map: M,
) -> Result<(), RunError> {
    let starts = LebesgueBurnIn {
        map: map.clone(),
        burn_in: c.burn_in,
    };
    let grid: Vec<u64> = geometric_grid(c.horizon)
        .into_iter()
        .filter(|&n| n >= c.grid_min)
        .collect();
    let phi: fn(f64) -> f64 = match c.observable {
        Observable::Cos2Pi => |x: f64| (std::f64::consts::TAU * x).cos(),
        Observable::RightHalf => |x: f64| if x > 0.5 { 1.0 } else { 0.0 },
    };
    let curve = birkhoff_norm_curves(
        &map, phi, &starts, &grid, c.horizon, c.p, c.samples, None, c.seed,
    )
    .ctx("norm curves")?;
    let (plain, sup) = (curve.plain_moments(), curve.sup_moments());
    let mut csv = String::from("n,plain_norm,sup_norm,plain_moment,sup_moment\n");
    for i in 0..grid.len() {
        let _ = writeln!(
            csv,
            "{},{},{},{},{}",
            grid[i],
            sig17(curve.plain_norms[i]),
            sig17(curve.sup_norms[i]),
            sig17(plain[i].1),
            sig17(sup[i].1)
        );
    }
    report.add_artifact("norm_curves", "curves.csv", csv);
    let fp = fit_power_law(&plain, c.fit_window).ctx("plain moment fit")?;
    let fs = fit_power_law(&sup, c.fit_window).ctx("sup moment fit")?;
    report.diagnostics.insert("mean".into(), curve.mean);
    report
        .diagnostics
        .insert("exponent_gap".into(), (fp.exponent - fs.exponent).abs());
    report.add_fit("plain_moment", FitRecord::new(&fp, c.samples, Some(c.seed)));
    report.add_fit("sup_moment", FitRecord::new(&fs, c.samples, Some(c.seed)));
    Ok(())
}

/// What [`fit_csv`] fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitKind {
    PowerLaw,
    Rate,
}

/// Re-fits column `column` against column `n` of an emitted CSV.
pub fn fit_csv(
    path: &Path,
    column: &str,
    window: (f64, f64),
    kind: FitKind,
) -> Result<RunReport, RunError> {
    let text = std::fs::read_to_string(path).map_err(|source| RunError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let input = |msg: String| RunError::Input(format!("{}: {msg}", path.display()));
    let mut lines = text.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| input("empty file".into()))?
        .split(',')
        .collect();
    let col = |name: &str| header.iter().position(|h| h.trim() == name);
    let xi = col("n").ok_or_else(|| input("no `n` column".into()))?;
    let yi = col(column).ok_or_else(|| input(format!("no `{column}` column")))?;
    let ti = col("total");
    let mut series = Vec::new();
    let mut n_samples = 0u64;
    for (row, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = line.split(',').collect();
        let num = |i: usize| -> Result<f64, RunError> {
            f.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| input(format!("row {}: bad field {}", row + 2, i + 1)))
        };
        series.push((num(xi)?, num(yi)?));
        if let Some(ti) = ti {
            n_samples = num(ti)? as u64;
        }
    }
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("fit");
    let name: String = stem
        .chars()
        .map(|ch| {
            if ch.is_ascii_alphanumeric() || ch == '-' {
                ch
            } else {
                '_'
            }
        })
        .collect();
    let mut cfg = std::collections::BTreeMap::new();
    cfg.insert("input".to_string(), path.display().to_string());
    cfg.insert("column".to_string(), column.to_string());
    cfg.insert(
        "fit_window".to_string(),
        format!("({},{})", window.0, window.1),
    );
    let mut report = RunReport::new("fit", "none", &format!("{name}_fit"), cfg);
    match kind {
        FitKind::PowerLaw => {
            let fit: PowerLawFit = fit_power_law(&series, window).ctx("fit")?;
            report.add_fit(column, FitRecord::new(&fit, n_samples, None));
        }
        FitKind::Rate => {
            let fit = fit_exponential_rate(&series, window).ctx("fit")?;
            report.add_rate_fit(column, RateRecord::new(&fit, n_samples, None));
        }
    }
    Ok(report)
}
