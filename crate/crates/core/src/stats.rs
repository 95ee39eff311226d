//! Exponent and rate regression, maximal-deviation probability curves and
//! Monte Carlo norms of Birkhoff averages.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::maps::Map;
use crate::measure::{Start, StartSampler};
use crate::open_systems::SurvivalCurve;
use crate::real::Real;
use crate::rng::{stream, Domain, StreamRng};

/// Least-squares line `log v = exponent · log n + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub window: (f64, f64),
    pub r_squared: f64,
    pub n_points: usize,
}

/// Least-squares line `log v = -rate · n + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub rate: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub window: (f64, f64),
    pub r_squared: f64,
    pub n_points: usize,
}

struct Ols {
    slope: f64,
    intercept: f64,
    stderr: f64,
    r_squared: f64,
    n: usize,
}

fn ols(xs: &[f64], ys: &[f64]) -> Ols {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    Ols {
        slope,
        intercept,
        stderr: (sse / (n - 2.0) / sxx).sqrt(),
        r_squared,
        n: xs.len(),
    }
}

/// Points of `series` with `lo <= n <= hi`, log-transformed by `tx` on the
/// abscissa; values must be positive.
fn windowed(
    series: &[(f64, f64)],
    window: (f64, f64),
    log_x: bool,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(Error::InvalidParameter {
            name: "window",
            reason: format!("need lo < hi, got ({lo}, {hi})"),
        });
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(n, v) in series.iter().filter(|(n, _)| *n >= lo && *n <= hi) {
        if !(v > 0.0) {
            return Err(Error::NonPositiveValue { n, value: v });
        }
        xs.push(if log_x { n.ln() } else { n });
        ys.push(v.ln());
    }
    if xs.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "{} points in window [{lo}, {hi}], need at least 5",
            xs.len()
        )));
    }
    Ok((xs, ys))
}

/// Ordinary least squares of `log v` on `log n` over the window.
pub fn fit_power_law(series: &[(f64, f64)], window: (f64, f64)) -> Result<PowerLawFit> {
    let (xs, ys) = windowed(series, window, true)?;
    let f = ols(&xs, &ys);
    Ok(PowerLawFit {
        exponent: f.slope,
        intercept: f.intercept,
        stderr: f.stderr,
        window,
        r_squared: f.r_squared,
        n_points: f.n,
    })
}

/// Ordinary least squares of `log v` on `n` over the window; `rate = -slope`.
pub fn fit_exponential_rate(series: &[(f64, f64)], window: (f64, f64)) -> Result<RateFit> {
    let (xs, ys) = windowed(series, window, false)?;
    let f = ols(&xs, &ys);
    Ok(RateFit {
        rate: -f.slope,
        intercept: f.intercept,
        stderr: f.stderr,
        window,
        r_squared: f.r_squared,
        n_points: f.n,
    })
}

fn check_censoring(horizon: u64, window: (f64, f64)) -> Result<()> {
    if window.1 > horizon as f64 / 10.0 {
        Err(Error::InvalidParameter {
            name: "window",
            reason: format!(
                "fit window ends at {} but censoring at {horizon} limits fits to n <= {}",
                window.1,
                horizon as f64 / 10.0
            ),
        })
    } else {
        Ok(())
    }
}

/// Power-law fit of a survival curve, refusing windows past a tenth of the horizon.
pub fn fit_survival(curve: &SurvivalCurve, window: (f64, f64)) -> Result<PowerLawFit> {
    check_censoring(curve.horizon, window)?;
    fit_power_law(&curve.series(), window)
}

/// Exponential-rate fit of a survival curve, with the same censoring rule.
pub fn fit_survival_rate(curve: &SurvivalCurve, window: (f64, f64)) -> Result<RateFit> {
    check_censoring(curve.horizon, window)?;
    fit_exponential_rate(&curve.series(), window)
}

// ---------------------------------------------------------------------------
// Maximal deviations

/// `P(max_{n <= N <= N_max} |S_N / N - K| >= threshold)` on a grid of `n`,
/// where `S_N` counts base visits among the first `N` orbit points.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxDevCurve {
    pub n_grid: Vec<u64>,
    pub probabilities: Vec<f64>,
    /// Per-grid-point counts of deviating orbits.
    pub counts: Vec<u64>,
    pub k: f64,
    pub threshold: f64,
    pub n_max: u64,
    pub n_samples: u64,
}

impl MaxDevCurve {
    pub fn series(&self) -> Vec<(f64, f64)> {
        self.n_grid
            .iter()
            .zip(&self.probabilities)
            .map(|(&n, &p)| (n as f64, p))
            .collect()
    }
}

const LANES: usize = 8;

fn check_grid(n_grid: &[u64], n_max: u64) -> Result<()> {
    let ok = !n_grid.is_empty()
        && n_grid[0] >= 1
        && n_grid.windows(2).all(|w| w[0] < w[1])
        && *n_grid.last().expect("nonempty") <= n_max;
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "n_grid",
            reason: format!("must be strictly increasing inside [1, {n_max}]"),
        })
    }
}

/// Maximal-deviation curve over `n_samples` orbits of `map`.
///
/// For each orbit only the last `N <= N_max` with a deviation is needed:
/// the orbit deviates after `n` exactly when that `N` is at least `n`.
/// Orbits are advanced eight at a time in lockstep.  A `Beyond` start never
/// visits the base before `N_max`, so its `S_N` vanishes throughout.
#[allow(clippy::too_many_arguments)]
pub fn max_deviation_curve<T, M, B, S>(
    map: &M,
    in_base: B,
    starts: &S,
    k: f64,
    threshold: f64,
    n_grid: &[u64],
    n_max: u64,
    n_samples: u64,
    seed: u64,
) -> Result<MaxDevCurve>
where
    T: Real,
    M: Map<Point = T>,
    B: Fn(T) -> bool + Sync,
    S: StartSampler<T> + ?Sized,
{
    check_grid(n_grid, n_max)?;
    if let Some(h) = starts.horizon() {
        if h < n_max {
            return Err(Error::InvalidParameter {
                name: "n_max",
                reason: format!("the start sampler only certifies escapes up to {h}"),
            });
        }
    }
    let chunks = n_samples.div_ceil(LANES as u64);
    let lasts: Vec<u64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let first = c * LANES as u64;
            let lanes = (n_samples - first).min(LANES as u64) as usize;
            let mut xs = [T::zero(); LANES];
            let mut beyond = [true; LANES];
            for l in 0..lanes {
                let mut rng = stream(seed, Domain::Orbit, first + l as u64);
                if let Start::At(x) = starts.sample(&mut rng) {
                    xs[l] = x;
                    beyond[l] = false;
                }
            }
            let mut visits = [0.0f64; LANES];
            let mut last = [0u64; LANES];
            for n in 1..=n_max {
                let nf = n as f64;
                let (upper, lower) = ((k + threshold) * nf, (k - threshold) * nf);
                for l in 0..LANES {
                    visits[l] += if in_base(xs[l]) { 1.0 } else { 0.0 };
                    xs[l] = map.apply(xs[l]);
                    let s = visits[l];
                    if s >= upper || s <= lower {
                        last[l] = n;
                    }
                }
            }
            for l in 0..lanes {
                if beyond[l] {
                    last[l] = if k >= threshold { n_max } else { 0 };
                }
            }
            last.into_iter().take(lanes)
        })
        .collect();
    let counts: Vec<u64> = n_grid
        .iter()
        .map(|&n| lasts.iter().filter(|&&l| l >= n).count() as u64)
        .collect();
    Ok(MaxDevCurve {
        n_grid: n_grid.to_vec(),
        probabilities: counts
            .iter()
            .map(|&c| c as f64 / n_samples as f64)
            .collect(),
        counts,
        k,
        threshold,
        n_max,
        n_samples,
    })
}

// ---------------------------------------------------------------------------
// Birkhoff norms

/// Monte Carlo `L^{2p}` norms of `S_N φ / N` and of `sup_{N <= n <= N_max} |S_n φ / n|`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormCurve {
    pub n_grid: Vec<u64>,
    pub plain_norms: Vec<f64>,
    pub sup_norms: Vec<f64>,
    pub p: u32,
    pub mean: f64,
    pub n_max: u64,
    pub n_samples: u64,
}

impl NormCurve {
    /// `(N, ‖S_N φ / N‖_{2p}^{2p})`.
    pub fn plain_moments(&self) -> Vec<(f64, f64)> {
        self.moments(&self.plain_norms)
    }

    /// `(N, ‖sup |S_n φ / n|‖_{2p}^{2p})`.
    pub fn sup_moments(&self) -> Vec<(f64, f64)> {
        self.moments(&self.sup_norms)
    }

    fn moments(&self, norms: &[f64]) -> Vec<(f64, f64)> {
        self.n_grid
            .iter()
            .zip(norms)
            .map(|(&n, &v)| (n as f64, v.powi(2 * self.p as i32)))
            .collect()
    }
}

/// Birkhoff-norm curves from observation sequences.
///
/// `observe(rng)` yields `φ(x), φ(f x), ...` along one orbit drawn with
/// `rng`.  With `mean = None`, the mean of `φ` is estimated first from
/// `max(n_samples / 10, 1)` orbits on separate streams and subtracted.
#[allow(clippy::too_many_arguments)]
pub fn birkhoff_norm_curves_from<F, I>(
    observe: F,
    n_grid: &[u64],
    n_max: u64,
    p: u32,
    n_samples: u64,
    mean: Option<f64>,
    seed: u64,
) -> Result<NormCurve>
where
    F: Fn(&mut StreamRng) -> I + Sync,
    I: Iterator<Item = f64>,
{
    check_grid(n_grid, n_max)?;
    if p == 0 {
        return Err(Error::InvalidParameter {
            name: "p",
            reason: "must be a positive integer".into(),
        });
    }
    let mean = match mean {
        Some(m) => m,
        None => {
            let pilots = (n_samples / 10).max(1);
            let total: f64 = (0..pilots)
                .into_par_iter()
                .map(|i| {
                    let mut rng = stream(seed, Domain::Pilot, i);
                    observe(&mut rng).take(n_max as usize).sum::<f64>()
                })
                .sum();
            total / (pilots * n_max) as f64
        }
    };
    let g = n_grid.len();
    let two_p = 2 * p as i32;
    let (plain_sum, sup_sum) = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, Domain::Orbit, i);
            let mut values = vec![0.0f64; g];
            // Running maxima of |S_n / n| over [n_grid[j], n_grid[j + 1]).
            let mut segment = vec![0.0f64; g];
            let mut sum = 0.0;
            let mut slot: usize = 0;
            let mut obs = observe(&mut rng);
            for n in 1..=n_max {
                sum += obs.next().expect("infinite observation sequence") - mean;
                while slot + 1 < g && n >= n_grid[slot + 1] {
                    slot += 1;
                }
                if n < n_grid[0] {
                    continue;
                }
                let a = (sum / n as f64).abs();
                if n == n_grid[slot] {
                    values[slot] = a;
                }
                if a > segment[slot] {
                    segment[slot] = a;
                }
            }
            let mut sup = segment;
            for j in (0..g.saturating_sub(1)).rev() {
                sup[j] = sup[j].max(sup[j + 1]);
            }
            let plain: Vec<f64> = values.iter().map(|v| v.powi(two_p)).collect();
            let sup: Vec<f64> = sup.iter().map(|v| v.powi(two_p)).collect();
            (plain, sup)
        })
        .reduce(
            || (vec![0.0; g], vec![0.0; g]),
            |(mut a, mut b), (c, d)| {
                a.iter_mut().zip(c).for_each(|(x, y)| *x += y);
                b.iter_mut().zip(d).for_each(|(x, y)| *x += y);
                (a, b)
            },
        );
    let norm = |s: &f64| (s / n_samples as f64).powf(1.0 / two_p as f64);
    Ok(NormCurve {
        n_grid: n_grid.to_vec(),
        plain_norms: plain_sum.iter().map(norm).collect(),
        sup_norms: sup_sum.iter().map(norm).collect(),
        p,
        mean,
        n_max,
        n_samples,
    })
}

/// Birkhoff-norm curves for an observable along orbits of `map` from `starts`.
#[allow(clippy::too_many_arguments)]
pub fn birkhoff_norm_curves<T, M, Phi, S>(
    map: &M,
    phi: Phi,
    starts: &S,
    n_grid: &[u64],
    n_max: u64,
    p: u32,
    n_samples: u64,
    mean: Option<f64>,
    seed: u64,
) -> Result<NormCurve>
where
    T: Real,
    M: Map<Point = T>,
    Phi: Fn(T) -> f64 + Sync,
    S: StartSampler<T> + ?Sized,
{
    if starts.horizon().is_some() {
        return Err(Error::InvalidParameter {
            name: "starts",
            reason: "norm estimates need materialized starts".into(),
        });
    }
    birkhoff_norm_curves_from(
        |rng| {
            let x0 = match starts.sample(rng) {
                Start::At(x) => x,
                Start::Beyond => unreachable!("sampler without horizon returned Beyond"),
            };
            crate::measure::orbit(map, x0).map(&phi)
        },
        n_grid,
        n_max,
        p,
        n_samples,
        mean,
        seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid() -> Vec<f64> {
        (0..40).map(|i| 10f64.powf(1.0 + i as f64 / 13.0)).collect()
    }

    #[test]
    fn exact_power_laws() {
        let s: Vec<_> = grid().into_iter().map(|n| (n, n.powf(-2.0))).collect();
        let f = fit_power_law(&s, (10.0, 1e4)).unwrap();
        assert_abs_diff_eq!(f.exponent, -2.0, epsilon = 1e-10);
        let s: Vec<_> = grid()
            .into_iter()
            .map(|n| (n, 7.0 * n.powf(-0.5)))
            .collect();
        let f = fit_power_law(&s, (10.0, 1e4)).unwrap();
        assert_abs_diff_eq!(f.exponent, -0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(f.intercept, 7f64.ln(), epsilon = 1e-10);
        assert_abs_diff_eq!(f.r_squared, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn exact_rates() {
        let s: Vec<_> = (1..60)
            .map(|n| (n as f64, (-0.3 * n as f64).exp()))
            .collect();
        let f = fit_exponential_rate(&s, (1.0, 50.0)).unwrap();
        assert_abs_diff_eq!(f.rate, 0.3, epsilon = 1e-10);
        let s: Vec<_> = (1..60).map(|n| (n as f64, 0.25)).collect();
        let f = fit_exponential_rate(&s, (1.0, 50.0)).unwrap();
        assert_abs_diff_eq!(f.rate, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn fit_errors() {
        let s: Vec<_> = (1..4).map(|n| (n as f64, 1.0)).collect();
        assert!(matches!(
            fit_power_law(&s, (1.0, 3.0)),
            Err(Error::InsufficientData(_))
        ));
        let s: Vec<_> = (1..10)
            .map(|n| (n as f64, if n == 5 { 0.0 } else { 1.0 }))
            .collect();
        assert!(matches!(
            fit_power_law(&s, (1.0, 9.0)),
            Err(Error::NonPositiveValue { .. })
        ));
    }

    #[test]
    fn rescaling_only_moves_intercept() {
        let s: Vec<_> = grid()
            .into_iter()
            .map(|n| (n, n.powf(-1.3) * (1.0 + 0.1 * n.sin())))
            .collect();
        let t: Vec<_> = s.iter().map(|&(n, v)| (n, 42.0 * v)).collect();
        let a = fit_power_law(&s, (10.0, 1e4)).unwrap();
        let b = fit_power_law(&t, (10.0, 1e4)).unwrap();
        assert_abs_diff_eq!(a.exponent, b.exponent, epsilon = 1e-12);
        assert_abs_diff_eq!(b.intercept - a.intercept, 42f64.ln(), epsilon = 1e-12);
    }

    #[test]
    fn zero_observable_gives_zero_norms() {
        let c =
            birkhoff_norm_curves_from(|_| std::iter::repeat(0.0), &[10, 100], 1000, 1, 50, None, 1)
                .unwrap();
        assert!(c.plain_norms.iter().chain(&c.sup_norms).all(|&v| v == 0.0));
    }
}
