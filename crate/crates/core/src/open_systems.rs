//! Holes, hitting and escape times, Monte Carlo survival curves, induced
//! hitting times and open Ulam operators.

use std::fmt::Write as _;

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::maps::{Intermittent, Map, Point2};
use crate::measure::{GridDensity, SparseMatrix, Start, StartSampler, UlamOperator};
use crate::real::Real;
use crate::rng::{stream, Domain, StreamRng};
use crate::text::{csv_rows, parse_field, sig17};
use crate::tower::TowerModel;

/// Outcome of waiting for an event up to a finite horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Passage {
    At(u64),
    Censored,
}

impl Passage {
    pub fn time(self) -> Option<u64> {
        match self {
            Passage::At(n) => Some(n),
            Passage::Censored => None,
        }
    }
}

/// Membership test for a hole in the phase space `P`.
pub trait Hole<P>: Sync {
    fn contains(&self, p: &P) -> bool;
}

/// A finite union of disjoint open intervals inside `(0, 1]`, bounded away
/// from the neutral fixed point.
#[derive(Debug, Clone, PartialEq)]
pub struct Hole1D<T> {
    intervals: Vec<(T, T)>,
}

impl<T: Real> Hole1D<T> {
    pub fn new(mut intervals: Vec<(T, T)>) -> Result<Self> {
        if intervals.is_empty() {
            return Err(Error::InvalidHole(
                "at least one interval is required".into(),
            ));
        }
        for &(a, b) in &intervals {
            if !(a < b) {
                return Err(Error::InvalidHole(format!("({a}, {b}) has empty interior")));
            }
            if !(a > T::zero()) || !(b <= T::one()) {
                return Err(Error::InvalidHole(format!(
                    "({a}, {b}) must lie in (0, 1] with positive left end"
                )));
            }
        }
        intervals.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite endpoints"));
        for w in intervals.windows(2) {
            if w[1].0 < w[0].1 {
                return Err(Error::InvalidHole(format!(
                    "({}, {}) overlaps ({}, {})",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        Ok(Self { intervals })
    }

    pub fn interval(a: T, b: T) -> Result<Self> {
        Self::new(vec![(a, b)])
    }

    pub fn intervals(&self) -> &[(T, T)] {
        &self.intervals
    }

    pub fn infimum(&self) -> T {
        self.intervals[0].0
    }

    pub fn supremum(&self) -> T {
        self.intervals[self.intervals.len() - 1].1
    }

    /// Open-interval membership: endpoints are outside.
    #[inline]
    pub fn contains_point(&self, x: T) -> bool {
        self.intervals.iter().any(|&(a, b)| a < x && x < b)
    }

    /// Whether `[lo, hi]` fits in one component (endpoints may touch).
    pub fn covers(&self, lo: T, hi: T) -> bool {
        self.intervals.iter().any(|&(a, b)| a <= lo && hi <= b)
    }

    /// Whether `other` is contained in `self`.
    pub fn includes(&self, other: &Self) -> bool {
        other.intervals.iter().all(|&(a, b)| self.covers(a, b))
    }
}

impl<T: Real> Hole<T> for Hole1D<T> {
    #[inline]
    fn contains(&self, p: &T) -> bool {
        self.contains_point(*p)
    }
}

/// A cylinder `I × D` over a one-dimensional hole, where `D` is an open
/// disk in the unit disk or the whole unit disk.
#[derive(Debug, Clone, PartialEq)]
pub struct HoleCylinder<T> {
    pub x_hole: Hole1D<T>,
    pub disk: Option<(Complex<T>, T)>,
}

impl<T: Real> HoleCylinder<T> {
    pub fn new(x_hole: Hole1D<T>, disk: Option<(Complex<T>, T)>) -> Result<Self> {
        if let Some((c, r)) = disk {
            if !(r > T::zero()) || !(c.norm() + r <= T::one()) {
                return Err(Error::InvalidHole(format!(
                    "disk centred at {c} with radius {r} must be a nonempty subset of the unit disk"
                )));
            }
        }
        Ok(Self { x_hole, disk })
    }
}

impl<T: Real> Hole<Point2<T>> for HoleCylinder<T> {
    #[inline]
    fn contains(&self, p: &Point2<T>) -> bool {
        self.x_hole.contains_point(p.x)
            && self.disk.is_none_or(|(c, r)| (p.z - c).norm_sqr() < r * r)
    }
}

/// `τ_H(x0) = min{n in [1, n_max] : f^n(x0) in H}`.
pub fn hitting_time<M: Map, H: Hole<M::Point> + ?Sized>(
    map: &M,
    hole: &H,
    x0: M::Point,
    n_max: u64,
) -> Passage {
    let mut x = x0;
    for n in 1..=n_max {
        x = map.apply(x);
        if hole.contains(&x) {
            return Passage::At(n);
        }
    }
    Passage::Censored
}

/// `e_H(x0) = min{n in [0, n_max] : f^n(x0) in H}`.
pub fn escape_time<M: Map, H: Hole<M::Point> + ?Sized>(
    map: &M,
    hole: &H,
    x0: M::Point,
    n_max: u64,
) -> Passage {
    if hole.contains(&x0) {
        Passage::At(0)
    } else {
        hitting_time(map, hole, x0, n_max)
    }
}

/// Hitting time of a hole inside the tower base, using symbolic return
/// times to stop as soon as the next base visit falls past `n_max`.
///
/// Agrees with [`hitting_time`] whenever `hole` lies in the base.
pub fn tower_hitting_time<T: Real, M: Intermittent<T>>(
    tower: &TowerModel<T, M>,
    hole: &Hole1D<T>,
    x0: T,
    n_max: u64,
) -> Passage {
    let map = tower.map();
    let mut x = x0;
    let mut t = 0u64;
    loop {
        if tower.in_base(x) {
            if t > 0 && hole.contains_point(x) {
                return Passage::At(t);
            }
            match tower.return_time_unchecked(x) {
                Ok(r) if t + r <= n_max => {}
                _ => return Passage::Censored,
            }
        }
        if t == n_max {
            return Passage::Censored;
        }
        x = map.apply(x);
        t += 1;
    }
}

/// Powers of 1.1 rounded to integers and deduplicated, capped by and
/// always ending with `n_max`.
pub fn geometric_grid(n_max: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut v = 1.0f64;
    loop {
        let n = v.round() as u64;
        if n >= n_max {
            break;
        }
        if out.last() != Some(&n) {
            out.push(n);
        }
        v *= 1.1;
    }
    out.push(n_max.max(1));
    out
}

/// Empirical `P(τ > n)` on a time grid ending at the horizon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurvivalCurve {
    pub horizon: u64,
    pub times: Vec<u64>,
    /// Number of samples with `τ > times[i]`.
    pub survivors: Vec<u64>,
    pub total: u64,
    /// Samples with no event up to the horizon.
    pub censored: u64,
}

impl SurvivalCurve {
    /// Aggregates passages on the geometric grid up to `n_max`.
    pub fn from_par_passages<I>(passages: I, n_max: u64) -> Self
    where
        I: ParallelIterator<Item = Passage>,
    {
        Self::from_par_passages_on(geometric_grid(n_max), passages)
    }

    /// Aggregates passages on an explicit increasing grid whose last entry
    /// is the horizon.
    pub fn from_par_passages_on<I>(times: Vec<u64>, passages: I) -> Self
    where
        I: ParallelIterator<Item = Passage>,
    {
        let horizon = *times.last().expect("nonempty grid");
        let slots = times.len() + 1;
        let tally = |mut acc: Vec<u64>, p: Passage| {
            let slot = match p {
                // First grid time >= τ: the sample is dead from there on.
                Passage::At(n) if n <= horizon => times.partition_point(|&g| g < n),
                _ => times.len(),
            };
            acc[slot] += 1;
            acc
        };
        let dead = passages.fold(|| vec![0u64; slots], tally).reduce(
            || vec![0u64; slots],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
        let total: u64 = dead.iter().sum();
        let mut alive = total;
        let survivors = dead[..times.len()]
            .iter()
            .map(|d| {
                alive -= d;
                alive
            })
            .collect();
        Self {
            horizon,
            times,
            survivors,
            total,
            censored: dead[slots - 1],
        }
    }

    pub fn p_hat(&self, i: usize) -> f64 {
        self.survivors[i] as f64 / self.total as f64
    }

    /// `(n, p̂(n))` pairs.
    pub fn series(&self) -> Vec<(f64, f64)> {
        (0..self.times.len())
            .map(|i| (self.times[i] as f64, self.p_hat(i)))
            .collect()
    }

    /// Survival at an arbitrary time, read off the grid (must be a grid time).
    pub fn at(&self, n: u64) -> Option<f64> {
        self.times
            .iter()
            .position(|&t| t == n)
            .map(|i| self.p_hat(i))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,survivors,total,p_hat\n");
        for i in 0..self.times.len() {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                self.times[i],
                self.survivors[i],
                self.total,
                sig17(self.p_hat(i))
            );
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let rows = csv_rows(text, "n,survivors,total,p_hat")?;
        if rows.is_empty() {
            return Err(Error::InsufficientData("survival CSV has no rows".into()));
        }
        let mut times = Vec::with_capacity(rows.len());
        let mut survivors = Vec::with_capacity(rows.len());
        let mut total = 0;
        for r in &rows {
            times.push(parse_field(r[0], "n")?);
            survivors.push(parse_field(r[1], "survivors")?);
            total = parse_field(r[2], "total")?;
        }
        let curve = Self {
            horizon: *times.last().expect("nonempty"),
            censored: *survivors.last().expect("nonempty"),
            times,
            survivors,
            total,
        };
        curve.check()?;
        Ok(curve)
    }

    /// Monotonicity and censoring accounting.
    pub fn check(&self) -> Result<()> {
        let ok = self.times.windows(2).all(|w| w[0] < w[1])
            && self.survivors.windows(2).all(|w| w[0] >= w[1])
            && self.survivors.iter().all(|&s| s <= self.total)
            && self.survivors.last() == Some(&self.censored)
            && self.times.last() == Some(&self.horizon);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter {
                name: "survival curve",
                reason: "grid, monotonicity or censoring accounting is inconsistent".into(),
            })
        }
    }
}

fn check_sampler_horizon<P, S: StartSampler<P> + ?Sized>(sampler: &S, n_max: u64) -> Result<()> {
    match sampler.horizon() {
        Some(h) if h < n_max => Err(Error::InvalidParameter {
            name: "n_max",
            reason: format!("the start sampler only certifies escapes up to {h}"),
        }),
        _ => Ok(()),
    }
}

/// Monte Carlo survival curve from `n_samples` independent starts.
///
/// Sample `i` draws from stream `(seed, i)`, so the curve is identical for
/// any number of worker threads.
pub fn survival_curve<M, H, S>(
    map: &M,
    hole: &H,
    starts: &S,
    n_samples: u64,
    n_max: u64,
    seed: u64,
) -> Result<SurvivalCurve>
where
    M: Map,
    H: Hole<M::Point> + ?Sized,
    S: StartSampler<M::Point> + ?Sized,
{
    check_sampler_horizon(starts, n_max)?;
    let passages = (0..n_samples).into_par_iter().map(|i| {
        let mut rng = stream(seed, Domain::Trajectory, i);
        match starts.sample(&mut rng) {
            Start::At(x) => hitting_time(map, hole, x, n_max),
            Start::Beyond => Passage::Censored,
        }
    });
    Ok(SurvivalCurve::from_par_passages(passages, n_max))
}

/// [`survival_curve`] for holes inside a tower base, with early censoring
/// from symbolic return times.
pub fn tower_survival_curve<T, M, S>(
    tower: &TowerModel<T, M>,
    hole: &Hole1D<T>,
    starts: &S,
    n_samples: u64,
    n_max: u64,
    seed: u64,
) -> Result<SurvivalCurve>
where
    T: Real,
    M: Intermittent<T> + Sync,
    S: StartSampler<T> + ?Sized,
{
    check_sampler_horizon(starts, n_max)?;
    if !(hole.infimum() >= tower.base_low()) {
        return Err(Error::InvalidHole(
            "the hole must lie inside the tower base".into(),
        ));
    }
    if (tower.sequence().max_index() - tower.base_index()) as u64 + 1 < n_max {
        return Err(Error::SequenceExhausted {
            len: tower.sequence().len(),
        });
    }
    let passages = (0..n_samples).into_par_iter().map(|i| {
        let mut rng = stream(seed, Domain::Trajectory, i);
        match starts.sample(&mut rng) {
            Start::At(x) => tower_hitting_time(tower, hole, x, n_max),
            Start::Beyond => Passage::Censored,
        }
    });
    Ok(SurvivalCurve::from_par_passages(passages, n_max))
}

/// Number of induced steps until the induced orbit of `x0` enters `hole`.
pub fn induced_hitting_time<T: Real, M: Intermittent<T>>(
    tower: &TowerModel<T, M>,
    hole: &Hole1D<T>,
    x0: T,
    j_max: u64,
) -> Result<Passage> {
    if !tower.in_base(x0) {
        return Err(Error::Domain {
            what: "x0",
            value: x0.as_f64(),
            domain: "the tower base (s_m, 1]",
        });
    }
    let mut x = x0;
    for j in 1..=j_max {
        x = tower.induced_step(x)?.0;
        if hole.contains_point(x) {
            return Ok(Passage::At(j));
        }
    }
    Ok(Passage::Censored)
}

/// Survival of the induced hitting time for starts drawn from `density`
/// on the base outside the hole, recorded at every `j` in `1..=j_max`.
pub fn induced_survival<M: Intermittent<f64> + Sync>(
    tower: &TowerModel<f64, M>,
    hole: &Hole1D<f64>,
    density: &GridDensity,
    n_samples: u64,
    j_max: u64,
    seed: u64,
) -> Result<SurvivalCurve> {
    let draw = |rng: &mut StreamRng| -> Result<f64> {
        for _ in 0..10_000 {
            let x = density.inverse_cdf(rand::Rng::random(rng));
            if tower.in_base(x) && !hole.contains_point(x) {
                return Ok(x);
            }
        }
        Err(Error::InvalidHole(
            "the hole swallows the whole base".into(),
        ))
    };
    let passages = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, Domain::Trajectory, i);
            let x = draw(&mut rng)?;
            induced_hitting_time(tower, hole, x, j_max)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SurvivalCurve::from_par_passages_on(
        (1..=j_max).collect(),
        passages.into_par_iter(),
    ))
}

/// An Ulam operator with the cells inside a hole removed.
#[derive(Debug, Clone, PartialEq)]
pub struct OpenUlamOperator {
    pub base: UlamOperator,
    pub hole_cells: Vec<usize>,
    pub matrix: SparseMatrix,
}

impl OpenUlamOperator {
    /// The closed operator viewed as an open one with no hole.
    pub fn closed(op: UlamOperator) -> Self {
        Self {
            matrix: op.matrix.clone(),
            base: op,
            hole_cells: Vec::new(),
        }
    }
}

/// Removes every cell lying inside a component of the hole (cell endpoints
/// may touch the hole's endpoints); partially covered cells stay.
pub fn open_ulam(op: &UlamOperator, hole: &Hole1D<f64>) -> Result<OpenUlamOperator> {
    let hole_cells: Vec<usize> = (0..op.grid.n)
        .filter(|&i| {
            let (a, b) = op.grid.cell_bounds(i);
            hole.covers(a, b)
        })
        .collect();
    if hole_cells.is_empty() {
        return Err(Error::GridTooCoarse);
    }
    Ok(OpenUlamOperator {
        matrix: op.matrix.without(&hole_cells),
        base: op.clone(),
        hole_cells,
    })
}

/// Leading eigenvalue and left eigenvector of a substochastic operator by
/// power iteration with L1 renormalization.
pub fn leading_eigenvalue(
    op: &OpenUlamOperator,
    tol: f64,
    iter_max: usize,
) -> Result<(f64, GridDensity)> {
    let n = op.matrix.dim();
    let grid = op.base.grid;
    let mut v = vec![1.0 / n as f64; n];
    let mut lambda = f64::NAN;
    for _ in 0..iter_max {
        let next = op.matrix.left_mul(&v);
        let mass: f64 = next.iter().sum();
        if !(mass > 1e-300) {
            return Ok((0.0, GridDensity::new(grid, v)?));
        }
        let previous = lambda;
        lambda = mass;
        v = next.into_iter().map(|x| x / mass).collect();
        if (lambda - previous).abs() < tol {
            return Ok((lambda, GridDensity::new(grid, v)?));
        }
    }
    Err(Error::NonConvergence {
        iterations: iter_max as u64,
    })
}

/// Starts for the solenoid: `x` from a one-dimensional sampler, `z` uniform
/// in the unit disk, followed by `burn_in` steps of the skew product so
/// that `z` settles onto the attractor.
#[derive(Debug, Clone)]
pub struct SolenoidStarts<'a, S> {
    pub map: crate::maps::Solenoid<f64>,
    pub x_starts: &'a S,
    pub burn_in: u64,
}

impl<S: StartSampler<f64>> StartSampler<Point2<f64>> for SolenoidStarts<'_, S> {
    fn sample(&self, rng: &mut StreamRng) -> Start<Point2<f64>> {
        let x = match self.x_starts.sample(rng) {
            Start::At(x) => x,
            Start::Beyond => return Start::Beyond,
        };
        let (r, phi): (f64, f64) = (rand::Rng::random(rng), rand::Rng::random(rng));
        let mut p = Point2 {
            x,
            z: Complex::from_polar(r.sqrt(), std::f64::consts::TAU * phi),
        };
        for _ in 0..self.burn_in {
            p = self.map.apply(p);
        }
        Start::At(p)
    }

    fn horizon(&self) -> Option<u64> {
        self.x_starts
            .horizon()
            .map(|h| h.saturating_sub(self.burn_in))
    }
}
