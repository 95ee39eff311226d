//! Invariant-measure estimation: Ulam discretizations, stationary grid
//! densities, base-visit frequencies, exact return-time tails and samplers
//! of (approximately) stationary initial conditions.
//!
//! Grid objects are double precision only; the maps feeding them may be
//! evaluated at any [`Real`] precision.

use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::maps::{Intermittent, Map};
use crate::real::Real;
use crate::rng::{stream, Domain, StreamRng};
use crate::text::{csv_rows, parse_field, sig17};
use crate::tower::TowerModel;

// ---------------------------------------------------------------------------
// Sparse matrices and Ulam operators

/// Compressed-row sparse matrix acting on row vectors from the right.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from per-row `(column, value)` lists.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            for (c, v) in row {
                assert!(c < n, "column {c} out of range");
                if v != 0.0 {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()]
            .iter()
            .copied()
            .zip(self.vals[r].iter().copied())
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        self.row(i).map(|(_, v)| v).sum()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    /// `v P`.
    pub fn left_mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, &vi) in v.iter().enumerate() {
            if vi != 0.0 {
                for (j, p) in self.row(i) {
                    out[j] += vi * p;
                }
            }
        }
        out
    }

    /// Copy with the listed rows and columns removed (set to zero).
    pub fn without(&self, cells: &[usize]) -> Self {
        let mut drop = vec![false; self.n];
        for &c in cells {
            drop[c] = true;
        }
        let rows = (0..self.n)
            .map(|i| {
                if drop[i] {
                    Vec::new()
                } else {
                    self.row(i).filter(|&(j, _)| !drop[j]).collect()
                }
            })
            .collect();
        Self::from_rows(rows)
    }
}

/// An equal-width grid of `n` cells over `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo < hi) || n < 2 {
            return Err(Error::InvalidParameter {
                name: "grid",
                reason: format!("need lo < hi and at least two cells, got ({lo}, {hi}) with {n}"),
            });
        }
        Ok(Self { lo, hi, n })
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.n as f64
    }

    pub fn cell_bounds(&self, i: usize) -> (f64, f64) {
        let w = self.width();
        let a = self.lo + w * i as f64;
        let b = if i + 1 == self.n {
            self.hi
        } else {
            self.lo + w * (i + 1) as f64
        };
        (a, b)
    }

    /// Cell containing `x`, clamping the endpoints into the first and last cell.
    pub fn cell_of(&self, x: f64) -> usize {
        let t = ((x - self.lo) / self.width()).floor();
        if t <= 0.0 {
            0
        } else {
            (t as usize).min(self.n - 1)
        }
    }
}

/// Row-stochastic transition matrix of a map between the cells of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct UlamOperator {
    pub grid: Grid,
    pub samples_per_cell: usize,
    pub matrix: SparseMatrix,
}

pub const DEFAULT_CELLS: usize = 1024;
pub const DEFAULT_SAMPLES_PER_CELL: usize = 100;

/// Ulam matrix of `f` on `[lo, hi]`, with `samples_per_cell` jittered
/// stratified points in every cell.
pub fn ulam_matrix<F>(
    f: F,
    lo: f64,
    hi: f64,
    n_cells: usize,
    samples_per_cell: usize,
    seed: u64,
) -> Result<UlamOperator>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let grid = Grid::new(lo, hi, n_cells)?;
    if samples_per_cell == 0 {
        return Err(Error::InvalidParameter {
            name: "samples_per_cell",
            reason: "must be positive".into(),
        });
    }
    let rows = (0..n_cells)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(seed, Domain::Ulam, i as u64);
            let (a, b) = grid.cell_bounds(i);
            let mut counts: Vec<(usize, f64)> = Vec::new();
            for j in 0..samples_per_cell {
                let u: f64 = rng.random();
                // Keep samples strictly inside the cell.
                let x = (a + (b - a) * (j as f64 + u) / samples_per_cell as f64)
                    .max(a)
                    .min(b);
                let x = if x == a {
                    a + (b - a) * 0.5 / samples_per_cell as f64
                } else {
                    x
                };
                let y = f(x)?;
                if !(y >= lo && y <= hi) {
                    return Err(Error::ImageOutside {
                        cell: i,
                        value: y,
                        lo,
                        hi,
                    });
                }
                let c = grid.cell_of(y);
                match counts.iter_mut().find(|(k, _)| *k == c) {
                    Some(e) => e.1 += 1.0,
                    None => counts.push((c, 1.0)),
                }
            }
            let norm = samples_per_cell as f64;
            Ok(counts.into_iter().map(|(c, k)| (c, k / norm)).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(UlamOperator {
        grid,
        samples_per_cell,
        matrix: SparseMatrix::from_rows(rows),
    })
}

/// Ulam matrix of a plain map on `[lo, hi]`.
pub fn ulam_matrix_of<M: Map<Point = f64>>(
    map: &M,
    lo: f64,
    hi: f64,
    n_cells: usize,
    samples_per_cell: usize,
    seed: u64,
) -> Result<UlamOperator> {
    ulam_matrix(
        |x| Ok(map.apply(x)),
        lo,
        hi,
        n_cells,
        samples_per_cell,
        seed,
    )
}

/// Ulam matrix of the induced (first-return) map on the tower base.
pub fn induced_ulam<M: Intermittent<f64> + Sync>(
    tower: &TowerModel<f64, M>,
    n_cells: usize,
    samples_per_cell: usize,
    seed: u64,
) -> Result<UlamOperator> {
    ulam_matrix(
        |x| tower.induced_step(x).map(|(y, _)| y),
        tower.base_low(),
        1.0,
        n_cells,
        samples_per_cell,
        seed,
    )
}

impl UlamOperator {
    /// `row,col,value` triplets.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col,value\n");
        for i in 0..self.matrix.dim() {
            for (j, v) in self.matrix.row(i) {
                let _ = writeln!(out, "{i},{j},{}", sig17(v));
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Densities

/// A probability measure with constant density on each grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    pub grid: Grid,
    /// Cell masses, summing to one.
    pub weights: Vec<f64>,
    cumulative: Vec<f64>,
}

impl GridDensity {
    pub fn new(grid: Grid, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.n || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidParameter {
                name: "weights",
                reason: "need one nonnegative weight per cell".into(),
            });
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidParameter {
                name: "weights",
                reason: "total mass must be positive".into(),
            });
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut cumulative = Vec::with_capacity(grid.n + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            cumulative.push(acc);
        }
        Ok(Self {
            grid,
            weights,
            cumulative,
        })
    }

    pub fn uniform(grid: Grid) -> Self {
        Self::new(grid, vec![1.0; grid.n]).expect("uniform weights are valid")
    }

    /// Density value (mass per unit length) at `x`.
    pub fn density_at(&self, x: f64) -> f64 {
        self.weights[self.grid.cell_of(x)] / self.grid.width()
    }

    /// Distribution function.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.grid.lo {
            return 0.0;
        }
        if x >= self.grid.hi {
            return 1.0;
        }
        let i = self.grid.cell_of(x);
        let (a, b) = self.grid.cell_bounds(i);
        self.cumulative[i] + self.weights[i] * ((x - a) / (b - a)).clamp(0.0, 1.0)
    }

    /// Mass of the interval `(a, b)`.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        let i = self.grid.cell_of(a);
        let j = self.grid.cell_of(b);
        if i == j && a > self.grid.lo && b < self.grid.hi {
            // One cell: avoid cancellation between two nearly equal CDF values.
            return self.density_at(a) * (b - a).max(0.0);
        }
        (self.cdf(b) - self.cdf(a)).max(0.0)
    }

    pub fn inverse_cdf(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let k = self.cumulative.partition_point(|&c| c <= u);
        let i = k.saturating_sub(1).min(self.grid.n - 1);
        let (a, b) = self.grid.cell_bounds(i);
        let w = self.weights[i];
        if w <= 0.0 {
            return a;
        }
        a + (b - a) * ((u - self.cumulative[i]) / w).clamp(0.0, 1.0)
    }

    /// `cell,lo,hi,weight` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("cell,lo,hi,weight\n");
        for (i, w) in self.weights.iter().enumerate() {
            let (a, b) = self.grid.cell_bounds(i);
            let _ = writeln!(out, "{i},{},{},{}", sig17(a), sig17(b), sig17(*w));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let rows = csv_rows(text, "cell,lo,hi,weight")?;
        if rows.len() < 2 {
            return Err(Error::InsufficientData(
                "a density needs at least two cells".into(),
            ));
        }
        let lo: f64 = parse_field(rows[0][1], "lo")?;
        let hi: f64 = parse_field(rows[rows.len() - 1][2], "hi")?;
        let weights = rows
            .iter()
            .map(|r| parse_field(r[3], "weight"))
            .collect::<Result<Vec<f64>>>()?;
        Self::new(Grid::new(lo, hi, rows.len())?, weights)
    }
}

/// Left fixed vector of a row-stochastic operator by power iteration from
/// the uniform density, stopping when the L1 change drops below `tol`.
pub fn stationary_density(op: &UlamOperator, tol: f64, iter_max: usize) -> Result<GridDensity> {
    let n = op.grid.n;
    let mut v = vec![1.0 / n as f64; n];
    for _ in 0..iter_max {
        let mut next = op.matrix.left_mul(&v);
        let total: f64 = next.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InvalidParameter {
                name: "operator",
                reason: "mass vanished; the operator is not stochastic".into(),
            });
        }
        next.iter_mut().for_each(|x| *x /= total);
        let change: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        v = next;
        if change < tol {
            return GridDensity::new(op.grid, v);
        }
    }
    Err(Error::NonConvergence {
        iterations: iter_max as u64,
    })
}

// ---------------------------------------------------------------------------
// Orbits and base mass

/// Iterates of a map starting from `x0` (the first item is `x0` itself).
pub fn orbit<M: Map>(map: &M, x0: M::Point) -> impl Iterator<Item = M::Point> + '_ {
    std::iter::successors(Some(x0), move |&x| Some(map.apply(x)))
}

/// Orbits of the doubling map kept exact by carrying a 64-bit binary
/// expansion and appending one fresh random bit per step.
#[derive(Debug, Clone)]
pub struct DoublingOrbit {
    bits: u64,
    rng: StreamRng,
}

impl DoublingOrbit {
    pub fn new(mut rng: StreamRng) -> Self {
        Self {
            bits: rng.random(),
            rng,
        }
    }

    /// Current point in `[0, 1)`.
    pub fn point(&self) -> f64 {
        (self.bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn bits(&self) -> u64 {
        self.bits
    }

    pub fn advance(&mut self) {
        self.bits = (self.bits << 1) | (self.rng.random::<u64>() >> 63);
    }
}

impl Iterator for DoublingOrbit {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let x = self.point();
        self.advance();
        Some(x)
    }
}

/// Estimated invariant mass of a base set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaseMass {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: u64,
}

pub const BATCH_LENGTH: usize = 1000;

/// Frequency of visits to `in_base` along `n_orbit` points of `orbit` after
/// discarding `burn_in`, with a batch-means standard error.
pub fn base_mass<P, I, F>(orbit: I, in_base: F, n_orbit: usize, burn_in: usize) -> Result<BaseMass>
where
    I: IntoIterator<Item = P>,
    F: Fn(&P) -> bool,
{
    if n_orbit < 10_000 {
        return Err(Error::InvalidParameter {
            name: "n_orbit",
            reason: format!("need at least 10^4 orbit points, got {n_orbit}"),
        });
    }
    let mut batches = Vec::with_capacity(n_orbit / BATCH_LENGTH);
    let mut hits = 0u64;
    let mut in_batch = 0usize;
    let mut batch_hits = 0u64;
    for p in orbit.into_iter().skip(burn_in).take(n_orbit) {
        if in_base(&p) {
            hits += 1;
            batch_hits += 1;
        }
        in_batch += 1;
        if in_batch == BATCH_LENGTH {
            batches.push(batch_hits as f64 / BATCH_LENGTH as f64);
            in_batch = 0;
            batch_hits = 0;
        }
    }
    let value = hits as f64 / n_orbit as f64;
    let b = batches.len() as f64;
    let mean = batches.iter().sum::<f64>() / b;
    let var = batches.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (b - 1.0);
    Ok(BaseMass {
        value,
        stderr: (var / b).sqrt(),
        n_samples: n_orbit as u64,
    })
}

// ---------------------------------------------------------------------------
// Return-time tails

/// Lebesgue measure of `{x in base : R(x) > n}` on a list of times, and the
/// tail sums `Σ_{i>n}` of the same quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnTail {
    pub n: Vec<u64>,
    pub tail: Vec<f64>,
    /// `Σ_{i>n} tail(i)`, including the extrapolated remainder.
    pub tail_sum: Vec<f64>,
    /// Contribution of indices beyond the stored sequence, extrapolated
    /// from a power law fitted over the last decade of exact values.
    pub remainder: f64,
}

/// Exact return-time tails from the preimage sequence.
///
/// For `n >= 1`, `R > n` exactly on the reinjecting points sent into
/// `(0, s_{m+n-1}]`, a set of length `c · s_{m+n-1}` where `c` is the
/// reinjection contraction; `n = 0` gives the whole base.
pub fn return_tail<T: Real, M: Intermittent<T>>(
    tower: &TowerModel<T, M>,
    n_points: &[u64],
) -> Result<ReturnTail> {
    let seq = tower.sequence();
    let m = tower.base_index();
    let n_avail = (seq.max_index() + 1 - m) as u64;
    let c = tower.map().reinjection_contraction().as_f64();
    let exact = |n: u64| -> f64 {
        if n == 0 {
            tower.base_length().as_f64()
        } else {
            c * seq.get(m + n as usize - 1).as_f64()
        }
    };
    if let Some(&big) = n_points.iter().max() {
        if big >= n_avail {
            return Err(Error::SequenceExhausted { len: seq.len() });
        }
    }
    if n_avail < 100 {
        return Err(Error::SequenceExhausted { len: seq.len() });
    }

    // Power law through the last decade, used for the remainder.
    let (i1, i2) = (n_avail / 10, n_avail);
    let slope = (exact(i2).ln() - exact(i1).ln()) / ((i2 as f64).ln() - (i1 as f64).ln());
    let remainder = if slope < -1.0 {
        let amp = exact(i2) / (i2 as f64).powf(slope);
        amp * (i2 as f64 + 0.5).powf(slope + 1.0) / (-slope - 1.0)
    } else {
        f64::INFINITY
    };

    // Suffix sums over the exact range (n_avail exclusive).
    let mut suffix = vec![0.0; n_avail as usize + 1];
    for i in (1..n_avail as usize).rev() {
        suffix[i] = suffix[i + 1] + exact(i as u64);
    }
    let tail = n_points.iter().map(|&n| exact(n)).collect();
    let tail_sum = n_points
        .iter()
        .map(|&n| suffix[n as usize + 1] + remainder)
        .collect();
    Ok(ReturnTail {
        n: n_points.to_vec(),
        tail,
        tail_sum,
        remainder,
    })
}

// ---------------------------------------------------------------------------
// Start samplers

/// A sampled initial condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Start<P> {
    At(P),
    /// The sampled orbit provably avoids the base (and so every hole inside
    /// it) up to the sampler's horizon; the point was not materialized.
    Beyond,
}

/// Source of independent initial conditions.
pub trait StartSampler<P>: Sync {
    fn sample(&self, rng: &mut StreamRng) -> Start<P>;

    /// Time up to which a [`Start::Beyond`] is guaranteed to avoid the base;
    /// `None` if the sampler never answers `Beyond`.
    fn horizon(&self) -> Option<u64> {
        None
    }
}

/// Draws a Lebesgue-uniform start and applies `burn_in` steps of `map`.
pub fn sample_invariant<T: Real, M: Map<Point = T>>(
    map: &M,
    burn_in: u64,
    rng: &mut StreamRng,
) -> T {
    let mut x = T::unit(rng);
    for _ in 0..burn_in {
        x = map.apply(x);
    }
    x
}

/// Lebesgue starts pushed forward by a fixed burn-in.
#[derive(Debug, Clone)]
pub struct LebesgueBurnIn<M> {
    pub map: M,
    pub burn_in: u64,
}

impl<T: Real, M: Map<Point = T>> StartSampler<T> for LebesgueBurnIn<M> {
    fn sample(&self, rng: &mut StreamRng) -> Start<T> {
        Start::At(sample_invariant(&self.map, self.burn_in, rng))
    }
}

/// Samples the invariant probability of an intermittent map through its
/// tower: a level `i` is drawn with weight `ν(R > i)`, where `ν` is the
/// induced invariant density on the base, then a base point of that level
/// is drawn and pushed `i` steps up the tower.
#[derive(Debug, Clone)]
pub struct TowerSampler<T, M> {
    tower: TowerModel<T, M>,
    density: GridDensity,
    /// Cumulative level weights; entry `i` is `Σ_{j<=i} ν(R > j)`.
    cumulative: Vec<f64>,
    horizon: u64,
}

/// Induced invariant density on the tower base from a 1024-cell Ulam matrix.
pub fn induced_density<M: Intermittent<f64> + Sync>(
    tower: &TowerModel<f64, M>,
    n_cells: usize,
    samples_per_cell: usize,
    seed: u64,
) -> Result<GridDensity> {
    let op = induced_ulam(tower, n_cells, samples_per_cell, seed)?;
    stationary_density(&op, 1e-13, 100_000)
}

impl<M: Intermittent<f64> + Sync> TowerSampler<f64, M> {
    /// `horizon` bounds how far ahead `Beyond` answers are trusted; levels
    /// are tabulated as far as the tower's preimage sequence reaches.
    pub fn new(tower: TowerModel<f64, M>, density: GridDensity, horizon: u64) -> Result<Self> {
        let m = tower.base_index();
        let levels = tower.sequence().max_index() + 1 - m;
        if (levels as u64) <= horizon {
            return Err(Error::InvalidParameter {
                name: "horizon",
                reason: format!(
                    "the tower holds {levels} levels, fewer than the horizon {horizon}"
                ),
            });
        }
        let mut cumulative = Vec::with_capacity(levels);
        let mut acc = 1.0;
        cumulative.push(acc);
        for i in 1..levels {
            let (lo, hi) = tower
                .map()
                .reinjection_preimage(tower.sequence().get(m + i - 1));
            acc += density.mass(lo, hi);
            cumulative.push(acc);
        }
        Ok(Self {
            tower,
            density,
            cumulative,
            horizon,
        })
    }

    /// Builds the tower over the minimal base for `hole` (raised by
    /// `extra_base`) and estimates the induced density on it.
    pub fn for_hole(
        map: M,
        hole: &crate::open_systems::Hole1D<f64>,
        extra_base: usize,
        horizon: u64,
        seed: u64,
    ) -> Result<Self> {
        let levels = (20 * horizon as usize).max(1000);
        let tower = TowerModel::for_hole(map, hole, extra_base, levels)?;
        let density = induced_density(&tower, DEFAULT_CELLS, DEFAULT_SAMPLES_PER_CELL, seed)?;
        Self::new(tower, density, horizon)
    }

    pub fn tower(&self) -> &TowerModel<f64, M> {
        &self.tower
    }

    pub fn density(&self) -> &GridDensity {
        &self.density
    }

    /// Base mass by Kac's formula, `1 / Σ_i ν(R > i)` over the tabulated levels.
    pub fn kac_base_mass(&self) -> f64 {
        1.0 / self.cumulative[self.cumulative.len() - 1]
    }
}

impl<M: Intermittent<f64> + Sync> StartSampler<f64> for TowerSampler<f64, M> {
    fn sample(&self, rng: &mut StreamRng) -> Start<f64> {
        let total = self.cumulative[self.cumulative.len() - 1];
        let u = rng.random::<f64>() * total;
        let level = self.cumulative.partition_point(|&c| c <= u);
        if level >= self.cumulative.len() {
            return Start::Beyond;
        }
        let tower = &self.tower;
        let map = tower.map();
        let m = tower.base_index();
        if level == 0 {
            let y = self.density.inverse_cdf(rng.random());
            let y = if tower.in_base(y) {
                y
            } else {
                tower.base_low() + f64::EPSILON
            };
            return match tower.return_time_unchecked(y) {
                Ok(r) if r <= self.horizon => Start::At(y),
                _ => Start::Beyond,
            };
        }
        let s = tower.sequence().get(m + level - 1);
        let (lo, hi) = map.reinjection_preimage(s);
        let grid = self.density.grid;
        let z = if grid.cell_of(lo) == grid.cell_of(hi) {
            // Density is flat across this level: the reinjected point is uniform.
            s * (1.0 - rng.random::<f64>())
        } else {
            let (ca, cb) = (self.density.cdf(lo), self.density.cdf(hi));
            let y = self
                .density
                .inverse_cdf(ca + (cb - ca) * rng.random::<f64>());
            map.reinject(y).min(s)
        };
        if !(z > 0.0) {
            return Start::Beyond;
        }
        let k = match tower.sequence().level(z) {
            Ok(k) => k.max(m + level - 1),
            Err(_) => return Start::Beyond,
        };
        let remaining = (k - m + 2 - level) as u64;
        if remaining > self.horizon {
            return Start::Beyond;
        }
        let mut x = z;
        for _ in 1..level {
            x = map.apply(x);
        }
        Start::At(x)
    }

    fn horizon(&self) -> Option<u64> {
        Some(self.horizon)
    }
}
