//! First-return towers over a base `(s_m, 1]` of an intermittent map, plus
//! an abstract tower with prescribed return-time tails.
//!
//! Tower levels are never stored. A tower point is an ordinary phase-space
//! point; because the tower is first-return, level-0 visits are exactly the
//! base visits of the underlying orbit.

use std::collections::VecDeque;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::maps::{Intermittent, Lsv};
use crate::open_systems::{Hole1D, Passage, SurvivalCurve};
use crate::real::Real;
use crate::rng::{stream, Domain};

/// The preimages `s_0 = 1 > s_1 > ... > s_M` of 1 under the neutral branch.
#[derive(Debug, Clone, PartialEq)]
pub struct PreimageSequence<T> {
    values: Vec<T>,
}

/// The LSV instance of [`PreimageSequence`].
pub type ASequence<T> = PreimageSequence<T>;

impl<T: Real> PreimageSequence<T> {
    /// `s_0, ..., s_{m_max}`.
    pub fn new<M: Intermittent<T>>(map: &M, m_max: usize) -> Self {
        Self {
            values: map.preimages(m_max + 1),
        }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest available index `M`.
    pub fn max_index(&self) -> usize {
        self.values.len() - 1
    }

    pub fn get(&self, k: usize) -> T {
        self.values[k]
    }

    /// The `k` with `s_{k+1} < z <= s_k`.
    pub fn level(&self, z: T) -> Result<usize> {
        // Number of entries >= z, minus one.
        let count = self.values.partition_point(|&s| s >= z);
        if count == 0 {
            return Err(Error::Domain {
                what: "z",
                value: z.as_f64(),
                domain: "(0, 1]",
            });
        }
        if count == self.values.len() {
            return Err(Error::SequenceExhausted {
                len: self.values.len(),
            });
        }
        Ok(count - 1)
    }
}

/// `a_0 = 1, a_{k+1} = g_α|_L^{-1}(a_k)` for `k < m_max`.
pub fn compute_a_sequence<T: Real>(m_max: usize, alpha: T) -> Result<ASequence<T>> {
    if m_max == 0 {
        return Err(Error::InvalidParameter {
            name: "m_max",
            reason: "must be at least 1".into(),
        });
    }
    Ok(PreimageSequence::new(&Lsv::new(alpha)?, m_max))
}

/// Smallest `m >= 1` with `s_m < inf(hole)`.
pub fn choose_base_index<T: Real, M: Intermittent<T>>(
    map: &M,
    hole: &Hole1D<T>,
    cap: usize,
) -> Result<usize> {
    let inf = hole.infimum();
    if !(inf > T::zero()) {
        return Err(Error::InvalidHole(
            "the hole closure must avoid the neutral fixed point".into(),
        ));
    }
    let mut s = T::one();
    for m in 1..=cap {
        s = map.neutral_inverse(s);
        if s < inf {
            return Ok(m);
        }
    }
    Err(Error::BaseIndexCap { cap })
}

/// An inverse branch of the induced map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    /// The neutral-branch piece `(s_{j+1}, s_j]`, `1 <= j < m`.
    Left(usize),
    /// Reinjecting points sent into `(s_{k+1}, s_k]`.
    Right(usize),
}

/// An element of the coarse Markov partition of the base.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Element {
    /// `(s_{j+1}, s_j]`, `1 <= j < m`.
    Left(usize),
    /// `(s_1, 1]`.
    Top,
}

/// A cylinder of the induced map: the points following `itinerary` for
/// `depth` induced steps, which that many steps carry onto `image`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovCylinder<T> {
    pub lo: T,
    pub hi: T,
    pub depth: usize,
    pub itinerary: Vec<Branch>,
    pub image: Element,
}

/// The first-return tower of an intermittent map over `(s_m, 1]`.
#[derive(Debug, Clone)]
pub struct TowerModel<T, M> {
    map: M,
    seq: PreimageSequence<T>,
    m: usize,
}

pub const DEFAULT_BASE_CAP: usize = 100_000;
pub const DEFAULT_RETURN_CAP: u64 = 1_000_000;

impl<T: Real, M: Intermittent<T>> TowerModel<T, M> {
    /// Tower over `(s_m, 1]` with the preimage sequence computed to `s_{m + levels}`.
    pub fn new(map: M, m: usize, levels: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter {
                name: "m",
                reason: "the base index must be at least 1".into(),
            });
        }
        if levels < 2 {
            return Err(Error::InvalidParameter {
                name: "levels",
                reason: "at least two levels above the base are required".into(),
            });
        }
        let seq = PreimageSequence::new(&map, m + levels);
        Ok(Self { map, seq, m })
    }

    /// Tower with the minimal base excluding `hole`, raised by `extra` indices.
    pub fn for_hole(map: M, hole: &Hole1D<T>, extra: usize, levels: usize) -> Result<Self> {
        let m = choose_base_index(&map, hole, DEFAULT_BASE_CAP)?;
        Self::new(map, m + extra, levels)
    }

    pub fn map(&self) -> &M {
        &self.map
    }

    pub fn sequence(&self) -> &PreimageSequence<T> {
        &self.seq
    }

    pub fn base_index(&self) -> usize {
        self.m
    }

    pub fn base_low(&self) -> T {
        self.seq.get(self.m)
    }

    /// Length of the base interval.
    pub fn base_length(&self) -> T {
        T::one() - self.base_low()
    }

    #[inline]
    pub fn in_base(&self, x: T) -> bool {
        x > self.base_low() && x <= T::one()
    }

    fn check_base(&self, x: T) -> Result<()> {
        if self.in_base(x) {
            Ok(())
        } else {
            Err(Error::Domain {
                what: "x",
                value: x.as_f64(),
                domain: "the tower base (s_m, 1]",
            })
        }
    }

    /// Return time of `x` from the branch structure alone.
    pub fn return_time(&self, x: T) -> Result<u64> {
        self.check_base(x)?;
        self.return_time_unchecked(x)
    }

    /// Return time of a point already known to lie in the base.
    #[inline]
    pub fn return_time_unchecked(&self, x: T) -> Result<u64> {
        if x <= self.map.neutral_edge() {
            return Ok(1);
        }
        let k = self.seq.level(self.map.reinject(x))?;
        Ok(if k < self.m {
            1
        } else {
            (k - self.m + 2) as u64
        })
    }

    /// Return time by iterating the map, censored after `cap` steps.
    pub fn return_time_direct(&self, x: T, cap: u64) -> Result<Passage> {
        self.check_base(x)?;
        let mut y = x;
        for n in 1..=cap {
            y = self.map.apply(y);
            if self.in_base(y) {
                return Ok(Passage::At(n));
            }
        }
        Ok(Passage::Censored)
    }

    /// `(f^R(x), R(x))`.
    ///
    /// The landing point is found by iterating the map; the step count is
    /// therefore the return time of the floating-point orbit, which agrees
    /// with [`Self::return_time`] away from partition endpoints.
    pub fn induced_step(&self, x: T) -> Result<(T, u64)> {
        let r = self.return_time(x)?;
        let cap = 2 * r + 64;
        let mut y = x;
        for n in 1..=cap {
            y = self.map.apply(y);
            if self.in_base(y) {
                return Ok((y, n));
            }
        }
        Err(Error::NonConvergence { iterations: cap })
    }

    pub fn element_interval(&self, e: Element) -> (T, T) {
        match e {
            Element::Left(j) => (self.seq.get(j + 1), self.seq.get(j)),
            Element::Top => (self.map.neutral_edge(), T::one()),
        }
    }

    pub fn branch_interval(&self, b: Branch) -> (T, T) {
        match b {
            Branch::Left(j) => (self.seq.get(j + 1), self.seq.get(j)),
            Branch::Right(k) => {
                let p = self.map.reinject_inverse(self.seq.get(k + 1));
                let q = self.map.reinject_inverse(self.seq.get(k));
                if p < q {
                    (p, q)
                } else {
                    (q, p)
                }
            }
        }
    }

    /// The partition element a branch is carried onto.
    pub fn branch_image(&self, b: Branch) -> Element {
        let left_or_top = |j: usize| {
            if j == 0 {
                Element::Top
            } else {
                Element::Left(j)
            }
        };
        match b {
            Branch::Left(j) => left_or_top(j - 1),
            Branch::Right(k) if k < self.m => left_or_top(k),
            Branch::Right(_) => left_or_top(self.m - 1),
        }
    }

    /// Applies one induced step along the given branch.
    pub fn branch_forward(&self, b: Branch, x: T) -> T {
        match b {
            Branch::Left(_) => self.map.apply(x),
            Branch::Right(k) => {
                let mut z = self.map.reinject(x);
                for _ in self.m..=k {
                    z = self.map.apply(z);
                }
                z
            }
        }
    }

    pub fn branch_inverse(&self, b: Branch, y: T) -> T {
        match b {
            Branch::Left(_) => self.map.neutral_inverse(y),
            Branch::Right(k) => {
                let mut z = y;
                for _ in self.m..=k {
                    z = self.map.neutral_inverse(z);
                }
                self.map.reinject_inverse(z)
            }
        }
    }

    /// Carries a point of a cylinder through its whole itinerary.
    pub fn cylinder_forward(&self, c: &MarkovCylinder<T>, x: T) -> T {
        c.itinerary
            .iter()
            .fold(x, |y, &b| self.branch_forward(b, y))
    }

    fn pull_back(&self, itinerary: &[Branch], y: T) -> T {
        itinerary
            .iter()
            .rev()
            .fold(y, |x, &b| self.branch_inverse(b, x))
    }

    /// Branches inside element `e` that meet the interval `(u, v)`.
    fn branches_meeting(&self, e: Element, u: T, v: T, r_cap: u64) -> Vec<Branch> {
        match e {
            Element::Left(j) => vec![Branch::Left(j)],
            Element::Top => {
                let (za, zb) = {
                    let a = self.map.reinject(u);
                    let b = self.map.reinject(v);
                    if a < b {
                        (a, b)
                    } else {
                        (b, a)
                    }
                };
                let cap = (self.m + r_cap as usize)
                    .saturating_sub(2)
                    .min(self.seq.max_index() - 1);
                let k_lo = self.seq.level(zb.min(T::one())).unwrap_or(0).min(cap);
                let k_hi = if za > T::zero() {
                    self.seq.level(za).unwrap_or(cap).min(cap)
                } else {
                    cap
                };
                (k_lo..=k_hi).map(Branch::Right).collect()
            }
        }
    }

    /// Breadth-first search for a cylinder of the induced Markov partition
    /// lying inside one component of `hole` (endpoints may touch).
    ///
    /// Sub-branches of `(s_1, 1]` are enumerated up to return time `r_cap`
    /// (and never past the end of the stored preimage sequence).
    pub fn markov_cylinder_in(
        &self,
        hole: &Hole1D<T>,
        depth_max: usize,
        r_cap: u64,
    ) -> Result<MarkovCylinder<T>> {
        let mut best: Option<MarkovCylinder<T>> = None;
        for &(a, b) in hole.intervals() {
            if let Some(c) = self.cylinder_search(a, b, depth_max, r_cap) {
                if best.as_ref().is_none_or(|prev| c.depth < prev.depth) {
                    best = Some(c);
                }
            }
        }
        best.ok_or(Error::CylinderNotFound { depth_max })
    }

    fn cylinder_search(
        &self,
        a: T,
        b: T,
        depth_max: usize,
        r_cap: u64,
    ) -> Option<MarkovCylinder<T>> {
        let inside = |lo: T, hi: T| lo >= a && hi <= b;
        let meets = |lo: T, hi: T| lo < b && hi > a;

        let mut queue = VecDeque::new();
        let mut roots: Vec<Element> = (1..self.m).map(Element::Left).collect();
        roots.push(Element::Top);
        for e in roots {
            let (lo, hi) = self.element_interval(e);
            let c = MarkovCylinder {
                lo,
                hi,
                depth: 0,
                itinerary: Vec::new(),
                image: e,
            };
            if inside(lo, hi) {
                return Some(c);
            }
            if meets(lo, hi) && depth_max > 0 {
                queue.push_back(c);
            }
        }

        while let Some(c) = queue.pop_front() {
            let p = c.lo.max(a);
            let q = c.hi.min(b);
            let (u, v) = {
                let pu = self.cylinder_forward(&c, p);
                let qv = self.cylinder_forward(&c, q);
                if pu < qv {
                    (pu, qv)
                } else {
                    (qv, pu)
                }
            };
            for br in self.branches_meeting(c.image, u, v, r_cap) {
                let (ylo, yhi) = self.branch_interval(br);
                let x1 = self.pull_back(&c.itinerary, ylo);
                let x2 = self.pull_back(&c.itinerary, yhi);
                let mut itinerary = c.itinerary.clone();
                itinerary.push(br);
                let (lo, hi) = if x1 < x2 { (x1, x2) } else { (x2, x1) };
                let child = MarkovCylinder {
                    lo,
                    hi,
                    depth: c.depth + 1,
                    itinerary,
                    image: self.branch_image(br),
                };
                if inside(lo, hi) {
                    return Some(child);
                }
                if meets(lo, hi) && child.depth < depth_max {
                    queue.push_back(child);
                }
            }
        }
        None
    }
}

// ---------------------------------------------------------------------------
// Abstract tower

/// A tower over the doubling map whose heights are i.i.d. with
/// `P(R > n) = n^{-β}` for `n >= 1`.
///
/// The base point is a 64-bit binary expansion refreshed with one random
/// bit per doubling step, so orbits never collapse.  A tower point in the
/// stationary regime sits `D` steps below its next base visit, where
/// `P(D > k) = ζ(β, k) / E[R]` and `E[R] = 1 + ζ(β)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticTower {
    beta: f64,
    mean_return: f64,
}

/// Survival estimates with standard errors on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalEstimate {
    pub times: Vec<u64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
    pub n_samples: u64,
}

impl SurvivalEstimate {
    pub fn series(&self) -> Vec<(f64, f64)> {
        self.times
            .iter()
            .zip(&self.values)
            .map(|(&n, &p)| (n as f64, p))
            .collect()
    }
}

/// Hurwitz zeta `ζ(s, a) = Σ_{i>=0} (a + i)^{-s}` for `s > 1`, `a > 0`.
pub fn hurwitz_zeta(s: f64, a: f64) -> f64 {
    const N: usize = 12;
    // B_{2j} / (2j)!
    const COEF: [f64; 6] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1_209_600.0,
        1.0 / 47_900_160.0,
        -691.0 / 1_307_674_368_000.0,
    ];
    let mut sum = (0..N).map(|i| (a + i as f64).powf(-s)).sum::<f64>();
    let x = a + N as f64;
    sum += x.powf(1.0 - s) / (s - 1.0) + 0.5 * x.powf(-s);
    let mut rising = s;
    let mut pow = x.powf(-s - 1.0);
    for (j, c) in COEF.iter().enumerate() {
        sum += c * rising * pow;
        let k = 2.0 * j as f64;
        rising *= (s + k + 1.0) * (s + k + 2.0);
        pow /= x * x;
    }
    sum
}

impl SyntheticTower {
    pub fn new(beta: f64) -> Result<Self> {
        if !(beta > 1.0) || !beta.is_finite() {
            return Err(Error::InvalidParameter {
                name: "beta",
                reason: format!("must exceed 1, got {beta}"),
            });
        }
        Ok(Self {
            beta,
            mean_return: 1.0 + hurwitz_zeta(beta, 1.0),
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `E[R]`, the reciprocal of the base mass.
    pub fn mean_return(&self) -> f64 {
        self.mean_return
    }

    /// `P(R > n)`.
    pub fn return_tail(&self, n: u64) -> f64 {
        if n == 0 {
            1.0
        } else {
            (n as f64).powf(-self.beta)
        }
    }

    /// Inverse-transform draw of a return height.
    pub fn sample_return<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u = 1.0 - rng.random::<f64>();
        let h = u.powf(-1.0 / self.beta).ceil();
        if h >= 1.0e18 {
            1_000_000_000_000_000_000
        } else {
            h as u64
        }
    }

    /// `P(D > k)` for the stationary distance to the next base visit.
    pub fn remaining_tail(&self, k: u64) -> f64 {
        if k == 0 {
            1.0
        } else {
            hurwitz_zeta(self.beta, k as f64) / self.mean_return
        }
    }

    /// `P(D = k)`, `k >= 1`.
    pub fn remaining_mass(&self, k: u64) -> f64 {
        self.return_tail(k - 1) / self.mean_return
    }

    pub fn sample_remaining<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u = 1.0 - rng.random::<f64>();
        // Smallest k with P(D > k) < u.
        if self.remaining_tail(1) < u {
            return 1;
        }
        let mut hi = 2u64;
        while self.remaining_tail(hi) >= u {
            if hi >= 1 << 60 {
                return hi;
            }
            hi *= 2;
        }
        let mut lo = hi / 2;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.remaining_tail(mid) >= u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    /// Time from a base visit until the first base visit inside the hole
    /// `[0, hole_mass)`, or `None` once it exceeds `limit`.
    fn time_to_hole<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        hole_mass: f64,
        limit: u64,
    ) -> Option<u64> {
        let threshold = hole_threshold(hole_mass);
        let mut bits: u64 = rng.random();
        let mut elapsed = 0u64;
        loop {
            if bits < threshold {
                return Some(elapsed);
            }
            elapsed += self.sample_return(rng);
            if elapsed > limit {
                return None;
            }
            bits = (bits << 1) | (rng.random::<u64>() >> 63);
        }
    }

    /// Plain Monte Carlo survival of stationary starts against
    /// `hole × {level 0}` with `hole = [0, hole_mass)`.
    pub fn survival(
        &self,
        hole_mass: f64,
        n_samples: u64,
        n_max: u64,
        seed: u64,
    ) -> Result<SurvivalCurve> {
        check_hole_mass(hole_mass)?;
        let passages = (0..n_samples).into_par_iter().map(|i| {
            let mut rng = stream(seed, Domain::Trajectory, i);
            let d = self.sample_remaining(&mut rng);
            if d > n_max {
                return Passage::Censored;
            }
            match self.time_to_hole(&mut rng, hole_mass, n_max - d) {
                Some(t) => Passage::At(d + t),
                None => Passage::Censored,
            }
        });
        Ok(SurvivalCurve::from_par_passages(passages, n_max))
    }

    /// Survival via `P(τ > n) = P(D > n) + Σ_{k<=n} P(D = k) P(T > n - k)`,
    /// where `T` is the time from a uniform base point to the hole and only
    /// the law of `T` is estimated by simulation.
    pub fn survival_by_remaining_time(
        &self,
        hole_mass: f64,
        n_samples: u64,
        n_max: u64,
        seed: u64,
    ) -> Result<SurvivalEstimate> {
        check_hole_mass(hole_mass)?;
        if n_samples < 2 {
            return Err(Error::InvalidParameter {
                name: "n_samples",
                reason: "need at least two samples for a standard error".into(),
            });
        }
        let times = crate::open_systems::geometric_grid(n_max);
        // Cumulative weights W(j) = Σ_{k=1}^{j} P(D = k).
        let mut cumulative = Vec::with_capacity(n_max as usize + 1);
        cumulative.push(0.0);
        let mut acc = 0.0;
        for k in 1..=n_max {
            acc += self.remaining_mass(k);
            cumulative.push(acc);
        }
        let hits: Vec<Option<u64>> = (0..n_samples)
            .into_par_iter()
            .map(|i| {
                let mut rng = stream(seed, Domain::Stratum, i);
                self.time_to_hole(&mut rng, hole_mass, n_max)
            })
            .collect();
        let count = n_samples as f64;
        let mut values = Vec::with_capacity(times.len());
        let mut stderr = Vec::with_capacity(times.len());
        for &n in &times {
            let w_n = cumulative[n as usize];
            let (mut s1, mut s2) = (0.0, 0.0);
            for t in &hits {
                // Σ_{k<=n} P(D = k) 1{T > n - k}
                let g = match t {
                    Some(t) if *t < n => w_n - cumulative[(n - t) as usize],
                    Some(_) | None => w_n,
                };
                s1 += g;
                s2 += g * g;
            }
            let mean = s1 / count;
            let var = ((s2 / count - mean * mean) * count / (count - 1.0)).max(0.0);
            values.push(self.remaining_tail(n) + mean);
            stderr.push((var / count).sqrt());
        }
        Ok(SurvivalEstimate {
            times,
            values,
            stderr,
            n_samples,
        })
    }
}

fn check_hole_mass(hole_mass: f64) -> Result<()> {
    if hole_mass > 0.0 && hole_mass <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "hole_mass",
            reason: format!("must lie in (0, 1], got {hole_mass}"),
        })
    }
}

fn hole_threshold(hole_mass: f64) -> u64 {
    if hole_mass >= 1.0 {
        u64::MAX
    } else {
        (hole_mass * 18_446_744_073_709_551_616.0) as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maps::Farey;
    use approx::assert_abs_diff_eq;

    fn hole(a: f64, b: f64) -> Hole1D<f64> {
        Hole1D::new(vec![(a, b)]).unwrap()
    }

    #[test]
    fn a_sequence_reference_values() {
        let s = compute_a_sequence(1, 0.5).unwrap();
        assert_eq!(s.values(), &[1.0, 0.5]);
        let s = compute_a_sequence(2, 0.5).unwrap();
        assert_abs_diff_eq!(s.get(2), 0.284_920_145_499_026_6, epsilon = 1e-14);
        assert!(compute_a_sequence::<f64>(0, 0.5).is_err());
    }

    #[test]
    fn base_index_edge_cases() {
        let g = Lsv::new(0.5).unwrap();
        assert_eq!(choose_base_index(&g, &hole(0.5, 0.6), 100).unwrap(), 2);
        assert_eq!(choose_base_index(&g, &hole(0.6, 0.7), 100).unwrap(), 1);
        let seq = compute_a_sequence(200, 0.5).unwrap();
        let expect = (1..).find(|&k| seq.get(k) < 0.05).unwrap();
        assert_eq!(
            choose_base_index(&g, &hole(0.05, 0.06), 100).unwrap(),
            expect
        );
        assert!(matches!(
            choose_base_index(&g, &hole(1e-9, 0.1), 10),
            Err(Error::BaseIndexCap { cap: 10 })
        ));
    }

    #[test]
    fn level_lookup_is_right_closed() {
        let seq = compute_a_sequence(10, 0.5).unwrap();
        assert_eq!(seq.level(1.0).unwrap(), 0);
        assert_eq!(seq.level(0.5).unwrap(), 1);
        assert_eq!(seq.level(0.5000001).unwrap(), 0);
        assert!(matches!(
            seq.level(seq.get(10)),
            Err(Error::SequenceExhausted { .. })
        ));
    }

    #[test]
    fn return_time_reference_values() {
        let t = TowerModel::new(Lsv::new(0.5).unwrap(), 2, 1000).unwrap();
        assert_eq!(t.return_time(0.4).unwrap(), 1);
        assert_eq!(t.return_time(0.9).unwrap(), 1);
        assert!(t.return_time(0.2).is_err());
        let direct = t.return_time_direct(0.755, 10_000).unwrap();
        assert_eq!(direct, Passage::At(t.return_time(0.755).unwrap()));
        // 2x - 1 in (a_2, a_1]
        assert_eq!(t.return_time(0.7).unwrap(), 1);
        // 2x - 1 = 0.1 sits several levels down
        let r = t.return_time(0.55).unwrap();
        assert!(r > 2);
        assert_eq!(t.return_time_direct(0.55, 10_000).unwrap(), Passage::At(r));
    }

    #[test]
    fn induced_step_reference_values() {
        let g = Lsv::new(0.5).unwrap();
        let t = TowerModel::new(g, 2, 1000).unwrap();
        let (y, r) = t.induced_step(0.8).unwrap();
        assert_abs_diff_eq!(y, 0.6, epsilon = 1e-15);
        assert_eq!(r, 1);
        let (y, r) = t.induced_step(0.4).unwrap();
        assert_eq!(r, 1);
        assert_eq!(y, g.eval(0.4).unwrap());
        assert_abs_diff_eq!(y, 0.757_770_876_399_966_4, epsilon = 1e-12);
    }

    #[test]
    fn farey_tower_returns() {
        let f = Farey::new(2.0).unwrap();
        let t = TowerModel::new(f, 2, 1000).unwrap();
        assert_abs_diff_eq!(t.base_low(), 1.0 / 9.0, epsilon = 1e-16);
        assert_eq!(t.return_time(0.2).unwrap(), 1);
        for &x in &[0.3, 0.5, 0.9, 0.99, 0.999] {
            let r = t.return_time(x).unwrap();
            assert_eq!(
                t.return_time_direct(x, 1 << 20).unwrap(),
                Passage::At(r),
                "x={x}"
            );
        }
        assert!(t.return_time(1.0).is_err());
    }

    #[test]
    fn markov_cylinder_whole_top_element() {
        let t = TowerModel::new(Lsv::new(0.5).unwrap(), 2, 1000).unwrap();
        let c = t
            .markov_cylinder_in(&hole(0.5, 1.0), 5, DEFAULT_RETURN_CAP)
            .unwrap();
        assert_eq!(c.depth, 0);
        assert_eq!((c.lo, c.hi), (0.5, 1.0));
    }

    #[test]
    fn markov_cylinder_lands_on_partition_element() {
        let t = TowerModel::new(Lsv::new(0.5).unwrap(), 2, 10_000).unwrap();
        let c = t
            .markov_cylinder_in(&hole(0.5, 0.6), 8, DEFAULT_RETURN_CAP)
            .unwrap();
        assert!(0.5 < c.lo && c.lo < c.hi && c.hi <= 0.6);
        assert_eq!(c.itinerary.len(), c.depth);
        let (ea, eb) = t.element_interval(c.image);
        let ya = t.cylinder_forward(&c, c.lo);
        let yb = t.cylinder_forward(&c, c.hi);
        let (ya, yb) = if ya < yb { (ya, yb) } else { (yb, ya) };
        assert_abs_diff_eq!(ya, ea, epsilon = 1e-10);
        assert_abs_diff_eq!(yb, eb, epsilon = 1e-10);
    }

    #[test]
    fn markov_cylinder_too_thin() {
        let t = TowerModel::new(Lsv::new(0.5).unwrap(), 2, 10_000).unwrap();
        let w = 2f64.powi(-40);
        assert!(matches!(
            t.markov_cylinder_in(&hole(0.7072, 0.7072 + w), 10, DEFAULT_RETURN_CAP),
            Err(Error::CylinderNotFound { depth_max: 10 })
        ));
    }

    #[test]
    fn hurwitz_zeta_known_values() {
        assert_abs_diff_eq!(
            hurwitz_zeta(2.0, 1.0),
            std::f64::consts::PI.powi(2) / 6.0,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            hurwitz_zeta(3.0, 1.0),
            1.202_056_903_159_594_3,
            epsilon = 1e-14
        );
        // ζ(2, k) against direct summation with an integral tail
        let k = 7.0;
        let direct: f64 = (0..200_000).map(|i| (k + i as f64).powi(-2)).sum::<f64>()
            + 1.0 / (k + 200_000.0 - 0.5);
        assert_abs_diff_eq!(hurwitz_zeta(2.0, k), direct, epsilon = 1e-12);
    }

    #[test]
    fn remaining_time_law_is_normalised() {
        let st = SyntheticTower::new(2.5).unwrap();
        let total: f64 =
            (1..200_000).map(|k| st.remaining_mass(k)).sum::<f64>() + st.remaining_tail(199_999);
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        let mut rng = stream(1, Domain::Trajectory, 0);
        let n = 200_000;
        let big = (0..n).filter(|_| st.sample_remaining(&mut rng) > 3).count();
        let p = st.remaining_tail(3);
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        assert!((big as f64 / n as f64 - p).abs() < 4.0 * sd);
    }

    #[test]
    fn full_hole_survival_is_remaining_time_tail() {
        let st = SyntheticTower::new(2.0).unwrap();
        let curve = st.survival(1.0, 100_000, 1000, 5).unwrap();
        for (i, &n) in curve.times.iter().enumerate() {
            let p = st.remaining_tail(n);
            let sd = (p * (1.0 - p) / 1e5).sqrt().max(1e-5);
            assert!(
                (curve.survivors[i] as f64 / 1e5 - p).abs() < 5.0 * sd,
                "n={n}"
            );
        }
    }

    #[test]
    fn both_synthetic_estimators_agree() {
        let st = SyntheticTower::new(2.0).unwrap();
        let plain = st.survival(0.1, 200_000, 2000, 3).unwrap();
        let strat = st.survival_by_remaining_time(0.1, 20_000, 2000, 4).unwrap();
        assert_eq!(plain.times, strat.times);
        for i in 0..plain.times.len() {
            let p = plain.survivors[i] as f64 / 2e5;
            let sd = (p / 2e5).sqrt() + strat.stderr[i];
            assert!(
                (p - strat.values[i]).abs() < 5.0 * sd + 1e-6,
                "n={}",
                plain.times[i]
            );
        }
    }
}
