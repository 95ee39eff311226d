//! The concrete dynamical systems: the LSV intermittent map, the finite-type
//! Farey map, the intermittent solenoid, circle rotations, and the doubling
//! map used as an exactly solvable reference.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::real::{Power, Real};

/// A deterministic self-map of a phase space.
///
/// `apply` is the unchecked hot path; each concrete map also offers a
/// checked `eval` that validates its input.
pub trait Map: Sync {
    type Point: Copy + Send + Sync;

    fn apply(&self, p: Self::Point) -> Self::Point;
}

/// Interval maps of `[0, 1]` with one neutral fixed point at 0 and a
/// reinjecting branch.
///
/// The structure is described by the preimage sequence `s_0 = 1 > s_1 > ...`:
/// the neutral branch sends `(s_{k+1}, s_k]` onto `(s_k, s_{k-1}]` for `k >= 1`,
/// and the reinjecting branch sends `(s_1, 1]` bijectively and affinely onto
/// `(0, 1]` (up to its endpoints).
pub trait Intermittent<T: Real>: Map<Point = T> + Clone + Send {
    /// `s_1`, the right end of the neutral branch.
    fn neutral_edge(&self) -> T;

    /// Inverse of the neutral branch, `(0, 1] -> (0, s_1]`.
    fn neutral_inverse(&self, y: T) -> T;

    /// The reinjecting branch on `(s_1, 1]`.
    fn reinject(&self, x: T) -> T;

    /// Inverse of the reinjecting branch, `(0, 1] -> (s_1, 1]`.
    fn reinject_inverse(&self, z: T) -> T;

    /// Length of the set of reinjecting-branch points sent into `(0, s]`,
    /// per unit of `s`.
    fn reinjection_contraction(&self) -> T;

    /// Whether the reinjecting branch preserves orientation.
    fn reinjection_increasing(&self) -> bool;

    /// The reinjecting-branch points sent into `(0, s]`, as `(lo, hi)`.
    fn reinjection_preimage(&self, s: T) -> (T, T) {
        let a = self.reinject_inverse(s);
        let b = self.reinject_inverse(T::zero());
        if a < b {
            (a, b)
        } else {
            (b, a)
        }
    }

    /// `s_0, ..., s_{len-1}`.
    fn preimages(&self, len: usize) -> Vec<T> {
        let mut out = Vec::with_capacity(len);
        let mut s = T::one();
        for _ in 0..len {
            out.push(s);
            s = self.neutral_inverse(s);
        }
        out
    }

    /// Short machine-friendly name, used in reports.
    fn name(&self) -> &'static str;
}

fn check_unit<T: Real>(what: &'static str, x: T) -> Result<()> {
    if x >= T::zero() && x <= T::one() {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value: x.as_f64(),
            domain: "[0, 1]",
        })
    }
}

// ---------------------------------------------------------------------------
// LSV

/// The Liverani–Saussol–Vaienti map
/// `x + 2^α x^{1+α}` on `[0, 1/2]`, `2x - 1` on `(1/2, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lsv<T> {
    alpha: T,
    scale: T,
    power: Power<T>,
}

impl<T: Real> Lsv<T> {
    pub fn new(alpha: T) -> Result<Self> {
        if !(alpha > T::zero() && alpha < T::one()) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                reason: format!("must lie in (0, 1), got {alpha}"),
            });
        }
        Ok(Self {
            alpha,
            scale: T::lit(2.0).powf(alpha),
            power: Power::new(alpha),
        })
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    #[inline(always)]
    pub fn step(&self, x: T) -> T {
        if x <= T::lit(0.5) {
            // 2^α (1/2)^{1+α} rounds a hair above 1/2 at the branch point.
            (x + self.scale * x * self.power.of(x)).min(T::one())
        } else {
            x + x - T::one()
        }
    }

    pub fn eval(&self, x: T) -> Result<T> {
        check_unit("x", x)?;
        Ok(self.step(x))
    }

    /// Derivative; `x = 1/2` takes the left-branch value.
    pub fn deriv(&self, x: T) -> Result<T> {
        check_unit("x", x)?;
        Ok(if x <= T::lit(0.5) {
            T::one() + self.scale * (T::one() + self.alpha) * self.power.of(x)
        } else {
            T::lit(2.0)
        })
    }

    /// `sup |g'| = 2 + α`, attained at `x = 1/2` from the left.
    pub fn sup_deriv(&self) -> T {
        T::lit(2.0) + self.alpha
    }

    /// The unique `x` in `[0, 1/2]` with `g(x) = y`.
    ///
    /// `h(x) = x + 2^α x^{1+α} - y` is convex and increasing, so Newton's
    /// method started at the right end of the bracket decreases
    /// monotonically onto the root; iteration stops once a step no longer
    /// moves left, which leaves `x` within a few ulps (relative) of the root.
    pub fn left_inverse(&self, y: T) -> Result<T> {
        check_unit("y", y)?;
        if y == T::zero() {
            return Ok(T::zero());
        }
        if y == T::one() {
            return Ok(T::lit(0.5));
        }
        let one_plus = T::one() + self.alpha;
        let mut x = y.min(T::lit(0.5));
        for _ in 0..200 {
            let xa = self.power.of(x);
            let h = x + self.scale * x * xa - y;
            let dh = T::one() + self.scale * one_plus * xa;
            let next = x - h / dh;
            if !(next < x) {
                break;
            }
            x = next.max(T::zero());
        }
        Ok(x)
    }
}

impl<T: Real> Map for Lsv<T> {
    type Point = T;

    #[inline(always)]
    fn apply(&self, x: T) -> T {
        self.step(x)
    }
}

impl<T: Real> Intermittent<T> for Lsv<T> {
    fn neutral_edge(&self) -> T {
        T::lit(0.5)
    }

    fn neutral_inverse(&self, y: T) -> T {
        self.left_inverse(y.max(T::zero()).min(T::one()))
            .expect("clamped into the domain")
    }

    fn reinject(&self, x: T) -> T {
        x + x - T::one()
    }

    fn reinject_inverse(&self, z: T) -> T {
        (T::one() + z) * T::lit(0.5)
    }

    fn reinjection_contraction(&self) -> T {
        T::lit(0.5)
    }

    fn reinjection_increasing(&self) -> bool {
        true
    }

    fn name(&self) -> &'static str {
        "lsv"
    }
}

// ---------------------------------------------------------------------------
// Farey

/// Finite-type Farey map with partition points `t_n = n^{-θ}`.
///
/// Branch `n` is `(t_{n+1}, t_n]`; branch 1 is the decreasing reinjection
/// `(1 - x) / a_1` and branches `n >= 2` are the increasing affine maps onto
/// `(t_n, t_{n-1}]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Farey<T> {
    theta: T,
    /// `x ↦ x^{-1/θ}`
    index_power: Power<T>,
    square: bool,
    a1: T,
}

impl<T: Real> Farey<T> {
    pub fn new(theta: T) -> Result<Self> {
        if !(theta > T::one()) || !theta.is_finite() {
            return Err(Error::InvalidParameter {
                name: "theta",
                reason: format!("must exceed 1, got {theta}"),
            });
        }
        let mut map = Self {
            theta,
            index_power: Power::new(-theta.recip()),
            square: theta == T::lit(2.0),
            a1: T::zero(),
        };
        map.a1 = map.gap(1);
        Ok(map)
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    /// `t_n = n^{-θ}`.
    #[inline]
    pub fn t(&self, n: u64) -> T {
        let nf = T::from_count(n);
        if self.square {
            (nf * nf).recip()
        } else {
            nf.powf(-self.theta)
        }
    }

    /// `a_n = t_n - t_{n+1}`, evaluated without cancellation.
    #[inline]
    pub fn gap(&self, n: u64) -> T {
        let nf = T::from_count(n);
        if self.square {
            let m = nf + T::one();
            (nf + m) / (nf * nf * m * m)
        } else {
            -self.t(n) * (-self.theta * nf.recip().ln_1p()).exp_m1()
        }
    }

    /// The `n` with `t_{n+1} < x <= t_n`, for `x` in `(0, 1]`.
    pub fn branch_index(&self, x: T) -> u64 {
        let guess = self.index_power.of(x).floor();
        let cap = T::lit(4.0e15);
        let mut n = if guess >= cap {
            4_000_000_000_000_000
        } else {
            guess.to_u64().unwrap_or(1).max(1)
        };
        while n > 1 && self.t(n) < x {
            n -= 1;
        }
        while self.t(n + 1) >= x {
            n += 1;
        }
        n
    }

    #[inline]
    pub fn step(&self, x: T) -> T {
        if x <= T::zero() {
            return T::zero();
        }
        let n = self.branch_index(x);
        if n == 1 {
            ((T::one() - x) / self.a1).max(T::zero()).min(T::one())
        } else {
            let y = self.t(n) + (x - self.t(n + 1)) * (self.gap(n - 1) / self.gap(n));
            y.min(self.t(n - 1))
        }
    }

    pub fn eval(&self, x: T) -> Result<T> {
        check_unit("x", x)?;
        Ok(self.step(x))
    }
}

impl<T: Real> Map for Farey<T> {
    type Point = T;

    #[inline]
    fn apply(&self, x: T) -> T {
        self.step(x)
    }
}

impl<T: Real> Intermittent<T> for Farey<T> {
    fn neutral_edge(&self) -> T {
        self.t(2)
    }

    fn neutral_inverse(&self, y: T) -> T {
        if y <= T::zero() {
            return T::zero();
        }
        let j = self.branch_index(y.min(T::one()));
        self.t(j + 2) + (y - self.t(j + 1)) * (self.gap(j + 1) / self.gap(j))
    }

    fn reinject(&self, x: T) -> T {
        ((T::one() - x) / self.a1).max(T::zero())
    }

    fn reinject_inverse(&self, z: T) -> T {
        T::one() - self.a1 * z
    }

    fn reinjection_contraction(&self) -> T {
        self.a1
    }

    fn reinjection_increasing(&self) -> bool {
        false
    }

    /// Closed form `s_k = t_{k+1}`.
    fn preimages(&self, len: usize) -> Vec<T> {
        (0..len as u64).map(|k| self.t(k + 1)).collect()
    }

    fn name(&self) -> &'static str {
        "farey"
    }
}

// ---------------------------------------------------------------------------
// Solenoid

/// A point `(x, z)` of `[0, 1] × 𝔻`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2<T> {
    pub x: T,
    pub z: Complex<T>,
}

impl<T: Real> Point2<T> {
    pub fn new(x: T, z: Complex<T>) -> Result<Self> {
        check_unit("x", x)?;
        let r = z.norm();
        if !(r <= T::one()) {
            return Err(Error::Domain {
                what: "|z|",
                value: r.as_f64(),
                domain: "the closed unit disk",
            });
        }
        Ok(Self { x, z })
    }
}

/// The skew product `(x, z) ↦ (g_α(x), θ z + e^{2πix} / 2)` over the LSV map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solenoid<T> {
    base: Lsv<T>,
    contraction: T,
}

impl<T: Real> Solenoid<T> {
    /// Requires `θ · sup|g'| < 1 - θ`, i.e. `θ < 1 / (3 + α)`.
    pub fn new(alpha: T, contraction: T) -> Result<Self> {
        let base = Lsv::new(alpha)?;
        if !(contraction > T::zero()) {
            return Err(Error::InvalidParameter {
                name: "contraction",
                reason: format!("must be positive, got {contraction}"),
            });
        }
        let sup = base.sup_deriv();
        // Compared as θ(sup + 1) < 1 with a few ulps of slack, so that the
        // boundary value 1/(3 + α) is rejected despite rounding.
        let slack = T::lit(4.0) * T::epsilon();
        if !(contraction * (sup + T::one()) < T::one() - slack) {
            return Err(Error::InvalidParameter {
                name: "contraction",
                reason: format!(
                    "θ·sup|g'| = {} must stay below 1 - θ = {}",
                    contraction * sup,
                    T::one() - contraction
                ),
            });
        }
        Ok(Self { base, contraction })
    }

    pub fn base(&self) -> &Lsv<T> {
        &self.base
    }

    pub fn contraction(&self) -> T {
        self.contraction
    }

    #[inline]
    pub fn step(&self, p: Point2<T>) -> Point2<T> {
        let angle = T::TAU() * p.x;
        let kick = Complex::new(angle.cos(), angle.sin()) * T::lit(0.5);
        Point2 {
            x: self.base.step(p.x),
            z: p.z * self.contraction + kick,
        }
    }

    pub fn eval(&self, p: Point2<T>) -> Result<Point2<T>> {
        let p = Point2::new(p.x, p.z)?;
        Ok(self.step(p))
    }
}

impl<T: Real> Map for Solenoid<T> {
    type Point = Point2<T>;

    #[inline]
    fn apply(&self, p: Point2<T>) -> Point2<T> {
        self.step(p)
    }
}

// ---------------------------------------------------------------------------
// Rotation and doubling

/// Circle rotation `x ↦ x + γ mod 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation<T> {
    gamma: T,
}

impl<T: Real> Rotation<T> {
    pub fn new(gamma: T) -> Result<Self> {
        if !(gamma > T::zero() && gamma < T::one()) {
            return Err(Error::InvalidParameter {
                name: "gamma",
                reason: format!("must lie in (0, 1), got {gamma}"),
            });
        }
        Ok(Self { gamma })
    }

    /// Rotation by the golden mean `(√5 - 1) / 2`.
    pub fn golden() -> Self {
        Self {
            gamma: (T::lit(5.0).sqrt() - T::one()) * T::lit(0.5),
        }
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    #[inline]
    pub fn step(&self, x: T) -> T {
        let y = x + self.gamma;
        if y >= T::one() {
            y - T::one()
        } else {
            y
        }
    }

    pub fn eval(&self, x: T) -> Result<T> {
        if !(x >= T::zero() && x < T::one()) {
            return Err(Error::Domain {
                what: "x",
                value: x.as_f64(),
                domain: "[0, 1)",
            });
        }
        Ok(self.step(x))
    }
}

impl<T: Real> Map for Rotation<T> {
    type Point = T;

    #[inline]
    fn apply(&self, x: T) -> T {
        self.step(x)
    }
}

/// `x ↦ 2x mod 1` in floating point.
///
/// Fine for single steps (Ulam matrices); long orbits must use
/// [`crate::measure::DoublingOrbits`], since every float step discards a bit.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Doubling;

impl Map for Doubling {
    type Point = f64;

    #[inline]
    fn apply(&self, x: f64) -> f64 {
        let y = x + x;
        if y >= 1.0 {
            y - 1.0
        } else {
            y
        }
    }
}

/// The identity map, a degenerate reference for Ulam matrices.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Identity;

impl Map for Identity {
    type Point = f64;

    #[inline]
    fn apply(&self, x: f64) -> f64 {
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn lsv(alpha: f64) -> Lsv<f64> {
        Lsv::new(alpha).unwrap()
    }

    #[test]
    fn lsv_rejects_bad_alpha() {
        assert!(Lsv::new(0.0).is_err());
        assert!(Lsv::new(1.0).is_err());
        assert!(Lsv::new(f64::NAN).is_err());
        assert!(lsv(0.5).eval(1.5).is_err());
        assert!(lsv(0.5).eval(-0.1).is_err());
    }

    #[test]
    fn lsv_reference_values() {
        for &a in &[0.1, 0.5, 0.9] {
            assert_eq!(lsv(a).eval(0.0).unwrap(), 0.0);
            assert_abs_diff_eq!(lsv(a).eval(0.5).unwrap(), 1.0, epsilon = 1e-15);
            assert_eq!(lsv(a).deriv(0.0).unwrap(), 1.0);
            assert_eq!(lsv(a).deriv(0.75).unwrap(), 2.0);
        }
        // 0.25 + √2 · 0.25^{1.5} = 0.25 + √2/8, rounded from a 50-digit evaluation.
        assert_abs_diff_eq!(
            lsv(0.5).eval(0.25).unwrap(),
            0.426_776_695_296_636_9,
            epsilon = 1e-15
        );
    }

    #[test]
    fn lsv_sup_derivative_by_grid() {
        let g = lsv(0.5);
        let grid_max = (0..=100_000)
            .map(|i| g.deriv(i as f64 / 100_000.0).unwrap())
            .fold(0.0, f64::max);
        assert_abs_diff_eq!(grid_max, 2.5, epsilon = 1e-12);
        assert_eq!(g.sup_deriv(), 2.5);
    }

    #[test]
    fn lsv_left_inverse_reference_values() {
        let g = lsv(0.5);
        assert_eq!(g.left_inverse(0.0).unwrap(), 0.0);
        assert_eq!(g.left_inverse(1.0).unwrap(), 0.5);
        // Bisection on x + √2 x^{1.5} = 0.5 to 60 halvings.
        let (mut lo, mut hi) = (0.0f64, 0.5f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if mid + 2f64.sqrt() * mid.powf(1.5) < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let x = g.left_inverse(0.5).unwrap();
        assert_abs_diff_eq!(x, 0.5 * (lo + hi), epsilon = 1e-14);
        assert_abs_diff_eq!(x, 0.2849, epsilon = 1e-3);
    }

    #[test]
    fn lsv_continuity_and_monotonicity() {
        let g = lsv(0.3);
        let below = g.eval(0.5 - 1e-12).unwrap();
        assert!((below - 1.0).abs() < 1e-11);
        let mut prev = -1.0;
        for i in 0..=5000 {
            let y = g.eval(0.5 * i as f64 / 5000.0).unwrap();
            assert!(y > prev);
            prev = y;
        }
        let mut prev = 0.0;
        for i in 1..=5000 {
            let y = g.eval(0.5 + 0.5 * i as f64 / 5000.0).unwrap();
            assert!(y > prev);
            prev = y;
        }
    }

    #[test]
    fn lsv_inverse_round_trip_uniform() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for &a in &[0.5, 2.0 / 3.0, 0.2] {
            let g = lsv(a);
            for _ in 0..10_000 {
                let y = f64::unit(&mut rng);
                let x = g.left_inverse(y).unwrap();
                assert!((0.0..=0.5).contains(&x));
                assert!((g.eval(x).unwrap() - y).abs() <= 1e-12, "α={a} y={y}");
            }
        }
    }

    #[test]
    fn lsv_inverse_is_relatively_accurate_near_zero() {
        let g = lsv(0.5);
        for &y in &[1e-8, 1e-12, 1e-20] {
            let x = g.left_inverse(y).unwrap();
            assert!(((g.eval(x).unwrap() - y) / y).abs() < 1e-14);
        }
    }

    #[test]
    fn farey_reference_values() {
        let f = Farey::new(2.0).unwrap();
        assert_eq!(f.eval(1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(f.eval(0.25).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(f.eval(1.0 / 9.0).unwrap(), 0.25, epsilon = 1e-15);
        assert_eq!(f.eval(0.0).unwrap(), 0.0);
        assert!(Farey::new(1.0).is_err());
        assert!(f.eval(1.01).is_err());
        assert_abs_diff_eq!(f.gap(1), 0.75, epsilon = 1e-16);
    }

    #[test]
    fn farey_general_gap_matches_difference() {
        let f = Farey::<f64>::new(2.5).unwrap();
        for n in [1u64, 2, 10, 1000] {
            let diff = f.t(n) - f.t(n + 1);
            assert!((f.gap(n) - diff).abs() <= 1e-12 * diff);
        }
    }

    #[test]
    fn farey_branch_cover() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for &theta in &[2.0, 1.5, 3.3] {
            let f = Farey::new(theta).unwrap();
            for _ in 0..10_000 {
                let x = 1.0 - f64::unit(&mut rng);
                let n = f.branch_index(x);
                assert!(f.t(n + 1) < x && x <= f.t(n), "θ={theta} x={x} n={n}");
            }
        }
    }

    #[test]
    fn farey_neutral_inverse_round_trip() {
        let f = Farey::new(2.0).unwrap();
        for i in 1..1000 {
            let y = i as f64 / 1000.0;
            let x = f.neutral_inverse(y);
            assert!(x <= f.neutral_edge());
            assert_abs_diff_eq!(f.eval(x).unwrap(), y, epsilon = 1e-14);
        }
        let s = f.preimages(5);
        assert_eq!(s[0], 1.0);
        assert_abs_diff_eq!(s[1], 0.25);
        assert_abs_diff_eq!(f.neutral_inverse(1.0), 0.25, epsilon = 1e-16);
    }

    #[test]
    fn solenoid_reference_values() {
        let s = Solenoid::new(0.5, 0.2).unwrap();
        let p = s
            .eval(Point2::new(0.0, Complex::new(0.0, 0.0)).unwrap())
            .unwrap();
        assert_eq!(p.x, 0.0);
        assert_abs_diff_eq!(p.z.re, 0.5);
        assert_abs_diff_eq!(p.z.im, 0.0);

        let p = s
            .eval(Point2::new(0.75, Complex::new(0.0, 0.0)).unwrap())
            .unwrap();
        assert_eq!(p.x, 0.5);
        assert_abs_diff_eq!(p.z.re, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.z.im, -0.5, epsilon = 1e-15);

        let p = s
            .eval(Point2::new(0.25, Complex::new(0.1, 0.0)).unwrap())
            .unwrap();
        assert_abs_diff_eq!(p.x, 0.426_776_695_296_636_9, epsilon = 1e-15);
        assert_abs_diff_eq!(p.z.re, 0.02, epsilon = 1e-15);
        assert_abs_diff_eq!(p.z.im, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn solenoid_parameter_threshold() {
        for &alpha in &[0.2, 0.5, 0.8] {
            let edge = 1.0 / (3.0 + alpha);
            assert!(Solenoid::new(alpha, edge).is_err());
            assert!(Solenoid::new(alpha, edge * 1.0001).is_err());
            assert!(Solenoid::new(alpha, edge * 0.9999).is_ok());
        }
        assert!(Solenoid::new(0.5, 0.0).is_err());
        assert!(Point2::new(0.5, Complex::new(0.8, 0.8)).is_err());
    }

    #[test]
    fn rotation_reference_values() {
        let r = Rotation::new(0.5).unwrap();
        assert_eq!(r.eval(0.0).unwrap(), 0.5);
        assert_eq!(r.eval(0.75).unwrap(), 0.25);
        assert!(r.eval(1.0).is_err());
        let g = Rotation::<f64>::golden();
        let expected = (0.1 + (5f64.sqrt() - 1.0) / 2.0) % 1.0;
        assert_abs_diff_eq!(g.eval(0.1).unwrap(), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(g.eval(0.1).unwrap(), 0.718_034, epsilon = 1e-6);
    }

    #[test]
    fn rotation_orbit_equidistributes() {
        let g = Rotation::<f64>::golden();
        let bins = 20;
        let steps = 1_000_000;
        let mut counts = vec![0u64; bins];
        let mut x = 0.123;
        for _ in 0..steps {
            x = g.apply(x);
            counts[(x * bins as f64) as usize] += 1;
        }
        let expect = steps as f64 / bins as f64;
        let sd = (expect * (1.0 - 1.0 / bins as f64)).sqrt();
        for c in counts {
            assert!((c as f64 - expect).abs() < 4.0 * sd, "{c} vs {expect}");
        }
    }

    #[test]
    fn single_precision_smoke() {
        let g = Lsv::<f32>::new(0.5).unwrap();
        assert!((g.eval(0.25f32).unwrap() - 0.426_776_7).abs() < 1e-6);
        let x = g.left_inverse(0.5f32).unwrap();
        assert!((g.eval(x).unwrap() - 0.5).abs() < 1e-6);
        let f = Farey::<f32>::new(2.0).unwrap();
        assert!((f.eval(0.25f32).unwrap() - 1.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn solenoid_contracts_fibres(x in 0.0f64..=1.0, a in -0.5f64..0.5, b in -0.5f64..0.5,
                                     c in -0.5f64..0.5, d in -0.5f64..0.5) {
            let s = Solenoid::new(0.5, 0.2).unwrap();
            let p = Point2::new(x, Complex::new(a, b)).unwrap();
            let q = Point2::new(x, Complex::new(c, d)).unwrap();
            let before = (p.z - q.z).norm();
            let after = (s.eval(p).unwrap().z - s.eval(q).unwrap().z).norm();
            prop_assert!((after - 0.2 * before).abs() <= 1e-14);
        }

        #[test]
        fn solenoid_stays_in_disk(x in 0.0f64..=1.0, r in 0.0f64..=1.0, phi in 0.0f64..6.3) {
            let s = Solenoid::new(0.7, 0.25).unwrap();
            let p = Point2::new(x, Complex::from_polar(r, phi)).unwrap();
            let q = s.eval(p).unwrap();
            prop_assert!(q.z.norm() <= 0.25 + 0.5 + 1e-15);
        }
    }
}
