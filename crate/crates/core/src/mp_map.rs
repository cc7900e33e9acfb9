//! The Manneville-Pomeau map `f(x) = x(1 + x^α) mod 1` on `[0, 1]`.
//!
//! Two full branches meet at `x₁`, the root of `x(1 + x^α) = 1`. The left
//! branch fixes the neutral point `0`; the right branch fixes `1`. Inverse
//! branches are computed by a safeguarded Newton iteration, which keeps full
//! relative precision for points very close to `0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Residual tolerance of the inverse-branch solver.
pub const DEFAULT_SOLVER_TOL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapParams {
    pub alpha: f64,
    pub solver_tol: f64,
}

impl MapParams {
    pub fn new(alpha: f64) -> Self {
        Self { alpha, solver_tol: DEFAULT_SOLVER_TOL }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PowKind {
    Half,
    One,
    Two,
    General,
}

/// A Manneville-Pomeau map with its turning point `x₁` cached.
#[derive(Debug, Clone)]
pub struct MpMap {
    alpha: f64,
    solver_tol: f64,
    kind: PowKind,
    x1: f64,
}

impl MpMap {
    pub fn new(alpha: f64) -> Result<Self> {
        Self::with_params(MapParams::new(alpha))
    }

    pub fn with_params(params: MapParams) -> Result<Self> {
        let MapParams { alpha, solver_tol } = params;
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
        }
        if !(solver_tol.is_finite() && solver_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "solver_tol must be positive, got {solver_tol}"
            )));
        }
        let kind = if alpha == 0.5 {
            PowKind::Half
        } else if alpha == 1.0 {
            PowKind::One
        } else if alpha == 2.0 {
            PowKind::Two
        } else {
            PowKind::General
        };
        let mut map = Self { alpha, solver_tol, kind, x1: 0.5 };
        map.x1 = map.solve(1.0, 0.0, 0.0, 1.0, 0.6);
        Ok(map)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn solver_tol(&self) -> f64 {
        self.solver_tol
    }

    pub fn params(&self) -> MapParams {
        MapParams { alpha: self.alpha, solver_tol: self.solver_tol }
    }

    /// The point where the two branches meet.
    pub fn x1(&self) -> f64 {
        self.x1
    }

    /// `x^α` for `x ≥ 0`.
    #[inline]
    pub fn pow_a(&self, x: f64) -> f64 {
        match self.kind {
            PowKind::Half => x.sqrt(),
            PowKind::One => x,
            PowKind::Two => x * x,
            PowKind::General => x.powf(self.alpha),
        }
    }

    /// `f(x)` without domain checks.
    #[inline]
    pub fn fwd(&self, x: f64) -> f64 {
        let y = x * (1.0 + self.pow_a(x));
        if y <= 1.0 {
            y
        } else {
            y - 1.0
        }
    }

    /// `f(x)` for `x ∈ [0, 1]`.
    pub fn map_forward(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.fwd(x))
    }

    /// `Df(x) = 1 + (1 + α) x^α`, valid on both branches.
    #[inline]
    pub fn df(&self, x: f64) -> f64 {
        1.0 + (1.0 + self.alpha) * self.pow_a(x)
    }

    pub fn map_derivative(&self, x: f64) -> Result<f64> {
        check_unit(x)?;
        Ok(self.df(x))
    }

    /// Left inverse branch `g₀ : [0, 1] → [0, x₁]`, unchecked.
    #[inline]
    pub fn g0(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        if t >= 1.0 {
            return self.x1;
        }
        let guess = t / (1.0 + self.pow_a(t));
        self.solve(0.0, t, 0.0, t.min(self.x1), guess)
    }

    /// Right inverse branch `g₁ : [0, 1] → [x₁, 1]`, unchecked. `g₁(0)` is the
    /// one-sided limit `x₁`.
    #[inline]
    pub fn g1(&self, t: f64) -> f64 {
        if t >= 1.0 {
            return 1.0;
        }
        if t <= 0.0 {
            return self.x1;
        }
        let guess = self.x1 + t * (1.0 - self.x1);
        self.solve(1.0, t, self.x1, 1.0, guess)
    }

    #[inline]
    pub fn g(&self, branch: u8, t: f64) -> f64 {
        if branch == 0 {
            self.g0(t)
        } else {
            self.g1(t)
        }
    }

    /// Inverse branch `g_branch(t)` with its residual checked against `solver_tol`.
    pub fn inverse_branch(&self, t: f64, branch: u8) -> Result<f64> {
        check_unit(t)?;
        if branch > 1 {
            return Err(Error::InvalidParameter(format!("branch must be 0 or 1, got {branch}")));
        }
        let x = self.g(branch, t);
        let target = if branch == 0 { t } else { 1.0 + t };
        let residual = (x * (1.0 + self.pow_a(x)) - target).abs();
        if !(residual <= self.solver_tol * target.max(1.0)) {
            return Err(Error::SolverFailure(format!(
                "residual {residual:e} at t={t}, branch {branch}"
            )));
        }
        Ok(x)
    }

    /// Solves `x(1 + x^α) = base + t` on `[lo, hi]` by Newton steps that fall
    /// back to bisection when they leave the bracket. The residual is formed
    /// as `x·x^α + ((x - base) - t)`, where the subtractions are exact.
    fn solve(&self, base: f64, t: f64, mut lo: f64, mut hi: f64, mut x: f64) -> f64 {
        for _ in 0..200 {
            let xa = self.pow_a(x);
            let r = x.mul_add(xa, (x - base) - t);
            if r == 0.0 {
                return x;
            }
            if r > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let d = 1.0 + (1.0 + self.alpha) * xa;
            let next = x - r / d;
            if !(next > lo && next < hi) {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    return x;
                }
                x = mid;
                continue;
            }
            if (next - x).abs() <= 4.0 * f64::EPSILON * next.abs() {
                return next;
            }
            x = next;
        }
        x
    }

    /// Binary digit of `x`: `0` on `[0, x₁]`, `1` on `(x₁, 1]`.
    #[inline]
    pub fn digit(&self, x: f64) -> u8 {
        u8::from(x > self.x1)
    }

    /// The first `n` digits of the forward orbit of `x`.
    pub fn itinerary(&self, x: f64, n: usize) -> Result<Vec<u8>> {
        check_unit(x)?;
        let mut out = Vec::with_capacity(n);
        let mut z = x;
        for _ in 0..n {
            out.push(self.digit(z));
            z = self.fwd(z);
        }
        Ok(out)
    }

    /// The cylinder of points whose itinerary starts with `word`.
    pub fn cylinder(&self, word: &[u8]) -> Result<Interval> {
        if word.iter().any(|&d| d > 1) {
            return Err(Error::InvalidParameter("cylinder words use digits 0 and 1".into()));
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for &d in word.iter().rev() {
            lo = self.g(d, lo);
            hi = self.g(d, hi);
        }
        let closed = word.iter().all(|&d| d == 0);
        Ok(Interval { lo, hi, lo_closed: closed, hi_closed: true })
    }

    /// All `2ⁿ` cylinders of length `n` in lexicographic word order.
    pub fn cylinders(&self, n: usize) -> Result<Vec<(Vec<u8>, Interval)>> {
        if n > 24 {
            return Err(Error::DepthExceeded { depth: n, cap: 24 });
        }
        (0..1usize << n)
            .map(|code| {
                let word: Vec<u8> = (0..n).map(|k| ((code >> (n - 1 - k)) & 1) as u8).collect();
                let iv = self.cylinder(&word)?;
                Ok((word, iv))
            })
            .collect()
    }

    /// `log Dfⁿ(x)` accumulated along the forward orbit.
    pub fn log_derivative_along(&self, x: f64, n: usize) -> Result<f64> {
        check_unit(x)?;
        let mut z = x;
        let mut acc = 0.0;
        for _ in 0..n {
            acc += self.df(z).ln();
            z = self.fwd(z);
        }
        Ok(acc)
    }

    /// `Dfⁿ(x)`; overflow is reported with the log-scale value.
    pub fn derivative_along(&self, x: f64, n: usize) -> Result<f64> {
        let log_value = self.log_derivative_along(x, n)?;
        let v = log_value.exp();
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Overflow { log_value })
        }
    }

    /// Cached marked points `x₀..x_N` and `y₁..y_N`.
    pub fn marked_points(&self, n: usize) -> Result<MarkedOrbit> {
        if n == 0 {
            return Err(Error::InvalidParameter("marked_points needs N ≥ 1".into()));
        }
        let mut xs = Vec::with_capacity(n + 1);
        let mut ys = Vec::with_capacity(n);
        xs.push(1.0);
        ys.push(1.0);
        for k in 1..=n {
            let next = self.g0(xs[k - 1]);
            xs.push(next);
            if k < n {
                ys.push(self.g1(next));
            }
        }
        Ok(MarkedOrbit { alpha: self.alpha, xs, ys })
    }
}

fn check_unit(x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("point {x} outside [0, 1]")))
    }
}

/// An interval with explicit open/closed ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo || (self.hi == self.lo && !(self.lo_closed && self.hi_closed))
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed { x >= self.lo } else { x > self.lo };
        let below = if self.hi_closed { x <= self.hi } else { x < self.hi };
        above && below
    }
}

/// Marked points of the left branch (`x₀ = 1`, `x_{j+1} = g₀(x_j)`) and their
/// right-branch preimages (`y_n = g₁(x_{n-1})`).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarkedOrbit {
    pub alpha: f64,
    /// `xs[j] = x_j` for `0 ≤ j ≤ N`.
    pub xs: Vec<f64>,
    /// `ys[n - 1] = y_n` for `1 ≤ n ≤ N`.
    pub ys: Vec<f64>,
}

impl MarkedOrbit {
    pub fn max_index(&self) -> usize {
        self.xs.len() - 1
    }

    pub fn x(&self, j: usize) -> f64 {
        self.xs[j]
    }

    pub fn y(&self, n: usize) -> f64 {
        self.ys[n - 1]
    }

    /// `x_j^{-α}`, which grows like `α j`.
    pub fn big_x(&self, j: usize) -> f64 {
        self.xs[j].powf(-self.alpha)
    }

    /// A lower bound for `x_j^α` when `j ≥ N`, from `X_{j+1} ≤ X_j + α`.
    pub fn x_pow_alpha_lower(&self, j: usize) -> f64 {
        let n = self.max_index();
        debug_assert!(j >= n);
        1.0 / (self.big_x(n) + (j - n) as f64 * self.alpha)
    }

    /// Per-step growth `a` of `X_j` beyond the cache: `X_{j+1} ≥ X_j + a`.
    /// `None` when the second-order bound is not yet positive.
    pub fn tail_growth(&self) -> Option<f64> {
        let a = self.alpha;
        let g = a - a * (a + 1.0) / (2.0 * self.big_x(self.max_index()));
        (g > 0.0).then_some(g)
    }

    /// An upper bound for `x_j^α` when `j ≥ N`.
    pub fn x_pow_alpha_upper(&self, j: usize) -> Option<f64> {
        let n = self.max_index();
        debug_assert!(j >= n);
        let g = self.tail_growth()?;
        Some(1.0 / (self.big_x(n) + (j - n) as f64 * g))
    }

    /// Upper bound for `Σ_{j>N} x_j^γ`, finite only when `γ > α`.
    pub fn tail_power_sum_upper(&self, gamma: f64) -> Option<f64> {
        let s = gamma / self.alpha;
        if s <= 1.0 {
            return None;
        }
        let g = self.tail_growth()?;
        let xn = self.big_x(self.max_index());
        Some(xn.powf(1.0 - s) / (g * (s - 1.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn forward_and_derivative_values() {
        let m = MpMap::new(1.0).unwrap();
        assert_eq!(m.map_forward(0.5).unwrap(), 0.75);
        assert_eq!(m.map_forward(0.0).unwrap(), 0.0);
        assert_eq!(m.map_forward(1.0).unwrap(), 1.0);
        assert_eq!(m.map_derivative(1.0).unwrap(), 3.0);
        assert!((m.map_derivative(m.x1()).unwrap() - 5f64.sqrt()).abs() < 1e-12);
        assert!(m.map_forward(1.5).is_err());
        assert!(MpMap::new(0.0).is_err());
        assert!(MpMap::new(-1.0).is_err());
    }

    #[test]
    fn marked_points_match_bisection_oracle() {
        let m = MpMap::new(1.0).unwrap();
        let x1 = bisect(|x| x + x * x - 1.0, 0.0, 1.0);
        let y2 = bisect(|x| x + x * x - 1.0 - x1, 0.0, 1.0);
        let x2 = bisect(|x| x + x * x - x1, 0.0, 1.0);
        let y3 = bisect(|x| x + x * x - 1.0 - x2, 0.0, 1.0);
        assert!((x1 - 0.618034).abs() < 1e-6);
        assert!((y2 - 0.866760).abs() < 1e-6);
        assert!((x2 - 0.431683).abs() < 1e-6);
        assert!((y3 - 0.796797).abs() < 1e-6);
        assert!((m.x1() - x1).abs() < 1e-15);
        assert!((m.inverse_branch(1.0, 0).unwrap() - x1).abs() < 1e-15);
        assert!((m.inverse_branch(x1, 1).unwrap() - y2).abs() < 1e-15);
        let orbit = m.marked_points(3).unwrap();
        assert_eq!(orbit.x(0), 1.0);
        assert_eq!(orbit.y(1), 1.0);
        assert!((orbit.x(2) - x2).abs() < 1e-15);
        assert!((orbit.y(2) - y2).abs() < 1e-15);
        assert!((orbit.y(3) - y3).abs() < 1e-15);
    }

    #[test]
    fn general_alpha_inverse_matches_bisection() {
        for &alpha in &[0.3, 0.5, 1.7, 2.0, 3.5] {
            let m = MpMap::new(alpha).unwrap();
            for &t in &[1e-9, 0.01, 0.3, 0.77, 1.0] {
                let a = bisect(|x| x * (1.0 + x.powf(alpha)) - t, 0.0, 1.0);
                let b = bisect(|x| x * (1.0 + x.powf(alpha)) - 1.0 - t, 0.0, 1.0);
                let ga = m.inverse_branch(t, 0).unwrap();
                let gb = m.inverse_branch(t, 1).unwrap();
                assert!((ga - a).abs() <= 1e-15 * a, "alpha={alpha} t={t}: {ga} vs {a}");
                assert!((gb - b).abs() < 1e-15, "alpha={alpha} t={t}: {gb} vs {b}");
            }
        }
    }

    #[test]
    fn marked_asymptotics_at_large_index() {
        let m = MpMap::new(1.0).unwrap();
        let orbit = m.marked_points(10_000).unwrap();
        assert!((10_000.0 * orbit.x(10_000) - 1.0).abs() <= 0.01);
    }

    #[test]
    fn tail_bounds_bracket_true_marked_points() {
        for &alpha in &[0.5, 1.0, 2.0] {
            let m = MpMap::new(alpha).unwrap();
            let short = m.marked_points(200).unwrap();
            let long = m.marked_points(2000).unwrap();
            for j in [200, 201, 500, 2000] {
                let xa = m.pow_a(long.x(j));
                assert!(short.x_pow_alpha_lower(j) <= xa * (1.0 + 1e-12));
                assert!(short.x_pow_alpha_upper(j).unwrap() >= xa * (1.0 - 1e-12));
            }
        }
    }

    #[test]
    fn cylinders_and_itineraries() {
        let m = MpMap::new(1.0).unwrap();
        let c0 = m.cylinder(&[0]).unwrap();
        assert_eq!((c0.lo, c0.lo_closed, c0.hi_closed), (0.0, true, true));
        assert!((c0.hi - m.x1()).abs() < 1e-15);
        let c10 = m.cylinder(&[1, 0]).unwrap();
        assert!((c10.lo - m.x1()).abs() < 1e-15 && !c10.lo_closed);
        assert!((c10.hi - 0.866760).abs() < 1e-6);
        assert_eq!(m.itinerary(0.5, 2).unwrap(), vec![0, 1]);
        assert!((m.derivative_along(1.0, 3).unwrap() - 27.0).abs() < 1e-12);
        assert!((m.log_derivative_along(1.0, 3).unwrap() - 27f64.ln()).abs() < 1e-12);
        match m.derivative_along(1.0, 1000) {
            Err(Error::Overflow { log_value }) => {
                assert!((log_value - 1000.0 * 3f64.ln()).abs() < 1e-8)
            }
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn cylinder_lengths_sum_to_one() {
        for &alpha in &[0.5, 1.0, 2.0] {
            let m = MpMap::new(alpha).unwrap();
            for n in [1usize, 5, 10, 14] {
                let total: f64 = m.cylinders(n).unwrap().iter().map(|(_, iv)| iv.len()).sum();
                assert!((total - 1.0).abs() < 1e-9, "alpha={alpha} n={n} total={total}");
            }
        }
        assert!(MpMap::new(1.0).unwrap().cylinders(25).is_err());
    }

    proptest! {
        #[test]
        fn inverse_branches_invert_forward(alpha in 0.2f64..3.0, t in 0.0f64..=1.0) {
            let m = MpMap::new(alpha).unwrap();
            let a = m.inverse_branch(t, 0).unwrap();
            let b = m.inverse_branch(t, 1).unwrap();
            prop_assert!(a <= m.x1() && b >= m.x1());
            prop_assert!((m.fwd(a) - t).abs() <= 10.0 * DEFAULT_SOLVER_TOL);
            if t > 0.0 {
                prop_assert!((m.fwd(b) - t).abs() <= 10.0 * DEFAULT_SOLVER_TOL);
            }
        }

        #[test]
        fn point_lies_in_cylinder_of_its_itinerary(alpha in 0.3f64..2.5, x in 0.0f64..=1.0, n in 1usize..10) {
            let m = MpMap::new(alpha).unwrap();
            let word = m.itinerary(x, n).unwrap();
            let iv = m.cylinder(&word).unwrap();
            let slack = 1e-12;
            prop_assert!(x >= iv.lo - slack && x <= iv.hi + slack);
        }

        #[test]
        fn marked_points_decrease(alpha in 0.3f64..3.0) {
            let orbit = MpMap::new(alpha).unwrap().marked_points(300).unwrap();
            for j in 0..300 {
                prop_assert!(orbit.x(j + 1) < orbit.x(j));
            }
            for n in 1..300 {
                prop_assert!(orbit.y(n + 1) < orbit.y(n));
            }
        }
    }
}
