//! Potentials in normal form `φ(x) = φ(0) + c x^γ + h(x) x^γ`, with
//! `h(0) = 0` and `x h'(x) → 0`.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bounds::{gap_max, sup_on_interval, SupBound};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::mp_map::MpMap;

pub type Func = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Smallest abscissa used by grid bounds; below it only limits are used.
pub const GRID_FLOOR: f64 = 1e-300;

#[derive(Clone)]
pub struct PotentialSpec {
    pub name: String,
    pub value_at_zero: f64,
    pub gamma: f64,
    pub c: f64,
    /// The `α` the potential was built for, when it depends on one.
    pub alpha: Option<f64>,
    h: Func,
    deriv: Func,
    direct: Option<Func>,
    h_bound: Option<Func>,
}

impl fmt::Debug for PotentialSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PotentialSpec")
            .field("name", &self.name)
            .field("value_at_zero", &self.value_at_zero)
            .field("gamma", &self.gamma)
            .field("c", &self.c)
            .field("alpha", &self.alpha)
            .finish()
    }
}

fn func(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Func {
    Arc::new(f)
}

/// `u - log(1 + u)` without cancellation for small `u`.
fn u_minus_log1p(u: f64) -> f64 {
    if u.abs() < 1e-3 {
        let mut term = u * u / 2.0;
        let mut acc: f64 = 0.0;
        let mut k = 2.0;
        while term.abs() > 1e-18 * acc.abs().max(1e-300) {
            acc += term;
            term *= -u * k / (k + 1.0);
            k += 1.0;
        }
        acc
    } else {
        u - u.ln_1p()
    }
}

fn x1_of(alpha: f64) -> Result<f64> {
    Ok(MpMap::new(alpha)?.x1())
}

impl PotentialSpec {
    /// Builds a potential from its normal form; the derivative must be given.
    pub fn from_parts(
        name: impl Into<String>,
        value_at_zero: f64,
        gamma: f64,
        c: f64,
        h: impl Fn(f64) -> f64 + Send + Sync + 'static,
        deriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
        }
        if !(value_at_zero.is_finite() && c.is_finite()) {
            return Err(Error::InvalidParameter("phi0 and c must be finite".into()));
        }
        Ok(Self {
            name: name.into(),
            value_at_zero,
            gamma,
            c,
            alpha: None,
            h: func(h),
            deriv: func(deriv),
            direct: None,
            h_bound: None,
        })
    }

    fn with_direct(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.direct = Some(func(f));
        self
    }

    /// Attaches a certified bound `u ↦ sup_{(0,u]} |h|`.
    pub fn with_h_bound(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.h_bound = Some(func(f));
        self
    }

    fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = Some(alpha);
        self
    }

    pub fn zero() -> Self {
        Self::constant(0.0).renamed("zero")
    }

    pub fn constant(kappa: f64) -> Self {
        Self::from_parts(format!("const({kappa})"), kappa, 1.0, 0.0, |_| 0.0, |_| 0.0)
            .expect("constant potential")
            .with_direct(move |_| kappa)
            .with_h_bound(|_| 0.0)
    }

    /// `-x^γ`.
    pub fn omega(gamma: f64) -> Result<Self> {
        Ok(Self::from_parts(
            format!("omega({gamma})"),
            0.0,
            gamma,
            -1.0,
            |_| 0.0,
            move |x| -gamma * x.powf(gamma - 1.0),
        )?
        .with_direct(move |x| -x.powf(gamma))
        .with_h_bound(|_| 0.0))
    }

    /// `-log Df = -log(1 + (1+α) x^α)`.
    pub fn geometric(alpha: f64) -> Result<Self> {
        let k = 1.0 + alpha;
        Ok(Self::from_parts(
            "geometric",
            0.0,
            alpha,
            -k,
            move |x| {
                let xa = x.powf(alpha);
                if xa == 0.0 {
                    0.0
                } else {
                    u_minus_log1p(k * xa) / xa
                }
            },
            move |x| -k * alpha * x.powf(alpha - 1.0) / (1.0 + k * x.powf(alpha)),
        )?
        .with_direct(move |x| -(k * x.powf(alpha)).ln_1p())
        .with_h_bound(move |u| k * k * u.powf(alpha) / 2.0)
        .with_alpha(alpha))
    }

    /// `-x^α (1 - x)`.
    pub fn hat(alpha: f64) -> Result<Self> {
        Ok(Self::from_parts(
            "hat",
            0.0,
            alpha,
            -1.0,
            |x| x,
            move |x| -alpha * x.powf(alpha - 1.0) + (alpha + 1.0) * x.powf(alpha),
        )?
        .with_direct(move |x| -x.powf(alpha) * (1.0 - x))
        .with_h_bound(|u| u)
        .with_alpha(alpha))
    }

    /// `-x^α (x - x₁)²`, which vanishes at `0` and at `x₁`.
    pub fn psi(alpha: f64) -> Result<Self> {
        let x1 = x1_of(alpha)?;
        Ok(Self::from_parts(
            "psi",
            0.0,
            alpha,
            -x1 * x1,
            move |x| x * (2.0 * x1 - x),
            move |x| {
                let d = x - x1;
                -alpha * x.powf(alpha - 1.0) * d * d - 2.0 * x.powf(alpha) * d
            },
        )?
        .with_direct(move |x| -x.powf(alpha) * (x - x1) * (x - x1))
        .with_h_bound(move |u| 2.0 * x1 * u + u * u)
        .with_alpha(alpha))
    }

    /// `x^γ / (log x - x)`, extended by `0` at `0`.
    pub fn tilde(gamma: f64) -> Result<Self> {
        Ok(Self::from_parts(
            format!("tilde({gamma})"),
            0.0,
            gamma,
            0.0,
            |x| if x > 0.0 { 1.0 / (x.ln() - x) } else { 0.0 },
            move |x| {
                let d = x.ln() - x;
                gamma * x.powf(gamma - 1.0) / d - x.powf(gamma) * (1.0 / x - 1.0) / (d * d)
            },
        )?
        .with_direct(move |x| if x > 0.0 { x.powf(gamma) / (x.ln() - x) } else { 0.0 })
        .with_h_bound(|u| if u < 1.0 { 1.0 / u.ln().abs() } else { f64::INFINITY }))
    }

    /// `φ(0) + (c + Σ_k a_k x^k) x^γ` with `k ≥ 1`.
    pub fn polynomial(name: impl Into<String>, phi0: f64, gamma: f64, c: f64, coeffs: Vec<f64>) -> Result<Self> {
        let hc = coeffs.clone();
        let dc = coeffs.clone();
        let bc: Vec<f64> = coeffs.iter().map(|a| a.abs()).collect();
        Ok(Self::from_parts(
            name,
            phi0,
            gamma,
            c,
            move |x| hc.iter().rev().fold(0.0, |acc, &a| (acc + a) * x),
            move |x| {
                // φ' = γ (c + h) x^{γ-1} + h' x^γ
                let mut h = 0.0;
                let mut dh = 0.0;
                for (k, &a) in dc.iter().enumerate() {
                    let p = (k + 1) as f64;
                    h += a * x.powf(p);
                    dh += a * p * x.powf(p - 1.0);
                }
                gamma * (c + h) * x.powf(gamma - 1.0) + dh * x.powf(gamma)
            },
        )?
        .with_h_bound(move |u| {
            let s: f64 = bc.iter().enumerate().map(|(k, a)| a * u.powi(k as i32 + 1)).sum();
            s * (1.0 + 8.0 * f64::EPSILON)
        }))
    }

    /// Builds a potential from an expression for `h`.
    pub fn from_expression(name: impl Into<String>, phi0: f64, gamma: f64, c: f64, h_src: &str) -> Result<Self> {
        let h = Expr::parse(h_src)?;
        let dh = h.derivative();
        let probe = h.eval(2f64.powi(-50));
        if !(probe.abs() < 1e-6) {
            return Err(Error::InvalidParameter(format!(
                "h must vanish at 0; h(2^-50) = {probe}"
            )));
        }
        let he = h.clone();
        Self::from_parts(
            name,
            phi0,
            gamma,
            c,
            move |x| if x > 0.0 { he.eval(x) } else { 0.0 },
            move |x| gamma * (c + h.eval(x)) * x.powf(gamma - 1.0) + dh.eval(x) * x.powf(gamma),
        )
    }

    /// Loads a JSON potential file `{name, alpha, gamma, phi0, c, h}`.
    pub fn from_json_str(src: &str) -> Result<Self> {
        let file: PotentialFile =
            serde_json::from_str(src).map_err(|e| Error::Parse(format!("potential file: {e}")))?;
        let mut p = Self::from_expression(file.name, file.phi0, file.gamma, file.c, &file.h)?;
        p.alpha = file.alpha;
        Ok(p)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&src)
    }

    /// Resolves a built-in by name: `zero`, `const:κ`, `omega:γ`, `geometric`,
    /// `hat`, `psi`, `tilde:γ`.
    pub fn builtin(name: &str, alpha: f64) -> Result<Self> {
        let (head, arg) = match name.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (name, None),
        };
        let num = |a: Option<&str>| -> Result<f64> {
            a.ok_or_else(|| Error::Parse(format!("{head} needs a parameter, e.g. {head}:1")))?
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad parameter in {name:?}")))
        };
        match head {
            "zero" => Ok(Self::zero()),
            "const" => Ok(Self::constant(num(arg)?)),
            "omega" => Self::omega(num(arg)?),
            "geometric" => Self::geometric(alpha),
            "hat" => Self::hat(alpha),
            "psi" => Self::psi(alpha),
            "tilde" => Self::tilde(num(arg)?),
            _ => Err(Error::Parse(format!("unknown potential {name:?}"))),
        }
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// `β φ`.
    pub fn scaled(&self, beta: f64) -> Self {
        let h = self.h.clone();
        let d = self.deriv.clone();
        Self {
            name: format!("{}*{beta}", self.name),
            value_at_zero: beta * self.value_at_zero,
            gamma: self.gamma,
            c: beta * self.c,
            alpha: self.alpha,
            h: func(move |x| beta * h(x)),
            deriv: func(move |x| beta * d(x)),
            direct: self.direct.clone().map(|f| func(move |x| beta * f(x))),
            h_bound: self.h_bound.clone().map(|f| func(move |u| beta.abs() * f(u))),
        }
    }

    /// `φ + κ`.
    pub fn shifted(&self, kappa: f64) -> Self {
        let mut out = self.clone();
        out.name = format!("{}+{kappa}", self.name);
        out.value_at_zero += kappa;
        out.direct = self.direct.clone().map(|f| func(move |x| f(x) + kappa));
        out
    }

    /// `φ(x)` for `x ∈ [0, 1]`.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::InvalidParameter(format!("point {x} outside [0, 1]")));
        }
        Ok(self.value(x))
    }

    /// `φ(x)` without domain checks.
    #[inline]
    pub fn value(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return self.value_at_zero;
        }
        match &self.direct {
            Some(f) => f(x),
            None => self.value_at_zero + self.excess(x),
        }
    }

    /// `φ(x) - φ(0)`, computed from the normal form.
    #[inline]
    pub fn excess(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        (self.c + (self.h)(x)) * x.powf(self.gamma)
    }

    /// `(φ(x) - φ(0)) / x^γ = c + h(x)`.
    #[inline]
    pub fn ratio(&self, x: f64) -> f64 {
        self.c + (self.h)(x)
    }

    #[inline]
    pub fn h(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else {
            (self.h)(x)
        }
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        (self.deriv)(x)
    }

    /// Certified `sup_{(0,u]} |h|`, when one is known.
    pub fn h_bound(&self, u: f64) -> Option<f64> {
        self.h_bound.as_ref().map(|f| f(u))
    }

    pub fn is_constant(&self) -> bool {
        self.direct.is_some() && self.c == 0.0 && self.h_bound.as_ref().is_some_and(|f| f(1.0) == 0.0)
    }

    /// `Σ_{k<n} φ(f^k x)`.
    pub fn birkhoff_sum(&self, map: &MpMap, x: f64, n: usize) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::InvalidParameter(format!("point {x} outside [0, 1]")));
        }
        let mut z = x;
        let mut s = 0.0;
        for _ in 0..n {
            s += self.value(z);
            z = map.fwd(z);
        }
        Ok(s)
    }

    /// Bounds for the sup norm and the seminorm `sup |φ'(x)| / (γ x^{γ-1})`.
    pub fn norms(&self) -> Result<Norms> {
        if self.is_constant() {
            let v = self.value_at_zero.abs();
            return Ok(Norms {
                sup: SupBound { lower: v, upper: v },
                semi: SupBound { lower: 0.0, upper: 0.0 },
            });
        }
        let g = self.gamma;
        let t_lo = GRID_FLOOR.ln();
        let semi_f = |t: f64| {
            let x = t.exp();
            self.derivative(x).abs() / (g * x.powf(g - 1.0))
        };
        let mut semi = sup_on_interval(&semi_f, t_lo, 0.0, 1e-10)?;
        // The ratio tends to |c| as x → 0.
        semi.lower = semi.lower.max(self.c.abs());
        semi.upper = semi.upper.max(self.c.abs());
        let sup_f = |t: f64| self.value(t.exp()).abs();
        let mut sup = sup_on_interval(&sup_f, t_lo, 0.0, 1e-10)?;
        let v0 = self.value_at_zero.abs();
        sup.lower = sup.lower.max(v0);
        // On (0, floor] the value moves at most |φ|_{1,γ} floor^γ away from φ(0).
        sup.upper = sup.upper.max(v0 + semi.upper * GRID_FLOOR.powf(g));
        Ok(Norms { sup, semi })
    }

    /// Bounds for `sup_{[0,1]} φ`.
    pub fn value_sup(&self) -> Result<SupBound> {
        if self.is_constant() {
            let v = self.value_at_zero;
            return Ok(SupBound { lower: v, upper: v });
        }
        // Work with φ − φ(0) so that shifts move the bound exactly.
        let f = |t: f64| self.excess(t.exp());
        let s = sup_on_interval(&f, GRID_FLOOR.ln(), 0.0, 1e-10)?;
        let semi = self.norms()?.semi.upper;
        let v0 = self.value_at_zero;
        Ok(SupBound {
            lower: v0 + s.lower.max(0.0),
            upper: v0 + s.upper.max(semi * GRID_FLOOR.powf(self.gamma)),
        })
    }

    /// Bounds for `sup_{(0,u]} (φ(x) - φ(0)) / x^γ`.
    pub fn ratio_sup(&self, u: f64) -> Result<RatioSup> {
        if !(u > 0.0 && u <= 1.0) {
            return Err(Error::InvalidParameter(format!("ratio_sup needs u in (0, 1], got {u}")));
        }
        let f = |t: f64| self.ratio(t.exp());
        let t_lo = GRID_FLOOR.ln();
        let grid = sup_on_interval(&f, t_lo, u.ln(), 1e-12)?;
        let (tail, certified) = match self.h_bound(GRID_FLOOR) {
            Some(b) => (self.c + b, true),
            None => (self.c.max(self.ratio(GRID_FLOOR)), false),
        };
        Ok(RatioSup {
            lower: grid.lower.max(self.c),
            upper: grid.upper.max(tail),
            certified,
        })
    }

    /// Certified sup of `φ` over `[a, b] ⊂ [0, 1]` from the end values and
    /// the seminorm bound `semi`.
    pub fn interval_sup(&self, a: f64, b: f64, semi: f64) -> f64 {
        let g = self.gamma;
        gap_max(self.value(a), self.value(b), semi * (b.powf(g) - a.powf(g)).abs())
    }
}

/// Sup norm and seminorm bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Norms {
    pub sup: SupBound,
    pub semi: SupBound,
}

impl Norms {
    /// Upper bound for `‖φ‖_{1,γ}`.
    pub fn full_upper(&self) -> f64 {
        self.sup.upper + self.semi.upper
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioSup {
    pub lower: f64,
    pub upper: f64,
    /// False when the region near `0` relied on sampling rather than a bound on `h`.
    pub certified: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PotentialFile {
    pub name: String,
    #[serde(default)]
    pub alpha: Option<f64>,
    pub gamma: f64,
    pub phi0: f64,
    pub c: f64,
    pub h: String,
}

/// Richardson estimate of `lim φ'(x) / (γ x^{γ-1})` with an error bar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientEstimate {
    pub value: f64,
    pub error: f64,
}

/// Estimates the leading coefficient from samples of `φ'` at `x = 2^{-k}`,
/// `k = 10..40`, with order-1 Richardson extrapolation.
pub fn leading_coefficient(deriv: &dyn Fn(f64) -> f64, gamma: f64) -> Result<CoefficientEstimate> {
    let r: Vec<f64> = (10..=40)
        .map(|k| {
            let x = 2f64.powi(-k);
            deriv(x) / (gamma * x.powf(gamma - 1.0))
        })
        .collect();
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonConvergent("non-finite derivative ratio".into()));
    }
    let ext: Vec<f64> = r.windows(2).map(|w| 2.0 * w[1] - w[0]).collect();
    let n = ext.len();
    let value = ext[n - 1];
    let d1 = (ext[n - 1] - ext[n - 2]).abs();
    let d2 = (ext[n - 2] - ext[n - 3]).abs();
    let floor = 1e-12 * value.abs().max(1.0);
    let error = if d1 <= floor {
        floor + d1
    } else {
        let q = if d2 > 0.0 { d1 / d2 } else { 1.0 };
        if q >= 0.95 {
            return Err(Error::NonConvergent(format!(
                "extrapolants drift (last step {d1:e}, ratio {q:.3})"
            )));
        }
        d1 * q / (1.0 - q) + floor
    };
    if error > 1e-4 * value.abs().max(1.0) {
        return Err(Error::NonConvergent(format!(
            "error bar {error:e} too large for estimate {value}"
        )));
    }
    Ok(CoefficientEstimate { value, error })
}

impl PotentialSpec {
    pub fn leading_coefficient(&self) -> Result<CoefficientEstimate> {
        leading_coefficient(&|x| self.derivative(x), self.gamma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn builtins(alpha: f64) -> Vec<PotentialSpec> {
        vec![
            PotentialSpec::zero(),
            PotentialSpec::constant(0.3),
            PotentialSpec::omega(0.5).unwrap(),
            PotentialSpec::omega(2.0).unwrap(),
            PotentialSpec::geometric(alpha).unwrap(),
            PotentialSpec::hat(alpha).unwrap(),
            PotentialSpec::psi(alpha).unwrap(),
            PotentialSpec::tilde(1.0).unwrap(),
        ]
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(PotentialSpec::omega(2.0).unwrap().evaluate(0.5).unwrap(), -0.25);
        for alpha in [0.5, 1.0, 2.0] {
            assert_eq!(PotentialSpec::geometric(alpha).unwrap().evaluate(0.0).unwrap(), 0.0);
            assert_eq!(PotentialSpec::hat(alpha).unwrap().evaluate(1.0).unwrap(), 0.0);
        }
        assert_eq!(PotentialSpec::tilde(1.0).unwrap().evaluate(0.0).unwrap(), 0.0);
        assert!(PotentialSpec::zero().evaluate(1.2).is_err());
    }

    #[test]
    fn normal_form_round_trip() {
        for alpha in [0.5, 1.0, 2.0] {
            for p in builtins(alpha) {
                for i in 1..=1000 {
                    let x = i as f64 / 1000.0;
                    let nf = p.value_at_zero + p.excess(x);
                    assert!((nf - p.value(x)).abs() < 1e-10, "{} at {x}", p.name);
                }
            }
        }
    }

    #[test]
    fn correction_vanishes_at_zero() {
        for p in builtins(1.0) {
            let mut prev = f64::INFINITY;
            for k in 1..=8 {
                let x = 10f64.powi(-k);
                let hx = p.h(x).abs();
                let dh = {
                    let e = 1e-3 * x;
                    (p.h(x + e) - p.h(x - e)) / (2.0 * e)
                };
                assert!(hx <= prev + 1e-15, "{}", p.name);
                prev = hx;
                if k == 8 {
                    assert!(hx < 0.07 && (x * dh).abs() < 0.01, "{}: h={hx}", p.name);
                }
            }
        }
    }

    #[test]
    fn leading_coefficients_of_builtins() {
        for alpha in [0.5, 1.0, 2.0] {
            let cases = [
                (PotentialSpec::omega(alpha).unwrap(), -1.0),
                (PotentialSpec::geometric(alpha).unwrap(), -(alpha + 1.0)),
                (PotentialSpec::hat(alpha).unwrap(), -1.0),
                (PotentialSpec::psi(alpha).unwrap(), -x1_of(alpha).unwrap().powi(2)),
            ];
            for (p, c) in cases {
                let est = p.leading_coefficient().unwrap();
                assert!((est.value - c).abs() <= est.error.max(1e-9), "{} {alpha}: {est:?}", p.name);
                assert!((est.value - p.c).abs() <= est.error.max(1e-9));
            }
        }
        // Logarithmic convergence is reported, not accepted.
        assert!(matches!(
            PotentialSpec::tilde(1.0).unwrap().leading_coefficient(),
            Err(Error::NonConvergent(_))
        ));
        // A wrong exponent makes the ratio blow up.
        let p = PotentialSpec::omega(1.0).unwrap();
        assert!(leading_coefficient(&|x| p.derivative(x), 2.0).is_err());
    }

    #[test]
    fn norms_of_builtins() {
        let n = PotentialSpec::omega(1.5).unwrap().norms().unwrap();
        assert_eq!(n.sup.lower, 1.0);
        assert!(n.sup.upper - 1.0 < 1e-8);
        assert!((n.semi.lower - 1.0).abs() < 1e-12 && (n.semi.upper - 1.0).abs() < 1e-12);

        let n = PotentialSpec::geometric(1.0).unwrap().norms().unwrap();
        let log3 = 3f64.ln();
        assert!(n.sup.lower <= log3 + 1e-15 && n.sup.upper >= log3 && n.sup.upper - log3 < 1e-8);
        assert!(n.semi.lower <= 2.0 && n.semi.upper >= 2.0 && n.semi.upper - 2.0 < 1e-8);

        // hat: x(1-x) peaks at 1/2 for α = 1; x²(1-x) peaks at 2/3 for α = 2.
        let n = PotentialSpec::hat(1.0).unwrap().norms().unwrap();
        assert!(n.sup.lower <= 0.25 && n.sup.upper >= 0.25 && n.sup.upper - 0.25 < 1e-8);
        let n = PotentialSpec::hat(2.0).unwrap().norms().unwrap();
        let v = 4.0 / 27.0;
        assert!(n.sup.lower <= v + 1e-15 && n.sup.upper >= v && n.sup.upper - v < 1e-8);

        let n = PotentialSpec::zero().norms().unwrap();
        assert_eq!((n.sup.upper, n.semi.upper), (0.0, 0.0));
    }

    #[test]
    fn norms_bound_dense_grid() {
        for alpha in [0.5, 1.0, 2.0] {
            for p in builtins(alpha) {
                let n = p.norms().unwrap();
                let g = p.gamma;
                for i in 1..=20_000 {
                    let x = i as f64 / 20_000.0;
                    assert!(p.value(x).abs() <= n.sup.upper + 1e-12, "{}", p.name);
                    let r = p.derivative(x).abs() / (g * x.powf(g - 1.0));
                    assert!(r <= n.semi.upper + 1e-9, "{} at {x}: {r} > {}", p.name, n.semi.upper);
                }
            }
        }
    }

    #[test]
    fn ratio_sup_examples() {
        let x1 = x1_of(1.0).unwrap();
        let psi = PotentialSpec::psi(1.0).unwrap();
        let orbit = MpMap::new(1.0).unwrap().marked_points(3).unwrap();
        let r = psi.ratio_sup(orbit.x(2)).unwrap();
        let want = -(orbit.x(2) - x1).powi(2);
        assert!(r.certified && r.lower <= want + 1e-15 && r.upper >= want - 1e-15);
        assert!(r.upper - want < 1e-9);
        let r = PotentialSpec::omega(0.7).unwrap().ratio_sup(0.5).unwrap();
        assert_eq!((r.lower, r.upper), (-1.0, -1.0));
        let r = PotentialSpec::geometric(1.0).unwrap().ratio_sup(1e-4).unwrap();
        assert!(r.upper >= -2.0 && r.upper < -1.999);
    }

    #[test]
    fn birkhoff_examples() {
        let m = MpMap::new(1.0).unwrap();
        let g = PotentialSpec::geometric(1.0).unwrap();
        assert!((g.birkhoff_sum(&m, 0.5, 2).unwrap() + 5f64.ln()).abs() < 1e-14);
        let hat = PotentialSpec::hat(1.0).unwrap();
        assert_eq!(hat.birkhoff_sum(&m, 0.0, 7).unwrap(), 0.0);
        let om = PotentialSpec::omega(1.0).unwrap();
        assert_eq!(om.birkhoff_sum(&m, 1.0, 5).unwrap(), -5.0);
    }

    #[test]
    fn builtin_names_and_files() {
        assert_eq!(PotentialSpec::builtin("omega:2", 1.0).unwrap().gamma, 2.0);
        assert_eq!(PotentialSpec::builtin("const:-0.5", 1.0).unwrap().value(0.3), -0.5);
        assert!(PotentialSpec::builtin("omega", 1.0).is_err());
        assert!(PotentialSpec::builtin("nope", 1.0).is_err());
        let p = PotentialSpec::from_json_str(
            r#"{"name":"q","alpha":1,"gamma":1,"phi0":0.5,"c":-2,"h":"x - x^2/2"}"#,
        )
        .unwrap();
        assert_eq!(p.alpha, Some(1.0));
        assert!((p.value(0.5) - (0.5 + (-2.0 + 0.5 - 0.125) * 0.5)).abs() < 1e-15);
        let est = p.leading_coefficient().unwrap();
        assert!((est.value + 2.0).abs() <= est.error.max(1e-9));
        assert!(PotentialSpec::from_json_str(
            r#"{"name":"q","gamma":1,"phi0":0,"c":-1,"h":"1 + x"}"#
        )
        .is_err());
    }

    #[test]
    fn holder_sanity() {
        for alpha in [0.5, 1.0, 2.0] {
            for p in builtins(alpha) {
                let e = p.gamma.min(1.0);
                let pts: Vec<f64> = (0..=400).map(|i| (i as f64 / 400.0).powi(3)).collect();
                let mut l: f64 = 0.0;
                for (i, &a) in pts.iter().enumerate() {
                    for &b in &pts[i + 1..] {
                        l = l.max((p.value(b) - p.value(a)).abs() / (b - a).powf(e));
                    }
                }
                assert!(l.is_finite() && l < 10.0, "{}: {l}", p.name);
            }
        }
    }

    proptest! {
        #[test]
        fn cocycle_additivity(alpha in 0.3f64..2.5, x in 0.0f64..=1.0, m in 0usize..50, n in 0usize..50) {
            let map = MpMap::new(alpha).unwrap();
            let p = PotentialSpec::geometric(alpha).unwrap();
            let mut z = x;
            for _ in 0..m { z = map.fwd(z); }
            let whole = p.birkhoff_sum(&map, x, m + n).unwrap();
            let split = p.birkhoff_sum(&map, x, m).unwrap() + p.birkhoff_sum(&map, z, n).unwrap();
            prop_assert!((whole - split).abs() <= 1e-12 * (1.0 + whole.abs()));
        }

        #[test]
        fn scaling_and_shift_are_linear(beta in -3.0f64..3.0, kappa in -2.0f64..2.0, x in 0.0f64..=1.0) {
            let p = PotentialSpec::psi(1.0).unwrap();
            let q = p.scaled(beta).shifted(kappa);
            prop_assert!((q.value(x) - (beta * p.value(x) + kappa)).abs() < 1e-14);
            prop_assert!((q.excess(x) - beta * p.excess(x)).abs() < 1e-14);
            prop_assert_eq!(q.value_at_zero, kappa);
        }

        #[test]
        fn polynomial_normal_form(c in -2.0f64..-0.1, a1 in -0.5f64..0.5, a2 in -0.5f64..0.5, x in 0.01f64..1.0) {
            let p = PotentialSpec::polynomial("r", 0.2, 1.0, c, vec![a1, a2]).unwrap();
            let h = a1 * x + a2 * x * x;
            prop_assert!((p.value(x) - (0.2 + (c + h) * x)).abs() < 1e-14);
            let e = 1e-6;
            let fd = (p.value(x + e) - p.value(x - e)) / (2.0 * e);
            prop_assert!((p.derivative(x) - fd).abs() < 1e-6);
            prop_assert!(p.h_bound(x).unwrap() >= h.abs());
        }
    }
}
