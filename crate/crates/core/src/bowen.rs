//! Pressure as the root in `p` of the two-variable pressure, and the scan in
//! `β` for the phase-transition point.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{DivergenceWitness, Error, Result};
use crate::induced::{FiberTable, Sign, TwoVarPressurePoint};
use crate::potentials::PotentialSpec;
use crate::pressure::{Method, PressureBracket};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BowenParams {
    /// Operator iterations per sign evaluation.
    pub ell: usize,
    /// Target width of the `p` interval.
    pub tol: f64,
    /// Optional starting interval; expanded when it does not straddle the root.
    pub start: Option<(f64, f64)>,
}

impl Default for BowenParams {
    fn default() -> Self {
        Self { ell: 3, tol: 1e-7, start: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowenResult {
    pub bracket: PressureBracket,
    /// True when the interval reached the requested width.
    pub converged: bool,
    /// Every `(p, sign)` evaluated, in order.
    pub trail: Vec<(f64, Sign)>,
}

fn sign_at(fiber: &FiberTable, beta: f64, p: f64, ell: usize, trail: &mut Vec<(f64, Sign)>) -> Result<Sign> {
    let s = fiber.two_variable_pressure(beta, p, ell)?.sign();
    trail.push((p, s));
    Ok(s)
}

/// Brackets `P(βφ)` by bisection on the sign of `𝒫(βφ, p)`: the pressure is
/// at least `p` where the sign is positive and at most `p` where it is not.
pub fn pressure_bowen(fiber: &FiberTable, phi: &PotentialSpec, beta: f64, params: BowenParams) -> Result<BowenResult> {
    if !(beta > 0.0) || !(params.tol > 0.0) {
        return Err(Error::InvalidParameter("pressure_bowen needs β > 0 and tol > 0".into()));
    }
    let ell = params.ell;
    let floor = beta * fiber.phi0;
    let mut trail = Vec::new();
    let mut a = floor;
    let mut b = LN_2 + beta * phi.value_sup()?.upper;
    if let Some((lo, hi)) = params.start {
        if !(lo < hi) {
            return Err(Error::InvalidParameter(format!("empty start interval [{lo}, {hi}]")));
        }
        if lo > floor && sign_at(fiber, beta, lo, ell, &mut trail)? == Sign::Positive {
            a = lo;
        }
        b = hi.max(a);
    }
    let mut ok = false;
    for _ in 0..40 {
        if sign_at(fiber, beta, b, ell, &mut trail)? == Sign::NonPositive {
            ok = true;
            break;
        }
        b += (b - a).max(1.0);
    }
    if !ok {
        return Err(Error::Inconclusive(format!("no p ≤ {b} with certified 𝒫(βφ, p) ≤ 0")));
    }
    let mut converged = true;
    while b - a > params.tol {
        let w = b - a;
        let m = a + 0.5 * w;
        match sign_at(fiber, beta, m, ell, &mut trail)? {
            Sign::Positive => a = m,
            Sign::NonPositive => b = m,
            Sign::Inconclusive => {
                let mut moved = false;
                let q1 = a + 0.25 * w;
                match sign_at(fiber, beta, q1, ell, &mut trail)? {
                    Sign::NonPositive => {
                        b = q1;
                        moved = true;
                    }
                    Sign::Positive => {
                        a = q1;
                        moved = true;
                    }
                    Sign::Inconclusive => {}
                }
                let q3 = a + 0.75 * w;
                if q3 < b {
                    match sign_at(fiber, beta, q3, ell, &mut trail)? {
                        Sign::Positive => {
                            a = q3;
                            moved = true;
                        }
                        Sign::NonPositive => {
                            b = q3;
                            moved = true;
                        }
                        Sign::Inconclusive => {}
                    }
                }
                if !moved {
                    converged = false;
                    break;
                }
            }
        }
    }
    Ok(BowenResult {
        bracket: PressureBracket {
            lo: a.max(floor),
            hi: b,
            depth: ell,
            method: Method::Bowen,
            estimate: None,
            certified: true,
        },
        converged,
        trail,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    TransitionLocated,
    NoSignChangeInRange,
    DivergentEverywhere,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub beta: f64,
    #[serde(with = "crate::ext_float")]
    pub lo: f64,
    #[serde(with = "crate::ext_float")]
    pub hi: f64,
    pub sign: Sign,
    pub divergent: bool,
    pub witness: Option<DivergenceWitness>,
}

impl From<&TwoVarPressurePoint> for ScanPoint {
    fn from(pt: &TwoVarPressurePoint) -> Self {
        Self {
            beta: pt.beta,
            lo: pt.bracket.lo,
            hi: pt.bracket.hi,
            sign: pt.sign(),
            divergent: pt.divergence_flag,
            witness: pt.witness.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionScanResult {
    pub potential: String,
    pub beta_grid: Vec<f64>,
    /// Sign of `𝒫(βφ, βφ(0))` at each grid point.
    pub sign_data: Vec<ScanPoint>,
    /// Points added while narrowing the transition.
    pub refinement: Vec<ScanPoint>,
    pub beta_star: Option<(f64, f64)>,
    pub verdict: Verdict,
    /// No nonpositive sign is followed by a positive one on the grid.
    pub monotone: bool,
}

fn scan_point(fiber: &FiberTable, beta: f64, ell: usize) -> Result<ScanPoint> {
    let pt = fiber.two_variable_pressure(beta, beta * fiber.phi0, ell)?;
    Ok(ScanPoint::from(&pt))
}

/// Evaluates the sign of `𝒫(βφ, βφ(0))` on an even grid over `range` and
/// narrows the first change from positive to nonpositive by bisection.
pub fn transition_scan(
    fiber: &FiberTable,
    name: &str,
    range: (f64, f64),
    grid_size: usize,
    ell: usize,
) -> Result<TransitionScanResult> {
    let (lo, hi) = range;
    if !(lo > 0.0 && hi > lo) || grid_size < 2 {
        return Err(Error::InvalidParameter(format!(
            "scan needs 0 < lo < hi and at least 2 grid points, got [{lo}, {hi}] x {grid_size}"
        )));
    }
    let betas: Vec<f64> = (0..grid_size)
        .map(|i| lo + (hi - lo) * i as f64 / (grid_size - 1) as f64)
        .collect();
    let points: Vec<ScanPoint> = betas.iter().map(|&b| scan_point(fiber, b, ell)).collect::<Result<_>>()?;
    let first_nonpos = points.iter().position(|p| p.sign == Sign::NonPositive);
    let monotone = match first_nonpos {
        Some(i) => points[i..].iter().all(|p| p.sign != Sign::Positive),
        None => true,
    };
    let mut refinement = Vec::new();
    let mut beta_star = None;
    let verdict = if points.iter().all(|p| p.divergent) {
        Verdict::DivergentEverywhere
    } else if let Some(i) = first_nonpos.filter(|&i| points[..i].iter().any(|p| p.sign == Sign::Positive)) {
        let j = points[..i].iter().rposition(|p| p.sign == Sign::Positive).unwrap();
        let (mut a, mut b) = (points[j].beta, points[i].beta);
        let target = (hi - lo) / grid_size as f64 / 8.0;
        while b - a > target {
            let w = b - a;
            let mut moved = false;
            for frac in [0.5, 0.25, 0.75] {
                let m = a + frac * w;
                if m <= a || m >= b {
                    continue;
                }
                let pt = scan_point(fiber, m, ell)?;
                let s = pt.sign;
                refinement.push(pt);
                match s {
                    Sign::Positive => {
                        a = m;
                        moved = true;
                    }
                    Sign::NonPositive => {
                        b = m;
                        moved = true;
                    }
                    Sign::Inconclusive => continue,
                }
                break;
            }
            if !moved {
                break;
            }
        }
        beta_star = Some((a, b));
        Verdict::TransitionLocated
    } else {
        Verdict::NoSignChangeInRange
    };
    Ok(TransitionScanResult {
        potential: name.to_string(),
        beta_grid: betas,
        sign_data: points,
        refinement,
        beta_star,
        verdict,
        monotone,
    })
}
