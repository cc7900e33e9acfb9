//! The first-return system on `J₀ = (x₁, 1]`.
//!
//! A point of `Iₙ = (y_{n+1}, yₙ]` returns to `J₀` after `n` steps through the
//! branch `hₙ = g₁ ∘ g₀^{n-1}`. The two-variable pressure is bracketed by
//! iterating the induced transfer operator on a grid over `J₀`, with cell
//! bounds from a uniform log-Lipschitz constant and a certified tail for
//! return times beyond the truncation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{gap_max, gap_min};
use crate::error::{DivergenceWitness, Error, Result};
use crate::mp_map::{Interval, MarkedOrbit, MpMap};
use crate::potentials::PotentialSpec;
use crate::pressure::{Method, PressureBracket};

pub const DEFAULT_GRID: usize = 1000;
pub const DEFAULT_TRUNCATION: usize = 10_000;

/// A finite sequence of first-return times.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ReturnWord {
    pub times: Vec<usize>,
}

impl ReturnWord {
    pub fn new(times: Vec<usize>) -> Result<Self> {
        if times.is_empty() || times.contains(&0) {
            return Err(Error::InvalidParameter("return times must be positive".into()));
        }
        Ok(Self { times })
    }

    pub fn total_time(&self) -> usize {
        self.times.iter().sum()
    }

    /// Binary itinerary: each return time `n` contributes `1 0^{n-1}`.
    pub fn digits(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.total_time());
        for &n in &self.times {
            out.push(1);
            out.extend(std::iter::repeat(0).take(n - 1));
        }
        out
    }

    /// `h_{n₁} ∘ ⋯ ∘ h_{n_ℓ}(y)` for `y ∈ [x₁, 1]`.
    pub fn branch(&self, map: &MpMap, y: f64) -> f64 {
        let mut z = y;
        for &n in self.times.iter().rev() {
            for _ in 1..n {
                z = map.g0(z);
            }
            z = map.g1(z);
        }
        z
    }

    /// The cylinder mapped onto `J₀` by the composed branch.
    pub fn cylinder(&self, map: &MpMap) -> Interval {
        Interval {
            lo: self.branch(map, map.x1()),
            hi: self.branch(map, 1.0),
            lo_closed: false,
            hi_closed: true,
        }
    }
}

/// Marked points cached for return-time lookups.
#[derive(Debug, Clone)]
pub struct InducedSystem {
    pub map: MpMap,
    pub orbit: MarkedOrbit,
}

impl InducedSystem {
    pub fn new(map: MpMap, max_return: usize) -> Result<Self> {
        let orbit = map.marked_points(max_return + 1)?;
        Ok(Self { map, orbit })
    }

    /// Largest return time resolvable from the cache.
    pub fn max_return(&self) -> usize {
        self.orbit.max_index() - 1
    }

    /// `n` with `x ∈ Iₙ` (for `x > x₁`) or `x ∈ Jₙ` (for `x ≤ x₁`).
    pub fn return_time(&self, x: f64) -> Result<usize> {
        if !(x > 0.0 && x <= 1.0) {
            return Err(Error::InvalidParameter(format!("return_time needs x in (0, 1], got {x}")));
        }
        let max = self.max_return();
        if x > self.map.x1() {
            // ys is decreasing; find n with y_{n+1} < x ≤ y_n.
            let ys = &self.orbit.ys;
            let k = ys.partition_point(|&y| y >= x);
            if k >= ys.len() {
                return Err(Error::Range { index: k, max });
            }
            Ok(k.max(1))
        } else {
            // x_{n+1} < x ≤ x_n, n ≥ 1.
            let xs = &self.orbit.xs;
            let k = xs.partition_point(|&v| v >= x);
            if k >= xs.len() {
                return Err(Error::Range { index: k, max });
            }
            Ok(k - 1)
        }
    }

    /// `hₙ(y) = g₁(g₀^{n-1}(y))`, checked against `fⁿ(x) = y`.
    pub fn return_preimage(&self, y: f64, n: usize) -> Result<f64> {
        let x1 = self.map.x1();
        if !(y > x1 && y <= 1.0) || n == 0 {
            return Err(Error::InvalidParameter(format!(
                "return_preimage needs y in (x1, 1] and n ≥ 1, got y={y}, n={n}"
            )));
        }
        let x = ReturnWord { times: vec![n] }.branch(&self.map, y);
        // Follow the branches 1 0^{n-1} explicitly; the plain forward map
        // may switch branches at the endpoints of J₀.
        // Rounding in x is amplified by Dfⁿ(x) on the way forward.
        let mut z = x * (1.0 + self.map.pow_a(x)) - 1.0;
        let mut gain = self.map.df(x);
        for _ in 1..n {
            gain *= self.map.df(z);
            z *= 1.0 + self.map.pow_a(z);
        }
        let tol = 10.0 * self.map.solver_tol() * gain.max(1.0);
        if (z - y).abs() > tol {
            return Err(Error::SolverFailure(format!(
                "F(h_{n}(y)) = {z} differs from y = {y}"
            )));
        }
        Ok(x)
    }
}

/// Certified bounds for return times beyond the truncation `N`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailModel {
    pub truncation: usize,
    pub alpha: f64,
    pub gamma: f64,
    /// Upper bound for `φ - φ(0)` on `∪_{n>N} Iₙ`.
    pub e_max: f64,
    /// Upper bound for `(φ(x) - φ(0)) / x^γ` on `(0, x_{N+1}]`.
    pub ratio_sup: f64,
    pub semi: f64,
    /// `x_N^{-α}`.
    pub big_x: f64,
    /// `x_{N+1}^γ`.
    pub x_next_pow: f64,
    /// Upper bound for `Σ_{j>N} x_j^γ` when `γ > α`.
    pub power_tail: Option<f64>,
    /// Right end of `∪_{n>N} Iₙ`.
    pub y_next: f64,
}

impl TailModel {
    pub fn new(map: &MpMap, orbit: &MarkedOrbit, phi: &PotentialSpec, truncation: usize) -> Result<Self> {
        if orbit.max_index() < truncation + 1 {
            return Err(Error::Range { index: truncation + 1, max: orbit.max_index() });
        }
        let n = truncation;
        let g = phi.gamma;
        let semi = phi.norms()?.semi.upper;
        let x1 = map.x1();
        let y_next = map.g1(orbit.x(n));
        let e_max = phi.excess(x1) + semi * (y_next.powf(g) - x1.powf(g));
        let ratio_sup = phi.ratio_sup(orbit.x(n + 1))?.upper;
        let short = MarkedOrbit { alpha: orbit.alpha, xs: orbit.xs[..=n].to_vec(), ys: Vec::new() };
        Ok(Self {
            truncation: n,
            alpha: map.alpha(),
            gamma: g,
            e_max,
            ratio_sup,
            semi,
            big_x: orbit.big_x(n),
            x_next_pow: orbit.x(n + 1).powf(g),
            power_tail: short.tail_power_sum_upper(g),
            y_next,
        })
    }

    /// Bound `B` such that `Σ_{n>N} exp(S_n(βφ)(hₙ y) − n p) ≤ exp(β(e_max + A(y))) · B`,
    /// where `q = p − βφ(0)` and `A(y) = Σ_{j=1}^{N} (φ − φ(0))(g₀^j y)`. On failure
    /// returns why the series may diverge; `prefix` is `A(y)`, used only for
    /// the lower bound in the witness.
    pub fn factor(&self, beta: f64, q: f64, prefix: f64) -> std::result::Result<f64, DivergenceWitness> {
        let n1 = (self.truncation + 1) as f64;
        let a = self.alpha;
        let s = self.gamma / a;
        let ct = beta * self.ratio_sup;
        if q < 0.0 {
            return Err(DivergenceWitness::ExponentialGrowth { rate: -q });
        }
        let lead = (-n1 * q).exp();
        let geometric = |rate: f64| if rate > 0.0 { lead / -(-rate).exp_m1() } else { f64::INFINITY };
        if ct > 0.0 {
            let rate = q - ct * self.x_next_pow;
            if rate > 0.0 {
                return Ok(geometric(rate));
            }
            return Err(DivergenceWitness::Unbounded {
                reason: format!("ratio bound {ct:e} > 0 is not beaten by p - φ(0) = {q:e}"),
            });
        }
        if s > 1.0 {
            if q == 0.0 {
                let pt = self.power_tail.unwrap_or(f64::INFINITY);
                let lower = (beta * (prefix - self.semi * (1.0 + pt))).exp();
                if lower > 0.0 && lower.is_finite() {
                    return Err(DivergenceWitness::TermsBoundedBelow { lower });
                }
                return Err(DivergenceWitness::Unbounded {
                    reason: "terms do not decay but the lower bound underflowed".into(),
                });
            }
            return Ok(geometric(q));
        }
        let mut best = if q > 0.0 { geometric(q) } else { f64::INFINITY };
        let u0 = self.big_x + 2.0 * a;
        if (s - 1.0).abs() < 1e-12 {
            let r = -ct / a;
            if r > 1.0 {
                best = best.min(lead * (1.0 + u0 / (a * (r - 1.0))));
            }
        } else {
            let sigma = 1.0 - s;
            let ae = 1.0 / sigma;
            let k = -ct / (a * sigma);
            let v0 = u0.powf(sigma);
            if k > 0.0 && k * v0 > ae - 1.0 {
                let integral = v0.powf(ae - 1.0) / (a * sigma * k * (1.0 - (ae - 1.0) / (k * v0)));
                best = best.min(lead * (1.0 + integral));
            }
        }
        if best.is_finite() {
            Ok(best)
        } else {
            Err(DivergenceWitness::Unbounded {
                reason: format!("comparison series with exponent {:.4} does not converge", -ct / a),
            })
        }
    }
}

/// `(L 1)(y)` truncated at `N`, with the tail bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferValue {
    #[serde(with = "crate::ext_float")]
    pub value: f64,
    #[serde(with = "crate::ext_float")]
    pub tail_bound: f64,
    pub divergence: Option<DivergenceWitness>,
}

/// `Σ_{n≤N} exp(S_nφ(hₙ y) − n p)` and a bound for the rest of the series.
pub fn transfer_apply(map: &MpMap, phi: &PotentialSpec, p: f64, y: f64, truncation: usize) -> Result<TransferValue> {
    transfer_apply_fn(map, phi, p, y, truncation, &|_| 1.0, 1.0)
}

/// As [`transfer_apply`] for a general nonnegative `u`, with `u_sup` an upper
/// bound for `u` near `x₁` used in the tail.
pub fn transfer_apply_fn(
    map: &MpMap,
    phi: &PotentialSpec,
    p: f64,
    y: f64,
    truncation: usize,
    u: &dyn Fn(f64) -> f64,
    u_sup: f64,
) -> Result<TransferValue> {
    let x1 = map.x1();
    if !(y > x1 && y <= 1.0) {
        return Err(Error::InvalidParameter(format!("y must lie in (x1, 1], got {y}")));
    }
    if truncation == 0 {
        return Err(Error::InvalidParameter("truncation must be at least 1".into()));
    }
    let q = p - phi.value_at_zero;
    let mut z = y;
    let mut prefix = 0.0;
    let mut value = 0.0;
    for n in 1..=truncation {
        let x = map.g1(z);
        let s = phi.excess(x) + prefix;
        value += (s - n as f64 * q).exp() * u(x);
        z = map.g0(z);
        prefix += phi.excess(z);
    }
    let orbit = map.marked_points(truncation + 1)?;
    let tail = TailModel::new(map, &orbit, phi, truncation)?;
    match tail.factor(1.0, q, prefix) {
        Ok(b) => Ok(TransferValue {
            value,
            tail_bound: (tail.e_max + prefix).exp() * b * u_sup,
            divergence: None,
        }),
        Err(w) => Ok(TransferValue { value, tail_bound: f64::INFINITY, divergence: Some(w) }),
    }
}

/// Uniform log-Lipschitz constant on `J₀` of `y ↦ S_w φ(h_w y)` over all
/// return words `w`, given the seminorm bound `semi` of `φ`.
pub fn log_lipschitz(map: &MpMap, orbit: &MarkedOrbit, gamma: f64, semi: f64) -> f64 {
    if semi == 0.0 {
        return 0.0;
    }
    let a = map.alpha();
    let m = orbit.max_index();
    let x1 = map.x1();
    let pow_sup = |lo: f64, hi: f64| if gamma >= 1.0 { hi.powf(gamma - 1.0) } else { lo.powf(gamma - 1.0) };
    // ρ_j = 1 / Df^j(x_{j+1}), the largest contraction of g₀^j on J₀.
    let mut rho = 1.0;
    let mut sum = 0.0;
    for j in 1..m {
        rho /= map.df(orbit.x(j + 1));
        sum += pow_sup(orbit.x(j + 1), orbit.x(j)) * rho;
    }
    let u = |i: f64| orbit.big_x(m) + (i - m as f64) * a;
    let b = (1.0 + a) / a;
    let e = if gamma < 1.0 { (1.0 - gamma) / a } else { 0.0 };
    let d = b - e;
    let big_e = ((1.0 + a) * (1.0 + a) / (2.0 * a * orbit.big_x(m))).exp();
    let um1 = u(m as f64 + 1.0);
    sum += rho * big_e * um1.powf(b + 1.0 - d) / (a * (d - 1.0));
    let kappa = 1.0 / map.df(x1);
    let own = pow_sup(x1, 1.0) * kappa;
    semi * gamma * (sum + own) / (1.0 - kappa)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberParams {
    /// Grid cells over `J₀`.
    pub grid: usize,
    /// Largest return time summed explicitly.
    pub truncation: usize,
}

impl Default for FiberParams {
    fn default() -> Self {
        Self { grid: DEFAULT_GRID, truncation: DEFAULT_TRUNCATION }
    }
}

/// Centered Birkhoff sums `S_nφ(hₙ yᵢ) − nφ(0)` on a grid over `J₀`, with the
/// grid cell of each `hₙ(yᵢ)`. Built once per potential and reused for any
/// scaling `β > 0` and any `p`.
#[derive(Debug, Clone)]
pub struct FiberTable {
    pub phi0: f64,
    pub gamma: f64,
    pub params: FiberParams,
    x1: f64,
    step: f64,
    grid: Vec<f64>,
    sums: Vec<f64>,
    cells: Vec<u16>,
    prefix: Vec<f64>,
    /// Log-Lipschitz constant for `β = 1`.
    pub lipschitz: f64,
    pub tail: TailModel,
    tail_cells: usize,
}

impl FiberTable {
    pub fn build(map: &MpMap, phi: &PotentialSpec, params: FiberParams) -> Result<Self> {
        let FiberParams { grid, truncation } = params;
        if truncation == 0 || grid == 0 || grid > u16::MAX as usize {
            return Err(Error::InvalidParameter(format!(
                "fiber needs 1 ≤ grid ≤ {} and truncation ≥ 1",
                u16::MAX
            )));
        }
        let semi = phi.norms()?.semi.upper;
        let grid = if semi == 0.0 { 1 } else { grid };
        let orbit = map.marked_points(truncation + 1)?;
        let tail = TailModel::new(map, &orbit, phi, truncation)?;
        let lipschitz = log_lipschitz(map, &orbit, phi.gamma, semi);
        let x1 = map.x1();
        let step = (1.0 - x1) / grid as f64;
        let ys: Vec<f64> = (0..=grid).map(|i| if i == grid { 1.0 } else { x1 + i as f64 * step }).collect();
        let cell_of = |x: f64| (((x - x1) / step).floor().max(0.0) as usize).min(grid - 1) as u16;
        let rows: Vec<(Vec<f64>, Vec<u16>, f64)> = ys
            .par_iter()
            .map(|&y| {
                let mut sums = Vec::with_capacity(truncation);
                let mut cells = Vec::with_capacity(truncation);
                let mut z = y;
                let mut prefix = 0.0;
                for _ in 0..truncation {
                    let x = map.g1(z);
                    sums.push(phi.excess(x) + prefix);
                    cells.push(cell_of(x));
                    z = map.g0(z);
                    prefix += phi.excess(z);
                }
                (sums, cells, prefix)
            })
            .collect();
        let mut sums = Vec::with_capacity(rows.len() * truncation);
        let mut cells = Vec::with_capacity(rows.len() * truncation);
        let mut prefix = Vec::with_capacity(rows.len());
        for (s, c, a) in rows {
            sums.extend_from_slice(&s);
            cells.extend_from_slice(&c);
            prefix.push(a);
        }
        let tail_cells = cell_of(tail.y_next) as usize + 1;
        Ok(Self {
            phi0: phi.value_at_zero,
            gamma: phi.gamma,
            params: FiberParams { grid, truncation },
            x1,
            step,
            grid: ys,
            sums,
            cells,
            prefix,
            lipschitz,
            tail,
            tail_cells,
        })
    }

    pub fn grid_points(&self) -> &[f64] {
        &self.grid
    }

    /// Centered sum `S_nφ(hₙ yᵢ) − nφ(0)`.
    pub fn centered_sum(&self, i: usize, n: usize) -> f64 {
        self.sums[i * self.params.truncation + n - 1]
    }

    fn tail_factor(&self, beta: f64, q: f64) -> std::result::Result<f64, DivergenceWitness> {
        let worst = self.prefix.iter().cloned().fold(f64::INFINITY, f64::min);
        self.tail.factor(beta, q, worst)
    }

    /// One application of the operator to log-bounds `(lo, hi)` of a function
    /// on the grid.
    fn apply(&self, beta: f64, q: f64, factor: f64, lo: &[f64], hi: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let budget = beta * self.lipschitz * self.step;
        let g = self.params.grid;
        let cell_lo: Vec<f64> = (0..g).map(|j| gap_min(lo[j], lo[j + 1], budget)).collect();
        let cell_hi: Vec<f64> = (0..g).map(|j| gap_max(hi[j], hi[j + 1], budget)).collect();
        let tail_hi = cell_hi[..self.tail_cells].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let nmax = self.params.truncation;
        let rows: Vec<(f64, f64)> = (0..=g)
            .into_par_iter()
            .map(|i| {
                let s = &self.sums[i * nmax..(i + 1) * nmax];
                let c = &self.cells[i * nmax..(i + 1) * nmax];
                let mut vlo = Vec::with_capacity(nmax);
                let mut vhi = Vec::with_capacity(nmax);
                for n in 0..nmax {
                    let base = beta * s[n] - (n + 1) as f64 * q;
                    vlo.push(base + cell_lo[c[n] as usize]);
                    vhi.push(base + cell_hi[c[n] as usize]);
                }
                let tail = (beta * (self.tail.e_max + self.prefix[i])) + factor.ln() + tail_hi;
                vhi.push(tail);
                (log_sum(&vlo), log_sum(&vhi))
            })
            .collect();
        rows.into_iter().unzip()
    }

    /// Brackets `𝒫(βφ, p)` from `ℓ` operator iterations.
    pub fn two_variable_pressure(&self, beta: f64, p: f64, ell: usize) -> Result<TwoVarPressurePoint> {
        if !(beta > 0.0) || ell == 0 {
            return Err(Error::InvalidParameter(format!("need β > 0 and ℓ ≥ 1, got β={beta}, ℓ={ell}")));
        }
        let q = p - beta * self.phi0;
        let mut point = TwoVarPressurePoint {
            p,
            beta,
            bracket: PressureBracket {
                lo: f64::NEG_INFINITY,
                hi: f64::INFINITY,
                depth: ell,
                method: Method::Partition,
                estimate: None,
                certified: true,
            },
            ell,
            truncation: self.params.truncation,
            tail_bound: f64::INFINITY,
            divergence_flag: false,
            witness: None,
            lipschitz: beta * self.lipschitz,
        };
        let factor = match self.tail_factor(beta, q) {
            Ok(b) => b,
            Err(w) => {
                if w.is_certified() {
                    point.bracket.lo = f64::INFINITY;
                    point.divergence_flag = true;
                    point.witness = Some(w);
                    return Ok(point);
                }
                point.witness = Some(w);
                f64::INFINITY
            }
        };
        if factor.is_finite() {
            point.tail_bound = self
                .prefix
                .iter()
                .map(|a| (beta * (self.tail.e_max + a)).exp() * factor)
                .fold(0.0, f64::max);
        }
        let budget = beta * self.lipschitz * self.step;
        let g = self.params.grid;
        let mut lo = vec![0.0; g + 1];
        let mut hi = vec![0.0; g + 1];
        let (mut best_lo, mut best_hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for k in 1..=ell {
            let (nlo, nhi) = self.apply(beta, q, factor, &lo, &hi);
            let kf = k as f64;
            let inf_lo = (0..g).map(|j| gap_min(nlo[j], nlo[j + 1], budget)).fold(f64::INFINITY, f64::min);
            let sup_hi = (0..g).map(|j| gap_max(nhi[j], nhi[j + 1], budget)).fold(f64::NEG_INFINITY, f64::max);
            best_lo = best_lo.max(inf_lo / kf);
            best_hi = best_hi.min(sup_hi / kf);
            let r_lo: Vec<f64> = (0..=g).map(|j| nlo[j] - hi[j]).collect();
            let r_hi: Vec<f64> = (0..=g).map(|j| nhi[j] - lo[j]).collect();
            let cw_lo = (0..g).map(|j| gap_min(r_lo[j], r_lo[j + 1], 2.0 * budget)).fold(f64::INFINITY, f64::min);
            let cw_hi = (0..g).map(|j| gap_max(r_hi[j], r_hi[j + 1], 2.0 * budget)).fold(f64::NEG_INFINITY, f64::max);
            best_lo = best_lo.max(cw_lo);
            if cw_hi.is_finite() {
                best_hi = best_hi.min(cw_hi);
            }
            lo = nlo;
            hi = nhi;
        }
        if best_lo > best_hi {
            // Bounds that agree to rounding may cross by a few ulps.
            if best_lo - best_hi > 1e-12 * best_lo.abs().max(1.0) {
                return Err(Error::NonConvergent(format!(
                    "operator bounds crossed: lower {best_lo} > upper {best_hi}"
                )));
            }
            std::mem::swap(&mut best_lo, &mut best_hi);
        }
        point.bracket.lo = best_lo;
        point.bracket.hi = best_hi;
        Ok(point)
    }

    /// Brackets `(1/ℓ) log Z_ℓ(βφ, p)`, where `Z_ℓ` sums the sup over each
    /// depth-`ℓ` return cylinder.
    pub fn z_partition(&self, beta: f64, p: f64, ell: usize) -> Result<PressureBracket> {
        if !(beta > 0.0) || ell == 0 {
            return Err(Error::InvalidParameter(format!("need β > 0 and ℓ ≥ 1, got β={beta}, ℓ={ell}")));
        }
        let q = p - beta * self.phi0;
        let factor = self.tail_factor(beta, q).map_err(Error::DivergentTail)?;
        let g = self.params.grid;
        let mut lo = vec![0.0; g + 1];
        let mut hi = vec![0.0; g + 1];
        for _ in 0..ell {
            let (a, b) = self.apply(beta, q, factor, &lo, &hi);
            lo = a;
            hi = b;
        }
        let lam = beta * self.lipschitz;
        let zlo = lo.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let zhi = hi
            .iter()
            .zip(&self.grid)
            .map(|(h, &y)| h + lam * (y - self.x1).max(1.0 - y))
            .fold(f64::INFINITY, f64::min);
        let lf = ell as f64;
        Ok(PressureBracket {
            lo: zlo / lf,
            hi: zhi / lf,
            depth: ell,
            method: Method::Partition,
            estimate: None,
            certified: true,
        })
    }
}

fn log_sum(v: &[f64]) -> f64 {
    let m = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m == f64::INFINITY {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Certified sign of a two-variable pressure value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Positive,
    NonPositive,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoVarPressurePoint {
    pub p: f64,
    pub beta: f64,
    pub bracket: PressureBracket,
    pub ell: usize,
    pub truncation: usize,
    /// Largest tail bound over the grid for `L 1`.
    #[serde(with = "crate::ext_float")]
    pub tail_bound: f64,
    pub divergence_flag: bool,
    pub witness: Option<DivergenceWitness>,
    pub lipschitz: f64,
}

impl TwoVarPressurePoint {
    pub fn sign(&self) -> Sign {
        if self.bracket.lo > 0.0 {
            Sign::Positive
        } else if self.bracket.hi <= 0.0 {
            Sign::NonPositive
        } else {
            Sign::Inconclusive
        }
    }
}

/// Builds a fiber for `φ` and brackets `𝒫(φ, p)` with `ℓ` iterations.
pub fn two_variable_pressure(
    map: &MpMap,
    phi: &PotentialSpec,
    p: f64,
    ell: usize,
    params: FiberParams,
) -> Result<TwoVarPressurePoint> {
    FiberTable::build(map, phi, params)?.two_variable_pressure(1.0, p, ell)
}

/// Builds a fiber for `φ` and brackets `(1/ℓ) log Z_ℓ(φ, p)`.
pub fn z_partition(
    map: &MpMap,
    phi: &PotentialSpec,
    p: f64,
    ell: usize,
    params: FiberParams,
) -> Result<PressureBracket> {
    FiberTable::build(map, phi, params)?.z_partition(1.0, p, ell)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn alpha1() -> InducedSystem {
        InducedSystem::new(MpMap::new(1.0).unwrap(), 300).unwrap()
    }

    fn zero_closed_form(p: f64) -> f64 {
        -(p.exp_m1()).ln()
    }

    #[test]
    fn return_time_examples() {
        let sys = alpha1();
        assert_eq!(sys.return_time(1.0).unwrap(), 1);
        assert_eq!(sys.return_time(0.9).unwrap(), 1);
        // Oracle: yₙ solves y + y² = 1 + x_{n-1}, with x_{j+1} + x_{j+1}² = x_j.
        let mut xs = vec![1.0f64];
        for _ in 0..20 {
            let x = *xs.last().unwrap();
            xs.push((-1.0 + (1.0 + 4.0 * x).sqrt()) / 2.0);
        }
        let y = |n: usize| (-1.0 + (1.0 + 4.0 * (1.0 + xs[n - 1])).sqrt()) / 2.0;
        let n07 = (1..20).find(|&n| y(n + 1) < 0.7 && 0.7 <= y(n)).unwrap();
        assert!(y(3) > 0.7 && n07 > 2);
        assert_eq!(sys.return_time(0.7).unwrap(), n07);
        assert_eq!(sys.return_time(0.8).unwrap(), 2);
        assert_eq!(sys.return_time(sys.orbit.y(2)).unwrap(), 2);
        assert_eq!(sys.return_time(sys.map.x1()).unwrap(), 1);
        assert_eq!(sys.return_time(0.5).unwrap(), 1);
        assert_eq!(sys.return_time(sys.orbit.x(2)).unwrap(), 2);
        assert!(sys.return_time(0.0).is_err());
        assert!(matches!(sys.return_time(1e-9), Err(Error::Range { .. })));
    }

    #[test]
    fn return_preimage_examples() {
        let sys = alpha1();
        assert_eq!(sys.return_preimage(1.0, 1).unwrap(), 1.0);
        let y2 = sys.return_preimage(1.0, 2).unwrap();
        assert!((y2 - 0.866760).abs() < 1e-6);
        let y3 = sys.return_preimage(1.0, 3).unwrap();
        // y + y² = 1 + x₂
        let x2 = (-1.0 + (1.0f64 + 4.0 * sys.map.x1()).sqrt()) / 2.0;
        let oracle = (-1.0 + (1.0 + 4.0 * (1.0 + x2)).sqrt()) / 2.0;
        assert!((y3 - oracle).abs() < 1e-14 && (y3 - 0.796797).abs() < 1e-6);
        let mut z = y3;
        for _ in 0..3 {
            z = sys.map.fwd(z);
        }
        assert!((z - 1.0).abs() < 1e-13);
        assert!(sys.return_preimage(0.5, 1).is_err());
    }

    #[test]
    fn fiber_completeness() {
        let sys = alpha1();
        for y in [0.7, 0.9, 1.0] {
            let mut prev = f64::INFINITY;
            for n in 1..=200 {
                let x = sys.return_preimage(y, n).unwrap();
                assert!(x < prev);
                prev = x;
                assert_eq!(sys.return_time(x).unwrap(), n);
            }
        }
    }

    #[test]
    fn zero_potential_transfer_matches_geometric_series() {
        let m = MpMap::new(1.0).unwrap();
        let zero = PotentialSpec::zero();
        for p in [0.2, 0.7, std::f64::consts::LN_2, 1.5] {
            let t = transfer_apply(&m, &zero, p, 0.8, 10_000).unwrap();
            let exact = 1.0 / p.exp_m1();
            assert!((t.value - exact).abs() < 1e-12, "{p}: {t:?}");
            assert!(t.tail_bound < 1e-300 || t.value + t.tail_bound >= exact);
        }
        let t = transfer_apply(&m, &zero, std::f64::consts::LN_2, 1.0, 1000).unwrap();
        assert!((t.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn geometric_transfer_is_near_one() {
        // Σ 1/DFₙ over the fiber of 1 equals Σ|Iₙ|/|J₀| up to distortion.
        let m = MpMap::new(1.0).unwrap();
        let phi = PotentialSpec::geometric(1.0).unwrap();
        let t = transfer_apply(&m, &phi, 0.0, 1.0, 10_000).unwrap();
        let mut direct = 0.0;
        let sys = InducedSystem::new(m.clone(), 10_000).unwrap();
        for n in 1..=10_000 {
            let x = sys.return_preimage(1.0, n).unwrap();
            direct += 1.0 / m.derivative_along(x, n).unwrap();
        }
        assert!((t.value - direct).abs() < 1e-10 * direct);
        assert!(t.value > 0.5 && t.value < 2.0, "{t:?}");
        assert!(t.tail_bound.is_finite() && t.tail_bound < 1e-3, "{t:?}");
        let full_measure: f64 = (1.0 - sys.orbit.y(10_001)) / (1.0 - m.x1());
        assert!(t.value / full_measure > 0.5 && t.value / full_measure < 2.0);
    }

    #[test]
    fn tail_bound_dominates_long_sums() {
        // Truncating at 500 must leave a remainder below the tail bound,
        // measured against a sum to 20000.
        let m = MpMap::new(1.0).unwrap();
        for (phi, p) in [
            (PotentialSpec::geometric(1.0).unwrap(), 0.0),
            (PotentialSpec::omega(0.5).unwrap(), 0.0),
            (PotentialSpec::psi(1.0).unwrap().scaled(3.0), 0.0),
            (PotentialSpec::omega(1.0).unwrap().scaled(2.0), 0.001),
        ] {
            let short = transfer_apply(&m, &phi, p, 0.9, 500).unwrap();
            let long = transfer_apply(&m, &phi, p, 0.9, 20_000).unwrap();
            let rest = long.value - short.value;
            assert!(rest <= short.tail_bound, "{}: rest {rest} vs {}", phi.name, short.tail_bound);
        }
    }

    #[test]
    fn omega_two_diverges_with_witness() {
        let m = MpMap::new(1.0).unwrap();
        let params = FiberParams { grid: 50, truncation: 2000 };
        let fiber = FiberTable::build(&m, &PotentialSpec::omega(2.0).unwrap(), params).unwrap();
        for beta in [0.1, 1.0, 50.0] {
            match fiber.z_partition(beta, 0.0, 1) {
                Err(Error::DivergentTail(DivergenceWitness::TermsBoundedBelow { lower })) => {
                    assert!(lower > 0.0)
                }
                other => panic!("expected divergence, got {other:?}"),
            }
            let pt = fiber.two_variable_pressure(beta, 0.0, 2).unwrap();
            assert!(pt.divergence_flag && pt.bracket.lo == f64::INFINITY);
        }
        let t = transfer_apply(&m, &PotentialSpec::omega(2.0).unwrap(), 0.0, 1.0, 100).unwrap();
        assert!(matches!(t.divergence, Some(DivergenceWitness::TermsBoundedBelow { .. })));
    }

    #[test]
    fn zero_potential_partition_function() {
        let m = MpMap::new(1.0).unwrap();
        let fiber = FiberTable::build(&m, &PotentialSpec::zero(), FiberParams::default()).unwrap();
        for p in [0.2, 0.7, std::f64::consts::LN_2, 1.0, 1.5] {
            let want = zero_closed_form(p);
            for ell in [1, 2, 3] {
                let z = fiber.z_partition(1.0, p, ell).unwrap();
                assert!((z.lo - want).abs() < 1e-12 && (z.hi - want).abs() < 1e-12, "{p} {ell}: {z:?}");
            }
            let pt = fiber.two_variable_pressure(1.0, p, 3).unwrap();
            assert!(pt.bracket.lo <= want + 1e-12 && pt.bracket.hi >= want - 1e-12);
            assert!(pt.bracket.width() < 1e-12);
        }
        let pt = fiber.two_variable_pressure(1.0, 1.0, 2).unwrap();
        assert!(pt.bracket.contains(-0.541325) || (pt.bracket.lo + 0.541325).abs() < 1e-6);
    }

    #[test]
    fn geometric_two_variable_pressure_at_zero() {
        let m = MpMap::new(1.0).unwrap();
        let fiber = FiberTable::build(
            &m,
            &PotentialSpec::geometric(1.0).unwrap(),
            FiberParams { grid: 400, truncation: 4000 },
        )
        .unwrap();
        let pt = fiber.two_variable_pressure(1.0, 0.0, 3).unwrap();
        assert!(pt.bracket.contains(0.0), "{pt:?}");
        assert!(pt.bracket.width() < 0.1, "{pt:?}");
        let a = fiber.two_variable_pressure(1.0, 0.0, 2).unwrap();
        let b = fiber.two_variable_pressure(1.0, 0.0, 4).unwrap();
        assert!(a.bracket.intersects(&b.bracket));
    }

    #[test]
    fn operator_and_partition_function_consistency() {
        let m = MpMap::new(1.0).unwrap();
        let fiber = FiberTable::build(
            &m,
            &PotentialSpec::psi(1.0).unwrap(),
            FiberParams { grid: 200, truncation: 2000 },
        )
        .unwrap();
        for beta in [0.5, 2.0] {
            for p in [0.1, 0.6] {
                let pt = fiber.two_variable_pressure(beta, p, 2).unwrap();
                let z1 = fiber.z_partition(beta, p, 1).unwrap();
                let z2 = fiber.z_partition(beta, p, 2).unwrap();
                let z3 = fiber.z_partition(beta, p, 3).unwrap();
                // Z₃ ≤ Z₁·Z₂ on computed bounds.
                assert!(3.0 * z3.lo <= z1.hi + 2.0 * z2.hi + 1e-9);
                // 𝒫 ≤ (1/ℓ) log Z_ℓ.
                assert!(pt.bracket.lo <= z2.hi + 1e-9 && pt.bracket.lo <= z1.hi + 1e-9);
            }
        }
    }

    #[test]
    fn log_lipschitz_bounds_empirical_slopes() {
        let m = MpMap::new(1.0).unwrap();
        let orbit = m.marked_points(3001).unwrap();
        for phi in [
            PotentialSpec::geometric(1.0).unwrap(),
            PotentialSpec::psi(1.0).unwrap(),
            PotentialSpec::omega(0.5).unwrap(),
        ] {
            let semi = phi.norms().unwrap().semi.upper;
            let lam = log_lipschitz(&m, &orbit, phi.gamma, semi);
            let sys = InducedSystem::new(m.clone(), 400).unwrap();
            let mut worst: f64 = 0.0;
            for n in [1usize, 2, 5, 30, 300] {
                for word in [vec![n], vec![n, 2], vec![3, n, 1]] {
                    let w = ReturnWord::new(word).unwrap();
                    let s = |y: f64| {
                        let x = w.branch(&sys.map, y);
                        phi.birkhoff_sum(&m, x, w.total_time()).unwrap()
                    };
                    let (a, b) = (0.7, 0.71);
                    worst = worst.max((s(b) - s(a)).abs() / (b - a));
                }
            }
            assert!(worst <= lam, "{}: {worst} > {lam}", phi.name);
        }
    }

    #[test]
    fn return_word_digits_and_cylinders() {
        let m = MpMap::new(1.0).unwrap();
        let w = ReturnWord::new(vec![2, 1]).unwrap();
        assert_eq!(w.digits(), vec![1, 0, 1]);
        let iv = w.cylinder(&m);
        let bin = m.cylinder(&[1, 0, 1, 1]).unwrap();
        assert!((iv.lo - bin.lo).abs() < 1e-15 && (iv.hi - bin.hi).abs() < 1e-15);
        assert!(ReturnWord::new(vec![0]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]
        #[test]
        fn zero_oracle_and_monotone_in_p(p in 0.05f64..2.0, dp in 0.01f64..0.5) {
            let m = MpMap::new(1.0).unwrap();
            let params = FiberParams { grid: 10, truncation: 3000 };
            let fiber = FiberTable::build(&m, &PotentialSpec::zero(), params).unwrap();
            let a = fiber.two_variable_pressure(1.0, p, 2).unwrap();
            let b = fiber.two_variable_pressure(1.0, p + dp, 2).unwrap();
            let want = zero_closed_form(p);
            prop_assert!((a.bracket.lo - want).abs() <= a.bracket.width() + 1e-12);
            prop_assert!(b.bracket.hi < a.bracket.lo);
        }

        #[test]
        fn psi_monotone_in_p(p in 0.0f64..1.0, dp in 0.05f64..0.5) {
            let m = MpMap::new(1.0).unwrap();
            let params = FiberParams { grid: 100, truncation: 1000 };
            let fiber = FiberTable::build(&m, &PotentialSpec::psi(1.0).unwrap(), params).unwrap();
            let a = fiber.two_variable_pressure(1.0, p, 2).unwrap();
            let b = fiber.two_variable_pressure(1.0, p + dp, 2).unwrap();
            prop_assert!(b.bracket.lo <= a.bracket.hi);
            prop_assert!(a.bracket.lo >= b.bracket.lo - a.bracket.width() - b.bracket.width());
        }
    }
}
