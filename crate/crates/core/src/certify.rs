//! Phase-transition certificates: distortion constants, the local
//! constants `n₀`, `c`, `m₀`, periodic-orbit ergodic optimization, a
//! max-mean-cycle bound on the compact part, and the verdict pipeline.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::WeightedDigraph;
use crate::induced::{FiberParams, FiberTable, ReturnWord};
use crate::mp_map::{MarkedOrbit, MpMap};
use crate::potentials::PotentialSpec;
use crate::pressure::PressureBracket;

/// Terms summed explicitly before the integral tail takes over.
const SERIES_TERMS: usize = 100_000;

/// `Σ_{j≥1} j^{-s}` from above, `s > 1`. The tail uses the midpoint
/// comparison `j^{-s} ≤ ∫_{j-1/2}^{j+1/2} t^{-s} dt` (convexity).
pub fn zeta_upper(s: f64) -> f64 {
    assert!(s > 1.0, "series needs s > 1");
    let m = SERIES_TERMS as f64;
    let tail = (m + 0.5).powf(1.0 - s) / (s - 1.0);
    (1..=SERIES_TERMS).rev().fold(tail, |acc, j| acc + (j as f64).powf(-s))
}

/// `Σ_{m≥0} (1 + ε m)^{-s}` from above, `s > 1`, `ε > 0`.
pub fn shifted_series_upper(eps: f64, s: f64) -> f64 {
    assert!(s > 1.0 && eps > 0.0, "series needs s > 1 and ε > 0");
    let m = SERIES_TERMS as f64;
    let tail = (1.0 + eps * (m + 0.5)).powf(1.0 - s) / (eps * (s - 1.0));
    (0..=SERIES_TERMS)
        .rev()
        .fold(tail, |acc, j| acc + (1.0 + eps * j as f64).powf(-s))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionConstants {
    pub alpha: f64,
    pub gamma: f64,
    /// Largest `ε` with `(1 + εn)^{1/α+1} ≤ inf_{Jₙ} Dfⁿ` for every scanned `n`.
    pub eps0: f64,
    /// `(inf_{J₀} Df)^{α/(α+1)} − 1`.
    pub eps1_branch: f64,
    pub eps1: f64,
    /// `log C1`.
    pub c1_log: f64,
    pub c1: f64,
    pub k: f64,
    /// Upper bound for `Σ_{j≥1} j^{-(1+γ₀/α)}`.
    pub series: f64,
    pub d: f64,
    pub scan_horizon: usize,
}

/// Distortion and bounded-variation constants for exponent `gamma`.
pub fn distortion_constants(map: &MpMap, gamma: f64, scan_horizon: usize) -> Result<DistortionConstants> {
    if scan_horizon < 1000 {
        return Err(Error::InvalidParameter(format!("scan_horizon must be ≥ 1000, got {scan_horizon}")));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("gamma must be positive, got {gamma}")));
    }
    let alpha = map.alpha();
    let expo = 1.0 / alpha + 1.0;
    let orbit = map.marked_points(scan_horizon + 1)?;

    // Df is increasing, so inf_{Jₙ} Dfⁿ = Dfⁿ(x_{n+1}) = Π_{j=2}^{n+1} Df(x_j).
    let mut log_prod = 0.0;
    let mut eps0 = f64::INFINITY;
    for n in 1..=scan_horizon {
        log_prod += map.df(orbit.x(n + 1)).ln();
        let e = (log_prod / expo).exp_m1() / n as f64;
        eps0 = eps0.min(e);
    }
    // Keep the scanned inequalities strict under rounding.
    eps0 *= 1.0 - 1e-12;

    let x1 = map.x1();
    let eps1_branch = map.df(x1).powf(alpha / (alpha + 1.0)) - 1.0;
    let eps1 = eps0.min(eps1_branch).min(1.0);

    let theta = alpha.min(1.0);
    let holder_df = if alpha <= 1.0 { 1.0 + alpha } else { alpha * (1.0 + alpha) };
    let len_j0 = 1.0 - x1;
    let c1_log = len_j0.powf(theta) * holder_df * shifted_series_upper(eps1, theta * expo);
    let c1 = c1_log.exp();

    let g0 = gamma.min(1.0);
    let k = (1..=scan_horizon)
        .map(|n| orbit.x(n).powf(g0 - 1.0) * (n as f64).powf((g0 - 1.0) / alpha))
        .fold(1.0, f64::max);
    let series = zeta_upper(1.0 + g0 / alpha);
    let d = k * gamma * eps1.powf(-expo) * series;
    Ok(DistortionConstants {
        alpha,
        gamma,
        eps0,
        eps1_branch,
        eps1,
        c1_log,
        c1,
        k,
        series,
        d,
        scan_horizon,
    })
}

/// Local constants near the neutral fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalConstants {
    pub n0: usize,
    pub c: f64,
    /// Bounds for `sup_{(0, x_{n₀}]} (φ(x) − φ(0)) / x^γ`.
    pub ratio_sup_lower: f64,
    pub ratio_sup_upper: f64,
    /// False when the ratio bound near `0` relies on sampling only.
    pub certified: bool,
}

fn check_gamma(phi: &PotentialSpec, gamma: f64) -> Result<()> {
    if (gamma - phi.gamma).abs() > 1e-12 * gamma.abs().max(1.0) {
        return Err(Error::InvalidParameter(format!(
            "potential {} has exponent {}, not {gamma}",
            phi.name, phi.gamma
        )));
    }
    Ok(())
}

/// Smallest `n₀` such that `n x_n^α > 2^{-α/γ}/α` for all `n ≥ n₀` and the
/// ratio `(φ − φ(0)) / x^γ` is negative on `(0, x_{n₀}]`, with `c` halfway
/// between that ratio's sup and `0`.
pub fn find_n0_and_c(phi: &PotentialSpec, gamma: f64, orbit: &MarkedOrbit) -> Result<LocalConstants> {
    check_gamma(phi, gamma)?;
    let alpha = orbit.alpha;
    if gamma > alpha * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!("need γ ≤ α, got γ={gamma}, α={alpha}")));
    }
    let max = orbit.max_index();
    let threshold = 2f64.powf(-alpha / gamma) / alpha;
    let holds = |n: usize| n as f64 / orbit.big_x(n) > threshold;
    // Beyond the cache n x_n^α ≥ min(N x_N^α, 1/α) because X_{j+1} ≤ X_j + α.
    if !holds(max) {
        return Err(Error::NoNegativeMargin(format!(
            "the marked-point lower bound fails at the cache end n={max}"
        )));
    }
    let mut n_a = max;
    while n_a > 1 && holds(n_a - 1) {
        n_a -= 1;
    }
    let ratio_ok = |n: usize| -> Result<Option<crate::potentials::RatioSup>> {
        let r = phi.ratio_sup(orbit.x(n))?;
        Ok((r.upper < 0.0).then_some(r))
    };
    // The ratio sup over (0, x_n] decreases with n: double, then bisect.
    let mut fail = None;
    let mut n = n_a;
    let found = loop {
        if let Some(r) = ratio_ok(n)? {
            break (n, r);
        }
        fail = Some(n);
        if n == max {
            return Err(Error::NoNegativeMargin(format!(
                "sup of (φ − φ(0))/x^γ on (0, x_n] is not negative for any n ≤ {max}"
            )));
        }
        n = (2 * n).min(max);
    };
    let (mut hi, mut best) = found;
    if let Some(mut lo) = fail {
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            match ratio_ok(mid)? {
                Some(r) => {
                    hi = mid;
                    best = r;
                }
                None => lo = mid,
            }
        }
    }
    Ok(LocalConstants {
        n0: hi,
        c: 0.5 * best.upper,
        ratio_sup_lower: best.lower,
        ratio_sup_upper: best.upper,
        certified: best.certified,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum M0Branch {
    /// `γ < α`: the bound is raised to `1/θ`.
    Power,
    /// `γ = α`: the bound is exponential in `1/(−c)`.
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct M0Bound {
    pub m0: u64,
    /// Natural log of the bound that `m₀` strictly exceeds.
    pub log_bound: f64,
    pub branch: M0Branch,
}

/// Which case of the `m₀` bound applies to `γ`.
pub fn m0_branch(alpha: f64, gamma: f64) -> M0Branch {
    if (gamma - alpha).abs() <= 1e-12 * alpha {
        M0Branch::Exponential
    } else {
        M0Branch::Power
    }
}

/// Natural log of the `m₀` bound given `‖φ‖`, `|φ|_{1,γ}` and `D`.
pub fn m0_log_bound(alpha: f64, gamma: f64, c: f64, n0: usize, d: f64, sup: f64, semi: f64) -> f64 {
    let budget = d * semi + 2.0 * n0 as f64 * sup;
    let n1 = (n0 + 1) as f64;
    match m0_branch(alpha, gamma) {
        M0Branch::Exponential => 2.0 * n1.ln() + 4.0 * alpha / (-c) * budget,
        M0Branch::Power => {
            let theta = 1.0 - gamma / alpha;
            let inner = 2.0 * n1.powf(theta) + 4.0 * alpha.powf(gamma / alpha) * theta / (-c) * budget;
            inner.ln() / theta
        }
    }
}

/// The least integer above the `m₀` bound, using certified norm bounds.
pub fn compute_m0(phi: &PotentialSpec, gamma: f64, c: f64, n0: usize, constants: &DistortionConstants) -> Result<M0Bound> {
    check_gamma(phi, gamma)?;
    if !(c < 0.0) || n0 == 0 || !(constants.d > 0.0) {
        return Err(Error::InvalidParameter(format!("need c < 0, n0 ≥ 1, D > 0; got c={c}, n0={n0}")));
    }
    let alpha = constants.alpha;
    if gamma > alpha * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!("need γ ≤ α, got γ={gamma}, α={alpha}")));
    }
    let norms = phi.norms()?;
    let log_bound = m0_log_bound(alpha, gamma, c, n0, constants.d, norms.sup.upper, norms.semi.upper);
    if !(log_bound <= 62.0 * std::f64::consts::LN_2) {
        return Err(Error::Overflow { log_value: log_bound });
    }
    // A relative pad absorbs rounding in the bound; larger m₀ stays valid.
    let bound = log_bound.exp() * (1.0 + 1e-12);
    Ok(M0Bound {
        m0: bound.floor() as u64 + 1,
        log_bound,
        branch: m0_branch(alpha, gamma),
    })
}

/// A periodic orbit, either the fixed point `0` or the orbit of a return word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeriodicOrbit {
    /// `None` for the fixed point `0`.
    pub return_word: Option<ReturnWord>,
    pub point: f64,
    pub period: usize,
    /// `point, f(point), …`, one period.
    pub points: Vec<f64>,
    pub min_point: f64,
    /// `|f^period(point) − point|` along the forward map.
    pub residual: f64,
    /// Birkhoff averages keyed by potential name.
    pub averages: BTreeMap<String, f64>,
}

impl PeriodicOrbit {
    pub fn zero(potentials: &[PotentialSpec]) -> Self {
        let averages = potentials.iter().map(|p| (p.name.clone(), p.value_at_zero)).collect();
        Self {
            return_word: None,
            point: 0.0,
            period: 1,
            points: vec![0.0],
            min_point: 0.0,
            residual: 0.0,
            averages,
        }
    }

    /// The orbit of the unique fixed point of the word's composed branch.
    pub fn from_word(map: &MpMap, word: &ReturnWord, potentials: &[PotentialSpec]) -> Result<Self> {
        let x1 = map.x1();
        let gap = |y: f64| word.branch(map, y) - y;
        // The composed branch maps [x₁, 1] into (x₁, 1].
        let (mut lo, mut hi) = (x1, 1.0);
        let point = if gap(1.0) >= 0.0 {
            1.0
        } else {
            loop {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break if gap(hi).abs() < gap(lo).abs() { hi } else { lo };
                }
                if gap(mid) >= 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        };
        // Walking the inverse branches from the fixed point visits the orbit backwards.
        let mut back = Vec::with_capacity(word.total_time());
        let mut z = point;
        for &n in word.times.iter().rev() {
            for _ in 1..n {
                z = map.g0(z);
                back.push(z);
            }
            z = map.g1(z);
            back.push(z);
        }
        back.pop();
        back.push(point);
        back.reverse();
        let period = word.total_time();
        let mut fwd = point;
        let mut gain = 1.0;
        for _ in 0..period {
            gain *= map.df(fwd);
            fwd = map.fwd(fwd);
        }
        let residual = (fwd - point).abs();
        if residual > 10.0 * map.solver_tol() * gain.max(1.0) {
            return Err(Error::SolverFailure(format!(
                "periodic point of {:?} has residual {residual:e}",
                word.times
            )));
        }
        let min_point = back.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut orbit = Self {
            return_word: Some(word.clone()),
            point,
            period,
            points: back,
            min_point,
            residual,
            averages: BTreeMap::new(),
        };
        for p in potentials {
            let avg = orbit.average(p);
            orbit.averages.insert(p.name.clone(), avg);
        }
        Ok(orbit)
    }

    /// `S_N φ(p) / N` over the stored orbit.
    pub fn average(&self, phi: &PotentialSpec) -> f64 {
        self.points.iter().map(|&x| phi.value(x)).sum::<f64>() / self.period as f64
    }
}

fn is_lyndon(w: &[usize]) -> bool {
    (1..w.len()).all(|r| {
        let rot = w[r..].iter().chain(&w[..r]);
        w.iter().lt(rot)
    })
}

/// Aperiodic necklaces of return times with total `≤ max_total` and each
/// time `≤ cap`, by total time then lexicographically.
pub fn return_necklaces(max_total: usize, cap: usize) -> Vec<ReturnWord> {
    fn extend(rest: usize, cap: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest == 0 {
            if is_lyndon(cur) {
                out.push(cur.clone());
            }
            return;
        }
        for t in 1..=rest.min(cap) {
            cur.push(t);
            extend(rest - t, cap, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for total in 1..=max_total {
        let mut words = Vec::new();
        extend(total, cap, &mut Vec::new(), &mut words);
        words.sort();
        out.extend(words.into_iter().map(|times| ReturnWord { times }));
    }
    out
}

/// Periodic orbits of total period `≤ max_total_period` with return times
/// `≤ max_return_time`, optionally dropping orbits that enter `[0, floor)`.
pub fn enumerate_periodic_orbits(
    map: &MpMap,
    max_total_period: usize,
    max_return_time: usize,
    region_floor: Option<f64>,
    potentials: &[PotentialSpec],
) -> Result<Vec<PeriodicOrbit>> {
    if max_total_period == 0 || max_return_time == 0 {
        return Err(Error::InvalidParameter("orbit enumeration needs positive period and cap".into()));
    }
    let words = return_necklaces(max_total_period, max_return_time);
    let orbits: Vec<PeriodicOrbit> = words
        .par_iter()
        .map(|w| PeriodicOrbit::from_word(map, w, potentials))
        .collect::<Result<_>>()?;
    Ok(orbits
        .into_iter()
        .filter(|o| region_floor.map_or(true, |f| o.min_point >= f))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompactSupParams {
    /// Binary refinement depth of `J₀`.
    pub depth: usize,
    pub node_limit: usize,
    pub orbit_period: usize,
    pub orbit_cap: usize,
    /// Sub-pieces per node for the variation bound.
    pub pieces: usize,
}

impl Default for CompactSupParams {
    fn default() -> Self {
        Self { depth: 10, node_limit: 1 << 16, orbit_period: 12, orbit_cap: 12, pieces: 64 }
    }
}

/// Certified sup of `φ` on `[a, b]` from `pieces` equal sub-pieces, each
/// bounded by its end values and the seminorm.
fn piece_sup(phi: &PotentialSpec, a: f64, b: f64, semi: f64, pieces: usize) -> f64 {
    let mut best = f64::NEG_INFINITY;
    let mut za = a;
    for i in 1..=pieces {
        let zb = if i == pieces { b } else { a + (b - a) * i as f64 / pieces as f64 };
        best = best.max(phi.interval_sup(za, zb, semi));
        za = zb;
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactSup {
    pub m0: usize,
    pub depth: usize,
    pub nodes: usize,
    pub edges: usize,
    /// Best periodic average on `[x_{m₀}, 1]`, minus `φ(0)`.
    #[serde(with = "crate::ext_float")]
    pub eta_lower: f64,
    /// Max-mean-cycle bound on `[x_{m₀}, 1]`, minus `φ(0)`.
    #[serde(with = "crate::ext_float")]
    pub eta_upper: f64,
    pub best_orbit: Option<PeriodicOrbit>,
}

/// Brackets `sup ∫φ dν − φ(0)` over invariant `ν` supported in `[x_{m₀}, 1]`.
///
/// Upper bound: the max mean cycle of the graph whose nodes are the levels
/// `Jₙ` (`1 ≤ n < m₀`) and the depth-`k` binary cells of `J₀`, weighted by
/// certified sups of `φ`. Lower bound: the best periodic orbit in the region.
pub fn compact_sup(map: &MpMap, phi: &PotentialSpec, m0: usize, params: CompactSupParams) -> Result<CompactSup> {
    if m0 < 2 {
        return Err(Error::InvalidParameter(format!("compact_sup needs m0 ≥ 2, got {m0}")));
    }
    let k = params.depth;
    if k == 0 || k > 24 {
        return Err(Error::DepthExceeded { depth: k, cap: 24 });
    }
    let levels = m0 - 1;
    let cells = 1usize << k;
    let nodes = levels + cells;
    if nodes > params.node_limit {
        let feasible = (1..=24).rev().find(|&d| levels + (1usize << d) <= params.node_limit);
        return Err(Error::GraphTooLarge { nodes, limit: params.node_limit, feasible_depth: feasible });
    }
    let pieces = params.pieces.max(1);
    let orbit = map.marked_points(m0)?;
    let semi = phi.norms()?.semi.upper;
    let mut weights: Vec<f64> = (1..m0)
        .into_par_iter()
        .map(|n| piece_sup(phi, orbit.x(n + 1), orbit.x(n), semi, pieces))
        .collect();
    // Bound every coarser level too and keep each cell below its parent, so
    // that refining never loosens a weight.
    let mut cell_weights = vec![piece_sup(phi, map.x1(), 1.0, semi, pieces)];
    for d in 1..=k {
        cell_weights = (0..1usize << d)
            .into_par_iter()
            .map(|v| {
                let mut word = Vec::with_capacity(d + 1);
                word.push(1u8);
                word.extend((0..d).map(|b| ((v >> (d - 1 - b)) & 1) as u8));
                let iv = map.cylinder(&word)?;
                Ok(piece_sup(phi, iv.lo, iv.hi, semi, pieces).min(cell_weights[v >> 1]))
            })
            .collect::<Result<_>>()?;
    }
    weights.extend(cell_weights);
    let level = |n: usize| n - 1;
    let cell = |v: usize| levels + v;
    let mut g = WeightedDigraph::with_nodes(weights);
    for n in 2..m0 {
        g.add_edge(level(n), level(n - 1));
    }
    for v in 0..cells {
        g.add_edge(level(1), cell(v));
    }
    // The cell with word 1·w maps onto the cylinder of w.
    let half = 1usize << (k - 1);
    for v in 0..cells {
        if v >= half {
            let u = v - half;
            g.add_edge(cell(v), cell(2 * u));
            g.add_edge(cell(v), cell(2 * u + 1));
        } else if v > 0 {
            let zeros = k - (usize::BITS - v.leading_zeros()) as usize;
            if zeros < m0 {
                g.add_edge(cell(v), level(zeros));
            }
        } else {
            for n in k..m0 {
                g.add_edge(cell(v), level(n));
            }
        }
    }
    let phi0 = phi.value_at_zero;
    let wmax = (0..g.node_count()).map(|v| g.weight(v).abs()).fold(0.0, f64::max);
    let mean = g
        .max_mean_cycle()
        .ok_or_else(|| Error::NonConvergent("excursion graph has no cycle".into()))?;
    let pad = 4.0 * g.node_count() as f64 * f64::EPSILON * wmax.max(phi0.abs());
    let eta_upper = mean - phi0 + pad;

    let orbits = enumerate_periodic_orbits(map, params.orbit_period, params.orbit_cap, Some(orbit.x(m0)), &[])?;
    let best = orbits
        .into_iter()
        .map(|o| (o.average(phi), o))
        .fold(None::<(f64, PeriodicOrbit)>, |acc, (a, o)| match acc {
            Some((b, _)) if b >= a => acc,
            _ => Some((a, o)),
        });
    let (eta_lower, best_orbit) = match best {
        Some((a, mut o)) => {
            o.averages.insert(phi.name.clone(), a);
            (a - phi0, Some(o))
        }
        None => (f64::NEG_INFINITY, None),
    };
    Ok(CompactSup {
        m0,
        depth: k,
        nodes: g.node_count(),
        edges: g.edge_count(),
        eta_lower,
        eta_upper,
        best_orbit,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransitionVerdict {
    CertifiedTransition,
    CertifiedNoTransition,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    GammaAboveAlpha { gamma: f64, alpha: f64 },
    PositiveLeadingCoefficient { c: f64 },
    MaximizingOrbit { return_times: Vec<usize>, point: f64, period: usize, average: f64, value_at_zero: f64 },
    CompactSup { m0: usize, eta_upper: f64 },
    OperatorBound { beta: f64, ell: usize, pressure_hi: f64, log_z_hi: Option<f64> },
    None { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyBudgets {
    pub scan_horizon: usize,
    /// Marked points cached for the `n₀` search.
    pub marked_cache: usize,
    /// Largest `m₀` handed to the compact optimization.
    pub m0_cap: usize,
    pub compact: CompactSupParams,
    /// Inverse temperatures tried by the operator route.
    pub betas: Vec<f64>,
    pub ell: usize,
    pub fiber: FiberParams,
}

impl Default for CertifyBudgets {
    fn default() -> Self {
        Self {
            scan_horizon: 1000,
            marked_cache: 100_000,
            m0_cap: 4096,
            compact: CompactSupParams::default(),
            betas: vec![1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0],
            ell: 3,
            fiber: FiberParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionCertificate {
    pub potential: String,
    pub alpha: f64,
    pub gamma: f64,
    pub theta: f64,
    pub leading_coefficient: f64,
    pub c: Option<f64>,
    pub n0: Option<usize>,
    /// `m₀` from the bound, when it fits in 62 bits.
    pub m0: Option<u64>,
    pub m0_log_bound: Option<f64>,
    /// `m₀` actually used for the compact optimization.
    pub m0_used: Option<usize>,
    #[serde(with = "crate::ext_float::option", default)]
    pub eta_lower: Option<f64>,
    #[serde(with = "crate::ext_float::option", default)]
    pub eta_upper: Option<f64>,
    pub constants: Option<DistortionConstants>,
    pub verdict: TransitionVerdict,
    pub witness: Witness,
    pub notes: Vec<String>,
    pub budgets: CertifyBudgets,
    /// Wall-clock seconds per stage.
    #[serde(skip)]
    pub timings: Vec<(String, f64)>,
}

/// Runs the certification pipeline for `φ` with exponent `gamma`.
pub fn certify_transition(map: &MpMap, phi: &PotentialSpec, gamma: f64, budgets: &CertifyBudgets) -> Result<TransitionCertificate> {
    check_gamma(phi, gamma)?;
    let alpha = map.alpha();
    let mut cert = TransitionCertificate {
        potential: phi.name.clone(),
        alpha,
        gamma,
        theta: 1.0 - gamma / alpha,
        leading_coefficient: phi.c,
        c: None,
        n0: None,
        m0: None,
        m0_log_bound: None,
        m0_used: None,
        eta_lower: None,
        eta_upper: None,
        constants: None,
        verdict: TransitionVerdict::Undetermined,
        witness: Witness::None { reason: String::new() },
        notes: Vec::new(),
        budgets: budgets.clone(),
        timings: Vec::new(),
    };
    let mut clock = Instant::now();
    let mut lap = |cert: &mut TransitionCertificate, stage: &str| {
        cert.timings.push((stage.to_string(), clock.elapsed().as_secs_f64()));
        clock = Instant::now();
    };

    if gamma > alpha * (1.0 + 1e-12) {
        cert.verdict = TransitionVerdict::CertifiedNoTransition;
        cert.witness = Witness::GammaAboveAlpha { gamma, alpha };
        return Ok(cert);
    }
    if phi.c > 0.0 {
        cert.verdict = TransitionVerdict::CertifiedNoTransition;
        cert.witness = Witness::PositiveLeadingCoefficient { c: phi.c };
        return Ok(cert);
    }

    let constants = distortion_constants(map, gamma, budgets.scan_horizon)?;
    cert.constants = Some(constants);
    lap(&mut cert, "constants");

    let orbit = map.marked_points(budgets.marked_cache)?;
    match find_n0_and_c(phi, gamma, &orbit) {
        Ok(local) => {
            cert.n0 = Some(local.n0);
            cert.c = Some(local.c);
            if !local.certified {
                cert.notes.push("ratio bound near 0 is sampled, not certified".into());
            }
            match compute_m0(phi, gamma, local.c, local.n0, &constants) {
                Ok(b) => {
                    cert.m0 = Some(b.m0);
                    cert.m0_log_bound = Some(b.log_bound);
                }
                Err(Error::Overflow { log_value }) => {
                    cert.m0_log_bound = Some(log_value);
                    cert.notes.push(format!("m0 bound exceeds 2^62 (log bound {log_value:.6e})"));
                }
                Err(e) => return Err(e),
            }
        }
        Err(Error::NoNegativeMargin(msg)) => cert.notes.push(format!("no local margin: {msg}")),
        Err(e) => return Err(e),
    }
    lap(&mut cert, "local_constants");

    let exact_m0 = cert.m0.filter(|&m| m <= budgets.m0_cap as u64).map(|m| m.max(2) as usize);
    let m0_used = exact_m0.unwrap_or(budgets.m0_cap.max(2));
    if exact_m0.is_none() {
        cert.notes.push(format!("compact optimization ran with capped m0 = {m0_used}"));
    }
    match compact_sup(map, phi, m0_used, budgets.compact) {
        Ok(cs) => {
            cert.m0_used = Some(m0_used);
            cert.eta_lower = Some(cs.eta_lower);
            cert.eta_upper = Some(cs.eta_upper);
            lap(&mut cert, "compact_sup");
            if cs.eta_lower >= 0.0 {
                let o = cs.best_orbit.expect("finite eta_lower comes from an orbit");
                cert.verdict = TransitionVerdict::CertifiedNoTransition;
                cert.witness = Witness::MaximizingOrbit {
                    return_times: o.return_word.map(|w| w.times).unwrap_or_default(),
                    point: o.point,
                    period: o.period,
                    average: o.averages[&phi.name],
                    value_at_zero: phi.value_at_zero,
                };
                return Ok(cert);
            }
            if cs.eta_upper < 0.0 && exact_m0.is_some() && cert.n0.is_some() {
                cert.verdict = TransitionVerdict::CertifiedTransition;
                cert.witness = Witness::CompactSup { m0: m0_used, eta_upper: cs.eta_upper };
                return Ok(cert);
            }
        }
        Err(e @ Error::GraphTooLarge { .. }) => cert.notes.push(e.to_string()),
        Err(e) => return Err(e),
    }

    if budgets.betas.is_empty() {
        cert.witness = Witness::None { reason: "no inverse temperatures budgeted for the operator route".into() };
        return Ok(cert);
    }
    let fiber = FiberTable::build(map, phi, budgets.fiber)?;
    lap(&mut cert, "fiber_build");
    let mut best_hi = f64::INFINITY;
    for &beta in &budgets.betas {
        let p = beta * phi.value_at_zero;
        let pt = match fiber.two_variable_pressure(beta, p, budgets.ell) {
            Ok(pt) => pt,
            Err(Error::NonConvergent(msg)) => {
                cert.notes.push(format!("β={beta}: {msg}"));
                continue;
            }
            Err(e) => return Err(e),
        };
        best_hi = best_hi.min(pt.bracket.hi);
        if pt.bracket.hi < 0.0 && !pt.divergence_flag {
            let log_z_hi = fiber.z_partition(beta, p, budgets.ell).ok().map(|b| b.hi);
            cert.verdict = TransitionVerdict::CertifiedTransition;
            cert.witness = Witness::OperatorBound { beta, ell: budgets.ell, pressure_hi: pt.bracket.hi, log_z_hi };
            lap(&mut cert, "operator_route");
            return Ok(cert);
        }
    }
    lap(&mut cert, "operator_route");
    cert.witness = Witness::None {
        reason: format!(
            "eta bracket [{:?}, {:?}] straddles 0 or is unavailable; best operator upper bound {best_hi}",
            cert.eta_lower, cert.eta_upper
        ),
    };
    Ok(cert)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyLemmaStatus {
    Holds,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyLemmaReport {
    pub potential: String,
    #[serde(with = "crate::ext_float")]
    pub pressure_lo: f64,
    #[serde(with = "crate::ext_float")]
    pub pressure_hi: f64,
    #[serde(with = "crate::ext_float")]
    pub max_average: f64,
    /// `pressure_lo − max_average`.
    #[serde(with = "crate::ext_float")]
    pub margin: f64,
    pub orbits: usize,
    pub status: KeyLemmaStatus,
}

/// Checks that the pressure exceeds every periodic average off `0`.
pub fn key_lemma_check(phi: &PotentialSpec, orbits: &[PeriodicOrbit], pressure: &PressureBracket) -> Result<KeyLemmaReport> {
    if orbits.iter().any(|o| o.return_word.is_none()) {
        return Err(Error::InvalidParameter("key_lemma_check excludes the fixed point 0".into()));
    }
    if orbits.is_empty() {
        return Err(Error::InvalidParameter("key_lemma_check needs at least one orbit".into()));
    }
    let max_average = orbits.iter().map(|o| o.average(phi)).fold(f64::NEG_INFINITY, f64::max);
    let margin = pressure.lo - max_average;
    Ok(KeyLemmaReport {
        potential: phi.name.clone(),
        pressure_lo: pressure.lo,
        pressure_hi: pressure.hi,
        max_average,
        margin,
        orbits: orbits.len(),
        status: if margin > 0.0 { KeyLemmaStatus::Holds } else { KeyLemmaStatus::Inconclusive },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pressure::pressure_partition;
    use std::f64::consts::PI;

    fn alpha1() -> MpMap {
        MpMap::new(1.0).unwrap()
    }

    #[test]
    fn series_bounds() {
        let z = zeta_upper(2.0);
        assert!(z >= PI * PI / 6.0 && z - PI * PI / 6.0 < 1e-12, "{z}");
        // Σ (1 + m)^{-2} is the same series.
        let s = shifted_series_upper(1.0, 2.0);
        assert!(s >= PI * PI / 6.0 && s - PI * PI / 6.0 < 1e-12);
    }

    #[test]
    fn constants_at_alpha_one() {
        let m = alpha1();
        let k = distortion_constants(&m, 1.0, 1000).unwrap();
        assert_eq!(k.k, 1.0);
        assert!((k.series - PI * PI / 6.0).abs() < 1e-9);
        // Oracle: Df is increasing on J₀, so its infimum is 1 + 2x₁ = √5.
        let want = 5f64.sqrt().sqrt() - 1.0;
        assert!((k.eps1_branch - want).abs() < 1e-12, "{}", k.eps1_branch);
        assert!((want - 0.495349).abs() < 1e-6);
        assert!(k.eps1 <= k.eps0 && k.eps1 <= k.eps1_branch);
        assert!(k.c1 >= 1.0 && k.d > 0.0);
        assert!(distortion_constants(&m, 1.0, 10).is_err());
    }

    #[test]
    fn k_dominates_marked_points() {
        for alpha in [0.5, 1.0, 2.0] {
            let m = MpMap::new(alpha).unwrap();
            let k = distortion_constants(&m, 0.3, 1000).unwrap();
            let orbit = m.marked_points(1000).unwrap();
            for n in 1..=1000 {
                let lhs = orbit.x(n).powf(0.3 - 1.0);
                let rhs = k.k / (n as f64).powf((0.3 - 1.0) / alpha);
                assert!(lhs <= rhs * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn lower_derivative_bound_on_levels() {
        for alpha in [0.5, 1.0, 2.0] {
            let m = MpMap::new(alpha).unwrap();
            let k = distortion_constants(&m, alpha, 1000).unwrap();
            let orbit = m.marked_points(22).unwrap();
            for n in 1..=20 {
                let (a, b) = (orbit.x(n + 1), orbit.x(n));
                for i in 0..100 {
                    let x = a + (b - a) * (i as f64 + 0.5) / 100.0;
                    let lhs = (1.0 + k.eps1 * n as f64).powf(1.0 / alpha + 1.0);
                    assert!(m.derivative_along(x, n).unwrap() >= lhs, "α={alpha} n={n} x={x}");
                }
            }
        }
    }

    #[test]
    fn omega_and_psi_local_constants() {
        let m = alpha1();
        let orbit = m.marked_points(1000).unwrap();
        let om = PotentialSpec::omega(1.0).unwrap();
        let l = find_n0_and_c(&om, 1.0, &orbit).unwrap();
        assert!((l.c + 0.5).abs() < 1e-9, "{l:?}");
        let psi = PotentialSpec::psi(1.0).unwrap();
        let l = find_n0_and_c(&psi, 1.0, &orbit).unwrap();
        assert_eq!(l.n0, 2);
        // Oracle: the ratio −(x − x₁)² increases on (0, x₂], so its sup is at x₂.
        let want = -(orbit.x(2) - orbit.x(1)).powi(2) / 2.0;
        assert!((l.c - want).abs() < 1e-9, "{} vs {want}", l.c);
        assert!((want + 0.01736).abs() < 1e-5);
        let hat = PotentialSpec::hat(1.0).unwrap();
        let l = find_n0_and_c(&hat, 1.0, &orbit).unwrap();
        let want = -(1.0 - orbit.x(l.n0)) / 2.0;
        assert!((l.c - want).abs() < 1e-9);
        let tilde = PotentialSpec::tilde(1.0).unwrap();
        assert!(matches!(find_n0_and_c(&tilde, 1.0, &orbit), Err(Error::NoNegativeMargin(_))));
    }

    #[test]
    fn m0_branches() {
        let m = alpha1();
        let om = PotentialSpec::omega(1.0).unwrap();
        let k = distortion_constants(&m, 1.0, 1000).unwrap();
        assert_eq!(m0_branch(1.0, 1.0), M0Branch::Exponential);
        // Independent plug-in: 4 exp(8 (D·1 + 2·1·1)) with n₀ = 1, c = −1/2.
        let want = 4f64.ln() + 8.0 * (k.d + 2.0);
        match compute_m0(&om, 1.0, -0.5, 1, &k) {
            Err(Error::Overflow { log_value }) => assert!((log_value - want).abs() < 1e-9 * want),
            other => panic!("{other:?}"),
        }
        let om_half = PotentialSpec::omega(0.5).unwrap();
        let kh = distortion_constants(&m, 0.5, 1000).unwrap();
        assert_eq!(m0_branch(1.0, 0.5), M0Branch::Power);
        let norms = om_half.norms().unwrap();
        let inner = 2.0 * 2f64.sqrt() + 4.0 * 0.5 / 0.5 * (kh.d * norms.semi.upper + 2.0 * norms.sup.upper);
        let bound = inner * inner;
        let r = compute_m0(&om_half, 0.5, -0.5, 1, &kh).unwrap();
        assert_eq!(r.branch, M0Branch::Power);
        assert_eq!(r.m0, bound.floor() as u64 + 1);
    }

    #[test]
    fn periodic_orbit_examples() {
        let m = alpha1();
        let one = PeriodicOrbit::from_word(&m, &ReturnWord::new(vec![1]).unwrap(), &[]).unwrap();
        assert_eq!(one.point, 1.0);
        assert_eq!(one.period, 1);
        let w2 = ReturnWord::new(vec![2]).unwrap();
        let two = PeriodicOrbit::from_word(&m, &w2, &[]).unwrap();
        // Oracle: bisection on f²(x) − x inside the cylinder I₂.
        let cyl = w2.cylinder(&m);
        let f2 = |x: f64| m.fwd(m.fwd(x)) - x;
        let (mut a, mut b) = (cyl.lo, cyl.hi);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if f2(a).signum() == f2(mid).signum() {
                a = mid;
            } else {
                b = mid;
            }
        }
        assert!((two.point - a).abs() < 1e-12);
        assert!(two.residual <= 1e-10);
        assert_eq!(m.itinerary(two.point, 2).unwrap(), vec![1, 0]);
        for n in 3..8 {
            let o = PeriodicOrbit::from_word(&m, &ReturnWord::new(vec![n]).unwrap(), &[]).unwrap();
            assert!(cylinder_contains(&m, n, o.point));
        }
    }

    fn cylinder_contains(m: &MpMap, n: usize, x: f64) -> bool {
        let orbit = m.marked_points(n + 1).unwrap();
        x > orbit.y(n + 1) && x <= orbit.y(n)
    }

    #[test]
    fn necklace_counts() {
        // Aperiodic necklaces of compositions of t number (1/t)Σ_{d|t} μ(d) (2^{t/d} − 1).
        let words = return_necklaces(6, 6);
        let count = |t: usize| words.iter().filter(|w| w.total_time() == t).count();
        assert_eq!((1..=6).map(count).collect::<Vec<_>>(), vec![1, 1, 2, 3, 6, 9]);
    }

    #[test]
    fn omega_compact_sup_below_level() {
        let m = alpha1();
        for g in [0.5, 1.0] {
            let om = PotentialSpec::omega(g).unwrap();
            let m0 = 40;
            let cs = compact_sup(&m, &om, m0, CompactSupParams { depth: 6, ..Default::default() }).unwrap();
            let orbit = m.marked_points(m0).unwrap();
            assert!(cs.eta_upper <= -orbit.x(m0).powf(g) * (1.0 - 1e-9), "{cs:?}");
            assert!(cs.eta_lower <= cs.eta_upper);
        }
    }

    #[test]
    fn hat_and_psi_compact_sup() {
        let m = alpha1();
        let hat = PotentialSpec::hat(1.0).unwrap();
        let cs = compact_sup(&m, &hat, 64, CompactSupParams::default()).unwrap();
        assert_eq!(cs.eta_lower, 0.0);
        assert_eq!(cs.best_orbit.as_ref().unwrap().point, 1.0);
        let psi = PotentialSpec::psi(1.0).unwrap();
        let mut prev = f64::INFINITY;
        for depth in [6, 8, 10] {
            let cs = compact_sup(&m, &psi, 256, CompactSupParams { depth, ..Default::default() }).unwrap();
            assert!(cs.eta_upper < 0.0 && cs.eta_lower <= cs.eta_upper, "{cs:?}");
            assert!(cs.eta_upper <= prev + 1e-12);
            prev = cs.eta_upper;
        }
    }

    #[test]
    fn graph_budget() {
        let m = alpha1();
        let psi = PotentialSpec::psi(1.0).unwrap();
        let p = CompactSupParams { depth: 12, node_limit: 3000, ..Default::default() };
        match compact_sup(&m, &psi, 100, p) {
            Err(Error::GraphTooLarge { feasible_depth, .. }) => assert_eq!(feasible_depth, Some(11)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cheap_verdicts() {
        let m = alpha1();
        let om2 = PotentialSpec::omega(2.0).unwrap();
        let c = certify_transition(&m, &om2, 2.0, &CertifyBudgets::default()).unwrap();
        assert_eq!(c.verdict, TransitionVerdict::CertifiedNoTransition);
        assert!(matches!(c.witness, Witness::GammaAboveAlpha { .. }));
        let pos = PotentialSpec::polynomial("pos", 0.0, 1.0, 0.5, vec![]).unwrap();
        let c = certify_transition(&m, &pos, 1.0, &CertifyBudgets::default()).unwrap();
        assert!(matches!(c.witness, Witness::PositiveLeadingCoefficient { .. }));
        let hat = PotentialSpec::hat(1.0).unwrap();
        let c = certify_transition(&m, &hat, 1.0, &CertifyBudgets::default()).unwrap();
        assert_eq!(c.verdict, TransitionVerdict::CertifiedNoTransition);
        match c.witness {
            Witness::MaximizingOrbit { point, average, value_at_zero, .. } => {
                assert_eq!(point, 1.0);
                assert_eq!(average, value_at_zero);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn key_lemma_examples() {
        let m = alpha1();
        let orbits = enumerate_periodic_orbits(&m, 6, 6, None, &[]).unwrap();
        let zero = PotentialSpec::zero();
        let r = key_lemma_check(&zero, &orbits, &pressure_partition(&m, &zero, 8).unwrap()).unwrap();
        assert_eq!(r.status, KeyLemmaStatus::Holds);
        assert!((r.margin - std::f64::consts::LN_2).abs() < 1e-12);
        let om = PotentialSpec::omega(1.0).unwrap();
        let fixed = enumerate_periodic_orbits(&m, 1, 1, None, &[om.clone()]).unwrap();
        assert_eq!(fixed[0].averages["omega(1)"], -1.0);
        let r = key_lemma_check(&om, &fixed, &pressure_partition(&m, &om, 12).unwrap()).unwrap();
        assert!(r.pressure_lo > -1.0 && r.status == KeyLemmaStatus::Holds);
        let geo = PotentialSpec::geometric(1.0).unwrap();
        for o in &orbits {
            // Oracle: the Lyapunov average along the forward orbit.
            let lyap = m.log_derivative_along(o.point, o.period).unwrap() / o.period as f64;
            assert!((o.average(&geo) + lyap).abs() < 1e-9);
        }
        let r = key_lemma_check(&geo, &orbits, &pressure_partition(&m, &geo, 10).unwrap()).unwrap();
        assert_eq!(r.status, KeyLemmaStatus::Holds);
        assert!(key_lemma_check(&zero, &[PeriodicOrbit::zero(&[])], &PressureBracket::closed_form(0.0, 1)).is_err());
    }
}
