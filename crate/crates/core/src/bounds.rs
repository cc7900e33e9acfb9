//! Adaptive-grid sup bounds for continuous functions of one variable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A lower and upper bound for a supremum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupBound {
    /// Largest sampled value.
    pub lower: f64,
    /// Node maximum inflated by the grid-gap bound.
    pub upper: f64,
}

const MAX_NODES: usize = 1 << 21;

/// Upper bound for `max_{[0, w]} g` given `g(0) = a`, `g(w) = b` and a
/// Lipschitz-type budget `v` for the whole gap.
#[inline]
pub fn gap_max(a: f64, b: f64, v: f64) -> f64 {
    let hi = a.max(b);
    if (a - b).abs() <= v {
        (a + b + v) * 0.5
    } else {
        hi
    }
    .max(hi)
}

/// Lower bound for `min_{[0, w]} g`, mirror of [`gap_max`].
#[inline]
pub fn gap_min(a: f64, b: f64, v: f64) -> f64 {
    -gap_max(-a, -b, v)
}

/// Bounds `sup_{[a, b]} f` on an adaptive grid. Between neighbouring nodes
/// the function is bounded with a Lipschitz constant estimated as twice the
/// largest neighbouring secant slope; intervals whose bound exceeds the node
/// maximum by more than `tol` are bisected until none remain.
pub fn sup_on_interval(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<SupBound> {
    if !(a < b) {
        let v = f(a);
        return Ok(SupBound { lower: v, upper: v });
    }
    let n0 = 256;
    let mut ts: Vec<f64> = (0..=n0).map(|i| a + (b - a) * i as f64 / n0 as f64).collect();
    let mut vs: Vec<f64> = ts.iter().map(|&t| f(t)).collect();
    for pass in 0..80 {
        if let Some(i) = vs.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonConvergent(format!("non-finite value at t={}", ts[i])));
        }
        let m = vs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let k = ts.len() - 1;
        let slopes: Vec<f64> = (0..k).map(|i| (vs[i + 1] - vs[i]) / (ts[i + 1] - ts[i])).collect();
        let mut upper = m;
        let mut refine = vec![false; k];
        let mut any = false;
        for i in 0..k {
            let mut l = slopes[i].abs();
            if i > 0 {
                l = l.max(slopes[i - 1].abs());
            }
            if i + 1 < k {
                l = l.max(slopes[i + 1].abs());
            }
            let ub = gap_max(vs[i], vs[i + 1], 2.0 * l * (ts[i + 1] - ts[i]));
            upper = upper.max(ub);
            if ub > m + tol * m.abs().max(1.0) {
                refine[i] = true;
                any = true;
            }
        }
        if !any {
            return Ok(SupBound { lower: m, upper });
        }
        if ts.len() > MAX_NODES {
            return Err(Error::NonConvergent(format!(
                "grid refinement exceeded {MAX_NODES} nodes after {pass} passes"
            )));
        }
        let mut nts = Vec::with_capacity(ts.len() * 2);
        let mut nvs = Vec::with_capacity(ts.len() * 2);
        for i in 0..k {
            nts.push(ts[i]);
            nvs.push(vs[i]);
            if refine[i] {
                let mid = 0.5 * (ts[i] + ts[i + 1]);
                if mid > ts[i] && mid < ts[i + 1] {
                    nts.push(mid);
                    nvs.push(f(mid));
                }
            }
        }
        nts.push(ts[k]);
        nvs.push(vs[k]);
        if nts.len() == ts.len() {
            let m2 = nvs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            return Ok(SupBound { lower: m2, upper });
        }
        ts = nts;
        vs = nvs;
    }
    Err(Error::NonConvergent("grid refinement did not stabilize".into()))
}
