//! Topological pressure from partition sums over cylinders and from sums
//! over preimage trees.

use std::f64::consts::LN_2;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{gap_max, gap_min};
use crate::error::{Error, Result};
use crate::mp_map::MpMap;
use crate::potentials::PotentialSpec;

pub const MAX_DEPTH: usize = 24;
/// Probe points per cylinder in [`pressure_partition`].
pub const DEFAULT_PROBES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Partition,
    Tree,
    Bowen,
    ClosedForm,
}

/// A certified interval for a pressure value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressureBracket {
    #[serde(with = "crate::ext_float")]
    pub lo: f64,
    #[serde(with = "crate::ext_float")]
    pub hi: f64,
    /// Depth `n` (or `ℓ`) behind the bracket.
    pub depth: usize,
    pub method: Method,
    /// Point estimate when the method produces one.
    pub estimate: Option<f64>,
    /// False when part of the bound relied on sampling near `0`.
    pub certified: bool,
}

impl PressureBracket {
    pub fn closed_form(value: f64, depth: usize) -> Self {
        Self { lo: value, hi: value, depth, method: Method::ClosedForm, estimate: Some(value), certified: true }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn intersects(&self, other: &PressureBracket) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }
}

/// Running `log Σ exp(v)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogSumExp {
    max: f64,
    scaled: f64,
}

impl LogSumExp {
    pub(crate) fn new() -> Self {
        Self { max: f64::NEG_INFINITY, scaled: 0.0 }
    }

    pub(crate) fn add(&mut self, v: f64) {
        if v == f64::NEG_INFINITY {
            return;
        }
        if v <= self.max {
            self.scaled += (v - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - v).exp() + 1.0;
            self.max = v;
        }
    }

    pub(crate) fn merge(&mut self, other: LogSumExp) {
        if other.max == f64::NEG_INFINITY {
            return;
        }
        if self.max == f64::NEG_INFINITY {
            *self = other;
        } else if other.max <= self.max {
            self.scaled += other.scaled * (other.max - self.max).exp();
        } else {
            self.scaled = self.scaled * (self.max - other.max).exp() + other.scaled;
            self.max = other.max;
        }
    }

    pub(crate) fn value(&self) -> f64 {
        self.max + self.scaled.ln()
    }
}

#[derive(Clone, Copy)]
struct Sums {
    lower: LogSumExp,
    upper: LogSumExp,
    /// Sum at one designated probe, for tree estimates.
    probe: LogSumExp,
}

impl Sums {
    fn new() -> Self {
        Self { lower: LogSumExp::new(), upper: LogSumExp::new(), probe: LogSumExp::new() }
    }

    fn merge(&mut self, o: Sums) {
        self.lower.merge(o.lower);
        self.upper.merge(o.upper);
        self.probe.merge(o.probe);
    }
}

struct Walker<'a> {
    map: &'a MpMap,
    phi: &'a PotentialSpec,
    semi: f64,
    depth: usize,
    probe_index: usize,
}

/// Per-level state: orbit points at every probe, centered Birkhoff sums, and
/// accumulated variation budgets between neighbouring probes.
#[derive(Clone)]
struct Level {
    z: Vec<f64>,
    sum: Vec<f64>,
    var: Vec<f64>,
}

impl Walker<'_> {
    fn step(&self, from: &Level, digit: u8, to: &mut Level) {
        let g = self.phi.gamma;
        for (i, &z) in from.z.iter().enumerate() {
            let w = self.map.g(digit, z);
            to.z[i] = w;
            to.sum[i] = from.sum[i] + self.phi.excess(w);
        }
        for i in 0..from.var.len() {
            let dv = (to.z[i + 1].powf(g) - to.z[i].powf(g)).abs();
            to.var[i] = from.var[i] + self.semi * dv;
        }
    }

    fn leaf(&self, level: &Level, out: &mut Sums) {
        let mut sup = f64::NEG_INFINITY;
        let mut inf = f64::INFINITY;
        for i in 0..level.var.len() {
            let (a, b, v) = (level.sum[i], level.sum[i + 1], level.var[i]);
            sup = sup.max(gap_max(a, b, v));
            inf = inf.min(gap_min(a, b, v));
        }
        out.upper.add(sup);
        out.lower.add(inf);
        out.probe.add(level.sum[self.probe_index]);
    }

    fn walk(&self, stack: &mut [Level], d: usize, out: &mut Sums) {
        if d == self.depth {
            self.leaf(&stack[d], out);
            return;
        }
        for digit in 0..2u8 {
            let (head, tail) = stack.split_at_mut(d + 1);
            self.step(&head[d], digit, &mut tail[0]);
            self.walk(stack, d + 1, out);
        }
    }

    /// Sums over all words, parallel over the innermost `split` digits.
    fn run(&self, probes: &[f64]) -> Sums {
        let m = probes.len();
        let fresh = || Level { z: vec![0.0; m], sum: vec![0.0; m], var: vec![0.0; m - 1] };
        let split = self.depth.min(8);
        let parts: Vec<Sums> = (0..1usize << split)
            .into_par_iter()
            .map(|code| {
                let mut stack: Vec<Level> = (0..=self.depth).map(|_| fresh()).collect();
                stack[0].z.copy_from_slice(probes);
                for d in 0..split {
                    let digit = ((code >> d) & 1) as u8;
                    let (head, tail) = stack.split_at_mut(d + 1);
                    self.step(&head[d], digit, &mut tail[0]);
                }
                let mut out = Sums::new();
                self.walk(&mut stack, split, &mut out);
                out
            })
            .collect();
        let mut total = Sums::new();
        for p in parts {
            total.merge(p);
        }
        total
    }
}

fn check_depth(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter("depth must be at least 1".into()));
    }
    if n > MAX_DEPTH {
        return Err(Error::DepthExceeded { depth: n, cap: MAX_DEPTH });
    }
    Ok(())
}

fn finish(
    phi: &PotentialSpec,
    sums: Sums,
    n: usize,
    method: Method,
    estimate: bool,
) -> Result<PressureBracket> {
    let nf = n as f64;
    let phi0 = phi.value_at_zero;
    let cap = LN_2 + phi.value_sup()?.upper;
    let lo = (phi0 + sums.lower.value() / nf).max(phi0);
    let hi = (phi0 + sums.upper.value() / nf).min(cap);
    Ok(PressureBracket {
        lo,
        hi,
        depth: n,
        method,
        estimate: estimate.then(|| phi0 + sums.probe.value() / nf),
        certified: phi.h_bound(1.0).is_some(),
    })
}

/// Pressure bracket from the depth-`n` partition sums
/// `Σ_Q inf_Q exp(S_nφ)` and `Σ_Q sup_Q exp(S_nφ)`.
pub fn pressure_partition(map: &MpMap, phi: &PotentialSpec, n: usize) -> Result<PressureBracket> {
    pressure_partition_with(map, phi, n, DEFAULT_PROBES)
}

pub fn pressure_partition_with(
    map: &MpMap,
    phi: &PotentialSpec,
    n: usize,
    probes: usize,
) -> Result<PressureBracket> {
    check_depth(n)?;
    if phi.is_constant() {
        return Ok(PressureBracket {
            method: Method::Partition,
            ..PressureBracket::closed_form(LN_2 + phi.value_at_zero, n)
        });
    }
    let probes = probes.max(1);
    let ys: Vec<f64> = (0..=probes).map(|i| i as f64 / probes as f64).collect();
    let semi = phi.norms()?.semi.upper;
    let walker = Walker { map, phi, semi, depth: n, probe_index: 0 };
    finish(phi, walker.run(&ys), n, Method::Partition, false)
}

/// Pressure from the preimage tree of `y`: the estimate is
/// `(1/n) log Σ_{f^n x = y} exp(S_nφ(x))`, and the bracket comes from the
/// oscillation of `S_nφ` over each branch.
pub fn pressure_tree(map: &MpMap, phi: &PotentialSpec, y: f64, n: usize) -> Result<PressureBracket> {
    if !(y > 0.0 && y <= 1.0) {
        return Err(Error::InvalidParameter(format!("base point must lie in (0, 1], got {y}")));
    }
    check_depth(n)?;
    if phi.is_constant() {
        return Ok(PressureBracket {
            method: Method::Tree,
            ..PressureBracket::closed_form(LN_2 + phi.value_at_zero, n)
        });
    }
    let ys: Vec<f64> = if y < 1.0 { vec![0.0, y, 1.0] } else { vec![0.0, 1.0] };
    let semi = phi.norms()?.semi.upper;
    let walker = Walker { map, phi, semi, depth: n, probe_index: 1 };
    finish(phi, walker.run(&ys), n, Method::Tree, true)
}
