//! Maximum mean cycle of a node-weighted digraph (Karp's algorithm).

/// A digraph whose walks collect the weight of every node they leave.
#[derive(Debug, Clone, Default)]
pub struct WeightedDigraph {
    weights: Vec<f64>,
    succ: Vec<Vec<usize>>,
}

impl WeightedDigraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_nodes(weights: Vec<f64>) -> Self {
        let succ = vec![Vec::new(); weights.len()];
        Self { weights, succ }
    }

    pub fn add_node(&mut self, weight: f64) -> usize {
        self.weights.push(weight);
        self.succ.push(Vec::new());
        self.weights.len() - 1
    }

    pub fn add_edge(&mut self, from: usize, to: usize) {
        assert!(from < self.weights.len() && to < self.weights.len(), "edge endpoint out of range");
        self.succ[from].push(to);
    }

    pub fn node_count(&self) -> usize {
        self.weights.len()
    }

    pub fn edge_count(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    pub fn weight(&self, v: usize) -> f64 {
        self.weights[v]
    }

    /// One relaxation step: the best weight of a walk with one more edge.
    fn step(&self, d: &[f64], out: &mut [f64]) {
        out.fill(f64::NEG_INFINITY);
        for (u, targets) in self.succ.iter().enumerate() {
            let du = d[u];
            if du == f64::NEG_INFINITY {
                continue;
            }
            let cand = du + self.weights[u];
            for &v in targets {
                if cand > out[v] {
                    out[v] = cand;
                }
            }
        }
    }

    /// Largest mean node weight over all cycles, `None` when acyclic.
    ///
    /// Karp's characterization `max_v min_k (D_n(v) − D_k(v)) / (n − k)`,
    /// where `D_k(v)` is the best weight of a `k`-edge walk ending at `v`
    /// from any start. The table is swept twice so memory stays `O(V)`.
    pub fn max_mean_cycle(&self) -> Option<f64> {
        let n = self.weights.len();
        if n == 0 {
            return None;
        }
        let mut d = vec![0.0; n];
        let mut next = vec![0.0; n];
        for _ in 0..n {
            self.step(&d, &mut next);
            std::mem::swap(&mut d, &mut next);
        }
        let dn = d;
        if dn.iter().all(|&v| v == f64::NEG_INFINITY) {
            return None;
        }
        let mut best = vec![f64::INFINITY; n];
        let mut dk = vec![0.0; n];
        for k in 0..n {
            let len = (n - k) as f64;
            for v in 0..n {
                if dn[v] > f64::NEG_INFINITY && dk[v] > f64::NEG_INFINITY {
                    best[v] = best[v].min((dn[v] - dk[v]) / len);
                }
            }
            self.step(&dk, &mut next);
            std::mem::swap(&mut dk, &mut next);
        }
        (0..n)
            .filter(|&v| dn[v] > f64::NEG_INFINITY)
            .map(|v| best[v])
            .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))))
    }
}
