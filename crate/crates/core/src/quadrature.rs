//! Composite Gauss–Legendre quadrature on intervals with forced breakpoints.
//!
//! Integrands built from tent bumps have kinks at the support edges and the
//! bump centre, so panel edges are always inserted there.

/// Eight-point Gauss–Legendre abscissae on [-1, 1] (positive half).
const GL8_X: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL8_W: [f64; 4] = [
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Panel layout for composite quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositeRule {
    /// Uniform panels per unit length (panel edges sit on multiples of `1/panels_per_unit`).
    pub panels_per_unit: usize,
}

impl Default for CompositeRule {
    fn default() -> Self {
        Self { panels_per_unit: 64 }
    }
}

impl CompositeRule {
    pub const NODES_PER_PANEL: usize = 8;

    pub fn new(panels_per_unit: usize) -> Self {
        Self {
            panels_per_unit: panels_per_unit.max(1),
        }
    }

    /// Nodes and weights for `[a, b]`, with extra panel edges at `breakpoints`.
    pub fn nodes(&self, a: f64, b: f64, breakpoints: &[f64]) -> QuadratureNodes {
        assert!(b >= a, "quadrature interval reversed: [{a}, {b}]");
        let edges = panel_edges(a, b, self.panels_per_unit, breakpoints);
        let mut x = Vec::with_capacity((edges.len() - 1) * Self::NODES_PER_PANEL);
        let mut w = Vec::with_capacity(x.capacity());
        for pair in edges.windows(2) {
            let (lo, hi) = (pair[0], pair[1]);
            let mid = 0.5 * (lo + hi);
            let half = 0.5 * (hi - lo);
            for k in 0..4 {
                x.push(mid - half * GL8_X[3 - k]);
                w.push(half * GL8_W[3 - k]);
            }
            for k in 0..4 {
                x.push(mid + half * GL8_X[k]);
                w.push(half * GL8_W[k]);
            }
        }
        QuadratureNodes { x, w }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, breakpoints: &[f64], f: F) -> f64 {
        self.nodes(a, b, breakpoints).integrate(f)
    }
}

/// Precomputed nodes and weights; reused across root-finding iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureNodes {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
}

impl QuadratureNodes {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.x.iter().zip(&self.w).map(|(&x, &w)| w * f(x)).sum()
    }
}

fn panel_edges(a: f64, b: f64, per_unit: usize, breakpoints: &[f64]) -> Vec<f64> {
    let step = 1.0 / per_unit as f64;
    let first = (a * per_unit as f64).floor() as i64 + 1;
    let last = (b * per_unit as f64).ceil() as i64 - 1;
    let mut edges = vec![a];
    for j in first..=last {
        let e = j as f64 * step;
        if e > a && e < b {
            edges.push(e);
        }
    }
    edges.extend(breakpoints.iter().copied().filter(|&e| e > a && e < b));
    edges.push(b);
    edges.sort_by(|p, q| p.total_cmp(q));
    let scale = (b - a).abs().max(1.0);
    edges.dedup_by(|p, q| (*p - *q).abs() <= 1e-13 * scale);
    if edges.len() < 2 {
        edges = vec![a, b];
    }
    edges
}
