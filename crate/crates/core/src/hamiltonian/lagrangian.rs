use crate::error::{Error, Result};
use crate::rootfind::golden_max;

use super::{Family, HamiltonianSpec};

/// `L(α, x) = sup_p { −⟨p, α⟩ − H(p, x) }`.
#[derive(Debug, Clone)]
pub struct LagrangianEval<'a> {
    spec: &'a HamiltonianSpec,
}

impl<'a> LagrangianEval<'a> {
    pub fn new(spec: &'a HamiltonianSpec) -> Self {
        Self { spec }
    }

    pub fn spec(&self) -> &HamiltonianSpec {
        self.spec
    }

    pub fn has_closed_form(&self) -> bool {
        matches!(self.spec.family(), Family::QuadraticShifted { .. })
    }

    /// Closed form `|α|²/4 + ⟨p̄, α⟩ + V(x)` for the quadratic family, numeric otherwise.
    pub fn legendre(&self, alpha: &[f64], x: &[f64]) -> Result<f64> {
        match self.spec.family() {
            Family::QuadraticShifted { pbar, potential } => {
                if alpha.len() != pbar.len() || x.len() != pbar.len() {
                    return Err(Error::InvalidArgument("dimension mismatch in legendre".into()));
                }
                let a2: f64 = alpha.iter().map(|a| a * a).sum();
                let pa: f64 = pbar.iter().zip(alpha).map(|(p, a)| p * a).sum();
                Ok(0.25 * a2 + pa + potential.eval(x))
            }
            Family::Tabulated(_) => self.legendre_numeric(alpha, x).map(|(v, _)| v),
        }
    }

    /// Numeric maximization by cyclic golden-section search on a coercivity bracket.
    /// Returns the supremum and the maximizing momentum.
    pub fn legendre_numeric(&self, alpha: &[f64], x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let d = self.spec.dim();
        if alpha.len() != d || x.len() != d {
            return Err(Error::InvalidArgument("dimension mismatch in legendre".into()));
        }
        let zero = vec![0.0; d];
        let g0 = self.spec.grad_p_h(&zero, x)?;
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let c = self.spec.convexity_modulus();
        let p_max = (norm(alpha) + norm(&g0)) / c + 1.0;
        let (mut lo, mut hi) = (vec![-p_max; d], vec![p_max; d]);
        if let Family::Tabulated(t) = self.spec.family() {
            let (tlo, thi) = t.p_range();
            for i in 0..d {
                lo[i] = lo[i].max(tlo[i]);
                hi[i] = hi[i].min(thi[i]);
            }
        }
        let objective = |p: &[f64]| -> f64 {
            let pa: f64 = p.iter().zip(alpha).map(|(a, b)| a * b).sum();
            match self.spec.eval_h(p, x) {
                Ok(h) => -pa - h,
                Err(_) => f64::NEG_INFINITY,
            }
        };
        let mut p: Vec<f64> = (0..d).map(|i| 0.5 * (lo[i] + hi[i])).collect();
        let tol = 1e-11 * p_max.max(1.0);
        let sweeps = if d == 1 { 1 } else { 400 };
        for _ in 0..sweeps {
            let mut moved: f64 = 0.0;
            for i in 0..d {
                let mut q = p.clone();
                let (xi, _, _) = golden_max(
                    |t| {
                        q[i] = t;
                        objective(&q)
                    },
                    lo[i],
                    hi[i],
                    tol,
                    400,
                );
                moved = moved.max((xi - p[i]).abs());
                p[i] = xi;
            }
            if moved < tol * 10.0 {
                break;
            }
        }
        for i in 0..d {
            let edge = 1e-7 * (hi[i] - lo[i]);
            if p[i] - lo[i] < edge || hi[i] - p[i] < edge {
                return Err(Error::LegendreNotConverged { axis: i, lo: lo[i], hi: hi[i] });
            }
        }
        Ok((objective(&p), p))
    }
}
