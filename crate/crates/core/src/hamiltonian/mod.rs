//! Convex, coercive, ℤᵈ-periodic Hamiltonians and the bump perturbations.
//!
//! The cell is `Q = [-1/2, 1/2)ᵈ`; every `x` is wrapped into it before the
//! potential is consulted, so `H(p, x + k) = H(p, x)` for integer `k`.

mod bump;
mod lagrangian;
mod potential;
pub mod schema;

use std::fmt;
use std::sync::Arc;

pub use bump::{BumpProfile, BumpShape, Occupancy};
pub use lagrangian::LagrangianEval;
pub use potential::{Interpolation, PotentialField};

use crate::error::{Error, Result};

/// Wraps a coordinate into `[-1/2, 1/2)`.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    x - (x + 0.5).floor()
}

/// Wraps a coordinate into `[-R/2, R/2)`.
#[inline]
pub fn wrap_period(x: f64, period: f64) -> f64 {
    x - period * (x / period + 0.5).floor()
}

pub type ScalarFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync>;

/// User-supplied Hamiltonian known only through evaluation on a box of momenta.
#[derive(Clone)]
pub struct Tabulated {
    eval: ScalarFn,
    grad: Option<VectorFn>,
    p_lo: Vec<f64>,
    p_hi: Vec<f64>,
    /// Lower bound `c` on the Hessian, `D²_pp H ≥ c I`.
    convexity: f64,
}

impl fmt::Debug for Tabulated {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tabulated")
            .field("p_lo", &self.p_lo)
            .field("p_hi", &self.p_hi)
            .field("convexity", &self.convexity)
            .field("analytic_grad", &self.grad.is_some())
            .finish()
    }
}

impl Tabulated {
    pub fn new(eval: ScalarFn, grad: Option<VectorFn>, p_lo: Vec<f64>, p_hi: Vec<f64>, convexity: f64) -> Result<Self> {
        if p_lo.len() != p_hi.len() || p_lo.is_empty() {
            return Err(Error::InvalidArgument("tabulated range bounds must share a nonzero length".into()));
        }
        if p_lo.iter().zip(&p_hi).any(|(a, b)| !(a < b)) {
            return Err(Error::InvalidArgument("tabulated range must satisfy lo < hi".into()));
        }
        if !(convexity > 0.0) {
            return Err(Error::InvalidArgument("convexity modulus must be positive".into()));
        }
        Ok(Self { eval, grad, p_lo, p_hi, convexity })
    }

    fn check(&self, p: &[f64]) -> Result<()> {
        let inside = p.iter().zip(&self.p_lo).zip(&self.p_hi).all(|((v, lo), hi)| v >= lo && v <= hi);
        if inside {
            Ok(())
        } else {
            Err(Error::OutOfRange {
                p: p.to_vec(),
                lo: self.p_lo.clone(),
                hi: self.p_hi.clone(),
            })
        }
    }

    pub fn p_range(&self) -> (&[f64], &[f64]) {
        (&self.p_lo, &self.p_hi)
    }
}

#[derive(Debug, Clone)]
pub enum Family {
    /// `H(p, x) = |p + p̄|² − V(x)`.
    QuadraticShifted { pbar: Vec<f64>, potential: PotentialField },
    Tabulated(Tabulated),
}

/// A Hamiltonian family together with its dimension.
#[derive(Debug, Clone)]
pub struct HamiltonianSpec {
    family: Family,
    dim: usize,
}

impl HamiltonianSpec {
    pub fn quadratic(pbar: Vec<f64>, potential: PotentialField) -> Result<Self> {
        if pbar.is_empty() || pbar.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("pbar must be a nonempty finite vector".into()));
        }
        if potential.dim() != pbar.len() {
            return Err(Error::InvalidArgument(format!(
                "potential dimension {} does not match pbar dimension {}",
                potential.dim(),
                pbar.len()
            )));
        }
        let dim = pbar.len();
        Ok(Self {
            family: Family::QuadraticShifted { pbar, potential },
            dim,
        })
    }

    /// `|p + p̄|²` with no potential.
    pub fn free(pbar: Vec<f64>) -> Result<Self> {
        let d = pbar.len();
        Self::quadratic(pbar, PotentialField::zero(d))
    }

    pub fn tabulated(tab: Tabulated) -> Self {
        let dim = tab.p_lo.len();
        Self {
            family: Family::Tabulated(tab),
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// `p̄` for the quadratic family, zeros otherwise.
    pub fn pbar(&self) -> Vec<f64> {
        match &self.family {
            Family::QuadraticShifted { pbar, .. } => pbar.clone(),
            Family::Tabulated(_) => vec![0.0; self.dim],
        }
    }

    pub fn potential(&self) -> Option<&PotentialField> {
        match &self.family {
            Family::QuadraticShifted { potential, .. } => Some(potential),
            Family::Tabulated(_) => None,
        }
    }

    /// Lower bound on `D²_pp H` (2 for the quadratic family).
    pub fn convexity_modulus(&self) -> f64 {
        match &self.family {
            Family::QuadraticShifted { .. } => 2.0,
            Family::Tabulated(t) => t.convexity,
        }
    }

    fn check_dims(&self, p: &[f64], x: &[f64]) -> Result<()> {
        if p.len() != self.dim || x.len() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "expected {}-vectors, got p of length {} and x of length {}",
                self.dim,
                p.len(),
                x.len()
            )));
        }
        Ok(())
    }

    /// `H(p, x mod ℤᵈ)`.
    pub fn eval_h(&self, p: &[f64], x: &[f64]) -> Result<f64> {
        self.check_dims(p, x)?;
        match &self.family {
            Family::QuadraticShifted { pbar, potential } => {
                let k: f64 = p.iter().zip(pbar).map(|(a, b)| (a + b) * (a + b)).sum();
                Ok(k - potential.eval(x))
            }
            Family::Tabulated(t) => {
                t.check(p)?;
                let xw: Vec<f64> = x.iter().map(|&v| wrap_unit(v)).collect();
                Ok((t.eval)(p, &xw))
            }
        }
    }

    /// `D_pH(p, x)`.
    pub fn grad_p_h(&self, p: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.check_dims(p, x)?;
        let mut out = vec![0.0; self.dim];
        match &self.family {
            Family::QuadraticShifted { pbar, .. } => {
                for ((o, a), b) in out.iter_mut().zip(p).zip(pbar) {
                    *o = 2.0 * (a + b);
                }
            }
            Family::Tabulated(t) => {
                t.check(p)?;
                let xw: Vec<f64> = x.iter().map(|&v| wrap_unit(v)).collect();
                match &t.grad {
                    Some(g) => g(p, &xw, &mut out),
                    None => {
                        let step = 1e-5;
                        let mut q = p.to_vec();
                        for i in 0..self.dim {
                            q[i] = p[i] + step;
                            let fp = (t.eval)(&q, &xw);
                            q[i] = p[i] - step;
                            let fm = (t.eval)(&q, &xw);
                            q[i] = p[i];
                            out[i] = (fp - fm) / (2.0 * step);
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// The Hamiltonian with `x` frozen; cheap to evaluate repeatedly.
    pub fn freeze(&self, x: &[f64]) -> FrozenH<'_> {
        match &self.family {
            Family::QuadraticShifted { pbar, potential } => FrozenH::Quadratic {
                pbar,
                v: potential.eval(x),
            },
            Family::Tabulated(t) => FrozenH::Tabulated {
                tab: t,
                x: x.iter().map(|&v| wrap_unit(v)).collect(),
            },
        }
    }

    /// `max_x H(0, x)` estimated on a lattice of `samples` points per axis.
    pub fn max_h_at_zero(&self, samples: usize) -> Result<f64> {
        if let Family::QuadraticShifted { pbar, .. } = &self.family {
            // min V = 0
            return Ok(pbar.iter().map(|b| b * b).sum());
        }
        let zero = vec![0.0; self.dim];
        let mut best = f64::NEG_INFINITY;
        for_each_cell_point(self.dim, samples, |x| {
            if let Ok(v) = self.eval_h(&zero, x) {
                best = best.max(v);
            }
        });
        if best.is_finite() {
            Ok(best)
        } else {
            Err(Error::InvalidArgument("p = 0 outside tabulated range".into()))
        }
    }
}

/// Calls `f` on a uniform lattice of `m` points per axis covering the unit cell.
pub(crate) fn for_each_cell_point<F: FnMut(&[f64])>(dim: usize, m: usize, mut f: F) {
    let mut idx = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    loop {
        for i in 0..dim {
            x[i] = -0.5 + (idx[i] as f64 + 0.5) / m as f64;
        }
        f(&x);
        let mut a = 0;
        loop {
            if a == dim {
                return;
            }
            idx[a] += 1;
            if idx[a] < m {
                break;
            }
            idx[a] = 0;
            a += 1;
        }
    }
}

/// H with the space variable fixed.
#[derive(Debug, Clone)]
pub enum FrozenH<'a> {
    Quadratic { pbar: &'a [f64], v: f64 },
    Tabulated { tab: &'a Tabulated, x: Vec<f64> },
}

impl FrozenH<'_> {
    #[inline]
    pub fn h(&self, p: &[f64]) -> Result<f64> {
        match self {
            FrozenH::Quadratic { pbar, v } => {
                let mut k = 0.0;
                for (a, b) in p.iter().zip(pbar.iter()) {
                    k += (a + b) * (a + b);
                }
                Ok(k - v)
            }
            FrozenH::Tabulated { tab, x } => {
                tab.check(p)?;
                Ok((tab.eval)(p, x))
            }
        }
    }

    /// `∂H/∂p_axis`.
    #[inline]
    pub fn dh(&self, p: &[f64], axis: usize) -> Result<f64> {
        match self {
            FrozenH::Quadratic { pbar, .. } => Ok(2.0 * (p[axis] + pbar[axis])),
            FrozenH::Tabulated { tab, x } => {
                tab.check(p)?;
                if let Some(g) = &tab.grad {
                    let mut out = vec![0.0; p.len()];
                    g(p, x, &mut out);
                    return Ok(out[axis]);
                }
                let step = 1e-5;
                let mut q = p.to_vec();
                q[axis] += step;
                let fp = (tab.eval)(&q, x);
                q[axis] -= 2.0 * step;
                let fm = (tab.eval)(&q, x);
                Ok((fp - fm) / (2.0 * step))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cos_spec(pbar: f64) -> HamiltonianSpec {
        HamiltonianSpec::quadratic(vec![pbar], PotentialField::cosine(vec![1.0]).unwrap()).unwrap()
    }

    #[test]
    fn quadratic_examples() {
        let h = HamiltonianSpec::free(vec![0.0, 0.0]).unwrap();
        assert_eq!(h.eval_h(&[1.0, 0.0], &[0.37, -2.2]).unwrap(), 1.0);
        let h1 = HamiltonianSpec::free(vec![1.0]).unwrap();
        assert_eq!(h1.eval_h(&[0.0], &[0.3]).unwrap(), 1.0);
        let hc = cos_spec(0.0);
        assert!(hc.eval_h(&[0.0], &[0.5]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn gradient_examples() {
        let h = HamiltonianSpec::free(vec![0.0, 0.0]).unwrap();
        assert_eq!(h.grad_p_h(&[1.0, 0.0], &[0.0, 0.0]).unwrap(), vec![2.0, 0.0]);
        let h1 = HamiltonianSpec::free(vec![1.0]).unwrap();
        assert_eq!(h1.grad_p_h(&[0.0], &[0.0]).unwrap(), vec![2.0]);
        let h2 = HamiltonianSpec::free(vec![1.0, 1.0]).unwrap();
        assert_eq!(h2.grad_p_h(&[0.5, -0.5], &[0.0, 0.0]).unwrap(), vec![3.0, 1.0]);
    }

    #[test]
    fn tabulated_out_of_range() {
        let tab = Tabulated::new(
            Arc::new(|p: &[f64], _x: &[f64]| p[0] * p[0]),
            None,
            vec![-2.0],
            vec![2.0],
            2.0,
        )
        .unwrap();
        let h = HamiltonianSpec::tabulated(tab);
        assert!(matches!(h.eval_h(&[3.0], &[0.0]), Err(Error::OutOfRange { .. })));
        let g = h.grad_p_h(&[1.0], &[0.0]).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn wrapping_is_half_open() {
        assert_eq!(wrap_unit(0.5), -0.5);
        assert_eq!(wrap_unit(-0.5), -0.5);
        assert_eq!(wrap_unit(2.25), 0.25);
        assert_eq!(wrap_period(5.2, 5.0), 5.2 - 5.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let h = HamiltonianSpec::free(vec![1.0]).unwrap();
        assert!(h.eval_h(&[1.0, 2.0], &[0.0]).is_err());
    }
}
