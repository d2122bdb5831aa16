use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::interp::PeriodicSamples;

use super::wrap_unit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Linear,
    #[default]
    Cubic,
}

#[derive(Debug, Clone, PartialEq)]
enum Repr {
    Zero,
    /// `V(x) = Σ a_i (1 + cos 2π x_i)`.
    Cosine(Vec<f64>),
    Sampled(PeriodicSamples, Interpolation),
}

/// A ℤᵈ-periodic potential normalized so that its minimum over the cell is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialField {
    repr: Repr,
    dim: usize,
    max_value: f64,
    lipschitz_bound: f64,
}

impl PotentialField {
    pub fn zero(dim: usize) -> Self {
        Self {
            repr: Repr::Zero,
            dim,
            max_value: 0.0,
            lipschitz_bound: 0.0,
        }
    }

    /// `V(x) = Σ a_i (1 + cos 2π x_i)` with nonnegative amplitudes (so min V = 0).
    pub fn cosine(amplitudes: Vec<f64>) -> Result<Self> {
        if amplitudes.is_empty() || amplitudes.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::InvalidArgument(
                "cosine amplitudes must be finite and nonnegative".into(),
            ));
        }
        let dim = amplitudes.len();
        let max_value = 2.0 * amplitudes.iter().sum::<f64>();
        let lipschitz_bound = 2.0 * PI * amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt();
        Ok(Self {
            repr: Repr::Cosine(amplitudes),
            dim,
            max_value,
            lipschitz_bound,
        })
    }

    /// Samples on the nodes `-1/2 + j/n` of each axis (periodic, row-major).
    /// The field is shifted so the smallest sample is exactly 0.
    pub fn sampled(dim: usize, n: usize, samples: Vec<f64>, order: Interpolation) -> Result<Self> {
        if !(dim == 1 || dim == 2) {
            return Err(Error::InvalidArgument("sampled potentials support d = 1, 2".into()));
        }
        if n < 4 || samples.len() != n.pow(dim as u32) {
            return Err(Error::InvalidArgument(format!(
                "expected {} samples (n = {n} per axis, n >= 4), got {}",
                n.pow(dim as u32),
                samples.len()
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("potential samples must be finite".into()));
        }
        let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let shifted: Vec<f64> = samples.iter().map(|v| v - min).collect();
        let max_value = shifted.iter().copied().fold(0.0, f64::max);
        let h = 1.0 / n as f64;
        let grid = PeriodicSamples::new(dim, n, -0.5, h, shifted);
        let mut lip: f64 = 0.0;
        let idx = |i: usize, j: usize| (i % n) * if dim == 2 { n } else { 1 } + (j % n);
        if dim == 1 {
            for i in 0..n {
                lip = lip.max((grid.values[(i + 1) % n] - grid.values[i]).abs() / h);
            }
        } else {
            for i in 0..n {
                for j in 0..n {
                    let v = grid.values[idx(i, j)];
                    let dx = (grid.values[idx(i + 1, j)] - v) / h;
                    let dy = (grid.values[idx(i, j + 1)] - v) / h;
                    lip = lip.max((dx * dx + dy * dy).sqrt());
                }
            }
        }
        // Catmull-Rom overshoot is bounded by a modest factor of the secant slope.
        let lipschitz_bound = if order == Interpolation::Cubic { 1.5 * lip } else { lip };
        Ok(Self {
            repr: Repr::Sampled(grid, order),
            dim,
            max_value,
            lipschitz_bound,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Normalized minimum over the cell (always 0).
    pub fn min_value(&self) -> f64 {
        0.0
    }

    pub fn max_value(&self) -> f64 {
        self.max_value
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_bound
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.repr, Repr::Zero)
    }

    /// V at an arbitrary point (wrapped into the unit cell).
    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.repr {
            Repr::Zero => 0.0,
            Repr::Cosine(a) => a
                .iter()
                .zip(x)
                .map(|(a, &xi)| a * (1.0 + (2.0 * PI * wrap_unit(xi)).cos()))
                .sum(),
            Repr::Sampled(s, Interpolation::Linear) => s.linear(x),
            Repr::Sampled(s, Interpolation::Cubic) => s.cubic(x).0,
        }
    }
}
