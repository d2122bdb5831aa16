//! Compactly supported nonnegative bumps and their lattice periodizations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BumpShape {
    /// `a (1 - |x|/D)_+`.
    Tent,
    /// `a exp(1 - 1/(1 - |x/D|²))` on `|x| < D`.
    Smooth,
    /// Radial profile on uniform radii `r_j = j D / (m - 1)`, linearly interpolated, last value 0.
    Tabulated(Vec<f64>),
}

/// The bump ζ: nonnegative, Lipschitz, supported in the closed ball of radius D.
#[derive(Debug, Clone, PartialEq)]
pub struct BumpProfile {
    shape: BumpShape,
    amplitude: f64,
    support_radius: f64,
    lipschitz_bound: f64,
}

/// Lattice occupancy consulted by [`BumpProfile::zeta_eta`].
pub trait Occupancy {
    fn occupied(&self, site: &[i64]) -> Result<bool>;
}

impl BumpProfile {
    pub fn new(shape: BumpShape, amplitude: f64, support_radius: f64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(Error::InvalidArgument(format!("bump amplitude must be >= 0, got {amplitude}")));
        }
        if !(support_radius.is_finite() && support_radius > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "bump support radius must be > 0, got {support_radius}"
            )));
        }
        let lipschitz_bound = match &shape {
            BumpShape::Tent => amplitude / support_radius,
            BumpShape::Smooth => {
                // max over s ∈ (0,1) of |d/ds exp(1 - 1/(1-s²))|, sampled finely.
                let m = (1..20_000)
                    .map(|k| {
                        let s = k as f64 / 20_000.0;
                        let q = 1.0 - s * s;
                        (1.0 - 1.0 / q).exp() * 2.0 * s / (q * q)
                    })
                    .fold(0.0, f64::max);
                1.001 * amplitude * m / support_radius
            }
            BumpShape::Tabulated(vals) => {
                if vals.len() < 2 || vals.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::InvalidArgument(
                        "tabulated bump needs >= 2 finite nonnegative samples".into(),
                    ));
                }
                if *vals.last().unwrap() != 0.0 {
                    return Err(Error::InvalidArgument("tabulated bump must vanish at r = D".into()));
                }
                let dr = support_radius / (vals.len() - 1) as f64;
                amplitude * vals.windows(2).map(|w| (w[1] - w[0]).abs() / dr).fold(0.0, f64::max)
            }
        };
        Ok(Self {
            shape,
            amplitude,
            support_radius,
            lipschitz_bound,
        })
    }

    pub fn tent(amplitude: f64, support_radius: f64) -> Result<Self> {
        Self::new(BumpShape::Tent, amplitude, support_radius)
    }

    pub fn smooth(amplitude: f64, support_radius: f64) -> Result<Self> {
        Self::new(BumpShape::Smooth, amplitude, support_radius)
    }

    /// The zero bump (amplitude 0), used for unperturbed reference runs.
    pub fn none() -> Self {
        Self::tent(0.0, 0.25).expect("valid zero bump")
    }

    pub fn shape(&self) -> &BumpShape {
        &self.shape
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_bound
    }

    pub fn sup_norm(&self) -> f64 {
        match &self.shape {
            BumpShape::Tabulated(v) => self.amplitude * v.iter().copied().fold(0.0, f64::max),
            _ => self.amplitude,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.sup_norm() == 0.0
    }

    /// Radial profile at `r >= 0`.
    pub fn radial(&self, r: f64) -> f64 {
        let d = self.support_radius;
        if r >= d || self.amplitude == 0.0 {
            return 0.0;
        }
        let s = r / d;
        match &self.shape {
            BumpShape::Tent => self.amplitude * (1.0 - s),
            BumpShape::Smooth => self.amplitude * (1.0 - 1.0 / (1.0 - s * s)).exp(),
            BumpShape::Tabulated(v) => {
                let pos = s * (v.len() - 1) as f64;
                let j = (pos.floor() as usize).min(v.len() - 2);
                let t = pos - j as f64;
                self.amplitude * ((1.0 - t) * v[j] + t * v[j + 1])
            }
        }
    }

    /// ζ(x) for the bump centred at the origin.
    pub fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().map(|v| v * v).sum();
        self.radial(r2.sqrt())
    }

    /// Kink locations of the 1D profile centred at `c` (panel edges for quadrature).
    pub fn breakpoints_1d(&self, c: f64) -> Vec<f64> {
        let d = self.support_radius;
        match &self.shape {
            BumpShape::Tabulated(v) => {
                let m = v.len() - 1;
                (0..=m)
                    .flat_map(|j| {
                        let r = j as f64 * d / m as f64;
                        [c - r, c + r]
                    })
                    .collect()
            }
            _ => vec![c - d, c, c + d],
        }
    }

    /// ζ_R(x) = Σ_{k∈ℤᵈ} ζ(x − Rk).
    pub fn zeta_r(&self, period: i64, x: &[f64]) -> Result<f64> {
        if period <= 0 {
            return Err(Error::InvalidArgument(format!("period R must be positive, got {period}")));
        }
        let r = period as f64;
        self.lattice_sum(x, r, |_| Ok(true))
    }

    /// ζ_∞(x) = Σ_{k∈ℤᵈ} ζ(x − k).
    pub fn zeta_inf(&self, x: &[f64]) -> f64 {
        self.lattice_sum(x, 1.0, |_| Ok(true)).expect("full occupancy never fails")
    }

    /// ζ_η(x) = Σ_{k∈ℤᵈ} ζ(x − k) X_k.
    pub fn zeta_eta<O: Occupancy + ?Sized>(&self, field: &O, x: &[f64]) -> Result<f64> {
        self.lattice_sum(x, 1.0, |k| field.occupied(k))
    }

    /// Sum of `ζ(x − s k)` over lattice sites `k` whose copy reaches `x`, filtered by `keep`.
    fn lattice_sum<F>(&self, x: &[f64], spacing: f64, mut keep: F) -> Result<f64>
    where
        F: FnMut(&[i64]) -> Result<bool>,
    {
        let d = self.support_radius;
        let dim = x.len();
        let ranges: Vec<(i64, i64)> = x
            .iter()
            .map(|&xi| (((xi - d) / spacing).ceil() as i64, ((xi + d) / spacing).floor() as i64))
            .collect();
        if ranges.iter().any(|(lo, hi)| lo > hi) {
            return Ok(0.0);
        }
        let mut k: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        let mut total = 0.0;
        let mut diff = vec![0.0; dim];
        loop {
            for i in 0..dim {
                diff[i] = x[i] - spacing * k[i] as f64;
            }
            let r2: f64 = diff.iter().map(|v| v * v).sum();
            if r2 <= d * d && keep(&k)? {
                total += self.radial(r2.sqrt());
            }
            // odometer increment
            let mut axis = 0;
            loop {
                if axis == dim {
                    return Ok(total);
                }
                k[axis] += 1;
                if k[axis] <= ranges[axis].1 {
                    break;
                }
                k[axis] = ranges[axis].0;
                axis += 1;
            }
        }
    }
}
