//! Bernoulli occupancy fields and Monte Carlo estimates of H̄_η.
//!
//! Every site draws one uniform `U_k` from a ChaCha stream keyed by the seed
//! and positioned by `k`, and is occupied when `U_k < η`. Reusing the seed
//! with a different η therefore gives a coupled field.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cellpde::{estimate_hbar_grid, DiscountedSolveConfig, GridField, Method, PeriodicGrid};
use crate::error::{Error, Result};
use crate::hamiltonian::{BumpProfile, HamiltonianSpec, Occupancy};
use crate::homog1d::{solve_hbar_window_1d, Solve1DOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldMode {
    Thinned,
    /// Every `X_k = 0`.
    Empty,
    /// Every `X_k = 1`.
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BernoulliField {
    pub eta: f64,
    pub seed: u64,
    pub mode: FieldMode,
    /// When set, only sites with `|k|∞ ≤ window` may be queried.
    pub window: Option<i64>,
}

fn zigzag(k: i64) -> u64 {
    ((k << 1) ^ (k >> 63)) as u64
}

/// SplitMix64 finalizer.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Field with `P(X_k = 1) = η`, `η ∈ (0, 1)`.
pub fn sample_field(seed: u64, eta: f64) -> Result<BernoulliField> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidArgument(format!("eta must lie in (0, 1), got {eta}")));
    }
    Ok(BernoulliField {
        eta,
        seed,
        mode: FieldMode::Thinned,
        window: None,
    })
}

impl BernoulliField {
    pub fn empty(seed: u64) -> Self {
        Self {
            eta: 0.0,
            seed,
            mode: FieldMode::Empty,
            window: None,
        }
    }

    pub fn full(seed: u64) -> Self {
        Self {
            eta: 1.0,
            seed,
            mode: FieldMode::Full,
            window: None,
        }
    }

    /// `η ∈ [0, 1]`, mapping the endpoints to the limiting fields.
    pub fn with_limits(seed: u64, eta: f64) -> Result<Self> {
        if eta == 0.0 {
            Ok(Self::empty(seed))
        } else if eta == 1.0 {
            Ok(Self::full(seed))
        } else {
            sample_field(seed, eta)
        }
    }

    /// Same uniforms, new threshold.
    pub fn coupled(&self, eta: f64) -> Result<Self> {
        let mut f = Self::with_limits(self.seed, eta)?;
        f.window = self.window;
        Ok(f)
    }

    pub fn windowed(mut self, radius: i64) -> Self {
        self.window = Some(radius);
        self
    }

    /// The uniform `U_k ∈ [0, 1)` behind site `k` (d ≤ 2).
    pub fn uniform(&self, site: &[i64]) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(site.get(1).map_or(0, |&k| zigzag(k)));
        rng.set_word_pos(2 * u128::from(zigzag(site[0])));
        (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn value(&self, site: &[i64]) -> Result<bool> {
        if let Some(w) = self.window {
            if site.iter().any(|k| k.abs() > w) {
                return Err(Error::Window { site: site.to_vec() });
            }
        }
        Ok(match self.mode {
            FieldMode::Empty => false,
            FieldMode::Full => true,
            FieldMode::Thinned => self.uniform(site) < self.eta,
        })
    }
}

impl Occupancy for BernoulliField {
    fn occupied(&self, site: &[i64]) -> Result<bool> {
        self.value(site)
    }
}

/// The field restricted to the sites of `Q_R` and repeated `R`-periodically.
#[derive(Debug, Clone)]
pub struct PeriodizedField<'a> {
    pub field: &'a BernoulliField,
    pub period: i64,
}

impl PeriodizedField<'_> {
    pub fn wrap(&self, k: i64) -> i64 {
        let h = self.period / 2;
        (k + h).rem_euclid(self.period) - h
    }
}

impl Occupancy for PeriodizedField<'_> {
    fn occupied(&self, site: &[i64]) -> Result<bool> {
        let w: Vec<i64> = site.iter().map(|&k| self.wrap(k)).collect();
        self.field.value(&w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MCEstimate {
    pub mean: f64,
    /// Sample standard deviation over `√samples`.
    pub se: f64,
    pub samples: usize,
    pub method: Method,
    pub values: Vec<f64>,
    /// Samples whose window held no bump.
    pub empty_windows: usize,
    pub seed: u64,
}

impl MCEstimate {
    pub fn from_values(values: Vec<f64>, method: Method, empty_windows: usize, seed: u64) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::InvalidArgument("need at least two samples".into()));
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Ok(Self {
            mean,
            se: (var / n as f64).sqrt(),
            samples: n,
            method,
            values,
            empty_windows,
            seed,
        })
    }
}

/// Seed of sample `i` of an estimate seeded with `seed`.
pub fn sample_seed(seed: u64, i: usize) -> u64 {
    mix_seed(seed, i as u64)
}

/// Occupancy of the `torus_n` window sites `−⌊N/2⌋ .. −⌊N/2⌋ + N − 1`.
pub fn window_occupancy(field: &BernoulliField, torus_n: usize) -> Result<Vec<bool>> {
    let h = (torus_n / 2) as i64;
    (0..torus_n as i64).map(|i| field.value(&[i - h])).collect()
}

/// Monte Carlo H̄_η in d = 1 from exact solves on `torus_n`-periodic windows.
pub fn mc_estimate_hbar_eta_1d(
    spec: &HamiltonianSpec,
    bump: &BumpProfile,
    eta: f64,
    torus_n: usize,
    samples: usize,
    seed: u64,
    opts: &Solve1DOptions,
) -> Result<MCEstimate> {
    if spec.dim() != 1 {
        return Err(Error::InvalidArgument("mc_estimate_hbar_eta_1d needs d = 1".into()));
    }
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let runs: Vec<(f64, bool)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let field = BernoulliField::with_limits(sample_seed(seed, i), eta)?;
            let occ = window_occupancy(&field, torus_n)?;
            let empty = !occ.contains(&true);
            Ok((solve_hbar_window_1d(spec, bump, &occ, opts)?.value, empty))
        })
        .collect::<Result<_>>()?;
    let empty = runs.iter().filter(|r| r.1).count();
    MCEstimate::from_values(runs.into_iter().map(|r| r.0).collect(), Method::MonteCarlo, empty, seed)
}

/// The realized `ζ_η` on `Q_R`, with the window's sites repeated `R`-periodically.
pub fn realized_source(bump: &BumpProfile, field: &BernoulliField, grid: PeriodicGrid) -> Result<GridField> {
    let per = PeriodizedField {
        field,
        period: grid.period as i64,
    };
    let values = (0..grid.len())
        .map(|i| bump.zeta_eta(&per, &grid.point(i)))
        .collect::<Result<Vec<_>>>()?;
    GridField::new(grid, values, "zeta_eta")
}

/// Monte Carlo H̄_η from grid solves on `R_window`-periodic realizations.
#[allow(clippy::too_many_arguments)]
pub fn mc_estimate_hbar_eta_grid(
    spec: &HamiltonianSpec,
    bump: &BumpProfile,
    eta: f64,
    r_window: u64,
    n: u64,
    samples: usize,
    seed: u64,
    config: &DiscountedSolveConfig,
) -> Result<MCEstimate> {
    if samples < 2 {
        return Err(Error::InvalidArgument("need at least two samples".into()));
    }
    let grid = PeriodicGrid::new(spec.dim(), r_window, n)?;
    let runs: Vec<(f64, bool)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let field = BernoulliField::with_limits(sample_seed(seed, i), eta)?;
            let source = realized_source(bump, &field, grid)?;
            let empty = source.max() == 0.0;
            Ok((estimate_hbar_grid(spec, &source, config)?.value, empty))
        })
        .collect::<Result<_>>()?;
    let empty = runs.iter().filter(|r| r.1).count();
    MCEstimate::from_values(runs.into_iter().map(|r| r.0).collect(), Method::MonteCarlo, empty, seed)
}

/// `N⁻ᵈ Σ f(x + k)` over the `Nᵈ` integer sites `k ∈ {−⌊N/2⌋, …, −⌊N/2⌋ + N − 1}ᵈ`.
pub fn hat_f<F: Fn(&[f64]) -> Result<f64>>(f: F, x: &[f64], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("N must be positive".into()));
    }
    let d = x.len();
    let h = (n / 2) as i64;
    let total = n.pow(d as u32);
    let mut y = vec![0.0; d];
    let mut acc = 0.0;
    for code in 0..total {
        let mut c = code;
        for a in 0..d {
            y[a] = x[a] + ((c % n) as i64 - h) as f64;
            c /= n;
        }
        acc += f(&y)?;
    }
    Ok(acc / total as f64)
}

/// Running tail maxima `max_{j ≥ i} f̂_{N_j}(x)` over ascending `ns`: the limsup surrogate.
pub fn hat_f_tail_max<F: Fn(&[f64]) -> Result<f64>>(f: F, x: &[f64], ns: &[usize]) -> Result<Vec<f64>> {
    let vals = ns.iter().map(|&n| hat_f(&f, x, n)).collect::<Result<Vec<_>>>()?;
    let mut out = vals.clone();
    for i in (0..out.len().saturating_sub(1)).rev() {
        out[i] = out[i].max(out[i + 1]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::PotentialField;
    use crate::homog1d::{solve_hbar_1d, solve_hbar_r_1d};

    #[test]
    fn limiting_fields() {
        let b = BumpProfile::tent(1.0, 0.4).unwrap();
        for k in -50..50 {
            assert!(!BernoulliField::empty(3).value(&[k]).unwrap());
            assert!(BernoulliField::full(3).value(&[k]).unwrap());
            let x = [k as f64 * 0.37];
            assert_eq!(b.zeta_eta(&BernoulliField::full(3), &x).unwrap(), b.zeta_inf(&x));
            assert_eq!(b.zeta_eta(&BernoulliField::empty(3), &x).unwrap(), 0.0);
        }
        assert!(sample_field(1, 0.0).is_err());
        assert!(sample_field(1, 1.0).is_err());
    }

    #[test]
    fn empirical_mean_is_binomial() {
        let f = sample_field(42, 0.25).unwrap();
        let n = 10_000;
        let hits = (0..n).filter(|&k| f.value(&[k]).unwrap()).count() as f64;
        let tol = 3.0 * (0.25f64 * 0.75 / n as f64).sqrt();
        assert!((hits / n as f64 - 0.25).abs() < tol);
    }

    #[test]
    fn draws_are_reproducible_and_coupled() {
        let a = sample_field(7, 0.3).unwrap();
        let b = sample_field(7, 0.3).unwrap();
        let lower = a.coupled(0.1).unwrap();
        for k in -100..100 {
            for j in [-3, 0, 5] {
                assert_eq!(a.uniform(&[k, j]), b.uniform(&[k, j]));
                if lower.value(&[k, j]).unwrap() {
                    assert!(a.value(&[k, j]).unwrap());
                }
            }
            assert_eq!(a.uniform(&[k]), a.uniform(&[k, 0]));
        }
        assert_ne!(a.uniform(&[1]), sample_field(8, 0.3).unwrap().uniform(&[1]));
        assert_ne!(a.uniform(&[1]), a.uniform(&[-1]));
    }

    #[test]
    fn window_is_enforced() {
        let f = sample_field(1, 0.5).unwrap().windowed(3);
        assert!(f.value(&[3]).is_ok());
        assert!(matches!(f.value(&[4]), Err(Error::Window { .. })));
    }

    #[test]
    fn mc_limits_match_exact() {
        let spec = HamiltonianSpec::quadratic(vec![1.0], PotentialField::cosine(vec![0.5]).unwrap()).unwrap();
        let bump = BumpProfile::tent(1.0, 0.4).unwrap();
        let opts = Solve1DOptions::default();
        let zero = mc_estimate_hbar_eta_1d(&spec, &bump, 0.0, 50, 2, 1, &opts).unwrap();
        assert!((zero.mean - solve_hbar_1d(&spec, &opts).unwrap().value).abs() < 1e-9);
        assert_eq!(zero.se, 0.0);
        assert_eq!(zero.empty_windows, 2);
        let full = mc_estimate_hbar_eta_1d(&spec, &bump, 1.0, 50, 2, 1, &opts).unwrap();
        assert!((full.mean - solve_hbar_r_1d(&spec, &bump, 1, &opts).unwrap().value).abs() < 1e-9);
    }

    #[test]
    fn wide_bump_window_solve() {
        let spec = HamiltonianSpec::free(vec![1.0]).unwrap();
        let bump = BumpProfile::tent(0.5, 0.8).unwrap();
        let opts = Solve1DOptions::default();
        let occ = [true, false, false, false];
        let w = solve_hbar_window_1d(&spec, &bump, &occ, &opts).unwrap();
        let r = solve_hbar_r_1d(&spec, &bump, 4, &opts).unwrap();
        assert!((w.value - r.value).abs() < 1e-9, "{} {}", w.value, r.value);
    }

    #[test]
    fn hat_f_of_constant_and_periodic_bump() {
        for n in 1..6 {
            assert_eq!(hat_f(|_| Ok(2.5), &[0.3, 0.1], n).unwrap(), 2.5);
        }
        let b = BumpProfile::tent(1.0, 0.4).unwrap();
        for r in [2i64, 4, 8] {
            let v = hat_f(|y| b.zeta_r(r, y), &[0.0], (8 * r) as usize).unwrap();
            assert!((v - 1.0 / r as f64).abs() < 1e-12);
        }
        let t = hat_f_tail_max(|y| Ok(y[0].sin()), &[0.2], &[1, 2, 3]).unwrap();
        assert!(t[0] >= t[1] && t[1] >= t[2]);
    }

    #[test]
    fn periodized_wrap() {
        let f = BernoulliField::full(0);
        let p = PeriodizedField { field: &f, period: 4 };
        assert_eq!(p.wrap(2), -2);
        assert_eq!(p.wrap(-3), 1);
        let p = PeriodizedField { field: &f, period: 5 };
        assert_eq!(p.wrap(3), -2);
        assert_eq!(p.wrap(2), 2);
    }
}
