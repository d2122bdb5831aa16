//! Weak KAM diagnostics built on a computed corrector: the optimal-trajectory
//! flow `γ̇ = −D_pH(Dχ(γ), γ)`, rotation numbers, occupational measures, and
//! the structure of the perturbed corrector away from the bump.

use std::f64::consts::PI;
use std::io::Write;

use serde::Serialize;

use crate::cellpde::GridField;
use crate::error::{Error, Result};
use crate::hamiltonian::{wrap_unit, HamiltonianSpec, LagrangianEval};
use crate::interp::PeriodicSamples;

/// A grid corrector with a C¹ periodic interpolant.
#[derive(Debug, Clone)]
pub struct CorrectorField<'a> {
    spec: &'a HamiltonianSpec,
    samples: PeriodicSamples,
    /// Node spacing of the underlying grid.
    spacing: f64,
}

impl<'a> CorrectorField<'a> {
    pub fn new(spec: &'a HamiltonianSpec, chi: &GridField) -> Result<Self> {
        if chi.grid.dim != spec.dim() {
            return Err(Error::InvalidArgument("corrector and Hamiltonian dimensions differ".into()));
        }
        Ok(Self {
            spec,
            samples: chi.samples(),
            spacing: chi.grid.spacing(),
        })
    }

    pub fn spec(&self) -> &HamiltonianSpec {
        self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.samples.cubic(x).0
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let g = self.samples.cubic(x).1;
        g[..self.dim()].to_vec()
    }

    /// `−D_pH(Dχ(x), x)`.
    pub fn velocity(&self, x: &[f64]) -> Result<Vec<f64>> {
        let g = self.gradient(x);
        Ok(self.spec.grad_p_h(&g, x)?.into_iter().map(|v| -v).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    Forward,
    /// Integrates the negated field, i.e. `t ≤ 0`.
    Backward,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowOptions {
    pub direction: Direction,
    /// Keep every `stride`-th sample.
    pub stride: usize,
    /// Largest allowed displacement per step, in corrector grid cells.
    pub max_step_cells: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            direction: Direction::Forward,
            stride: 1,
            max_step_cells: 4.0,
        }
    }
}

/// Samples of a trajectory in ℝᵈ (not wrapped to the torus).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub dim: usize,
    pub x0: Vec<f64>,
    /// Time between stored samples.
    pub dt: f64,
    /// Flattened samples, `dim` values each.
    pub points: Vec<f64>,
    /// Largest speed met at any stage evaluation.
    pub max_speed: f64,
    pub direction: Direction,
    pub order: &'static str,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    /// Signed elapsed time at sample `i` (negative for backward runs).
    pub fn time(&self, i: usize) -> f64 {
        let t = i as f64 * self.dt;
        match self.direction {
            Direction::Forward => t,
            Direction::Backward => -t,
        }
    }

    pub fn horizon(&self) -> f64 {
        (self.len().saturating_sub(1)) as f64 * self.dt
    }

    /// Columns `t, x1..xd`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let head: Vec<String> = (1..=self.dim).map(|a| format!("x{a}")).collect();
        writeln!(w, "t,{}", head.join(","))?;
        for i in 0..self.len() {
            let p: Vec<String> = self.point(i).iter().map(|v| format!("{v:e}")).collect();
            writeln!(w, "{:e},{}", self.time(i), p.join(","))?;
        }
        Ok(())
    }
}

/// Classical RK4 for `γ̇ = −D_pH(Dχ(γ), γ)`, `γ(0) = x0`, on `[0, T]`.
pub fn flow_trajectory(corr: &CorrectorField<'_>, x0: &[f64], horizon: f64, step: f64, opts: &FlowOptions) -> Result<Trajectory> {
    let d = corr.dim();
    if x0.len() != d {
        return Err(Error::InvalidArgument("initial point has the wrong dimension".into()));
    }
    if !(horizon >= 0.0) || !(step > 0.0) || opts.stride == 0 {
        return Err(Error::InvalidArgument("need T >= 0, h_t > 0 and stride >= 1".into()));
    }
    let sign = match opts.direction {
        Direction::Forward => 1.0,
        Direction::Backward => -1.0,
    };
    // first grid time at or after T
    let steps = (horizon / step - 1e-9).ceil().max(0.0) as usize;
    let mut points = Vec::with_capacity((steps / opts.stride + 1) * d);
    points.extend_from_slice(x0);
    let mut x = x0.to_vec();
    let mut max_speed: f64 = 0.0;
    let limit_cells = opts.max_step_cells * corr.spacing;
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut y = vec![0.0; d];
    for n in 1..=steps {
        let k1 = corr.velocity(&x)?;
        for a in 0..d {
            y[a] = x[a] + 0.5 * step * sign * k1[a];
        }
        let k2 = corr.velocity(&y)?;
        for a in 0..d {
            y[a] = x[a] + 0.5 * step * sign * k2[a];
        }
        let k3 = corr.velocity(&y)?;
        for a in 0..d {
            y[a] = x[a] + step * sign * k3[a];
        }
        let k4 = corr.velocity(&y)?;
        for k in [&k1, &k2, &k3, &k4] {
            max_speed = max_speed.max(norm(k));
        }
        let mut disp = 0.0;
        for a in 0..d {
            let dx = step * sign * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]) / 6.0;
            disp += dx * dx;
            x[a] += dx;
        }
        let disp = disp.sqrt();
        let bound = max_speed * step * (1.0 + 1e-3);
        if disp > bound || disp > limit_cells {
            return Err(Error::StepTooLarge {
                step: disp,
                limit: bound.min(limit_cells),
            });
        }
        if n % opts.stride == 0 {
            points.extend_from_slice(&x);
        }
    }
    Ok(Trajectory {
        dim: d,
        x0: x0.to_vec(),
        dt: step * opts.stride as f64,
        points,
        max_speed,
        direction: opts.direction,
        order: "rk4",
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RotationEstimate {
    pub e_hat: Vec<f64>,
    pub horizon: f64,
    /// Summed per-component variance of the slopes on four windows of the last quarter.
    pub tail_variance: f64,
    /// True when `e_hat` is numerically zero.
    pub degenerate: bool,
}

impl RotationEstimate {
    pub fn norm(&self) -> f64 {
        self.e_hat.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `(γ(T) − γ(0)) / T` measured in signed time, so backward runs estimate the same vector.
pub fn rotation_number(traj: &Trajectory, min_horizon: f64) -> Result<RotationEstimate> {
    let t = traj.horizon();
    if t < min_horizon || traj.len() < 2 {
        return Err(Error::Precondition(format!("horizon {t} is shorter than the required {min_horizon}")));
    }
    let d = traj.dim;
    let last = traj.len() - 1;
    let slope = |i: usize, j: usize| -> Vec<f64> {
        let dt = traj.time(j) - traj.time(i);
        (0..d).map(|a| (traj.point(j)[a] - traj.point(i)[a]) / dt).collect()
    };
    let e_hat = slope(0, last);
    let q0 = last - last / 4;
    let w = (last - q0) / 4;
    let mut tail_variance = 0.0;
    if w > 0 {
        let slopes: Vec<Vec<f64>> = (0..4).map(|k| slope(q0 + k * w, q0 + (k + 1) * w)).collect();
        for a in 0..d {
            let m = slopes.iter().map(|s| s[a]).sum::<f64>() / 4.0;
            tail_variance += slopes.iter().map(|s| (s[a] - m).powi(2)).sum::<f64>() / 3.0;
        }
    }
    let degenerate = e_hat.iter().all(|v| v.abs() < 1e-12);
    Ok(RotationEstimate {
        e_hat,
        horizon: t,
        tail_variance,
        degenerate,
    })
}

/// Histogram on the unit cell `[-1/2, 1/2)ᵈ`, `bins` per axis, total mass 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupationalMeasure {
    pub dim: usize,
    pub bins: usize,
    pub mass: Vec<f64>,
    pub samples: usize,
}

impl OccupationalMeasure {
    pub fn uniform(dim: usize, bins: usize) -> Self {
        let len = bins.pow(dim as u32);
        Self {
            dim,
            bins,
            mass: vec![1.0 / len as f64; len],
            samples: 0,
        }
    }

    /// Bin masses from a density evaluated at bin centres, then normalized.
    pub fn from_density<F: FnMut(&[f64]) -> f64>(dim: usize, bins: usize, mut rho: F) -> Self {
        let mut m = Self::uniform(dim, bins);
        for i in 0..m.mass.len() {
            m.mass[i] = rho(&m.center(i)).max(0.0);
        }
        let total: f64 = m.mass.iter().sum();
        m.mass.iter_mut().for_each(|v| *v /= total);
        m
    }

    pub fn bin_of(&self, x: &[f64]) -> usize {
        let mut idx = 0;
        for &v in x.iter().take(self.dim) {
            let b = (((wrap_unit(v) + 0.5) * self.bins as f64) as usize).min(self.bins - 1);
            idx = idx * self.bins + b;
        }
        idx
    }

    pub fn center(&self, i: usize) -> Vec<f64> {
        let w = 1.0 / self.bins as f64;
        let mut out = vec![0.0; self.dim];
        let mut rest = i;
        for a in (0..self.dim).rev() {
            out[a] = -0.5 + (rest % self.bins) as f64 * w + 0.5 * w;
            rest /= self.bins;
        }
        out
    }

    /// Mass per unit volume in the bin containing `x`.
    pub fn density(&self, x: &[f64]) -> f64 {
        self.mass[self.bin_of(x)] * self.mass.len() as f64
    }

    /// `Σ |mass_b − other_b|`.
    pub fn l1_distance(&self, other: &Self) -> f64 {
        self.mass.iter().zip(&other.mass).map(|(a, b)| (a - b).abs()).sum()
    }

    /// Columns `c1..cd, mass`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let head: Vec<String> = (1..=self.dim).map(|a| format!("c{a}")).collect();
        writeln!(w, "{},mass", head.join(","))?;
        for (i, m) in self.mass.iter().enumerate() {
            let c: Vec<String> = self.center(i).iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{},{m:e}", c.join(","))?;
        }
        Ok(())
    }
}

/// Time-weighted histogram of wrapped positions (left-endpoint rule).
pub fn occupational_measure(traj: &Trajectory, bins: usize) -> Result<OccupationalMeasure> {
    if bins == 0 || traj.is_empty() {
        return Err(Error::InvalidArgument("need at least one bin and one sample".into()));
    }
    let mut m = OccupationalMeasure {
        dim: traj.dim,
        bins,
        mass: vec![0.0; bins.pow(traj.dim as u32)],
        samples: 0,
    };
    let used = if traj.len() == 1 { 1 } else { traj.len() - 1 };
    let w = 1.0 / used as f64;
    for i in 0..used {
        let b = m.bin_of(traj.point(i));
        m.mass[b] += w;
    }
    m.samples = used;
    Ok(m)
}

/// Test functions `cos 2π⟨k,x⟩`, `sin 2π⟨k,x⟩`, `k ∈ {0..3}ᵈ \ {0}`, as (k, phase).
fn fourier_modes(dim: usize) -> Vec<(Vec<f64>, bool)> {
    let mut out = Vec::new();
    let total = 4usize.pow(dim as u32);
    for code in 1..total {
        let mut k = vec![0.0; dim];
        let mut c = code;
        for v in k.iter_mut() {
            *v = (c % 4) as f64;
            c /= 4;
        }
        out.push((k.clone(), false));
        out.push((k, true));
    }
    out
}

/// Largest `|∫ ⟨Dφ, D_pH(Dχ, x)⟩ dσ̂|` over low Fourier modes φ: zero for invariant measures.
pub fn check_invariance(measure: &OccupationalMeasure, corr: &CorrectorField<'_>) -> Result<f64> {
    if measure.dim != corr.dim() {
        return Err(Error::InvalidArgument("measure and corrector dimensions differ".into()));
    }
    let centers: Vec<Vec<f64>> = (0..measure.mass.len()).map(|i| measure.center(i)).collect();
    let fields: Vec<Vec<f64>> = centers.iter().map(|x| corr.velocity(x)).collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for (k, sine) in fourier_modes(measure.dim) {
        let mut acc = 0.0;
        for ((x, f), m) in centers.iter().zip(&fields).zip(&measure.mass) {
            let arg = 2.0 * PI * k.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            // D of cos is −2πk sin, of sin is 2πk cos; f is −D_pH
            let amp = if sine { 2.0 * PI * arg.cos() } else { -2.0 * PI * arg.sin() };
            let dot: f64 = k.iter().zip(f).map(|(a, b)| a * (-b)).sum();
            acc += m * amp * dot;
        }
        worst = worst.max(acc.abs());
    }
    Ok(worst)
}

/// `max_t |χ(x) − ∫₀ᵗ (L(γ̇, γ) + H̄) ds − χ(γ(t))|` with trapezoid quadrature in time.
pub fn verify_value_identity(corr: &CorrectorField<'_>, hbar: f64, traj: &Trajectory, lagrangian: &LagrangianEval<'_>) -> Result<f64> {
    if traj.direction == Direction::Backward {
        return Err(Error::InvalidArgument("the value identity is stated for forward trajectories".into()));
    }
    let running = |x: &[f64]| -> Result<f64> {
        let v = corr.velocity(x)?;
        Ok(lagrangian.legendre(&v, x)? + hbar)
    };
    let chi0 = corr.value(traj.point(0));
    let mut integral = 0.0;
    let mut prev = running(traj.point(0))?;
    let mut worst: f64 = 0.0;
    for i in 1..traj.len() {
        let cur = running(traj.point(i))?;
        integral += 0.5 * traj.dt * (prev + cur);
        prev = cur;
        worst = worst.max((chi0 - integral - corr.value(traj.point(i))).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StructureReport {
    /// Far-field constant `c`: median of `χ_∞ − χ` over `⟨x, ê⟩ ≥ K`.
    pub c: f64,
    pub k: f64,
    /// `min (χ_∞ − χ − c)` over all nodes.
    pub min_excess: f64,
    /// `sup |χ_∞ − χ − c|` over `⟨x, ê⟩ ≥ K`.
    pub far_sup: f64,
    /// `(K_ε, sup (χ_∞ − χ − c) over ⟨x, ê⟩ ≤ −K_ε)`.
    pub upstream: Vec<(f64, f64)>,
}

/// Checks that `χ_∞ ≥ χ + c` everywhere and `χ_∞ = χ + c` where `⟨x, ê⟩ ≥ K`.
pub fn chi_infty_structure(chi_inf: &GridField, chi: &GridField, e: &[f64], k: f64, k_eps: &[f64]) -> Result<StructureReport> {
    if chi_inf.grid != chi.grid {
        return Err(Error::InvalidArgument("fields live on different grids".into()));
    }
    let norm = e.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return Err(Error::DegenerateRotation);
    }
    let g = chi.grid;
    let proj: Vec<f64> = (0..g.len())
        .map(|i| g.point(i).iter().zip(e).map(|(a, b)| a * b / norm).sum())
        .collect();
    let diff: Vec<f64> = chi_inf.values.iter().zip(&chi.values).map(|(a, b)| a - b).collect();
    let mut far: Vec<f64> = diff.iter().zip(&proj).filter(|(_, p)| **p >= k).map(|(d, _)| *d).collect();
    if far.is_empty() {
        return Err(Error::Precondition(format!("no node satisfies <x, e> >= {k}")));
    }
    far.sort_by(|a, b| a.total_cmp(b));
    let c = if far.len() % 2 == 1 {
        far[far.len() / 2]
    } else {
        0.5 * (far[far.len() / 2 - 1] + far[far.len() / 2])
    };
    let min_excess = diff.iter().map(|d| d - c).fold(f64::INFINITY, f64::min);
    let far_sup = far.iter().map(|d| (d - c).abs()).fold(0.0, f64::max);
    let upstream = k_eps
        .iter()
        .map(|&ke| {
            let s = diff
                .iter()
                .zip(&proj)
                .filter(|(_, p)| **p <= -ke)
                .map(|(d, _)| d - c)
                .fold(f64::NEG_INFINITY, f64::max);
            (ke, s)
        })
        .collect();
    Ok(StructureReport {
        c,
        k,
        min_excess,
        far_sup,
        upstream,
    })
}

/// Window average `|Q_W|⁻¹ ∫_{Q_W} ⟨D_pH(Dχ, x), D(χ_∞ − χ)⟩ σ̂(x) dx` over the central
/// box of half-width `W`, with central differences on the grid and σ̂ = 1 when no measure
/// is given. (Over the whole periodic box the integral of a gradient against a periodic
/// field carries no information, so a window strictly inside is used.)
pub fn pairing_integral(
    spec: &HamiltonianSpec,
    chi_inf: &GridField,
    chi: &GridField,
    measure: Option<&OccupationalMeasure>,
    half_width: f64,
) -> Result<f64> {
    if chi_inf.grid != chi.grid {
        return Err(Error::InvalidArgument("fields live on different grids".into()));
    }
    let g = chi.grid;
    let inv2h = 0.5 / g.spacing();
    let d = g.dim;
    let mut acc = 0.0;
    let mut count = 0usize;
    for i in 0..g.len() {
        let x = g.point(i);
        if x.iter().any(|v| v.abs() >= half_width) {
            continue;
        }
        let j = g.unravel(i);
        let mut dchi = vec![0.0; d];
        let mut dw = vec![0.0; d];
        for a in 0..d {
            let (mut jp, mut jm) = (j, j);
            jp[a] = g.wrap(j[a], 1);
            jm[a] = g.wrap(j[a], -1);
            let (ip, im) = (g.ravel(jp), g.ravel(jm));
            dchi[a] = (chi.values[ip] - chi.values[im]) * inv2h;
            dw[a] = (chi_inf.values[ip] - chi.values[ip] - chi_inf.values[im] + chi.values[im]) * inv2h;
        }
        let dp = spec.grad_p_h(&dchi, &x)?;
        let weight = measure.map_or(1.0, |m| m.density(&x));
        acc += weight * dp.iter().zip(&dw).map(|(a, b)| a * b).sum::<f64>();
        count += 1;
    }
    if count == 0 {
        return Err(Error::InvalidArgument("window contains no grid nodes".into()));
    }
    Ok(acc / count as f64)
}
