//! Exact one-dimensional pipeline.
//!
//! In d = 1 the corrector satisfies `χ' = H⁻¹(H̄, x)` on a single monotone
//! branch of the inverse, and every effective constant is the root of a
//! scalar integral condition. All perturbation limits reduce to quadratures.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::{BumpProfile, FrozenH, HamiltonianSpec};
use crate::quadrature::{CompositeRule, QuadratureNodes};
use crate::rootfind::{bisect, expand_upper, golden_max};

/// Which inverse branch of `p ↦ H(p, x)` the corrector derivative lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }
}

/// Minimum of `p ↦ H(p)` and its location, for a frozen 1D Hamiltonian.
fn min_over_p(h: &FrozenH<'_>) -> (f64, f64) {
    match h {
        FrozenH::Quadratic { pbar, v } => (-pbar[0], -v),
        FrozenH::Tabulated { tab, .. } => {
            let (lo, hi) = tab.p_range();
            let (p, val, _) = golden_max(|p| -h.h(&[p]).unwrap_or(f64::INFINITY), lo[0], hi[0], 1e-13, 500);
            (p, -val)
        }
    }
}

/// `H⁻¹(r)` on the given branch for a frozen 1D Hamiltonian.
fn invert(h: &FrozenH<'_>, branch: Branch, r: f64) -> Result<f64> {
    match h {
        FrozenH::Quadratic { pbar, v } => {
            let s = r + v;
            if s < 0.0 {
                return Err(Error::Precondition(format!("level {r} below the branch minimum {}", -v)));
            }
            Ok(-pbar[0] + branch.sign() * s.sqrt())
        }
        FrozenH::Tabulated { tab, .. } => {
            let (p0, m) = min_over_p(h);
            if r < m {
                return Err(Error::Precondition(format!("level {r} below the branch minimum {m}")));
            }
            let (lo, hi) = tab.p_range();
            let edge = if branch == Branch::Plus { hi[0] } else { lo[0] };
            let fe = h.h(&[edge])?;
            if fe < r {
                return Err(Error::OutOfRange {
                    p: vec![edge],
                    lo: lo.to_vec(),
                    hi: hi.to_vec(),
                });
            }
            let (a, b) = if branch == Branch::Plus { (p0, edge) } else { (edge, p0) };
            let root = bisect(|p| h.h(&[p]).unwrap_or(f64::NAN) - r, a, b, 0.0, 200)
                .ok_or_else(|| Error::Precondition("branch inversion failed to bracket".into()))?;
            Ok(root.x)
        }
    }
}

/// Branch inverse `r ↦ H±⁻¹(r, x)` of a one-dimensional Hamiltonian.
#[derive(Debug, Clone)]
pub struct BranchInverse<'a> {
    spec: &'a HamiltonianSpec,
    branch: Branch,
}

impl<'a> BranchInverse<'a> {
    pub fn new(spec: &'a HamiltonianSpec, branch: Branch) -> Result<Self> {
        if spec.dim() != 1 {
            return Err(Error::InvalidArgument("branch inversion requires d = 1".into()));
        }
        Ok(Self { spec, branch })
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    /// `m(x) = min_p H(p, x)`.
    pub fn min_value(&self, x: f64) -> f64 {
        min_over_p(&self.spec.freeze(&[x])).1
    }

    pub fn invert(&self, r: f64, x: f64) -> Result<f64> {
        invert(&self.spec.freeze(&[x]), self.branch, r)
    }

    /// `D_r H⁻¹(r, x) = 1 / D_pH(H⁻¹(r, x), x)`.
    pub fn d_invert(&self, r: f64, x: f64) -> Result<f64> {
        let p = self.invert(r, x)?;
        let g = self.spec.grad_p_h(&[p], &[x])?[0];
        if g == 0.0 {
            return Err(Error::DegenerateBranch { x });
        }
        Ok(1.0 / g)
    }
}

/// An ergodic constant from an exact 1D root-find.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErgodicConstant1D {
    pub value: f64,
    pub branch: Branch,
    /// Value of the defining integral at `value`.
    pub residual: f64,
    pub quadrature_nodes: usize,
    pub iterations: usize,
}

/// Options shared by the 1D solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Solve1DOptions {
    pub rule: CompositeRule,
    pub tol: f64,
}

impl Default for Solve1DOptions {
    fn default() -> Self {
        Self {
            rule: CompositeRule::default(),
            tol: 1e-10,
        }
    }
}

impl Solve1DOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }
}

/// Weighted node set for `λ ↦ Σ wᵢ H⁻¹(sᵢ + λ, xᵢ)`.
struct LevelIntegral<'a> {
    frozen: Vec<FrozenH<'a>>,
    shift: Vec<f64>,
    weight: Vec<f64>,
    x: Vec<f64>,
}

impl<'a> LevelIntegral<'a> {
    fn new() -> Self {
        Self {
            frozen: Vec::new(),
            shift: Vec::new(),
            weight: Vec::new(),
            x: Vec::new(),
        }
    }

    fn push_nodes<F: Fn(f64) -> f64>(&mut self, spec: &'a HamiltonianSpec, nodes: &QuadratureNodes, scale: f64, shift: F) {
        for (&x, &w) in nodes.x.iter().zip(&nodes.w) {
            self.frozen.push(spec.freeze(&[x]));
            self.shift.push(shift(x));
            self.weight.push(w * scale);
            self.x.push(x);
        }
    }

    fn len(&self) -> usize {
        self.frozen.len()
    }

    /// Smallest λ for which every node stays on a branch.
    fn floor(&self) -> f64 {
        self.frozen
            .iter()
            .zip(&self.shift)
            .map(|(h, s)| min_over_p(h).1 - s)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn eval(&self, branch: Branch, lambda: f64) -> (f64, f64) {
        let mut total = 0.0;
        let mut abs = 0.0;
        for ((h, s), w) in self.frozen.iter().zip(&self.shift).zip(&self.weight) {
            match invert(h, branch, s + lambda) {
                Ok(p) => {
                    total += w * p;
                    abs += (w * p).abs();
                }
                Err(_) => return (f64::NAN, f64::NAN),
            }
        }
        (total, abs)
    }

    /// Root of the level integral on the first branch (`+` then `−`) that admits one.
    fn solve(&self, spec: &HamiltonianSpec, sup_shift: f64, tol: f64) -> Result<ErgodicConstant1D> {
        let floor = self.floor();
        let lo = floor + 1e-12 * floor.abs().max(1.0);
        let pbar = spec.pbar()[0];
        let vmax = spec.potential().map_or(0.0, |v| v.max_value());
        let hi0 = lo + pbar * pbar + vmax + sup_shift + 1.0;
        let mut tried = Vec::new();
        for branch in [Branch::Plus, Branch::Minus] {
            let f = |l: f64| self.eval(branch, l).0;
            let f_lo = f(lo);
            // + branch is increasing in λ, − branch decreasing: a crossing needs the right sign at the floor.
            let admissible = match branch {
                Branch::Plus => f_lo <= 0.0,
                Branch::Minus => f_lo >= 0.0,
            };
            if !admissible || f_lo.is_nan() {
                tried.push(format!("{branch:?}: F(floor) = {f_lo:.3e}"));
                continue;
            }
            let Some(hi) = expand_upper(f, lo, hi0, 200) else {
                tried.push(format!("{branch:?}: no sign change up to expansion limit"));
                continue;
            };
            let root = bisect(f, lo, hi, tol, 400)
                .ok_or_else(|| Error::NoSingleBranch("bracket lost its sign change".into()))?;
            let (_, abs) = self.eval(branch, root.x);
            let floor_noise = 64.0 * f64::EPSILON * abs.max(1.0);
            if root.residual.abs() > tol.max(floor_noise) {
                return Err(Error::Precondition(format!(
                    "root not resolved: residual {:e} > tol {:e}",
                    root.residual, tol
                )));
            }
            return Ok(ErgodicConstant1D {
                value: root.x,
                branch,
                residual: root.residual,
                quadrature_nodes: self.len(),
                iterations: root.iterations,
            });
        }
        Err(Error::NoSingleBranch(format!(
            "no branch of H^-1 yields a zero-mean corrector ({})",
            tried.join("; ")
        )))
    }
}

fn require_1d(spec: &HamiltonianSpec) -> Result<()> {
    if spec.dim() != 1 {
        return Err(Error::InvalidArgument(format!("expected d = 1, got d = {}", spec.dim())));
    }
    Ok(())
}

fn cell_nodes(rule: &CompositeRule, breakpoints: &[f64]) -> QuadratureNodes {
    rule.nodes(-0.5, 0.5, breakpoints)
}

/// H̄ as the root of `∫_Q H⁻¹(λ, x) dx = 0`.
pub fn solve_hbar_1d(spec: &HamiltonianSpec, opts: &Solve1DOptions) -> Result<ErgodicConstant1D> {
    require_1d(spec)?;
    let nodes = cell_nodes(&opts.rule, &[]);
    let mut li = LevelIntegral::new();
    li.push_nodes(spec, &nodes, 1.0, |_| 0.0);
    li.solve(spec, 0.0, opts.tol)
}

/// H̄_R as the root of `∫_{Q_R} H⁻¹(ζ_R(x) + λ, x) dx = 0`.
pub fn solve_hbar_r_1d(spec: &HamiltonianSpec, bump: &BumpProfile, period: i64, opts: &Solve1DOptions) -> Result<ErgodicConstant1D> {
    require_1d(spec)?;
    if period <= 0 {
        return Err(Error::InvalidArgument(format!("period R must be positive, got {period}")));
    }
    let r = period as f64;
    let d = bump.support_radius();
    if !bump.is_zero() && r <= 2.0 * d {
        return Err(Error::Precondition(format!("R = {period} must exceed 2D = {}", 2.0 * d)));
    }
    let mut breaks = Vec::new();
    let kmax = ((r / 2.0 + d) / r).ceil() as i64 + 1;
    for k in -kmax..=kmax {
        breaks.extend(bump.breakpoints_1d(k as f64 * r));
    }
    let nodes = opts.rule.nodes(-r / 2.0, r / 2.0, &breaks);
    let mut li = LevelIntegral::new();
    li.push_nodes(spec, &nodes, 1.0, |x| bump.zeta_r(period, &[x]).expect("positive period"));
    li.solve(spec, bump.sup_norm(), opts.tol)
}

/// H̄_η from `(1−η)∫_Q H⁻¹(λ, x) + η∫_Q H⁻¹(ζ(x) + λ, x) = 0` (support of ζ inside Q).
pub fn solve_hbar_eta_exact_1d(spec: &HamiltonianSpec, bump: &BumpProfile, eta: f64, opts: &Solve1DOptions) -> Result<ErgodicConstant1D> {
    require_1d(spec)?;
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidArgument(format!("eta must lie in [0, 1], got {eta}")));
    }
    if bump.support_radius() > 0.5 {
        return Err(Error::Precondition(format!(
            "support radius {} exceeds 1/2; sppt(ζ) must lie in Q",
            bump.support_radius()
        )));
    }
    let nodes = cell_nodes(&opts.rule, &bump.breakpoints_1d(0.0));
    let mut li = LevelIntegral::new();
    if eta < 1.0 {
        li.push_nodes(spec, &nodes, 1.0 - eta, |_| 0.0);
    }
    if eta > 0.0 {
        li.push_nodes(spec, &nodes, eta, |x| bump.eval(&[x]));
    }
    li.solve(spec, bump.sup_norm(), opts.tol)
}

/// Ergodic constant of the `N`-periodic source built from a bump at every occupied site of
/// the window `Q_N`: root of `∫_{Q_N} H⁻¹(Σ_k X_k ζ(x − k) + λ, x) dx = 0`.
///
/// `occupied[i]` refers to site `i − ⌊N/2⌋`. When the support fits in one cell the integral
/// splits into empty and occupied cells, so only their counts matter.
pub fn solve_hbar_window_1d(spec: &HamiltonianSpec, bump: &BumpProfile, occupied: &[bool], opts: &Solve1DOptions) -> Result<ErgodicConstant1D> {
    require_1d(spec)?;
    let n = occupied.len();
    if n == 0 {
        return Err(Error::InvalidArgument("window must contain at least one site".into()));
    }
    let d = bump.support_radius();
    if d <= 0.5 {
        let full = occupied.iter().filter(|b| **b).count();
        return solve_hbar_eta_exact_1d(spec, bump, full as f64 / n as f64, opts);
    }
    let r = n as f64;
    if !bump.is_zero() && r <= 2.0 * d {
        return Err(Error::Precondition(format!("window N = {n} must exceed 2D = {}", 2.0 * d)));
    }
    let half = (n / 2) as i64;
    let sites: Vec<i64> = (0..n).filter(|&i| occupied[i]).map(|i| i as i64 - half).collect();
    let mut breaks = Vec::new();
    for &k in &sites {
        for m in -1..=1 {
            breaks.extend(bump.breakpoints_1d(k as f64 + m as f64 * r));
        }
    }
    let source = |x: f64| -> f64 {
        sites
            .iter()
            .flat_map(|&k| (-1..=1).map(move |m| k as f64 + m as f64 * r))
            .map(|c| bump.eval(&[x - c]))
            .sum()
    };
    let lo = -(half as f64) - 0.5;
    let nodes = opts.rule.nodes(lo, lo + r, &breaks);
    let mut li = LevelIntegral::new();
    li.push_nodes(spec, &nodes, 1.0 / r, source);
    li.solve(spec, bump.sup_norm(), opts.tol)
}

/// The normalized invariant density `σ̃ ∝ 1 / D_pH(χ'(x), x)`.
#[derive(Debug, Clone)]
pub struct InvariantDensity1D<'a> {
    inverse: BranchInverse<'a>,
    hbar: f64,
    /// `∫_Q 1/D_pH(χ', x) dx`.
    normalizer: f64,
}

impl<'a> InvariantDensity1D<'a> {
    pub fn new(spec: &'a HamiltonianSpec, hbar: &ErgodicConstant1D, rule: &CompositeRule) -> Result<Self> {
        let inverse = BranchInverse::new(spec, hbar.branch)?;
        let nodes = cell_nodes(rule, &[]);
        let mut z = 0.0;
        for (&x, &w) in nodes.x.iter().zip(&nodes.w) {
            let g = slope_at(&inverse, spec, hbar.value, x)?;
            z += w / g;
        }
        Ok(Self {
            inverse,
            hbar: hbar.value,
            normalizer: z,
        })
    }

    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let g = slope_at(&self.inverse, self.inverse.spec, self.hbar, x)?;
        Ok(1.0 / (g * self.normalizer))
    }
}

fn slope_at(inv: &BranchInverse<'_>, spec: &HamiltonianSpec, level: f64, x: f64) -> Result<f64> {
    let p = inv.invert(level, x)?;
    let g = spec.grad_p_h(&[p], &[x])?[0];
    if g.abs() < 1e-12 {
        return Err(Error::DegenerateBranch { x });
    }
    Ok(g)
}

pub fn invariant_density_1d(spec: &HamiltonianSpec, hbar: &ErgodicConstant1D, x: f64) -> Result<f64> {
    InvariantDensity1D::new(spec, hbar, &CompositeRule::default())?.eval(x)
}

/// `χ(x) = ∫₀ˣ H⁻¹(H̄, y) dy`.
pub fn corrector_1d(spec: &HamiltonianSpec, hbar: &ErgodicConstant1D, x: f64) -> Result<f64> {
    let inv = BranchInverse::new(spec, hbar.branch)?;
    let rule = CompositeRule::default();
    let (a, b, sign) = if x >= 0.0 { (0.0, x, 1.0) } else { (x, 0.0, -1.0) };
    let nodes = rule.nodes(a, b, &[]);
    let mut acc = 0.0;
    for (&y, &w) in nodes.x.iter().zip(&nodes.w) {
        acc += w * inv.invert(hbar.value, y)?;
    }
    Ok(sign * acc)
}

/// χ at each point of an increasing list, by cumulative quadrature from 0.
pub fn corrector_1d_at(spec: &HamiltonianSpec, hbar: &ErgodicConstant1D, points: &[f64]) -> Result<Vec<f64>> {
    points.iter().map(|&x| corrector_1d(spec, hbar, x)).collect()
}

/// `−(∫_Q 1/D_pH(χ', x))⁻¹ ∫_{sppt ζ} (H⁻¹(ζ + H̄, x) − H⁻¹(H̄, x)) dx`:
/// the limit of `R(H̄_R − H̄)` and of `(H̄_η − H̄)/η`.
pub fn limit_formula_1d(spec: &HamiltonianSpec, bump: &BumpProfile, hbar: &ErgodicConstant1D, rule: &CompositeRule) -> Result<f64> {
    const GUARD: f64 = 1e-6;
    require_1d(spec)?;
    if bump.is_zero() {
        return Ok(0.0);
    }
    let inv = BranchInverse::new(spec, hbar.branch)?;
    let z = InvariantDensity1D::new(spec, hbar, rule)?.normalizer();
    let d = bump.support_radius();
    let nodes = rule.nodes(-d, d, &bump.breakpoints_1d(0.0));
    let mut jump = 0.0;
    for (&x, &w) in nodes.x.iter().zip(&nodes.w) {
        let level = bump.eval(&[x]) + hbar.value;
        let p = inv.invert(level, x)?;
        let slope = spec.grad_p_h(&[p], &[x])?[0];
        if slope.abs() < GUARD {
            return Err(Error::BranchExit { x, slope });
        }
        jump += w * (p - inv.invert(hbar.value, x)?);
    }
    Ok(-jump / z)
}

/// Terms of the periodic d = 1 expansion: `(I)_R + (II)_R = 0` and
/// `(I)_R ≈ (∫_Q D_rH⁻¹) R S_R` up to `O(1/R)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeriodicExpansion1D {
    pub period: i64,
    pub gap: f64,
    pub term_i: f64,
    pub term_ii: f64,
    pub term_iii: f64,
    /// `(∫_Q 1/D_pH(χ', x)) R S_R`.
    pub linearized_i: f64,
}

pub fn periodic_expansion_1d(
    spec: &HamiltonianSpec,
    bump: &BumpProfile,
    period: i64,
    hbar: &ErgodicConstant1D,
    hbar_r: &ErgodicConstant1D,
    rule: &CompositeRule,
) -> Result<PeriodicExpansion1D> {
    let inv = BranchInverse::new(spec, hbar.branch)?;
    let r = period as f64;
    let s = hbar_r.value - hbar.value;
    let d = bump.support_radius();
    let mut breaks = Vec::new();
    for k in -1..=1 {
        breaks.extend(bump.breakpoints_1d(k as f64 * r));
    }
    let nodes = rule.nodes(-r / 2.0, r / 2.0, &breaks);
    let (mut i_r, mut ii_r, mut iii_r) = (0.0, 0.0, 0.0);
    for (&x, &w) in nodes.x.iter().zip(&nodes.w) {
        let z = bump.zeta_r(period, &[x])?;
        let base = inv.invert(z + hbar.value, x)?;
        i_r += w * (inv.invert(z + s + hbar.value, x)? - base);
        ii_r += w * (base - inv.invert(hbar.value, x)?);
        if x.abs() <= d {
            iii_r += w * (inv.d_invert(z + hbar.value, x)? - inv.d_invert(hbar.value, x)?);
        }
    }
    let z = InvariantDensity1D::new(spec, hbar, rule)?.normalizer();
    Ok(PeriodicExpansion1D {
        period,
        gap: s,
        term_i: i_r,
        term_ii: ii_r,
        term_iii: iii_r,
        linearized_i: z * r * s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::PotentialField;

    fn cos_spec(pbar: f64) -> HamiltonianSpec {
        HamiltonianSpec::quadratic(vec![pbar], PotentialField::cosine(vec![1.0]).unwrap()).unwrap()
    }

    #[test]
    fn free_hbar_is_pbar_squared() {
        let spec = HamiltonianSpec::free(vec![1.0]).unwrap();
        let h = solve_hbar_1d(&spec, &Solve1DOptions::with_tol(1e-14)).unwrap();
        assert!((h.value - 1.0).abs() < 1e-12);
        assert_eq!(h.branch, Branch::Plus);
        let neg = HamiltonianSpec::free(vec![-1.5]).unwrap();
        let h = solve_hbar_1d(&neg, &Solve1DOptions::with_tol(1e-14)).unwrap();
        assert!((h.value - 2.25).abs() < 1e-12);
        assert_eq!(h.branch, Branch::Minus);
    }

    #[test]
    fn small_pbar_has_no_single_branch() {
        // ∫_Q √(1 + cos 2πx) = 2√2/π ≈ 0.9003
        let crit = 2.0 * 2f64.sqrt() / std::f64::consts::PI;
        let spec = cos_spec(0.9 * crit);
        assert!(matches!(
            solve_hbar_1d(&spec, &Solve1DOptions::default()),
            Err(Error::NoSingleBranch(_))
        ));
    }

    #[test]
    fn branch_inverse_roundtrip_and_monotone() {
        let spec = cos_spec(2.0);
        for branch in [Branch::Plus, Branch::Minus] {
            let inv = BranchInverse::new(&spec, branch).unwrap();
            for k in 0..20 {
                let x = -0.5 + k as f64 / 20.0;
                let m = inv.min_value(x);
                let mut prev = None;
                for j in 0..10 {
                    let r = m + 0.1 + j as f64 * 0.5;
                    let p = inv.invert(r, x).unwrap();
                    assert!((spec.eval_h(&[p], &[x]).unwrap() - r).abs() < 1e-10);
                    if let Some(q) = prev {
                        assert!(branch.sign() * (p - q) > 0.0);
                    }
                    prev = Some(p);
                    // D_r H^{-1} against a central difference in r
                    let fd = (inv.invert(r + 1e-6, x).unwrap() - inv.invert(r - 1e-6, x).unwrap()) / 2e-6;
                    assert!((fd - inv.d_invert(r, x).unwrap()).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn unperturbed_periodic_constant_equals_hbar() {
        let spec = cos_spec(2.0);
        let opts = Solve1DOptions::with_tol(1e-13);
        let h = solve_hbar_1d(&spec, &opts).unwrap();
        let zero = BumpProfile::none();
        for r in [1, 3, 8] {
            let hr = solve_hbar_r_1d(&spec, &zero, r, &opts).unwrap();
            assert!((hr.value - h.value).abs() < 1e-12);
        }
    }

    #[test]
    fn eta_endpoints() {
        let spec = HamiltonianSpec::free(vec![1.0]).unwrap();
        let bump = BumpProfile::tent(1.0, 0.4).unwrap();
        let opts = Solve1DOptions::with_tol(1e-14);
        let h = solve_hbar_1d(&spec, &opts).unwrap();
        let e0 = solve_hbar_eta_exact_1d(&spec, &bump, 0.0, &opts).unwrap();
        assert!((e0.value - h.value).abs() < 1e-12);
        let e1 = solve_hbar_eta_exact_1d(&spec, &bump, 1.0, &opts).unwrap();
        let r1 = solve_hbar_r_1d(&spec, &bump, 1, &opts).unwrap();
        assert!((e1.value - r1.value).abs() < 1e-12);
    }

    #[test]
    fn support_outside_cell_rejected() {
        let spec = HamiltonianSpec::free(vec![1.0]).unwrap();
        let bump = BumpProfile::tent(1.0, 0.7).unwrap();
        assert!(matches!(
            solve_hbar_eta_exact_1d(&spec, &bump, 0.1, &Solve1DOptions::default()),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn free_density_and_corrector_vanish() {
        let spec = HamiltonianSpec::free(vec![1.0]).unwrap();
        let h = solve_hbar_1d(&spec, &Solve1DOptions::with_tol(1e-14)).unwrap();
        for x in [-0.4, 0.0, 0.33] {
            assert!((invariant_density_1d(&spec, &h, x).unwrap() - 1.0).abs() < 1e-10);
            assert!(corrector_1d(&spec, &h, x).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn corrector_is_periodic() {
        let spec = cos_spec(2.0);
        let h = solve_hbar_1d(&spec, &Solve1DOptions::with_tol(1e-13)).unwrap();
        let c1 = corrector_1d(&spec, &h, 1.0).unwrap();
        assert!(c1.abs() < 1e-8, "χ(1) = {c1}");
        let a = corrector_1d(&spec, &h, 0.3).unwrap();
        let b = corrector_1d(&spec, &h, 1.3).unwrap();
        assert!((a - b).abs() < 1e-8);
    }

    #[test]
    fn zero_bump_limit_is_zero_and_sign_is_negative() {
        let spec = cos_spec(2.0);
        let h = solve_hbar_1d(&spec, &Solve1DOptions::with_tol(1e-13)).unwrap();
        let rule = CompositeRule::default();
        assert_eq!(limit_formula_1d(&spec, &BumpProfile::none(), &h, &rule).unwrap(), 0.0);
        for a in [0.1, 1.0, 5.0] {
            let b = BumpProfile::tent(a, 0.3).unwrap();
            assert!(limit_formula_1d(&spec, &b, &h, &rule).unwrap() < 0.0);
        }
    }

    #[test]
    fn expansion_terms_balance() {
        let spec = cos_spec(2.0);
        let bump = BumpProfile::smooth(1.0, 0.3).unwrap();
        let opts = Solve1DOptions::with_tol(1e-13);
        let h = solve_hbar_1d(&spec, &opts).unwrap();
        let rule = CompositeRule::default();
        let mut prev = f64::INFINITY;
        for r in [4, 16, 64] {
            let hr = solve_hbar_r_1d(&spec, &bump, r, &opts).unwrap();
            let e = periodic_expansion_1d(&spec, &bump, r, &h, &hr, &rule).unwrap();
            assert!((e.term_i + e.term_ii).abs() < 1e-9, "{e:?}");
            let lin_err = (e.term_i - e.linearized_i).abs();
            assert!(lin_err * r as f64 <= 1.0, "{e:?}");
            assert!(lin_err < prev);
            prev = lin_err;
        }
    }
}
