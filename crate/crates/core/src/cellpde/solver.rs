use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{for_each_cell_point, Family, FrozenH, HamiltonianSpec};

use super::grid::GridField;

/// 1.5 safety factor on the a-priori gradient bound.
const THETA_SAFETY: f64 = 1.5;
/// Consecutive residual increases tolerated before declaring divergence.
const DIVERGENCE_WINDOW: usize = 10;
/// Growth over the best residual seen that, together with the window, marks divergence.
const DIVERGENCE_GROWTH: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Extrapolation {
    #[default]
    Affine,
    Quadratic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscountedSolveConfig {
    /// Decreasing positive discount factors.
    pub delta_schedule: Vec<f64>,
    /// Per-axis Lax–Friedrichs dissipation; estimated from the problem when absent.
    pub lf_dissipation: Option<Vec<f64>>,
    /// Stop once the nodal residual is below this in sup norm.
    pub sweep_tol: f64,
    /// Cap on Gauss–Seidel sweeps per discount factor.
    pub max_sweeps: usize,
    pub extrapolation: Extrapolation,
    /// Number of trailing schedule entries used in the fit.
    pub fit_points: usize,
    /// Accelerate the sweeps with nonlinear coarse-grid corrections.
    pub multigrid: bool,
}

impl Default for DiscountedSolveConfig {
    fn default() -> Self {
        Self {
            delta_schedule: (0..7).map(|k| 0.1 * 0.5f64.powi(k)).collect(),
            lf_dissipation: None,
            sweep_tol: 1e-10,
            max_sweeps: 400_000,
            extrapolation: Extrapolation::Affine,
            fit_points: 4,
            multigrid: true,
        }
    }
}

impl DiscountedSolveConfig {
    pub fn validate(&self) -> Result<()> {
        let s = &self.delta_schedule;
        if s.is_empty() || s.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::Config("delta schedule must be nonempty and positive".into()));
        }
        if s.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("delta schedule must be strictly decreasing".into()));
        }
        let need = match self.extrapolation {
            Extrapolation::Affine => 2,
            Extrapolation::Quadratic => 3,
        };
        if self.fit_points < need || self.fit_points > s.len() {
            return Err(Error::Config(format!(
                "fit_points = {} must lie in [{need}, {}]",
                self.fit_points,
                s.len()
            )));
        }
        if !(self.sweep_tol > 0.0) || self.max_sweeps == 0 {
            return Err(Error::Config("sweep_tol and max_sweeps must be positive".into()));
        }
        if let Some(t) = &self.lf_dissipation {
            if t.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                return Err(Error::Config("lf_dissipation entries must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Per-axis bound `max |∂H/∂p_i|` over the sublevel set `{H ≤ osc(f) + max_x H(0, x)}`,
/// which contains every discrete gradient of the discounted solution, times 1.5.
pub fn auto_theta(spec: &HamiltonianSpec, source: &GridField) -> Result<Vec<f64>> {
    let level = source.max() - source.min() + spec.max_h_at_zero(32)?;
    let d = spec.dim();
    match spec.family() {
        Family::QuadraticShifted { potential, .. } => {
            let r = (level + potential.max_value()).max(0.0).sqrt();
            Ok(vec![THETA_SAFETY * 2.0 * r; d])
        }
        Family::Tabulated(tab) => {
            let (lo, hi) = tab.p_range();
            let m = if d == 1 { 401 } else { 41 };
            let mut best = vec![0.0f64; d];
            let mut found = false;
            for_each_cell_point(d, 16, |x| {
                let h = spec.freeze(x);
                let mut idx = vec![0usize; d];
                let mut p = vec![0.0; d];
                loop {
                    for a in 0..d {
                        p[a] = lo[a] + (hi[a] - lo[a]) * idx[a] as f64 / (m - 1) as f64;
                    }
                    if matches!(h.h(&p), Ok(v) if v <= level) {
                        found = true;
                        for (a, b) in best.iter_mut().enumerate() {
                            if let Ok(g) = h.dh(&p, a) {
                                *b = b.max(g.abs());
                            }
                        }
                    }
                    let mut a = 0;
                    loop {
                        if a == d {
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
            });
            if !found {
                return Err(Error::Precondition("sublevel set misses the tabulated range".into()));
            }
            Ok(best.into_iter().map(|b| THETA_SAFETY * b.max(1e-3)).collect())
        }
    }
}

/// Hamiltonian frozen at every grid node.
enum NodeHamiltonian<'a> {
    Quadratic { pbar: [f64; 2], v: Vec<f64> },
    General(Vec<FrozenH<'a>>),
}

impl NodeHamiltonian<'_> {
    #[inline]
    fn h(&self, i: usize, p: &[f64; 2], dim: usize) -> Result<f64> {
        match self {
            NodeHamiltonian::Quadratic { pbar, v } => {
                let a = p[0] + pbar[0];
                let b = p[1] + pbar[1];
                Ok(a * a + b * b - v[i])
            }
            NodeHamiltonian::General(fr) => fr[i].h(&p[..dim]),
        }
    }

    #[inline]
    fn dh(&self, i: usize, p: &[f64; 2], dim: usize, axis: usize) -> Result<f64> {
        match self {
            NodeHamiltonian::Quadratic { pbar, .. } => Ok(2.0 * (p[axis] + pbar[axis])),
            NodeHamiltonian::General(fr) => fr[i].dh(&p[..dim], axis),
        }
    }
}

/// Sweeps per V-cycle leg, in units of full ordering sets.
const SMOOTHING_SETS: usize = 1;
/// Coarse-grid visits per level (2: W-cycle).
const CYCLE_INDEX: usize = 2;
/// Ordering sets spent on the coarsest grid per visit.
const COARSE_SETS: usize = 40;
/// Coarsen while the side stays even and at least this large after halving.
const MIN_COARSE_SIDE: usize = 4;

/// Outcome of one discounted solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaStep {
    pub delta: f64,
    /// `−δ · mean(v)`.
    pub estimate: f64,
    pub residual: f64,
    pub sweeps: usize,
}

/// One grid of the hierarchy with its frozen Hamiltonian and work arrays.
struct Level<'a> {
    dim: usize,
    side: usize,
    h: f64,
    ham: NodeHamiltonian<'a>,
    neighbors: Vec<[usize; 4]>,
    v: Vec<f64>,
    b: Vec<f64>,
}

impl<'a> Level<'a> {
    fn new(spec: &'a HamiltonianSpec, dim: usize, side: usize, h: f64, origin: f64) -> Self {
        let len = side.pow(dim as u32);
        let point = |i: usize| -> Vec<f64> {
            if dim == 1 {
                vec![origin + i as f64 * h]
            } else {
                vec![origin + (i / side) as f64 * h, origin + (i % side) as f64 * h]
            }
        };
        let ham = match spec.family() {
            Family::QuadraticShifted { pbar, potential } => NodeHamiltonian::Quadratic {
                pbar: [pbar[0], pbar.get(1).copied().unwrap_or(0.0)],
                v: (0..len).map(|i| potential.eval(&point(i))).collect(),
            },
            Family::Tabulated(_) => NodeHamiltonian::General((0..len).map(|i| spec.freeze(&point(i))).collect()),
        };
        let wrap = |j: usize, k: i64| (j as i64 + k).rem_euclid(side as i64) as usize;
        let neighbors = (0..len)
            .map(|i| {
                let mut nb = [i; 4];
                if dim == 1 {
                    nb[0] = wrap(i, 1);
                    nb[1] = wrap(i, -1);
                } else {
                    let (j0, j1) = (i / side, i % side);
                    nb[0] = wrap(j0, 1) * side + j1;
                    nb[1] = wrap(j0, -1) * side + j1;
                    nb[2] = j0 * side + wrap(j1, 1);
                    nb[3] = j0 * side + wrap(j1, -1);
                }
                nb
            })
            .collect();
        Self {
            dim,
            side,
            h,
            ham,
            neighbors,
            v: vec![0.0; len],
            b: vec![0.0; len],
        }
    }

    fn len(&self) -> usize {
        self.v.len()
    }

    #[inline]
    fn central(&self, i: usize) -> [f64; 2] {
        let nb = &self.neighbors[i];
        let inv2h = 0.5 / self.h;
        let mut p = [0.0; 2];
        for (a, q) in p.iter_mut().enumerate().take(self.dim) {
            *q = (self.v[nb[2 * a]] - self.v[nb[2 * a + 1]]) * inv2h;
        }
        p
    }

    /// `δv + Ĥ_LF` at node `i`.
    #[inline]
    fn apply(&self, i: usize, delta: f64, theta: &[f64]) -> Result<f64> {
        let p = self.central(i);
        let nb = &self.neighbors[i];
        let inv2h = 0.5 / self.h;
        let mut visc = 0.0;
        for a in 0..self.dim {
            visc += theta[a] * inv2h * (self.v[nb[2 * a]] - 2.0 * self.v[i] + self.v[nb[2 * a + 1]]);
        }
        Ok(delta * self.v[i] + self.ham.h(i, &p, self.dim)? - visc)
    }

    /// `b − A(v)`.
    fn defect(&self, delta: f64, theta: &[f64]) -> Result<Vec<f64>> {
        (0..self.len()).map(|i| Ok(self.b[i] - self.apply(i, delta, theta)?)).collect()
    }

    fn sweep(&mut self, delta: f64, theta: &[f64], order: usize) -> Result<()> {
        let dim = self.dim;
        let m = self.side;
        let inv2h = 0.5 / self.h;
        let mut t = [0.0; 2];
        for a in 0..dim {
            t[a] = theta[a] * inv2h;
        }
        let denom = delta + 2.0 * (t[0] + t[1]);
        let rev0 = order & 1 == 1;
        let rev1 = order & 2 == 2;
        let rows = if dim == 1 { 1 } else { m };
        for r in 0..rows {
            let j0 = if rev0 { rows - 1 - r } else { r };
            for s in 0..m {
                let j1 = if rev1 { m - 1 - s } else { s };
                let i = j0 * m + j1;
                let p = self.central(i);
                let nb = self.neighbors[i];
                let mut acc = self.b[i] - self.ham.h(i, &p, dim)?;
                for a in 0..dim {
                    acc += t[a] * (self.v[nb[2 * a]] + self.v[nb[2 * a + 1]]);
                }
                self.v[i] = acc / denom;
            }
        }
        Ok(())
    }

    fn smooth(&mut self, delta: f64, theta: &[f64], sets: usize) -> Result<usize> {
        let orders: &[usize] = if self.dim == 1 { &[0, 2] } else { &[0, 3, 1, 2] };
        for _ in 0..sets {
            for &o in orders {
                self.sweep(delta, theta, o)?;
            }
        }
        Ok(sets * orders.len())
    }

    /// Removes the mean defect by a constant shift, which is exact since
    /// `A(v + k) = A(v) + δk`.
    fn correct_constant(&mut self, delta: f64, theta: &[f64]) -> Result<()> {
        let d = self.defect(delta, theta)?;
        let k = d.iter().sum::<f64>() / d.len() as f64 / delta;
        self.v.iter_mut().for_each(|v| *v += k);
        Ok(())
    }

    /// Coarse-node lists `(index, weight)` for each fine node along one axis.
    fn axis_stencil(j: usize, coarse: usize) -> [(usize, f64); 2] {
        if j.is_multiple_of(2) {
            [(j / 2, 1.0), (j / 2, 0.0)]
        } else {
            [((j - 1) / 2, 0.5), (j.div_ceil(2) % coarse, 0.5)]
        }
    }
}

/// Nonlinear (FAS) multigrid W-cycles around alternating Gauss–Seidel sweeps for
/// `δv + Ĥ_LF(D⁺v, D⁻v, x) = f` on a periodic grid.
///
/// Coarse grids rediscretize the same scheme with the same θ, so every level
/// is monotone. The local Gauss–Seidel update is linear in the centre value
/// because the central gradient does not involve it.
pub struct DiscountedSolver<'a> {
    source: &'a GridField,
    levels: Vec<Level<'a>>,
    theta: Vec<f64>,
    tol: f64,
    max_sweeps: usize,
    /// The most recent δ.
    delta: f64,
    /// Constant part `K` of `v = u + K`; the fine level stores `u` with mean 0
    /// so the O(1/δ) constant never meets the O(1/h) stencil weights.
    offset: f64,
}

impl<'a> DiscountedSolver<'a> {
    pub fn new(spec: &'a HamiltonianSpec, source: &'a GridField, config: &DiscountedSolveConfig) -> Result<Self> {
        config.validate()?;
        let g = source.grid;
        if g.dim != spec.dim() {
            return Err(Error::InvalidArgument(format!(
                "grid dimension {} does not match Hamiltonian dimension {}",
                g.dim,
                spec.dim()
            )));
        }
        let theta = match &config.lf_dissipation {
            Some(t) if t.len() == g.dim => t.clone(),
            Some(t) => {
                return Err(Error::Config(format!("lf_dissipation has {} entries, need {}", t.len(), g.dim)));
            }
            None => auto_theta(spec, source)?,
        };
        let origin = g.coord(0);
        let mut levels = vec![Level::new(spec, g.dim, g.side(), g.spacing(), origin)];
        if config.multigrid {
            loop {
                let last = levels.last().unwrap();
                if last.side % 2 != 0 || last.side / 2 < MIN_COARSE_SIDE {
                    break;
                }
                let (side, h) = (last.side / 2, last.h * 2.0);
                levels.push(Level::new(spec, g.dim, side, h, origin));
            }
        }
        Ok(Self {
            source,
            levels,
            theta,
            tol: config.sweep_tol,
            max_sweeps: config.max_sweeps,
            delta: f64::NAN,
            offset: f64::NAN,
        })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    fn cycle(&mut self, l: usize, delta: f64) -> Result<usize> {
        let theta = self.theta.clone();
        if l + 1 == self.levels.len() {
            let lv = &mut self.levels[l];
            let mut sweeps = 0;
            let sets = if l == 0 { 1 } else { COARSE_SETS };
            for _ in 0..sets {
                sweeps += lv.smooth(delta, &theta, 1)?;
                lv.correct_constant(delta, &theta)?;
            }
            return Ok(if l == 0 { sweeps } else { 0 });
        }
        let mut sweeps = self.levels[l].smooth(delta, &theta, SMOOTHING_SETS)?;
        let defect = self.levels[l].defect(delta, &theta)?;
        let (fine, rest) = self.levels.split_at_mut(l + 1);
        let fine = &fine[l];
        let coarse = &mut rest[0];
        restrict(fine, coarse, &defect);
        for i in 0..coarse.len() {
            coarse.b[i] += coarse.apply(i, delta, &theta)?;
        }
        let start = coarse.v.clone();
        for _ in 0..CYCLE_INDEX {
            self.cycle(l + 1, delta)?;
        }
        let (fine, rest) = self.levels.split_at_mut(l + 1);
        let fine = &mut fine[l];
        let coarse = &rest[0];
        let corr: Vec<f64> = coarse.v.iter().zip(&start).map(|(a, b)| a - b).collect();
        prolong_add(coarse.side, &corr, fine);
        sweeps += fine.smooth(delta, &theta, SMOOTHING_SETS)?;
        Ok(if l == 0 { sweeps } else { 0 })
    }

    /// Solves at `delta`, warm-started from the current state.
    pub fn solve(&mut self, delta: f64) -> Result<DeltaStep> {
        if !(delta > 0.0) {
            return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
        }
        if self.delta.is_finite() {
            // keep −δK continuous across the schedule
            self.offset *= self.delta / delta;
        } else {
            self.offset = self.source.mean() / delta;
        }
        self.delta = delta;
        let mut sweeps = 0;
        let mut last = f64::INFINITY;
        let mut best = f64::INFINITY;
        let mut rising = 0;
        loop {
            let r = self.recentre(delta)?;
            if !r.is_finite() {
                return Err(Error::Divergence {
                    delta,
                    sweeps,
                    theta: self.theta.clone(),
                });
            }
            if r <= self.tol {
                self.check_monotone()?;
                return Ok(DeltaStep {
                    delta,
                    estimate: -delta * self.offset,
                    residual: r,
                    sweeps,
                });
            }
            if r > last {
                rising += 1;
                if rising >= DIVERGENCE_WINDOW && r > DIVERGENCE_GROWTH * best {
                    return Err(Error::Divergence {
                        delta,
                        sweeps,
                        theta: self.theta.clone(),
                    });
                }
            } else {
                rising = 0;
            }
            last = r;
            best = best.min(r);
            if sweeps >= self.max_sweeps {
                return Err(Error::NotConverged {
                    delta,
                    sweeps,
                    residual: r,
                });
            }
            sweeps += self.cycle(0, delta)?;
        }
    }

    /// Moves the mean of `u` and the mean defect into `K`; returns the sup-norm
    /// defect (NaN if any node is non-finite).
    fn recentre(&mut self, delta: f64) -> Result<f64> {
        let theta = &self.theta;
        let fine = &mut self.levels[0];
        let n = fine.len() as f64;
        let mu = fine.v.iter().sum::<f64>() / n;
        fine.v.iter_mut().for_each(|v| *v -= mu);
        self.offset += mu;
        for _ in 0..2 {
            let k = self.offset;
            fine.b.iter_mut().zip(&self.source.values).for_each(|(b, f)| *b = f - delta * k);
            let d = fine.defect(delta, theta)?;
            let mean = d.iter().sum::<f64>() / n;
            self.offset += mean / delta;
            if d.iter().any(|v| !v.is_finite()) {
                return Ok(f64::NAN);
            }
        }
        let k = self.offset;
        fine.b.iter_mut().zip(&self.source.values).for_each(|(b, f)| *b = f - delta * k);
        let d = fine.defect(delta, theta)?;
        Ok(d.iter().fold(0.0f64, |m, v| m.max(v.abs())))
    }

    /// The scheme is monotone only while `|∂H/∂p_i| ≤ θ_i` at the computed gradients.
    fn check_monotone(&self) -> Result<()> {
        let lv = &self.levels[0];
        for i in 0..lv.len() {
            let p = lv.central(i);
            for a in 0..lv.dim {
                let s = lv.ham.dh(i, &p, lv.dim, a)?.abs();
                if s > self.theta[a] {
                    return Err(Error::Monotonicity {
                        axis: a,
                        observed: s,
                        theta: self.theta[a],
                    });
                }
            }
        }
        Ok(())
    }

    /// Current `v`.
    pub fn values(&self) -> Vec<f64> {
        self.levels[0].v.iter().map(|u| u + self.offset).collect()
    }

    /// Current `v − mean(v)`.
    pub fn oscillating_part(&self) -> Vec<f64> {
        let v = &self.levels[0].v;
        let m = v.iter().sum::<f64>() / v.len() as f64;
        v.iter().map(|x| x - m).collect()
    }

    pub fn source(&self) -> &GridField {
        self.source
    }
}

/// Full-weighting restriction of `defect` into `coarse.b`, and injection of `fine.v` into `coarse.v`.
fn restrict(fine: &Level<'_>, coarse: &mut Level<'_>, defect: &[f64]) {
    const W: [f64; 3] = [0.25, 0.5, 0.25];
    let (m, cm) = (fine.side, coarse.side);
    let wrap = |j: usize, k: i64| (j as i64 + k).rem_euclid(m as i64) as usize;
    if fine.dim == 1 {
        for jc in 0..cm {
            let j = 2 * jc;
            coarse.b[jc] = (0..3).map(|a| W[a] * defect[wrap(j, a as i64 - 1)]).sum();
            coarse.v[jc] = fine.v[j];
        }
    } else {
        for j0c in 0..cm {
            for j1c in 0..cm {
                let (j0, j1) = (2 * j0c, 2 * j1c);
                let mut acc = 0.0;
                for (a, wa) in W.iter().enumerate() {
                    let r0 = wrap(j0, a as i64 - 1) * m;
                    for (b, wb) in W.iter().enumerate() {
                        acc += wa * wb * defect[r0 + wrap(j1, b as i64 - 1)];
                    }
                }
                coarse.b[j0c * cm + j1c] = acc;
                coarse.v[j0c * cm + j1c] = fine.v[j0 * m + j1];
            }
        }
    }
}

/// Adds the (bi)linear interpolant of a coarse correction to `fine.v`.
fn prolong_add(cm: usize, corr: &[f64], fine: &mut Level<'_>) {
    let m = fine.side;
    if fine.dim == 1 {
        for j in 0..m {
            let st = Level::axis_stencil(j, cm);
            fine.v[j] += st.iter().map(|(k, w)| w * corr[*k]).sum::<f64>();
        }
    } else {
        for j0 in 0..m {
            let s0 = Level::axis_stencil(j0, cm);
            for j1 in 0..m {
                let s1 = Level::axis_stencil(j1, cm);
                let mut acc = 0.0;
                for (k0, w0) in s0 {
                    for (k1, w1) in s1 {
                        acc += w0 * w1 * corr[k0 * cm + k1];
                    }
                }
                fine.v[j0 * m + j1] += acc;
            }
        }
    }
}

/// One discounted solve from a cold start.
pub fn solve_discounted(spec: &HamiltonianSpec, source: &GridField, delta: f64, config: &DiscountedSolveConfig) -> Result<GridField> {
    let mut solver = DiscountedSolver::new(spec, source, config)?;
    solver.solve(delta)?;
    GridField::new(source.grid, solver.values(), "v")
}
