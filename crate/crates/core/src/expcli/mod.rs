//! Experiment orchestration behind the `hj-homog` binary: configuration,
//! parameter sweeps, rate fits and CSV/JSON emission.

mod config;
mod fit;
mod table;

use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

pub use config::{resolve_seed, ChiInftyParams, ExperimentConfig, ExperimentKind, WeakKamParams, SEED_ENV};
pub use fit::RateFit;
pub use table::{num, opt, text, Table};

use crate::cellpde::{
    compute_chi_infty, corrector_from_discounted, estimate_hbar_grid, lipschitz_bound, periodic_bump_source, GridField, PeriodicGrid,
};
use crate::error::{Error, Result};
use crate::hamiltonian::{BumpProfile, HamiltonianSpec, LagrangianEval};
use crate::homog1d::{
    corrector_1d_at, limit_formula_1d, solve_hbar_1d, solve_hbar_eta_exact_1d, solve_hbar_r_1d, InvariantDensity1D, Solve1DOptions,
};
use crate::quadrature::CompositeRule;
use crate::randomfield::{mc_estimate_hbar_eta_1d, mc_estimate_hbar_eta_grid};
use crate::weakkam::{
    chi_infty_structure, check_invariance, flow_trajectory, occupational_measure, pairing_integral, rotation_number, verify_value_identity,
    CorrectorField, FlowOptions, OccupationalMeasure,
};

/// Per-run settings that are not part of the physics.
#[derive(Debug, Clone, PartialEq)]
pub struct RunContext {
    pub seed: u64,
    pub keep_going: bool,
}

/// Everything one subcommand produces.
#[derive(Debug, Clone)]
pub struct Report {
    pub kind: ExperimentKind,
    pub table: Table,
    /// Additional dumps written as `<kind>_<name>.csv`.
    pub extras: Vec<(String, Table)>,
    pub fit: Option<RateFit>,
    pub summary: serde_json::Value,
    pub config: ExperimentConfig,
    pub config_hash: String,
}

impl Report {
    /// `<dir>/<kind>.csv`, `<dir>/<kind>.json` and the extras.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let stem = self.kind.as_str();
        self.table.write_csv(BufWriter::new(File::create(dir.join(format!("{stem}.csv")))?))?;
        for (name, t) in &self.extras {
            t.write_csv(BufWriter::new(File::create(dir.join(format!("{stem}_{name}.csv")))?))?;
        }
        let sidecar = json!({
            "experiment": stem,
            "config": self.config,
            "config_hash": self.config_hash,
            "seed": self.config.seed,
            "rate_fit": self.fit,
            "summary": self.summary,
        });
        serde_json::to_writer_pretty(BufWriter::new(File::create(dir.join(format!("{stem}.json")))?), &sidecar)?;
        Ok(())
    }
}

const PROVENANCE: [&str; 4] = ["config_hash", "seed", "grid", "delta_schedule"];

struct Prov {
    hash: String,
    seed: u64,
    schedule: String,
}

impl Prov {
    fn cells(&self, grid: &str) -> Vec<String> {
        vec![self.hash.clone(), self.seed.to_string(), grid.to_string(), self.schedule.clone()]
    }
}

fn grid_tag(g: &PeriodicGrid) -> String {
    format!("d{}R{}n{}", g.dim, g.period, g.n)
}

fn header(cols: &[&'static str]) -> Vec<&'static str> {
    cols.iter().chain(PROVENANCE.iter()).copied().collect()
}

struct Setup {
    spec: HamiltonianSpec,
    bump: BumpProfile,
    opts: Solve1DOptions,
    prov: Prov,
}

fn setup(config: &ExperimentConfig) -> Result<Setup> {
    config.validate()?;
    Ok(Setup {
        spec: config.problem.hamiltonian()?,
        bump: config.problem.bump()?,
        opts: Solve1DOptions {
            rule: CompositeRule::new(config.quadrature_panels),
            ..Solve1DOptions::default()
        },
        prov: Prov {
            hash: config.hash(),
            seed: config.seed,
            schedule: config.solver.delta_schedule.iter().map(|d| format!("{d:e}")).collect::<Vec<_>>().join(";"),
        },
    })
}

/// Runs one experiment with `config.seed` already resolved.
pub fn run(config: &ExperimentConfig, ctx: &RunContext) -> Result<Report> {
    let mut config = config.clone();
    config.seed = ctx.seed;
    let s = setup(&config)?;
    let (table, extras, fit, summary) = match config.experiment {
        ExperimentKind::Hbar => run_hbar(&config, &s)?,
        ExperimentKind::PeriodicSweep => run_periodic_sweep(&config, &s, ctx)?,
        ExperimentKind::RandomSweep => run_random_sweep(&config, &s, ctx)?,
        ExperimentKind::Weakkam => run_weakkam(&config, &s)?,
        ExperimentKind::ChiInfty => run_chi_infty_report(&config, &s, ctx)?,
    };
    Ok(Report {
        kind: config.experiment,
        table,
        extras,
        fit,
        summary,
        config_hash: s.prov.hash.clone(),
        config,
    })
}

type Output = (Table, Vec<(String, Table)>, Option<RateFit>, serde_json::Value);

/// `R` used for the bump source of a single effective-constant run.
fn hbar_period(config: &ExperimentConfig, bump: &BumpProfile) -> u64 {
    if bump.is_zero() {
        1
    } else {
        config.r_values.first().copied().unwrap_or(1)
    }
}

fn run_hbar(config: &ExperimentConfig, s: &Setup) -> Result<Output> {
    let mut t = Table::new(&header(&["method", "R", "hbar", "residual", "fit_error", "cross_diff", "warnings", "error"]));
    let r = hbar_period(config, &s.bump);
    let grid = PeriodicGrid::new(config.dim(), r, config.grid_n)?;
    let exact = if config.dim() == 1 {
        let e = if s.bump.is_zero() {
            solve_hbar_1d(&s.spec, &s.opts)
        } else {
            solve_hbar_r_1d(&s.spec, &s.bump, r as i64, &s.opts)
        };
        let prov = s.prov.cells("exact");
        match e {
            Ok(e) => {
                let res = num(e.residual.abs());
                t.push([vec!["exact1d".into(), r.to_string(), num(e.value), res.clone(), res, String::new(), String::new(), String::new()], prov].concat())?;
                Some(e.value)
            }
            // the exact method needs a single-branch corrector; the grid row still applies
            Err(e @ Error::NoSingleBranch(_)) => {
                let mut row = vec!["exact1d".into(), r.to_string()];
                row.extend(std::iter::repeat_n(String::new(), 5));
                row.push(text(&e.to_string()));
                t.push([row, prov].concat())?;
                None
            }
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let source = periodic_bump_source(&s.bump, grid)?;
    let g = estimate_hbar_grid(&s.spec, &source, &config.solver)?;
    t.push(
        [
            vec![
                g.method.as_str().into(),
                r.to_string(),
                num(g.value),
                num(g.max_residual()),
                num(g.fit_error),
                opt(exact.map(|e| g.value - e)),
                text(&g.warnings.join("; ")),
                String::new(),
            ],
            s.prov.cells(&grid_tag(&grid)),
        ]
        .concat(),
    )?;
    let summary = json!({ "exact": exact, "grid": g });
    Ok((t, Vec::new(), None, summary))
}

#[derive(Debug, Clone, Serialize)]
struct SweepPoint {
    r: u64,
    hbar_r: f64,
    residual: f64,
}

fn run_periodic_sweep(config: &ExperimentConfig, s: &Setup, ctx: &RunContext) -> Result<Output> {
    let d = config.dim();
    let mut rs = config.r_values.clone();
    rs.sort_unstable();
    rs.dedup();
    let (hbar, method, limit) = if d == 1 {
        let h = solve_hbar_1d(&s.spec, &s.opts)?;
        let lim = limit_formula_1d(&s.spec, &s.bump, &h, &s.opts.rule)?;
        (h.value, "exact1d", Some(lim))
    } else {
        let g = PeriodicGrid::new(d, 1, config.grid_n)?;
        let e = estimate_hbar_grid(&s.spec, &GridField::zeros(g, "f"), &config.solver)?;
        (e.value, "discounted-extrapolated", None)
    };
    let results: Vec<Result<SweepPoint>> = rs
        .par_iter()
        .map(|&r| {
            let out = if d == 1 {
                solve_hbar_r_1d(&s.spec, &s.bump, r as i64, &s.opts).map(|e| SweepPoint {
                    r,
                    hbar_r: e.value,
                    residual: e.residual.abs(),
                })
            } else {
                PeriodicGrid::new(d, r, config.grid_n)
                    .and_then(|g| periodic_bump_source(&s.bump, g))
                    .and_then(|f| estimate_hbar_grid(&s.spec, &f, &config.solver))
                    .map(|e| SweepPoint {
                        r,
                        hbar_r: e.value,
                        residual: e.max_residual(),
                    })
            };
            out.map_err(|e| e.at(format!("R = {r}")))
        })
        .collect();
    let mut t = Table::new(&header(&["R", "hbar_R", "gap", "scaled_gap", "limit_ref", "method", "residual", "error"]));
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    let mut points = Vec::new();
    for (r, res) in rs.iter().zip(results) {
        let grid = if d == 1 {
            "exact".to_string()
        } else {
            grid_tag(&PeriodicGrid::new(d, *r, config.grid_n)?)
        };
        match res {
            Ok(p) => {
                let gap = hbar - p.hbar_r;
                let scaled = (*r as f64).powi(d as i32) * (p.hbar_r - hbar);
                t.push(
                    [
                        vec![r.to_string(), num(p.hbar_r), num(gap), num(scaled), opt(limit), method.into(), num(p.residual), String::new()],
                        s.prov.cells(&grid),
                    ]
                    .concat(),
                )?;
                xs.push(*r as f64);
                ys.push(gap);
                points.push(p);
            }
            Err(e) if ctx.keep_going => {
                let mut row = vec![r.to_string()];
                row.extend(std::iter::repeat_n(String::new(), 6));
                row.push(text(&e.to_string()));
                t.push([row, s.prov.cells(&grid)].concat())?;
            }
            Err(e) => return Err(e),
        }
    }
    let fit = if s.bump.is_zero() || ys.iter().all(|g| *g == 0.0) {
        RateFit::degenerate("degenerate: all gaps are zero", ys.len())
    } else {
        RateFit::log_log(&xs, &ys, None)
    };
    let summary = json!({ "hbar": hbar, "method": method, "limit_ref": limit, "points": points });
    Ok((t, Vec::new(), Some(fit), summary))
}

fn run_random_sweep(config: &ExperimentConfig, s: &Setup, ctx: &RunContext) -> Result<Output> {
    let d = config.dim();
    let mut etas = config.eta_values.clone();
    etas.sort_by(|a, b| a.total_cmp(b));
    etas.dedup();
    let (hbar, limit) = if d == 1 {
        let h = solve_hbar_1d(&s.spec, &s.opts)?;
        (h.value, Some(limit_formula_1d(&s.spec, &s.bump, &h, &s.opts.rule)?))
    } else {
        let g = PeriodicGrid::new(d, 1, config.grid_n)?;
        (estimate_hbar_grid(&s.spec, &GridField::zeros(g, "f"), &config.solver)?.value, None)
    };
    let mut t = Table::new(&header(&[
        "eta",
        "hbar_eta_exact",
        "mc_mean",
        "mc_se",
        "mc_empty_windows",
        "mc_mean_half_torus",
        "grid_mc_mean",
        "grid_mc_se",
        "ratio",
        "ratio_ref",
        "method",
        "error",
    ]));
    let grid = match config.mc_grid_window {
        Some(w) => grid_tag(&PeriodicGrid::new(d, w, config.grid_n)?),
        None => format!("torus{}", config.torus_n),
    };
    let (mut xs, mut ys, mut ws) = (Vec::new(), Vec::new(), Vec::new());
    let mut rows = Vec::new();
    for &eta in &etas {
        let point = || -> Result<serde_json::Value> {
            let exact = if d == 1 {
                Some(solve_hbar_eta_exact_1d(&s.spec, &s.bump, eta, &s.opts)?.value)
            } else {
                None
            };
            let mc = if d == 1 {
                Some(mc_estimate_hbar_eta_1d(&s.spec, &s.bump, eta, config.torus_n, config.samples, ctx.seed, &s.opts)?)
            } else {
                None
            };
            // same seeds on a window half as long, for the finite-torus sensitivity
            let half = if d == 1 && config.torus_n >= 4 {
                Some(mc_estimate_hbar_eta_1d(&s.spec, &s.bump, eta, config.torus_n / 2, config.samples, ctx.seed, &s.opts)?.mean)
            } else {
                None
            };
            let grid_mc = match config.mc_grid_window {
                Some(w) => Some(mc_estimate_hbar_eta_grid(
                    &s.spec,
                    &s.bump,
                    eta,
                    w,
                    config.grid_n,
                    config.samples,
                    ctx.seed,
                    &config.solver,
                )?),
                None => None,
            };
            Ok(json!({ "eta": eta, "exact": exact, "mc": mc, "mc_half_torus": half, "grid_mc": grid_mc }))
        };
        match point().map_err(|e| e.at(format!("eta = {eta}"))) {
            Ok(v) => {
                let exact = v["exact"].as_f64();
                let mc_mean = v["mc"]["mean"].as_f64();
                let mc_se = v["mc"]["se"].as_f64();
                let gm = v["grid_mc"]["mean"].as_f64();
                let gse = v["grid_mc"]["se"].as_f64();
                let (best, se) = match (exact, mc_mean, gm) {
                    (Some(e), _, _) => (Some(e), None),
                    (None, Some(m), _) => (Some(m), mc_se),
                    (None, None, g) => (g, gse),
                };
                let ratio = if eta > 0.0 { best.map(|b| (hbar - b) / eta) } else { None };
                let method = if exact.is_some() { "exact1d" } else { "montecarlo" };
                t.push(
                    [
                        vec![
                            num(eta),
                            opt(exact),
                            opt(mc_mean),
                            opt(mc_se),
                            v["mc"]["empty_windows"].as_u64().map(|u| u.to_string()).unwrap_or_default(),
                            opt(v["mc_half_torus"].as_f64()),
                            opt(gm),
                            opt(gse),
                            opt(ratio),
                            opt(limit.map(|l| -l)),
                            method.into(),
                            String::new(),
                        ],
                        s.prov.cells(&grid),
                    ]
                    .concat(),
                )?;
                if let (Some(b), true) = (best, eta > 0.0) {
                    let gap = hbar - b;
                    xs.push(eta);
                    ys.push(gap);
                    // weights are inverse variances of log(gap)
                    ws.push(se.map_or(1.0, |e| if e > 0.0 && gap > 0.0 { (gap / e).powi(2) } else { 1.0 }));
                }
                rows.push(v);
            }
            Err(e) if ctx.keep_going => {
                let mut row = vec![num(eta)];
                row.extend(std::iter::repeat_n(String::new(), 10));
                row.push(text(&e.to_string()));
                t.push([row, s.prov.cells(&grid)].concat())?;
            }
            Err(e) => return Err(e),
        }
    }
    let fit = if s.bump.is_zero() {
        RateFit::degenerate("degenerate: zero bump", ys.len())
    } else {
        RateFit::log_log(&xs, &ys, Some(&ws))
    };
    let summary = json!({ "hbar": hbar, "limit_ref": limit, "points": rows });
    Ok((t, Vec::new(), Some(fit), summary))
}

/// Unperturbed corrector on the unit cell: exact quadrature in d = 1, grid solve otherwise.
fn cell_corrector(config: &ExperimentConfig, s: &Setup) -> Result<(GridField, f64)> {
    let g = PeriodicGrid::new(config.dim(), 1, config.grid_n)?;
    if config.dim() == 1 {
        let h = solve_hbar_1d(&s.spec, &s.opts)?;
        let pts: Vec<f64> = (0..g.len()).map(|j| g.coord(j)).collect();
        Ok((GridField::new(g, corrector_1d_at(&s.spec, &h, &pts)?, "chi")?, h.value))
    } else {
        let (chi, e) = corrector_from_discounted(&s.spec, &GridField::zeros(g, "f"), &config.solver)?;
        Ok((chi, e.value))
    }
}

fn run_weakkam(config: &ExperimentConfig, s: &Setup) -> Result<Output> {
    let w = &config.weakkam;
    let d = config.dim();
    let (chi, hbar) = cell_corrector(config, s)?;
    let corr = CorrectorField::new(&s.spec, &chi)?;
    let x0 = if w.x0.is_empty() { vec![0.0; d] } else { w.x0.clone() };
    let traj = flow_trajectory(&corr, &x0, w.horizon, w.step, &FlowOptions::default())?;
    let rot = rotation_number(&traj, w.horizon.min(100.0))?;
    let measure = occupational_measure(&traj, w.bins)?;
    let invariance = check_invariance(&measure, &corr)?;
    let short = flow_trajectory(&corr, &x0, w.identity_horizon.min(w.horizon), w.step, &FlowOptions::default())?;
    let identity = verify_value_identity(&corr, hbar, &short, &LagrangianEval::new(&s.spec))?;
    let density_l1 = if d == 1 {
        let h = solve_hbar_1d(&s.spec, &s.opts)?;
        let dens = InvariantDensity1D::new(&s.spec, &h, &s.opts.rule)?;
        let mut err = None;
        let oracle = OccupationalMeasure::from_density(1, w.bins, |x| {
            dens.eval(x[0]).unwrap_or_else(|e| {
                err.get_or_insert(e);
                0.0
            })
        });
        if let Some(e) = err {
            return Err(e);
        }
        Some(measure.l1_distance(&oracle))
    } else {
        None
    };
    let mut cols: Vec<&'static str> = ["e1", "e2"][..d].to_vec();
    cols.extend(["hbar", "horizon", "step", "tail_variance", "degenerate", "invariance", "value_identity", "density_l1"]);
    let mut t = Table::new(&header(&cols));
    let mut row: Vec<String> = rot.e_hat.iter().map(|v| num(*v)).collect();
    row.extend([
        num(hbar),
        num(rot.horizon),
        num(w.step),
        num(rot.tail_variance),
        rot.degenerate.to_string(),
        num(invariance),
        num(identity),
        opt(density_l1),
    ]);
    t.push([row, s.prov.cells(&grid_tag(&chi.grid))].concat())?;

    let mut tcols = vec!["t".to_string()];
    tcols.extend((1..=d).map(|a| format!("x{a}")));
    let mut tt = Table {
        header: tcols,
        rows: Vec::new(),
    };
    for i in (0..traj.len()).step_by(w.stride) {
        let mut r = vec![num(traj.time(i))];
        r.extend(traj.point(i).iter().map(|v| num(*v)));
        tt.rows.push(r);
    }
    let mut hcols: Vec<String> = (1..=d).map(|a| format!("c{a}")).collect();
    hcols.push("mass".into());
    let mut ht = Table {
        header: hcols,
        rows: Vec::new(),
    };
    for (i, m) in measure.mass.iter().enumerate() {
        let mut r: Vec<String> = measure.center(i).iter().map(|v| num(*v)).collect();
        r.push(num(*m));
        ht.rows.push(r);
    }
    let summary = json!({
        "rotation": rot,
        "hbar": hbar,
        "invariance": invariance,
        "value_identity": identity,
        "density_l1": density_l1,
        "max_speed": traj.max_speed,
    });
    Ok((t, vec![("trajectory".into(), tt), ("histogram".into(), ht)], None, summary))
}

/// Step for a rotation estimate on `chi`: a quarter cell per step at the a-priori speed bound.
fn rotation_step(spec: &HamiltonianSpec, chi: &GridField) -> Result<f64> {
    let lip = lipschitz_bound(spec, &GridField::zeros(chi.grid, "f"))?;
    Ok(0.25 * chi.grid.spacing() / (2.0 * lip).max(1e-12))
}

fn run_chi_infty_report(config: &ExperimentConfig, s: &Setup, ctx: &RunContext) -> Result<Output> {
    let p = &config.chi_infty;
    let mut rl = p.r_large.clone();
    rl.sort_unstable();
    rl.dedup();
    let mut t = Table::new(&header(&[
        "R_large",
        "c",
        "min_excess",
        "far_sup",
        "tolerance",
        "pairing",
        "hbar_R",
        "hbar",
        "e1",
        "e2",
        "upstream",
        "error",
    ]));
    let mut pairings = Vec::new();
    let mut reports = Vec::new();
    for &r in &rl {
        let point = || -> Result<(Vec<String>, f64, serde_json::Value)> {
            let c = compute_chi_infty(&s.spec, &s.bump, r, config.grid_n, &config.solver)?;
            let corr = CorrectorField::new(&s.spec, &c.chi)?;
            let step = rotation_step(&s.spec, &c.chi)?;
            let traj = flow_trajectory(&corr, &[0.0; 2], 100.0, step, &FlowOptions::default())?;
            let e = rotation_number(&traj, 100.0)?.e_hat;
            let rep = chi_infty_structure(&c.chi_inf, &c.chi, &e, p.far_k, &p.k_eps)?;
            let source = GridField::from_fn(c.chi.grid, "zeta", |x| s.bump.eval(x));
            let lip = lipschitz_bound(&s.spec, &source)?;
            let dmin = config.solver.delta_schedule.iter().copied().fold(f64::INFINITY, f64::min);
            let tol = 2.0 * c.chi.grid.spacing() * lip + config.solver.sweep_tol / dmin;
            let pairing = pairing_integral(&s.spec, &c.chi_inf, &c.chi, None, r as f64 / 4.0)?;
            let upstream: Vec<String> = rep.upstream.iter().map(|(k, v)| format!("{k}:{v:e}")).collect();
            let row = vec![
                r.to_string(),
                num(rep.c),
                num(rep.min_excess),
                num(rep.far_sup),
                num(tol),
                num(pairing),
                num(c.hbar_r.value),
                num(c.hbar.value),
                num(e[0]),
                num(e[1]),
                upstream.join(";"),
                String::new(),
            ];
            Ok((row, pairing, json!({ "R_large": r, "structure": rep, "tolerance": tol, "pairing": pairing })))
        };
        let grid = grid_tag(&PeriodicGrid::new(2, r, config.grid_n)?);
        match point().map_err(|e| e.at(format!("R_large = {r}"))) {
            Ok((row, pairing, v)) => {
                t.push([row, s.prov.cells(&grid)].concat())?;
                pairings.push(pairing);
                reports.push(v);
            }
            Err(e) if ctx.keep_going => {
                let mut row = vec![r.to_string()];
                row.extend(std::iter::repeat_n(String::new(), 10));
                row.push(text(&e.to_string()));
                t.push([row, s.prov.cells(&grid)].concat())?;
            }
            Err(e) => return Err(e),
        }
    }
    let decreasing = pairings.windows(2).all(|w| w[1].abs() < w[0].abs());
    let summary = json!({ "points": reports, "pairing_decreasing": decreasing });
    Ok((t, Vec::new(), None, summary))
}
