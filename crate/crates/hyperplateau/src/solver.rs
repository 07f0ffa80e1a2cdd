//! Damped Newton solver for the Dirichlet problems on the approximating
//! domains Ω_ε, in either the curvature variables (f(κ[u]) = ψ, any k) or
//! the transformed Monge–Ampère variables (k = n).
//!
//! Unknowns live on Active ∪ Boundary nodes in row-major order. Active rows
//! carry the centered 9-point discretization of the equation; ghost rows
//! carry the sub-cell boundary interpolation (1−s)·u(anchor) + s·u(ghost) =
//! boundary value.

use crate::band::BandedSystem;
use crate::domain::{level_set_domain, GridField, LevelSetDomain, Mask};
use crate::error::{Error, Result};
use crate::expr::RhsSpec;
use crate::graphgeom::{self, jet_at};
use crate::linalg::SymMatrix;
use crate::transform;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Path {
    /// solve f(κ[u]) = ψ in the height variable u
    Curvature,
    /// solve det D²U = Ψ in the transformed variable U = u² + |x|² (k = n)
    MongeAmpere,
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub k: usize,
    pub path: Path,
    pub tol: f64,
    pub max_iter: usize,
    pub threads: usize,
}

impl SolveConfig {
    /// Default tolerance max(1e-10, h²/100) against discretization error.
    pub fn new(k: usize, path: Path, h: f64) -> SolveConfig {
        SolveConfig { k, path, tol: (h * h / 100.0).max(1e-10), max_iter: 30, threads: 1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NewtonReport {
    pub iterations: usize,
    pub final_residual: f64,
    /// accepted step fraction per iteration
    pub damping: Vec<f64>,
    /// line-search rejections caused by inadmissible trial iterates
    pub admissibility_repairs: usize,
    pub converged: bool,
    pub warm_started: bool,
}

/// Fixed discretization of one level-set domain: unknown ordering, ghost
/// ties by node, and band halfwidth.
pub struct Discretization {
    pub dom: LevelSetDomain,
    pub unknowns: Vec<(usize, usize)>,
    index: Vec<Option<usize>>,
    tie_of: Vec<Option<usize>>,
    pub halfwidth: usize,
}

impl Discretization {
    pub fn new(dom: LevelSetDomain) -> Result<Discretization> {
        let grid = dom.grid;
        let mut unknowns = Vec::new();
        let mut index = vec![None; grid.len()];
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                if dom.mask[grid.idx(i, j)] != Mask::Outside {
                    index[grid.idx(i, j)] = Some(unknowns.len());
                    unknowns.push((i, j));
                }
            }
        }
        let mut tie_of = vec![None; grid.len()];
        for (t, tie) in dom.ties.iter().enumerate() {
            tie_of[grid.idx(tie.node.0, tie.node.1)] = Some(t);
        }
        let mut halfwidth = 0usize;
        for (q, &(i, j)) in unknowns.iter().enumerate() {
            match dom.mask[grid.idx(i, j)] {
                Mask::Active => {
                    for di in -1..=1isize {
                        for dj in -1..=1isize {
                            let (a, b) =
                                ((i as isize + di) as usize, (j as isize + dj) as usize);
                            let p = index[grid.idx(a, b)].ok_or(Error::Stencil(i, j))?;
                            halfwidth = halfwidth.max(q.abs_diff(p));
                        }
                    }
                }
                Mask::Boundary => {
                    let t = tie_of[grid.idx(i, j)]
                        .ok_or_else(|| Error::Domain(format!("ghost ({i},{j}) lacks a tie")))?;
                    let anchor = dom.ties[t].anchor;
                    let p = index[grid.idx(anchor.0, anchor.1)].ok_or(Error::Stencil(i, j))?;
                    halfwidth = halfwidth.max(q.abs_diff(p));
                }
                Mask::Outside => unreachable!(),
            }
        }
        Ok(Discretization { dom, unknowns, index, tie_of, halfwidth })
    }

    pub fn len(&self) -> usize {
        self.unknowns.len()
    }
    pub fn is_empty(&self) -> bool {
        self.unknowns.is_empty()
    }

    pub fn index_of(&self, i: usize, j: usize) -> Option<usize> {
        self.index[self.dom.grid.idx(i, j)]
    }

    /// Grid field holding the unknown vector over the domain and background
    /// values elsewhere (the background matters only to keep fields total).
    pub fn field_from(&self, s: &[f64], background: &GridField) -> GridField {
        let mut f = GridField {
            grid: self.dom.grid,
            values: background.values.clone(),
            mask: self.dom.mask.clone(),
        };
        for (q, &(i, j)) in self.unknowns.iter().enumerate() {
            f.set(i, j, s[q]);
        }
        f
    }

    fn boundary_value(&self, tie_idx: usize, path: Path) -> f64 {
        let tie = &self.dom.ties[tie_idx];
        match path {
            Path::Curvature => self.dom.eps,
            Path::MongeAmpere => {
                self.dom.eps * self.dom.eps + tie.cut[0] * tie.cut[0] + tie.cut[1] * tie.cut[1]
            }
        }
    }

    /// Residual vector at the iterate `s`. Errors when an active jet leaves
    /// the admissible cone.
    pub fn residual(
        &self,
        s: &[f64],
        background: &GridField,
        psi: &RhsSpec,
        cfg: &SolveConfig,
    ) -> Result<Vec<f64>> {
        let field = self.field_from(s, background);
        let eval_one = |q: usize| -> Result<f64> {
            let (i, j) = self.unknowns[q];
            match self.dom.mask[self.dom.grid.idx(i, j)] {
                Mask::Active => match cfg.path {
                    Path::Curvature => {
                        let jet = jet_at(&field, i, j)?;
                        graphgeom::residual(&jet, psi, cfg.k)
                    }
                    Path::MongeAmpere => {
                        let x = vec![self.dom.grid.x(i), self.dom.grid.y(j)];
                        let du = field.gradient(i, j)?;
                        let d2u = field.hessian(i, j)?;
                        let jet = transform::MaJet {
                            x,
                            u_big: field.value(i, j),
                            du_big: du.to_vec(),
                            d2u_big: d2u,
                        };
                        transform::ma_residual(&jet, psi)
                    }
                },
                Mask::Boundary => {
                    let t = self.tie_of[self.dom.grid.idx(i, j)].expect("tie checked in new()");
                    let tie = &self.dom.ties[t];
                    let ua = field.value(tie.anchor.0, tie.anchor.1);
                    let ub = field.value(i, j);
                    Ok((1.0 - tie.s) * ua + tie.s * ub - self.boundary_value(t, cfg.path))
                }
                Mask::Outside => unreachable!(),
            }
        };
        parallel_try_map(self.len(), cfg.threads, eval_one)
    }

    /// Assembles the Jacobian at `s` into a banded system.
    pub fn jacobian(
        &self,
        s: &[f64],
        background: &GridField,
        psi: &RhsSpec,
        cfg: &SolveConfig,
    ) -> Result<BandedSystem> {
        let field = self.field_from(s, background);
        let grid = self.dom.grid;
        let h = grid.h;
        let mut sys = BandedSystem::new(self.len(), self.halfwidth, self.halfwidth);
        for (q, &(i, j)) in self.unknowns.iter().enumerate() {
            match self.dom.mask[grid.idx(i, j)] {
                Mask::Boundary => {
                    let t = self.tie_of[grid.idx(i, j)].expect("tie checked in new()");
                    let tie = &self.dom.ties[t];
                    let p = self.index_of(tie.anchor.0, tie.anchor.1).unwrap();
                    sys.add(q, q, tie.s)?;
                    sys.add(q, p, 1.0 - tie.s)?;
                }
                Mask::Active => {
                    // row = C : dD²  +  b · dD  +  a dU, for the right C/b/a
                    let (c_mat, b_vec, a_coef) = match cfg.path {
                        Path::Curvature => {
                            let jet = jet_at(&field, i, j)?;
                            let lin = graphgeom::linearization(&jet, psi, cfg.k)?;
                            let psi_u = psi.eval_du(&jet.x, jet.u)?;
                            (lin.gij, lin.gi, lin.gu - psi_u)
                        }
                        Path::MongeAmpere => {
                            let x = [grid.x(i), grid.y(j)];
                            let u_big = field.value(i, j);
                            let du_big = field.gradient(i, j)?;
                            let m = field.hessian(i, j)?;
                            // ∂ det M / ∂M = cofactor matrix (n = 2)
                            let cof = SymMatrix::from_fn(2, |a, b| match (a, b) {
                                (0, 0) => m.get(1, 1),
                                (1, 1) => m.get(0, 0),
                                _ => -m.get(0, 1),
                            });
                            let (psi_cap_u, psi_cap_du) =
                                ma_rhs_derivatives(psi, &x, u_big, &du_big)?;
                            (cof, vec![-psi_cap_du[0], -psi_cap_du[1]], -psi_cap_u)
                        }
                    };
                    let at = |di: isize, dj: isize| {
                        self.index_of((i as isize + di) as usize, (j as isize + dj) as usize)
                            .unwrap()
                    };
                    let hh = h * h;
                    sys.add(q, at(0, 0), -2.0 * (c_mat.get(0, 0) + c_mat.get(1, 1)) / hh + a_coef)?;
                    sys.add(q, at(1, 0), c_mat.get(0, 0) / hh + b_vec[0] / (2.0 * h))?;
                    sys.add(q, at(-1, 0), c_mat.get(0, 0) / hh - b_vec[0] / (2.0 * h))?;
                    sys.add(q, at(0, 1), c_mat.get(1, 1) / hh + b_vec[1] / (2.0 * h))?;
                    sys.add(q, at(0, -1), c_mat.get(1, 1) / hh - b_vec[1] / (2.0 * h))?;
                    let cross = c_mat.get(0, 1) / (2.0 * hh);
                    sys.add(q, at(1, 1), cross)?;
                    sys.add(q, at(-1, -1), cross)?;
                    sys.add(q, at(1, -1), -cross)?;
                    sys.add(q, at(-1, 1), -cross)?;
                }
                Mask::Outside => unreachable!(),
            }
        }
        Ok(sys)
    }
}

/// ∂Ψ/∂U and ∂Ψ/∂(DU) for Ψ = 2ⁿ Q^{(n+2)/2} ψⁿ, n = 2.
fn ma_rhs_derivatives(
    psi: &RhsSpec,
    x: &[f64; 2],
    u_big: f64,
    du_big: &[f64; 2],
) -> Result<(f64, [f64; 2])> {
    let xx = x[0] * x[0] + x[1] * x[1];
    let u_sq = u_big - xx;
    if u_sq <= 0.0 {
        return Err(Error::Domain("transformed derivative needs U > |x|²".into()));
    }
    let u = u_sq.sqrt();
    let q = transform::q_factor(x, u_big, du_big)?;
    let denom = 4.0 * u_sq;
    let q_u = (4.0 - 4.0 * q) / denom;
    let q_du = [
        (2.0 * du_big[0] - 4.0 * x[0]) / denom,
        (2.0 * du_big[1] - 4.0 * x[1]) / denom,
    ];
    let psi_val = psi.eval(x, u)?;
    let psi_u = psi.eval_du(x, u)?;
    // Ψ = 4 Q² ψ²
    let d_u = 4.0 * (2.0 * q * q_u * psi_val * psi_val
        + q * q * 2.0 * psi_val * psi_u / (2.0 * u));
    let d_du = [
        8.0 * q * q_du[0] * psi_val * psi_val,
        8.0 * q * q_du[1] * psi_val * psi_val,
    ];
    Ok((d_u, d_du))
}

fn parallel_try_map(
    n: usize,
    threads: usize,
    f: impl Fn(usize) -> Result<f64> + Sync,
) -> Result<Vec<f64>> {
    let threads = threads.max(1).min(n.max(1));
    if threads == 1 {
        return (0..n).map(&f).collect();
    }
    let chunk = n.div_ceil(threads);
    let mut out: Vec<Result<Vec<f64>>> = Vec::new();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for t in 0..threads {
            let lo = t * chunk;
            let hi = ((t + 1) * chunk).min(n);
            let f = &f;
            handles.push(scope.spawn(move || (lo..hi).map(f).collect::<Result<Vec<f64>>>()));
        }
        for hd in handles {
            out.push(hd.join().expect("residual worker panicked"));
        }
    });
    let mut flat = Vec::with_capacity(n);
    for part in out {
        flat.extend(part?);
    }
    Ok(flat)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, &x| m.max(x.abs()))
}

/// Damped Newton iteration with an admissibility safeguard: trial steps that
/// leave the admissible cone (residual evaluation fails) or fail to decrease
/// the residual are halved.
pub fn newton_solve(
    disc: &Discretization,
    background: &GridField,
    psi: &RhsSpec,
    cfg: &SolveConfig,
    init: Vec<f64>,
) -> Result<(Vec<f64>, NewtonReport)> {
    let mut s = init;
    let mut res = disc.residual(&s, background, psi, cfg)?;
    let mut report = NewtonReport {
        iterations: 0,
        final_residual: inf_norm(&res),
        damping: Vec::new(),
        admissibility_repairs: 0,
        converged: false,
        warm_started: false,
    };
    for _ in 0..cfg.max_iter {
        let norm = inf_norm(&res);
        report.final_residual = norm;
        if norm <= cfg.tol {
            report.converged = true;
            return Ok((s, report));
        }
        let sys = disc.jacobian(&s, background, psi, cfg)?;
        let neg_res: Vec<f64> = res.iter().map(|&r| -r).collect();
        let delta = sys.solve(neg_res)?;
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> =
                s.iter().zip(&delta).map(|(&a, &d)| a + t * d).collect();
            match disc.residual(&trial, background, psi, cfg) {
                Ok(r2) if inf_norm(&r2) < norm => {
                    s = trial;
                    res = r2;
                    report.damping.push(t);
                    break;
                }
                Ok(_) => {}
                Err(_) => report.admissibility_repairs += 1,
            }
            t /= 2.0;
            if t < 1e-10 {
                return Err(Error::NoConvergence(format!(
                    "line search stalled at residual {norm:.3e} after {} iterations",
                    report.iterations
                )));
            }
        }
        report.iterations += 1;
    }
    let norm = inf_norm(&res);
    report.final_residual = norm;
    if norm <= cfg.tol {
        report.converged = true;
        Ok((s, report))
    } else {
        Err(Error::NoConvergence(format!(
            "residual {norm:.3e} above tolerance {:.3e} after {} iterations",
            cfg.tol, report.iterations
        )))
    }
}

/// Decreasing ε levels for the continuation toward the Plateau boundary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContinuationSchedule {
    pub levels: Vec<f64>,
}

impl ContinuationSchedule {
    pub fn new(levels: Vec<f64>) -> Result<ContinuationSchedule> {
        if levels.is_empty() {
            return Err(Error::Config("continuation schedule is empty".into()));
        }
        if levels.windows(2).any(|w| w[1] >= w[0]) || levels.iter().any(|&e| e <= 0.0) {
            return Err(Error::Config(
                "continuation levels must be positive and strictly decreasing".into(),
            ));
        }
        Ok(ContinuationSchedule { levels })
    }

    /// Geometric schedule from `start` down to `end` over `count` levels.
    pub fn geometric(start: f64, end: f64, count: usize) -> Result<ContinuationSchedule> {
        if count < 1 || start <= end || end <= 0.0 {
            return Err(Error::Config(format!(
                "geometric schedule needs start > end > 0, count ≥ 1; got {start}, {end}, {count}"
            )));
        }
        if count == 1 {
            return ContinuationSchedule::new(vec![end]);
        }
        let ratio = (end / start).powf(1.0 / (count as f64 - 1.0));
        let levels = (0..count).map(|i| start * ratio.powi(i as i32)).collect();
        ContinuationSchedule::new(levels)
    }
}

/// Solution at one continuation level.
#[derive(Debug, Clone)]
pub struct SolutionSnapshot {
    pub eps: f64,
    pub dom: LevelSetDomain,
    /// height field u^ε (recovered from U on the transformed path)
    pub u: GridField,
    /// transformed field U^ε when solved in Monge–Ampère variables
    pub u_big: Option<GridField>,
    pub report: NewtonReport,
}

/// Solves the Dirichlet problems along the schedule, warm-starting each
/// level from the previous solution where the domains overlap and from the
/// subsolution on freshly uncovered nodes. Falls back to a cold start from
/// the subsolution if the warm iterate is inadmissible.
pub fn continuation_solve(
    ubar: &GridField,
    psi: &RhsSpec,
    cfg: &SolveConfig,
    schedule: &ContinuationSchedule,
) -> Result<Vec<SolutionSnapshot>> {
    let grid = ubar.grid;
    // background in solve variables
    let bg = match cfg.path {
        Path::Curvature => ubar.clone(),
        Path::MongeAmpere => {
            let mut f = ubar.clone();
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    let p = grid.point(i, j);
                    let v = ubar.value(i, j);
                    f.set(i, j, v * v + p[0] * p[0] + p[1] * p[1]);
                }
            }
            f
        }
    };
    let mut out: Vec<SolutionSnapshot> = Vec::new();
    let mut prev: Option<GridField> = None;
    for &eps in &schedule.levels {
        let dom = level_set_domain(ubar, eps)?;
        let disc = Discretization::new(dom)?;
        let cold: Vec<f64> = disc
            .unknowns
            .iter()
            .map(|&(i, j)| bg.value(i, j))
            .collect();
        let (init, warm) = match &prev {
            Some(pf) => {
                let warm: Vec<f64> = disc
                    .unknowns
                    .iter()
                    .map(|&(i, j)| {
                        if pf.mask[grid.idx(i, j)] != Mask::Outside {
                            pf.value(i, j)
                        } else {
                            bg.value(i, j)
                        }
                    })
                    .collect();
                if disc.residual(&warm, &bg, psi, cfg).is_ok() {
                    (warm, true)
                } else {
                    (cold.clone(), false)
                }
            }
            None => (cold.clone(), false),
        };
        let (sol, mut report) = match newton_solve(&disc, &bg, psi, cfg, init) {
            Ok(r) => r,
            Err(Error::NoConvergence(_)) if warm => {
                // retry cold before giving up
                newton_solve(&disc, &bg, psi, cfg, cold)?
            }
            Err(e) => return Err(e),
        };
        report.warm_started = warm;
        let solved = disc.field_from(&sol, &bg);
        let (u_field, u_big) = match cfg.path {
            Path::Curvature => (solved, None),
            Path::MongeAmpere => {
                let mut u = ubar.clone();
                for &(i, j) in &disc.unknowns {
                    let p = grid.point(i, j);
                    let q = solved.value(i, j) - p[0] * p[0] - p[1] * p[1];
                    u.set(i, j, if q > 0.0 { q.sqrt() } else { 0.0 });
                }
                u.mask = solved.mask.clone();
                (u, Some(solved))
            }
        };
        prev = Some(match cfg.path {
            Path::Curvature => u_field.clone(),
            Path::MongeAmpere => u_big.clone().unwrap(),
        });
        out.push(SolutionSnapshot {
            eps,
            dom: disc.dom,
            u: u_field,
            u_big,
            report,
        });
    }
    Ok(out)
}

/// Residual field of a solved height field: equation residual on Active
/// nodes, boundary-tie residual on ghost nodes, zero elsewhere.
pub fn discrete_residual(
    u: &GridField,
    dom: &LevelSetDomain,
    psi: &RhsSpec,
    k: usize,
) -> Result<GridField> {
    let grid = dom.grid;
    let mut res = GridField::constant(grid, 0.0);
    res.mask = dom.mask.clone();
    let mut view = u.clone();
    view.mask = dom.mask.clone();
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            match dom.mask[grid.idx(i, j)] {
                Mask::Active => {
                    let jet = jet_at(&view, i, j)?;
                    res.set(i, j, graphgeom::residual(&jet, psi, k)?);
                }
                Mask::Boundary => {}
                Mask::Outside => {}
            }
        }
    }
    for tie in &dom.ties {
        let ua = view.value(tie.anchor.0, tie.anchor.1);
        let ub = view.value(tie.node.0, tie.node.1);
        res.set(tie.node.0, tie.node.1, (1.0 - tie.s) * ua + tie.s * ub - dom.eps);
    }
    Ok(res)
}

/// Report of the discrete subsolution inequality f(κ[u̲]) ≥ ψ(x, u̲).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsolutionReport {
    pub min_margin: f64,
    pub nodes_checked: usize,
    pub h: f64,
}

/// Verifies f(κ[u̲]) − ψ(x, u̲) ≥ −tol on all grid nodes with u̲ > floor.
pub fn subsolution_check(
    ubar: &GridField,
    psi: &RhsSpec,
    k: usize,
    floor: f64,
    tol: f64,
) -> Result<SubsolutionReport> {
    let grid = ubar.grid;
    let mut min_margin = f64::INFINITY;
    let mut nodes = 0usize;
    for j in 1..grid.ny - 1 {
        for i in 1..grid.nx - 1 {
            if ubar.value(i, j) <= floor {
                continue;
            }
            // skip nodes whose stencil reaches past the positivity floor
            let mut ok = true;
            for di in -1..=1isize {
                for dj in -1..=1isize {
                    let (a, b) = ((i as isize + di) as usize, (j as isize + dj) as usize);
                    if ubar.value(a, b) <= 0.0 {
                        ok = false;
                    }
                }
            }
            if !ok {
                continue;
            }
            let jet = jet_at(ubar, i, j)?;
            let margin = graphgeom::residual(&jet, psi, k)?;
            min_margin = min_margin.min(margin);
            nodes += 1;
        }
    }
    if nodes == 0 {
        return Err(Error::InsufficientData("no nodes above the subsolution floor".into()));
    }
    if min_margin < -tol {
        return Err(Error::MarginViolation(format!(
            "subsolution margin {min_margin:.6e} below −{tol:.3e}"
        )));
    }
    Ok(SubsolutionReport { min_margin, nodes_checked: nodes, h: grid.h })
}

/// min over the sample set of ψ_u − ψ/u, the structural sign that forces
/// uniqueness.
pub fn uniqueness_condition(psi: &RhsSpec, xs: &[[f64; 2]], us: &[f64]) -> Result<f64> {
    if xs.is_empty() || us.is_empty() {
        return Err(Error::InsufficientData("uniqueness condition needs samples".into()));
    }
    let mut min = f64::INFINITY;
    for x in xs {
        for &u in us {
            if u <= 0.0 {
                return Err(Error::Argument("uniqueness samples need u > 0".into()));
            }
            let v = psi.eval_du(x, u)? - psi.eval(x, u)? / u;
            min = min.min(v);
        }
    }
    Ok(min)
}
