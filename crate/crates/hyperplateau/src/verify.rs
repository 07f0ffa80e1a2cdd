//! Numerical verification of the structural estimates: ordering, gap
//! certificates, Pogorelov-type monitors, uniform interior bounds across the
//! continuation, uniqueness probes, and the spherical-cap exact oracle.

use crate::domain::{GapKind, Grid, GridField, LevelSetDomain, Mask, NestedDomains};
use crate::error::{Error, Result};
use crate::expr::RhsSpec;
use crate::graphgeom::{graph_quantities, jet_at, PointJet};
use crate::linalg::SymMatrix;
use crate::solver::{self, Discretization, SolveConfig, SolutionSnapshot};
use crate::symfunc;
use serde::{Deserialize, Serialize};

/// u̲ = √(R₁² − |x|²) − σR₁ sampled on a centered grid, with a smooth
/// negative continuation −σR₁ − √(|x|² − R₁²) outside the sphere's shadow so
/// level-set extraction sees a globally defined field.
pub fn cap_field(r1: f64, sigma: f64, h: f64, half: f64) -> GridField {
    let grid = Grid::centered(half, h);
    GridField::from_fn(grid, |x, y| {
        let q = r1 * r1 - x * x - y * y;
        if q >= 0.0 {
            q.sqrt() - sigma * r1
        } else {
            -sigma * r1 - (-q).sqrt()
        }
    })
}

/// Exact jet of the cap at a horizontal point strictly inside its support.
pub fn cap_jet(r1: f64, sigma: f64, x: &[f64]) -> Result<PointJet> {
    let n = x.len();
    let s2 = r1 * r1 - crate::linalg::norm_sq(x);
    if s2 <= 0.0 {
        return Err(Error::Argument(format!("|x| must be below R₁ = {r1} for the cap jet")));
    }
    let s = s2.sqrt();
    let u = s - sigma * r1;
    if u <= 0.0 {
        return Err(Error::Argument("cap jet requested outside {u̲ > 0}".into()));
    }
    let du: Vec<f64> = x.iter().map(|&xi| -xi / s).collect();
    let d2u = SymMatrix::from_fn(n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        -(delta + du[i] * du[j]) / s
    });
    PointJet::new(x.to_vec(), u, du, d2u)
}

/// α = σ_k^{1/k}(σ, …, σ) / ((1−σ)² R₁²), the coefficient making ψ = α u²
/// admit the cap as a subsolution with equality at the apex.
pub fn cap_alpha(n: usize, k: usize, sigma: f64, r1: f64) -> f64 {
    let binom = symfunc::sigma_all(&vec![1.0; n], n)[k];
    sigma * binom.powf(1.0 / k as f64) / ((1.0 - sigma) * (1.0 - sigma) * r1 * r1)
}

#[derive(Debug, Clone)]
pub struct CapOracle {
    pub r1: f64,
    pub sigma: f64,
    pub ubar: GridField,
    /// exact hyperbolic principal curvature (all equal)
    pub kappa: f64,
    /// ψ = α u² coefficient for the given (n, k)
    pub alpha: f64,
}

/// Exact-solution oracle of the spherical cap family.
pub fn cap_oracle(r1: f64, sigma: f64, n: usize, k: usize, grid: Grid) -> Result<CapOracle> {
    if !(sigma > 0.0 && sigma < 1.0) || r1 <= 0.0 {
        return Err(Error::Argument(format!(
            "cap oracle needs 0 < σ < 1 and R₁ > 0; got σ = {sigma}, R₁ = {r1}"
        )));
    }
    let ubar = GridField::from_fn(grid, |x, y| {
        let q = r1 * r1 - x * x - y * y;
        if q >= 0.0 {
            q.sqrt() - sigma * r1
        } else {
            -sigma * r1 - (-q).sqrt()
        }
    });
    Ok(CapOracle { r1, sigma, ubar, kappa: sigma, alpha: cap_alpha(n, k, sigma, r1) })
}

/// Constants entering the Pogorelov monitors.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonitorConfig {
    /// lower normal margin: ν^{n+1} ≥ 2a on the monitor domain
    pub a: f64,
    /// gap exponent, ≥ 1
    pub b: f64,
    /// exponential weight, > 0
    pub beta: f64,
    pub tau: f64,
    pub r: f64,
    pub c: f64,
    pub eps0: f64,
}

impl MonitorConfig {
    /// Measures a = ½ · min ν^{n+1} over Ω^ε_{ε₀} from a solved height field
    /// and freezes it together with the gap constants. Defaults b = 2, β = 1.
    pub fn measured(u: &GridField, nested: &NestedDomains, eps0: f64) -> Result<MonitorConfig> {
        let grid = u.grid;
        let mut min_nu = f64::INFINITY;
        for j in 1..grid.ny - 1 {
            for i in 1..grid.nx - 1 {
                if !nested.omega_eps_eps0[grid.idx(i, j)] {
                    continue;
                }
                let g = u.gradient(i, j)?;
                min_nu = min_nu.min(1.0 / (1.0 + g[0] * g[0] + g[1] * g[1]).sqrt());
            }
        }
        if !min_nu.is_finite() {
            return Err(Error::InsufficientData("monitor domain is empty".into()));
        }
        Ok(MonitorConfig {
            a: 0.5 * min_nu,
            b: 2.0,
            beta: 1.0,
            tau: nested.tau,
            r: nested.r,
            c: nested.c,
            eps0,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonitorReport {
    pub value: f64,
    /// the bounded combination gap·κ_max (curvature monitor only)
    pub secondary: Option<f64>,
    pub argmax: (usize, usize),
    /// argmax has its full 8-neighborhood inside the monitor domain
    pub argmax_interior: bool,
}

fn argmax_is_interior(grid: &Grid, member: &[bool], i: usize, j: usize) -> bool {
    if i == 0 || j == 0 || i + 1 >= grid.nx || j + 1 >= grid.ny {
        return false;
    }
    for di in -1..=1isize {
        for dj in -1..=1isize {
            let (a, b) = ((i as isize + di) as usize, (j as isize + dj) as usize);
            if !member[grid.idx(a, b)] {
                return false;
            }
        }
    }
    true
}

/// sup over Ω^ε_{ε₀} of η · e^{β|DU|²/2} · λ_max(D²U), η = V − U^ε − c.
/// Transformed (k = n) path monitor.
pub fn pogorelov_ma_monitor(
    u_big: &GridField,
    v_big: &GridField,
    nested: &NestedDomains,
    cfg: &MonitorConfig,
) -> Result<MonitorReport> {
    if nested.kind != GapKind::Transformed {
        return Err(Error::Argument("MA monitor needs transformed-path nested domains".into()));
    }
    let grid = u_big.grid;
    let mut best = f64::NEG_INFINITY;
    let mut arg = (0, 0);
    for j in 1..grid.ny - 1 {
        for i in 1..grid.nx - 1 {
            let idx = grid.idx(i, j);
            if !nested.omega_eps_eps0[idx] {
                continue;
            }
            let eta = v_big.values[idx] - u_big.values[idx] - cfg.c;
            if eta <= 0.0 {
                return Err(Error::Domain(format!(
                    "η = {eta:.3e} not positive at node ({i},{j}) inside Ω^ε"
                )));
            }
            let du = u_big.gradient(i, j)?;
            let d2u = u_big.hessian(i, j)?;
            let lam = d2u.eigenvalues()[0];
            let val = eta * (cfg.beta * (du[0] * du[0] + du[1] * du[1]) / 2.0).exp() * lam;
            if val > best {
                best = val;
                arg = (i, j);
            }
        }
    }
    if !best.is_finite() {
        return Err(Error::InsufficientData("monitor domain is empty".into()));
    }
    Ok(MonitorReport {
        value: best,
        secondary: None,
        argmax: arg,
        argmax_interior: argmax_is_interior(&grid, &nested.omega_eps_eps0, arg.0, arg.1),
    })
}

/// sup over Ω^ε_{ε₀} of (v² − u² − c)^b · κ_max / (ν^{n+1} − a) · e^{β/u},
/// the general-k interior curvature monitor. Also reports the bounded
/// combination (v² − u² − c) · κ_max as a secondary quantity.
pub fn pogorelov_curvature_monitor(
    u: &GridField,
    v: &GridField,
    nested: &NestedDomains,
    cfg: &MonitorConfig,
    k: usize,
) -> Result<MonitorReport> {
    let grid = u.grid;
    let mut best = f64::NEG_INFINITY;
    let mut secondary = f64::NEG_INFINITY;
    let mut arg = (0, 0);
    for j in 1..grid.ny - 1 {
        for i in 1..grid.nx - 1 {
            let idx = grid.idx(i, j);
            if !nested.omega_eps_eps0[idx] {
                continue;
            }
            let gap = v.values[idx] * v.values[idx] - u.values[idx] * u.values[idx] - cfg.c;
            if gap <= 0.0 {
                return Err(Error::Domain(format!(
                    "gap − c = {gap:.3e} not positive at node ({i},{j}) inside Ω^ε"
                )));
            }
            let jet = jet_at(u, i, j)?;
            let q = graph_quantities(&jet)?;
            if q.nu_up <= cfg.a {
                return Err(Error::MarginViolation(format!(
                    "ν^{{n+1}} = {:.6} ≤ a = {:.6} at node ({i},{j}); a is too large",
                    q.nu_up, cfg.a
                )));
            }
            let spec = crate::graphgeom::curvature_spectrum(&jet, k)?;
            let kappa_max = spec.kappa.values()[0];
            let val =
                gap.powf(cfg.b) * kappa_max / (q.nu_up - cfg.a) * (cfg.beta / jet.u).exp();
            if val > best {
                best = val;
                arg = (i, j);
            }
            secondary = secondary.max(gap * kappa_max);
        }
    }
    if !best.is_finite() {
        return Err(Error::InsufficientData("monitor domain is empty".into()));
    }
    Ok(MonitorReport {
        value: best,
        secondary: Some(secondary),
        argmax: arg,
        argmax_interior: argmax_is_interior(&grid, &nested.omega_eps_eps0, arg.0, arg.1),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GapCertificate {
    pub min_gap: f64,
    /// the certificate threshold τ r²
    pub threshold: f64,
    pub pass: bool,
}

/// min over Ω_{ε₀} of the gap (V − U^ε, or v² − (u^ε)²); certified when the
/// minimum clears τ r² = 2c.
pub fn gap_certificate(
    upper: &GridField,
    lower: &GridField,
    nested: &NestedDomains,
) -> Result<GapCertificate> {
    let grid = upper.grid;
    let mut min_gap = f64::INFINITY;
    let mut seen = false;
    for idx in 0..grid.len() {
        if !nested.omega_eps0[idx] {
            continue;
        }
        seen = true;
        let g = match nested.kind {
            GapKind::Squared => {
                upper.values[idx] * upper.values[idx] - lower.values[idx] * lower.values[idx]
            }
            GapKind::Transformed => upper.values[idx] - lower.values[idx],
        };
        min_gap = min_gap.min(g);
    }
    if !seen {
        return Err(Error::Config("Ω_{ε₀} is empty in the gap certificate".into()));
    }
    let threshold = nested.tau * nested.r * nested.r;
    Ok(GapCertificate { min_gap, threshold, pass: min_gap >= threshold })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateRow {
    pub eps: f64,
    pub sup_u: f64,
    pub sup_du: f64,
    /// sup|D²U^ε| on the transformed path, max|κᵢ| otherwise
    pub sup_second: f64,
    pub monitor: Option<f64>,
    pub gap_min: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateReport {
    pub eps0: f64,
    pub rows: Vec<EstimateRow>,
    /// last three rows vary by < 10% relative in every sup column
    pub pass: bool,
}

fn relative_spread(vals: &[f64]) -> f64 {
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    (max - min) / max.abs().max(1e-14)
}

/// Per-ε sup norms over the fixed interior domain Ω_{ε₀}. Rows exist only
/// for levels with ε ≤ ε₀ (otherwise Ω_{ε₀} is not covered by the solve).
pub fn uniform_estimate_table(
    snaps: &[SolutionSnapshot],
    ubar: &GridField,
    eps0: f64,
    k: usize,
) -> Result<EstimateReport> {
    let grid = ubar.grid;
    let qualifying: Vec<&SolutionSnapshot> =
        snaps.iter().filter(|s| s.eps <= eps0 * (1.0 + 1e-12)).collect();
    // one fixed interior node set for every row: u̲ > ε₀ and centered
    // differences available on each qualifying level (rim demotion can strip
    // stencils from nodes barely above the level)
    let mut member = vec![false; grid.len()];
    for j in 1..grid.ny - 1 {
        for i in 1..grid.nx - 1 {
            member[grid.idx(i, j)] = ubar.value(i, j) > eps0
                && qualifying.iter().all(|s| s.u.has_full_stencil(i, j));
        }
    }
    let mut rows: Vec<EstimateRow> = Vec::new();
    for snap in qualifying {
        if let Some(last) = rows.last() {
            if snap.eps >= last.eps {
                return Err(Error::Argument("snapshots must have strictly decreasing ε".into()));
            }
        }
        let mut sup_u = 0.0_f64;
        let mut sup_du = 0.0_f64;
        let mut sup_second = 0.0_f64;
        for j in 1..grid.ny - 1 {
            for i in 1..grid.nx - 1 {
                if !member[grid.idx(i, j)] {
                    continue;
                }
                sup_u = sup_u.max(snap.u.value(i, j).abs());
                let du = snap.u.gradient(i, j)?;
                sup_du = sup_du.max(du[0].abs().max(du[1].abs()));
                match &snap.u_big {
                    Some(ub) => sup_second = sup_second.max(ub.hessian(i, j)?.max_abs()),
                    None => {
                        let jet = jet_at(&snap.u, i, j)?;
                        let spec = crate::graphgeom::curvature_spectrum(&jet, k)?;
                        for &ka in spec.kappa.values() {
                            sup_second = sup_second.max(ka.abs());
                        }
                    }
                }
            }
        }
        rows.push(EstimateRow {
            eps: snap.eps,
            sup_u,
            sup_du,
            sup_second,
            monitor: None,
            gap_min: None,
        });
    }
    if rows.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "uniform estimate table needs ≥ 3 levels at or below ε₀ = {eps0}; got {}",
            rows.len()
        )));
    }
    let last3 = &rows[rows.len() - 3..];
    let pass = [
        last3.iter().map(|r| r.sup_u).collect::<Vec<_>>(),
        last3.iter().map(|r| r.sup_du).collect::<Vec<_>>(),
        last3.iter().map(|r| r.sup_second).collect::<Vec<_>>(),
    ]
    .iter()
    .all(|col| relative_spread(col) < 0.10);
    Ok(EstimateReport { eps0, rows, pass })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OrderingMargins {
    /// min over active nodes of u^ε − u̲ (≥ −C h² required)
    pub lower: f64,
    /// min over active nodes of v − u^ε (> 0 required); None when v absent
    pub upper: Option<f64>,
}

/// Checks u̲ ≤ u^ε < v on the active nodes of the solved domain.
pub fn ordering_check(
    ubar: &GridField,
    u_eps: &GridField,
    dom: &LevelSetDomain,
    v: Option<&GridField>,
    tol: f64,
) -> Result<OrderingMargins> {
    let grid = dom.grid;
    let mut lower = f64::INFINITY;
    let mut upper = v.map(|_| f64::INFINITY);
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if dom.mask[grid.idx(i, j)] != Mask::Active {
                continue;
            }
            lower = lower.min(u_eps.value(i, j) - ubar.value(i, j));
            if let (Some(vf), Some(up)) = (v, upper.as_mut()) {
                *up = up.min(vf.value(i, j) - u_eps.value(i, j));
            }
        }
    }
    if lower < -tol {
        return Err(Error::MarginViolation(format!(
            "ordering u̲ ≤ u^ε fails: margin {lower:.6e} below −{tol:.3e}"
        )));
    }
    if let Some(up) = upper {
        if up <= 0.0 {
            return Err(Error::MarginViolation(format!(
                "ordering u^ε < v fails: margin {up:.6e}"
            )));
        }
    }
    Ok(OrderingMargins { lower, upper })
}

/// Solves the same Dirichlet problem twice from two admissible
/// initializations and returns the sup-norm difference of the solutions.
pub fn uniqueness_probe(
    ubar: &GridField,
    eps: f64,
    psi: &RhsSpec,
    cfg: &SolveConfig,
    init1: &dyn Fn(f64, f64) -> f64,
    init2: &dyn Fn(f64, f64) -> f64,
) -> Result<f64> {
    let dom = crate::domain::level_set_domain(ubar, eps)?;
    let disc = Discretization::new(dom)?;
    let make = |f: &dyn Fn(f64, f64) -> f64| -> Vec<f64> {
        disc.unknowns
            .iter()
            .map(|&(i, j)| f(disc.dom.grid.x(i), disc.dom.grid.y(j)))
            .collect()
    };
    let (s1, _) = solver::newton_solve(&disc, ubar, psi, cfg, make(init1))?;
    let (s2, _) = solver::newton_solve(&disc, ubar, psi, cfg, make(init2))?;
    Ok(s1
        .iter()
        .zip(&s2)
        .map(|(&a, &b)| (a - b).abs())
        .fold(0.0, f64::max))
}
