//! Experiment configuration, orchestration, and diff-stable data emission.

use crate::domain::{
    convex_envelope_solution, nested_domains, ConvexBoundary, GapKind, GridField, Mask,
};
use crate::error::{Error, Result};
use crate::expr::RhsSpec;
use crate::solver::{
    continuation_solve, ContinuationSchedule, Path, SolveConfig, SolutionSnapshot,
};
use crate::verify::{
    cap_field, gap_certificate, ordering_check, pogorelov_curvature_monitor,
    pogorelov_ma_monitor, uniform_estimate_table, MonitorConfig,
};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path as FsPath;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum DomainSpec {
    /// plain disk {|x| < r}; usable for envelope and oracle work
    Disk { r: f64 },
    /// level sets of the spherical-cap subsolution family
    Cap { r1: f64, sigma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Solve,
    Verify,
    OracleTest,
    ParseCheck,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub n: usize,
    pub k: usize,
    pub domain: DomainSpec,
    pub psi: String,
    pub h: f64,
    pub eps_levels: Vec<f64>,
    pub eps0: f64,
    #[serde(default)]
    pub force_curvature_path: bool,
    #[serde(default)]
    pub monitor_b: Option<f64>,
    #[serde(default)]
    pub monitor_beta: Option<f64>,
    pub mode: Mode,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema version {} unsupported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.n != 2 {
            return Err(Error::Config("grid experiments support n = 2 only".into()));
        }
        if self.k < 1 || self.k > self.n {
            return Err(Error::Config(format!("need 1 ≤ k ≤ n; got k = {}, n = {}", self.k, self.n)));
        }
        if self.h <= 0.0 {
            return Err(Error::Config(format!("grid spacing h = {} must be positive", self.h)));
        }
        let psi = RhsSpec::parse(&self.psi, self.n)?;
        // positivity probe on a coarse sample of the configured box
        for &x in &[-0.5, 0.0, 0.5] {
            for &y in &[-0.5, 0.0, 0.5] {
                for &u in &[0.05, 0.2, 0.5, 1.0] {
                    if let Ok(v) = psi.eval(&[x, y], u) {
                        if v <= 0.0 {
                            return Err(Error::Config(format!(
                                "ψ must be positive; ψ({x}, {y}, u={u}) = {v}"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn path(&self) -> Path {
        if self.k == self.n && !self.force_curvature_path {
            Path::MongeAmpere
        } else {
            Path::Curvature
        }
    }
}

/// 17 significant digits, lowercase scientific: diff-stable across runs.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn mask_name(m: Mask) -> &'static str {
    match m {
        Mask::Active => "active",
        Mask::Boundary => "boundary",
        Mask::Outside => "outside",
    }
}

/// CSV snapshot "i,j,x,y,mask,u" in row-major node order.
pub fn field_csv(field: &GridField) -> String {
    let grid = field.grid;
    let mut out = String::with_capacity(grid.len() * 48);
    out.push_str("i,j,x,y,mask,u\n");
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let _ = writeln!(
                out,
                "{i},{j},{},{},{},{}",
                fmt_f64(grid.x(i)),
                fmt_f64(grid.y(j)),
                mask_name(field.mask_at(i, j)),
                fmt_f64(field.value(i, j)),
            );
        }
    }
    out
}

pub fn estimate_csv(report: &crate::verify::EstimateReport) -> String {
    let mut out = String::from("eps,sup_u,sup_du,sup_second,monitor,gap_min\n");
    for r in &report.rows {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt_f64(r.eps),
            fmt_f64(r.sup_u),
            fmt_f64(r.sup_du),
            fmt_f64(r.sup_second),
            opt(r.monitor),
            opt(r.gap_min),
        );
    }
    out
}

pub fn threads_from_env() -> usize {
    std::env::var("HYPERPLATEAU_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&t| t >= 1)
        .unwrap_or(1)
}

fn write_file(dir: &FsPath, name: &str, content: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), content)?;
    Ok(())
}

struct CapSetup {
    ubar: GridField,
    psi: RhsSpec,
    cfg: SolveConfig,
    schedule: ContinuationSchedule,
    rim: f64,
}

fn cap_setup(config: &ExperimentConfig) -> Result<CapSetup> {
    let (r1, sigma) = match config.domain {
        DomainSpec::Cap { r1, sigma } => (r1, sigma),
        DomainSpec::Disk { .. } => {
            return Err(Error::Config(
                "solve/verify modes need the cap subsolution family as the domain".into(),
            ))
        }
    };
    if !(sigma > 0.0 && sigma < 1.0) || r1 <= 0.0 {
        return Err(Error::Config(format!("cap needs 0 < σ < 1, R₁ > 0; got σ = {sigma}, R₁ = {r1}")));
    }
    let rim = (1.0 - sigma * sigma).sqrt() * r1;
    let ubar = cap_field(r1, sigma, config.h, rim + 6.0 * config.h);
    let psi = RhsSpec::parse(&config.psi, config.n)?;
    let mut cfg = SolveConfig::new(config.k, config.path(), config.h);
    cfg.threads = threads_from_env();
    let schedule = ContinuationSchedule::new(config.eps_levels.clone())?;
    Ok(CapSetup { ubar, psi, cfg, schedule, rim })
}

fn write_snapshots(dir: &FsPath, snaps: &[SolutionSnapshot]) -> Result<()> {
    for (m, snap) in snaps.iter().enumerate() {
        write_file(dir, &format!("solution_{m:03}.csv"), &field_csv(&snap.u))?;
        if let Some(ub) = &snap.u_big {
            write_file(dir, &format!("transformed_{m:03}.csv"), &field_csv(ub))?;
        }
        write_file(
            dir,
            &format!("newton_{m:03}.json"),
            &serde_json::to_string_pretty(&snap.report)?,
        )?;
    }
    Ok(())
}

/// Executes the configured mode; returns human-readable summary lines.
pub fn run(config: &ExperimentConfig, out_dir: &FsPath) -> Result<Vec<String>> {
    config.validate()?;
    match config.mode {
        Mode::ParseCheck => {
            let psi = RhsSpec::parse(&config.psi, config.n)?;
            Ok(vec![
                format!("psi: {}", psi.psi),
                format!("psi_u: {}", psi.psi_u),
                format!("psi_x1: {}", psi.psi_x[0]),
                format!("psi_x2: {}", psi.psi_x[1]),
            ])
        }
        Mode::OracleTest => oracle_suite(),
        Mode::Solve => {
            let setup = cap_setup(config)?;
            let snaps = continuation_solve(&setup.ubar, &setup.psi, &setup.cfg, &setup.schedule)?;
            write_snapshots(out_dir, &snaps)?;
            write_file(out_dir, "config.json", &serde_json::to_string_pretty(config)?)?;
            let mut lines = Vec::new();
            for s in &snaps {
                lines.push(format!(
                    "eps {} converged in {} iterations, residual {:.3e}",
                    fmt_f64(s.eps),
                    s.report.iterations,
                    s.report.final_residual
                ));
            }
            Ok(lines)
        }
        Mode::Verify => {
            let setup = cap_setup(config)?;
            let snaps = continuation_solve(&setup.ubar, &setup.psi, &setup.cfg, &setup.schedule)?;
            write_snapshots(out_dir, &snaps)?;
            let mut lines = Vec::new();

            let boundary = ConvexBoundary::circle(setup.rim, config.h);
            let env = convex_envelope_solution(&setup.ubar.grid, &boundary, |p| {
                p[0] * p[0] + p[1] * p[1]
            })?;
            let h2_tol = 10.0 * config.h * config.h;
            for s in &snaps {
                let m = ordering_check(&setup.ubar, &s.u, &s.dom, Some(&env.v_small), h2_tol)?;
                lines.push(format!(
                    "eps {}: ordering margins lower {} upper {}",
                    fmt_f64(s.eps),
                    fmt_f64(m.lower),
                    fmt_f64(m.upper.unwrap_or(f64::NAN))
                ));
            }

            let last = snaps.last().expect("schedule is nonempty");
            let eps0 = config.eps0;
            let (kind, upper, lower): (GapKind, &GridField, &GridField) = match &last.u_big {
                Some(ub) => (GapKind::Transformed, &env.v_big, ub),
                None => (GapKind::Squared, &env.v_small, &last.u),
            };
            let nd = nested_domains(kind, upper, lower, &setup.ubar, eps0)?;
            let cert = gap_certificate(upper, lower, &nd)?;
            lines.push(format!(
                "gap certificate: min {} threshold {} pass {}",
                fmt_f64(cert.min_gap),
                fmt_f64(cert.threshold),
                cert.pass
            ));

            let mut mc = MonitorConfig::measured(&last.u, &nd, eps0)?;
            if let Some(b) = config.monitor_b {
                mc.b = b;
            }
            if let Some(beta) = config.monitor_beta {
                mc.beta = beta;
            }
            let curv = pogorelov_curvature_monitor(&last.u, &env.v_small, &nd, &mc, config.k);
            match (&last.u_big, kind) {
                (Some(ub), GapKind::Transformed) => {
                    let rep = pogorelov_ma_monitor(ub, &env.v_big, &nd, &mc)?;
                    lines.push(format!(
                        "ma monitor: {} interior {}",
                        fmt_f64(rep.value),
                        rep.argmax_interior
                    ));
                }
                _ => {
                    let rep = curv?;
                    lines.push(format!(
                        "curvature monitor: {} interior {}",
                        fmt_f64(rep.value),
                        rep.argmax_interior
                    ));
                }
            }

            let table = uniform_estimate_table(&snaps, &setup.ubar, eps0, config.k)?;
            write_file(out_dir, "estimates.csv", &estimate_csv(&table))?;
            write_file(out_dir, "estimates.json", &serde_json::to_string_pretty(&table)?)?;
            write_file(out_dir, "config.json", &serde_json::to_string_pretty(config)?)?;
            lines.push(format!("uniform estimate table pass: {}", table.pass));
            if !table.pass {
                return Err(Error::MarginViolation(
                    "uniform estimate table varies by ≥ 10% over the last three levels".into(),
                ));
            }
            Ok(lines)
        }
    }
}

/// Built-in oracle suite: exact cap/hemisphere checks, printed as a
/// PASS/FAIL table. Returns an error when any check fails.
pub fn oracle_suite() -> Result<Vec<String>> {
    let mut lines = Vec::new();
    let mut failures = 0usize;
    let mut check = |name: &str, ok: bool, lines: &mut Vec<String>| {
        lines.push(format!("{} {name}", if ok { "PASS" } else { "FAIL" }));
        if !ok {
            failures += 1;
        }
    };

    // hemisphere curvature vanishes
    let mut ok = true;
    for xv in [[0.0, 0.0], [0.3, 0.4], [-0.6, 0.1]] {
        let jet = crate::verify::cap_jet(1.0, 1e-12, &xv)?;
        let spec = crate::graphgeom::curvature_spectrum(&jet, 1)?;
        ok &= spec.kappa.values().iter().all(|k| k.abs() <= 1e-10);
    }
    check("hemisphere curvature zero", ok, &mut lines);

    // cap curvature equals sigma
    let mut ok = true;
    for xv in [[0.0, 0.0], [0.3, 0.4], [-0.5, 0.2]] {
        let jet = crate::verify::cap_jet(1.0, 0.5, &xv)?;
        let spec = crate::graphgeom::curvature_spectrum(&jet, 2)?;
        ok &= spec.kappa.values().iter().all(|k| (k - 0.5).abs() <= 1e-10);
    }
    check("cap curvature sigma", ok, &mut lines);

    // alpha coefficient of the model right-hand side
    check(
        "cap alpha coefficient",
        (crate::verify::cap_alpha(2, 2, 0.5, 1.0) - 2.0).abs() < 1e-14,
        &mut lines,
    );

    // transformed determinant identity on cap jets
    let mut ok = true;
    for xv in [[0.2, -0.3], [0.0, 0.5]] {
        let jet = crate::verify::cap_jet(1.0, 0.5, &xv)?;
        let ma = crate::transform::to_ma(&jet);
        let q = crate::graphgeom::graph_quantities(&jet)?;
        let lhs = ma.d2u_big.det();
        let rhs = 4.0 * q.w.powi(4) * q.a_matrix.det();
        ok &= (lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs());
    }
    check("transform determinant identity", ok, &mut lines);

    // subsolution margin for the model problem
    let ubar = cap_field(1.0, 0.5, 0.05, 1.0);
    let psi = RhsSpec::parse("2*u^2", 2)?;
    let rep = crate::solver::subsolution_check(&ubar, &psi, 2, 0.05, 10.0 * 0.05 * 0.05)?;
    check("cap subsolution margin", rep.min_margin >= -10.0 * 0.05 * 0.05, &mut lines);

    if failures > 0 {
        return Err(Error::MarginViolation(format!("{failures} oracle checks failed")));
    }
    Ok(lines)
}
