//! Acceptance gate: twelve structural criteria exercised end to end at desk
//! scale. Each criterion prints exactly one PASS/FAIL line; the test fails if
//! any criterion fails.

use hyperplateau::cli::{self, ExperimentConfig};
use hyperplateau::domain::{
    convex_envelope_solution, nested_domains, ConvexBoundary, GapKind, GridField, Mask,
};
use hyperplateau::expr::{parse, RhsSpec};
use hyperplateau::graphgeom::{self, PointJet};
use hyperplateau::linalg::SymMatrix;
use hyperplateau::solver::{
    continuation_solve, subsolution_check, ContinuationSchedule, Path, SolveConfig,
    SolutionSnapshot,
};
use hyperplateau::symfunc::{
    self, andrews_gerhardt_margin, cone_classify, eigen_tuple, f_gradient, f_value,
    matrix_sigma_gradient, second_directional, ConeClass, EigenTuple, CONE_TOL,
};
use hyperplateau::transform;
use hyperplateau::verify::{
    cap_field, cap_jet, gap_certificate, ordering_check, pogorelov_curvature_monitor,
    pogorelov_ma_monitor, uniform_estimate_table, uniqueness_probe, MonitorConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const R1: f64 = 1.0;
const SIGMA: f64 = 0.5;

fn rim() -> f64 {
    (1.0 - SIGMA * SIGMA).sqrt() * R1
}

fn exact_cap(x: f64, y: f64) -> f64 {
    (R1 * R1 - x * x - y * y).sqrt() - SIGMA * R1
}

fn relative_spread(vals: &[f64]) -> f64 {
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    (max - min) / max.abs().max(1e-14)
}

/// A solved continuation family on the (R₁ = 1, σ = 0.5) cap, with the
/// homogeneous envelope pair on the cap's footprint disk.
struct Run {
    ubar: GridField,
    snaps: Vec<SolutionSnapshot>,
    v_small: GridField,
    v_big: GridField,
}

fn cap_run(
    k: usize,
    path: Path,
    psi: &RhsSpec,
    h: f64,
    levels: Vec<f64>,
) -> hyperplateau::Result<Run> {
    let ubar = cap_field(R1, SIGMA, h, rim() + 6.0 * h);
    let mut cfg = SolveConfig::new(k, path, h);
    // cold starts from the subsolution take many damped steps on fine grids
    cfg.max_iter = 80;
    let sched = ContinuationSchedule::new(levels)?;
    let snaps = continuation_solve(&ubar, psi, &cfg, &sched)?;
    let boundary = ConvexBoundary::circle(rim(), h);
    let env =
        convex_envelope_solution(&ubar.grid, &boundary, |p| p[0] * p[0] + p[1] * p[1])?;
    Ok(Run { ubar, snaps, v_small: env.v_small, v_big: env.v_big })
}

/// sup over active nodes of |u − u*| against the analytic cap.
fn sup_error(snap: &SolutionSnapshot) -> f64 {
    let grid = snap.u.grid;
    let mut sup = 0.0_f64;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            if snap.dom.mask[grid.idx(i, j)] != Mask::Active {
                continue;
            }
            sup = sup.max((snap.u.value(i, j) - exact_cap(grid.x(i), grid.y(j))).abs());
        }
    }
    sup
}

fn snapshot_at(snaps: &[SolutionSnapshot], eps: f64) -> &SolutionSnapshot {
    snaps
        .iter()
        .find(|s| (s.eps - eps).abs() < 1e-12)
        .expect("schedule misses the requested level")
}

// ---------------------------------------------------------------------------
// random admissible samples
// ---------------------------------------------------------------------------

fn random_kappa(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Option<EigenTuple> {
    let vals: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..3.0)).collect();
    let kappa = EigenTuple::new(vals).ok()?;
    (cone_classify(&kappa, k, CONE_TOL).ok()?.class == ConeClass::InteriorOfGammaK)
        .then_some(kappa)
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Option<SymMatrix> {
    let a = SymMatrix::from_fn(n, |i, j| {
        if i == j {
            rng.gen_range(0.3..2.5)
        } else {
            rng.gen_range(-0.3..0.3)
        }
    });
    (cone_classify(&eigen_tuple(&a), k, CONE_TOL).ok()?.class
        == ConeClass::InteriorOfGammaK)
        .then_some(a)
}

fn random_jet(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Option<PointJet> {
    let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let u = rng.gen_range(0.3..1.5);
    let du: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.8..0.8)).collect();
    let d2u = SymMatrix::from_fn(n, |i, j| {
        if i == j {
            rng.gen_range(-0.4..1.5)
        } else {
            rng.gen_range(-0.3..0.3)
        }
    });
    let jet = PointJet::new(x, u, du, d2u).ok()?;
    let spec = graphgeom::curvature_spectrum(&jet, k).ok()?;
    (spec.cone.class == ConeClass::InteriorOfGammaK).then_some(jet)
}

/// Jets strictly inside Γₙ (strictly locally convex graphs).
fn random_convex_jet(rng: &mut ChaCha8Rng, n: usize) -> Option<PointJet> {
    let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let u = rng.gen_range(0.3..1.5);
    let du: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.8..0.8)).collect();
    let base = rng.gen_range(0.3..1.5);
    let d2u = SymMatrix::from_fn(n, |i, j| {
        if i == j {
            base + rng.gen_range(0.0..0.8)
        } else {
            rng.gen_range(-0.15..0.15)
        }
    });
    let jet = PointJet::new(x, u, du, d2u).ok()?;
    let spec = graphgeom::curvature_spectrum(&jet, n).ok()?;
    (spec.cone.class == ConeClass::InteriorOfGammaK
        && spec.kappa.values().iter().all(|&v| v > 1e-3))
    .then_some(jet)
}

// ---------------------------------------------------------------------------
// criterion bodies (Ok(detail) / Err(reason))
// ---------------------------------------------------------------------------

type Outcome = Result<String, String>;

fn criterion_1_curvature_oracle() -> Outcome {
    let points = [[0.0, 0.0], [0.3, 0.4], [-0.5, 0.2], [0.1, -0.6]];
    let mut worst_hemi = 0.0_f64;
    let mut worst_cap = 0.0_f64;
    for xv in points {
        let hemi = cap_jet(1.0, 1e-12, &xv).map_err(|e| e.to_string())?;
        let spec = graphgeom::curvature_spectrum(&hemi, 1).map_err(|e| e.to_string())?;
        for &ka in spec.kappa.values() {
            worst_hemi = worst_hemi.max(ka.abs());
        }
        let cap = cap_jet(R1, SIGMA, &xv).map_err(|e| e.to_string())?;
        let spec = graphgeom::curvature_spectrum(&cap, 2).map_err(|e| e.to_string())?;
        for &ka in spec.kappa.values() {
            worst_cap = worst_cap.max((ka - SIGMA).abs());
        }
    }
    if worst_hemi > 1e-10 {
        return Err(format!("hemisphere max|κ| = {worst_hemi:.3e} exceeds 1e-10"));
    }
    if worst_cap > 1e-10 {
        return Err(format!("cap max|κ − σ| = {worst_cap:.3e} exceeds 1e-10"));
    }
    Ok(format!("hemisphere max|κ| {worst_hemi:.2e}, cap max|κ−σ| {worst_cap:.2e}"))
}

fn criterion_2_derivative_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let tol = 1e-5;
    let rel_ok = |a: f64, fd: f64| (a - fd).abs() <= tol * fd.abs().max(1.0);

    // f_gradient vs central FD of f_value
    let mut done = 0usize;
    while done < 1000 {
        let n = if done % 2 == 0 { 2 } else { 3 };
        let k = 1 + done % n;
        let Some(kappa) = random_kappa(&mut rng, n, k) else { continue };
        let grad = match f_gradient(&kappa, k) {
            Ok(g) => g,
            Err(_) => continue,
        };
        let step = 1e-6;
        let mut ok = true;
        for i in 0..n {
            let mut plus = kappa.values().to_vec();
            let mut minus = plus.clone();
            plus[i] += step;
            minus[i] -= step;
            let (fp, fm) = match (
                EigenTuple::new(plus).and_then(|t| f_value(&t, k)),
                EigenTuple::new(minus).and_then(|t| f_value(&t, k)),
            ) {
                (Ok(a), Ok(b)) => (a, b),
                _ => {
                    ok = false;
                    break;
                }
            };
            let fd = (fp - fm) / (2.0 * step);
            if !rel_ok(grad.values()[i], fd) {
                return Err(format!(
                    "f_gradient mismatch at n={n} k={k}: {} vs FD {fd}",
                    grad.values()[i]
                ));
            }
        }
        if ok {
            done += 1;
        }
    }

    // matrix_sigma_gradient vs per-entry FD of σₖ(A)
    let mut done = 0usize;
    while done < 1000 {
        let n = if done % 2 == 0 { 2 } else { 3 };
        let k = 1 + done % n;
        let Some(a) = random_matrix(&mut rng, n, k) else { continue };
        let grad = match matrix_sigma_gradient(&a, k) {
            Ok(g) => g,
            Err(_) => continue,
        };
        let step = 1e-6;
        for i in 0..n {
            for j in i..n {
                let mut plus = a.clone();
                let mut minus = a.clone();
                plus.set(i, j, a.get(i, j) + step);
                minus.set(i, j, a.get(i, j) - step);
                let sp = symfunc::sigma(k, &eigen_tuple(&plus)).map_err(|e| e.to_string())?;
                let sm = symfunc::sigma(k, &eigen_tuple(&minus)).map_err(|e| e.to_string())?;
                let mut fd = (sp - sm) / (2.0 * step);
                if i != j {
                    fd /= 2.0;
                }
                if !rel_ok(grad.get(i, j), fd) {
                    return Err(format!(
                        "matrix_sigma_gradient mismatch at n={n} k={k} ({i},{j}): {} vs FD {fd}",
                        grad.get(i, j)
                    ));
                }
            }
        }
        done += 1;
    }

    // second_directional vs Richardson-extrapolated second difference
    let mut done = 0usize;
    while done < 1000 {
        let n = if done % 2 == 0 { 2 } else { 3 };
        let k = 1 + done % n;
        let Some(a) = random_matrix(&mut rng, n, k) else { continue };
        let b = SymMatrix::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let got = match second_directional(&a, &b, k) {
            Ok(v) => v,
            Err(_) => continue,
        };
        let eval = |t: f64| -> Option<f64> { f_value(&eigen_tuple(&a.add(&b.scale(t))), k).ok() };
        let d2 = |h: f64| -> Option<f64> {
            Some((eval(h)? - 2.0 * eval(0.0)? + eval(-h)?) / (h * h))
        };
        let (Some(c1), Some(c2)) = (d2(1e-3), d2(5e-4)) else { continue };
        let fd = (4.0 * c2 - c1) / 3.0;
        if !rel_ok(got, fd) {
            return Err(format!(
                "second_directional mismatch at n={n} k={k}: {got} vs FD {fd}"
            ));
        }
        done += 1;
    }

    // linearization coefficients vs FD of the curvature operator G = f(κ[u])
    let g_of = |jet: &PointJet, k: usize| -> Option<f64> {
        let spec = graphgeom::curvature_spectrum(jet, k).ok()?;
        f_value(&spec.kappa, k).ok()
    };
    let psi0 = RhsSpec::constant(1.0, 3);
    let mut done = 0usize;
    while done < 1000 {
        let n = if done % 2 == 0 { 2 } else { 3 };
        let k = 1 + done % n;
        let Some(jet) = random_jet(&mut rng, n, k) else { continue };
        let lin = match graphgeom::linearization(&jet, &psi0, k) {
            Ok(l) => l,
            Err(_) => continue,
        };
        let step = 1e-6;
        // G_u
        let mut plus = jet.clone();
        let mut minus = jet.clone();
        plus.u += step;
        minus.u -= step;
        let (Some(gp), Some(gm)) = (g_of(&plus, k), g_of(&minus, k)) else { continue };
        let fd = (gp - gm) / (2.0 * step);
        if !rel_ok(lin.gu, fd) {
            return Err(format!("G_u mismatch at n={n} k={k}: {} vs FD {fd}", lin.gu));
        }
        // G^i
        let mut ok = true;
        for i in 0..n {
            let mut plus = jet.clone();
            let mut minus = jet.clone();
            plus.du[i] += step;
            minus.du[i] -= step;
            let (Some(gp), Some(gm)) = (g_of(&plus, k), g_of(&minus, k)) else {
                ok = false;
                break;
            };
            let fd = (gp - gm) / (2.0 * step);
            if !rel_ok(lin.gi[i], fd) {
                return Err(format!("G^i mismatch at n={n} k={k}: {} vs FD {fd}", lin.gi[i]));
            }
        }
        if !ok {
            continue;
        }
        // G^{ij}: perturbing the symmetric entry pair doubles off-diagonals
        for i in 0..n {
            for j in i..n {
                let mut plus = jet.clone();
                let mut minus = jet.clone();
                plus.d2u.set(i, j, jet.d2u.get(i, j) + step);
                minus.d2u.set(i, j, jet.d2u.get(i, j) - step);
                let (Some(gp), Some(gm)) = (g_of(&plus, k), g_of(&minus, k)) else {
                    ok = false;
                    break;
                };
                let fd = (gp - gm) / (2.0 * step);
                let expect = if i == j { lin.gij.get(i, j) } else { 2.0 * lin.gij.get(i, j) };
                if !rel_ok(expect, fd) {
                    return Err(format!(
                        "G^ij mismatch at n={n} k={k} ({i},{j}): {expect} vs FD {fd}"
                    ));
                }
            }
            if !ok {
                break;
            }
        }
        if ok {
            done += 1;
        }
    }
    Ok("4 derivative families × 1000 admissible samples vs FD at 1e-5".into())
}

fn criterion_3_transform_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3003);
    let mut done = 0usize;
    let mut worst = 0.0_f64;
    while done < 1000 {
        let n = if done % 2 == 0 { 2 } else { 3 };
        let Some(jet) = random_convex_jet(&mut rng, n) else { continue };
        let spec = graphgeom::curvature_spectrum(&jet, n).map_err(|e| e.to_string())?;
        let f = f_value(&spec.kappa, n).map_err(|e| e.to_string())?;
        let ma = transform::to_ma(&jet);
        let q = transform::q_factor(&ma.x, ma.u_big, &ma.du_big).map_err(|e| e.to_string())?;
        let rhs = 2.0_f64.powi(n as i32) * q.powf((n as f64 + 2.0) / 2.0) * f.powi(n as i32);
        let lhs = ma.d2u_big.det();
        let rel = (lhs - rhs).abs() / lhs.abs().max(1.0);
        worst = worst.max(rel);
        if rel > 1e-9 {
            return Err(format!("det D²U = {lhs} vs Ψ(f-convention) = {rhs}, rel {rel:.3e}"));
        }
        done += 1;
    }
    Ok(format!("1000 strictly convex jets, worst relative defect {worst:.2e}"))
}

fn exact_solve_criterion(run_fine: &Run, run_coarse: &Run, ratio_eps: f64) -> Outcome {
    let fine = run_fine.snaps.last().unwrap();
    let err_fine = sup_error(fine);
    if err_fine > 5e-3 {
        return Err(format!("sup error {err_fine:.3e} at h = 1/64 exceeds 5e-3"));
    }
    let e64 = sup_error(snapshot_at(&run_fine.snaps, ratio_eps));
    let e32 = sup_error(snapshot_at(&run_coarse.snaps, ratio_eps));
    let ratio = e32 / e64;
    if !(3.2..=4.8).contains(&ratio) {
        return Err(format!(
            "error ratio {ratio:.3} outside [3.2, 4.8] (e32 = {e32:.3e}, e64 = {e64:.3e})"
        ));
    }
    Ok(format!("sup error {err_fine:.2e} ≤ 5e-3, halving ratio {ratio:.2}"))
}

fn criterion_6_example_pipeline(run6: &Run, psi: &RhsSpec, h: f64) -> Outcome {
    let tol = 10.0 * h * h;
    let mut worst_lower = f64::INFINITY;
    let mut worst_upper = f64::INFINITY;
    for s in &run6.snaps {
        if !s.report.converged {
            return Err(format!("continuation failed to converge at ε = {}", s.eps));
        }
        let m = ordering_check(&run6.ubar, &s.u, &s.dom, Some(&run6.v_small), tol)
            .map_err(|e| e.to_string())?;
        worst_lower = worst_lower.min(m.lower);
        let up = m.upper.unwrap();
        if up <= 0.0 {
            return Err(format!("upper ordering margin {up:.3e} not positive at ε = {}", s.eps));
        }
        worst_upper = worst_upper.min(up);
    }
    let sub = subsolution_check(&run6.ubar, psi, 2, 0.05, tol).map_err(|e| e.to_string())?;
    Ok(format!(
        "ordering margins ≥ {worst_lower:.2e} / > 0 (min {worst_upper:.2e}), subsolution margin {:.2e}",
        sub.min_margin
    ))
}

fn criterion_7_uniform_table(run6: &Run) -> Outcome {
    let table =
        uniform_estimate_table(&run6.snaps, &run6.ubar, 0.1, 2).map_err(|e| e.to_string())?;
    if !table.pass {
        return Err(format!("sup columns vary ≥ 10% over the last three levels: {:?}", table.rows));
    }
    let last = table.rows.last().unwrap();
    Ok(format!(
        "{} rows on Ω at ε₀ = 0.1; finest sup|Du| {:.3}, sup|D²U| {:.3}",
        table.rows.len(),
        last.sup_du,
        last.sup_second
    ))
}

fn criterion_8_gap_certificate(run6: &Run) -> Outcome {
    let mut mins = Vec::new();
    let tail = &run6.snaps[run6.snaps.len() - 3..];
    for s in tail {
        let u_big = s.u_big.as_ref().expect("run 6 solves the transformed path");
        let nd = nested_domains(GapKind::Transformed, &run6.v_big, u_big, &run6.ubar, 0.1)
            .map_err(|e| e.to_string())?;
        let cert = gap_certificate(&run6.v_big, u_big, &nd).map_err(|e| e.to_string())?;
        if !cert.pass || cert.min_gap <= 0.0 {
            return Err(format!(
                "certificate fails at ε = {}: min gap {:.3e} vs threshold {:.3e}",
                s.eps, cert.min_gap, cert.threshold
            ));
        }
        mins.push(cert.min_gap);
    }
    let spread = relative_spread(&mins);
    if spread >= 0.10 {
        return Err(format!("min gap varies {:.1}% ≥ 10% across ε: {mins:?}", spread * 100.0));
    }
    Ok(format!("min V − U ∈ [{:.4}, {:.4}], ε-spread {:.1}%", mins[0], mins[2], spread * 100.0))
}

fn monitor_series_curvature(run: &Run, eps0: f64, k: usize) -> Result<Vec<f64>, String> {
    let mut vals = Vec::new();
    for s in &run.snaps[run.snaps.len() - 3..] {
        let nd = nested_domains(GapKind::Squared, &run.v_small, &s.u, &run.ubar, eps0)
            .map_err(|e| e.to_string())?;
        let mut mc = MonitorConfig::measured(&s.u, &nd, eps0).map_err(|e| e.to_string())?;
        // a mild exponential weight: at β = 1 the continuum argmax of the
        // monitor sits a fraction of a mesh width inside the cutoff contour,
        // so its discrete argmax lands on a node adjacent to the rim
        mc.beta = 0.1;
        let rep = pogorelov_curvature_monitor(&s.u, &run.v_small, &nd, &mc, k)
            .map_err(|e| e.to_string())?;
        if !rep.value.is_finite() {
            return Err(format!("curvature monitor not finite at ε = {}", s.eps));
        }
        if !rep.argmax_interior {
            return Err(format!(
                "curvature monitor argmax {:?} touches the rim at ε = {}",
                rep.argmax, s.eps
            ));
        }
        vals.push(rep.value);
    }
    Ok(vals)
}

fn monitor_series_ma(run: &Run, eps0: f64) -> Result<Vec<f64>, String> {
    let mut vals = Vec::new();
    for s in &run.snaps[run.snaps.len() - 3..] {
        let u_big = s.u_big.as_ref().expect("MA monitor needs transformed snapshots");
        let nd = nested_domains(GapKind::Transformed, &run.v_big, u_big, &run.ubar, eps0)
            .map_err(|e| e.to_string())?;
        let mc = MonitorConfig::measured(&s.u, &nd, eps0).map_err(|e| e.to_string())?;
        let rep =
            pogorelov_ma_monitor(u_big, &run.v_big, &nd, &mc).map_err(|e| e.to_string())?;
        if !rep.value.is_finite() {
            return Err(format!("MA monitor not finite at ε = {}", s.eps));
        }
        if !rep.argmax_interior {
            return Err(format!(
                "MA monitor argmax {:?} touches the rim at ε = {}",
                rep.argmax, s.eps
            ));
        }
        vals.push(rep.value);
    }
    Ok(vals)
}

fn criterion_9_monitors(run4: &Run, run5: &Run, run6: &Run) -> Outcome {
    let mut summary = Vec::new();
    for (name, series) in [
        ("run4 curvature", monitor_series_curvature(run4, 0.45, 1)?),
        ("run5 MA", monitor_series_ma(run5, 0.45)?),
        ("run6 curvature", monitor_series_curvature(run6, 0.4, 2)?),
        ("run6 MA", monitor_series_ma(run6, 0.4)?),
    ] {
        let spread = relative_spread(&series);
        if spread >= 0.10 {
            return Err(format!(
                "{name} monitor varies {:.1}% ≥ 10% across the last three ε: {series:?}",
                spread * 100.0
            ));
        }
        summary.push(format!("{name} {:.3} ± {:.1}%", series[2], spread * 100.0));
    }
    Ok(summary.join(", "))
}

fn criterion_10_uniqueness(psi: &RhsSpec, h: f64) -> Outcome {
    let ubar = cap_field(R1, SIGMA, h, rim() + 6.0 * h);
    let mut cfg = SolveConfig::new(2, Path::MongeAmpere, h);
    cfg.tol = 1e-11;
    cfg.max_iter = 60;
    // both initializations live in the transformed variable U
    let base = |x: f64, y: f64| {
        let q: f64 = R1 * R1 - x * x - y * y;
        let u = if q > 0.0 { (q.sqrt() - SIGMA * R1).max(0.0) } else { 0.0 };
        u * u + x * x + y * y
    };
    let bumped = move |x: f64, y: f64| base(x, y) + 0.05 * (1.0 - x * x - y * y);
    let diff =
        uniqueness_probe(&ubar, 0.1, psi, &cfg, &base, &bumped).map_err(|e| e.to_string())?;
    if diff > 1e-6 {
        return Err(format!("solutions from distinct initializations differ by {diff:.3e}"));
    }
    Ok(format!("sup-norm difference {diff:.2e} ≤ 1e-6"))
}

fn criterion_11_andrews_gerhardt() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    let mut done = 0usize;
    let mut worst = f64::INFINITY;
    while done < 10_000 {
        let n = 3;
        let k = 2 + done % 2;
        let mut vals: Vec<f64> = (0..n)
            .map(|_| if k == 3 { rng.gen_range(0.05..3.0) } else { rng.gen_range(-0.5..3.0) })
            .collect();
        vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
        if vals[0] - vals[1] < 1e-3 || vals[0] - vals[2] < 1e-3 {
            continue;
        }
        let Ok(kappa) = EigenTuple::new(vals.clone()) else { continue };
        if cone_classify(&kappa, k, CONE_TOL)
            .map(|l| l.class != ConeClass::InteriorOfGammaK)
            .unwrap_or(true)
        {
            continue;
        }
        let b = SymMatrix::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let m = andrews_gerhardt_margin(&kappa, &b, k, &[1, 2]).map_err(|e| e.to_string())?;
        worst = worst.min(m);
        if m < -1e-10 {
            return Err(format!("margin {m:.3e} below −1e-10 at κ = {vals:?}, k = {k}"));
        }
        done += 1;
    }
    Ok(format!("10000 admissible configurations, minimum margin {worst:.2e}"))
}

fn criterion_12_parser_cli() -> Outcome {
    // CLI determinism: identical configs give byte-identical artifacts
    let config = r#"{
        "schema_version": 1,
        "n": 2,
        "k": 1,
        "domain": {"type": "cap", "r1": 1.0, "sigma": 0.5},
        "psi": "1",
        "h": 0.05,
        "eps_levels": [0.2, 0.1],
        "eps0": 0.1,
        "mode": "solve"
    }"#;
    let cfg = ExperimentConfig::from_json(config).map_err(|e| e.to_string())?;
    let d1 = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d2 = tempfile::tempdir().map_err(|e| e.to_string())?;
    let lines1 = cli::run(&cfg, d1.path()).map_err(|e| e.to_string())?;
    let lines2 = cli::run(&cfg, d2.path()).map_err(|e| e.to_string())?;
    if lines1 != lines2 {
        return Err("summary lines differ between identical runs".into());
    }
    for entry in std::fs::read_dir(d1.path()).map_err(|e| e.to_string())? {
        let name = entry.map_err(|e| e.to_string())?.file_name();
        let a = std::fs::read(d1.path().join(&name)).map_err(|e| e.to_string())?;
        let b = std::fs::read(d2.path().join(&name)).map_err(|e| e.to_string())?;
        if a != b {
            return Err(format!("artifact {name:?} differs between identical runs"));
        }
    }

    // parse round trips: print, reparse, compare values exactly
    let sources = [
        "2*u^2",
        "1 + 0.5*x1^2 + u*x2",
        "exp(-u)*x1*x2 + 2",
        "sqrt(u + 1) + log(2 + x1) - x2/(u + 3)",
    ];
    let samples = [([0.3, -0.2], 0.7), ([0.0, 0.5], 1.2), ([-0.4, 0.1], 0.25)];
    for src in sources {
        let tree = parse(src).map_err(|e| e.to_string())?;
        let reparsed = parse(&tree.to_string()).map_err(|e| e.to_string())?;
        for (x, u) in samples {
            let a = tree.eval(&x, u).map_err(|e| e.to_string())?;
            let b = reparsed.eval(&x, u).map_err(|e| e.to_string())?;
            if (a - b).abs() > 1e-12 * a.abs().max(1.0) {
                return Err(format!("round trip of `{src}` changes value: {a} vs {b}"));
            }
        }
    }

    // symbolic vs FD derivatives of ψ
    let step = 1e-6;
    for src in sources {
        let psi = RhsSpec::parse(src, 2).map_err(|e| e.to_string())?;
        for (x, u) in samples {
            let fd_u = (psi.eval(&x, u + step).map_err(|e| e.to_string())?
                - psi.eval(&x, u - step).map_err(|e| e.to_string())?)
                / (2.0 * step);
            let sym_u = psi.eval_du(&x, u).map_err(|e| e.to_string())?;
            if (sym_u - fd_u).abs() > 1e-7 * fd_u.abs().max(1.0) {
                return Err(format!("ψ_u of `{src}` off FD: {sym_u} vs {fd_u}"));
            }
            for i in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[i] += step;
                xm[i] -= step;
                let fd = (psi.eval(&xp, u).map_err(|e| e.to_string())?
                    - psi.eval(&xm, u).map_err(|e| e.to_string())?)
                    / (2.0 * step);
                let sym = psi.eval_dx(i, &x, u).map_err(|e| e.to_string())?;
                if (sym - fd).abs() > 1e-7 * fd.abs().max(1.0) {
                    return Err(format!("ψ_x{} of `{src}` off FD: {sym} vs {fd}", i + 1));
                }
            }
        }
    }
    Ok("deterministic artifacts, exact round trips, derivatives ≤ 1e-7 of FD".into())
}

// ---------------------------------------------------------------------------

#[test]
fn acceptance() {
    let h64 = 1.0 / 64.0;
    let h32 = 1.0 / 32.0;
    let sched_fine = vec![0.2, 0.12, 0.09, 0.07, 0.06];
    let sched_coarse = vec![0.2, 0.12, 0.09];

    // shared solves
    let psi_one = RhsSpec::constant(1.0, 2);
    let psi_half = RhsSpec::constant(0.5, 2);
    let psi_model = RhsSpec::parse("2*u^2", 2).expect("model right-hand side parses");

    let run4 = cap_run(1, Path::Curvature, &psi_one, h64, sched_fine.clone());
    let run4c = cap_run(1, Path::Curvature, &psi_one, h32, sched_coarse.clone());
    let run5 = cap_run(2, Path::MongeAmpere, &psi_half, h64, sched_fine);
    let run5c = cap_run(2, Path::MongeAmpere, &psi_half, h32, sched_coarse);
    let run6 =
        cap_run(2, Path::MongeAmpere, &psi_model, h64, vec![0.2, 0.1, 0.05, 0.035, 0.03, 0.025]);

    let solve_err = |e: &hyperplateau::Error| format!("continuation solve failed: {e}");
    let outcomes: Vec<(usize, &str, Outcome)> = vec![
        (1, "curvature oracle", criterion_1_curvature_oracle()),
        (2, "derivative consistency", criterion_2_derivative_consistency()),
        (3, "transform equivalence", criterion_3_transform_equivalence()),
        (
            4,
            "exact solve k=1",
            match (&run4, &run4c) {
                (Ok(f), Ok(c)) => exact_solve_criterion(f, c, 0.09),
                (Err(e), _) | (_, Err(e)) => Err(solve_err(e)),
            },
        ),
        (
            5,
            "exact solve k=n=2 (MA path)",
            // the halving ratio is read at the coarsest shared level: height
            // recovery u = √(U − |x|²) amplifies the U-error by 1/(2ε) near
            // the rim, which pollutes the order measurement at small ε
            match (&run5, &run5c) {
                (Ok(f), Ok(c)) => exact_solve_criterion(f, c, 0.2),
                (Err(e), _) | (_, Err(e)) => Err(solve_err(e)),
            },
        ),
        (
            6,
            "model pipeline ψ = 2u²",
            match &run6 {
                Ok(r) => criterion_6_example_pipeline(r, &psi_model, h64),
                Err(e) => Err(solve_err(e)),
            },
        ),
        (
            7,
            "uniform estimate table",
            match &run6 {
                Ok(r) => criterion_7_uniform_table(r),
                Err(e) => Err(solve_err(e)),
            },
        ),
        (
            8,
            "gap certificate",
            match &run6 {
                Ok(r) => criterion_8_gap_certificate(r),
                Err(e) => Err(solve_err(e)),
            },
        ),
        (
            9,
            "interior monitors",
            match (&run4, &run5, &run6) {
                (Ok(a), Ok(b), Ok(c)) => criterion_9_monitors(a, b, c),
                (Err(e), _, _) | (_, Err(e), _) | (_, _, Err(e)) => Err(solve_err(e)),
            },
        ),
        (10, "uniqueness probe", criterion_10_uniqueness(&psi_model, h64)),
        (11, "concavity margin", criterion_11_andrews_gerhardt()),
        (12, "parser and CLI", criterion_12_parser_cli()),
    ];

    let mut failures = 0usize;
    for (id, name, outcome) in &outcomes {
        match outcome {
            Ok(detail) => println!("PASS criterion {id:2} {name}: {detail}"),
            Err(reason) => {
                println!("FAIL criterion {id:2} {name}: {reason}");
                failures += 1;
            }
        }
    }
    assert_eq!(failures, 0, "{failures} acceptance criteria failed");
}
