//! Elementary symmetric functions σₖ, Gårding cone tests, and derivatives of
//! f = σₖ^{1/k} in eigenvalue and matrix form.
//!
//! σₖ is evaluated by the stable recursive expansion over entries; matrix
//! gradients use Newton transforms, so no eigen-solve is needed for σₖ(A)
//! itself. Eigen-decompositions (second-order directional derivatives,
//! curvature extraction) go through the cyclic Jacobi routine in [`crate::linalg`].

use crate::error::{Error, Result};
use crate::linalg::SymMatrix;

/// Default absolute tolerance for cone classification.
pub const CONE_TOL: f64 = 1e-12;

/// A tuple of principal curvatures (dimensionless).
#[derive(Debug, Clone, PartialEq)]
pub struct EigenTuple(Vec<f64>);

impl EigenTuple {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Argument("eigen tuple must have length >= 1".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Argument("eigen tuple entries must be finite".into()));
        }
        Ok(EigenTuple(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Position of a curvature tuple relative to the Gårding cone Γₖ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeClass {
    InteriorOfGammaK,
    BoundaryOfGammaK,
    Outside,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConeLabel {
    pub class: ConeClass,
    pub k: usize,
}

fn check_k(k: usize, n: usize) -> Result<()> {
    if k < 1 || k > n {
        return Err(Error::Argument(format!("k = {k} out of range 1..={n}")));
    }
    Ok(())
}

/// All elementary symmetric functions σ₀..σ_m of `values` by the recursive
/// expansion e_j ← e_j + v·e_{j−1}.
pub fn sigma_all(values: &[f64], m: usize) -> Vec<f64> {
    let mut e = vec![0.0; m + 1];
    e[0] = 1.0;
    for &v in values {
        for j in (1..=m.min(values.len())).rev() {
            e[j] += v * e[j - 1];
        }
    }
    e
}

/// σ_m of the tuple with entry `i` deleted; zero for m < 0 handled by caller.
fn sigma_excluding(values: &[f64], m: usize, skip: usize) -> f64 {
    let mut e = vec![0.0; m + 1];
    e[0] = 1.0;
    for (idx, &v) in values.iter().enumerate() {
        if idx == skip {
            continue;
        }
        for j in (1..=m).rev() {
            e[j] += v * e[j - 1];
        }
    }
    e[m]
}

/// σ_m of the tuple with entries `i` and `j` deleted.
fn sigma_excluding2(values: &[f64], m: usize, skip_a: usize, skip_b: usize) -> f64 {
    let mut e = vec![0.0; m + 1];
    e[0] = 1.0;
    for (idx, &v) in values.iter().enumerate() {
        if idx == skip_a || idx == skip_b {
            continue;
        }
        for j in (1..=m).rev() {
            e[j] += v * e[j - 1];
        }
    }
    e[m]
}

/// The k-th Weingarten curvature σₖ(κ) = Σ_{i₁<…<i_k} κ_{i₁}⋯κ_{i_k}.
pub fn sigma(k: usize, kappa: &EigenTuple) -> Result<f64> {
    check_k(k, kappa.len())?;
    Ok(sigma_all(kappa.values(), k)[k])
}

/// Classifies κ against the Gårding cone Γₖ = {σⱼ(κ) > 0, j = 1..k}.
pub fn cone_classify(kappa: &EigenTuple, k: usize, tol: f64) -> Result<ConeLabel> {
    check_k(k, kappa.len())?;
    if tol < 0.0 {
        return Err(Error::Argument("cone tolerance must be >= 0".into()));
    }
    let e = sigma_all(kappa.values(), k);
    let sigmas = &e[1..=k];
    let min = sigmas.iter().cloned().fold(f64::INFINITY, f64::min);
    let class = if min > tol {
        ConeClass::InteriorOfGammaK
    } else if min >= -tol {
        ConeClass::BoundaryOfGammaK
    } else {
        ConeClass::Outside
    };
    Ok(ConeLabel { class, k })
}

/// f(κ) = σₖ(κ)^{1/k}; zero on the cone boundary, error outside Γ̄ₖ.
pub fn f_value(kappa: &EigenTuple, k: usize) -> Result<f64> {
    let label = cone_classify(kappa, k, CONE_TOL)?;
    match label.class {
        ConeClass::Outside => Err(Error::Inadmissible {
            msg: "curvature tuple outside the closed Garding cone".into(),
            label,
        }),
        ConeClass::BoundaryOfGammaK => {
            let s = sigma(k, kappa)?;
            Ok(s.max(0.0).powf(1.0 / k as f64))
        }
        ConeClass::InteriorOfGammaK => Ok(sigma(k, kappa)?.powf(1.0 / k as f64)),
    }
}

fn require_interior(kappa: &EigenTuple, k: usize) -> Result<()> {
    let label = cone_classify(kappa, k, CONE_TOL)?;
    if label.class != ConeClass::InteriorOfGammaK {
        return Err(Error::Inadmissible {
            msg: "curvature tuple not strictly inside the Garding cone".into(),
            label,
        });
    }
    Ok(())
}

/// Gradient fᵢ = ∂f/∂κᵢ = (1/k)·σₖ^{1/k−1}·σ_{k−1}(κ|i), strictly inside Γₖ.
pub fn f_gradient(kappa: &EigenTuple, k: usize) -> Result<EigenTuple> {
    require_interior(kappa, k)?;
    let s = sigma(k, kappa)?;
    let kf = k as f64;
    let factor = s.powf(1.0 / kf - 1.0) / kf;
    let grad: Vec<f64> = (0..kappa.len())
        .map(|i| factor * sigma_excluding(kappa.values(), k - 1, i))
        .collect();
    EigenTuple::new(grad)
}

/// Eigenvalues of a symmetric matrix as an [`EigenTuple`] (sorted descending).
pub fn eigen_tuple(a: &SymMatrix) -> EigenTuple {
    EigenTuple(a.eigenvalues())
}

/// ∂σₖ(A)/∂a_ij = the (k−1)-th Newton transform
/// T_{k−1}(A) = σ_{k−1}I − σ_{k−2}A + … ± A^{k−1}.
pub fn matrix_sigma_gradient(a: &SymMatrix, k: usize) -> Result<SymMatrix> {
    let n = a.dim();
    check_k(k, n)?;
    let lam = eigen_tuple(a);
    let label = cone_classify(&lam, k, CONE_TOL)?;
    if label.class == ConeClass::Outside {
        return Err(Error::Inadmissible { msg: "matrix eigenvalues outside Garding cone".into(), label });
    }
    Ok(newton_transform(a, k - 1))
}

/// T_m(A) = Σ_{j=0}^{m} (−1)^j σ_{m−j}(A) A^j with σ from Newton's identities
/// on the power traces (no eigen-solve).
pub fn newton_transform(a: &SymMatrix, m: usize) -> SymMatrix {
    let n = a.dim();
    // powers A^0..A^m
    let mut powers: Vec<SymMatrix> = Vec::with_capacity(m + 1);
    powers.push(SymMatrix::identity(n));
    for j in 1..=m {
        let raw = powers[j - 1].matmul_raw(a);
        powers.push(SymMatrix::from_fn(n, |i, l| raw[i * n + l]));
    }
    // power sums p_j = tr(A^j) for j = 1..m; need A^m's trace via A^{m}
    let mut p = vec![0.0; m + 1];
    for j in 1..=m {
        p[j] = powers[j].trace();
    }
    // Newton's identities: e_j = (1/j) Σ_{i=1..j} (−1)^{i−1} e_{j−i} p_i
    let mut e = vec![0.0; m + 1];
    e[0] = 1.0;
    for j in 1..=m {
        let mut acc = 0.0;
        let mut sign = 1.0;
        for i in 1..=j {
            acc += sign * e[j - i] * p[i];
            sign = -sign;
        }
        e[j] = acc / j as f64;
    }
    let mut t = SymMatrix::zeros(n);
    let mut sign = 1.0;
    for j in 0..=m {
        t = t.add(&powers[j].scale(sign * e[m - j]));
        sign = -sign;
    }
    t
}

/// Matrix gradient F^{ij} of F(A) = σₖ(A)^{1/k}, by the chain rule through the
/// Newton transform.
pub fn matrix_f_gradient(a: &SymMatrix, k: usize) -> Result<SymMatrix> {
    let lam = eigen_tuple(a);
    require_interior(&lam, k)?;
    let s = sigma(k, &lam)?;
    let kf = k as f64;
    Ok(newton_transform(a, k - 1).scale(s.powf(1.0 / kf - 1.0) / kf))
}

/// Second derivative of f = σₖ^{1/k} in eigenvalue coordinates:
/// f^{ij} = (1/k)(1/k−1)σₖ^{1/k−2}σ_{k−1}(κ|i)σ_{k−1}(κ|j)
///        + [i≠j](1/k)σₖ^{1/k−1}σ_{k−2}(κ|ij).
fn f_hessian_entry(kappa: &[f64], k: usize, s: f64, i: usize, j: usize) -> f64 {
    let kf = k as f64;
    let si = sigma_excluding(kappa, k - 1, i);
    let sj = sigma_excluding(kappa, k - 1, j);
    let mut h = (1.0 / kf) * (1.0 / kf - 1.0) * s.powf(1.0 / kf - 2.0) * si * sj;
    if i != j && k >= 2 {
        h += (1.0 / kf) * s.powf(1.0 / kf - 1.0) * sigma_excluding2(kappa, k - 2, i, j);
    }
    h
}

/// Divided difference (fᵢ−fⱼ)/(κᵢ−κⱼ) = −(1/k)σₖ^{1/k−1}σ_{k−2}(κ|ij).
///
/// The identity σ_{k−1}(κ|i) − σ_{k−1}(κ|j) = (κⱼ−κᵢ)σ_{k−2}(κ|ij) makes this
/// exact for coincident eigenvalues as well, so the removable singularity
/// never enters the computation.
fn f_divided_difference(kappa: &[f64], k: usize, s: f64, i: usize, j: usize) -> f64 {
    if k < 2 {
        return 0.0;
    }
    let kf = k as f64;
    -(1.0 / kf) * s.powf(1.0 / kf - 1.0) * sigma_excluding2(kappa, k - 2, i, j)
}

/// The second directional derivative F^{ij,rs}B_{ij}B_{rs} of F = σₖ^{1/k} at
/// A in direction B, evaluated in the eigenframe of A.
pub fn second_directional(a: &SymMatrix, b: &SymMatrix, k: usize) -> Result<f64> {
    let n = a.dim();
    if b.dim() != n {
        return Err(Error::Argument("direction matrix dimension mismatch".into()));
    }
    let (lam, q) = a.eigen();
    let kappa = EigenTuple::new(lam.clone())?;
    require_interior(&kappa, k)?;
    let s = sigma(k, &kappa)?;
    let bt = b.congruence(&q);
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            total += f_hessian_entry(&lam, k, s, i, j) * bt.get(i, i) * bt.get(j, j);
        }
    }
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let c = f_divided_difference(&lam, k, s, i, j);
            total += c * bt.get(i, j) * bt.get(i, j);
        }
    }
    Ok(total)
}

/// Margin of the Andrews–Gerhardt inequality at a sample:
/// (−F^{ij,rs}B_{ij}B_{rs}) − 2Σ_{j∈J}(fⱼ−f₁)/(κ₁−κⱼ)·B_{1j}².
///
/// `kappa` must be sorted descending and strictly inside Γₖ, with κ₁ > κⱼ for
/// every j ∈ J; `b` is expressed in the eigenframe of diag(κ).
pub fn andrews_gerhardt_margin(
    kappa: &EigenTuple,
    b: &SymMatrix,
    k: usize,
    j_set: &[usize],
) -> Result<f64> {
    let n = kappa.len();
    if b.dim() != n {
        return Err(Error::Argument("direction matrix dimension mismatch".into()));
    }
    let vals = kappa.values();
    for w in vals.windows(2) {
        if w[0] < w[1] {
            return Err(Error::Argument("kappa must be sorted descending".into()));
        }
    }
    require_interior(kappa, k)?;
    for &j in j_set {
        if j == 0 || j >= n {
            return Err(Error::Argument(format!("index {j} in J out of range 1..{n}")));
        }
        if vals[0] <= vals[j] {
            return Err(Error::DegenerateGap(format!(
                "kappa_1 = kappa_{} = {}",
                j + 1,
                vals[0]
            )));
        }
    }
    let a = SymMatrix::diag(vals);
    let second = second_directional(&a, b, k)?;
    let grad = f_gradient(kappa, k)?;
    let f = grad.values();
    let mut correction = 0.0;
    for &j in j_set {
        correction += (f[j] - f[0]) / (vals[0] - vals[j]) * b.get(0, j) * b.get(0, j);
    }
    Ok(-second - 2.0 * correction)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn et(v: &[f64]) -> EigenTuple {
        EigenTuple::new(v.to_vec()).unwrap()
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(sigma(2, &et(&[1.0, 1.0, 1.0])).unwrap(), 3.0);
        assert!((sigma(2, &et(&[2.0, 1.0, -0.5])).unwrap() - 0.5).abs() < 1e-15);
        let s = 0.4;
        assert!((sigma(3, &et(&[s, s, s])).unwrap() - 0.064).abs() < 1e-15);
    }

    #[test]
    fn sigma_k_out_of_range() {
        assert!(sigma(4, &et(&[1.0, 1.0, 1.0])).is_err());
        assert!(sigma(0, &et(&[1.0])).is_err());
    }

    #[test]
    fn cone_examples() {
        let l = cone_classify(&et(&[2.0, 1.0, -0.5]), 2, 1e-12).unwrap();
        assert_eq!(l.class, ConeClass::InteriorOfGammaK);
        let l = cone_classify(&et(&[1.0, 1.0, -1.0]), 2, 1e-12).unwrap();
        assert_eq!(l.class, ConeClass::Outside);
        let l = cone_classify(&et(&[0.0, 0.0, 0.0]), 3, 1e-12).unwrap();
        assert_eq!(l.class, ConeClass::BoundaryOfGammaK);
    }

    #[test]
    fn f_value_examples() {
        assert!((f_value(&et(&[0.5, 0.5]), 2).unwrap() - 0.5).abs() < 1e-15);
        // (1,...,1) with k: C(n,k)^{1/k}
        let v = f_value(&et(&[1.0, 1.0, 1.0]), 2).unwrap();
        assert!((v - 3.0_f64.sqrt()).abs() < 1e-15);
        let v = f_value(&et(&[2.0, 1.0]), 2).unwrap();
        assert!((v - 2.0_f64.sqrt()).abs() < 1e-12);
        // boundary gives 0
        assert_eq!(f_value(&et(&[0.0, 0.0]), 2).unwrap(), 0.0);
        // outside errors
        assert!(f_value(&et(&[1.0, 1.0, -1.0]), 2).is_err());
    }

    /// Central finite differences of f_value; the independent oracle for the
    /// gradient checks.
    fn fd_gradient(kappa: &[f64], k: usize, step: f64) -> Vec<f64> {
        (0..kappa.len())
            .map(|i| {
                let mut plus = kappa.to_vec();
                let mut minus = kappa.to_vec();
                plus[i] += step;
                minus[i] -= step;
                let fp = f_value(&et(&plus), k).unwrap();
                let fm = f_value(&et(&minus), k).unwrap();
                (fp - fm) / (2.0 * step)
            })
            .collect()
    }

    #[test]
    fn gradient_matches_fd() {
        // frozen from the FD oracle: (2,1), k=2 -> (0.353553, 0.707107)
        let g = f_gradient(&et(&[2.0, 1.0]), 2).unwrap();
        assert!((g.values()[0] - 0.3535533905932738).abs() < 1e-12);
        assert!((g.values()[1] - 0.7071067811865476).abs() < 1e-12);
        let fd = fd_gradient(&[2.0, 1.0], 2, 1e-6);
        for (a, b) in g.values().iter().zip(&fd) {
            assert!((a - b).abs() / b.abs() < 1e-6);
        }
        // f = sigma_1: gradient all ones
        let g = f_gradient(&et(&[1.0, 1.0, 1.0]), 1).unwrap();
        assert_eq!(g.values(), &[1.0, 1.0, 1.0]);
        // symmetric tuple: all entries equal
        let g = f_gradient(&et(&[0.7, 0.7, 0.7]), 2).unwrap();
        assert!((g.values()[0] - g.values()[1]).abs() < 1e-15);
        assert!((g.values()[1] - g.values()[2]).abs() < 1e-15);
    }

    #[test]
    fn gradient_positive_in_cone_and_errors_outside() {
        let g = f_gradient(&et(&[2.0, 1.0, -0.5]), 2).unwrap();
        assert!(g.values().iter().all(|&x| x > 0.0));
        assert!(f_gradient(&et(&[0.0, 0.0]), 2).is_err());
    }

    #[test]
    fn homogeneity_and_symmetry() {
        let kappa = [1.3, 0.4, 0.9];
        let f1 = f_value(&et(&kappa), 2).unwrap();
        let t = 3.7;
        let scaled: Vec<f64> = kappa.iter().map(|x| x * t).collect();
        let f2 = f_value(&et(&scaled), 2).unwrap();
        assert!((f2 - t * f1).abs() / (t * f1) < 1e-13);
        // permutation invariance / equivariance
        let perm = [0.9, 1.3, 0.4];
        let fp = f_value(&et(&perm), 2).unwrap();
        assert!((fp - f1).abs() < 1e-15);
        let g = f_gradient(&et(&kappa), 2).unwrap();
        let gp = f_gradient(&et(&perm), 2).unwrap();
        assert!((gp.values()[0] - g.values()[2]).abs() < 1e-15);
        assert!((gp.values()[1] - g.values()[0]).abs() < 1e-15);
    }

    #[test]
    fn matrix_gradient_examples() {
        let t = matrix_sigma_gradient(&SymMatrix::identity(3), 2).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 2.0 } else { 0.0 };
                assert!((t.get(i, j) - expect).abs() < 1e-14);
            }
        }
        let a = SymMatrix::diag(&[2.0, 1.0, -0.5]);
        let t = matrix_sigma_gradient(&a, 2).unwrap();
        let expect = [0.5, 1.5, 3.0];
        for i in 0..3 {
            assert!((t.get(i, i) - expect[i]).abs() < 1e-13);
            for j in 0..3 {
                if i != j {
                    assert!(t.get(i, j).abs() < 1e-13);
                }
            }
        }
    }

    /// Per-entry finite differences of σₖ(A); oracle for the Newton transform.
    fn fd_matrix_sigma_gradient(a: &SymMatrix, k: usize, step: f64) -> SymMatrix {
        let n = a.dim();
        SymMatrix::from_fn(n, |i, j| {
            // perturb entry (i,j): symmetric matrices share (i,j) and (j,i),
            // but dsigma/da_ij treats a_ij as an independent coordinate, so
            // perturb one triangle entry and halve for off-diagonals.
            let mut plus = a.clone();
            let mut minus = a.clone();
            plus.set(i, j, a.get(i, j) + step);
            minus.set(i, j, a.get(i, j) - step);
            let sp = sigma(k, &eigen_tuple(&plus)).unwrap();
            let sm = sigma(k, &eigen_tuple(&minus)).unwrap();
            let d = (sp - sm) / (2.0 * step);
            if i == j {
                d
            } else {
                d / 2.0
            }
        })
    }

    #[test]
    fn matrix_gradient_matches_fd() {
        let a = SymMatrix::from_fn(3, |i, j| {
            if i == j {
                2.0 + i as f64 * 0.3
            } else {
                0.2 / (1.0 + (i + j) as f64)
            }
        });
        let t = matrix_sigma_gradient(&a, 2).unwrap();
        let fd = fd_matrix_sigma_gradient(&a, 2, 1e-6);
        for i in 0..3 {
            for j in 0..3 {
                let denom = fd.get(i, j).abs().max(1.0);
                assert!((t.get(i, j) - fd.get(i, j)).abs() / denom < 1e-6);
            }
        }
    }

    /// Second-order central FD of f_value along A + tB with Richardson
    /// extrapolation; oracle for second_directional.
    fn fd_second_directional(a: &SymMatrix, b: &SymMatrix, k: usize) -> f64 {
        let eval = |t: f64| -> f64 {
            let m = a.add(&b.scale(t));
            f_value(&eigen_tuple(&m), k).unwrap()
        };
        let d2 = |h: f64| (eval(h) - 2.0 * eval(0.0) + eval(-h)) / (h * h);
        let h = 1e-3;
        let c1 = d2(h);
        let c2 = d2(h / 2.0);
        (4.0 * c2 - c1) / 3.0
    }

    #[test]
    fn second_directional_examples() {
        let n = 3;
        assert_eq!(second_directional(&SymMatrix::identity(n), &SymMatrix::zeros(n), 2).unwrap(), 0.0);
        let a = SymMatrix::diag(&[2.0, 1.0]);
        let b = SymMatrix::diag(&[1.0, 0.0]);
        let got = second_directional(&a, &b, 2).unwrap();
        let oracle = fd_second_directional(&a, &b, 2);
        assert!((got - oracle).abs() < 1e-7, "got {got}, oracle {oracle}");
    }

    #[test]
    fn second_directional_concavity_sampled() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let mut checked = 0;
        while checked < 100 {
            let n = 3;
            let a = SymMatrix::from_fn(n, |i, j| {
                if i == j {
                    rng.gen_range(0.5..3.0)
                } else {
                    rng.gen_range(-0.3..0.3)
                }
            });
            let lam = eigen_tuple(&a);
            if cone_classify(&lam, 2, CONE_TOL).unwrap().class != ConeClass::InteriorOfGammaK {
                continue;
            }
            let b = SymMatrix::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let val = second_directional(&a, &b, 2).unwrap();
            assert!(val <= 1e-12, "concavity violated: {val}");
            let oracle = fd_second_directional(&a, &b, 2);
            let denom = oracle.abs().max(1e-3);
            assert!((val - oracle).abs() / denom < 1e-4, "val {val} oracle {oracle}");
            checked += 1;
        }
    }

    #[test]
    fn second_directional_repeated_eigenvalues() {
        // coincident eigenvalues exercise the closed-form divided difference
        let a = SymMatrix::diag(&[1.5, 1.5, 1.5]);
        let b = SymMatrix::from_fn(3, |i, j| if i == j { 0.3 } else { 0.7 });
        let got = second_directional(&a, &b, 2).unwrap();
        let oracle = fd_second_directional(&a, &b, 2);
        assert!((got - oracle).abs() < 1e-6);
    }

    #[test]
    fn andrews_gerhardt_examples() {
        let kappa = et(&[2.0, 1.0, 0.5]);
        let zero = SymMatrix::zeros(3);
        assert_eq!(andrews_gerhardt_margin(&kappa, &zero, 2, &[1, 2]).unwrap(), 0.0);
        // J empty: reduces to concavity
        let b = SymMatrix::from_fn(3, |i, j| 0.3 * (i as f64 - j as f64 + 1.0));
        let m = andrews_gerhardt_margin(&kappa, &b, 2, &[]).unwrap();
        assert!(m >= -1e-12);
        // degenerate gap
        let flat = et(&[1.0, 1.0, 0.5]);
        assert!(matches!(
            andrews_gerhardt_margin(&flat, &b, 2, &[1]),
            Err(Error::DegenerateGap(_))
        ));
    }

    #[test]
    fn andrews_gerhardt_sampled() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        while checked < 500 {
            let mut vals = [
                rng.gen_range(0.1..3.0),
                rng.gen_range(0.1..3.0),
                rng.gen_range(-0.5..3.0),
            ];
            vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
            if vals[0] - vals[1] < 1e-3 || vals[0] - vals[2] < 1e-3 {
                continue;
            }
            let kappa = et(&vals);
            if cone_classify(&kappa, 2, CONE_TOL).unwrap().class != ConeClass::InteriorOfGammaK {
                continue;
            }
            let b = SymMatrix::from_fn(3, |_, _| rng.gen_range(-1.0..1.0));
            let m = andrews_gerhardt_margin(&kappa, &b, 2, &[1, 2]).unwrap();
            assert!(m >= -1e-10, "margin {m} at kappa {vals:?}");
            checked += 1;
        }
    }
}
