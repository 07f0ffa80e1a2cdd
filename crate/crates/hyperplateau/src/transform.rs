//! The k = n change of variables U = u² + |x|² carrying the curvature
//! equation to a Monge–Ampère equation det D²U = Ψ(x, U, DU), and its
//! inverse. The determinant identity det D²U = 2ⁿ wⁿ⁺² det A[u] makes the
//! two residuals equivalent on admissible jets.

use crate::error::{Error, Result};
use crate::expr::RhsSpec;
use crate::graphgeom::PointJet;
use crate::linalg::SymMatrix;

/// Second-order jet of the transformed unknown U at a point x.
#[derive(Debug, Clone)]
pub struct MaJet {
    pub x: Vec<f64>,
    pub u_big: f64,
    pub du_big: Vec<f64>,
    pub d2u_big: SymMatrix,
}

/// U = u² + |x|², DU = 2u Du + 2x, D²U = 2 Du⊗Du + 2u D²u + 2I.
pub fn to_ma(jet: &PointJet) -> MaJet {
    let n = jet.dim();
    let u_big = jet.u * jet.u + crate::linalg::norm_sq(&jet.x);
    let du_big: Vec<f64> = (0..n).map(|i| 2.0 * jet.u * jet.du[i] + 2.0 * jet.x[i]).collect();
    let d2u_big = SymMatrix::from_fn(n, |i, j| {
        let delta = if i == j { 2.0 } else { 0.0 };
        2.0 * jet.du[i] * jet.du[j] + 2.0 * jet.u * jet.d2u.get(i, j) + delta
    });
    MaJet { x: jet.x.clone(), u_big, du_big, d2u_big }
}

/// Inverse of `to_ma`; requires U > |x|² so that u = √(U − |x|²) > 0.
pub fn from_ma(jet: &MaJet) -> Result<PointJet> {
    let n = jet.x.len();
    let u_sq = jet.u_big - crate::linalg::norm_sq(&jet.x);
    if u_sq <= 0.0 {
        return Err(Error::Domain(format!(
            "transformed value U = {} does not exceed |x|²; height is not recoverable",
            jet.u_big
        )));
    }
    let u = u_sq.sqrt();
    let du: Vec<f64> = (0..n).map(|i| (jet.du_big[i] - 2.0 * jet.x[i]) / (2.0 * u)).collect();
    let d2u = SymMatrix::from_fn(n, |i, j| {
        let delta = if i == j { 2.0 } else { 0.0 };
        (jet.d2u_big.get(i, j) - delta - 2.0 * du[i] * du[j]) / (2.0 * u)
    });
    PointJet::new(jet.x.clone(), u, du, d2u)
}

/// Q(x, U, DU) = (|DU|² − 4 x·DU + 4U) / (4U − 4|x|²); equals w² on jets in
/// the range of the transform.
pub fn q_factor(x: &[f64], u_big: f64, du_big: &[f64]) -> Result<f64> {
    let xx = crate::linalg::norm_sq(x);
    let denom = 4.0 * (u_big - xx);
    if denom <= 0.0 {
        return Err(Error::Domain("Q-factor undefined: U ≤ |x|²".into()));
    }
    let xdu: f64 = x.iter().zip(du_big).map(|(a, b)| a * b).sum();
    Ok((crate::linalg::norm_sq(du_big) - 4.0 * xdu + 4.0 * u_big) / denom)
}

/// Transformed right-hand side Ψ = 2ⁿ Q^{(n+2)/2} ψ(x, u)ⁿ with u = √(U−|x|²).
pub fn psi_to_ma_rhs(psi: &RhsSpec, x: &[f64], u_big: f64, du_big: &[f64]) -> Result<f64> {
    let n = x.len() as i32;
    let u_sq = u_big - crate::linalg::norm_sq(x);
    if u_sq <= 0.0 {
        return Err(Error::Domain("transformed right-hand side needs U > |x|²".into()));
    }
    let q = q_factor(x, u_big, du_big)?;
    let psi_val = psi.eval(x, u_sq.sqrt())?;
    Ok(2.0_f64.powi(n) * q.powf((n as f64 + 2.0) / 2.0) * psi_val.powi(n))
}

/// det D²U − Ψ. Branch selection: only tr D²U > 0 is enforced here, because a
/// root with det = Ψ > 0 and positive trace is automatically positive
/// definite, while intermediate Newton iterates can pass through indefinite
/// Hessians near the cut boundary without harm.
pub fn ma_residual(jet: &MaJet, psi: &RhsSpec) -> Result<f64> {
    if jet.d2u_big.trace() <= 0.0 {
        return Err(Error::Domain("transformed Hessian D²U is on the concave branch".into()));
    }
    let rhs = psi_to_ma_rhs(psi, &jet.x, jet.u_big, &jet.du_big)?;
    Ok(jet.d2u_big.det() - rhs)
}
