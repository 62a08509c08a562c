//! Scoring recovered lifted pairs against ground truth: the balanced scaling
//! that resolves the inherent `(h, m) -> (beta h, m / beta)` ambiguity,
//! rank-1 factor extraction, and the success predicate.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermitian::{top_eigpair, C64, HermitianMatrix, LiftedPair};

/// Success threshold on the lifted relative error: strictly below 1%.
pub const DEFAULT_SUCCESS_THRESHOLD: f64 = 0.01;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RecoveryReport {
    /// Balancing scale `alpha = sqrt(Tr M / Tr H)` of the truth.
    pub alpha: f64,
    /// Frobenius distance to the balanced truth over its norm, in the lifted
    /// block space. This is the gating error.
    pub relative_error_lifted: f64,
    /// Diagnostic error of the extracted factors against the balanced truth
    /// vectors, minimized over a global phase per factor.
    pub relative_error_vectors: f64,
    /// `lambda_max / Tr` of the recovered H block (1 for exact rank 1).
    pub rank1_ratio_h: f64,
    /// `lambda_max / Tr` of the recovered M block.
    pub rank1_ratio_m: f64,
    pub success: bool,
}

/// The balanced pair `(alpha h h*, m m* / alpha)` with
/// `alpha = sqrt(|m|^2 / |h|^2)`, whose blocks share the trace `|h| |m|`.
pub fn balanced_truth(h: &DVector<C64>, m_vec: &DVector<C64>) -> Result<LiftedPair> {
    let h2 = h.norm_squared();
    let m2 = m_vec.norm_squared();
    if h2 == 0.0 || m2 == 0.0 {
        return Err(Error::InvalidInput(
            "balanced truth requires nonzero vectors".into(),
        ));
    }
    let alpha = (m2 / h2).sqrt();
    Ok(LiftedPair::new(
        HermitianMatrix::from_rank1(h).scale(alpha),
        HermitianMatrix::from_rank1(m_vec).scale(1.0 / alpha),
    ))
}

/// Top factor `sqrt(lambda_max) v_max` (phase-normalized) and the rank-1
/// ratio `lambda_max / Tr`.
pub fn extract_rank1(h: &HermitianMatrix) -> Result<(DVector<C64>, f64)> {
    let trace = h.trace();
    let min_eig = h.min_eigenvalue()?;
    if min_eig < -1e-8 * h.norm_fro().max(1.0) {
        return Err(Error::InvalidInput(format!(
            "matrix is not PSD within tolerance: min eigenvalue {min_eig}"
        )));
    }
    let (lam, v) = top_eigpair(h)?;
    let lam = lam.max(0.0);
    let factor = v * C64::new(lam.sqrt(), 0.0);
    let ratio = if trace > 0.0 { lam / trace } else { 0.0 };
    Ok((factor, ratio.clamp(0.0, 1.0)))
}

/// `sqrt(|H - H~|^2 + |M - M~|^2) / sqrt(|H~|^2 + |M~|^2)` against the
/// balanced truth; invariant under `(h, m) -> (beta h, m / beta)`.
pub fn relative_error(
    result: &LiftedPair,
    truth_h: &DVector<C64>,
    truth_m: &DVector<C64>,
) -> Result<f64> {
    let balanced = balanced_truth(truth_h, truth_m)?;
    let num = result.distance(&balanced)?;
    Ok(num / balanced.norm_fro())
}

/// Strict comparison per the success rule: an error exactly at the threshold
/// does not count.
pub fn is_success(err: f64, threshold: f64) -> bool {
    err < threshold
}

/// Phase-aligned relative distance between an extracted factor and a target
/// vector: `min_phi |v - e^{i phi} t| / |t|`.
fn vector_error(v: &DVector<C64>, target: &DVector<C64>) -> f64 {
    let inner: C64 = target.dotc(v); // sum conj(t_i) v_i
    let mag = inner.norm();
    let phase = if mag > 0.0 {
        inner / C64::new(mag, 0.0)
    } else {
        C64::new(1.0, 0.0)
    };
    let aligned = v * phase.conj();
    (aligned - target).norm() / target.norm().max(f64::MIN_POSITIVE)
}

/// Full report for a recovered pair against ground truth.
pub fn report(
    h_hat: &HermitianMatrix,
    m_hat: &HermitianMatrix,
    truth_h: &DVector<C64>,
    truth_m: &DVector<C64>,
    threshold: f64,
) -> Result<RecoveryReport> {
    let h2 = truth_h.norm_squared();
    let m2 = truth_m.norm_squared();
    if h2 == 0.0 || m2 == 0.0 {
        return Err(Error::InvalidInput("zero ground truth".into()));
    }
    let alpha = (m2 / h2).sqrt();
    let pair = LiftedPair::new(h_hat.clone(), m_hat.clone());
    let err_lifted = relative_error(&pair, truth_h, truth_m)?;

    let (vh, ratio_h) = extract_rank1(h_hat)?;
    let (vm, ratio_m) = extract_rank1(m_hat)?;
    let h_bal = truth_h * C64::new(alpha.sqrt(), 0.0);
    let m_bal = truth_m * C64::new(1.0 / alpha.sqrt(), 0.0);
    let eh = vector_error(&vh, &h_bal);
    let em = vector_error(&vm, &m_bal);
    let err_vectors = ((eh * eh * h_bal.norm_squared() + em * em * m_bal.norm_squared())
        / (h_bal.norm_squared() + m_bal.norm_squared()))
    .sqrt();

    Ok(RecoveryReport {
        alpha,
        relative_error_lifted: err_lifted,
        relative_error_vectors: err_vectors,
        rank1_ratio_h: ratio_h,
        rank1_ratio_m: ratio_m,
        success: is_success(err_lifted, threshold),
    })
}
