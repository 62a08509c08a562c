//! ADMM solver for the lifted trace-minimization program
//!
//! ```text
//! minimize   Tr(X1) + Tr(X2)
//! subject to <b_l b_l^*, X1> <c_l c_l^*, X2> >= delta_l,  l = 1..m
//!            X1 >= 0, X2 >= 0
//! ```
//!
//! The splitting introduces `u_{j,l} = <a_l a_l^*, X_j>` and copies
//! `Z_j = X_j`, giving four closed-form blocks per iteration:
//! an X-update through a linear solve whose SPD operator
//! `A_j = rho1 sum_l vec(a_l a_l^*) vec(a_l a_l^*)^T + rho2 I` is factored
//! once, a Z-update by PSD projection, a u-update by exact hyperbola
//! projection, and dual ascent on `alpha_j` and `P_j`. The linear system is
//! posed in the isometric real Hermitian basis so `A_j` is real symmetric
//! positive definite.
//!
//! Stopping uses standard ADMM residuals: the splitting residual
//! `|X - Z|_F`, the measurement residual `|u - A(X)|`, and the dual residual
//! `rho2 |Z - Z_prev|_F`, each compared against an absolute plus relative
//! threshold.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::hermitian::{C64, HermitianMatrix, HermitianVecBasis};
use crate::hyperbola::project_set_c;
use crate::measurements::{lifted_forward, ProblemInstance};
use crate::recovery::RecoveryReport;

/// Result file schema version.
pub const RESULT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Penalty on the measurement splitting `u = A(X)`.
    pub rho1: f64,
    /// Penalty on the PSD splitting `X = Z`.
    pub rho2: f64,
    pub max_iters: usize,
    pub tol_abs: f64,
    pub tol_rel: f64,
    /// Progress/reporting cadence; 0 keeps every iteration.
    pub log_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho1: 1.0,
            rho2: 1.0,
            max_iters: 5000,
            tol_abs: 1e-6,
            tol_rel: 1e-5,
            log_every: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho1 >= 0.0 && self.rho1.is_finite()) {
            return Err(Error::InvalidInput("rho1 must be finite and >= 0".into()));
        }
        if !(self.rho2 > 0.0 && self.rho2.is_finite()) {
            return Err(Error::InvalidInput("rho2 must be finite and > 0".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be positive".into()));
        }
        if !(self.tol_abs > 0.0) || !(self.tol_rel > 0.0) {
            return Err(Error::InvalidInput("tolerances must be positive".into()));
        }
        Ok(())
    }
}

/// All primal and dual iterates of the splitting.
#[derive(Clone, Debug)]
pub struct SolverState {
    pub x1: HermitianMatrix,
    pub x2: HermitianMatrix,
    pub z1: HermitianMatrix,
    pub z2: HermitianMatrix,
    pub p1: HermitianMatrix,
    pub p2: HermitianMatrix,
    pub u1: DVector<f64>,
    pub u2: DVector<f64>,
    pub alpha1: DVector<f64>,
    pub alpha2: DVector<f64>,
    pub z1_prev: HermitianMatrix,
    pub z2_prev: HermitianMatrix,
    pub iter: usize,
}

impl SolverState {
    /// Zero initialization; the method needs no solution estimate.
    pub fn zero(k: usize, n: usize, m: usize) -> Self {
        Self {
            x1: HermitianMatrix::zeros(k),
            x2: HermitianMatrix::zeros(n),
            z1: HermitianMatrix::zeros(k),
            z2: HermitianMatrix::zeros(n),
            p1: HermitianMatrix::zeros(k),
            p2: HermitianMatrix::zeros(n),
            u1: DVector::zeros(m),
            u2: DVector::zeros(m),
            alpha1: DVector::zeros(m),
            alpha2: DVector::zeros(m),
            z1_prev: HermitianMatrix::zeros(k),
            z2_prev: HermitianMatrix::zeros(n),
            iter: 0,
        }
    }
}

struct FactorSide {
    basis: HermitianVecBasis,
    chol: Cholesky<f64, Dyn>,
}

/// Factored X-update operators, built once per solve.
pub struct XUpdateFactorization {
    b_side: FactorSide,
    c_side: FactorSide,
    rho1: f64,
    rho2: f64,
    m: usize,
}

/// The SPD operator `A` of one block in the real Hermitian basis.
fn xupdate_matrix(
    rows: impl Iterator<Item = DVector<C64>>,
    dim: usize,
    rho1: f64,
    rho2: f64,
) -> Result<DMatrix<f64>> {
    let basis = HermitianVecBasis::new(dim);
    let len = basis.vec_len();
    let mut a = DMatrix::<f64>::identity(len, len) * rho2;
    if rho1 > 0.0 {
        for row in rows {
            let v = basis.to_real_vec(&HermitianMatrix::from_rank1(&row))?;
            // rank-1 accumulation: A += rho1 * v v^T
            a.ger(rho1, &v, &v, 1.0);
        }
    }
    Ok(a)
}

fn factor_side(
    rows: impl Iterator<Item = DVector<C64>>,
    dim: usize,
    rho1: f64,
    rho2: f64,
) -> Result<FactorSide> {
    let a = xupdate_matrix(rows, dim, rho1, rho2)?;
    let chol = Cholesky::new(a).ok_or_else(|| {
        Error::Factorization("X-update operator is not positive definite".into())
    })?;
    Ok(FactorSide {
        basis: HermitianVecBasis::new(dim),
        chol,
    })
}

/// Builds and factors both X-update operators. `A_j` only needs to be
/// factored once per instance and penalty choice.
pub fn precompute_xupdate(
    instance: &ProblemInstance,
    config: &SolverConfig,
) -> Result<XUpdateFactorization> {
    config.validate()?;
    let ens = &instance.ensemble;
    Ok(XUpdateFactorization {
        b_side: factor_side(
            (0..ens.m).map(|l| ens.row_b(l)),
            ens.k,
            config.rho1,
            config.rho2,
        )?,
        c_side: factor_side(
            (0..ens.m).map(|l| ens.row_c(l)),
            ens.n,
            config.rho1,
            config.rho2,
        )?,
        rho1: config.rho1,
        rho2: config.rho2,
        m: ens.m,
    })
}

fn x_update_side(
    side: &FactorSide,
    weights: &DVector<f64>,
    z: &HermitianMatrix,
    p: &HermitianMatrix,
    weighted_sum: HermitianMatrix,
    rho2: f64,
) -> Result<HermitianMatrix> {
    let _ = weights;
    let rhs_mat = weighted_sum
        .add(&z.sub(p)?.scale(rho2))?
        .add_scaled_identity(-1.0);
    let rhs = side.basis.to_real_vec(&rhs_mat)?;
    let sol = side.chol.solve(&rhs);
    side.basis.from_real_vec(&sol)
}

/// Solves the X-block stationarity equation
/// `I + rho1 sum_l (<a a*, X> - u_l - alpha_l) a a* + rho2 (X - Z + P) = 0`
/// for both blocks via the precomputed factorization.
pub fn x_update(
    state: &SolverState,
    fact: &XUpdateFactorization,
    instance: &ProblemInstance,
    config: &SolverConfig,
) -> Result<(HermitianMatrix, HermitianMatrix)> {
    if fact.rho1 != config.rho1 || fact.rho2 != config.rho2 || fact.m != instance.m() {
        return Err(Error::InvalidInput(
            "factorization does not match instance/config".into(),
        ));
    }
    let w1 = (&state.u1 + &state.alpha1) * config.rho1;
    let w2 = (&state.u2 + &state.alpha2) * config.rho1;
    let s1 = instance.ensemble.weighted_sum_b(&w1)?;
    let s2 = instance.ensemble.weighted_sum_c(&w2)?;
    let x1 = x_update_side(&fact.b_side, &w1, &state.z1, &state.p1, s1, config.rho2)?;
    let x2 = x_update_side(&fact.c_side, &w2, &state.z2, &state.p2, s2, config.rho2)?;
    Ok((x1, x2))
}

/// PSD projection of `X_j + P_j`.
pub fn z_update(state: &SolverState) -> Result<(HermitianMatrix, HermitianMatrix)> {
    let z1 = crate::hermitian::project_psd(&state.x1.add(&state.p1)?)?;
    let z2 = crate::hermitian::project_psd(&state.x2.add(&state.p2)?)?;
    Ok((z1, z2))
}

fn u_update_with(
    q1: &DVector<f64>,
    q2: &DVector<f64>,
    state: &SolverState,
    instance: &ProblemInstance,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let xi1 = q1 - &state.alpha1;
    let xi2 = q2 - &state.alpha2;
    let (u1, u2) = project_set_c(
        xi1.as_slice(),
        xi2.as_slice(),
        instance.delta.as_slice(),
    )?;
    Ok((DVector::from_vec(u1), DVector::from_vec(u2)))
}

/// Projects the targets `<a a*, X> - alpha` componentwise onto the
/// hyperbolic set `{u1 u2 >= delta_l, u1 >= 0}`.
pub fn u_update(
    state: &SolverState,
    instance: &ProblemInstance,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let (q1, q2) = lifted_forward(&instance.ensemble, &state.x1, &state.x2)?;
    u_update_with(&q1, &q2, state, instance)
}

#[allow(clippy::type_complexity)]
fn dual_update_with(
    q1: &DVector<f64>,
    q2: &DVector<f64>,
    state: &SolverState,
) -> Result<(DVector<f64>, DVector<f64>, HermitianMatrix, HermitianMatrix)> {
    let alpha1 = &state.alpha1 + &state.u1 - q1;
    let alpha2 = &state.alpha2 + &state.u2 - q2;
    let p1 = state.p1.add(&state.x1.sub(&state.z1)?)?;
    let p2 = state.p2.add(&state.x2.sub(&state.z2)?)?;
    Ok((alpha1, alpha2, p1, p2))
}

/// Dual ascent: `alpha += u - A(X)` and `P += X - Z`.
#[allow(clippy::type_complexity)]
pub fn dual_update(
    state: &SolverState,
    instance: &ProblemInstance,
) -> Result<(DVector<f64>, DVector<f64>, HermitianMatrix, HermitianMatrix)> {
    let (q1, q2) = lifted_forward(&instance.ensemble, &state.x1, &state.x2)?;
    dual_update_with(&q1, &q2, state)
}

fn residuals_with(
    q1: &DVector<f64>,
    q2: &DVector<f64>,
    state: &SolverState,
    config: &SolverConfig,
) -> Result<(f64, f64, f64)> {
    let primal_split = (state.x1.sub(&state.z1)?.norm_fro().powi(2)
        + state.x2.sub(&state.z2)?.norm_fro().powi(2))
    .sqrt();
    let primal_meas =
        ((&state.u1 - q1).norm_squared() + (&state.u2 - q2).norm_squared()).sqrt();
    let dual = config.rho2
        * (state.z1.sub(&state.z1_prev)?.norm_fro().powi(2)
            + state.z2.sub(&state.z2_prev)?.norm_fro().powi(2))
        .sqrt();
    Ok((primal_split, primal_meas, dual))
}

/// Splitting, measurement, and dual residuals of the current state.
pub fn residuals(
    state: &SolverState,
    instance: &ProblemInstance,
    config: &SolverConfig,
) -> Result<(f64, f64, f64)> {
    let (q1, q2) = lifted_forward(&instance.ensemble, &state.x1, &state.x2)?;
    residuals_with(&q1, &q2, state, config)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ResidualRecord {
    pub iter: usize,
    pub primal_split: f64,
    pub primal_meas: f64,
    pub dual: f64,
}

#[derive(Clone, Debug)]
pub struct SolverResult {
    pub h_hat: HermitianMatrix,
    pub m_hat: HermitianMatrix,
    pub iters: usize,
    pub converged: bool,
    pub residual_history: Vec<ResidualRecord>,
    /// `Tr H_hat + Tr M_hat` of the returned pair.
    pub objective: f64,
    pub wall_time: f64,
    pub config: SolverConfig,
}

/// Runs the ADMM loop from zero initialization until the residual thresholds
/// or the iteration cap. Deterministic given instance and config.
pub fn solve(instance: &ProblemInstance, config: &SolverConfig) -> Result<SolverResult> {
    solve_with_progress(instance, config, |_| {})
}

/// Like [`solve`], invoking `progress` after each recorded iteration.
pub fn solve_with_progress(
    instance: &ProblemInstance,
    config: &SolverConfig,
    mut progress: impl FnMut(&ResidualRecord),
) -> Result<SolverResult> {
    config.validate()?;
    let start = Instant::now();
    let (m, k, n) = (instance.m(), instance.k(), instance.n());
    let fact = precompute_xupdate(instance, config)?;
    let mut state = SolverState::zero(k, n, m);
    let mut history = Vec::new();
    let mut converged = false;

    let n_tot = ((k * k + n * n + 2 * m) as f64).sqrt();

    while state.iter < config.max_iters {
        let (x1, x2) = x_update(&state, &fact, instance, config)?;
        state.x1 = x1;
        state.x2 = x2;

        state.z1_prev = std::mem::replace(&mut state.z1, HermitianMatrix::zeros(0));
        state.z2_prev = std::mem::replace(&mut state.z2, HermitianMatrix::zeros(0));
        let prev = SolverState {
            z1: state.z1_prev.clone(),
            z2: state.z2_prev.clone(),
            ..state.clone()
        };
        let (z1, z2) = z_update(&prev)?;
        state.z1 = z1;
        state.z2 = z2;

        let (q1, q2) = lifted_forward(&instance.ensemble, &state.x1, &state.x2)?;
        let (u1, u2) = u_update_with(&q1, &q2, &state, instance)?;
        state.u1 = u1;
        state.u2 = u2;

        let (alpha1, alpha2, p1, p2) = dual_update_with(&q1, &q2, &state)?;
        state.alpha1 = alpha1;
        state.alpha2 = alpha2;
        state.p1 = p1;
        state.p2 = p2;

        state.iter += 1;
        let (ps, pm, dual) = residuals_with(&q1, &q2, &state, config)?;
        let record = ResidualRecord {
            iter: state.iter,
            primal_split: ps,
            primal_meas: pm,
            dual,
        };
        history.push(record);
        progress(&record);

        let scale_primal = {
            let x_norm =
                (state.x1.norm_fro().powi(2) + state.x2.norm_fro().powi(2)).sqrt();
            let z_norm =
                (state.z1.norm_fro().powi(2) + state.z2.norm_fro().powi(2)).sqrt();
            let u_norm =
                (state.u1.norm_squared() + state.u2.norm_squared()).sqrt();
            x_norm.max(z_norm).max(u_norm)
        };
        let scale_dual = (config.rho1.powi(2)
            * (state.alpha1.norm_squared() + state.alpha2.norm_squared())
            + config.rho2.powi(2)
                * (state.p1.norm_fro().powi(2) + state.p2.norm_fro().powi(2)))
        .sqrt();
        let eps_pri = config.tol_abs * n_tot + config.tol_rel * scale_primal;
        let eps_dual = config.tol_abs * n_tot + config.tol_rel * scale_dual;
        if ps.max(pm) <= eps_pri && dual <= eps_dual {
            converged = true;
            break;
        }
    }

    // The Z-iterates are exactly PSD. Rebalance the returned pair to the
    // optimal scaling (beta Z1, Z2 / beta): the exact minimizer has equal
    // traces, the constraints depend only on the product of the blocks, and
    // the rescaling never increases the objective.
    let tr1 = state.z1.trace();
    let tr2 = state.z2.trace();
    let (h_hat, m_hat) = if tr1 > 0.0 && tr2 > 0.0 {
        let beta = (tr2 / tr1).sqrt();
        (state.z1.scale(beta), state.z2.scale(1.0 / beta))
    } else {
        (state.z1.clone(), state.z2.clone())
    };
    let objective = h_hat.trace() + m_hat.trace();

    Ok(SolverResult {
        h_hat,
        m_hat,
        iters: state.iter,
        converged,
        residual_history: history,
        objective,
        wall_time: start.elapsed().as_secs_f64(),
        config: *config,
    })
}

// ---------------------------------------------------------------------------
// Result file format.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct HermitianFile {
    dim: usize,
    /// Dense row-major entries, re/im interleaved.
    entries: Vec<f64>,
}

fn hermitian_to_file(h: &HermitianMatrix) -> HermitianFile {
    let d = h.dim();
    let mut entries = Vec::with_capacity(2 * d * d);
    for i in 0..d {
        for j in 0..d {
            entries.push(h.entry(i, j).re);
            entries.push(h.entry(i, j).im);
        }
    }
    HermitianFile { dim: d, entries }
}

#[derive(Serialize, Deserialize)]
struct ResultFile {
    version: u32,
    config: SolverConfig,
    objective: f64,
    converged: bool,
    iters: usize,
    residual_history: Vec<ResidualRecord>,
    #[serde(rename = "H_hat")]
    h_hat: HermitianFile,
    #[serde(rename = "M_hat")]
    m_hat: HermitianFile,
    wall_time: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    recovery: Option<RecoveryReport>,
}

/// Serializes a result document; the residual history is thinned to every
/// `log_every`-th record (plus the final one) when `log_every > 0`.
pub fn result_to_json(result: &SolverResult, recovery: Option<&RecoveryReport>) -> String {
    let every = result.config.log_every;
    let last = result.residual_history.len();
    let history: Vec<ResidualRecord> = result
        .residual_history
        .iter()
        .enumerate()
        .filter(|(i, _)| every == 0 || (i + 1) % every == 0 || i + 1 == last)
        .map(|(_, r)| *r)
        .collect();
    let file = ResultFile {
        version: RESULT_VERSION,
        config: result.config,
        objective: result.objective,
        converged: result.converged,
        iters: result.iters,
        residual_history: history,
        h_hat: hermitian_to_file(&result.h_hat),
        m_hat: hermitian_to_file(&result.m_hat),
        wall_time: result.wall_time,
        recovery: recovery.copied(),
    };
    serde_json::to_string(&file).expect("result serialization cannot fail")
}

pub fn write_result(
    result: &SolverResult,
    recovery: Option<&RecoveryReport>,
    path: &Path,
) -> Result<()> {
    std::fs::write(path, result_to_json(result, recovery)).map_err(|e| Error::io(path, e))
}
