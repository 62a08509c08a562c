//! Problem-instance generation: subspace matrices, ground-truth vectors,
//! circular convolution, phaseless Fourier data, and the lifted measurement
//! rows consumed by the solver.
//!
//! Two measurement ensembles are first class. `fourier-convolution` follows
//! the physical model `y = |F(w (*) x)|` with `w = B h`, `x = C m` and row
//! vectors `b_l^* = l-th row of sqrt(m) F B`; `direct-gaussian` draws the
//! rows directly as `b_l = sqrt(m) * (l-th row of B)`, which for a Gaussian
//! `B` with `Normal(0, 1/m)` entries makes `b_l, c_l ~ Normal(0, I)` and
//! sets `y_l = |<b_l, h><c_l, m>| / sqrt(m)` without the Fourier mixing.
//! Both ensembles satisfy `m y_l^2 = <b_l b_l^*, h h^*><c_l c_l^*, m m^*>`.
//!
//! All randomness flows from a `ChaCha8` stream seeded with `seed_from_u64`;
//! the draw order is `B` (row-major), `C` (row-major), `h`, then `m`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::hermitian::{C64, HermitianMatrix};

/// Identifier of the RNG scheme recorded in output metadata.
pub const RNG_ID: &str = "chacha8(seed_from_u64); draws: B row-major, C row-major, h, m";

/// Instance file schema version.
pub const INSTANCE_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SubspaceKind {
    /// Entries i.i.d. `Normal(0, 1/m)` (real part; imaginary zero).
    Gaussian,
    /// The first `dim` columns of the `m x m` identity.
    PartialIdentity,
}

impl std::fmt::Display for SubspaceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SubspaceKind::Gaussian => write!(f, "gaussian"),
            SubspaceKind::PartialIdentity => write!(f, "partial-identity"),
        }
    }
}

impl std::str::FromStr for SubspaceKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(SubspaceKind::Gaussian),
            "partial-identity" => Ok(SubspaceKind::PartialIdentity),
            other => Err(Error::InvalidInput(format!(
                "unknown subspace kind `{other}` (expected gaussian|partial-identity)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SubspaceModel {
    pub kind: SubspaceKind,
    pub ambient: usize,
    pub dim: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnsembleModel {
    FourierConvolution,
    DirectGaussian,
}

impl std::fmt::Display for EnsembleModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EnsembleModel::FourierConvolution => write!(f, "fourier-convolution"),
            EnsembleModel::DirectGaussian => write!(f, "direct-gaussian"),
        }
    }
}

impl std::str::FromStr for EnsembleModel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fourier-convolution" => Ok(EnsembleModel::FourierConvolution),
            "direct-gaussian" => Ok(EnsembleModel::DirectGaussian),
            other => Err(Error::InvalidInput(format!(
                "unknown ensemble model `{other}` (expected fourier-convolution|direct-gaussian)"
            ))),
        }
    }
}

/// The `m` measurement row pairs `(b_l, c_l)` in matrix form.
///
/// Rows are stored adjointed: row `l` of `b_adj` is `b_l^*`, so `b_adj * h`
/// stacks the inner products `<b_l, h>`.
#[derive(Clone, Debug)]
pub struct MeasurementEnsemble {
    pub m: usize,
    pub k: usize,
    pub n: usize,
    pub model: EnsembleModel,
    b_adj: DMatrix<C64>,
    c_adj: DMatrix<C64>,
}

impl MeasurementEnsemble {
    /// Derives the measurement rows from subspace matrices per the model.
    pub fn from_subspaces(
        model: EnsembleModel,
        b: &DMatrix<C64>,
        c: &DMatrix<C64>,
    ) -> Result<Self> {
        let m = b.nrows();
        if c.nrows() != m {
            return Err(Error::DimensionMismatch(format!(
                "subspace row counts differ: {} vs {}",
                m,
                c.nrows()
            )));
        }
        let (b_adj, c_adj) = match model {
            EnsembleModel::FourierConvolution => (dft_rows_adj(b), dft_rows_adj(c)),
            EnsembleModel::DirectGaussian => {
                let s = (m as f64).sqrt();
                (
                    b.map(|z| z.conj() * s),
                    c.map(|z| z.conj() * s),
                )
            }
        };
        Ok(Self {
            m,
            k: b.ncols(),
            n: c.ncols(),
            model,
            b_adj,
            c_adj,
        })
    }

    /// The row vector `b_l` as a column.
    pub fn row_b(&self, l: usize) -> DVector<C64> {
        self.b_adj.row(l).adjoint()
    }

    /// The row vector `c_l` as a column.
    pub fn row_c(&self, l: usize) -> DVector<C64> {
        self.c_adj.row(l).adjoint()
    }

    /// `<b_l, h>` for all l.
    pub fn inner_b(&self, h: &DVector<C64>) -> Result<DVector<C64>> {
        if h.len() != self.k {
            return Err(Error::DimensionMismatch(format!(
                "h has length {}, expected {}",
                h.len(),
                self.k
            )));
        }
        Ok(&self.b_adj * h)
    }

    /// `<c_l, m>` for all l.
    pub fn inner_c(&self, v: &DVector<C64>) -> Result<DVector<C64>> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "m has length {}, expected {}",
                v.len(),
                self.n
            )));
        }
        Ok(&self.c_adj * v)
    }

    /// `u_l = <b_l b_l^*, H>` for all l.
    pub fn forward_h(&self, h: &HermitianMatrix) -> Result<DVector<f64>> {
        forward_quadratic(&self.b_adj, h)
    }

    /// `v_l = <c_l c_l^*, M>` for all l.
    pub fn forward_m(&self, m: &HermitianMatrix) -> Result<DVector<f64>> {
        forward_quadratic(&self.c_adj, m)
    }

    /// `sum_l w_l b_l b_l^*`.
    pub fn weighted_sum_b(&self, w: &DVector<f64>) -> Result<HermitianMatrix> {
        weighted_outer_sum(&self.b_adj, w)
    }

    /// `sum_l w_l c_l c_l^*`.
    pub fn weighted_sum_c(&self, w: &DVector<f64>) -> Result<HermitianMatrix> {
        weighted_outer_sum(&self.c_adj, w)
    }
}

fn forward_quadratic(adj_rows: &DMatrix<C64>, x: &HermitianMatrix) -> Result<DVector<f64>> {
    let d = adj_rows.ncols();
    if x.dim() != d {
        return Err(Error::DimensionMismatch(format!(
            "matrix dim {} vs row length {}",
            x.dim(),
            d
        )));
    }
    // q_l = (a_l^* X) a_l = sum_j (R X)[l,j] conj(R[l,j]) with R rows a_l^*.
    let t = adj_rows * x.as_matrix();
    let m = adj_rows.nrows();
    let mut out = DVector::zeros(m);
    let mut worst_im = 0.0f64;
    for l in 0..m {
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..d {
            acc += t[(l, j)] * adj_rows[(l, j)].conj();
        }
        worst_im = worst_im.max(acc.im.abs());
        out[l] = acc.re;
    }
    let scale = x.norm_fro().max(1.0) * adj_rows.norm().max(1.0);
    if worst_im > 1e-9 * scale {
        return Err(Error::NotHermitian {
            asymmetry: worst_im,
            tol: 1e-9 * scale,
        });
    }
    Ok(out)
}

fn weighted_outer_sum(adj_rows: &DMatrix<C64>, w: &DVector<f64>) -> Result<HermitianMatrix> {
    let m = adj_rows.nrows();
    if w.len() != m {
        return Err(Error::DimensionMismatch(format!(
            "weight length {} vs {} rows",
            w.len(),
            m
        )));
    }
    // sum_l w_l a_l a_l^* = R^H diag(w) R with R rows a_l^*.
    let mut scaled = adj_rows.clone();
    for l in 0..m {
        let wl = C64::new(w[l], 0.0);
        for j in 0..scaled.ncols() {
            scaled[(l, j)] *= wl;
        }
    }
    HermitianMatrix::from_matrix(adj_rows.adjoint() * scaled)
}

/// Applies the unnormalized DFT (`sqrt(m) F`) to each column of `b` and
/// returns the adjoint-row matrix whose row `l` is `b_l^*`.
fn dft_rows_adj(b: &DMatrix<C64>) -> DMatrix<C64> {
    let m = b.nrows();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    let mut out = DMatrix::zeros(m, b.ncols());
    let mut buf: Vec<C64> = Vec::with_capacity(m);
    for j in 0..b.ncols() {
        buf.clear();
        buf.extend(b.column(j).iter().cloned());
        fft.process(&mut buf);
        for l in 0..m {
            out[(l, j)] = buf[l];
        }
    }
    out
}

/// Circular convolution `(w (*) x)[t] = sum_s w[s] x[(t-s) mod m]`,
/// computed by pointwise multiplication of DFTs.
pub fn circular_convolve(w: &DVector<C64>, x: &DVector<C64>) -> Result<DVector<C64>> {
    if w.len() != x.len() {
        return Err(Error::DimensionMismatch(format!(
            "convolution lengths {} vs {}",
            w.len(),
            x.len()
        )));
    }
    let m = w.len();
    if m == 0 {
        return Err(Error::InvalidInput("empty convolution".into()));
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    let ifft = planner.plan_fft_inverse(m);
    let mut a: Vec<C64> = w.iter().cloned().collect();
    let mut b: Vec<C64> = x.iter().cloned().collect();
    fft.process(&mut a);
    fft.process(&mut b);
    for i in 0..m {
        a[i] *= b[i];
    }
    ifft.process(&mut a);
    let inv_m = 1.0 / m as f64;
    Ok(DVector::from_iterator(m, a.into_iter().map(|z| z * inv_m)))
}

/// Magnitudes of the unitary DFT: `|F z|` with the `1/sqrt(m)` normalization,
/// so Parseval holds exactly.
pub fn unitary_dft_magnitudes(z: &DVector<C64>) -> DVector<f64> {
    let m = z.len();
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(m);
    let mut buf: Vec<C64> = z.iter().cloned().collect();
    fft.process(&mut buf);
    let s = 1.0 / (m as f64).sqrt();
    DVector::from_iterator(m, buf.into_iter().map(|v| v.norm() * s))
}

/// Draws a subspace matrix per the model; deterministic given the rng state.
pub fn gen_subspace(model: &SubspaceModel, rng: &mut ChaCha8Rng) -> Result<DMatrix<C64>> {
    let (m, dim) = (model.ambient, model.dim);
    if dim == 0 || m == 0 {
        return Err(Error::InvalidInput("subspace dimensions must be positive".into()));
    }
    if dim > m {
        return Err(Error::InvalidInput(format!(
            "subspace dim {dim} exceeds ambient {m}"
        )));
    }
    match model.kind {
        SubspaceKind::Gaussian => {
            let scale = 1.0 / (m as f64).sqrt();
            let normal = StandardNormal;
            // row-major draw order
            let data: Vec<C64> = (0..m * dim)
                .map(|_| {
                    let g: f64 = normal.sample(rng);
                    C64::new(g * scale, 0.0)
                })
                .collect();
            Ok(DMatrix::from_row_iterator(m, dim, data))
        }
        SubspaceKind::PartialIdentity => {
            let mut out = DMatrix::zeros(m, dim);
            for j in 0..dim {
                out[(j, j)] = C64::new(1.0, 0.0);
            }
            Ok(out)
        }
    }
}

#[derive(Clone, Debug)]
pub struct Truth {
    pub h: DVector<C64>,
    pub m: DVector<C64>,
}

/// One generated problem: measurement rows, phaseless data `y` and
/// `delta = m y^2`, the subspace matrices, and optional ground truth.
#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub ensemble: MeasurementEnsemble,
    pub subspace_b: DMatrix<C64>,
    pub subspace_c: DMatrix<C64>,
    pub kind_b: SubspaceKind,
    pub kind_c: SubspaceKind,
    pub y: DVector<f64>,
    pub delta: DVector<f64>,
    pub truth: Option<Truth>,
    pub seed: u64,
}

impl ProblemInstance {
    pub fn m(&self) -> usize {
        self.ensemble.m
    }
    pub fn k(&self) -> usize {
        self.ensemble.k
    }
    pub fn n(&self) -> usize {
        self.ensemble.n
    }
}

/// Builds an instance from explicit subspaces and ground truth, deriving
/// `y` per the ensemble model.
#[allow(clippy::too_many_arguments)]
pub fn instance_from_truth(
    subspace_b: DMatrix<C64>,
    subspace_c: DMatrix<C64>,
    kind_b: SubspaceKind,
    kind_c: SubspaceKind,
    model: EnsembleModel,
    h: DVector<C64>,
    m_vec: DVector<C64>,
    seed: u64,
) -> Result<ProblemInstance> {
    let ensemble = MeasurementEnsemble::from_subspaces(model, &subspace_b, &subspace_c)?;
    if h.len() != ensemble.k || m_vec.len() != ensemble.n {
        return Err(Error::DimensionMismatch(format!(
            "truth lengths ({}, {}) vs subspace dims ({}, {})",
            h.len(),
            m_vec.len(),
            ensemble.k,
            ensemble.n
        )));
    }
    let m = ensemble.m;
    let y = match model {
        EnsembleModel::FourierConvolution => {
            let w = &subspace_b * &h;
            let x = &subspace_c * &m_vec;
            let conv = circular_convolve(&w, &x)?;
            unitary_dft_magnitudes(&conv)
        }
        EnsembleModel::DirectGaussian => {
            let bh = ensemble.inner_b(&h)?;
            let cm = ensemble.inner_c(&m_vec)?;
            let s = 1.0 / (m as f64).sqrt();
            DVector::from_fn(m, |l, _| (bh[l] * cm[l]).norm() * s)
        }
    };
    let delta = DVector::from_fn(m, |l, _| m as f64 * y[l] * y[l]);
    Ok(ProblemInstance {
        ensemble,
        subspace_b,
        subspace_c,
        kind_b,
        kind_c,
        y,
        delta,
        truth: Some(Truth { h, m: m_vec }),
        seed,
    })
}

/// Draws subspaces and standard-normal ground truth from `seed`, then forms
/// the instance. Identical seeds produce bit-identical instances.
pub fn gen_instance(
    m: usize,
    k: usize,
    n: usize,
    kind_b: SubspaceKind,
    kind_c: SubspaceKind,
    model: EnsembleModel,
    seed: u64,
) -> Result<ProblemInstance> {
    if m == 0 || k == 0 || n == 0 {
        return Err(Error::InvalidInput("m, k, n must be positive".into()));
    }
    if k > m || n > m {
        return Err(Error::InvalidInput(format!(
            "subspace dims (k={k}, n={n}) must not exceed m={m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = gen_subspace(
        &SubspaceModel {
            kind: kind_b,
            ambient: m,
            dim: k,
        },
        &mut rng,
    )?;
    let c = gen_subspace(
        &SubspaceModel {
            kind: kind_c,
            ambient: m,
            dim: n,
        },
        &mut rng,
    )?;
    let normal = StandardNormal;
    let h = DVector::from_iterator(
        k,
        (0..k).map(|_| C64::new(normal.sample(&mut rng), 0.0)),
    );
    let m_vec = DVector::from_iterator(
        n,
        (0..n).map(|_| C64::new(normal.sample(&mut rng), 0.0)),
    );
    instance_from_truth(b, c, kind_b, kind_c, model, h, m_vec, seed)
}

/// The lifted forward map: `u_l = <b_l b_l^*, H>`, `v_l = <c_l c_l^*, M>`.
pub fn lifted_forward(
    ensemble: &MeasurementEnsemble,
    h: &HermitianMatrix,
    m: &HermitianMatrix,
) -> Result<(DVector<f64>, DVector<f64>)> {
    Ok((ensemble.forward_h(h)?, ensemble.forward_m(m)?))
}

// ---------------------------------------------------------------------------
// Instance file format: a single self-describing JSON document.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    version: u32,
    m: usize,
    k: usize,
    n: usize,
    model: EnsembleModel,
    subspace_b: SubspaceKind,
    subspace_c: SubspaceKind,
    rng: String,
    seed: u64,
    #[serde(rename = "B")]
    b: Vec<f64>,
    #[serde(rename = "C")]
    c: Vec<f64>,
    y: Vec<f64>,
    delta: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    truth: Option<TruthFile>,
}

#[derive(Serialize, Deserialize)]
struct TruthFile {
    h: Vec<f64>,
    m: Vec<f64>,
}

fn complex_matrix_to_interleaved(m: &DMatrix<C64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(2 * m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)].re);
            out.push(m[(i, j)].im);
        }
    }
    out
}

fn interleaved_to_complex_matrix(data: &[f64], rows: usize, cols: usize) -> Result<DMatrix<C64>> {
    if data.len() != 2 * rows * cols {
        return Err(Error::Format(format!(
            "expected {} interleaved floats for a {}x{} complex matrix, got {}",
            2 * rows * cols,
            rows,
            cols,
            data.len()
        )));
    }
    Ok(DMatrix::from_fn(rows, cols, |i, j| {
        let idx = 2 * (i * cols + j);
        C64::new(data[idx], data[idx + 1])
    }))
}

fn complex_vector_to_interleaved(v: &DVector<C64>) -> Vec<f64> {
    v.iter().flat_map(|z| [z.re, z.im]).collect()
}

fn interleaved_to_complex_vector(data: &[f64], len: usize) -> Result<DVector<C64>> {
    if data.len() != 2 * len {
        return Err(Error::Format(format!(
            "expected {} interleaved floats for a complex {}-vector, got {}",
            2 * len,
            len,
            data.len()
        )));
    }
    Ok(DVector::from_fn(len, |i, _| {
        C64::new(data[2 * i], data[2 * i + 1])
    }))
}

pub fn instance_to_json(inst: &ProblemInstance) -> String {
    let file = InstanceFile {
        version: INSTANCE_VERSION,
        m: inst.m(),
        k: inst.k(),
        n: inst.n(),
        model: inst.ensemble.model,
        subspace_b: inst.kind_b,
        subspace_c: inst.kind_c,
        rng: RNG_ID.to_string(),
        seed: inst.seed,
        b: complex_matrix_to_interleaved(&inst.subspace_b),
        c: complex_matrix_to_interleaved(&inst.subspace_c),
        y: inst.y.iter().cloned().collect(),
        delta: inst.delta.iter().cloned().collect(),
        truth: inst.truth.as_ref().map(|t| TruthFile {
            h: complex_vector_to_interleaved(&t.h),
            m: complex_vector_to_interleaved(&t.m),
        }),
    };
    serde_json::to_string(&file).expect("instance serialization cannot fail")
}

/// Parses and validates an instance document: dimensions, `delta = m y^2`,
/// nonnegativity, and the measurement identity at the stored truth.
pub fn instance_from_json(text: &str) -> Result<ProblemInstance> {
    let file: InstanceFile =
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    if file.version != INSTANCE_VERSION {
        return Err(Error::Format(format!(
            "unsupported instance version {}",
            file.version
        )));
    }
    if file.k == 0 || file.n == 0 || file.m == 0 || file.k > file.m || file.n > file.m {
        return Err(Error::Format(format!(
            "invalid dimensions m={}, k={}, n={}",
            file.m, file.k, file.n
        )));
    }
    let b = interleaved_to_complex_matrix(&file.b, file.m, file.k)?;
    let c = interleaved_to_complex_matrix(&file.c, file.m, file.n)?;
    if file.y.len() != file.m || file.delta.len() != file.m {
        return Err(Error::Format(format!(
            "y/delta lengths ({}, {}) do not match m={}",
            file.y.len(),
            file.delta.len(),
            file.m
        )));
    }
    let y = DVector::from_vec(file.y);
    let delta = DVector::from_vec(file.delta);
    if y.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Format("y must be finite and nonnegative".into()));
    }
    for l in 0..file.m {
        let expect = file.m as f64 * y[l] * y[l];
        if (delta[l] - expect).abs() > 1e-9 * expect.max(1.0) || delta[l] < 0.0 {
            return Err(Error::Format(format!(
                "delta[{l}] = {} violates delta = m y^2 (expected {expect})",
                delta[l]
            )));
        }
    }
    let ensemble = MeasurementEnsemble::from_subspaces(file.model, &b, &c)?;
    let truth = match file.truth {
        None => None,
        Some(t) => {
            let h = interleaved_to_complex_vector(&t.h, file.k)?;
            let m_vec = interleaved_to_complex_vector(&t.m, file.n)?;
            let bh = ensemble.inner_b(&h)?;
            let cm = ensemble.inner_c(&m_vec)?;
            let y2_scale = y.iter().map(|v| v * v).fold(0.0f64, f64::max);
            for l in 0..file.m {
                let prod = (bh[l] * cm[l]).norm_sqr() / file.m as f64;
                let y2 = y[l] * y[l];
                if (prod - y2).abs() > 1e-10 * y2.max(1e-6 * y2_scale) {
                    return Err(Error::Format(format!(
                        "stored truth violates the measurement identity at row {l}: \
                         |<b,h><c,m>|^2/m = {prod}, y^2 = {y2}"
                    )));
                }
            }
            Some(Truth { h, m: m_vec })
        }
    };
    Ok(ProblemInstance {
        ensemble,
        subspace_b: b,
        subspace_c: c,
        kind_b: file.subspace_b,
        kind_c: file.subspace_c,
        y,
        delta,
        truth,
        seed: file.seed,
    })
}

pub fn write_instance(inst: &ProblemInstance, path: &Path) -> Result<()> {
    std::fs::write(path, instance_to_json(inst)).map_err(|e| Error::io(path, e))
}

pub fn read_instance(path: &Path) -> Result<ProblemInstance> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    instance_from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::hermitian_inner;

    fn delta_vector(m: usize) -> DVector<C64> {
        let mut v = DVector::zeros(m);
        v[0] = C64::new(1.0, 0.0);
        v
    }

    #[test]
    fn convolve_with_delta_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = DVector::from_fn(8, |_, _| {
            C64::new(
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            )
        });
        let e0 = delta_vector(8);
        let conv = circular_convolve(&e0, &x).unwrap();
        assert!((conv - &x).norm() < 1e-12 * x.norm());
    }

    #[test]
    fn convolve_with_ones_gives_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = DVector::from_fn(8, |_, _| C64::new(StandardNormal.sample(&mut rng), 0.0));
        let ones = DVector::from_element(8, C64::new(1.0, 0.0));
        let conv = circular_convolve(&ones, &x).unwrap();
        let total: C64 = x.iter().sum();
        for t in 0..8 {
            assert!((conv[t] - total).norm() < 1e-12 * total.norm().max(1.0));
        }
    }

    #[test]
    fn convolve_matches_direct_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = 16;
        let w = DVector::from_fn(m, |_, _| {
            C64::new(
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            )
        });
        let x = DVector::from_fn(m, |_, _| {
            C64::new(
                StandardNormal.sample(&mut rng),
                StandardNormal.sample(&mut rng),
            )
        });
        let fast = circular_convolve(&w, &x).unwrap();
        // O(m^2) oracle
        let mut direct = DVector::<C64>::zeros(m);
        for t in 0..m {
            for s in 0..m {
                direct[t] += w[s] * x[(t + m - s) % m];
            }
        }
        assert!((fast - direct).norm() < 1e-12 * x.norm() * w.norm() * m as f64);
    }

    #[test]
    fn convolve_length_mismatch() {
        let a = DVector::from_element(4, C64::new(1.0, 0.0));
        let b = DVector::from_element(5, C64::new(1.0, 0.0));
        assert!(circular_convolve(&a, &b).is_err());
    }

    #[test]
    fn partial_identity_subspace() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = gen_subspace(
            &SubspaceModel {
                kind: SubspaceKind::PartialIdentity,
                ambient: 4,
                dim: 2,
            },
            &mut rng,
        )
        .unwrap();
        assert_eq!(b[(0, 0)], C64::new(1.0, 0.0));
        assert_eq!(b[(1, 1)], C64::new(1.0, 0.0));
        assert_eq!((b.adjoint() * &b), DMatrix::identity(2, 2));
    }

    #[test]
    fn gaussian_subspace_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let m = 1000;
        let b = gen_subspace(
            &SubspaceModel {
                kind: SubspaceKind::Gaussian,
                ambient: m,
                dim: 1,
            },
            &mut rng,
        )
        .unwrap();
        let var: f64 = b.iter().map(|z| z.norm_sqr()).sum::<f64>() / m as f64;
        let expect = 1.0 / m as f64;
        assert!(
            (var - expect).abs() < 0.2 * expect,
            "sample variance {var} deviates from {expect}"
        );
    }

    #[test]
    fn dft_rows_concentrate_near_dim() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let (m, dim) = (512, 8);
        let b = gen_subspace(
            &SubspaceModel {
                kind: SubspaceKind::Gaussian,
                ambient: m,
                dim,
            },
            &mut rng,
        )
        .unwrap();
        let ens =
            MeasurementEnsemble::from_subspaces(EnsembleModel::FourierConvolution, &b, &b).unwrap();
        let mean: f64 = (0..m).map(|l| ens.row_b(l).norm_squared()).sum::<f64>() / m as f64;
        assert!(
            (mean - dim as f64).abs() < 0.2 * dim as f64,
            "mean row norm^2 {mean} deviates from {dim}"
        );
    }

    #[test]
    fn subspace_dim_exceeding_ambient_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        assert!(gen_subspace(
            &SubspaceModel {
                kind: SubspaceKind::Gaussian,
                ambient: 3,
                dim: 4,
            },
            &mut rng,
        )
        .is_err());
        assert!(gen_instance(
            8,
            9,
            2,
            SubspaceKind::Gaussian,
            SubspaceKind::Gaussian,
            EnsembleModel::DirectGaussian,
            0,
        )
        .is_err());
    }

    #[test]
    fn parseval_identity_fourier_model() {
        let inst = gen_instance(
            32,
            3,
            4,
            SubspaceKind::Gaussian,
            SubspaceKind::Gaussian,
            EnsembleModel::FourierConvolution,
            42,
        )
        .unwrap();
        let t = inst.truth.as_ref().unwrap();
        let w = &inst.subspace_b * &t.h;
        let x = &inst.subspace_c * &t.m;
        let conv = circular_convolve(&w, &x).unwrap();
        let sum_y2: f64 = inst.y.iter().map(|v| v * v).sum();
        let norm2 = conv.norm_squared();
        assert!((sum_y2 - norm2).abs() < 1e-10 * norm2.max(1.0));
    }

    #[test]
    fn measurement_identity_both_models() {
        for model in [
            EnsembleModel::FourierConvolution,
            EnsembleModel::DirectGaussian,
        ] {
            let inst = gen_instance(
                24,
                3,
                2,
                SubspaceKind::Gaussian,
                SubspaceKind::Gaussian,
                model,
                7,
            )
            .unwrap();
            let t = inst.truth.as_ref().unwrap();
            let hh = HermitianMatrix::from_rank1(&t.h);
            let mm = HermitianMatrix::from_rank1(&t.m);
            let (u, v) = lifted_forward(&inst.ensemble, &hh, &mm).unwrap();
            let scale = inst.y.iter().map(|x| x * x).fold(0.0f64, f64::max);
            for l in 0..inst.m() {
                let lhs = u[l] * v[l] / inst.m() as f64;
                let rhs = inst.y[l] * inst.y[l];
                assert!(
                    (lhs - rhs).abs() <= 1e-10 * rhs.max(1e-6 * scale),
                    "identity violated at {l}: {lhs} vs {rhs} ({model})"
                );
            }
        }
    }

    #[test]
    fn fourier_and_direct_row_products_agree() {
        // with the same subspaces, the fourier y equals the row-product formula
        let inst = gen_instance(
            20,
            3,
            3,
            SubspaceKind::Gaussian,
            SubspaceKind::Gaussian,
            EnsembleModel::FourierConvolution,
            11,
        )
        .unwrap();
        let t = inst.truth.as_ref().unwrap();
        let bh = inst.ensemble.inner_b(&t.h).unwrap();
        let cm = inst.ensemble.inner_c(&t.m).unwrap();
        let s = 1.0 / (inst.m() as f64).sqrt();
        for l in 0..inst.m() {
            let direct = (bh[l] * cm[l]).norm() * s;
            assert!(
                (direct - inst.y[l]).abs() <= 1e-10 * inst.y[l].max(1e-12),
                "row {l}: {direct} vs {}",
                inst.y[l]
            );
        }
    }

    #[test]
    fn lifted_forward_identity_matrices() {
        let inst = gen_instance(
            12,
            2,
            3,
            SubspaceKind::Gaussian,
            SubspaceKind::Gaussian,
            EnsembleModel::DirectGaussian,
            13,
        )
        .unwrap();
        let (u, v) = lifted_forward(
            &inst.ensemble,
            &HermitianMatrix::identity(2),
            &HermitianMatrix::identity(3),
        )
        .unwrap();
        for l in 0..inst.m() {
            assert!((u[l] - inst.ensemble.row_b(l).norm_squared()).abs() < 1e-10);
            assert!((v[l] - inst.ensemble.row_c(l).norm_squared()).abs() < 1e-10);
        }
        let (u0, _) = lifted_forward(
            &inst.ensemble,
            &HermitianMatrix::zeros(2),
            &HermitianMatrix::identity(3),
        )
        .unwrap();
        assert!(u0.iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn balanced_pair_is_feasible_with_equal_traces() {
        let inst = gen_instance(
            16,
            2,
            4,
            SubspaceKind::Gaussian,
            SubspaceKind::Gaussian,
            EnsembleModel::DirectGaussian,
            17,
        )
        .unwrap();
        let t = inst.truth.as_ref().unwrap();
        let alpha = (t.m.norm_squared() / t.h.norm_squared()).sqrt();
        let h_bal = HermitianMatrix::from_rank1(&t.h).scale(alpha);
        let m_bal = HermitianMatrix::from_rank1(&t.m).scale(1.0 / alpha);
        assert!((h_bal.trace() - m_bal.trace()).abs() <= 1e-10 * h_bal.trace());
        let (u, v) = lifted_forward(&inst.ensemble, &h_bal, &m_bal).unwrap();
        for l in 0..inst.m() {
            let rel = (u[l] * v[l] - inst.delta[l]).abs() / inst.delta[l].max(1e-9);
            assert!(rel < 1e-9, "slack at {l}: {rel}");
        }
    }

    #[test]
    fn quadratic_form_matches_inner_product() {
        let inst = gen_instance(
            10,
            3,
            2,
            SubspaceKind::Gaussian,
            SubspaceKind::Gaussian,
            EnsembleModel::DirectGaussian,
            23,
        )
        .unwrap();
        let t = inst.truth.as_ref().unwrap();
        let hh = HermitianMatrix::from_rank1(&t.h);
        let u = inst.ensemble.forward_h(&hh).unwrap();
        for l in 0..inst.m() {
            let bb = HermitianMatrix::from_rank1(&inst.ensemble.row_b(l));
            let via_inner = hermitian_inner(&bb, &hh).unwrap();
            assert!((u[l] - via_inner).abs() < 1e-9 * via_inner.abs().max(1.0));
        }
    }

    #[test]
    fn instance_serialization_deterministic_and_round_trips() {
        let a = gen_instance(
            16,
            2,
            3,
            SubspaceKind::Gaussian,
            SubspaceKind::PartialIdentity,
            EnsembleModel::FourierConvolution,
            42,
        )
        .unwrap();
        let b = gen_instance(
            16,
            2,
            3,
            SubspaceKind::Gaussian,
            SubspaceKind::PartialIdentity,
            EnsembleModel::FourierConvolution,
            42,
        )
        .unwrap();
        let ja = instance_to_json(&a);
        let jb = instance_to_json(&b);
        assert_eq!(ja, jb, "identical seeds must serialize identically");

        let back = instance_from_json(&ja).unwrap();
        assert_eq!(instance_to_json(&back), ja, "round trip must be exact");
        assert_eq!(back.m(), 16);
        assert_eq!(back.kind_c, SubspaceKind::PartialIdentity);
        assert!(back.truth.is_some());
    }

    #[test]
    fn loader_rejects_corrupted_documents() {
        let inst = gen_instance(
            8,
            2,
            2,
            SubspaceKind::Gaussian,
            SubspaceKind::Gaussian,
            EnsembleModel::DirectGaussian,
            1,
        )
        .unwrap();
        let good = instance_to_json(&inst);

        let mut bad: serde_json::Value = serde_json::from_str(&good).unwrap();
        bad["delta"][0] = serde_json::json!(12345.0);
        assert!(instance_from_json(&bad.to_string()).is_err());

        let mut bad2: serde_json::Value = serde_json::from_str(&good).unwrap();
        bad2["truth"]["h"][0] = serde_json::json!(99.0);
        assert!(instance_from_json(&bad2.to_string()).is_err());

        assert!(instance_from_json("{\"version\":1}").is_err());
    }
}
