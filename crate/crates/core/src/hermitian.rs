//! Hermitian-matrix primitives shared by the whole library: inner products,
//! PSD projection, top eigenpairs, and an isometric real vectorization of the
//! Hermitian space.
//!
//! Everything works over complex scalars; real problems are the special case
//! of zero imaginary parts.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Relative asymmetry below which a matrix is silently symmetrized.
const SYMMETRIZE_TOL: f64 = 1e-12;
/// Relative asymmetry above which construction fails loudly.
const HERMITIAN_TOL: f64 = 1e-8;

/// A square complex matrix equal to its conjugate transpose.
///
/// Construction symmetrizes float drift via `(X + X*)/2` and rejects
/// matrices whose asymmetry exceeds `1e-8` relative to their norm.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    mat: DMatrix<C64>,
}

impl HermitianMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            mat: DMatrix::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mat: DMatrix::identity(dim, dim),
        }
    }

    /// Wraps a matrix that is Hermitian up to float drift.
    pub fn from_matrix(mat: DMatrix<C64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "expected square matrix, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        if mat.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("HermitianMatrix::from_matrix"));
        }
        let adjoint = mat.adjoint();
        let asym = (&mat - &adjoint).norm() / 2.0;
        let scale = mat.norm().max(1.0);
        if asym > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian {
                asymmetry: asym / scale,
                tol: HERMITIAN_TOL,
            });
        }
        let sym = if asym > SYMMETRIZE_TOL * scale || asym > 0.0 {
            (mat + adjoint) * C64::new(0.5, 0.0)
        } else {
            mat
        };
        Ok(Self { mat: sym })
    }

    /// The rank-1 lift `v v*`.
    pub fn from_rank1(v: &DVector<C64>) -> Self {
        let d = v.len();
        let mut mat = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                mat[(i, j)] = v[i] * v[j].conj();
            }
        }
        // force an exactly real diagonal
        for i in 0..d {
            mat[(i, i)] = C64::new(v[i].norm_sqr(), 0.0);
        }
        Self { mat }
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d = diag.len();
        let mut mat = DMatrix::zeros(d, d);
        for i in 0..d {
            mat[(i, i)] = C64::new(diag[i], 0.0);
        }
        Self { mat }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<C64> {
        &self.mat
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.mat[(i, j)]
    }

    /// Trace; real because the diagonal of a Hermitian matrix is real.
    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.mat[(i, i)].re).sum()
    }

    pub fn norm_fro(&self) -> f64 {
        self.mat.norm()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            mat: &self.mat * C64::new(s, 0.0),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self {
            mat: &self.mat + &other.mat,
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_dim(other)?;
        Ok(Self {
            mat: &self.mat - &other.mat,
        })
    }

    /// `self + s*I`.
    pub fn add_scaled_identity(&self, s: f64) -> Self {
        let mut mat = self.mat.clone();
        for i in 0..self.dim() {
            mat[(i, i)] += C64::new(s, 0.0);
        }
        Self { mat }
    }

    pub fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!(
                "Hermitian dims {} vs {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(())
    }

    fn check_finite(&self, what: &'static str) -> Result<()> {
        if self
            .mat
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite(what));
        }
        Ok(())
    }

    /// Smallest eigenvalue; handy for PSD checks in tests and contracts.
    pub fn min_eigenvalue(&self) -> Result<f64> {
        self.check_finite("min_eigenvalue")?;
        let eig = self.mat.clone().symmetric_eigenvalues();
        Ok(eig.iter().cloned().fold(f64::INFINITY, f64::min))
    }
}

/// A pair of Hermitian matrices viewed as one block-diagonal unknown.
#[derive(Clone, Debug)]
pub struct LiftedPair {
    pub h: HermitianMatrix,
    pub m: HermitianMatrix,
}

impl LiftedPair {
    pub fn new(h: HermitianMatrix, m: HermitianMatrix) -> Self {
        Self { h, m }
    }

    /// Trace of the block-diagonal matrix: `Tr H + Tr M`.
    pub fn trace(&self) -> f64 {
        self.h.trace() + self.m.trace()
    }

    /// Frobenius norm of the block-diagonal matrix.
    pub fn norm_fro(&self) -> f64 {
        (self.h.norm_fro().powi(2) + self.m.norm_fro().powi(2)).sqrt()
    }

    /// Frobenius distance to another pair.
    pub fn distance(&self, other: &LiftedPair) -> Result<f64> {
        let dh = self.h.sub(&other.h)?;
        let dm = self.m.sub(&other.m)?;
        Ok((dh.norm_fro().powi(2) + dm.norm_fro().powi(2)).sqrt())
    }
}

/// Real inner product `<A, X> = Tr(A* X)` of two Hermitian matrices.
///
/// The imaginary part must vanish for Hermitian arguments; it is asserted
/// below `1e-10 * |A|_F |X|_F` and discarded.
pub fn hermitian_inner(a: &HermitianMatrix, x: &HermitianMatrix) -> Result<f64> {
    a.check_same_dim(x)?;
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..a.dim() {
        for i in 0..a.dim() {
            acc += a.entry(i, j).conj() * x.entry(i, j);
        }
    }
    let bound = 1e-10 * a.norm_fro() * x.norm_fro();
    if acc.im.abs() > bound.max(f64::EPSILON) {
        return Err(Error::NotHermitian {
            asymmetry: acc.im.abs(),
            tol: bound,
        });
    }
    Ok(acc.re)
}

/// Frobenius-nearest PSD matrix: eigendecompose and clip eigenvalues at zero.
pub fn project_psd(z: &HermitianMatrix) -> Result<HermitianMatrix> {
    z.check_finite("project_psd")?;
    let eig = nalgebra::SymmetricEigen::new(z.as_matrix().clone());
    let d = z.dim();
    let mut clipped = DMatrix::<C64>::zeros(d, d);
    for (idx, lam) in eig.eigenvalues.iter().enumerate() {
        if !lam.is_finite() {
            return Err(Error::Eigen("non-finite eigenvalue".into()));
        }
        let lam = lam.max(0.0);
        if lam > 0.0 {
            let col = eig.eigenvectors.column(idx);
            for i in 0..d {
                for j in 0..d {
                    clipped[(i, j)] += col[i] * col[j].conj() * C64::new(lam, 0.0);
                }
            }
        }
    }
    HermitianMatrix::from_matrix(clipped)
}

/// Largest eigenvalue with an associated unit eigenvector.
///
/// The eigenvector phase is normalized so its largest-magnitude entry is real
/// and nonnegative, which makes the output deterministic.
pub fn top_eigpair(h: &HermitianMatrix) -> Result<(f64, DVector<C64>)> {
    h.check_finite("top_eigpair")?;
    let eig = nalgebra::SymmetricEigen::new(h.as_matrix().clone());
    let mut best = 0usize;
    for idx in 1..eig.eigenvalues.len() {
        if eig.eigenvalues[idx] > eig.eigenvalues[best] {
            best = idx;
        }
    }
    let lam = eig.eigenvalues[best];
    if !lam.is_finite() {
        return Err(Error::Eigen("non-finite eigenvalue".into()));
    }
    let mut v: DVector<C64> = eig.eigenvectors.column(best).into_owned();
    let norm = v.norm();
    if norm > 0.0 {
        v /= C64::new(norm, 0.0);
    }
    // phase convention: largest-magnitude entry real nonnegative
    let mut arg = 0usize;
    for i in 1..v.len() {
        if v[i].norm_sqr() > v[arg].norm_sqr() {
            arg = i;
        }
    }
    let mag = v[arg].norm();
    if mag > 0.0 {
        let phase = v[arg] / C64::new(mag, 0.0);
        v *= phase.conj();
    }
    Ok((lam, v))
}

/// Linear, invertible, isometric map between `dim x dim` Hermitian matrices
/// and real vectors of length `dim^2`.
///
/// Coordinate order for row `i`: the diagonal entry `X[i,i]`, then for each
/// `j > i` the pair `(sqrt(2) Re X[i,j], sqrt(2) Im X[i,j])`. The sqrt(2)
/// weights make the Euclidean norm of the vector equal the Frobenius norm of
/// the matrix, so inner products are preserved as well.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HermitianVecBasis {
    dim: usize,
}

impl HermitianVecBasis {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vec_len(&self) -> usize {
        self.dim * self.dim
    }

    pub fn to_real_vec(&self, x: &HermitianMatrix) -> Result<DVector<f64>> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "basis dim {} vs matrix dim {}",
                self.dim,
                x.dim()
            )));
        }
        let sqrt2 = std::f64::consts::SQRT_2;
        let mut out = DVector::zeros(self.vec_len());
        let mut idx = 0;
        for i in 0..self.dim {
            out[idx] = x.entry(i, i).re;
            idx += 1;
            for j in (i + 1)..self.dim {
                let z = x.entry(i, j);
                out[idx] = sqrt2 * z.re;
                out[idx + 1] = sqrt2 * z.im;
                idx += 2;
            }
        }
        Ok(out)
    }

    pub fn from_real_vec(&self, v: &DVector<f64>) -> Result<HermitianMatrix> {
        if v.len() != self.vec_len() {
            return Err(Error::DimensionMismatch(format!(
                "basis vec len {} vs vector len {}",
                self.vec_len(),
                v.len()
            )));
        }
        let inv_sqrt2 = 1.0 / std::f64::consts::SQRT_2;
        let mut mat = DMatrix::<C64>::zeros(self.dim, self.dim);
        let mut idx = 0;
        for i in 0..self.dim {
            mat[(i, i)] = C64::new(v[idx], 0.0);
            idx += 1;
            for j in (i + 1)..self.dim {
                let z = C64::new(v[idx] * inv_sqrt2, v[idx + 1] * inv_sqrt2);
                mat[(i, j)] = z;
                mat[(j, i)] = z.conj();
                idx += 2;
            }
        }
        Ok(HermitianMatrix { mat })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(dim: usize, rng: &mut ChaCha8Rng) -> HermitianMatrix {
        let mut mat = DMatrix::<C64>::zeros(dim, dim);
        for i in 0..dim {
            mat[(i, i)] = C64::new(rng.random::<f64>() * 2.0 - 1.0, 0.0);
            for j in (i + 1)..dim {
                let z = C64::new(
                    rng.random::<f64>() * 2.0 - 1.0,
                    rng.random::<f64>() * 2.0 - 1.0,
                );
                mat[(i, j)] = z;
                mat[(j, i)] = z.conj();
            }
        }
        HermitianMatrix::from_matrix(mat).unwrap()
    }

    fn random_vector(dim: usize, rng: &mut ChaCha8Rng) -> DVector<C64> {
        DVector::from_fn(dim, |_, _| {
            C64::new(
                rng.random::<f64>() * 2.0 - 1.0,
                rng.random::<f64>() * 2.0 - 1.0,
            )
        })
    }

    #[test]
    fn inner_identity_is_trace() {
        let i2 = HermitianMatrix::identity(2);
        assert_eq!(hermitian_inner(&i2, &i2).unwrap(), 2.0);
    }

    #[test]
    fn inner_rank1_is_squared_inner_product() {
        let b = DVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
        let bb = HermitianMatrix::from_rank1(&b);
        let hh = HermitianMatrix::from_rank1(&b);
        assert!((hermitian_inner(&bb, &hh).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn inner_pauli_y_with_itself() {
        // A = [[0, i], [-i, 0]] has A^2 = I, so <A, A> = Tr(A*A) = 2.
        let mut mat = DMatrix::<C64>::zeros(2, 2);
        mat[(0, 1)] = C64::new(0.0, 1.0);
        mat[(1, 0)] = C64::new(0.0, -1.0);
        let a = HermitianMatrix::from_matrix(mat).unwrap();
        assert!((hermitian_inner(&a, &a).unwrap() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn inner_dimension_mismatch_errors() {
        let a = HermitianMatrix::identity(2);
        let b = HermitianMatrix::identity(3);
        assert!(matches!(
            hermitian_inner(&a, &b),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn non_hermitian_rejected() {
        let mut mat = DMatrix::<C64>::zeros(2, 2);
        mat[(0, 1)] = C64::new(1.0, 0.0);
        mat[(1, 0)] = C64::new(0.5, 0.0);
        assert!(matches!(
            HermitianMatrix::from_matrix(mat),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn small_drift_symmetrized() {
        let mut mat = DMatrix::<C64>::zeros(2, 2);
        mat[(0, 1)] = C64::new(1.0, 1e-13);
        mat[(1, 0)] = C64::new(1.0, 1e-13); // conj would be -1e-13
        let h = HermitianMatrix::from_matrix(mat).unwrap();
        assert_eq!(h.entry(0, 1).conj(), h.entry(1, 0));
    }

    #[test]
    fn inner_equals_quadratic_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let h = random_hermitian(5, &mut rng);
            let b = random_vector(5, &mut rng);
            let bb = HermitianMatrix::from_rank1(&b);
            let quad = (b.adjoint() * h.as_matrix() * &b)[(0, 0)];
            assert!(quad.im.abs() < 1e-10);
            let inner = hermitian_inner(&bb, &h).unwrap();
            assert!((inner - quad.re).abs() < 1e-10 * quad.re.abs().max(1.0));
        }
    }

    #[test]
    fn psd_projection_clips_diagonal() {
        let z = HermitianMatrix::from_real_diagonal(&[3.0, -2.0]);
        let p = project_psd(&z).unwrap();
        assert!((p.entry(0, 0).re - 3.0).abs() < 1e-12);
        assert!(p.entry(1, 1).re.abs() < 1e-12);
        assert!(p.entry(0, 1).norm() < 1e-12);
    }

    #[test]
    fn psd_projection_fixes_psd_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let v = random_vector(4, &mut rng);
            let psd = HermitianMatrix::from_rank1(&v);
            let p = project_psd(&psd).unwrap();
            assert!(p.sub(&psd).unwrap().norm_fro() < 1e-12 * psd.norm_fro().max(1.0));
        }
    }

    #[test]
    fn psd_projection_offdiagonal_example() {
        // [[0,1],[1,0]] has eigenvalues +-1; clipping -1 leaves 0.5 * ones.
        let mut mat = DMatrix::<C64>::zeros(2, 2);
        mat[(0, 1)] = C64::new(1.0, 0.0);
        mat[(1, 0)] = C64::new(1.0, 0.0);
        let z = HermitianMatrix::from_matrix(mat).unwrap();
        let p = project_psd(&z).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert!((p.entry(i, j) - C64::new(0.5, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn psd_projection_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..10 {
            let z = random_hermitian(6, &mut rng);
            let p1 = project_psd(&z).unwrap();
            let p2 = project_psd(&p1).unwrap();
            assert!(p1.sub(&p2).unwrap().norm_fro() <= 1e-12 * p1.norm_fro().max(1.0));
        }
    }

    #[test]
    fn psd_projection_is_nearest() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let z = random_hermitian(5, &mut rng);
            let p = project_psd(&z).unwrap();
            let base = p.sub(&z).unwrap().norm_fro();
            for _ in 0..20 {
                let g = random_vector(5, &mut rng);
                let w = HermitianMatrix::from_rank1(&g).scale(rng.random::<f64>() * 2.0);
                let competitor = w.sub(&z).unwrap().norm_fro();
                assert!(base <= competitor + 1e-10);
            }
        }
    }

    #[test]
    fn top_eigpair_diagonal() {
        let h = HermitianMatrix::from_real_diagonal(&[2.0, 1.0]);
        let (lam, v) = top_eigpair(&h).unwrap();
        assert!((lam - 2.0).abs() < 1e-12);
        assert!((v[0] - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!(v[1].norm() < 1e-12);
    }

    #[test]
    fn top_eigpair_rank1() {
        let h_vec = DVector::from_vec(vec![C64::new(3.0, 0.0), C64::new(4.0, 0.0)]);
        let h = HermitianMatrix::from_rank1(&h_vec);
        let (lam, v) = top_eigpair(&h).unwrap();
        assert!((lam - 25.0).abs() < 1e-10);
        assert!((v[0].re - 0.6).abs() < 1e-10);
        assert!((v[1].re - 0.8).abs() < 1e-10);
    }

    #[test]
    fn top_eigpair_matches_power_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = random_hermitian(5, &mut rng);
        // shift to make the top eigenvalue dominant in magnitude
        let shift = 10.0 * h.norm_fro();
        let shifted = h.add_scaled_identity(shift);
        let mut x = random_vector(5, &mut rng);
        for _ in 0..20_000 {
            x = shifted.as_matrix() * &x;
            let n = x.norm();
            x /= C64::new(n, 0.0);
        }
        let rayleigh = (x.adjoint() * h.as_matrix() * &x)[(0, 0)].re;
        let (lam, v) = top_eigpair(&h).unwrap();
        assert!((lam - rayleigh).abs() < 1e-8);
        let overlap = (v.adjoint() * &x)[(0, 0)].norm();
        assert!((overlap - 1.0).abs() < 1e-8);
    }

    #[test]
    fn vec_basis_identity_example() {
        let basis = HermitianVecBasis::new(2);
        let v = basis.to_real_vec(&HermitianMatrix::identity(2)).unwrap();
        assert_eq!(v.as_slice(), &[1.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn vec_basis_offdiagonal_norm() {
        let mut mat = DMatrix::<C64>::zeros(2, 2);
        mat[(0, 1)] = C64::new(1.0, 0.0);
        mat[(1, 0)] = C64::new(1.0, 0.0);
        let x = HermitianMatrix::from_matrix(mat).unwrap();
        let basis = HermitianVecBasis::new(2);
        let v = basis.to_real_vec(&x).unwrap();
        assert!((v.norm() - std::f64::consts::SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn vec_basis_round_trip_and_isometry() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let x = random_hermitian(6, &mut rng);
            let basis = HermitianVecBasis::new(6);
            let v = basis.to_real_vec(&x).unwrap();
            let back = basis.from_real_vec(&v).unwrap();
            assert!(back.sub(&x).unwrap().norm_fro() <= 1e-14 * x.norm_fro().max(1.0));
            assert!((v.norm() - x.norm_fro()).abs() <= 1e-12 * x.norm_fro().max(1.0));
        }
    }

    #[test]
    fn vec_basis_dimension_mismatch() {
        let basis = HermitianVecBasis::new(3);
        assert!(basis.to_real_vec(&HermitianMatrix::identity(2)).is_err());
        assert!(basis.from_real_vec(&DVector::zeros(4)).is_err());
    }

    #[test]
    fn vec_basis_preserves_inner_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let basis = HermitianVecBasis::new(4);
        for _ in 0..20 {
            let a = random_hermitian(4, &mut rng);
            let x = random_hermitian(4, &mut rng);
            let lhs = hermitian_inner(&a, &x).unwrap();
            let rhs = basis
                .to_real_vec(&a)
                .unwrap()
                .dot(&basis.to_real_vec(&x).unwrap());
            assert!((lhs - rhs).abs() < 1e-11 * lhs.abs().max(1.0));
        }
    }

    proptest! {
        #[test]
        fn prop_vec_round_trip(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dim = 1 + (seed as usize % 7);
            let x = random_hermitian(dim, &mut rng);
            let basis = HermitianVecBasis::new(dim);
            let v = basis.to_real_vec(&x).unwrap();
            let back = basis.from_real_vec(&v).unwrap();
            prop_assert!(back.sub(&x).unwrap().norm_fro() <= 1e-13 * x.norm_fro().max(1.0));
            prop_assert!((v.norm() - x.norm_fro()).abs() <= 1e-12 * x.norm_fro().max(1.0));
        }

        #[test]
        fn prop_psd_projection_psd(seed in 0u64..300) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dim = 2 + (seed as usize % 5);
            let z = random_hermitian(dim, &mut rng);
            let p = project_psd(&z).unwrap();
            prop_assert!(p.min_eigenvalue().unwrap() >= -1e-10 * p.norm_fro().max(1.0));
        }
    }
}
