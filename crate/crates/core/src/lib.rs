//! Recovery of two unknown vectors from phaseless Fourier measurements of
//! their circular convolution.
//!
//! The measurements `y = |F(w (*) x)|` with `w = B h` and `x = C m` are lifted
//! to the rank-1 matrices `H = h h*` and `M = m m*`, where each magnitude
//! constrains the product `<b b*, H> <c c*, M>`. Minimizing `Tr H + Tr M`
//! over the positive semidefinite cone subject to the relaxed hyperbolic
//! constraints `<b b*, H> <c c*, M> >= m y^2` is a convex program; this crate
//! solves it with an ADMM scheme whose primal blocks are a precomputed linear
//! solve, a PSD projection, and an exact projection onto the hyperbolic set.
//!
//! Modules:
//! - [`hermitian`]: Hermitian primitives (inner products, PSD projection,
//!   eigenpairs, isometric real vectorization).
//! - [`measurements`]: problem instances, subspaces, circular convolution,
//!   lifted forward maps, and the instance file format.
//! - [`hyperbola`]: exact projection onto `{u v >= delta, u >= 0}` via the
//!   KKT quartic.
//! - [`admm`]: the solver loop and the result file format.
//! - [`recovery`]: scaling-balanced ground truth, rank-1 extraction, and
//!   success scoring.
//! - [`experiments`]: seeded Monte-Carlo phase-transition grids with CSV,
//!   PGM, and manifest outputs.

pub mod admm;
pub mod error;
pub mod experiments;
pub mod hermitian;
pub mod hyperbola;
pub mod measurements;
pub mod recovery;

pub use error::{Error, Result};
pub use hermitian::{C64, HermitianMatrix, HermitianVecBasis, LiftedPair};
