//! Exact Euclidean projection onto the convex set
//! `C = {(u1, u2): u1 u2 >= delta > 0, u1 >= 0}`, one measurement index at a
//! time.
//!
//! For a target outside the set the projection lands on the boundary
//! hyperbola, where the KKT stationarity conditions reduce to a monic quartic
//! in `u1`:
//!
//! ```text
//! u1^4 - xi1 u1^3 + delta xi2 u1 - delta^2 = 0
//! ```
//!
//! Real roots come from a companion-matrix eigensolve polished by Newton
//! iteration; closed-form quartic resolvents are fragile near repeated roots.
//! Admissible roots must satisfy `u1 > 0` and `delta - xi2 u1 >= 0` (the
//! latter makes the multiplier `mu1 = (delta - xi2 u1)/u1^2` nonnegative);
//! among admissible roots the pair closest to the target wins.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Companion eigenvalues with relative imaginary part below this bound are
/// candidate real roots (the final residual filter decides).
const CANDIDATE_IM_TOL: f64 = 1e-6;
/// Residual filter for polished roots, scaled by coefficient size and root
/// magnitude.
const ROOT_RESIDUAL_TOL: f64 = 1e-10;
/// Half-width for collapsing roots of higher multiplicity.
const ROOT_MERGE_TOL: f64 = 1e-8;

/// One decoupled projection target `(xi1, xi2)` with its lower bound `delta`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HyperbolaTarget {
    pub xi1: f64,
    pub xi2: f64,
    pub delta: f64,
}

impl HyperbolaTarget {
    pub fn new(xi1: f64, xi2: f64, delta: f64) -> Result<Self> {
        if !xi1.is_finite() || !xi2.is_finite() || !delta.is_finite() {
            return Err(Error::NonFinite("HyperbolaTarget"));
        }
        if delta < 0.0 {
            return Err(Error::InvalidInput(format!(
                "delta must be nonnegative, got {delta}"
            )));
        }
        Ok(Self { xi1, xi2, delta })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProjectionCase {
    /// The target already satisfies the constraints and is returned as is.
    Interior,
    /// The projection lies on the boundary `u1 u2 = delta`.
    Boundary,
}

impl std::fmt::Display for ProjectionCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProjectionCase::Interior => write!(f, "interior"),
            ProjectionCase::Boundary => write!(f, "boundary"),
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ProjectionResult {
    pub u1: f64,
    pub u2: f64,
    pub case_id: ProjectionCase,
    /// Worst absolute residual of the stationarity conditions at the result.
    pub kkt_residual: f64,
}

/// All real roots of the monic quartic `u^4 + a3 u^3 + a2 u^2 + a1 u + a0`,
/// sorted ascending with multiplicity collapsed.
pub fn quartic_real_roots(a3: f64, a2: f64, a1: f64, a0: f64) -> Result<Vec<f64>> {
    for c in [a3, a2, a1, a0] {
        if !c.is_finite() {
            return Err(Error::NonFinite("quartic coefficients"));
        }
    }
    let companion = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.0, 0.0, 0.0, -a0, //
            1.0, 0.0, 0.0, -a1, //
            0.0, 1.0, 0.0, -a2, //
            0.0, 0.0, 1.0, -a3,
        ],
    );
    let eigen = companion.complex_eigenvalues();
    let coeff_scale = 1.0f64.max(a3.abs()).max(a2.abs()).max(a1.abs()).max(a0.abs());

    let p = |x: f64| ((x + a3) * x + a2) * x.mul_add(x, 0.0) + a1 * x + a0;
    let eval = |x: f64| -> (f64, f64) {
        let v = (((x + a3) * x + a2) * x + a1) * x + a0;
        let d = ((4.0 * x + 3.0 * a3) * x + 2.0 * a2) * x + a1;
        (v, d)
    };
    let _ = p;

    let mut roots: Vec<f64> = Vec::new();
    for z in eigen.iter() {
        if z.im.abs() > CANDIDATE_IM_TOL * z.re.abs().max(1.0) {
            continue;
        }
        // Newton polish on the real line
        let mut x = z.re;
        for _ in 0..40 {
            let (v, d) = eval(x);
            if d == 0.0 {
                break;
            }
            let step = v / d;
            x -= step;
            if step.abs() <= f64::EPSILON * x.abs().max(1.0) {
                break;
            }
        }
        let (v, _) = eval(x);
        let tol = ROOT_RESIDUAL_TOL * coeff_scale * x.abs().max(1.0).powi(4);
        if v.abs() <= tol && x.is_finite() {
            roots.push(x);
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    roots.dedup_by(|a, b| (*a - *b).abs() <= ROOT_MERGE_TOL * a.abs().max(1.0));
    Ok(roots)
}

/// Exact projection of one target onto `C`.
pub fn project_hyperbola(t: &HyperbolaTarget) -> Result<ProjectionResult> {
    let HyperbolaTarget { xi1, xi2, delta } = *t;

    if delta == 0.0 {
        // Projection onto the closed set {u1 >= 0, u1 u2 >= 0}.
        let u1 = xi1.max(0.0);
        if u1 * xi2 >= 0.0 {
            let case = if u1 == xi1 {
                ProjectionCase::Interior
            } else {
                ProjectionCase::Boundary
            };
            return Ok(ProjectionResult {
                u1,
                u2: xi2,
                case_id: case,
                kkt_residual: 0.0,
            });
        }
        // xi1 > 0, xi2 < 0: the closer of (xi1, 0) and (0, xi2).
        let d_quadrant = xi2 * xi2;
        let d_axis = xi1 * xi1;
        let (u1, u2) = if d_quadrant <= d_axis {
            (xi1, 0.0)
        } else {
            (0.0, xi2)
        };
        return Ok(ProjectionResult {
            u1,
            u2,
            case_id: ProjectionCase::Boundary,
            kkt_residual: 0.0,
        });
    }

    // Case 1: the target is already feasible.
    if xi1 >= 0.0 && xi1 * xi2 >= delta {
        return Ok(ProjectionResult {
            u1: xi1,
            u2: xi2,
            case_id: ProjectionCase::Interior,
            kkt_residual: 0.0,
        });
    }

    // Case 4: active constraint u1 u2 = delta with u1 > 0. Cases 2 and 3 of
    // the KKT analysis require u1 = 0 and cannot occur for delta > 0.
    let roots = quartic_real_roots(-xi1, 0.0, delta * xi2, -(delta * delta))?;
    let mut best: Option<(f64, f64, f64)> = None;
    for &u1 in &roots {
        if u1 <= 0.0 {
            continue;
        }
        let slack = delta - xi2 * u1;
        let slack_tol = 1e-10 * delta.max(1.0).max((xi2 * u1).abs());
        if slack < -slack_tol {
            continue;
        }
        let mu1 = (slack / (u1 * u1)).max(0.0);
        let u2 = xi2 + mu1 * u1;
        let dist2 = (u1 - xi1).powi(2) + (u2 - xi2).powi(2);
        if best.map_or(true, |(_, _, d)| dist2 < d) {
            best = Some((u1, u2, dist2));
        }
    }
    let (u1, u2, _) = best.ok_or(Error::NoAdmissibleRoot {
        xi1,
        xi2,
        delta,
        roots,
    })?;
    let mu1 = ((delta - xi2 * u1) / (u1 * u1)).max(0.0);
    let r1 = (u1 - xi1 - mu1 * u2).abs();
    let r2 = (u2 - xi2 - mu1 * u1).abs();
    Ok(ProjectionResult {
        u1,
        u2,
        case_id: ProjectionCase::Boundary,
        kkt_residual: r1.max(r2),
    })
}

/// Componentwise projection of target vectors onto `C`; order independent.
pub fn project_set_c(
    xi1: &[f64],
    xi2: &[f64],
    delta: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    if xi1.len() != xi2.len() || xi1.len() != delta.len() {
        return Err(Error::DimensionMismatch(format!(
            "component counts differ: {}, {}, {}",
            xi1.len(),
            xi2.len(),
            delta.len()
        )));
    }
    let mut u1 = Vec::with_capacity(xi1.len());
    let mut u2 = Vec::with_capacity(xi1.len());
    for l in 0..xi1.len() {
        let target =
            HyperbolaTarget::new(xi1[l], xi2[l], delta[l]).map_err(|e| Error::ProjectionAt {
                index: l,
                source: Box::new(e),
            })?;
        let res = project_hyperbola(&target).map_err(|e| Error::ProjectionAt {
            index: l,
            source: Box::new(e),
        })?;
        u1.push(res.u1);
        u2.push(res.u2);
    }
    Ok((u1, u2))
}
