//! K-satisfiability certificates and sketch-dimension rules.
//!
//! With `K = U D U^T` split into the leading `d_n` eigenvectors `U1` and the
//! rest `U2` (eigenvalues `D2`), a sketch `S` is K-satisfiable when
//!
//! ```text
//! || (S U1)^T S U1 - I ||_op <= 1/2   and   || S U2 D2^{1/2} ||_op <= c delta_n
//! ```

use nalgebra::DMatrix;
use serde::Serialize;

use crate::complexity::ComplexityProfile;
use crate::error::{Error, Result};
use crate::kernel::KernelMatrix;
use crate::sketch::{SketchKind, SketchOperator};

/// Default constant in the tail condition.
pub const DEFAULT_C_THRESHOLD: f64 = 4.0;

/// Bound on the isometry defect of the leading block.
pub const ISOMETRY_BOUND: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SatisfiabilityReport {
    pub lhs_isometry: f64,
    pub lhs_tail: f64,
    pub delta_n: f64,
    pub d_n: usize,
    pub c_threshold: f64,
    pub pass: bool,
}

pub fn check_k_satisfiable(
    s: &SketchOperator,
    k: &KernelMatrix,
    profile: &ComplexityProfile,
    c_threshold: f64,
) -> Result<SatisfiabilityReport> {
    check_k_satisfiable_matrix(&s.materialize(), k, profile, c_threshold)
}

/// Certificate for an arbitrary dense `m x n` sketch matrix.
pub fn check_k_satisfiable_matrix(
    s: &DMatrix<f64>,
    k: &KernelMatrix,
    profile: &ComplexityProfile,
    c_threshold: f64,
) -> Result<SatisfiabilityReport> {
    let n = k.n();
    if s.nrows() < 1 {
        return Err(Error::domain("sketch must have at least one row"));
    }
    if s.ncols() != n {
        return Err(Error::domain(format!(
            "sketch has {} columns, kernel dimension is {n}",
            s.ncols()
        )));
    }
    if c_threshold.is_nan() || c_threshold <= 0.0 {
        return Err(Error::domain("c_threshold must be positive"));
    }
    let d = profile.d_n;
    if d > n {
        return Err(Error::domain(format!("statistical dimension {d} exceeds n = {n}")));
    }
    let eigen = k.eigen()?;
    let su = s * &eigen.vectors;

    let lhs_isometry = if d == 0 {
        0.0
    } else {
        let su1 = su.columns(0, d);
        let mut gram = su1.tr_mul(&su1);
        for i in 0..d {
            gram[(i, i)] -= 1.0;
        }
        let gram = (&gram + gram.transpose()) * 0.5;
        gram.symmetric_eigenvalues().amax()
    };

    let lhs_tail = if d == n {
        0.0
    } else {
        let mut tail = su.columns(d, n - d).into_owned();
        for (j, mut col) in tail.column_iter_mut().enumerate() {
            col *= eigen.values[d + j].sqrt();
        }
        tail.singular_values().max()
    };

    let pass = lhs_isometry <= ISOMETRY_BOUND && lhs_tail <= c_threshold * profile.delta_n;
    Ok(SatisfiabilityReport {
        lhs_isometry,
        lhs_tail,
        delta_n: profile.delta_n,
        d_n: d,
        c_threshold,
        pass,
    })
}

/// Sketch dimension `c d_n` (Gaussian, sub-sampling) or `c d_n ln(n)^4`
/// (ROS), rounded up and clamped to `[1, n]`.
pub fn recommended_sketch_dim(kind: SketchKind, d_n: usize, n: usize, c: f64) -> usize {
    let base = c * d_n as f64;
    let raw = match kind {
        SketchKind::Ros => base * (n as f64).ln().powi(4),
        SketchKind::Gaussian | SketchKind::SubSample => base,
    };
    let m = if raw.is_finite() { raw.ceil().max(0.0) as usize } else { n };
    m.clamp(1, n.max(1))
}
