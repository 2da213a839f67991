//! Exact, sketched, zero-noise and dual kernel ridge regression solvers.
//!
//! All programs use the scaling of the empirical kernel matrix
//! `K_ij = k(x_i, x_j) / n`. The exact program
//!
//! ```text
//! min_w  1/2 w^T K^2 w - w^T K y / sqrt(n) + lambda w^T K w
//! ```
//!
//! has stationary point `(K + 2 lambda I) w = y / sqrt(n)`, and the fitted
//! function is `f(x) = n^{-1/2} sum_i w_i k(x, x_i)`. The sketched program
//! restricts `w = S^T a` to the row span of an `m x n` sketch `S`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernel::{cross_kernel, DesignPoints, KernelMatrix, KernelSpec};
use crate::sketch::SketchOperator;

/// Relative singular-value cutoff for pseudo-inverses.
pub const PINV_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitVariant {
    Exact,
    Sketched,
    NystromDual,
}

#[derive(Debug, Clone)]
pub struct FitResult {
    /// `w` (length `n`) for exact fits, `a` (length `m`) otherwise.
    pub coefficients: DVector<f64>,
    pub sketch: Option<SketchOperator>,
    pub lambda_n: f64,
    /// Fitted values `f(x_i)` at the training points.
    pub fitted: DVector<f64>,
    pub variant: FitVariant,
    /// Length-`n` weights of the kernel expansion: `w` or `S^T a`.
    pub expansion: DVector<f64>,
    /// Set when a pseudo-inverse dropped directions below [`PINV_RTOL`].
    pub rank_deficient: bool,
}

/// Observations `y_i = f*(x_i) + sigma w_i`.
#[derive(Debug, Clone)]
pub struct RegressionSample {
    pub pts: DesignPoints,
    pub y: DVector<f64>,
    pub fstar: Option<DVector<f64>>,
    pub sigma: f64,
}

impl RegressionSample {
    pub fn new(
        pts: DesignPoints,
        y: DVector<f64>,
        fstar: Option<DVector<f64>>,
        sigma: f64,
    ) -> Result<Self> {
        let n = pts.len();
        if y.len() != n || fstar.as_ref().is_some_and(|f| f.len() != n) {
            return Err(Error::domain("response lengths must match the design size"));
        }
        Ok(RegressionSample {
            pts,
            y,
            fstar,
            sigma,
        })
    }

    pub fn n(&self) -> usize {
        self.pts.len()
    }
}

fn check_lambda(lambda_n: f64) -> Result<()> {
    if !(lambda_n > 0.0 && lambda_n.is_finite()) {
        return Err(Error::domain(format!(
            "regularization must be positive and finite, got {lambda_n}"
        )));
    }
    Ok(())
}

fn check_len(what: &str, len: usize, n: usize) -> Result<()> {
    if len != n {
        return Err(Error::domain(format!("{what} has length {len}, expected {n}")));
    }
    Ok(())
}

fn check_sketch(s: &SketchOperator, n: usize) -> Result<()> {
    if s.n() != n {
        return Err(Error::domain(format!(
            "sketch acts on dimension {}, kernel has {n}",
            s.n()
        )));
    }
    Ok(())
}

/// Cholesky factorization of `K + 2 lambda I`, reusable across responses.
pub struct ExactSolver<'a> {
    k: &'a KernelMatrix,
    lambda_n: f64,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl<'a> ExactSolver<'a> {
    pub fn new(k: &'a KernelMatrix, lambda_n: f64) -> Result<Self> {
        check_lambda(lambda_n)?;
        let n = k.n();
        let shifted = k.matrix() + DMatrix::identity(n, n) * (2.0 * lambda_n);
        let chol = shifted
            .cholesky()
            .ok_or_else(|| Error::numerical("K + 2 lambda I is not positive definite"))?;
        Ok(ExactSolver { k, lambda_n, chol })
    }

    pub fn solve(&self, y: &DVector<f64>) -> Result<FitResult> {
        let n = self.k.n();
        check_len("response", y.len(), n)?;
        let sqrt_n = (n as f64).sqrt();
        let omega = self.chol.solve(&(y / sqrt_n));
        let fitted = self.k.matrix() * &omega * sqrt_n;
        Ok(FitResult {
            coefficients: omega.clone(),
            sketch: None,
            lambda_n: self.lambda_n,
            fitted,
            variant: FitVariant::Exact,
            expansion: omega,
            rank_deficient: false,
        })
    }
}

/// Exact KRR through the shifted system `(K + 2 lambda I) w = y / sqrt(n)`.
pub fn solve_krr(k: &KernelMatrix, y: &DVector<f64>, lambda_n: f64) -> Result<FitResult> {
    ExactSolver::new(k, lambda_n)?.solve(y)
}

/// Minimum-norm solution of a symmetric PSD system through its
/// eigendecomposition, truncating eigenvalues below `PINV_RTOL * max`.
/// Returns the solution and whether any direction was dropped.
fn pinv_solve(a: DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, bool)> {
    let (vals, vecs, truncated) = pinv_parts(a)?;
    let mut coords = vecs.tr_mul(b);
    for (c, &v) in coords.iter_mut().zip(vals.iter()) {
        *c = if v > 0.0 { *c / v } else { 0.0 };
    }
    Ok((vecs * coords, truncated))
}

/// Eigenpairs of a symmetric matrix with sub-threshold eigenvalues zeroed.
fn pinv_parts(a: DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>, bool)> {
    let sym = a.symmetric_eigen();
    if sym.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("eigensolver produced NaN in pseudo-inverse"));
    }
    let top = sym.eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let cut = PINV_RTOL * top;
    let mut truncated = false;
    let vals = sym.eigenvalues.map(|v| {
        if v > cut {
            v
        } else {
            truncated = true;
            0.0
        }
    });
    Ok((vals, sym.eigenvectors, truncated))
}

fn pinv(a: DMatrix<f64>) -> Result<(DMatrix<f64>, bool)> {
    let (vals, vecs, truncated) = pinv_parts(a)?;
    let inv = vals.map(|v| if v > 0.0 { 1.0 / v } else { 0.0 });
    let scaled = DMatrix::from_fn(vecs.nrows(), vecs.ncols(), |r, c| vecs[(r, c)] * inv[c]);
    Ok((scaled * vecs.transpose(), truncated))
}

fn symmetrize(a: DMatrix<f64>) -> DMatrix<f64> {
    (&a + a.transpose()) * 0.5
}

/// `(SK, S K S^T)` computed with one sketch pass over `K` and one over `(SK)^T`.
fn sketched_blocks(k: &KernelMatrix, s: &SketchOperator) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let sk = s.apply(k.matrix())?;
    let sks = symmetrize(s.apply(&sk.transpose())?);
    Ok((sk, sks))
}

/// Sketched KRR: solve `(S K^2 S^T + 2 lambda S K S^T) a = S K y / sqrt(n)`.
///
/// The `m x m` system is solved through a symmetric eigendecomposition; if
/// it is singular at working precision the minimum-norm solution is returned
/// and `rank_deficient` is set.
pub fn solve_sketched_krr(
    k: &KernelMatrix,
    y: &DVector<f64>,
    s: &SketchOperator,
    lambda_n: f64,
) -> Result<FitResult> {
    check_lambda(lambda_n)?;
    let n = k.n();
    check_len("response", y.len(), n)?;
    check_sketch(s, n)?;
    let sqrt_n = (n as f64).sqrt();

    let (sk, sks) = sketched_blocks(k, s)?;
    let system = symmetrize(&sk * sk.transpose() + sks * (2.0 * lambda_n));
    let rhs = &sk * y / sqrt_n;
    let (alpha, rank_deficient) = pinv_solve(system, &rhs)?;

    finish_sketched(s, &sk, alpha, lambda_n, FitVariant::Sketched, rank_deficient)
}

fn finish_sketched(
    s: &SketchOperator,
    sk: &DMatrix<f64>,
    alpha: DVector<f64>,
    lambda_n: f64,
    variant: FitVariant,
    rank_deficient: bool,
) -> Result<FitResult> {
    let sqrt_n = (s.n() as f64).sqrt();
    // K S^T a = (S K)^T a because K is symmetric.
    let fitted = sk.tr_mul(&alpha) * sqrt_n;
    let expansion = s.apply_transpose_vec(alpha.as_slice())?;
    Ok(FitResult {
        coefficients: alpha,
        sketch: Some(s.clone()),
        lambda_n,
        fitted,
        variant,
        expansion,
        rank_deficient,
    })
}

/// Sketched program on the noiseless values `z* = f*(x_i)`.
pub fn solve_zero_noise(
    k: &KernelMatrix,
    z_star: &DVector<f64>,
    s: &SketchOperator,
    lambda_n: f64,
) -> Result<FitResult> {
    solve_sketched_krr(k, z_star, s, lambda_n)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorDecomposition {
    /// `||f_dagger - f*||_n^2` for the zero-noise sketched fit.
    pub approx_err: f64,
    /// `||f_dagger - f_hat||_n^2`.
    pub est_err: f64,
    /// `||f_hat - f*||_n^2`.
    pub total_err: f64,
}

pub fn error_decomposition(
    k: &KernelMatrix,
    z_star: &DVector<f64>,
    y: &DVector<f64>,
    s: &SketchOperator,
    lambda_n: f64,
) -> Result<ErrorDecomposition> {
    let dagger = solve_zero_noise(k, z_star, s, lambda_n)?;
    let hat = solve_sketched_krr(k, y, s, lambda_n)?;
    Ok(ErrorDecomposition {
        approx_err: empirical_error(dagger.fitted.as_slice(), z_star.as_slice())?,
        est_err: empirical_error(dagger.fitted.as_slice(), hat.fitted.as_slice())?,
        total_err: empirical_error(hat.fitted.as_slice(), z_star.as_slice())?,
    })
}

/// Evaluate `f(x) = n^{-1/2} sum_i c_i k(x, x_i)` at each query point.
pub fn predict(
    fit: &FitResult,
    spec: &KernelSpec,
    train: &DesignPoints,
    query: &[f64],
) -> Result<DVector<f64>> {
    spec.validate()?;
    let n = train.len();
    check_len("fit expansion", fit.expansion.len(), n)?;
    if let Some(bad) = query.iter().find(|v| !v.is_finite()) {
        return Err(Error::domain(format!("query point {bad} is not finite")));
    }
    let cross = cross_kernel(spec, query, train.as_slice());
    Ok(cross * &fit.expansion / (n as f64).sqrt())
}

/// Squared empirical `L2(P_n)` distance `(1/n) sum (a_i - b_i)^2`.
pub fn empirical_error(fhat: &[f64], fstar: &[f64]) -> Result<f64> {
    if fhat.len() != fstar.len() {
        return Err(Error::domain(format!(
            "length mismatch: {} vs {}",
            fhat.len(),
            fstar.len()
        )));
    }
    if fhat.is_empty() {
        return Err(Error::domain("empirical error of empty vectors"));
    }
    let sum: f64 = fhat.iter().zip(fstar).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(sum / fhat.len() as f64)
}

/// Dual of the exact program:
/// `max_xi -(n / 4 lambda) xi^T K xi + xi^T y - (n/2) xi^T xi`,
/// with `w = sqrt(n) / (2 lambda) xi`. Returns `(xi, w)`.
pub fn solve_dual_krr(
    k: &KernelMatrix,
    y: &DVector<f64>,
    lambda_n: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    check_lambda(lambda_n)?;
    let n = k.n();
    check_len("response", y.len(), n)?;
    let xi = dual_stationary(k.matrix(), y, lambda_n)?;
    let omega = &xi * ((n as f64).sqrt() / (2.0 * lambda_n));
    Ok((xi, omega))
}

/// Solve `((n / 2 lambda) G + n I) xi = y` for a PSD `G`.
fn dual_stationary(g: &DMatrix<f64>, y: &DVector<f64>, lambda_n: f64) -> Result<DVector<f64>> {
    let nf = g.nrows() as f64;
    let mut system = symmetrize(g * (nf / (2.0 * lambda_n)));
    for i in 0..g.nrows() {
        system[(i, i)] += nf;
    }
    let chol = system
        .cholesky()
        .ok_or_else(|| Error::numerical("dual system is not positive definite"))?;
    Ok(chol.solve(y))
}

/// Sketched dual with the Nystrom surrogate `K~ = K S^T (S K S^T)^+ S K`,
/// recovering `a = sqrt(n) / (2 lambda) (S K S^T)^+ S K xi`.
pub fn solve_nystrom_dual(
    k: &KernelMatrix,
    y: &DVector<f64>,
    s: &SketchOperator,
    lambda_n: f64,
) -> Result<FitResult> {
    check_lambda(lambda_n)?;
    let n = k.n();
    check_len("response", y.len(), n)?;
    check_sketch(s, n)?;

    let (sk, sks) = sketched_blocks(k, s)?;
    let (sks_pinv, rank_deficient) = pinv(sks)?;
    if rank_deficient {
        log::debug!("S K S^T is rank deficient; using its pseudo-inverse");
    }
    let pinv_sk = &sks_pinv * &sk;
    let nystrom = sk.transpose() * &pinv_sk;
    let xi = dual_stationary(&nystrom, y, lambda_n)?;
    let alpha = pinv_sk * xi * ((n as f64).sqrt() / (2.0 * lambda_n));

    finish_sketched(s, &sk, alpha, lambda_n, FitVariant::NystromDual, rank_deficient)
}

/// Objective of the exact program at `w`.
pub fn krr_objective(k: &KernelMatrix, y: &DVector<f64>, lambda_n: f64, w: &DVector<f64>) -> f64 {
    let kw = k.matrix() * w;
    let sqrt_n = (k.n() as f64).sqrt();
    0.5 * kw.dot(&kw) - kw.dot(y) / sqrt_n + lambda_n * w.dot(&kw)
}

/// Objective of the sketched program at `a`.
pub fn sketched_objective(
    k: &KernelMatrix,
    y: &DVector<f64>,
    s: &SketchOperator,
    lambda_n: f64,
    alpha: &DVector<f64>,
) -> Result<f64> {
    let w = s.apply_transpose_vec(alpha.as_slice())?;
    Ok(krr_objective(k, y, lambda_n, &w))
}

/// Objective `(1/2n) ||z - sqrt(n) K S^T a||^2 + lambda ||sqrt(K) S^T a||^2`.
pub fn zero_noise_objective(
    k: &KernelMatrix,
    z_star: &DVector<f64>,
    s: &SketchOperator,
    lambda_n: f64,
    alpha: &DVector<f64>,
) -> Result<f64> {
    let n = k.n() as f64;
    let w = s.apply_transpose_vec(alpha.as_slice())?;
    let kw = k.matrix() * &w;
    let resid = z_star - &kw * n.sqrt();
    Ok(resid.dot(&resid) / (2.0 * n) + lambda_n * w.dot(&kw))
}
