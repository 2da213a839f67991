//! Block-diagonal instance on which uniform sub-sampling can miss a whole
//! block of the kernel matrix.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::data::FStar;
use super::experiment::derive_seed;
use crate::complexity::ComplexityProfile;
use crate::error::{Error, Result};
use crate::kernel::{KernelMatrix, KernelSpec};
use crate::sketch::{draw_sketch, SketchKind, SketchOperator};
use crate::solver::{empirical_error, solve_nystrom_dual, solve_sketched_krr, FitResult};

const BANDWIDTH: f64 = 0.25;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NystromFailureReport {
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub seed: u64,
    pub lambda: f64,
    /// No sub-sampled row falls in the second block.
    pub missed_block: bool,
    pub subsample_error: f64,
    pub gaussian_error: f64,
    /// Largest change of the block-2 fitted values when every block-2
    /// response is shifted by one.
    pub subsample_block2_sensitivity: f64,
    pub gaussian_block2_sensitivity: f64,
}

/// Compare a sub-sampling (Nystrom) sketch with a Gaussian sketch on
/// `diag(K1, K2)`, where `K1` covers `n - k` grid points in `(0, 1/2]` and
/// `K2` covers `k` points near 1, both under a Gaussian kernel.
pub fn run_nystrom_failure_demo(n: usize, m: usize, k: usize, seed: u64) -> Result<NystromFailureReport> {
    if n < 2 || m < 1 || m > n {
        return Err(Error::domain(format!("need 1 <= m <= n and n >= 2, got n={n}, m={m}")));
    }
    let k_max = ((n as f64 / m as f64) * std::f64::consts::LN_2).ceil() as usize;
    if k < 1 || k >= n || k > k_max {
        return Err(Error::domain(format!(
            "second block size must satisfy 1 <= k <= ceil((n/m) ln 2) = {k_max} and k < n, got {k}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, n, 0, 0));
    let n1 = n - k;
    let mut x: Vec<f64> = (1..=n1).map(|i| 0.5 * i as f64 / n1 as f64).collect();
    let sd = 1.0 / (n as f64).sqrt();
    x.extend((0..k).map(|_| {
        let z: f64 = rng.sample(StandardNormal);
        1.0 + sd * z
    }));

    let spec = KernelSpec::Gaussian { bandwidth: BANDWIDTH };
    let block = |i: usize| usize::from(i >= n1);
    let kmat = KernelMatrix::from_matrix(DMatrix::from_fn(n, n, |i, j| {
        if block(i) == block(j) {
            spec.eval_unchecked(x[i], x[j]) / n as f64
        } else {
            0.0
        }
    }))?;

    let fstar = DVector::from_iterator(n, x.iter().map(|&v| FStar::Quad.eval(v)));
    let y = DVector::from_fn(n, |i, _| {
        let w: f64 = rng.sample(StandardNormal);
        fstar[i] + w
    });
    let mut y_shift = y.clone();
    for i in n1..n {
        y_shift[i] += 1.0;
    }

    let profile = ComplexityProfile::from_kernel(&kmat, 1.0)?;
    let lambda = 2.0 * profile.delta_n_sq;

    let sub = draw_sketch(SketchKind::SubSample, m, n, derive_seed(seed, n, 3, 0))?;
    let gauss = draw_sketch(SketchKind::Gaussian, m, n, derive_seed(seed, n, 1, 0))?;
    let missed_block = sub.rows().is_some_and(|rows| rows.iter().all(|&r| r < n1));

    let sensitivity = |fit: &FitResult, s: &SketchOperator, nystrom: bool| -> Result<f64> {
        let shifted = if nystrom {
            solve_nystrom_dual(&kmat, &y_shift, s, lambda)?
        } else {
            solve_sketched_krr(&kmat, &y_shift, s, lambda)?
        };
        Ok((n1..n)
            .map(|i| (shifted.fitted[i] - fit.fitted[i]).abs())
            .fold(0.0, f64::max))
    };

    let sub_fit = solve_nystrom_dual(&kmat, &y, &sub, lambda)?;
    let gauss_fit = solve_sketched_krr(&kmat, &y, &gauss, lambda)?;

    Ok(NystromFailureReport {
        n,
        m,
        k,
        seed,
        lambda,
        missed_block,
        subsample_error: empirical_error(sub_fit.fitted.as_slice(), fstar.as_slice())?,
        gaussian_error: empirical_error(gauss_fit.fitted.as_slice(), fstar.as_slice())?,
        subsample_block2_sensitivity: sensitivity(&sub_fit, &sub, true)?,
        gaussian_block2_sensitivity: sensitivity(&gauss_fit, &gauss, false)?,
    })
}
