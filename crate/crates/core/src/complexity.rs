//! Kernel complexity, critical radius and statistical dimension.
//!
//! For a spectrum `mu_1 >= ... >= mu_n >= 0` the kernel complexity is
//! `R(delta) = sqrt((1/n) sum_j min(delta^2, mu_j))` and the critical radius
//! is the smallest `delta > 0` with `R(delta) / delta <= delta / sigma`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{KernelMatrix, KernelSpec};

/// Noise level, critical radius and statistical dimension of one spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplexityProfile {
    pub sigma: f64,
    pub delta_n: f64,
    pub delta_n_sq: f64,
    pub d_n: usize,
    pub n: usize,
}

impl ComplexityProfile {
    /// Profile of a descending spectrum normalized by `n`.
    pub fn from_spectrum(mu_hat: &[f64], n: usize, sigma: f64) -> Result<Self> {
        let delta_n = critical_radius(mu_hat, n, sigma)?;
        Ok(ComplexityProfile {
            sigma,
            delta_n,
            delta_n_sq: delta_n * delta_n,
            d_n: statistical_dimension(mu_hat, delta_n),
            n,
        })
    }

    pub fn from_kernel(k: &KernelMatrix, sigma: f64) -> Result<Self> {
        Self::from_spectrum(k.eigenvalues()?, k.n(), sigma)
    }
}

fn check_spectrum(mu_hat: &[f64], n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::domain("sample count must be at least 1"));
    }
    if let Some(bad) = mu_hat.iter().find(|v| **v < 0.0 || !v.is_finite()) {
        return Err(Error::domain(format!(
            "eigenvalues must be finite and nonnegative, got {bad}"
        )));
    }
    Ok(())
}

#[inline]
fn complexity_unchecked(mu_hat: &[f64], n: usize, delta: f64) -> f64 {
    let d2 = delta * delta;
    let sum: f64 = mu_hat.iter().map(|&m| m.min(d2)).sum();
    (sum / n as f64).sqrt()
}

/// `R(delta)`: the rescaled eigenvalue sum truncated at `delta^2`.
pub fn kernel_complexity(mu_hat: &[f64], n: usize, delta: f64) -> Result<f64> {
    check_spectrum(mu_hat, n)?;
    if delta.is_nan() || delta < 0.0 {
        return Err(Error::domain(format!("delta must be nonnegative, got {delta}")));
    }
    Ok(complexity_unchecked(mu_hat, n, delta))
}

const MAX_BISECTIONS: usize = 200;
const RADIUS_RTOL: f64 = 1e-10;

/// Smallest positive `delta` with `R(delta)/delta <= delta/sigma`.
///
/// `g(delta) = R(delta)/delta - delta/sigma` is strictly decreasing, so the
/// root is bracketed by doubling (or halving) from `min(sigma, 1e-3)` and
/// then bisected to `1e-10` relative width. Returns `0` for an all-zero
/// spectrum, where the inequality holds for every `delta > 0`.
pub fn critical_radius(mu_hat: &[f64], n: usize, sigma: f64) -> Result<f64> {
    check_spectrum(mu_hat, n)?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!("sigma must be positive, got {sigma}")));
    }
    if mu_hat.iter().all(|&m| m == 0.0) {
        return Ok(0.0);
    }
    let g = |d: f64| complexity_unchecked(mu_hat, n, d) / d - d / sigma;

    let start = sigma.min(1e-3);
    let (mut lo, mut hi);
    if g(start) > 0.0 {
        lo = start;
        hi = 2.0 * start;
        while g(hi) > 0.0 {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::numerical("critical radius bracket diverged"));
            }
        }
    } else {
        hi = start;
        lo = 0.5 * start;
        while g(lo) <= 0.0 {
            hi = lo;
            lo *= 0.5;
            if lo == 0.0 {
                return Err(Error::numerical("critical radius bracket collapsed to zero"));
            }
        }
    }

    for _ in 0..MAX_BISECTIONS {
        if hi - lo <= RADIUS_RTOL * hi {
            return Ok(hi);
        }
        let mid = 0.5 * (lo + hi);
        if g(mid) <= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(Error::numerical(format!(
        "critical radius bisection did not converge in {MAX_BISECTIONS} steps"
    )))
}

/// Number of eigenvalues strictly above `delta_n^2`.
pub fn statistical_dimension(mu_hat: &[f64], delta_n: f64) -> usize {
    let d2 = delta_n * delta_n;
    mu_hat.iter().filter(|&&m| m > d2).count()
}

/// Population eigenvalue models for the built-in kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PopulationSpectrum {
    /// `D + 1` unit eigenvalues followed by zeros.
    Polynomial { degree: u32 },
    /// `exp(-pi h^2 j^2)`.
    Gaussian { bandwidth: f64 },
    /// `(2 / ((2j - 1) pi))^2`.
    Sobolev1,
}

impl From<KernelSpec> for PopulationSpectrum {
    fn from(spec: KernelSpec) -> Self {
        match spec {
            KernelSpec::Polynomial { degree } => PopulationSpectrum::Polynomial { degree },
            KernelSpec::Gaussian { bandwidth } => PopulationSpectrum::Gaussian { bandwidth },
            KernelSpec::Sobolev1 => PopulationSpectrum::Sobolev1,
        }
    }
}

impl PopulationSpectrum {
    /// Eigenvalue `mu_j` for `j >= 1`.
    pub fn eigenvalue(&self, j: usize) -> f64 {
        let jf = j as f64;
        match *self {
            PopulationSpectrum::Polynomial { degree } => {
                if j <= degree as usize + 1 {
                    1.0
                } else {
                    0.0
                }
            }
            PopulationSpectrum::Gaussian { bandwidth } => {
                (-std::f64::consts::PI * bandwidth * bandwidth * jf * jf).exp()
            }
            PopulationSpectrum::Sobolev1 => {
                let r = 2.0 / ((2.0 * jf - 1.0) * std::f64::consts::PI);
                r * r
            }
        }
    }
}

/// The first `j_max` population eigenvalues.
pub fn population_eigenvalues(spec: &PopulationSpectrum, j_max: usize) -> Result<Vec<f64>> {
    if j_max == 0 {
        return Err(Error::domain("j_max must be at least 1"));
    }
    Ok((1..=j_max).map(|j| spec.eigenvalue(j)).collect())
}

/// Least-squares slope of `ln delta_n^2` against `ln n`, with `delta_n`
/// computed from the population spectrum truncated at `j_max = n`.
pub fn rate_exponent_check(spec: &PopulationSpectrum, n_grid: &[usize], sigma: f64) -> Result<f64> {
    if n_grid.len() < 4 {
        return Err(Error::domain("rate check needs at least four sample sizes"));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("sample sizes must be strictly increasing"));
    }
    let mut pts = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let mu = population_eigenvalues(spec, n)?;
        let delta = critical_radius(&mu, n, sigma)?;
        pts.push(((n as f64).ln(), (delta * delta).ln()));
    }
    Ok(least_squares_slope(&pts))
}

pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> f64 {
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}
