use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::kernel::DesignPoints;
use crate::solver::RegressionSample;

/// True regression function.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FStar {
    /// `|x + 0.5| - 0.5`
    AbsShift,
    /// `-1 + 2 x^2`
    Quad,
}

impl FStar {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            FStar::AbsShift => (x + 0.5).abs() - 0.5,
            FStar::Quad => -1.0 + 2.0 * x * x,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            FStar::AbsShift => "abs_shift",
            FStar::Quad => "quad",
        }
    }
}

impl FromStr for FStar {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match normalize(s).as_str() {
            "abs_shift" => Ok(FStar::AbsShift),
            "quad" => Ok(FStar::Quad),
            other => Err(Error::domain(format!("unknown regression function `{other}`"))),
        }
    }
}

impl fmt::Display for FStar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How the covariates are laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Design {
    /// `x_i = i / n` for `i = 1..n`.
    UniformGrid,
    /// `n - k` points uniform on `[0, 1/2]` and `k = ceil(sqrt(n))` points at
    /// `1 + z_i` with `z_i ~ N(0, 1/n)`.
    Irregular,
    /// i.i.d. uniform on `[0, 1]`.
    IidUniform,
}

impl Design {
    pub fn name(&self) -> &'static str {
        match self {
            Design::UniformGrid => "uniform_grid",
            Design::Irregular => "irregular",
            Design::IidUniform => "iid_uniform",
        }
    }

    /// Whether the design is the same for every seed.
    pub fn is_deterministic(&self) -> bool {
        matches!(self, Design::UniformGrid)
    }
}

impl FromStr for Design {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match normalize(s).as_str() {
            "uniform_grid" => Ok(Design::UniformGrid),
            "irregular" => Ok(Design::Irregular),
            "iid_uniform" => Ok(Design::IidUniform),
            other => Err(Error::domain(format!("unknown design `{other}`"))),
        }
    }
}

impl fmt::Display for Design {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub(crate) fn normalize(s: &str) -> String {
    s.trim().to_ascii_lowercase().replace('-', "_")
}

/// Smallest `k` with `k * k >= n`.
pub fn ceil_sqrt(n: usize) -> usize {
    let mut k = (n as f64).sqrt() as usize;
    while k * k < n {
        k += 1;
    }
    while k > 0 && (k - 1) * (k - 1) >= n {
        k -= 1;
    }
    k
}

/// Draw `n` covariates from a design.
pub fn design_points<R: Rng>(design: Design, n: usize, rng: &mut R) -> Result<DesignPoints> {
    let x = match design {
        Design::UniformGrid => (1..=n).map(|i| i as f64 / n as f64).collect(),
        Design::IidUniform => (0..n).map(|_| rng.random::<f64>()).collect(),
        Design::Irregular => {
            let k = ceil_sqrt(n).min(n);
            let sd = 1.0 / (n as f64).sqrt();
            let mut x: Vec<f64> = (0..n - k).map(|_| 0.5 * rng.random::<f64>()).collect();
            x.extend((0..k).map(|_| {
                let z: f64 = rng.sample(StandardNormal);
                1.0 + sd * z
            }));
            x
        }
    };
    DesignPoints::new(x)
}

/// Draw one dataset `y_i = f*(x_i) + sigma w_i` from the configured model.
pub fn generate_data(config: &ExperimentConfig, n: usize, seed: u64) -> Result<RegressionSample> {
    if n < 2 {
        return Err(Error::domain(format!("sample size must be at least 2, got {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = design_points(config.design, n, &mut rng)?;
    let fstar = DVector::from_iterator(n, pts.as_slice().iter().map(|&x| config.fstar.eval(x)));
    let y = DVector::from_fn(n, |i, _| {
        let w: f64 = rng.sample(StandardNormal);
        fstar[i] + config.sigma * w
    });
    RegressionSample::new(pts, y, Some(fstar), config.sigma)
}
