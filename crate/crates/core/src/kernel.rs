//! Kernel functions, the empirical kernel matrix and its spectrum.

use std::fmt;
use std::sync::OnceLock;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// One of the three built-in scalar kernels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// `(1 + u v)^degree`, a finite-rank kernel of rank at most `degree + 1`.
    Polynomial { degree: u32 },
    /// `exp(-(u - v)^2 / (2 h^2))`.
    Gaussian { bandwidth: f64 },
    /// `min(u, v)` on `[0, 1]`, generating the first-order Sobolev space.
    Sobolev1,
}

impl KernelSpec {
    pub fn polynomial(degree: u32) -> Result<Self> {
        let spec = KernelSpec::Polynomial { degree };
        spec.validate()?;
        Ok(spec)
    }

    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        let spec = KernelSpec::Gaussian { bandwidth };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Polynomial { degree } if degree < 1 => {
                Err(Error::domain("polynomial degree must be at least 1"))
            }
            KernelSpec::Gaussian { bandwidth } if !(bandwidth > 0.0 && bandwidth.is_finite()) => {
                Err(Error::domain(format!(
                    "gaussian bandwidth must be positive and finite, got {bandwidth}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Evaluate without validation; callers check parameters and inputs once.
    #[inline]
    pub(crate) fn eval_unchecked(&self, u: f64, v: f64) -> f64 {
        match *self {
            KernelSpec::Polynomial { degree } => (1.0 + u * v).powi(degree as i32),
            KernelSpec::Gaussian { bandwidth } => {
                let d = u - v;
                (-d * d / (2.0 * bandwidth * bandwidth)).exp()
            }
            KernelSpec::Sobolev1 => u.min(v),
        }
    }
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::Polynomial { degree } => write!(f, "polynomial(D={degree})"),
            KernelSpec::Gaussian { bandwidth } => write!(f, "gaussian(h={bandwidth})"),
            KernelSpec::Sobolev1 => f.write_str("sobolev1"),
        }
    }
}

/// Evaluate a kernel at a pair of scalar covariates.
pub fn kernel_eval(spec: &KernelSpec, u: f64, v: f64) -> Result<f64> {
    spec.validate()?;
    if !u.is_finite() || !v.is_finite() {
        return Err(Error::domain(format!(
            "kernel inputs must be finite, got ({u}, {v})"
        )));
    }
    Ok(spec.eval_unchecked(u, v))
}

/// Scalar design covariates `x_1, ..., x_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignPoints(Vec<f64>);

impl DesignPoints {
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::domain("design must contain at least one point"));
        }
        if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::domain(format!("design point {bad} is not finite")));
        }
        Ok(DesignPoints(x))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for DesignPoints {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Orthonormal eigenvectors (columns) with eigenvalues sorted descending.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub vectors: DMatrix<f64>,
    pub values: Vec<f64>,
}

/// Empirical kernel matrix `K_ij = k(x_i, x_j) / n` with a lazily computed,
/// immutable spectral cache.
#[derive(Debug)]
pub struct KernelMatrix {
    k: DMatrix<f64>,
    spectrum: OnceLock<Vec<f64>>,
    eigen: OnceLock<Eigen>,
}

impl Clone for KernelMatrix {
    fn clone(&self) -> Self {
        KernelMatrix {
            k: self.k.clone(),
            spectrum: self.spectrum.clone(),
            eigen: self.eigen.clone(),
        }
    }
}

/// Relative threshold below which negative eigenvalues count as round-off.
const NEGATIVE_EIGEN_TOL: f64 = 1e-10;

impl KernelMatrix {
    /// Wrap an explicit symmetric matrix. Asymmetry above `1e-12` relative is
    /// rejected; smaller asymmetry is averaged away.
    pub fn from_matrix(k: DMatrix<f64>) -> Result<Self> {
        if !k.is_square() || k.nrows() == 0 {
            return Err(Error::domain(format!(
                "kernel matrix must be square and non-empty, got {}x{}",
                k.nrows(),
                k.ncols()
            )));
        }
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("kernel matrix has non-finite entries"));
        }
        let scale = k.amax().max(1.0);
        let asym = (&k - k.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::domain(format!(
                "kernel matrix is not symmetric (max asymmetry {asym:e})"
            )));
        }
        let k = (&k + k.transpose()) * 0.5;
        Ok(Self::from_symmetric(k))
    }

    fn from_symmetric(k: DMatrix<f64>) -> Self {
        KernelMatrix {
            k,
            spectrum: OnceLock::new(),
            eigen: OnceLock::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.k.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.k
    }

    /// Eigenvalues sorted descending and clamped at zero.
    ///
    /// Uses a values-only solver unless the full decomposition is already
    /// cached.
    pub fn eigenvalues(&self) -> Result<&[f64]> {
        if let Some(e) = self.eigen.get() {
            return Ok(&e.values);
        }
        if let Some(s) = self.spectrum.get() {
            return Ok(s);
        }
        let raw = self.k.clone().symmetric_eigenvalues();
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("eigenvalue computation produced NaN"));
        }
        let mut values: Vec<f64> = raw.iter().copied().collect();
        values.sort_by(|a, b| b.total_cmp(a));
        clamp_spectrum(&mut values)?;
        let _ = self.spectrum.set(values);
        Ok(self.spectrum.get().expect("spectrum was just set"))
    }

    /// Full eigendecomposition `K = U diag(mu) U^T`, cached after the first call.
    pub fn eigen(&self) -> Result<&Eigen> {
        if let Some(e) = self.eigen.get() {
            return Ok(e);
        }
        let e = decompose(&self.k)?;
        let _ = self.eigen.set(e);
        Ok(self.eigen.get().expect("eigen was just set"))
    }
}

fn decompose(k: &DMatrix<f64>) -> Result<Eigen> {
    let n = k.nrows();
    let sym = k.clone().symmetric_eigen();
    if sym.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("symmetric eigensolver produced NaN"));
    }
    // Stable sort keeps the solver's order among ties.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| sym.eigenvalues[b].total_cmp(&sym.eigenvalues[a]));

    let mut values: Vec<f64> = order.iter().map(|&i| sym.eigenvalues[i]).collect();
    clamp_spectrum(&mut values)?;
    let vectors = DMatrix::from_fn(n, n, |r, c| sym.eigenvectors[(r, order[c])]);
    Ok(Eigen { vectors, values })
}

fn clamp_spectrum(values: &mut [f64]) -> Result<()> {
    let top = values.first().copied().unwrap_or(0.0).max(0.0);
    let floor = -NEGATIVE_EIGEN_TOL * top;
    for v in values.iter_mut() {
        if *v < floor {
            return Err(Error::numerical(format!(
                "kernel matrix is not positive semidefinite: eigenvalue {v:e} below {floor:e}"
            )));
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(())
}

/// Build the empirical kernel matrix with the `1/n` normalization.
pub fn build_kernel_matrix(spec: &KernelSpec, pts: &DesignPoints) -> Result<KernelMatrix> {
    spec.validate()?;
    let x = pts.as_slice();
    if matches!(spec, KernelSpec::Sobolev1) && x.iter().any(|v| !(0.0..=1.0).contains(v)) {
        log::warn!("sobolev1 kernel evaluated on covariates outside [0, 1]");
    }
    let n = x.len();
    let inv_n = 1.0 / n as f64;
    let mut k = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in j..n {
            let v = spec.eval_unchecked(x[i], x[j]) * inv_n;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    if k.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical(format!("{spec} kernel overflowed on these covariates")));
    }
    Ok(KernelMatrix::from_symmetric(k))
}

/// Full symmetric eigendecomposition of `K`; see [`KernelMatrix::eigen`].
pub fn eigendecompose(k: &KernelMatrix) -> Result<(&DMatrix<f64>, &[f64])> {
    let e = k.eigen()?;
    Ok((&e.vectors, &e.values))
}

/// Evaluate the kernel between every query and every training point,
/// returning a `queries x n` matrix of raw (unnormalized) kernel values.
pub(crate) fn cross_kernel(spec: &KernelSpec, query: &[f64], train: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(query.len(), train.len(), |i, j| {
        spec.eval_unchecked(query[i], train[j])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, seed: u64) -> DesignPoints {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DesignPoints::new((0..n).map(|_| rng.random::<f64>()).collect()).unwrap()
    }

    #[test]
    fn eval_examples() {
        let sob = KernelSpec::Sobolev1;
        assert_eq!(kernel_eval(&sob, 0.3, 0.7).unwrap(), 0.3);
        let poly = KernelSpec::polynomial(2).unwrap();
        assert_eq!(kernel_eval(&poly, 1.0, 1.0).unwrap(), 4.0);
        let gauss = KernelSpec::gaussian(0.25).unwrap();
        assert_eq!(kernel_eval(&gauss, 0.9, 0.9).unwrap(), 1.0);
        assert_abs_diff_eq!(
            kernel_eval(&gauss, 0.0, 0.5).unwrap(),
            (-2.0f64).exp(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(kernel_eval(&gauss, 0.0, 0.5).unwrap(), 0.1353353, epsilon = 1e-7);
    }

    #[test]
    fn eval_rejects_bad_input() {
        assert!(matches!(
            kernel_eval(&KernelSpec::Sobolev1, f64::NAN, 0.0),
            Err(Error::Domain(_))
        ));
        assert!(KernelSpec::gaussian(0.0).is_err());
        assert!(KernelSpec::gaussian(-1.0).is_err());
        assert!(KernelSpec::polynomial(0).is_err());
        assert!(DesignPoints::new(vec![]).is_err());
        assert!(DesignPoints::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn matrix_examples() {
        let pts = DesignPoints::new(vec![0.5, 1.0]).unwrap();
        let k = build_kernel_matrix(&KernelSpec::Sobolev1, &pts).unwrap();
        assert_eq!(k.matrix(), &DMatrix::from_row_slice(2, 2, &[0.25, 0.25, 0.25, 0.5]));

        let one = DesignPoints::new(vec![0.4]).unwrap();
        let g = KernelSpec::gaussian(0.3).unwrap();
        let k1 = build_kernel_matrix(&g, &one).unwrap();
        assert_eq!(k1.matrix()[(0, 0)], 1.0);

        let zeros = DesignPoints::new(vec![0.0, 0.0]).unwrap();
        let kp = build_kernel_matrix(&KernelSpec::polynomial(1).unwrap(), &zeros).unwrap();
        assert_eq!(kp.matrix(), &DMatrix::from_element(2, 2, 0.5));
    }

    #[test]
    fn two_by_two_spectrum() {
        let k = KernelMatrix::from_matrix(DMatrix::from_row_slice(
            2,
            2,
            &[0.25, 0.25, 0.25, 0.5],
        ))
        .unwrap();
        let (_, mu) = eigendecompose(&k).unwrap();
        let s5 = 5f64.sqrt();
        assert_abs_diff_eq!(mu[0], (3.0 + s5) / 8.0, epsilon = 1e-14);
        assert_abs_diff_eq!(mu[1], (3.0 - s5) / 8.0, epsilon = 1e-14);
        assert_abs_diff_eq!(mu[0], 0.654508, epsilon = 1e-6);
        assert_abs_diff_eq!(mu[1], 0.095492, epsilon = 1e-6);
    }

    #[test]
    fn identity_and_zero_spectra() {
        let n = 7;
        let k = KernelMatrix::from_matrix(DMatrix::identity(n, n) / n as f64).unwrap();
        for mu in k.eigenvalues().unwrap() {
            assert_abs_diff_eq!(*mu, 1.0 / n as f64, epsilon = 1e-15);
        }
        let z = KernelMatrix::from_matrix(DMatrix::zeros(4, 4)).unwrap();
        assert!(z.eigen().unwrap().values.iter().all(|&v| v == 0.0));
        assert!(z.eigenvalues().unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let k = KernelMatrix::from_matrix(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]))
            .unwrap();
        assert!(matches!(k.eigen(), Err(Error::Numerical(_))));
        assert!(matches!(k.eigenvalues(), Err(Error::Numerical(_))));
    }

    #[test]
    fn asymmetric_matrix_is_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(KernelMatrix::from_matrix(m), Err(Error::Domain(_))));
    }

    #[test]
    fn polynomial_rank_is_bounded() {
        for degree in 1..=4u32 {
            let spec = KernelSpec::polynomial(degree).unwrap();
            let pts = random_points(40, degree as u64);
            let k = build_kernel_matrix(&spec, &pts).unwrap();
            let mu = k.eigenvalues().unwrap();
            let big = mu.iter().filter(|&&v| v > 1e-8 * mu[0]).count();
            assert!(big <= degree as usize + 1, "degree {degree}: {big} large eigenvalues");
        }
    }

    #[test]
    fn values_only_and_full_spectra_agree() {
        let pts = random_points(50, 3);
        let spec = KernelSpec::gaussian(0.2).unwrap();
        let a = build_kernel_matrix(&spec, &pts).unwrap();
        let b = a.clone();
        let s = a.eigenvalues().unwrap();
        let e = b.eigen().unwrap();
        for (x, y) in s.iter().zip(&e.values) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-13);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn decomposition_invariants(n in 1usize..=96, seed in any::<u64>(), which in 0usize..3) {
            let spec = [
                KernelSpec::Sobolev1,
                KernelSpec::Gaussian { bandwidth: 0.3 },
                KernelSpec::Polynomial { degree: 3 },
            ][which];
            let k = build_kernel_matrix(&spec, &random_points(n, seed)).unwrap();
            let m = k.matrix();
            prop_assert_eq!((m - m.transpose()).amax(), 0.0);
            let e = k.eigen().unwrap();
            let u = &e.vectors;
            let recon = u * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(e.values.clone())) * u.transpose();
            prop_assert!((&recon - m).norm() <= 1e-8 * m.norm().max(1.0));
            let gram = u.transpose() * u;
            prop_assert!((gram - DMatrix::identity(n, n)).amax() <= 1e-10);
            prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(e.values.iter().all(|&v| v >= 0.0));
            let tr: f64 = m.diagonal().sum();
            let sum: f64 = e.values.iter().sum();
            prop_assert!((tr - sum).abs() <= 1e-10 * tr.abs().max(1e-300));
        }

        #[test]
        fn kernels_are_symmetric_and_psd(
            xs in proptest::collection::vec(0.0f64..1.0, 1..12),
            ws in proptest::collection::vec(-1.0f64..1.0, 12),
            which in 0usize..3,
        ) {
            let spec = [
                KernelSpec::Sobolev1,
                KernelSpec::Gaussian { bandwidth: 0.1 },
                KernelSpec::Polynomial { degree: 4 },
            ][which];
            let mut quad = 0.0;
            for (i, &u) in xs.iter().enumerate() {
                for (j, &v) in xs.iter().enumerate() {
                    let kuv = kernel_eval(&spec, u, v).unwrap();
                    prop_assert_eq!(kuv, kernel_eval(&spec, v, u).unwrap());
                    quad += ws[i] * ws[j] * kuv;
                }
            }
            prop_assert!(quad >= -1e-10);
        }
    }
}
