//! Random sketch matrices: Gaussian, randomized orthogonal system (ROS) built
//! on the Walsh-Hadamard transform, and row sub-sampling.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SketchKind {
    Gaussian,
    Ros,
    SubSample,
}

impl SketchKind {
    pub fn name(&self) -> &'static str {
        match self {
            SketchKind::Gaussian => "gaussian",
            SketchKind::Ros => "ros",
            SketchKind::SubSample => "subsample",
        }
    }
}

impl fmt::Display for SketchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SketchKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(SketchKind::Gaussian),
            "ros" => Ok(SketchKind::Ros),
            "subsample" | "sub-sample" | "sub_sample" | "nystrom" => Ok(SketchKind::SubSample),
            other => Err(Error::domain(format!("unknown sketch kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum State {
    /// Dense `m x n` matrix with i.i.d. `N(0, 1/m)` entries.
    Gaussian(DMatrix<f64>),
    /// Rows `p_i` of the padded Hadamard matrix applied after a random sign flip.
    Ros {
        n_pad: usize,
        signs: Vec<f64>,
        rows: Vec<usize>,
    },
    /// Rows `p_i` of the identity.
    SubSample { rows: Vec<usize> },
}

/// An `m x n` sketch matrix with a fast apply path.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchOperator {
    kind: SketchKind,
    m: usize,
    n: usize,
    seed: u64,
    state: State,
}

/// Draw a sketch; deterministic in `(kind, m, n, seed)`.
pub fn draw_sketch(kind: SketchKind, m: usize, n: usize, seed: u64) -> Result<SketchOperator> {
    if m == 0 || m > n {
        return Err(Error::domain(format!(
            "sketch dimension must satisfy 1 <= m <= n, got m={m}, n={n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let state = match kind {
        SketchKind::Gaussian => {
            let sd = 1.0 / (m as f64).sqrt();
            // Row-major fill so the stream order does not depend on storage layout.
            let mut s = DMatrix::zeros(m, n);
            for i in 0..m {
                for j in 0..n {
                    let z: f64 = rng.sample(StandardNormal);
                    s[(i, j)] = sd * z;
                }
            }
            State::Gaussian(s)
        }
        SketchKind::Ros => {
            let n_pad = n.next_power_of_two();
            let signs = (0..n_pad)
                .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect();
            let rows = sample_without_replacement(&mut rng, n_pad, m);
            State::Ros { n_pad, signs, rows }
        }
        SketchKind::SubSample => State::SubSample {
            rows: sample_without_replacement(&mut rng, n, m),
        },
    };
    Ok(SketchOperator {
        kind,
        m,
        n,
        seed,
        state,
    })
}

/// Partial Fisher-Yates: the first `m` slots of a shuffled `0..population`.
fn sample_without_replacement<R: Rng>(rng: &mut R, population: usize, m: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..population).collect();
    for i in 0..m {
        let j = rng.random_range(i..population);
        idx.swap(i, j);
    }
    idx.truncate(m);
    idx
}

impl SketchOperator {
    /// Sub-sampling sketch with explicit (0-based) row indices.
    pub fn subsample_rows(n: usize, rows: Vec<usize>) -> Result<Self> {
        let m = rows.len();
        if m == 0 || m > n {
            return Err(Error::domain(format!(
                "sketch dimension must satisfy 1 <= m <= n, got m={m}, n={n}"
            )));
        }
        let mut seen = vec![false; n];
        for &r in &rows {
            if r >= n || seen[r] {
                return Err(Error::domain(format!("row index {r} out of range or repeated")));
            }
            seen[r] = true;
        }
        Ok(SketchOperator {
            kind: SketchKind::SubSample,
            m,
            n,
            seed: 0,
            state: State::SubSample { rows },
        })
    }

    /// The `n x n` identity, viewed as a sub-sampling sketch keeping every row.
    pub fn identity(n: usize) -> Result<Self> {
        Self::subsample_rows(n, (0..n).collect())
    }

    pub fn kind(&self) -> SketchKind {
        self.kind
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Sampled row indices for ROS and sub-sampling sketches.
    pub fn rows(&self) -> Option<&[usize]> {
        match &self.state {
            State::Gaussian(_) => None,
            State::Ros { rows, .. } | State::SubSample { rows } => Some(rows),
        }
    }

    fn scale(&self) -> f64 {
        (self.n as f64 / self.m as f64).sqrt()
    }

    fn check_rows(&self, rows: usize) -> Result<()> {
        if rows != self.n {
            return Err(Error::domain(format!(
                "sketch expects {} rows, got {rows}",
                self.n
            )));
        }
        Ok(())
    }

    /// `S v` for a length-`n` vector.
    pub fn apply_vec(&self, v: &[f64]) -> Result<DVector<f64>> {
        self.check_rows(v.len())?;
        let mut out = DVector::zeros(self.m);
        self.apply_into(v, out.as_mut_slice(), &mut Vec::new());
        Ok(out)
    }

    /// `S M` for an `n x k` matrix.
    pub fn apply(&self, mat: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_rows(mat.nrows())?;
        if let State::Gaussian(s) = &self.state {
            return Ok(s * mat);
        }
        let mut out = DMatrix::zeros(self.m, mat.ncols());
        let mut buf = Vec::new();
        for (col, mut dst) in mat.column_iter().zip(out.column_iter_mut()) {
            self.apply_into(col.as_slice(), dst.as_mut_slice(), &mut buf);
        }
        Ok(out)
    }

    fn apply_into(&self, v: &[f64], out: &mut [f64], buf: &mut Vec<f64>) {
        let scale = self.scale();
        match &self.state {
            State::Gaussian(s) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = s.row(i).iter().zip(v).map(|(a, b)| a * b).sum();
                }
            }
            State::Ros { n_pad, signs, rows } => {
                buf.clear();
                buf.extend(v.iter().zip(signs).map(|(x, r)| x * r));
                buf.resize(*n_pad, 0.0);
                fwht_unchecked(buf, true);
                for (o, &p) in out.iter_mut().zip(rows) {
                    *o = scale * buf[p];
                }
            }
            State::SubSample { rows } => {
                for (o, &p) in out.iter_mut().zip(rows) {
                    *o = scale * v[p];
                }
            }
        }
    }

    /// `S^T a` for a length-`m` vector.
    pub fn apply_transpose_vec(&self, a: &[f64]) -> Result<DVector<f64>> {
        if a.len() != self.m {
            return Err(Error::domain(format!(
                "sketch transpose expects {} entries, got {}",
                self.m,
                a.len()
            )));
        }
        let scale = self.scale();
        let out = match &self.state {
            State::Gaussian(s) => s.tr_mul(&DVector::from_column_slice(a)),
            State::Ros { n_pad, signs, rows } => {
                let mut buf = vec![0.0; *n_pad];
                for (&p, &x) in rows.iter().zip(a) {
                    buf[p] = scale * x;
                }
                fwht_unchecked(&mut buf, true);
                DVector::from_iterator(self.n, buf.iter().zip(signs).take(self.n).map(|(x, r)| x * r))
            }
            State::SubSample { rows } => {
                let mut out = DVector::zeros(self.n);
                for (&p, &x) in rows.iter().zip(a) {
                    out[p] = scale * x;
                }
                out
            }
        };
        Ok(out)
    }

    /// Dense `m x n` matrix, built entrywise without the fast transform.
    pub fn materialize(&self) -> DMatrix<f64> {
        let scale = self.scale();
        match &self.state {
            State::Gaussian(s) => s.clone(),
            State::Ros { n_pad, signs, rows } => {
                let h = 1.0 / (*n_pad as f64).sqrt();
                DMatrix::from_fn(self.m, self.n, |i, j| {
                    let parity = (rows[i] & j).count_ones() & 1;
                    let hij = if parity == 0 { h } else { -h };
                    scale * hij * signs[j]
                })
            }
            State::SubSample { rows } => {
                let mut s = DMatrix::zeros(self.m, self.n);
                for (i, &p) in rows.iter().enumerate() {
                    s[(i, p)] = scale;
                }
                s
            }
        }
    }
}

/// Walsh-Hadamard transform of a power-of-two length vector.
///
/// With `normalized` the transform is orthonormal (entries `+-1/sqrt(len)`)
/// and therefore its own inverse.
pub fn fwht(v: &[f64], normalized: bool) -> Result<Vec<f64>> {
    let mut out = v.to_vec();
    fwht_in_place(&mut out, normalized)?;
    Ok(out)
}

pub fn fwht_in_place(v: &mut [f64], normalized: bool) -> Result<()> {
    if v.is_empty() || !v.len().is_power_of_two() {
        return Err(Error::domain(format!(
            "Hadamard transform length must be a power of two, got {}",
            v.len()
        )));
    }
    fwht_unchecked(v, normalized);
    Ok(())
}

fn fwht_unchecked(v: &mut [f64], normalized: bool) {
    let len = v.len();
    let mut h = 1;
    while h < len {
        for block in v.chunks_exact_mut(2 * h) {
            let (a, b) = block.split_at_mut(h);
            for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                let (s, d) = (*x + *y, *x - *y);
                *x = s;
                *y = d;
            }
        }
        h *= 2;
    }
    if normalized {
        let c = 1.0 / (len as f64).sqrt();
        v.iter_mut().for_each(|x| *x *= c);
    }
}
