use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{Arm, ExperimentConfig, LambdaRule, MRule, MAX_N, MAX_TRIALS};
use super::data::generate_data;
use super::records::TrialRecord;
use crate::complexity::ComplexityProfile;
use crate::error::{Error, Result};
use crate::kernel::{build_kernel_matrix, KernelMatrix, KernelSpec};
use crate::satisfiability::recommended_sketch_dim;
use crate::sketch::{draw_sketch, SketchKind};
use crate::solver::{empirical_error, solve_sketched_krr, ExactSolver};

/// Stream code reserved for data generation in [`derive_seed`].
pub const DATA_STREAM: u64 = 7;

/// Factor that makes the minimax rate of a kernel flat in `n`:
/// `n^{2/3}` (Sobolev), `n / sqrt(ln n)` (Gaussian), `n` (polynomial).
pub fn rate_factor(kernel: &KernelSpec, n: usize) -> f64 {
    let nf = n as f64;
    match kernel {
        KernelSpec::Sobolev1 => nf.powf(2.0 / 3.0),
        KernelSpec::Gaussian { .. } => nf / nf.ln().sqrt(),
        KernelSpec::Polynomial { .. } => nf,
    }
}

fn ceil_cbrt(n: usize) -> usize {
    let mut k = (n as f64).cbrt().round() as usize;
    while k * k * k < n {
        k += 1;
    }
    while k > 0 && (k - 1) * (k - 1) * (k - 1) >= n {
        k -= 1;
    }
    k
}

/// Sketch dimension for a rule, clamped to `[1, n]`.
pub fn sketch_dim(rule: MRule, kind: SketchKind, n: usize, d_n: usize) -> usize {
    let log_root = (n as f64).ln().sqrt();
    let m = match rule {
        MRule::CubeRoot => ceil_cbrt(n),
        MRule::LogGauss => (1.25 * log_root).ceil() as usize,
        MRule::LogFour => (4.0 * log_root).ceil() as usize,
        MRule::Fixed(m) => m,
        MRule::StatDim(c) => recommended_sketch_dim(kind, d_n, n, c),
    };
    m.clamp(1, n.max(1))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-trial seed. The packing `(n << 32) | (stream << 29) | trial` is
/// injective for `n < 2^32`, `stream < 8`, `trial < 2^29`, and every later
/// step is a bijection of `u64`, so distinct triples never share a seed.
pub fn derive_seed(base: u64, n: usize, stream: u64, trial: usize) -> u64 {
    debug_assert!(n <= MAX_N && stream < 8 && trial < MAX_TRIALS);
    let packed = ((n as u64) << 32) | (stream << 29) | trial as u64;
    splitmix64(base ^ splitmix64(packed))
}

/// Kernel matrix, profile and exact factorization shared across trials.
struct Shared {
    k: KernelMatrix,
    profile: ComplexityProfile,
    lambda: f64,
}

impl Shared {
    fn new(config: &ExperimentConfig, k: KernelMatrix) -> Result<Self> {
        let profile = ComplexityProfile::from_kernel(&k, config.sigma)?;
        let lambda = match config.lambda_rule {
            LambdaRule::TwoDeltaSq => 2.0 * profile.delta_n_sq,
            LambdaRule::Fixed(l) => l,
        };
        Ok(Shared { k, profile, lambda })
    }
}

/// Monte Carlo sweep over `n_grid x arms x trials`. Every arm in a trial
/// sees the same dataset. Rows come back sorted by `(n, arm, trial)`.
pub fn run_error_vs_n(config: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    let mut out = Vec::with_capacity(config.n_grid.len() * config.sketch_kinds.len() * config.trials);
    for &n in &config.n_grid {
        let shared = if config.design.is_deterministic() {
            let setup = generate_data(config, n, derive_seed(config.base_seed, n, DATA_STREAM, 0))
                .and_then(|sample| build_kernel_matrix(&config.kernel, &sample.pts))
                .and_then(|k| Shared::new(config, k));
            match setup {
                Ok(s) => Some(s),
                Err(e) => {
                    for &arm in &config.sketch_kinds {
                        out.extend((0..config.trials).map(|t| failure_row(config, n, arm, t, &e)));
                    }
                    continue;
                }
            }
        } else {
            None
        };
        let solver = match &shared {
            Some(s) if config.sketch_kinds.contains(&Arm::Exact) => ExactSolver::new(&s.k, s.lambda).ok(),
            _ => None,
        };
        let fixed = shared.as_ref().map(|s| (s, solver.as_ref()));

        let rows: Vec<Vec<TrialRecord>> = (0..config.trials)
            .into_par_iter()
            .map(|trial| run_trial(config, n, trial, fixed))
            .collect();
        out.extend(rows.into_iter().flatten());
    }
    out.sort_by_key(|r| (r.n, r.sketch, r.trial));
    Ok(out)
}

fn failure_row(config: &ExperimentConfig, n: usize, arm: Arm, trial: usize, e: &Error) -> TrialRecord {
    log::warn!("n={n} arm={arm} trial={trial} failed: {e}");
    TrialRecord {
        n,
        m: 0,
        sketch: arm,
        trial,
        seed: derive_seed(config.base_seed, n, arm.code(), trial),
        lambda: f64::NAN,
        delta_n_sq: f64::NAN,
        d_n: 0,
        error: f64::NAN,
        rescaled_error: f64::NAN,
        wall_time_ms: 0.0,
    }
}

fn run_trial(
    config: &ExperimentConfig,
    n: usize,
    trial: usize,
    fixed: Option<(&Shared, Option<&ExactSolver<'_>>)>,
) -> Vec<TrialRecord> {
    let failed = |arm: Arm, e: &Error| failure_row(config, n, arm, trial, e);

    let start = Instant::now();
    let prepared = (|| {
        let sample = generate_data(config, n, derive_seed(config.base_seed, n, DATA_STREAM, trial))?;
        let own = match fixed {
            Some(_) => None,
            None => Some(Shared::new(config, build_kernel_matrix(&config.kernel, &sample.pts)?)?),
        };
        Ok::<_, Error>((sample, own))
    })();
    let setup_ms = start.elapsed().as_secs_f64() * 1e3;
    let (sample, own) = match prepared {
        Ok(p) => p,
        Err(e) => return config.sketch_kinds.iter().map(|&a| failed(a, &e)).collect(),
    };
    let (shared, cached_exact) = match (&own, fixed) {
        (Some(s), _) => (s, None),
        (None, Some((s, e))) => (s, e),
        (None, None) => unreachable!(),
    };
    let fstar = sample.fstar.as_ref().expect("generated data carries f*");
    let factor = rate_factor(&config.kernel, n);

    config
        .sketch_kinds
        .iter()
        .map(|&arm| {
            let seed = derive_seed(config.base_seed, n, arm.code(), trial);
            let t0 = Instant::now();
            let fit = (|| {
                let (m, fit) = match arm.sketch_kind() {
                    None => {
                        let fit = match cached_exact {
                            Some(solver) => solver.solve(&sample.y)?,
                            None => ExactSolver::new(&shared.k, shared.lambda)?.solve(&sample.y)?,
                        };
                        (n, fit)
                    }
                    Some(kind) => {
                        let m = sketch_dim(config.m_rule, kind, n, shared.profile.d_n);
                        let s = draw_sketch(kind, m, n, seed)?;
                        (m, solve_sketched_krr(&shared.k, &sample.y, &s, shared.lambda)?)
                    }
                };
                let error = empirical_error(fit.fitted.as_slice(), fstar.as_slice())?;
                Ok::<_, Error>((m, error))
            })();
            match fit {
                Ok((m, error)) => TrialRecord {
                    n,
                    m,
                    sketch: arm,
                    trial,
                    seed,
                    lambda: shared.lambda,
                    delta_n_sq: shared.profile.delta_n_sq,
                    d_n: shared.profile.d_n,
                    error,
                    rescaled_error: error * factor,
                    wall_time_ms: if config.record_wall_time {
                        setup_ms + t0.elapsed().as_secs_f64() * 1e3
                    } else {
                        0.0
                    },
                },
                Err(e) => failed(arm, &e),
            }
        })
        .collect()
}

/// Mean and standard error per `(n, arm)` over successful trials.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub n: usize,
    pub sketch: Arm,
    pub trials: usize,
    pub failures: usize,
    pub mean_error: f64,
    pub stderr_error: f64,
    pub mean_rescaled: f64,
    pub stderr_rescaled: f64,
}

fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let k = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / k;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

pub fn summarize(records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(usize, Arm), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.n, r.sketch)).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|((n, sketch), rows)| {
            let ok: Vec<&TrialRecord> = rows.iter().copied().filter(|r| !r.is_failure()).collect();
            let errors: Vec<f64> = ok.iter().map(|r| r.error).collect();
            let rescaled: Vec<f64> = ok.iter().map(|r| r.rescaled_error).collect();
            let (mean_error, stderr_error) = mean_stderr(&errors);
            let (mean_rescaled, stderr_rescaled) = mean_stderr(&rescaled);
            SummaryRow {
                n,
                sketch,
                trials: ok.len(),
                failures: rows.len() - ok.len(),
                mean_error,
                stderr_error,
                mean_rescaled,
                stderr_rescaled,
            }
        })
        .collect()
}

/// `max / min` of a set of positive values.
pub fn flatness_ratio(values: &[f64]) -> Result<f64> {
    if values.is_empty() || values.iter().any(|v| v.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) || !v.is_finite()) {
        return Err(Error::domain("flatness needs finite positive values"));
    }
    let max = values.iter().copied().fold(f64::MIN, f64::max);
    let min = values.iter().copied().fold(f64::MAX, f64::min);
    Ok(max / min)
}

/// The larger half of a sample-size grid (the middle entry included when
/// the length is odd).
pub fn upper_half(n_grid: &[usize]) -> Vec<usize> {
    let mut g = n_grid.to_vec();
    g.sort_unstable();
    g.split_off(g.len() / 2)
}
