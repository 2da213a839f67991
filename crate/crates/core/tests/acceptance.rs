//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//!
//! `cargo test -p krr-sketch --test acceptance` runs everything; pass
//! criterion numbers (`-- 7 9`) to run a subset.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use krr_sketch::bench::{
    flatness_ratio, read_csv, run_error_vs_n, summarize, upper_half, write_csv, Arm, Design,
    ExperimentConfig, FStar, LambdaRule, MRule, SummaryRow,
};
use krr_sketch::satisfiability::check_k_satisfiable_matrix;
use krr_sketch::{
    build_kernel_matrix, check_k_satisfiable, critical_radius, draw_sketch, error_decomposition,
    fwht, rate_exponent_check, solve_dual_krr, solve_krr, solve_nystrom_dual, solve_sketched_krr,
    ComplexityProfile, DesignPoints, KernelMatrix, KernelSpec, PopulationSpectrum, SketchKind,
    SketchOperator,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn random_points(rng: &mut ChaCha8Rng, n: usize) -> DesignPoints {
    DesignPoints::new((0..n).map(|_| rng.random::<f64>()).collect()).unwrap()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

fn sobolev_instance(rng: &mut ChaCha8Rng, n: usize) -> (KernelMatrix, DVector<f64>, f64) {
    let k = build_kernel_matrix(&KernelSpec::Sobolev1, &random_points(rng, n)).unwrap();
    let y = random_vec(rng, n);
    let lambda = 10f64.powf(rng.random_range(-4.0..-1.0));
    (k, y, lambda)
}

fn c1_identity_sketch() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for n in [8, 32, 128] {
        for _ in 0..10 {
            let (k, y, lambda) = sobolev_instance(&mut rng, n);
            let exact = solve_krr(&k, &y, lambda).unwrap();
            let id = SketchOperator::identity(n).unwrap();
            let sketched = solve_sketched_krr(&k, &y, &id, lambda).unwrap();
            worst = worst.max(rel_diff(&sketched.fitted, &exact.fitted));
        }
    }
    outcome(worst <= 1e-8, format!("max relative fitted difference {worst:.3e} (tol 1e-8)"))
}

fn c2_nystrom_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    let mut failures = 0;
    let mut cases = 0;
    for n in [32, 128] {
        for m in [4, 8, 16, n] {
            for seed in 0..50u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed * 1000 + n as u64 + m as u64);
                let (k, y, lambda) = sobolev_instance(&mut rng, n);
                let s = draw_sketch(SketchKind::SubSample, m, n, seed).unwrap();
                let primal = solve_sketched_krr(&k, &y, &s, lambda).unwrap();
                let dual = solve_nystrom_dual(&k, &y, &s, lambda).unwrap();
                let d = rel_diff(&dual.fitted, &primal.fitted);
                worst = worst.max(d);
                cases += 1;
                if d > 1e-8 {
                    failures += 1;
                }
            }
        }
    }
    outcome(
        failures == 0,
        format!("{failures}/{cases} cases above 1e-8, max relative difference {worst:.3e}"),
    )
}

fn c3_primal_dual() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(2..=64);
        let (k, y, lambda) = sobolev_instance(&mut rng, n);
        let primal = solve_krr(&k, &y, lambda).unwrap();
        let (_, omega) = solve_dual_krr(&k, &y, lambda).unwrap();
        worst = worst.max(rel_diff(&omega, &primal.coefficients));
    }
    outcome(worst <= 1e-8, format!("max relative coefficient difference {worst:.3e} (tol 1e-8)"))
}

fn naive_hadamard(v: &[f64]) -> Vec<f64> {
    let len = v.len();
    let c = 1.0 / (len as f64).sqrt();
    (0..len)
        .map(|i| {
            (0..len)
                .map(|j| {
                    let sign = if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
                    sign * c * v[j]
                })
                .sum()
        })
        .collect()
}

fn c4_fwht() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_fwht = 0.0f64;
    let mut len = 2;
    while len <= 1024 {
        let v: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fast = fwht(&v, true).unwrap();
        let slow = naive_hadamard(&v);
        for (a, b) in fast.iter().zip(&slow) {
            worst_fwht = worst_fwht.max((a - b).abs());
        }
        len *= 2;
    }
    let mut worst_ros = 0.0f64;
    for (n, m) in [(1, 1), (2, 1), (3, 2), (5, 5), (17, 4), (100, 10), (256, 32), (300, 64), (511, 20), (512, 512)] {
        let s = draw_sketch(SketchKind::Ros, m, n, n as u64).unwrap();
        let dense = s.materialize();
        let v = random_vec(&mut rng, n);
        let a = random_vec(&mut rng, m);
        let d1 = (s.apply_vec(v.as_slice()).unwrap() - &dense * &v).amax();
        let d2 = (s.apply_transpose_vec(a.as_slice()).unwrap() - dense.transpose() * &a).amax();
        worst_ros = worst_ros.max(d1).max(d2);
    }
    outcome(
        worst_fwht <= 1e-10 && worst_ros <= 1e-10,
        format!("fwht max error {worst_fwht:.3e}, ROS fast vs dense {worst_ros:.3e} (tol 1e-10)"),
    )
}

/// First `delta` on a uniform grid with `R(delta)/delta <= delta/sigma`,
/// refined by a second finer scan.
fn grid_scan_radius(mu: &[f64], n: usize, sigma: f64) -> f64 {
    let holds = |d: f64| {
        let r = (mu.iter().map(|&m| m.min(d * d)).sum::<f64>() / n as f64).sqrt();
        r / d <= d / sigma
    };
    let coarse = 1e-3;
    let mut k = 1u64;
    while !holds(k as f64 * coarse) {
        k += 1;
    }
    let lo = (k - 1) as f64 * coarse;
    let fine = 1e-7;
    let mut j = 1u64;
    while !holds(lo + j as f64 * fine) {
        j += 1;
    }
    lo + j as f64 * fine
}

fn c5_critical_radius() -> Outcome {
    let mut worst_rank_one = 0.0f64;
    for n in [10usize, 100, 1000] {
        let mut mu = vec![0.0; n];
        mu[0] = 1.0;
        let d = critical_radius(&mu, n, 1.0).unwrap();
        worst_rank_one = worst_rank_one.max((d - 1.0 / (n as f64).sqrt()).abs());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_scan = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(5..60);
        let mut mu: Vec<f64> = (0..n).map(|_| rng.random::<f64>().powi(3)).collect();
        mu.sort_by(|a, b| b.total_cmp(a));
        let sigma = rng.random_range(0.2..2.0);
        let d = critical_radius(&mu, n, sigma).unwrap();
        worst_scan = worst_scan.max((d - grid_scan_radius(&mu, n, sigma)).abs());
    }
    outcome(
        worst_rank_one <= 1e-6 && worst_scan <= 1e-5,
        format!("rank-one error {worst_rank_one:.3e} (tol 1e-6), grid-scan error {worst_scan:.3e} (tol 1e-5)"),
    )
}

fn c6_rate_exponents() -> Outcome {
    let start = Instant::now();
    let grid: Vec<usize> = (10..=16).map(|p| 1usize << p).collect();
    let sob = rate_exponent_check(&PopulationSpectrum::Sobolev1, &grid, 1.0).unwrap();
    let poly = rate_exponent_check(&PopulationSpectrum::Polynomial { degree: 2 }, &grid, 1.0).unwrap();
    let elapsed = start.elapsed();
    let pass = (-0.72..=-0.61).contains(&sob)
        && (-1.05..=-0.95).contains(&poly)
        && elapsed < Duration::from_secs(10);
    outcome(
        pass,
        format!(
            "sobolev slope {sob:.4} in [-0.72, -0.61], polynomial slope {poly:.4} in [-1.05, -0.95], {:.2}s (limit 10s)",
            elapsed.as_secs_f64()
        ),
    )
}

fn table(rows: &[SummaryRow], arm: Arm) -> Vec<&SummaryRow> {
    rows.iter().filter(|r| r.sketch == arm).collect()
}

fn mean_at(rows: &[SummaryRow], arm: Arm, n: usize) -> f64 {
    rows.iter().find(|r| r.sketch == arm && r.n == n).map_or(f64::NAN, |r| r.mean_error)
}

fn print_summary(rows: &[SummaryRow]) {
    for r in rows {
        println!(
            "    n={:<5} {:<10} mean_error={:.4e} stderr={:.2e} mean_rescaled={:.4} failures={}",
            r.n,
            r.sketch.name(),
            r.mean_error,
            r.stderr_error,
            r.mean_rescaled,
            r.failures
        );
    }
}

fn flatness(rows: &[SummaryRow], arm: Arm, ns: &[usize]) -> f64 {
    let v: Vec<f64> = table(rows, arm)
        .into_iter()
        .filter(|r| ns.contains(&r.n))
        .map(|r| r.mean_rescaled)
        .collect();
    flatness_ratio(&v).unwrap_or(f64::INFINITY)
}

const SWEEP_GRID: [usize; 6] = [32, 64, 128, 256, 512, 1024];

fn c7_sobolev_sweep() -> Outcome {
    let start = Instant::now();
    let config = ExperimentConfig {
        kernel: KernelSpec::Sobolev1,
        fstar: FStar::AbsShift,
        design: Design::UniformGrid,
        sigma: 1.0,
        n_grid: SWEEP_GRID.to_vec(),
        sketch_kinds: vec![Arm::Exact, Arm::Gaussian, Arm::Ros],
        m_rule: MRule::CubeRoot,
        lambda_rule: LambdaRule::TwoDeltaSq,
        trials: 100,
        base_seed: 0,
        record_wall_time: false,
    };
    let rows = summarize(&run_error_vs_n(&config).unwrap());
    let elapsed = start.elapsed();
    print_summary(&rows);

    let mut problems = Vec::new();
    let tail: Vec<usize> = SWEEP_GRID[1..].to_vec();
    let upper = upper_half(&SWEEP_GRID);
    for arm in [Arm::Exact, Arm::Gaussian, Arm::Ros] {
        let means: Vec<f64> = tail.iter().map(|&n| mean_at(&rows, arm, n)).collect();
        if !means.windows(2).all(|w| w[1] < w[0]) {
            problems.push(format!("{arm} error not strictly decreasing"));
        }
        let flat = flatness(&rows, arm, &upper);
        if flat > 3.0 {
            problems.push(format!("{arm} rescaled max/min {flat:.3} > 3"));
        }
    }
    let mut worst_ratio = 1.0f64;
    for &n in &SWEEP_GRID {
        let exact = mean_at(&rows, Arm::Exact, n);
        for arm in [Arm::Gaussian, Arm::Ros] {
            let r = mean_at(&rows, arm, n) / exact;
            worst_ratio = worst_ratio.max(r.max(1.0 / r));
            if !(0.5..=2.0).contains(&r) {
                problems.push(format!("{arm} at n={n} is {r:.3}x exact"));
            }
        }
    }
    if elapsed > Duration::from_secs(15 * 60) {
        problems.push(format!("runtime {:.0}s over 15 min", elapsed.as_secs_f64()));
    }
    let flats: Vec<String> = [Arm::Exact, Arm::Gaussian, Arm::Ros]
        .iter()
        .map(|&a| format!("{a} {:.3}", flatness(&rows, a, &upper)))
        .collect();
    outcome(
        problems.is_empty(),
        format!(
            "rescaled max/min [{}], worst sketched/exact factor {worst_ratio:.3}, {:.1}s{}",
            flats.join(", "),
            elapsed.as_secs_f64(),
            if problems.is_empty() { String::new() } else { format!("; {}", problems.join("; ")) }
        ),
    )
}

fn c8_gaussian_sweep() -> Outcome {
    let config = ExperimentConfig {
        kernel: KernelSpec::Gaussian { bandwidth: 0.25 },
        fstar: FStar::Quad,
        design: Design::UniformGrid,
        sigma: 1.0,
        n_grid: SWEEP_GRID.to_vec(),
        sketch_kinds: vec![Arm::Exact, Arm::Gaussian, Arm::Ros],
        m_rule: MRule::LogGauss,
        lambda_rule: LambdaRule::TwoDeltaSq,
        trials: 100,
        base_seed: 0,
        record_wall_time: false,
    };
    let rows = summarize(&run_error_vs_n(&config).unwrap());
    print_summary(&rows);
    let upper = upper_half(&SWEEP_GRID);
    let flats: Vec<(Arm, f64)> = [Arm::Exact, Arm::Gaussian, Arm::Ros]
        .iter()
        .map(|&a| (a, flatness(&rows, a, &upper)))
        .collect();
    outcome(
        flats.iter().all(|(_, f)| *f <= 3.0),
        format!(
            "rescaled max/min over n in {upper:?}: {} (limit 3)",
            flats.iter().map(|(a, f)| format!("{a} {f:.3}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

fn c9_irregular_design() -> Outcome {
    let n = 1024;
    let config = ExperimentConfig {
        kernel: KernelSpec::Gaussian { bandwidth: 0.25 },
        fstar: FStar::Quad,
        design: Design::Irregular,
        sigma: 1.0,
        n_grid: vec![n],
        sketch_kinds: vec![Arm::Exact, Arm::Gaussian, Arm::Ros, Arm::SubSample],
        m_rule: MRule::LogFour,
        lambda_rule: LambdaRule::TwoDeltaSq,
        trials: 100,
        base_seed: 0,
        record_wall_time: false,
    };
    let rows = summarize(&run_error_vs_n(&config).unwrap());
    print_summary(&rows);
    let exact = mean_at(&rows, Arm::Exact, n);
    let gauss = mean_at(&rows, Arm::Gaussian, n);
    let ros = mean_at(&rows, Arm::Ros, n);
    let sub = mean_at(&rows, Arm::SubSample, n);
    let gap = sub / gauss;
    let within = |r: f64| (0.5..=2.0).contains(&r);
    outcome(
        gap >= 3.0 && within(gauss / exact) && within(ros / exact),
        format!(
            "subsample/gaussian {gap:.3} (need >= 3), gaussian/exact {:.3}, ros/exact {:.3} (need within 2x)",
            gauss / exact,
            ros / exact
        ),
    )
}

fn c10_satisfiability() -> Outcome {
    let n = 256;
    let pts = DesignPoints::new((1..=n).map(|i| i as f64 / n as f64).collect()).unwrap();
    let k = build_kernel_matrix(&KernelSpec::Sobolev1, &pts).unwrap();
    let p = ComplexityProfile::from_kernel(&k, 1.0).unwrap();
    let u1t: DMatrix<f64> = k.eigen().unwrap().vectors.columns(0, p.d_n).transpose();
    let r = check_k_satisfiable_matrix(&u1t, &k, &p, 4.0).unwrap();
    let exact_ok = r.lhs_isometry <= 1e-10 && r.lhs_tail <= 1e-10 && r.pass;

    let m = 6 * p.d_n;
    let passes = (0..100u64)
        .filter(|&seed| {
            let s = draw_sketch(SketchKind::Gaussian, m, n, seed).unwrap();
            check_k_satisfiable(&s, &k, &p, 4.0).unwrap().pass
        })
        .count();
    outcome(
        exact_ok && passes >= 90,
        format!(
            "U1^T gives ({:.1e}, {:.1e}, {}); gaussian m={m} (d_n={}) passes {passes}/100 (need >= 90)",
            r.lhs_isometry, r.lhs_tail, r.pass, p.d_n
        ),
    )
}

fn c11_error_decomposition() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut violations = 0;
    let mut worst_slack = f64::INFINITY;
    let kinds = [SketchKind::Gaussian, SketchKind::Ros, SketchKind::SubSample];
    for i in 0..1000 {
        let n = rng.random_range(4..40);
        let spec = if i % 2 == 0 {
            KernelSpec::Sobolev1
        } else {
            KernelSpec::Gaussian {
                bandwidth: rng.random_range(0.1..1.0),
            }
        };
        let k = build_kernel_matrix(&spec, &random_points(&mut rng, n)).unwrap();
        let z = random_vec(&mut rng, n);
        let y = &z + random_vec(&mut rng, n);
        let m = rng.random_range(1..=n);
        let s = draw_sketch(kinds[i % 3], m, n, i as u64).unwrap();
        let lambda = 10f64.powf(rng.random_range(-4.0..0.0));
        let d = error_decomposition(&k, &z, &y, &s, lambda).unwrap();
        let slack = d.approx_err + d.est_err - 0.5 * d.total_err;
        worst_slack = worst_slack.min(slack);
        if slack < -1e-12 {
            violations += 1;
        }
    }
    outcome(
        violations == 0,
        format!("{violations}/1000 violations beyond 1e-12, smallest slack {worst_slack:.3e}"),
    )
}

fn c12_determinism() -> Outcome {
    let config = ExperimentConfig {
        kernel: KernelSpec::Gaussian { bandwidth: 0.25 },
        fstar: FStar::Quad,
        design: Design::Irregular,
        n_grid: vec![16, 40, 64],
        sketch_kinds: vec![Arm::Exact, Arm::Gaussian, Arm::Ros, Arm::SubSample],
        m_rule: MRule::LogFour,
        trials: 5,
        base_seed: 12,
        ..ExperimentConfig::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    let first = run_error_vs_n(&config).unwrap();
    write_csv(&first, &a).unwrap();
    write_csv(&run_error_vs_n(&config).unwrap(), &b).unwrap();
    let identical = std::fs::read(&a).unwrap() == std::fs::read(&b).unwrap();
    let lossless = read_csv(&a).unwrap() == first;
    outcome(
        identical && lossless,
        format!("{} rows, byte-identical {identical}, round-trip lossless {lossless}", first.len()),
    )
}

type Criterion = (u32, &'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 12] = [
    (1, "identity-sketch equivalence", c1_identity_sketch),
    (2, "Nystrom equivalence", c2_nystrom_equivalence),
    (3, "primal-dual consistency", c3_primal_dual),
    (4, "FWHT and ROS oracles", c4_fwht),
    (5, "critical radius closed form and grid scan", c5_critical_radius),
    (6, "population rate exponents", c6_rate_exponents),
    (7, "Sobolev error-vs-n sweep", c7_sobolev_sweep),
    (8, "Gaussian-kernel error-vs-n sweep", c8_gaussian_sweep),
    (9, "irregular-design sketch comparison", c9_irregular_design),
    (10, "K-satisfiability certificate", c10_satisfiability),
    (11, "error decomposition inequality", c11_error_decomposition),
    (12, "determinism and CSV round trip", c12_determinism),
];

fn main() {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (id, name, run) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        let tag = if result.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {id:>2} {tag}: {name}: {} [{:.1}s]",
            result.detail,
            start.elapsed().as_secs_f64()
        );
        if !result.pass {
            failed.push(id);
        }
    }
    if !failed.is_empty() {
        println!("acceptance: {} criterion(s) failed: {failed:?}", failed.len());
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
