use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use krr_sketch::bench::{
    derive_seed, generate_data, run_error_vs_n, run_nystrom_failure_demo, sketch_dim, summarize,
    write_csv, Arm, Design, ExperimentConfig, FStar, LambdaRule, MRule, TrialRecord, DATA_STREAM,
};
use krr_sketch::{
    build_kernel_matrix, check_k_satisfiable, draw_sketch, ComplexityProfile, KernelSpec,
    SketchKind,
};

/// Kernel ridge regression with randomized sketches.
#[derive(Parser)]
#[command(name = "krr-sketch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one simulated dataset and print its error and complexity profile.
    Fit(FitArgs),
    /// Print the critical radius and statistical dimension of a kernel matrix.
    CriticalRadius(ProblemArgs),
    /// Check whether a drawn sketch is K-satisfiable.
    CheckSketch(CheckArgs),
    /// Run a Monte Carlo sweep from a config file and write a CSV.
    Bench(BenchArgs),
    /// Compare sub-sampling and Gaussian sketches on a block-diagonal kernel.
    DemoNystromFailure(DemoArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelName {
    Sobolev1,
    Gaussian,
    Polynomial,
}

#[derive(Clone, Copy, ValueEnum)]
enum MRuleName {
    Cuberoot,
    Loggauss,
    Logfour,
    Fixed,
    Statdim,
}

#[derive(Clone, Copy, ValueEnum)]
enum LambdaRuleName {
    #[value(alias = "two_delta_sq")]
    TwoDeltaSq,
    Fixed,
}

fn parse_with<T: std::str::FromStr<Err = krr_sketch::Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: krr_sketch::Error| e.to_string())
}

#[derive(Args)]
struct ProblemArgs {
    #[arg(long, value_enum, default_value = "sobolev1")]
    kernel: KernelName,
    /// Gaussian kernel bandwidth.
    #[arg(long)]
    bandwidth: Option<f64>,
    /// Polynomial kernel degree.
    #[arg(long)]
    degree: Option<u32>,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// uniform-grid, irregular or iid-uniform.
    #[arg(long, default_value = "uniform-grid", value_parser = parse_with::<Design>)]
    design: Design,
    /// abs-shift or quad.
    #[arg(long, default_value = "abs-shift", value_parser = parse_with::<FStar>)]
    fstar: FStar,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

impl ProblemArgs {
    fn kernel(&self) -> Result<KernelSpec> {
        let spec = match self.kernel {
            KernelName::Sobolev1 => KernelSpec::Sobolev1,
            KernelName::Gaussian => KernelSpec::gaussian(
                self.bandwidth
                    .ok_or_else(|| anyhow!("--bandwidth is required for the gaussian kernel"))?,
            )?,
            KernelName::Polynomial => KernelSpec::polynomial(
                self.degree
                    .ok_or_else(|| anyhow!("--degree is required for the polynomial kernel"))?,
            )?,
        };
        Ok(spec)
    }

    fn config(&self) -> Result<ExperimentConfig> {
        Ok(ExperimentConfig {
            kernel: self.kernel()?,
            fstar: self.fstar,
            design: self.design,
            sigma: self.sigma,
            n_grid: vec![self.n],
            trials: 1,
            base_seed: self.seed,
            ..ExperimentConfig::default()
        })
    }
}

#[derive(Args)]
struct RuleArgs {
    #[arg(long, value_enum, default_value = "cuberoot")]
    m_rule: MRuleName,
    #[arg(long)]
    m_fixed: Option<usize>,
    #[arg(long)]
    c_statdim: Option<f64>,
}

impl RuleArgs {
    fn m_rule(&self) -> Result<MRule> {
        Ok(match self.m_rule {
            MRuleName::Cuberoot => MRule::CubeRoot,
            MRuleName::Loggauss => MRule::LogGauss,
            MRuleName::Logfour => MRule::LogFour,
            MRuleName::Fixed => MRule::Fixed(
                self.m_fixed
                    .ok_or_else(|| anyhow!("--m-fixed is required with --m-rule fixed"))?,
            ),
            MRuleName::Statdim => MRule::StatDim(
                self.c_statdim
                    .ok_or_else(|| anyhow!("--c-statdim is required with --m-rule statdim"))?,
            ),
        })
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// exact, gaussian, ros or subsample.
    #[arg(long, default_value = "exact", value_parser = parse_with::<Arm>)]
    sketch: Arm,
    #[command(flatten)]
    rule: RuleArgs,
    #[arg(long, value_enum, default_value = "two-delta-sq")]
    lambda_rule: LambdaRuleName,
    #[arg(long)]
    lambda_fixed: Option<f64>,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// gaussian, ros or subsample.
    #[arg(long, default_value = "gaussian", value_parser = parse_with::<SketchKind>)]
    sketch: SketchKind,
    /// Sketch dimension; overrides --m-rule.
    #[arg(long)]
    m: Option<usize>,
    #[command(flatten)]
    rule: RuleArgs,
    #[arg(long, default_value_t = krr_sketch::satisfiability::DEFAULT_C_THRESHOLD)]
    c_threshold: f64,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Record wall-clock times (output is then no longer reproducible).
    #[arg(long)]
    timing: bool,
    /// Suppress the per-(n, sketch) summary table.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long, default_value_t = 256)]
    n: usize,
    #[arg(long, default_value_t = 16)]
    m: usize,
    /// Size of the second block; defaults to the largest allowed, ceil((n/m) ln 2).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Fit(args) => fit(args),
        Command::CriticalRadius(args) => critical_radius(args),
        Command::CheckSketch(args) => check_sketch(args),
        Command::Bench(args) => bench(args),
        Command::DemoNystromFailure(args) => demo(args),
    }
}

fn record_json(r: &TrialRecord) -> serde_json::Value {
    json!({
        "n": r.n,
        "m": r.m,
        "sketch": r.sketch.name(),
        "seed": r.seed,
        "lambda": r.lambda,
        "delta_n_sq": r.delta_n_sq,
        "d_n": r.d_n,
        "error": r.error,
        "rescaled_error": r.rescaled_error,
    })
}

fn fit(args: FitArgs) -> Result<()> {
    let mut config = args.problem.config()?;
    config.sketch_kinds = vec![args.sketch];
    config.m_rule = args.rule.m_rule()?;
    config.lambda_rule = match args.lambda_rule {
        LambdaRuleName::TwoDeltaSq => LambdaRule::TwoDeltaSq,
        LambdaRuleName::Fixed => LambdaRule::Fixed(
            args.lambda_fixed
                .ok_or_else(|| anyhow!("--lambda-fixed is required with --lambda-rule fixed"))?,
        ),
    };
    let records = run_error_vs_n(&config)?;
    let r = records.first().context("sweep returned no rows")?;
    if r.is_failure() {
        bail!("fit failed; rerun with RUST_LOG=warn for details");
    }
    match args.problem.format {
        Format::Json => println!("{}", record_json(r)),
        Format::Text => println!(
            "n={} sketch={} m={} lambda={:.6e} delta_n_sq={:.6e} d_n={} error={:.6e} rescaled_error={:.6e}",
            r.n, r.sketch, r.m, r.lambda, r.delta_n_sq, r.d_n, r.error, r.rescaled_error
        ),
    }
    Ok(())
}

fn profile_for(args: &ProblemArgs) -> Result<(krr_sketch::KernelMatrix, ComplexityProfile)> {
    let config = args.config()?;
    config.validate()?;
    let sample = generate_data(&config, args.n, derive_seed(args.seed, args.n, DATA_STREAM, 0))?;
    let k = build_kernel_matrix(&config.kernel, &sample.pts)?;
    let profile = ComplexityProfile::from_kernel(&k, args.sigma)?;
    Ok((k, profile))
}

fn critical_radius(args: ProblemArgs) -> Result<()> {
    let (_, p) = profile_for(&args)?;
    match args.format {
        Format::Json => println!("{}", serde_json::to_string(&p)?),
        Format::Text => println!(
            "n={} sigma={} delta_n={:.10e} delta_n_sq={:.10e} d_n={}",
            p.n, p.sigma, p.delta_n, p.delta_n_sq, p.d_n
        ),
    }
    Ok(())
}

fn check_sketch(args: CheckArgs) -> Result<()> {
    let (k, p) = profile_for(&args.problem)?;
    let n = args.problem.n;
    let m = match args.m {
        Some(m) => m,
        None => sketch_dim(args.rule.m_rule()?, args.sketch, n, p.d_n),
    };
    let s = draw_sketch(args.sketch, m, n, derive_seed(args.problem.seed, n, Arm::from(args.sketch) as u64, 0))?;
    let r = check_k_satisfiable(&s, &k, &p, args.c_threshold)?;
    match args.problem.format {
        Format::Json => {
            let mut v = serde_json::to_value(r)?;
            v["sketch"] = json!(args.sketch.name());
            v["m"] = json!(m);
            println!("{v}");
        }
        Format::Text => println!(
            "sketch={} m={} d_n={} delta_n={:.6e} lhs_isometry={:.6e} lhs_tail={:.6e} c_threshold={} pass={}",
            args.sketch, m, r.d_n, r.delta_n, r.lhs_isometry, r.lhs_tail, r.c_threshold, r.pass
        ),
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let mut config = ExperimentConfig::from_file(&args.config)?;
    config.record_wall_time = args.timing;
    let records = run_error_vs_n(&config)?;
    write_csv(&records, &args.out)?;
    if !args.quiet {
        println!("{:>6} {:>10} {:>6} {:>14} {:>14} {:>14}", "n", "sketch", "trials", "mean_error", "stderr", "mean_rescaled");
        for row in summarize(&records) {
            println!(
                "{:>6} {:>10} {:>6} {:>14.6e} {:>14.6e} {:>14.6e}",
                row.n, row.sketch.name(), row.trials, row.mean_error, row.stderr_error, row.mean_rescaled
            );
        }
    }
    let failures = records.iter().filter(|r| r.is_failure()).count();
    if failures > 0 {
        eprintln!("warning: {failures} trial(s) failed and were recorded as NaN rows");
    }
    Ok(())
}

fn demo(args: DemoArgs) -> Result<()> {
    let k = match args.k {
        Some(k) => k,
        None => {
            if args.m == 0 {
                bail!("--m must be at least 1");
            }
            ((args.n as f64 / args.m as f64) * std::f64::consts::LN_2).ceil() as usize
        }
    };
    let r = run_nystrom_failure_demo(args.n, args.m, k, args.seed)?;
    match args.format {
        Format::Json => println!("{}", serde_json::to_string(&r)?),
        Format::Text => {
            println!("n={} m={} k={} seed={} lambda={:.6e}", r.n, r.m, r.k, r.seed, r.lambda);
            println!("subsample missed second block: {}", r.missed_block);
            println!(
                "subsample: error={:.6e} block2_sensitivity={:.6e}",
                r.subsample_error, r.subsample_block2_sensitivity
            );
            println!(
                "gaussian:  error={:.6e} block2_sensitivity={:.6e}",
                r.gaussian_error, r.gaussian_block2_sensitivity
            );
        }
    }
    Ok(())
}
