//! Experiment configuration and its flat `key = value` file format.
//!
//! ```text
//! # comments start with '#'
//! kernel = sobolev1          # sobolev1 | gaussian | polynomial
//! bandwidth = 0.25           # gaussian only
//! degree = 2                 # polynomial only
//! fstar = abs_shift          # abs_shift | quad
//! design = uniform_grid      # uniform_grid | irregular | iid_uniform
//! sigma = 1
//! n_grid = 32, 64, 128
//! sketches = exact, gaussian, ros, subsample
//! m_rule = cuberoot          # cuberoot | loggauss | logfour | fixed | statdim
//! m_fixed = 10               # with m_rule = fixed
//! c_statdim = 2              # with m_rule = statdim
//! lambda_rule = two_delta_sq # two_delta_sq | fixed
//! lambda_fixed = 0.01        # with lambda_rule = fixed
//! trials = 100
//! seed = 0
//! ```

use std::collections::HashMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::data::{normalize, Design, FStar};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::sketch::SketchKind;

/// One arm of a sweep: exact KRR or a sketch family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arm {
    Exact,
    Gaussian,
    Ros,
    SubSample,
}

impl Arm {
    pub fn sketch_kind(&self) -> Option<SketchKind> {
        match self {
            Arm::Exact => None,
            Arm::Gaussian => Some(SketchKind::Gaussian),
            Arm::Ros => Some(SketchKind::Ros),
            Arm::SubSample => Some(SketchKind::SubSample),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Arm::Exact => "exact",
            Arm::Gaussian => "gaussian",
            Arm::Ros => "ros",
            Arm::SubSample => "subsample",
        }
    }

    pub(crate) fn code(&self) -> u64 {
        *self as u64
    }
}

impl From<SketchKind> for Arm {
    fn from(kind: SketchKind) -> Self {
        match kind {
            SketchKind::Gaussian => Arm::Gaussian,
            SketchKind::Ros => Arm::Ros,
            SketchKind::SubSample => Arm::SubSample,
        }
    }
}

impl FromStr for Arm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match normalize(s).as_str() {
            "exact" => Ok(Arm::Exact),
            other => other.parse::<SketchKind>().map(Arm::from),
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Sketch-dimension rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MRule {
    /// `ceil(n^{1/3})`
    CubeRoot,
    /// `ceil(1.25 sqrt(ln n))`
    LogGauss,
    /// `ceil(4 sqrt(ln n))`
    LogFour,
    Fixed(usize),
    /// `c d_n`, times `ln(n)^4` for ROS.
    StatDim(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaRule {
    /// `lambda_n = 2 delta_n^2` from each kernel matrix's spectrum.
    TwoDeltaSq,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kernel: KernelSpec,
    pub fstar: FStar,
    pub design: Design,
    pub sigma: f64,
    pub n_grid: Vec<usize>,
    pub sketch_kinds: Vec<Arm>,
    pub m_rule: MRule,
    pub lambda_rule: LambdaRule,
    pub trials: usize,
    pub base_seed: u64,
    /// Record wall-clock times; off by default so output depends only on
    /// the configuration.
    pub record_wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kernel: KernelSpec::Sobolev1,
            fstar: FStar::AbsShift,
            design: Design::UniformGrid,
            sigma: 1.0,
            n_grid: vec![32, 64, 128, 256, 512, 1024],
            sketch_kinds: vec![Arm::Exact, Arm::Gaussian, Arm::Ros],
            m_rule: MRule::CubeRoot,
            lambda_rule: LambdaRule::TwoDeltaSq,
            trials: 100,
            base_seed: 0,
            record_wall_time: false,
        }
    }
}

/// Largest sample size representable in a derived seed.
pub(crate) const MAX_N: usize = (1 << 32) - 1;
/// Largest trial count representable in a derived seed.
pub(crate) const MAX_TRIALS: usize = 1 << 29;

const KEYS: [&str; 15] = [
    "kernel",
    "degree",
    "bandwidth",
    "fstar",
    "design",
    "sigma",
    "n_grid",
    "sketches",
    "m_rule",
    "m_fixed",
    "c_statdim",
    "lambda_rule",
    "lambda_fixed",
    "trials",
    "seed",
];

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if self.n_grid.is_empty() {
            return Err(Error::domain("n_grid must not be empty"));
        }
        if let Some(&n) = self.n_grid.iter().find(|&&n| !(2..=MAX_N).contains(&n)) {
            return Err(Error::domain(format!("sample size {n} out of range [2, {MAX_N}]")));
        }
        let mut seen = self.n_grid.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.n_grid.len() {
            return Err(Error::domain("n_grid has repeated sample sizes"));
        }
        if self.sketch_kinds.is_empty() {
            return Err(Error::domain("at least one sketch kind is required"));
        }
        let mut arms = self.sketch_kinds.clone();
        arms.sort_unstable();
        arms.dedup();
        if arms.len() != self.sketch_kinds.len() {
            return Err(Error::domain("sketches has repeated entries"));
        }
        if !(1..=MAX_TRIALS).contains(&self.trials) {
            return Err(Error::domain(format!("trials must be in [1, {MAX_TRIALS}]")));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::domain("sigma must be positive and finite"));
        }
        match self.m_rule {
            MRule::Fixed(0) => return Err(Error::domain("m_fixed must be at least 1")),
            MRule::StatDim(c) if !(c > 0.0 && c.is_finite()) => {
                return Err(Error::domain("c_statdim must be positive"))
            }
            _ => {}
        }
        if let LambdaRule::Fixed(l) = self.lambda_rule {
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::domain("lambda_fixed must be positive"));
            }
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| match e {
            Error::Parse { line, message, .. } => Error::Parse {
                path: path.to_path_buf(),
                line,
                message,
            },
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: HashMap<&str, (u64, &str)> = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx as u64 + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| parse_err(line_no, format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(parse_err(line_no, format!("unknown key `{key}`")));
            }
            if entries.insert(key, (line_no, value.trim())).is_some() {
                return Err(parse_err(line_no, format!("duplicate key `{key}`")));
            }
        }

        let get = |key: &str| entries.get(key).copied();
        let required = |key: &str, why: &str| {
            get(key).ok_or_else(|| parse_err(0, format!("missing key `{key}` ({why})")))
        };
        let mut cfg = ExperimentConfig::default();

        if let Some((line, v)) = get("kernel") {
            cfg.kernel = match normalize(v).as_str() {
                "sobolev1" => KernelSpec::Sobolev1,
                "gaussian" => {
                    let (l, h) = required("bandwidth", "gaussian kernel")?;
                    KernelSpec::Gaussian {
                        bandwidth: parse_value(l, h)?,
                    }
                }
                "polynomial" => {
                    let (l, d) = required("degree", "polynomial kernel")?;
                    KernelSpec::Polynomial {
                        degree: parse_value(l, d)?,
                    }
                }
                other => return Err(parse_err(line, format!("unknown kernel `{other}`"))),
            };
        }
        if let Some((line, v)) = get("fstar") {
            cfg.fstar = v.parse().map_err(|e| wrap(line, e))?;
        }
        if let Some((line, v)) = get("design") {
            cfg.design = v.parse().map_err(|e| wrap(line, e))?;
        }
        if let Some((line, v)) = get("sigma") {
            cfg.sigma = parse_value(line, v)?;
        }
        if let Some((line, v)) = get("n_grid") {
            cfg.n_grid = parse_list(line, v, |s| parse_value(line, s))?;
        }
        if let Some((line, v)) = get("sketches") {
            cfg.sketch_kinds = parse_list(line, v, |s| s.parse().map_err(|e| wrap(line, e)))?;
        }
        if let Some((line, v)) = get("m_rule") {
            cfg.m_rule = match normalize(v).as_str() {
                "cuberoot" => MRule::CubeRoot,
                "loggauss" => MRule::LogGauss,
                "logfour" => MRule::LogFour,
                "fixed" => {
                    let (l, m) = required("m_fixed", "m_rule = fixed")?;
                    MRule::Fixed(parse_value(l, m)?)
                }
                "statdim" => {
                    let (l, c) = required("c_statdim", "m_rule = statdim")?;
                    MRule::StatDim(parse_value(l, c)?)
                }
                other => return Err(parse_err(line, format!("unknown m_rule `{other}`"))),
            };
        }
        if let Some((line, v)) = get("lambda_rule") {
            cfg.lambda_rule = match normalize(v).as_str() {
                "two_delta_sq" => LambdaRule::TwoDeltaSq,
                "fixed" => {
                    let (l, x) = required("lambda_fixed", "lambda_rule = fixed")?;
                    LambdaRule::Fixed(parse_value(l, x)?)
                }
                other => return Err(parse_err(line, format!("unknown lambda_rule `{other}`"))),
            };
        }
        if let Some((line, v)) = get("trials") {
            cfg.trials = parse_value(line, v)?;
        }
        if let Some((line, v)) = get("seed") {
            cfg.base_seed = parse_value(line, v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_err(line: u64, message: String) -> Error {
    Error::Parse {
        path: "<config>".into(),
        line,
        message,
    }
}

fn wrap(line: u64, e: Error) -> Error {
    parse_err(line, e.to_string())
}

fn parse_value<T: FromStr>(line: u64, v: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.trim()
        .parse()
        .map_err(|e| parse_err(line, format!("invalid value `{}`: {e}", v.trim())))
}

fn parse_list<T>(line: u64, v: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    let items: Vec<&str> = v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(parse_err(line, "empty list".into()));
    }
    items.into_iter().map(item).collect()
}
