use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::bounds::{McSettings, Variant};
use crate::complexity::MIN_MC_SAMPLES;
use crate::cgmt::MIN_CGMT_DRAWS;
use crate::model::{CovarianceModel, ProblemSpec};
use crate::norms::Norm;
use crate::rng::derive_seed;
use crate::splitting::BoundFamily;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Figure1,
    JunkFeatures,
    IsotropicBp,
    BoundCheck,
    CgmtCheck,
    Ranks,
    SplitScan,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Figure1 => "figure1",
            Self::JunkFeatures => "junk_features",
            Self::IsotropicBp => "isotropic_bp",
            Self::BoundCheck => "bound_check",
            Self::CgmtCheck => "cgmt_check",
            Self::Ranks => "ranks",
            Self::SplitScan => "split_scan",
        }
    }
}

/// Covariance families; `d` comes from the grid or the problem section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CovarianceConfig {
    Identity,
    ScaledIdentity { scale: f64 },
    /// `diag(1, λ² I_{d−1})`.
    Figure1 { lambda: f64 },
    /// `diag(top, (tail/n) I_{d−1})`; `d` defaults to `n² + 1`.
    Spiked {
        #[serde(default = "one")]
        top: f64,
        #[serde(default = "five")]
        tail: f64,
    },
    /// `diag(signal, (λ nᵉ / log d) I_d)` with `d` junk coordinates.
    Junk {
        #[serde(default = "unit_signal")]
        signal: Vec<f64>,
        #[serde(default = "one")]
        lambda: f64,
        #[serde(default)]
        exponent: f64,
    },
    Diagonal { values: Vec<f64> },
    /// `scale · i^{−exponent}`, `i = 1..d`.
    PowerLaw {
        exponent: f64,
        #[serde(default = "one")]
        scale: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn five() -> f64 {
    5.0
}

fn unit_signal() -> Vec<f64> {
    vec![1.0]
}

impl Default for CovarianceConfig {
    fn default() -> Self {
        Self::Identity
    }
}

impl CovarianceConfig {
    /// Total dimension for grid value `d` (junk adds the signal block).
    pub fn total_dim(&self, n: usize, d: Option<usize>) -> Option<usize> {
        match self {
            Self::Spiked { .. } => Some(d.unwrap_or(n * n + 1)),
            Self::Junk { signal, .. } => d.map(|d| d + signal.len()),
            Self::Diagonal { values } => Some(d.unwrap_or(values.len())),
            _ => d,
        }
    }

    pub fn build(&self, n: usize, d: Option<usize>) -> Result<CovarianceModel, ExperimentError> {
        let dim = self.total_dim(n, d).ok_or_else(|| {
            ExperimentError::config("problem.d_grid", "this covariance needs a dimension")
        })?;
        if dim == 0 {
            return Err(ExperimentError::config("problem.d_grid", "dimension must be positive"));
        }
        let cov = match self {
            Self::Identity => CovarianceModel::identity(dim),
            Self::ScaledIdentity { scale } => CovarianceModel::scaled_identity(dim, *scale),
            Self::Figure1 { lambda } => {
                let mut e = vec![lambda * lambda; dim];
                e[0] = 1.0;
                CovarianceModel::from_diagonal(&e)
            }
            Self::Spiked { top, tail } => {
                let mut e = vec![tail / n as f64; dim];
                e[0] = *top;
                CovarianceModel::from_diagonal(&e)
            }
            Self::Junk {
                signal,
                lambda,
                exponent,
            } => {
                let junk_dim = dim - signal.len();
                let level = lambda * (n as f64).powf(*exponent) / (junk_dim as f64).ln();
                let mut e = signal.clone();
                e.extend(std::iter::repeat_n(level, junk_dim));
                CovarianceModel::from_diagonal(&e)
            }
            Self::Diagonal { values } => {
                if values.len() != dim {
                    return Err(ExperimentError::config(
                        "problem.covariance.values",
                        format!("expected {dim} values, got {}", values.len()),
                    ));
                }
                CovarianceModel::from_diagonal(values)
            }
            Self::PowerLaw { exponent, scale } => {
                let e: Vec<f64> = (1..=dim).map(|i| scale * (i as f64).powf(-exponent)).collect();
                CovarianceModel::diagonal_sorted(e)
            }
        };
        cov.map_err(|e| ExperimentError::config("problem.covariance", e.to_string()))
    }

    /// Coordinates of the signal block (junk features only).
    pub fn signal_coords(&self) -> Vec<usize> {
        match self {
            Self::Junk { signal, .. } => (0..signal.len()).collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WStarConfig {
    Zero,
    /// `value · e₁`.
    First { value: f64 },
    /// `value` on the first `count` coordinates.
    Block { value: f64, count: usize },
    /// Explicit leading entries, zero-padded.
    Explicit { values: Vec<f64> },
}

impl Default for WStarConfig {
    fn default() -> Self {
        Self::Zero
    }
}

impl WStarConfig {
    pub fn build(&self, dim: usize) -> Result<Vec<f64>, ExperimentError> {
        let mut w = vec![0.0; dim];
        let lead: Vec<f64> = match self {
            Self::Zero => Vec::new(),
            Self::First { value } => vec![*value],
            Self::Block { value, count } => vec![*value; *count],
            Self::Explicit { values } => values.clone(),
        };
        if lead.len() > dim {
            return Err(ExperimentError::config(
                "problem.w_star",
                format!("{} entries exceed dimension {dim}", lead.len()),
            ));
        }
        w[..lead.len()].copy_from_slice(&lead);
        Ok(w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default)]
    pub n: Option<usize>,
    /// Sequence of sample sizes; falls back to `[n]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub n_grid: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub d_grid: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_variance: Option<f64>,
    /// Figure 1 tail scales.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lambdas: Vec<f64>,
    #[serde(default)]
    pub covariance: CovarianceConfig,
    #[serde(default)]
    pub w_star: WStarConfig,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            n: None,
            n_grid: Vec::new(),
            d_grid: Vec::new(),
            sigma: None,
            noise_variance: None,
            lambdas: Vec::new(),
            covariance: CovarianceConfig::Identity,
            w_star: WStarConfig::Zero,
        }
    }
}

impl ProblemConfig {
    pub fn noise_var(&self) -> f64 {
        match (self.noise_variance, self.sigma) {
            (Some(v), _) => v,
            (None, Some(s)) => s * s,
            (None, None) => 1.0,
        }
    }

    pub fn ns(&self) -> Vec<usize> {
        if self.n_grid.is_empty() {
            self.n.into_iter().collect()
        } else {
            self.n_grid.clone()
        }
    }

    pub fn n(&self) -> Result<usize, ExperimentError> {
        self.n
            .or_else(|| self.n_grid.first().copied())
            .ok_or_else(|| ExperimentError::config("problem.n", "sample size is required"))
    }

    /// The single dimension of non-grid experiments.
    pub fn single_d(&self) -> Option<usize> {
        self.d_grid.first().copied()
    }

    pub fn spec(
        &self,
        cov: CovarianceModel,
        n: usize,
    ) -> Result<ProblemSpec, ExperimentError> {
        let w = self.w_star.build(cov.dim())?;
        ProblemSpec::with_noise_variance(cov, w, self.noise_var(), n)
            .map_err(|e| ExperimentError::config("problem", e.to_string()))
    }

    /// Spec for `(n, d)` with the configured covariance.
    pub fn spec_at(&self, n: usize, d: Option<usize>) -> Result<ProblemSpec, ExperimentError> {
        let cov = self.covariance.build(n, d)?;
        self.spec(cov, n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    #[serde(default = "default_mc_samples")]
    pub samples: usize,
}

fn default_mc_samples() -> usize {
    crate::complexity::DEFAULT_MC_SAMPLES
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            samples: default_mc_samples(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CgmtConfig {
    #[serde(default = "default_draws")]
    pub draws: usize,
    #[serde(default = "default_t_points")]
    pub t_points: usize,
    /// `B` as a multiple of the mean pilot `‖ŵ‖₂`.
    #[serde(default = "default_b_factor")]
    pub b_factor: f64,
    #[serde(default = "default_pilot")]
    pub pilot: usize,
}

fn default_draws() -> usize {
    2000
}
fn default_t_points() -> usize {
    20
}
fn default_b_factor() -> f64 {
    1.5
}
fn default_pilot() -> usize {
    50
}

impl Default for CgmtConfig {
    fn default() -> Self {
        Self {
            draws: default_draws(),
            t_points: default_t_points(),
            b_factor: default_b_factor(),
            pilot: default_pilot(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitConfig {
    #[serde(default = "default_family")]
    pub family: BoundFamily,
    /// Norm-ball radius; defaults to `max(‖w*‖, 1)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
}

fn default_family() -> BoundFamily {
    BoundFamily::EuclidRisk
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            family: default_family(),
            b: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, ExperimentError> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(ExperimentError::config("output.format", format!("unknown format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default)]
    pub format: OutputFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_norm")]
    pub norm: Norm,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    #[serde(default)]
    pub problem: ProblemConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub cgmt: CgmtConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_trials() -> usize {
    100
}
fn default_delta() -> f64 {
    0.1
}
fn default_norm() -> Norm {
    Norm::L2
}
fn default_variant() -> Variant {
    Variant::AppendixSharp
}

/// Figure 1 grid when none is configured: `25·2ᵏ` up to 12800.
pub fn default_figure1_grid() -> Vec<usize> {
    (0..10).map(|k| 25usize << k).collect()
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            master_seed: 0,
            threads: None,
            trials: default_trials(),
            delta: default_delta(),
            norm: default_norm(),
            variant: default_variant(),
            problem: ProblemConfig::default(),
            mc: McConfig::default(),
            cgmt: CgmtConfig::default(),
            split: SplitConfig::default(),
            output: OutputConfig::default(),
        }
    }

    /// Parses TOML, or JSON when the text starts with `{`.
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| ExperimentError::Parse(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| ExperimentError::Parse(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            ExperimentError::Parse(m) => ExperimentError::Parse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn mc_settings(&self, stream: u64) -> McSettings {
        McSettings {
            samples: self.mc.samples,
            seed: derive_seed(self.master_seed, stream),
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        use ExperimentKind::*;
        let p = &self.problem;
        fn err(field: &str, message: impl Into<String>) -> ExperimentError {
            ExperimentError::config(field, message)
        }
        if self.trials == 0 {
            return Err(err("trials", "must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(err("delta", "must lie in (0, 1)"));
        }
        if self.mc.samples < MIN_MC_SAMPLES {
            return Err(err("mc.samples", format!("must be at least {MIN_MC_SAMPLES}")));
        }
        if let Some(v) = p.noise_variance {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(err("problem.noise_variance", "must be finite and >= 0"));
            }
            if p.sigma.is_some() {
                return Err(err("problem.sigma", "give either sigma or noise_variance, not both"));
            }
        }
        if let Some(s) = p.sigma {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(err("problem.sigma", "must be finite and >= 0"));
            }
        }
        if p.ns().is_empty() {
            return Err(err("problem.n", "sample size is required"));
        }
        if p.ns().contains(&0) {
            return Err(err("problem.n", "sample sizes must be positive"));
        }
        if p.d_grid.contains(&0) {
            return Err(err("problem.d_grid", "dimensions must be positive"));
        }
        if self.threads == Some(0) {
            return Err(err("threads", "must be at least 1"));
        }
        let bound_delta = |what: &str| {
            if self.delta > 0.25 {
                Err(err(
                    "delta",
                    format!("{what} require delta <= 1/4 (the theorem's precondition), got {}", self.delta),
                ))
            } else {
                Ok(())
            }
        };
        match self.experiment {
            Figure1 => {
                if p.lambdas.is_empty() {
                    return Err(err("problem.lambdas", "at least one tail scale is required"));
                }
            }
            JunkFeatures => {
                bound_delta("basis pursuit risk bounds")?;
                if !matches!(p.covariance, CovarianceConfig::Junk { .. }) {
                    return Err(err("problem.covariance", "junk_features needs kind = \"junk\""));
                }
                if p.d_grid.is_empty() {
                    return Err(err("problem.d_grid", "junk dimensions are required"));
                }
            }
            IsotropicBp => {
                if self.delta > 0.5 {
                    return Err(err(
                        "delta",
                        "the isotropic basis pursuit risk bound requires delta <= 1/2",
                    ));
                }
                if p.covariance != CovarianceConfig::Identity {
                    return Err(err("problem.covariance", "isotropic_bp needs kind = \"identity\""));
                }
                if p.d_grid.is_empty() {
                    return Err(err("problem.d_grid", "dimensions are required"));
                }
            }
            BoundCheck => {
                bound_delta("generalization bounds")?;
                if self.norm == Norm::Linf {
                    return Err(err("norm", "bound_check supports l2 and l1"));
                }
            }
            CgmtCheck => {
                if self.cgmt.draws < MIN_CGMT_DRAWS {
                    return Err(err("cgmt.draws", format!("must be at least {MIN_CGMT_DRAWS}")));
                }
                if !(self.cgmt.b_factor > 0.0) {
                    return Err(err("cgmt.b_factor", "must be positive"));
                }
                if self.cgmt.pilot == 0 {
                    return Err(err("cgmt.pilot", "must be at least 1"));
                }
                if !matches!(
                    p.covariance,
                    CovarianceConfig::Identity | CovarianceConfig::ScaledIdentity { .. }
                ) {
                    return Err(err("problem.covariance", "cgmt_check needs a scaled identity"));
                }
                if self.norm == Norm::Linf {
                    return Err(err("norm", "cgmt_check supports l2 and l1"));
                }
            }
            Ranks => {
                if p.d_grid.is_empty()
                    && p.covariance.total_dim(p.n().unwrap_or(1), None).is_none()
                {
                    return Err(err("problem.d_grid", "dimensions are required"));
                }
            }
            SplitScan => {
                bound_delta("generalization bounds")?;
                if let Some(b) = self.split.b {
                    if !(b > 0.0) {
                        return Err(err("split.b", "must be positive"));
                    }
                }
            }
        }
        Ok(())
    }
}
