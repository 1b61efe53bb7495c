//! Explicit evaluation of the generalization, norm and risk bounds.
//!
//! Every bound is a pure function of a [`SplitQuantities`] cache (spectral
//! statistics of `Σ₂` plus Monte Carlo widths) and the scalars
//! `(n, σ, w*, B, δ)`, so split scans reuse the expensive widths.
//!
//! Two constant regimes are offered: the constants displayed in the theorem
//! statements and the sharper ones that fall out of the appendix proofs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::complexity::{
    radius, sample_dual_norms, sample_dual_norms_spectrum, WidthEstimate, WidthMethod,
    DEFAULT_MC_SAMPLES,
};
use crate::error::{LabError, Result};
use crate::model::{CovSplit, CovarianceModel, ProblemSpec, SpectralGroup, Spectrum};
use crate::norms::Norm;
use crate::stats::{covariance, quantile, summarize, Summary};

pub const C1: f64 = 66.0;
pub const C2: f64 = 64.0;
pub const C3: f64 = 140.0;
pub const ETA_CONST: f64 = 368.0;
/// Surrogate constant in the `R(Σ₂) ≳ log(1/δ)²` gate.
pub const R_GATE_CONST: f64 = 64.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Theorem,
    AppendixSharp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Main,
    Speculative,
    EuclidGen,
    EuclidNorm,
    EuclidRisk,
    GeneralGen,
    GeneralNorm,
    GeneralRisk,
    BpGen,
    BpNorm,
    BpRisk,
    BpIsoNorm,
    BpIsoRisk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub kind: BoundKind,
    pub value: f64,
    pub delta: f64,
    pub variant: Variant,
    pub terms: BTreeMap<String, f64>,
    /// Side conditions of the theorem (`β ≤ 1`, `γ, ε ≤ 1`, rank gates).
    pub valid: bool,
    /// `[lo, hi]` from Monte Carlo inputs at `mean ∓ 3·SE`.
    pub interval: Option<(f64, f64)>,
    pub notes: Vec<String>,
}

impl BoundReport {
    fn new(kind: BoundKind, value: f64, delta: f64, variant: Variant) -> Self {
        Self {
            kind,
            value,
            delta,
            variant,
            terms: BTreeMap::new(),
            valid: true,
            interval: None,
            notes: Vec::new(),
        }
    }

    fn term(mut self, name: &str, v: f64) -> Self {
        self.terms.insert(name.to_string(), v);
        self
    }

    pub fn get(&self, name: &str) -> f64 {
        self.terms.get(name).copied().unwrap_or(f64::NAN)
    }

    fn invalidate(&mut self, why: impl Into<String>) {
        self.valid = false;
        self.notes.push(why.into());
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McSettings {
    pub samples: usize,
    pub seed: u64,
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            samples: DEFAULT_MC_SAMPLES,
            seed: 0x00c0_ffee,
        }
    }
}

fn check_delta(delta: f64, max: f64) -> Result<()> {
    if !(delta > 0.0 && delta <= max) {
        return Err(LabError::DeltaOutOfRange { delta, max });
    }
    Ok(())
}

fn check_b(b: f64) -> Result<()> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(LabError::BTooSmall { b, min: 0.0 });
    }
    Ok(())
}

/// `β` of the main bound.
pub fn beta(variant: Variant, n: usize, delta: f64, rank1: usize) -> f64 {
    let n = n as f64;
    let k = rank1 as f64;
    match variant {
        Variant::Theorem => C1 * ((1.0 / delta).ln() / n).sqrt() + C1 * (k / n).sqrt(),
        Variant::AppendixSharp => 33.0 * ((32.0 / delta).ln() / n).sqrt() + 18.0 * (k / n).sqrt(),
    }
}

/// `γ` of the generalization corollaries with effective rank `r_eff`.
pub fn gamma(variant: Variant, n: usize, delta: f64, rank1: usize, r_eff: f64) -> f64 {
    let l = (1.0 / delta).ln();
    match variant {
        Variant::Theorem => {
            C1 * ((l / r_eff).sqrt() + (l / n as f64).sqrt() + (rank1 as f64 / n as f64).sqrt())
        }
        Variant::AppendixSharp => {
            let b = beta(Variant::AppendixSharp, n, delta, rank1);
            (1.0 + b) * (1.0 + 2.0 * (2.0 * (32.0 / delta).ln() / r_eff).sqrt()).powi(2) - 1.0
        }
    }
}

/// Spectral statistics of `Σ₂` (exact).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub rank1: usize,
    pub trace: f64,
    pub op: f64,
    pub trace_sq: f64,
    pub max_diag: f64,
    pub diagonal: bool,
}

impl SplitStats {
    pub fn is_zero(&self) -> bool {
        self.op == 0.0
    }

    /// `r(Σ₂)`, `None` for `Σ₂ = 0`.
    pub fn r(&self) -> Option<f64> {
        (!self.is_zero()).then(|| self.trace / self.op)
    }

    pub fn big_r(&self) -> Option<f64> {
        (!self.is_zero()).then(|| self.trace * self.trace / self.trace_sq)
    }
}

/// Monte Carlo statistics of `Σ₂` for one norm, at `B = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McStats {
    pub norm: Norm,
    /// `E‖Σ₂^{1/2}H‖_*`.
    pub width: WidthEstimate,
    /// `sup_{‖w‖ ≤ 1} ‖w‖_{Σ₂}`.
    pub rad: f64,
    /// `‖v*‖_{Σ₂}` over the draws.
    pub vstar: Summary,
    pub cov_width_vstar: f64,
    #[serde(skip)]
    vstar_draws: Vec<f64>,
    #[serde(skip)]
    pv_sq_draws: Vec<f64>,
}

impl McStats {
    fn from_draws(norm: Norm, rad: f64, draws: &[crate::complexity::DualDraw]) -> Self {
        let dual: Vec<f64> = draws.iter().map(|d| d.dual).collect();
        let vs: Vec<f64> = draws.iter().map(|d| d.vstar).collect();
        let s = summarize(&dual);
        Self {
            norm,
            width: WidthEstimate {
                mean: s.mean,
                std_error: s.std_error,
                samples: s.count,
                method: WidthMethod::MonteCarlo,
            },
            rad,
            vstar: summarize(&vs),
            cov_width_vstar: covariance(&dual, &vs) / draws.len() as f64,
            vstar_draws: vs,
            pv_sq_draws: draws.iter().map(|d| d.pv_sq).collect(),
        }
    }

    fn zero(norm: Norm) -> Self {
        let z = Summary {
            mean: 0.0,
            std: 0.0,
            std_error: 0.0,
            count: 0,
        };
        Self {
            norm,
            width: WidthEstimate {
                mean: 0.0,
                std_error: 0.0,
                samples: 0,
                method: WidthMethod::ClosedForm,
            },
            rad: 0.0,
            vstar: z,
            cov_width_vstar: 0.0,
            vstar_draws: vec![0.0],
            pv_sq_draws: vec![0.0],
        }
    }

    /// `r_‖·‖(Σ₂) = (E‖Σ₂^{1/2}H‖_*/rad)²`.
    pub fn r_norm(&self) -> f64 {
        (self.width.mean / self.rad).powi(2)
    }

    /// `R_‖·‖(Σ₂) = (E‖Σ₂^{1/2}H‖_*/E‖v*‖_{Σ₂})²`.
    pub fn big_r_norm(&self) -> f64 {
        (self.width.mean / self.vstar.mean).powi(2)
    }

    pub fn vstar_quantile(&self, p: f64) -> f64 {
        quantile(&self.vstar_draws, p)
    }

    pub fn pv_sq_quantile(&self, p: f64) -> f64 {
        quantile(&self.pv_sq_draws, p)
    }

    /// Fraction of draws with `‖Pv*‖² > 1 + η`.
    pub fn contraction_tail(&self, eta: f64) -> f64 {
        let c = self.pv_sq_draws.iter().filter(|&&v| v > 1.0 + eta).count();
        c as f64 / self.pv_sq_draws.len() as f64
    }
}

/// Everything the bounds need about one split.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitQuantities {
    pub stats: SplitStats,
    pub sigma2: Option<CovarianceModel>,
    pub mc: Option<McStats>,
}

impl SplitQuantities {
    /// Exact statistics only (enough for the Euclidean suite).
    pub fn exact(cov: &CovarianceModel, split: &CovSplit) -> Self {
        let sigma2 = split.sigma2(cov);
        Self {
            stats: SplitStats {
                rank1: split.rank1(),
                trace: sigma2.trace(),
                op: sigma2.op_norm(),
                trace_sq: sigma2.trace_sq(),
                max_diag: sigma2.max_diag(),
                diagonal: sigma2.is_diagonal(),
            },
            sigma2: Some(sigma2),
            mc: None,
        }
    }

    pub fn with_mc(cov: &CovarianceModel, split: &CovSplit, norm: Norm, mc: &McSettings) -> Result<Self> {
        let mut q = Self::exact(cov, split);
        let sigma2 = q.sigma2.as_ref().unwrap();
        q.mc = Some(if sigma2.is_zero() {
            McStats::zero(norm)
        } else {
            let rad = radius(sigma2, norm, 1.0)?;
            let draws = sample_dual_norms(sigma2, norm, mc.samples, mc.seed)?;
            McStats::from_draws(norm, rad, &draws)
        });
        Ok(q)
    }

    /// From a grouped diagonal `Σ₂` that need not be materializable.
    pub fn from_spectrum(
        sigma2: &Spectrum,
        rank1: usize,
        norm: Norm,
        mc: &McSettings,
    ) -> Result<Self> {
        let stats = SplitStats {
            rank1,
            trace: sigma2.trace(),
            op: sigma2.op_norm(),
            trace_sq: sigma2.trace_sq(),
            max_diag: sigma2.op_norm(),
            diagonal: true,
        };
        let mcs = if sigma2.is_zero() {
            McStats::zero(norm)
        } else {
            let rad = match norm {
                Norm::L1 | Norm::L2 => sigma2.op_norm().sqrt(),
                Norm::Linf => sigma2.trace().sqrt(),
            };
            let draws = sample_dual_norms_spectrum(sigma2, norm, mc.samples, mc.seed)?;
            McStats::from_draws(norm, rad, &draws)
        };
        Ok(Self {
            stats,
            sigma2: None,
            mc: Some(mcs),
        })
    }

    fn mc(&self) -> Result<&McStats> {
        self.mc
            .as_ref()
            .ok_or_else(|| LabError::InvalidProblem("split quantities lack Monte Carlo widths".into()))
    }

    fn sigma2_seminorm(&self, w: &[f64]) -> Result<f64> {
        let s = self.sigma2.as_ref().ok_or_else(|| {
            LabError::InvalidProblem("Σ₂ seminorm needs a materialized covariance".into())
        })?;
        Ok(s.seminorm(w))
    }
}

fn mc_interval(e: &WidthEstimate, f: impl Fn(f64) -> f64) -> Option<(f64, f64)> {
    if e.method == WidthMethod::ClosedForm {
        return None;
    }
    let lo = (e.mean - 3.0 * e.std_error).max(0.0);
    let hi = e.mean + 3.0 * e.std_error;
    let (a, b) = (f(lo), f(hi));
    Some((a.min(b), a.max(b)))
}

/// Main uniform bound `sup_{‖w‖ ≤ B, L̂(w)=0} L(w)` from cached quantities.
pub fn ucb_main_from(
    q: &SplitQuantities,
    spec: &ProblemSpec,
    b: f64,
    delta: f64,
    variant: Variant,
) -> Result<BoundReport> {
    check_delta(delta, 0.25)?;
    check_b(b)?;
    let mc = q.mc()?;
    let n = spec.n as f64;
    let bt = beta(variant, spec.n, delta, q.stats.rank1);
    let root = (2.0 * (32.0 / delta).ln()).sqrt();
    let wstar_s2 = q.sigma2_seminorm(&spec.w_star)?;
    let radius_term = b * mc.rad * root;
    let signal_term = wstar_s2 * root;
    let eval = |e: f64| (1.0 + bt) / n * (b * e + radius_term + signal_term).powi(2);
    let width_term = b * mc.width.mean;
    let mut rep = BoundReport::new(BoundKind::Main, eval(mc.width.mean), delta, variant)
        .term("beta", bt)
        .term("width_term", width_term)
        .term("radius_term", radius_term)
        .term("signal_term", signal_term)
        .term("rank_sigma1", q.stats.rank1 as f64)
        .term("trace_sigma2", q.stats.trace);
    rep.interval = mc_interval(&mc.width, eval);
    if bt > 1.0 {
        rep.invalidate(format!("beta = {bt} exceeds 1"));
    }
    Ok(rep)
}

pub fn ucb_main(
    spec: &ProblemSpec,
    split: &CovSplit,
    norm: Norm,
    b: f64,
    delta: f64,
    variant: Variant,
    mc: &McSettings,
) -> Result<BoundReport> {
    check_delta(delta, 0.25)?;
    check_b(b)?;
    let q = SplitQuantities::with_mc(&spec.cov, split, norm, mc)?;
    ucb_main_from(&q, spec, b, delta, variant)
}

/// Split size used by the speculative bound: `⌈√(n log(32/δ))⌉`, at most `d`.
pub fn speculative_split_size(n: usize, d: usize, delta: f64) -> usize {
    ((n as f64 * (32.0 / delta).ln()).sqrt().ceil() as usize).min(d)
}

/// `(1 + γ)·B²Tr(Σ)/n` with `γ` from splitting off the top
/// `⌈√(n log(32/δ))⌉` eigenvalues; `ψ_n = Tr(Σ)`.
pub fn ucb_spec(spec: &ProblemSpec, b: f64, delta: f64) -> Result<BoundReport> {
    check_delta(delta, 0.25)?;
    let wn = crate::norms::Norm::L2.eval(&spec.w_star);
    if !(b >= wn) || b <= 0.0 {
        return Err(LabError::BTooSmall { b, min: wn });
    }
    let n = spec.n;
    let d = spec.dim();
    let k = speculative_split_size(n, d, delta);
    let bt = beta(Variant::AppendixSharp, n, delta, k);
    let slack = if k >= d || spec.cov.eigenvalues()[k] == 0.0 {
        0.0
    } else {
        6.0 * ((1.0 / delta).ln() / k as f64).sqrt()
    };
    let g = (1.0 + bt) * (1.0 + slack).powi(2) - 1.0;
    let tr = spec.cov.trace();
    let leading = b * b * tr / n as f64;
    let mut rep = BoundReport::new(BoundKind::Speculative, (1.0 + g) * leading, delta, Variant::AppendixSharp)
        .term("gamma", g)
        .term("beta", bt)
        .term("rank_sigma1", k as f64)
        .term("leading_term", leading)
        .term("psi_n", tr);
    if bt > 1.0 {
        rep.invalidate(format!("beta = {bt} exceeds 1"));
    }
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EuclidSuite {
    pub gen: BoundReport,
    pub norm: BoundReport,
    pub risk: BoundReport,
}

/// Euclidean `ε` with surrogate constant `c2`.
pub fn euclid_epsilon(c2: f64, n: usize, delta: f64, r: f64, big_r: f64) -> f64 {
    let l = (1.0 / delta).ln();
    let n = n as f64;
    c2 * ((l / r).sqrt() + (l / n).sqrt() + n * l / big_r)
}

pub fn euclid_suite_from(
    stats: &SplitStats,
    spec: &ProblemSpec,
    b: f64,
    delta: f64,
    variant: Variant,
    c2: f64,
) -> Result<EuclidSuite> {
    check_delta(delta, 0.5)?;
    let (Some(r), Some(big_r)) = (stats.r(), stats.big_r()) else {
        return Err(LabError::ZeroCovariance);
    };
    let n = spec.n as f64;
    let l = (1.0 / delta).ln();
    let g = gamma(variant, spec.n, delta, stats.rank1, r);
    let eps = euclid_epsilon(c2, spec.n, delta, r, big_r);
    let tr = stats.trace;
    let wn = Norm::L2.eval(&spec.w_star);
    let sigma = spec.sigma;

    let mut gen = BoundReport::new(BoundKind::EuclidGen, (1.0 + g) * b * b * tr / n, delta, variant)
        .term("gamma", g)
        .term("trace_sigma2", tr)
        .term("r_sigma2", r);
    let noise_term = (1.0 + eps).sqrt() * sigma * (n / tr).sqrt();
    let mut norm = BoundReport::new(BoundKind::EuclidNorm, wn + noise_term, delta, variant)
        .term("epsilon", eps)
        .term("signal_norm", wn)
        .term("noise_term", noise_term)
        .term("trace_sigma2", tr)
        .term("R_sigma2", big_r);
    let inner = sigma + wn * (tr / n).sqrt();
    let mut risk = BoundReport::new(
        BoundKind::EuclidRisk,
        (1.0 + g) * (1.0 + eps) * inner * inner,
        delta,
        variant,
    )
    .term("gamma", g)
    .term("epsilon", eps)
    .term("inner", inner)
    .term("trace_sigma2", tr);

    let gate = R_GATE_CONST * l * l;
    if delta > 0.25 {
        gen.invalidate("delta exceeds 1/4");
        norm.invalidate("delta exceeds 1/4");
    }
    if b < wn {
        gen.invalidate("B is below ‖w*‖₂");
    }
    if g > 1.0 {
        gen.invalidate(format!("gamma = {g} exceeds 1"));
        risk.invalidate(format!("gamma = {g} exceeds 1"));
    }
    if eps > 1.0 {
        norm.invalidate(format!("epsilon = {eps} exceeds 1"));
        risk.invalidate(format!("epsilon = {eps} exceeds 1"));
    }
    if big_r < gate {
        norm.invalidate(format!("R(Σ₂) = {big_r} below {gate}"));
        risk.invalidate(format!("R(Σ₂) = {big_r} below {gate}"));
    }
    Ok(EuclidSuite { gen, norm, risk })
}

pub fn euclid_suite(
    spec: &ProblemSpec,
    split: &CovSplit,
    b: f64,
    delta: f64,
    variant: Variant,
) -> Result<EuclidSuite> {
    check_delta(delta, 0.5)?;
    let q = SplitQuantities::exact(&spec.cov, split);
    euclid_suite_from(&q.stats, spec, b, delta, variant, C2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EpsilonInputs {
    /// Estimate `ε₁`, `ε₂` from the width draws.
    Auto,
    Given { eps1: f64, eps2: f64 },
}

/// `(ε₁, ε₂)` for the general norm bound, with a note on how they were
/// obtained.
pub fn resolve_epsilons(
    q: &SplitQuantities,
    delta: f64,
    inputs: EpsilonInputs,
) -> Result<(f64, f64, &'static str)> {
    if let EpsilonInputs::Given { eps1, eps2 } = inputs {
        return Ok((eps1, eps2, "given"));
    }
    let mc = q.mc()?;
    if mc.vstar.mean == 0.0 {
        return Ok((0.0, 0.0, "zero covariance"));
    }
    let level = 1.0 - delta / 4.0;
    Ok(match mc.norm {
        Norm::L2 => (
            (mc.vstar_quantile(level) / mc.vstar.mean - 1.0).max(0.0),
            0.0,
            "quantile of ‖v*‖ at 1 − δ/4; ‖Pv*‖₂ = 1",
        ),
        Norm::L1 if q.stats.diagonal => (
            (q.stats.max_diag.sqrt() / mc.vstar.mean - 1.0).max(0.0),
            0.0,
            "‖v*‖ ≤ √max Σ₂ii; Pv* = v* for diagonal Σ₂",
        ),
        _ => (
            (mc.vstar_quantile(level) / mc.vstar.mean - 1.0).max(0.0),
            (mc.pv_sq_quantile(level) - 1.0).max(0.0),
            "quantiles of ‖v*‖ and ‖Pv*‖² at 1 − δ/4",
        ),
    })
}

/// General-norm `ε` (theorem constants or the sharper proof expression).
#[allow(clippy::too_many_arguments)]
pub fn general_epsilon(
    variant: Variant,
    n: usize,
    delta: f64,
    r_norm: f64,
    big_r_norm: f64,
    eps1: f64,
    eps2: f64,
) -> f64 {
    let n = n as f64;
    let l = (1.0 / delta).ln();
    let contraction = (1.0 + eps1).powi(2) * n / big_r_norm;
    match variant {
        Variant::Theorem => C2 * ((l / r_norm).sqrt() + (l / n).sqrt() + contraction + eps2),
        Variant::AppendixSharp => {
            8.0 / n.sqrt()
                + 28.0 * ((32.0 / delta).ln() / n).sqrt()
                + 8.0 * ((8.0 / delta).ln() / r_norm).sqrt()
                + 2.0 * contraction
                + 2.0 * eps2
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneralSuite {
    pub gen: BoundReport,
    pub norm_bound: BoundReport,
    pub risk: BoundReport,
}

pub fn general_norm_suite_from(
    q: &SplitQuantities,
    spec: &ProblemSpec,
    b: f64,
    delta: f64,
    variant: Variant,
    eps_inputs: EpsilonInputs,
) -> Result<GeneralSuite> {
    check_delta(delta, 0.25)?;
    let mc = q.mc()?;
    if mc.norm == Norm::Linf {
        return Err(LabError::UnsupportedNorm("linf".into()));
    }
    if q.stats.is_zero() {
        return Err(LabError::ZeroCovariance);
    }
    let n = spec.n as f64;
    let r_norm = mc.r_norm();
    let big_r_norm = mc.big_r_norm();
    let g = gamma(variant, spec.n, delta, q.stats.rank1, r_norm);
    let (eps1, eps2, how) = resolve_epsilons(q, delta, eps_inputs)?;
    let eps = general_epsilon(variant, spec.n, delta, r_norm, big_r_norm, eps1, eps2);
    let wn = mc.norm.eval(&spec.w_star);
    let sigma = spec.sigma;
    let e = mc.width.mean;

    let gen_at = |e: f64| (1.0 + g) * (b * e).powi(2) / n;
    let mut gen = BoundReport::new(BoundKind::GeneralGen, gen_at(e), delta, variant)
        .term("gamma", g)
        .term("width", e)
        .term("r_norm", r_norm);
    gen.interval = mc_interval(&mc.width, gen_at);

    let norm_at = |e: f64| wn + (1.0 + eps).sqrt() * sigma * n.sqrt() / e;
    let mut norm_bound = BoundReport::new(BoundKind::GeneralNorm, norm_at(e), delta, variant)
        .term("epsilon", eps)
        .term("epsilon1", eps1)
        .term("epsilon2", eps2)
        .term("signal_norm", wn)
        .term("noise_term", norm_at(e) - wn)
        .term("width", e)
        .term("R_norm", big_r_norm);
    norm_bound.interval = mc_interval(&mc.width, norm_at);
    norm_bound.notes.push(how.to_string());

    let risk_at = |e: f64| (1.0 + g) * (1.0 + eps) * (sigma + wn * e / n.sqrt()).powi(2);
    let mut risk = BoundReport::new(BoundKind::GeneralRisk, risk_at(e), delta, variant)
        .term("gamma", g)
        .term("epsilon", eps)
        .term("inner", sigma + wn * e / n.sqrt())
        .term("width", e);
    risk.interval = mc_interval(&mc.width, risk_at);

    if b < wn {
        gen.invalidate("B is below ‖w*‖");
    }
    if g > 1.0 {
        gen.invalidate(format!("gamma = {g} exceeds 1"));
        risk.invalidate(format!("gamma = {g} exceeds 1"));
    }
    if eps > 1.0 {
        norm_bound.invalidate(format!("epsilon = {eps} exceeds 1"));
        risk.invalidate(format!("epsilon = {eps} exceeds 1"));
    }
    Ok(GeneralSuite {
        gen,
        norm_bound,
        risk,
    })
}

#[allow(clippy::too_many_arguments)]
pub fn general_norm_suite(
    spec: &ProblemSpec,
    split: &CovSplit,
    norm: Norm,
    b: f64,
    delta: f64,
    variant: Variant,
    eps_inputs: EpsilonInputs,
    mc: &McSettings,
) -> Result<GeneralSuite> {
    check_delta(delta, 0.25)?;
    if norm == Norm::Linf {
        return Err(LabError::UnsupportedNorm("linf".into()));
    }
    let q = SplitQuantities::with_mc(&spec.cov, split, norm, mc)?;
    general_norm_suite_from(&q, spec, b, delta, variant, eps_inputs)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BpSuite {
    pub gen: BoundReport,
    pub norm_bound: BoundReport,
    pub risk: BoundReport,
    /// Present only for `Σ = I`.
    pub iso_norm: Option<BoundReport>,
}

/// Basis pursuit bounds from cached ℓ1 quantities of a diagonal `Σ₂`.
pub fn bp_suite_from(
    q: &SplitQuantities,
    n: usize,
    sigma: f64,
    w_star_l1: f64,
    b: f64,
    delta: f64,
    variant: Variant,
) -> Result<(BoundReport, BoundReport, BoundReport)> {
    check_delta(delta, 0.25)?;
    if !q.stats.diagonal {
        return Err(LabError::NotDiagonal);
    }
    let mc = q.mc()?;
    if mc.norm != Norm::L1 {
        return Err(LabError::UnsupportedNorm(mc.norm.to_string()));
    }
    if q.stats.is_zero() {
        return Err(LabError::ZeroCovariance);
    }
    let nf = n as f64;
    let l = (1.0 / delta).ln();
    let r1 = mc.r_norm();
    let g = gamma(variant, n, delta, q.stats.rank1, r1);
    let eps = C2 * ((l / r1).sqrt() + (l / nf).sqrt() + nf / r1);
    let e = mc.width.mean;

    let gen_at = |e: f64| (1.0 + g) * (b * e).powi(2) / nf;
    let mut gen = BoundReport::new(BoundKind::BpGen, gen_at(e), delta, variant)
        .term("gamma", g)
        .term("width", e)
        .term("r1", r1);
    gen.interval = mc_interval(&mc.width, gen_at);

    let norm_at = |e: f64| w_star_l1 + (1.0 + eps).sqrt() * sigma * nf.sqrt() / e;
    let mut norm_bound = BoundReport::new(BoundKind::BpNorm, norm_at(e), delta, Variant::Theorem)
        .term("epsilon", eps)
        .term("signal_norm", w_star_l1)
        .term("noise_term", norm_at(e) - w_star_l1)
        .term("width", e)
        .term("r1", r1);
    norm_bound.interval = mc_interval(&mc.width, norm_at);

    let risk_at = |e: f64| (1.0 + g) * (1.0 + eps) * (sigma + w_star_l1 * e / nf.sqrt()).powi(2);
    let mut risk = BoundReport::new(BoundKind::BpRisk, risk_at(e), delta, variant)
        .term("gamma", g)
        .term("epsilon", eps)
        .term("inner", sigma + w_star_l1 * e / nf.sqrt())
        .term("width", e)
        .term("r1", r1);
    risk.interval = mc_interval(&mc.width, risk_at);

    if b < w_star_l1 {
        gen.invalidate("B is below ‖w*‖₁");
    }
    if g > 1.0 {
        gen.invalidate(format!("gamma = {g} exceeds 1"));
        risk.invalidate(format!("gamma = {g} exceeds 1"));
    }
    if eps > 1.0 {
        norm_bound.invalidate(format!("epsilon = {eps} exceeds 1"));
        risk.invalidate(format!("epsilon = {eps} exceeds 1"));
    }
    Ok((gen, norm_bound, risk))
}

pub fn bp_suite(
    spec: &ProblemSpec,
    split: &CovSplit,
    b: f64,
    delta: f64,
    variant: Variant,
    mc: &McSettings,
) -> Result<BpSuite> {
    check_delta(delta, 0.25)?;
    let q = SplitQuantities::with_mc(&spec.cov, split, Norm::L1, mc)?;
    let (gen, norm_bound, risk) = bp_suite_from(
        &q,
        spec.n,
        spec.sigma,
        Norm::L1.eval(&spec.w_star),
        b,
        delta,
        variant,
    )?;
    let iso_norm = match bp_isotropic_norm(spec, delta, mc) {
        Ok(r) => Some(r),
        Err(LabError::UnsupportedForIsotropic) => None,
        Err(e) => return Err(e),
    };
    Ok(BpSuite {
        gen,
        norm_bound,
        risk,
        iso_norm,
    })
}

fn support_size(w: &[f64]) -> usize {
    w.iter().filter(|&&v| v != 0.0).count()
}

fn require_identity(spec: &ProblemSpec) -> Result<()> {
    if spec.cov.isotropic_scale() != Some(1.0) {
        return Err(LabError::UnsupportedForIsotropic);
    }
    Ok(())
}

/// `ε` of the isotropic basis pursuit norm bound.
pub fn bp_isotropic_epsilon(n: usize, delta: f64, d_off: f64) -> f64 {
    let l = (1.0 / delta).ln();
    let ld = d_off.ln();
    C3 * ((l / n as f64).sqrt() + (l / ld).sqrt() + n as f64 / ld)
}

/// `η` of the isotropic basis pursuit risk bound; `log|S|` is taken as 0
/// for `|S| ≤ 1`.
pub fn bp_isotropic_eta(n: usize, delta: f64, support: usize, d_off: f64) -> f64 {
    let l = (1.0 / delta).ln();
    let ls = if support <= 1 { 0.0 } else { (support as f64).ln() };
    let ld = d_off.ln();
    ETA_CONST * ((l / n as f64).sqrt() + ((l + ls) / ld).sqrt() + n as f64 / ld)
}

/// `(1+ε)^{1/2}(σ² + ‖w*‖₂²)^{1/2}√n / E‖H′‖∞` with `H′ ~ N(0, I_{d−|S|})`.
pub fn bp_isotropic_norm_with(
    n: usize,
    d: u128,
    sigma: f64,
    w_star: &[f64],
    delta: f64,
    mc: &McSettings,
) -> Result<BoundReport> {
    check_delta(delta, 0.25)?;
    let s = support_size(w_star);
    let d_off = d - s as u128;
    let spec_off = Spectrum::new(vec![SpectralGroup {
        value: 1.0,
        multiplicity: d_off,
    }])?;
    let draws = sample_dual_norms_spectrum(&spec_off, Norm::L1, mc.samples, mc.seed)?;
    let dual: Vec<f64> = draws.iter().map(|x| x.dual).collect();
    let sm = summarize(&dual);
    let est = WidthEstimate {
        mean: sm.mean,
        std_error: sm.std_error,
        samples: sm.count,
        method: WidthMethod::MonteCarlo,
    };
    let eps = bp_isotropic_epsilon(n, delta, d_off as f64);
    let w2 = Norm::L2.eval(w_star);
    let scale = (sigma * sigma + w2 * w2).sqrt();
    let at = |e: f64| (1.0 + eps).sqrt() * scale * (n as f64).sqrt() / e;
    let mut rep = BoundReport::new(BoundKind::BpIsoNorm, at(est.mean), delta, Variant::Theorem)
        .term("epsilon", eps)
        .term("width", est.mean)
        .term("support", s as f64)
        .term("effective_noise", scale);
    rep.interval = mc_interval(&est, at);
    if eps > 1.0 {
        rep.invalidate(format!("epsilon = {eps} exceeds 1"));
    }
    Ok(rep)
}

pub fn bp_isotropic_norm(spec: &ProblemSpec, delta: f64, mc: &McSettings) -> Result<BoundReport> {
    require_identity(spec)?;
    bp_isotropic_norm_with(spec.n, spec.dim() as u128, spec.sigma, &spec.w_star, delta, mc)
}

/// `(1 + η)(σ² + ‖w*‖₂²)` for `Σ = I`.
pub fn bp_isotropic_risk(spec: &ProblemSpec, delta: f64) -> Result<BoundReport> {
    check_delta(delta, 0.5)?;
    require_identity(spec)?;
    let s = support_size(&spec.w_star);
    let d_off = (spec.dim() - s) as f64;
    let eta = bp_isotropic_eta(spec.n, delta, s, d_off);
    let null = spec.null_risk();
    let mut rep = BoundReport::new(BoundKind::BpIsoRisk, (1.0 + eta) * null, delta, Variant::Theorem)
        .term("eta", eta)
        .term("null_risk", null)
        .term("support", s as f64);
    if s <= 1 {
        rep.notes.push("log|S| taken as 0 for |S| ≤ 1".into());
    }
    if eta > 1.0 {
        rep.invalidate(format!("eta = {eta} exceeds 1"));
    }
    Ok(rep)
}

/// One element of a consistency sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticInput {
    pub n: usize,
    pub rank1: usize,
    /// `‖w*‖` in the norm under study.
    pub w_star_norm: f64,
    pub sigma2: Spectrum,
}

impl DiagnosticInput {
    pub fn from_split(spec: &ProblemSpec, split: &CovSplit, norm: Norm) -> Result<Self> {
        let s2 = split.sigma2(&spec.cov);
        if norm == Norm::L1 && !s2.is_diagonal() {
            return Err(LabError::NotDiagonal);
        }
        Ok(Self {
            n: spec.n,
            rank1: split.rank1(),
            w_star_norm: norm.eval(&spec.w_star),
            sigma2: s2.spectrum(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRow {
    pub n: usize,
    pub ratios: BTreeMap<String, f64>,
    /// `Pr(‖Pv*‖² > 1 + η)` for η in {0.1, 0.01} (general norms only).
    pub contraction: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsTable {
    pub norm: Norm,
    pub rows: Vec<DiagnosticRow>,
    /// Per ratio: strictly decreasing along the sequence.
    pub decreasing: BTreeMap<String, bool>,
}

/// Finite-`n` values of the sufficient conditions for consistency.
///
/// ℓ2 reports the three Euclidean ratios; ℓ1 the three basis pursuit ratios
/// with `r₁`; ℓ∞ the four general ratios plus contraction tail estimates.
pub fn consistency_diagnostics(
    seq: &[DiagnosticInput],
    norm: Norm,
    mc: &McSettings,
) -> Result<DiagnosticsTable> {
    if seq.is_empty() {
        return Err(LabError::EmptySequence);
    }
    let mut rows = Vec::with_capacity(seq.len());
    for item in seq {
        if item.sigma2.is_zero() {
            return Err(LabError::ZeroCovariance);
        }
        let n = item.n as f64;
        let mut ratios = BTreeMap::new();
        let mut contraction = BTreeMap::new();
        ratios.insert("rank1_over_n".to_string(), item.rank1 as f64 / n);
        match norm {
            Norm::L2 => {
                let tr = item.sigma2.trace();
                let big_r = tr * tr / item.sigma2.trace_sq();
                ratios.insert("signal".into(), item.w_star_norm * (tr / n).sqrt());
                ratios.insert("n_over_R".into(), n / big_r);
            }
            Norm::L1 => {
                let q = SplitQuantities::from_spectrum(&item.sigma2, item.rank1, Norm::L1, mc)?;
                let m = q.mc.as_ref().unwrap();
                ratios.insert("signal".into(), item.w_star_norm * m.width.mean / n.sqrt());
                ratios.insert("n_over_r1".into(), n / m.r_norm());
            }
            Norm::Linf => {
                let q = SplitQuantities::from_spectrum(&item.sigma2, item.rank1, Norm::Linf, mc)?;
                let m = q.mc.as_ref().unwrap();
                ratios.insert("signal".into(), item.w_star_norm * m.width.mean / n.sqrt());
                ratios.insert("inv_r_norm".into(), 1.0 / m.r_norm());
                ratios.insert("n_over_R_norm".into(), n / m.big_r_norm());
                for eta in [0.1, 0.01] {
                    contraction.insert(format!("eta_{eta}"), m.contraction_tail(eta));
                }
            }
        }
        rows.push(DiagnosticRow {
            n: item.n,
            ratios,
            contraction,
        });
    }
    let mut decreasing = BTreeMap::new();
    for key in rows[0].ratios.keys() {
        let dec = rows
            .windows(2)
            .all(|w| w[1].ratios[key] < w[0].ratios[key]);
        decreasing.insert(key.clone(), dec);
    }
    Ok(DiagnosticsTable {
        norm,
        rows,
        decreasing,
    })
}

/// Contraction tail `Pr(‖Pv*‖² > 1 + η)` for a split and a general norm.
pub fn contraction_probability(
    spec: &ProblemSpec,
    split: &CovSplit,
    norm: Norm,
    eta: f64,
    mc: &McSettings,
) -> Result<f64> {
    let q = SplitQuantities::with_mc(&spec.cov, split, norm, mc)?;
    Ok(q.mc.unwrap().contraction_tail(eta))
}
