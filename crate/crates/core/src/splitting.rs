//! Eigen-aligned covariance splits: top-k, bound-optimal k, and the
//! τ-threshold construction for ℓ1 consistency.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    bp_suite_from, euclid_suite_from, general_norm_suite_from, ucb_main_from, BoundReport,
    EpsilonInputs, McSettings, SplitQuantities, Variant, C2,
};
use crate::error::{LabError, Result};
use crate::model::{CovSplit, CovarianceModel, ProblemSpec};
use crate::norms::Norm;

/// `Σ₁` = the `k` largest eigenvalues (ties broken by lowest index).
pub fn split_top_k(cov: &CovarianceModel, k: usize) -> Result<CovSplit> {
    if k > cov.dim() {
        return Err(LabError::KOutOfRange { k, dim: cov.dim() });
    }
    CovSplit::new((0..k).collect(), cov.dim())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundFamily {
    Main,
    EuclidRisk,
    GeneralRisk,
    BpRisk,
}

impl std::str::FromStr for BoundFamily {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "main" => Ok(Self::Main),
            "euclid_risk" => Ok(Self::EuclidRisk),
            "general_risk" => Ok(Self::GeneralRisk),
            "bp_risk" => Ok(Self::BpRisk),
            other => Err(LabError::InvalidProblem(format!("unknown bound family {other:?}"))),
        }
    }
}

impl BoundFamily {
    fn needs_mc(self) -> bool {
        !matches!(self, Self::EuclidRisk)
    }
}

/// Cached per-`k` quantities for `k ∈ 0..=min(d, n)`; the expensive Monte
/// Carlo widths are shared by every `(B, δ, variant)` evaluated later.
#[derive(Debug, Clone)]
pub struct SplitScan {
    family: BoundFamily,
    norm: Norm,
    quantities: Vec<SplitQuantities>,
}

impl SplitScan {
    pub fn new(
        cov: &CovarianceModel,
        n: usize,
        family: BoundFamily,
        norm: Norm,
        mc: &McSettings,
    ) -> Result<Self> {
        let norm = match family {
            BoundFamily::EuclidRisk => Norm::L2,
            BoundFamily::BpRisk => Norm::L1,
            _ => norm,
        };
        let kmax = cov.dim().min(n);
        let quantities = (0..=kmax)
            .into_par_iter()
            .map(|k| {
                let split = split_top_k(cov, k)?;
                if family.needs_mc() {
                    SplitQuantities::with_mc(cov, &split, norm, mc)
                } else {
                    Ok(SplitQuantities::exact(cov, &split))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            family,
            norm,
            quantities,
        })
    }

    pub fn kmax(&self) -> usize {
        self.quantities.len() - 1
    }

    pub fn quantities(&self, k: usize) -> &SplitQuantities {
        &self.quantities[k]
    }

    /// The family's bound at split size `k`; `Σ₂ = 0` (`k = d`) yields an
    /// error for the risk families.
    pub fn evaluate(
        &self,
        k: usize,
        spec: &ProblemSpec,
        b: f64,
        delta: f64,
        variant: Variant,
    ) -> Result<BoundReport> {
        let q = &self.quantities[k];
        match self.family {
            BoundFamily::Main => ucb_main_from(q, spec, b, delta, variant),
            BoundFamily::EuclidRisk => {
                euclid_suite_from(&q.stats, spec, b, delta, variant, C2).map(|s| s.risk)
            }
            BoundFamily::GeneralRisk => {
                general_norm_suite_from(q, spec, b, delta, variant, EpsilonInputs::Auto)
                    .map(|s| s.risk)
            }
            BoundFamily::BpRisk => bp_suite_from(
                q,
                spec.n,
                spec.sigma,
                self.norm.eval(&spec.w_star),
                b,
                delta,
                variant,
            )
            .map(|t| t.2),
        }
    }

    /// Every evaluable `(k, report)` in increasing `k`.
    pub fn scan(
        &self,
        spec: &ProblemSpec,
        b: f64,
        delta: f64,
        variant: Variant,
    ) -> Result<Vec<(usize, BoundReport)>> {
        let mut out = Vec::with_capacity(self.quantities.len());
        for k in 0..self.quantities.len() {
            match self.evaluate(k, spec, b, delta, variant) {
                Ok(r) => out.push((k, r)),
                Err(LabError::ZeroCovariance) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }

    /// Minimizing `k` among valid entries (smallest `k` on ties); falls back
    /// to the global minimum with a note when nothing is valid.
    pub fn best(
        &self,
        spec: &ProblemSpec,
        b: f64,
        delta: f64,
        variant: Variant,
    ) -> Result<(usize, BoundReport)> {
        let all = self.scan(spec, b, delta, variant)?;
        let pick = |valid_only: bool| {
            all.iter()
                .filter(|(_, r)| !valid_only || r.valid)
                .fold(None::<&(usize, BoundReport)>, |acc, e| match acc {
                    Some(a) if a.1.value <= e.1.value => Some(a),
                    _ => Some(e),
                })
        };
        if let Some(e) = pick(true) {
            return Ok(e.clone());
        }
        let (k, mut r) = pick(false)
            .cloned()
            .ok_or(LabError::ZeroCovariance)?;
        r.notes
            .push("no split satisfies the side conditions; global minimum reported".into());
        Ok((k, r))
    }
}

/// `k*` minimizing the chosen bound over `k ∈ 0..=min(d, n)`.
#[allow(clippy::too_many_arguments)]
pub fn optimize_split(
    spec: &ProblemSpec,
    delta: f64,
    family: BoundFamily,
    norm: Norm,
    b: f64,
    variant: Variant,
    mc: &McSettings,
) -> Result<(usize, BoundReport)> {
    SplitScan::new(&spec.cov, spec.n, family, norm, mc)?.best(spec, b, delta, variant)
}

/// The τ-threshold split with its diagnostic quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauSplit {
    pub split: CovSplit,
    /// `a = ‖v_k‖₁²/‖v_k‖₂²`.
    pub a: f64,
    /// `b = ‖v_k‖₁/‖v_k‖∞`.
    pub b: f64,
    pub tau: f64,
    /// Eigenvalue indices of the tail above the threshold.
    pub s_tau: Vec<usize>,
    pub tail_l1: f64,
    /// `‖v_{k,τ}‖₁`, the tail with `S_τ` removed.
    pub kept_l1: f64,
}

impl TauSplit {
    /// `‖v_{k,τ}‖₁ ≥ (1 − b/(τa))‖v_k‖₁`.
    pub fn mass_inequality(&self) -> bool {
        self.kept_l1 >= (1.0 - self.b / (self.tau * self.a)) * self.tail_l1
    }

    /// `|S_τ| ≤ a(b/(τa))²`.
    pub fn size_inequality(&self) -> bool {
        (self.s_tau.len() as f64) <= self.a * (self.b / (self.tau * self.a)).powi(2)
    }
}

/// Splits off the top `k` eigenvalues plus every tail eigenvalue at least
/// `τ‖v_k‖∞`, with `τ` chosen so that `b/(τa) = (n/a)^{3/4}`.
pub fn tau_split(cov: &CovarianceModel, k: usize, n: usize) -> Result<TauSplit> {
    let d = cov.dim();
    if k > d {
        return Err(LabError::KOutOfRange { k, dim: d });
    }
    let tail = &cov.eigenvalues()[k..];
    let l1: f64 = tail.iter().sum();
    let l2sq: f64 = tail.iter().map(|v| v * v).sum();
    let linf = tail.iter().copied().fold(0.0, f64::max);
    if l1 == 0.0 {
        return Err(LabError::DegenerateTail(k));
    }
    let a = l1 * l1 / l2sq;
    let b = l1 / linf;
    let tau = (b / a) * (a / n as f64).powf(0.75);
    let s_tau: Vec<usize> = tail
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= tau * linf)
        .map(|(i, _)| k + i)
        .collect();
    let removed: f64 = s_tau.iter().map(|&i| cov.eigenvalues()[i]).sum();
    let sel1: Vec<usize> = (0..k).chain(s_tau.iter().copied()).collect();
    Ok(TauSplit {
        split: CovSplit::new(sel1, d)?,
        a,
        b,
        tau,
        s_tau,
        tail_l1: l1,
        kept_l1: l1 - removed,
    })
}
