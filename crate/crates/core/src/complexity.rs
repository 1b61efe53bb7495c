//! Gaussian widths, radii, dual-norm subgradients and effective ranks of
//! norm balls mapped through `Σ^{1/2}`.
//!
//! Monte Carlo estimates are drawn in fixed chunks, each with its own
//! sub-stream of the seed, so results do not depend on the thread count.
//! Diagonal covariances (and any covariance for the ℓ2 norm, by rotation
//! invariance) are sampled through their grouped spectrum: a group of `m`
//! equal eigenvalues costs one chi-square or one maximum draw instead of `m`
//! normals, which makes dimensions like `2^80` tractable.

use rand::Rng;
use rand_distr::{ChiSquared, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;

use crate::error::{LabError, Result};
use crate::model::{CovarianceModel, Spectrum};
use crate::norms::Norm;
use crate::rng::{normal_vec, std_normal, substream, LabRng};
use crate::stats::{covariance, ratio_sq_se, summarize};

pub const DEFAULT_MC_SAMPLES: usize = 20_000;
pub const MIN_MC_SAMPLES: usize = 100;
/// Largest dimension for which the ℓ∞ radius is found by sign enumeration.
pub const LINF_EXACT_DIM: usize = 20;
const CHUNK: usize = 1_000;
const TIE_REL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidthMethod {
    ClosedForm,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WidthEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
    pub method: WidthMethod,
}

impl WidthEstimate {
    fn zero() -> Self {
        Self {
            mean: 0.0,
            std_error: 0.0,
            samples: 0,
            method: WidthMethod::ClosedForm,
        }
    }

    pub fn scaled(self, b: f64) -> Self {
        Self {
            mean: self.mean * b,
            std_error: self.std_error * b.abs(),
            ..self
        }
    }
}

fn check_samples(samples: usize) -> Result<()> {
    if samples < MIN_MC_SAMPLES {
        return Err(LabError::TooFewSamples {
            min: MIN_MC_SAMPLES,
            got: samples,
        });
    }
    Ok(())
}

/// Upper tail quantile of `|N(0,1)|`: the `t` with `Pr(|N| > t) = q`.
fn abs_normal_upper_quantile(q: f64) -> f64 {
    std::f64::consts::SQRT_2 * erfc_inv(q)
}

/// Maximum of `m` iid `|N(0,1)|` by inversion of `(2Φ(t) − 1)^m`.
fn sample_max_abs_normal<R: Rng + ?Sized>(rng: &mut R, m: u128) -> f64 {
    if m == 1 {
        return std_normal(rng).abs();
    }
    let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    // 1 − u^{1/m}, kept accurate for huge m
    let q = -(u.ln() / m as f64).exp_m1();
    abs_normal_upper_quantile(q)
}

fn sample_chi_sq<R: Rng + ?Sized>(rng: &mut R, m: u128) -> f64 {
    if m <= 16 {
        (0..m).map(|_| std_normal(rng).powi(2)).sum()
    } else {
        ChiSquared::new(m as f64).unwrap().sample(rng)
    }
}

/// One joint draw: `‖Σ^{1/2}H‖_*` and `‖v*‖_Σ` for the same `H`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualDraw {
    pub dual: f64,
    pub vstar: f64,
    /// `‖Pv*‖²` in the primal norm, `P` the projector onto the span of `Σ`.
    pub pv_sq: f64,
}

/// Where draws of `Σ^{1/2}H` come from.
enum Source<'a> {
    /// Grouped eigenvalues; `diagonal` says coordinates are the eigenbasis.
    Grouped { spec: Spectrum, diagonal: bool },
    Dense { cov: &'a CovarianceModel, diag: Vec<f64> },
}

impl<'a> Source<'a> {
    fn from_cov(cov: &'a CovarianceModel, norm: Norm) -> Self {
        if cov.is_diagonal() || norm == Norm::L2 {
            Source::Grouped {
                spec: cov.spectrum(),
                diagonal: cov.is_diagonal(),
            }
        } else {
            Source::Dense {
                cov,
                diag: cov.diag_entries(),
            }
        }
    }

    fn draw(&self, norm: Norm, rng: &mut LabRng) -> Result<DualDraw> {
        match self {
            Source::Grouped { spec, diagonal } => match norm {
                Norm::L2 => {
                    let (mut d2, mut v2) = (0.0, 0.0);
                    for g in &spec.groups {
                        if g.value == 0.0 {
                            continue;
                        }
                        let c = sample_chi_sq(rng, g.multiplicity);
                        d2 += g.value * c;
                        v2 += g.value * g.value * c;
                    }
                    let dual = d2.sqrt();
                    let vstar = if dual > 0.0 { v2.sqrt() / dual } else { 0.0 };
                    Ok(DualDraw {
                        dual,
                        vstar,
                        pv_sq: 1.0,
                    })
                }
                Norm::L1 => {
                    debug_assert!(*diagonal);
                    let mut best = (0.0, 0.0);
                    for g in &spec.groups {
                        if g.value == 0.0 {
                            continue;
                        }
                        let s = g.value.sqrt();
                        let val = s * sample_max_abs_normal(rng, g.multiplicity);
                        // ties go to the smaller Σ_ii
                        if val > best.0 || (val == best.0 && s < best.1) {
                            best = (val, s);
                        }
                    }
                    Ok(DualDraw {
                        dual: best.0,
                        vstar: best.1,
                        pv_sq: 1.0,
                    })
                }
                Norm::Linf => {
                    let mut total = 0.0;
                    let mut v2 = 0.0;
                    for g in &spec.groups {
                        let m = usize::try_from(g.multiplicity)
                            .ok()
                            .filter(|&m| m <= 1 << 24)
                            .ok_or_else(|| {
                                LabError::UnsupportedNorm(
                                    "linf width for a spectrum this large".into(),
                                )
                            })?;
                        let s = g.value.sqrt();
                        for _ in 0..m {
                            total += s * std_normal(rng).abs();
                        }
                        v2 += g.value * m as f64;
                    }
                    Ok(DualDraw {
                        dual: total,
                        vstar: v2.sqrt(),
                        pv_sq: 1.0,
                    })
                }
            },
            Source::Dense { cov, diag } => {
                let h = normal_vec(rng, cov.dim());
                let u = cov.sqrt_mul(&h);
                let dual = norm.eval_dual(&u);
                if dual == 0.0 {
                    return Ok(DualDraw {
                        dual,
                        vstar: 0.0,
                        pv_sq: 0.0,
                    });
                }
                let v = subgradient_with_diag(norm, &u, diag)?;
                Ok(DualDraw {
                    dual,
                    vstar: cov.seminorm(&v),
                    pv_sq: norm.eval(&cov.project_onto_span(&v)).powi(2),
                })
            }
        }
    }
}

fn draw_many(source: &Source<'_>, norm: Norm, samples: usize, seed: u64) -> Result<Vec<DualDraw>> {
    let chunks = samples.div_ceil(CHUNK);
    let parts: Vec<Result<Vec<DualDraw>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, c as u64);
            let len = CHUNK.min(samples - c * CHUNK);
            (0..len).map(|_| source.draw(norm, &mut rng)).collect()
        })
        .collect();
    let mut out = Vec::with_capacity(samples);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

fn check_grouped_norm(norm: Norm, diagonal: bool) -> Result<()> {
    if norm != Norm::L2 && !diagonal {
        return Err(LabError::NotDiagonal);
    }
    Ok(())
}

/// Joint Monte Carlo draws of `‖Σ^{1/2}H‖_*` and `‖v*‖_Σ`.
pub fn sample_dual_norms(
    cov: &CovarianceModel,
    norm: Norm,
    samples: usize,
    seed: u64,
) -> Result<Vec<DualDraw>> {
    check_samples(samples)?;
    draw_many(&Source::from_cov(cov, norm), norm, samples, seed)
}

/// As [`sample_dual_norms`] for a grouped diagonal spectrum that need not be
/// materializable.
pub fn sample_dual_norms_spectrum(
    spec: &Spectrum,
    norm: Norm,
    samples: usize,
    seed: u64,
) -> Result<Vec<DualDraw>> {
    check_samples(samples)?;
    check_grouped_norm(norm, true)?;
    let source = Source::Grouped {
        spec: spec.clone(),
        diagonal: true,
    };
    draw_many(&source, norm, samples, seed)
}

fn estimate(values: &[f64]) -> WidthEstimate {
    let s = summarize(values);
    WidthEstimate {
        mean: s.mean,
        std_error: s.std_error,
        samples: s.count,
        method: WidthMethod::MonteCarlo,
    }
}

/// `W(Σ^{1/2}K) = B·E‖Σ^{1/2}H‖_*` for the ball `K = {‖w‖ ≤ B}`.
pub fn gaussian_width_mc(
    cov: &CovarianceModel,
    norm: Norm,
    b: f64,
    samples: usize,
    seed: u64,
) -> Result<WidthEstimate> {
    check_samples(samples)?;
    if cov.is_zero() {
        return Ok(WidthEstimate::zero());
    }
    let draws = sample_dual_norms(cov, norm, samples, seed)?;
    let d: Vec<f64> = draws.iter().map(|x| x.dual).collect();
    Ok(estimate(&d).scaled(b))
}

pub fn gaussian_width_spectrum(
    spec: &Spectrum,
    norm: Norm,
    b: f64,
    samples: usize,
    seed: u64,
) -> Result<WidthEstimate> {
    check_samples(samples)?;
    if spec.is_zero() {
        return Ok(WidthEstimate::zero());
    }
    let draws = sample_dual_norms_spectrum(spec, norm, samples, seed)?;
    let d: Vec<f64> = draws.iter().map(|x| x.dual).collect();
    Ok(estimate(&d).scaled(b))
}

/// `sup_{‖w‖ ≤ B} ‖w‖_Σ`. For ℓ∞ with a dense basis beyond
/// [`LINF_EXACT_DIM`] this returns the upper bound `B·√(Σ_ij |Σ_ij|)`; see
/// [`radius_linf_bracket`] for a two-sided estimate.
pub fn radius(cov: &CovarianceModel, norm: Norm, b: f64) -> Result<f64> {
    let base = match norm {
        Norm::L2 => cov.op_norm().sqrt(),
        Norm::L1 => cov.max_diag().sqrt(),
        Norm::Linf => {
            if cov.is_diagonal() {
                cov.trace().sqrt()
            } else if cov.dim() <= LINF_EXACT_DIM {
                linf_radius_exact(cov)
            } else {
                abs_sum_bound(cov).sqrt()
            }
        }
    };
    Ok(b * base)
}

/// `max_s sᵀΣs` over sign vectors, by enumeration (`s` and `−s` agree, so
/// the first sign is pinned).
fn linf_radius_exact(cov: &CovarianceModel) -> f64 {
    let d = cov.dim();
    let sigma = cov.to_dense();
    let mut best = 0.0f64;
    for mask in 0u64..(1u64 << (d - 1)) {
        let s: Vec<f64> = (0..d)
            .map(|i| if i > 0 && mask >> (i - 1) & 1 == 1 { -1.0 } else { 1.0 })
            .collect();
        let mut q = 0.0;
        for i in 0..d {
            for j in 0..d {
                q += s[i] * sigma[(i, j)] * s[j];
            }
        }
        best = best.max(q);
    }
    best.sqrt()
}

fn abs_sum_bound(cov: &CovarianceModel) -> f64 {
    cov.to_dense().iter().map(|v| v.abs()).sum()
}

/// Lower (best random sign vector) and upper (`√Σ|Σ_ij|`) bounds on the ℓ∞
/// radius at `B = 1`; both equal the exact value when it is computable.
pub fn radius_linf_bracket(cov: &CovarianceModel, samples: usize, seed: u64) -> (f64, f64) {
    if cov.is_diagonal() || cov.dim() <= LINF_EXACT_DIM {
        let r = radius(cov, Norm::Linf, 1.0).unwrap();
        return (r, r);
    }
    let mut rng = substream(seed, 0);
    let mut best = 0.0f64;
    for _ in 0..samples {
        let s: Vec<f64> = (0..cov.dim())
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        best = best.max(cov.quad_form(&s));
    }
    (best.sqrt(), abs_sum_bound(cov).sqrt())
}

fn subgradient_with_diag(norm: Norm, u: &[f64], diag: &[f64]) -> Result<Vec<f64>> {
    let d = u.len();
    match norm {
        Norm::L2 => {
            let nu = Norm::L2.eval(u);
            if nu == 0.0 {
                return Err(LabError::ZeroVector);
            }
            Ok(u.iter().map(|x| x / nu).collect())
        }
        Norm::L1 => {
            let m = Norm::Linf.eval(u);
            if m == 0.0 {
                return Err(LabError::ZeroVector);
            }
            let mut pick = None::<usize>;
            for i in 0..d {
                if u[i].abs() >= m * (1.0 - TIE_REL) {
                    match pick {
                        Some(j) if diag[i] >= diag[j] => {}
                        _ => pick = Some(i),
                    }
                }
            }
            let i = pick.unwrap();
            let mut v = vec![0.0; d];
            v[i] = u[i].signum();
            Ok(v)
        }
        Norm::Linf => {
            if u.iter().all(|&x| x == 0.0) {
                return Err(LabError::ZeroVector);
            }
            Ok(u.iter()
                .map(|&x| if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 })
                .collect())
        }
    }
}

/// Element `v ∈ ∂‖u‖_*` with primal norm 1 and `⟨v, u⟩ = ‖u‖_*`, chosen to
/// minimize `‖v‖_Σ` among the coordinate candidates for ℓ1.
pub fn subgradient_dual(norm: Norm, u: &[f64], cov: &CovarianceModel) -> Result<Vec<f64>> {
    if u.len() != cov.dim() {
        return Err(LabError::DimensionMismatch {
            expected: cov.dim(),
            got: u.len(),
        });
    }
    subgradient_with_diag(norm, u, &cov.diag_entries())
}

/// `r(Σ) = Tr Σ/‖Σ‖op` and `R(Σ) = (Tr Σ)²/Tr(Σ²)`.
pub fn effective_ranks_l2(cov: &CovarianceModel) -> Result<(f64, f64)> {
    effective_ranks_spectrum(&cov.spectrum())
}

pub fn effective_ranks_spectrum(spec: &Spectrum) -> Result<(f64, f64)> {
    if spec.is_zero() {
        return Err(LabError::ZeroCovariance);
    }
    let tr = spec.trace();
    Ok((tr / spec.op_norm(), tr * tr / spec.trace_sq()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub norm: Norm,
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub r_norm: f64,
    #[serde(rename = "R_norm")]
    pub big_r_norm: f64,
    pub r_norm_se: f64,
    #[serde(rename = "R_norm_se")]
    pub big_r_norm_se: f64,
    /// `E‖Σ^{1/2}H‖_*` at `B = 1`.
    pub width: WidthEstimate,
    /// `E‖v*‖_Σ`.
    pub vstar_mean: f64,
    pub vstar_se: f64,
    pub radius: f64,
    /// ℓ1 only: whether `r₁ ≤ R_{‖·‖₁} + 3·SE` held.
    pub r1_below_big_r: Option<bool>,
}

/// Ranks from a batch of joint draws (shared by the covariance and the
/// grouped-spectrum entry points).
pub fn rank_report_from_draws(
    norm: Norm,
    r: f64,
    big_r: f64,
    rad: f64,
    draws: &[DualDraw],
) -> RankReport {
    let dual: Vec<f64> = draws.iter().map(|x| x.dual).collect();
    let vs: Vec<f64> = draws.iter().map(|x| x.vstar).collect();
    let w = estimate(&dual);
    let v = summarize(&vs);
    let n = draws.len() as f64;
    let r_norm = (w.mean / rad).powi(2);
    let r_norm_se = 2.0 * w.mean * w.std_error / (rad * rad);
    let big_r_norm = (w.mean / v.mean).powi(2);
    let cov_mean = covariance(&dual, &vs) / n;
    let big_r_norm_se = ratio_sq_se(w.mean, v.mean, w.std_error, v.std_error, cov_mean);
    let r1_below_big_r =
        (norm == Norm::L1).then(|| r_norm <= big_r_norm + 3.0 * (r_norm_se + big_r_norm_se));
    RankReport {
        norm,
        r,
        big_r,
        r_norm,
        big_r_norm,
        r_norm_se,
        big_r_norm_se,
        width: w,
        vstar_mean: v.mean,
        vstar_se: v.std_error,
        radius: rad,
        r1_below_big_r,
    }
}

/// `r_‖·‖ = (E‖Σ^{1/2}H‖_*/rad)²` and `R_‖·‖ = (E‖Σ^{1/2}H‖_*/E‖v*‖_Σ)²`
/// alongside the closed-form `r`, `R`.
pub fn effective_ranks_general(
    cov: &CovarianceModel,
    norm: Norm,
    samples: usize,
    seed: u64,
) -> Result<RankReport> {
    check_samples(samples)?;
    let (r, big_r) = effective_ranks_l2(cov)?;
    let rad = radius(cov, norm, 1.0)?;
    let draws = sample_dual_norms(cov, norm, samples, seed)?;
    Ok(rank_report_from_draws(norm, r, big_r, rad, &draws))
}

pub fn effective_ranks_general_spectrum(
    spec: &Spectrum,
    norm: Norm,
    samples: usize,
    seed: u64,
) -> Result<RankReport> {
    check_samples(samples)?;
    let (r, big_r) = effective_ranks_spectrum(spec)?;
    let rad = match norm {
        Norm::L2 | Norm::L1 => spec.op_norm().sqrt(),
        Norm::Linf => spec.trace().sqrt(),
    };
    let draws = sample_dual_norms_spectrum(spec, norm, samples, seed)?;
    Ok(rank_report_from_draws(norm, r, big_r, rad, &draws))
}
