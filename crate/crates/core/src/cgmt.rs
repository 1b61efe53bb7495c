//! Monte Carlo checks of the Gaussian minimax comparison between primary
//! (PO) and auxiliary (AO) optimization problems.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::complexity::subgradient_dual;
use crate::error::{LabError, Result};
use crate::interpolators::{
    min_l1_interpolator, min_l2_interpolator, worst_case_l2_interpolator,
};
use crate::model::{sample_dataset, ProblemSpec};
use crate::norms::Norm;
use crate::rng::{derive_seed_path, normal_vec, rng_from_seed};
use crate::stats::binomial_se;

/// Extended reals: `max ∅ = −∞`, `min ∅ = +∞`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Extended {
    NegInf,
    Finite(f64),
    PosInf,
}

impl Extended {
    pub fn gt(self, t: f64) -> bool {
        match self {
            Self::NegInf => false,
            Self::Finite(v) => v > t,
            Self::PosInf => true,
        }
    }

    pub fn ge(self, t: f64) -> bool {
        match self {
            Self::NegInf => false,
            Self::Finite(v) => v >= t,
            Self::PosInf => true,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            Self::Finite(v) => Some(v),
            _ => None,
        }
    }

    /// `neg_inf`, `pos_inf` or the shortest round-trip decimal.
    pub fn to_csv(self) -> String {
        match self {
            Self::NegInf => "neg_inf".into(),
            Self::Finite(v) => format!("{v:?}"),
            Self::PosInf => "pos_inf".into(),
        }
    }
}

fn require_l2(norm: Norm) -> Result<()> {
    if norm != Norm::L2 {
        return Err(LabError::UnsupportedNorm(norm.to_string()));
    }
    Ok(())
}

/// `max_{‖w‖₂ ≤ B, Xw = Y} L(w) − σ²` on a fresh dataset.
pub fn po_gap_value(spec: &ProblemSpec, norm: Norm, b: f64, seed: u64) -> Result<Extended> {
    require_l2(norm)?;
    if b < 0.0 {
        return Ok(Extended::NegInf);
    }
    let ds = sample_dataset(spec, seed);
    match worst_case_l2_interpolator(spec, &ds, b) {
        Ok(r) => Ok(Extended::Finite(r.value - spec.bayes_risk())),
        Err(LabError::Infeasible { .. }) => Ok(Extended::NegInf),
        Err(e) => Err(e),
    }
}

/// `max {⟨H, u⟩ : ‖u‖₂ = ρ, ‖u + c‖₂ ≤ R}`, or `None` when the slice is
/// empty. The maximizer lies in `span{H, c}`.
fn support_on_sphere_slice(h: &[f64], c: &[f64], radius: f64, rho: f64) -> Option<f64> {
    let cn = Norm::L2.eval(c);
    let hn = Norm::L2.eval(h);
    if cn == 0.0 {
        return (rho <= radius).then_some(rho * hn);
    }
    // ⟨u, e⟩ ≤ t with e = c/‖c‖
    let t = (radius * radius - rho * rho - cn * cn) / (2.0 * cn);
    if t < -rho {
        return None;
    }
    let he: f64 = h.iter().zip(c).map(|(a, b)| a * b).sum::<f64>() / cn;
    if hn == 0.0 || rho * he <= t * hn {
        return Some(rho * hn);
    }
    let h_perp = (hn * hn - he * he).max(0.0).sqrt();
    let t = t.min(rho);
    Some(t * he + (rho * rho - t * t).max(0.0).sqrt() * h_perp)
}

const AO_GRID: usize = 2000;
const AO_REFINE_TOL: f64 = 1e-10;

/// Auxiliary gap value `max ‖u‖₂²` over `u ∈ Σ^{1/2}(K − w*)` with
/// `‖ξ − G‖u‖₂‖₂ ≤ ⟨u, H⟩`, for `Σ = sI` and `K` the ℓ2 ball of radius `B`.
pub fn ao_gap_value(spec: &ProblemSpec, norm: Norm, b: f64, seed: u64) -> Result<Extended> {
    require_l2(norm)?;
    let s = spec.cov.isotropic_scale().ok_or_else(|| {
        LabError::InvalidProblem("auxiliary gap problem needs a scaled identity covariance".into())
    })?;
    if b < 0.0 {
        return Ok(Extended::NegInf);
    }
    let mut rng = rng_from_seed(seed);
    let xi: Vec<f64> = normal_vec(&mut rng, spec.n).iter().map(|v| v * spec.sigma).collect();
    let g = normal_vec(&mut rng, spec.n);
    let h = normal_vec(&mut rng, spec.dim());
    let rs = s.sqrt();
    let c: Vec<f64> = spec.w_star.iter().map(|v| v * rs).collect();
    let radius = b * rs;
    let slack = |rho: f64| -> Option<f64> {
        let sup = support_on_sphere_slice(&h, &c, radius, rho)?;
        let res: f64 = xi
            .iter()
            .zip(&g)
            .map(|(x, gi)| (x - rho * gi).powi(2))
            .sum::<f64>()
            .sqrt();
        Some(sup - res)
    };
    let feasible = |rho: f64| slack(rho).is_some_and(|v| v >= 0.0);

    let rho_max = (2.0 * b * s.sqrt()).max(radius + Norm::L2.eval(&c));
    if rho_max == 0.0 {
        return Ok(if feasible(0.0) {
            Extended::Finite(0.0)
        } else {
            Extended::NegInf
        });
    }
    let grid: Vec<f64> = (0..AO_GRID)
        .map(|i| rho_max * 10f64.powf(-8.0 * (1.0 - i as f64 / (AO_GRID - 1) as f64)))
        .collect();
    let Some(last) = (0..AO_GRID).rev().find(|&i| feasible(grid[i])) else {
        return Ok(if feasible(0.0) {
            Extended::Finite(0.0)
        } else {
            Extended::NegInf
        });
    };
    if last == AO_GRID - 1 {
        return Ok(Extended::Finite(rho_max * rho_max));
    }
    let (mut lo, mut hi) = (grid[last], grid[last + 1]);
    while hi - lo > AO_REFINE_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Extended::Finite(lo * lo))
}

fn require_invertible(spec: &ProblemSpec) -> Result<()> {
    if spec.cov.rank() < spec.dim() {
        return Err(LabError::SingularCovariance);
    }
    Ok(())
}

/// Minimum `‖w‖` over interpolators of pure noise `Xw = ξ`.
pub fn po_norm_value(spec: &ProblemSpec, norm: Norm, seed: u64) -> Result<Extended> {
    require_invertible(spec)?;
    let noise = ProblemSpec::new(spec.cov.clone(), vec![0.0; spec.dim()], spec.sigma, spec.n)?;
    let ds = sample_dataset(&noise, seed);
    let r = match norm {
        Norm::L2 => min_l2_interpolator(&ds),
        Norm::L1 => min_l1_interpolator(&ds, 1e-8),
        Norm::Linf => return Err(LabError::UnsupportedNorm(norm.to_string())),
    };
    match r {
        Ok(r) => Ok(Extended::Finite(r.norm_value)),
        Err(LabError::NoInterpolator(_)) => Ok(Extended::PosInf),
        Err(e) => Err(e),
    }
}

/// Scalars of the auxiliary norm problem along `w = αΣ^{1/2}v*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoNormDraw {
    /// `‖Σ^{1/2}H‖_*`.
    pub width: f64,
    /// `‖v*‖_Σ`.
    pub vstar: f64,
    pub xi_sq: f64,
    pub xi_dot_g: f64,
    pub g_sq: f64,
    pub n: usize,
    pub sigma: f64,
}

impl AoNormDraw {
    /// Smallest `α ≥ 0` with `‖ξ − α‖v*‖_Σ G‖₂ ≤ α‖Σ^{1/2}H‖_*`; this `αv*`
    /// is feasible, so `α` upper-bounds the auxiliary minimum.
    pub fn feasible_alpha(&self) -> Extended {
        if self.xi_sq == 0.0 {
            return Extended::Finite(0.0);
        }
        let a = self.width * self.width - self.vstar * self.vstar * self.g_sq;
        let b = 2.0 * self.vstar * self.xi_dot_g;
        let c = -self.xi_sq;
        if a == 0.0 {
            return if b > 0.0 {
                Extended::Finite(-c / b)
            } else {
                Extended::PosInf
            };
        }
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return Extended::PosInf;
        }
        let sq = disc.sqrt();
        // stable roots of aα² + bα + c
        let q = -0.5 * (b + b.signum() * sq);
        let mut roots = [q / a, if q != 0.0 { c / q } else { f64::NAN }];
        roots.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
        if a > 0.0 {
            // feasible outside the roots; c < 0 puts one root on each side of 0
            roots
                .iter()
                .copied()
                .find(|r| *r > 0.0)
                .map_or(Extended::PosInf, Extended::Finite)
        } else {
            // feasible between the roots
            if roots[1] > 0.0 {
                Extended::Finite(roots[0].max(0.0))
            } else {
                Extended::PosInf
            }
        }
    }

    /// `α = (σ²/(‖Σ^{1/2}H‖_*²/n − ‖v*‖_Σ²))^{1/2}`, with `+∞` when the
    /// denominator is not positive.
    pub fn sketch_alpha(&self) -> Extended {
        let den = self.width * self.width / self.n as f64 - self.vstar * self.vstar;
        if den <= 0.0 {
            Extended::PosInf
        } else {
            Extended::Finite((self.sigma * self.sigma / den).sqrt())
        }
    }
}

pub fn ao_norm_draw(spec: &ProblemSpec, norm: Norm, seed: u64) -> Result<AoNormDraw> {
    require_invertible(spec)?;
    if norm == Norm::Linf {
        return Err(LabError::UnsupportedNorm(norm.to_string()));
    }
    let mut rng = rng_from_seed(seed);
    let xi: Vec<f64> = normal_vec(&mut rng, spec.n).iter().map(|v| v * spec.sigma).collect();
    let g = normal_vec(&mut rng, spec.n);
    let h = normal_vec(&mut rng, spec.dim());
    let u = spec.cov.sqrt_mul(&h);
    let v = subgradient_dual(norm, &u, &spec.cov)?;
    Ok(AoNormDraw {
        width: norm.eval_dual(&u),
        vstar: spec.cov.seminorm(&v),
        xi_sq: xi.iter().map(|x| x * x).sum(),
        xi_dot_g: xi.iter().zip(&g).map(|(a, b)| a * b).sum(),
        g_sq: g.iter().map(|x| x * x).sum(),
        n: spec.n,
        sigma: spec.sigma,
    })
}

/// Upper bound on the auxiliary norm value from the constructive feasible
/// point `αv*`.
pub fn ao_norm_value(spec: &ProblemSpec, norm: Norm, seed: u64) -> Result<Extended> {
    Ok(ao_norm_draw(spec, norm, seed)?.feasible_alpha())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TGrid {
    Explicit(Vec<f64>),
    /// Evenly spaced points spanning the pooled finite sample range.
    Pooled(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailPoint {
    pub t: f64,
    /// `Pr(Φ > t)`.
    pub po_tail: f64,
    pub po_se: f64,
    /// `Pr(φ ≥ t)`.
    pub ao_tail: f64,
    pub ao_se: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub draws: usize,
    pub points: Vec<TailPoint>,
    pub po_values: Vec<Extended>,
    pub ao_values: Vec<Extended>,
    pub notes: Vec<String>,
}

impl ComparisonReport {
    pub fn all_pass(&self) -> bool {
        self.points.iter().all(|p| p.pass)
    }
}

pub const MIN_CGMT_DRAWS: usize = 500;

/// Estimates `Pr(Φ > t)` and `Pr(φ ≥ t)` and checks
/// `Pr(Φ > t) ≤ 2 Pr(φ ≥ t) + 3·SE` at every `t`. Draw `i` of each sampler
/// receives its own seed, so the result is independent of scheduling.
pub fn compare_tails<P, A>(
    po: P,
    ao: A,
    draws: usize,
    grid: &TGrid,
    seed: u64,
) -> Result<ComparisonReport>
where
    P: Fn(u64) -> Result<Extended> + Sync,
    A: Fn(u64) -> Result<Extended> + Sync,
{
    if draws < MIN_CGMT_DRAWS {
        return Err(LabError::TooFewSamples {
            min: MIN_CGMT_DRAWS,
            got: draws,
        });
    }
    let pairs = (0..draws as u64)
        .into_par_iter()
        .map(|i| {
            Ok((
                po(derive_seed_path(seed, &[i, 0]))?,
                ao(derive_seed_path(seed, &[i, 1]))?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let (po_values, ao_values): (Vec<Extended>, Vec<Extended>) = pairs.into_iter().unzip();
    let ts = match grid {
        TGrid::Explicit(t) => t.clone(),
        TGrid::Pooled(k) => pooled_grid(&po_values, &ao_values, *k),
    };
    let nf = draws as f64;
    let points = ts
        .iter()
        .map(|&t| {
            let p = po_values.iter().filter(|v| v.gt(t)).count() as f64 / nf;
            let a = ao_values.iter().filter(|v| v.ge(t)).count() as f64 / nf;
            let (sp, sa) = (binomial_se(p, draws), binomial_se(a, draws));
            let combined = (sp * sp + 4.0 * sa * sa).sqrt();
            TailPoint {
                t,
                po_tail: p,
                po_se: sp,
                ao_tail: a,
                ao_se: sa,
                pass: p <= 2.0 * a + 3.0 * combined,
            }
        })
        .collect();
    Ok(ComparisonReport {
        draws,
        points,
        po_values,
        ao_values,
        notes: Vec::new(),
    })
}

fn pooled_grid(a: &[Extended], b: &[Extended], k: usize) -> Vec<f64> {
    let finite: Vec<f64> = a.iter().chain(b).filter_map(|v| v.finite()).collect();
    if finite.is_empty() || k == 0 {
        return Vec::new();
    }
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if k == 1 {
        return vec![lo];
    }
    (0..k)
        .map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
        .collect()
}

/// Random-search estimate of `max {⟨H,u⟩ − ‖ξ − G‖u‖‖ ≥ 0 : …}`'s objective,
/// used only as a test oracle for [`ao_gap_value`].
#[doc(hidden)]
pub fn ao_gap_brute_force<R: Rng>(
    spec: &ProblemSpec,
    b: f64,
    seed: u64,
    directions: usize,
    rhos: usize,
    rng: &mut R,
) -> Extended {
    let s = spec.cov.isotropic_scale().expect("scaled identity");
    let mut base = rng_from_seed(seed);
    let xi: Vec<f64> = normal_vec(&mut base, spec.n).iter().map(|v| v * spec.sigma).collect();
    let g = normal_vec(&mut base, spec.n);
    let h = normal_vec(&mut base, spec.dim());
    let rs = s.sqrt();
    let c: Vec<f64> = spec.w_star.iter().map(|v| v * rs).collect();
    let radius = b * rs;
    let rho_max = (2.0 * b * rs).max(radius + Norm::L2.eval(&c));
    let hn = Norm::L2.eval(&h);
    let mut best = Extended::NegInf;
    let mut consider = |u: &[f64]| {
        let rho = Norm::L2.eval(u);
        let shifted: f64 = u.iter().zip(&c).map(|(a, b)| (a + b).powi(2)).sum::<f64>().sqrt();
        if shifted > radius {
            return;
        }
        let lhs: f64 = xi.iter().zip(&g).map(|(x, gi)| (x - rho * gi).powi(2)).sum::<f64>().sqrt();
        let rhs: f64 = u.iter().zip(&h).map(|(a, b)| a * b).sum();
        if lhs <= rhs {
            let v = rho * rho;
            if !best.ge(v) {
                best = Extended::Finite(v);
            }
        }
    };
    for j in 0..directions {
        let mut dir = normal_vec(rng, spec.dim());
        // bias half of the directions toward H, where the maximizer lives
        if j % 2 == 0 {
            let mix: f64 = rng.random::<f64>() * 4.0;
            for (d, hh) in dir.iter_mut().zip(&h) {
                *d = *d * 0.25 + mix * hh / hn;
            }
        }
        let dn = Norm::L2.eval(&dir);
        for k in 1..=rhos {
            let rho = rho_max * k as f64 / rhos as f64;
            let u: Vec<f64> = dir.iter().map(|x| x * rho / dn).collect();
            consider(&u);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CovarianceModel;

    fn iso(n: usize, d: usize, sigma: f64, w: Vec<f64>) -> ProblemSpec {
        ProblemSpec::new(CovarianceModel::identity(d).unwrap(), w, sigma, n).unwrap()
    }

    #[test]
    fn empty_ball_sentinels() {
        let s = iso(3, 6, 1.0, vec![0.0; 6]);
        assert_eq!(po_gap_value(&s, Norm::L2, 1e-6, 1).unwrap(), Extended::NegInf);
        assert_eq!(ao_gap_value(&s, Norm::L2, -1.0, 1).unwrap(), Extended::NegInf);
    }

    #[test]
    fn zero_noise_zero_signal_feasible_at_origin() {
        let s = iso(3, 6, 0.0, vec![0.0; 6]);
        let v = ao_gap_value(&s, Norm::L2, 1.0, 5).unwrap();
        assert!(v.ge(0.0));
        assert_eq!(po_norm_value(&s, Norm::L2, 5).unwrap(), Extended::Finite(0.0));
        assert_eq!(ao_norm_value(&s, Norm::L2, 5).unwrap(), Extended::Finite(0.0));
    }

    #[test]
    fn po_gap_nonnegative_at_truth_radius() {
        let mut w = vec![0.0; 6];
        w[0] = 1.0;
        let s = iso(3, 6, 0.0, w);
        let v = po_gap_value(&s, Norm::L2, 1.0, 7).unwrap();
        assert!(v.finite().unwrap() >= -1e-12);
    }

    #[test]
    fn sketch_alpha_isotropic() {
        let s = iso(8, 64, 1.0, vec![0.0; 64]);
        for seed in 0..10 {
            let d = ao_norm_draw(&s, Norm::L2, seed).unwrap();
            let h2 = d.width * d.width;
            assert!((d.vstar - 1.0).abs() < 1e-12);
            let expect = 1.0 / (h2 / 8.0 - 1.0);
            match d.sketch_alpha() {
                Extended::Finite(a) => assert!((a * a - expect).abs() < 1e-10 * expect),
                other => assert!(expect <= 0.0, "{other:?}"),
            }
        }
    }

    #[test]
    fn sketch_alpha_infinite_when_denominator_nonpositive() {
        let d = AoNormDraw {
            width: 2.0,
            vstar: 1.0,
            xi_sq: 1.0,
            xi_dot_g: 0.0,
            g_sq: 4.0,
            n: 4,
            sigma: 1.0,
        };
        assert_eq!(d.sketch_alpha(), Extended::PosInf);
    }

    #[test]
    fn feasible_alpha_satisfies_constraint() {
        let s = iso(5, 40, 1.0, vec![0.0; 40]);
        for seed in 0..20 {
            let d = ao_norm_draw(&s, Norm::L2, seed).unwrap();
            if let Extended::Finite(a) = d.feasible_alpha() {
                let lhs = d.xi_sq - 2.0 * a * d.vstar * d.xi_dot_g + (a * d.vstar).powi(2) * d.g_sq;
                let rhs = (a * d.width).powi(2);
                assert!(lhs <= rhs * (1.0 + 1e-9) + 1e-12);
                // slightly smaller α must violate it
                let b = a * (1.0 - 1e-6);
                let lhs = d.xi_sq - 2.0 * b * d.vstar * d.xi_dot_g + (b * d.vstar).powi(2) * d.g_sq;
                assert!(lhs > (b * d.width).powi(2));
            }
        }
    }

    #[test]
    fn singular_covariance_rejected() {
        let cov = CovarianceModel::diagonal_sorted(vec![1.0, 0.0]).unwrap();
        let s = ProblemSpec::new(cov, vec![0.0; 2], 1.0, 1).unwrap();
        assert_eq!(po_norm_value(&s, Norm::L2, 0), Err(LabError::SingularCovariance));
    }

    #[test]
    fn self_comparison_passes() {
        let f = |seed: u64| Ok(Extended::Finite((seed % 1000) as f64));
        let rep = compare_tails(f, f, 600, &TGrid::Pooled(20), 3).unwrap();
        assert!(rep.all_pass());
        for w in rep.points.windows(2) {
            assert!(w[1].po_tail <= w[0].po_tail && w[1].ao_tail <= w[0].ao_tail);
        }
        assert!(matches!(
            compare_tails(f, f, 10, &TGrid::Pooled(3), 0),
            Err(LabError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn slice_support_matches_sampling() {
        let h = vec![1.0, 0.5, -0.3];
        let c = vec![0.4, -0.2, 0.1];
        let exact = support_on_sphere_slice(&h, &c, 1.0, 0.8).unwrap();
        let mut rng = rng_from_seed(9);
        let mut best = f64::NEG_INFINITY;
        for _ in 0..200_000 {
            let d = normal_vec(&mut rng, 3);
            let dn = Norm::L2.eval(&d);
            let u: Vec<f64> = d.iter().map(|x| x * 0.8 / dn).collect();
            let sh: f64 = u.iter().zip(&c).map(|(a, b)| (a + b).powi(2)).sum::<f64>().sqrt();
            if sh <= 1.0 {
                best = best.max(u.iter().zip(&h).map(|(a, b)| a * b).sum());
            }
        }
        assert!(best <= exact + 1e-12);
        assert!(exact - best < 1e-3);
    }
}
