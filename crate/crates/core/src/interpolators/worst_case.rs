//! `max L(w)` over `{Xw = Y, ‖w‖₂ ≤ B}` as a trust-region subproblem.
//!
//! With `w = ŵ + Nz` (`N` an orthonormal null-space basis, `ŵ ⊥ null(X)`)
//! the problem becomes `max zᵀQz + 2gᵀz` over `‖z‖ ≤ r`, `r² = B² − ‖ŵ‖²`,
//! `Q = NᵀΣN`, `g = NᵀΣ(ŵ − w*)`. A global maximizer satisfies
//! `(μI − Q)z = g` with `μ ≥ λ_max(Q)`; `μ` is found by bisection on
//! `‖z(μ)‖ = r`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::l2::min_norm_solve;
use super::{Certificate, WorstCaseResult};
use crate::error::{LabError, Result};
use crate::linalg::{default_rcond, null_space};
use crate::model::{population_loss, Dataset, ProblemSpec};

const MU_TOL: f64 = 1e-12;
const HARD_CASE_TOL: f64 = 1e-10;

pub(crate) struct TrsSolution {
    pub z: DVector<f64>,
    pub kkt: f64,
}

/// Maximizes `zᵀQz + 2gᵀz` over `‖z‖ ≤ r` for symmetric PSD `Q`.
pub(crate) fn trs_max(q: &DMatrix<f64>, g: &DVector<f64>, r: f64) -> TrsSolution {
    let m = g.len();
    if m == 0 || r == 0.0 {
        return TrsSolution {
            z: DVector::zeros(m),
            kkt: 0.0,
        };
    }
    let eig = SymmetricEigen::new(q.clone());
    let lam = &eig.eigenvalues;
    let p = &eig.eigenvectors;
    let gh = p.tr_mul(g);
    let lmax = lam.max();
    let scale = lmax.abs().max(f64::MIN_POSITIVE);
    let top: Vec<bool> = lam.iter().map(|&l| lmax - l <= HARD_CASE_TOL * scale).collect();
    let gnorm = g.norm();
    let g_top = (0..m).filter(|&i| top[i]).map(|i| gh[i] * gh[i]).sum::<f64>().sqrt();

    let coords = |mu: f64, skip_top: bool| -> DVector<f64> {
        DVector::from_fn(m, |i, _| {
            if skip_top && top[i] {
                0.0
            } else {
                gh[i] / (mu - lam[i])
            }
        })
    };

    let (mu, mut c) = if gnorm == 0.0 {
        // pure eigenvector direction; g = 0 so the objective is zᵀQz
        (lmax.max(0.0), DVector::zeros(m))
    } else {
        let hard = g_top <= HARD_CASE_TOL * (gnorm + scale * r)
            && coords(lmax, true).norm() <= r;
        if hard {
            (lmax, coords(lmax, true))
        } else {
            let mut lo = lmax;
            let mut hi = lmax + gnorm / r;
            while coords(hi, false).norm() > r {
                hi += hi - lo;
            }
            for _ in 0..400 {
                if hi - lo <= MU_TOL * hi.abs().max(1.0) {
                    break;
                }
                let mid = 0.5 * (lo + hi);
                if coords(mid, false).norm() > r {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            // Newton on 1/‖z(μ)‖ − 1/r, which is close to linear in μ
            let mut mu = hi;
            for _ in 0..8 {
                let zc = coords(mu, false);
                let zn = zc.norm();
                let d3: f64 = (0..m).map(|i| gh[i] * gh[i] / (mu - lam[i]).powi(3)).sum();
                let phi = 1.0 / zn - 1.0 / r;
                let dphi = d3 / zn.powi(3);
                if !(dphi > 0.0) {
                    break;
                }
                let next = mu - phi / dphi;
                if !(next > lmax) || (next - mu).abs() <= f64::EPSILON * mu.abs() {
                    break;
                }
                mu = next;
            }
            let mut zc = coords(mu, false);
            let zn = zc.norm();
            if zn > 0.0 {
                zc *= r / zn;
            }
            (mu, zc)
        }
    };

    // Fill the remaining radius along the top eigenvector (hard case, or a
    // multiplier pinned next to λ_max).
    let short = r * r - c.norm_squared();
    if short > (1e-9 * r) * (1e-9 * r) {
        let i_top = (0..m).find(|&i| top[i]).unwrap();
        let sign = if gh[i_top] < 0.0 { -1.0 } else { 1.0 };
        c[i_top] += sign * short.sqrt();
        if c.norm() > r {
            c *= r / c.norm();
        }
    }

    let z = p * &c;
    let stat = (q * &z - &z * mu + g).norm();
    let denom = gnorm + (mu.abs() + lmax.abs()) * z.norm();
    let mut kkt = if denom > 0.0 { stat / denom } else { 0.0 };
    if mu > 0.0 {
        kkt = kkt.max((z.norm() - r).abs() / r);
    }
    TrsSolution { z, kkt }
}

/// Exact worst-case population loss among interpolators of Euclidean norm
/// at most `b`.
pub fn worst_case_l2_interpolator(
    spec: &ProblemSpec,
    ds: &Dataset,
    b: f64,
) -> Result<WorstCaseResult> {
    let base = min_norm_solve(&ds.x, &ds.y)?;
    let w_hat = base.w;
    let min_norm = w_hat.norm();
    if !(b >= 0.0) || b < min_norm * (1.0 - 1e-12) {
        return Err(LabError::Infeasible {
            radius: b,
            min_norm,
        });
    }
    let r = (b * b - min_norm * min_norm).max(0.0).sqrt();
    let n_basis = null_space(&ds.x, default_rcond(ds.n(), ds.dim()));
    let (z_full, kkt) = if r == 0.0 || n_basis.ncols() == 0 {
        (DVector::zeros(ds.dim()), 0.0)
    } else {
        let m = n_basis.ncols();
        let mut sn = DMatrix::zeros(ds.dim(), m);
        for j in 0..m {
            let col = spec.cov.mul(n_basis.column(j).as_slice());
            sn.set_column(j, &DVector::from_vec(col));
        }
        let mut q = n_basis.tr_mul(&sn);
        q = (&q + q.transpose()) * 0.5;
        let diff: Vec<f64> = w_hat
            .iter()
            .zip(&spec.w_star)
            .map(|(a, b)| a - b)
            .collect();
        let g = n_basis.tr_mul(&DVector::from_vec(spec.cov.mul(&diff)));
        let sol = trs_max(&q, &g, r);
        (&n_basis * sol.z, sol.kkt)
    };
    let w: Vec<f64> = (w_hat + z_full).as_slice().to_vec();
    let value = population_loss(spec, &w)?;
    Ok(WorstCaseResult {
        w,
        value,
        ball_radius: b,
        certificate: Certificate::Exact,
        kkt_residual: kkt,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interpolators::min_l2_interpolator;
    use crate::model::{sample_dataset, CovarianceModel};

    fn spec(d: usize, n: usize) -> ProblemSpec {
        let eigs: Vec<f64> = (0..d).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let cov = CovarianceModel::diagonal_sorted(eigs).unwrap();
        let mut w = vec![0.0; d];
        w[0] = 1.0;
        ProblemSpec::new(cov, w, 0.5, n).unwrap()
    }

    #[test]
    fn singleton_ball() {
        let s = spec(6, 3);
        let ds = sample_dataset(&s, 2);
        let hat = min_l2_interpolator(&ds).unwrap();
        let wc = worst_case_l2_interpolator(&s, &ds, hat.norm_value).unwrap();
        let diff: f64 = wc.w.iter().zip(&hat.w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-12);
        assert!((wc.value - population_loss(&s, &hat.w).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn below_min_norm_is_infeasible() {
        let s = spec(6, 3);
        let ds = sample_dataset(&s, 2);
        let hat = min_l2_interpolator(&ds).unwrap();
        assert!(matches!(
            worst_case_l2_interpolator(&s, &ds, 0.5 * hat.norm_value),
            Err(LabError::Infeasible { .. })
        ));
    }

    #[test]
    fn zero_covariance_gives_bayes_risk() {
        let cov = CovarianceModel::diagonal_sorted(vec![0.0; 5]).unwrap();
        let s = ProblemSpec::new(cov, vec![0.0; 5], 0.7, 2).unwrap();
        let mut ds = sample_dataset(&s, 3);
        // zero design needs zero labels to be interpolable
        ds.y.fill(0.0);
        let wc = worst_case_l2_interpolator(&s, &ds, 3.0).unwrap();
        assert!((wc.value - 0.49).abs() < 1e-15);
    }

    #[test]
    fn feasible_on_boundary_with_small_kkt() {
        let s = spec(8, 3);
        for seed in 0..20 {
            let ds = sample_dataset(&s, seed);
            let hat = min_l2_interpolator(&ds).unwrap();
            let b = 2.0 * hat.norm_value;
            let wc = worst_case_l2_interpolator(&s, &ds, b).unwrap();
            let wn = wc.w.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(wn <= b * (1.0 + 1e-10));
            assert!(crate::interpolators::max_residual(&ds, &wc.w) <= 1e-8);
            assert!(wc.kkt_residual <= 1e-8, "kkt {}", wc.kkt_residual);
            assert!(wc.value >= population_loss(&s, &hat.w).unwrap() - 1e-12);
        }
    }

    #[test]
    fn hard_case_isotropic_null_space() {
        // Σ = I and w* = ŵ: g = 0, every null direction is top
        let q = DMatrix::<f64>::identity(3, 3);
        let g = DVector::zeros(3);
        let sol = trs_max(&q, &g, 2.0);
        assert!((sol.z.norm() - 2.0).abs() < 1e-12);
        assert!(sol.kkt < 1e-12);
    }

    #[test]
    fn hard_case_with_partial_gradient() {
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 1.0]));
        let g = DVector::from_vec(vec![0.0, 0.1]);
        let sol = trs_max(&q, &g, 1.0);
        // μ = 2, z₂ = 0.1, z₁ = ±√(1 − 0.01)
        assert!((sol.z[1] - 0.1).abs() < 1e-12);
        assert!((sol.z[0].abs() - 0.99f64.sqrt()).abs() < 1e-12);
        assert!(sol.kkt < 1e-12);
    }
}
