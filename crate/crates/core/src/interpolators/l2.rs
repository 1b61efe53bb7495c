use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{interpolation_tolerance, InterpolatorResult, SolverStats};
use crate::error::{LabError, Result};
use crate::linalg::default_rcond;
use crate::model::Dataset;
use crate::norms::Norm;

pub(crate) struct MinNorm {
    pub w: DVector<f64>,
    pub rank: usize,
}

struct Spectral {
    w: DVector<f64>,
    rank: usize,
    smin: f64,
    smax: f64,
}

fn via_svd(x: &DMatrix<f64>, y: &DVector<f64>) -> Spectral {
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cut = default_rcond(x.nrows(), x.ncols()) * smax;
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let mut w = DVector::zeros(x.ncols());
    let mut rank = 0;
    let mut smin = smax;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cut && s > 0.0 {
            rank += 1;
            smin = smin.min(s);
            w.axpy(u.column(i).dot(y) / s, &vt.row(i).transpose(), 1.0);
        }
    }
    Spectral { w, rank, smin, smax }
}

/// Gram route `w = Xᵀ K⁺ Y` with `K = XXᵀ`, plus one refinement step.
/// Returns `None` when `K` is too ill-conditioned for the squared spectrum.
fn via_gram(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<Spectral> {
    let k = x * x.transpose();
    let eig = SymmetricEigen::new(k);
    let lmax = eig.eigenvalues.max();
    if lmax <= 0.0 {
        return None;
    }
    let lmin = eig.eigenvalues.min();
    if lmin < 1e-8 * lmax {
        return None;
    }
    let u = &eig.eigenvectors;
    let inv = eig.eigenvalues.map(|l| 1.0 / l);
    let apply = |r: &DVector<f64>| -> DVector<f64> {
        let c = u.tr_mul(r).component_mul(&inv);
        x.tr_mul(&(u * c))
    };
    let mut w = apply(y);
    let resid = y - x * &w;
    w += apply(&resid);
    Some(Spectral {
        w,
        rank: x.nrows(),
        smin: lmin.sqrt(),
        smax: lmax.sqrt(),
    })
}

pub(crate) fn min_norm_solve(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<MinNorm> {
    let (n, d) = x.shape();
    if y.len() != n {
        return Err(LabError::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    if y.iter().all(|&v| v == 0.0) {
        return Ok(MinNorm {
            w: DVector::zeros(d),
            rank: 0,
        });
    }
    if x.iter().all(|&v| v == 0.0) {
        return Err(LabError::NoInterpolator(
            "design is zero but labels are not".into(),
        ));
    }
    let sol = if d >= 2 * n {
        via_gram(x, y).unwrap_or_else(|| via_svd(x, y))
    } else {
        via_svd(x, y)
    };
    let res = (x * &sol.w - y).amax();
    if res <= interpolation_tolerance(y) {
        return Ok(MinNorm {
            w: sol.w,
            rank: sol.rank,
        });
    }
    if sol.rank < n {
        Err(LabError::NoInterpolator(format!(
            "effective rank {} of X is below n = {n} and Y is outside its column space",
            sol.rank
        )))
    } else {
        Err(LabError::IllConditioned {
            smallest: sol.smin,
            largest: sol.smax,
        })
    }
}

/// Minimum-ℓ2-norm interpolator `ŵ = Xᵀ(XXᵀ)⁻¹Y`.
///
/// Uses a thin SVD pseudoinverse for narrow designs and the Gram matrix
/// eigendecomposition (with one step of iterative refinement) once
/// `d ≥ 2n`, where `X` is well conditioned.
pub fn min_l2_interpolator(ds: &Dataset) -> Result<InterpolatorResult> {
    let sol = min_norm_solve(&ds.x, &ds.y)?;
    let stats = SolverStats {
        rank: Some(sol.rank),
        ..Default::default()
    };
    Ok(InterpolatorResult::build(
        ds,
        sol.w.as_slice().to_vec(),
        Norm::L2,
        stats,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_dataset, CovarianceModel, ProblemSpec};

    fn ds(x: DMatrix<f64>, y: Vec<f64>) -> Dataset {
        let n = x.nrows();
        Dataset {
            x,
            xi: DVector::zeros(n),
            y: DVector::from_vec(y),
            seed: 0,
        }
    }

    #[test]
    fn zero_labels_give_zero() {
        let r = min_l2_interpolator(&ds(DMatrix::from_element(2, 3, 1.0), vec![0.0, 0.0])).unwrap();
        assert!(r.w.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn symmetric_line() {
        let r = min_l2_interpolator(&ds(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), vec![2.0]))
            .unwrap();
        assert!((r.w[0] - 1.0).abs() < 1e-14 && (r.w[1] - 1.0).abs() < 1e-14);
        assert_eq!(r.norm_used, Norm::L2);
        assert!((r.norm_value - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn overdetermined_noise_has_no_interpolator() {
        let cov = CovarianceModel::identity(3).unwrap();
        let spec = ProblemSpec::new(cov, vec![0.0; 3], 1.0, 10).unwrap();
        let d = sample_dataset(&spec, 1);
        assert!(matches!(
            min_l2_interpolator(&d),
            Err(LabError::NoInterpolator(_))
        ));
    }

    #[test]
    fn zero_design_nonzero_labels() {
        assert!(matches!(
            min_l2_interpolator(&ds(DMatrix::zeros(2, 4), vec![1.0, 0.0])),
            Err(LabError::NoInterpolator(_))
        ));
    }

    #[test]
    fn gram_and_svd_routes_agree() {
        let cov = CovarianceModel::identity(40).unwrap();
        let spec = ProblemSpec::new(cov, vec![0.1; 40], 1.0, 10).unwrap();
        let d = sample_dataset(&spec, 4);
        let g = via_gram(&d.x, &d.y).unwrap();
        let s = via_svd(&d.x, &d.y);
        assert!((g.w - s.w).amax() < 1e-12);
    }

    #[test]
    fn consistent_rank_deficient_system_is_solved() {
        // duplicated row with matching label
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 0.0, 1.0, 2.0, 0.0]);
        let r = min_l2_interpolator(&ds(x, vec![5.0, 5.0])).unwrap();
        assert!((r.w[0] - 1.0).abs() < 1e-12 && (r.w[1] - 2.0).abs() < 1e-12);
        assert_eq!(r.solver_stats.rank, Some(1));
    }
}
