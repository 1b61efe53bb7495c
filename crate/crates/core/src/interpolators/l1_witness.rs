//! Lower-bound witnesses for `max L(w)` over `{Xw = Y, ‖w‖₁ ≤ B}`.
//!
//! `L` is convex, so the maximum sits at a vertex of the polytope. Small
//! instances enumerate every vertex (support of size `n + 1` with a sign
//! pattern on the ball's face) and the result is exact. Larger ones run
//! multi-start projected gradient ascent with Dykstra projections and report
//! the best feasible point found.

use nalgebra::{DMatrix, DVector};

use super::admm::{solve_lp, AdmmSettings};
use super::projection::project_l1_ball;
use super::{interpolation_tolerance, Certificate, WorstCaseResult};
use crate::error::{LabError, Result};
use crate::linalg::{solve_square, SpdSolver};
use crate::model::{population_loss, Dataset, ProblemSpec};
use crate::norms::Norm;
use crate::rng::{normal_vec, substream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessSettings {
    pub restarts: usize,
    pub ascent_steps: usize,
    pub dykstra_iters: usize,
    /// Enumerate vertices when `C(d, n+1)·2^(n+1)` is at most this.
    pub enumeration_limit: u64,
    pub seed: u64,
}

impl Default for WitnessSettings {
    fn default() -> Self {
        Self {
            restarts: 8,
            ascent_steps: 200,
            dykstra_iters: 200,
            enumeration_limit: 200_000,
            seed: 0x5eed,
        }
    }
}

fn binom_times_signs(d: usize, k: usize, limit: u64) -> Option<u64> {
    if k > d {
        return Some(0);
    }
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (d - i) as u128 / (i + 1) as u128;
        if c > limit as u128 {
            return None;
        }
    }
    let total = c.checked_mul(1u128 << k.min(100))?;
    (total <= limit as u128).then_some(total as u64)
}

struct Feasible<'a> {
    spec: &'a ProblemSpec,
    ds: &'a Dataset,
    b: f64,
    kinv: SpdSolver,
}

impl Feasible<'_> {
    fn affine(&self, v: &DVector<f64>) -> DVector<f64> {
        let r = &self.ds.x * v - &self.ds.y;
        v - self.ds.x.tr_mul(&self.kinv.solve(&r))
    }

    fn ball(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_vec(project_l1_ball(v.as_slice(), self.b))
    }

    fn dykstra(&self, v: &DVector<f64>, iters: usize) -> DVector<f64> {
        let d = v.len();
        let mut x = v.clone();
        let mut p = DVector::zeros(d);
        let mut q = DVector::zeros(d);
        for _ in 0..iters {
            let y = self.affine(&(&x + &p));
            p = &x + &p - &y;
            let x_new = self.ball(&(&y + &q));
            q = &y + &q - &x_new;
            let change = (&x_new - &x).amax();
            x = x_new;
            if change <= 1e-13 * (1.0 + self.b) {
                break;
            }
        }
        x
    }

    /// Exact feasibility: affine projection, then pull back toward the
    /// feasible anchor until `‖w‖₁ ≤ B`.
    fn polish(&self, v: &DVector<f64>, anchor: &DVector<f64>) -> DVector<f64> {
        let w = self.affine(v);
        if w.lp_norm(1) <= self.b {
            return w;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let t = anchor + (&w - anchor) * mid;
            if t.lp_norm(1) <= self.b {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        anchor + (&w - anchor) * lo
    }

    fn is_feasible(&self, w: &DVector<f64>) -> bool {
        let res = (&self.ds.x * w - &self.ds.y).amax();
        res <= interpolation_tolerance(&self.ds.y) && w.lp_norm(1) <= self.b * (1.0 + 1e-10)
    }

    fn value(&self, w: &DVector<f64>) -> f64 {
        population_loss(self.spec, w.as_slice()).expect("dimension checked")
    }
}

fn next_combination(idx: &mut [usize], d: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < d - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn enumerate_vertices(f: &Feasible<'_>, best: &mut (DVector<f64>, f64)) {
    let (n, d) = f.ds.x.shape();
    let k = n + 1;
    let mut idx: Vec<usize> = (0..k).collect();
    let mut rhs = DVector::zeros(k);
    rhs.rows_mut(0, n).copy_from(&f.ds.y);
    rhs[n] = f.b;
    loop {
        for mask in 0u64..(1u64 << k) {
            let mut a = DMatrix::zeros(k, k);
            for (c, &j) in idx.iter().enumerate() {
                a.view_mut((0, c), (n, 1)).copy_from(&f.ds.x.column(j));
                a[(n, c)] = if mask >> c & 1 == 1 { -1.0 } else { 1.0 };
            }
            let Some(sol) = solve_square(a, &rhs) else {
                continue;
            };
            let consistent = (0..k).all(|c| {
                let s = if mask >> c & 1 == 1 { -1.0 } else { 1.0 };
                s * sol[c] >= -1e-12 * f.b.max(1.0)
            });
            if !consistent {
                continue;
            }
            let mut w = DVector::zeros(d);
            for (c, &j) in idx.iter().enumerate() {
                w[j] = sol[c];
            }
            if f.is_feasible(&w) {
                let v = f.value(&w);
                if v > best.1 {
                    *best = (w, v);
                }
            }
        }
        if !next_combination(&mut idx, d) {
            break;
        }
    }
}

/// Best feasible point found for `max L(w)` over the ℓ1-ball interpolators;
/// `restarts` gradient-ascent starts are used when enumeration is too large.
pub fn worst_case_l1_witness(
    spec: &ProblemSpec,
    ds: &Dataset,
    b: f64,
    restarts: usize,
) -> Result<WorstCaseResult> {
    let settings = WitnessSettings {
        restarts,
        ..Default::default()
    };
    worst_case_l1_witness_with(spec, ds, b, &settings)
}

pub fn worst_case_l1_witness_with(
    spec: &ProblemSpec,
    ds: &Dataset,
    b: f64,
    s: &WitnessSettings,
) -> Result<WorstCaseResult> {
    let lp = AdmmSettings {
        gap_tol: 1e-12,
        ..Default::default()
    };
    let bp = solve_lp(ds, Norm::L1, &lp)?;
    let min_norm = bp.norm_value;
    if !(b >= 0.0) || b < min_norm * (1.0 - 1e-9) {
        return Err(LabError::Infeasible {
            radius: b,
            min_norm,
        });
    }
    let (n, d) = ds.x.shape();
    let k = &ds.x * ds.x.transpose();
    let f = Feasible {
        spec,
        ds,
        b: b.max(min_norm),
        kinv: SpdSolver::new(&k),
    };
    let w_bp = DVector::from_vec(bp.w.clone());
    let mut best = (w_bp.clone(), f.value(&w_bp));

    let exact = binom_times_signs(d, n + 1, s.enumeration_limit).is_some() && n < d;
    if exact {
        enumerate_vertices(&f, &mut best);
    } else {
        let lip = 2.0 * spec.cov.op_norm().max(f64::MIN_POSITIVE);
        let step = 1.0 / lip;
        let w_star = DVector::from_column_slice(&spec.w_star);
        for r in 0..s.restarts {
            let mut rng = substream(s.seed, r as u64);
            let dir = DVector::from_vec(normal_vec(&mut rng, d));
            let dir = f.affine(&(&w_bp + dir)) - &w_bp;
            let dn = dir.lp_norm(1);
            let start = if dn > 0.0 { &w_bp + dir * (f.b / dn) } else { w_bp.clone() };
            let mut w = f.dykstra(&start, s.dykstra_iters);
            for _ in 0..s.ascent_steps {
                let grad = DVector::from_vec(spec.cov.mul((&w - &w_star).as_slice())) * 2.0;
                let next = f.dykstra(&(&w + grad * step), s.dykstra_iters);
                let moved = (&next - &w).amax();
                w = next;
                if moved <= 1e-12 * (1.0 + f.b) {
                    break;
                }
            }
            let w = f.polish(&w, &w_bp);
            if f.is_feasible(&w) {
                let v = f.value(&w);
                if v > best.1 {
                    best = (w, v);
                }
            }
        }
    }
    let residual = (&ds.x * &best.0 - &ds.y).amax();
    Ok(WorstCaseResult {
        w: best.0.as_slice().to_vec(),
        value: best.1,
        ball_radius: b,
        certificate: if exact {
            Certificate::Exact
        } else {
            Certificate::LowerBoundWitness
        },
        kkt_residual: residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interpolators::worst_case_l2_interpolator;
    use crate::model::{sample_dataset, CovarianceModel};

    fn spec(d: usize, n: usize) -> ProblemSpec {
        let eigs: Vec<f64> = (0..d).map(|i| 2.0 / (1.0 + i as f64)).collect();
        let cov = CovarianceModel::diagonal_sorted(eigs).unwrap();
        let mut w = vec![0.0; d];
        w[1] = 0.8;
        ProblemSpec::new(cov, w, 0.3, n).unwrap()
    }

    #[test]
    fn combination_walk_counts() {
        let mut idx = vec![0, 1];
        let mut count = 1;
        while next_combination(&mut idx, 4) {
            count += 1;
        }
        assert_eq!(count, 6);
        assert_eq!(binom_times_signs(6, 4, 1000), Some(15 * 16));
        assert_eq!(binom_times_signs(60, 30, 1000), None);
    }

    #[test]
    fn singleton_at_bp_norm() {
        let s = spec(5, 3);
        let ds = sample_dataset(&s, 5);
        let bp = crate::interpolators::min_l1_interpolator(&ds, 1e-12).unwrap();
        let wc = worst_case_l1_witness(&s, &ds, bp.norm_value, 4).unwrap();
        assert!((wc.value - population_loss(&s, &bp.w).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn below_l2_worst_case_and_feasible() {
        let s = spec(6, 3);
        for seed in 0..5 {
            let ds = sample_dataset(&s, seed);
            let bp = crate::interpolators::min_l1_interpolator(&ds, 1e-12).unwrap();
            let b = 1.5 * bp.norm_value;
            let wc = worst_case_l1_witness(&s, &ds, b, 4).unwrap();
            assert_eq!(wc.certificate, Certificate::Exact);
            let l2 = worst_case_l2_interpolator(&s, &ds, b).unwrap();
            assert!(wc.value <= l2.value + 1e-10);
            let l1: f64 = wc.w.iter().map(|v| v.abs()).sum();
            assert!(l1 <= b * (1.0 + 1e-10));
        }
    }

    #[test]
    fn ascent_path_returns_feasible_witness() {
        let s = spec(12, 3);
        let ds = sample_dataset(&s, 8);
        let bp = crate::interpolators::min_l1_interpolator(&ds, 1e-12).unwrap();
        let b = 1.3 * bp.norm_value;
        let settings = WitnessSettings {
            restarts: 3,
            enumeration_limit: 10,
            ..Default::default()
        };
        let wc = worst_case_l1_witness_with(&s, &ds, b, &settings).unwrap();
        assert_eq!(wc.certificate, Certificate::LowerBoundWitness);
        assert!(wc.kkt_residual <= 1e-8);
        assert!(wc.value >= population_loss(&s, &bp.w).unwrap() - 1e-12);
        let exact = worst_case_l1_witness(&s, &ds, b, 1).unwrap();
        assert!(wc.value <= exact.value + 1e-10);
    }
}
