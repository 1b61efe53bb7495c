//! ADMM for `min ‖w‖ s.t. Xw = Y` with `‖·‖ ∈ {ℓ1, ℓ∞}`.
//!
//! Splitting `x ∈ {Xx = Y}`, `z` free, `x = z`. The `x`-step is the exact
//! affine projection through a cached factorization of `XXᵀ`; the `z`-step
//! is the prox of the norm. Every `polish_every` iterations (and at
//! convergence) the iterate is used to recover an LP vertex directly (a
//! simplex crossover for ℓ1, the saturation pattern for ℓ∞) and certify it
//! by a dual point.

use nalgebra::{DMatrix, DVector};

use super::l2::min_norm_solve;
use super::projection::project_l1_ball;
use super::simplex::basis_pursuit;
use super::{interpolation_tolerance, InterpolatorResult, SolverStats};
use crate::error::{LabError, Result};
use crate::linalg::{default_rcond, pinv_solve, SpdSolver};
use crate::model::Dataset;
use crate::norms::Norm;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmSettings {
    pub rho: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Rebalance `ρ` when one residual exceeds the other by this factor.
    pub balance_ratio: f64,
    pub polish_every: usize,
    /// Relative duality gap accepted as optimal.
    pub gap_tol: f64,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        Self {
            rho: 1.0,
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_iter: 50_000,
            balance_ratio: 10.0,
            polish_every: 25,
            gap_tol: 1e-8,
        }
    }
}

struct Candidate {
    w: DVector<f64>,
    gap: f64,
}

struct Problem<'a> {
    x: &'a DMatrix<f64>,
    y: &'a DVector<f64>,
    norm: Norm,
    kinv: SpdSolver,
}

impl Problem<'_> {
    fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        let r = self.x * v - self.y;
        v - self.x.tr_mul(&self.kinv.solve(&r))
    }

    fn prox(&self, v: &DVector<f64>, t: f64) -> DVector<f64> {
        match self.norm {
            Norm::L1 => v.map(|a| a.signum() * (a.abs() - t).max(0.0)),
            Norm::Linf => {
                let p = project_l1_ball(v.as_slice(), t);
                v - DVector::from_vec(p)
            }
            Norm::L2 => unreachable!(),
        }
    }

    /// Duality gap `‖w‖ − Yᵀλ` after scaling `λ` to dual feasibility.
    fn gap(&self, w: &DVector<f64>, lambda: &DVector<f64>) -> f64 {
        let g = self.x.tr_mul(lambda);
        let dn = self.norm.eval_dual(g.as_slice());
        if !dn.is_finite() {
            return f64::INFINITY;
        }
        let scale = dn.max(1.0);
        self.norm.eval(w.as_slice()) - self.y.dot(lambda) / scale
    }

    /// Dual estimate from the scaled ADMM multiplier: `λ = K⁻¹X(ρu)`.
    fn dual_from_multiplier(&self, rho_u: &DVector<f64>) -> DVector<f64> {
        self.kinv.solve(&(self.x * rho_u))
    }

    fn feasible(&self, w: &DVector<f64>) -> bool {
        (self.x * w - self.y).amax() <= interpolation_tolerance(self.y)
    }

    /// Solves `A c = Y` on the reduced system and `Aᵀλ = target`.
    fn reduced(&self, a: &DMatrix<f64>, target: &DVector<f64>) -> Option<(DVector<f64>, DVector<f64>)> {
        let rc = default_rcond(a.nrows(), a.ncols());
        let (c, _) = pinv_solve(a, self.y, rc);
        let at = a.transpose();
        let (lambda, _) = pinv_solve(&at, target, rc);
        if (at * &lambda - target).amax() > 1e-9 * (1.0 + target.amax()) {
            return None;
        }
        Some((c, lambda))
    }

    /// Simplex crossover seeded by the iterate's largest entries.
    fn polish_l1(&self, z: &DVector<f64>) -> Option<Candidate> {
        let v = basis_pursuit(self.x, self.y, Some(z)).ok()?;
        if !self.feasible(&v.w) {
            return None;
        }
        Some(Candidate {
            gap: self.gap(&v.w, &v.lambda),
            w: v.w,
        })
    }

    fn polish_linf(&self, z: &DVector<f64>) -> Option<Candidate> {
        let n = self.x.nrows();
        let d = z.len();
        let t0 = z.amax();
        if t0 == 0.0 || n == 0 {
            return None;
        }
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| z[a].abs().partial_cmp(&z[b].abs()).unwrap());
        let n_free = order
            .iter()
            .take_while(|&&i| z[i].abs() < t0 * (1.0 - 1e-4))
            .count()
            .min(n - 1);
        let free: Vec<usize> = order[..n_free].to_vec();
        let sat: Vec<usize> = order[n_free..].to_vec();
        let sgn = |i: usize| if z[i] < 0.0 { -1.0 } else { 1.0 };
        let mut a = DMatrix::zeros(n, n_free + 1);
        for (k, &i) in free.iter().enumerate() {
            a.set_column(k, &self.x.column(i));
        }
        let mut col = DVector::zeros(n);
        for &i in &sat {
            col.axpy(sgn(i), &self.x.column(i), 1.0);
        }
        a.set_column(n_free, &col);
        let mut target = DVector::zeros(n_free + 1);
        target[n_free] = 1.0;
        let (c, lambda) = self.reduced(&a, &target)?;
        let t = c[n_free];
        if !(t > 0.0) || (0..n_free).any(|k| c[k].abs() > t * (1.0 + 1e-12)) {
            return None;
        }
        let mut w = DVector::zeros(d);
        for (k, &i) in free.iter().enumerate() {
            w[i] = c[k];
        }
        for &i in &sat {
            w[i] = sgn(i) * t;
        }
        if !self.feasible(&w) {
            return None;
        }
        Some(Candidate {
            gap: self.gap(&w, &lambda),
            w,
        })
    }

    fn polish(&self, z: &DVector<f64>) -> Option<Candidate> {
        match self.norm {
            Norm::L1 => self.polish_l1(z),
            Norm::Linf => self.polish_linf(z),
            Norm::L2 => None,
        }
    }
}

fn certified(c: &Candidate, norm: Norm, tol: f64) -> bool {
    c.gap <= tol * norm.eval(c.w.as_slice()).max(1.0)
}

pub(crate) fn solve_lp(ds: &Dataset, norm: Norm, s: &AdmmSettings) -> Result<InterpolatorResult> {
    if norm == Norm::L2 {
        return Err(LabError::UnsupportedNorm("l2 (use the closed form)".into()));
    }
    let d = ds.dim();
    let start = min_norm_solve(&ds.x, &ds.y)?;
    if ds.y.iter().all(|&v| v == 0.0) {
        let stats = SolverStats {
            duality_gap: Some(0.0),
            ..Default::default()
        };
        return Ok(InterpolatorResult::build(ds, vec![0.0; d], norm, stats));
    }
    let k = &ds.x * ds.x.transpose();
    let prob = Problem {
        x: &ds.x,
        y: &ds.y,
        norm,
        kinv: SpdSolver::new(&k),
    };
    let sqrt_d = (d as f64).sqrt();
    let mut rho = s.rho;
    let mut z = start.w.clone();
    let mut u = DVector::zeros(d);
    let finish = |c: Candidate, iters: usize, pr: f64, dr: f64, polished: bool| {
        let stats = SolverStats {
            iterations: iters,
            primal_residual: pr,
            dual_residual: dr,
            duality_gap: Some(c.gap.max(0.0)),
            polished,
            ..Default::default()
        };
        InterpolatorResult::build(ds, c.w.as_slice().to_vec(), norm, stats)
    };
    let (mut pr, mut dr) = (f64::INFINITY, f64::INFINITY);
    for it in 1..=s.max_iter {
        let xk = prob.project(&(&z - &u));
        let z_old = std::mem::replace(&mut z, prob.prox(&(&xk + &u), 1.0 / rho));
        u += &xk - &z;
        pr = (&xk - &z).norm();
        dr = rho * (&z - &z_old).norm();
        let eps_pri = sqrt_d * s.abs_tol + s.rel_tol * xk.norm().max(z.norm());
        let eps_dual = sqrt_d * s.abs_tol + s.rel_tol * rho * u.norm();
        let converged = pr <= eps_pri && dr <= eps_dual;
        if it % s.polish_every == 0 || converged {
            if let Some(c) = prob.polish(&z) {
                if certified(&c, norm, s.gap_tol) {
                    return Ok(finish(c, it, pr, dr, true));
                }
            }
        }
        if converged {
            let lambda = prob.dual_from_multiplier(&(&u * rho));
            let gap = prob.gap(&xk, &lambda);
            return Ok(finish(Candidate { w: xk, gap }, it, pr, dr, false));
        }
        if pr > s.balance_ratio * dr {
            rho *= 2.0;
            u /= 2.0;
        } else if dr > s.balance_ratio * pr {
            rho /= 2.0;
            u *= 2.0;
        }
    }
    if let Some(c) = prob.polish(&z) {
        if certified(&c, norm, s.gap_tol) {
            return Ok(finish(c, s.max_iter, pr, dr, true));
        }
    }
    Err(LabError::NotConverged {
        iterations: s.max_iter,
        primal: pr,
        dual: dr,
    })
}

/// Basis pursuit `argmin ‖w‖₁ s.t. Xw = Y`; `tol` is the relative duality
/// gap accepted as optimal.
pub fn min_l1_interpolator(ds: &Dataset, tol: f64) -> Result<InterpolatorResult> {
    let s = AdmmSettings {
        gap_tol: tol,
        ..Default::default()
    };
    solve_lp(ds, Norm::L1, &s)
}

/// `argmin ‖w‖∞ s.t. Xw = Y`; `tol` as in [`min_l1_interpolator`].
pub fn min_linf_interpolator(ds: &Dataset, tol: f64) -> Result<InterpolatorResult> {
    let s = AdmmSettings {
        gap_tol: tol,
        ..Default::default()
    };
    solve_lp(ds, Norm::Linf, &s)
}
