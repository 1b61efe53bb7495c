//! Minimum-norm interpolators and worst-case interpolators inside a norm
//! ball.

mod admm;
mod l1_witness;
mod l2;
pub mod projection;
mod simplex;
mod worst_case;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::model::{empirical_loss, population_loss, Dataset, ProblemSpec};
use crate::norms::Norm;

pub use admm::{min_l1_interpolator, min_linf_interpolator, AdmmSettings};
pub use l1_witness::{worst_case_l1_witness, WitnessSettings};
pub use l2::min_l2_interpolator;
pub use worst_case::worst_case_l2_interpolator;

/// Interpolation tolerance `‖Xw − Y‖∞ ≤ 1e-8·(1 + ‖Y‖∞)`.
pub fn interpolation_tolerance(y: &DVector<f64>) -> f64 {
    1e-8 * (1.0 + y.amax())
}

pub fn max_residual(ds: &Dataset, w: &[f64]) -> f64 {
    (&ds.x * DVector::from_column_slice(w) - &ds.y).amax()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub iterations: usize,
    pub max_residual: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// `‖w‖ − Yᵀλ` for the best dual-feasible `λ` found (LP solvers).
    pub duality_gap: Option<f64>,
    pub rank: Option<usize>,
    pub polished: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpolatorResult {
    pub w: Vec<f64>,
    pub norm_used: Norm,
    pub norm_value: f64,
    pub train_loss: f64,
    /// Filled in by [`InterpolatorResult::with_population`].
    pub pop_loss: Option<f64>,
    pub solver_stats: SolverStats,
}

impl InterpolatorResult {
    fn build(ds: &Dataset, w: Vec<f64>, norm: Norm, mut stats: SolverStats) -> Self {
        let train_loss = empirical_loss(ds, &w).expect("solver output has dimension d");
        stats.max_residual = max_residual(ds, &w);
        Self {
            norm_value: norm.eval(&w),
            w,
            norm_used: norm,
            train_loss,
            pop_loss: None,
            solver_stats: stats,
        }
    }

    pub fn with_population(mut self, spec: &ProblemSpec) -> Self {
        self.pop_loss = population_loss(spec, &self.w).ok();
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Certificate {
    Exact,
    LowerBoundWitness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseResult {
    pub w: Vec<f64>,
    pub value: f64,
    pub ball_radius: f64,
    pub certificate: Certificate,
    pub kkt_residual: f64,
}
