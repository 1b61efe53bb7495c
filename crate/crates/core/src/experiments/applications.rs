//! Basis pursuit on junk features and on isotropic designs.

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::table::{Cell, Table};
use super::{coordinate_split, coverage_ci, ExpResult, ExperimentOutput};
use crate::bounds::{bp_isotropic_norm, bp_isotropic_risk, bp_suite_from, BoundReport, SplitQuantities};
use crate::interpolators::min_l1_interpolator;
use crate::model::{population_loss, sample_dataset, ProblemSpec};
use crate::norms::Norm;
use crate::rng::derive_seed_path;
use crate::stats::{binomial_se, summarize};

pub const JUNK_SCHEMA: u32 = 1;
pub const ISO_SCHEMA: u32 = 1;

const BP_TOL: f64 = 1e-8;

/// `(loss, ‖ŵ‖₁)` per trial, in trial order.
fn bp_trials(spec: &ProblemSpec, master: u64, path: [u64; 2], trials: usize) -> ExpResult<Vec<(f64, f64)>> {
    (0..trials)
        .into_par_iter()
        .map(|t| {
            let ds = sample_dataset(spec, derive_seed_path(master, &[path[0], path[1], t as u64]));
            let r = min_l1_interpolator(&ds, BP_TOL)?;
            Ok((population_loss(spec, &r.w)?, r.norm_value))
        })
        .collect()
}

fn grid(cfg: &ExperimentConfig) -> Vec<(usize, usize, usize, usize)> {
    let p = &cfg.problem;
    let mut out = Vec::new();
    for (ni, &n) in p.ns().iter().enumerate() {
        for (di, &d) in p.d_grid.iter().enumerate() {
            out.push((ni, n, di, d));
        }
    }
    out
}

fn loss_cells(losses: &[f64]) -> [Cell; 3] {
    let s = summarize(losses);
    [s.mean.into(), s.std.into(), s.std_error.into()]
}

pub(super) fn run_junk(cfg: &ExperimentConfig) -> ExpResult<ExperimentOutput> {
    let p = &cfg.problem;
    let mut points = Table::new(
        "junk_points",
        JUNK_SCHEMA,
        &[
            "n", "d", "dim", "rank1", "r1", "r1_se", "width", "width_se", "risk_bound",
            "risk_bound_valid", "gamma", "epsilon", "ratio_rank", "ratio_width", "ratio_n_r1",
            "null", "bayes", "trials", "loss_mean", "loss_std", "loss_se",
        ],
    );
    let mut trials = Table::new(
        "junk_trials",
        JUNK_SCHEMA,
        &["n", "d", "trial", "loss", "l1_norm", "risk_bound"],
    );
    let mut notes = Vec::new();
    for (ni, n, di, d) in grid(cfg) {
        let spec = p.spec_at(n, Some(d))?;
        let split = coordinate_split(&spec.cov, &p.covariance.signal_coords())?;
        let mc = cfg.mc_settings(((ni as u64) << 32) | di as u64);
        let q = SplitQuantities::with_mc(&spec.cov, &split, Norm::L1, &mc)?;
        let stats = q.mc.as_ref().expect("monte carlo requested");
        let w1 = Norm::L1.eval(&spec.w_star);
        let (_, _, risk) =
            bp_suite_from(&q, n, spec.sigma, w1, w1.max(1.0), cfg.delta, cfg.variant)?;
        if !risk.valid {
            notes.push(format!("n = {n}, d = {d}: {}", risk.notes.join("; ")));
        }
        let runs = bp_trials(&spec, cfg.master_seed, [ni as u64, di as u64], cfg.trials)?;
        for (t, (loss, l1)) in runs.iter().enumerate() {
            trials.push(vec![
                n.into(),
                d.into(),
                t.into(),
                (*loss).into(),
                (*l1).into(),
                risk.value.into(),
            ]);
        }
        let losses: Vec<f64> = runs.iter().map(|r| r.0).collect();
        let nf = n as f64;
        let (r1, width) = (stats.r_norm(), stats.width.mean);
        let r1_se = 2.0 * width * stats.width.std_error / (stats.rad * stats.rad);
        let mut row: Vec<Cell> = vec![
            n.into(),
            d.into(),
            spec.dim().into(),
            split.rank1().into(),
            r1.into(),
            r1_se.into(),
            width.into(),
            stats.width.std_error.into(),
            risk.value.into(),
            risk.valid.into(),
            risk.get("gamma").into(),
            risk.get("epsilon").into(),
            (split.rank1() as f64 / nf).into(),
            (w1 * width / nf.sqrt()).into(),
            (nf / r1).into(),
            spec.null_risk().into(),
            spec.bayes_risk().into(),
            cfg.trials.into(),
        ];
        row.extend(loss_cells(&losses));
        points.push(row);
    }
    Ok(ExperimentOutput::new(cfg, vec![points, trials], Vec::new(), notes))
}

pub(super) fn run_isotropic_bp(cfg: &ExperimentConfig) -> ExpResult<ExperimentOutput> {
    let p = &cfg.problem;
    let mut points = Table::new(
        "isotropic_bp_points",
        ISO_SCHEMA,
        &[
            "n", "d", "support", "eta", "risk_bound", "risk_bound_valid", "null", "norm_bound",
            "norm_bound_valid", "trials", "loss_mean", "loss_std", "loss_se", "risk_coverage",
            "risk_coverage_se", "risk_ci_lo", "risk_ci_hi", "norm_coverage", "norm_coverage_se",
        ],
    );
    let mut trials = Table::new(
        "isotropic_bp_trials",
        ISO_SCHEMA,
        &["n", "d", "trial", "loss", "l1_norm", "risk_covered", "norm_covered"],
    );
    let mut notes = Vec::new();
    for (ni, n, di, d) in grid(cfg) {
        let spec = p.spec_at(n, Some(d))?;
        let risk = bp_isotropic_risk(&spec, cfg.delta)?;
        let norm_bound: Option<BoundReport> = if cfg.delta <= 0.25 {
            let mc = cfg.mc_settings(((ni as u64) << 32) | di as u64);
            Some(bp_isotropic_norm(&spec, cfg.delta, &mc)?)
        } else {
            None
        };
        notes.extend(risk.notes.iter().map(|s| format!("n = {n}, d = {d}: {s}")));
        let runs = bp_trials(&spec, cfg.master_seed, [ni as u64, di as u64], cfg.trials)?;
        let mut risk_hits = 0usize;
        let mut norm_hits = 0usize;
        for (t, &(loss, l1)) in runs.iter().enumerate() {
            let rc = loss <= risk.value;
            risk_hits += rc as usize;
            let nc: Cell = match &norm_bound {
                Some(b) => {
                    let c = l1 <= b.value;
                    norm_hits += c as usize;
                    c.into()
                }
                None => Cell::Infeasible,
            };
            trials.push(vec![n.into(), d.into(), t.into(), loss.into(), l1.into(), rc.into(), nc]);
        }
        let tf = cfg.trials;
        let rp = risk_hits as f64 / tf as f64;
        let rse = binomial_se(rp, tf);
        let (lo, hi) = coverage_ci(rp, rse);
        let losses: Vec<f64> = runs.iter().map(|r| r.0).collect();
        let mut row: Vec<Cell> = vec![
            n.into(),
            d.into(),
            (risk.get("support") as usize).into(),
            risk.get("eta").into(),
            risk.value.into(),
            risk.valid.into(),
            spec.null_risk().into(),
        ];
        match &norm_bound {
            Some(b) => {
                row.push(b.value.into());
                row.push(b.valid.into());
            }
            None => {
                row.push(Cell::Infeasible);
                row.push(Cell::Infeasible);
            }
        }
        row.push(tf.into());
        row.extend(loss_cells(&losses));
        row.extend([rp.into(), rse.into(), lo.into(), hi.into()]);
        match norm_bound {
            Some(_) => {
                let np = norm_hits as f64 / tf as f64;
                row.extend([np.into(), binomial_se(np, tf).into()]);
            }
            None => row.extend([Cell::Infeasible, Cell::Infeasible]),
        }
        points.push(row);
    }
    if cfg.delta > 0.25 {
        notes.push("delta > 1/4: the norm bound is not evaluated".into());
    }
    Ok(ExperimentOutput::new(cfg, vec![points, trials], Vec::new(), notes))
}
