//! Effective ranks across dimensions and bound values across split sizes.

use super::config::ExperimentConfig;
use super::table::{Cell, Table};
use super::{ExpResult, ExperimentError, ExperimentOutput};
use crate::complexity::effective_ranks_general;
use crate::norms::Norm;
use crate::splitting::SplitScan;

pub const RANKS_SCHEMA: u32 = 1;
pub const SPLIT_SCAN_SCHEMA: u32 = 1;

pub(super) fn run_ranks(cfg: &ExperimentConfig) -> ExpResult<ExperimentOutput> {
    let p = &cfg.problem;
    let n = p.n.or_else(|| p.n_grid.first().copied()).unwrap_or(1);
    let dims: Vec<Option<usize>> = if p.d_grid.is_empty() {
        vec![None]
    } else {
        p.d_grid.iter().map(|&d| Some(d)).collect()
    };
    let mut table = Table::new(
        "ranks",
        RANKS_SCHEMA,
        &[
            "d", "dim", "norm", "r", "R", "r_norm", "r_norm_se", "R_norm", "R_norm_se", "width",
            "width_se", "radius", "vstar_mean", "sandwich", "r1_below_R",
        ],
    );
    for (i, d) in dims.iter().enumerate() {
        let cov = p.covariance.build(n, *d)?;
        let rep = effective_ranks_general(&cov, cfg.norm, cfg.mc.samples, cfg.mc_settings(i as u64).seed)?;
        let sandwich: Cell = if cfg.norm == Norm::L2 {
            let slack = 3.0 * rep.r_norm_se;
            (rep.r_norm >= rep.r - 1.0 - slack && rep.r_norm <= rep.r + slack).into()
        } else {
            Cell::Infeasible
        };
        let below: Cell = rep.r1_below_big_r.map_or(Cell::Infeasible, Cell::Bool);
        table.push(vec![
            d.unwrap_or(cov.dim()).into(),
            cov.dim().into(),
            cfg.norm.as_str().into(),
            rep.r.into(),
            rep.big_r.into(),
            rep.r_norm.into(),
            rep.r_norm_se.into(),
            rep.big_r_norm.into(),
            rep.big_r_norm_se.into(),
            rep.width.mean.into(),
            rep.width.std_error.into(),
            rep.radius.into(),
            rep.vstar_mean.into(),
            sandwich,
            below,
        ]);
    }
    Ok(ExperimentOutput::new(cfg, vec![table], Vec::new(), Vec::new()))
}

pub(super) fn run_split_scan(cfg: &ExperimentConfig) -> ExpResult<ExperimentOutput> {
    let p = &cfg.problem;
    let n = p.n()?;
    let spec = p.spec_at(n, p.single_d())?;
    let b = match cfg.split.b {
        Some(b) => b,
        None => cfg.norm.eval(&spec.w_star).max(1.0),
    };
    let scan = SplitScan::new(&spec.cov, n, cfg.split.family, cfg.norm, &cfg.mc_settings(0))?;
    let rows = scan.scan(&spec, b, cfg.delta, cfg.variant)?;
    if rows.is_empty() {
        return Err(ExperimentError::config("problem.covariance", "no split can be evaluated"));
    }
    let (best_k, best) = scan.best(&spec, b, cfg.delta, cfg.variant)?;
    let mut table = Table::new(
        "split_scan",
        SPLIT_SCAN_SCHEMA,
        &["k", "value", "valid", "lo", "hi", "selected"],
    );
    for (k, r) in &rows {
        let (lo, hi) = r.interval.unwrap_or((r.value, r.value));
        table.push(vec![
            (*k).into(),
            r.value.into(),
            r.valid.into(),
            lo.into(),
            hi.into(),
            (*k == best_k).into(),
        ]);
    }
    let mut notes = vec![format!("B = {b}; selected k = {best_k}, value {}", best.value)];
    notes.extend(best.notes.iter().cloned());
    Ok(ExperimentOutput::new(cfg, vec![table], Vec::new(), notes))
}
