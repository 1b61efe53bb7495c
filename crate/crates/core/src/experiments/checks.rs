//! Coverage of the uniform bounds over fresh datasets, and Monte Carlo
//! tail comparisons between primary and auxiliary problems.

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::table::{Cell, Table};
use super::{coverage_ci, ExpResult, ExperimentOutput};
use crate::bounds::{euclid_suite_from, general_norm_suite_from, ucb_spec, BoundReport, EpsilonInputs, C2};
use crate::cgmt::{
    ao_gap_value, ao_norm_value, compare_tails, po_gap_value, po_norm_value, ComparisonReport,
    TGrid,
};
use crate::error::LabError;
use crate::interpolators::{min_l1_interpolator, min_l2_interpolator, InterpolatorResult};
use crate::model::{population_loss, sample_dataset, Dataset, ProblemSpec};
use crate::norms::Norm;
use crate::rng::{derive_seed, derive_seed_path};
use crate::splitting::{BoundFamily, SplitScan};
use crate::stats::{binomial_se, summarize};

pub const BOUND_CHECK_SCHEMA: u32 = 1;
pub const CGMT_SCHEMA: u32 = 1;

fn min_norm(ds: &Dataset, norm: Norm) -> crate::Result<InterpolatorResult> {
    match norm {
        Norm::L2 => min_l2_interpolator(ds),
        Norm::L1 => min_l1_interpolator(ds, 1e-8),
        Norm::Linf => Err(LabError::UnsupportedNorm(norm.to_string())),
    }
}

/// Data-independent norm bound: the smallest valid value over top-`k`
/// splits, or the smallest value overall when no split is valid.
fn norm_bound(scan: &SplitScan, spec: &ProblemSpec, cfg: &ExperimentConfig) -> ExpResult<(usize, BoundReport)> {
    let b = cfg.norm.eval(&spec.w_star).max(1.0);
    let mut all = Vec::new();
    for k in 0..=scan.kmax() {
        let q = scan.quantities(k);
        let r = match cfg.norm {
            Norm::L2 => euclid_suite_from(&q.stats, spec, b, cfg.delta, cfg.variant, C2).map(|s| s.norm),
            _ => general_norm_suite_from(q, spec, b, cfg.delta, cfg.variant, EpsilonInputs::Auto)
                .map(|s| s.norm_bound),
        };
        match r {
            Ok(r) => all.push((k, r)),
            Err(LabError::ZeroCovariance) => {}
            Err(e) => return Err(e.into()),
        }
    }
    let pick = |valid_only: bool| {
        all.iter()
            .filter(|(_, r)| !valid_only || r.valid)
            .min_by(|a, b| a.1.value.total_cmp(&b.1.value).then(a.0.cmp(&b.0)))
            .cloned()
    };
    if let Some(e) = pick(true) {
        return Ok(e);
    }
    let (k, mut r) = pick(false).ok_or(LabError::ZeroCovariance)?;
    r.notes
        .push("no split satisfies the side conditions; global minimum reported".into());
    Ok((k, r))
}

struct TrialRow {
    loss: f64,
    norm: f64,
    main: BoundReport,
    main_k: usize,
    spec_bound: Option<f64>,
}

pub(super) fn run_bound_check(cfg: &ExperimentConfig) -> ExpResult<ExperimentOutput> {
    let p = &cfg.problem;
    let n = p.n()?;
    let spec = p.spec_at(n, p.single_d())?;
    let scan = SplitScan::new(&spec.cov, n, BoundFamily::Main, cfg.norm, &cfg.mc_settings(0))?;
    let (nk, nb) = norm_bound(&scan, &spec, cfg)?;
    let rows = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> ExpResult<TrialRow> {
            let ds = sample_dataset(&spec, derive_seed_path(cfg.master_seed, &[t as u64]));
            let r = min_norm(&ds, cfg.norm)?;
            let loss = population_loss(&spec, &r.w)?;
            let (main_k, main) = scan.best(&spec, r.norm_value, cfg.delta, cfg.variant)?;
            let spec_bound = match cfg.norm {
                Norm::L2 => ucb_spec(&spec, r.norm_value, cfg.delta).ok().map(|b| b.value),
                _ => None,
            };
            Ok(TrialRow {
                loss,
                norm: r.norm_value,
                main,
                main_k,
                spec_bound,
            })
        })
        .collect::<ExpResult<Vec<_>>>()?;

    let mut trials = Table::new(
        "bound_check_trials",
        BOUND_CHECK_SCHEMA,
        &[
            "trial", "loss", "norm", "ucb_main", "ucb_main_k", "ucb_main_valid", "main_covered",
            "norm_bound", "norm_covered", "ucb_spec", "spec_covered",
        ],
    );
    let (mut main_hits, mut norm_hits, mut spec_hits, mut spec_count) = (0, 0, 0, 0);
    for (t, r) in rows.iter().enumerate() {
        let mc = r.loss <= r.main.value;
        let nc = r.norm <= nb.value;
        main_hits += mc as usize;
        norm_hits += nc as usize;
        let (sb, sc): (Cell, Cell) = match r.spec_bound {
            Some(b) => {
                spec_count += 1;
                spec_hits += (r.loss <= b) as usize;
                (b.into(), (r.loss <= b).into())
            }
            None => (Cell::Infeasible, Cell::Infeasible),
        };
        trials.push(vec![
            t.into(),
            r.loss.into(),
            r.norm.into(),
            r.main.value.into(),
            r.main_k.into(),
            r.main.valid.into(),
            mc.into(),
            nb.value.into(),
            nc.into(),
            sb,
            sc,
        ]);
    }
    let mut summary = Table::new(
        "bound_check_summary",
        BOUND_CHECK_SCHEMA,
        &["quantity", "trials", "covered", "fraction", "se", "ci_lo", "ci_hi", "target", "pass"],
    );
    let target = 1.0 - cfg.delta;
    let mut cover = |name: &str, hits: usize, count: usize| {
        if count == 0 {
            return;
        }
        let f = hits as f64 / count as f64;
        let se = binomial_se(f, count);
        let (lo, hi) = coverage_ci(f, se);
        summary.push(vec![
            name.into(),
            count.into(),
            hits.into(),
            f.into(),
            se.into(),
            lo.into(),
            hi.into(),
            target.into(),
            (f >= target - 3.0 * se).into(),
        ]);
    };
    cover("ucb_main", main_hits, cfg.trials);
    cover("norm_bound", norm_hits, cfg.trials);
    cover("ucb_spec", spec_hits, spec_count);

    let mut notes = vec![format!("norm bound from the top-{nk} split: {}", nb.value)];
    notes.extend(nb.notes.iter().cloned());
    let invalid = rows.iter().filter(|r| !r.main.valid).count();
    if invalid > 0 {
        notes.push(format!(
            "{invalid} of {} trials: no split satisfies the side conditions of the main bound",
            cfg.trials
        ));
    }
    let losses: Vec<f64> = rows.iter().map(|r| r.loss).collect();
    notes.push(format!("mean loss {}", summarize(&losses).mean));
    Ok(ExperimentOutput::new(cfg, vec![trials, summary], Vec::new(), notes))
}

fn tail_rows(table: &mut Table, pair: &str, rep: &ComparisonReport) {
    for p in &rep.points {
        let se = (p.po_se * p.po_se + 4.0 * p.ao_se * p.ao_se).sqrt();
        table.push(vec![
            pair.into(),
            p.t.into(),
            p.po_tail.into(),
            p.po_se.into(),
            p.ao_tail.into(),
            p.ao_se.into(),
            (2.0 * p.ao_tail + 3.0 * se).into(),
            p.pass.into(),
        ]);
    }
}

fn draw_rows(table: &mut Table, pair: &str, rep: &ComparisonReport) {
    for (i, (po, ao)) in rep.po_values.iter().zip(&rep.ao_values).enumerate() {
        table.push(vec![pair.into(), i.into(), (*po).into(), (*ao).into()]);
    }
}

pub(super) fn run_cgmt_check(cfg: &ExperimentConfig) -> ExpResult<ExperimentOutput> {
    let p = &cfg.problem;
    let n = p.n()?;
    let spec = p.spec_at(n, p.single_d())?;
    let c = &cfg.cgmt;
    let pilot = (0..c.pilot)
        .into_par_iter()
        .map(|i| {
            let ds = sample_dataset(&spec, derive_seed_path(cfg.master_seed, &[2, i as u64]));
            Ok(min_l2_interpolator(&ds)?.norm_value)
        })
        .collect::<ExpResult<Vec<f64>>>()?;
    let b = c.b_factor * summarize(&pilot).mean;
    let grid = TGrid::Pooled(c.t_points);

    let mut pairs: Vec<(&str, ComparisonReport)> = Vec::new();
    let mut notes = vec![format!("B = {b} ({} × mean pilot ‖ŵ‖₂)", c.b_factor)];
    if cfg.norm == Norm::L2 {
        let rep = compare_tails(
            |s| po_gap_value(&spec, Norm::L2, b, s),
            |s| ao_gap_value(&spec, Norm::L2, b, s),
            c.draws,
            &grid,
            derive_seed(cfg.master_seed, 0),
        )?;
        pairs.push(("gap", rep));
    } else {
        notes.push("the gap pair is defined for the l2 ball only".into());
    }
    let rep = compare_tails(
        |s| po_norm_value(&spec, cfg.norm, s),
        |s| ao_norm_value(&spec, cfg.norm, s),
        c.draws,
        &grid,
        derive_seed(cfg.master_seed, 1),
    )?;
    pairs.push(("norm", rep));

    let mut tails = Table::new(
        "cgmt_tails",
        CGMT_SCHEMA,
        &["pair", "t", "po_tail", "po_se", "ao_tail", "ao_se", "threshold", "pass"],
    );
    let mut draws = Table::new("cgmt_draws", CGMT_SCHEMA, &["pair", "draw", "po", "ao"]);
    let mut summary = Table::new(
        "cgmt_summary",
        CGMT_SCHEMA,
        &["pair", "draws", "points", "failures", "all_pass", "b"],
    );
    for (name, rep) in &pairs {
        tail_rows(&mut tails, name, rep);
        draw_rows(&mut draws, name, rep);
        let fails = rep.points.iter().filter(|p| !p.pass).count();
        summary.push(vec![
            (*name).into(),
            rep.draws.into(),
            rep.points.len().into(),
            fails.into(),
            rep.all_pass().into(),
            b.into(),
        ]);
        notes.extend(rep.notes.iter().map(|s| format!("{name}: {s}")));
    }
    Ok(ExperimentOutput::new(cfg, vec![tails, summary, draws], Vec::new(), notes))
}
