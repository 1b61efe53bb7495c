//! Risk of the minimum-ℓ2 interpolator across dimensions, against the norm
//! proxy `‖ŵ‖₂²Tr(Σ)/n`, the null risk and the Bayes risk.

use rayon::prelude::*;

use super::config::{default_figure1_grid, CovarianceConfig, ExperimentConfig};
use super::svg::{Plot, Series};
use super::table::{Cell, Table};
use super::{ExpResult, ExperimentOutput};
use crate::error::LabError;
use crate::interpolators::min_l2_interpolator;
use crate::model::{population_loss, sample_dataset, ProblemSpec};
use crate::norms::Norm;
use crate::rng::derive_seed_path;
use crate::stats::summarize;

pub const TRIALS_SCHEMA: u32 = 1;
pub const SUMMARY_SCHEMA: u32 = 1;

struct Point {
    li: usize,
    lambda: f64,
    d: usize,
    spec: ProblemSpec,
}

/// `(loss, bound, ‖ŵ‖₂²)`, or `None` without an interpolator.
type Outcome = Option<(f64, f64, f64)>;

fn trial(p: &Point, seed: u64) -> ExpResult<Outcome> {
    if p.d < p.spec.n {
        return Ok(None);
    }
    let ds = sample_dataset(&p.spec, seed);
    match min_l2_interpolator(&ds) {
        Ok(r) => {
            let loss = population_loss(&p.spec, &r.w)?;
            let norm_sq = Norm::L2.eval(&r.w).powi(2);
            let bound = norm_sq * p.spec.cov.trace() / p.spec.n as f64;
            Ok(Some((loss, bound, norm_sq)))
        }
        Err(LabError::NoInterpolator(_) | LabError::IllConditioned { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

pub(super) fn run(cfg: &ExperimentConfig) -> ExpResult<ExperimentOutput> {
    let p = &cfg.problem;
    let n = p.n()?;
    let grid = if p.d_grid.is_empty() {
        default_figure1_grid()
    } else {
        p.d_grid.clone()
    };
    let mut points = Vec::new();
    for (li, &lambda) in p.lambdas.iter().enumerate() {
        for &d in &grid {
            let cov = CovarianceConfig::Figure1 { lambda }.build(n, Some(d))?;
            points.push(Point {
                li,
                lambda,
                d,
                spec: p.spec(cov, n)?,
            });
        }
    }
    let tasks: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|i| (0..cfg.trials).map(move |t| (i, t)))
        .collect();
    let outcomes = tasks
        .par_iter()
        .map(|&(i, t)| {
            let pt = &points[i];
            let seed = derive_seed_path(cfg.master_seed, &[pt.li as u64, pt.d as u64, t as u64]);
            trial(pt, seed)
        })
        .collect::<ExpResult<Vec<_>>>()?;

    let mut trials = Table::new(
        "figure1_trials",
        TRIALS_SCHEMA,
        &["lambda", "d", "trial", "loss", "bound", "null", "bayes", "norm_sq"],
    );
    let mut summary = Table::new(
        "figure1_summary",
        SUMMARY_SCHEMA,
        &[
            "lambda", "d", "trials", "interpolating", "loss_mean", "loss_std", "bound_mean",
            "bound_std", "null", "bayes",
        ],
    );
    let mut svgs = Vec::new();
    let mut curves: Vec<(Vec<(f64, f64, f64)>, Vec<(f64, f64, f64)>)> =
        vec![(Vec::new(), Vec::new()); p.lambdas.len()];
    for (i, pt) in points.iter().enumerate() {
        let block = &outcomes[i * cfg.trials..(i + 1) * cfg.trials];
        let (null, bayes) = (pt.spec.null_risk(), pt.spec.bayes_risk());
        for (t, o) in block.iter().enumerate() {
            let (loss, bound, nsq): (Cell, Cell, Cell) = match o {
                Some((l, b, s)) => ((*l).into(), (*b).into(), (*s).into()),
                None => (Cell::Infeasible, Cell::Infeasible, Cell::Infeasible),
            };
            trials.push(vec![
                pt.lambda.into(),
                pt.d.into(),
                t.into(),
                loss,
                bound,
                null.into(),
                bayes.into(),
                nsq,
            ]);
        }
        let losses: Vec<f64> = block.iter().flatten().map(|o| o.0).collect();
        let bounds: Vec<f64> = block.iter().flatten().map(|o| o.1).collect();
        let stat = |xs: &[f64]| -> (Cell, Cell, f64, f64) {
            if xs.is_empty() {
                return (Cell::Infeasible, Cell::Infeasible, f64::NAN, f64::NAN);
            }
            let s = summarize(xs);
            (s.mean.into(), s.std.into(), s.mean, s.std)
        };
        let (lm, ls, lmv, lsv) = stat(&losses);
        let (bm, bs, bmv, bsv) = stat(&bounds);
        summary.push(vec![
            pt.lambda.into(),
            pt.d.into(),
            cfg.trials.into(),
            losses.len().into(),
            lm,
            ls,
            bm,
            bs,
            null.into(),
            bayes.into(),
        ]);
        curves[pt.li].0.push((pt.d as f64, lmv, lsv));
        curves[pt.li].1.push((pt.d as f64, bmv, bsv));
    }
    for (li, &lambda) in p.lambdas.iter().enumerate() {
        let spec = &points[li * grid.len()].spec;
        let (loss, bound) = curves[li].clone();
        let plot = Plot {
            title: format!("n = {n}, λ = {lambda}"),
            x_label: "d".into(),
            y_label: "loss".into(),
            log_x: true,
            series: vec![
                Series {
                    label: "L(ŵ)".into(),
                    color: "#1f77b4",
                    points: loss,
                },
                Series {
                    label: "bound".into(),
                    color: "#ff7f0e",
                    points: bound,
                },
            ],
            hlines: vec![
                (spec.null_risk(), "null".into(), "#d62728"),
                (spec.bayes_risk(), "bayes".into(), "#2ca02c"),
            ],
            vlines: vec![(n as f64, "d/n = 1".into())],
            y_max: Some(3.0 * spec.null_risk()),
        };
        svgs.push((format!("figure1_lambda{li}.svg"), plot.render()));
    }
    let mut notes = vec![format!(
        "rows with d < n = {n} have no interpolator and are marked infeasible"
    )];
    if p.d_grid.is_empty() {
        notes.push("d grid not configured: using the log-spaced default 25·2^k, k = 0..9".into());
    } else {
        notes.push(format!("d grid: {grid:?}"));
    }
    Ok(ExperimentOutput::new(cfg, vec![trials, summary], svgs, notes))
}
