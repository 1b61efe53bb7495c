//! Declarative experiment drivers. Each run is a pure function of its
//! configuration: trials receive seeds derived from `master_seed` and their
//! grid position, and results are collected in grid order, so the output is
//! byte-identical for any thread count.

mod applications;
mod checks;
pub mod config;
mod figure1;
mod spectra;
pub mod svg;
pub mod table;

use std::path::{Path, PathBuf};

use serde_json::Value;
use thiserror::Error;

use crate::error::LabError;
use crate::model::{Basis, CovSplit, CovarianceModel};

pub use config::{
    default_figure1_grid, CgmtConfig, CovarianceConfig, ExperimentConfig, ExperimentKind,
    McConfig, OutputConfig, OutputFormat, ProblemConfig, SplitConfig, WStarConfig,
};
pub use table::{Cell, Table};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("cannot write {path}: {message}")]
    Output { path: String, message: String },
    #[error(transparent)]
    Solver(#[from] LabError),
}

impl ExperimentError {
    pub fn config(field: &str, message: impl Into<String>) -> Self {
        Self::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    fn output(path: &Path, err: std::io::Error) -> Self {
        Self::Output {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }

    /// Process exit code: 2 for configuration problems, 3 for failures
    /// while running or writing results.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config { .. } | Self::Parse(_) | Self::Io { .. } => 2,
            Self::Output { .. } | Self::Solver(_) => 3,
        }
    }
}

pub type ExpResult<T> = std::result::Result<T, ExperimentError>;

/// Tables, plots and run metadata of one experiment.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub experiment: ExperimentKind,
    pub tables: Vec<Table>,
    /// `(file name, document)`.
    pub svgs: Vec<(String, String)>,
    pub notes: Vec<String>,
    pub meta: Value,
}

impl ExperimentOutput {
    fn new(cfg: &ExperimentConfig, tables: Vec<Table>, svgs: Vec<(String, String)>, notes: Vec<String>) -> Self {
        let schemas: serde_json::Map<String, Value> = tables
            .iter()
            .map(|t| (t.name.clone(), Value::from(t.schema_version)))
            .collect();
        let meta = serde_json::json!({
            "tool": "interp-lab",
            "version": env!("CARGO_PKG_VERSION"),
            "experiment": cfg.experiment.as_str(),
            "master_seed": cfg.master_seed,
            "schemas": schemas,
            "notes": notes,
            "config": serde_json::to_value(cfg).expect("config serializes"),
        });
        Self {
            experiment: cfg.experiment,
            tables,
            svgs,
            notes,
            meta,
        }
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Writes `<table>.csv` (or `.json`), the SVG plots and `meta.json`;
    /// returns the written paths.
    pub fn write_to(&self, dir: &Path, format: OutputFormat) -> ExpResult<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| ExperimentError::output(dir, e))?;
        let mut written = Vec::new();
        let mut put = |name: String, body: &str| -> ExpResult<()> {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| ExperimentError::output(&path, e))?;
            written.push(path);
            Ok(())
        };
        for t in &self.tables {
            match format {
                OutputFormat::Csv => put(format!("{}.csv", t.name), &t.to_csv())?,
                OutputFormat::Json => put(format!("{}.json", t.name), &t.to_json())?,
            }
        }
        for (name, doc) in &self.svgs {
            put(name.clone(), doc)?;
        }
        let mut meta = serde_json::to_string_pretty(&self.meta).expect("json");
        meta.push('\n');
        put("meta.json".into(), &meta)?;
        Ok(written)
    }
}

/// Runs the configured experiment on a pool of `cfg.threads` workers (the
/// global pool when unset).
pub fn run(cfg: &ExperimentConfig) -> ExpResult<ExperimentOutput> {
    cfg.validate()?;
    match cfg.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| ExperimentError::config("threads", e.to_string()))?
            .install(|| dispatch(cfg)),
        None => dispatch(cfg),
    }
}

fn dispatch(cfg: &ExperimentConfig) -> ExpResult<ExperimentOutput> {
    use ExperimentKind::*;
    match cfg.experiment {
        Figure1 => figure1::run(cfg),
        JunkFeatures => applications::run_junk(cfg),
        IsotropicBp => applications::run_isotropic_bp(cfg),
        BoundCheck => checks::run_bound_check(cfg),
        CgmtCheck => checks::run_cgmt_check(cfg),
        Ranks => spectra::run_ranks(cfg),
        SplitScan => spectra::run_split_scan(cfg),
    }
}

/// Split whose `Σ₁` is spanned by the given coordinates (diagonal models).
fn coordinate_split(cov: &CovarianceModel, coords: &[usize]) -> ExpResult<CovSplit> {
    let sel: Vec<usize> = match cov.basis() {
        Basis::Identity => coords.to_vec(),
        Basis::Coordinates(map) => coords
            .iter()
            .map(|c| map.iter().position(|m| m == c).expect("coordinate map is a permutation"))
            .collect(),
        Basis::Dense(_) => {
            return Err(ExperimentError::config(
                "problem.covariance",
                "coordinate splits need a diagonal covariance",
            ))
        }
    };
    Ok(CovSplit::new(sel, cov.dim())?)
}

/// `p ± 1.96·SE` clipped to `[0, 1]`.
fn coverage_ci(p: f64, se: f64) -> (f64, f64) {
    ((p - 1.96 * se).max(0.0), (p + 1.96 * se).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(ExperimentError::config("delta", "bad").exit_code(), 2);
        assert_eq!(ExperimentError::Parse("x".into()).exit_code(), 2);
        assert_eq!(ExperimentError::Solver(LabError::ZeroCovariance).exit_code(), 3);
    }

    #[test]
    fn coordinate_split_follows_sorting() {
        let cov = CovarianceModel::from_diagonal(&[0.1, 2.0, 0.5]).unwrap();
        let s = coordinate_split(&cov, &[1]).unwrap();
        assert_eq!(s.sel1(), &[0]);
        let s = coordinate_split(&cov, &[0]).unwrap();
        assert_eq!(s.sel1(), &[2]);
    }

    #[test]
    fn ci_is_clipped() {
        assert_eq!(coverage_ci(1.0, 0.0), (1.0, 1.0));
        let (lo, hi) = coverage_ci(0.05, 0.1);
        assert!(lo == 0.0 && hi > 0.05);
    }
}
