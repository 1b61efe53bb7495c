use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use interp_lab::experiments::{self, ExperimentConfig, ExperimentError, ExperimentKind, OutputFormat};

/// Batch experiments on uniform convergence of interpolators.
#[derive(Parser, Debug)]
#[command(name = "interp-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Risk of the minimum-ℓ2 interpolator across dimensions.
    Figure1(RunArgs),
    /// Basis pursuit with junk features.
    Junk(RunArgs),
    /// Basis pursuit with isotropic features.
    IsoBp(RunArgs),
    /// Coverage of the uniform bounds over fresh datasets.
    BoundCheck(RunArgs),
    /// Tail comparison of primary and auxiliary problems.
    CgmtCheck(RunArgs),
    /// Effective ranks across dimensions.
    Ranks(RunArgs),
    /// Bound values across split sizes.
    SplitScan(RunArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// TOML (or JSON) experiment config; a built-in default when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: config `output.dir`, else `out/<experiment>`].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, env = "LAB_THREADS")]
    threads: Option<usize>,
    /// Table format.
    #[arg(long, value_parser = ["csv", "json"])]
    format: Option<String>,
}

impl Command {
    fn split(self) -> (ExperimentKind, RunArgs) {
        match self {
            Self::Figure1(a) => (ExperimentKind::Figure1, a),
            Self::Junk(a) => (ExperimentKind::JunkFeatures, a),
            Self::IsoBp(a) => (ExperimentKind::IsotropicBp, a),
            Self::BoundCheck(a) => (ExperimentKind::BoundCheck, a),
            Self::CgmtCheck(a) => (ExperimentKind::CgmtCheck, a),
            Self::Ranks(a) => (ExperimentKind::Ranks, a),
            Self::SplitScan(a) => (ExperimentKind::SplitScan, a),
        }
    }
}

fn builtin(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::Figure1 => include_str!("../../../configs/figure1_desk.toml"),
        ExperimentKind::JunkFeatures => include_str!("../../../configs/junk.toml"),
        ExperimentKind::IsotropicBp => include_str!("../../../configs/isotropic_bp.toml"),
        ExperimentKind::BoundCheck => include_str!("../../../configs/bound_check.toml"),
        ExperimentKind::CgmtCheck => include_str!("../../../configs/cgmt.toml"),
        ExperimentKind::Ranks => include_str!("../../../configs/ranks.toml"),
        ExperimentKind::SplitScan => include_str!("../../../configs/split_scan.toml"),
    }
}

fn execute(kind: ExperimentKind, args: RunArgs) -> Result<(), ExperimentError> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::parse(builtin(kind))?,
    };
    if cfg.experiment != kind {
        return Err(ExperimentError::config(
            "experiment",
            format!(
                "config describes `{}` but the `{}` subcommand was used",
                cfg.experiment.as_str(),
                kind.as_str()
            ),
        ));
    }
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(t) = args.threads {
        cfg.threads = Some(t);
    }
    if let Some(f) = &args.format {
        cfg.output.format = f.parse::<OutputFormat>()?;
    }
    if let Some(out) = &args.out {
        cfg.output.dir = Some(out.display().to_string());
    }
    cfg.validate()?;
    let dir = cfg
        .output
        .dir
        .clone()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("out").join(kind.as_str()));
    let output = experiments::run(&cfg)?;
    for note in &output.notes {
        eprintln!("note: {note}");
    }
    for path in output.write_to(&dir, cfg.output.format)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = cli.command.split();
    match execute(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
