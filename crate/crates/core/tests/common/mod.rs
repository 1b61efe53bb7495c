//! Independent reference computations shared by the oracle tests and the
//! acceptance report. Plain `Vec` arithmetic, no crate linear algebra.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use interp_lab::complexity::{effective_ranks_l2, gaussian_width_mc};
use interp_lab::interpolators::{min_l1_interpolator, min_l2_interpolator, worst_case_l2_interpolator};
use interp_lab::rng::{normal_vec, rng_from_seed, LabRng};
use interp_lab::splitting::tau_split;
use interp_lab::{CovarianceModel, Dataset, ProblemSpec};

pub fn random_dataset(rng: &mut LabRng, n: usize, d: usize) -> Dataset {
    let x = DMatrix::from_vec(n, d, normal_vec(rng, n * d));
    let y = DVector::from_vec(normal_vec(rng, n));
    Dataset {
        x,
        xi: DVector::zeros(n),
        y,
        seed: 0,
    }
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let m = b.len();
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-13 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..m {
            let f = a[r][col] / a[col][col];
            for c in col..m {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; m];
    for r in (0..m).rev() {
        let s: f64 = (r + 1..m).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    Some(x)
}

fn rows(ds: &Dataset) -> Vec<Vec<f64>> {
    (0..ds.n()).map(|i| ds.x.row(i).iter().copied().collect()).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `w = Xᵀλ` with `(XXᵀ)λ = Y`.
pub fn dual_system_min_norm(ds: &Dataset) -> Vec<f64> {
    let r = rows(ds);
    let n = r.len();
    let k: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| dot(&r[i], &r[j])).collect()).collect();
    let lam = gauss_solve(k, ds.y.iter().copied().collect()).expect("full row rank");
    (0..ds.dim())
        .map(|j| (0..n).map(|i| r[i][j] * lam[i]).sum())
        .collect()
}

/// Worst-case deviation of the min-ℓ2 solver from the dual-system oracle:
/// `(max residual, max |ŵ − w_oracle|)` over `count` instances.
pub fn min_l2_oracle_errors(count: usize, n: usize, d: usize, seed: u64) -> (f64, f64) {
    let mut rng = rng_from_seed(seed);
    let (mut res, mut diff) = (0.0f64, 0.0f64);
    for _ in 0..count {
        let ds = random_dataset(&mut rng, n, d);
        let r = min_l2_interpolator(&ds).unwrap();
        let oracle = dual_system_min_norm(&ds);
        res = res.max(r.solver_stats.max_residual);
        diff = diff.max(r.w.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max));
    }
    (res, diff)
}

fn subsets(d: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    if d < k {
        return Vec::new();
    }
    let mut out = subsets(d - 1, k);
    for mut s in subsets(d - 1, k - 1) {
        s.push(d - 1);
        out.push(s);
    }
    out
}

/// Minimum ℓ1 norm over basic solutions `X_S w_S = Y`, `|S| = n`.
pub fn vertex_enumeration_l1(ds: &Dataset) -> f64 {
    let r = rows(ds);
    let n = ds.n();
    subsets(ds.dim(), n)
        .into_iter()
        .filter_map(|s| {
            let a: Vec<Vec<f64>> = (0..n).map(|i| s.iter().map(|&j| r[i][j]).collect()).collect();
            gauss_solve(a, ds.y.iter().copied().collect())
        })
        .map(|w| w.iter().map(|v| v.abs()).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

/// Largest `‖ŵ_BP‖₁ − oracle` over `count` instances.
pub fn basis_pursuit_gap(count: usize, n: usize, d: usize, seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let mut gap = 0.0f64;
    for _ in 0..count {
        let ds = random_dataset(&mut rng, n, d);
        let r = min_l1_interpolator(&ds, 1e-10).unwrap();
        gap = gap.max((r.norm_value - vertex_enumeration_l1(&ds)).abs());
    }
    gap
}

/// Orthonormal basis of the null space of the rows, by Gram–Schmidt.
fn null_basis(r: &[Vec<f64>], d: usize) -> Vec<Vec<f64>> {
    let mut q: Vec<Vec<f64>> = Vec::new();
    let push = |mut v: Vec<f64>, q: &mut Vec<Vec<f64>>| -> bool {
        for _ in 0..2 {
            for b in q.iter() {
                let c = dot(&v, b);
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let nv = dot(&v, &v).sqrt();
        if nv > 1e-10 {
            q.push(v.iter().map(|x| x / nv).collect());
            true
        } else {
            false
        }
    };
    for row in r {
        push(row.clone(), &mut q);
    }
    let rank = q.len();
    for j in 0..d {
        let mut e = vec![0.0; d];
        e[j] = 1.0;
        push(e, &mut q);
    }
    q.split_off(rank)
}

pub struct WorstCaseCheck {
    /// `solver − oracle`, minimum over instances.
    pub min_margin: f64,
    pub max_kkt: f64,
    pub passed: usize,
    pub count: usize,
}

/// Solver value against random search on the sphere `‖w‖₂ = B` within the
/// interpolating affine set.
pub fn worst_case_random_search(count: usize, n: usize, d: usize, samples: usize, seed: u64) -> WorstCaseCheck {
    let mut rng = rng_from_seed(seed);
    let mut out = WorstCaseCheck {
        min_margin: f64::INFINITY,
        max_kkt: 0.0,
        passed: 0,
        count,
    };
    for _ in 0..count {
        let eig: Vec<f64> = (0..d).map(|_| rng.random_range(0.1..2.0)).collect();
        let w_star = normal_vec(&mut rng, d);
        let spec = ProblemSpec::new(CovarianceModel::from_diagonal(&eig).unwrap(), w_star.clone(), 0.5, n).unwrap();
        let ds = random_dataset(&mut rng, n, d);
        let w0 = dual_system_min_norm(&ds);
        let b = dot(&w0, &w0).sqrt() + rng.random_range(0.2..2.0);
        let res = worst_case_l2_interpolator(&spec, &ds, b).unwrap();
        let basis = null_basis(&rows(&ds), d);
        let rho = (b * b - dot(&w0, &w0)).max(0.0).sqrt();
        let loss = |w: &[f64]| -> f64 {
            0.25 + (0..d).map(|i| eig[i] * (w[i] - w_star[i]).powi(2)).sum::<f64>()
        };
        let mut best = f64::NEG_INFINITY;
        for _ in 0..samples {
            let z = normal_vec(&mut rng, basis.len());
            let nz = dot(&z, &z).sqrt();
            let mut w = w0.clone();
            for (c, v) in z.iter().zip(&basis) {
                w.iter_mut().zip(v).for_each(|(a, b)| *a += rho * c / nz * b);
            }
            best = best.max(loss(&w));
        }
        let margin = res.value - best;
        out.min_margin = out.min_margin.min(margin);
        out.max_kkt = out.max_kkt.max(res.kkt_residual);
        if margin >= -1e-6 && res.kkt_residual <= 1e-8 {
            out.passed += 1;
        }
    }
    out
}

/// `E‖H‖₂ = √2 Γ((d+1)/2) / Γ(d/2)`.
pub fn chi_mean(d: usize) -> f64 {
    use statrs::function::gamma::ln_gamma;
    2f64.sqrt() * (ln_gamma((d as f64 + 1.0) / 2.0) - ln_gamma(d as f64 / 2.0)).exp()
}

/// `(|MC − exact| / SE)` for `E‖H‖₂` in dimension `d`.
pub fn chi_mean_z(d: usize, samples: usize, seed: u64) -> f64 {
    let w = gaussian_width_mc(&CovarianceModel::identity(d).unwrap(), interp_lab::Norm::L2, 1.0, samples, seed).unwrap();
    (w.mean - chi_mean(d)).abs() / w.std_error
}

/// `diag(1, 0.01·1₉₉₉)`: `r = 10.99`, `R = 10.99²/1.0999`.
pub fn spiked_rank_errors() -> (f64, f64) {
    let mut e = vec![0.01; 1000];
    e[0] = 1.0;
    let (r, big_r) = effective_ranks_l2(&CovarianceModel::from_diagonal(&e).unwrap()).unwrap();
    (r - 10.99, big_r - 10.99 * 10.99 / 1.0999)
}

/// Five covariance fixtures for the `r − 1 ≤ r_‖·‖₂ ≤ r` sandwich.
pub fn sandwich_fixtures() -> Vec<(&'static str, CovarianceModel)> {
    let mut spiked = vec![0.01; 1000];
    spiked[0] = 1.0;
    let power: Vec<f64> = (1..=300).map(|i| 1.0 / i as f64).collect();
    let mut rng = rng_from_seed(77);
    let g = DMatrix::from_vec(12, 12, normal_vec(&mut rng, 144));
    let dense = &g * g.transpose() / 12.0;
    vec![
        ("identity_50", CovarianceModel::identity(50).unwrap()),
        ("spiked_1000", CovarianceModel::from_diagonal(&spiked).unwrap()),
        ("power_law_300", CovarianceModel::diagonal_sorted(power).unwrap()),
        ("two_level_40", CovarianceModel::from_diagonal(&[[4.0; 5].as_slice(), &[0.5; 35]].concat()).unwrap()),
        ("dense_wishart_12", CovarianceModel::from_matrix(&dense).unwrap()),
    ]
}

/// `(name, r − 1 − r_‖·‖₂, r_‖·‖₂ − r, SE)`; both gaps must be ≤ 3·SE.
pub fn sandwich_gaps(samples: usize, seed: u64) -> Vec<(&'static str, f64, f64, f64)> {
    sandwich_fixtures()
        .into_iter()
        .map(|(name, cov)| {
            let rep = interp_lab::complexity::effective_ranks_general(&cov, interp_lab::Norm::L2, samples, seed).unwrap();
            (name, rep.r - 1.0 - rep.r_norm, rep.r_norm - rep.r, rep.r_norm_se)
        })
        .collect()
}

/// Random spectra for the τ-split displays; returns `(mass, size)` pass counts.
pub fn tau_split_checks(count: usize, seed: u64) -> (usize, usize) {
    let mut rng = rng_from_seed(seed);
    let (mut mass, mut size) = (0, 0);
    for _ in 0..count {
        let d = rng.random_range(40..600);
        let alpha: f64 = rng.random_range(0.0..2.0);
        let eig: Vec<f64> = (1..=d)
            .map(|i| (i as f64).powf(-alpha) * rng.random_range(0.5..1.5))
            .collect();
        let cov = CovarianceModel::diagonal_sorted({
            let mut e = eig;
            e.sort_by(|a, b| b.total_cmp(a));
            e
        })
        .unwrap();
        let k = rng.random_range(0..10);
        let n = rng.random_range(5..200);
        let t = tau_split(&cov, k, n).unwrap();
        mass += t.mass_inequality() as usize;
        size += t.size_inequality() as usize;
    }
    (mass, size)
}

pub const FIGURE1_PAPER: &str = include_str!("../../../../configs/figure1_paper.toml");
pub const FIGURE1_DESK: &str = include_str!("../../../../configs/figure1_desk.toml");
pub const JUNK: &str = include_str!("../../../../configs/junk.toml");
pub const ISOTROPIC_BP: &str = include_str!("../../../../configs/isotropic_bp.toml");
pub const BOUND_CHECK: &str = include_str!("../../../../configs/bound_check.toml");
pub const CGMT: &str = include_str!("../../../../configs/cgmt.toml");
pub const RANKS: &str = include_str!("../../../../configs/ranks.toml");
pub const SPLIT_SCAN: &str = include_str!("../../../../configs/split_scan.toml");

/// Shipped configs shrunk to a few seconds each, one per experiment kind.
pub fn small_configs() -> Vec<interp_lab::experiments::ExperimentConfig> {
    use interp_lab::experiments::ExperimentConfig;
    let parse = |s: &str| ExperimentConfig::parse(s).unwrap();
    let mut f = parse(FIGURE1_DESK);
    f.trials = 6;
    f.problem.n = Some(20);
    f.problem.d_grid = vec![10, 20, 40, 80];
    let mut j = parse(JUNK);
    j.trials = 4;
    j.problem.d_grid = vec![64, 256];
    j.mc.samples = 500;
    let mut i = parse(ISOTROPIC_BP);
    i.trials = 4;
    i.problem.d_grid = vec![128, 512];
    let mut b = parse(BOUND_CHECK);
    b.trials = 12;
    b.problem.n = Some(20);
    b.mc.samples = 500;
    let mut c = parse(CGMT);
    c.cgmt.draws = 500;
    c.cgmt.pilot = 10;
    let mut r = parse(RANKS);
    r.problem.d_grid = vec![64, 256];
    r.mc.samples = 500;
    let mut s = parse(SPLIT_SCAN);
    s.problem.n = Some(20);
    s.mc.samples = 500;
    vec![f, j, i, b, c, r, s]
}

/// Every table of `cfg` rendered as CSV at the given thread count.
pub fn csv_at_threads(cfg: &interp_lab::experiments::ExperimentConfig, threads: usize) -> Vec<(String, String)> {
    let mut cfg = cfg.clone();
    cfg.threads = Some(threads);
    let out = interp_lab::experiments::run(&cfg).unwrap();
    out.tables.iter().map(|t| (t.name.clone(), t.to_csv())).collect()
}
