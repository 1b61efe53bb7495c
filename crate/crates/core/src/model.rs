//! Generative model `Y = X w* + ξ` with Gaussian rows `X_i ~ N(0, Σ)`.
//!
//! `Σ` is stored through its eigendecomposition: a non-increasing list of
//! eigenvalues and a basis. Diagonal covariances keep a coordinate map
//! instead of a dense basis so that very wide designs stay cheap.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::rng::{normal_vec, rng_from_seed};

/// Default cap on the dimension of a diagonal covariance.
pub const DIAGONAL_DIM_LIMIT: usize = 65_536;
/// Default cap on the dimension of a covariance with a dense basis.
pub const DENSE_DIM_LIMIT: usize = 4_096;

const ORTHONORMAL_TOL: f64 = 1e-10;
const PSD_CLAMP_REL: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimLimits {
    pub diagonal: usize,
    pub dense: usize,
}

impl Default for DimLimits {
    fn default() -> Self {
        Self {
            diagonal: DIAGONAL_DIM_LIMIT,
            dense: DENSE_DIM_LIMIT,
        }
    }
}

/// Eigenvectors of `Σ`, column `i` pairing with eigenvalue `i`.
#[derive(Debug, Clone, PartialEq)]
pub enum Basis {
    /// Eigenvalue `i` lives on coordinate `i`.
    Identity,
    /// Eigenvalue `i` lives on coordinate `map[i]` (a permutation).
    Coordinates(Vec<usize>),
    /// Dense orthonormal `d × d` matrix.
    Dense(DMatrix<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceModel {
    eigenvalues: Vec<f64>,
    basis: Basis,
}

fn check_eigenvalues(eigs: &[f64]) -> Result<()> {
    if eigs.is_empty() {
        return Err(LabError::InvalidCovariance("dimension must be positive".into()));
    }
    if let Some(v) = eigs.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(LabError::InvalidCovariance(format!(
            "eigenvalue {v} is negative or not finite"
        )));
    }
    if eigs.windows(2).any(|w| w[0] < w[1]) {
        return Err(LabError::InvalidCovariance(
            "eigenvalues must be sorted non-increasing".into(),
        ));
    }
    Ok(())
}

fn sorted_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    // stable: ties keep the lowest index first
    idx.sort_by(|&a, &b| values[b].partial_cmp(&values[a]).unwrap());
    idx
}

impl CovarianceModel {
    /// Diagonal covariance whose eigenvalues are already sorted non-increasing.
    pub fn diagonal_sorted(eigenvalues: Vec<f64>) -> Result<Self> {
        check_eigenvalues(&eigenvalues)?;
        Ok(Self {
            eigenvalues,
            basis: Basis::Identity,
        })
    }

    /// Diagonal covariance from an arbitrary-order diagonal.
    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        if let Some(v) = diag.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(LabError::InvalidCovariance(format!(
                "diagonal entry {v} is negative or not finite"
            )));
        }
        let order = sorted_order(diag);
        let eigenvalues: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
        check_eigenvalues(&eigenvalues)?;
        let basis = if order.iter().enumerate().all(|(i, &j)| i == j) {
            Basis::Identity
        } else {
            Basis::Coordinates(order)
        };
        Ok(Self { eigenvalues, basis })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Result<Self> {
        Self::diagonal_sorted(vec![scale; dim])
    }

    /// Covariance `basis · diag(eigenvalues) · basisᵀ`.
    pub fn with_basis(eigenvalues: Vec<f64>, basis: DMatrix<f64>) -> Result<Self> {
        check_eigenvalues(&eigenvalues)?;
        let d = eigenvalues.len();
        if basis.nrows() != d || basis.ncols() != d {
            return Err(LabError::DimensionMismatch {
                expected: d,
                got: basis.nrows(),
            });
        }
        let gram = basis.transpose() * &basis;
        let off = (&gram - DMatrix::<f64>::identity(d, d)).amax();
        if off > ORTHONORMAL_TOL {
            return Err(LabError::InvalidCovariance(format!(
                "basis is not orthonormal (max deviation {off:e})"
            )));
        }
        Ok(Self {
            eigenvalues,
            basis: Basis::Dense(basis),
        })
    }

    /// Eigendecomposes a symmetric PSD matrix. Eigenvalues in
    /// `[-1e-14·λ_max, 0)` are clamped to zero; anything more negative is
    /// rejected.
    pub fn from_matrix(sigma: &DMatrix<f64>) -> Result<Self> {
        let d = sigma.nrows();
        if d == 0 || sigma.ncols() != d {
            return Err(LabError::InvalidCovariance("matrix must be square".into()));
        }
        let asym = (sigma - sigma.transpose()).amax();
        if asym > 1e-10 * sigma.amax().max(1.0) {
            return Err(LabError::InvalidCovariance(format!(
                "matrix is not symmetric (max asymmetry {asym:e})"
            )));
        }
        let eig = SymmetricEigen::new(sigma.clone());
        let raw: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let lmax = raw.iter().cloned().fold(0.0_f64, f64::max);
        let mut vals = Vec::with_capacity(d);
        for &v in &raw {
            if v < 0.0 {
                if v < -PSD_CLAMP_REL * lmax.max(f64::MIN_POSITIVE) && v < -1e-300 {
                    return Err(LabError::InvalidCovariance(format!(
                        "matrix is not PSD (eigenvalue {v:e})"
                    )));
                }
                vals.push(0.0);
            } else {
                vals.push(v);
            }
        }
        let order = sorted_order(&vals);
        let eigenvalues: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
        let mut basis = DMatrix::zeros(d, d);
        for (col, &src) in order.iter().enumerate() {
            basis.set_column(col, &eig.eigenvectors.column(src));
        }
        Ok(Self {
            eigenvalues,
            basis: Basis::Dense(basis),
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn is_diagonal(&self) -> bool {
        !matches!(self.basis, Basis::Dense(_))
    }

    pub fn check_limits(&self, limits: &DimLimits) -> Result<()> {
        let limit = if self.is_diagonal() {
            limits.diagonal
        } else {
            limits.dense
        };
        if self.dim() > limit {
            return Err(LabError::DimensionTooLarge {
                dim: self.dim(),
                limit,
            });
        }
        Ok(())
    }

    pub fn trace(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    pub fn trace_sq(&self) -> f64 {
        self.eigenvalues.iter().map(|v| v * v).sum()
    }

    pub fn op_norm(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.iter().filter(|&&v| v > 0.0).count()
    }

    pub fn is_zero(&self) -> bool {
        self.eigenvalues[0] == 0.0
    }

    /// Whether `Σ = s·I` for some `s ≥ 0`.
    pub fn isotropic_scale(&self) -> Option<f64> {
        let s = self.eigenvalues[0];
        self.eigenvalues.iter().all(|&v| v == s).then_some(s)
    }

    /// Coordinate carrying eigenvalue `i` (diagonal bases only).
    fn coord(&self, i: usize) -> usize {
        match &self.basis {
            Basis::Identity => i,
            Basis::Coordinates(map) => map[i],
            Basis::Dense(_) => unreachable!("coord() on dense basis"),
        }
    }

    /// Eigenvector `i` as a dense vector.
    pub fn eigenvector(&self, i: usize) -> DVector<f64> {
        match &self.basis {
            Basis::Dense(u) => u.column(i).into_owned(),
            _ => {
                let mut e = DVector::zeros(self.dim());
                e[self.coord(i)] = 1.0;
                e
            }
        }
    }

    /// Diagonal entries `Σ_jj` in coordinate order.
    pub fn diag_entries(&self) -> Vec<f64> {
        let d = self.dim();
        match &self.basis {
            Basis::Dense(u) => (0..d)
                .map(|j| {
                    (0..d)
                        .map(|i| u[(j, i)] * u[(j, i)] * self.eigenvalues[i])
                        .sum()
                })
                .collect(),
            _ => {
                let mut out = vec![0.0; d];
                for (i, &v) in self.eigenvalues.iter().enumerate() {
                    out[self.coord(i)] = v;
                }
                out
            }
        }
    }

    pub fn max_diag(&self) -> f64 {
        self.diag_entries().into_iter().fold(0.0, f64::max)
    }

    fn apply_power(&self, v: &[f64], f: impl Fn(f64) -> f64) -> Vec<f64> {
        let d = self.dim();
        assert_eq!(v.len(), d, "vector length must match covariance dimension");
        match &self.basis {
            Basis::Dense(u) => {
                let x = DVector::from_column_slice(v);
                let mut c = u.tr_mul(&x);
                for (ci, &lam) in c.iter_mut().zip(&self.eigenvalues) {
                    *ci *= f(lam);
                }
                (u * c).as_slice().to_vec()
            }
            _ => {
                let mut out = vec![0.0; d];
                for (i, &lam) in self.eigenvalues.iter().enumerate() {
                    let j = self.coord(i);
                    out[j] = f(lam) * v[j];
                }
                out
            }
        }
    }

    /// `Σ^{1/2} v`.
    pub fn sqrt_mul(&self, v: &[f64]) -> Vec<f64> {
        self.apply_power(v, f64::sqrt)
    }

    /// `Σ v`.
    pub fn mul(&self, v: &[f64]) -> Vec<f64> {
        self.apply_power(v, |l| l)
    }

    /// `vᵀ Σ v`.
    pub fn quad_form(&self, v: &[f64]) -> f64 {
        match &self.basis {
            Basis::Dense(_) => {
                let sv = self.mul(v);
                sv.iter().zip(v).map(|(a, b)| a * b).sum()
            }
            _ => self
                .eigenvalues
                .iter()
                .enumerate()
                .map(|(i, &lam)| {
                    let x = v[self.coord(i)];
                    lam * x * x
                })
                .sum(),
        }
    }

    /// Mahalanobis seminorm `‖v‖_Σ`.
    pub fn seminorm(&self, v: &[f64]) -> f64 {
        self.quad_form(v).max(0.0).sqrt()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        self.dense_power(|l| l)
    }

    pub fn sqrt_dense(&self) -> DMatrix<f64> {
        self.dense_power(f64::sqrt)
    }

    fn dense_power(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let d = self.dim();
        match &self.basis {
            Basis::Dense(u) => {
                let mut scaled = u.clone();
                for (i, &lam) in self.eigenvalues.iter().enumerate() {
                    let s = f(lam);
                    scaled.column_mut(i).scale_mut(s);
                }
                scaled * u.transpose()
            }
            _ => {
                let mut m = DMatrix::zeros(d, d);
                for (i, &lam) in self.eigenvalues.iter().enumerate() {
                    let j = self.coord(i);
                    m[(j, j)] = f(lam);
                }
                m
            }
        }
    }

    /// Covariance keeping only the eigenpairs flagged in `keep`; the rest
    /// become zero. Eigen-disjoint restrictions of one model have orthogonal
    /// spans and sum back to the original.
    pub fn restrict(&self, keep: &[bool]) -> CovarianceModel {
        assert_eq!(keep.len(), self.dim());
        let vals: Vec<f64> = self
            .eigenvalues
            .iter()
            .zip(keep)
            .map(|(&v, &k)| if k { v } else { 0.0 })
            .collect();
        let order = sorted_order(&vals);
        let eigenvalues: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
        let basis = match &self.basis {
            Basis::Dense(u) => {
                let mut b = DMatrix::zeros(u.nrows(), u.ncols());
                for (col, &src) in order.iter().enumerate() {
                    b.set_column(col, &u.column(src));
                }
                Basis::Dense(b)
            }
            _ => {
                let map: Vec<usize> = order.iter().map(|&src| self.coord(src)).collect();
                if map.iter().enumerate().all(|(i, &j)| i == j) {
                    Basis::Identity
                } else {
                    Basis::Coordinates(map)
                }
            }
        };
        CovarianceModel { eigenvalues, basis }
    }

    /// Orthogonal projection of `v` onto the span of `Σ` (eigenvectors with
    /// positive eigenvalue).
    pub fn project_onto_span(&self, v: &[f64]) -> Vec<f64> {
        self.apply_power(v, |l| if l > 0.0 { 1.0 } else { 0.0 })
    }

    /// Grouped spectrum (runs of exactly equal eigenvalues).
    pub fn spectrum(&self) -> Spectrum {
        let mut groups: Vec<SpectralGroup> = Vec::new();
        for &v in &self.eigenvalues {
            match groups.last_mut() {
                Some(g) if g.value == v => g.multiplicity += 1,
                _ => groups.push(SpectralGroup {
                    value: v,
                    multiplicity: 1,
                }),
            }
        }
        Spectrum { groups }
    }
}

/// A block of `multiplicity` eigenvalues equal to `value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralGroup {
    pub value: f64,
    pub multiplicity: u128,
}

/// Spectrum of a covariance in grouped form. Multiplicities may be far larger
/// than any materializable dimension (e.g. `d = 2^80` junk features); only
/// rotation-invariant or diagonal-coordinate statistics are computed from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub groups: Vec<SpectralGroup>,
}

impl Spectrum {
    pub fn new(groups: Vec<SpectralGroup>) -> Result<Self> {
        if groups.iter().any(|g| !g.value.is_finite() || g.value < 0.0) {
            return Err(LabError::InvalidCovariance(
                "spectral values must be finite and non-negative".into(),
            ));
        }
        if groups.iter().all(|g| g.multiplicity == 0) {
            return Err(LabError::InvalidCovariance("empty spectrum".into()));
        }
        let mut groups: Vec<SpectralGroup> =
            groups.into_iter().filter(|g| g.multiplicity > 0).collect();
        groups.sort_by(|a, b| b.value.partial_cmp(&a.value).unwrap());
        Ok(Self { groups })
    }

    pub fn dim(&self) -> u128 {
        self.groups.iter().map(|g| g.multiplicity).sum()
    }

    pub fn trace(&self) -> f64 {
        self.groups
            .iter()
            .map(|g| g.value * g.multiplicity as f64)
            .sum()
    }

    pub fn trace_sq(&self) -> f64 {
        self.groups
            .iter()
            .map(|g| g.value * g.value * g.multiplicity as f64)
            .sum()
    }

    pub fn op_norm(&self) -> f64 {
        self.groups.iter().map(|g| g.value).fold(0.0, f64::max)
    }

    pub fn rank(&self) -> u128 {
        self.groups
            .iter()
            .filter(|g| g.value > 0.0)
            .map(|g| g.multiplicity)
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.op_norm() == 0.0
    }
}

/// The generative model: covariance, signal `w*`, noise level, sample size.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub cov: CovarianceModel,
    pub w_star: Vec<f64>,
    pub sigma: f64,
    /// `σ²` as configured; kept separately so that `σ² = 1/2` stays exact.
    pub noise_var: f64,
    pub n: usize,
}

impl ProblemSpec {
    pub fn new(cov: CovarianceModel, w_star: Vec<f64>, sigma: f64, n: usize) -> Result<Self> {
        if w_star.len() != cov.dim() {
            return Err(LabError::DimensionMismatch {
                expected: cov.dim(),
                got: w_star.len(),
            });
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(LabError::InvalidProblem(format!("sigma = {sigma} must be >= 0")));
        }
        if n == 0 {
            return Err(LabError::InvalidProblem("n must be at least 1".into()));
        }
        if w_star.iter().any(|v| !v.is_finite()) {
            return Err(LabError::InvalidProblem("w* must be finite".into()));
        }
        Ok(Self {
            cov,
            w_star,
            sigma,
            noise_var: sigma * sigma,
            n,
        })
    }

    /// Same as [`ProblemSpec::new`] with the noise given as a variance.
    pub fn with_noise_variance(
        cov: CovarianceModel,
        w_star: Vec<f64>,
        noise_var: f64,
        n: usize,
    ) -> Result<Self> {
        if !(noise_var >= 0.0) {
            return Err(LabError::InvalidProblem(format!(
                "noise variance {noise_var} must be >= 0"
            )));
        }
        let mut spec = Self::new(cov, w_star, noise_var.sqrt(), n)?;
        spec.noise_var = noise_var;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.cov.dim()
    }

    /// Bayes risk `σ²`.
    pub fn bayes_risk(&self) -> f64 {
        self.noise_var
    }

    /// Null risk `L(0) = σ² + ‖w*‖_Σ²`.
    pub fn null_risk(&self) -> f64 {
        self.bayes_risk() + self.cov.quad_form(&self.w_star)
    }
}

/// One realized draw `(X, ξ, Y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub xi: DVector<f64>,
    pub y: DVector<f64>,
    pub seed: u64,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }
}

/// Draws `n` rows `X_i = Σ^{1/2} z_i` with `z_i ~ N(0, I_d)`, then
/// `ξ ~ N(0, σ² I_n)`, and sets `Y = X w* + ξ`.
///
/// Draw order is fixed: all of `z_1`, then `z_2`, …, then `ξ`.
pub fn sample_dataset(spec: &ProblemSpec, seed: u64) -> Dataset {
    let n = spec.n;
    let d = spec.dim();
    let mut rng = rng_from_seed(seed);
    let mut x = DMatrix::zeros(n, d);
    match spec.cov.basis() {
        Basis::Dense(_) => {
            let mut z = DMatrix::zeros(n, d);
            for i in 0..n {
                for j in 0..d {
                    z[(i, j)] = crate::rng::std_normal(&mut rng);
                }
            }
            x = z * spec.cov.sqrt_dense();
        }
        _ => {
            let scale: Vec<f64> = spec
                .cov
                .diag_entries()
                .into_iter()
                .map(f64::sqrt)
                .collect();
            for i in 0..n {
                for (j, s) in scale.iter().enumerate() {
                    x[(i, j)] = s * crate::rng::std_normal(&mut rng);
                }
            }
        }
    }
    let xi = DVector::from_vec(normal_vec(&mut rng, n)) * spec.sigma;
    let w = DVector::from_column_slice(&spec.w_star);
    let y = &x * &w + &xi;
    Dataset { x, xi, y, seed }
}

/// `L(w) = σ² + ‖w − w*‖_Σ²`, evaluated exactly.
pub fn population_loss(spec: &ProblemSpec, w: &[f64]) -> Result<f64> {
    if w.len() != spec.dim() {
        return Err(LabError::DimensionMismatch {
            expected: spec.dim(),
            got: w.len(),
        });
    }
    let diff: Vec<f64> = w.iter().zip(&spec.w_star).map(|(a, b)| a - b).collect();
    Ok(spec.bayes_risk() + spec.cov.quad_form(&diff))
}

/// `L̂(w) = ‖Y − Xw‖² / n`.
pub fn empirical_loss(ds: &Dataset, w: &[f64]) -> Result<f64> {
    if w.len() != ds.dim() {
        return Err(LabError::DimensionMismatch {
            expected: ds.dim(),
            got: w.len(),
        });
    }
    let r = &ds.y - &ds.x * DVector::from_column_slice(w);
    Ok(r.norm_squared() / ds.n() as f64)
}

/// Eigen-aligned covariance split `Σ = Σ₁ ⊕ Σ₂`: `sel1` lists the eigenvalue
/// indices assigned to `Σ₁`, the complement goes to `Σ₂`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CovSplit {
    sel1: Vec<usize>,
}

impl CovSplit {
    pub fn new(mut sel1: Vec<usize>, dim: usize) -> Result<Self> {
        sel1.sort_unstable();
        sel1.dedup();
        if let Some(&bad) = sel1.iter().find(|&&i| i >= dim) {
            return Err(LabError::KOutOfRange { k: bad, dim });
        }
        Ok(Self { sel1 })
    }

    /// `Σ₁ = 0`.
    pub fn trivial() -> Self {
        Self { sel1: Vec::new() }
    }

    pub fn sel1(&self) -> &[usize] {
        &self.sel1
    }

    /// `rank(Σ₁) = |sel1|`.
    pub fn rank1(&self) -> usize {
        self.sel1.len()
    }

    fn mask(&self, dim: usize, first: bool) -> Vec<bool> {
        let mut m = vec![!first; dim];
        for &i in &self.sel1 {
            m[i] = first;
        }
        m
    }

    pub fn sigma1(&self, cov: &CovarianceModel) -> CovarianceModel {
        cov.restrict(&self.mask(cov.dim(), true))
    }

    pub fn sigma2(&self, cov: &CovarianceModel) -> CovarianceModel {
        cov.restrict(&self.mask(cov.dim(), false))
    }
}

/// `ε = 3√(r/n) + 3√(2 log(2/δ)/n)`: with probability `1 − δ` the whitened
/// sample covariance of `n ≥ 4(r + 2 log(2/δ))` draws of a rank-`r` Gaussian
/// has all eigenvalues in `[1 − ε, 1 + ε]`.
pub fn isometry_epsilon(rank: usize, n: usize, delta: f64) -> f64 {
    let n = n as f64;
    3.0 * (rank as f64 / n).sqrt() + 3.0 * (2.0 * (2.0 / delta).ln() / n).sqrt()
}

/// Extreme generalized eigenvalues of `Σ̂ = XᵀX/n` against `Σ` on the span
/// of `Σ` (i.e. the eigenvalues of the whitened sample covariance).
pub fn whitened_covariance_extremes(cov: &CovarianceModel, ds: &Dataset) -> (f64, f64) {
    let r = cov.rank();
    let n = ds.n();
    if r == 0 {
        return (1.0, 1.0);
    }
    let mut w = DMatrix::zeros(n, r);
    for i in 0..r {
        let u = cov.eigenvector(i) / cov.eigenvalues()[i].sqrt();
        w.set_column(i, &(&ds.x * u));
    }
    let s = w.tr_mul(&w) / n as f64;
    let eig = SymmetricEigen::new(s).eigenvalues;
    (eig.min(), eig.max())
}
