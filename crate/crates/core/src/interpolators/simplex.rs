//! Dense revised simplex for basis pursuit in standard form
//! `min 1ᵀ(p + q)` s.t. `X(p − q) = Y`, `p, q ≥ 0`.
//!
//! Used as the crossover step after ADMM: the iterate's largest entries
//! seed the starting basis, and the simplex finishes at an exact vertex
//! with its dual multiplier.

use nalgebra::{DMatrix, DVector};

const PIVOT_TOL: f64 = 1e-10;
const BLAND_AFTER: usize = 50;

pub(crate) struct Vertex {
    pub w: DVector<f64>,
    pub lambda: DVector<f64>,
}

pub(crate) enum SimplexError {
    Infeasible,
    IterationLimit,
}

struct Tableau<'a> {
    x: &'a DMatrix<f64>,
    /// `Y` with rows flipped to be non-negative.
    b: DVector<f64>,
    row_sign: Vec<f64>,
    d: usize,
}

impl Tableau<'_> {
    fn m(&self) -> usize {
        self.b.len()
    }

    /// Column `j`: `0..d` is `+X_j`, `d..2d` is `−X_j`, then artificials.
    fn column(&self, j: usize) -> DVector<f64> {
        let m = self.m();
        if j < 2 * self.d {
            let s = if j < self.d { 1.0 } else { -1.0 };
            let c = self.x.column(j % self.d);
            DVector::from_fn(m, |i, _| s * self.row_sign[i] * c[i])
        } else {
            let mut e = DVector::zeros(m);
            e[j - 2 * self.d] = 1.0;
            e
        }
    }

    fn is_artificial(&self, j: usize) -> bool {
        j >= 2 * self.d
    }

    fn basis_matrix(&self, basis: &[usize]) -> DMatrix<f64> {
        let m = self.m();
        let mut bm = DMatrix::zeros(m, m);
        for (k, &j) in basis.iter().enumerate() {
            bm.set_column(k, &self.column(j));
        }
        bm
    }

    /// `λᵀA_j` for every structural column, from `g = Xᵀ(s ∘ λ)`.
    fn structural_products(&self, lambda: &DVector<f64>) -> DVector<f64> {
        let sl = DVector::from_fn(self.m(), |i, _| lambda[i] * self.row_sign[i]);
        self.x.tr_mul(&sl)
    }

    /// Runs the simplex on `basis` with unit cost on structural columns
    /// (`phase2`) or on artificials (phase 1).
    fn run(
        &self,
        basis: &mut [usize],
        phase2: bool,
        iterations: &mut usize,
        limit: usize,
    ) -> Result<(), SimplexError> {
        let m = self.m();
        let cost = |j: usize| {
            if phase2 {
                if self.is_artificial(j) { 0.0 } else { 1.0 }
            } else if self.is_artificial(j) {
                1.0
            } else {
                0.0
            }
        };
        let mut degenerate = 0usize;
        loop {
            if *iterations >= limit {
                return Err(SimplexError::IterationLimit);
            }
            let bm = self.basis_matrix(basis);
            let lu = bm.clone().lu();
            let xb = lu.solve(&self.b).ok_or(SimplexError::IterationLimit)?;
            let cb = DVector::from_fn(m, |k, _| cost(basis[k]));
            let lambda = bm
                .transpose()
                .lu()
                .solve(&cb)
                .ok_or(SimplexError::IterationLimit)?;
            let g = self.structural_products(&lambda);
            let scale = 1.0 + lambda.amax() * self.x.amax();
            let tol = 1e-11 * scale;
            let struct_cost = if phase2 { 1.0 } else { 0.0 };
            let bland = degenerate > BLAND_AFTER;
            let mut enter = None::<(usize, f64)>;
            for j in 0..2 * self.d {
                let rc = if j < self.d {
                    struct_cost - g[j]
                } else {
                    struct_cost + g[j - self.d]
                };
                if rc < -tol && !basis.contains(&j) {
                    match enter {
                        _ if bland && enter.is_some() => {}
                        Some((_, best)) if rc >= best => {}
                        _ => enter = Some((j, rc)),
                    }
                }
            }
            let Some((e, _)) = enter else {
                return Ok(());
            };
            let dir = lu.solve(&self.column(e)).ok_or(SimplexError::IterationLimit)?;
            let piv = PIVOT_TOL * dir.amax().max(1.0);
            let mut leave = None::<(usize, f64)>;
            for k in 0..m {
                // a basic artificial at zero level must not become positive
                let blocking = dir[k] > piv || (phase2 && self.is_artificial(basis[k]) && dir[k] < -piv);
                if !blocking {
                    continue;
                }
                let ratio = if dir[k] > 0.0 { xb[k].max(0.0) / dir[k] } else { 0.0 };
                match leave {
                    Some((kk, r)) if ratio > r || (ratio == r && basis[k] > basis[kk]) => {}
                    _ => leave = Some((k, ratio)),
                }
            }
            let Some((k, ratio)) = leave else {
                return Err(SimplexError::IterationLimit);
            };
            degenerate = if ratio == 0.0 { degenerate + 1 } else { 0 };
            basis[k] = e;
            *iterations += 1;
        }
    }

    /// Swaps zero-level artificials out for structural columns where possible.
    fn drive_out_artificials(&self, basis: &mut [usize]) {
        let m = self.m();
        for k in 0..m {
            if !self.is_artificial(basis[k]) {
                continue;
            }
            let bm = self.basis_matrix(basis);
            let Some(binv) = bm.try_inverse() else { return };
            let row = binv.row(k).transpose();
            let g = self.structural_products(&row);
            let best = (0..self.d)
                .filter(|&j| !basis.contains(&j) && !basis.contains(&(j + self.d)))
                .max_by(|&a, &b| g[a].abs().partial_cmp(&g[b].abs()).unwrap());
            if let Some(j) = best {
                if g[j].abs() > 1e-8 * (1.0 + self.x.amax()) {
                    basis[k] = j;
                }
            }
        }
    }
}

/// Exact basis pursuit vertex. `hint` ranks columns for the starting basis
/// (typically the ADMM iterate).
pub(crate) fn basis_pursuit(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    hint: Option<&DVector<f64>>,
) -> Result<Vertex, SimplexError> {
    let (m, d) = x.shape();
    let row_sign: Vec<f64> = y.iter().map(|&v| if v < 0.0 { -1.0 } else { 1.0 }).collect();
    let t = Tableau {
        x,
        b: DVector::from_fn(m, |i, _| y[i].abs()),
        row_sign,
        d,
    };
    let limit = 50 * (m + 10) + 4 * d;
    let mut iterations = 0;
    let mut basis = hint
        .and_then(|z| warm_basis(&t, z))
        .unwrap_or_else(|| (2 * d..2 * d + m).collect());
    if basis.iter().any(|&j| t.is_artificial(j)) {
        t.run(&mut basis, false, &mut iterations, limit).map_err(|_| SimplexError::IterationLimit)?;
        let bm = t.basis_matrix(&basis);
        let xb = bm.lu().solve(&t.b).ok_or(SimplexError::Infeasible)?;
        let infeas: f64 = basis
            .iter()
            .zip(xb.iter())
            .filter(|(&j, _)| t.is_artificial(j))
            .map(|(_, &v)| v.max(0.0))
            .sum();
        if infeas > 1e-9 * (1.0 + t.b.amax()) {
            return Err(SimplexError::Infeasible);
        }
        t.drive_out_artificials(&mut basis);
    }
    t.run(&mut basis, true, &mut iterations, limit)?;

    let bm = t.basis_matrix(&basis);
    let xb = bm.clone().lu().solve(&t.b).ok_or(SimplexError::Infeasible)?;
    let cb = DVector::from_fn(m, |k, _| if t.is_artificial(basis[k]) { 0.0 } else { 1.0 });
    let lam_flipped = bm.transpose().lu().solve(&cb).ok_or(SimplexError::Infeasible)?;
    let mut w = DVector::zeros(d);
    for (k, &j) in basis.iter().enumerate() {
        let v = xb[k].max(0.0);
        if j < d {
            w[j] += v;
        } else if j < 2 * d {
            w[j - d] -= v;
        }
    }
    let lambda = DVector::from_fn(m, |i, _| lam_flipped[i] * t.row_sign[i]);
    Ok(Vertex { w, lambda })
}

/// Basis from the `m` largest entries of `z` (signed), if it is
/// nonsingular and primal feasible.
fn warm_basis(t: &Tableau, z: &DVector<f64>) -> Option<Vec<usize>> {
    let m = t.m();
    let mut idx: Vec<usize> = (0..t.d).filter(|&i| z[i] != 0.0).collect();
    if idx.len() < m {
        return None;
    }
    idx.sort_by(|&a, &b| z[b].abs().partial_cmp(&z[a].abs()).unwrap().then(a.cmp(&b)));
    idx.truncate(m);
    let basis: Vec<usize> = idx
        .iter()
        .map(|&i| if z[i] > 0.0 { i } else { i + t.d })
        .collect();
    let xb = t.basis_matrix(&basis).lu().solve(&t.b)?;
    (xb.min() >= -1e-12 * (1.0 + t.b.amax())).then_some(basis)
}
