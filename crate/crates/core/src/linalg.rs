//! Small dense helpers on top of `nalgebra`.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

/// Default pseudoinverse cutoff `max(n, d)·ε·σ_max`.
pub fn default_rcond(nrows: usize, ncols: usize) -> f64 {
    nrows.max(ncols) as f64 * f64::EPSILON
}

/// Thin SVD pseudoinverse solve `x = A⁺ b`, truncating singular values at
/// `rcond·σ_max`. Returns the solution and the retained rank.
pub fn pinv_solve(a: &DMatrix<f64>, b: &DVector<f64>, rcond: f64) -> (DVector<f64>, usize) {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let cut = rcond * smax;
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let mut x = DVector::zeros(a.ncols());
    let mut rank = 0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cut && s > 0.0 {
            rank += 1;
            let c = u.column(i).dot(b) / s;
            x.axpy(c, &vt.row(i).transpose(), 1.0);
        }
    }
    (x, rank)
}

/// Orthonormal basis of the null space of `a` (as columns), computed from
/// the complement of the numerically retained right singular vectors.
pub fn null_space(a: &DMatrix<f64>, rcond: f64) -> DMatrix<f64> {
    let d = a.ncols();
    if a.nrows() == 0 {
        return DMatrix::identity(d, d);
    }
    let svd = a.clone().svd(false, true);
    let smax = svd.singular_values.max();
    let vt = svd.v_t.unwrap();
    let mut proj = DMatrix::<f64>::identity(d, d);
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > rcond * smax && s > 0.0 {
            let v = vt.row(i).transpose();
            proj.ger(-1.0, &v, &v, 1.0);
        }
    }
    let eig = SymmetricEigen::new(proj);
    let cols: Vec<DVector<f64>> = eig
        .eigenvalues
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > 0.5)
        .map(|(i, _)| eig.eigenvectors.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(d, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Solver for `K z = r` with `K` symmetric PSD: Cholesky when it succeeds,
/// truncated eigendecomposition otherwise.
pub enum SpdSolver {
    Chol(Cholesky<f64, Dyn>),
    Eig { vecs: DMatrix<f64>, inv: DVector<f64> },
}

impl SpdSolver {
    pub fn new(k: &DMatrix<f64>) -> Self {
        let scale = k.diagonal().max().max(0.0);
        if let Some(ch) = Cholesky::new(k.clone()) {
            let diag = ch.l_dirty().diagonal();
            if diag.min() > 1e-7 * scale.sqrt() {
                return SpdSolver::Chol(ch);
            }
        }
        let eig = SymmetricEigen::new(k.clone());
        let lmax = eig.eigenvalues.max().max(0.0);
        let cut = default_rcond(k.nrows(), k.nrows()) * lmax;
        let inv = eig
            .eigenvalues
            .map(|l| if l > cut && l > 0.0 { 1.0 / l } else { 0.0 });
        SpdSolver::Eig {
            vecs: eig.eigenvectors,
            inv,
        }
    }

    pub fn solve(&self, r: &DVector<f64>) -> DVector<f64> {
        match self {
            SpdSolver::Chol(ch) => ch.solve(r),
            SpdSolver::Eig { vecs, inv } => {
                let c = vecs.tr_mul(r).component_mul(inv);
                vecs * c
            }
        }
    }
}

/// Solves the square system `a x = b`, returning `None` if singular.
pub fn solve_square(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let lu = a.lu();
    let x = lu.solve(b)?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_solves_underdetermined() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let (x, rank) = pinv_solve(&a, &DVector::from_vec(vec![2.0]), 1e-15);
        assert_eq!(rank, 1);
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn null_space_is_orthonormal_and_annihilated() {
        let a = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 0.0, -1.0, 0.5, 0.0, 3.0, 1.0]);
        let n = null_space(&a, 1e-14);
        assert_eq!(n.ncols(), 2);
        assert!((&a * &n).amax() < 1e-12);
        assert!((n.transpose() * &n - DMatrix::<f64>::identity(2, 2)).amax() < 1e-12);
    }

    #[test]
    fn spd_solver_handles_singular() {
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let s = SpdSolver::new(&k);
        let x = s.solve(&DVector::from_vec(vec![2.0, 2.0]));
        assert!((&k * x - DVector::from_vec(vec![2.0, 2.0])).amax() < 1e-12);
    }
}
