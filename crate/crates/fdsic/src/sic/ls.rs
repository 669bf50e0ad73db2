use nalgebra::{DMatrix, DVector};

use crate::{Error, Result, C64};

/// Above this condition number of the column-normalised regressor matrix
/// a small ridge term is added automatically.
pub const AUTO_RIDGE_COND: f64 = 1e8;

/// Relative size of a column residual, after QR, below which the column
/// counts as linearly dependent.
const RANK_TOL: f64 = 1e-12;

/// Minimiser of `|y - A c|^2 + reg |c|^2`.
///
/// With `reg = 0` the system is solved by QR on column-normalised
/// regressors; a dependent column is reported by index. If the
/// condition estimate exceeds [`AUTO_RIDGE_COND`], a ridge of
/// `1e-12 * trace(A^H A) / K` is applied instead.
pub fn ls_solve(a: &DMatrix<C64>, y: &[C64], reg: f64) -> Result<Vec<C64>> {
    let (m, k) = a.shape();
    if y.len() != m {
        return Err(Error::Mismatch(format!("{m} regressor rows, {} observations", y.len())));
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    if reg < 0.0 {
        return Err(Error::Config("regularization must be nonnegative".into()));
    }
    if reg > 0.0 {
        return ridge(a, y, reg);
    }
    if m < k {
        return Err(Error::Underdetermined(format!("{m} observations for {k} unknowns")));
    }
    let norms: Vec<f64> = (0..k).map(|j| a.column(j).norm()).collect();
    if let Some(j) = norms.iter().position(|&n| n == 0.0) {
        return Err(Error::Singular { column: j });
    }
    let mut an = a.clone();
    for (j, n) in norms.iter().enumerate() {
        an.column_mut(j).scale_mut(1.0 / n);
    }
    let qr = an.qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..k).map(|j| r[(j, j)].norm()).collect();
    if let Some(j) = diag.iter().position(|&d| d < RANK_TOL) {
        return Err(Error::Singular { column: j });
    }
    let cond = diag.iter().cloned().fold(0.0, f64::max) / diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if cond > AUTO_RIDGE_COND {
        let tr: f64 = norms.iter().map(|n| n * n).sum();
        return ridge(a, y, 1e-12 * tr / k as f64);
    }
    let qhy = qr.q().adjoint() * DVector::from_column_slice(y);
    let c = r
        .solve_upper_triangular(&qhy)
        .ok_or(Error::Singular { column: k - 1 })?;
    Ok(c.iter().zip(&norms).map(|(v, n)| v / n).collect())
}

fn ridge(a: &DMatrix<C64>, y: &[C64], reg: f64) -> Result<Vec<C64>> {
    let k = a.ncols();
    let mut g = a.adjoint() * a;
    for j in 0..k {
        g[(j, j)] += reg;
    }
    let rhs = a.adjoint() * DVector::from_column_slice(y);
    let chol = g.cholesky().ok_or(Error::Singular { column: 0 })?;
    Ok(chol.solve(&rhs).iter().copied().collect())
}

/// Single-regressor LS `sum conj(g) y / sum |g|^2`; `None` when the
/// regressor has no energy.
pub fn scalar_ls(g: &[C64], y: &[C64]) -> Option<C64> {
    let den: f64 = g.iter().map(|v| v.norm_sqr()).sum();
    if den == 0.0 {
        return None;
    }
    let num: C64 = g.iter().zip(y).map(|(a, b)| a.conj() * b).sum();
    Some(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn single_column() {
        let phi = DMatrix::from_column_slice(3, 1, &[c(1.0, 0.0), c(0.0, 2.0), c(-1.0, 1.0)]);
        let y: Vec<C64> = phi.iter().map(|v| v * 2.0).collect();
        let s = ls_solve(&phi, &y, 0.0).unwrap();
        assert!((s[0] - c(2.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn orthonormal_projection() {
        let s = 0.5f64.sqrt();
        let a = DMatrix::from_row_slice(2, 2, &[c(s, 0.0), c(s, 0.0), c(0.0, s), c(0.0, -s)]);
        let y = [c(1.0, 2.0), c(-0.5, 0.25)];
        let got = ls_solve(&a, &y, 0.0).unwrap();
        let want = a.adjoint() * DVector::from_column_slice(&y);
        for j in 0..2 {
            assert!((got[j] - want[j]).norm() < 1e-14);
        }
    }

    #[test]
    fn random_system_recovered() {
        let mut rng = crate::rng(2);
        let a = DMatrix::from_fn(64, 3, |_, _| crate::cgauss(&mut rng, 1.0));
        let truth = DVector::from_vec(vec![c(1.0, -2.0), c(0.3, 0.1), c(-4.0, 0.5)]);
        let y: Vec<C64> = (&a * &truth).iter().copied().collect();
        let got = ls_solve(&a, &y, 0.0).unwrap();
        for j in 0..3 {
            assert!((got[j] - truth[j]).norm() < 1e-9);
        }
        let ridged = ls_solve(&a, &y, 1e-9).unwrap();
        assert!((ridged[0] - truth[0]).norm() < 1e-6);
    }

    #[test]
    fn dependent_column_named() {
        let a = DMatrix::from_row_slice(3, 3, &[
            c(1.0, 0.0), c(2.0, 0.0), c(0.0, 1.0),
            c(0.0, 1.0), c(0.0, 2.0), c(1.0, 0.0),
            c(1.0, 1.0), c(2.0, 2.0), c(3.0, 0.0),
        ]);
        match ls_solve(&a, &[c(1.0, 0.0); 3], 0.0) {
            Err(Error::Singular { column }) => assert_eq!(column, 1),
            other => panic!("{other:?}"),
        }
        let short = DMatrix::from_element(1, 2, c(1.0, 0.0));
        assert!(matches!(ls_solve(&short, &[c(1.0, 0.0)], 0.0), Err(Error::Underdetermined(_))));
    }

    #[test]
    fn scalar_cases() {
        assert_eq!(scalar_ls(&[c(0.0, 0.0)], &[c(1.0, 0.0)]), None);
        let g = [c(1.0, 1.0), c(2.0, 0.0)];
        let y: Vec<C64> = g.iter().map(|v| v * c(0.5, -1.0)).collect();
        assert!((scalar_ls(&g, &y).unwrap() - c(0.5, -1.0)).norm() < 1e-15);
    }
}
