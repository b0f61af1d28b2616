//! Small dense helpers shared by the estimators.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Systems whose 2-norm condition number exceeds this are treated as singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// 2-norm condition number from the singular values; infinite when rank deficient.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    if m.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn check_square(m: &DMatrix<f64>, context: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::dims(format!(
            "{context}: expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

/// Solves `a x = b` after rejecting ill-conditioned `a`. Returns the solution and the
/// condition number that was checked.
pub fn solve_checked(a: &DMatrix<f64>, b: &DVector<f64>, context: &str) -> Result<(DVector<f64>, f64)> {
    check_square(a, context)?;
    if a.nrows() != b.len() {
        return Err(Error::dims(format!(
            "{context}: system of order {} with right-hand side of length {}",
            a.nrows(),
            b.len()
        )));
    }
    let cond = condition_number(a);
    if !(cond <= SINGULAR_CONDITION) {
        return Err(Error::Singular {
            context: context.to_string(),
            condition: cond,
        });
    }
    let x = a.clone().lu().solve(b).ok_or_else(|| Error::Singular {
        context: context.to_string(),
        condition: cond,
    })?;
    Ok((x, cond))
}

/// Matrix right-hand-side variant of [`solve_checked`].
pub fn solve_matrix_checked(a: &DMatrix<f64>, b: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    check_square(a, context)?;
    if a.nrows() != b.nrows() {
        return Err(Error::dims(format!(
            "{context}: system of order {} with right-hand side of {} rows",
            a.nrows(),
            b.nrows()
        )));
    }
    let cond = condition_number(a);
    if !(cond <= SINGULAR_CONDITION) {
        return Err(Error::Singular {
            context: context.to_string(),
            condition: cond,
        });
    }
    a.clone().lu().solve(b).ok_or_else(|| Error::Singular {
        context: context.to_string(),
        condition: cond,
    })
}

pub fn inverse_checked(a: &DMatrix<f64>, context: &str) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    solve_matrix_checked(a, &DMatrix::identity(n, n), context)
}

/// `m + shift * I`.
pub fn shifted(m: &DMatrix<f64>, shift: f64) -> DMatrix<f64> {
    let mut out = m.clone();
    for i in 0..out.nrows().min(out.ncols()) {
        out[(i, i)] += shift;
    }
    out
}

/// Symmetric eigendecomposition with eigenvalues sorted in descending order.
/// Columns of the returned matrix are the matching unit eigenvectors.
pub fn sym_eigen_desc(s: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let sym = (s + s.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let p = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = DVector::from_iterator(p, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(p, p);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    m.nrows() == m.ncols() && (m - m.transpose()).amax() <= tol * m.amax().max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_perfectly_conditioned() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert!((condition_number(&id) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rank_deficient_solve_is_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let b = DVector::from_vec(vec![1.0, 1.0]);
        assert!(matches!(solve_checked(&a, &b, "t"), Err(Error::Singular { .. })));
    }

    #[test]
    fn eigen_is_descending_and_reconstructs() {
        let s = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 1.0]);
        let (vals, vecs) = sym_eigen_desc(&s);
        assert!(vals[0] >= vals[1] && vals[1] >= vals[2]);
        let rebuilt = &vecs * DMatrix::from_diagonal(&vals) * vecs.transpose();
        assert!((rebuilt - s).amax() < 1e-12);
    }
}
