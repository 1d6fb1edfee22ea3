use nalgebra::DMatrix;

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Component of `v` orthogonal to the span of the orthonormal `basis`
/// (two passes of modified Gram–Schmidt).
pub(crate) fn residual(v: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut r = v.to_vec();
    for _ in 0..2 {
        for b in basis {
            let c = dot(&r, b);
            r.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
    }
    r
}

/// Extends `basis` with the normalized residual of `v` if it exceeds `tol`.
pub(crate) fn extend_basis(basis: &mut Vec<Vec<f64>>, v: &[f64], tol: f64) -> bool {
    let r = residual(v, basis);
    let n = norm(&r);
    if n > tol {
        basis.push(r.into_iter().map(|x| x / n).collect());
        true
    } else {
        false
    }
}

/// Determinant of a square matrix given as rows.
pub(crate) fn det(rows: &[Vec<f64>]) -> f64 {
    let n = rows.len();
    if n == 0 {
        return 1.0;
    }
    let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    m.determinant()
}

/// Solves the square system `A x = b`; `None` when singular.
pub(crate) fn solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    let m = DMatrix::from_fn(n, n, |i, j| a[i][j]);
    let rhs = nalgebra::DVector::from_column_slice(b);
    m.lu().solve(&rhs).map(|x| x.iter().copied().collect())
}

pub(crate) fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}
