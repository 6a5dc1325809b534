//! Dense linear algebra on top of `faer`.

use faer::linalg::solvers::DenseSolveCore;
use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::C64;

pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITER: usize = 500;

pub fn from_row_major(rows: usize, cols: usize, data: &[C64]) -> Mat<C64> {
    Mat::from_fn(rows, cols, |i, j| data[i * cols + j])
}

pub fn to_row_major(m: &Mat<C64>) -> Vec<C64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn frobenius(m: &Mat<C64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)].norm_sqr();
        }
    }
    s.sqrt()
}

pub fn identity(n: usize) -> Mat<C64> {
    Mat::from_fn(n, n, |i, j| if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
}

fn matvec(m: &Mat<C64>, v: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); m.nrows()];
    for j in 0..m.ncols() {
        let vj = v[j];
        if vj == C64::new(0.0, 0.0) {
            continue;
        }
        let col = m.col(j);
        for i in 0..m.nrows() {
            out[i] += col[i] * vj;
        }
    }
    out
}

fn matvec_adjoint(m: &Mat<C64>, v: &[C64]) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); m.ncols()];
    for (j, o) in out.iter_mut().enumerate() {
        let col = m.col(j);
        let mut s = C64::new(0.0, 0.0);
        for i in 0..m.nrows() {
            s += col[i].conj() * v[i];
        }
        *o = s;
    }
    out
}

fn vnorm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest singular value by power iteration on `M^dagger M` with a deterministic start.
pub fn op_norm(m: &Mat<C64>) -> f64 {
    let n = m.ncols();
    if n == 0 || m.nrows() == 0 {
        return 0.0;
    }
    let mut v: Vec<C64> = (0..n).map(|j| C64::new(1.0 + 0.37 * ((j * 7919) % 101) as f64 / 101.0, 0.11 * ((j * 31) % 17) as f64)).collect();
    let nv = vnorm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut sigma = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let w = matvec(m, &v);
        let u = matvec_adjoint(m, &w);
        let nu = vnorm(&u);
        if nu == 0.0 {
            return 0.0;
        }
        let s_new = nu.sqrt();
        v = u.into_iter().map(|x| x / nu).collect();
        if (s_new - sigma).abs() <= POWER_TOL * s_new {
            return s_new;
        }
        sigma = s_new;
    }
    sigma
}

/// Singular values, descending.
pub fn singular_values(m: &Mat<C64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    m.singular_values().expect("singular value decomposition did not converge")
}

/// Spectral condition number `sigma_max / sigma_min`.
pub fn condition_number(m: &Mat<C64>) -> f64 {
    let s = singular_values(m);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Inverse of a square matrix; fails when the condition number, estimated as
/// `||M|| ||M^-1||` by power iteration, exceeds `max_cond`.
pub fn inverse_checked(m: &Mat<C64>, max_cond: f64) -> Result<Mat<C64>> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape("inverse of a non-square matrix".into()));
    }
    let inv = inverse(m);
    let finite = (0..inv.ncols()).all(|j| inv.col(j).iter().all(|v| v.re.is_finite() && v.im.is_finite()));
    let cond = if finite { op_norm(m) * op_norm(&inv) } else { f64::INFINITY };
    if !(cond <= max_cond) {
        return Err(Error::NotInvertible(cond));
    }
    Ok(inv)
}

/// Inverse by partial-pivoting LU without conditioning checks.
pub fn inverse(m: &Mat<C64>) -> Mat<C64> {
    m.partial_piv_lu().inverse()
}

/// Eigen-decomposition of the Hermitian part of `m`: ascending eigenvalues and eigenvectors (columns).
pub fn eigh(m: &Mat<C64>) -> (Vec<f64>, Mat<C64>) {
    let e = m.self_adjoint_eigen(Side::Lower).expect("Hermitian eigensolver did not converge");
    let vals: Vec<f64> = (0..m.nrows()).map(|i| e.S().column_vector()[i].re).collect();
    (vals, e.U().to_owned())
}

pub fn eigvalsh(m: &Mat<C64>) -> Vec<f64> {
    m.self_adjoint_eigenvalues(Side::Lower).expect("Hermitian eigensolver did not converge")
}

/// `f(H)` for Hermitian `H` via its eigen-decomposition.
pub fn hermitian_function(m: &Mat<C64>, f: impl Fn(f64) -> C64) -> Mat<C64> {
    let (vals, u) = eigh(m);
    let n = m.nrows();
    let fu = Mat::from_fn(n, n, |i, j| u[(i, j)] * f(vals[j]));
    &fu * u.adjoint()
}

pub fn trace(m: &Mat<C64>) -> C64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// Spectral norm of a small row-major matrix.
pub fn small_op_norm(a: &[C64], rows: usize, cols: usize) -> f64 {
    if rows == 1 || cols == 1 {
        return a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    }
    singular_values(&from_row_major(rows, cols, a))[0]
}

/// Smallest singular value of a small row-major matrix.
pub fn small_min_singular(a: &[C64], rows: usize, cols: usize) -> f64 {
    if rows == 1 && cols == 1 {
        return a[0].norm();
    }
    *singular_values(&from_row_major(rows, cols, a)).last().unwrap_or(&0.0)
}

/// Inverse of a small row-major square matrix.
pub fn small_inverse(a: &[C64], n: usize) -> Vec<C64> {
    if n == 1 {
        return vec![C64::new(1.0, 0.0) / a[0]];
    }
    to_row_major(&inverse(&from_row_major(n, n, a)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_iteration_matches_svd() {
        let m = Mat::<C64>::from_fn(20, 15, |i, j| C64::new(((i * 3 + j * 7) % 5) as f64 - 2.0, (i as f64 - j as f64).cos()));
        let s = singular_values(&m)[0];
        assert!((op_norm(&m) - s).abs() < 1e-8 * s);
    }

    #[test]
    fn inverse_checks_condition() {
        let m = Mat::<C64>::from_fn(2, 2, |i, j| if i == j { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) });
        assert!(inverse_checked(&m, 1e8).is_ok());
        let s = Mat::<C64>::from_fn(2, 2, |_, _| C64::new(1.0, 0.0));
        assert!(matches!(inverse_checked(&s, 1e8), Err(Error::NotInvertible(_))));
    }

    #[test]
    fn hermitian_function_square() {
        let h = Mat::<C64>::from_fn(4, 4, |i, j| C64::new(if i == j { i as f64 } else { 0.3 }, 0.0));
        let sq = hermitian_function(&h, |x| C64::new(x * x, 0.0));
        let direct = &h * &h;
        assert!(frobenius(&(&sq - &direct)) < 1e-12);
    }
}
