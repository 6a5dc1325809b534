//! Trace formula, Schatten norms and local trace-class checks.

use std::f64::consts::PI;

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::{hermitian_function, singular_values, trace};
use crate::magnetic::MagneticData;
use crate::quantize::{quantize, OperatorMatrix};
use crate::symbol::Symbol;
use crate::C64;

#[derive(Clone, Copy, Debug)]
pub struct TraceCheck {
    /// Matrix trace of `Op^A(f)`.
    pub lhs: C64,
    /// `(2 pi eps)^{-d} (dr dxi)^d sum tr f`.
    pub rhs: C64,
    /// `|lhs - rhs| / |rhs|` (absolute when `rhs` vanishes).
    pub defect: f64,
}

/// Phase-space quadrature `(2 pi eps)^{-d} int dr d xi tr f(r, xi)` on the grid.
pub fn phase_space_integral(f: &Symbol) -> Result<C64> {
    if f.n_out != f.n_in {
        return Err(Error::Composability("trace of a non-square symbol".into()));
    }
    let g = &f.grid;
    let d = g.d();
    let mut w = 1.0;
    for j in 0..d {
        w *= f.eps * g.dx(j) * g.dxi(j) / (2.0 * PI * f.eps);
    }
    let n = f.n_out;
    let mut s = C64::new(0.0, 0.0);
    for blk in f.values.chunks(n * n) {
        for i in 0..n {
            s += blk[i * n + i];
        }
    }
    Ok(s * w)
}

pub fn trace_formula_check(f: &Symbol, mag: &MagneticData) -> Result<TraceCheck> {
    let rhs = phase_space_integral(f)?;
    let lhs = trace(&quantize(f, mag)?.m);
    let diff = (lhs - rhs).norm();
    let defect = if rhs.norm() > 0.0 { diff / rhs.norm() } else { diff };
    Ok(TraceCheck { lhs, rhs, defect })
}

/// `(sum sigma_i^p)^{1/p}`; `p = inf` gives the operator norm.
pub fn schatten_norm(m: &OperatorMatrix, p: f64) -> Result<f64> {
    schatten_of(&m.m, p)
}

fn schatten_of(m: &Mat<C64>, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Capability(format!("Schatten exponent {p} below 1")));
    }
    let s = singular_values(m);
    if p.is_infinite() {
        return Ok(s.first().copied().unwrap_or(0.0));
    }
    let top = s.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return Ok(0.0);
    }
    Ok(top * s.iter().map(|v| (v / top).powf(p)).sum::<f64>().powf(1.0 / p))
}

/// `|| Op^A(chi) |Op^A(f)|^p ||_1^{1/p}`.
pub fn local_trace_check(f: &Symbol, chi: &Symbol, p: f64, mag: &MagneticData) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Capability(format!("Schatten exponent {p} below 1")));
    }
    let t = quantize(f, mag)?;
    let c = quantize(chi, mag)?;
    let tt = t.m.adjoint() * &t.m;
    let abs_p = hermitian_function(&tt, |x| C64::new(x.max(0.0).powf(p / 2.0), 0.0));
    let prod = &c.m * &abs_p;
    Ok(schatten_of(&prod, 1.0)?.powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::PhaseGrid;

    #[test]
    fn schatten_of_identity_and_rank_one() {
        let g = PhaseGrid::new(1, 8, 2.0).unwrap();
        let id = OperatorMatrix::identity(&g, 1.0, 1);
        assert!((schatten_norm(&id, 1.0).unwrap() - 8.0).abs() < 1e-10);
        let u: Vec<f64> = (0..8).map(|i| if i == 2 { 1.0 } else { 0.0 }).collect();
        let m = Mat::from_fn(8, 8, |i, j| C64::new(3.0 * u[i] * u[j], 0.0));
        let r1 = OperatorMatrix { m, ..id };
        for p in [1.0, 2.0, 7.5, f64::INFINITY] {
            assert!((schatten_norm(&r1, p).unwrap() - 3.0).abs() < 1e-10);
        }
    }
}
