//! Symbol derivatives, operator-valued Hörmander seminorms and ellipticity.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::fft::{derivative_axis, map_lines};
use crate::linalg::{small_min_singular, small_op_norm};
use crate::symbol::Symbol;

/// A phase-space coordinate direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PhaseAxis {
    Position(usize),
    Momentum(usize),
}

/// How symbol derivatives are discretized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Fourth-order differences, central inside and one-sided near the box edges.
    #[default]
    FiniteDifference,
    /// Trigonometric (FFT) differentiation; assumes periodic or decaying data.
    Spectral,
}

pub(crate) fn symbol_shape(f: &Symbol) -> Vec<usize> {
    let mut shape = f.grid.ns().to_vec();
    shape.extend_from_slice(f.grid.ns());
    shape.push(f.fib());
    shape
}

fn axis_and_step(f: &Symbol, axis: PhaseAxis) -> (usize, f64) {
    let d = f.grid.d();
    match axis {
        PhaseAxis::Position(j) => (j, f.eps * f.grid.dx(j)),
        PhaseAxis::Momentum(j) => (d + j, f.grid.dxi(j)),
    }
}

fn fd4_line(line: &mut [crate::C64], h: f64) {
    let n = line.len();
    let v = line.to_vec();
    let s = 1.0 / (12.0 * h);
    for i in 0..n {
        line[i] = if i >= 2 && i + 2 < n {
            (v[i - 2] - v[i - 1] * 8.0 + v[i + 1] * 8.0 - v[i + 2]) * s
        } else if i < 2 {
            let o = if i == 0 { [-25.0, 48.0, -36.0, 16.0, -3.0] } else { [-3.0, -10.0, 18.0, -6.0, 1.0] };
            let b = 0;
            (v[b] * o[0] + v[b + 1] * o[1] + v[b + 2] * o[2] + v[b + 3] * o[3] + v[b + 4] * o[4]) * s
        } else {
            let o = if i == n - 1 { [25.0, -48.0, 36.0, -16.0, 3.0] } else { [3.0, 10.0, -18.0, 6.0, -1.0] };
            let b = n - 1;
            (v[b] * o[0] + v[b - 1] * o[1] + v[b - 2] * o[2] + v[b - 3] * o[3] + v[b - 4] * o[4]) * s
        };
    }
}

/// First derivative of `f` along `axis` (position derivatives are taken in `r = eps x`).
pub fn partial(f: &Symbol, axis: PhaseAxis, scheme: Scheme) -> Result<Symbol> {
    let d = f.grid.d();
    let j = match axis {
        PhaseAxis::Position(j) | PhaseAxis::Momentum(j) => j,
    };
    if j >= d {
        return Err(Error::Shape(format!("axis {j} in dimension {d}")));
    }
    let (ax, h) = axis_and_step(f, axis);
    let shape = symbol_shape(f);
    let mut out = f.clone();
    match scheme {
        Scheme::FiniteDifference => {
            if shape[ax] < 5 {
                return Err(Error::Grid("finite differences need at least 5 nodes per axis".into()));
            }
            map_lines(&mut out.values, &shape, ax, |line| fd4_line(line, h));
        }
        Scheme::Spectral => derivative_axis(&mut out.values, &shape, ax, h),
    }
    Ok(out)
}

/// `d_r^a d_xi^alpha f`.
pub fn partial_multi(f: &Symbol, a: &[usize], alpha: &[usize], scheme: Scheme) -> Result<Symbol> {
    let mut out = f.clone();
    for (j, &k) in a.iter().enumerate() {
        for _ in 0..k {
            out = partial(&out, PhaseAxis::Position(j), scheme)?;
        }
    }
    for (j, &k) in alpha.iter().enumerate() {
        for _ in 0..k {
            out = partial(&out, PhaseAxis::Momentum(j), scheme)?;
        }
    }
    Ok(out)
}

/// Japanese bracket `sqrt(1 + |xi|^2)`.
pub fn japanese(xi: &[f64]) -> f64 {
    (1.0 + xi.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

/// `sup <xi>^{-m + rho|alpha| - delta|a|} || d_r^a d_xi^alpha f ||_op` over the grid.
pub fn hoermander_seminorm(f: &Symbol, m: f64, rho: f64, delta: f64, a: &[usize], alpha: &[usize]) -> Result<f64> {
    let na: usize = a.iter().sum();
    let nal: usize = alpha.iter().sum();
    if na > 4 || nal > 4 {
        return Err(Error::Capability("derivative order above 4".into()));
    }
    let df = partial_multi(f, a, alpha, Scheme::FiniteDifference)?;
    let expo = -m + rho * nal as f64 - delta * na as f64;
    let ns = f.grid.n_states();
    let d = f.grid.d();
    let mut sup: f64 = 0.0;
    for ix in 0..ns {
        for ik in 0..ns {
            let xi = f.grid.xi_point(ik);
            let w = japanese(&xi[..d]).powf(expo);
            sup = sup.max(w * small_op_norm(df.at(ix, ik), f.n_out, f.n_in));
        }
    }
    Ok(sup)
}

/// Seminorm table for all `(a, alpha)` with `|a| + |alpha| <= order`.
#[derive(Clone, Debug)]
pub struct SeminormReport {
    pub m: f64,
    pub rho: f64,
    pub delta: f64,
    pub entries: BTreeMap<(Vec<usize>, Vec<usize>), f64>,
}

fn multi_indices(d: usize, total: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for t in 0..=total {
        if d == 1 {
            out.push(vec![t]);
        } else {
            for i in (0..=t).rev() {
                out.push(vec![i, t - i]);
            }
        }
    }
    out
}

pub fn seminorm_report(f: &Symbol, m: f64, rho: f64, delta: f64, order: usize) -> Result<SeminormReport> {
    let d = f.grid.d();
    let mut entries = BTreeMap::new();
    for a in multi_indices(d, order) {
        for alpha in multi_indices(d, order) {
            if a.iter().sum::<usize>() + alpha.iter().sum::<usize>() <= order {
                let v = hoermander_seminorm(f, m, rho, delta, &a, &alpha)?;
                entries.insert((a.clone(), alpha), v);
            }
        }
    }
    Ok(SeminormReport { m, rho, delta, entries })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ellipticity {
    pub elliptic: bool,
    /// `min sigma_min(f) / <xi>^m` over the test region.
    pub c: f64,
}

/// Lower bound `||f(x, xi) v|| >= C <xi>^m ||v||` over `|xi| >= R`.
pub fn ellipticity_check(f: &Symbol, m: f64, r: f64) -> Result<Ellipticity> {
    let ns = f.grid.n_states();
    let d = f.grid.d();
    let mut c = f64::INFINITY;
    let mut any = false;
    for ik in 0..ns {
        let xi = f.grid.xi_point(ik);
        let norm = xi[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < r {
            continue;
        }
        any = true;
        let w = japanese(&xi[..d]).powf(m);
        for ix in 0..ns {
            c = c.min(small_min_singular(f.at(ix, ik), f.n_out, f.n_in) / w);
        }
    }
    if !any {
        return Err(Error::NoTestRegion(format!("no momentum node with |xi| >= {r}")));
    }
    Ok(Ellipticity { elliptic: c > 0.0, c })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{PhaseGrid, C64};

    #[test]
    fn fd4_is_exact_on_quartics() {
        let g = PhaseGrid::new(1, 16, 4.0).unwrap();
        let f = Symbol::scalar_fn(&g, 1.0, 1, |r, xi| C64::new(r[0].powi(4) + xi[0].powi(3), 0.0));
        let dr = partial(&f, PhaseAxis::Position(0), Scheme::FiniteDifference).unwrap();
        let dxi = partial(&f, PhaseAxis::Momentum(0), Scheme::FiniteDifference).unwrap();
        for ix in 0..16 {
            for ik in 0..16 {
                let r = f.r_point(ix)[0];
                let xi = g.xi_node(0, ik);
                assert!((dr.get(ix, ik, 0, 0).re - 4.0 * r.powi(3)).abs() < 1e-9);
                assert!((dxi.get(ix, ik, 0, 0).re - 3.0 * xi * xi).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn momentum_coordinate_seminorm() {
        let g = PhaseGrid::new(1, 16, 4.0).unwrap();
        let f = Symbol::scalar_fn(&g, 1.0, 1, |_, xi| C64::new(xi[0], 0.0));
        assert!((hoermander_seminorm(&f, 1.0, 1.0, 0.0, &[0], &[1]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn radius_outside_grid_has_no_region() {
        let g = PhaseGrid::new(1, 8, 4.0).unwrap();
        let f = Symbol::identity(&g, 1.0, 1);
        assert!(matches!(ellipticity_check(&f, 0.0, 100.0), Err(Error::NoTestRegion(_))));
    }
}
