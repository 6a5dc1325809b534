use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Periodic position box `[-L, L)` per axis together with its FFT-dual momentum grid.
///
/// The grid discretizes the state variable `x`. Symbols sampled on it place their
/// position samples at `r = eps * x` (see [`crate::Symbol`]).
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseGrid {
    d: usize,
    n: [usize; 2],
    l: [f64; 2],
}

impl PhaseGrid {
    /// Isotropic grid with `n` points per axis on `[-x_extent, x_extent)^d`.
    pub fn new(d: usize, n: usize, x_extent: f64) -> Result<Self> {
        Self::anisotropic(&vec![n; d], &vec![x_extent; d])
    }

    /// Grid with per-axis point counts and half-widths.
    pub fn anisotropic(n: &[usize], x_extent: &[f64]) -> Result<Self> {
        let d = n.len();
        if d == 0 || d > 2 || x_extent.len() != d {
            return Err(Error::Grid(format!("dimension {d} not supported (1 or 2)")));
        }
        let mut nn = [1usize; 2];
        let mut ll = [1.0f64; 2];
        for j in 0..d {
            if n[j] < 2 || n[j] % 2 != 0 {
                return Err(Error::Grid(format!("axis {j}: n={} must be even and >= 2", n[j])));
            }
            if !(x_extent[j].is_finite() && x_extent[j] > 0.0) {
                return Err(Error::Grid(format!("axis {j}: extent {} must be positive", x_extent[j])));
            }
            nn[j] = n[j];
            ll[j] = x_extent[j];
        }
        Ok(Self { d, n: nn, l: ll })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self, axis: usize) -> usize {
        self.n[axis]
    }

    pub fn ns(&self) -> &[usize] {
        &self.n[..self.d]
    }

    pub fn x_extent(&self, axis: usize) -> f64 {
        self.l[axis]
    }

    pub fn is_isotropic(&self) -> bool {
        self.d == 1 || (self.n[0] == self.n[1] && self.l[0] == self.l[1])
    }

    pub fn dx(&self, axis: usize) -> f64 {
        2.0 * self.l[axis] / self.n[axis] as f64
    }

    pub fn dxi(&self, axis: usize) -> f64 {
        PI / self.l[axis]
    }

    pub fn x_node(&self, axis: usize, i: usize) -> f64 {
        -self.l[axis] + i as f64 * self.dx(axis)
    }

    pub fn xi_node(&self, axis: usize, k: usize) -> f64 {
        (k as f64 - (self.n[axis] / 2) as f64) * self.dxi(axis)
    }

    pub fn x_nodes(&self, axis: usize) -> Vec<f64> {
        (0..self.n[axis]).map(|i| self.x_node(axis, i)).collect()
    }

    pub fn xi_nodes(&self, axis: usize) -> Vec<f64> {
        (0..self.n[axis]).map(|k| self.xi_node(axis, k)).collect()
    }

    /// Number of position nodes (the dimension of the discrete scalar state space).
    pub fn n_states(&self) -> usize {
        self.ns().iter().product()
    }

    /// Position-space cell volume `dx^d`.
    pub fn cell_volume(&self) -> f64 {
        (0..self.d).map(|j| self.dx(j)).product()
    }

    /// Phase-space quadrature weight `(dx dxi)^d`.
    pub fn phase_weight(&self) -> f64 {
        (0..self.d).map(|j| self.dx(j) * self.dxi(j)).product()
    }

    /// Splits a flat position (or momentum) index into per-axis indices.
    pub fn unravel(&self, idx: usize) -> [usize; 2] {
        if self.d == 1 {
            [idx, 0]
        } else {
            [idx / self.n[1], idx % self.n[1]]
        }
    }

    pub fn ravel(&self, i: [usize; 2]) -> usize {
        if self.d == 1 {
            i[0]
        } else {
            i[0] * self.n[1] + i[1]
        }
    }

    /// Position of flat node `idx` in state coordinates.
    pub fn x_point(&self, idx: usize) -> [f64; 2] {
        let i = self.unravel(idx);
        let mut p = [0.0; 2];
        for j in 0..self.d {
            p[j] = self.x_node(j, i[j]);
        }
        p
    }

    pub fn xi_point(&self, idx: usize) -> [f64; 2] {
        let k = self.unravel(idx);
        let mut p = [0.0; 2];
        for j in 0..self.d {
            p[j] = self.xi_node(j, k[j]);
        }
        p
    }

    /// Minimal image of an integer lag on axis `axis`, in `[-n/2, n/2)`.
    pub fn min_image(&self, axis: usize, lag: isize) -> isize {
        let n = self.n[axis] as isize;
        let h = n / 2;
        (lag + h).rem_euclid(n) - h
    }

    pub fn same_shape(&self, other: &PhaseGrid) -> bool {
        self == other
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duality_and_nodes() {
        let g = PhaseGrid::new(1, 128, 7.5).unwrap();
        assert!((g.dx(0) * g.dxi(0) * 128.0 - 2.0 * PI).abs() < 1e-12);
        assert_eq!(g.x_node(0, 0), -7.5);
        assert_eq!(g.xi_node(0, 64), 0.0);
        assert!((g.xi_node(0, 1) + g.xi_node(0, 127)).abs() < 1e-12);
    }

    #[test]
    fn rejects_odd_and_high_dim() {
        assert!(PhaseGrid::new(1, 7, 1.0).is_err());
        assert!(PhaseGrid::new(3, 8, 1.0).is_err());
        assert!(PhaseGrid::new(2, 8, -1.0).is_err());
    }

    #[test]
    fn min_image_range() {
        let g = PhaseGrid::new(1, 8, 1.0).unwrap();
        assert_eq!(g.min_image(0, 4), -4);
        assert_eq!(g.min_image(0, 3), 3);
        assert_eq!(g.min_image(0, -5), 3);
    }
}
