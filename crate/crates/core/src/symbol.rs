use crate::error::{Error, Result};
use crate::grid::PhaseGrid;
use crate::C64;

/// Matrix-valued function on phase space, sampled on a [`PhaseGrid`].
///
/// Position samples sit at `r = eps * x` for the grid's state nodes `x`; momentum
/// samples sit at the grid's `xi` nodes. Values are stored with the position index
/// outermost, then the momentum index, then row, then column.
#[derive(Clone, Debug, PartialEq)]
pub struct Symbol {
    pub grid: PhaseGrid,
    pub eps: f64,
    pub n_out: usize,
    pub n_in: usize,
    pub values: Vec<C64>,
}

impl Symbol {
    pub fn zeros(grid: &PhaseGrid, eps: f64, n_out: usize, n_in: usize) -> Self {
        let len = grid.n_states() * grid.n_states() * n_out * n_in;
        Self { grid: grid.clone(), eps, n_out, n_in, values: vec![C64::new(0.0, 0.0); len] }
    }

    pub fn from_values(grid: &PhaseGrid, eps: f64, n_out: usize, n_in: usize, values: Vec<C64>) -> Result<Self> {
        let len = grid.n_states() * grid.n_states() * n_out * n_in;
        if values.len() != len {
            return Err(Error::Shape(format!("expected {len} values, got {}", values.len())));
        }
        Ok(Self { grid: grid.clone(), eps, n_out, n_in, values })
    }

    /// Samples `f(r, xi, out)` where `out` is the row-major fiber matrix to fill.
    pub fn from_fn<F>(grid: &PhaseGrid, eps: f64, n_out: usize, n_in: usize, f: F) -> Self
    where
        F: Fn(&[f64], &[f64], &mut [C64]),
    {
        let mut s = Self::zeros(grid, eps, n_out, n_in);
        let d = grid.d();
        let fib = n_out * n_in;
        let ns = grid.n_states();
        for ix in 0..ns {
            let x = grid.x_point(ix);
            let r = [eps * x[0], eps * x[1]];
            for ik in 0..ns {
                let xi = grid.xi_point(ik);
                let off = (ix * ns + ik) * fib;
                f(&r[..d], &xi[..d], &mut s.values[off..off + fib]);
            }
        }
        s
    }

    /// Scalar function times the `n x n` identity.
    pub fn scalar_fn<F>(grid: &PhaseGrid, eps: f64, n: usize, f: F) -> Self
    where
        F: Fn(&[f64], &[f64]) -> C64,
    {
        Self::from_fn(grid, eps, n, n, |r, xi, out| {
            let v = f(r, xi);
            for i in 0..n {
                out[i * n + i] = v;
            }
        })
    }

    pub fn identity(grid: &PhaseGrid, eps: f64, n: usize) -> Self {
        Self::scalar_fn(grid, eps, n, |_, _| C64::new(1.0, 0.0))
    }

    /// Constant matrix symbol (row-major `n_out x n_in`).
    pub fn constant(grid: &PhaseGrid, eps: f64, n_out: usize, n_in: usize, m: &[C64]) -> Self {
        Self::from_fn(grid, eps, n_out, n_in, |_, _, out| out.copy_from_slice(m))
    }

    pub fn fib(&self) -> usize {
        self.n_out * self.n_in
    }

    pub fn n_points(&self) -> usize {
        let ns = self.grid.n_states();
        ns * ns
    }

    /// Fiber matrix at position index `ix`, momentum index `ik`.
    pub fn at(&self, ix: usize, ik: usize) -> &[C64] {
        let fib = self.fib();
        let off = (ix * self.grid.n_states() + ik) * fib;
        &self.values[off..off + fib]
    }

    pub fn at_mut(&mut self, ix: usize, ik: usize) -> &mut [C64] {
        let fib = self.fib();
        let off = (ix * self.grid.n_states() + ik) * fib;
        &mut self.values[off..off + fib]
    }

    pub fn get(&self, ix: usize, ik: usize, row: usize, col: usize) -> C64 {
        self.at(ix, ik)[row * self.n_in + col]
    }

    /// Position sample `r = eps * x` of node `ix`.
    pub fn r_point(&self, ix: usize) -> [f64; 2] {
        let x = self.grid.x_point(ix);
        [self.eps * x[0], self.eps * x[1]]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    fn check_same(&self, other: &Symbol) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("symbols live on different grids".into()));
        }
        if self.eps != other.eps {
            return Err(Error::ScaleMismatch { symbol: other.eps, field: self.eps });
        }
        Ok(())
    }

    fn check_shape(&self, other: &Symbol) -> Result<()> {
        self.check_same(other)?;
        if self.n_out != other.n_out || self.n_in != other.n_in {
            return Err(Error::Composability(format!(
                "shapes {}x{} and {}x{} differ",
                self.n_out, self.n_in, other.n_out, other.n_in
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &Symbol) -> Result<Symbol> {
        self.check_shape(other)?;
        let mut out = self.clone();
        out.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a += b);
        Ok(out)
    }

    pub fn sub(&self, other: &Symbol) -> Result<Symbol> {
        self.check_shape(other)?;
        let mut out = self.clone();
        out.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a -= b);
        Ok(out)
    }

    pub fn scale(&self, c: C64) -> Symbol {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|a| *a *= c);
        out
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: C64, other: &Symbol) -> Result<()> {
        self.check_shape(other)?;
        self.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a += c * b);
        Ok(())
    }

    /// Adds `c * Id` to a square symbol.
    pub fn shift_identity(&self, c: C64) -> Result<Symbol> {
        if self.n_out != self.n_in {
            return Err(Error::Composability("identity shift needs a square symbol".into()));
        }
        let mut out = self.clone();
        let n = self.n_in;
        for chunk in out.values.chunks_mut(n * n) {
            for i in 0..n {
                chunk[i * n + i] += c;
            }
        }
        Ok(out)
    }

    /// Pointwise matrix product `self(X) other(X)`.
    pub fn pointwise_mul(&self, other: &Symbol) -> Result<Symbol> {
        self.check_same(other)?;
        if !composable(self, other) {
            return Err(Error::Composability(format!("n_in={} but n_out={}", self.n_in, other.n_out)));
        }
        let (p, q, r) = (self.n_out, self.n_in, other.n_in);
        let mut out = Symbol::zeros(&self.grid, self.eps, p, r);
        for ((o, a), b) in out
            .values
            .chunks_mut(p * r)
            .zip(self.values.chunks(p * q))
            .zip(other.values.chunks(q * r))
        {
            matmul_small(a, b, o, p, q, r);
        }
        Ok(out)
    }

    /// Pointwise fiber adjoint `f*(X) = f(X)^dagger`.
    pub fn adjoint(&self) -> Symbol {
        let (p, q) = (self.n_out, self.n_in);
        let mut out = Symbol::zeros(&self.grid, self.eps, q, p);
        for (o, a) in out.values.chunks_mut(p * q).zip(self.values.chunks(p * q)) {
            for i in 0..p {
                for j in 0..q {
                    o[j * p + i] = a[i * q + j].conj();
                }
            }
        }
        out
    }

    /// Maximum over grid points of the Frobenius norm of the fiber matrix.
    pub fn sup_norm(&self) -> f64 {
        self.values
            .chunks(self.fib())
            .map(|c| c.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Discrete phase-space `L^2` norm `( (dr dxi)^d sum |f|_F^2 )^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        let w = self.grid.phase_weight() * self.eps.powi(self.grid.d() as i32);
        (w * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// `sup |self - other| / sup |other|` (absolute when `other` vanishes).
    pub fn rel_diff(&self, other: &Symbol) -> Result<f64> {
        let diff = self.sub(other)?.sup_norm();
        let scale = other.sup_norm();
        Ok(if scale > 0.0 { diff / scale } else { diff })
    }

    pub fn max_abs_diff(&self, other: &Symbol) -> Result<f64> {
        Ok(self.sub(other)?.sup_norm())
    }
}

/// `f` and `g` compose as `f g` iff `f.n_in == g.n_out`.
pub fn composable(f: &Symbol, g: &Symbol) -> bool {
    f.n_in == g.n_out
}

pub(crate) fn matmul_small(a: &[C64], b: &[C64], o: &mut [C64], p: usize, q: usize, r: usize) {
    for i in 0..p {
        for k in 0..r {
            let mut s = C64::new(0.0, 0.0);
            for j in 0..q {
                s += a[i * q + j] * b[j * r + k];
            }
            o[i * r + k] = s;
        }
    }
}

/// Coefficients of a finite expansion `sum_n eps^n terms[n]`.
#[derive(Clone, Debug)]
pub struct FormalSeries {
    pub terms: Vec<Symbol>,
    pub eps: f64,
}

impl FormalSeries {
    pub fn new(terms: Vec<Symbol>, eps: f64) -> Result<Self> {
        if let Some(first) = terms.first() {
            for t in &terms[1..] {
                if t.grid != first.grid || t.n_out != first.n_out || t.n_in != first.n_in {
                    return Err(Error::Composability("series terms differ in shape".into()));
                }
            }
        }
        Ok(Self { terms, eps })
    }

    pub fn order(&self) -> usize {
        self.terms.len().saturating_sub(1)
    }

    /// `sum_{n <= upto} eps^n terms[n]`.
    pub fn partial_sum(&self, eps: f64, upto: usize) -> Result<Symbol> {
        let first = self.terms.first().ok_or_else(|| Error::Shape("empty series".into()))?;
        let mut acc = Symbol::zeros(&first.grid, first.eps, first.n_out, first.n_in);
        for (n, t) in self.terms.iter().enumerate().take(upto + 1) {
            acc.axpy(C64::new(eps.powi(n as i32), 0.0), t)?;
        }
        Ok(acc)
    }

    pub fn evaluate(&self, eps: f64) -> Result<Symbol> {
        self.partial_sum(eps, self.order())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn layout_and_sampling() {
        let g = PhaseGrid::new(1, 4, 2.0).unwrap();
        let s = Symbol::from_fn(&g, 0.5, 1, 2, |r, xi, out| {
            out[0] = c(r[0], 0.0);
            out[1] = c(xi[0], 0.0);
        });
        assert_eq!(s.get(0, 3, 0, 0).re, -1.0);
        assert_eq!(s.get(0, 3, 0, 1).re, g.xi_node(0, 3));
    }

    #[test]
    fn pointwise_product_order() {
        let g = PhaseGrid::new(1, 2, 1.0).unwrap();
        let a = Symbol::constant(&g, 1.0, 2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let b = Symbol::constant(&g, 1.0, 2, 2, &[c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]);
        let ab = a.pointwise_mul(&b).unwrap();
        let ba = b.pointwise_mul(&a).unwrap();
        assert_eq!(ab.at(0, 0)[0], c(1.0, 0.0));
        assert_eq!(ba.at(0, 0)[3], c(1.0, 0.0));
        assert!(ab.rel_diff(&ba).unwrap() > 0.5);
    }

    #[test]
    fn composability() {
        let g = PhaseGrid::new(1, 2, 1.0).unwrap();
        let a = Symbol::zeros(&g, 1.0, 3, 2);
        let b = Symbol::zeros(&g, 1.0, 2, 4);
        assert!(a.pointwise_mul(&b).is_ok());
        assert!(b.pointwise_mul(&a).is_err());
    }
}
