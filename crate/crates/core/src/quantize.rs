//! Magnetic Weyl quantization on the grid: kernel map, assembly, Wigner transform,
//! the Weyl system and the building-block operators.
//!
//! The discrete kernel map pairs every kernel entry `(a, b)` with the minimal-image lag
//! `s = b - a` and the half-node midpoint `c = 2a + s`. Symbols are interpolated
//! trigonometrically to the half-node grid, so the map is a bijection between grid
//! symbols and grid kernels and [`wigner`] inverts [`kernel_map`] to rounding.

use std::f64::consts::PI;

use faer::Mat;

use crate::error::{Error, Result};
use crate::fft::{fft_axis, refine_axis};
use crate::grid::PhaseGrid;
use crate::linalg;
use crate::magnetic::{MagneticData, ScalarField};
use crate::symbol::Symbol;
use crate::C64;

/// Integral kernel `K(x, y)` sampled on the state grid, layout `[x][y][row][col]`.
#[derive(Clone, Debug)]
pub struct OperatorKernel {
    pub grid: PhaseGrid,
    pub eps: f64,
    pub n_out: usize,
    pub n_in: usize,
    pub values: Vec<C64>,
    /// Set when a midpoint wrapped around the periodic box while carrying weight.
    pub truncation_warning: bool,
}

/// Dense matrix of an operator on the discretized `L^2(R^d, C^n)`; rows are `(x, row)`,
/// columns `(y, col)`, and the quadrature weight `dx^d` is included.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub grid: PhaseGrid,
    pub eps: f64,
    pub n_out: usize,
    pub n_in: usize,
    pub m: Mat<C64>,
}

pub(crate) fn check_scale(f_eps: f64, f_grid: &PhaseGrid, mag: &MagneticData) -> Result<()> {
    if f_eps != mag.eps {
        return Err(Error::ScaleMismatch { symbol: f_eps, field: mag.eps });
    }
    if f_grid.d() != mag.d {
        return Err(Error::GridMismatch(format!("grid has d={} but field has d={}", f_grid.d(), mag.d)));
    }
    Ok(())
}

/// Magnetic phase `exp(-i lambda/eps int_[eps x, eps (x + s dx)] A)` for every `(a, s)`,
/// laid out `[a][s]` with `s` stored modulo `n` per axis. `None` when the phase is trivial.
pub(crate) fn phase_table(grid: &PhaseGrid, mag: &MagneticData) -> Result<Option<Vec<C64>>> {
    if mag.is_trivial() {
        return Ok(None);
    }
    let d = grid.d();
    let ns = grid.n_states();
    let e = mag.eps;
    let mut table = vec![C64::new(1.0, 0.0); ns * ns];
    for a in 0..ns {
        let x = grid.x_point(a);
        let start = [e * x[0], e * x[1]];
        for sidx in 0..ns {
            let sm = grid.unravel(sidx);
            let mut end = start;
            for j in 0..d {
                let s = grid.min_image(j, sm[j] as isize);
                end[j] = e * (x[j] + s as f64 * grid.dx(j));
            }
            let li = mag.line_integral_a(&start[..d], &end[..d])?;
            table[a * ns + sidx] = C64::from_polar(1.0, -mag.lambda / e * li);
        }
    }
    Ok(Some(table))
}

/// Lag index (stored modulo `n`), midpoint index (modulo `2n`) and wrap flag for the pair `(a, b)`.
fn pair_indices(grid: &PhaseGrid, a: usize, b: usize) -> (usize, usize, bool) {
    let d = grid.d();
    let ai = grid.unravel(a);
    let bi = grid.unravel(b);
    let mut s_mod = [0usize; 2];
    let mut c = [0usize; 2];
    let mut wrapped = false;
    for j in 0..d {
        let n = grid.n(j) as isize;
        let s = grid.min_image(j, bi[j] as isize - ai[j] as isize);
        s_mod[j] = s.rem_euclid(n) as usize;
        let cj = 2 * ai[j] as isize + s;
        if cj < 0 || cj >= 2 * n {
            wrapped = true;
        }
        c[j] = cj.rem_euclid(2 * n) as usize;
    }
    let s_flat = grid.ravel(s_mod);
    let c_flat = if d == 1 { c[0] } else { c[0] * 2 * grid.n(1) + c[1] };
    (s_flat, c_flat, wrapped)
}

fn shape_of(grid: &PhaseGrid, fib: usize, refined: bool) -> Vec<usize> {
    let mut shape: Vec<usize> = grid.ns().iter().map(|n| if refined { 2 * n } else { *n }).collect();
    shape.extend_from_slice(grid.ns());
    shape.push(fib);
    shape
}

/// `F(c, s) = (2 pi)^{-d} int d eta e^{-i s dx eta} f(eps x_c / 2, eta)` on half-node midpoints `c`
/// (`2n` per axis) and lags `s` (stored modulo `n`), layout `[c][s][fib]`.
pub(crate) fn midpoint_lag_table(f: &Symbol) -> Vec<C64> {
    let grid = &f.grid;
    let d = grid.d();
    let fib = f.fib();
    let ns = grid.n_states();
    let mut data = f.values.clone();
    let mut shape = shape_of(grid, fib, false);
    for j in 0..d {
        let (r, s) = refine_axis(&data, &shape, j);
        data = r;
        shape = s;
    }
    for j in 0..d {
        fft_axis(&mut data, &shape, d + j, false);
    }
    let mut norm = 1.0;
    for j in 0..d {
        norm *= grid.dxi(j) / (2.0 * PI);
    }
    let signs: Vec<f64> = (0..ns)
        .map(|sidx| {
            let sm = grid.unravel(sidx);
            let odd = (0..d).filter(|&j| grid.min_image(j, sm[j] as isize).rem_euclid(2) == 1).count();
            if odd % 2 == 1 {
                -norm
            } else {
                norm
            }
        })
        .collect();
    for (blk, chunk) in data.chunks_mut(fib).enumerate() {
        let w = signs[blk % ns];
        chunk.iter_mut().for_each(|v| *v *= w);
    }
    data
}

/// Kernel `K(x,y) = e^{-i lambda/eps int_[eps x, eps y] A} (2 pi)^{-d} int d eta e^{-i (y-x) eta} f(eps (x+y)/2, eta)`.
pub fn kernel_map(f: &Symbol, mag: &MagneticData) -> Result<OperatorKernel> {
    check_scale(f.eps, &f.grid, mag)?;
    let grid = &f.grid;
    let fib = f.fib();
    let ns = grid.n_states();

    let data = midpoint_lag_table(f);
    let phases = phase_table(grid, mag)?;

    let mut values = vec![C64::new(0.0, 0.0); ns * ns * fib];
    let mut peak: f64 = 0.0;
    let mut wrapped_peak: f64 = 0.0;
    for a in 0..ns {
        for b in 0..ns {
            let (s_flat, c_flat, wrapped) = pair_indices(grid, a, b);
            let mut w = C64::new(1.0, 0.0);
            if let Some(p) = &phases {
                w *= p[a * ns + s_flat];
            }
            let src = (c_flat * ns + s_flat) * fib;
            let dst = (a * ns + b) * fib;
            for q in 0..fib {
                let v = w * data[src + q];
                values[dst + q] = v;
                let m = v.norm();
                peak = peak.max(m);
                if wrapped {
                    wrapped_peak = wrapped_peak.max(m);
                }
            }
        }
    }
    Ok(OperatorKernel {
        grid: grid.clone(),
        eps: f.eps,
        n_out: f.n_out,
        n_in: f.n_in,
        values,
        truncation_warning: wrapped_peak > 1e-10 * peak,
    })
}

/// Magnetic Wigner transform, the inverse of [`kernel_map`].
pub fn wigner(k: &OperatorKernel, mag: &MagneticData) -> Result<Symbol> {
    check_scale(k.eps, &k.grid, mag)?;
    let grid = &k.grid;
    let d = grid.d();
    let fib = k.n_out * k.n_in;
    let ns = grid.n_states();
    let phases = phase_table(grid, mag)?;

    let shape = shape_of(grid, fib, true);
    let n_c: usize = shape[..d].iter().product();
    let mut data = vec![C64::new(0.0, 0.0); n_c * ns * fib];
    for a in 0..ns {
        for b in 0..ns {
            let (s_flat, c_flat, _) = pair_indices(grid, a, b);
            let w = match &phases {
                Some(p) => p[a * ns + s_flat].conj(),
                None => C64::new(1.0, 0.0),
            };
            let src = (a * ns + b) * fib;
            let dst = (c_flat * ns + s_flat) * fib;
            for q in 0..fib {
                data[dst + q] = w * k.values[src + q];
            }
        }
    }
    // band-limited reconstruction in the midpoint variable
    for j in 0..d {
        fft_axis(&mut data, &shape, j, false);
        let n = grid.n(j);
        let stride: usize = shape[j + 1..].iter().product();
        let outer: usize = shape[..j].iter().product();
        let [plus, minus] = crate::fft::NYQUIST_SPLIT;
        for o in 0..outer {
            for q in 0..2 * n {
                // the split Nyquist pair is recovered with the conjugate weights
                let w = if q < n / 2 || q > 3 * n / 2 {
                    C64::new(1.0, 0.0)
                } else if q == n / 2 {
                    plus.conj()
                } else if q == 3 * n / 2 {
                    minus.conj()
                } else {
                    C64::new(0.0, 0.0)
                };
                let base = (o * 2 * n + q) * stride;
                let line = &mut data[base..base + stride];
                line.iter_mut().for_each(|v| *v *= w / n as f64);
            }
        }
        fft_axis(&mut data, &shape, j, true);
    }
    // even midpoints are the grid nodes
    let mut out = vec![C64::new(0.0, 0.0); ns * ns * fib];
    for a in 0..ns {
        let ai = grid.unravel(a);
        let c_flat = if d == 1 { 2 * ai[0] } else { 2 * ai[0] * 2 * grid.n(1) + 2 * ai[1] };
        for sidx in 0..ns {
            let sm = grid.unravel(sidx);
            let mut sign = 1.0;
            for j in 0..d {
                if grid.min_image(j, sm[j] as isize).rem_euclid(2) == 1 {
                    sign = -sign;
                }
            }
            let src = (c_flat * ns + sidx) * fib;
            let dst = (a * ns + sidx) * fib;
            for q in 0..fib {
                out[dst + q] = data[src + q] * sign;
            }
        }
    }
    let out_shape = shape_of(grid, fib, false);
    let mut norm = 1.0;
    for j in 0..d {
        fft_axis(&mut out, &out_shape, d + j, true);
        norm *= grid.dx(j);
    }
    out.iter_mut().for_each(|v| *v *= norm);
    Symbol::from_values(grid, k.eps, k.n_out, k.n_in, out)
}

/// Matrix of the integral operator, weight `dx^d` included.
pub fn assemble(k: &OperatorKernel) -> OperatorMatrix {
    let ns = k.grid.n_states();
    let (p, q) = (k.n_out, k.n_in);
    let w = k.grid.cell_volume();
    let m = Mat::from_fn(ns * p, ns * q, |i, j| {
        let (a, row) = (i / p, i % p);
        let (b, col) = (j / q, j % q);
        k.values[((a * ns + b) * p + row) * q + col] * w
    });
    OperatorMatrix { grid: k.grid.clone(), eps: k.eps, n_out: p, n_in: q, m }
}

/// Kernel of an operator matrix (the inverse of [`assemble`]).
pub fn kernel_of(op: &OperatorMatrix) -> OperatorKernel {
    let ns = op.grid.n_states();
    let (p, q) = (op.n_out, op.n_in);
    let w = 1.0 / op.grid.cell_volume();
    let mut values = vec![C64::new(0.0, 0.0); ns * ns * p * q];
    for a in 0..ns {
        for row in 0..p {
            for b in 0..ns {
                for col in 0..q {
                    values[((a * ns + b) * p + row) * q + col] = op.m[(a * p + row, b * q + col)] * w;
                }
            }
        }
    }
    OperatorKernel { grid: op.grid.clone(), eps: op.eps, n_out: p, n_in: q, values, truncation_warning: false }
}

/// `Op^A(f)` as a matrix.
pub fn quantize(f: &Symbol, mag: &MagneticData) -> Result<OperatorMatrix> {
    Ok(assemble(&kernel_map(f, mag)?))
}

/// Symbol of an operator matrix.
pub fn dequantize(op: &OperatorMatrix, mag: &MagneticData) -> Result<Symbol> {
    wigner(&kernel_of(op), mag)
}

impl OperatorMatrix {
    pub fn identity(grid: &PhaseGrid, eps: f64, n: usize) -> Self {
        Self { grid: grid.clone(), eps, n_out: n, n_in: n, m: linalg::identity(grid.n_states() * n) }
    }

    pub fn dim_out(&self) -> usize {
        self.m.nrows()
    }

    pub fn dim_in(&self) -> usize {
        self.m.ncols()
    }

    /// Operator product `self * other`.
    pub fn compose(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch("operators on different grids".into()));
        }
        if self.n_in != other.n_out {
            return Err(Error::Composability(format!("n_in={} but n_out={}", self.n_in, other.n_out)));
        }
        Ok(OperatorMatrix { grid: self.grid.clone(), eps: self.eps, n_out: self.n_out, n_in: other.n_in, m: &self.m * &other.m })
    }

    pub fn adjoint(&self) -> OperatorMatrix {
        OperatorMatrix { grid: self.grid.clone(), eps: self.eps, n_out: self.n_in, n_in: self.n_out, m: self.m.adjoint().to_owned() }
    }

    pub fn sub(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        if self.m.nrows() != other.m.nrows() || self.m.ncols() != other.m.ncols() {
            return Err(Error::Shape("operator sizes differ".into()));
        }
        Ok(OperatorMatrix { m: &self.m - &other.m, ..self.clone() })
    }

    pub fn add(&self, other: &OperatorMatrix) -> Result<OperatorMatrix> {
        if self.m.nrows() != other.m.nrows() || self.m.ncols() != other.m.ncols() {
            return Err(Error::Shape("operator sizes differ".into()));
        }
        Ok(OperatorMatrix { m: &self.m + &other.m, ..self.clone() })
    }

    pub fn scale(&self, c: C64) -> OperatorMatrix {
        let m = Mat::from_fn(self.m.nrows(), self.m.ncols(), |i, j| self.m[(i, j)] * c);
        OperatorMatrix { m, ..self.clone() }
    }

    /// `M + c Id` (square operators).
    pub fn shift_identity(&self, c: C64) -> OperatorMatrix {
        let mut m = self.m.clone();
        for i in 0..m.nrows().min(m.ncols()) {
            m[(i, i)] += c;
        }
        OperatorMatrix { m, ..self.clone() }
    }

    /// Operator norm (largest singular value, power iteration).
    pub fn norm(&self) -> f64 {
        linalg::op_norm(&self.m)
    }

    /// `||self - other|| / ||other||`, absolute when `other` vanishes.
    pub fn rel_diff(&self, other: &OperatorMatrix) -> Result<f64> {
        let num = self.sub(other)?.norm();
        let den = other.norm();
        Ok(if den > 0.0 { num / den } else { num })
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::new(0.0, 0.0); self.m.nrows()];
        for j in 0..self.m.ncols() {
            let col = self.m.col(j);
            for (i, o) in out.iter_mut().enumerate() {
                *o += col[i] * v[j];
            }
        }
        out
    }

    /// Relative deviation from Hermiticity `||M - M^dagger|| / ||M||`.
    pub fn hermiticity_defect(&self) -> f64 {
        let diff = &self.m - self.m.adjoint();
        let n = linalg::frobenius(&self.m);
        if n > 0.0 {
            linalg::frobenius(&diff) / n
        } else {
            0.0
        }
    }
}

/// Multiplication by `g(eps x)` on `n`-component states.
pub fn multiplication_operator(grid: &PhaseGrid, eps: f64, n: usize, g: impl Fn(&[f64]) -> C64) -> OperatorMatrix {
    let ns = grid.n_states();
    let d = grid.d();
    let mut m = Mat::<C64>::zeros(ns * n, ns * n);
    for a in 0..ns {
        let x = grid.x_point(a);
        let r = [eps * x[0], eps * x[1]];
        let v = g(&r[..d]);
        for i in 0..n {
            m[(a * n + i, a * n + i)] = v;
        }
    }
    OperatorMatrix { grid: grid.clone(), eps, n_out: n, n_in: n, m }
}

// ---------------------------------------------------------------------------
// Weyl system and building blocks

/// Translates a scalar grid function by `y` (state units) with periodic closure:
/// exact for lattice shifts, Fourier interpolation otherwise.
fn translate(grid: &PhaseGrid, psi: &[C64], y: &[f64]) -> Vec<C64> {
    let d = grid.d();
    let shape: Vec<usize> = grid.ns().to_vec();
    let mut out = psi.to_vec();
    for j in 0..d {
        let h = grid.dx(j);
        let steps = y[j] / h;
        let n = grid.n(j);
        if (steps - steps.round()).abs() < 1e-12 {
            let k = (steps.round() as isize).rem_euclid(n as isize) as usize;
            if k == 0 {
                continue;
            }
            crate::fft::map_lines(&mut out, &shape, j, |line| line.rotate_left(k));
        } else {
            fft_axis(&mut out, &shape, j, false);
            let stride: usize = shape[j + 1..].iter().product();
            let outer: usize = shape[..j].iter().product();
            for o in 0..outer {
                for q in 0..n {
                    let mode = crate::fft::signed_mode(q, n);
                    let ph = if 2 * mode.unsigned_abs() == n {
                        C64::new((PI * steps).cos(), 0.0)
                    } else {
                        C64::from_polar(1.0, 2.0 * PI * mode as f64 * steps / n as f64)
                    };
                    let base = (o * n + q) * stride;
                    for v in &mut out[base..base + stride] {
                        *v *= ph / n as f64;
                    }
                }
            }
            fft_axis(&mut out, &shape, j, true);
        }
    }
    out
}

/// `(W^A(y, eta) psi)(x) = e^{-i lambda/eps int_[eps x, eps x + eps y] A} e^{-i eps eta (x + y/2)} psi(x + y)`
/// for `psi` with `fib` components per node.
pub fn weyl_system_apply(grid: &PhaseGrid, y: &[f64], eta: &[f64], psi: &[C64], fib: usize, mag: &MagneticData) -> Result<Vec<C64>> {
    let ns = grid.n_states();
    let d = grid.d();
    if psi.len() != ns * fib {
        return Err(Error::Shape(format!("state has {} entries, expected {}", psi.len(), ns * fib)));
    }
    let e = mag.eps;
    let mut out = vec![C64::new(0.0, 0.0); psi.len()];
    for c in 0..fib {
        let comp: Vec<C64> = (0..ns).map(|a| psi[a * fib + c]).collect();
        let moved = translate(grid, &comp, y);
        for a in 0..ns {
            let x = grid.x_point(a);
            let mut ph = 0.0;
            for j in 0..d {
                ph -= e * eta[j] * (x[j] + y[j] / 2.0);
            }
            if !mag.is_trivial() {
                let start = [e * x[0], e * x[1]];
                let end = [e * (x[0] + y[0]), e * (x[1] + if d > 1 { y[1] } else { 0.0 })];
                ph -= mag.lambda / e * mag.line_integral_a(&start[..d], &end[..d])?;
            }
            out[a * fib + c] = moved[a] * C64::from_polar(1.0, ph);
        }
    }
    Ok(out)
}

/// `Q_j psi = eps x_j psi` on scalar states.
pub fn apply_position(grid: &PhaseGrid, eps: f64, j: usize, psi: &[C64]) -> Vec<C64> {
    psi.iter().enumerate().map(|(a, v)| v * (eps * grid.x_point(a)[j])).collect()
}

/// `P^A_j psi = -i d_j psi - lambda A_j(eps x) psi` with a spectral derivative.
pub fn apply_momentum(grid: &PhaseGrid, mag: &MagneticData, j: usize, psi: &[C64]) -> Result<Vec<C64>> {
    let mut dpsi = psi.to_vec();
    crate::fft::derivative_axis(&mut dpsi, grid.ns(), j, grid.dx(j));
    let d = grid.d();
    let mut out = Vec::with_capacity(psi.len());
    for (a, v) in dpsi.iter().enumerate() {
        let x = grid.x_point(a);
        let r = [mag.eps * x[0], mag.eps * x[1]];
        let aj = if mag.lambda == 0.0 { 0.0 } else { mag.potential(&r[..d])?[j] };
        out.push(C64::new(0.0, -1.0) * v - psi[a] * (mag.lambda * aj));
    }
    Ok(out)
}

/// Dense matrix of `P^A_j` on `n`-component states.
pub fn momentum_operator(grid: &PhaseGrid, mag: &MagneticData, j: usize, n: usize) -> Result<OperatorMatrix> {
    let ns = grid.n_states();
    let mut m = Mat::<C64>::zeros(ns * n, ns * n);
    let mut e = vec![C64::new(0.0, 0.0); ns];
    for b in 0..ns {
        e[b] = C64::new(1.0, 0.0);
        let col = apply_momentum(grid, mag, j, &e)?;
        e[b] = C64::new(0.0, 0.0);
        for a in 0..ns {
            for c in 0..n {
                m[(a * n + c, b * n + c)] = col[a];
            }
        }
    }
    Ok(OperatorMatrix { grid: grid.clone(), eps: mag.eps, n_out: n, n_in: n, m })
}

/// Dense matrix of `Q_j`.
pub fn position_operator(grid: &PhaseGrid, eps: f64, j: usize, n: usize) -> OperatorMatrix {
    multiplication_operator(grid, eps, n, |r| C64::new(r[j], 0.0))
}

/// Centered Gaussian of width `L_j / 8` per axis, optionally boosted by `exp(i k.x)`.
pub fn gaussian_state(grid: &PhaseGrid, boost: &[f64]) -> Vec<C64> {
    let d = grid.d();
    (0..grid.n_states())
        .map(|a| {
            let x = grid.x_point(a);
            let mut e = 0.0;
            let mut ph = 0.0;
            for j in 0..d {
                let w = grid.x_extent(j) / 8.0;
                e -= x[j] * x[j] / (2.0 * w * w);
                ph += boost.get(j).copied().unwrap_or(0.0) * x[j];
            }
            C64::from_polar(e.exp(), ph)
        })
        .collect()
}

/// Largest defects of the canonical commutation relations on interior test states.
#[derive(Clone, Debug, Default)]
pub struct CommutationReport {
    /// `max ||i[Q_j, Q_l] psi|| / ||psi||`
    pub qq: f64,
    /// `max ||i[P_j, Q_l] psi - eps delta_jl psi|| / ||psi||`
    pub pq: f64,
    /// `max ||i[P_j, P_l] psi - eps lambda B_jl(Q) psi|| / ||psi||`
    pub pp: f64,
}

fn vnorm(v: &[C64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Checks `i[Q_j,Q_l] = 0`, `i[P_j,Q_l] = eps delta_jl`, `i[P_j,P_l] = eps lambda B_jl(Q)`.
pub fn commutation_check(grid: &PhaseGrid, mag: &MagneticData) -> Result<CommutationReport> {
    let d = grid.d();
    if d != mag.d {
        return Err(Error::GridMismatch("grid and field dimensions differ".into()));
    }
    let e = mag.eps;
    let mut rep = CommutationReport::default();
    let boosts: [[f64; 2]; 3] = [[0.0, 0.0], [0.7, -0.4], [-1.3, 0.9]];
    let i = C64::new(0.0, 1.0);
    for boost in boosts {
        let psi = gaussian_state(grid, &boost[..d]);
        let np = vnorm(&psi);
        for j in 0..d {
            for l in 0..d {
                let qj_ql = apply_position(grid, e, j, &apply_position(grid, e, l, &psi));
                let ql_qj = apply_position(grid, e, l, &apply_position(grid, e, j, &psi));
                let r: Vec<C64> = qj_ql.iter().zip(&ql_qj).map(|(a, b)| i * (a - b)).collect();
                rep.qq = rep.qq.max(vnorm(&r) / np);

                let pq = apply_momentum(grid, mag, j, &apply_position(grid, e, l, &psi))?;
                let qp = apply_position(grid, e, l, &apply_momentum(grid, mag, j, &psi)?);
                let delta = if j == l { e } else { 0.0 };
                let r: Vec<C64> = pq.iter().zip(&qp).zip(&psi).map(|((a, b), p)| i * (a - b) - p * delta).collect();
                rep.pq = rep.pq.max(vnorm(&r) / np);

                let pjpl = apply_momentum(grid, mag, j, &apply_momentum(grid, mag, l, &psi)?)?;
                let plpj = apply_momentum(grid, mag, l, &apply_momentum(grid, mag, j, &psi)?)?;
                let mut r = Vec::with_capacity(psi.len());
                for a in 0..psi.len() {
                    let x = grid.x_point(a);
                    let rr = [e * x[0], e * x[1]];
                    let b = mag.field(&rr[..d])?[j][l];
                    r.push(i * (pjpl[a] - plpj[a]) - psi[a] * (e * mag.lambda * b));
                }
                rep.pp = rep.pp.max(vnorm(&r) / np);
            }
        }
    }
    Ok(rep)
}

/// `||Op^{A + eps d theta}(f) - e^{i lambda theta(Q)} Op^A(f) e^{-i lambda theta(Q)}|| / ||Op^A(f)||`.
pub fn gauge_covariance_defect(f: &Symbol, mag: &MagneticData, theta: &ScalarField) -> Result<f64> {
    if mag.gauge != ScalarField::Zero {
        return Err(Error::Capability("field already carries a gauge term".into()));
    }
    let lhs = quantize(f, &mag.with_gauge(theta.clone()))?;
    let op = quantize(f, mag)?;
    let grid = &f.grid;
    let ns = grid.n_states();
    let d = grid.d();
    let ph: Vec<C64> = (0..ns)
        .map(|a| {
            let x = grid.x_point(a);
            let r = [mag.eps * x[0], mag.eps * x[1]];
            C64::from_polar(1.0, mag.lambda * theta.value(&r[..d]))
        })
        .collect();
    let (p, q) = (f.n_out, f.n_in);
    let m = Mat::from_fn(ns * p, ns * q, |i, j| ph[i / p] * op.m[(i, j)] * ph[j / q].conj());
    let rhs = OperatorMatrix { m, ..op.clone() };
    let num = lhs.sub(&rhs)?.norm();
    let den = op.norm();
    Ok(if den > 0.0 { num / den } else { num })
}

/// `||Op^A(f)^dagger - Op^A(f*)|| / ||Op^A(f)||`.
pub fn adjoint_check(f: &Symbol, mag: &MagneticData) -> Result<f64> {
    let op = quantize(f, mag)?;
    let opa = quantize(&f.adjoint(), mag)?;
    let num = op.adjoint().sub(&opa)?.norm();
    let den = op.norm();
    Ok(if den > 0.0 { num / den } else { num })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::magnetic::FieldKind;

    #[test]
    fn wigner_inverts_kernel_map() {
        let g = PhaseGrid::new(1, 64, 8.0).unwrap();
        let mag = MagneticData::new(1, FieldKind::ConstantPotential { a: [0.3, 0.0] }, 1.0, 0.5).unwrap();
        let f = Symbol::from_fn(&g, 0.5, 2, 2, |r, xi, m| {
            m[0] = C64::new((-r[0] * r[0] - xi[0] * xi[0]).exp(), 0.0);
            m[1] = C64::new(0.0, r[0] * (-xi[0] * xi[0]).exp());
            m[2] = C64::new(xi[0].sin() * (-r[0] * r[0]).exp(), 0.0);
            m[3] = C64::new(1.0, 0.0);
        });
        let k = kernel_map(&f, &mag).unwrap();
        let back = wigner(&k, &mag).unwrap();
        assert!(back.max_abs_diff(&f).unwrap() < 1e-10);
    }

    #[test]
    fn gaussian_kernel_matches_closed_form() {
        let eps = 0.5;
        let g = PhaseGrid::new(1, 160, 20.0).unwrap();
        let a = 0.4;
        let mag = MagneticData::new(1, FieldKind::ConstantPotential { a: [a, 0.0] }, 1.0, eps).unwrap();
        let f = Symbol::scalar_fn(&g, eps, 1, |r, xi| C64::new((-r[0] * r[0] / 2.0 - xi[0] * xi[0] / 2.0).exp(), 0.0));
        let k = kernel_map(&f, &mag).unwrap();
        assert!(!k.truncation_warning);
        let n = 160;
        let mut err: f64 = 0.0;
        for ia in 0..n {
            for ib in 0..n {
                let (x, y) = (g.x_node(0, ia), g.x_node(0, ib));
                if (x - y).abs() > 6.0 || (x + y).abs() > 20.0 {
                    continue;
                }
                let m = eps * (x + y) / 2.0;
                let want = (-m * m / 2.0 - (y - x) * (y - x) / 2.0).exp() / (2.0 * PI).sqrt()
                    * C64::from_polar(1.0, -a * (y - x));
                err = err.max((k.values[ia * n + ib] - want).norm());
            }
        }
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn unit_and_position_symbols() {
        let g = PhaseGrid::new(2, 8, 3.0).unwrap();
        let mag = MagneticData::new(2, FieldKind::Constant { b: 0.7 }, 1.0, 1.0).unwrap();
        let one = Symbol::identity(&g, 1.0, 1);
        let op = quantize(&one, &mag).unwrap();
        assert!(op.rel_diff(&OperatorMatrix::identity(&g, 1.0, 1)).unwrap() < 1e-12);
        let v = Symbol::scalar_fn(&g, 1.0, 1, |r, _| C64::new(r[0].cos() + r[1], 0.0));
        let opv = quantize(&v, &mag).unwrap();
        let want = multiplication_operator(&g, 1.0, 1, |r| C64::new(r[0].cos() + r[1], 0.0));
        assert!(opv.rel_diff(&want).unwrap() < 1e-12);
    }

    #[test]
    fn scale_mismatch_is_rejected() {
        let g = PhaseGrid::new(1, 8, 3.0).unwrap();
        let mag = MagneticData::zero(1, 0.5).unwrap();
        let f = Symbol::identity(&g, 1.0, 1);
        assert!(matches!(kernel_map(&f, &mag), Err(Error::ScaleMismatch { .. })));
    }

    #[test]
    fn canonical_commutators() {
        let g = PhaseGrid::new(2, 64, 6.0).unwrap();
        let mag = MagneticData::new(2, FieldKind::Constant { b: 1.0 }, 1.0, 1.0).unwrap();
        let r = commutation_check(&g, &mag).unwrap();
        assert!(r.qq < 1e-14 && r.pq < 1e-8 && r.pp < 1e-8, "{r:?}");
    }

    #[test]
    fn lattice_weyl_shift_is_unitary() {
        let g = PhaseGrid::new(1, 32, 4.0).unwrap();
        let mag = MagneticData::new(1, FieldKind::ConstantPotential { a: [0.2, 0.0] }, 1.0, 1.0).unwrap();
        let psi = gaussian_state(&g, &[0.5]);
        let out = weyl_system_apply(&g, &[3.0 * g.dx(0)], &[0.8], &psi, 1, &mag).unwrap();
        assert!((vnorm(&out) - vnorm(&psi)).abs() < 1e-12);
    }
}
