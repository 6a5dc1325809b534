//! Equivariant layer: lattices and their duals, group actions on fibers, the Zak
//! transform, Bloch fiber operators, equivariant symbols and their quantization on a
//! finite momentum cover.
//!
//! Conventions. Reciprocal shifts are written `gamma* = sum_j j_j e*_j` with an integer
//! multi-index `j`. A symbol is equivariant when
//! `f(r, k - gamma*) = tau_out(gamma*) f(r, k) tau_in(gamma*)^{-1}`, and a fiber vector
//! when `psi(k - gamma*) = tau(gamma*) psi(k)`.
//!
//! The momentum cover is the momentum axis of a [`PhaseGrid`] with `n_c * n_k` nodes per
//! axis and spacing `e* / n_k`; the central `n_k` nodes form the Brillouin cell.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use faer::Mat;

use crate::error::{Error, Result};
use crate::fft::centered_dft_axis;
use crate::funcalc::moyal_resolvent;
use crate::grid::PhaseGrid;
use crate::linalg::{small_inverse, small_op_norm};
use crate::magnetic::MagneticData;
use crate::moyal::weyl_product_exact;
use crate::quantize::{quantize, OperatorMatrix};
use crate::stats::linear_fit;
use crate::symbol::{matmul_small, Symbol};
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

fn unravel(idx: usize, n: usize, d: usize) -> [usize; 2] {
    if d == 1 {
        [idx, 0]
    } else {
        [idx / n, idx % n]
    }
}

fn ravel(i: [usize; 2], n: usize, d: usize) -> usize {
    if d == 1 {
        i[0]
    } else {
        i[0] * n + i[1]
    }
}

fn dot(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn japanese2(v: &[f64; 2]) -> f64 {
    (1.0 + dot(v, v)).sqrt()
}

/// Bravais lattice `Gamma` with its dual `Gamma*` (`e_j . e*_l = 2 pi delta_jl`) and the
/// sampling used by the equivariant layer.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    d: usize,
    gens: [[f64; 2]; 2],
    duals: [[f64; 2]; 2],
    n_k: usize,
    n_y: usize,
    n_c: usize,
}

impl Lattice {
    /// `n_k` Brillouin nodes and `n_y` torus nodes per axis, `n_c` (odd) cells in the
    /// momentum cover.
    pub fn new(generators: &[[f64; 2]], n_k: usize, n_y: usize, n_c: usize) -> Result<Self> {
        let d = generators.len();
        if d == 0 || d > 2 {
            return Err(Error::Grid(format!("lattice dimension {d} not supported")));
        }
        if n_k < 2 || n_k % 2 != 0 {
            return Err(Error::Grid(format!("n_k={n_k} must be even and >= 2")));
        }
        if n_y == 0 {
            return Err(Error::Grid("n_y must be positive".into()));
        }
        if n_c % 2 == 0 {
            return Err(Error::Grid(format!("cover count n_c={n_c} must be odd")));
        }
        let mut gens = [[0.0; 2]; 2];
        let mut duals = [[0.0; 2]; 2];
        if d == 1 {
            let a = generators[0][0];
            if a == 0.0 || !a.is_finite() {
                return Err(Error::Grid("degenerate generator".into()));
            }
            gens[0] = [a, 0.0];
            duals[0] = [2.0 * PI / a, 0.0];
        } else {
            let (e1, e2) = (generators[0], generators[1]);
            let det = e1[0] * e2[1] - e1[1] * e2[0];
            if det.abs() < 1e-14 || !det.is_finite() {
                return Err(Error::Grid("degenerate generators".into()));
            }
            gens = [e1, e2];
            let s = 2.0 * PI / det;
            duals[0] = [s * e2[1], -s * e2[0]];
            duals[1] = [-s * e1[1], s * e1[0]];
        }
        Ok(Self { d, gens, duals, n_k, n_y, n_c })
    }

    /// Lattice `a Z^d`.
    pub fn cubic(d: usize, a: f64, n_k: usize, n_y: usize, n_c: usize) -> Result<Self> {
        let gens: Vec<[f64; 2]> = (0..d).map(|j| if j == 0 { [a, 0.0] } else { [0.0, a] }).collect();
        Self::new(&gens, n_k, n_y, n_c)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn generator(&self, j: usize) -> [f64; 2] {
        self.gens[j]
    }

    pub fn dual(&self, j: usize) -> [f64; 2] {
        self.duals[j]
    }

    pub fn n_k(&self) -> usize {
        self.n_k
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }

    /// `max_{j,l} |e_j . e*_l - 2 pi delta_jl|`.
    pub fn duality_defect(&self) -> f64 {
        let mut m: f64 = 0.0;
        for j in 0..self.d {
            for l in 0..self.d {
                let want = if j == l { 2.0 * PI } else { 0.0 };
                m = m.max((dot(&self.gens[j], &self.duals[l]) - want).abs());
            }
        }
        m
    }

    pub fn n_bz(&self) -> usize {
        self.n_k.pow(self.d as u32)
    }

    pub fn n_torus(&self) -> usize {
        self.n_y.pow(self.d as u32)
    }

    /// Brillouin node `idx` in dual coordinates, each in `[-1/2, 1/2)`.
    pub fn bz_coords(&self, idx: usize) -> [f64; 2] {
        let i = unravel(idx, self.n_k, self.d);
        let mut c = [0.0; 2];
        for j in 0..self.d {
            c[j] = (i[j] as f64 - (self.n_k / 2) as f64) / self.n_k as f64;
        }
        c
    }

    pub fn bz_point(&self, idx: usize) -> [f64; 2] {
        self.from_dual_coords(self.bz_coords(idx))
    }

    /// Torus node `idx` (cell coordinates `l / n_y` in `[0, 1)`).
    pub fn torus_point(&self, idx: usize) -> [f64; 2] {
        let l = unravel(idx, self.n_y, self.d);
        let mut p = [0.0; 2];
        for j in 0..self.d {
            let t = l[j] as f64 / self.n_y as f64;
            p[0] += t * self.gens[j][0];
            p[1] += t * self.gens[j][1];
        }
        p
    }

    pub fn lattice_point(&self, g: [i64; 2]) -> [f64; 2] {
        let mut p = [0.0; 2];
        for j in 0..self.d {
            p[0] += g[j] as f64 * self.gens[j][0];
            p[1] += g[j] as f64 * self.gens[j][1];
        }
        p
    }

    pub fn reciprocal_point(&self, j: [i64; 2]) -> [f64; 2] {
        self.from_dual_coords([j[0] as f64, j[1] as f64])
    }

    fn from_dual_coords(&self, c: [f64; 2]) -> [f64; 2] {
        let mut p = [0.0; 2];
        for j in 0..self.d {
            p[0] += c[j] * self.duals[j][0];
            p[1] += c[j] * self.duals[j][1];
        }
        p
    }

    fn axis_aligned(&self) -> Result<()> {
        if self.d == 2 && (self.gens[0][1] != 0.0 || self.gens[1][0] != 0.0) {
            return Err(Error::Capability("momentum covers need axis-aligned generators".into()));
        }
        Ok(())
    }

    /// Phase grid whose momentum axis is the `n_c`-cell cover (`n_c n_k` nodes per axis,
    /// spacing `e*/n_k`).
    pub fn cover_grid(&self) -> Result<PhaseGrid> {
        self.axis_aligned()?;
        let n: Vec<usize> = vec![self.n_c * self.n_k; self.d];
        let l: Vec<f64> = (0..self.d).map(|j| self.n_k as f64 * self.gens[j][j].abs() / 2.0).collect();
        PhaseGrid::anisotropic(&n, &l)
    }

    /// Grid of a single cell: momentum nodes are the Brillouin nodes.
    pub fn cell_grid(&self) -> Result<PhaseGrid> {
        self.axis_aligned()?;
        let n: Vec<usize> = vec![self.n_k; self.d];
        let l: Vec<f64> = (0..self.d).map(|j| self.n_k as f64 * self.gens[j][j].abs() / 2.0).collect();
        PhaseGrid::anisotropic(&n, &l)
    }

    /// All shifts `j` with `|j_i| <= range`.
    pub fn shifts(&self, range: i64) -> Vec<[i64; 2]> {
        let mut out = Vec::new();
        for a in -range..=range {
            if self.d == 1 {
                out.push([a, 0]);
            } else {
                for b in -range..=range {
                    out.push([a, b]);
                }
            }
        }
        out
    }

    /// Plane-wave mode indices `|m_i| <= m_cut`, row-major.
    pub fn modes(&self, m_cut: usize) -> Vec<[i64; 2]> {
        self.shifts(m_cut as i64)
    }

    /// Cell offset and local index of cover node `i` on one axis.
    fn cover_cell(&self, i: usize) -> (i64, usize) {
        ((i / self.n_k) as i64 - (self.n_c as i64 - 1) / 2, i % self.n_k)
    }

    fn cover_node(&self, cell: i64, local: usize) -> usize {
        ((cell + (self.n_c as i64 - 1) / 2) as usize) * self.n_k + local
    }
}

// ---------------------------------------------------------------------------
// Zak transform

/// Samples `psi(k, y)` on Brillouin nodes times torus nodes, layout `[k][y]`.
#[derive(Clone, Debug)]
pub struct BlochFunction {
    pub d: usize,
    pub n_k: usize,
    pub n_y: usize,
    pub values: Vec<C64>,
}

impl BlochFunction {
    pub fn at(&self, k: usize, y: usize) -> C64 {
        self.values[k * self.n_y.pow(self.d as u32) + y]
    }

    /// `(n_k^{-d} sum_k sum_y |psi|^2)^{1/2}`, the norm under which the transform is unitary.
    pub fn norm(&self) -> f64 {
        let s: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        (s / self.n_k.pow(self.d as u32) as f64).sqrt()
    }
}

fn check_patch(psi: &[C64], lat: &Lattice) -> Result<()> {
    let want = lat.n_bz() * lat.n_torus();
    if psi.len() != want {
        return Err(Error::Shape(format!("expected {want} samples (n_k^d cells x n_y^d), got {}", psi.len())));
    }
    Ok(())
}

fn patch_cell(lat: &Lattice, g: usize) -> [i64; 2] {
    let i = unravel(g, lat.n_k, lat.d);
    let h = (lat.n_k / 2) as i64;
    [i[0] as i64 - h, if lat.d == 2 { i[1] as i64 - h } else { 0 }]
}

/// `(Z Psi)(k, y) = sum_gamma e^{-i k.(y + gamma)} Psi(y + gamma)` at an arbitrary `k`.
///
/// `psi` is sampled on a patch of `n_k^d` cells with periodic closure, layout
/// `[cell][torus node]`; cell `g` sits at `gamma = sum_j (g_j - n_k/2) e_j`.
pub fn zak_at(psi: &[C64], lat: &Lattice, k: &[f64]) -> Result<Vec<C64>> {
    check_patch(psi, lat)?;
    let kk = [k[0], if lat.d == 2 { k[1] } else { 0.0 }];
    let nt = lat.n_torus();
    let mut out = vec![ZERO; nt];
    for g in 0..lat.n_bz() {
        let gamma = lat.lattice_point(patch_cell(lat, g));
        for (y, o) in out.iter_mut().enumerate() {
            let yp = lat.torus_point(y);
            let arg = -(kk[0] * (yp[0] + gamma[0]) + kk[1] * (yp[1] + gamma[1]));
            *o += C64::from_polar(1.0, arg) * psi[g * nt + y];
        }
    }
    Ok(out)
}

/// Zak transform on the Brillouin nodes.
pub fn zak_transform(psi: &[C64], lat: &Lattice) -> Result<BlochFunction> {
    check_patch(psi, lat)?;
    let mut values = Vec::with_capacity(psi.len());
    for k in 0..lat.n_bz() {
        values.extend(zak_at(psi, lat, &lat.bz_point(k))?);
    }
    Ok(BlochFunction { d: lat.d, n_k: lat.n_k, n_y: lat.n_y, values })
}

/// Inverse (adjoint) transform `Psi(y + gamma) = n_k^{-d} sum_k e^{i k.(y + gamma)} psi(k, y)`.
pub fn inverse_zak(f: &BlochFunction, lat: &Lattice) -> Result<Vec<C64>> {
    if f.d != lat.d || f.n_k != lat.n_k || f.n_y != lat.n_y {
        return Err(Error::Shape("Bloch function does not match the lattice sampling".into()));
    }
    let nt = lat.n_torus();
    let nb = lat.n_bz();
    let mut out = vec![ZERO; nb * nt];
    for g in 0..nb {
        let gamma = lat.lattice_point(patch_cell(lat, g));
        for y in 0..nt {
            let yp = lat.torus_point(y);
            let mut s = ZERO;
            for k in 0..nb {
                let kp = lat.bz_point(k);
                let arg = kp[0] * (yp[0] + gamma[0]) + kp[1] * (yp[1] + gamma[1]);
                s += C64::from_polar(1.0, arg) * f.values[k * nt + y];
            }
            out[g * nt + y] = s / nb as f64;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Periodic fields and fiber operators

/// Lattice-periodic function `sum_g c_g e^{i G_g . y}`, `G_g = sum_j g_j e*_j`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PeriodicField {
    pub coeffs: Vec<([i64; 2], C64)>,
}

impl PeriodicField {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self { coeffs: vec![([0, 0], C64::new(c, 0.0))] }
    }

    /// `2 amp cos(G_g . y)`.
    pub fn cosine(amp: f64, g: [i64; 2]) -> Self {
        Self { coeffs: vec![(g, C64::new(amp, 0.0)), ([-g[0], -g[1]], C64::new(amp, 0.0))] }
    }

    pub fn coeff(&self, g: [i64; 2]) -> C64 {
        self.coeffs.iter().filter(|(h, _)| *h == g).map(|(_, c)| *c).sum()
    }

    pub fn value(&self, lat: &Lattice, y: &[f64]) -> C64 {
        let yy = [y[0], if lat.d == 2 { y[1] } else { 0.0 }];
        self.coeffs
            .iter()
            .map(|(g, c)| *c * C64::from_polar(1.0, dot(&lat.reciprocal_point(*g), &yy)))
            .sum()
    }
}

/// `H_per(k) = (-i grad + k - A0)^2 + V` in the plane-wave basis `|m_i| <= m_cut`, as a
/// row-major Hermitian matrix.
pub fn fiber_operator(lat: &Lattice, v: &PeriodicField, a0: Option<&[PeriodicField]>, k: &[f64], m_cut: usize) -> Result<Vec<C64>> {
    let d = lat.d;
    if k.len() != d {
        return Err(Error::Shape(format!("k has {} components, lattice has d={d}", k.len())));
    }
    if let Some(a) = a0 {
        if a.len() != d {
            return Err(Error::Shape("A0 needs one periodic component per axis".into()));
        }
    }
    let modes = lat.modes(m_cut);
    let nm = modes.len();
    let mut h = vec![ZERO; nm * nm];
    for j in 0..d {
        let mut dj = vec![ZERO; nm * nm];
        for (r, mr) in modes.iter().enumerate() {
            let g = lat.reciprocal_point(*mr);
            dj[r * nm + r] += C64::new(g[j] + k[j], 0.0);
            if let Some(a) = a0 {
                for (c, mc) in modes.iter().enumerate() {
                    dj[r * nm + c] -= a[j].coeff([mr[0] - mc[0], mr[1] - mc[1]]);
                }
            }
        }
        let mut sq = vec![ZERO; nm * nm];
        matmul_small(&dj, &dj, &mut sq, nm, nm, nm);
        h.iter_mut().zip(&sq).for_each(|(a, b)| *a += b);
    }
    for (r, mr) in modes.iter().enumerate() {
        for (c, mc) in modes.iter().enumerate() {
            h[r * nm + c] += v.coeff([mr[0] - mc[0], mr[1] - mc[1]]);
        }
    }
    Ok(h)
}

/// `<G_m>^s` for the plane-wave modes `|m_i| <= m_cut`: the diagonal of the `H^s` weight.
pub fn sobolev_weight(lat: &Lattice, m_cut: usize, s: f64) -> Vec<f64> {
    lat.modes(m_cut).iter().map(|m| japanese2(&lat.reciprocal_point(*m)).powf(s)).collect()
}

// ---------------------------------------------------------------------------
// Group actions

#[derive(Clone, Debug)]
struct Element {
    tau: Vec<C64>,
    tau_inv: Vec<C64>,
    exact: Vec<bool>,
}

/// Representation `gamma* -> tau(gamma*)` on a fiber of dimension `dim`, tabulated for
/// `|j_i| <= range`, with the weight that defines its norm and the fitted order.
#[derive(Clone, Debug)]
pub struct GroupAction {
    pub d: usize,
    pub dim: usize,
    pub range: i64,
    elements: BTreeMap<[i64; 2], Element>,
    reciprocal: Vec<([i64; 2], [f64; 2])>,
    weight: Vec<f64>,
    /// Fitted growth order `q` of `||tau(gamma*)|| <= C <gamma*>^q`.
    pub q: f64,
    pub c: f64,
}

/// Result of [`tau_order_estimate`].
#[derive(Clone, Copy, Debug)]
pub struct TauOrder {
    pub q: f64,
    pub c: f64,
}

impl GroupAction {
    fn build(lat: &Lattice, dim: usize, range: i64, weight: Vec<f64>, mut make: impl FnMut([i64; 2], [f64; 2]) -> Result<Element>) -> Result<Self> {
        let mut elements = BTreeMap::new();
        let mut reciprocal = Vec::new();
        for j in lat.shifts(range) {
            let g = lat.reciprocal_point(j);
            let e = make(j, g)?;
            if e.tau.len() != dim * dim || e.tau_inv.len() != dim * dim {
                return Err(Error::Shape(format!("tau({j:?}) is not {dim}x{dim}")));
            }
            elements.insert(j, e);
            reciprocal.push((j, g));
        }
        let mut act = Self { d: lat.d, dim, range, elements, reciprocal, weight, q: 0.0, c: 1.0 };
        let est = tau_order_estimate(&act);
        act.q = est.q;
        act.c = est.c;
        Ok(act)
    }

    /// Action given by `f(j, gamma*)`; inverses by dense inversion, all entries exact.
    pub fn from_fn(lat: &Lattice, dim: usize, range: i64, f: impl Fn([i64; 2], [f64; 2]) -> Vec<C64>) -> Result<Self> {
        Self::build(lat, dim, range, vec![1.0; dim], |j, g| {
            let tau = f(j, g);
            if tau.len() != dim * dim {
                return Err(Error::Shape(format!("tau({j:?}) is not {dim}x{dim}")));
            }
            let tau_inv = small_inverse(&tau, dim);
            if tau_inv.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
                return Err(Error::NotInvertible(f64::INFINITY));
            }
            Ok(Element { tau, tau_inv, exact: vec![true; dim] })
        })
    }

    /// `tau = Id` on every shift, covering the lattice's momentum cover.
    pub fn trivial(lat: &Lattice, dim: usize) -> Result<Self> {
        let range = lat.n_c as i64 - 1;
        Self::from_fn(lat, dim, range, |_, _| identity(dim))
    }

    /// Multiplication by `e^{i gamma* . y}` on plane waves `|m_i| <= m_cut`, i.e. the mode
    /// shift `(tau psi)_m = psi_{m - j}`. Modes within `margin` of the truncation, or
    /// shifted from outside it, are flagged inexact.
    pub fn mode_shift(lat: &Lattice, m_cut: usize, margin: usize, range: i64) -> Result<Self> {
        let modes = lat.modes(m_cut);
        let dim = modes.len();
        let index: BTreeMap<[i64; 2], usize> = modes.iter().enumerate().map(|(i, m)| (*m, i)).collect();
        let inner = m_cut as i64 - margin as i64;
        let inside = |m: [i64; 2]| m[0].abs() <= inner && m[1].abs() <= inner;
        Self::build(lat, dim, range, vec![1.0; dim], |j, _| {
            let mut tau = vec![ZERO; dim * dim];
            let mut tau_inv = vec![ZERO; dim * dim];
            let mut exact = vec![false; dim];
            for (r, m) in modes.iter().enumerate() {
                let src = [m[0] - j[0], m[1] - j[1]];
                if let Some(&c) = index.get(&src) {
                    tau[r * dim + c] = ONE;
                    tau_inv[c * dim + r] = ONE;
                }
                exact[r] = inside(*m) && inside(src);
            }
            Ok(Element { tau, tau_inv, exact })
        })
    }

    /// Multiplication by `e^{i gamma* . y_l}` on the torus nodes (exactly unitary).
    pub fn torus_phase(lat: &Lattice, range: i64) -> Result<Self> {
        let nt = lat.n_torus();
        let ys: Vec<[f64; 2]> = (0..nt).map(|l| lat.torus_point(l)).collect();
        Self::build(lat, nt, range, vec![1.0; nt], |_, g| {
            let mut tau = vec![ZERO; nt * nt];
            let mut tau_inv = vec![ZERO; nt * nt];
            for (l, y) in ys.iter().enumerate() {
                let ph = C64::from_polar(1.0, dot(&g, y));
                tau[l * nt + l] = ph;
                tau_inv[l * nt + l] = ph.conj();
            }
            Ok(Element { tau, tau_inv, exact: vec![true; nt] })
        })
    }

    /// Measures norms in the weighted space `||W psi||`, `W = diag(weight)`.
    pub fn with_weight(mut self, weight: Vec<f64>) -> Result<Self> {
        if weight.len() != self.dim || weight.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::Shape("weight must be positive with one entry per fiber mode".into()));
        }
        self.weight = weight;
        let est = tau_order_estimate(&self);
        self.q = est.q;
        self.c = est.c;
        Ok(self)
    }

    pub fn tau(&self, j: [i64; 2]) -> Option<&[C64]> {
        self.elements.get(&j).map(|e| e.tau.as_slice())
    }

    pub fn tau_inv(&self, j: [i64; 2]) -> Option<&[C64]> {
        self.elements.get(&j).map(|e| e.tau_inv.as_slice())
    }

    /// Fiber indices on which `tau(j)` acts without truncation loss.
    pub fn exact_rows(&self, j: [i64; 2]) -> Option<&[bool]> {
        self.elements.get(&j).map(|e| e.exact.as_slice())
    }

    /// `||W tau(j) W^{-1}||`.
    pub fn weighted_norm(&self, j: [i64; 2]) -> Option<f64> {
        let t = self.tau(j)?;
        let n = self.dim;
        let m: Vec<C64> = (0..n * n).map(|i| t[i] * (self.weight[i / n] / self.weight[i % n])).collect();
        Some(small_op_norm(&m, n, n))
    }

    /// `max ||tau(a + b) - tau(a) tau(b)||` over tabulated pairs, restricted to exact rows.
    pub fn homomorphism_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        let mut prod = vec![ZERO; n * n];
        for (a, ea) in &self.elements {
            for (b, eb) in &self.elements {
                let s = [a[0] + b[0], a[1] + b[1]];
                let Some(es) = self.elements.get(&s) else { continue };
                matmul_small(&ea.tau, &eb.tau, &mut prod, n, n, n);
                for r in 0..n {
                    if !(es.exact[r] && ea.exact[r]) {
                        continue;
                    }
                    for c in 0..n {
                        worst = worst.max((prod[r * n + c] - es.tau[r * n + c]).norm());
                    }
                }
            }
        }
        worst
    }
}

fn identity(n: usize) -> Vec<C64> {
    let mut m = vec![ZERO; n * n];
    for i in 0..n {
        m[i * n + i] = ONE;
    }
    m
}

/// Least-squares fit of `ln ||tau(gamma*)||` against `q ln <gamma*>` over the nonzero
/// tabulated shifts; `C` is the smallest constant making the bound hold on the table.
pub fn tau_order_estimate(tau: &GroupAction) -> TauOrder {
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (j, g) in &tau.reciprocal {
        if j[0] == 0 && j[1] == 0 {
            continue;
        }
        if let Some(nrm) = tau.weighted_norm(*j) {
            x.push(japanese2(g).ln());
            y.push(nrm.ln());
        }
    }
    let distinct = x.iter().any(|v| (v - x[0]).abs() > 1e-12);
    if x.len() < 2 || !distinct {
        let c = y.iter().cloned().fold(0.0f64, f64::max).exp();
        return TauOrder { q: 0.0, c };
    }
    let (q, _) = linear_fit(&x, &y);
    let c = x.iter().zip(&y).map(|(a, b)| (b - q * a).exp()).fold(0.0f64, f64::max);
    TauOrder { q, c }
}

// ---------------------------------------------------------------------------
// Equivariant symbols

/// Symbol on the momentum cover with the actions it intertwines.
#[derive(Clone, Debug)]
pub struct EquivariantSymbol {
    pub symbol: Symbol,
    pub lattice: Lattice,
    pub tau_in: GroupAction,
    pub tau_out: GroupAction,
    /// [`equivariance_defect`] at construction.
    pub defect: f64,
}

impl EquivariantSymbol {
    pub fn new(symbol: Symbol, lattice: Lattice, tau_in: GroupAction, tau_out: GroupAction) -> Result<Self> {
        let cover = lattice.cover_grid()?;
        if symbol.grid != cover {
            return Err(Error::Cover("symbol grid is not the lattice's momentum cover".into()));
        }
        if symbol.n_in != tau_in.dim || symbol.n_out != tau_out.dim {
            return Err(Error::Composability(format!(
                "symbol is {}x{} but actions have dims {} and {}",
                symbol.n_out, symbol.n_in, tau_out.dim, tau_in.dim
            )));
        }
        let need = lattice.n_c as i64 - 1;
        if tau_in.range < need || tau_out.range < need {
            return Err(Error::Cover(format!("actions must be tabulated up to |j| = {need}")));
        }
        let defect = defect_of(&symbol, &lattice, &tau_in, &tau_out);
        Ok(Self { symbol, lattice, tau_in, tau_out, defect })
    }

    /// Same lattice and actions, new values.
    pub fn with_symbol(&self, symbol: Symbol) -> Result<Self> {
        Self::new(symbol, self.lattice.clone(), self.tau_in.clone(), self.tau_out.clone())
    }
}

fn cover_index(lat: &Lattice, i: usize) -> ([i64; 2], [usize; 2]) {
    let n = lat.n_c * lat.n_k;
    let m = unravel(i, n, lat.d);
    let (c0, l0) = lat.cover_cell(m[0]);
    if lat.d == 1 {
        ([c0, 0], [l0, 0])
    } else {
        let (c1, l1) = lat.cover_cell(m[1]);
        ([c0, c1], [l0, l1])
    }
}

fn cover_flat(lat: &Lattice, cell: [i64; 2], local: [usize; 2]) -> usize {
    let n = lat.n_c * lat.n_k;
    let a = lat.cover_node(cell[0], local[0]);
    let b = if lat.d == 2 { lat.cover_node(cell[1], local[1]) } else { 0 };
    ravel([a, b], n, lat.d)
}

fn defect_of(f: &Symbol, lat: &Lattice, tau_in: &GroupAction, tau_out: &GroupAction) -> f64 {
    let half = (lat.n_c as i64 - 1) / 2;
    let inner = if lat.n_c >= 5 { half - 1 } else { half };
    let ns = f.grid.n_states();
    let (p, q) = (f.n_out, f.n_in);
    let mut t1 = vec![ZERO; p * q];
    let mut t2 = vec![ZERO; p * q];
    let mut worst: f64 = 0.0;
    let ok = |c: [i64; 2]| c[0].abs() <= inner && c[1].abs() <= inner;
    for ik in 0..ns {
        let (cell, local) = cover_index(lat, ik);
        if !ok(cell) {
            continue;
        }
        for j in lat.shifts(2 * inner) {
            if j == [0, 0] {
                continue;
            }
            // k - gamma* lies in cell `cell - j`
            let target = [cell[0] - j[0], cell[1] - j[1]];
            if !ok(target) {
                continue;
            }
            let ik2 = cover_flat(lat, target, local);
            let (Some(to), Some(ti)) = (tau_out.tau(j), tau_in.tau_inv(j)) else { continue };
            let rows = tau_out.exact_rows(j).unwrap();
            let cols = tau_in.exact_rows(j).unwrap();
            let ri: Vec<usize> = (0..p).filter(|r| rows[*r]).collect();
            let ci: Vec<usize> = (0..q).filter(|c| cols[*c]).collect();
            if ri.is_empty() || ci.is_empty() {
                continue;
            }
            for ix in 0..ns {
                let fk = f.at(ix, ik);
                matmul_small(to, fk, &mut t1, p, p, q);
                matmul_small(&t1, ti, &mut t2, p, q, q);
                let fs = f.at(ix, ik2);
                let diff: Vec<C64> = ri.iter().flat_map(|&r| ci.iter().map(move |&c| (r, c))).map(|(r, c)| fs[r * q + c] - t2[r * q + c]).collect();
                let num = small_op_norm(&diff, ri.len(), ci.len());
                let den = small_op_norm(fk, p, q).max(1.0);
                worst = worst.max(num / den);
            }
        }
    }
    worst
}

/// `max ||f(r, k - gamma*) - tau_out(gamma*) f(r, k) tau_in(gamma*)^{-1}|| / max(1, ||f(r, k)||)`
/// over cover nodes away from the outermost cells, restricted to exact fiber rows.
pub fn equivariance_defect(f: &EquivariantSymbol) -> f64 {
    defect_of(&f.symbol, &f.lattice, &f.tau_in, &f.tau_out)
}

/// `h(r, k) = H_per(k) + phi(r) Id` on the momentum cover, with the mode-shift action
/// on both sides. The input action carries the `H^2` weight, the output action none.
pub fn bloch_symbol(lat: &Lattice, v: &PeriodicField, phi: impl Fn(&[f64]) -> f64, m_cut: usize, eps: f64, margin: usize) -> Result<EquivariantSymbol> {
    let grid = lat.cover_grid()?;
    let d = lat.d;
    let range = lat.n_c as i64 - 1;
    let tau_out = GroupAction::mode_shift(lat, m_cut, margin, range)?;
    let tau_in = tau_out.clone().with_weight(sobolev_weight(lat, m_cut, 2.0))?;
    let dim = tau_out.dim;
    let ns = grid.n_states();
    let mut fibers = Vec::with_capacity(ns);
    for ik in 0..ns {
        let k = grid.xi_point(ik);
        fibers.push(fiber_operator(lat, v, None, &k[..d], m_cut)?);
    }
    let mut s = Symbol::zeros(&grid, eps, dim, dim);
    for ix in 0..ns {
        let r = s.r_point(ix);
        let p = phi(&r[..d]);
        for (ik, h) in fibers.iter().enumerate() {
            let out = s.at_mut(ix, ik);
            out.copy_from_slice(h);
            for i in 0..dim {
                out[i * dim + i] += p;
            }
        }
    }
    EquivariantSymbol::new(s, lat.clone(), tau_in, tau_out)
}

/// `f(r, k) = U(k) C U(k)^dagger + phi(r) Id` with `U(k) = diag(e^{-i k . y_l})` on the torus
/// nodes: the fibering of a lattice-periodic operator with matrix `C`. Equivariant under
/// [`GroupAction::torus_phase`] without truncation.
pub fn torus_symbol(lat: &Lattice, c: &[C64], phi: impl Fn(&[f64]) -> f64, eps: f64) -> Result<EquivariantSymbol> {
    let grid = lat.cover_grid()?;
    let d = lat.d;
    let nt = lat.n_torus();
    if c.len() != nt * nt {
        return Err(Error::Shape(format!("C must be {nt}x{nt}")));
    }
    let ys: Vec<[f64; 2]> = (0..nt).map(|l| lat.torus_point(l)).collect();
    let s = Symbol::from_fn(&grid, eps, nt, nt, |r, k, out| {
        let kk = [k[0], if d == 2 { k[1] } else { 0.0 }];
        let p = phi(r);
        for a in 0..nt {
            for b in 0..nt {
                let ph = C64::from_polar(1.0, -(dot(&kk, &ys[a]) - dot(&kk, &ys[b])));
                out[a * nt + b] = ph * c[a * nt + b];
            }
            out[a * nt + a] += p;
        }
    });
    let tau = GroupAction::torus_phase(lat, lat.n_c as i64 - 1)?;
    EquivariantSymbol::new(s, lat.clone(), tau.clone(), tau)
}

/// Power-law fit of `sup_r ||f(r, k) W^{-1}||` against `<k>` over cover nodes outside the
/// Brillouin cell; `W = diag(col_weight)` (identity when `None`).
#[derive(Clone, Copy, Debug)]
pub struct GrowthFit {
    pub exponent: f64,
    /// `max_k sup_r ||f(r, k) W^{-1}|| / <k>^exponent`.
    pub constant: f64,
}

pub fn growth_exponent(f: &EquivariantSymbol, col_weight: Option<&[f64]>) -> Result<GrowthFit> {
    let s = &f.symbol;
    let (p, q) = (s.n_out, s.n_in);
    if let Some(w) = col_weight {
        if w.len() != q {
            return Err(Error::Shape("column weight length differs from n_in".into()));
        }
    }
    let ns = s.grid.n_states();
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut buf = vec![ZERO; p * q];
    for ik in 0..ns {
        let (cell, _) = cover_index(&f.lattice, ik);
        if cell == [0, 0] {
            continue;
        }
        let k = s.grid.xi_point(ik);
        let mut sup: f64 = 0.0;
        for ix in 0..ns {
            buf.copy_from_slice(s.at(ix, ik));
            if let Some(w) = col_weight {
                for (i, v) in buf.iter_mut().enumerate() {
                    *v /= w[i % q];
                }
            }
            sup = sup.max(small_op_norm(&buf, p, q));
        }
        x.push(japanese2(&k).ln());
        y.push(sup.ln());
    }
    if x.len() < 2 {
        return Err(Error::Cover("growth fit needs at least three cells".into()));
    }
    let (e, _) = linear_fit(&x, &y);
    let constant = x.iter().zip(&y).map(|(a, b)| (b - e * a).exp()).fold(0.0f64, f64::max);
    Ok(GrowthFit { exponent: e, constant })
}

/// `Op^A_eq(f)` on `L^2(BZ, C^{n_in}) -> L^2(BZ, C^{n_out})`.
///
/// The operator is quantized on the cover, conjugated to the momentum representation,
/// applied to equivariant extensions `psi(k - gamma*) = tau_in(gamma*) psi(k)` and
/// restricted to the Brillouin cell.
pub fn equivariant_quantize(f: &EquivariantSymbol, mag: &MagneticData) -> Result<OperatorMatrix> {
    let lat = &f.lattice;
    if lat.n_c < 3 {
        return Err(Error::Cover(format!("cover of {} cells cannot host an extension", lat.n_c)));
    }
    let op = quantize(&f.symbol, mag)?;
    let ok = momentum_representation(&op);
    let (p, q) = (f.symbol.n_out, f.symbol.n_in);
    let d = lat.d;
    let nb = lat.n_bz();
    let half = (lat.n_c as i64 - 1) / 2;
    let cells = lat.shifts(half);
    let mut m = Mat::<C64>::zeros(nb * p, nb * q);
    for l in 0..nb {
        let lr = unravel(l, lat.n_k, d);
        let row_node = cover_flat(lat, [0, 0], lr);
        for lp in 0..nb {
            let lc = unravel(lp, lat.n_k, d);
            for cell in &cells {
                let node = cover_flat(lat, *cell, lc);
                let t = f.tau_in.tau([-cell[0], -cell[1]]).ok_or_else(|| Error::Cover("missing action element".into()))?;
                for ro in 0..p {
                    for ci in 0..q {
                        let mut acc = ZERO;
                        for col in 0..q {
                            acc += ok[(row_node * p + ro, node * q + col)] * t[col * q + ci];
                        }
                        m[(l * p + ro, lp * q + ci)] += acc;
                    }
                }
            }
        }
    }
    let grid = lat.cell_grid()?;
    Ok(OperatorMatrix { grid, eps: f.symbol.eps, n_out: p, n_in: q, m })
}

/// `F M F^dagger` with the unitary centered DFT `F` in every position axis.
fn momentum_representation(op: &OperatorMatrix) -> Mat<C64> {
    let g = &op.grid;
    let d = g.d();
    let (p, q) = (op.n_out, op.n_in);
    let mut shape = g.ns().to_vec();
    shape.push(p);
    shape.extend_from_slice(g.ns());
    shape.push(q);
    let rows = op.m.nrows();
    let cols = op.m.ncols();
    let mut v: Vec<C64> = (0..rows * cols).map(|i| op.m[(i / cols, i % cols)]).collect();
    for j in 0..d {
        centered_dft_axis(&mut v, &shape, j, -1);
        centered_dft_axis(&mut v, &shape, d + 1 + j, 1);
    }
    let norm = 1.0 / g.n_states() as f64;
    Mat::from_fn(rows, cols, |i, j| v[i * cols + j] * norm)
}

/// Outcome of [`equivariant_product_check`].
#[derive(Clone, Debug)]
pub struct ProductCheck {
    pub product: EquivariantSymbol,
    pub defect_f: f64,
    pub defect_g: f64,
    pub defect_product: f64,
    pub growth_f: f64,
    pub growth_g: f64,
    pub growth_product: f64,
}

/// Equivariance and growth of `f #^B g` (exact route) against those of the factors.
pub fn equivariant_product_check(f: &EquivariantSymbol, g: &EquivariantSymbol, mag: &MagneticData) -> Result<ProductCheck> {
    if f.lattice != g.lattice {
        return Err(Error::Cover("factors live on different lattices".into()));
    }
    if f.tau_in.dim != g.tau_out.dim {
        return Err(Error::Composability("tau_in of f and tau_out of g differ in dimension".into()));
    }
    let s = weyl_product_exact(&f.symbol, &g.symbol, mag)?;
    let product = EquivariantSymbol::new(s, f.lattice.clone(), g.tau_in.clone(), f.tau_out.clone())?;
    let growth_f = growth_exponent(f, None)?.exponent;
    let growth_g = growth_exponent(g, None)?.exponent;
    let growth_product = growth_exponent(&product, None)?.exponent;
    Ok(ProductCheck {
        defect_f: f.defect,
        defect_g: g.defect,
        defect_product: product.defect,
        product,
        growth_f,
        growth_g,
        growth_product,
    })
}

/// Moyal resolvent of an equivariant symbol, carrying the actions along.
pub fn equivariant_resolvent(h: &EquivariantSymbol, z: C64, mag: &MagneticData) -> Result<EquivariantSymbol> {
    let r = moyal_resolvent(&h.symbol, z, mag)?;
    EquivariantSymbol::new(r, h.lattice.clone(), h.tau_out.clone(), h.tau_in.clone())
}

/// Moves a representative on the Brillouin nodes from cell `from` to cell `to`:
/// `psi_to = tau(to - from)^{-1} psi_from`, with representatives `psi_c(k) = psi(k + c)`.
///
/// `psi` has layout `[Brillouin node][fiber]`.
pub fn cell_unitary(psi: &[C64], tau: &GroupAction, to: [i64; 2], from: [i64; 2]) -> Result<Vec<C64>> {
    let n = tau.dim;
    if psi.len() % n != 0 {
        return Err(Error::Shape(format!("vector length {} is not a multiple of {n}", psi.len())));
    }
    let j = [to[0] - from[0], to[1] - from[1]];
    let t = tau.tau_inv(j).ok_or_else(|| Error::Cover(format!("shift {j:?} outside the tabulated range")))?;
    let mut out = vec![ZERO; psi.len()];
    for (o, v) in out.chunks_mut(n).zip(psi.chunks(n)) {
        for r in 0..n {
            o[r] = (0..n).map(|c| t[r * n + c] * v[c]).sum();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duality_and_cover() {
        let lat = Lattice::new(&[[1.0, 0.2], [0.0, 1.5]], 4, 3, 3).unwrap();
        assert!(lat.duality_defect() < 1e-14);
        let cub = Lattice::cubic(1, 1.0, 8, 4, 5).unwrap();
        let g = cub.cover_grid().unwrap();
        assert_eq!(g.n(0), 40);
        assert!((g.dxi(0) - 2.0 * PI / 8.0).abs() < 1e-14);
        // central cell equals the Brillouin nodes
        for l in 0..8 {
            assert!((g.xi_node(0, 16 + l) - cub.bz_point(l)[0]).abs() < 1e-12);
        }
    }

    #[test]
    fn free_fiber_is_diagonal() {
        let lat = Lattice::cubic(1, 1.0, 4, 4, 3).unwrap();
        let h = fiber_operator(&lat, &PeriodicField::zero(), None, &[0.3], 2).unwrap();
        for (r, m) in (-2i64..=2).enumerate() {
            let want = (0.3 + 2.0 * PI * m as f64).powi(2);
            assert!((h[r * 5 + r].re - want).abs() < 1e-12);
        }
    }

    #[test]
    fn mode_shift_is_exact_homomorphism_on_interior() {
        let lat = Lattice::cubic(1, 1.0, 4, 4, 5).unwrap();
        let t = GroupAction::mode_shift(&lat, 6, 0, 3).unwrap();
        assert!(t.homomorphism_defect() < 1e-15);
        assert!(t.q.abs() < 1e-12);
    }

    #[test]
    fn constant_potential_shifts_fiber() {
        let lat = Lattice::cubic(1, 2.0, 4, 4, 3).unwrap();
        let h0 = fiber_operator(&lat, &PeriodicField::zero(), None, &[0.1], 1).unwrap();
        let a = [PeriodicField::constant(0.25)];
        let h1 = fiber_operator(&lat, &PeriodicField::zero(), Some(&a), &[0.35], 1).unwrap();
        for (u, v) in h0.iter().zip(&h1) {
            assert!((u - v).norm() < 1e-12);
        }
    }
}
