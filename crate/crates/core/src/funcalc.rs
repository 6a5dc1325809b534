//! Weights, Moyal inverses and resolvents, parametrices, and the Helffer–Sjöstrand
//! and holomorphic functional calculi.

use std::f64::consts::PI;

use faer::Mat;

use crate::error::{Error, Result};
use crate::grid::PhaseGrid;
use crate::linalg::{self, eigvalsh, inverse_checked};
use crate::magnetic::{gauss_legendre_8, MagneticData};
use crate::quantize::{dequantize, quantize, OperatorMatrix};
use crate::seminorm::japanese;
use crate::symbol::{FormalSeries, Symbol};
use crate::C64;

/// Condition number above which an operator counts as not invertible.
pub const MAX_CONDITION: f64 = 1e8;

/// `w_m` with its shift `lambda(m)`.
#[derive(Clone, Debug)]
pub struct WeightSymbol {
    pub m: f64,
    pub lambda_m: f64,
    pub symbol: Symbol,
}

/// Shift making `Op(<xi>^m) + lambda(m)` bounded below by 1: zero for `m = 0`,
/// otherwise `max(0, 1 - min spec Op(<xi>^m)) + 0.1`.
pub fn weight_shift(grid: &PhaseGrid, eps: f64, m: f64, mag: &MagneticData) -> Result<f64> {
    if m == 0.0 {
        return Ok(0.0);
    }
    let p = Symbol::scalar_fn(grid, eps, 1, |_, xi| C64::new(japanese(xi).powf(m.abs()), 0.0));
    let ev = eigvalsh(&quantize(&p, mag)?.m);
    Ok((1.0 - ev[0]).max(0.0) + 0.1)
}

fn positive_weight(grid: &PhaseGrid, eps: f64, fib: usize, m: f64, shift: f64) -> Symbol {
    Symbol::scalar_fn(grid, eps, fib, |_, xi| C64::new(japanese(xi).powf(m) + shift, 0.0))
}

/// Quantized weight `Op^A(w_m)` on `fib`-component states.
pub fn weight_operator(grid: &PhaseGrid, eps: f64, fib: usize, m: f64, mag: &MagneticData) -> Result<OperatorMatrix> {
    let shift = weight_shift(grid, eps, m, mag)?;
    let op = quantize(&positive_weight(grid, eps, fib, m.abs(), shift), mag)?;
    if m >= 0.0 {
        return Ok(op);
    }
    match inverse_checked(&op.m, MAX_CONDITION) {
        Ok(inv) => Ok(OperatorMatrix { m: inv, ..op }),
        Err(Error::NotInvertible(c)) => Err(Error::SingularWeight(c)),
        Err(e) => Err(e),
    }
}

/// `w_m = <xi>^m + lambda(m)` for `m >= 0`, the Moyal inverse of `w_{|m|}` for `m < 0`.
pub fn weight_symbol(grid: &PhaseGrid, eps: f64, fib: usize, m: f64, mag: &MagneticData) -> Result<WeightSymbol> {
    let lambda_m = weight_shift(grid, eps, m, mag)?;
    let symbol = if m >= 0.0 {
        positive_weight(grid, eps, fib, m, lambda_m)
    } else {
        dequantize(&weight_operator(grid, eps, fib, m, mag)?, mag)?
    };
    Ok(WeightSymbol { m, lambda_m, symbol })
}

fn require_square(f: &Symbol) -> Result<()> {
    if f.n_out != f.n_in {
        return Err(Error::Composability(format!("{}x{} fibers have no inverse", f.n_out, f.n_in)));
    }
    Ok(())
}

/// `Op^A(f)^{-1}`, rejecting condition numbers above [`MAX_CONDITION`].
pub fn inverse_operator(f: &Symbol, mag: &MagneticData) -> Result<OperatorMatrix> {
    require_square(f)?;
    let op = quantize(f, mag)?;
    let inv = inverse_checked(&op.m, MAX_CONDITION)?;
    Ok(OperatorMatrix { m: inv, ..op })
}

/// `f^{(-1)#}`: the symbol whose quantization inverts `Op^A(f)`.
pub fn moyal_inverse(f: &Symbol, mag: &MagneticData) -> Result<Symbol> {
    dequantize(&inverse_operator(f, mag)?, mag)
}

/// `(h - z)^{(-1)#}`.
pub fn moyal_resolvent(h: &Symbol, z: C64, mag: &MagneticData) -> Result<Symbol> {
    moyal_inverse(&h.shift_identity(-z)?, mag)
}

/// `(Op^A(h) - z)^{-1}` from an already quantized `h`.
fn resolvent_matrix(op: &Mat<C64>, z: C64) -> Result<Mat<C64>> {
    inverse_checked(&shift(op, z), MAX_CONDITION)
}

fn shift(op: &Mat<C64>, z: C64) -> Mat<C64> {
    let n = op.nrows();
    Mat::from_fn(n, n, |i, j| if i == j { op[(i, j)] - z } else { op[(i, j)] })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// `f^{(-1)eps} # f = Id + O(eps^{N+1})`
    Left,
    /// `f # f^{(-1)eps} = Id + O(eps^{N+1})`
    Right,
}

/// Parametrix terms from the inversion defect `r0 = eps^{-1}(g0 # f - Id)`
/// (left) or `eps^{-1}(f # g0 - Id)` (right): term `n` is `(-r0)^{#n} # g0`
/// (left) or `g0 # (-r0)^{#n}` (right), so the degree-`N` left defect is
/// `-(-eps r0)^{#(N+1)}` exactly.
pub fn parametrix(f: &Symbol, g0: &Symbol, n: usize, mag: &MagneticData, side: Side) -> Result<FormalSeries> {
    require_square(f)?;
    let e = f.eps;
    let fo = quantize(f, mag)?;
    let go = quantize(g0, mag)?;
    let prod = match side {
        Side::Left => go.compose(&fo)?,
        Side::Right => fo.compose(&go)?,
    };
    let id = OperatorMatrix::identity(&f.grid, e, f.n_out);
    let defect_op = prod.sub(&id)?;
    let defect = dequantize(&defect_op, mag)?.sup_norm();
    let bound = 2.0 * e * (f.sup_norm() * g0.sup_norm()).max(1.0);
    if !(defect <= bound) {
        return Err(Error::BadPrincipalSymbol { defect, bound });
    }
    let minus_r0 = defect_op.scale(C64::new(-1.0 / e, 0.0));
    let mut terms = Vec::with_capacity(n + 1);
    let mut t = go.clone();
    terms.push(dequantize(&t, mag)?);
    for _ in 0..n {
        t = match side {
            Side::Left => minus_r0.compose(&t)?,
            Side::Right => t.compose(&minus_r0)?,
        };
        terms.push(dequantize(&t, mag)?);
    }
    FormalSeries::new(terms, e)
}

/// `|| Op(S_N) Op(f) - Id ||` (left) or `|| Op(f) Op(S_N) - Id ||` (right) for the
/// degree-`upto` partial sum `S_N`.
pub fn parametrix_defect(series: &FormalSeries, f: &Symbol, upto: usize, mag: &MagneticData, side: Side) -> Result<f64> {
    let s = quantize(&series.partial_sum(series.eps, upto)?, mag)?;
    let fo = quantize(f, mag)?;
    let p = match side {
        Side::Left => s.compose(&fo)?,
        Side::Right => fo.compose(&s)?,
    };
    Ok(p.sub(&OperatorMatrix::identity(&f.grid, f.eps, f.n_out))?.norm())
}

// ---------------------------------------------------------------------------
// functional calculi

/// Truncated Taylor jet `c_k = f^(k)(u) / k!`.
#[derive(Clone, Copy, Debug)]
struct Jet<const K: usize>([f64; K]);

impl<const K: usize> Jet<K> {
    fn var(u: f64, slope: f64) -> Self {
        let mut c = [0.0; K];
        c[0] = u;
        if K > 1 {
            c[1] = slope;
        }
        Jet(c)
    }
    fn mul(&self, o: &Self) -> Self {
        let mut c = [0.0; K];
        for i in 0..K {
            for j in 0..K - i {
                c[i + j] += self.0[i] * o.0[j];
            }
        }
        Jet(c)
    }
    fn affine(&self, a: f64, b: f64) -> Self {
        let mut c = self.0.map(|v| a * v);
        c[0] += b;
        Jet(c)
    }
    fn exp(&self) -> Self {
        let mut c = [0.0; K];
        c[0] = self.0[0].exp();
        for k in 1..K {
            let mut s = 0.0;
            for j in 1..=k {
                s += j as f64 * self.0[j] * c[k - j];
            }
            c[k] = s / k as f64;
        }
        Jet(c)
    }
    fn recip(&self) -> Self {
        let mut c = [0.0; K];
        c[0] = 1.0 / self.0[0];
        for k in 1..K {
            let mut s = 0.0;
            for j in 1..=k {
                s += self.0[j] * c[k - j];
            }
            c[k] = -s / self.0[0];
        }
        Jet(c)
    }
    fn derivatives(&self) -> [f64; K] {
        let mut out = self.0;
        let mut fact = 1.0;
        for (k, v) in out.iter_mut().enumerate() {
            if k > 0 {
                fact *= k as f64;
            }
            *v *= fact;
        }
        out
    }
}

const JET: usize = 8;

/// A real profile `phi` with derivatives, as used by the Helffer–Sjöstrand calculus.
#[derive(Clone, Debug, PartialEq)]
pub enum Profile {
    /// `exp(1 - 1/(1 - t^2))`, `t = (u - center) / half_width`.
    Bump { center: f64, half_width: f64 },
    /// `exp(-(u - center)^2 / (2 width^2))`, treated as supported on `center +- 9 width`.
    Gaussian { center: f64, width: f64 },
    /// Samples `derivs[k][i] = phi^(k)(u[i])`, linearly interpolated; zero outside `[u_0, u_last]`.
    Table { u: Vec<f64>, derivs: Vec<Vec<f64>> },
}

impl Profile {
    pub fn support(&self) -> (f64, f64) {
        match self {
            Profile::Bump { center, half_width } => (center - half_width, center + half_width),
            Profile::Gaussian { center, width } => (center - 9.0 * width, center + 9.0 * width),
            Profile::Table { u, .. } => (u[0], u[u.len() - 1]),
        }
    }

    /// `phi^(k)(u)` for `k = 0..=kmax` (`kmax < 8`).
    pub fn derivatives(&self, u: f64, kmax: usize) -> Result<Vec<f64>> {
        if kmax >= JET {
            return Err(Error::Capability(format!("derivative order {kmax} not available")));
        }
        let v: [f64; JET] = match self {
            Profile::Bump { center, half_width } => {
                let t = (u - center) / half_width;
                if t.abs() >= 1.0 {
                    [0.0; JET]
                } else {
                    let tj = Jet::<JET>::var(t, 1.0 / half_width);
                    let g = tj.mul(&tj).affine(-1.0, 1.0);
                    g.recip().affine(-1.0, 1.0).exp().derivatives()
                }
            }
            Profile::Gaussian { center, width } => {
                let tj = Jet::<JET>::var((u - center) / width, 1.0 / width);
                tj.mul(&tj).affine(-0.5, 0.0).exp().derivatives()
            }
            Profile::Table { u: nodes, derivs } => {
                if derivs.len() <= kmax {
                    return Err(Error::Capability(format!("table lacks derivative {kmax}")));
                }
                let mut out = [0.0; JET];
                if u >= nodes[0] && u <= nodes[nodes.len() - 1] {
                    let i = nodes.partition_point(|&x| x <= u).clamp(1, nodes.len() - 1);
                    let w = (u - nodes[i - 1]) / (nodes[i] - nodes[i - 1]);
                    for k in 0..=kmax {
                        out[k] = (1.0 - w) * derivs[k][i - 1] + w * derivs[k][i];
                    }
                }
                out
            }
        };
        Ok(v[..=kmax].to_vec())
    }

    pub fn value(&self, u: f64) -> f64 {
        self.derivatives(u, 0).map(|v| v[0]).unwrap_or(0.0)
    }
}

fn psi(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (-1.0 / x).exp()
    }
}

fn dpsi(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        psi(x) / (x * x)
    }
}

/// Flat-top cutoff: 1 on `|t| <= 1/2`, 0 on `|t| >= 1`; returns `(tau, tau')`.
fn cutoff(t: f64) -> (f64, f64) {
    let a = t.abs();
    if a <= 0.5 {
        return (1.0, 0.0);
    }
    if a >= 1.0 {
        return (0.0, 0.0);
    }
    let x = 2.0 * (1.0 - a);
    let (p, q) = (psi(x), psi(1.0 - x));
    let s = p / (p + q);
    let ds = (dpsi(x) * q + p * dpsi(1.0 - x)) / ((p + q) * (p + q));
    (s, ds * -2.0 * t.signum())
}

/// `d-bar` of the quasi-analytic extension
/// `phi~(u + iv) = tau(v/<u>) sum_{k <= K} phi^(k)(u) (iv)^k / k!`.
pub fn dbar_extension(phi: &Profile, order: usize, u: f64, v: f64) -> Result<C64> {
    let der = phi.derivatives(u, order + 1)?;
    let ju = (1.0 + u * u).sqrt();
    let (tau, dtau) = cutoff(v / ju);
    let iv = C64::new(0.0, v);
    let mut sum = C64::new(0.0, 0.0);
    let mut pw = C64::new(1.0, 0.0);
    let mut fact = 1.0;
    for (k, dk) in der.iter().take(order + 1).enumerate() {
        if k > 0 {
            pw *= iv;
            fact *= k as f64;
        }
        sum += pw * (dk / fact);
    }
    let top = pw * (der[order + 1] / fact);
    let du_tau = dtau * (-v * u / (ju * ju * ju));
    let dv_tau = dtau / ju;
    Ok((top * tau + sum * C64::new(du_tau, dv_tau)) * 0.5)
}

/// Quadrature layout for [`helffer_sjostrand`].
#[derive(Clone, Copy, Debug)]
pub struct HsOptions {
    /// Gauss–Legendre panels along `Re z` over `supp phi`.
    pub panels_u: usize,
    /// Panels along `Im z` over `(0, v_max]`; the lower half-plane follows by symmetry.
    pub panels_v: usize,
    /// Nodes closer than this to the spectrum are skipped.
    pub skip_distance: f64,
    /// Fraction of skipped nodes above which the quadrature fails.
    pub max_skip_fraction: f64,
}

impl Default for HsOptions {
    fn default() -> Self {
        Self { panels_u: 24, panels_v: 48, skip_distance: 1e-9, max_skip_fraction: 0.01 }
    }
}

#[derive(Clone, Debug)]
pub struct HsResult {
    pub symbol: Symbol,
    pub nodes: usize,
    pub skipped: usize,
}

/// `phi^B(h) = (1/pi) int d^2z dbar phi~(z) (h - z)^{(-1)#}` for Hermitian-valued `h`.
pub fn helffer_sjostrand(h: &Symbol, phi: &Profile, ext_order: usize, mag: &MagneticData) -> Result<Symbol> {
    Ok(helffer_sjostrand_with(h, phi, ext_order, mag, HsOptions::default())?.symbol)
}

pub fn helffer_sjostrand_with(h: &Symbol, phi: &Profile, ext_order: usize, mag: &MagneticData, opts: HsOptions) -> Result<HsResult> {
    require_square(h)?;
    let herm = h.sub(&h.adjoint())?.sup_norm();
    if herm > 1e-12 * h.sup_norm().max(1.0) {
        return Err(Error::Capability("Helffer–Sjöstrand calculus needs Hermitian-valued symbols".into()));
    }
    let op = quantize(h, mag)?;
    let spec = eigvalsh(&op.m);
    let (lo, hi) = phi.support();
    let vmax = (1.0 + lo * lo).sqrt().max((1.0 + hi * hi).sqrt());
    let (gx, gw) = gauss_legendre_8();
    let n = op.m.nrows();
    let mut acc = Mat::<C64>::zeros(n, n);
    let mut nodes = 0;
    let mut skipped = 0;
    let du = (hi - lo) / opts.panels_u as f64;
    let dv = vmax / opts.panels_v as f64;
    for pu in 0..opts.panels_u {
        for (xu, wu) in gx.iter().zip(gw.iter()) {
            let u = lo + du * (pu as f64 + xu);
            for pv in 0..opts.panels_v {
                for (xv, wv) in gx.iter().zip(gw.iter()) {
                    let v = dv * (pv as f64 + xv);
                    let w = dbar_extension(phi, ext_order, u, v)? * (wu * du * wv * dv);
                    if w == C64::new(0.0, 0.0) {
                        continue;
                    }
                    nodes += 1;
                    let dist = spec.iter().map(|&l| ((l - u).powi(2) + v * v).sqrt()).fold(f64::INFINITY, f64::min);
                    if dist < opts.skip_distance {
                        skipped += 1;
                        continue;
                    }
                    let far = spec.iter().map(|&l| ((l - u).powi(2) + v * v).sqrt()).fold(0.0, f64::max);
                    if far / dist > MAX_CONDITION {
                        return Err(Error::Quadrature(format!("resolvent at {u}+{v}i is ill-conditioned")));
                    }
                    let r = linalg::inverse(&shift(&op.m, C64::new(u, v)));
                    acc += faer::Scale(w) * &r;
                }
            }
        }
    }
    if nodes > 0 && skipped as f64 > opts.max_skip_fraction * nodes as f64 {
        return Err(Error::Quadrature(format!("{skipped} of {nodes} nodes hit the spectrum")));
    }
    // lower half-plane contributes the adjoint
    let total = Mat::from_fn(n, n, |i, j| (acc[(i, j)] + acc[(j, i)].conj()) / PI);
    let symbol = dequantize(&OperatorMatrix { m: total, ..op }, mag)?;
    Ok(HsResult { symbol, nodes, skipped })
}

/// Axis-aligned rectangle `[re.0, re.1] x [im.0, im.1]`, traversed counterclockwise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContourSpec {
    pub re: (f64, f64),
    pub im: (f64, f64),
    /// Initial number of nodes per edge; doubled until converged.
    pub points_per_edge: usize,
}

impl ContourSpec {
    pub fn new(re: (f64, f64), im: (f64, f64), points_per_edge: usize) -> Result<Self> {
        if !(re.0 < re.1 && im.0 < im.1) || points_per_edge < 2 {
            return Err(Error::Contour("degenerate rectangle".into()));
        }
        Ok(Self { re, im, points_per_edge })
    }

    fn corners(&self) -> [C64; 4] {
        [
            C64::new(self.re.0, self.im.0),
            C64::new(self.re.1, self.im.0),
            C64::new(self.re.1, self.im.1),
            C64::new(self.re.0, self.im.1),
        ]
    }

    /// Distance from a real point to the rectangle boundary.
    fn distance_real(&self, x: f64) -> f64 {
        let corners = self.corners();
        let mut d = f64::INFINITY;
        for e in 0..4 {
            let (a, b) = (corners[e], corners[(e + 1) % 4]);
            let ab = b - a;
            let t = (((C64::new(x, 0.0) - a) * ab.conj()).re / ab.norm_sqr()).clamp(0.0, 1.0);
            d = d.min((a + ab * t - C64::new(x, 0.0)).norm());
        }
        d
    }
}

/// Corner-flattening reparametrization of `[0, 1]` (`sin^3` type): value and derivative.
fn corner_map(s: f64) -> (f64, f64) {
    let x = PI * s;
    let v = (0.75 * (1.0 - x.cos()) - (1.0 - (3.0 * x).cos()) / 12.0) * 0.75;
    let d = 0.75 * PI * x.sin().powi(3);
    (v, d)
}

#[derive(Clone, Debug)]
pub struct HoloResult {
    pub symbol: Symbol,
    /// Nodes per edge at acceptance.
    pub points_per_edge: usize,
    /// Relative change between the last two refinements.
    pub change: f64,
}

const HOLO_MAX_POINTS: usize = 1 << 12;
const HOLO_TOL: f64 = 1e-8;

/// `phi^B(h) = (i / 2 pi) oint dz phi(z) (h - z)^{(-1)#}` by the trapezoid rule.
pub fn holomorphic_calculus(h: &Symbol, phi: impl Fn(C64) -> C64, contour: &ContourSpec, mag: &MagneticData) -> Result<Symbol> {
    Ok(holomorphic_calculus_detailed(h, phi, contour, mag)?.symbol)
}

pub fn holomorphic_calculus_detailed(h: &Symbol, phi: impl Fn(C64) -> C64, contour: &ContourSpec, mag: &MagneticData) -> Result<HoloResult> {
    require_square(h)?;
    let op = quantize(h, mag)?;
    let n = op.m.nrows();
    let scale = 1.0 + contour.re.0.abs().max(contour.re.1.abs());
    if op.hermiticity_defect() < 1e-10 {
        for l in eigvalsh(&op.m) {
            if contour.distance_real(l) < 1e-8 * scale {
                return Err(Error::Contour(format!("eigenvalue {l} lies on the contour")));
            }
        }
    }
    let corners = contour.corners();
    // contributions of nodes s = i / M on every edge; M doubles, reusing the old nodes
    let edge_sum = |m: usize, odd_only: bool| -> Result<Mat<C64>> {
        let mut acc = Mat::<C64>::zeros(n, n);
        for e in 0..4 {
            let (a, b) = (corners[e], corners[(e + 1) % 4]);
            for i in 1..m {
                if odd_only && i % 2 == 0 {
                    continue;
                }
                let (t, dt) = corner_map(i as f64 / m as f64);
                let z = a + (b - a) * t;
                let r = resolvent_matrix(&op.m, z).map_err(|_| Error::Contour(format!("resolvent at {z} is ill-conditioned")))?;
                let w = phi(z) * (b - a) * dt;
                acc += faer::Scale(w) * &r;
            }
        }
        Ok(acc)
    };
    let pref = C64::new(0.0, 1.0 / (2.0 * PI));
    let mut m = contour.points_per_edge;
    let mut sum = edge_sum(m, false)?;
    let mut current = &sum * faer::Scale(pref / m as f64);
    loop {
        let next_m = 2 * m;
        sum += edge_sum(next_m, true)?;
        let next = &sum * faer::Scale(pref / next_m as f64);
        let change = linalg::frobenius(&(&next - &current)) / linalg::frobenius(&next).max(1e-300);
        m = next_m;
        current = next;
        if change < HOLO_TOL {
            let symbol = dequantize(&OperatorMatrix { m: current, ..op }, mag)?;
            return Ok(HoloResult { symbol, points_per_edge: m, change });
        }
        if m >= HOLO_MAX_POINTS {
            return Err(Error::Contour(format!("trapezoid rule not converged (change {change:.2e})")));
        }
    }
}

#[derive(Clone, Debug)]
pub struct Projection {
    pub symbol: Symbol,
    /// `sup || pi # pi - pi ||` over the grid.
    pub sharp_defect: f64,
    /// `|| Op(pi)^2 - Op(pi) ||`.
    pub operator_defect: f64,
    pub trace: f64,
}

/// Riesz projection onto the part of the spectrum inside `band`.
pub fn spectral_projection(h: &Symbol, band: (f64, f64), mag: &MagneticData) -> Result<Projection> {
    let half = ((band.1 - band.0) / 2.0).max(0.5);
    let contour = ContourSpec::new(band, (-half, half), 16)?;
    let symbol = holomorphic_calculus(h, |_| C64::new(1.0, 0.0), &contour, mag)?;
    let p = quantize(&symbol, mag)?;
    let p2 = p.compose(&p)?;
    let operator_defect = p2.sub(&p)?.norm();
    let sharp_defect = dequantize(&p2, mag)?.sub(&symbol)?.sup_norm();
    let trace = linalg::trace(&p.m).re;
    Ok(Projection { symbol, sharp_defect, operator_defect, trace })
}
