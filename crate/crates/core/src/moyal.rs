//! The magnetic Weyl product: exact (operator) route, integral-formula route,
//! first-order expansion, derivations and frame diagnostics.

use crate::error::{Error, Result};
use crate::fft::{centered_dft_axis, derivative_axis, fft_axis};
use crate::magnetic::MagneticData;
use crate::quantize::{check_scale, dequantize, kernel_map, midpoint_lag_table, quantize, OperatorKernel, OperatorMatrix};
use crate::seminorm::{partial, PhaseAxis, Scheme};
use crate::symbol::{composable, matmul_small, FormalSeries, Symbol};
use crate::{C64, I};

/// Symplectic Fourier transform `(2 pi)^{-d} int dX' e^{i sigma(X, X')} f(X')`,
/// `sigma((x, xi), (y, eta)) = xi.y - x.eta`. Involutive on the grid. Requires `eps = 1`
/// so that the position and momentum grids are mutually dual.
pub fn symplectic_fourier(f: &Symbol) -> Result<Symbol> {
    if f.eps != 1.0 {
        return Err(Error::Capability("symplectic Fourier transform needs eps = 1".into()));
    }
    let g = &f.grid;
    let d = g.d();
    let mut shape = g.ns().to_vec();
    shape.extend_from_slice(g.ns());
    shape.push(f.fib());
    let mut v = f.values.clone();
    for j in 0..d {
        centered_dft_axis(&mut v, &shape, j, 1);
        centered_dft_axis(&mut v, &shape, d + j, -1);
    }
    let scale = 1.0 / g.ns().iter().map(|&n| n as f64).product::<f64>();
    let ns = g.n_states();
    let fib = f.fib();
    let mut out = vec![C64::new(0.0, 0.0); v.len()];
    // swap position and momentum slots
    for ix in 0..ns {
        for ik in 0..ns {
            let src = (ix * ns + ik) * fib;
            let dst = (ik * ns + ix) * fib;
            for q in 0..fib {
                out[dst + q] = v[src + q] * scale;
            }
        }
    }
    Symbol::from_values(g, f.eps, f.n_out, f.n_in, out)
}

/// `f #^B g` as the Wigner transform of `Op^A(f) Op^A(g)`.
pub fn weyl_product_exact(f: &Symbol, g: &Symbol, mag: &MagneticData) -> Result<Symbol> {
    if !composable(f, g) {
        return Err(Error::Composability(format!("f.n_in={} but g.n_out={}", f.n_in, g.n_out)));
    }
    let p = quantize(f, mag)?.compose(&quantize(g, mag)?)?;
    dequantize(&p, mag)
}

/// `f #^B g` from the double lag integral
/// `(2 pi)^{-2d} int dy dz e^{i xi.(y+z)} e^{i lambda gamma^B} f_(r - eps z/2, y) g_(r + eps y/2, z)`
/// with `f_(r, y) = int d xi e^{-i y.xi} f(r, xi)` and
/// `gamma^B = eps^{-1} Gamma^B(r - eps(y+z)/2, r + eps(y-z)/2, r + eps(y+z)/2)`.
pub fn weyl_product_integral(f: &Symbol, g: &Symbol, mag: &MagneticData) -> Result<Symbol> {
    if !composable(f, g) {
        return Err(Error::Composability(format!("f.n_in={} but g.n_out={}", f.n_in, g.n_out)));
    }
    if f.grid != g.grid || f.eps != g.eps {
        return Err(Error::GridMismatch("factors sampled on different grids".into()));
    }
    check_scale(f.eps, &f.grid, mag)?;
    let grid = &f.grid;
    let d = grid.d();
    if d > 2 {
        return Err(Error::Capability("integral route limited to d <= 2".into()));
    }
    let ns = grid.n_states();
    let (p, q, r) = (f.n_out, f.n_in, g.n_in);
    let (fib_f, fib_g, fib_o) = (p * q, q * r, p * r);
    let tf = midpoint_lag_table(f);
    let tg = midpoint_lag_table(g);
    let e = mag.eps;
    let magnetic = d == 2 && !mag.is_trivial();
    let nn = grid.ns().to_vec();
    let half_idx = |c: [isize; 2]| -> usize {
        if d == 1 {
            c[0].rem_euclid(2 * nn[0] as isize) as usize
        } else {
            c[0].rem_euclid(2 * nn[0] as isize) as usize * 2 * nn[1] + c[1].rem_euclid(2 * nn[1] as isize) as usize
        }
    };
    let lags: Vec<[isize; 2]> = (0..ns)
        .map(|i| {
            let m = grid.unravel(i);
            let mut l = [0isize; 2];
            for j in 0..d {
                l[j] = grid.min_image(j, m[j] as isize);
            }
            l
        })
        .collect();
    let dxv = [grid.dx(0), if d > 1 { grid.dx(1) } else { 0.0 }];
    let lag_vec = |l: &[isize; 2]| [l[0] as f64 * dxv[0], l[1] as f64 * dxv[1]];
    // u = s + t (mod n) for every lag pair
    let uidx: Vec<usize> = (0..ns * ns)
        .map(|st| {
            let (s, t) = (lags[st / ns], lags[st % ns]);
            let mut u = [0usize; 2];
            for j in 0..d {
                u[j] = (s[j] + t[j]).rem_euclid(nn[j] as isize) as usize;
            }
            grid.ravel(u)
        })
        .collect();
    // a constant field gives a flux phase that depends on the lags only
    let lag_phase: Option<Vec<C64>> = match (&mag.kind, magnetic) {
        (crate::magnetic::FieldKind::Constant { .. }, true) => Some(
            (0..ns * ns)
                .map(|st| {
                    let (y, z) = (lag_vec(&lags[st / ns]), lag_vec(&lags[st % ns]));
                    mag.flux_triangle(&[0.0, 0.0], &y, &z).map(|fl| C64::from_polar(1.0, mag.lambda * fl.value / e))
                })
                .collect::<Result<_>>()?,
        ),
        _ => None,
    };
    let mut out = vec![C64::new(0.0, 0.0); ns * ns * fib_o];
    let mut h = vec![C64::new(0.0, 0.0); ns * fib_o];
    let mut prod = vec![C64::new(0.0, 0.0); fib_o];
    let mut cf_of = vec![0usize; ns];
    for a in 0..ns {
        h.iter_mut().for_each(|v| *v = C64::new(0.0, 0.0));
        let ai = grid.unravel(a);
        let xa = grid.x_point(a);
        for (ti, t) in lags.iter().enumerate() {
            cf_of[ti] = half_idx([2 * ai[0] as isize - t[0], 2 * ai[1] as isize - t[1]]);
        }
        for (si, s) in lags.iter().enumerate() {
            let cg = half_idx([2 * ai[0] as isize + s[0], 2 * ai[1] as isize + s[1]]);
            let grow = &tg[cg * ns * fib_g..(cg + 1) * ns * fib_g];
            for ti in 0..ns {
                let cf = cf_of[ti];
                let fv = &tf[(cf * ns + si) * fib_f..(cf * ns + si + 1) * fib_f];
                let gv = &grow[ti * fib_g..(ti + 1) * fib_g];
                let w = if let Some(tab) = &lag_phase {
                    tab[si * ns + ti]
                } else if magnetic {
                    let (y, z) = (lag_vec(s), lag_vec(&lags[ti]));
                    let qpt = [e * (xa[0] - (y[0] + z[0]) / 2.0), e * (xa[1] - (y[1] + z[1]) / 2.0)];
                    C64::from_polar(1.0, mag.lambda * mag.flux_triangle(&qpt, &y, &z)?.value / e)
                } else {
                    C64::new(1.0, 0.0)
                };
                let ui = uidx[si * ns + ti];
                if fib_o == 1 {
                    h[ui] += w * fv[0] * gv[0];
                } else {
                    matmul_small(fv, gv, &mut prod, p, q, r);
                    for k in 0..fib_o {
                        h[ui * fib_o + k] += w * prod[k];
                    }
                }
            }
        }
        // e^{i xi_k u dx} = (-1)^u e^{2 pi i k u / n}
        for ui in 0..ns {
            let um = grid.unravel(ui);
            let odd = (0..d).filter(|&j| um[j] % 2 == 1).count() % 2 == 1;
            if odd {
                h[ui * fib_o..(ui + 1) * fib_o].iter_mut().for_each(|v| *v = -*v);
            }
        }
        let mut shape = nn.clone();
        shape.push(fib_o);
        for j in 0..d {
            fft_axis(&mut h, &shape, j, true);
        }
        let w = grid.cell_volume().powi(2);
        for (k, v) in h.iter().enumerate() {
            out[a * ns * fib_o + k] = v * w;
        }
    }
    Symbol::from_values(grid, f.eps, p, r, out)
}

/// Magnetic Poisson bracket
/// `{f,g} = sum_j d_xi_j f d_r_j g - d_r_j f d_xi_j g + lambda sum_jk B_jk d_xi_j f d_xi_k g`
/// with the fiber order kept (`f` on the left).
pub fn poisson_bracket_magnetic(f: &Symbol, g: &Symbol, mag: &MagneticData) -> Result<Symbol> {
    poisson_bracket_with(f, g, mag, Scheme::FiniteDifference)
}

pub fn poisson_bracket_with(f: &Symbol, g: &Symbol, mag: &MagneticData, scheme: Scheme) -> Result<Symbol> {
    if !composable(f, g) {
        return Err(Error::Composability(format!("f.n_in={} but g.n_out={}", f.n_in, g.n_out)));
    }
    check_scale(f.eps, &f.grid, mag)?;
    let d = f.grid.d();
    let dfx: Vec<Symbol> = (0..d).map(|j| partial(f, PhaseAxis::Position(j), scheme)).collect::<Result<_>>()?;
    let dfk: Vec<Symbol> = (0..d).map(|j| partial(f, PhaseAxis::Momentum(j), scheme)).collect::<Result<_>>()?;
    let dgx: Vec<Symbol> = (0..d).map(|j| partial(g, PhaseAxis::Position(j), scheme)).collect::<Result<_>>()?;
    let dgk: Vec<Symbol> = (0..d).map(|j| partial(g, PhaseAxis::Momentum(j), scheme)).collect::<Result<_>>()?;
    let mut out = Symbol::zeros(&f.grid, f.eps, f.n_out, g.n_in);
    for j in 0..d {
        out = out.add(&dfk[j].pointwise_mul(&dgx[j])?)?;
        out = out.sub(&dfx[j].pointwise_mul(&dgk[j])?)?;
    }
    if d == 2 && mag.lambda != 0.0 {
        let cross = dfk[0].pointwise_mul(&dgk[1])?.sub(&dfk[1].pointwise_mul(&dgk[0])?)?;
        let ns = f.grid.n_states();
        let fib = out.fib();
        for ix in 0..ns {
            let r = f.r_point(ix);
            let b = mag.lambda * mag.b12(&r)?;
            for ik in 0..ns {
                let o = out.at_mut(ix, ik);
                let c = cross.at(ix, ik);
                for k in 0..fib {
                    o[k] += c[k] * b;
                }
            }
        }
    }
    Ok(out)
}

/// Terms of `f # g = f g - eps (i/2) {f, g} + O(eps^2)` up to `order` (0 or 1).
pub fn weyl_product_expansion(f: &Symbol, g: &Symbol, mag: &MagneticData, order: usize) -> Result<FormalSeries> {
    weyl_product_expansion_with(f, g, mag, order, Scheme::FiniteDifference)
}

pub fn weyl_product_expansion_with(f: &Symbol, g: &Symbol, mag: &MagneticData, order: usize, scheme: Scheme) -> Result<FormalSeries> {
    if order > 1 {
        return Err(Error::Capability("expansion terms beyond first order are not available".into()));
    }
    let mut terms = vec![f.pointwise_mul(g)?];
    if order == 1 {
        terms.push(poisson_bracket_with(f, g, mag, scheme)?.scale(C64::new(0.0, -0.5)));
    }
    FormalSeries::new(terms, f.eps)
}

/// Which side of a derivation identity to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    /// Operator commutator with `Q_j` or `P^A_j`, pulled back by the Wigner transform.
    Exact,
    /// `ad_x_j f = i eps d_xi_j f`, `ad_xi_j f = -i eps d_r_j f - i eps lambda sum_k B_jk d_xi_k f`.
    Expanded(Scheme),
}

/// Kernel of `[Q_j, Op(f)]`: `eps (x - y)_j K(x, y)`.
pub fn ad_position_kernel(k: &OperatorKernel, j: usize) -> OperatorKernel {
    let g = &k.grid;
    let ns = g.n_states();
    let fib = k.n_out * k.n_in;
    let mut out = k.clone();
    for a in 0..ns {
        let xa = g.x_point(a)[j];
        for b in 0..ns {
            let w = k.eps * (xa - g.x_point(b)[j]);
            let o = (a * ns + b) * fib;
            out.values[o..o + fib].iter_mut().for_each(|v| *v *= w);
        }
    }
    out
}

/// Kernel of `[P^A_j, Op(f)]`: `-i (d_x + d_y)_j K - lambda (A_j(eps x) - A_j(eps y)) K`.
pub fn ad_momentum_kernel(k: &OperatorKernel, j: usize, mag: &MagneticData) -> Result<OperatorKernel> {
    let g = &k.grid;
    let d = g.d();
    let ns = g.n_states();
    let fib = k.n_out * k.n_in;
    let mut shape = g.ns().to_vec();
    shape.extend_from_slice(g.ns());
    shape.push(fib);
    let mut da = k.values.clone();
    derivative_axis(&mut da, &shape, j, g.dx(j));
    let mut db = k.values.clone();
    derivative_axis(&mut db, &shape, d + j, g.dx(j));
    let aj: Vec<f64> = if mag.lambda == 0.0 {
        vec![0.0; ns]
    } else {
        (0..ns)
            .map(|a| {
                let x = g.x_point(a);
                let r = [mag.eps * x[0], mag.eps * x[1]];
                mag.potential(&r[..d]).map(|v| v[j])
            })
            .collect::<Result<_>>()?
    };
    let mut out = k.clone();
    for a in 0..ns {
        for b in 0..ns {
            let w = mag.lambda * (aj[a] - aj[b]);
            let o = (a * ns + b) * fib;
            for q in o..o + fib {
                out.values[q] = -I * (da[q] + db[q]) - k.values[q] * w;
            }
        }
    }
    Ok(out)
}

/// `ad_{x_j}(f) = x_j # f - f # x_j` or `ad_{xi_j}(f) = xi_j # f - f # xi_j`.
pub fn derivation(f: &Symbol, axis: PhaseAxis, mag: &MagneticData, route: Route) -> Result<Symbol> {
    check_scale(f.eps, &f.grid, mag)?;
    let e = f.eps;
    match route {
        Route::Exact => {
            let k = kernel_map(f, mag)?;
            let c = match axis {
                PhaseAxis::Position(j) => ad_position_kernel(&k, j),
                PhaseAxis::Momentum(j) => ad_momentum_kernel(&k, j, mag)?,
            };
            crate::quantize::wigner(&c, mag)
        }
        Route::Expanded(scheme) => match axis {
            PhaseAxis::Position(j) => Ok(partial(f, PhaseAxis::Momentum(j), scheme)?.scale(I * e)),
            PhaseAxis::Momentum(j) => {
                let mut out = partial(f, PhaseAxis::Position(j), scheme)?.scale(-I * e);
                if f.grid.d() == 2 && mag.lambda != 0.0 {
                    let k = 1 - j;
                    let dk = partial(f, PhaseAxis::Momentum(k), scheme)?;
                    let ns = f.grid.n_states();
                    for ix in 0..ns {
                        let r = f.r_point(ix);
                        let bjk = mag.field(&r)?[j][k];
                        let w = -I * e * mag.lambda * bjk;
                        for ik in 0..ns {
                            let o = out.at_mut(ix, ik);
                            for (v, s) in o.iter_mut().zip(dk.at(ix, ik)) {
                                *v += s * w;
                            }
                        }
                    }
                }
                Ok(out)
            }
        },
    }
}

/// Kernel of the iterated derivation `d^{(a, alpha)} f`, normalized to approximate
/// `d_r^a d_xi^alpha f`: position derivatives via `(i/eps) ad_xi`, momentum
/// derivatives via `(-i/eps) ad_x`; momentum commutators are outermost.
pub fn iterated_derivation_kernel(f: &Symbol, a: &[usize], alpha: &[usize], mag: &MagneticData) -> Result<OperatorKernel> {
    let mut k = kernel_map(f, mag)?;
    let e = f.eps;
    for (j, &n) in alpha.iter().enumerate() {
        for _ in 0..n {
            k = ad_position_kernel(&k, j);
            k.values.iter_mut().for_each(|v| *v *= -I / e);
        }
    }
    for (j, &n) in a.iter().enumerate() {
        for _ in 0..n {
            k = ad_momentum_kernel(&k, j, mag)?;
            k.values.iter_mut().for_each(|v| *v *= I / e);
        }
    }
    Ok(k)
}

/// `|| Op^A(w_{-m + rho |alpha|} # d^{(a, alpha)} f) ||`; boundedness under grid
/// refinement is the numerical stand-in for membership in `S^m_{rho,0}`.
pub fn beals_diagnostic(f: &Symbol, mag: &MagneticData, a: &[usize], alpha: &[usize], m: f64, rho: f64) -> Result<f64> {
    let k = iterated_derivation_kernel(f, a, alpha, mag)?;
    let op = crate::quantize::assemble(&k);
    let order = -m + rho * alpha.iter().sum::<usize>() as f64;
    let w = crate::funcalc::weight_operator(&f.grid, f.eps, f.n_out, order, mag)?;
    Ok(w.compose(&op)?.norm())
}

/// Smooth partition of unity on the lattice `spacing Z^d`: `chi(x) = b(x) / sqrt(sum_gamma b(x - gamma)^2)`
/// with `b(x) = prod_j exp(1 - 1/(1 - (x_j/width)^2))`. Frequencies are integer multiples of `base_freq`.
#[derive(Clone, Copy, Debug)]
pub struct GaborFrame {
    pub spacing: f64,
    pub width: f64,
    pub base_freq: f64,
}

pub(crate) fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - t * t)).exp()
    }
}

impl GaborFrame {
    pub fn new(spacing: f64, width: f64, base_freq: f64) -> Result<Self> {
        if !(width > spacing / 2.0) || !(spacing > 0.0) {
            return Err(Error::Capability("frame bumps must overlap: width > spacing / 2".into()));
        }
        Ok(Self { spacing, width, base_freq })
    }

    fn chi1(&self, t: f64) -> f64 {
        let b = bump(t / self.width);
        if b == 0.0 {
            return 0.0;
        }
        let reach = (self.width / self.spacing).ceil() as i64 + 1;
        let base = (t / self.spacing).round() as i64;
        let s: f64 = (base - reach..=base + reach).map(|m| bump((t - m as f64 * self.spacing) / self.width).powi(2)).sum();
        b / s.sqrt()
    }

    /// `chi(x)`.
    pub fn chi(&self, x: &[f64]) -> f64 {
        x.iter().map(|&t| self.chi1(t)).product()
    }

    /// `G^A_{gamma,k}(x) = (2 pi)^{d/2} e^{-i lambda/eps int_[eps x, eps gamma] A} chi(x - gamma) e^{i k.(x - gamma)}` on the grid.
    pub fn atom(&self, grid: &crate::PhaseGrid, mag: &MagneticData, gamma: &[f64], k: &[i64]) -> Result<Vec<C64>> {
        let d = grid.d();
        let e = mag.eps;
        let pref = (2.0 * std::f64::consts::PI).powf(d as f64 / 2.0);
        (0..grid.n_states())
            .map(|a| {
                let x = grid.x_point(a);
                let rel: Vec<f64> = (0..d).map(|j| x[j] - gamma[j]).collect();
                let c = self.chi(&rel);
                if c == 0.0 {
                    return Ok(C64::new(0.0, 0.0));
                }
                let mut ph: f64 = (0..d).map(|j| k[j] as f64 * self.base_freq * rel[j]).sum();
                if !mag.is_trivial() {
                    let s: Vec<f64> = (0..d).map(|j| e * x[j]).collect();
                    let t: Vec<f64> = (0..d).map(|j| e * gamma[j]).collect();
                    ph -= mag.lambda / e * mag.line_integral_a(&s, &t)?;
                }
                Ok(C64::from_polar(pref * c, ph))
            })
            .collect()
    }
}

/// Frame matrix elements `<G_{gamma',k'} (x) e_i, F G_{gamma,k} (x) e_j>`, row-major `n_out x n_in`.
pub fn gabor_coefficients(
    op: &OperatorMatrix,
    frame: &GaborFrame,
    gamma: &[f64],
    gamma2: &[f64],
    k: &[i64],
    k2: &[i64],
    mag: &MagneticData,
) -> Result<Vec<C64>> {
    let g = &op.grid;
    let ns = g.n_states();
    let ga = frame.atom(g, mag, gamma, k)?;
    let gb = frame.atom(g, mag, gamma2, k2)?;
    let w = g.cell_volume();
    let (p, q) = (op.n_out, op.n_in);
    let mut out = vec![C64::new(0.0, 0.0); p * q];
    for j in 0..q {
        let mut v = vec![C64::new(0.0, 0.0); ns * q];
        for a in 0..ns {
            v[a * q + j] = ga[a];
        }
        let fv = op.apply(&v);
        for i in 0..p {
            let mut s = C64::new(0.0, 0.0);
            for a in 0..ns {
                s += gb[a].conj() * fv[a * p + i];
            }
            out[i * q + j] = s * w;
        }
    }
    Ok(out)
}
