//! Magnetic fields, vector potentials and the line/flux integrals built from them.
//!
//! Sign convention: `B_jl = d_l A_j - d_j A_l`, so that with `P^A = -i grad - lambda A(eps x)`
//! the commutator reads `i[P_j, P_l] = eps lambda B_jl(Q)`. The flux through an oriented
//! triangle is `int_T B_12 dr_1 dr_2 = -(circulation of A around its boundary)`.

use crate::error::{Error, Result};

/// Composite Gauss-Legendre panels never exceed this length (position units).
pub const LINE_PANEL: f64 = 1.0;
/// Triangles are subdivided until the longest edge is below this length.
pub const FLUX_PANEL: f64 = 1.0;

const GL8_X: [f64; 4] = [0.183_434_642_495_649_8, 0.525_532_409_916_329, 0.796_666_477_413_626_7, 0.960_289_856_497_536_3];
const GL8_W: [f64; 4] = [0.362_683_783_378_362, 0.313_706_645_877_887_3, 0.222_381_034_453_374_5, 0.101_228_536_290_376_3];

/// Gauss-Legendre nodes and weights of order 8 on `[0, 1]`.
pub fn gauss_legendre_8() -> ([f64; 8], [f64; 8]) {
    let mut x = [0.0; 8];
    let mut w = [0.0; 8];
    for i in 0..4 {
        x[2 * i] = 0.5 - 0.5 * GL8_X[i];
        x[2 * i + 1] = 0.5 + 0.5 * GL8_X[i];
        w[2 * i] = 0.5 * GL8_W[i];
        w[2 * i + 1] = 0.5 * GL8_W[i];
    }
    (x, w)
}

/// Seven-point symmetric rule on a triangle: barycentric nodes and weights (sum 1).
pub fn triangle_rule_7() -> ([[f64; 3]; 7], [f64; 7]) {
    let s = 15f64.sqrt();
    let a1 = (6.0 - s) / 21.0;
    let a2 = (6.0 + s) / 21.0;
    let w1 = (155.0 - s) / 1200.0;
    let w2 = (155.0 + s) / 1200.0;
    let b1 = 1.0 - 2.0 * a1;
    let b2 = 1.0 - 2.0 * a2;
    (
        [
            [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            [a1, a1, b1],
            [a1, b1, a1],
            [b1, a1, a1],
            [a2, a2, b2],
            [a2, b2, a2],
            [b2, a2, a2],
        ],
        [0.225, w1, w1, w1, w2, w2, w2],
    )
}

/// Vector potential sampled on a regular box, interpolated multilinearly.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledPotential {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub m: [usize; 2],
    /// `A` at the box nodes, first axis outermost.
    pub a: Vec<[f64; 2]>,
}

impl SampledPotential {
    /// Samples `a(r)` on `m` nodes per axis spanning `[lo, hi]`.
    pub fn from_fn(d: usize, lo: [f64; 2], hi: [f64; 2], m: [usize; 2], a: impl Fn(&[f64]) -> [f64; 2]) -> Self {
        let m = if d == 1 { [m[0], 1] } else { m };
        let mut vals = Vec::with_capacity(m[0] * m[1]);
        for i in 0..m[0] {
            for j in 0..m[1] {
                let mut r = [0.0; 2];
                r[0] = lo[0] + (hi[0] - lo[0]) * i as f64 / (m[0] - 1) as f64;
                if d == 2 {
                    r[1] = lo[1] + (hi[1] - lo[1]) * j as f64 / (m[1] - 1) as f64;
                }
                vals.push(a(&r[..d]));
            }
        }
        Self { lo, hi, m, a: vals }
    }

    fn locate(&self, d: usize, r: &[f64]) -> Result<([usize; 2], [f64; 2], [f64; 2])> {
        let mut idx = [0usize; 2];
        let mut t = [0.0; 2];
        let mut h = [1.0; 2];
        for j in 0..d {
            let tol = 1e-12 * (self.hi[j] - self.lo[j]).abs().max(1.0);
            if !(r[j] >= self.lo[j] - tol && r[j] <= self.hi[j] + tol) {
                return Err(Error::OutOfDomain(r.to_vec()));
            }
            h[j] = (self.hi[j] - self.lo[j]) / (self.m[j] - 1) as f64;
            let u = ((r[j] - self.lo[j]) / h[j]).clamp(0.0, (self.m[j] - 1) as f64);
            let i = (u.floor() as usize).min(self.m[j] - 2);
            idx[j] = i;
            t[j] = u - i as f64;
        }
        Ok((idx, t, h))
    }

    fn node(&self, i: usize, j: usize) -> [f64; 2] {
        self.a[i * self.m[1] + j]
    }

    fn value(&self, d: usize, r: &[f64]) -> Result<[f64; 2]> {
        let (idx, t, _) = self.locate(d, r)?;
        if d == 1 {
            let a0 = self.node(idx[0], 0);
            let a1 = self.node(idx[0] + 1, 0);
            return Ok([a0[0] + t[0] * (a1[0] - a0[0]), 0.0]);
        }
        let (i, j) = (idx[0], idx[1]);
        let mut out = [0.0; 2];
        for c in 0..2 {
            let v00 = self.node(i, j)[c];
            let v10 = self.node(i + 1, j)[c];
            let v01 = self.node(i, j + 1)[c];
            let v11 = self.node(i + 1, j + 1)[c];
            out[c] = v00 * (1.0 - t[0]) * (1.0 - t[1]) + v10 * t[0] * (1.0 - t[1]) + v01 * (1.0 - t[0]) * t[1] + v11 * t[0] * t[1];
        }
        Ok(out)
    }

    /// `B_12 = d_2 A_1 - d_1 A_2` of the bilinear interpolant.
    fn b12(&self, r: &[f64]) -> Result<f64> {
        let (idx, t, h) = self.locate(2, r)?;
        let (i, j) = (idx[0], idx[1]);
        let d1_a2 = ((self.node(i + 1, j)[1] - self.node(i, j)[1]) * (1.0 - t[1])
            + (self.node(i + 1, j + 1)[1] - self.node(i, j + 1)[1]) * t[1])
            / h[0];
        let d2_a1 = ((self.node(i, j + 1)[0] - self.node(i, j)[0]) * (1.0 - t[0])
            + (self.node(i + 1, j + 1)[0] - self.node(i + 1, j)[0]) * t[0])
            / h[1];
        Ok(d2_a1 - d1_a2)
    }
}

/// Builtin field families.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldKind {
    Zero,
    /// Constant potential `A = a`, no field.
    ConstantPotential { a: [f64; 2] },
    /// Constant field `B_12 = b` in the symmetric gauge `A = (b r_2 / 2, -b r_1 / 2)`.
    Constant { b: f64 },
    /// Landau gauge `A = (0, slope r_1)`, hence `B_12 = -slope`.
    Landau { slope: f64 },
    /// `A = (0, sum_k c_k r_1^(k+1)/(k+1))`, hence `B_12 = -sum_k c_k r_1^k`.
    Polynomial { coeffs: Vec<f64> },
    /// Periodic `A_d = amp sin(k r_1)` on the last axis; in `d = 2` this gives `B_12 = -amp k cos(k r_1)`.
    Wave { amp: f64, k: f64 },
    Sampled(SampledPotential),
}

/// Smooth real function on position space, used for gauge changes `A -> A + eps grad(theta)`.
#[derive(Clone, Debug, PartialEq)]
pub enum ScalarField {
    Zero,
    Constant(f64),
    /// `amp sin(w . r)`
    Sine { amp: f64, wave: [f64; 2] },
    /// `amp exp(-|r|^2 / (2 width^2))`
    Gaussian { amp: f64, width: f64 },
}

impl ScalarField {
    pub fn value(&self, r: &[f64]) -> f64 {
        match self {
            ScalarField::Zero => 0.0,
            ScalarField::Constant(c) => *c,
            ScalarField::Sine { amp, wave } => amp * dot(wave, r).sin(),
            ScalarField::Gaussian { amp, width } => amp * (-norm2(r) / (2.0 * width * width)).exp(),
        }
    }

    pub fn gradient(&self, r: &[f64]) -> [f64; 2] {
        let mut g = [0.0; 2];
        match self {
            ScalarField::Zero | ScalarField::Constant(_) => {}
            ScalarField::Sine { amp, wave } => {
                let c = amp * dot(wave, r).cos();
                for (j, gj) in g.iter_mut().enumerate().take(r.len()) {
                    *gj = c * wave[j];
                }
            }
            ScalarField::Gaussian { amp, width } => {
                let v = amp * (-norm2(r) / (2.0 * width * width)).exp();
                for (j, gj) in g.iter_mut().enumerate().take(r.len()) {
                    *gj = -v * r[j] / (width * width);
                }
            }
        }
        g
    }
}

fn dot(w: &[f64; 2], r: &[f64]) -> f64 {
    r.iter().enumerate().map(|(j, x)| w[j] * x).sum()
}

fn norm2(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Field data: potential, field, coupling `lambda` and semiclassical scale `eps`.
#[derive(Clone, Debug, PartialEq)]
pub struct MagneticData {
    pub d: usize,
    pub kind: FieldKind,
    pub lambda: f64,
    pub eps: f64,
    pub gauge: ScalarField,
}

/// Result of a flux evaluation; `degenerate_dim` is raised for `d = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Flux {
    pub value: f64,
    pub degenerate_dim: bool,
}

impl MagneticData {
    pub fn new(d: usize, kind: FieldKind, lambda: f64, eps: f64) -> Result<Self> {
        if d == 0 || d > 2 {
            return Err(Error::Grid(format!("dimension {d} not supported")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Schema(format!("lambda={lambda} must be non-negative")));
        }
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::Schema(format!("eps={eps} must lie in (0, 1]")));
        }
        let needs_2d = matches!(kind, FieldKind::Constant { .. } | FieldKind::Landau { .. } | FieldKind::Polynomial { .. });
        if needs_2d && d != 2 {
            return Err(Error::Capability("this field kind needs d = 2".into()));
        }
        Ok(Self { d, kind, lambda, eps, gauge: ScalarField::Zero })
    }

    pub fn zero(d: usize, eps: f64) -> Result<Self> {
        Self::new(d, FieldKind::Zero, 0.0, eps)
    }

    /// Same field, potential changed to `A + eps grad(theta)`.
    pub fn with_gauge(&self, theta: ScalarField) -> Self {
        let mut m = self.clone();
        m.gauge = theta;
        m
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        let mut m = self.clone();
        m.lambda = lambda;
        m
    }

    pub fn is_trivial(&self) -> bool {
        self.lambda == 0.0 || (matches!(self.kind, FieldKind::Zero) && matches!(self.gauge, ScalarField::Zero | ScalarField::Constant(_)))
    }

    /// Vector potential at `r` (position units), gauge term included.
    pub fn potential(&self, r: &[f64]) -> Result<[f64; 2]> {
        let mut a = [0.0; 2];
        match &self.kind {
            FieldKind::Zero => {}
            FieldKind::ConstantPotential { a: c } => a = *c,
            FieldKind::Constant { b } => {
                a = [0.5 * b * r[1], -0.5 * b * r[0]];
            }
            FieldKind::Landau { slope } => a[1] = slope * r[0],
            FieldKind::Polynomial { coeffs } => {
                a[1] = coeffs.iter().enumerate().map(|(k, c)| c * r[0].powi(k as i32 + 1) / (k as f64 + 1.0)).sum();
            }
            FieldKind::Wave { amp, k } => a[self.d - 1] = amp * (k * r[0]).sin(),
            FieldKind::Sampled(s) => a = s.value(self.d, r)?,
        }
        if !matches!(self.gauge, ScalarField::Zero) {
            let g = self.gauge.gradient(r);
            for j in 0..self.d {
                a[j] += self.eps * g[j];
            }
        }
        Ok(a)
    }

    /// `B_12(r)`; zero in one dimension.
    pub fn b12(&self, r: &[f64]) -> Result<f64> {
        if self.d == 1 {
            return Ok(0.0);
        }
        Ok(match &self.kind {
            FieldKind::Zero | FieldKind::ConstantPotential { .. } => 0.0,
            FieldKind::Constant { b } => *b,
            FieldKind::Landau { slope } => -slope,
            FieldKind::Polynomial { coeffs } => -coeffs.iter().enumerate().map(|(k, c)| c * r[0].powi(k as i32)).sum::<f64>(),
            FieldKind::Wave { amp, k } => -amp * k * (k * r[0]).cos(),
            FieldKind::Sampled(s) => s.b12(r)?,
        })
    }

    /// Antisymmetric field matrix `B_jl(r)`.
    pub fn field(&self, r: &[f64]) -> Result<[[f64; 2]; 2]> {
        let b = self.b12(r)?;
        Ok([[0.0, b], [-b, 0.0]])
    }

    /// `int_[x,y] A = int_0^1 A(x + t(y-x)) . (y-x) dt` by composite order-8 Gauss-Legendre.
    pub fn line_integral_a(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let d = self.d;
        if matches!(self.kind, FieldKind::Zero) && matches!(self.gauge, ScalarField::Zero | ScalarField::Constant(_)) {
            return Ok(0.0);
        }
        let mut dv = [0.0; 2];
        let mut len = 0.0;
        for j in 0..d {
            dv[j] = y[j] - x[j];
            len += dv[j] * dv[j];
        }
        let len = len.sqrt();
        if len == 0.0 {
            return Ok(0.0);
        }
        let panels = (len / LINE_PANEL).ceil().max(1.0) as usize;
        let (gx, gw) = gauss_legendre_8();
        let mut acc = 0.0;
        let mut p = [0.0; 2];
        for k in 0..panels {
            for q in 0..8 {
                let t = (k as f64 + gx[q]) / panels as f64;
                for j in 0..d {
                    p[j] = x[j] + t * dv[j];
                }
                let a = self.potential(&p[..d])?;
                let mut s = 0.0;
                for j in 0..d {
                    s += a[j] * dv[j];
                }
                acc += gw[q] * s;
            }
        }
        Ok(acc / panels as f64)
    }

    /// Flux `Gamma^B(q, q + eps x, q + eps x + eps y)` of the oriented triangle.
    pub fn flux_triangle(&self, q: &[f64], x: &[f64], y: &[f64]) -> Result<Flux> {
        if self.d == 1 {
            return Ok(Flux { value: 0.0, degenerate_dim: true });
        }
        let e = self.eps;
        if let FieldKind::Constant { b } = self.kind {
            return Ok(Flux { value: b * e * e * (x[0] * y[1] - x[1] * y[0]) / 2.0, degenerate_dim: false });
        }
        let p0 = [q[0], q[1]];
        let p1 = [q[0] + e * x[0], q[1] + e * x[1]];
        let p2 = [p1[0] + e * y[0], p1[1] + e * y[1]];
        Ok(Flux { value: self.flux_vertices(p0, p1, p2)?, degenerate_dim: false })
    }

    /// Oriented flux of `B_12` through the triangle with the given vertices.
    pub fn flux_vertices(&self, p0: [f64; 2], p1: [f64; 2], p2: [f64; 2]) -> Result<f64> {
        if self.d == 1 {
            return Ok(0.0);
        }
        let area2 = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0]);
        if area2 == 0.0 {
            return Ok(0.0);
        }
        match self.kind {
            FieldKind::Zero | FieldKind::ConstantPotential { .. } => Ok(0.0),
            FieldKind::Constant { b } => Ok(b * area2 / 2.0),
            FieldKind::Landau { slope } => Ok(-slope * area2 / 2.0),
            _ => self.flux_subdivided(p0, p1, p2, 0),
        }
    }

    fn flux_subdivided(&self, p0: [f64; 2], p1: [f64; 2], p2: [f64; 2], depth: usize) -> Result<f64> {
        let edge = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let longest = edge(p0, p1).max(edge(p1, p2)).max(edge(p2, p0));
        if longest > FLUX_PANEL && depth < 12 {
            let m01 = [(p0[0] + p1[0]) / 2.0, (p0[1] + p1[1]) / 2.0];
            let m12 = [(p1[0] + p2[0]) / 2.0, (p1[1] + p2[1]) / 2.0];
            let m20 = [(p2[0] + p0[0]) / 2.0, (p2[1] + p0[1]) / 2.0];
            return Ok(self.flux_subdivided(p0, m01, m20, depth + 1)?
                + self.flux_subdivided(m01, p1, m12, depth + 1)?
                + self.flux_subdivided(m20, m12, p2, depth + 1)?
                + self.flux_subdivided(m01, m12, m20, depth + 1)?);
        }
        let area = ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p1[1] - p0[1]) * (p2[0] - p0[0])) / 2.0;
        let (bary, w) = triangle_rule_7();
        let mut acc = 0.0;
        for (l, wq) in bary.iter().zip(w) {
            let p = [l[0] * p0[0] + l[1] * p1[0] + l[2] * p2[0], l[0] * p0[1] + l[1] * p1[1] + l[2] * p2[1]];
            acc += wq * self.b12(&p)?;
        }
        Ok(area * acc)
    }

    /// Largest mismatch between the central-difference curl of `A` (step `h`) and `B`,
    /// relative to `max |B|` over the probe points (absolute when the field vanishes).
    pub fn curl_defect(&self, points: &[[f64; 2]], h: f64) -> Result<f64> {
        if self.d == 1 {
            return Ok(0.0);
        }
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for p in points {
            let a = |dx: f64, dy: f64| self.potential(&[p[0] + dx, p[1] + dy]);
            let d2_a1 = (a(0.0, h)?[0] - a(0.0, -h)?[0]) / (2.0 * h);
            let d1_a2 = (a(h, 0.0)?[1] - a(-h, 0.0)?[1]) / (2.0 * h);
            let b = self.b12(p)?;
            worst = worst.max((d2_a1 - d1_a2 - b).abs());
            scale = scale.max(b.abs());
        }
        Ok(if scale > 0.0 { worst / scale } else { worst })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_integrate_polynomials() {
        let (x, w) = gauss_legendre_8();
        let s: f64 = x.iter().zip(w).map(|(x, w)| w * x.powi(15)).sum();
        assert!((s - 1.0 / 16.0).abs() < 1e-14);
        let (b, w) = triangle_rule_7();
        // reference triangle (0,0),(1,0),(0,1): int x^2 y^2 = 1/180, area 1/2
        let s: f64 = b.iter().zip(w).map(|(l, w)| w * (l[1] * l[1]) * (l[2] * l[2])).sum::<f64>() * 0.5;
        assert!((s - 1.0 / 180.0).abs() < 1e-14);
    }

    #[test]
    fn landau_line_integral() {
        let m = MagneticData::new(2, FieldKind::Landau { slope: 3.0 }, 1.0, 1.0).unwrap();
        let v = m.line_integral_a(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((v - 1.5).abs() < 1e-14);
    }

    #[test]
    fn sampled_out_of_domain() {
        let s = SampledPotential::from_fn(2, [-1.0, -1.0], [1.0, 1.0], [5, 5], |r| [r[1], 0.0]);
        let m = MagneticData::new(2, FieldKind::Sampled(s), 1.0, 1.0).unwrap();
        assert!(m.line_integral_a(&[0.0, 0.0], &[0.5, 0.5]).is_ok());
        assert!(matches!(m.line_integral_a(&[0.0, 0.0], &[2.0, 0.0]), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn one_dimensional_flux_is_flagged() {
        let m = MagneticData::zero(1, 1.0).unwrap();
        let f = m.flux_triangle(&[0.0], &[1.0], &[2.0]).unwrap();
        assert!(f.degenerate_dim && f.value == 0.0);
    }
}
