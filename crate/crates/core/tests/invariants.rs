use std::f64::consts::PI;

use magweyl::container::{read_operator, read_symbol, write_operator, write_symbol};
use magweyl::equivariant::{inverse_zak, zak_transform, Lattice};
use magweyl::moyal::weyl_product_exact;
use magweyl::quantize::{adjoint_check, gauge_covariance_defect, kernel_map, quantize, wigner};
use magweyl::stats::order_fit;
use magweyl::trace::trace_formula_check;
use magweyl::{FieldKind, MagneticData, PhaseGrid, ScalarField, Symbol, C64};
use proptest::prelude::*;

/// Decaying symbol: Gaussian envelope times a few random plane waves per fiber entry.
/// Adjoint identities need the kernel to vanish at lag `L`, where the periodic
/// midpoint of `(x, y)` and `(y, x)` differ; those tests use a box with room for it.
fn decaying(g: &PhaseGrid, eps: f64, fiber: usize, coeffs: &[(f64, f64, f64, f64)]) -> Symbol {
    let l = g.x_extent(0) * eps;
    Symbol::from_fn(g, eps, fiber, fiber, |r, xi, out| {
        let env = (-(r[0] * r[0]) / (0.03 * l * l) - xi[0] * xi[0] / 2.0).exp();
        for (e, o) in out.iter_mut().enumerate() {
            let (p, q, a, b) = coeffs[e % coeffs.len()];
            *o = C64::new(a, b) * C64::from_polar(env, p * r[0] + q * xi[0]);
        }
    })
}

fn coeffs() -> impl Strategy<Value = Vec<(f64, f64, f64, f64)>> {
    prop::collection::vec((-2.0..2.0f64, -2.0..2.0f64, -1.0..1.0f64, -1.0..1.0f64), 4)
}

fn field() -> impl Strategy<Value = MagneticData> {
    (0.0..0.6f64, 0.2..1.0f64, 0.0..1.0f64, 0.5..1.0f64)
        .prop_map(|(amp, k, lambda, eps)| MagneticData::new(1, FieldKind::Wave { amp, k }, lambda, eps).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn wigner_inverts_kernel_map(c in coeffs(), mag in field(), fiber in 1usize..3) {
        let g = PhaseGrid::new(1, 32, 6.0).unwrap();
        let f = decaying(&g, mag.eps, fiber, &c);
        let back = wigner(&kernel_map(&f, &mag).unwrap(), &mag).unwrap();
        prop_assert!(back.max_abs_diff(&f).unwrap() <= 1e-12 * (1.0 + f.sup_norm()));
    }

    #[test]
    fn quantization_commutes_with_adjoint(c in coeffs(), mag in field()) {
        let g = PhaseGrid::new(1, 64, 14.0).unwrap();
        let f = decaying(&g, mag.eps, 2, &c);
        prop_assert!(adjoint_check(&f, &mag).unwrap() <= 1e-10);
    }

    #[test]
    fn product_reverses_under_adjoint(c1 in coeffs(), c2 in coeffs(), mag in field()) {
        let g = PhaseGrid::new(1, 64, 14.0).unwrap();
        let f = decaying(&g, mag.eps, 2, &c1);
        let h = decaying(&g, mag.eps, 2, &c2);
        let lhs = weyl_product_exact(&f, &h, &mag).unwrap().adjoint();
        let rhs = weyl_product_exact(&h.adjoint(), &f.adjoint(), &mag).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-10 * (1.0 + rhs.sup_norm()));
    }

    #[test]
    fn product_is_associative(c1 in coeffs(), c2 in coeffs(), c3 in coeffs(), mag in field()) {
        let g = PhaseGrid::new(1, 16, 4.0).unwrap();
        let (f, h, k) = (decaying(&g, mag.eps, 1, &c1), decaying(&g, mag.eps, 1, &c2), decaying(&g, mag.eps, 1, &c3));
        let a = weyl_product_exact(&weyl_product_exact(&f, &h, &mag).unwrap(), &k, &mag).unwrap();
        let b = weyl_product_exact(&f, &weyl_product_exact(&h, &k, &mag).unwrap(), &mag).unwrap();
        prop_assert!(a.max_abs_diff(&b).unwrap() <= 1e-10 * (1.0 + a.sup_norm()));
    }

    #[test]
    fn trace_equals_phase_space_sum(c in coeffs(), mag in field()) {
        let g = PhaseGrid::new(1, 32, 6.0).unwrap();
        let f = decaying(&g, mag.eps, 2, &c);
        let t = trace_formula_check(&f, &mag).unwrap();
        prop_assert!((t.lhs - t.rhs).norm() <= 1e-10 * (1.0 + t.rhs.norm()));
    }

    #[test]
    fn gauge_transformations_are_unitary_conjugations(c in coeffs(), amp in -2.0..2.0f64, mag in field()) {
        let g = PhaseGrid::new(1, 32, 6.0).unwrap();
        let f = decaying(&g, mag.eps, 1, &c);
        let theta = ScalarField::Sine { amp, wave: [PI / (mag.eps * 6.0), 0.0] };
        prop_assert!(gauge_covariance_defect(&f, &mag, &theta).unwrap() <= 1e-8);
    }

    #[test]
    fn quantized_hermitian_symbols_are_hermitian(c in coeffs(), mag in field()) {
        let g = PhaseGrid::new(1, 64, 14.0).unwrap();
        let f = decaying(&g, mag.eps, 2, &c);
        let h = f.add(&f.adjoint()).unwrap();
        let op = quantize(&h, &mag).unwrap();
        prop_assert!(op.hermiticity_defect() <= 1e-10);
    }

    #[test]
    fn zak_is_unitary(vals in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 8 * 4)) {
        let lat = Lattice::cubic(1, 1.0, 8, 4, 5).unwrap();
        let psi: Vec<C64> = vals.iter().map(|(a, b)| C64::new(*a, *b)).collect();
        let n0 = psi.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        let z = zak_transform(&psi, &lat).unwrap();
        prop_assert!((z.norm() - n0).abs() <= 1e-12 * (1.0 + n0));
        let back = inverse_zak(&z, &lat).unwrap();
        let diff = back.iter().zip(&psi).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        prop_assert!(diff <= 1e-12 * (1.0 + n0));
    }

    #[test]
    fn containers_round_trip_bit_exactly(c in coeffs(), eps in 0.1..1.0f64, fiber in 1usize..3) {
        let g = PhaseGrid::new(1, 8, 3.0).unwrap();
        let f = decaying(&g, eps, fiber, &c);
        let mut buf = Vec::new();
        write_symbol(&mut buf, &f).unwrap();
        prop_assert_eq!(read_symbol(&mut buf.as_slice(), eps).unwrap(), f.clone());
        let op = quantize(&f, &MagneticData::zero(1, eps).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_operator(&mut buf, &op).unwrap();
        let back = read_operator(&mut buf.as_slice(), eps).unwrap();
        prop_assert_eq!(back.m, op.m);
    }

    #[test]
    fn order_fit_recovers_power_laws(p in 0.5..4.0f64, c in 0.1..10.0f64) {
        let h = [0.2f64, 0.1, 0.05];
        let y: Vec<f64> = h.iter().map(|v| c * v.powf(p)).collect();
        prop_assert!((order_fit(&h, &y) - p).abs() <= 1e-10);
    }
}
