//! Bloch fiber operators of `-d^2/dy^2 + 2 cos(2 pi y)` and the Bloch symbol built from them.

use std::f64::consts::PI;

use faer::Mat;
use magweyl::equivariant::{bloch_symbol, fiber_operator, growth_exponent, sobolev_weight, Lattice, PeriodicField};
use magweyl::C64;

fn main() -> magweyl::Result<()> {
    let lat = Lattice::cubic(1, 1.0, 16, 5, 5)?;
    let v = PeriodicField::cosine(1.0, [1, 0]);
    let modes = 6;
    let nm = 2 * modes + 1;
    for k in [0.0, PI / 4.0, PI / 2.0, PI] {
        let h = fiber_operator(&lat, &v, None, &[k], modes)?;
        let m = Mat::<C64>::from_fn(nm, nm, |i, j| h[i * nm + j]);
        let e = m.self_adjoint_eigen(faer::Side::Lower).expect("eigensolver");
        let bands: Vec<String> = (0..3).map(|i| format!("{:9.5}", e.S().column_vector()[i].re)).collect();
        println!("k = {k:.4}: {}", bands.join(" "));
    }

    let eps = lat.cover_grid()?.dxi(0);
    let h = bloch_symbol(&lat, &v, |r| 0.5 * (2.0 * r[0]).cos(), 4, eps, 1)?;
    let growth = growth_exponent(&h, Some(&sobolev_weight(&lat, 4, 2.0)))?;
    println!("equivariance defect {:.2e}, growth exponent {:.3}", h.defect, growth.exponent);
    Ok(())
}
