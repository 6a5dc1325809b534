//! `i[P_1, P_2]` reproduces the field strength in a constant magnetic field.

use magweyl::quantize::apply_momentum;
use magweyl::{FieldKind, MagneticData, PhaseGrid, C64};

fn main() -> magweyl::Result<()> {
    let (eps, lambda, b) = (0.5, 1.0, 1.0);
    let grid = PhaseGrid::new(2, 64, 6.0)?;
    let mag = MagneticData::new(2, FieldKind::Constant { b }, lambda, eps)?;

    let psi: Vec<C64> = (0..grid.n_states())
        .map(|a| {
            let x = grid.x_point(a);
            C64::from_polar((-(x[0] * x[0] + x[1] * x[1]) / 1.125).exp(), 0.4 * x[0])
        })
        .collect();
    let p12 = apply_momentum(&grid, &mag, 0, &apply_momentum(&grid, &mag, 1, &psi)?)?;
    let p21 = apply_momentum(&grid, &mag, 1, &apply_momentum(&grid, &mag, 0, &psi)?)?;

    let i = C64::new(0.0, 1.0);
    let (mut num, mut den) = (0.0, 0.0);
    for a in 0..psi.len() {
        num += (i * (p12[a] - p21[a]) - psi[a] * (eps * lambda * b)).norm_sqr();
        den += psi[a].norm_sqr();
    }
    println!("|| i[P1,P2] psi - eps lambda B psi || / ||psi|| = {:.2e}", (num / den).sqrt());
    Ok(())
}
