//! Resolvent of the harmonic oscillator symbol and the first resolvent identity.

use magweyl::funcalc::moyal_resolvent;
use magweyl::moyal::weyl_product_exact;
use magweyl::quantize::quantize;
use magweyl::{MagneticData, PhaseGrid, Symbol, C64};

fn main() -> magweyl::Result<()> {
    let grid = PhaseGrid::new(1, 64, 8.0)?;
    let mag = MagneticData::zero(1, 1.0)?;
    let h = Symbol::scalar_fn(&grid, 1.0, 1, |r, xi| C64::new(r[0] * r[0] + xi[0] * xi[0], 0.0));

    let (z1, z2) = (C64::new(-1.0, 0.0), C64::new(0.5, 1.0));
    let r1 = moyal_resolvent(&h, z1, &mag)?;
    let r2 = moyal_resolvent(&h, z2, &mag)?;
    let lhs = r1.sub(&r2)?;
    let rhs = weyl_product_exact(&r1, &r2, &mag)?.scale(z1 - z2);
    println!("R(z1) - R(z2) vs (z1 - z2) R(z1) # R(z2): {:.2e}", lhs.rel_diff(&rhs)?);

    // (h - z1) # R(z1) = 1
    let shifted = h.sub(&Symbol::scalar_fn(&grid, 1.0, 1, |_, _| z1))?;
    let one = quantize(&weyl_product_exact(&shifted, &r1, &mag)?, &mag)?;
    let n = one.m.nrows();
    let off: f64 = (0..n).map(|i| (one.m[(i, i)] - 1.0).norm()).fold(0.0, f64::max);
    println!("max |diag - 1| of Op((h - z1) # R(z1)): {off:.2e}");
    Ok(())
}
