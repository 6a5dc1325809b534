//! Changing the vector potential by a gradient conjugates the operator by a phase.

use std::f64::consts::PI;

use magweyl::quantize::gauge_covariance_defect;
use magweyl::{FieldKind, MagneticData, PhaseGrid, ScalarField, Symbol, C64};

fn main() -> magweyl::Result<()> {
    let (n, l, eps) = (128, 12.0, 0.5);
    let grid = PhaseGrid::new(1, n, l)?;
    let mag = MagneticData::new(1, FieldKind::Wave { amp: 0.3, k: 0.5 }, 0.5, eps)?;
    let f = Symbol::scalar_fn(&grid, eps, 1, |r, xi| C64::new((-r[0] * r[0] - xi[0] * xi[0]).exp(), 0.0));

    for amp in [0.5, 1.0, 2.0] {
        let theta = ScalarField::Sine { amp, wave: [PI / (eps * l), 0.0] };
        println!("theta amplitude {amp:.1}: defect {:.2e}", gauge_covariance_defect(&f, &mag, &theta)?);
    }
    Ok(())
}
