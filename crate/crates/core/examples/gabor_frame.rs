//! Frame coefficients of a quantized symbol decay away from the diagonal.

use magweyl::moyal::{gabor_coefficients, GaborFrame};
use magweyl::quantize::quantize;
use magweyl::{FieldKind, MagneticData, PhaseGrid, Symbol, C64};

fn main() -> magweyl::Result<()> {
    let grid = PhaseGrid::new(1, 128, 16.0)?;
    let mag = MagneticData::new(1, FieldKind::Wave { amp: 0.3, k: 0.5 }, 0.5, 1.0)?;
    let f = Symbol::scalar_fn(&grid, 1.0, 1, |r, xi| C64::new(1.0 / (1.0 + r[0] * r[0] + xi[0] * xi[0]), 0.0));
    let op = quantize(&f, &mag)?;
    let frame = GaborFrame::new(1.0, 0.9, 1.0)?;

    for shift in 0..6 {
        let c = gabor_coefficients(&op, &frame, &[0.0], &[shift as f64], &[0], &[0], &mag)?;
        println!("gamma' - gamma = {shift}: |c| = {:.3e}", c[0].norm());
    }
    Ok(())
}
