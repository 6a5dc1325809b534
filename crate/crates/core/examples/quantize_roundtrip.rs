//! Quantize a matrix-valued symbol in a magnetic field and recover it from the kernel.

use magweyl::quantize::{assemble, kernel_map, wigner};
use magweyl::{FieldKind, MagneticData, PhaseGrid, Symbol, C64};

fn main() -> magweyl::Result<()> {
    let eps = 1.0;
    let grid = PhaseGrid::new(1, 128, 12.0)?;
    let mag = MagneticData::new(1, FieldKind::Wave { amp: 0.3, k: 0.5 }, 1.0, eps)?;

    let f = Symbol::from_fn(&grid, eps, 2, 2, |r, xi, m| {
        let e = (-(r[0] * r[0] + xi[0] * xi[0]) / 2.0).exp();
        m[0] = C64::new(e, 0.0);
        m[1] = C64::new(xi[0] * e, 0.1 * e);
        m[2] = C64::new(xi[0] * e, -0.1 * e);
        m[3] = C64::new(-e, 0.0);
    });

    let k = kernel_map(&f, &mag)?;
    let op = assemble(&k);
    let back = wigner(&k, &mag)?;
    println!("matrix size       {} x {}", op.m.nrows(), op.m.ncols());
    println!("round trip defect {:.2e}", back.rel_diff(&f)?);
    println!("hermiticity       {:.2e}", op.hermiticity_defect());
    println!("kernel wrapped    {}", k.truncation_warning);
    Ok(())
}
