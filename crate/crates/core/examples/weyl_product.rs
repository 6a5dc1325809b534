//! The magnetic Weyl product computed through operators and through the oscillatory integral.

use magweyl::moyal::{weyl_product_exact, weyl_product_integral};
use magweyl::{FieldKind, MagneticData, PhaseGrid, Symbol, C64};

fn bump(grid: &PhaseGrid, eps: f64, c: f64) -> Symbol {
    Symbol::scalar_fn(grid, eps, 1, |r, xi| C64::new((-(r[0] - c).powi(2) - (xi[0] - c).powi(2)).exp(), 0.0))
}

fn main() -> magweyl::Result<()> {
    let grid = PhaseGrid::new(1, 64, 8.0)?;
    let mag = MagneticData::new(1, FieldKind::Wave { amp: 0.3, k: 0.5 }, 0.5, 1.0)?;
    let (f, g) = (bump(&grid, 1.0, 0.3), bump(&grid, 1.0, -0.2));

    let a = weyl_product_exact(&f, &g, &mag)?;
    let b = weyl_product_integral(&f, &g, &mag)?;
    let fg = weyl_product_exact(&g, &f, &mag)?;
    println!("operator route vs integral route {:.2e}", b.rel_diff(&a)?);
    println!("non-commutativity ||f#g - g#f||  {:.3e}", a.sub(&fg)?.sup_norm());
    Ok(())
}
