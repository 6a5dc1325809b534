//! Products and resolvents of equivariant symbols stay equivariant.

use magweyl::equivariant::{bloch_symbol, equivariant_product_check, equivariant_resolvent, Lattice, PeriodicField};
use magweyl::{MagneticData, C64};

fn main() -> magweyl::Result<()> {
    let lat = Lattice::cubic(1, 1.0, 16, 5, 5)?;
    let eps = lat.cover_grid()?.dxi(0);
    let mag = MagneticData::zero(1, eps)?;
    let f = bloch_symbol(&lat, &PeriodicField::cosine(1.0, [1, 0]), |r| 0.5 * (2.0 * r[0]).cos(), 4, eps, 1)?;
    let g = bloch_symbol(&lat, &PeriodicField::cosine(0.5, [1, 0]), |r| 0.3 * (2.0 * r[0]).sin(), 4, eps, 1)?;

    let pc = equivariant_product_check(&f, &g, &mag)?;
    println!("defects f {:.2e}  g {:.2e}  f#g {:.2e}", pc.defect_f, pc.defect_g, pc.defect_product);
    println!("growth  f {:.3}  g {:.3}  f#g {:.3}", pc.growth_f, pc.growth_g, pc.growth_product);

    let r = equivariant_resolvent(&f, C64::new(0.5, 1.0), &mag)?;
    println!("resolvent defect {:.2e}", r.defect);
    Ok(())
}
