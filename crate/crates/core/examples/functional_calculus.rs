//! Helffer-Sjostrand and holomorphic functional calculus, and a spectral projection.

use magweyl::funcalc::{helffer_sjostrand_with, holomorphic_calculus, spectral_projection, ContourSpec, HsOptions, Profile};
use magweyl::trace::phase_space_integral;
use magweyl::{MagneticData, PhaseGrid, Symbol, C64};

fn main() -> magweyl::Result<()> {
    let grid = PhaseGrid::new(1, 64, 8.0)?;
    let mag = MagneticData::zero(1, 1.0)?;
    let h = Symbol::scalar_fn(&grid, 1.0, 1, |r, xi| C64::new(r[0] * r[0] + xi[0] * xi[0], 0.0));

    let phi = Profile::Gaussian { center: 3.0, width: 1.0 };
    let hs = helffer_sjostrand_with(&h, &phi, 3, &mag, HsOptions::default())?;
    println!("Helffer-Sjostrand: {} nodes, {} skipped, trace {:.6}", hs.nodes, hs.skipped, phase_space_integral(&hs.symbol)?.re);

    // exp(-h/4) restricted to the six eigenvalues 1, 3, ..., 11 inside the rectangle
    let contour = ContourSpec::new((-1.0, 12.0), (-2.0, 2.0), 64)?;
    let heat = holomorphic_calculus(&h, |z| (-z / 4.0).exp(), &contour, &mag)?;
    println!("holomorphic exp(-h/4): trace {:.6}", phase_space_integral(&heat)?.re);

    let p = spectral_projection(&h, (0.0, 2.0), &mag)?;
    println!("projection onto the ground state: trace {:.8}, idempotency {:.2e}", p.trace, p.operator_defect);
    Ok(())
}
