//! Commutators with position and momentum act on symbols as derivations, and the
//! iterated commutator norms give a finite-grid proxy for the symbol class.

use magweyl::moyal::{beals_diagnostic, derivation, Route};
use magweyl::seminorm::{PhaseAxis, Scheme};
use magweyl::{FieldKind, MagneticData, PhaseGrid, Symbol, C64};

fn main() -> magweyl::Result<()> {
    let eps = 0.5;
    let grid = PhaseGrid::new(1, 128, 12.0)?;
    let mag = MagneticData::new(1, FieldKind::Wave { amp: 0.3, k: 0.5 }, 0.5, eps)?;
    let f = Symbol::scalar_fn(&grid, eps, 1, |r, xi| C64::new((-(r[0] - 0.2).powi(2) - xi[0] * xi[0]).exp(), 0.0));

    let exact = derivation(&f, PhaseAxis::Momentum(0), &mag, Route::Exact)?;
    let expanded = derivation(&f, PhaseAxis::Momentum(0), &mag, Route::Expanded(Scheme::Spectral))?;
    println!("ad_xi exact vs first order: {:.3e}", exact.sub(&expanded)?.sup_norm());

    for (a, alpha) in [(0, 0), (1, 0), (0, 1), (1, 1), (0, 2)] {
        let v = beals_diagnostic(&f, &mag, &[a], &[alpha], 0.0, 1.0)?;
        println!("ad_x^{a} ad_xi^{alpha}: {v:.4}");
    }
    Ok(())
}
