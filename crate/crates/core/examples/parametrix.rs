//! Order-by-order inverse of an elliptic matrix symbol under the Weyl product.

use std::f64::consts::PI;

use magweyl::funcalc::{parametrix, parametrix_defect, Side};
use magweyl::{MagneticData, PhaseGrid, Symbol, C64};

fn main() -> magweyl::Result<()> {
    let z = C64::new(0.0, 1.0);
    for eps in [0.2f64, 0.1] {
        let n = (16.0 / eps).round() as usize;
        let grid = PhaseGrid::new(1, n + n % 2, PI / eps)?;
        let dx = grid.dx(0);
        let mag = MagneticData::zero(1, eps)?;
        let entries = |r: f64, xi: f64| (0.8 * r.cos() - z, -0.8 * r.cos() - z, C64::new(0.8 * (xi * dx).sin(), 0.0));
        let f = Symbol::from_fn(&grid, eps, 2, 2, |r, xi, m| {
            let (a, b, s) = entries(r[0], xi[0]);
            m.copy_from_slice(&[a, s, s, b]);
        });
        let g0 = Symbol::from_fn(&grid, eps, 2, 2, |r, xi, m| {
            let (a, b, s) = entries(r[0], xi[0]);
            let det = a * b - s * s;
            m.copy_from_slice(&[b / det, -s / det, -s / det, a / det]);
        });
        let series = parametrix(&f, &g0, 2, &mag, Side::Left)?;
        let defects: Vec<String> = (0..3).map(|k| parametrix_defect(&series, &f, k, &mag, Side::Left).map(|d| format!("{d:.3e}"))).collect::<Result<_, _>>()?;
        println!("eps {eps}: || Op(g_N) Op(f) - 1 || for N = 0, 1, 2: {}", defects.join(" "));
    }
    Ok(())
}
