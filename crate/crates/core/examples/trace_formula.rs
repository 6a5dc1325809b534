//! Operator trace against the phase-space integral, and Schatten norms.

use magweyl::quantize::quantize;
use magweyl::trace::{schatten_norm, trace_formula_check};
use magweyl::{FieldKind, MagneticData, PhaseGrid, Symbol, C64};

fn main() -> magweyl::Result<()> {
    let eps = 0.6;
    let grid = PhaseGrid::new(2, 32, 9.0)?;
    let mag = MagneticData::new(2, FieldKind::Constant { b: 0.7 }, 1.0, eps)?;
    let w = 0.7;
    let f = Symbol::from_fn(&grid, eps, 2, 2, |r, xi, m| {
        let e: f64 = (0..2).map(|j| (r[j] - 0.2).powi(2) + (xi[j] + 0.1).powi(2)).sum();
        let v = (-e / (2.0 * w * w)).exp();
        m.copy_from_slice(&[C64::new(v, 0.0), C64::new(0.4 * v, 0.3 * v), C64::new(0.4 * v, -0.3 * v), C64::new(2.0 * v, 0.0)]);
    });

    let t = trace_formula_check(&f, &mag)?;
    println!("tr Op(f)   {:.10}", t.lhs.re);
    println!("integral   {:.10}", t.rhs.re);
    println!("closed form {:.10}", 3.0 * (w * w / eps).powi(2));

    let op = quantize(&f, &mag)?;
    for p in [1.0, 2.0, 4.0] {
        println!("Schatten {p}-norm {:.6}", schatten_norm(&op, p)?);
    }
    Ok(())
}
