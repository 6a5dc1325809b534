//! Write a symbol and its operator to the binary container and read them back.

use magweyl::container::{read_operator, read_symbol, write_operator, write_symbol, write_symbol_csv};
use magweyl::quantize::quantize;
use magweyl::{MagneticData, PhaseGrid, Symbol, C64};

fn main() -> magweyl::Result<()> {
    let eps = 0.5;
    let grid = PhaseGrid::new(1, 16, 4.0)?;
    let f = Symbol::scalar_fn(&grid, eps, 1, |r, xi| C64::new((-r[0] * r[0]).exp(), xi[0] / 3.0));
    let op = quantize(&f, &MagneticData::zero(1, eps)?)?;

    let mut buf = Vec::new();
    write_symbol(&mut buf, &f)?;
    println!("symbol:   {} bytes, identical after reading: {}", buf.len(), read_symbol(&mut buf.as_slice(), eps)? == f);

    let mut buf = Vec::new();
    write_operator(&mut buf, &op)?;
    println!("operator: {} bytes, identical after reading: {}", buf.len(), read_operator(&mut buf.as_slice(), eps)?.m == op.m);

    let mut csv = Vec::new();
    write_symbol_csv(&mut csv, &f)?;
    let text = String::from_utf8(csv).expect("utf8");
    for line in text.lines().take(3) {
        println!("{line}");
    }
    Ok(())
}
