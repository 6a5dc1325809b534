//! Truncations of the semiclassical product expansion converge at the expected orders.

use std::f64::consts::PI;

use magweyl::moyal::{weyl_product_exact, weyl_product_expansion};
use magweyl::stats::order_fit;
use magweyl::{MagneticData, PhaseGrid, Symbol, C64};

fn sym(grid: &PhaseGrid, eps: f64, shift: f64) -> Symbol {
    Symbol::from_fn(grid, eps, 2, 2, |r, xi, m| {
        let (x, k) = (r[0] - shift, xi[0] + shift);
        let e = (-(x * x + k * k) / 2.0).exp();
        m[0] = C64::new(e, 0.0);
        m[1] = C64::new(k * e, 0.2 * e);
        m[2] = C64::new(k * e, -0.2 * e);
        m[3] = C64::new(2.0 * e * (0.5 * x).cos(), 0.0);
    })
}

fn main() -> magweyl::Result<()> {
    let eps_list = [0.2, 0.1, 0.05];
    let mut errs = [Vec::new(), Vec::new()];
    for eps in eps_list {
        let reach = 7.0f64;
        let n = 2 * (reach * reach / (PI * eps)).ceil() as usize;
        let grid = PhaseGrid::new(1, n, reach / eps)?;
        let mag = MagneticData::zero(1, eps)?;
        let (f, g) = (sym(&grid, eps, 0.3), sym(&grid, eps, -0.4));
        let exact = weyl_product_exact(&f, &g, &mag)?;
        let series = weyl_product_expansion(&f, &g, &mag, 1)?;
        for (k, e) in errs.iter_mut().enumerate() {
            e.push(exact.sub(&series.partial_sum(eps, k)?)?.sup_norm());
        }
        println!("eps {eps:<5} n {n:<4} N=0 {:.3e}  N=1 {:.3e}", errs[0].last().unwrap(), errs[1].last().unwrap());
    }
    println!("fitted orders: {:.3} {:.3}", order_fit(&eps_list, &errs[0]), order_fit(&eps_list, &errs[1]));
    Ok(())
}
