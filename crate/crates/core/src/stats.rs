//! Least-squares fits used by the scaling studies.

/// Slope and intercept of the least-squares line through `(x_i, y_i)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Exponent `p` in `y ~ C h^p` fitted in log-log coordinates.
pub fn order_fit(h: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly).0
}

/// `(p, C)` with `y ~ C x^p`.
pub fn power_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (p, c) = linear_fit(&lx, &ly);
    (p, c.exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_power() {
        let x = [0.2, 0.1, 0.05];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powi(2)).collect();
        let (p, c) = power_fit(&x, &y);
        assert!((p - 2.0).abs() < 1e-12 && (c - 3.0).abs() < 1e-10);
    }
}
