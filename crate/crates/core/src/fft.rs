//! FFT helpers along one axis of a dense row-major array.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::C64;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Applies `op` to every 1-d line of `data` along `axis`.
pub fn map_lines(data: &mut [C64], shape: &[usize], axis: usize, mut op: impl FnMut(&mut [C64])) {
    let len = shape[axis];
    let stride: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    debug_assert_eq!(data.len(), outer * len * stride);
    if stride == 1 {
        for line in data.chunks_mut(len) {
            op(line);
        }
        return;
    }
    let mut buf = vec![C64::new(0.0, 0.0); len];
    for o in 0..outer {
        let base = o * len * stride;
        for i in 0..stride {
            for k in 0..len {
                buf[k] = data[base + k * stride + i];
            }
            op(&mut buf);
            for k in 0..len {
                data[base + k * stride + i] = buf[k];
            }
        }
    }
}

/// Unnormalized FFT along `axis` (forward kernel `exp(-2 pi i jk/n)`).
pub fn fft_axis(data: &mut [C64], shape: &[usize], axis: usize, inverse: bool) {
    let n = shape[axis];
    let f = plan(n, inverse);
    let mut scratch = vec![C64::new(0.0, 0.0); f.get_inplace_scratch_len()];
    map_lines(data, shape, axis, |line| f.process_with_scratch(line, &mut scratch));
}

/// Signed frequency of FFT bin `k` for length `n`; the Nyquist bin maps to `-n/2`.
pub fn signed_mode(k: usize, n: usize) -> isize {
    if k < n / 2 {
        k as isize
    } else {
        k as isize - n as isize
    }
}

/// Weights of the Nyquist coefficient on the `+n/2` and `-n/2` bins of the refined
/// spectrum. The mode becomes `(-1)^floor(c/2)` on the fine nodes `c`, which is real, so
/// refinement commutes with complex conjugation.
pub const NYQUIST_SPLIT: [C64; 2] = [C64::new(0.5, -0.5), C64::new(0.5, 0.5)];

/// Trigonometric interpolation from `n` to `2n` equispaced nodes along `axis`
/// (band `[-n/2, n/2]`, Nyquist split by [`NYQUIST_SPLIT`]), so that even output nodes
/// reproduce the input.
pub fn refine_axis(data: &[C64], shape: &[usize], axis: usize) -> (Vec<C64>, Vec<usize>) {
    let n = shape[axis];
    let mut spec = data.to_vec();
    fft_axis(&mut spec, shape, axis, false);
    let mut new_shape = shape.to_vec();
    new_shape[axis] = 2 * n;
    let stride: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut out = vec![C64::new(0.0, 0.0); data.len() * 2];
    let scale = 1.0 / n as f64;
    for o in 0..outer {
        for k in 0..n {
            let src = (o * n + k) * stride;
            if n % 2 == 0 && k == n / 2 {
                for (q, w) in [n / 2, 3 * n / 2].into_iter().zip(NYQUIST_SPLIT) {
                    let dst = (o * 2 * n + q) * stride;
                    for i in 0..stride {
                        out[dst + i] = spec[src + i] * (w * scale);
                    }
                }
                continue;
            }
            let q = signed_mode(k, n).rem_euclid(2 * n as isize) as usize;
            let dst = (o * 2 * n + q) * stride;
            for i in 0..stride {
                out[dst + i] = spec[src + i] * scale;
            }
        }
    }
    fft_axis(&mut out, &new_shape, axis, true);
    (out, new_shape)
}

/// Spectral derivative along `axis` for a periodic function sampled with spacing `h`;
/// the Nyquist mode is discarded.
pub fn derivative_axis(data: &mut [C64], shape: &[usize], axis: usize, h: f64) {
    let n = shape[axis];
    let fwd = plan(n, false);
    let inv = plan(n, true);
    let mut scratch = vec![C64::new(0.0, 0.0); fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len())];
    let base = 2.0 * PI / (n as f64 * h);
    map_lines(data, shape, axis, |line| {
        fwd.process_with_scratch(line, &mut scratch);
        for (k, v) in line.iter_mut().enumerate() {
            let q = signed_mode(k, n);
            *v = if 2 * q.unsigned_abs() == n {
                C64::new(0.0, 0.0)
            } else {
                *v * C64::new(0.0, base * q as f64 / n as f64)
            };
        }
        inv.process_with_scratch(line, &mut scratch);
    });
}

/// Centered DFT along `axis`: `out_k = sum_b exp(i sign 2 pi (k - n/2)(b - n/2) / n) g_b`,
/// unnormalized, with `sign = +1` or `-1`.
pub fn centered_dft_axis(data: &mut [C64], shape: &[usize], axis: usize, sign: i32) {
    let n = shape[axis];
    let f = plan(n, sign > 0);
    let mut scratch = vec![C64::new(0.0, 0.0); f.get_inplace_scratch_len()];
    let global = if (n / 2) % 2 == 0 { 1.0 } else { -1.0 };
    map_lines(data, shape, axis, |line| {
        for (b, v) in line.iter_mut().enumerate() {
            if b % 2 == 1 {
                *v = -*v;
            }
        }
        f.process_with_scratch(line, &mut scratch);
        for (k, v) in line.iter_mut().enumerate() {
            if k % 2 == 1 {
                *v *= -global;
            } else {
                *v *= global;
            }
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refine_reproduces_even_nodes_and_interpolates() {
        let n = 16;
        let h = 2.0 * PI / n as f64;
        let data: Vec<C64> = (0..n).map(|j| C64::new((3.0 * j as f64 * h).cos(), 0.0)).collect();
        let (fine, shape) = refine_axis(&data, &[n], 0);
        assert_eq!(shape, vec![2 * n]);
        for c in 0..2 * n {
            let exact = (3.0 * c as f64 * h / 2.0).cos();
            assert!((fine[c].re - exact).abs() < 1e-13 && fine[c].im.abs() < 1e-13);
        }
    }

    #[test]
    fn refine_commutes_with_conjugation() {
        let n = 8;
        let data: Vec<C64> = (0..n).map(|j| C64::new((j as f64).sin() + 0.3 * j as f64, (j * j) as f64 * 0.1)).collect();
        let conj: Vec<C64> = data.iter().map(|v| v.conj()).collect();
        let (a, _) = refine_axis(&data, &[n], 0);
        let (b, _) = refine_axis(&conj, &[n], 0);
        for (x, y) in a.iter().zip(&b) {
            assert!((x.conj() - y).norm() < 1e-13);
        }
        for j in 0..n {
            assert!((a[2 * j] - data[j]).norm() < 1e-13);
        }
    }

    #[test]
    fn derivative_of_sine() {
        let n = 32;
        let h = 0.1;
        let per = n as f64 * h;
        let mut data: Vec<C64> = (0..n).map(|j| C64::new((2.0 * PI * 2.0 * j as f64 * h / per).sin(), 0.0)).collect();
        derivative_axis(&mut data, &[n], 0, h);
        for (j, v) in data.iter().enumerate() {
            let exact = 2.0 * PI * 2.0 / per * (2.0 * PI * 2.0 * j as f64 * h / per).cos();
            assert!((v.re - exact).abs() < 1e-11);
        }
    }

    #[test]
    fn strided_axis_matches_contiguous() {
        let shape = [4, 6];
        let data: Vec<C64> = (0..24).map(|i| C64::new(i as f64, (i * i) as f64 * 0.1)).collect();
        let mut a = data.clone();
        fft_axis(&mut a, &shape, 0, false);
        for col in 0..6 {
            let mut line: Vec<C64> = (0..4).map(|r| data[r * 6 + col]).collect();
            fft_axis(&mut line, &[4], 0, false);
            for r in 0..4 {
                assert!((line[r] - a[r * 6 + col]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn centered_dft_matches_direct_sum() {
        let n = 6;
        let g: Vec<C64> = (0..n).map(|j| C64::new(j as f64 * 0.3 - 1.0, (j * j) as f64 * 0.1)).collect();
        for sign in [1, -1] {
            let mut out = g.clone();
            centered_dft_axis(&mut out, &[n], 0, sign);
            for k in 0..n {
                let mut want = C64::new(0.0, 0.0);
                for b in 0..n {
                    let ph = sign as f64 * 2.0 * PI * (k as f64 - 3.0) * (b as f64 - 3.0) / n as f64;
                    want += g[b] * C64::from_polar(1.0, ph);
                }
                assert!((out[k] - want).norm() < 1e-12);
            }
        }
    }
}
