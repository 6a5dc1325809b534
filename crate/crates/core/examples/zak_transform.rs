//! The Zak transform is unitary and quasi-periodic in the quasi-momentum.

use std::f64::consts::PI;

use magweyl::equivariant::{inverse_zak, zak_at, zak_transform, Lattice};
use magweyl::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> magweyl::Result<()> {
    let lat = Lattice::cubic(1, 1.0, 16, 5, 5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let psi: Vec<C64> = (0..lat.n_bz() * lat.n_torus()).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let norm = psi.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();

    let z = zak_transform(&psi, &lat)?;
    let back = inverse_zak(&z, &lat)?;
    let err = back.iter().zip(&psi).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    println!("||Z psi|| - ||psi|| = {:.2e}, inversion error {err:.2e}", z.norm() - norm);

    let k = lat.bz_point(3)[0];
    let base = zak_at(&psi, &lat, &[k])?;
    let shifted = zak_at(&psi, &lat, &[k - 2.0 * PI])?;
    let qp = shifted.iter().zip(&base).enumerate().map(|(i, (s, b))| (s - C64::from_polar(1.0, 2.0 * PI * lat.torus_point(i)[0]) * b).norm()).fold(0.0, f64::max);
    println!("quasi-periodicity defect {qp:.2e}");
    Ok(())
}
