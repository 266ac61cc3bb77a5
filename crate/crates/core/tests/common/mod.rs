#![allow(dead_code)]

use harmonic_lattice::{LatticeFunction, LatticeSite};
use num_complex::Complex64;
use rand::Rng;

/// Up to `max_sites` sites in `[-spread, spread]^d`, entries in the unit disk.
pub fn random_function(
    rng: &mut impl Rng,
    d: usize,
    max_sites: usize,
    spread: i64,
) -> LatticeFunction {
    loop {
        let n = rng.gen_range(1..=max_sites);
        let entries: Vec<_> = (0..n)
            .map(|_| {
                let site =
                    LatticeSite::new((0..d).map(|_| rng.gen_range(-spread..=spread)).collect());
                let r = rng.gen::<f64>().sqrt();
                let phi = rng.gen_range(0.0..std::f64::consts::TAU);
                (site, Complex64::from_polar(r, phi))
            })
            .collect();
        let f = LatticeFunction::from_entries(d, entries).unwrap();
        if !f.is_empty() && f.len() <= max_sites {
            return f;
        }
    }
}
