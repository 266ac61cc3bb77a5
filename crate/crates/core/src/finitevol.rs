//! Exact dynamics on the periodic box `Lambda_L = (-L, L]^d`.
//!
//! `T_t^L = (U + V) F^-1 M_t F (U* - V*)` with `U = (i/2) F^-1 Gamma_+ F`,
//! `V = (i/2) F^-1 Gamma_- F J` and `M_t` multiplication by `exp(2 i gamma t)`.
//! The anti-linear parts are handled by carrying `F f` and `F conj(f)`
//! side by side; `F conj(f)(k) = conj(F f(-k))`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftDirection;

use crate::dynamics::evolve;
use crate::error::{Error, Result};
use crate::fft;
use crate::kernels::QuadratureSpec;
use crate::lattice::{LatticeFunction, LatticeSite};
use crate::model::{multipliers_from_gamma, ModelParams};

#[derive(Debug, Clone, PartialEq)]
pub struct FiniteVolume {
    l: usize,
    params: ModelParams,
}

impl FiniteVolume {
    pub fn new(params: ModelParams, l: usize) -> Result<Self> {
        if l == 0 {
            return Err(Error::InvalidInput(
                "box half-width L must be positive".into(),
            ));
        }
        if params.is_massless() {
            return Err(Error::InvalidParams(
                "finite-volume dynamics needs omega > 0".into(),
            ));
        }
        let points = (2 * l).checked_pow(params.d() as u32);
        if points.is_none_or(|p| p > crate::kernels::MAX_GRID_POINTS) {
            return Err(Error::BoxTooLarge {
                radius: l,
                d: params.d(),
                points: 2 * l,
            });
        }
        Ok(Self { l, params })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Sites per axis, `2L`.
    pub fn side(&self) -> usize {
        2 * self.l
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> usize {
        self.side().pow(self.params.d() as u32)
    }

    /// `{x pi / L : x in (-L, L]}` in box order; the same for every axis.
    pub fn dual_grid(&self) -> Vec<f64> {
        let l = self.l as i64;
        ((-l + 1)..=l)
            .map(|x| x as f64 * PI / self.l as f64)
            .collect()
    }

    /// Box sites in row-major order, each coordinate in `(-L, L]`.
    pub fn sites(&self) -> impl Iterator<Item = LatticeSite> + '_ {
        let side = self.side();
        let d = self.params.d();
        let l = self.l as i64;
        (0..self.len()).map(move |mut idx| {
            let mut coords = vec![0; d];
            for c in coords.iter_mut().rev() {
                *c = (idx % side) as i64 - l + 1;
                idx /= side;
            }
            LatticeSite::new(coords)
        })
    }

    /// Row-major box position of `site`, if it lies in `(-L, L]^d`.
    pub fn index_of(&self, site: &LatticeSite) -> Option<usize> {
        let l = self.l as i64;
        let side = self.side();
        site.coords().iter().try_fold(0usize, |acc, &x| {
            (x > -l && x <= l).then(|| acc * side + (x + l - 1) as usize)
        })
    }

    /// Box function holding `f`; fails if `supp f` leaves the box.
    pub fn embed(&self, f: &LatticeFunction) -> Result<BoxFunction> {
        if f.dim() != self.params.d() {
            return Err(Error::DimensionMismatch {
                expected: self.params.d(),
                found: f.dim(),
            });
        }
        let mut values = vec![Complex64::default(); self.len()];
        for (x, v) in f.iter() {
            let i = self.index_of(x).ok_or_else(|| {
                Error::InvalidInput(format!(
                    "site {x} lies outside the box of half-width {}",
                    self.l
                ))
            })?;
            values[i] = *v;
        }
        Ok(BoxFunction { values })
    }

    pub fn delta(&self) -> BoxFunction {
        let mut values = vec![Complex64::default(); self.len()];
        let origin = LatticeSite::origin(self.params.d());
        values[self.index_of(&origin).expect("origin lies in the box")] = Complex64::new(1.0, 0.0);
        BoxFunction { values }
    }

    /// `gamma` on the DFT grid, indexed like the transform output.
    fn gamma_grid(&self) -> Vec<f64> {
        let n = self.side();
        let d = self.params.d();
        let mut out = vec![0.0; self.len()];
        let mut idx = vec![0usize; d];
        let mut k = vec![0.0; d];
        for g in out.iter_mut() {
            for (kj, &i) in k.iter_mut().zip(&idx) {
                *kj = 2.0 * PI * i as f64 / n as f64;
            }
            *g = self.params.gamma_at(&k);
            for j in (0..d).rev() {
                idx[j] += 1;
                if idx[j] < n {
                    break;
                }
                idx[j] = 0;
            }
        }
        out
    }

    /// Flat DFT index of `-k` for every flat index `k`.
    fn negation_map(&self) -> Vec<usize> {
        let n = self.side();
        let d = self.params.d();
        (0..self.len())
            .map(|mut idx| {
                let mut digits = vec![0usize; d];
                for c in digits.iter_mut().rev() {
                    *c = idx % n;
                    idx /= n;
                }
                digits.iter().fold(0, |acc, &q| acc * n + (n - q) % n)
            })
            .collect()
    }

    /// Box order to DFT order (`x mod 2L`) and back.
    fn dft_positions(&self) -> Vec<usize> {
        let n = self.side();
        self.sites()
            .map(|s| fft::flat_index(s.coords(), n))
            .collect()
    }

    fn unitary(&self, data: &mut [Complex64], direction: FftDirection) {
        fft::transform(data, self.side(), self.params.d(), direction);
        let scale = 1.0 / (self.len() as f64).sqrt();
        data.iter_mut().for_each(|v| *v *= scale);
    }

    /// The full composition, without the `t = 0` shortcut.
    pub(crate) fn compose(&self, f: &BoxFunction, t: f64) -> BoxFunction {
        let positions = self.dft_positions();
        let mut phi = vec![Complex64::default(); self.len()];
        for (v, &p) in f.values.iter().zip(&positions) {
            phi[p] = *v;
        }
        self.unitary(&mut phi, FftDirection::Forward);

        let gamma = self.gamma_grid();
        let neg = self.negation_map();
        let half_i = Complex64::new(0.0, 0.5);

        // (U* - V*) then M_t
        let u: Vec<Complex64> = (0..self.len())
            .map(|q| {
                let (gp, gm) = multipliers_from_gamma(gamma[q]);
                let psi = phi[neg[q]].conj();
                let h = -half_i * (gp * phi[q] + gm * psi);
                h * Complex64::from_polar(1.0, 2.0 * gamma[q] * t)
            })
            .collect();
        // (U + V)
        let mut out: Vec<Complex64> = (0..self.len())
            .map(|q| {
                let (gp, gm) = multipliers_from_gamma(gamma[q]);
                half_i * (gp * u[q] + gm * u[neg[q]].conj())
            })
            .collect();
        self.unitary(&mut out, FftDirection::Inverse);
        BoxFunction {
            values: positions.iter().map(|&p| out[p]).collect(),
        }
    }

    /// `Im <f, g>` on the box.
    pub fn symplectic_form(&self, f: &BoxFunction, g: &BoxFunction) -> Result<f64> {
        self.check(f)?;
        self.check(g)?;
        Ok(f.values
            .iter()
            .zip(&g.values)
            .map(|(a, b)| (a.conj() * b).im)
            .sum())
    }

    fn check(&self, f: &BoxFunction) -> Result<()> {
        if f.values.len() == self.len() {
            Ok(())
        } else {
            Err(Error::SizeMismatch {
                expected: self.len(),
                found: f.values.len(),
            })
        }
    }
}

/// Complex function on `Lambda_L`, row-major box order.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxFunction {
    values: Vec<Complex64>,
}

impl BoxFunction {
    pub fn from_values(values: Vec<Complex64>) -> Self {
        Self { values }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// `T_t^L f`, exact up to round-off.
pub fn evolve_finite(vol: &FiniteVolume, f: &BoxFunction, t: f64) -> Result<BoxFunction> {
    vol.check(f)?;
    if !t.is_finite() {
        return Err(Error::InvalidInput(format!("time must be finite, got {t}")));
    }
    if t == 0.0 {
        return Ok(f.clone());
    }
    Ok(vol.compose(f, t))
}

/// `max_{x in Lambda_L} |T_t^L f(x) - T_t f(x)|`.
pub fn compare_finite_infinite(
    params: &ModelParams,
    l: usize,
    f: &LatticeFunction,
    t: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let vol = FiniteVolume::new(params.clone(), l)?;
    let boxed = vol.embed(f)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let finite = evolve_finite(&vol, &boxed, t)?;
    let infinite = evolve(params, f, t, spec)?.function;
    Ok(vol
        .sites()
        .zip(finite.values())
        .map(|(x, v)| (v - infinite.get(&x)).norm())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{kernel_table, kernel_table_at_resolution, KernelIndex};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_box(rng: &mut impl Rng, len: usize) -> BoxFunction {
        BoxFunction::from_values(
            (0..len)
                .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect(),
        )
    }

    #[test]
    fn dual_grid_matches_box() {
        let vol = FiniteVolume::new(ModelParams::new(1.0, vec![1.0]).unwrap(), 4).unwrap();
        let grid = vol.dual_grid();
        assert_eq!(grid.len(), vol.side());
        assert!((grid[0] + 3.0 * PI / 4.0).abs() < 1e-15);
        assert_eq!(*grid.last().unwrap(), PI);
        for (i, s) in vol.sites().enumerate() {
            assert_eq!(vol.index_of(&s), Some(i));
        }
        assert_eq!(vol.index_of(&LatticeSite::new(vec![-4])), None);
    }

    #[test]
    fn composition_at_time_zero_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in 1..=2 {
            let vol = FiniteVolume::new(ModelParams::new(0.7, vec![1.3; d]).unwrap(), 4).unwrap();
            let f = random_box(&mut rng, vol.len());
            assert!(vol.compose(&f, 0.0).max_abs_diff(&f) < 1e-14);
            assert_eq!(evolve_finite(&vol, &f, 0.0).unwrap(), f);
        }
    }

    #[test]
    fn preserves_symplectic_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let vol = FiniteVolume::new(ModelParams::new(1.0, vec![1.0]).unwrap(), 8).unwrap();
        for t in [0.3, 2.0, 17.5] {
            let f = random_box(&mut rng, vol.len());
            let g = random_box(&mut rng, vol.len());
            let before = vol.symplectic_form(&f, &g).unwrap();
            let tf = evolve_finite(&vol, &f, t).unwrap();
            let tg = evolve_finite(&vol, &g, t).unwrap();
            let after = vol.symplectic_form(&tf, &tg).unwrap();
            assert!((before - after).abs() < 1e-12, "t={t}: {before} vs {after}");
        }
    }

    #[test]
    fn group_law_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let vol = FiniteVolume::new(ModelParams::new(0.8, vec![1.0, 0.5]).unwrap(), 6).unwrap();
        let f = random_box(&mut rng, vol.len());
        let once = evolve_finite(&vol, &f, 2.5).unwrap();
        let twice = evolve_finite(&vol, &evolve_finite(&vol, &f, 1.0).unwrap(), 1.5).unwrap();
        assert!(once.max_abs_diff(&twice) < 1e-12);
    }

    #[test]
    fn delta_evolves_to_periodized_kernel() {
        let p = ModelParams::new(1.0, vec![1.0]).unwrap();
        let (l, t) = (64usize, 2.0);
        let vol = FiniteVolume::new(p.clone(), l).unwrap();
        let evolved = evolve_finite(&vol, &vol.delta(), t).unwrap();

        // images x + 2L n with |n| <= 1 from a converged infinite-volume table
        let wide = 3 * l;
        let table = kernel_table(&p, t, wide, &QuadratureSpec::default()).unwrap();
        for (x, v) in vol.sites().zip(evolved.values()) {
            let x0 = x.coords()[0];
            let image = |m| -> f64 {
                (-1..=1)
                    .map(|n: i64| table.value(m, &[x0 + 2 * l as i64 * n]))
                    .sum()
            };
            // T_t delta_0 = H0 - i H-1
            let expected = Complex64::new(image(KernelIndex::Zero), -image(KernelIndex::Minus));
            assert!((v - expected).norm() < 1e-9, "x={x0}: {v} vs {expected}");
        }
    }

    #[test]
    fn trapezoid_table_equals_box_dynamics() {
        let p = ModelParams::new(1.0, vec![1.0, 2.0]).unwrap();
        let (l, t) = (8usize, 1.3);
        let vol = FiniteVolume::new(p.clone(), l).unwrap();
        let evolved = evolve_finite(&vol, &vol.delta(), t).unwrap();
        let table = kernel_table_at_resolution(&p, t, l - 1, 2 * l).unwrap();
        for (x, v) in vol.sites().zip(evolved.values()) {
            if let Some(h0) = table.get(KernelIndex::Zero, x.coords()) {
                let hm = table.value(KernelIndex::Minus, x.coords());
                assert!((v - Complex64::new(h0, -hm)).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn size_mismatch_is_reported() {
        let vol = FiniteVolume::new(ModelParams::new(1.0, vec![1.0]).unwrap(), 4).unwrap();
        let f = BoxFunction::from_values(vec![Complex64::default(); 3]);
        assert_eq!(
            evolve_finite(&vol, &f, 1.0),
            Err(Error::SizeMismatch {
                expected: 8,
                found: 3
            })
        );
    }

    #[test]
    fn comparison_at_time_zero_is_exact() {
        let p = ModelParams::new(1.0, vec![1.0]).unwrap();
        let f = LatticeFunction::delta(LatticeSite::origin(1));
        assert_eq!(
            compare_finite_infinite(&p, 8, &f, 0.0, &QuadratureSpec::default()).unwrap(),
            0.0
        );
    }

    #[test]
    fn support_outside_box_is_rejected() {
        let p = ModelParams::new(1.0, vec![1.0]).unwrap();
        let f = LatticeFunction::delta(LatticeSite::new(vec![-8]));
        assert!(compare_finite_infinite(&p, 8, &f, 1.0, &QuadratureSpec::default()).is_err());
    }
}
