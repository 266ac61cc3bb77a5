//! Infinite-volume evolution `T_t` on finitely supported functions and the
//! exact Weyl commutator norm.
//!
//! `T_t` acts by two convolutions,
//!
//! ```text
//! T_t f = f * (H0 - i/2 (H-1 + H1)) + conj(f) * (i/2 (H1 - H-1)),
//! ```
//!
//! and `|| [tau_t(W(f)), W(g)] || = |1 - exp(i sigma(T_t f, g))|` with the
//! symplectic form `sigma(f, g) = Im <f, g>`, `<f, g> = sum conj(f) g`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernels::{kernel_table, KernelIndex, KernelTable, QuadratureSpec};
use crate::lattice::{box_index, box_sites, LatticeFunction, LatticeSite};
use crate::model::ModelParams;

/// `Im <f, g>`, conjugate-linear in `f`.
pub fn symplectic_form(f: &LatticeFunction, g: &LatticeFunction) -> Result<f64> {
    f.check_dim(g)?;
    // iterate the smaller support
    let (small, large, sign) = if f.len() <= g.len() {
        (f, g, 1.0)
    } else {
        (g, f, -1.0)
    };
    let s: f64 = small
        .iter()
        .map(|(x, v)| (v.conj() * large.get(x)).im)
        .sum();
    Ok(sign * s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionResult {
    pub function: LatticeFunction,
    /// Half-width of the kernel box used in the convolutions.
    pub truncation_radius: usize,
    /// Largest `sum_m |H_t^(m)|` on the outermost kernel shell.
    pub tail_bound: f64,
}

/// The two convolution kernels of `T_t` at `z`.
fn convolution_weights(table: &KernelTable, z: &[i64]) -> (Complex64, Complex64) {
    let h_minus = table.value(KernelIndex::Minus, z);
    let h_zero = table.value(KernelIndex::Zero, z);
    let h_plus = table.value(KernelIndex::Plus, z);
    let direct = Complex64::new(h_zero, -0.5 * (h_minus + h_plus));
    let conjugate = Complex64::new(0.0, 0.5 * (h_plus - h_minus));
    (direct, conjugate)
}

/// `(T_t f)(y)` from a kernel table covering every `y - x`, `x in supp f`.
fn evolved_at(table: &KernelTable, f: &LatticeFunction, y: &LatticeSite) -> Complex64 {
    f.iter()
        .map(|(x, v)| {
            let (direct, conjugate) = convolution_weights(table, y.sub(x).coords());
            v * direct + v.conj() * conjugate
        })
        .sum()
}

fn check_inputs(params: &ModelParams, f: &LatticeFunction, t: f64) -> Result<()> {
    params.require_strict()?;
    if f.dim() != params.d() {
        return Err(Error::DimensionMismatch {
            expected: params.d(),
            found: f.dim(),
        });
    }
    if f.is_empty() {
        return Err(Error::InvalidInput("function has empty support".into()));
    }
    if !t.is_finite() {
        return Err(Error::InvalidInput(format!("time must be finite, got {t}")));
    }
    Ok(())
}

/// `T_t f` on the box `[-(extent + R), extent + R]^d`, with the kernels cut
/// at `|z|_inf <= R`. `R` starts at `extent + ceil(2 |t| sum(lambda) / omega) + 8`
/// and grows by half until the outermost kernel shell is below
/// `spec.truncation_tolerance`.
pub fn evolve(
    params: &ModelParams,
    f: &LatticeFunction,
    t: f64,
    spec: &QuadratureSpec,
) -> Result<EvolutionResult> {
    check_inputs(params, f, t)?;
    spec.validate()?;
    if t == 0.0 {
        return Ok(EvolutionResult {
            function: f.clone(),
            truncation_radius: 0,
            tail_bound: 0.0,
        });
    }

    let extent = f.extent() as usize;
    let cone = (2.0 * t.abs() * params.coupling_sum() / params.omega()).ceil() as usize;
    let mut radius = extent + cone + 8;
    let table = loop {
        if radius > spec.max_truncation_radius {
            return Err(Error::TruncationFailure {
                radius: spec.max_truncation_radius,
                tail: f64::INFINITY,
            });
        }
        let table = kernel_table(params, t, radius, spec)?;
        let tail = table.shell_max(radius);
        if tail < spec.truncation_tolerance {
            break table;
        }
        if radius == spec.max_truncation_radius {
            return Err(Error::TruncationFailure { radius, tail });
        }
        radius = (radius + radius / 2).min(spec.max_truncation_radius);
    };

    let d = params.d();
    let out_radius = extent + radius;
    let side = 2 * out_radius + 1;
    let mut dense = vec![Complex64::default(); side.pow(d as u32)];
    let kernel_sites: Vec<LatticeSite> = box_sites(d, radius).collect();
    for (x, v) in f.iter() {
        for (i, z) in kernel_sites.iter().enumerate() {
            let (direct, conjugate) = convolution_weights_at(&table, i);
            let y = x.add(z);
            let slot = box_index(y.coords(), out_radius).expect("output box covers support");
            dense[slot] += v * direct + v.conj() * conjugate;
        }
    }
    let function = LatticeFunction::from_entries(
        d,
        box_sites(d, out_radius)
            .zip(dense)
            .filter(|(_, v)| *v != Complex64::default()),
    )?;
    Ok(EvolutionResult {
        function,
        truncation_radius: radius,
        tail_bound: table.shell_max(radius),
    })
}

fn convolution_weights_at(table: &KernelTable, i: usize) -> (Complex64, Complex64) {
    let h_minus = table.values(KernelIndex::Minus)[i];
    let h_zero = table.values(KernelIndex::Zero)[i];
    let h_plus = table.values(KernelIndex::Plus)[i];
    (
        Complex64::new(h_zero, -0.5 * (h_minus + h_plus)),
        Complex64::new(0.0, 0.5 * (h_plus - h_minus)),
    )
}

/// Largest `|x - y|_inf` over the two supports.
fn max_separation(f: &LatticeFunction, g: &LatticeFunction) -> usize {
    f.sites()
        .flat_map(|x| g.sites().map(move |y| y.sub(x).linf_norm()))
        .max()
        .unwrap_or(0) as usize
}

/// `sigma(T_t f, g)`, with `T_t f` evaluated exactly on `supp g`.
pub fn evolved_phase(
    params: &ModelParams,
    f: &LatticeFunction,
    g: &LatticeFunction,
    t: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    check_inputs(params, f, t)?;
    f.check_dim(g)?;
    if t == 0.0 {
        return symplectic_form(f, g);
    }
    let table = kernel_table(params, t, max_separation(f, g), spec)?;
    Ok(phase_from_table(&table, f, g))
}

pub(crate) fn phase_from_table(
    table: &KernelTable,
    f: &LatticeFunction,
    g: &LatticeFunction,
) -> f64 {
    g.iter()
        .map(|(y, gv)| (evolved_at(table, f, y).conj() * gv).im)
        .sum()
}

/// `|1 - exp(i theta)| = 2 |sin(theta / 2)|`.
pub fn norm_from_phase(theta: f64) -> f64 {
    2.0 * (0.5 * theta).sin().abs()
}

/// `|| [tau_t(W(f)), W(g)] ||`, always in `[0, 2]`.
pub fn commutator_norm(
    params: &ModelParams,
    f: &LatticeFunction,
    g: &LatticeFunction,
    t: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    evolved_phase(params, f, g, t, spec).map(norm_from_phase)
}

/// `sum_{x, y} |f(x)| |g(y)| sum_m |H_t^(m)(x - y)|`.
pub fn commutator_bound(
    params: &ModelParams,
    f: &LatticeFunction,
    g: &LatticeFunction,
    t: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    check_inputs(params, f, t)?;
    f.check_dim(g)?;
    let table = kernel_table(params, t, max_separation(f, g), spec)?;
    Ok(bound_from_table(&table, f, g))
}

pub(crate) fn bound_from_table(
    table: &KernelTable,
    f: &LatticeFunction,
    g: &LatticeFunction,
) -> f64 {
    f.iter()
        .flat_map(|(x, fv)| {
            g.iter().map(move |(y, gv)| {
                let z = x.sub(y);
                let i = box_index(z.coords(), table.radius()).expect("table covers separations");
                fv.norm() * gv.norm() * table.abs_sum_at(i)
            })
        })
        .sum()
}

/// Commutator data for one `(f, g, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CommutatorReport {
    pub t: f64,
    pub phase: f64,
    pub norm: f64,
    pub bound: f64,
}

/// Phase, norm and a-priori bound from one shared kernel table.
pub fn commutator_report(
    params: &ModelParams,
    f: &LatticeFunction,
    g: &LatticeFunction,
    t: f64,
    spec: &QuadratureSpec,
) -> Result<CommutatorReport> {
    check_inputs(params, f, t)?;
    f.check_dim(g)?;
    let table = kernel_table(params, t, max_separation(f, g), spec)?;
    let phase = if t == 0.0 {
        symplectic_form(f, g)?
    } else {
        phase_from_table(&table, f, g)
    };
    Ok(CommutatorReport {
        t,
        phase,
        norm: norm_from_phase(phase),
        bound: bound_from_table(&table, f, g),
    })
}

/// The model restricted to the axes with non-zero coupling.
#[derive(Debug, Clone, PartialEq)]
pub struct DegenerateReduction {
    /// `None` when every coupling vanishes.
    pub model: Option<ModelParams>,
    /// Zero-based indices of the axes with `lambda_j > 0`, in order.
    pub active_axes: Vec<usize>,
}

impl DegenerateReduction {
    /// `x_A` if `x_j = 0` on every inactive axis, else `None` (the kernel
    /// vanishes there).
    pub fn project(&self, x: &LatticeSite) -> Option<LatticeSite> {
        let inactive_zero = x
            .coords()
            .iter()
            .enumerate()
            .all(|(j, &c)| c == 0 || self.active_axes.contains(&j));
        inactive_zero
            .then(|| LatticeSite::new(self.active_axes.iter().map(|&j| x.coords()[j]).collect()))
    }
}

pub fn reduce_degenerate(params: &ModelParams) -> DegenerateReduction {
    let active_axes: Vec<usize> = params
        .lambdas()
        .iter()
        .enumerate()
        .filter(|(_, &l)| l > 0.0)
        .map(|(j, _)| j)
        .collect();
    let lambdas: Vec<f64> = active_axes.iter().map(|&j| params.lambdas()[j]).collect();
    let model = if lambdas.is_empty() {
        None
    } else if params.is_massless() {
        Some(ModelParams::massless(lambdas).expect("sub-model of a valid model"))
    } else {
        Some(ModelParams::new(params.omega(), lambdas).expect("sub-model of a valid model"))
    };
    DegenerateReduction { model, active_axes }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::kernel_value;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn site(c: &[i64]) -> LatticeSite {
        LatticeSite::new(c.to_vec())
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn chain() -> ModelParams {
        ModelParams::new(1.0, vec![1.0]).unwrap()
    }

    fn random_function(
        rng: &mut impl Rng,
        d: usize,
        max_sites: usize,
        spread: i64,
    ) -> LatticeFunction {
        let n = rng.gen_range(1..=max_sites);
        let entries: Vec<(LatticeSite, Complex64)> = (0..n)
            .map(|_| {
                let s = LatticeSite::new((0..d).map(|_| rng.gen_range(-spread..=spread)).collect());
                let r = rng.gen_range(0.0..1.0f64).sqrt();
                let a = rng.gen_range(0.0..std::f64::consts::TAU);
                (s, Complex64::from_polar(r, a))
            })
            .collect();
        LatticeFunction::from_entries(d, entries).unwrap()
    }

    #[test]
    fn symplectic_form_examples() {
        let f = LatticeFunction::delta(site(&[0]));
        let g = LatticeFunction::from_entries(1, [(site(&[0]), c(0.0, 1.0))]).unwrap();
        assert_eq!(symplectic_form(&f, &g).unwrap(), 1.0);
        assert_eq!(symplectic_form(&g, &f).unwrap(), -1.0);
        let far = LatticeFunction::from_entries(1, [(site(&[4]), c(0.3, 2.0))]).unwrap();
        assert_eq!(symplectic_form(&g, &far).unwrap(), 0.0);
        let h = LatticeFunction::delta(site(&[0, 0]));
        assert!(matches!(
            symplectic_form(&f, &h),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn symplectic_form_is_antisymmetric(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_function(&mut rng, 2, 6, 2);
            let g = random_function(&mut rng, 2, 6, 2);
            let a = symplectic_form(&f, &g).unwrap();
            let b = symplectic_form(&g, &f).unwrap();
            prop_assert!((a + b).abs() < 1e-14);
            prop_assert!(symplectic_form(&f, &f).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn time_zero_is_identity() {
        let p = ModelParams::new(1.0, vec![1.0, 2.0]).unwrap();
        let f = LatticeFunction::from_entries(
            2,
            [
                (site(&[1, -1]), c(0.5, -0.25)),
                (site(&[0, 3]), c(-1.0, 0.0)),
            ],
        )
        .unwrap();
        let r = evolve(&p, &f, 0.0, &QuadratureSpec::default()).unwrap();
        assert_eq!(r.function, f);
    }

    #[test]
    fn evolution_matches_assembled_kernels() {
        let p = chain();
        let spec = QuadratureSpec::default();
        let f = LatticeFunction::delta(site(&[0]));
        let r = evolve(&p, &f, 2.0, &spec).unwrap();
        assert!(r.tail_bound < spec.truncation_tolerance);
        for x in -12..=12 {
            let k = |m| kernel_value(&p, m, 2.0, &site(&[x]), &spec).unwrap();
            let (hm, h0, hp) = (
                k(KernelIndex::Minus),
                k(KernelIndex::Zero),
                k(KernelIndex::Plus),
            );
            // f = delta_0 is real, so both convolutions contribute at x
            let expected = c(h0, -0.5 * (hm + hp)) + c(0.0, 0.5 * (hp - hm));
            let got = r.function.get(&site(&[x]));
            assert!(
                (got - expected).norm() < 1e-11,
                "x={x}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn real_function_conjugate_term_vanishes_at_time_zero() {
        let p = chain();
        let table = kernel_table(&p, 0.0, 3, &QuadratureSpec::default()).unwrap();
        for z in -3..=3 {
            let (_, conjugate) = convolution_weights(&table, &[z]);
            assert!(conjugate.norm() < 1e-14);
        }
    }

    #[test]
    fn commutator_matches_kernel_assembly() {
        let p = chain();
        let spec = QuadratureSpec::default();
        let f = LatticeFunction::delta(site(&[0]));
        let g = LatticeFunction::delta(site(&[5]));
        let norm = commutator_norm(&p, &f, &g, 3.0, &spec).unwrap();

        let k = |m| kernel_value(&p, m, 3.0, &site(&[5]), &spec).unwrap();
        let (hm, h0, hp) = (
            k(KernelIndex::Minus),
            k(KernelIndex::Zero),
            k(KernelIndex::Plus),
        );
        let evolved = c(h0, -0.5 * (hm + hp)) + c(0.0, 0.5 * (hp - hm));
        let phase = (evolved.conj() * c(1.0, 0.0)).im;
        let expected = (c(1.0, 0.0) - Complex64::from_polar(1.0, phase)).norm();
        assert!((norm - expected).abs() < 1e-8, "{norm} vs {expected}");
    }

    #[test]
    fn commutator_at_time_zero_with_disjoint_supports() {
        let p = chain();
        let f = LatticeFunction::delta(site(&[0]));
        let g = LatticeFunction::delta(site(&[3]));
        assert_eq!(
            commutator_norm(&p, &f, &g, 0.0, &QuadratureSpec::default()).unwrap(),
            0.0
        );
    }

    #[test]
    fn single_pair_bound() {
        let p = ModelParams::new(1.0, vec![1.0, 0.5]).unwrap();
        let spec = QuadratureSpec::default();
        let x = [2, -1];
        let f = LatticeFunction::delta(site(&[0, 0]));
        let g = LatticeFunction::delta(site(&x));
        let bound = commutator_bound(&p, &f, &g, 1.5, &spec).unwrap();
        let expected: f64 = KernelIndex::ALL
            .iter()
            .map(|&m| kernel_value(&p, m, 1.5, &site(&x), &spec).unwrap().abs())
            .sum();
        assert!((bound - expected).abs() < 1e-11);
        let swapped = commutator_bound(&p, &g, &f, 1.5, &spec).unwrap();
        assert!((bound - swapped).abs() < 1e-12);
    }

    #[test]
    fn norm_below_bound_on_random_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let spec = QuadratureSpec::default();
        for _ in 0..10 {
            let d = rng.gen_range(1..=2);
            let p = ModelParams::new(
                rng.gen_range(0.5..1.5),
                (0..d).map(|_| rng.gen_range(0.3..1.5)).collect(),
            )
            .unwrap();
            let f = random_function(&mut rng, d, 4, 3);
            let g = random_function(&mut rng, d, 4, 3);
            let t = rng.gen_range(0.0..6.0);
            let r = commutator_report(&p, &f, &g, t, &spec).unwrap();
            assert!(r.norm <= 2.0);
            assert!(r.norm <= r.bound + 1e-8, "{r:?}");
        }
    }

    #[test]
    fn evolution_requires_strict_model() {
        let p = ModelParams::new(1.0, vec![1.0, 0.0]).unwrap();
        let f = LatticeFunction::delta(site(&[0, 0]));
        assert_eq!(
            evolve(&p, &f, 1.0, &QuadratureSpec::default()),
            Err(Error::DegenerateModel { axis: 1 })
        );
        let empty = LatticeFunction::zero(1);
        assert!(evolve(&chain(), &empty, 1.0, &QuadratureSpec::default()).is_err());
    }

    #[test]
    fn truncation_cap_is_reported() {
        let spec = QuadratureSpec {
            max_truncation_radius: 10,
            ..QuadratureSpec::default()
        };
        let f = LatticeFunction::delta(site(&[0]));
        let err = evolve(&chain(), &f, 20.0, &spec);
        assert!(
            matches!(err, Err(Error::TruncationFailure { .. })),
            "{err:?}"
        );
    }

    #[test]
    fn degenerate_reduction_examples() {
        let p = ModelParams::new(1.0, vec![1.0, 2.0]).unwrap();
        let r = reduce_degenerate(&p);
        assert_eq!(r.model.as_ref(), Some(&p));
        assert_eq!(r.active_axes, vec![0, 1]);

        let r = reduce_degenerate(&ModelParams::new(1.0, vec![1.0, 0.0]).unwrap());
        assert_eq!(r.model, Some(ModelParams::new(1.0, vec![1.0]).unwrap()));
        assert_eq!(r.active_axes, vec![0]);
        assert_eq!(r.project(&site(&[4, 0])), Some(site(&[4])));
        assert_eq!(r.project(&site(&[4, 1])), None);

        let r = reduce_degenerate(&ModelParams::new(1.0, vec![0.0, 2.0, 0.0]).unwrap());
        assert_eq!(r.model, Some(ModelParams::new(1.0, vec![2.0]).unwrap()));
        assert_eq!(r.active_axes, vec![1]);

        let r = reduce_degenerate(&ModelParams::new(1.0, vec![0.0]).unwrap());
        assert_eq!(r.model, None);
    }
}
