mod common;

use harmonic_lattice::analysis::{
    cone_scan, fit_decay, geometric_samples, weighted_l1_norm, WeightSpec,
};
use harmonic_lattice::dynamics::{commutator_report, evolve, symplectic_form};
use harmonic_lattice::{LatticeFunction, LatticeSite, ModelParams, QuadratureSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn model(d: usize) -> ModelParams {
    ModelParams::isotropic(d, 1.0, 1.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn evolution_preserves_symplectic_form(seed in any::<u64>(), d in 1usize..=2, ti in 0usize..3) {
        let t = [0.5, 2.0, 10.0][ti];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = common::random_function(&mut rng, d, 5, 3);
        let g = common::random_function(&mut rng, d, 5, 3);
        let spec = QuadratureSpec::default();
        let tf = evolve(&model(d), &f, t, &spec).unwrap().function;
        let tg = evolve(&model(d), &g, t, &spec).unwrap().function;
        let drift = (symplectic_form(&tf, &tg).unwrap() - symplectic_form(&f, &g).unwrap()).abs();
        prop_assert!(drift < 1e-6, "drift {drift}");
    }

    #[test]
    fn evolution_is_a_group(seed in any::<u64>(), d in 1usize..=2, s in -3.0f64..3.0, t in -3.0f64..3.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = common::random_function(&mut rng, d, 4, 2);
        let spec = QuadratureSpec::default();
        let p = model(d);
        let stepwise = evolve(&p, &evolve(&p, &f, s, &spec).unwrap().function, t, &spec).unwrap().function;
        let direct = evolve(&p, &f, s + t, &spec).unwrap().function;
        prop_assert!(stepwise.max_abs_diff(&direct) < 1e-6);
    }

    #[test]
    fn commutator_norm_below_bound(seed in any::<u64>(), d in 1usize..=2, t in -12.0f64..12.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = common::random_function(&mut rng, d, 5, 4);
        let g = common::random_function(&mut rng, d, 5, 4);
        let r = commutator_report(&model(d), &f, &g, t, &QuadratureSpec::default()).unwrap();
        prop_assert!((0.0..=2.0).contains(&r.norm));
        prop_assert!(r.norm <= r.bound.min(2.0) + 1e-8, "{r:?}");
    }

    #[test]
    fn weighted_norm_dominates_l1(seed in any::<u64>(), d in 1usize..=3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = common::random_function(&mut rng, d, 6, 5);
        prop_assert!(weighted_l1_norm(&f, &WeightSpec::new(d)).unwrap() >= f.l1_norm());
    }

    #[test]
    fn fit_recovers_power_laws(exponent in -3.0f64..1.0, amplitude in 1e-3f64..1e3, n in 5usize..40) {
        let series: Vec<_> = geometric_samples(1.0, 500.0, n)
            .into_iter()
            .map(|t| (t, amplitude * t.powf(exponent)))
            .collect();
        let fit = fit_decay(&series).unwrap();
        prop_assert!((fit.exponent - exponent).abs() < 1e-6);
        prop_assert!((fit.amplitude / amplitude - 1.0).abs() < 1e-6);
    }
}

#[test]
fn cone_scan_values_bounded_and_vanish_at_time_zero() {
    for d in 1..=2 {
        let scan = cone_scan(
            &model(d),
            &[0.0, 1.0, 3.0, 6.0],
            20,
            &QuadratureSpec::default(),
        )
        .unwrap();
        assert!(scan
            .values
            .iter()
            .flatten()
            .all(|v| (0.0..=2.0).contains(v)));
        assert!(scan.values[0].iter().all(|&v| v == 0.0));
    }
}

#[test]
fn symplectic_form_is_real_bilinear() {
    let f = LatticeFunction::delta(LatticeSite::new(vec![2]));
    let g = LatticeFunction::from_entries(
        1,
        [(
            LatticeSite::new(vec![2]),
            num_complex::Complex64::new(0.0, 1.0),
        )],
    )
    .unwrap();
    assert_eq!(symplectic_form(&f, &g).unwrap(), 1.0);
    assert_eq!(symplectic_form(&g, &f).unwrap(), -1.0);
}
