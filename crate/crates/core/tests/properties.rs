use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use famimo::channel::{Cuboid, Position};
use famimo::dbp::mul_reduce;
use famimo::fp::{update_auxiliaries, update_w_bisection, update_w_inverse_free, BisectionConfig};
use famimo::linalg::{rel_frobenius_error, CMat};
use famimo::mm::mm_step;
use famimo::objective::{f_lag, f_quad, total_power, wsr};
use famimo::scenario::{apply_perturbation, dbm_to_watt, sample_scenario, PerturbationSpec, ScenarioSpec};
use famimo::testkit::{random_cmat, random_instance, random_psd};

fn config() -> ProptestConfig {
    ProptestConfig::with_cases(48)
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn sharded_products_match(seed in any::<u64>(), m in 1usize..40, p in 1usize..5, q in 1usize..5, parts in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_cmat(&mut rng, m, p);
        let b = random_cmat(&mut rng, m, q);
        let parts = parts.min(m);
        let bounds: Vec<usize> = (0..=parts).map(|i| i * m / parts).collect();
        let shard = |x: &CMat| -> Vec<CMat> { bounds.windows(2).map(|w| x.rows(w[0], w[1] - w[0]).into_owned()).collect() };
        let reduced = mul_reduce(&shard(&a), &shard(&b)).unwrap();
        prop_assert!(rel_frobenius_error(&reduced, &(a.adjoint() * &b)) <= 1e-12);
    }

    #[test]
    fn quadratic_and_lagrangian_bounds_hold_for_any_auxiliaries(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, 4, 2, 2, 2);
        let h = &inst.channels.h;
        let gamma: Vec<CMat> = (0..2).map(|_| random_psd(&mut rng, 2, 1.0)).collect();
        let phi: Vec<CMat> = (0..2).map(|_| random_cmat(&mut rng, 2, 2)).collect();
        let r = wsr(h, &inst.beams).unwrap();
        let lag = f_lag(h, &inst.beams, &gamma).unwrap();
        let quad = f_quad(h, &inst.beams, &gamma, &phi).unwrap();
        prop_assert!(lag <= r + 1e-9 * r.abs().max(1.0));
        prop_assert!(quad <= lag + 1e-9 * lag.abs().max(1.0));
    }

    #[test]
    fn beamformer_updates_respect_the_budget(seed in any::<u64>(), iteration in 1usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, 6, 2, 3, 2);
        let h = &inst.channels.h;
        let b = &inst.beams;
        let (gamma, phi) = update_auxiliaries(h, b).unwrap();
        let bis = update_w_bisection(h, &b.weights, &gamma, &phi, b.p_max, &BisectionConfig::default()).unwrap();
        prop_assert!(total_power(&bis.w) <= b.p_max * (1.0 + 1e-12));
        if bis.mu > 0.0 {
            prop_assert!(total_power(&bis.w) >= b.p_max * (1.0 - 1e-6));
        }
        let inv = update_w_inverse_free(h, &b.weights, &gamma, &phi, &b.w, &b.w, iteration, b.p_max).unwrap();
        prop_assert!(total_power(&inv.w) <= b.p_max * (1.0 + 1e-12));
    }

    #[test]
    fn mm_steps_stay_in_their_boxes(
        anchor in prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 1..8),
        grad in prop::collection::vec(prop::array::uniform3(-1e3f64..1e3), 8),
        delta in 1e-3f64..1e3,
    ) {
        let boxes = vec![Cuboid::new([-1.0, -1.0, 0.0], [1.0, 1.0, 0.0]); anchor.len()];
        let a: Vec<Position> = anchor.iter().map(|p| Position::new(p[0], p[1], 0.0)).collect();
        let g: Vec<Position> = grad[..a.len()].iter().map(|p| Position::new(p[0], p[1], p[2])).collect();
        let next = mm_step(&a, &g, delta, &boxes).unwrap();
        prop_assert!(next.iter().zip(&boxes).all(|(p, b)| b.contains(p)));
        let zero = vec![Position::zeros(); a.len()];
        prop_assert_eq!(mm_step(&a, &zero, delta, &boxes).unwrap(), a);
    }

    #[test]
    fn perturbed_angles_stay_within_the_error(seed in any::<u64>(), index in 0usize..100, mu in 0.0f64..0.2) {
        let spec = ScenarioSpec { seed, ..ScenarioSpec::default() };
        let truth = sample_scenario(&spec, index).unwrap().geometry;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let est = apply_perturbation(&truth, &PerturbationSpec { angle_error: mu, prm_error: 0.0 }, &mut rng).unwrap();
        for (e, t) in est.iter().zip(&truth) {
            for (a, b) in e.aod.iter().chain(&e.aoa).zip(t.aod.iter().chain(&t.aoa)) {
                prop_assert!((a.elevation - b.elevation).abs() <= mu + 1e-15);
                prop_assert!((a.azimuth - b.azimuth).abs() <= mu + 1e-15);
            }
            prop_assert_eq!(&e.prm, &t.prm);
        }
    }

    #[test]
    fn scenarios_are_reproducible_and_in_range(seed in any::<u64>(), index in 0usize..1000) {
        let spec = ScenarioSpec { seed, ..ScenarioSpec::default() };
        let a = sample_scenario(&spec, index).unwrap();
        prop_assert_eq!(&a, &sample_scenario(&spec, index).unwrap());
        prop_assert!(a.distances.iter().all(|d| (100.0..=300.0).contains(d)));
    }

    #[test]
    fn dbm_conversion_inverts(dbm in -150.0f64..80.0) {
        let w = dbm_to_watt(dbm);
        prop_assert!((10.0 * w.log10() + 30.0 - dbm).abs() < 1e-10);
    }
}
