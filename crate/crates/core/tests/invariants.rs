mod common;

use common::{random_ac, random_field};
use jsp_core::container::{decode, encode, Payload};
use jsp_core::franson::{all_probabilities, synthesize_interferograms};
use jsp_core::grid::make_grid;
use jsp_core::harness::is_monotone;
use jsp_core::mice::{model_error, reconstruct, InitialGuess};
use jsp_core::{ComplexField, NoiseModel, ReconstructionConfig, ShearSchedule};
use proptest::prelude::*;

fn schedule_strategy() -> impl Strategy<Value = ShearSchedule> {
    (prop::collection::btree_set(-3i64..=3, 2..5), prop::collection::btree_set(-3i64..=3, 2..5))
        .prop_map(|(a, b)| ShearSchedule::new(a.into_iter().collect(), b.into_iter().collect(), 3.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn model_error_never_increases(seed in 0u64..1_000_000, schedule in schedule_strategy(), random_init in any::<bool>()) {
        let grid = make_grid(8, 820.0, 10.0).unwrap();
        let ac = random_ac(grid, &schedule, seed);
        let initial_guess = if random_init { InitialGuess::RandomPhase { seed } } else { InitialGuess::Flat };
        let config = ReconstructionConfig { iterations: 8, initial_guess, ..Default::default() };
        let result = reconstruct(&ac, &config).unwrap();
        prop_assert_eq!(result.error_history.len(), 16);
        prop_assert!(is_monotone(&result.error_history, ac.energy()), "{:?}", result.error_history);
        let recomputed = model_error(&ac, &result.e1, &result.e2).unwrap();
        prop_assert!((recomputed - result.final_error()).abs() <= 1e-12 * ac.energy());
    }

    #[test]
    fn global_phase_leaves_probabilities_unchanged(seed in 0u64..1_000_000, c in -10.0f64..10.0) {
        let grid = make_grid(8, 820.0, 10.0).unwrap();
        let schedule = ShearSchedule::new(vec![-1, 0, 2], vec![-2, 1], 3.0);
        let e1 = random_field(grid, seed);
        let e2 = jsp_core::field::permute_axes(&e1).unwrap();
        let r1 = ComplexField::new(grid, e1.values().mapv(|z| z * num_complex::Complex64::from_polar(1.0, c))).unwrap();
        let r2 = jsp_core::field::permute_axes(&r1).unwrap();
        let a = all_probabilities(&e1, &e2, &schedule).unwrap();
        let b = all_probabilities(&r1, &r2, &schedule).unwrap();
        for (x, y) in a.iter().zip(&b) {
            for (p, q) in x.iter().zip(y.iter()) {
                prop_assert!((p - q).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn counts_are_reproducible_and_round_trip(seed in any::<u64>(), n_max in 0.0f64..2000.0) {
        let grid = make_grid(8, 820.0, 10.0).unwrap();
        let schedule = ShearSchedule::new(vec![-1, 0, 1], vec![0, 1], 3.0);
        let e1 = random_field(grid, seed % 1000);
        let e2 = jsp_core::field::permute_axes(&e1).unwrap();
        let noise = NoiseModel::new(n_max);
        let a = synthesize_interferograms(&e1, &e2, &schedule, &noise, seed).unwrap();
        let b = synthesize_interferograms(&e1, &e2, &schedule, &noise, seed).unwrap();
        prop_assert_eq!(&a, &b);
        let back = decode(&encode(&Payload::Interferograms(a.clone())).unwrap()).unwrap();
        prop_assert_eq!(Payload::Interferograms(a), back);
    }
}
