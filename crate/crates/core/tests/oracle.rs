mod common;

use common::{max_abs_diff, oracle_e1, oracle_e2, random_ac, random_field};
use jsp_core::grid::make_grid;
use jsp_core::mice::{update_e1, update_e2};
use jsp_core::sideband::direct_ac_set;
use jsp_core::ShearSchedule;

fn schedules() -> Vec<ShearSchedule> {
    vec![
        ShearSchedule::new(vec![-1, 0, 1], vec![-1, 0, 1], 2.0),
        ShearSchedule::new(vec![-2, 0, 1], vec![0, 1, 3], 2.0),
    ]
}

// A tiny epsilon keeps every covered pixel unmasked so both sides solve the same problem.
const EPS: f64 = 1e-14;

#[test]
fn update_e1_matches_normal_equations() {
    let grid = make_grid(8, 820.0, 10.0).unwrap();
    for (s, schedule) in schedules().iter().enumerate() {
        for seed in 0..4u64 {
            let ac = random_ac(grid, schedule, 100 + seed);
            let e2 = random_field(grid, 200 + seed + 10 * s as u64);
            let ours = update_e1(&ac, &e2, EPS, None).unwrap();
            assert!(ours.mask.iter().all(|&m| m));
            let reference = oracle_e1(&ac, &e2);
            let diff = max_abs_diff(ours.field.values(), &reference);
            assert!(diff < 1e-10, "schedule {s} seed {seed}: {diff:e}");
        }
    }
}

#[test]
fn update_e2_matches_normal_equations() {
    let grid = make_grid(8, 820.0, 10.0).unwrap();
    for (s, schedule) in schedules().iter().enumerate() {
        for seed in 0..4u64 {
            let ac = random_ac(grid, schedule, 300 + seed);
            let e1 = random_field(grid, 400 + seed + 10 * s as u64);
            let ours = update_e2(&ac, &e1, EPS, None).unwrap();
            assert!(ours.mask.iter().all(|&m| m));
            let reference = oracle_e2(&ac, &e1);
            let diff = max_abs_diff(ours.field.values(), &reference);
            assert!(diff < 1e-10, "schedule {s} seed {seed}: {diff:e}");
        }
    }
}

#[test]
fn oracles_recover_consistent_fields() {
    // Sanity check of the oracle itself: on noise-free products it returns the generating field.
    let grid = make_grid(8, 820.0, 10.0).unwrap();
    let schedule = &schedules()[0];
    let e1 = random_field(grid, 1);
    let e2 = random_field(grid, 2);
    let ac = direct_ac_set(&e1, &e2, schedule).unwrap();
    assert!(max_abs_diff(&oracle_e1(&ac, &e2), e1.values()) < 1e-10);
    assert!(max_abs_diff(&oracle_e2(&ac, &e1), e2.values()) < 1e-10);
}
