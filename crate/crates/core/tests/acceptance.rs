//! Acceptance criteria. Prints one PASS/FAIL line per criterion, then fails if any did.
//!
//! Run with `cargo test -p jsp-core --test acceptance -- --nocapture` to see the report.

mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use common::{fidelity, max_abs_diff, oracle_e1, oracle_e2, random_ac, random_field, spearman_no_ties};
use jsp_core::franson::all_probabilities;
use jsp_core::grid::make_grid;
use jsp_core::harness::{
    binary_test_image, evaluate, logo_truth, run_logo_demo, run_pipeline, run_sweep, spearman, LogoSpec,
    SchedulePreset, SweepReport, SweepSpec, LOGO_RMSE_THRESHOLD, LOGO_SCALE_RAD,
};
use jsp_core::mice::{reconstruct, update_e1, update_e2};
use jsp_core::sideband::{direct_ac, extract_ac_maps, interior_mask, DEFAULT_INTERIOR_MARGIN};
use jsp_core::{NoiseModel, ReconstructionConfig, ShearSchedule, SidebandFilter, StateSpec};

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(name: &'static str, pass: bool, detail: String) -> Outcome {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    Outcome { name, pass, detail }
}

fn noiseless_exactness() -> Outcome {
    let start = Instant::now();
    let truth = StateSpec::default().build().unwrap();
    let ac = jsp_core::sideband::direct_ac_set(&truth.e1, &truth.e2, &ShearSchedule::default_8x8()).unwrap();
    let result = reconstruct(&ac, &ReconstructionConfig::default()).unwrap();
    let rmse = evaluate(&truth, &result).unwrap().rmse;
    let elapsed = start.elapsed();
    check(
        "noiseless exactness",
        rmse < 1e-6 && elapsed < Duration::from_secs(5),
        format!("rmse {rmse:.3e} rad (< 1e-6), {elapsed:.2?} (< 5 s)"),
    )
}

fn cell_mean(report: &SweepReport, n_max: f64) -> f64 {
    report.cells.iter().find(|c| c.n_max == n_max).and_then(|c| c.mean_rmse_rad).unwrap_or(f64::NAN)
}

fn high_signal(report: &SweepReport, cell_time: Duration) -> Outcome {
    let m = cell_mean(report, 5000.0);
    check(
        "high-signal point (N_max 5000)",
        (2.25e-3..=9.0e-3).contains(&m) && cell_time < Duration::from_secs(120),
        format!("mean rmse {m:.4e} rad in [2.25e-3, 9.0e-3], cell runtime {cell_time:.2?} (< 2 min)"),
    )
}

fn low_signal(report: &SweepReport) -> Outcome {
    let m = cell_mean(report, 5.0);
    check(
        "low-signal point (N_max 5)",
        (0.028..=0.112).contains(&m),
        format!("mean rmse {m:.4e} rad in [0.028, 0.112]"),
    )
}

fn monotone_trend(report: &SweepReport) -> Outcome {
    let curve = report.curve();
    let x: Vec<f64> = curve.iter().map(|c| c.0).collect();
    let y: Vec<f64> = curve.iter().map(|c| c.1).collect();
    let rho = spearman(&x, &y).unwrap_or(f64::NAN);
    let independent = spearman_no_ties(&x, &y);
    let means: Vec<String> = y.iter().map(|v| format!("{v:.3e}")).collect();
    check(
        "monotone trend",
        rho <= -0.8 && (rho - independent).abs() < 1e-12 && curve.len() == report.cells.len(),
        format!("spearman {rho:.3} (<= -0.8); means [{}]", means.join(", ")),
    )
}

fn monotone_descent(report: &SweepReport) -> Outcome {
    let violations: usize = report.cells.iter().map(|c| c.descent_violations).sum();
    let runs: usize = report.cells.iter().map(|c| c.records.len()).sum();
    let failures: usize = report.cells.iter().map(|c| c.failures.len()).sum();
    check(
        "monotone descent",
        violations == 0 && failures == 0,
        format!("{violations} violations over {runs} reconstructions, {failures} failed repeats"),
    )
}

fn oracle_equivalence() -> Outcome {
    let grid = make_grid(8, 820.0, 10.0).unwrap();
    let schedule = ShearSchedule::new(vec![-1, 0, 2], vec![-2, 0, 1], 2.0);
    let mut worst = 0.0f64;
    for seed in 0..5u64 {
        let ac = random_ac(grid, &schedule, 1000 + seed);
        let e2 = random_field(grid, 2000 + seed);
        let e1 = random_field(grid, 3000 + seed);
        let u1 = update_e1(&ac, &e2, 1e-14, None).unwrap();
        let u2 = update_e2(&ac, &e1, 1e-14, None).unwrap();
        worst = worst.max(max_abs_diff(u1.field.values(), &oracle_e1(&ac, &e2)));
        worst = worst.max(max_abs_diff(u2.field.values(), &oracle_e2(&ac, &e1)));
    }
    check("oracle equivalence", worst < 1e-10, format!("max |update - normal-equation solve| {worst:.3e} (< 1e-10)"))
}

fn gauge_invariance() -> Outcome {
    let state = StateSpec::default();
    let truth = state.build().unwrap();
    let schedule = ShearSchedule::default_8x8();
    let filter = SidebandFilter::for_schedule(&schedule);
    let config = ReconstructionConfig::default();
    let base_p = all_probabilities(&truth.e1, &truth.e2, &schedule).unwrap();
    let base_rmse = run_pipeline(&truth, &schedule, &NoiseModel::deterministic(5000.0), 0, &filter, &config)
        .unwrap()
        .comparison
        .rmse;
    let mut worst_p = 0.0f64;
    let mut worst_rmse = 0.0f64;
    for c in [PI / 7.0, 1.0, -2.5] {
        let rotated = truth.with_global_phase(c).unwrap();
        let p = all_probabilities(&rotated.e1, &rotated.e2, &schedule).unwrap();
        for (a, b) in base_p.iter().zip(&p) {
            for (x, y) in a.iter().zip(b.iter()) {
                worst_p = worst_p.max((x - y).abs());
            }
        }
        let rmse = run_pipeline(&rotated, &schedule, &NoiseModel::deterministic(5000.0), 0, &filter, &config)
            .unwrap()
            .comparison
            .rmse;
        worst_rmse = worst_rmse.max((rmse - base_rmse).abs());
    }
    check(
        "gauge invariance",
        worst_p <= 1e-12 && worst_rmse < 1e-9,
        format!("max pixel change {worst_p:.3e} (<= 1e-12), max rmse change {worst_rmse:.3e} (< 1e-9)"),
    )
}

fn sideband_fidelity() -> Outcome {
    let truth = StateSpec::default().build().unwrap();
    let schedule = ShearSchedule::default_8x8();
    let filter = SidebandFilter::for_schedule(&schedule);
    let probs = all_probabilities(&truth.e1, &truth.e2, &schedule).unwrap();
    let extracted = extract_ac_maps(&probs, &truth.grid, &schedule, &filter, true).unwrap();
    let interior = interior_mask(&truth.grid, DEFAULT_INTERIOR_MARGIN);
    let mut amp = 0.0f64;
    let mut phase = 0.0f64;
    for ((k, l), map) in schedule.pairs().zip(&extracted.ac) {
        let reference = direct_ac(&truth.e1, &truth.e2, k, l, &schedule).unwrap();
        let (a, p) = fidelity(map, &reference, &interior, 0.1);
        amp = amp.max(a);
        phase = phase.max(p);
    }
    check(
        "sideband fidelity",
        amp < 1e-2 && phase < 0.02,
        format!("amplitude error {amp:.3e} of pair peak (< 1e-2), phase error {phase:.3e} rad (< 0.02)"),
    )
}

fn determinism(first: &str, spec: &SweepSpec, state: &StateSpec) -> Outcome {
    let second = run_sweep(spec, state, 1).unwrap().to_json().unwrap();
    check(
        "determinism",
        first.as_bytes() == second.as_bytes(),
        format!("{} bytes, all-core run vs single-thread run identical: {}", first.len(), first == second),
    )
}

fn logo_demo() -> Outcome {
    let truth = logo_truth(&StateSpec::default(), &binary_test_image(32), LOGO_SCALE_RAD).unwrap();
    let dense = run_logo_demo(&truth, &LogoSpec::default()).unwrap().comparison.rmse;
    let sparse = run_logo_demo(&truth, &LogoSpec { schedule: SchedulePreset::Shears8x8, ..LogoSpec::default() })
        .unwrap()
        .comparison
        .rmse;
    check(
        "logo demonstration",
        dense < LOGO_RMSE_THRESHOLD && sparse > dense,
        format!("32 shears {dense:.4e} rad (< {LOGO_RMSE_THRESHOLD}), 8 shears {sparse:.4e} rad (> 32-shear value)"),
    )
}

#[test]
fn acceptance_criteria() {
    let state = StateSpec::default();
    let spec = SweepSpec::default();

    let cell_start = Instant::now();
    let single = SweepSpec { n_max_values: vec![5000.0], ..spec.clone() };
    run_sweep(&single, &state, 0).unwrap();
    let cell_time = cell_start.elapsed();

    let report = run_sweep(&spec, &state, 0).unwrap();
    let json = report.to_json().unwrap();

    let outcomes = [
        noiseless_exactness(),
        high_signal(&report, cell_time),
        low_signal(&report),
        monotone_trend(&report),
        monotone_descent(&report),
        oracle_equivalence(),
        gauge_invariance(),
        sideband_fidelity(),
        determinism(&json, &spec, &state),
        logo_demo(),
    ];
    let failed: Vec<String> = outcomes.iter().filter(|o| !o.pass).map(|o| format!("{}: {}", o.name, o.detail)).collect();
    println!("{} of {} criteria passed", outcomes.len() - failed.len(), outcomes.len());
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}
