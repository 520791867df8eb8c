//! Shared fixtures for the benchmarks.

use jsp_core::franson::synthesize_interferograms;
use jsp_core::sideband::extract_ac_set;
use jsp_core::{AcSet, GroundTruth, InterferogramSet, NoiseModel, ShearSchedule, SidebandFilter, StateSpec};

pub struct Fixture {
    pub truth: GroundTruth,
    pub schedule: ShearSchedule,
    pub interferograms: InterferogramSet,
    pub ac: AcSet,
}

/// Default state with the given schedule at `n_max` peak counts.
pub fn fixture(schedule: ShearSchedule, n_max: f64) -> Fixture {
    let truth = StateSpec::default().build().expect("default state");
    let interferograms =
        synthesize_interferograms(&truth.e1, &truth.e2, &schedule, &NoiseModel::new(n_max), 1).expect("synthesis");
    let ac = extract_ac_set(&interferograms, &SidebandFilter::for_schedule(&schedule), true).expect("extraction");
    Fixture { truth, schedule, interferograms, ac }
}
