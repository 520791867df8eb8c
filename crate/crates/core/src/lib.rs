//! Simulation of a multi-shear modified Franson interferometer and iterative
//! reconstruction of the joint spectral phase of time-frequency entangled photon pairs.
//!
//! The pipeline is
//!
//! 1. [`state`]: build the biphoton wavefunction `E1` and its axis-swapped ancilla `E2`,
//! 2. [`franson`]: compute coincidence maps for every shear pair and add shot noise,
//! 3. [`sideband`]: demodulate each map to the interferometric product `T1 conj(T2)`,
//! 4. [`mice`]: alternate least-squares updates of both fields,
//! 5. [`metrics`]: compare the retrieved phase with the truth.
//!
//! [`harness`] runs the Monte-Carlo sweeps on top, [`container`] persists every
//! intermediate product and [`render`] draws heatmaps and curves.

// Negated float comparisons are used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod container;
pub mod error;
pub mod field;
pub mod franson;
pub mod grid;
pub mod harness;
pub mod metrics;
pub mod mice;
pub mod poisson;
pub mod render;
pub mod sideband;
pub mod state;

pub use error::{Error, Result};
pub use field::{ComplexField, PhaseTerm};
pub use franson::{InterferogramSet, NoiseModel, ShearSchedule};
pub use grid::FrequencyGrid;
pub use metrics::{MetricRecord, PhaseComparison};
pub use mice::{InitialGuess, ReconstructionConfig, ReconstructionResult};
pub use sideband::{AcSet, SidebandFilter};
pub use state::{GroundTruth, StateSpec};
pub use container::{load_container, save_container, Payload};
pub use harness::{SchedulePreset, SweepReport, SweepSpec};
pub use render::{Palette, PaletteSpec};
