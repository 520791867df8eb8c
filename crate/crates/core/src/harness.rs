//! Experiment orchestration: the single-shot pipeline, Monte-Carlo sweeps over
//! peak counts, and the binary-image demonstration.

use std::path::Path;

use image::GrayImage;
use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::container::FORMAT_VERSION;
use crate::error::{Error, Result};
use crate::field::phase_from_luma;
use crate::franson::{synthesize_interferograms, InterferogramSet, NoiseModel, ShearSchedule};
use crate::metrics::{compare_phase, MetricRecord, PhaseComparison};
use crate::mice::{reconstruct, ReconstructionConfig, ReconstructionResult};
use crate::poisson::derive_seed;
use crate::sideband::{carrier_frequency_check, extract_ac_set, AcSet, SidebandFilter};
use crate::state::{GroundTruth, StateSpec};

/// Shear layouts used by the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SchedulePreset {
    /// Eight shears per axis, -4..=3 px.
    #[serde(rename = "8x8")]
    Shears8x8,
    /// Thirty-two shears per axis, -16..=15 px.
    #[serde(rename = "32x32")]
    Shears32x32,
}

impl SchedulePreset {
    pub fn schedule(self) -> ShearSchedule {
        match self {
            SchedulePreset::Shears8x8 => ShearSchedule::default_8x8(),
            SchedulePreset::Shears32x32 => ShearSchedule::dense_32x32(),
        }
    }
}

/// Monte-Carlo sweep configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub n_max_values: Vec<f64>,
    pub repeats: usize,
    pub iterations: usize,
    pub schedule: SchedulePreset,
    pub base_seed: u64,
    /// Disables shot noise and accidentals.
    pub deterministic: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            n_max_values: vec![5.0, 20.0, 100.0, 500.0, 1000.0, 2000.0, 5000.0, 8000.0],
            repeats: 30,
            iterations: 20,
            schedule: SchedulePreset::Shears8x8,
            base_seed: 0,
            deterministic: false,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_max_values.is_empty() {
            return Err(Error::InvalidParameter("n_max list is empty".into()));
        }
        if let Some(bad) = self.n_max_values.iter().find(|n| !(n.is_finite() && **n >= 0.0)) {
            return Err(Error::InvalidParameter(format!("n_max must be finite and >= 0, got {bad}")));
        }
        if self.repeats == 0 {
            return Err(Error::InvalidParameter("repeats must be >= 1".into()));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iterations must be >= 1".into()));
        }
        Ok(())
    }

    /// Seed of one `(n_max, repeat)` cell; independent of the other cells.
    pub fn cell_seed(&self, n_max: f64, repeat: usize) -> u64 {
        derive_seed(&[self.base_seed, n_max.to_bits(), repeat as u64])
    }
}

/// A repeat that errored instead of producing a record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatFailure {
    pub repeat_index: usize,
    pub error: String,
}

/// Aggregate of all repeats at one peak-count level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub n_max: f64,
    /// `None` when every repeat failed.
    pub mean_rmse_rad: Option<f64>,
    /// Sample standard deviation; zero for a single record.
    pub std_rmse_rad: Option<f64>,
    /// Reconstructions whose model error increased beyond the slack.
    pub descent_violations: usize,
    pub records: Vec<MetricRecord>,
    pub failures: Vec<RepeatFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub base_seed: u64,
    /// SHA-256 of the canonical JSON of the sweep and state specs.
    pub config_hash: String,
    pub format_version: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub provenance: Provenance,
    pub spec: SweepSpec,
    pub cells: Vec<SweepCell>,
}

impl SweepReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// `(n_max, mean, std)` for cells with at least one record.
    pub fn curve(&self) -> Vec<(f64, f64, f64)> {
        self.cells
            .iter()
            .filter_map(|c| Some((c.n_max, c.mean_rmse_rad?, c.std_rmse_rad.unwrap_or(0.0))))
            .collect()
    }

    /// One row per record plus one per failure.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n_max,repeat_index,rmse_rad,offset_rad,pixels_used,error\n");
        for cell in &self.cells {
            for r in &cell.records {
                out.push_str(&format!(
                    "{},{},{},{},{},\n",
                    r.n_max, r.repeat_index, r.rmse_rad, r.offset_rad, r.pixels_used
                ));
            }
            for f in &cell.failures {
                out.push_str(&format!("{},{},,,,\"{}\"\n", cell.n_max, f.repeat_index, f.error.replace('"', "'")));
            }
        }
        out
    }
}

/// Relative slack on model-error increases, as a fraction of the data energy.
pub const DESCENT_SLACK: f64 = 1e-12;

/// True when no step of `history` rises by more than `DESCENT_SLACK * scale`.
pub fn is_monotone(history: &[f64], scale: f64) -> bool {
    history.windows(2).all(|w| w[1] <= w[0] + DESCENT_SLACK * scale)
}

/// Everything produced by one pass through the pipeline.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub interferograms: InterferogramSet,
    pub ac: AcSet,
    pub result: ReconstructionResult,
    pub comparison: PhaseComparison,
}

impl PipelineOutput {
    pub fn monotone(&self) -> bool {
        is_monotone(&self.result.error_history, self.ac.energy())
    }
}

/// Compares the retrieved `E1` phase with the ground truth over the coverage mask.
pub fn evaluate(truth: &GroundTruth, result: &ReconstructionResult) -> Result<PhaseComparison> {
    compare_phase(&result.e1.phase(), &truth.phase, &truth.weights(), &result.mask_e1)
}

/// Synthesize, extract, reconstruct and score one noise realization.
pub fn run_pipeline(
    truth: &GroundTruth,
    schedule: &ShearSchedule,
    noise: &NoiseModel,
    seed: u64,
    filter: &SidebandFilter,
    config: &ReconstructionConfig,
) -> Result<PipelineOutput> {
    let interferograms = synthesize_interferograms(&truth.e1, &truth.e2, schedule, noise, seed)?;
    let ac = extract_ac_set(&interferograms, filter, true)?;
    let result = reconstruct(&ac, config)?;
    let comparison = evaluate(truth, &result)?;
    Ok(PipelineOutput { interferograms, ac, result, comparison })
}

fn config_hash(spec: &SweepSpec, state: &StateSpec) -> Result<String> {
    let canonical = serde_json::to_vec(&(spec, state))?;
    let digest = Sha256::digest(&canonical);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (Some(mean), Some(0.0));
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (Some(mean), Some(var.sqrt()))
}

enum CellOutcome {
    Record(MetricRecord, bool),
    Failure(String),
}

/// Runs every `(n_max, repeat)` cell on up to `workers` threads (0 = all cores).
///
/// The report is identical for any worker count.
pub fn run_sweep(spec: &SweepSpec, state: &StateSpec, workers: usize) -> Result<SweepReport> {
    spec.validate()?;
    let truth = state.build()?;
    let schedule = spec.schedule.schedule();
    for warning in schedule.validate(&truth.grid)? {
        log::warn!("{warning}");
    }
    let filter = SidebandFilter::for_schedule(&schedule);
    let report = carrier_frequency_check(&schedule, &filter, &truth.grid);
    if !report.pass {
        return Err(Error::CarrierCheck(report.problems.join("; ")));
    }
    let config = ReconstructionConfig { iterations: spec.iterations, ..ReconstructionConfig::default() };

    let jobs: Vec<(usize, usize)> =
        (0..spec.n_max_values.len()).flat_map(|c| (0..spec.repeats).map(move |r| (c, r))).collect();
    let run = |&(c, r): &(usize, usize)| {
        let n_max = spec.n_max_values[c];
        let noise = if spec.deterministic { NoiseModel::deterministic(n_max) } else { NoiseModel::new(n_max) };
        match run_pipeline(&truth, &schedule, &noise, spec.cell_seed(n_max, r), &filter, &config) {
            Ok(out) => CellOutcome::Record(
                MetricRecord {
                    n_max,
                    repeat_index: r,
                    rmse_rad: out.comparison.rmse,
                    offset_rad: out.comparison.aligned_offset,
                    pixels_used: out.comparison.pixels_used,
                },
                out.monotone(),
            ),
            Err(e) => CellOutcome::Failure(e.to_string()),
        }
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let outcomes: Vec<CellOutcome> = pool.install(|| jobs.par_iter().map(run).collect());

    let mut cells: Vec<SweepCell> = spec
        .n_max_values
        .iter()
        .map(|&n_max| SweepCell {
            n_max,
            mean_rmse_rad: None,
            std_rmse_rad: None,
            descent_violations: 0,
            records: Vec::new(),
            failures: Vec::new(),
        })
        .collect();
    let mut failed = 0;
    for (&(c, r), outcome) in jobs.iter().zip(outcomes) {
        match outcome {
            CellOutcome::Record(rec, monotone) => {
                cells[c].records.push(rec);
                cells[c].descent_violations += usize::from(!monotone);
            }
            CellOutcome::Failure(error) => {
                log::warn!("n_max {} repeat {r} failed: {error}", spec.n_max_values[c]);
                cells[c].failures.push(RepeatFailure { repeat_index: r, error });
                failed += 1;
            }
        }
    }
    for cell in &mut cells {
        let values: Vec<f64> = cell.records.iter().map(|r| r.rmse_rad).collect();
        (cell.mean_rmse_rad, cell.std_rmse_rad) = mean_std(&values);
    }
    let total = jobs.len();
    if failed * 10 > total {
        return Err(Error::SweepFailed { failed, total });
    }
    Ok(SweepReport {
        provenance: Provenance {
            base_seed: spec.base_seed,
            config_hash: config_hash(spec, state)?,
            format_version: FORMAT_VERSION,
        },
        spec: spec.clone(),
        cells,
    })
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidParameter("rank correlation needs two equal-length series of length >= 2".into()));
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let n = x.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::InvalidParameter("rank correlation of a constant series".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Phase scale applied to the binary test image.
pub const LOGO_SCALE_RAD: f64 = 0.3;
/// Weighted RMSE ceiling for the 32-shear demonstration at 5000 peak counts.
pub const LOGO_RMSE_THRESHOLD: f64 = 0.1;

/// Built-in binary test pattern: a ring with a vertical bar through it.
pub fn binary_test_image(size: u32) -> GrayImage {
    let c = (size as f64 - 1.0) / 2.0;
    let s = size as f64;
    GrayImage::from_fn(size, size, |x, y| {
        let (dx, dy) = (x as f64 - c, y as f64 - c);
        let r = (dx * dx + dy * dy).sqrt() / s;
        let ring = (0.17..0.30).contains(&r);
        let bar = dx.abs() < 0.06 * s && dy.abs() < 0.30 * s;
        image::Luma([if ring || bar { 255 } else { 0 }])
    })
}

/// Ground truth with the default amplitude and a phase taken from a grayscale image.
pub fn logo_truth(state: &StateSpec, image: &GrayImage, scale_rad: f64) -> Result<GroundTruth> {
    let base = state.build()?;
    let phase = phase_from_luma(image, &base.grid, scale_rad)?;
    GroundTruth::from_parts(base.grid, base.amplitude, phase)
}

/// Same as [`logo_truth`] but reading the image from disk.
pub fn logo_truth_from_path(state: &StateSpec, path: &Path, scale_rad: f64) -> Result<GroundTruth> {
    let base = state.build()?;
    let phase = crate::field::phase_from_image(path, &base.grid, scale_rad)?;
    GroundTruth::from_parts(base.grid, base.amplitude, phase)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogoSpec {
    pub schedule: SchedulePreset,
    pub n_max: f64,
    pub seed: u64,
    pub iterations: usize,
    pub deterministic: bool,
    /// Sideband window radius in Fourier bins.
    pub filter_radius: f64,
}

impl Default for LogoSpec {
    fn default() -> Self {
        Self {
            schedule: SchedulePreset::Shears32x32,
            n_max: 5000.0,
            seed: 0,
            iterations: 20,
            deterministic: false,
            filter_radius: SidebandFilter::DEFAULT_RADIUS,
        }
    }
}

/// Runs the full pipeline on an image-derived ground truth.
pub fn run_logo_demo(truth: &GroundTruth, spec: &LogoSpec) -> Result<PipelineOutput> {
    let noise = if spec.deterministic { NoiseModel::deterministic(spec.n_max) } else { NoiseModel::new(spec.n_max) };
    let config = ReconstructionConfig { iterations: spec.iterations, ..ReconstructionConfig::default() };
    let schedule = spec.schedule.schedule();
    let filter = SidebandFilter::new(schedule.tau, spec.filter_radius, SidebandFilter::DEFAULT_ORDER);
    run_pipeline(truth, &schedule, &noise, spec.seed, &filter, &config)
}

/// Retrieved `E1` phase with the gauge removed; masked pixels set to zero.
pub fn aligned_phase(result: &ReconstructionResult, comparison: &PhaseComparison) -> Array2<f64> {
    let offset = comparison.aligned_offset;
    let mut phase = result.e1.phase().mapv(|p| crate::metrics::wrap_phase_unchecked(p - offset));
    ndarray::Zip::from(&mut phase).and(&result.mask_e1).for_each(|p, &m| {
        if !m {
            *p = 0.0;
        }
    });
    phase
}
