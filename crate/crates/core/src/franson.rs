//! Forward model of the modified Franson interferometer.
//!
//! For shear pair `(k, l)` the two detected amplitudes are
//!
//! ```text
//! T1(a, b) = E1(a - omega1[k], b)
//! T2(a, b) = E2(a, b - omega2[l])
//! ```
//!
//! where `a`, `b` index the detector-A and detector-B frequency axes and shifted
//! coordinates that fall off the grid contribute zero. The coincidence probability is
//! `|T1 + T2 exp(i tau (w_A(a) + w_B(b)))|^2`.

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{shift_field, ComplexField};
use crate::grid::FrequencyGrid;
use crate::poisson::{pair_stream, sample_poisson};

/// Integer-pixel shears on both arms plus the interferometric delay.
///
/// `tau` is measured in carrier cycles across each axis of the grid, so the
/// carrier sideband of an `n`-pixel grid sits `tau` Fourier bins from DC on
/// both axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShearSchedule {
    pub omega1: Vec<i64>,
    pub omega2: Vec<i64>,
    pub tau: f64,
}

/// Default delay: 8 carrier cycles across a 32-pixel axis.
pub const DEFAULT_TAU: f64 = 8.0;

impl ShearSchedule {
    pub fn new(omega1: Vec<i64>, omega2: Vec<i64>, tau: f64) -> Self {
        Self { omega1, omega2, tau }
    }

    /// `count` consecutive shears per axis starting at `first`, e.g. `(8, -4)` gives `-4..=3`.
    pub fn consecutive(count: usize, first: i64, tau: f64) -> Self {
        let shears: Vec<i64> = (0..count as i64).map(|i| first + i).collect();
        Self { omega1: shears.clone(), omega2: shears, tau }
    }

    /// Eight shears per axis from -4 to +3 pixels.
    pub fn default_8x8() -> Self {
        Self::consecutive(8, -4, DEFAULT_TAU)
    }

    /// Thirty-two shears per axis from -16 to +15 pixels.
    pub fn dense_32x32() -> Self {
        Self::consecutive(32, -16, DEFAULT_TAU)
    }

    pub fn num_pairs(&self) -> usize {
        self.omega1.len() * self.omega2.len()
    }

    /// All `(k, l)` index pairs, `k` major.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n2 = self.omega2.len();
        (0..self.num_pairs()).map(move |i| (i / n2, i % n2))
    }

    pub fn pair_index(&self, k: usize, l: usize) -> Result<usize> {
        self.check_index(k, l)?;
        Ok(k * self.omega2.len() + l)
    }

    pub fn check_index(&self, k: usize, l: usize) -> Result<()> {
        if k >= self.omega1.len() || l >= self.omega2.len() {
            return Err(Error::ShearIndex { k, l, n1: self.omega1.len(), n2: self.omega2.len() });
        }
        Ok(())
    }

    /// Structural validation against a grid. Returns warnings that do not block use.
    pub fn validate(&self, grid: &FrequencyGrid) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        if !self.tau.is_finite() {
            return Err(Error::InvalidSchedule(format!("non-finite delay {}", self.tau)));
        }
        for (name, shears, n) in [("omega1", &self.omega1, grid.n_signal), ("omega2", &self.omega2, grid.n_idler)] {
            let distinct = sorted_distinct(shears);
            if distinct.len() < 2 {
                return Err(Error::InvalidSchedule(format!(
                    "{name} needs at least 2 distinct shears, got {}",
                    distinct.len()
                )));
            }
            if distinct.len() < 3 {
                warnings.push(format!(
                    "{name} has only {} distinct shears; 3 or more are needed to over-determine two fields",
                    distinct.len()
                ));
            }
            if let Some(s) = shears.iter().find(|s| s.unsigned_abs() as usize >= n) {
                return Err(Error::InvalidSchedule(format!("{name} shear {s} exceeds the {n}-pixel axis")));
            }
        }
        for w in &warnings {
            log::warn!("{w}");
        }
        Ok(warnings)
    }

    /// Checks that consecutive sorted shears step by no more than `support_px`,
    /// so that interferograms of neighboring shears overlap.
    pub fn check_overlap(&self, support_px: usize) -> Result<()> {
        for (name, shears) in [("omega1", &self.omega1), ("omega2", &self.omega2)] {
            let distinct = sorted_distinct(shears);
            if let Some(w) = distinct.windows(2).find(|w| (w[1] - w[0]) as usize > support_px) {
                return Err(Error::InvalidSchedule(format!(
                    "{name} steps from {} to {} leave a gap wider than the {support_px}-pixel field support",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }
}

fn sorted_distinct(v: &[i64]) -> Vec<i64> {
    let mut s = v.to_vec();
    s.sort_unstable();
    s.dedup();
    s
}

/// Width in pixels of the widest row or column extent where `amplitude > rel * max`.
pub fn support_width(field: &ComplexField, rel: f64) -> usize {
    let amp = field.amplitude();
    let max = amp.iter().copied().fold(0.0, f64::max);
    if max == 0.0 {
        return 0;
    }
    let thr = rel * max;
    let extent = |it: &mut dyn Iterator<Item = (usize, bool)>| {
        let idx: Vec<usize> = it.filter(|&(_, on)| on).map(|(i, _)| i).collect();
        match (idx.first(), idx.last()) {
            (Some(a), Some(b)) => b - a + 1,
            _ => 0,
        }
    };
    let rows = extent(&mut amp.rows().into_iter().enumerate().map(|(i, r)| (i, r.iter().any(|&a| a > thr))));
    let cols = extent(&mut amp.columns().into_iter().enumerate().map(|(i, c)| (i, c.iter().any(|&a| a > thr))));
    rows.max(cols)
}

/// Detection-efficiency and accidental-coincidence parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// Expected coincidences at the brightest pixel of the whole set.
    pub peak_counts: f64,
    pub coincidence_efficiency: f64,
    /// Pump repetition rate in Hz.
    pub repetition_rate: f64,
    /// When false, counts are the rounded scaled probabilities with no accidentals.
    pub enabled: bool,
}

impl NoiseModel {
    pub const DEFAULT_EFFICIENCY: f64 = 0.1;
    pub const DEFAULT_REPETITION_RATE: f64 = 80e6;

    pub fn new(peak_counts: f64) -> Self {
        Self {
            peak_counts,
            coincidence_efficiency: Self::DEFAULT_EFFICIENCY,
            repetition_rate: Self::DEFAULT_REPETITION_RATE,
            enabled: true,
        }
    }

    pub fn deterministic(peak_counts: f64) -> Self {
        Self { enabled: false, ..Self::new(peak_counts) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.peak_counts.is_finite() && self.peak_counts >= 0.0) {
            return Err(Error::InvalidParameter(format!("peak counts must be >= 0, got {}", self.peak_counts)));
        }
        if self.peak_counts > 1e9 {
            return Err(Error::InvalidParameter(format!(
                "peak counts {} overflow 32-bit count maps",
                self.peak_counts
            )));
        }
        if !(self.coincidence_efficiency > 0.0 && self.coincidence_efficiency <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "coincidence efficiency must be in (0, 1], got {}",
                self.coincidence_efficiency
            )));
        }
        if !(self.repetition_rate.is_finite() && self.repetition_rate > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "repetition rate must be positive, got {}",
                self.repetition_rate
            )));
        }
        Ok(())
    }

    /// Mean accidental coincidences per pixel, `(N_max / efficiency)^2 / rate`.
    pub fn accidental_mean(&self) -> f64 {
        let singles = self.peak_counts / self.coincidence_efficiency;
        singles * singles / self.repetition_rate
    }
}

/// Free-function form of [`NoiseModel::accidental_mean`].
pub fn accidental_mean(noise: &NoiseModel) -> f64 {
    noise.accidental_mean()
}

/// One count map per shear pair, in [`ShearSchedule::pairs`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferogramSet {
    pub grid: FrequencyGrid,
    pub schedule: ShearSchedule,
    pub noise: NoiseModel,
    pub seed: u64,
    pub counts: Vec<Array2<u32>>,
}

impl InterferogramSet {
    pub fn get(&self, k: usize, l: usize) -> Result<&Array2<u32>> {
        Ok(&self.counts[self.schedule.pair_index(k, l)?])
    }

    pub fn max_count(&self) -> u32 {
        self.counts.iter().flat_map(|c| c.iter().copied()).max().unwrap_or(0)
    }
}

pub(crate) fn check_same_grid(e1: &ComplexField, e2: &ComplexField) -> Result<()> {
    if e1.grid() != e2.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// The two shear-displaced amplitudes `(T1, T2)` seen by the detectors for pair `(k, l)`.
pub fn sheared_terms(
    e1: &ComplexField,
    e2: &ComplexField,
    k: usize,
    l: usize,
    schedule: &ShearSchedule,
) -> Result<(Array2<Complex64>, Array2<Complex64>)> {
    check_same_grid(e1, e2)?;
    schedule.check_index(k, l)?;
    let t1 = shift_field(e1, schedule.omega1[k], 0).into_values();
    let t2 = shift_field(e2, 0, schedule.omega2[l]).into_values();
    Ok((t1, t2))
}

/// Delay carrier phase `tau * (w_A(a) + w_B(b))` on the detector grid.
pub fn carrier_phase(grid: &FrequencyGrid, tau: f64) -> Array2<f64> {
    Array2::from_shape_fn(grid.shape(), |(a, b)| tau * (grid.signal_omega(a) + grid.idler_omega(b)))
}

/// Noiseless coincidence probability for shear pair `(k, l)`.
pub fn coincidence_probability(
    e1: &ComplexField,
    e2: &ComplexField,
    k: usize,
    l: usize,
    schedule: &ShearSchedule,
) -> Result<Array2<f64>> {
    let (t1, t2) = sheared_terms(e1, e2, k, l, schedule)?;
    let carrier = carrier_phase(e1.grid(), schedule.tau);
    let mut p = Array2::zeros(e1.grid().shape());
    Zip::from(&mut p).and(&t1).and(&t2).and(&carrier).for_each(|p, &a, &b, &c| {
        *p = (a + b * Complex64::from_polar(1.0, c)).norm_sqr();
    });
    Ok(p)
}

/// Noiseless probabilities for every shear pair, in [`ShearSchedule::pairs`] order.
pub fn all_probabilities(e1: &ComplexField, e2: &ComplexField, schedule: &ShearSchedule) -> Result<Vec<Array2<f64>>> {
    let pairs: Vec<_> = schedule.pairs().collect();
    pairs
        .par_iter()
        .map(|&(k, l)| coincidence_probability(e1, e2, k, l, schedule))
        .collect()
}

/// Scales the noiseless probabilities so the brightest pixel of the whole set
/// equals `N_max`, then draws shot noise and accidentals per pixel.
///
/// Each pair uses its own RNG stream derived from `(seed, k, l)`, so the result
/// does not depend on how the pairs are scheduled across threads.
pub fn synthesize_interferograms(
    e1: &ComplexField,
    e2: &ComplexField,
    schedule: &ShearSchedule,
    noise: &NoiseModel,
    seed: u64,
) -> Result<InterferogramSet> {
    noise.validate()?;
    schedule.validate(e1.grid())?;
    let probs = all_probabilities(e1, e2, schedule)?;
    let peak = probs.iter().flat_map(|p| p.iter().copied()).fold(0.0, f64::max);
    let scale = if peak > 0.0 { noise.peak_counts / peak } else { 0.0 };
    let acc = noise.accidental_mean();

    let pairs: Vec<_> = schedule.pairs().collect();
    let counts = pairs
        .par_iter()
        .zip(probs.par_iter())
        .map(|(&(k, l), p)| -> Result<Array2<u32>> {
            if !noise.enabled {
                return Ok(p.mapv(|v| (v * scale).round() as u32));
            }
            let mut rng = pair_stream(seed, k, l);
            let mut out = Array2::zeros(p.dim());
            for (c, &v) in out.iter_mut().zip(p.iter()) {
                let n = sample_poisson(v * scale, &mut rng)? + sample_poisson(acc, &mut rng)?;
                *c = u32::try_from(n).map_err(|_| Error::NonFinite(format!("count {n} overflows u32")))?;
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(InterferogramSet { grid: *e1.grid(), schedule: schedule.clone(), noise: *noise, seed, counts })
}
