//! Fourier-domain sideband demodulation of count maps.
//!
//! With the carrier `C(a, b) = tau (w_A(a) + w_B(b))` a coincidence map is
//! `|T1|^2 + |T2|^2 + T1 conj(T2) exp(-iC) + c.c.`. The `T1 conj(T2)` term sits at
//! Fourier bin `(-tau, -tau)`; it is isolated with a super-Gaussian window,
//! transformed back and, optionally, demodulated by `exp(+iC)`.

use std::f64::consts::SQRT_2;

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{FftDirection, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::franson::{carrier_phase, sheared_terms, InterferogramSet, ShearSchedule};
use crate::grid::FrequencyGrid;

/// Pixels this close to the grid edge are low-confidence after filtering.
pub const DEFAULT_INTERIOR_MARGIN: usize = 4;

/// Interferometric products `T1 conj(T2)`, one per shear pair in schedule order.
#[derive(Debug, Clone, PartialEq)]
pub struct AcSet {
    pub grid: FrequencyGrid,
    pub schedule: ShearSchedule,
    pub ac: Vec<Array2<Complex64>>,
    pub carrier_removed: bool,
}

impl AcSet {
    pub fn get(&self, k: usize, l: usize) -> Result<&Array2<Complex64>> {
        Ok(&self.ac[self.schedule.pair_index(k, l)?])
    }

    /// Sum of `|AC|^2` over all pixels and pairs.
    pub fn energy(&self) -> f64 {
        self.ac.iter().flat_map(|m| m.iter()).map(|z| z.norm_sqr()).sum()
    }
}

/// Super-Gaussian window `exp(-(d^2 / (2 r^2))^order)` around the sideband.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SidebandFilter {
    /// Carrier cycles per axis; the window is centered `tau` bins from DC on both axes.
    pub tau: f64,
    /// Width parameter in Fourier bins.
    pub radius: f64,
    pub order: u32,
}

impl SidebandFilter {
    pub const DEFAULT_RADIUS: f64 = 4.0;
    pub const DEFAULT_ORDER: u32 = 4;

    pub fn new(tau: f64, radius: f64, order: u32) -> Self {
        Self { tau, radius, order }
    }

    pub fn for_schedule(schedule: &ShearSchedule) -> Self {
        Self::new(schedule.tau, Self::DEFAULT_RADIUS, Self::DEFAULT_ORDER)
    }

    /// Window value at signed Fourier bin `(fx, fy)`.
    pub fn weight(&self, fx: f64, fy: f64) -> f64 {
        let dx = fx + self.tau;
        let dy = fy + self.tau;
        let d2 = (dx * dx + dy * dy) / (self.radius * self.radius) / 2.0;
        (-d2.powi(self.order as i32)).exp()
    }

    /// Window sampled on the unshifted DFT layout of the grid.
    pub fn window(&self, grid: &FrequencyGrid) -> Array2<f64> {
        let (n0, n1) = grid.shape();
        Array2::from_shape_fn((n0, n1), |(i, j)| self.weight(signed_bin(i, n0), signed_bin(j, n1)))
    }
}

fn signed_bin(i: usize, n: usize) -> f64 {
    if i <= n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

/// Outcome of [`carrier_frequency_check`]. Margins are in Fourier bins; all must be >= 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarrierReport {
    pub pass: bool,
    /// Sideband distance from DC minus (DC radius + filter radius).
    pub dc_margin: f64,
    /// Nyquist bin minus the sideband offset, on the tighter axis.
    pub nyquist_margin: f64,
    /// Distance between the sideband and its aliased conjugate minus twice the radius.
    pub conjugate_margin: f64,
    pub problems: Vec<String>,
}

/// Checks that the carrier sideband is separated from DC and from its conjugate
/// and lies inside Nyquist. The DC term is assumed to be as wide as the filter.
pub fn carrier_frequency_check(schedule: &ShearSchedule, filter: &SidebandFilter, grid: &FrequencyGrid) -> CarrierReport {
    let tau = schedule.tau.abs();
    let r = filter.radius;
    let mut problems = Vec::new();
    if (schedule.tau - filter.tau).abs() > 1e-12 {
        problems.push(format!("filter centered for tau {} but schedule uses {}", filter.tau, schedule.tau));
    }
    if !(r >= 1.0) {
        problems.push(format!("filter radius {r} is below one bin"));
    }
    let dc_margin = tau * SQRT_2 - 2.0 * r;
    if !(dc_margin >= 0.0) {
        problems.push(format!("sideband overlaps DC (margin {dc_margin:.3} bins)"));
    }
    let nyq = grid.n_signal.min(grid.n_idler) as f64 / 2.0;
    let nyquist_margin = nyq - tau;
    if !(nyquist_margin >= 0.0) {
        problems.push(format!("tau {tau} is beyond Nyquist ({nyq} cycles)"));
    }
    let conjugate_margin = [grid.n_signal, grid.n_idler]
        .iter()
        .map(|&n| {
            let sep = (2.0 * tau).rem_euclid(n as f64);
            sep.min(n as f64 - sep)
        })
        .fold(f64::INFINITY, f64::min)
        * SQRT_2
        - 2.0 * r;
    if !(conjugate_margin >= 0.0) {
        problems.push(format!("sideband overlaps its conjugate (margin {conjugate_margin:.3} bins)"));
    }
    CarrierReport { pass: problems.is_empty(), dc_margin, nyquist_margin, conjugate_margin, problems }
}

fn fft_rows(data: &mut Array2<Complex64>, planner: &mut FftPlanner<f64>, direction: FftDirection) {
    let n = data.ncols();
    let fft = planner.plan_fft(n, direction);
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for mut row in data.rows_mut() {
        let slice = row.as_slice_mut().expect("standard layout");
        fft.process_with_scratch(slice, &mut scratch);
    }
}

/// Unnormalized 2-D DFT (forward) or its exact inverse (normalized by `1/N`).
pub fn fft2(data: &Array2<Complex64>, direction: FftDirection) -> Array2<Complex64> {
    let mut planner = FftPlanner::new();
    let mut out = data.as_standard_layout().into_owned();
    fft_rows(&mut out, &mut planner, direction);
    let mut t = out.t().as_standard_layout().into_owned();
    fft_rows(&mut t, &mut planner, direction);
    let mut out = t.t().as_standard_layout().into_owned();
    if direction == FftDirection::Inverse {
        let norm = 1.0 / out.len() as f64;
        out.mapv_inplace(|z| z * norm);
    }
    out
}

/// Recovers the interferometric product from one coincidence map.
pub fn extract_ac(
    counts: &Array2<f64>,
    filter: &SidebandFilter,
    grid: &FrequencyGrid,
    remove_carrier: bool,
) -> Result<Array2<Complex64>> {
    if counts.dim() != grid.shape() {
        return Err(Error::ShapeMismatch { expected: grid.shape(), actual: counts.dim() });
    }
    let schedule = ShearSchedule::new(vec![], vec![], filter.tau);
    let report = carrier_frequency_check(&schedule, filter, grid);
    if !report.pass {
        return Err(Error::CarrierCheck(report.problems.join("; ")));
    }
    Ok(extract_unchecked(counts, &filter.window(grid), &carrier_phase(grid, filter.tau), remove_carrier))
}

fn extract_unchecked(
    counts: &Array2<f64>,
    window: &Array2<f64>,
    carrier: &Array2<f64>,
    remove_carrier: bool,
) -> Array2<Complex64> {
    let input = counts.mapv(|c| Complex64::new(c, 0.0));
    let mut spectrum = fft2(&input, FftDirection::Forward);
    Zip::from(&mut spectrum).and(window).for_each(|s, &w| *s *= w);
    let mut ac = fft2(&spectrum, FftDirection::Inverse);
    if remove_carrier {
        Zip::from(&mut ac).and(carrier).for_each(|z, &c| *z *= Complex64::from_polar(1.0, c));
    }
    ac
}

/// Sideband extraction of every real-valued map in a set, in schedule order.
pub fn extract_ac_maps(
    maps: &[Array2<f64>],
    grid: &FrequencyGrid,
    schedule: &ShearSchedule,
    filter: &SidebandFilter,
    remove_carrier: bool,
) -> Result<AcSet> {
    let report = carrier_frequency_check(schedule, filter, grid);
    if !report.pass {
        return Err(Error::CarrierCheck(report.problems.join("; ")));
    }
    if maps.len() != schedule.num_pairs() {
        return Err(Error::InvalidParameter(format!(
            "{} maps for {} shear pairs",
            maps.len(),
            schedule.num_pairs()
        )));
    }
    let window = filter.window(grid);
    let carrier = carrier_phase(grid, filter.tau);
    let ac = maps
        .par_iter()
        .map(|m| {
            if m.dim() != grid.shape() {
                return Err(Error::ShapeMismatch { expected: grid.shape(), actual: m.dim() });
            }
            Ok(extract_unchecked(m, &window, &carrier, remove_carrier))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AcSet { grid: *grid, schedule: schedule.clone(), ac, carrier_removed: remove_carrier })
}

/// Sideband extraction of a whole interferogram set.
pub fn extract_ac_set(set: &InterferogramSet, filter: &SidebandFilter, remove_carrier: bool) -> Result<AcSet> {
    let maps: Vec<Array2<f64>> = set.counts.iter().map(|c| c.mapv(f64::from)).collect();
    extract_ac_maps(&maps, &set.grid, &set.schedule, filter, remove_carrier)
}

/// Ideal, noise-free product `T1 conj(T2)` for pair `(k, l)`.
pub fn direct_ac(
    e1: &ComplexField,
    e2: &ComplexField,
    k: usize,
    l: usize,
    schedule: &ShearSchedule,
) -> Result<Array2<Complex64>> {
    let (t1, t2) = sheared_terms(e1, e2, k, l, schedule)?;
    let mut out = t1;
    Zip::from(&mut out).and(&t2).for_each(|a, &b| *a *= b.conj());
    Ok(out)
}

/// [`direct_ac`] for every shear pair.
pub fn direct_ac_set(e1: &ComplexField, e2: &ComplexField, schedule: &ShearSchedule) -> Result<AcSet> {
    let ac = schedule
        .pairs()
        .map(|(k, l)| direct_ac(e1, e2, k, l, schedule))
        .collect::<Result<Vec<_>>>()?;
    Ok(AcSet { grid: *e1.grid(), schedule: schedule.clone(), ac, carrier_removed: true })
}

/// True on pixels at least `margin` pixels away from every edge.
pub fn interior_mask(grid: &FrequencyGrid, margin: usize) -> Array2<bool> {
    let (n0, n1) = grid.shape();
    Array2::from_shape_fn((n0, n1), |(i, j)| {
        i >= margin && j >= margin && i + margin < n0 && j + margin < n1
    })
}
