//! Phase wrapping, constant-phase gauge alignment and intensity-weighted RMS error.

use std::f64::consts::PI;

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wraps an angle into (-pi, pi].
pub fn wrap_phase(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::NonFinite(format!("cannot wrap phase {x}")));
    }
    Ok(wrap_phase_unchecked(x))
}

pub(crate) fn wrap_phase_unchecked(x: f64) -> f64 {
    let r = x - 2.0 * PI * (x / (2.0 * PI)).round();
    if r <= -PI {
        r + 2.0 * PI
    } else if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Result of comparing a retrieved phase map with the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseComparison {
    pub rmse: f64,
    pub aligned_offset: f64,
    pub pixels_used: usize,
    pub weight_total: f64,
}

fn check_dims(a: &Array2<f64>, b: (usize, usize)) -> Result<()> {
    if a.dim() != b {
        return Err(Error::ShapeMismatch { expected: a.dim(), actual: b });
    }
    Ok(())
}

/// Removes the weighted circular-mean offset between `estimate` and `truth`.
///
/// Returns the aligned estimate and the removed offset in (-pi, pi].
pub fn align_constant_phase(
    estimate: &Array2<f64>,
    truth: &Array2<f64>,
    weights: &Array2<f64>,
    mask: &Array2<bool>,
) -> Result<(Array2<f64>, f64)> {
    check_dims(estimate, truth.dim())?;
    check_dims(estimate, weights.dim())?;
    check_dims(estimate, mask.dim())?;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut total = 0.0;
    Zip::from(estimate).and(truth).and(weights).and(mask).for_each(|&e, &t, &w, &m| {
        if m && w > 0.0 {
            acc += Complex64::from_polar(w, e - t);
            total += w;
        }
    });
    if total <= 0.0 {
        return Err(Error::EmptyMask);
    }
    let offset = if acc.norm() == 0.0 { 0.0 } else { wrap_phase_unchecked(acc.arg()) };
    Ok((estimate.mapv(|e| e - offset), offset))
}

/// `sqrt(sum w wrap(est - truth)^2 / sum w)` over the mask.
pub fn weighted_rmse(
    estimate: &Array2<f64>,
    truth: &Array2<f64>,
    weights: &Array2<f64>,
    mask: &Array2<bool>,
) -> Result<f64> {
    check_dims(estimate, truth.dim())?;
    check_dims(estimate, weights.dim())?;
    check_dims(estimate, mask.dim())?;
    let mut num = 0.0;
    let mut den = 0.0;
    Zip::from(estimate).and(truth).and(weights).and(mask).for_each(|&e, &t, &w, &m| {
        if m && w > 0.0 {
            let d = wrap_phase_unchecked(e - t);
            num += w * d * d;
            den += w;
        }
    });
    if den <= 0.0 {
        return Err(Error::EmptyMask);
    }
    if !num.is_finite() {
        return Err(Error::NonFinite("phase error sum".into()));
    }
    Ok((num / den).sqrt())
}

/// Aligns the constant gauge and then evaluates the weighted RMSE.
pub fn compare_phase(
    estimate: &Array2<f64>,
    truth: &Array2<f64>,
    weights: &Array2<f64>,
    mask: &Array2<bool>,
) -> Result<PhaseComparison> {
    let (aligned, offset) = align_constant_phase(estimate, truth, weights, mask)?;
    let rmse = weighted_rmse(&aligned, truth, weights, mask)?;
    let mut pixels_used = 0;
    let mut weight_total = 0.0;
    Zip::from(weights).and(mask).for_each(|&w, &m| {
        if m && w > 0.0 {
            pixels_used += 1;
            weight_total += w;
        }
    });
    Ok(PhaseComparison { rmse, aligned_offset: offset, pixels_used, weight_total })
}

/// One Monte-Carlo cell result as written to JSON reports.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub n_max: f64,
    pub repeat_index: usize,
    pub rmse_rad: f64,
    pub offset_rad: f64,
    pub pixels_used: usize,
}
