//! Complex fields on a [`FrequencyGrid`] and ground-truth state generators.

use std::path::Path;

use image::GrayImage;
use ndarray::{Array2, Zip};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::FrequencyGrid;

/// A 2-D complex field. Rows run along the first frequency axis, columns along the second.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: FrequencyGrid,
    values: Array2<Complex64>,
}

impl ComplexField {
    pub fn new(grid: FrequencyGrid, values: Array2<Complex64>) -> Result<Self> {
        check_shape(&grid, values.dim())?;
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: FrequencyGrid) -> Self {
        Self { grid, values: Array2::zeros(grid.shape()) }
    }

    /// Field with the same value on every pixel.
    pub fn constant(grid: FrequencyGrid, value: Complex64) -> Self {
        Self { grid, values: Array2::from_elem(grid.shape(), value) }
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn values(&self) -> &Array2<Complex64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.values
    }

    pub fn into_values(self) -> Array2<Complex64> {
        self.values
    }

    pub fn amplitude(&self) -> Array2<f64> {
        self.values.mapv(|z| z.norm())
    }

    /// Pointwise phase in (-pi, pi].
    pub fn phase(&self) -> Array2<f64> {
        self.values.mapv(|z| crate::metrics::wrap_phase_unchecked(z.arg()))
    }

    pub fn intensity(&self) -> Array2<f64> {
        self.values.mapv(|z| z.norm_sqr())
    }

    /// Multiplies every pixel by `exp(i * phase)`.
    pub fn with_global_phase(&self, phase: f64) -> Self {
        let factor = Complex64::from_polar(1.0, phase);
        Self { grid: self.grid, values: self.values.mapv(|z| z * factor) }
    }
}

fn check_shape(grid: &FrequencyGrid, actual: (usize, usize)) -> Result<()> {
    if grid.shape() != actual {
        return Err(Error::ShapeMismatch { expected: grid.shape(), actual });
    }
    Ok(())
}

/// Separable Gaussian amplitude centered on the grid with peak value 1.
///
/// `sigma_*` are amplitude standard deviations in nm.
pub fn gaussian_jsa(grid: &FrequencyGrid, sigma_signal: f64, sigma_idler: f64) -> Result<Array2<f64>> {
    for s in [sigma_signal, sigma_idler] {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidParameter(format!("gaussian width must be positive, got {s}")));
        }
    }
    Ok(Array2::from_shape_fn(grid.shape(), |(i, j)| {
        let ds = grid.signal_offset_nm(i) / sigma_signal;
        let di = grid.idler_offset_nm(j) / sigma_idler;
        (-0.5 * (ds * ds + di * di)).exp()
    }))
}

/// One term `c * dls^p * dli^q` of a polynomial phase, `c` in rad / nm^(p+q).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseTerm {
    pub p: u32,
    pub q: u32,
    pub c: f64,
}

/// Polynomial phase in the wavelength offsets from the grid center. Stored unwrapped.
pub fn polynomial_jsp(grid: &FrequencyGrid, terms: &[PhaseTerm]) -> Result<Array2<f64>> {
    if let Some(t) = terms.iter().find(|t| !t.c.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "non-finite coefficient for power ({}, {})",
            t.p, t.q
        )));
    }
    Ok(Array2::from_shape_fn(grid.shape(), |(i, j)| {
        let ds = grid.signal_offset_nm(i);
        let di = grid.idler_offset_nm(j);
        terms
            .iter()
            .map(|t| t.c * ds.powi(t.p as i32) * di.powi(t.q as i32))
            .sum()
    }))
}

/// Loads an 8-bit raster and maps it to a phase map, see [`phase_from_luma`].
pub fn phase_from_image(path: impl AsRef<Path>, grid: &FrequencyGrid, scale_rad: f64) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let img = image::open(path)
        .map_err(|source| Error::Image { path: path.to_path_buf(), source })?
        .into_luma8();
    phase_from_luma(&img, grid, scale_rad)
}

/// Nearest-neighbor resamples a grayscale image onto the grid and maps its
/// intensity range linearly onto `[0, scale_rad]`.
///
/// Image rows map to the first axis. A flat image gives an all-zero phase.
pub fn phase_from_luma(img: &GrayImage, grid: &FrequencyGrid, scale_rad: f64) -> Result<Array2<f64>> {
    if !scale_rad.is_finite() {
        return Err(Error::InvalidParameter(format!("phase scale must be finite, got {scale_rad}")));
    }
    let (w, h) = img.dimensions();
    if w == 0 || h == 0 {
        return Err(Error::InvalidParameter("image has no pixels".into()));
    }
    let (rows, cols) = grid.shape();
    let sampled = Array2::from_shape_fn((rows, cols), |(i, j)| {
        let y = ((i as f64 + 0.5) * h as f64 / rows as f64).floor() as u32;
        let x = ((j as f64 + 0.5) * w as f64 / cols as f64).floor() as u32;
        img.get_pixel(x.min(w - 1), y.min(h - 1)).0[0] as f64
    });
    let lo = sampled.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = sampled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        log::warn!("image has zero dynamic range on the grid; using an all-zero phase");
        return Ok(Array2::zeros((rows, cols)));
    }
    Ok(sampled.mapv(|v| (v - lo) / (hi - lo) * scale_rad))
}

/// `amplitude * exp(i * phase)` pixelwise.
pub fn assemble_field(grid: &FrequencyGrid, amplitude: &Array2<f64>, phase: &Array2<f64>) -> Result<ComplexField> {
    check_shape(grid, amplitude.dim())?;
    check_shape(grid, phase.dim())?;
    let mut values = Array2::zeros(grid.shape());
    Zip::from(&mut values).and(amplitude).and(phase).for_each(|z, &a, &p| {
        *z = if a == 0.0 { Complex64::new(0.0, 0.0) } else { Complex64::from_polar(a, p) };
    });
    Ok(ComplexField { grid: *grid, values })
}

/// Swaps the two frequency axes: `out(u, v) = in(v, u)`.
pub fn permute_axes(field: &ComplexField) -> Result<ComplexField> {
    if !field.grid.is_square() {
        return Err(Error::InvalidParameter("axis permutation needs a square grid".into()));
    }
    Ok(ComplexField { grid: field.grid, values: field.values.t().to_owned() })
}

/// Non-circular shift with zero fill: `out(u, v) = in(u - rows, v - cols)`.
pub fn shift_field(field: &ComplexField, shift_rows: i64, shift_cols: i64) -> ComplexField {
    let (n0, n1) = field.grid.shape();
    let mut out = Array2::zeros((n0, n1));
    for ((u, v), z) in out.indexed_iter_mut() {
        let su = u as i64 - shift_rows;
        let sv = v as i64 - shift_cols;
        if (0..n0 as i64).contains(&su) && (0..n1 as i64).contains(&sv) {
            *z = field.values[[su as usize, sv as usize]];
        }
    }
    ComplexField { grid: field.grid, values: out }
}
