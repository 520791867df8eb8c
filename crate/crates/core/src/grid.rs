//! Discrete detected-frequency axes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest supported axis length.
pub const MIN_PIXELS: usize = 8;

/// Two calibrated frequency axes sampled on a regular pixel grid.
///
/// The first axis is the signal (detector A) axis, the second the idler
/// (detector B) axis. Both share the center wavelength and the spectral span.
/// Pixel `n / 2` sits on the center wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub n_signal: usize,
    pub n_idler: usize,
    pub center_nm: f64,
    pub span_nm: f64,
}

impl FrequencyGrid {
    /// Square grid of `n x n` pixels covering `span_nm` around `center_nm`.
    pub fn new(n: usize, center_nm: f64, span_nm: f64) -> Result<Self> {
        Self::rectangular(n, n, center_nm, span_nm)
    }

    pub fn rectangular(n_signal: usize, n_idler: usize, center_nm: f64, span_nm: f64) -> Result<Self> {
        if n_signal < MIN_PIXELS || n_idler < MIN_PIXELS {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least {MIN_PIXELS} pixels per axis, got {n_signal}x{n_idler}"
            )));
        }
        if !(center_nm.is_finite() && center_nm > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "center wavelength must be positive, got {center_nm}"
            )));
        }
        if !(span_nm.is_finite() && span_nm > 0.0) {
            return Err(Error::InvalidParameter(format!("span must be positive, got {span_nm}")));
        }
        if !n_signal.is_power_of_two() || !n_idler.is_power_of_two() {
            log::debug!("grid {n_signal}x{n_idler} is not a power of two; FFTs will be slower");
        }
        Ok(Self { n_signal, n_idler, center_nm, span_nm })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_signal, self.n_idler)
    }

    pub fn is_square(&self) -> bool {
        self.n_signal == self.n_idler
    }

    pub fn len(&self) -> usize {
        self.n_signal * self.n_idler
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pixel_pitch_signal(&self) -> f64 {
        self.span_nm / self.n_signal as f64
    }

    pub fn pixel_pitch_idler(&self) -> f64 {
        self.span_nm / self.n_idler as f64
    }

    /// Wavelength offset of signal pixel `i` from the grid center, in nm.
    pub fn signal_offset_nm(&self, i: usize) -> f64 {
        (i as f64 - (self.n_signal / 2) as f64) * self.pixel_pitch_signal()
    }

    pub fn idler_offset_nm(&self, j: usize) -> f64 {
        (j as f64 - (self.n_idler / 2) as f64) * self.pixel_pitch_idler()
    }

    /// Absolute wavelength of signal pixel `i`, in nm.
    pub fn signal_wavelength_nm(&self, i: usize) -> f64 {
        self.center_nm + self.signal_offset_nm(i)
    }

    pub fn idler_wavelength_nm(&self, j: usize) -> f64 {
        self.center_nm + self.idler_offset_nm(j)
    }

    /// Angular-frequency offset of signal pixel `i` from the center, in radians
    /// per unit delay, where a delay of 1 produces one carrier cycle across the axis.
    pub fn signal_omega(&self, i: usize) -> f64 {
        2.0 * PI * (i as f64 - (self.n_signal / 2) as f64) / self.n_signal as f64
    }

    pub fn idler_omega(&self, j: usize) -> f64 {
        2.0 * PI * (j as f64 - (self.n_idler / 2) as f64) / self.n_idler as f64
    }
}

/// Builds the default square grid used throughout: `n` pixels over `span_nm` around `center_nm`.
pub fn make_grid(n: usize, center_nm: f64, span_nm: f64) -> Result<FrequencyGrid> {
    FrequencyGrid::new(n, center_nm, span_nm)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_grid_pitch() {
        let g = make_grid(32, 820.0, 10.0).unwrap();
        assert_eq!(g.pixel_pitch_signal(), 0.3125);
        assert_eq!(g.pixel_pitch_idler(), 0.3125);
        assert_eq!(g.signal_wavelength_nm(16), 820.0);
    }

    #[test]
    fn smallest_grid() {
        let g = make_grid(8, 820.0, 10.0).unwrap();
        assert_eq!(g.pixel_pitch_signal(), 1.25);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(make_grid(7, 820.0, 10.0).is_err());
        assert!(make_grid(32, 0.0, 10.0).is_err());
        assert!(make_grid(32, 820.0, -1.0).is_err());
        assert!(make_grid(32, 820.0, f64::NAN).is_err());
    }

    #[test]
    fn omega_offsets_are_centered() {
        let g = make_grid(32, 820.0, 10.0).unwrap();
        assert_eq!(g.signal_omega(16), 0.0);
        assert!((g.signal_omega(24) - PI / 2.0).abs() < 1e-15);
    }
}
