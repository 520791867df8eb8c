//! JSON state descriptions and the ground-truth fields built from them.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::{assemble_field, gaussian_jsa, permute_axes, phase_from_image, polynomial_jsp, ComplexField, PhaseTerm};
use crate::grid::FrequencyGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub center_nm: f64,
    pub span_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum JsaSpec {
    Gaussian { sigma_s: f64, sigma_i: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum JspSpec {
    Polynomial { coeffs: Vec<PhaseTerm> },
    Image { path: PathBuf, scale_rad: f64 },
}

/// Description of the biphoton state fed to the interferometer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpec {
    pub grid: GridSpec,
    pub jsa: JsaSpec,
    pub jsp: JspSpec,
}

impl Default for StateSpec {
    /// 32x32 pixels over 10 nm at 820 nm, 1.85 nm Gaussian amplitude on both
    /// axes, and a phase dominated by a signal-idler cross term.
    fn default() -> Self {
        Self {
            grid: GridSpec { n: 32, center_nm: 820.0, span_nm: 10.0 },
            jsa: JsaSpec::Gaussian { sigma_s: 1.85, sigma_i: 1.85 },
            jsp: JspSpec::Polynomial {
                coeffs: vec![
                    PhaseTerm { p: 1, q: 1, c: 0.2 },
                    PhaseTerm { p: 2, q: 0, c: 0.05 },
                    PhaseTerm { p: 0, q: 2, c: 0.05 },
                ],
            },
        }
    }
}

impl StateSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut spec = Self::from_json(&std::fs::read_to_string(path)?)?;
        if let (JspSpec::Image { path: img, .. }, Some(dir)) = (&mut spec.jsp, path.parent()) {
            if img.is_relative() {
                *img = dir.join(&*img);
            }
        }
        Ok(spec)
    }

    pub fn frequency_grid(&self) -> Result<FrequencyGrid> {
        FrequencyGrid::new(self.grid.n, self.grid.center_nm, self.grid.span_nm)
    }

    pub fn build(&self) -> Result<GroundTruth> {
        let grid = self.frequency_grid()?;
        let amplitude = match self.jsa {
            JsaSpec::Gaussian { sigma_s, sigma_i } => gaussian_jsa(&grid, sigma_s, sigma_i)?,
        };
        let phase = match &self.jsp {
            JspSpec::Polynomial { coeffs } => polynomial_jsp(&grid, coeffs)?,
            JspSpec::Image { path, scale_rad } => phase_from_image(path, &grid, *scale_rad)?,
        };
        GroundTruth::from_parts(grid, amplitude, phase)
    }
}

/// The biphoton wavefunction as `E1` and its axis-swapped ancilla `E2`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub grid: FrequencyGrid,
    pub amplitude: Array2<f64>,
    /// Unwrapped phase of `E1`.
    pub phase: Array2<f64>,
    pub e1: ComplexField,
    pub e2: ComplexField,
}

impl GroundTruth {
    pub fn from_parts(grid: FrequencyGrid, amplitude: Array2<f64>, phase: Array2<f64>) -> Result<Self> {
        let e1 = assemble_field(&grid, &amplitude, &phase)?;
        let e2 = permute_axes(&e1)?;
        Ok(Self { grid, amplitude, phase, e1, e2 })
    }

    /// Intensity `|E1|^2`, the weight of the phase error metric.
    pub fn weights(&self) -> Array2<f64> {
        self.amplitude.mapv(|a| a * a)
    }

    /// Same state with a global phase `c` on the wavefunction.
    pub fn with_global_phase(&self, c: f64) -> Result<Self> {
        Self::from_parts(self.grid, self.amplitude.clone(), self.phase.mapv(|p| p + c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_schema() {
        let text = r#"{
            "grid": {"n": 32, "center_nm": 820, "span_nm": 10},
            "jsa": {"type": "gaussian", "sigma_s": 1.5, "sigma_i": 2.0},
            "jsp": {"type": "polynomial", "coeffs": [{"p": 1, "q": 1, "c": 0.2}]}
        }"#;
        let spec = StateSpec::from_json(text).unwrap();
        assert_eq!(spec.grid.n, 32);
        let truth = spec.build().unwrap();
        assert_eq!(truth.e2.values()[[3, 7]], truth.e1.values()[[7, 3]]);

        let text = r#"{"grid": {"n": 16, "center_nm": 820, "span_nm": 10},
            "jsa": {"type": "gaussian", "sigma_s": 1, "sigma_i": 1},
            "jsp": {"type": "image", "path": "logo.png", "scale_rad": 3.0}}"#;
        let spec = StateSpec::from_json(text).unwrap();
        assert!(matches!(spec.jsp, JspSpec::Image { .. }));
    }

    #[test]
    fn default_round_trips_through_json() {
        let spec = StateSpec::default();
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(StateSpec::from_json(&text).unwrap(), spec);
    }
}
