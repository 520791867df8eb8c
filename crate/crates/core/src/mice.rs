//! Multi-shear iterative reconstruction of the two interfering fields.
//!
//! The model error is
//!
//! ```text
//! E = sum_{k,l,a,b} | AC_kl(a, b) - E1(a - omega1[k], b) conj(E2(a, b - omega2[l])) |^2
//! ```
//!
//! Holding one field fixed, `E` is a separable quadratic in the other, so each
//! half-step is a closed-form per-pixel least-squares solve. Alternating the two
//! half-steps never increases `E`.

use ndarray::{Array2, Zip};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::franson::ShearSchedule;
use crate::sideband::{interior_mask, AcSet, DEFAULT_INTERIOR_MARGIN};

/// How the first `E2` estimate is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InitialGuess {
    /// Unit amplitude, zero phase.
    Flat,
    /// Unit amplitude, uniformly random phase.
    RandomPhase { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionConfig {
    pub iterations: usize,
    pub initial_guess: InitialGuess,
    /// Pixels whose update denominator falls below this fraction of its maximum are masked.
    pub mask_epsilon: f64,
    /// Edge band excluded from the final coverage mask.
    pub interior_margin: usize,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        Self {
            iterations: 20,
            initial_guess: InitialGuess::Flat,
            mask_epsilon: 1e-4,
            interior_margin: DEFAULT_INTERIOR_MARGIN,
        }
    }
}

impl ReconstructionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("need at least one iteration".into()));
        }
        if !(self.mask_epsilon > 0.0 && self.mask_epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "mask epsilon must be in (0, 1), got {}",
                self.mask_epsilon
            )));
        }
        Ok(())
    }
}

/// Output of one half-step.
#[derive(Debug, Clone)]
pub struct FieldUpdate {
    pub field: ComplexField,
    /// Per-pixel normal-equation weight `sum |partner|^2`.
    pub denominator: Array2<f64>,
    /// Pixels whose denominator cleared the threshold.
    pub mask: Array2<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionResult {
    pub e1: ComplexField,
    pub e2: ComplexField,
    pub mask_e1: Array2<bool>,
    pub mask_e2: Array2<bool>,
    /// Model error after every half-step, starting with the first `E1` update.
    pub error_history: Vec<f64>,
}

impl ReconstructionResult {
    pub fn final_error(&self) -> f64 {
        self.error_history.last().copied().unwrap_or(f64::NAN)
    }

    pub fn iterations(&self) -> usize {
        self.error_history.len() / 2
    }
}

fn check_field(ac: &AcSet, f: &ComplexField) -> Result<()> {
    if f.grid() != &ac.grid {
        return Err(Error::GridMismatch);
    }
    if ac.ac.len() != ac.schedule.num_pairs() {
        return Err(Error::InvalidParameter(format!(
            "{} AC maps for {} shear pairs",
            ac.ac.len(),
            ac.schedule.num_pairs()
        )));
    }
    if let Some(m) = ac.ac.iter().find(|m| m.dim() != ac.grid.shape()) {
        return Err(Error::ShapeMismatch { expected: ac.grid.shape(), actual: m.dim() });
    }
    Ok(())
}

#[inline]
fn in_range(x: i64, n: usize) -> Option<usize> {
    (x >= 0 && (x as usize) < n).then_some(x as usize)
}

/// Sum of squared residuals between the data and the bilinear model.
pub fn model_error(ac: &AcSet, e1: &ComplexField, e2: &ComplexField) -> Result<f64> {
    check_field(ac, e1)?;
    check_field(ac, e2)?;
    let (n0, n1) = ac.grid.shape();
    let (v1, v2) = (e1.values(), e2.values());
    let mut total = 0.0;
    for ((k, l), map) in ac.schedule.pairs().zip(&ac.ac) {
        let (s1, s2) = (ac.schedule.omega1[k], ac.schedule.omega2[l]);
        for ((a, b), &x) in map.indexed_iter() {
            let t1 = in_range(a as i64 - s1, n0).map(|u| v1[[u, b]]);
            let t2 = in_range(b as i64 - s2, n1).map(|q| v2[[a, q]]);
            let model = match (t1, t2) {
                (Some(t1), Some(t2)) => t1 * t2.conj(),
                _ => Complex64::new(0.0, 0.0),
            };
            total += (x - model).norm_sqr();
        }
    }
    Ok(total)
}

/// Least-squares update of `E1` with `E2` held fixed.
///
/// `previous` is the current `E1`; masked pixels are zeroed unless that would
/// raise the error relative to `previous`, in which case they keep their value.
pub fn update_e1(
    ac: &AcSet,
    e2: &ComplexField,
    mask_epsilon: f64,
    previous: Option<&ComplexField>,
) -> Result<FieldUpdate> {
    check_field(ac, e2)?;
    let (n0, n1) = ac.grid.shape();
    let s = &ac.schedule;
    let v2 = e2.values();
    let mut num = Array2::<Complex64>::zeros((n0, n1));
    let mut den = Array2::<f64>::zeros((n0, n1));
    for ((k, l), map) in s.pairs().zip(&ac.ac) {
        let (s1, s2) = (s.omega1[k], s.omega2[l]);
        for u in 0..n0 {
            let Some(a) = in_range(u as i64 + s1, n0) else { continue };
            for v in 0..n1 {
                let Some(q) = in_range(v as i64 - s2, n1) else { continue };
                let partner = v2[[a, q]];
                num[[u, v]] += map[[a, v]] * partner;
                den[[u, v]] += partner.norm_sqr();
            }
        }
    }
    finish_update(ac, num, den, mask_epsilon, previous)
}

/// Least-squares update of `E2` with `E1` held fixed. Mirror of [`update_e1`].
pub fn update_e2(
    ac: &AcSet,
    e1: &ComplexField,
    mask_epsilon: f64,
    previous: Option<&ComplexField>,
) -> Result<FieldUpdate> {
    check_field(ac, e1)?;
    let (n0, n1) = ac.grid.shape();
    let s = &ac.schedule;
    let v1 = e1.values();
    let mut num = Array2::<Complex64>::zeros((n0, n1));
    let mut den = Array2::<f64>::zeros((n0, n1));
    for ((k, l), map) in s.pairs().zip(&ac.ac) {
        let (s1, s2) = (s.omega1[k], s.omega2[l]);
        for p in 0..n0 {
            let Some(u) = in_range(p as i64 - s1, n0) else { continue };
            for q in 0..n1 {
                let Some(b) = in_range(q as i64 + s2, n1) else { continue };
                let partner = v1[[u, b]];
                num[[p, q]] += map[[p, b]].conj() * partner;
                den[[p, q]] += partner.norm_sqr();
            }
        }
    }
    finish_update(ac, num, den, mask_epsilon, previous)
}

fn finish_update(
    ac: &AcSet,
    num: Array2<Complex64>,
    den: Array2<f64>,
    mask_epsilon: f64,
    previous: Option<&ComplexField>,
) -> Result<FieldUpdate> {
    if let Some(p) = previous {
        check_field(ac, p)?;
    }
    let max = den.iter().copied().fold(0.0, f64::max);
    if !(max > 0.0) {
        return Err(Error::NoCoverage);
    }
    if !max.is_finite() {
        return Err(Error::NonFinite("update denominator".into()));
    }
    let threshold = mask_epsilon * max;
    let zero = Complex64::new(0.0, 0.0);
    let mut values = Array2::zeros(ac.grid.shape());
    let mut mask = Array2::from_elem(ac.grid.shape(), false);
    Zip::indexed(&mut values).and(&mut mask).and(&num).and(&den).for_each(|idx, z, m, &n, &d| {
        if d >= threshold {
            *z = n / d;
            *m = true;
        } else if let Some(p) = previous {
            // Per-pixel error relative to zero: d |z|^2 - 2 Re(z conj(n)).
            let old = p.values()[idx];
            let gain = d * old.norm_sqr() - 2.0 * (old * n.conj()).re;
            *z = if gain < 0.0 { old } else { zero };
        }
    });
    if values.iter().any(|z: &Complex64| !z.is_finite()) {
        return Err(Error::NonFinite("field update".into()));
    }
    Ok(FieldUpdate { field: ComplexField::new(ac.grid, values)?, denominator: den, mask })
}

fn initial_e2(ac: &AcSet, guess: InitialGuess) -> ComplexField {
    match guess {
        InitialGuess::Flat => ComplexField::constant(ac.grid, Complex64::new(1.0, 0.0)),
        InitialGuess::RandomPhase { seed } => {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let values = Array2::from_shape_fn(ac.grid.shape(), |_| {
                Complex64::from_polar(1.0, rng.random_range(-std::f64::consts::PI..std::f64::consts::PI))
            });
            ComplexField::new(ac.grid, values).expect("grid-shaped")
        }
    }
}

/// Alternates [`update_e1`] and [`update_e2`] from the configured `E2` guess.
pub fn reconstruct(ac: &AcSet, config: &ReconstructionConfig) -> Result<ReconstructionResult> {
    config.validate()?;
    if !ac.carrier_removed {
        return Err(Error::InvalidParameter("reconstruction needs carrier-free AC maps".into()));
    }
    let mut e2 = initial_e2(ac, config.initial_guess);
    check_field(ac, &e2)?;
    let mut e1: Option<ComplexField> = None;
    let mut history = Vec::with_capacity(2 * config.iterations);
    let mut masks = None;
    for _ in 0..config.iterations {
        let up1 = update_e1(ac, &e2, config.mask_epsilon, e1.as_ref())?;
        history.push(model_error(ac, &up1.field, &e2)?);
        let up2 = update_e2(ac, &up1.field, config.mask_epsilon, Some(&e2))?;
        history.push(model_error(ac, &up1.field, &up2.field)?);
        e1 = Some(up1.field);
        e2 = up2.field;
        masks = Some((up1.mask, up2.mask));
    }
    let (m1, m2) = masks.expect("at least one iteration");
    let interior = interior_mask(&ac.grid, config.interior_margin);
    let and = |m: Array2<bool>| {
        let mut m = m;
        Zip::from(&mut m).and(&interior).for_each(|a, &b| *a &= b);
        m
    };
    Ok(ReconstructionResult {
        e1: e1.expect("at least one iteration"),
        e2,
        mask_e1: and(m1),
        mask_e2: and(m2),
        error_history: history,
    })
}

/// Convenience used by tests and benches: schedule-checked reconstruction.
pub fn reconstruct_with_schedule(
    ac: &AcSet,
    schedule: &ShearSchedule,
    config: &ReconstructionConfig,
) -> Result<ReconstructionResult> {
    if schedule != &ac.schedule {
        return Err(Error::InvalidSchedule("schedule differs from the one the AC maps were built with".into()));
    }
    reconstruct(ac, config)
}
