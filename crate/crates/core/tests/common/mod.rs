//! Reference computations written without the library's update or extraction code.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use jsp_core::{AcSet, ComplexField, FrequencyGrid, ShearSchedule};

pub fn random_field(grid: FrequencyGrid, seed: u64) -> ComplexField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = Array2::from_shape_fn(grid.shape(), |_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    ComplexField::new(grid, v).unwrap()
}

pub fn random_ac(grid: FrequencyGrid, schedule: &ShearSchedule, seed: u64) -> AcSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ac = (0..schedule.num_pairs())
        .map(|_| Array2::from_shape_fn(grid.shape(), |_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
        .collect();
    AcSet { grid, schedule: schedule.clone(), ac, carrier_removed: true }
}

fn inside(x: i64, n: usize) -> bool {
    x >= 0 && (x as usize) < n
}

/// Solves `min_x sum |y_r - a_r x_{c_r}|^2` through the dense normal equations.
fn dense_least_squares(n_unknowns: usize, rows: &[(usize, Complex64, Complex64)]) -> DVector<Complex64> {
    let mut a = DMatrix::<Complex64>::zeros(rows.len(), n_unknowns);
    let mut y = DVector::<Complex64>::zeros(rows.len());
    for (r, &(col, coeff, rhs)) in rows.iter().enumerate() {
        a[(r, col)] = coeff;
        y[r] = rhs;
    }
    let ah = a.adjoint();
    let normal = &ah * &a;
    let rhs = &ah * &y;
    normal.lu().solve(&rhs).expect("normal matrix is invertible")
}

/// Least-squares `E1` given `E2`: each AC pixel is modeled as
/// `E1(a - s1, b) * conj(E2(a, b - s2))`.
pub fn oracle_e1(ac: &AcSet, e2: &ComplexField) -> Array2<Complex64> {
    let (n0, n1) = ac.grid.shape();
    let mut rows = Vec::new();
    for (p, (k, l)) in ac.schedule.pairs().enumerate() {
        let (s1, s2) = (ac.schedule.omega1[k], ac.schedule.omega2[l]);
        for a in 0..n0 {
            for b in 0..n1 {
                let u = a as i64 - s1;
                let q = b as i64 - s2;
                if inside(u, n0) && inside(q, n1) {
                    let col = u as usize * n1 + b;
                    rows.push((col, e2.values()[[a, q as usize]].conj(), ac.ac[p][[a, b]]));
                }
            }
        }
    }
    let x = dense_least_squares(n0 * n1, &rows);
    Array2::from_shape_fn((n0, n1), |(i, j)| x[i * n1 + j])
}

/// Least-squares `E2` given `E1`, from the conjugated model
/// `conj(AC(a, b)) = E2(a, b - s2) * conj(E1(a - s1, b))`.
pub fn oracle_e2(ac: &AcSet, e1: &ComplexField) -> Array2<Complex64> {
    let (n0, n1) = ac.grid.shape();
    let mut rows = Vec::new();
    for (p, (k, l)) in ac.schedule.pairs().enumerate() {
        let (s1, s2) = (ac.schedule.omega1[k], ac.schedule.omega2[l]);
        for a in 0..n0 {
            for b in 0..n1 {
                let u = a as i64 - s1;
                let q = b as i64 - s2;
                if inside(u, n0) && inside(q, n1) {
                    let col = a * n1 + q as usize;
                    rows.push((col, e1.values()[[u as usize, b]].conj(), ac.ac[p][[a, b]].conj()));
                }
            }
        }
    }
    let x = dense_least_squares(n0 * n1, &rows);
    Array2::from_shape_fn((n0, n1), |(i, j)| x[i * n1 + j])
}

pub fn max_abs_diff(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// Worst amplitude error relative to the map maximum, and worst phase error where the
/// amplitude exceeds `phase_floor` of the maximum, over pixels with `interior` set.
pub fn fidelity(
    extracted: &Array2<Complex64>,
    reference: &Array2<Complex64>,
    interior: &Array2<bool>,
    phase_floor: f64,
) -> (f64, f64) {
    let peak = reference.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut amp = 0.0f64;
    let mut phase = 0.0f64;
    for ((idx, x), r) in extracted.indexed_iter().zip(reference.iter()) {
        if !interior[idx] {
            continue;
        }
        amp = amp.max((x.norm() - r.norm()).abs() / peak);
        if r.norm() > phase_floor * peak {
            let d = (x * r.conj()).arg().abs();
            phase = phase.max(d);
        }
    }
    (amp, phase)
}

/// Spearman correlation computed through the classic `1 - 6 sum d^2 / (n (n^2 - 1))`
/// formula; valid for series without ties.
pub fn spearman_no_ties(x: &[f64], y: &[f64]) -> f64 {
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].partial_cmp(&v[b]).unwrap());
        let mut r = vec![0.0; v.len()];
        for (pos, &i) in idx.iter().enumerate() {
            r[i] = pos as f64 + 1.0;
        }
        r
    };
    let (rx, ry) = (rank(x), rank(y));
    let n = x.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b) * (a - b)).sum();
    1.0 - 6.0 * d2 / (n * (n * n - 1.0))
}
