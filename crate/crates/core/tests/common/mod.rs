#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use ifp_core::optimizer::gamma_normalize;
use ifp_core::PowerVector;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Random SPD matrix `BBᵀ + cI`.
pub fn random_spd(rng: &mut impl Rng, k: usize) -> DMatrix<f64> {
    let b = gaussian_matrix(rng, k, k);
    &b * b.transpose() + DMatrix::identity(k, k) * 0.1
}

/// SPD matrix whose inverse is entrywise positive: the inverse of `PPᵀ`
/// with `P` positive.
pub fn spd_with_positive_inverse(rng: &mut impl Rng, k: usize) -> DMatrix<f64> {
    let p = DMatrix::from_fn(k, k, |_, _| rng.random_range(0.05..1.0));
    let b = &p * p.transpose() + DMatrix::identity(k, k) * rng.random_range(0.01..1.0);
    b.try_inverse().expect("positive definite")
}

pub fn random_diagonal(rng: &mut impl Rng, k: usize) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_fn(k, |_, _| rng.random_range(0.1..10.0)))
}

pub fn random_power(rng: &mut impl Rng, k: usize, spread: f64) -> PowerVector {
    let x: Vec<f64> = (0..k)
        .map(|_| rng.random_range(-spread..spread).exp())
        .collect();
    gamma_normalize(&x).unwrap()
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let var: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    cov / var
}

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}
