//! Trace objective, integer-forcing rates and the water-filling upper bound.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::channel::Channel;
use crate::error::{Error, Result};
use crate::lattice::IntegerMatrix;
use crate::linalg::upper_factor;
use crate::optimizer::PowerVector;

/// Water-level bisection tolerance.
pub const WATER_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateReport {
    /// Bits per channel use.
    pub sum_rate: f64,
    pub per_user: Option<Vec<f64>>,
    pub objective: f64,
}

fn check_dims(a: &IntegerMatrix, d: &PowerVector, m: &DMatrix<f64>) -> Result<usize> {
    let k = a.dim();
    if d.dim() != k || m.nrows() != k || m.ncols() != k {
        return Err(Error::DimensionMismatch(format!(
            "A is {k}x{k}, d has {} entries, M is {}x{}",
            d.dim(),
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(k)
}

/// `dᵀ((AAᵀ)∘M)d`.
pub fn trace_objective(a: &IntegerMatrix, d: &PowerVector, m: &DMatrix<f64>) -> Result<f64> {
    check_dims(a, d, m)?;
    let g = a.gram().component_mul(m);
    let dv = d.as_vector();
    Ok(dv.dot(&(&g * dv)))
}

/// `Σ_l ‖T·D·a_l‖²` over the columns `a_l` of `A`, with `TᵀT = M`.
pub fn trace_objective_columns(
    a: &IntegerMatrix,
    d: &PowerVector,
    m: &DMatrix<f64>,
) -> Result<f64> {
    check_dims(a, d, m)?;
    let t = upper_factor(m)?;
    Ok(objective_with_factor(&t, d.as_vector(), a))
}

pub(crate) fn objective_with_factor(t: &DMatrix<f64>, d: &DVector<f64>, a: &IntegerMatrix) -> f64 {
    let basis = t * DMatrix::from_diagonal(d);
    (basis * a.as_f64()).norm_squared()
}

/// `(K/2)·log₂⁺(ρ·(∏d)² / objective)`.
pub fn rate_from_objective(k: usize, d_product: f64, objective: f64, rho: f64) -> f64 {
    let ratio = rho * d_product * d_product / objective;
    if ratio > 1.0 {
        0.5 * k as f64 * ratio.log2()
    } else {
        0.0
    }
}

/// High-SNR sum rate of integer-forcing precoding at `(A, d)`.
pub fn sum_rate_high_snr(
    a: &IntegerMatrix,
    d: &PowerVector,
    m: &DMatrix<f64>,
    rho: f64,
) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "SNR must be positive, got {rho}"
        )));
    }
    let objective = trace_objective(a, d, m)?;
    Ok(rate_from_objective(a.dim(), d.product(), objective, rho))
}

/// Per-user rate from the effective channel `h̃_iᵀ = h_iᵀP`, reading `a_i` as
/// the `i`-th row of `A`. Experimental.
pub fn per_user_rate(
    a: &IntegerMatrix,
    h: &Channel,
    p: &DMatrix<f64>,
    rho: f64,
) -> Result<Vec<f64>> {
    let k = a.dim();
    if h.users() != k || p.nrows() != h.antennas() || p.ncols() != k {
        return Err(Error::DimensionMismatch(format!(
            "A is {k}x{k}, H is {}x{}, P is {}x{}",
            h.users(),
            h.antennas(),
            p.nrows(),
            p.ncols()
        )));
    }
    if !(rho >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "SNR must be nonnegative, got {rho}"
        )));
    }
    let eff = h.matrix() * p;
    let af = a.as_f64();
    Ok((0..k)
        .map(|i| {
            let ht = eff.row(i).transpose();
            let ai = af.row(i).transpose();
            let proj = ai.dot(&ht);
            let scale = rho / (rho * ht.norm_squared() + 1.0);
            let value = ai.norm_squared() - scale * proj * proj;
            if value > 0.0 && value < 1.0 {
                -value.log2()
            } else {
                0.0
            }
        })
        .collect())
}

/// Water-filling allocation over the eigenmodes of `HᵀH`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterFilling {
    /// Eigenvalues of `HᵀH`, descending.
    pub gains: Vec<f64>,
    /// Power per mode; sums to `K`.
    pub powers: Vec<f64>,
    pub level: f64,
    /// Bits per channel use.
    pub rate: f64,
}

/// Solves `max Σ ½·log₂(1 + (ρ/K)·w_i·λ_i)` subject to `Σ w_i = K`, `w ⪰ 0`,
/// by bisection on the water level.
pub fn waterfilling(h: &Channel, rho: f64) -> Result<WaterFilling> {
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "SNR must be positive, got {rho}"
        )));
    }
    let k = h.users() as f64;
    let hm = h.matrix();
    let mut gains: Vec<f64> = (hm.transpose() * hm)
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0))
        .collect();
    gains.sort_by(|a, b| b.total_cmp(a));
    let floor = gains[0] * 1e-14;
    // inverse gain of each usable mode: w_i = (μ − K/(ρλ_i))⁺
    let inv: Vec<Option<f64>> = gains
        .iter()
        .map(|&l| (l > floor && l > 0.0).then(|| k / (rho * l)))
        .collect();
    if inv.iter().all(Option::is_none) {
        return Ok(WaterFilling {
            powers: vec![0.0; gains.len()],
            gains,
            level: 0.0,
            rate: 0.0,
        });
    }
    let filled = |mu: f64| -> f64 { inv.iter().flatten().map(|c| (mu - c).max(0.0)).sum() };
    let mut lo = 0.0;
    let mut hi = k + inv.iter().flatten().cloned().fold(0.0, f64::max);
    while hi - lo > WATER_TOL * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if filled(mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let level = 0.5 * (lo + hi);
    let mut powers: Vec<f64> = inv
        .iter()
        .map(|c| c.map_or(0.0, |c| (level - c).max(0.0)))
        .collect();
    // absorb the bisection residue so the budget is met exactly
    let total: f64 = powers.iter().sum();
    if total > 0.0 {
        powers.iter_mut().for_each(|w| *w *= k / total);
    }
    let rate = gains
        .iter()
        .zip(&powers)
        .map(|(&l, &w)| 0.5 * (1.0 + rho / k * w * l).log2())
        .sum();
    Ok(WaterFilling {
        gains,
        powers,
        level,
        rate,
    })
}

/// Capacity upper bound in bits per channel use.
pub fn waterfilling_upper_bound(h: &Channel, rho: f64) -> Result<f64> {
    Ok(waterfilling(h, rho)?.rate)
}
