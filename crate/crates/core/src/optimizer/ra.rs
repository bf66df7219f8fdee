//! Reciprocal approximation: the fixed-point iteration
//! `d ← Γ(G⁻¹(1 ⊘ d))` for the power vector at a fixed `A`.

use log::debug;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::hilbert::{gamma_unchecked, hilbert_unchecked};
use super::power::PowerVector;
use super::{ConvergenceFlag, CouplingMatrix};
use crate::error::{Error, Result};
use crate::lattice::IntegerMatrix;

/// Number of consecutive steps inspected for a period-2 plateau.
pub const OSCILLATION_WINDOW: usize = 6;
const PLATEAU_VARIATION: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaConfig {
    /// Stop once the Hilbert step is at most this.
    pub tol: f64,
    pub iter_cap: usize,
}

impl Default for RaConfig {
    fn default() -> Self {
        RaConfig {
            tol: 1e-8,
            iter_cap: 1000,
        }
    }
}

/// One reciprocal step: the Hilbert distance it moved and the objective at
/// the new iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RaStep {
    pub iteration: usize,
    pub hilbert_step: f64,
    pub objective: f64,
}

#[derive(Debug, Clone)]
pub struct RaTrace {
    pub d: PowerVector,
    pub iterations: usize,
    pub flag: ConvergenceFlag,
    pub steps: Vec<RaStep>,
}

/// Starting point `Γ(diag(G)^(−1/2))`, exact when `G` is diagonal.
pub fn diagonal_start(g: &CouplingMatrix) -> PowerVector {
    let x: Vec<f64> = g.matrix().diagonal().iter().map(|v| v.powf(-0.5)).collect();
    gamma_unchecked(&x)
}

/// Runs the iteration from `d_init`, returning the final point, the number
/// of steps taken and how it stopped.
///
/// On a period-2 plateau the better of the two cycle points is returned. If
/// `G⁻¹(1 ⊘ d)` leaves the positive orthant the best iterate so far is
/// returned with `IterationCap`.
pub fn ra_fixed_point(
    g: &CouplingMatrix,
    d_init: &PowerVector,
    tol: f64,
    iter_cap: usize,
) -> Result<(PowerVector, usize, ConvergenceFlag)> {
    let trace = ra_trace(g, d_init, RaConfig { tol, iter_cap })?;
    Ok((trace.d, trace.iterations, trace.flag))
}

/// [`ra_fixed_point`] with per-step telemetry.
pub fn ra_trace(g: &CouplingMatrix, d_init: &PowerVector, cfg: RaConfig) -> Result<RaTrace> {
    if d_init.dim() != g.dim() {
        return Err(Error::DimensionMismatch(format!(
            "G is {0}x{0}, d has {1} entries",
            g.dim(),
            d_init.dim()
        )));
    }
    if !(cfg.tol > 0.0) || cfg.iter_cap == 0 {
        return Err(Error::InvalidArgument(
            "RA needs tol > 0 and iter_cap ≥ 1".into(),
        ));
    }
    let inv = g.inverse();
    let mut d = d_init.clone();
    let mut best = (g.objective(d.as_vector()), d.clone());
    let mut steps: Vec<RaStep> = Vec::new();
    for it in 1..=cfg.iter_cap {
        let recip = d.as_vector().map(|v| 1.0 / v);
        let y: DVector<f64> = inv * recip;
        if y.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            debug!("reciprocal step left the positive orthant at iteration {it}");
            return Ok(RaTrace {
                d: best.1,
                iterations: it,
                flag: ConvergenceFlag::IterationCap,
                steps,
            });
        }
        let next = gamma_unchecked(y.as_slice());
        let step = hilbert_unchecked(next.as_slice(), d.as_slice());
        let objective = g.objective(next.as_vector());
        steps.push(RaStep {
            iteration: it,
            hilbert_step: step,
            objective,
        });
        if objective < best.0 {
            best = (objective, next.clone());
        }
        let prev = std::mem::replace(&mut d, next);
        if step <= cfg.tol {
            return Ok(RaTrace {
                d,
                iterations: it,
                flag: ConvergenceFlag::FixedPoint,
                steps,
            });
        }
        if is_plateau(&steps, cfg.tol) {
            let d = if g.objective(prev.as_vector()) < g.objective(d.as_vector()) {
                prev
            } else {
                d
            };
            return Ok(RaTrace {
                d,
                iterations: it,
                flag: ConvergenceFlag::OscillationDetected,
                steps,
            });
        }
    }
    Ok(RaTrace {
        d,
        iterations: cfg.iter_cap,
        flag: ConvergenceFlag::IterationCap,
        steps,
    })
}

fn is_plateau(steps: &[RaStep], tol: f64) -> bool {
    if steps.len() < OSCILLATION_WINDOW {
        return false;
    }
    let window = &steps[steps.len() - OSCILLATION_WINDOW..];
    let (lo, hi) = window
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
            (lo.min(s.hilbert_step), hi.max(s.hilbert_step))
        });
    lo > tol && hi - lo < PLATEAU_VARIATION
}

/// Optimal `d` for a diagonal `M`: `Γ(L^(1/2))` with
/// `L = diag(((AAᵀ)∘M)⁻¹·1)`.
pub fn closed_form_diagonal(m: &DMatrix<f64>, a: &IntegerMatrix) -> Result<PowerVector> {
    let k = a.dim();
    if m.nrows() != k || m.ncols() != k {
        return Err(Error::DimensionMismatch(format!(
            "M is {}x{}, A is {k}x{k}",
            m.nrows(),
            m.ncols()
        )));
    }
    for i in 0..k {
        for j in 0..k {
            if i != j && m[(i, j)] != 0.0 {
                return Err(Error::InvalidArgument(
                    "closed form needs a diagonal M".into(),
                ));
            }
        }
        if !(m[(i, i)] > 0.0) {
            return Err(Error::NonPositiveInput(format!(
                "M[{i},{i}] = {}",
                m[(i, i)]
            )));
        }
    }
    let g = a.gram().component_mul(m);
    let l = g
        .lu()
        .solve(&DVector::from_element(k, 1.0))
        .ok_or(Error::SingularCoupling)?;
    if l.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::SingularCoupling);
    }
    let root: Vec<f64> = l.iter().map(|v| v.sqrt()).collect();
    Ok(gamma_unchecked(&root))
}

/// Worst-case step count from Birkhoff's contraction theorem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IterationBound {
    Steps {
        steps: usize,
        /// Projective diameter `Δ(G⁻¹)`.
        diameter: f64,
        /// Contraction ratio `tanh(Δ/4)`.
        kappa: f64,
    },
    /// `G⁻¹` has an entry that is not strictly positive.
    Unavailable,
}

impl IterationBound {
    pub fn steps(&self) -> Option<usize> {
        match self {
            IterationBound::Steps { steps, .. } => Some(*steps),
            IterationBound::Unavailable => None,
        }
    }
}

/// Bound on the number of contraction steps after the first one before the
/// Hilbert step falls to `tol`: `⌈(log ε − log d_H(G⁻¹(1⊘d₀), d₀)) / log κ⌉`.
pub fn ra_iteration_bound(g: &CouplingMatrix, d_init: &PowerVector, tol: f64) -> IterationBound {
    let inv = g.inverse();
    if inv.iter().any(|&v| !(v > 0.0)) || d_init.dim() != g.dim() || !(tol > 0.0) {
        return IterationBound::Unavailable;
    }
    let diameter = projective_diameter(inv);
    let kappa = (diameter / 4.0).tanh();
    let recip = d_init.as_vector().map(|v| 1.0 / v);
    let first = inv * recip;
    let s0 = hilbert_unchecked(first.as_slice(), d_init.as_slice());
    let steps = if s0 <= tol {
        0
    } else if kappa <= 0.0 {
        1
    } else {
        ((tol.ln() - s0.ln()) / kappa.ln()).ceil().max(0.0) as usize
    };
    IterationBound::Steps {
        steps,
        diameter,
        kappa,
    }
}

/// `Δ(B) = max_{i,j} d_H(b_i, b_j)` over the columns of a positive matrix.
pub(crate) fn projective_diameter(b: &DMatrix<f64>) -> f64 {
    let k = b.ncols();
    let mut best: f64 = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            let ci = b.column(i);
            let cj = b.column(j);
            best = best.max(hilbert_unchecked(ci.as_slice(), cj.as_slice()));
        }
    }
    best
}
