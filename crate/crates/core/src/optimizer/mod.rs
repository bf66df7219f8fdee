//! Joint `(A, D)` optimization: Hilbert-metric tools, the reciprocal
//! fixed-point solver for `d`, alternating optimization and the multi-cone
//! stochastic pattern search.

mod ao;
mod hilbert;
mod power;
mod ra;
mod search;

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{IntegerMatrix, LatticeBasis, Lll, SivpSolver};
use crate::linalg::{symmetrize, upper_factor};
use crate::rate::{objective_with_factor, rate_from_objective};

pub use ao::{alternating_optimize, alternating_optimize_with, AoConfig};
pub use hilbert::{gamma_normalize, hilbert_metric};
pub use power::{PowerVector, PRODUCT_TOL};
pub use ra::{
    closed_form_diagonal, diagonal_start, ra_fixed_point, ra_iteration_bound, ra_trace,
    IterationBound, RaConfig, RaStep, RaTrace, OSCILLATION_WINDOW,
};
pub use search::{mcn_sps, sample_ray_points, McnSpsConfig};

/// How a solver stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConvergenceFlag {
    FixedPoint,
    OscillationDetected,
    IterationCap,
    /// The lattice step proposed an `A` with a larger objective; the
    /// previous `A` was kept.
    Stalled,
}

impl fmt::Display for ConvergenceFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConvergenceFlag::FixedPoint => "FixedPoint",
            ConvergenceFlag::OscillationDetected => "OscillationDetected",
            ConvergenceFlag::IterationCap => "IterationCap",
            ConvergenceFlag::Stalled => "Stalled",
        };
        f.write_str(s)
    }
}

/// Interference coupling matrix `G = (AAᵀ)∘M` together with its inverse.
#[derive(Debug, Clone)]
pub struct CouplingMatrix {
    g: DMatrix<f64>,
    inv: DMatrix<f64>,
}

impl CouplingMatrix {
    /// Validates that `g` is symmetric positive definite.
    pub fn new(g: DMatrix<f64>) -> Result<Self> {
        if !g.is_square() || g.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "coupling matrix must be square, got {}x{}",
                g.nrows(),
                g.ncols()
            )));
        }
        let scale = g.amax();
        if !scale.is_finite() || (&g - g.transpose()).amax() > 1e-10 * scale {
            return Err(Error::NonSpdCoupling);
        }
        let g = symmetrize(&g);
        let chol = g.clone().cholesky().ok_or(Error::NonSpdCoupling)?;
        let inv = symmetrize(&chol.inverse());
        Ok(CouplingMatrix { g, inv })
    }

    pub fn from_parts(a: &IntegerMatrix, m: &DMatrix<f64>) -> Result<Self> {
        if a.dim() != m.nrows() || !m.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "A is {0}x{0}, M is {1}x{2}",
                a.dim(),
                m.nrows(),
                m.ncols()
            )));
        }
        Self::new(a.gram().component_mul(m))
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inv
    }

    /// `dᵀGd`.
    pub fn objective(&self, d: &DVector<f64>) -> f64 {
        d.dot(&(&self.g * d))
    }
}

/// Coupling input `M` at a given SNR, with its upper factor `T` (`TᵀT = M`)
/// cached for the lattice step.
#[derive(Debug, Clone)]
pub struct Problem {
    m: DMatrix<f64>,
    t: DMatrix<f64>,
    rho: f64,
}

impl Problem {
    pub fn new(m: DMatrix<f64>, rho: f64) -> Result<Self> {
        if !(rho > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "SNR must be positive, got {rho}"
            )));
        }
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "M must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let m = symmetrize(&m);
        let t = upper_factor(&m)?;
        Ok(Problem { m, t, rho })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn coupling_input(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.t
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn objective(&self, a: &IntegerMatrix, d: &PowerVector) -> f64 {
        objective_with_factor(&self.t, d.as_vector(), a)
    }

    pub fn sum_rate(&self, a: &IntegerMatrix, d: &PowerVector) -> f64 {
        rate_from_objective(self.dim(), d.product(), self.objective(a, d), self.rho)
    }

    /// Lattice basis `T·diag(d)`.
    pub fn basis(&self, d: &PowerVector) -> Result<LatticeBasis> {
        if d.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "M is {0}x{0}, d has {1} entries",
                self.dim(),
                d.dim()
            )));
        }
        LatticeBasis::new(&self.t * DMatrix::from_diagonal(d.as_vector()))
    }

    pub fn d_to_a(&self, d: &PowerVector, solver: &dyn SivpSolver) -> Result<IntegerMatrix> {
        solver.solve(&self.basis(d)?)
    }

    pub(crate) fn outcome(
        &self,
        a: IntegerMatrix,
        d: PowerVector,
        iterations: usize,
        converged_flag: ConvergenceFlag,
    ) -> SolveOutcome {
        let objective = self.objective(&a, &d);
        SolveOutcome {
            sum_rate: rate_from_objective(self.dim(), d.product(), objective, self.rho),
            objective,
            d,
            a,
            iterations,
            inner_iterations: 0,
            converged_flag,
            objective_history: Vec::new(),
            r_final: None,
        }
    }
}

/// Result of an `(A, d)` solve.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub d: PowerVector,
    pub a: IntegerMatrix,
    pub objective: f64,
    pub sum_rate: f64,
    /// Outer iterations (AO sweeps, search rounds or swarm steps).
    pub iterations: usize,
    /// Reciprocal-iteration steps summed over all inner solves.
    pub inner_iterations: usize,
    pub converged_flag: ConvergenceFlag,
    /// Objective after each outer iteration, starting with the initial point.
    pub objective_history: Vec<f64>,
    /// Final search radius, for the pattern search.
    pub r_final: Option<f64>,
}

/// Integer matrix for a given `d`: the unimodular LLL transform of `T·diag(d)`.
pub fn d_to_a(m: &DMatrix<f64>, d: &PowerVector, delta: f64) -> Result<IntegerMatrix> {
    let t = upper_factor(m)?;
    if d.dim() != t.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "M is {0}x{0}, d has {1} entries",
            t.nrows(),
            d.dim()
        )));
    }
    let basis = LatticeBasis::new(t * DMatrix::from_diagonal(d.as_vector()))?;
    Lll { delta }.solve(&basis)
}
