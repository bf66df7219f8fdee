//! Alternating optimization between the lattice step (`d → A`) and the
//! reciprocal fixed point (`A → d`).

use log::trace;
use nalgebra::DMatrix;

use super::power::PowerVector;
use super::ra::{diagonal_start, ra_fixed_point, RaConfig};
use super::{ConvergenceFlag, CouplingMatrix, Problem, SolveOutcome};
use crate::error::Result;
use crate::lattice::{Lll, SivpSolver, DEFAULT_DELTA};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoConfig {
    pub max_iter: usize,
    pub ra: RaConfig,
    pub delta: f64,
}

impl Default for AoConfig {
    fn default() -> Self {
        AoConfig {
            max_iter: 100,
            ra: RaConfig::default(),
            delta: DEFAULT_DELTA,
        }
    }
}

/// Alternates `A = d_to_A(d)` and `d = RA(A)` until `A` repeats.
///
/// The objective never increases: an RA output worse than the current `d`
/// is discarded, and a lattice step that would raise the objective ends the
/// run with `Stalled`.
pub fn alternating_optimize(
    m: &DMatrix<f64>,
    rho: f64,
    d_init: &PowerVector,
    cfg: &AoConfig,
) -> Result<SolveOutcome> {
    let problem = Problem::new(m.clone(), rho)?;
    alternating_optimize_with(&problem, d_init, cfg, &Lll { delta: cfg.delta })
}

/// [`alternating_optimize`] on a prepared problem with a chosen SIVP solver.
pub fn alternating_optimize_with(
    problem: &Problem,
    d_init: &PowerVector,
    cfg: &AoConfig,
    solver: &dyn SivpSolver,
) -> Result<SolveOutcome> {
    let m = problem.coupling_input();
    let mut d = d_init.clone();
    let mut a = problem.d_to_a(&d, solver)?;
    let mut objective = problem.objective(&a, &d);
    let mut history = vec![objective];
    let mut inner = 0;
    let mut flag = ConvergenceFlag::IterationCap;
    let mut outer = 0;
    while outer < cfg.max_iter {
        outer += 1;
        let g = CouplingMatrix::from_parts(&a, m)?;
        let (d_ra, ra_iters, ra_flag) =
            ra_fixed_point(&g, &diagonal_start(&g), cfg.ra.tol, cfg.ra.iter_cap)?;
        inner += ra_iters;
        if g.objective(d_ra.as_vector()) <= g.objective(d.as_vector()) {
            d = d_ra;
        }
        objective = problem.objective(&a, &d);
        let a_next = problem.d_to_a(&d, solver)?;
        if a_next == a {
            flag = ra_flag;
            history.push(objective);
            break;
        }
        let next_objective = problem.objective(&a_next, &d);
        trace!("AO sweep {outer}: objective {objective} -> {next_objective} (RA {ra_flag}, {ra_iters} steps)");
        if next_objective > objective {
            flag = ConvergenceFlag::Stalled;
            history.push(objective);
            break;
        }
        a = a_next;
        objective = next_objective;
        history.push(objective);
    }
    let mut out = problem.outcome(a, d, outer, flag);
    out.inner_iterations = inner;
    out.objective_history = history;
    Ok(out)
}
