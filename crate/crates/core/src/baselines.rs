//! Comparator methods: equal-power IF, regularized zero forcing and a
//! particle-swarm search over `d`.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{coupling_input_matrix, Channel, CsiModel, PrecoderKind};
use crate::error::{Error, Result};
use crate::lattice::{IntegerMatrix, Lll, DEFAULT_DELTA};
use crate::optimizer::{
    d_to_a, gamma_normalize, ConvergenceFlag, PowerVector, Problem, SolveOutcome,
};
use crate::rate::sum_rate_high_snr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BaselineKind {
    EqualPower,
    #[serde(rename = "RZF")]
    Rzf,
    #[serde(rename = "PSO")]
    Pso,
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaselineKind::EqualPower => write!(f, "EqualPower"),
            BaselineKind::Rzf => write!(f, "RZF"),
            BaselineKind::Pso => write!(f, "PSO"),
        }
    }
}

/// `d = 1` and the lattice step at that point.
pub fn equal_power(m: &DMatrix<f64>) -> Result<(IntegerMatrix, PowerVector)> {
    let d = PowerVector::ones(m.nrows());
    let a = d_to_a(m, &d, DEFAULT_DELTA)?;
    Ok((a, d))
}

/// [`equal_power`] packaged as a solve outcome.
pub fn equal_power_outcome(problem: &Problem) -> Result<SolveOutcome> {
    let d = PowerVector::ones(problem.dim());
    let a = problem.d_to_a(&d, &Lll::default())?;
    Ok(problem.outcome(a, d, 1, ConvergenceFlag::FixedPoint))
}

/// RIF coupling input evaluated at `A = I`, `d = 1`.
pub fn rzf_rate(h: &Channel, rho: f64) -> Result<f64> {
    let k = h.users();
    let m = coupling_input_matrix(h, PrecoderKind::Rif, rho, CsiModel::Perfect)?;
    sum_rate_high_snr(&IntegerMatrix::identity(k), &PowerVector::ones(k), &m, rho)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsoConfig {
    pub max_iter: usize,
    pub swarm: usize,
    /// Per-coordinate velocity limit.
    pub v_clamp: f64,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    /// Half-width of the initial position box.
    pub init_spread: f64,
    pub seed: u64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        PsoConfig {
            max_iter: 300,
            swarm: 50,
            v_clamp: 0.1,
            inertia: 0.7,
            cognitive: 1.5,
            social: 1.5,
            init_spread: 1.0,
            seed: 0,
        }
    }
}

/// Orthonormal basis (columns) of the zero-sum hyperplane in `R^k`.
fn zero_sum_basis(k: usize) -> DMatrix<f64> {
    // Helmert contrasts
    DMatrix::from_fn(k, k - 1, |i, j| {
        let n = (j + 1) as f64;
        let scale = (n * (n + 1.0)).sqrt();
        if i <= j {
            1.0 / scale
        } else if i == j + 1 {
            -n / scale
        } else {
            0.0
        }
    })
}

/// One clamped velocity update for a single coordinate; returns the new
/// velocity. `r1`, `r2` are the uniform draws in `[0, 1)`.
pub fn velocity_update(
    cfg: &PsoConfig,
    v: f64,
    z: f64,
    own_best: f64,
    global_best: f64,
    r1: f64,
    r2: f64,
) -> f64 {
    let v =
        cfg.inertia * v + cfg.cognitive * r1 * (own_best - z) + cfg.social * r2 * (global_best - z);
    v.clamp(-cfg.v_clamp, cfg.v_clamp)
}

struct Particle {
    z: DVector<f64>,
    v: DVector<f64>,
    best_z: DVector<f64>,
    best: f64,
}

/// Global-best PSO over `log d` restricted to the zero-sum hyperplane. The
/// first particle starts at `d = 1`.
pub fn pso_optimize(problem: &Problem, cfg: &PsoConfig) -> Result<SolveOutcome> {
    let k = problem.dim();
    if cfg.swarm == 0 || cfg.max_iter == 0 || !(cfg.v_clamp > 0.0) {
        return Err(Error::InvalidArgument(
            "PSO needs swarm ≥ 1, max_iter ≥ 1, v_clamp > 0".into(),
        ));
    }
    if k == 1 {
        return equal_power_outcome(problem);
    }
    let basis = zero_sum_basis(k);
    let solver = Lll::default();
    let eval = |z: &DVector<f64>| -> Result<(f64, IntegerMatrix, PowerVector)> {
        let x: Vec<f64> = (&basis * z).iter().map(|u| u.exp()).collect();
        let d = gamma_normalize(&x)?;
        let a = problem.d_to_a(&d, &solver)?;
        Ok((problem.objective(&a, &d), a, d))
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut swarm: Vec<Particle> = (0..cfg.swarm)
        .map(|i| {
            let z = if i == 0 {
                DVector::zeros(k - 1)
            } else {
                DVector::from_fn(k - 1, |_, _| {
                    rng.random_range(-cfg.init_spread..=cfg.init_spread)
                })
            };
            let v = DVector::from_fn(k - 1, |_, _| rng.random_range(-cfg.v_clamp..=cfg.v_clamp));
            Particle {
                best_z: z.clone(),
                z,
                v,
                best: f64::INFINITY,
            }
        })
        .collect();
    let mut global: Option<(f64, IntegerMatrix, PowerVector, DVector<f64>)> = None;
    let mut history = Vec::with_capacity(cfg.max_iter + 1);
    for step in 0..=cfg.max_iter {
        if step > 0 {
            let gz = global.as_ref().expect("evaluated swarm").3.clone();
            for p in swarm.iter_mut() {
                for j in 0..k - 1 {
                    let (r1, r2): (f64, f64) = (rng.random(), rng.random());
                    p.v[j] = velocity_update(cfg, p.v[j], p.z[j], p.best_z[j], gz[j], r1, r2);
                    p.z[j] += p.v[j];
                }
            }
        }
        let scores: Vec<Result<(f64, IntegerMatrix, PowerVector)>> =
            swarm.par_iter().map(|p| eval(&p.z)).collect();
        for (p, s) in swarm.iter_mut().zip(scores) {
            let (f, a, d) = s?;
            if f < p.best {
                p.best = f;
                p.best_z = p.z.clone();
            }
            if global.as_ref().is_none_or(|g| f < g.0) {
                global = Some((f, a, d, p.z.clone()));
            }
        }
        history.push(global.as_ref().expect("evaluated swarm").0);
    }
    let (_, a, d, _) = global.expect("evaluated swarm");
    let mut out = problem.outcome(a, d, cfg.max_iter, ConvergenceFlag::IterationCap);
    out.objective_history = history;
    Ok(out)
}
