//! Multi-cone nested stochastic pattern search over the power vector.

use log::debug;
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::ao::{alternating_optimize_with, AoConfig};
use super::hilbert::{gamma_unchecked, hilbert_unchecked};
use super::power::PowerVector;
use super::{Problem, SolveOutcome};
use crate::error::{Error, Result};
use crate::lattice::Lll;

/// Candidates with equal `A` closer than this in Hilbert distance are merged.
const MERGE_DISTANCE: f64 = 1e-8;
/// Relative objective decrease a candidate must achieve to move the centre.
const IMPROVEMENT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McnSpsConfig {
    pub r0: f64,
    /// Rays per round; `None` means `2K`.
    pub num_rays: Option<usize>,
    /// The search stops once the radius is at most this.
    pub eps: f64,
    pub ray_resample_cap: usize,
    /// Safety limit on the number of rounds.
    pub max_rounds: usize,
    pub seed: u64,
    pub ao: AoConfig,
}

impl Default for McnSpsConfig {
    fn default() -> Self {
        McnSpsConfig {
            r0: 10.0,
            num_rays: None,
            eps: 1e-4,
            ray_resample_cap: 100,
            max_rounds: 500,
            seed: 0,
            ao: AoConfig::default(),
        }
    }
}

impl McnSpsConfig {
    pub fn rays_for(&self, k: usize) -> usize {
        self.num_rays.unwrap_or(2 * k)
    }
}

/// `q` points `d + r·v̂` with `v̂` uniform on the unit sphere, every
/// coordinate positive. A point that stays outside the orthant after
/// `resample_cap` draws has its radius halved and is drawn again.
pub fn sample_ray_points<R: Rng + ?Sized>(
    d: &PowerVector,
    r: f64,
    q: usize,
    resample_cap: usize,
    rng: &mut R,
) -> Vec<DVector<f64>> {
    (0..q)
        .map(|_| sample_one(d.as_vector(), r, resample_cap, rng))
        .collect()
}

fn sample_one<R: Rng + ?Sized>(
    d: &DVector<f64>,
    r: f64,
    resample_cap: usize,
    rng: &mut R,
) -> DVector<f64> {
    let k = d.len();
    let mut radius = r.max(0.0);
    loop {
        if radius == 0.0 {
            return d.clone();
        }
        for _ in 0..resample_cap.max(1) {
            let v = unit_direction(k, rng);
            let p = d + v * radius;
            if p.iter().all(|&x| x > 0.0) {
                return p;
            }
        }
        radius *= 0.5;
        // below this the point equals d in floating point anyway
        if radius < f64::EPSILON * d.min() {
            radius = 0.0;
        }
    }
}

fn unit_direction<R: Rng + ?Sized>(k: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-300 {
            return v / n;
        }
    }
}

/// Independent stream per `(seed, round, ray)`.
fn ray_rng(seed: u64, round: usize, ray: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((round as u64) << 32) | ray as u64);
    rng
}

/// Pattern search around the AO solution: each round shoots rays from the
/// current centre, refines every ray end with AO and moves to the best
/// strictly better candidate, halving the radius when none improves.
pub fn mcn_sps(problem: &Problem, cfg: &McnSpsConfig) -> Result<SolveOutcome> {
    let k = problem.dim();
    let rays = cfg.rays_for(k);
    if !(cfg.eps > 0.0) || !(cfg.r0 > cfg.eps) || rays == 0 {
        return Err(Error::InvalidArgument(format!(
            "MCN-SPS needs r0 > eps > 0 and at least one ray (r0 = {}, eps = {}, rays = {rays})",
            cfg.r0, cfg.eps
        )));
    }
    let solver = Lll {
        delta: cfg.ao.delta,
    };
    let initial = alternating_optimize_with(problem, &PowerVector::ones(k), &cfg.ao, &solver)?;
    let mut inner = initial.inner_iterations;
    let mut history = vec![initial.objective];
    let mut best = initial.clone();
    let mut r = cfg.r0;
    let mut round = 0;
    while r > cfg.eps && round < cfg.max_rounds {
        round += 1;
        let centre = alternating_optimize_with(problem, &best.d, &cfg.ao, &solver)?;
        inner += centre.inner_iterations;
        if centre.objective < best.objective {
            best = centre;
        }
        let candidates: Vec<Result<SolveOutcome>> = (0..rays)
            .into_par_iter()
            .map(|ray| {
                let mut rng = ray_rng(cfg.seed, round, ray);
                let p = sample_one(best.d.as_vector(), r, cfg.ray_resample_cap, &mut rng);
                let start = gamma_unchecked(p.as_slice());
                alternating_optimize_with(problem, &start, &cfg.ao, &solver)
            })
            .collect();
        let mut kept: Vec<SolveOutcome> = Vec::with_capacity(rays);
        for cand in candidates {
            let cand = cand?;
            inner += cand.inner_iterations;
            let duplicate = kept.iter().any(|c| {
                c.a == cand.a
                    && hilbert_unchecked(c.d.as_slice(), cand.d.as_slice()) <= MERGE_DISTANCE
            });
            if !duplicate {
                kept.push(cand);
            }
        }
        let threshold = best.objective * (1.0 - IMPROVEMENT_TOL);
        let winner = kept
            .into_iter()
            .filter(|c| c.objective < threshold)
            .reduce(|acc, c| if c.objective < acc.objective { c } else { acc });
        match winner {
            Some(c) => {
                debug!(
                    "round {round}: objective {} -> {} at r = {r}",
                    best.objective, c.objective
                );
                best = c;
            }
            None => r *= 0.5,
        }
        history.push(best.objective);
    }
    debug_assert!(best.objective <= initial.objective);
    let mut out = problem.outcome(best.a, best.d, round, best.converged_flag);
    out.inner_iterations = inner;
    out.objective_history = history;
    out.r_final = Some(r);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::IntegerMatrix;
    use nalgebra::DMatrix;

    #[test]
    fn zero_radius_returns_centre() {
        let d = PowerVector::from_slice(&[2.0, 0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = sample_ray_points(&d, 0.0, 4, 10, &mut rng);
        assert_eq!(pts.len(), 4);
        assert!(pts.iter().all(|p| p == d.as_vector()));
    }

    #[test]
    fn points_are_positive_and_reproducible() {
        let d = PowerVector::from_slice(&[4.0, 0.5, 0.5]).unwrap();
        let draw = |seed| sample_ray_points(&d, 10.0, 20, 3, &mut ChaCha8Rng::seed_from_u64(seed));
        let a = draw(9);
        assert!(a.iter().all(|p| p.iter().all(|&x| x > 0.0)));
        assert_eq!(a, draw(9));
        for p in &a {
            assert!((p - d.as_vector()).norm() <= 10.0 + 1e-12);
        }
    }

    #[test]
    fn identity_problem() {
        let rho = 100.0;
        let p = Problem::new(DMatrix::identity(3, 3), rho).unwrap();
        let out = mcn_sps(&p, &McnSpsConfig::default()).unwrap();
        assert_eq!(out.a.gram(), IntegerMatrix::identity(3).gram());
        assert!(out.d.as_slice().iter().all(|&v| (v - 1.0).abs() < 1e-9));
        assert!((out.sum_rate - 1.5 * (rho / 3.0).log2()).abs() < 1e-9);
        assert!(out.r_final.unwrap() <= 1e-4);
    }
}
