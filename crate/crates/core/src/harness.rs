//! Monte Carlo benchmark runner, convergence tracer and brute-force oracle.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{equal_power_outcome, pso_optimize, rzf_rate, PsoConfig};
use crate::channel::{
    coupling_input_matrix, estimate_channel, sample_rayleigh, snr_from_db, Channel, CsiModel,
    PrecoderKind,
};
use crate::error::{Error, Result};
use crate::lattice::{
    independent_minima_bruteforce, IntegerMatrix, LatticeBasis, Lll, DEFAULT_DELTA,
};
use crate::optimizer::{
    alternating_optimize_with, d_to_a, gamma_normalize, mcn_sps, ra_trace, AoConfig,
    ConvergenceFlag, CouplingMatrix, McnSpsConfig, PowerVector, Problem, RaConfig, RaTrace,
    SolveOutcome,
};
use crate::rate::{sum_rate_high_snr, trace_objective, waterfilling_upper_bound};

/// Methods the benchmark can run. `WaterFilling` rows are always emitted
/// and need not be listed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "MCNSPS")]
    McnSps,
    #[serde(rename = "AO")]
    Ao,
    EqualPower,
    #[serde(rename = "RZF")]
    Rzf,
    #[serde(rename = "PSO")]
    Pso,
    WaterFilling,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::McnSps => "MCNSPS",
            Method::Ao => "AO",
            Method::EqualPower => "EqualPower",
            Method::Rzf => "RZF",
            Method::Pso => "PSO",
            Method::WaterFilling => "WaterFilling",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidArgument(format!("unknown method '{s}'")))
    }
}

/// Optimizer knobs shared by AO and MCN-SPS.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSettings {
    pub r0: f64,
    pub num_rays: Option<usize>,
    pub eps: f64,
    pub max_iter: usize,
    pub ra_tol: f64,
    pub ra_iter_cap: usize,
    pub ray_resample_cap: usize,
    pub delta: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        let s = McnSpsConfig::default();
        OptimizerSettings {
            r0: s.r0,
            num_rays: s.num_rays,
            eps: s.eps,
            max_iter: s.ao.max_iter,
            ra_tol: s.ao.ra.tol,
            ra_iter_cap: s.ao.ra.iter_cap,
            ray_resample_cap: s.ray_resample_cap,
            delta: s.ao.delta,
        }
    }
}

impl OptimizerSettings {
    pub fn ao(&self) -> AoConfig {
        AoConfig {
            max_iter: self.max_iter,
            ra: RaConfig {
                tol: self.ra_tol,
                iter_cap: self.ra_iter_cap,
            },
            delta: self.delta,
        }
    }

    pub fn mcn_sps(&self, seed: u64) -> McnSpsConfig {
        McnSpsConfig {
            r0: self.r0,
            num_rays: self.num_rays,
            eps: self.eps,
            ray_resample_cap: self.ray_resample_cap,
            seed,
            ao: self.ao(),
            ..McnSpsConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PsoSettings {
    pub max_iter: usize,
    pub swarm: usize,
    pub v_clamp: f64,
}

impl Default for PsoSettings {
    fn default() -> Self {
        let p = PsoConfig::default();
        PsoSettings {
            max_iter: p.max_iter,
            swarm: p.swarm,
            v_clamp: p.v_clamp,
        }
    }
}

fn default_csi() -> CsiModel {
    CsiModel::Perfect
}

fn default_kind() -> PrecoderKind {
    PrecoderKind::Rif
}

fn default_true() -> bool {
    true
}

/// Benchmark description, read from JSON. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub snr_db_list: Vec<f64>,
    pub methods: Vec<Method>,
    pub trials: usize,
    #[serde(default = "default_csi")]
    pub csi: CsiModel,
    #[serde(default = "default_kind")]
    pub kind: PrecoderKind,
    #[serde(default)]
    pub seed: u64,
    /// Under imperfect CSI, optimize with the error-aware coupling input
    /// (`true`) or treat the estimate as exact (`false`).
    #[serde(default = "default_true")]
    pub robust: bool,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
    #[serde(default)]
    pub pso: PsoSettings,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config {
            location: format!("line {}, column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, message: &str| {
            Err(Error::Config {
                location: format!("field '{field}'"),
                message: message.to_string(),
            })
        };
        if self.k == 0 || self.n == 0 {
            return fail("K", "K and N must be at least 1");
        }
        if self.trials == 0 {
            return fail("trials", "at least one trial is required");
        }
        if self.snr_db_list.is_empty() {
            return fail("snr_db_list", "list must not be empty");
        }
        if self.snr_db_list.iter().any(|s| !s.is_finite()) {
            return fail("snr_db_list", "SNR values must be finite");
        }
        if self.methods.is_empty() {
            return fail("methods", "list must not be empty");
        }
        if self.methods.contains(&Method::WaterFilling) {
            return fail("methods", "WaterFilling rows are emitted automatically");
        }
        if self.kind == PrecoderKind::Dif && self.k > self.n {
            return fail("kind", "DIF needs N >= K; use RIF for overloaded systems");
        }
        if let Err(e) = self.csi.validate() {
            return fail("csi", &e.to_string());
        }
        let o = &self.optimizer;
        if !(o.eps > 0.0) || !(o.r0 > o.eps) {
            return fail("optimizer", "need r0 > eps > 0");
        }
        if o.max_iter == 0 || o.ra_iter_cap == 0 || !(o.ra_tol > 0.0) || o.num_rays == Some(0) {
            return fail(
                "optimizer",
                "iteration caps, tolerance and ray count must be positive",
            );
        }
        if !(o.delta > 0.25 && o.delta <= 1.0) {
            return fail("optimizer", "delta must lie in (0.25, 1]");
        }
        if self.pso.swarm == 0 || self.pso.max_iter == 0 || !(self.pso.v_clamp > 0.0) {
            return fail("pso", "swarm, max_iter and v_clamp must be positive");
        }
        Ok(())
    }

    /// `100·K/N`.
    pub fn occupancy(&self) -> f64 {
        100.0 * self.k as f64 / self.n as f64
    }

    pub fn expected_rows(&self) -> usize {
        self.trials * self.snr_db_list.len() * (self.methods.len() + 1)
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub snr_db: f64,
    pub method: Method,
    pub csi: String,
    pub sum_rate_bits: f64,
    /// Rate of the chosen `(A, d)` under the coupling input of the true channel.
    pub sum_rate_true_m: Option<f64>,
    pub objective: Option<f64>,
    pub runtime_ms: f64,
    pub iterations: Option<usize>,
    pub converged_flag: Option<ConvergenceFlag>,
    pub r_final: Option<f64>,
}

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE5_E4B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Channel seed of a trial: `seed XOR splitmix64(trial)`.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed ^ splitmix64(trial as u64)
}

/// Runs `f` on a pool capped by `IFP_THREADS` when that variable is set.
pub fn with_thread_limit<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    match std::env::var("IFP_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
    {
        Some(n) if n > 0 => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        _ => Ok(f()),
    }
}

/// Runs every `(trial, snr, method)` combination plus one water-filling row
/// per `(trial, snr)`. Output is sorted by trial, SNR position and method.
pub fn run_benchmark(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let jobs: Vec<(usize, usize)> = (0..cfg.trials)
        .flat_map(|t| (0..cfg.snr_db_list.len()).map(move |s| (t, s)))
        .collect();
    let batches = with_thread_limit(|| {
        jobs.par_iter()
            .map(|&(t, s)| run_cell(cfg, t, s))
            .collect::<Vec<Result<Vec<TrialRecord>>>>()
    })?;
    let mut records = Vec::with_capacity(cfg.expected_rows());
    for b in batches {
        records.extend(b?);
    }
    let position = |db: f64| {
        cfg.snr_db_list
            .iter()
            .position(|&x| x == db)
            .unwrap_or(usize::MAX)
    };
    records.sort_by(|a, b| {
        (a.trial, position(a.snr_db), a.method).cmp(&(b.trial, position(b.snr_db), b.method))
    });
    Ok(records)
}

fn run_cell(cfg: &ExperimentConfig, trial: usize, snr_index: usize) -> Result<Vec<TrialRecord>> {
    let seed = trial_seed(cfg.seed, trial);
    let snr_db = cfg.snr_db_list[snr_index];
    let rho = snr_from_db(snr_db);
    let h_true = sample_rayleigh(cfg.k, cfg.n, seed);
    let (h_design, design_csi) = if cfg.csi.is_perfect() {
        (h_true.clone(), CsiModel::Perfect)
    } else {
        let est = estimate_channel(&h_true, cfg.csi, splitmix64(seed ^ 0xE57))?;
        (
            est,
            if cfg.robust {
                cfg.csi
            } else {
                CsiModel::Perfect
            },
        )
    };
    let m_design = coupling_input_matrix(&h_design, cfg.kind, rho, design_csi)?;
    let m_true = if cfg.csi.is_perfect() {
        None
    } else {
        Some(coupling_input_matrix(
            &h_true,
            cfg.kind,
            rho,
            CsiModel::Perfect,
        )?)
    };
    let problem = Problem::new(m_design, rho)?;
    let method_seed = splitmix64(seed ^ splitmix64(snr_index as u64 + 1));
    let base = |method: Method| TrialRecord {
        trial,
        seed,
        k: cfg.k,
        n: cfg.n,
        snr_db,
        method,
        csi: cfg.csi.to_string(),
        sum_rate_bits: 0.0,
        sum_rate_true_m: None,
        objective: None,
        runtime_ms: 0.0,
        iterations: None,
        converged_flag: None,
        r_final: None,
    };
    let mut out = Vec::with_capacity(cfg.methods.len() + 1);
    for &method in &cfg.methods {
        let start = Instant::now();
        let mut rec = base(method);
        let solved: Option<SolveOutcome> = match method {
            Method::McnSps => Some(mcn_sps(&problem, &cfg.optimizer.mcn_sps(method_seed))?),
            Method::Ao => Some(alternating_optimize_with(
                &problem,
                &PowerVector::ones(cfg.k),
                &cfg.optimizer.ao(),
                &Lll {
                    delta: cfg.optimizer.delta,
                },
            )?),
            Method::EqualPower => Some(equal_power_outcome(&problem)?),
            Method::Pso => Some(pso_optimize(
                &problem,
                &PsoConfig {
                    max_iter: cfg.pso.max_iter,
                    swarm: cfg.pso.swarm,
                    v_clamp: cfg.pso.v_clamp,
                    seed: method_seed,
                    ..PsoConfig::default()
                },
            )?),
            Method::Rzf => {
                let rate = rzf_rate(&h_design, rho)?;
                rec.sum_rate_bits = rate;
                let id = IntegerMatrix::identity(cfg.k);
                let ones = PowerVector::ones(cfg.k);
                let m_rif =
                    coupling_input_matrix(&h_design, PrecoderKind::Rif, rho, CsiModel::Perfect)?;
                rec.objective = Some(trace_objective(&id, &ones, &m_rif)?);
                if !cfg.csi.is_perfect() {
                    let m_rif_true =
                        coupling_input_matrix(&h_true, PrecoderKind::Rif, rho, CsiModel::Perfect)?;
                    rec.sum_rate_true_m = Some(sum_rate_high_snr(&id, &ones, &m_rif_true, rho)?);
                }
                None
            }
            Method::WaterFilling => None,
        };
        rec.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
        if let Some(sol) = solved {
            rec.sum_rate_bits = sol.sum_rate;
            rec.objective = Some(sol.objective);
            rec.iterations = Some(sol.iterations);
            rec.converged_flag = Some(sol.converged_flag);
            rec.r_final = sol.r_final;
            if let Some(m) = &m_true {
                rec.sum_rate_true_m = Some(sum_rate_high_snr(&sol.a, &sol.d, m, rho)?);
            }
        }
        out.push(rec);
    }
    let start = Instant::now();
    let mut wf = base(Method::WaterFilling);
    wf.sum_rate_bits = waterfilling_upper_bound(&h_true, rho)?;
    wf.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    out.push(wf);
    Ok(out)
}

pub fn write_csv<W: Write>(records: &[TrialRecord], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in records {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(records: &[TrialRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file =
        std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_csv(records, std::io::BufWriter::new(file))
}

/// Reciprocal-iteration telemetry at the `A` chosen for `d_init`, started
/// from `d_init`.
pub fn run_convergence_trace(
    h: &Channel,
    rho: f64,
    kind: PrecoderKind,
    d_init: &PowerVector,
) -> Result<RaTrace> {
    let m = coupling_input_matrix(h, kind, rho, CsiModel::Perfect)?;
    let a = d_to_a(&m, d_init, DEFAULT_DELTA)?;
    let g = CouplingMatrix::from_parts(&a, &m)?;
    ra_trace(&g, d_init, RaConfig::default())
}

/// Half-width of the oracle's log-grid.
pub const ORACLE_LOG_RANGE: f64 = 2.079_441_541_679_835_7; // ln 8
pub const ORACLE_MAX_DIM: usize = 3;

/// Exhaustive reference solve for `K ≤ 3`: a log-uniform grid of `grid`
/// points per free coordinate of `d` (the last coordinate closes the
/// product), and for each grid point the best full-rank integer `A` with
/// entries in `[−a_bound, a_bound]`.
///
/// At fixed `d` the objective is the sum of squared column lengths of
/// `T·D·A`, so taking the shortest independent lattice vectors greedily
/// is exact over the coefficient box.
pub fn run_oracle(m: &DMatrix<f64>, rho: f64, grid: usize, a_bound: i64) -> Result<SolveOutcome> {
    let k = m.nrows();
    if k > ORACLE_MAX_DIM {
        return Err(Error::DimensionTooLarge {
            dim: k,
            max: ORACLE_MAX_DIM,
        });
    }
    if grid < 2 || a_bound < 1 {
        return Err(Error::InvalidArgument(
            "oracle needs grid >= 2 and a_bound >= 1".into(),
        ));
    }
    let problem = Problem::new(m.clone(), rho)?;
    let axis: Vec<f64> = (0..grid)
        .map(|i| -ORACLE_LOG_RANGE + 2.0 * ORACLE_LOG_RANGE * i as f64 / (grid - 1) as f64)
        .collect();
    let free = k - 1;
    let points = grid.pow(free as u32);
    let best = (0..points)
        .into_par_iter()
        .map(|idx| -> Result<(f64, usize, IntegerMatrix, PowerVector)> {
            let mut logs = Vec::with_capacity(k);
            let mut rest = idx;
            for _ in 0..free {
                logs.push(axis[rest % grid]);
                rest /= grid;
            }
            logs.push(-logs.iter().sum::<f64>());
            let x: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
            let d = gamma_normalize(&x)?;
            let basis =
                LatticeBasis::new(problem.factor() * DMatrix::from_diagonal(d.as_vector()))?;
            let vecs = independent_minima_bruteforce(&basis, a_bound)?;
            let a = IntegerMatrix(DMatrix::from_fn(k, k, |i, j| vecs[j].coeffs[i]));
            let objective = vecs.iter().map(|v| v.norm * v.norm).sum();
            Ok((objective, idx, a, d))
        })
        .try_reduce_with(|x, y| Ok(if (y.0, y.1) < (x.0, x.1) { y } else { x }))
        .expect("grid is non-empty")?;
    Ok(problem.outcome(best.2, best.3, points, ConvergenceFlag::FixedPoint))
}

/// Log-grid cell width used by [`run_oracle`].
pub fn oracle_cell_width(grid: usize) -> f64 {
    2.0 * ORACLE_LOG_RANGE / (grid.max(2) - 1) as f64
}
