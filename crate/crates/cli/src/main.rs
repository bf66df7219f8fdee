use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use ifp_core::baselines::{equal_power_outcome, pso_optimize, PsoConfig};
use ifp_core::channel::{coupling_input_matrix, snr_from_db, Channel, CsiModel, PrecoderKind};
use ifp_core::harness::{
    run_benchmark, run_convergence_trace, run_oracle, with_thread_limit, write_csv_file,
    ExperimentConfig, Method,
};
use ifp_core::lattice::{lll_reduce, LatticeBasis, Lll, DEFAULT_DELTA};
use ifp_core::linalg::{format_matrix, read_matrix};
use ifp_core::optimizer::{
    alternating_optimize_with, mcn_sps, AoConfig, McnSpsConfig, Problem, SolveOutcome,
};
use ifp_core::PowerVector;

#[derive(Parser)]
#[command(name = "ifp", version, about = "Integer-forcing precoder optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// LLL-reduce a basis (columns are basis vectors).
    Lll {
        #[arg(long)]
        basis: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
    },
    /// Optimize (A, d) for one channel and print the result as JSON.
    Optimize {
        #[arg(long)]
        channel: PathBuf,
        #[arg(long)]
        snr_db: f64,
        #[arg(long, default_value = "rif")]
        kind: PrecoderKind,
        /// perfect, mmse:<se2> or ml:<sh2>:<se2>; the channel file is then the estimate.
        #[arg(long, default_value = "perfect")]
        csi: CsiModel,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "MCNSPS")]
        method: Method,
    },
    /// Run a Monte Carlo benchmark described by a JSON config.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Record per-iteration reciprocal-iteration telemetry as CSV.
    Trace {
        #[arg(long)]
        channel: PathBuf,
        #[arg(long)]
        snr_db: f64,
        #[arg(long, default_value = "rif")]
        kind: PrecoderKind,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exhaustive grid/enumeration reference solve for K <= 3.
    Oracle {
        #[arg(long)]
        channel: PathBuf,
        #[arg(long)]
        snr_db: f64,
        #[arg(long, default_value = "rif")]
        kind: PrecoderKind,
        #[arg(long, default_value_t = 61)]
        grid: usize,
        #[arg(long, default_value_t = 2)]
        a_bound: i64,
    },
}

fn load_channel(path: &PathBuf) -> Result<Channel> {
    let m = read_matrix(path)?;
    Ok(Channel::new(m)?)
}

fn outcome_json(out: &SolveOutcome, method: Method, snr_db: f64) -> serde_json::Value {
    json!({
        "method": method.to_string(),
        "snr_db": snr_db,
        "A": out.a.to_rows(),
        "d": out.d.as_slice(),
        "objective": out.objective,
        "sum_rate_bits": out.sum_rate,
        "iterations": out.iterations,
        "inner_iterations": out.inner_iterations,
        "converged_flag": out.converged_flag.to_string(),
        "r_final": out.r_final,
    })
}

fn optimize(problem: &Problem, method: Method, seed: u64) -> Result<SolveOutcome> {
    let k = problem.dim();
    let out = match method {
        Method::McnSps => mcn_sps(
            problem,
            &McnSpsConfig {
                seed,
                ..McnSpsConfig::default()
            },
        )?,
        Method::Ao => alternating_optimize_with(
            problem,
            &PowerVector::ones(k),
            &AoConfig::default(),
            &Lll::default(),
        )?,
        Method::EqualPower => equal_power_outcome(problem)?,
        Method::Pso => pso_optimize(
            problem,
            &PsoConfig {
                seed,
                ..PsoConfig::default()
            },
        )?,
        Method::Rzf | Method::WaterFilling => {
            anyhow::bail!("method {method} does not optimize (A, d); use the benchmark subcommand")
        }
    };
    Ok(out)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Lll { basis, delta } => {
            let g = read_matrix(&basis)?;
            let red = lll_reduce(&LatticeBasis::new(g)?, delta)?;
            println!("# reduced basis");
            print!("{}", format_matrix(&red.reduced));
            println!("# U");
            print!("{}", format_matrix(&red.transform.0));
            println!(
                "# swaps {} size_reductions {}",
                red.swaps, red.size_reductions
            );
        }
        Command::Optimize {
            channel,
            snr_db,
            kind,
            csi,
            seed,
            method,
        } => {
            let h = load_channel(&channel)?;
            let rho = snr_from_db(snr_db);
            let m = coupling_input_matrix(&h, kind, rho, csi)?;
            let problem = Problem::new(m, rho)?;
            let out = with_thread_limit(|| optimize(&problem, method, seed))??;
            println!(
                "{}",
                serde_json::to_string_pretty(&outcome_json(&out, method, snr_db))?
            );
        }
        Command::Benchmark { config, out } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            log::info!(
                "K = {}, N = {} (occupancy {:.0}%), {} trials",
                cfg.k,
                cfg.n,
                cfg.occupancy(),
                cfg.trials
            );
            let records = run_benchmark(&cfg)?;
            write_csv_file(&records, &out)?;
            eprintln!("wrote {} rows to {}", records.len(), out.display());
        }
        Command::Trace {
            channel,
            snr_db,
            kind,
            out,
        } => {
            let h = load_channel(&channel)?;
            let trace = run_convergence_trace(
                &h,
                snr_from_db(snr_db),
                kind,
                &PowerVector::ones(h.users()),
            )?;
            let mut w = csv::Writer::from_path(&out)
                .with_context(|| format!("creating {}", out.display()))?;
            for step in &trace.steps {
                w.serialize(step)?;
            }
            w.flush()?;
            eprintln!("{} steps, {}", trace.steps.len(), trace.flag);
        }
        Command::Oracle {
            channel,
            snr_db,
            kind,
            grid,
            a_bound,
        } => {
            let h = load_channel(&channel)?;
            let rho = snr_from_db(snr_db);
            let m = coupling_input_matrix(&h, kind, rho, CsiModel::Perfect)?;
            let out = with_thread_limit(|| run_oracle(&m, rho, grid, a_bound))??;
            let mut v = outcome_json(&out, Method::McnSps, snr_db);
            v["method"] = json!("oracle");
            println!("{}", serde_json::to_string_pretty(&v)?);
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
