//! Seeded Monte Carlo sweeps over the number of terminals.
//!
//! Every iteration owns four random streams (channel, demand, initial
//! phase, recovery), all derived from `(base_seed, M, k)`. Variants that
//! share a config differ only in how they schedule, so they see identical
//! channels, demands and initial states.

mod config;
mod output;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use config::{ExperimentConfig, StrategyKind};
pub use output::{emit_csv, parse_csv, write_csv, write_log_csv, StatsRow, CSV_HEADER};

use crate::error::{Error, Result};
use crate::model::{generate_initial_state, DemandProfile, ErasureMatrix};
use crate::protocol::{run_to_completion, NetworkState, RunOutcome};

const STAGE_CHANNEL: u64 = 1;
const STAGE_DEMAND: u64 = 2;
const STAGE_INITIAL: u64 = 3;
const STAGE_RECOVERY: u64 = 4;

/// SplitMix64 finaliser.
pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of iteration `k` at `m` terminals.
pub fn iteration_seed(base_seed: u64, m: usize, k: usize) -> u64 {
    mix64(mix64(mix64(base_seed) ^ m as u64) ^ k as u64)
}

fn stage_rng(seed: u64, stage: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix64(seed ^ stage.wrapping_mul(0xD1B5_4A32_D192_ED03)))
}

/// One realisation: sample the channel and demand, run the initial phase,
/// then recover.
pub fn run_iteration(cfg: &ExperimentConfig, m: usize, k: usize) -> Result<RunOutcome> {
    let seed = iteration_seed(cfg.base_seed, m, k);
    let erasures = ErasureMatrix::sample(
        m,
        cfg.relays,
        cfg.bs_tn,
        cfg.bs_rn,
        cfg.rn_tn,
        &mut stage_rng(seed, STAGE_CHANNEL),
    );
    let demand = DemandProfile::sample(
        m,
        cfg.n_packets,
        cfg.demand_fraction,
        &mut stage_rng(seed, STAGE_DEMAND),
    )?;
    let sfm = generate_initial_state(
        m,
        cfg.n_packets,
        cfg.relays,
        &demand,
        &erasures,
        &mut stage_rng(seed, STAGE_INITIAL),
    )?;
    let state = NetworkState::new(sfm, erasures, cfg.topology)?;
    run_to_completion(state, &cfg.protocol(), &mut stage_rng(seed, STAGE_RECOVERY))
}

/// All iterations at `m` terminals, in iteration order.
pub fn run_cell(cfg: &ExperimentConfig, m: usize) -> Result<Vec<RunOutcome>> {
    cfg.validate()?;
    (0..cfg.iterations)
        .into_par_iter()
        .map(|k| run_iteration(cfg, m, k))
        .collect()
}

/// Mean, sample standard deviation and 95% half-width of `delays`.
pub fn summarize(delays: &[u64]) -> (f64, f64, f64) {
    let n = delays.len();
    if n == 0 {
        return (0.0, 0.0, 0.0);
    }
    let mean = delays.iter().sum::<u64>() as f64 / n as f64;
    let sd = if n > 1 {
        let ss: f64 = delays.iter().map(|&d| (d as f64 - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    (mean, sd, 1.96 * sd / (n as f64).sqrt())
}

pub fn stats_row(cfg: &ExperimentConfig, m: usize, outcomes: &[RunOutcome]) -> StatsRow {
    let delays: Vec<u64> = outcomes.iter().map(|o| o.completion_delay).collect();
    let (mean, stddev, ci95) = summarize(&delays);
    StatsRow {
        m,
        topology: cfg.topology,
        flavor: cfg.flavor,
        strategy: cfg.strategy,
        solver: cfg.solver,
        mean_cd: mean,
        stddev,
        ci95,
        iterations: outcomes.len(),
    }
}

/// One stats row per entry of the M sweep.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<StatsRow>> {
    cfg.validate()?;
    cfg.m_sweep
        .iter()
        .map(|&m| Ok(stats_row(cfg, m, &run_cell(cfg, m)?)))
        .collect()
}

/// Runs each strategy on identical iteration seeds; one row per strategy
/// per M, grouped by M.
pub fn compare_strategies(
    cfg: &ExperimentConfig,
    strategies: &[StrategyKind],
) -> Result<Vec<StatsRow>> {
    if strategies.is_empty() {
        return Err(Error::Config("strategy list is empty".into()));
    }
    cfg.validate()?;
    let mut rows = Vec::with_capacity(cfg.m_sweep.len() * strategies.len());
    for &m in &cfg.m_sweep {
        for &strategy in strategies {
            let variant = ExperimentConfig {
                strategy,
                ..cfg.clone()
            };
            rows.push(stats_row(&variant, m, &run_cell(&variant, m)?));
        }
    }
    Ok(rows)
}

/// Runs `f` on a pool of `workers` threads (0 means rayon's default).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}
