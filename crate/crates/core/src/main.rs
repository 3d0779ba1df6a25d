use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use idnc::graph::Flavor;
use idnc::protocol::Topology;
use idnc::sim::{
    compare_strategies, emit_csv, run_cell, stats_row, with_workers, write_log_csv,
    ExperimentConfig, StrategyKind,
};
use idnc::solver::SolverKind;
use idnc::{selftest, Error, Result};

#[derive(Parser)]
#[command(name = "idnc-sim", version, about = "IDNC relay-assisted recovery simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep M for one variant and print completion-delay statistics.
    Run(RunArgs),
    /// Run several weighting strategies on identical seeds.
    Compare(CompareArgs),
    /// Quick invariant checks.
    Selftest,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_parser = parse::<Topology>)]
    topology: Option<Topology>,
    #[arg(long, value_parser = parse::<Flavor>)]
    flavor: Option<Flavor>,
    #[arg(long, value_parser = parse::<SolverKind>)]
    solver: Option<SolverKind>,
    #[arg(long, value_parser = parse::<StrategyKind>)]
    strategy: Option<StrategyKind>,
    #[arg(long)]
    worlt_n: Option<u32>,
    /// Also write every transmission of every run to this CSV.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated: worlt, unit, delivery, popularity.
    #[arg(long, value_delimiter = ',', value_parser = parse::<StrategyKind>)]
    strategies: Vec<StrategyKind>,
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn load(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.base_seed = seed;
    }
    if let Some(n) = common.iterations {
        cfg.iterations = n;
    }
    Ok(cfg)
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = load(&args.common)?;
    if let Some(t) = args.topology {
        cfg.topology = t;
    }
    if let Some(f) = args.flavor {
        cfg.flavor = f;
    }
    if let Some(s) = args.solver {
        cfg.solver = s;
    }
    if let Some(s) = args.strategy {
        cfg.strategy = s;
    }
    if let Some(n) = args.worlt_n {
        cfg.worlt_n = n;
    }
    cfg.validate()?;

    let mut log = match &args.log {
        Some(path) => Some(BufWriter::new(File::create(path)?)),
        None => None,
    };
    let mut rows = Vec::with_capacity(cfg.m_sweep.len());
    for &m in &cfg.m_sweep {
        let outcomes = with_workers(args.common.workers, || run_cell(&cfg, m))??;
        if let Some(w) = log.as_mut() {
            let runs: Vec<(String, &[_])> = outcomes
                .iter()
                .enumerate()
                .map(|(k, o)| (format!("M{m}-k{k}"), o.log.as_slice()))
                .collect();
            write_log_csv(&mut *w, &runs)?;
        }
        let fallbacks: u64 = outcomes.iter().map(|o| o.fallbacks).sum();
        if fallbacks > 0 {
            eprintln!("M={m}: exact solver fell back to MVS {fallbacks} times");
        }
        rows.push(stats_row(&cfg, m, &outcomes));
    }
    if let Some(mut w) = log {
        w.flush()?;
    }
    emit(&args.common.out, &emit_csv(&rows))
}

fn compare(args: CompareArgs) -> Result<()> {
    let cfg = load(&args.common)?;
    let strategies = if args.strategies.is_empty() {
        StrategyKind::ALL.to_vec()
    } else {
        args.strategies
    };
    let rows = with_workers(args.common.workers, || compare_strategies(&cfg, &strategies))??;
    emit(&args.common.out, &emit_csv(&rows))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Compare(a) => compare(a),
        Command::Selftest => {
            let report = selftest::run_all();
            for check in &report {
                println!("{check}");
            }
            if report.iter().all(|c| c.passed) {
                Ok(())
            } else {
                Err(Error::ProtocolInvariant("selftest failed".into()))
            }
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
