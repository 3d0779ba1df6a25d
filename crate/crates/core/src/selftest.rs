//! Fast invariant checks behind the `selftest` command.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{apply_reception, build_graph, CodedPacket, Flavor, Layer};
use crate::model::{Cell, ErasureMatrix, StateFeedbackMatrix};
use crate::protocol::{run_to_completion, NetworkState, ProtocolConfig, Reception, Topology};
use crate::select::Scheduler;
use crate::sim::{emit_csv, run_sweep, ExperimentConfig};
use crate::solver::{exact_score, mvs_greedy, SolverKind};
use crate::weight::{WeightedGraph, WeightingStrategy};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

/// A random feedback matrix with up to the given dimensions. Terminal
/// cells are Has, Wants or LacksUnwanted with equal odds; relay cells are
/// Has or LacksUnwanted.
pub fn random_sfm<R: Rng + ?Sized>(
    rng: &mut R,
    max_terminals: usize,
    max_packets: usize,
    max_relays: usize,
) -> StateFeedbackMatrix {
    let m = rng.gen_range(1..=max_terminals);
    let n = rng.gen_range(1..=max_packets);
    let r = rng.gen_range(0..=max_relays);
    let terminals: Vec<Vec<i8>> = (0..m)
        .map(|_| (0..n).map(|_| rng.gen_range(-1..=1)).collect())
        .collect();
    let relays: Vec<Vec<i8>> = (0..r)
        .map(|_| (0..n).map(|_| if rng.gen_bool(0.5) { 0 } else { -1 }).collect())
        .collect();
    StateFeedbackMatrix::from_codes(&terminals, &relays).expect("generated codes are valid")
}

fn strict_subgraph() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut strict_gap = 0;
    for _ in 0..300 {
        let sfm = random_sfm(&mut rng, 8, 10, 3);
        let g = build_graph(&sfm, Flavor::Generalized, true, None).expect("valid input");
        let s = build_graph(&sfm, Flavor::Strict, true, None).expect("valid input");
        let (ge, se) = (g.edges(), s.edges());
        if !se.is_subset(&ge) {
            return Check {
                name: "strict-subgraph",
                passed: false,
                detail: "a strict edge is missing from the generalized graph".into(),
            };
        }
        if ge.len() > se.len() {
            strict_gap += 1;
        }
    }
    Check {
        name: "strict-subgraph",
        passed: strict_gap > 0,
        detail: format!("300 matrices, {strict_gap} with extra generalized edges"),
    }
}

fn brute_force_max(wg: &WeightedGraph) -> f64 {
    let g = wg.graph();
    let n = g.len();
    let mut best = 0.0f64;
    for mask in 0u32..(1 << n) {
        let idx: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        if g.is_clique(&idx) {
            best = best.max(idx.iter().map(|&i| wg.weight(i).linear).sum());
        }
    }
    best
}

fn solver_parity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut tested = 0;
    while tested < 100 {
        let sfm = random_sfm(&mut rng, 5, 5, 1);
        let g = build_graph(&sfm, Flavor::Generalized, true, None).expect("valid input");
        if g.len() > 12 {
            continue;
        }
        let w: Vec<f64> = (0..g.len()).map(|_| rng.gen_range(1..=9) as f64).collect();
        let wg = WeightedGraph::additive(g, &w).expect("finite weights");
        let exact = exact_score(&wg).expect("small graph").value();
        let greedy = mvs_greedy(&wg);
        let gi = wg.graph().indices_of(&greedy).expect("greedy vertices exist");
        let gw = wg.score(&gi).value();
        let brute = brute_force_max(&wg);
        if (exact - brute).abs() > 1e-9 || gw > exact + 1e-9 || !wg.graph().is_clique(&gi) {
            return Check {
                name: "solver-parity",
                passed: false,
                detail: format!("exact {exact}, brute force {brute}, greedy {gw}"),
            };
        }
        tested += 1;
    }
    Check {
        name: "solver-parity",
        passed: true,
        detail: "100 graphs match brute force".into(),
    }
}

fn decodability() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for run in 0..30 {
        let sfm = random_sfm(&mut rng, 6, 8, 2);
        let er = ErasureMatrix::uniform(sfm.terminals(), sfm.relays(), 0.0).expect("valid");
        let cfg = ProtocolConfig::new(
            Scheduler::new(Flavor::Generalized, WeightingStrategy::worlt(), SolverKind::Exact),
            Topology::MultiRn,
        );
        let state = NetworkState::new(sfm.clone(), er, Topology::MultiRn).expect("valid");
        let out = match run_to_completion(state, &cfg, &mut rng) {
            Ok(o) => o,
            Err(e) => {
                return Check {
                    name: "instant-decodability",
                    passed: false,
                    detail: format!("run {run}: {e}"),
                }
            }
        };
        let mut replay = sfm;
        for rec in &out.log {
            let before = replay.clone();
            let pkt = CodedPacket {
                payload: rec.payload.clone(),
                sender: rec.sender,
            };
            for (row, r) in rec.receptions.iter().enumerate() {
                if *r == Reception::Received {
                    let node = replay.node_at(row);
                    apply_reception(&mut replay, node, &pkt);
                }
            }
            for node in &rec.targeted_primary {
                let row = before.row_of(*node).expect("node exists");
                if replay.wants_count(row) + 1 != before.wants_count(row) {
                    return Check {
                        name: "instant-decodability",
                        passed: false,
                        detail: format!("run {run}, t {}: {node} not served", rec.t),
                    };
                }
            }
        }
    }
    Check {
        name: "instant-decodability",
        passed: true,
        detail: "30 zero-erasure runs".into(),
    }
}

fn vertex_layers() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..200 {
        let sfm = random_sfm(&mut rng, 6, 8, 3);
        let g = build_graph(&sfm, Flavor::Strict, true, None).expect("valid input");
        for v in g.vertices() {
            let cell = sfm.cell(v.node, v.packet).expect("vertex in frame");
            let want = if cell == Cell::Wants { Layer::Primary } else { Layer::Secondary };
            if !cell.lacks() || v.layer != want {
                return Check {
                    name: "vertex-layers",
                    passed: false,
                    detail: format!("vertex {}:{} has cell {cell:?}", v.node, v.packet),
                };
            }
        }
    }
    Check {
        name: "vertex-layers",
        passed: true,
        detail: "200 matrices".into(),
    }
}

fn determinism() -> Check {
    let cfg = ExperimentConfig {
        n_packets: 8,
        m_sweep: vec![3, 6],
        relays: 2,
        topology: Topology::MultiRn,
        iterations: 20,
        ..ExperimentConfig::default()
    };
    let a = run_sweep(&cfg).map(|r| emit_csv(&r));
    let b = run_sweep(&cfg).map(|r| emit_csv(&r));
    let passed = matches!((&a, &b), (Ok(x), Ok(y)) if x == y);
    Check {
        name: "sweep-determinism",
        passed,
        detail: "two identical sweeps".into(),
    }
}

pub fn run_all() -> Vec<Check> {
    vec![
        strict_subgraph(),
        solver_parity(),
        vertex_layers(),
        decodability(),
        determinism(),
    ]
}
