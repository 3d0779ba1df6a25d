mod common;

use std::collections::BTreeSet;

use common::*;
use idnc::protocol::{
    run_step2_multi_rn_transmission, step, Handoff, DEFAULT_ITERATION_CAP,
};
use idnc::{
    check_step1_termination, run_step1_transmission, run_to_completion, ErasureMatrix, Error,
    Flavor, NetworkState, NodeId, PacketId, PacketSet, Phase, ProtocolConfig, Reception,
    RelaySelection, RunOutcome, Scheduler, SolverKind, StateFeedbackMatrix, Topology,
    WeightingStrategy,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cfg(flavor: Flavor, strategy: WeightingStrategy, solver: SolverKind, topology: Topology) -> ProtocolConfig {
    ProtocolConfig::new(Scheduler::new(flavor, strategy, solver), topology)
}

fn worlt(topology: Topology) -> ProtocolConfig {
    cfg(Flavor::Generalized, WeightingStrategy::worlt(), SolverKind::Exact, topology)
}

fn has_of(codes: &[i8]) -> PacketSet {
    codes.iter().enumerate().filter(|(_, &c)| c == 0).map(|(j, _)| PacketId(j)).collect()
}

/// Checks a finished run against a cell-level replay of its own log.
fn audit(initial: &StateFeedbackMatrix, out: &RunOutcome) {
    let mut rows = initial.codes();
    let terminals = initial.terminals();
    let mut handoff_seen = false;
    for (t, rec) in out.log.iter().enumerate() {
        assert_eq!(rec.t, t as u64 + 1);
        let step2 = rec.sender != NodeId::BaseStation;
        if step2 && !handoff_seen {
            handoff_seen = true;
            let h: &Handoff = out.handoff.as_ref().expect("step 2 has a handoff");
            assert_eq!(h.after, t as u64);
            let wanted: PacketSet = rows[..terminals]
                .iter()
                .flat_map(|r| r.iter().enumerate().filter(|(_, &c)| c == 1).map(|(j, _)| PacketId(j)))
                .collect();
            assert_eq!(h.wants_union, wanted);
            let held: PacketSet = rows[terminals..].iter().flat_map(|r| has_of(r)).collect();
            assert!(wanted.is_subset(&held));
        }
        if let NodeId::Relay(h) = rec.sender {
            assert!(rec.payload.is_subset(&has_of(&rows[terminals + h])));
        } else {
            assert!(!handoff_seen, "BS sends after the handoff");
        }
        let mut decoded = Vec::new();
        for (row, r) in rec.receptions.iter().enumerate() {
            let is_relay = row >= terminals;
            match r {
                Reception::NotListening => assert!(step2 && is_relay),
                _ if is_relay => assert!(!step2),
                _ => {}
            }
            if *r == Reception::Received {
                let before = rows[row].clone();
                if let Some(j) = oracle_receive(&mut rows[row], &rec.payload) {
                    decoded.push((initial.node_at(row), PacketId(j)));
                    let lacked: PacketSet = (0..before.len()).filter(|&j| before[j] != 0).map(PacketId).collect();
                    assert_eq!(unknowns(&rec.payload, &lacked), 1);
                }
            }
        }
        assert_eq!(rec.decoded, decoded);
    }
    assert_eq!(rows, out.final_sfm.codes());
    assert!(out.final_sfm.is_complete());
}

#[test]
fn geometric_channel_mean_is_two() {
    let sfm = StateFeedbackMatrix::from_codes(&[[1]], &[[0]]).unwrap();
    let er = ErasureMatrix::new(vec![0.5], vec![0.5], vec![vec![0.5]]).unwrap();
    let c = worlt(Topology::OneRn);
    let runs = 10_000;
    let mut total = 0u64;
    for seed in 0..runs {
        let state = NetworkState::new(sfm.clone(), er.clone(), Topology::OneRn).unwrap();
        assert_eq!(state.phase(), Phase::Step2);
        let out = run_to_completion(state, &c, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        assert_eq!(out.step1_transmissions, 0);
        total += out.completion_delay;
    }
    let mean = total as f64 / runs as f64;
    assert!((mean - 2.0).abs() <= 0.1, "mean {mean}");
}

/// Tiny instances where each terminal wants one packet and the relay holds
/// the whole frame.
fn one_want_instance(rng: &mut ChaCha8Rng) -> Vec<Vec<i8>> {
    let m = rng.gen_range(1..=4);
    let n = rng.gen_range(m..=5);
    let mut packets: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        packets.swap(i, rng.gen_range(0..=i));
    }
    (0..m)
        .map(|i| {
            (0..n)
                .map(|j| if j == packets[i] { 1 } else if rng.gen_bool(0.6) { 0 } else { -1 })
                .collect()
        })
        .collect()
}

/// Each terminal wants one distinct packet and holds every other
/// terminal's wanted packet, so all primary vertices are pairwise adjacent.
fn pairwise_coded_instance(rng: &mut ChaCha8Rng) -> Vec<Vec<i8>> {
    let mut rows = one_want_instance(rng);
    let wanted: Vec<usize> = rows.iter().map(|r| r.iter().position(|&c| c == 1).unwrap()).collect();
    for row in rows.iter_mut() {
        for &w in &wanted {
            if row[w] != 1 {
                row[w] = 0;
            }
        }
    }
    rows
}

fn relay_delay(terminals: &[Vec<i8>], topology: Topology, rng: &mut ChaCha8Rng) -> usize {
    let n = terminals[0].len();
    let sfm = StateFeedbackMatrix::from_codes(terminals, &[vec![0i8; n]]).unwrap();
    let er = ErasureMatrix::uniform(terminals.len(), 1, 0.0).unwrap();
    let state = NetworkState::new(sfm.clone(), er, topology).unwrap();
    let out = run_to_completion(state, &worlt(topology), rng).unwrap();
    audit(&sfm, &out);
    out.completion_delay as usize
}

#[test]
fn pairwise_coded_demand_takes_the_exhaustive_minimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..200 {
        let terminals = pairwise_coded_instance(&mut rng);
        let best = brute_force_min_schedule(&terminals);
        assert_eq!(best, 1);
        for topology in [Topology::OneRn, Topology::MultiRn] {
            assert_eq!(relay_delay(&terminals, topology, &mut rng), best, "case {case}: {terminals:?}");
        }
    }
}

#[test]
fn relay_schedules_are_bounded_by_the_exhaustive_minimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(2025);
    for case in 0..300 {
        let terminals = one_want_instance(&mut rng);
        let best = brute_force_min_schedule(&terminals);
        for topology in [Topology::OneRn, Topology::MultiRn] {
            let d = relay_delay(&terminals, topology, &mut rng);
            assert!(d >= best && d <= terminals.len(), "case {case}: {d} vs {best}, {terminals:?}");
        }
    }
}

#[test]
fn step1_replays_from_the_seeded_stream() {
    // T0 wants 0, T1 wants 1; the relay lacks packet 0 so Step 1 is needed.
    let sfm = StateFeedbackMatrix::from_codes(&[[1, 0, 0, 0], [0, 1, 0, 0]], &[[-1, 0, 0, 0]]).unwrap();
    let er = ErasureMatrix::new(vec![0.4, 0.6], vec![0.3], vec![vec![0.2, 0.1]]).unwrap();
    let seed = 77;
    let mut state = NetworkState::new(sfm.clone(), er, Topology::OneRn).unwrap();
    assert_eq!(state.phase(), Phase::Step1);
    let c = worlt(Topology::OneRn);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while state.phase() != Phase::Complete {
        step(&mut state, &c, &mut rng).unwrap();
    }

    // Hand trace: the three vertices T0:0, T1:1, R0:0 form a triangle, so
    // the BS sends 0+1 until the relay holds packet 0; after that the relay
    // serves whoever still wants something.
    let mut replay = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = sfm.codes();
    let links_bs = [0.4, 0.6, 0.3];
    let links_rn = [0.2, 0.1];
    for rec in state.log() {
        let bs = rec.sender == NodeId::BaseStation;
        let wanting: Vec<usize> = (0..2).filter(|&i| rows[i].contains(&1)).collect();
        assert_eq!(bs, rows[2][0] != 0, "BS sends exactly while the relay lacks packet 0");
        let expect_payload: BTreeSet<PacketId> = wanting.iter().map(|&i| PacketId(i)).collect();
        assert_eq!(rec.payload, expect_payload);
        let listeners = if bs { 3 } else { 2 };
        for row in 0..3 {
            if row >= listeners {
                assert_eq!(rec.receptions[row], Reception::NotListening);
                continue;
            }
            let p = if bs { links_bs[row] } else { links_rn[row] };
            let lost = replay.gen::<f64>() < p;
            assert_eq!(rec.receptions[row], if lost { Reception::Erased } else { Reception::Received });
            if !lost {
                oracle_receive(&mut rows[row], &rec.payload);
            }
        }
    }
    assert_eq!(rows, state.sfm().codes());
}

/// Random multi-relay state already in Step 2: every wanted packet is
/// held by some relay.
fn step2_instance(rng: &mut ChaCha8Rng) -> (StateFeedbackMatrix, ErasureMatrix) {
    let m = rng.gen_range(1..=6);
    let n = rng.gen_range(1..=7);
    let r = rng.gen_range(1..=3);
    let terminals: Vec<Vec<i8>> = (0..m).map(|_| (0..n).map(|_| rng.gen_range(-1..=1)).collect()).collect();
    let mut relays: Vec<Vec<i8>> = (0..r).map(|_| (0..n).map(|_| if rng.gen_bool(0.5) { 0 } else { -1 }).collect()).collect();
    for j in 0..n {
        if terminals.iter().any(|t| t[j] == 1) && relays.iter().all(|h| h[j] != 0) {
            let h = rng.gen_range(0..r);
            relays[h][j] = 0;
        }
    }
    let sfm = StateFeedbackMatrix::from_codes(&terminals, &relays).unwrap();
    let er = ErasureMatrix::new(
        (0..m).map(|_| rng.gen_range(0.0..0.6)).collect(),
        (0..r).map(|_| rng.gen_range(0.0..0.6)).collect(),
        (0..r).map(|_| (0..m).map(|_| rng.gen_range(0.0..0.6)).collect()).collect(),
    )
    .unwrap();
    (sfm, er)
}

/// Large-exponent score of a vertex set from the weight formula alone.
fn worlt_key(sfm: &StateFeedbackMatrix, er: &ErasureMatrix, h: usize, nodes: &[NodeId]) -> Vec<f64> {
    let mut logs: Vec<f64> = nodes
        .iter()
        .filter_map(|&node| match node {
            NodeId::Terminal(i) => {
                let w = sfm.wants_count(i);
                (w > 0).then(|| 16.0 * ((w as f64).ln() - (1.0 - er.rn_tn(h)[i]).ln()))
            }
            _ => None,
        })
        .collect();
    logs.sort_by(|a, b| b.total_cmp(a));
    logs
}

fn lex_greater(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        if x != y {
            return x > y;
        }
    }
    a.len() > b.len()
}

#[test]
fn chosen_relay_matches_recomputed_argmax() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut checked = 0;
    while checked < 300 {
        let (sfm, er) = step2_instance(&mut rng);
        let mut state = NetworkState::new(sfm.clone(), er.clone(), Topology::MultiRn).unwrap();
        if state.phase() != Phase::Step2 {
            continue;
        }
        let strategy = if checked % 2 == 0 { WeightingStrategy::worlt() } else { WeightingStrategy::Unit };
        let c = cfg(Flavor::Generalized, strategy, SolverKind::Exact, Topology::MultiRn);
        run_step2_multi_rn_transmission(&mut state, &c, &mut rng).unwrap();
        let sender = state.log()[0].sender;

        let mut best: Option<(usize, Vec<f64>, f64)> = None;
        for h in 0..sfm.relays() {
            let has = sfm.has_set(NodeId::Relay(h));
            let sel = match c.scheduler.select_transmission_clique(&sfm, &er, NodeId::Relay(h), false, Some(&has)) {
                Ok(s) => s,
                Err(Error::NothingToSend) => continue,
                Err(e) => panic!("{e}"),
            };
            let nodes = sel.combined.nodes();
            let key = worlt_key(&sfm, &er, h, &nodes);
            let delivery: f64 = nodes
                .iter()
                .map(|n| match n {
                    NodeId::Terminal(i) => 1.0 - er.rn_tn(h)[*i],
                    _ => 0.0,
                })
                .sum();
            let better = match &best {
                None => true,
                Some((_, bk, bd)) => match c.rn_selection {
                    RelaySelection::HighestCliqueWeight => lex_greater(&key, bk),
                    RelaySelection::DeliveryWeighted => delivery > *bd,
                },
            };
            if better {
                best = Some((h, key, delivery));
            }
        }
        assert_eq!(sender, NodeId::Relay(best.unwrap().0));
        checked += 1;
    }
}

#[test]
fn two_relays_first_clique_heavier_wins() {
    // Relay 0 holds both wanted packets, relay 1 only one of them.
    let sfm = StateFeedbackMatrix::from_codes(&[[1, 0], [0, 1]], &[[0, 0], [-1, 0]]).unwrap();
    let er = ErasureMatrix::new(vec![0.3, 0.3], vec![0.1, 0.1], vec![vec![0.1, 0.1], vec![0.1, 0.1]]).unwrap();
    for strategy in [WeightingStrategy::worlt(), WeightingStrategy::Unit] {
        let mut state = NetworkState::new(sfm.clone(), er.clone(), Topology::MultiRn).unwrap();
        let c = cfg(Flavor::Generalized, strategy, SolverKind::Exact, Topology::MultiRn);
        run_step2_multi_rn_transmission(&mut state, &c, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(state.log()[0].sender, NodeId::Relay(0));
        assert_eq!(state.log()[0].payload, [PacketId(0), PacketId(1)].into());
    }
}

#[test]
fn wrong_phase_is_refused() {
    let sfm = StateFeedbackMatrix::from_codes(&[[1, 0]], &[[0, 0]]).unwrap();
    let mut state = NetworkState::new(sfm, ErasureMatrix::uniform(1, 1, 0.2).unwrap(), Topology::OneRn).unwrap();
    assert_eq!(state.phase(), Phase::Step2);
    let err = run_step1_transmission(&mut state, &worlt(Topology::OneRn), &mut ChaCha8Rng::seed_from_u64(0));
    assert!(matches!(err, Err(Error::WrongPhase { expected: Phase::Step1, found: Phase::Step2 })));
}

#[test]
fn random_runs_complete_and_pass_the_audit() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..400 {
        let sfm = idnc::selftest::random_sfm(&mut rng, 6, 8, 3);
        let topology = if sfm.relays() <= 1 && case % 2 == 0 { Topology::OneRn } else { Topology::MultiRn };
        let (m, r) = (sfm.terminals(), sfm.relays());
        let er = ErasureMatrix::new(
            (0..m).map(|_| rng.gen_range(0.0..0.9)).collect(),
            (0..r).map(|_| rng.gen_range(0.0..0.9)).collect(),
            (0..r).map(|_| (0..m).map(|_| rng.gen_range(0.0..0.9)).collect()).collect(),
        )
        .unwrap();
        let strategy = [
            WeightingStrategy::worlt(),
            WeightingStrategy::Unit,
            WeightingStrategy::DeliveryProbability,
            WeightingStrategy::PacketPopularity,
        ][case % 4];
        let flavor = if case % 3 == 0 { Flavor::Strict } else { Flavor::Generalized };
        let solver = if case % 5 == 0 { SolverKind::Greedy } else { SolverKind::Exact };
        let c = cfg(flavor, strategy, solver, topology);
        let state = NetworkState::new(sfm.clone(), er, topology).unwrap();
        let out = run_to_completion(state, &c, &mut rng).unwrap();
        assert!(out.completion_delay < DEFAULT_ITERATION_CAP);
        audit(&sfm, &out);
        if let Some(h) = &out.handoff {
            for (k, has) in h.relay_has.iter().enumerate() {
                assert_eq!(*has, out.final_sfm.has_set(NodeId::Relay(k)), "relays are frozen in Step 2");
            }
        }
    }
}

#[test]
fn one_relay_multi_rn_reproduces_one_rn() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..100 {
        let mut sfm = idnc::selftest::random_sfm(&mut rng, 6, 8, 1);
        if sfm.relays() == 0 {
            sfm = StateFeedbackMatrix::from_codes(&sfm.codes(), &[vec![-1i8; sfm.packets()]]).unwrap();
        }
        let m = sfm.terminals();
        let er = ErasureMatrix::new(
            (0..m).map(|_| rng.gen_range(0.0..0.7)).collect(),
            vec![rng.gen_range(0.0..0.7)],
            vec![(0..m).map(|_| rng.gen_range(0.0..0.7)).collect()],
        )
        .unwrap();
        let seed = rng.gen();
        let run = |topology| {
            let state = NetworkState::new(sfm.clone(), er.clone(), topology).unwrap();
            run_to_completion(state, &worlt(topology), &mut ChaCha8Rng::seed_from_u64(seed)).unwrap().log
        };
        assert_eq!(run(Topology::OneRn), run(Topology::MultiRn));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn termination_check_matches_set_algebra(sfm in sfm_strategy(5, 6, 3)) {
        let wanted = idnc::wants_union(&sfm);
        let relays: Vec<PacketSet> = (0..sfm.relays()).map(|h| sfm.has_set(NodeId::Relay(h))).collect();
        let union: PacketSet = relays.iter().flatten().copied().collect();
        let (one, multi) = if wanted.is_empty() {
            (Phase::Complete, Phase::Complete)
        } else {
            (
                if relays.iter().any(|h| wanted.is_subset(h)) { Phase::Step2 } else { Phase::Step1 },
                if wanted.is_subset(&union) { Phase::Step2 } else { Phase::Step1 },
            )
        };
        prop_assert_eq!(check_step1_termination(&sfm, Topology::OneRn), one);
        prop_assert_eq!(check_step1_termination(&sfm, Topology::MultiRn), multi);
    }

    #[test]
    fn zero_erasure_runs_serve_every_target(sfm in sfm_strategy(6, 8, 3), seed in any::<u64>(), strict in any::<bool>()) {
        let er = ErasureMatrix::uniform(sfm.terminals(), sfm.relays(), 0.0).unwrap();
        let flavor = if strict { Flavor::Strict } else { Flavor::Generalized };
        let c = cfg(flavor, WeightingStrategy::worlt(), SolverKind::Exact, Topology::MultiRn);
        let out = run_to_completion(NetworkState::new(sfm.clone(), er, Topology::MultiRn).unwrap(), &c, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let mut rows = sfm.codes();
        for rec in &out.log {
            let before: Vec<usize> = rows.iter().map(|r| r.iter().filter(|&&c| c == 1).count()).collect();
            for (row, r) in rec.receptions.iter().enumerate() {
                if *r == Reception::Received {
                    oracle_receive(&mut rows[row], &rec.payload);
                }
            }
            for node in &rec.targeted_primary {
                let row = sfm.row_of(*node).unwrap();
                let after = rows[row].iter().filter(|&&c| c == 1).count();
                prop_assert_eq!(after + 1, before[row]);
            }
        }
    }
}
