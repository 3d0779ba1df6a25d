//! Independent oracles shared by the integration tests. Nothing here calls
//! the library's graph or solver code.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, VecDeque};

use idnc::{Cell, Flavor, NodeId, PacketId, StateFeedbackMatrix};
use proptest::prelude::*;

/// Feedback matrices up to the given dimensions.
pub fn sfm_strategy(
    max_terminals: usize,
    max_packets: usize,
    max_relays: usize,
) -> impl Strategy<Value = StateFeedbackMatrix> {
    (1..=max_terminals, 1..=max_packets, 0..=max_relays).prop_flat_map(|(m, n, r)| {
        (
            prop::collection::vec(prop::collection::vec(-1i8..=1, n), m),
            prop::collection::vec(prop::collection::vec(prop_oneof![Just(0i8), Just(-1i8)], n), r),
        )
            .prop_map(|(t, rl)| StateFeedbackMatrix::from_codes(&t, &rl).unwrap())
    })
}

/// One oracle vertex: (node, packet, wanted).
pub type OVertex = (NodeId, usize, bool);

fn lacks(sfm: &StateFeedbackMatrix, node: NodeId, j: usize) -> bool {
    sfm.cell(node, PacketId(j)).unwrap() != Cell::Has
}

pub fn population(sfm: &StateFeedbackMatrix, include_relays: bool) -> Vec<NodeId> {
    let mut nodes: Vec<NodeId> = (0..sfm.terminals()).map(NodeId::Terminal).collect();
    if include_relays {
        nodes.extend((0..sfm.relays()).map(NodeId::Relay));
    }
    nodes
}

/// Vertices straight from the definition: one per lacked packet.
pub fn oracle_vertices(
    sfm: &StateFeedbackMatrix,
    include_relays: bool,
    sender_has: Option<&BTreeSet<PacketId>>,
) -> Vec<OVertex> {
    let mut out = Vec::new();
    for node in population(sfm, include_relays) {
        for j in 0..sfm.packets() {
            if sender_has.is_some_and(|h| !h.contains(&PacketId(j))) {
                continue;
            }
            match sfm.cell(node, PacketId(j)).unwrap() {
                Cell::Has => {}
                Cell::Wants => out.push((node, j, true)),
                Cell::LacksUnwanted => out.push((node, j, false)),
            }
        }
    }
    out
}

/// Edge condition checked pair by pair from the cell grid.
pub fn oracle_adjacent(
    sfm: &StateFeedbackMatrix,
    flavor: Flavor,
    include_relays: bool,
    a: OVertex,
    b: OVertex,
) -> bool {
    let ((i, j, _), (k, l, _)) = (a, b);
    if i == k {
        return false;
    }
    if j == l {
        return true;
    }
    let c2 = !lacks(sfm, k, j) && !lacks(sfm, i, l);
    match flavor {
        Flavor::Generalized => c2,
        Flavor::Strict => {
            c2 && !population(sfm, include_relays)
                .into_iter()
                .any(|x| lacks(sfm, x, j) && lacks(sfm, x, l))
        }
    }
}

pub fn oracle_edges(
    sfm: &StateFeedbackMatrix,
    flavor: Flavor,
    include_relays: bool,
    sender_has: Option<&BTreeSet<PacketId>>,
) -> BTreeSet<((NodeId, usize), (NodeId, usize))> {
    let vs = oracle_vertices(sfm, include_relays, sender_has);
    let mut edges = BTreeSet::new();
    for (x, &a) in vs.iter().enumerate() {
        for &b in &vs[x + 1..] {
            if oracle_adjacent(sfm, flavor, include_relays, a, b) {
                let (p, q) = ((a.0, a.1), (b.0, b.1));
                edges.insert(if p < q { (p, q) } else { (q, p) });
            }
        }
    }
    edges
}

/// Heaviest vertex subset whose members are pairwise adjacent.
pub fn brute_force_max_weight(n: usize, adjacent: impl Fn(usize, usize) -> bool, w: &[f64]) -> f64 {
    assert!(n <= 20);
    let mut best = 0.0f64;
    'subsets: for mask in 0u32..(1 << n) {
        let members: Vec<usize> = (0..n).filter(|&i| mask >> i & 1 == 1).collect();
        for (x, &a) in members.iter().enumerate() {
            for &b in &members[x + 1..] {
                if !adjacent(a, b) {
                    continue 'subsets;
                }
            }
        }
        best = best.max(members.iter().map(|&i| w[i]).sum());
    }
    best
}

/// Unknown packets of `payload` for a receiver lacking `lacked`.
pub fn unknowns(payload: &BTreeSet<PacketId>, lacked: &BTreeSet<PacketId>) -> usize {
    payload.intersection(lacked).count()
}

/// Decoding rule applied to a row of codes: the single unknown packet
/// becomes Has.
pub fn oracle_receive(row: &mut [i8], payload: &BTreeSet<PacketId>) -> Option<usize> {
    let unknown: Vec<usize> = payload.iter().map(|p| p.0).filter(|&j| row[j] != 0).collect();
    if unknown.len() == 1 {
        row[unknown[0]] = 0;
        Some(unknown[0])
    } else {
        None
    }
}

/// Fewest transmissions that serve every terminal when the sender holds
/// the whole frame, nothing is erased and any XOR combination may be sent.
pub fn brute_force_min_schedule(terminal_codes: &[Vec<i8>]) -> usize {
    let n = terminal_codes[0].len();
    assert!(n <= 8);
    let done = |s: &Vec<Vec<i8>>| s.iter().all(|r| r.iter().all(|&c| c != 1));
    let start = terminal_codes.to_vec();
    if done(&start) {
        return 0;
    }
    let mut seen: HashMap<Vec<Vec<i8>>, usize> = HashMap::new();
    seen.insert(start.clone(), 0);
    let mut queue = VecDeque::from([start]);
    while let Some(state) = queue.pop_front() {
        let d = seen[&state];
        for mask in 1u32..(1 << n) {
            let payload: BTreeSet<PacketId> =
                (0..n).filter(|&j| mask >> j & 1 == 1).map(PacketId).collect();
            let mut next = state.clone();
            for row in next.iter_mut() {
                oracle_receive(row, &payload);
            }
            if seen.contains_key(&next) {
                continue;
            }
            if done(&next) {
                return d + 1;
            }
            seen.insert(next.clone(), d + 1);
            queue.push_back(next);
        }
    }
    unreachable!("sending each wanted packet alone always finishes")
}
