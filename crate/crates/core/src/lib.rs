//! Instantly decodable network coding recovery for relay-assisted multicast.
//!
//! A base station broadcasts a frame of packets to terminals with help from
//! decode-and-forward relays. After the initial broadcast, lost packets are
//! recovered with XOR combinations picked as cliques of an IDNC graph, first
//! by the base station and then by the relays.

pub mod error;
pub mod graph;
pub mod model;
pub mod protocol;
pub mod select;
pub mod selftest;
pub mod sim;
pub mod solver;
pub mod weight;

pub use error::{Error, Result};
pub use graph::{
    apply_reception, build_graph, clique_to_coded_packet, induced_secondary_subgraph, Clique,
    CodedPacket, Flavor, IdncGraph, Layer, Vertex,
};
pub use model::{
    generate_initial_state, wants_union, Cell, DemandProfile, ErasureMatrix, NodeId, PacketId,
    PacketSet, ProbabilityRange, StateFeedbackMatrix,
};
pub use protocol::{
    check_step1_termination, run_step1_transmission, run_step2_multi_rn, run_step2_one_rn,
    run_to_completion, NetworkState, Phase, ProtocolConfig, Reception, RelaySelection,
    RunOutcome, Topology, TransmissionRecord,
};
pub use select::{Scheduler, Selection};
pub use solver::{mvs_greedy, mwc_exact, mwc_exact_with_budget, SolverKind};
pub use weight::{assign_weights, CliqueScore, SenderErasures, WeightedGraph, WeightingStrategy};
