//! Two-layer transmission selection: a primary clique first, then the best
//! secondary clique among vertices adjacent to all of it.

use crate::error::{Error, Result};
use crate::graph::{build_graph, clique_to_coded_packet, Clique, CodedPacket, Flavor, Layer};
use crate::model::{ErasureMatrix, NodeId, PacketSet, StateFeedbackMatrix};
use crate::solver::{exact_indices, greedy_indices, SolverKind, DEFAULT_NODE_BUDGET};
use crate::weight::{assign_weights, CliqueScore, SenderErasures, WeightedGraph, WeightingStrategy};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scheduler {
    pub flavor: Flavor,
    pub strategy: WeightingStrategy,
    pub solver: SolverKind,
    /// Search-node budget of the exact solver before it falls back to MVS.
    pub node_budget: u64,
}

impl Scheduler {
    pub fn new(flavor: Flavor, strategy: WeightingStrategy, solver: SolverKind) -> Self {
        Self {
            flavor,
            strategy,
            solver,
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Selection {
    pub primary: Clique,
    pub secondary: Clique,
    pub combined: Clique,
    pub packet: CodedPacket,
    /// Score of the combined clique under the sender's weights.
    pub score: CliqueScore,
    /// Times the exact solver ran out of budget and MVS was used instead.
    pub fallbacks: u32,
}

impl Scheduler {
    fn solve(&self, wg: &WeightedGraph, fallbacks: &mut u32) -> Result<Vec<usize>> {
        match self.solver {
            SolverKind::Greedy => Ok(greedy_indices(wg)),
            SolverKind::Exact => match exact_indices(wg, self.node_budget) {
                Err(Error::BudgetExceeded { .. }) => {
                    *fallbacks += 1;
                    Ok(greedy_indices(wg))
                }
                other => other,
            },
        }
    }

    /// Picks the clique `sender` transmits next.
    pub fn select_transmission_clique(
        &self,
        sfm: &StateFeedbackMatrix,
        erasures: &ErasureMatrix,
        sender: NodeId,
        include_relays: bool,
        sender_has: Option<&PacketSet>,
    ) -> Result<Selection> {
        let links = SenderErasures::from_matrix(erasures, sender)?;
        let g = build_graph(sfm, self.flavor, include_relays, sender_has)?;
        let wg = assign_weights(g, self.strategy, sfm, &links)?;
        let g = wg.graph();

        let primary_idx = g.layer_indices(Layer::Primary);
        if primary_idx.is_empty() {
            return Err(Error::NothingToSend);
        }
        let mut fallbacks = 0;
        let kp: Vec<usize> = self
            .solve(&wg.restrict(&primary_idx), &mut fallbacks)?
            .into_iter()
            .map(|i| primary_idx[i])
            .collect();

        let secondary_idx: Vec<usize> = g
            .layer_indices(Layer::Secondary)
            .into_iter()
            .filter(|&s| kp.iter().all(|&p| g.adjacent(s, p)))
            .collect();
        let ks: Vec<usize> = self
            .solve(&wg.restrict(&secondary_idx), &mut fallbacks)?
            .into_iter()
            .map(|i| secondary_idx[i])
            .collect();

        let mut combined_idx: Vec<usize> = kp.iter().chain(&ks).copied().collect();
        combined_idx.sort_unstable();
        if !g.is_clique(&combined_idx) {
            return Err(Error::ProtocolInvariant(
                "combined clique is not a clique of the full graph".into(),
            ));
        }
        let combined = g.clique_from_indices(&combined_idx);
        let packet = clique_to_coded_packet(&combined, sender)?;
        Ok(Selection {
            primary: g.clique_from_indices(&kp),
            secondary: g.clique_from_indices(&ks),
            score: wg.score(&combined_idx),
            combined,
            packet,
            fallbacks,
        })
    }
}
