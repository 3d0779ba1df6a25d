//! Vertex weighting strategies and clique scores.
//!
//! Two score models exist. Additive strategies (unit, delivery probability,
//! packet popularity) score a clique by the plain sum of vertex weights,
//! accumulated in fixed point so that the total does not depend on
//! summation order. WoRLT weights `(|W_i| / (1 - p_i))^n` are compared in
//! their large-`n` limit: a clique's score is the descending list of its
//! vertices' log-weights, compared lexicographically, with a longer list
//! winning over its own prefix. Relay vertices weigh a vanishing epsilon:
//! they only break ties between equal terminal lists, more relays first.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::graph::{Clique, IdncGraph};
use crate::model::{ErasureMatrix, NodeId, StateFeedbackMatrix};

/// Default WoRLT exponent.
pub const DEFAULT_WORLT_EXPONENT: u32 = 16;

/// Fixed-point scale for additive scores (2^32 units per unit weight).
const FIXED_SCALE: f64 = 4_294_967_296.0;
/// Largest additive vertex weight that fits the fixed-point range comfortably.
const MAX_ADDITIVE_WEIGHT: f64 = 1.0e18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WeightingStrategy {
    Worlt { exponent: u32 },
    Unit,
    DeliveryProbability,
    PacketPopularity,
}

impl WeightingStrategy {
    pub fn worlt() -> Self {
        WeightingStrategy::Worlt {
            exponent: DEFAULT_WORLT_EXPONENT,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            WeightingStrategy::Worlt { .. } => "worlt",
            WeightingStrategy::Unit => "unit",
            WeightingStrategy::DeliveryProbability => "delivery",
            WeightingStrategy::PacketPopularity => "popularity",
        }
    }

    pub fn objective(self) -> Objective {
        match self {
            WeightingStrategy::Worlt { .. } => Objective::LargeExponent,
            _ => Objective::Additive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Additive,
    LargeExponent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertexWeight {
    /// Linear weight, saturated at `f64::MAX`. Zero for epsilon vertices.
    pub linear: f64,
    /// Natural log of the linear weight; `-inf` for weight zero.
    pub log: f64,
    /// Relay vertex under WoRLT: ranks below every positive terminal weight.
    pub epsilon: bool,
}

impl VertexWeight {
    pub fn linear(w: f64) -> Self {
        Self {
            linear: w,
            log: w.ln(),
            epsilon: false,
        }
    }

    pub fn from_log(log: f64, linear: f64) -> Self {
        Self {
            linear,
            log,
            epsilon: false,
        }
    }

    pub fn epsilon() -> Self {
        Self {
            linear: 0.0,
            log: f64::NEG_INFINITY,
            epsilon: true,
        }
    }

    /// Positive-weight vertex that counts in the large-exponent list.
    pub(crate) fn is_ranked(&self) -> bool {
        !self.epsilon && self.log > f64::NEG_INFINITY
    }

    pub(crate) fn fixed(&self) -> u128 {
        (self.linear * FIXED_SCALE).round() as u128
    }
}

/// Score of a vertex set under one objective. Scores of different
/// objectives are never compared with each other.
#[derive(Debug, Clone, PartialEq)]
pub enum CliqueScore {
    Additive { fixed: u128 },
    LargeExponent { logs: Vec<f64>, relays: usize },
}

impl CliqueScore {
    /// Linear-domain total (saturating); epsilon vertices add nothing.
    pub fn value(&self) -> f64 {
        match self {
            CliqueScore::Additive { fixed } => *fixed as f64 / FIXED_SCALE,
            CliqueScore::LargeExponent { logs, .. } => {
                let total: f64 = logs.iter().map(|l| l.exp()).sum();
                total.min(f64::MAX)
            }
        }
    }
}

/// Lexicographic order of descending log lists; a longer list beats its
/// own prefix. Relay counts break exact ties.
pub(crate) fn cmp_large_exponent(
    a_logs: &[f64],
    a_relays: usize,
    b_logs: &[f64],
    b_relays: usize,
) -> Ordering {
    for (x, y) in a_logs.iter().zip(b_logs) {
        match x.total_cmp(y) {
            Ordering::Equal => {}
            other => return other,
        }
    }
    a_logs
        .len()
        .cmp(&b_logs.len())
        .then(a_relays.cmp(&b_relays))
}

impl Eq for CliqueScore {}

impl PartialOrd for CliqueScore {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for CliqueScore {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (CliqueScore::Additive { fixed: a }, CliqueScore::Additive { fixed: b }) => a.cmp(b),
            (
                CliqueScore::LargeExponent { logs: a, relays: ra },
                CliqueScore::LargeExponent { logs: b, relays: rb },
            ) => cmp_large_exponent(a, *ra, b, *rb),
            (CliqueScore::Additive { .. }, _) => Ordering::Less,
            (CliqueScore::LargeExponent { .. }, _) => Ordering::Greater,
        }
    }
}

/// Erasure probabilities from one sender to each receiving node.
#[derive(Debug, Clone)]
pub struct SenderErasures {
    terminals: Vec<f64>,
    relays: Vec<f64>,
}

impl SenderErasures {
    pub fn new(terminals: Vec<f64>, relays: Vec<f64>) -> Self {
        Self { terminals, relays }
    }

    /// Links of `sender` in `erasures`. Relays do not hear other relays, so
    /// a relay sender has no relay entries.
    pub fn from_matrix(erasures: &ErasureMatrix, sender: NodeId) -> Result<Self> {
        match sender {
            NodeId::BaseStation => Ok(Self::new(
                erasures.bs_tn().to_vec(),
                erasures.bs_rn().to_vec(),
            )),
            NodeId::Relay(h) if h < erasures.relays() => {
                Ok(Self::new(erasures.rn_tn(h).to_vec(), Vec::new()))
            }
            other => Err(Error::Input(format!("{other} cannot send recovery packets"))),
        }
    }

    pub fn get(&self, node: NodeId) -> Option<f64> {
        match node {
            NodeId::Terminal(i) => self.terminals.get(i).copied(),
            NodeId::Relay(h) => self.relays.get(h).copied(),
            NodeId::BaseStation => None,
        }
    }

    fn checked(&self, node: NodeId) -> Result<f64> {
        let p = self
            .get(node)
            .ok_or_else(|| Error::Config(format!("no erasure probability for {node}")))?;
        if (0.0..1.0).contains(&p) {
            Ok(p)
        } else {
            Err(Error::Config(format!(
                "erasure probability {p} for {node} is outside [0, 1)"
            )))
        }
    }
}

#[derive(Debug, Clone)]
pub struct WeightedGraph {
    graph: IdncGraph,
    weights: Vec<VertexWeight>,
    objective: Objective,
}

impl WeightedGraph {
    pub fn new(
        graph: IdncGraph,
        weights: Vec<VertexWeight>,
        objective: Objective,
    ) -> Result<Self> {
        if weights.len() != graph.len() {
            return Err(Error::Input(format!(
                "{} weights for {} vertices",
                weights.len(),
                graph.len()
            )));
        }
        for w in &weights {
            if w.linear.is_nan() || w.linear < 0.0 || w.log.is_nan() {
                return Err(Error::Input(format!("invalid vertex weight {w:?}")));
            }
            if objective == Objective::Additive && w.linear > MAX_ADDITIVE_WEIGHT {
                return Err(Error::Input(format!(
                    "additive weight {} exceeds {MAX_ADDITIVE_WEIGHT:e}",
                    w.linear
                )));
            }
        }
        Ok(Self {
            graph,
            weights,
            objective,
        })
    }

    /// Additive graph from plain linear weights.
    pub fn additive(graph: IdncGraph, weights: &[f64]) -> Result<Self> {
        let weights = weights.iter().map(|&w| VertexWeight::linear(w)).collect();
        Self::new(graph, weights, Objective::Additive)
    }

    pub fn graph(&self) -> &IdncGraph {
        &self.graph
    }

    pub fn weights(&self) -> &[VertexWeight] {
        &self.weights
    }

    pub fn weight(&self, index: usize) -> VertexWeight {
        self.weights[index]
    }

    pub fn objective(&self) -> Objective {
        self.objective
    }

    pub fn len(&self) -> usize {
        self.graph.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graph.is_empty()
    }

    pub fn restrict(&self, keep: &[usize]) -> WeightedGraph {
        WeightedGraph {
            graph: self.graph.subgraph(keep),
            weights: keep.iter().map(|&i| self.weights[i]).collect(),
            objective: self.objective,
        }
    }

    /// Canonical score of a vertex set, independent of the order of `indices`.
    pub fn score(&self, indices: &[usize]) -> CliqueScore {
        match self.objective {
            Objective::Additive => CliqueScore::Additive {
                fixed: indices.iter().map(|&i| self.weights[i].fixed()).sum(),
            },
            Objective::LargeExponent => {
                let mut logs: Vec<f64> = indices
                    .iter()
                    .map(|&i| self.weights[i])
                    .filter(VertexWeight::is_ranked)
                    .map(|w| w.log)
                    .collect();
                logs.sort_by(|a, b| b.total_cmp(a));
                let relays = indices.iter().filter(|&&i| self.weights[i].epsilon).count();
                CliqueScore::LargeExponent { logs, relays }
            }
        }
    }

    pub fn clique_score(&self, clique: &Clique) -> Result<CliqueScore> {
        Ok(self.score(&self.graph.indices_of(clique)?))
    }
}

/// WoRLT log-weight `n * (ln|W| - ln(1 - p))`.
pub fn worlt_log_weight(wants: usize, p: f64, exponent: u32) -> f64 {
    exponent as f64 * ((wants as f64).ln() - (1.0 - p).ln())
}

/// Weights every vertex of `g` for transmission by the sender whose links
/// are `sender_erasures`.
pub fn assign_weights(
    g: IdncGraph,
    strategy: WeightingStrategy,
    sfm: &StateFeedbackMatrix,
    sender_erasures: &SenderErasures,
) -> Result<WeightedGraph> {
    if let WeightingStrategy::Worlt { exponent: 0 } = strategy {
        return Err(Error::Config("WoRLT exponent must be at least 1".into()));
    }
    let mut weights = Vec::with_capacity(g.len());
    for v in g.vertices() {
        let w = match (strategy, v.node) {
            (WeightingStrategy::Worlt { .. }, NodeId::Relay(_)) => VertexWeight::epsilon(),
            (WeightingStrategy::Worlt { exponent }, node) => {
                let p = sender_erasures.checked(node)?;
                let row = sfm
                    .row_of(node)
                    .ok_or_else(|| Error::Input(format!("{node} is not in the feedback matrix")))?;
                match sfm.wants_count(row) {
                    0 => VertexWeight::linear(0.0),
                    wants => {
                        let base = wants as f64 / (1.0 - p);
                        let linear = base.powi(exponent as i32).min(f64::MAX);
                        VertexWeight::from_log(worlt_log_weight(wants, p, exponent), linear)
                    }
                }
            }
            (WeightingStrategy::Unit, _) => VertexWeight::linear(1.0),
            (WeightingStrategy::DeliveryProbability, node) => {
                VertexWeight::linear(1.0 - sender_erasures.checked(node)?)
            }
            (WeightingStrategy::PacketPopularity, _) => {
                VertexWeight::linear(sfm.popularity(v.packet.0) as f64)
            }
        };
        weights.push(w);
    }
    WeightedGraph::new(g, weights, strategy.objective())
}
