//! Maximum weight clique solvers.
//!
//! `mwc_exact` is a branch and bound over a weight-sorted vertex order,
//! pruned with greedy colouring bounds: a clique takes at most one vertex
//! per colour class, so the class maxima bound any extension. Additive
//! scores use the prefix-bound scheme from MCQ-style maximum clique
//! search; large-exponent scores branch on the heaviest candidate first,
//! which makes the first dive the lexicographic greedy solution.
//!
//! `mvs_greedy` repeatedly takes the candidate maximising its own weight
//! times the weight of its closed neighbourhood among the candidates.

use std::cmp::Ordering;

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Clique;
use crate::weight::{cmp_large_exponent, CliqueScore, Objective, VertexWeight, WeightedGraph};

pub const DEFAULT_NODE_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SolverKind {
    #[serde(rename = "mwc")]
    Exact,
    #[serde(rename = "mvs")]
    Greedy,
}

impl SolverKind {
    pub fn label(self) -> &'static str {
        match self {
            SolverKind::Exact => "mwc",
            SolverKind::Greedy => "mvs",
        }
    }
}

pub fn mwc_exact(wg: &WeightedGraph) -> Result<Clique> {
    mwc_exact_with_budget(wg, DEFAULT_NODE_BUDGET)
}

pub fn mwc_exact_with_budget(wg: &WeightedGraph, budget: u64) -> Result<Clique> {
    let idx = exact_indices(wg, budget)?;
    Ok(wg.graph().clique_from_indices(&idx))
}

pub fn mvs_greedy(wg: &WeightedGraph) -> Clique {
    wg.graph().clique_from_indices(&greedy_indices(wg))
}

/// Greedy closed-neighbourhood search. Returns indices in selection order.
pub(crate) fn greedy_indices(wg: &WeightedGraph) -> Vec<usize> {
    let g = wg.graph();
    let mut cand = FixedBitSet::with_capacity(g.len());
    cand.insert_range(..);
    let mut chosen = Vec::new();
    while cand.count_ones(..) > 0 {
        let mut best: Option<(usize, (u8, f64))> = None;
        for v in cand.ones() {
            let score = greedy_score(wg, v, &cand);
            let better = match &best {
                None => true,
                Some((_, b)) => cmp_greedy(&score, b) == Ordering::Greater,
            };
            if better {
                best = Some((v, score));
            }
        }
        let (v, _) = best.expect("candidate set is nonempty");
        chosen.push(v);
        cand.intersect_with(g.neighbors(v));
    }
    chosen
}

fn cmp_greedy(a: &(u8, f64), b: &(u8, f64)) -> Ordering {
    a.0.cmp(&b.0).then(a.1.total_cmp(&b.1))
}

/// (tier, score). Additive scores live in tier 0. Large-exponent scores
/// rank positive terminals, then epsilon relays, then zero-weight vertices.
fn greedy_score(wg: &WeightedGraph, v: usize, cand: &FixedBitSet) -> (u8, f64) {
    let g = wg.graph();
    let closed = g.neighbors(v).intersection(cand).chain(std::iter::once(v));
    let own = wg.weight(v);
    match wg.objective() {
        Objective::Additive => {
            let sum: f64 = closed.map(|u| wg.weight(u).linear).sum();
            (0, own.linear * sum)
        }
        Objective::LargeExponent => {
            if own.is_ranked() {
                let logs: Vec<f64> = closed
                    .map(|u| wg.weight(u))
                    .filter(VertexWeight::is_ranked)
                    .map(|w| w.log)
                    .collect();
                (2, own.log + log_sum_exp(&logs))
            } else if own.epsilon {
                let relays = closed.filter(|&u| wg.weight(u).epsilon).count();
                (1, relays as f64)
            } else {
                (0, 0.0)
            }
        }
    }
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Exact maximum weight clique, as indices into `wg`'s graph.
pub(crate) fn exact_indices(wg: &WeightedGraph, budget: u64) -> Result<Vec<usize>> {
    if wg.is_empty() {
        return Ok(Vec::new());
    }
    let g = wg.graph();
    let n = g.len();

    // Search order: heaviest first, then higher degree, then identity.
    let degree: Vec<usize> = (0..n).map(|i| g.degree(i)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    let key = |i: usize| {
        let w = wg.weight(i);
        let tier = if w.is_ranked() {
            2
        } else if w.epsilon {
            1
        } else {
            0
        };
        (tier, w.log, w.fixed())
    };
    order.sort_by(|&a, &b| {
        let (ta, la, fa) = key(a);
        let (tb, lb, fb) = key(b);
        let by_weight = match wg.objective() {
            Objective::Additive => fb.cmp(&fa),
            Objective::LargeExponent => tb.cmp(&ta).then(lb.total_cmp(&la)),
        };
        by_weight
            .then(degree[b].cmp(&degree[a]))
            .then(a.cmp(&b))
    });
    let mut pos = vec![0usize; n];
    for (p, &v) in order.iter().enumerate() {
        pos[v] = p;
    }
    let adj: Vec<FixedBitSet> = order
        .iter()
        .map(|&v| {
            let mut row = FixedBitSet::with_capacity(n);
            g.neighbors(v).ones().for_each(|u| row.insert(pos[u]));
            row
        })
        .collect();
    let weights: Vec<VertexWeight> = order.iter().map(|&v| wg.weight(v)).collect();

    // Incumbent: the greedy clique.
    let greedy: Vec<usize> = greedy_indices(wg).into_iter().map(|v| pos[v]).collect();

    let mut all = FixedBitSet::with_capacity(n);
    all.insert_range(..);
    let best = match wg.objective() {
        Objective::Additive => {
            let mut s = AdditiveSearch {
                adj: &adj,
                fixed: weights.iter().map(VertexWeight::fixed).collect(),
                best_w: 0,
                best: Vec::new(),
                nodes: 0,
                budget,
            };
            s.best_w = greedy.iter().map(|&v| s.fixed[v]).sum();
            s.best = greedy;
            s.expand(&mut Vec::new(), 0, all)?;
            s.best
        }
        Objective::LargeExponent => {
            let mut s = LexSearch {
                adj: &adj,
                weights: &weights,
                relay_mask: {
                    let mut m = FixedBitSet::with_capacity(n);
                    (0..n).filter(|&i| weights[i].epsilon).for_each(|i| m.insert(i));
                    m
                },
                best_logs: Vec::new(),
                best_relays: 0,
                best: Vec::new(),
                nodes: 0,
                budget,
            };
            s.set_best(&greedy);
            s.expand(&mut Vec::new(), &mut Vec::new(), 0, all)?;
            s.best
        }
    };
    let mut out: Vec<usize> = best.into_iter().map(|p| order[p]).collect();
    out.sort_unstable();
    debug_assert!(g.is_clique(&out));
    Ok(out)
}

/// Greedy colouring of `cand` in index order. Returns the vertices grouped
/// class by class and, for each class, its first (heaviest) vertex.
fn colour_classes(adj: &[FixedBitSet], cand: &FixedBitSet) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
    let mut rest = cand.clone();
    let mut sequence = Vec::with_capacity(cand.count_ones(..));
    let mut class_of = Vec::with_capacity(sequence.capacity());
    let mut maxima = Vec::new();
    let mut class = 0;
    while let Some(first) = rest.ones().next() {
        maxima.push(first);
        let mut q = rest.clone();
        while let Some(v) = q.ones().next() {
            sequence.push(v);
            class_of.push(class);
            rest.set(v, false);
            q.set(v, false);
            q.difference_with(&adj[v]);
        }
        class += 1;
    }
    (sequence, class_of, maxima)
}

struct AdditiveSearch<'a> {
    adj: &'a [FixedBitSet],
    fixed: Vec<u128>,
    best_w: u128,
    best: Vec<usize>,
    nodes: u64,
    budget: u64,
}

impl AdditiveSearch<'_> {
    fn expand(&mut self, current: &mut Vec<usize>, cur_w: u128, mut cand: FixedBitSet) -> Result<()> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(Error::BudgetExceeded { budget: self.budget });
        }
        let (sequence, class_of, maxima) = colour_classes(self.adj, &cand);
        let mut prefix = Vec::with_capacity(maxima.len());
        let mut acc = 0u128;
        for &m in &maxima {
            acc += self.fixed[m];
            prefix.push(acc);
        }
        for at in (0..sequence.len()).rev() {
            if cur_w + prefix[class_of[at]] <= self.best_w {
                return Ok(());
            }
            let v = sequence[at];
            current.push(v);
            let w = cur_w + self.fixed[v];
            if w > self.best_w {
                self.best_w = w;
                self.best = current.clone();
            }
            let mut next = cand.clone();
            next.intersect_with(&self.adj[v]);
            if next.count_ones(..) > 0 {
                self.expand(current, w, next)?;
            }
            current.pop();
            cand.set(v, false);
        }
        Ok(())
    }
}

struct LexSearch<'a> {
    adj: &'a [FixedBitSet],
    weights: &'a [VertexWeight],
    relay_mask: FixedBitSet,
    best_logs: Vec<f64>,
    best_relays: usize,
    best: Vec<usize>,
    nodes: u64,
    budget: u64,
}

impl LexSearch<'_> {
    fn set_best(&mut self, clique: &[usize]) {
        let mut logs: Vec<f64> = clique
            .iter()
            .map(|&v| self.weights[v])
            .filter(VertexWeight::is_ranked)
            .map(|w| w.log)
            .collect();
        logs.sort_by(|a, b| b.total_cmp(a));
        self.best_relays = clique.iter().filter(|&&v| self.weights[v].epsilon).count();
        self.best_logs = logs;
        self.best = clique.to_vec();
    }

    /// Branches on the heaviest candidate: include it, then exclude it.
    /// Vertices enter `current` in index order, so `logs` stays descending.
    fn expand(
        &mut self,
        current: &mut Vec<usize>,
        logs: &mut Vec<f64>,
        relays: usize,
        mut cand: FixedBitSet,
    ) -> Result<()> {
        let mut bound = Vec::new();
        loop {
            let Some(v) = cand.ones().next() else {
                return Ok(());
            };
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(Error::BudgetExceeded { budget: self.budget });
            }

            let (_, _, maxima) = colour_classes(self.adj, &cand);
            bound.clear();
            bound.extend_from_slice(logs);
            bound.extend(
                maxima
                    .iter()
                    .map(|&m| self.weights[m])
                    .filter(VertexWeight::is_ranked)
                    .map(|w| w.log),
            );
            // Both parts are descending and every class maximum is no
            // heavier than the members of `current`.
            let bound_relays = relays + cand.intersection(&self.relay_mask).count();
            if cmp_large_exponent(&bound, bound_relays, &self.best_logs, self.best_relays)
                != Ordering::Greater
            {
                return Ok(());
            }

            let w = self.weights[v];
            current.push(v);
            let ranked = w.is_ranked();
            if ranked {
                logs.push(w.log);
            }
            let with_relays = relays + usize::from(w.epsilon);
            if cmp_large_exponent(logs, with_relays, &self.best_logs, self.best_relays)
                == Ordering::Greater
            {
                self.best_logs = logs.clone();
                self.best_relays = with_relays;
                self.best = current.clone();
            }
            let mut next = cand.clone();
            next.intersect_with(&self.adj[v]);
            self.expand(current, logs, with_relays, next)?;
            if ranked {
                logs.pop();
            }
            current.pop();
            cand.set(v, false);
        }
    }
}

/// Score of the clique the exact solver returns; exposed for diagnostics.
pub fn exact_score(wg: &WeightedGraph) -> Result<CliqueScore> {
    Ok(wg.score(&exact_indices(wg, DEFAULT_NODE_BUDGET)?))
}
