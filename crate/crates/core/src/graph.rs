//! Layered IDNC graph construction.
//!
//! One vertex exists per (receiving node, lost packet) pair. Two vertices
//! `(i, j)` and `(k, l)` are adjacent when they lose the same packet, or
//! when each lost packet is held by the other node. The strict flavor also
//! requires that no receiver in the population lacks both `j` and `l`,
//! so it never produces a combination holding two unknowns for anyone.

use std::collections::BTreeSet;

use fixedbitset::FixedBitSet;

use crate::error::{Error, Result};
use crate::model::{Cell, NodeId, PacketId, PacketSet, StateFeedbackMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Flavor {
    #[serde(rename = "gidnc")]
    Generalized,
    #[serde(rename = "sidnc")]
    Strict,
}

impl Flavor {
    pub fn label(self) -> &'static str {
        match self {
            Flavor::Generalized => "gidnc",
            Flavor::Strict => "sidnc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Layer {
    Primary,
    Secondary,
}

/// Ordered by (node, packet); the layer follows from the feedback matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Vertex {
    pub node: NodeId,
    pub packet: PacketId,
    pub layer: Layer,
}

impl Vertex {
    pub fn new(node: NodeId, packet: usize, layer: Layer) -> Self {
        Self {
            node,
            packet: PacketId(packet),
            layer,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IdncGraph {
    flavor: Flavor,
    vertices: Vec<Vertex>,
    adj: Vec<FixedBitSet>,
}

impl IdncGraph {
    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertex(&self, index: usize) -> Vertex {
        self.vertices[index]
    }

    pub fn neighbors(&self, index: usize) -> &FixedBitSet {
        &self.adj[index]
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.adj[a].contains(b)
    }

    pub fn degree(&self, index: usize) -> usize {
        self.adj[index].count_ones(..)
    }

    pub fn index_of(&self, v: &Vertex) -> Option<usize> {
        self.vertices
            .binary_search(v)
            .ok()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|a| a.count_ones(..)).sum::<usize>() / 2
    }

    /// Every edge as an ordered vertex pair with the smaller vertex first.
    pub fn edges(&self) -> BTreeSet<(Vertex, Vertex)> {
        let mut out = BTreeSet::new();
        for (a, nbrs) in self.adj.iter().enumerate() {
            for b in nbrs.ones().filter(|&b| b > a) {
                out.insert((self.vertices[a], self.vertices[b]));
            }
        }
        out
    }

    pub fn layer_indices(&self, layer: Layer) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.vertices[i].layer == layer)
            .collect()
    }

    /// Induced subgraph on `keep` (indices into this graph, ascending).
    pub fn subgraph(&self, keep: &[usize]) -> IdncGraph {
        let mut remap = vec![usize::MAX; self.len()];
        for (new, &old) in keep.iter().enumerate() {
            remap[old] = new;
        }
        let mut mask = FixedBitSet::with_capacity(self.len());
        keep.iter().for_each(|&i| mask.insert(i));
        let adj = keep
            .iter()
            .map(|&old| {
                let mut row = FixedBitSet::with_capacity(keep.len());
                for n in self.adj[old].intersection(&mask) {
                    row.insert(remap[n]);
                }
                row
            })
            .collect();
        IdncGraph {
            flavor: self.flavor,
            vertices: keep.iter().map(|&i| self.vertices[i]).collect(),
            adj,
        }
    }

    pub fn is_clique(&self, indices: &[usize]) -> bool {
        indices.iter().enumerate().all(|(pos, &a)| {
            indices[pos + 1..]
                .iter()
                .all(|&b| a != b && self.adjacent(a, b))
        })
    }

    pub fn clique_from_indices(&self, indices: &[usize]) -> Clique {
        Clique::new(indices.iter().map(|&i| self.vertices[i]))
    }

    /// Maps clique members back to indices, failing if one is missing.
    pub fn indices_of(&self, clique: &Clique) -> Result<Vec<usize>> {
        clique
            .vertices()
            .iter()
            .map(|v| {
                self.index_of(v)
                    .ok_or_else(|| Error::Contract(format!("vertex {v:?} is not in the graph")))
            })
            .collect()
    }
}

/// Pairwise-adjacent vertices, kept sorted by vertex identity.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct Clique {
    vertices: Vec<Vertex>,
}

impl Clique {
    pub fn new(vertices: impl IntoIterator<Item = Vertex>) -> Self {
        let mut vertices: Vec<Vertex> = vertices.into_iter().collect();
        vertices.sort();
        vertices.dedup();
        Self { vertices }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn nodes(&self) -> Vec<NodeId> {
        self.vertices.iter().map(|v| v.node).collect()
    }

    pub fn union(&self, other: &Clique) -> Clique {
        Clique::new(self.vertices.iter().chain(&other.vertices).copied())
    }

    /// True when no node contributes more than one vertex.
    pub fn one_vertex_per_node(&self) -> bool {
        let nodes: BTreeSet<NodeId> = self.vertices.iter().map(|v| v.node).collect();
        nodes.len() == self.vertices.len()
    }
}

/// An XOR of source packets sent by one node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CodedPacket {
    pub payload: PacketSet,
    pub sender: NodeId,
}

/// Builds the IDNC graph for the current feedback state.
///
/// `include_relays` adds the relays' (always secondary) vertices. When
/// `sender_has` is given only packets the sender holds get vertices.
pub fn build_graph(
    sfm: &StateFeedbackMatrix,
    flavor: Flavor,
    include_relays: bool,
    sender_has: Option<&PacketSet>,
) -> Result<IdncGraph> {
    let packets = sfm.packets();
    let mut sendable = FixedBitSet::with_capacity(packets);
    match sender_has {
        Some(set) => {
            for p in set {
                if p.0 >= packets {
                    return Err(Error::Input(format!(
                        "sender holds packet {p}, frame has {packets}"
                    )));
                }
                sendable.insert(p.0);
            }
        }
        None => sendable.insert_range(..),
    }

    let population = if include_relays { sfm.rows() } else { sfm.terminals() };

    let mut vertices = Vec::new();
    let mut owner = Vec::new();
    for row in 0..population {
        let node = sfm.node_at(row);
        for j in sendable.ones() {
            let layer = match sfm.cell_at(row, j) {
                Cell::Has => continue,
                Cell::Wants => Layer::Primary,
                Cell::LacksUnwanted => Layer::Secondary,
            };
            vertices.push(Vertex::new(node, j, layer));
            owner.push(row);
        }
    }
    let n = vertices.len();

    let mut by_packet = vec![FixedBitSet::with_capacity(n); packets];
    for (v, vx) in vertices.iter().enumerate() {
        by_packet[vx.packet.0].insert(v);
    }
    let has: Vec<FixedBitSet> = (0..population).map(|r| sfm.has_bits(r)).collect();

    // holders[j]: vertices whose node holds j.
    let mut holders = vec![FixedBitSet::with_capacity(n); packets];
    for (v, &row) in owner.iter().enumerate() {
        for j in has[row].ones() {
            holders[j].insert(v);
        }
    }
    // held_by_row[r]: vertices whose packet row r holds.
    let held_by_row: Vec<FixedBitSet> = has
        .iter()
        .map(|h| {
            let mut bits = FixedBitSet::with_capacity(n);
            for l in h.ones() {
                bits.union_with(&by_packet[l]);
            }
            bits
        })
        .collect();

    // compatible[j]: vertices whose packet l has no common lacker with j.
    let compatible: Option<Vec<FixedBitSet>> = match flavor {
        Flavor::Generalized => None,
        Flavor::Strict => {
            let lackers: Vec<FixedBitSet> = (0..packets)
                .map(|j| {
                    let mut bits = FixedBitSet::with_capacity(population);
                    for r in 0..population {
                        if sfm.cell_at(r, j).lacks() {
                            bits.insert(r);
                        }
                    }
                    bits
                })
                .collect();
            Some(
                (0..packets)
                    .map(|j| {
                        let mut bits = FixedBitSet::with_capacity(n);
                        for l in 0..packets {
                            if lackers[j].is_disjoint(&lackers[l]) {
                                bits.union_with(&by_packet[l]);
                            }
                        }
                        bits
                    })
                    .collect(),
            )
        }
    };

    let adj = vertices
        .iter()
        .enumerate()
        .map(|(v, vx)| {
            let j = vx.packet.0;
            let mut row = holders[j].clone();
            row.intersect_with(&held_by_row[owner[v]]);
            if let Some(compatible) = &compatible {
                row.intersect_with(&compatible[j]);
            }
            row.union_with(&by_packet[j]);
            row.set(v, false);
            row
        })
        .collect();

    Ok(IdncGraph {
        flavor,
        vertices,
        adj,
    })
}

/// Secondary vertices adjacent to every member of `primary_clique`.
pub fn induced_secondary_subgraph(g: &IdncGraph, primary_clique: &Clique) -> Result<IdncGraph> {
    let members = g.indices_of(primary_clique)?;
    if members.iter().any(|&i| g.vertex(i).layer != Layer::Primary) {
        return Err(Error::Contract("primary clique holds a secondary vertex".into()));
    }
    if !g.is_clique(&members) {
        return Err(Error::Contract("primary vertices are not pairwise adjacent".into()));
    }
    let keep: Vec<usize> = g
        .layer_indices(Layer::Secondary)
        .into_iter()
        .filter(|&s| members.iter().all(|&m| g.adjacent(s, m)))
        .collect();
    Ok(g.subgraph(&keep))
}

pub fn clique_to_coded_packet(c: &Clique, sender: NodeId) -> Result<CodedPacket> {
    if c.is_empty() {
        return Err(Error::Contract("cannot encode an empty clique".into()));
    }
    Ok(CodedPacket {
        payload: c.vertices().iter().map(|v| v.packet).collect(),
        sender,
    })
}

/// Delivers `pkt` to `receiver`. The receiver decodes only when exactly one
/// payload packet is unknown to it; otherwise the packet is useless or
/// discarded. Returns the decoded packet, if any.
pub fn apply_reception(
    sfm: &mut StateFeedbackMatrix,
    receiver: NodeId,
    pkt: &CodedPacket,
) -> Option<PacketId> {
    let row = sfm.row_of(receiver)?;
    let mut unknown = pkt
        .payload
        .iter()
        .filter(|p| p.0 < sfm.packets() && sfm.cell_at(row, p.0).lacks());
    let first = *unknown.next()?;
    if unknown.next().is_some() {
        return None;
    }
    sfm.mark_received(row, first.0);
    Some(first)
}
