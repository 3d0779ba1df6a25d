//! Network population, per-node packet state and the erasure channel.
//!
//! The state feedback matrix has one row per receiving node: terminals
//! occupy rows `0..M`, relays occupy rows `M..M+R`. Every cell records
//! whether the node holds the packet, lacks it and wants it, or lacks it
//! without wanting it. Relays never want anything.

use std::collections::BTreeSet;
use std::fmt;

use fixedbitset::FixedBitSet;
use rand::Rng;

use crate::error::{Error, Result};

/// Index of a source packet inside the frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PacketId(pub usize);

impl fmt::Display for PacketId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub type PacketSet = BTreeSet<PacketId>;

/// A node of the network. The derived order puts terminals before relays,
/// which is the row order of the feedback matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeId {
    Terminal(usize),
    Relay(usize),
    BaseStation,
}

impl NodeId {
    pub fn is_relay(self) -> bool {
        matches!(self, NodeId::Relay(_))
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, NodeId::Terminal(_))
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Terminal(i) => write!(f, "T{i}"),
            NodeId::Relay(h) => write!(f, "R{h}"),
            NodeId::BaseStation => f.write_str("BS"),
        }
    }
}

/// One entry of the feedback matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cell {
    Has,
    Wants,
    LacksUnwanted,
}

impl Cell {
    /// Feedback encoding: 0 = has, 1 = wants, -1 = lacks but does not want.
    pub fn from_code(code: i8) -> Option<Cell> {
        match code {
            0 => Some(Cell::Has),
            1 => Some(Cell::Wants),
            -1 => Some(Cell::LacksUnwanted),
            _ => None,
        }
    }

    pub fn code(self) -> i8 {
        match self {
            Cell::Has => 0,
            Cell::Wants => 1,
            Cell::LacksUnwanted => -1,
        }
    }

    pub fn lacks(self) -> bool {
        self != Cell::Has
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StateFeedbackMatrix {
    terminals: usize,
    relays: usize,
    packets: usize,
    cells: Vec<Cell>,
}

impl StateFeedbackMatrix {
    /// A matrix in which every node already holds every packet.
    pub fn all_has(terminals: usize, relays: usize, packets: usize) -> Self {
        Self {
            terminals,
            relays,
            packets,
            cells: vec![Cell::Has; (terminals + relays) * packets],
        }
    }

    /// Builds a matrix from rows of feedback codes (0, 1, -1).
    pub fn from_codes<T: AsRef<[i8]>, U: AsRef<[i8]>>(
        terminal_rows: &[T],
        relay_rows: &[U],
    ) -> Result<Self> {
        let packets = terminal_rows
            .first()
            .map(|r| r.as_ref().len())
            .or_else(|| relay_rows.first().map(|r| r.as_ref().len()))
            .unwrap_or(0);
        let mut cells = Vec::with_capacity((terminal_rows.len() + relay_rows.len()) * packets);
        let rows = terminal_rows
            .iter()
            .map(AsRef::as_ref)
            .chain(relay_rows.iter().map(AsRef::as_ref));
        for (row, codes) in rows.enumerate() {
            if codes.len() != packets {
                return Err(Error::Input(format!(
                    "row {row} has {} cells, expected {packets}",
                    codes.len()
                )));
            }
            for &code in codes {
                let cell = Cell::from_code(code)
                    .ok_or_else(|| Error::Input(format!("bad feedback code {code} in row {row}")))?;
                cells.push(cell);
            }
        }
        let sfm = Self {
            terminals: terminal_rows.len(),
            relays: relay_rows.len(),
            packets,
            cells,
        };
        sfm.validate()?;
        Ok(sfm)
    }

    pub fn validate(&self) -> Result<()> {
        if self.cells.len() != self.rows() * self.packets {
            return Err(Error::Input("cell count does not match dimensions".into()));
        }
        for h in 0..self.relays {
            let row = self.terminals + h;
            if (0..self.packets).any(|j| self.cell_at(row, j) == Cell::Wants) {
                return Err(Error::Input(format!("relay {h} has a Wants cell")));
            }
        }
        Ok(())
    }

    pub fn terminals(&self) -> usize {
        self.terminals
    }

    pub fn relays(&self) -> usize {
        self.relays
    }

    pub fn packets(&self) -> usize {
        self.packets
    }

    pub fn rows(&self) -> usize {
        self.terminals + self.relays
    }

    pub fn row_of(&self, node: NodeId) -> Option<usize> {
        match node {
            NodeId::Terminal(i) if i < self.terminals => Some(i),
            NodeId::Relay(h) if h < self.relays => Some(self.terminals + h),
            _ => None,
        }
    }

    pub fn node_at(&self, row: usize) -> NodeId {
        if row < self.terminals {
            NodeId::Terminal(row)
        } else {
            NodeId::Relay(row - self.terminals)
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.rows()).map(|r| self.node_at(r))
    }

    pub fn cell_at(&self, row: usize, packet: usize) -> Cell {
        self.cells[row * self.packets + packet]
    }

    pub fn cell(&self, node: NodeId, packet: PacketId) -> Option<Cell> {
        let row = self.row_of(node)?;
        (packet.0 < self.packets).then(|| self.cell_at(row, packet.0))
    }

    fn row_bits(&self, row: usize, pred: impl Fn(Cell) -> bool) -> FixedBitSet {
        let mut bits = FixedBitSet::with_capacity(self.packets);
        for j in 0..self.packets {
            if pred(self.cell_at(row, j)) {
                bits.insert(j);
            }
        }
        bits
    }

    pub fn has_bits(&self, row: usize) -> FixedBitSet {
        self.row_bits(row, |c| c == Cell::Has)
    }

    pub fn lacks_bits(&self, row: usize) -> FixedBitSet {
        self.row_bits(row, Cell::lacks)
    }

    pub fn wants_bits(&self, row: usize) -> FixedBitSet {
        self.row_bits(row, |c| c == Cell::Wants)
    }

    fn row_set(&self, node: NodeId, pred: impl Fn(Cell) -> bool) -> PacketSet {
        match self.row_of(node) {
            Some(row) => (0..self.packets)
                .filter(|&j| pred(self.cell_at(row, j)))
                .map(PacketId)
                .collect(),
            None => PacketSet::new(),
        }
    }

    pub fn has_set(&self, node: NodeId) -> PacketSet {
        self.row_set(node, |c| c == Cell::Has)
    }

    pub fn lacks_set(&self, node: NodeId) -> PacketSet {
        self.row_set(node, Cell::lacks)
    }

    pub fn wants_set(&self, node: NodeId) -> PacketSet {
        self.row_set(node, |c| c == Cell::Wants)
    }

    pub fn wants_count(&self, row: usize) -> usize {
        (0..self.packets)
            .filter(|&j| self.cell_at(row, j) == Cell::Wants)
            .count()
    }

    /// Number of terminals that still want `packet`.
    pub fn popularity(&self, packet: usize) -> usize {
        (0..self.terminals)
            .filter(|&i| self.cell_at(i, packet) == Cell::Wants)
            .count()
    }

    /// True once no terminal wants anything.
    pub fn is_complete(&self) -> bool {
        self.cells[..self.terminals * self.packets]
            .iter()
            .all(|&c| c != Cell::Wants)
    }

    pub fn wants_union_bits(&self) -> FixedBitSet {
        let mut bits = FixedBitSet::with_capacity(self.packets);
        for i in 0..self.terminals {
            bits.union_with(&self.wants_bits(i));
        }
        bits
    }

    /// Marks `packet` as received at `row`. Returns whether the cell changed.
    /// Cells only ever move toward `Has`.
    pub fn mark_received(&mut self, row: usize, packet: usize) -> bool {
        let cell = &mut self.cells[row * self.packets + packet];
        let changed = *cell != Cell::Has;
        *cell = Cell::Has;
        changed
    }

    /// Row-major feedback codes, handy for equality checks across runs.
    pub fn codes(&self) -> Vec<Vec<i8>> {
        (0..self.rows())
            .map(|r| (0..self.packets).map(|j| self.cell_at(r, j).code()).collect())
            .collect()
    }
}

/// Union of every terminal's Wants set.
pub fn wants_union(sfm: &StateFeedbackMatrix) -> PacketSet {
    sfm.wants_union_bits().ones().map(PacketId).collect()
}

fn check_probability(p: f64, what: &str) -> Result<()> {
    if (0.0..1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} erasure probability {p} is outside [0, 1)")))
    }
}

/// Draws one erasure event: true means the packet was lost.
pub fn erased<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    rng.gen::<f64>() < p
}

/// Closed interval of erasure probabilities an experiment draws from.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct ProbabilityRange {
    pub lo: f64,
    pub hi: f64,
}

impl ProbabilityRange {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo <= hi) {
            return Err(Error::Config(format!("range [{lo}, {hi}] has lo > hi")));
        }
        check_probability(lo, "range lower")?;
        check_probability(hi, "range upper")?;
        Ok(Self { lo, hi })
    }

    pub fn fixed(p: f64) -> Result<Self> {
        Self::new(p, p)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.gen();
        self.lo + (self.hi - self.lo) * u
    }
}

impl TryFrom<[f64; 2]> for ProbabilityRange {
    type Error = Error;

    fn try_from(v: [f64; 2]) -> Result<Self> {
        Self::new(v[0], v[1])
    }
}

impl From<ProbabilityRange> for [f64; 2] {
    fn from(r: ProbabilityRange) -> Self {
        [r.lo, r.hi]
    }
}

/// Per-link erasure probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ErasureMatrix {
    bs_tn: Vec<f64>,
    bs_rn: Vec<f64>,
    /// Indexed `[relay][terminal]`.
    rn_tn: Vec<Vec<f64>>,
}

impl ErasureMatrix {
    pub fn new(bs_tn: Vec<f64>, bs_rn: Vec<f64>, rn_tn: Vec<Vec<f64>>) -> Result<Self> {
        if rn_tn.len() != bs_rn.len() {
            return Err(Error::Config(format!(
                "{} relay rows in relay-terminal matrix, {} relays",
                rn_tn.len(),
                bs_rn.len()
            )));
        }
        for (h, row) in rn_tn.iter().enumerate() {
            if row.len() != bs_tn.len() {
                return Err(Error::Config(format!(
                    "relay {h} has {} terminal links, expected {}",
                    row.len(),
                    bs_tn.len()
                )));
            }
        }
        for &p in &bs_tn {
            check_probability(p, "BS-terminal")?;
        }
        for &p in &bs_rn {
            check_probability(p, "BS-relay")?;
        }
        for &p in rn_tn.iter().flatten() {
            check_probability(p, "relay-terminal")?;
        }
        Ok(Self { bs_tn, bs_rn, rn_tn })
    }

    /// Every link has the same erasure probability.
    pub fn uniform(terminals: usize, relays: usize, p: f64) -> Result<Self> {
        Self::new(
            vec![p; terminals],
            vec![p; relays],
            vec![vec![p; terminals]; relays],
        )
    }

    /// Draws every link probability once from its range. Draw order is the
    /// BS-terminal links, then for each relay its BS link followed by its
    /// terminal links, so relay `h` sees the same channel whatever `R` is.
    pub fn sample<R: Rng + ?Sized>(
        terminals: usize,
        relays: usize,
        bs_tn: ProbabilityRange,
        bs_rn: ProbabilityRange,
        rn_tn: ProbabilityRange,
        rng: &mut R,
    ) -> Self {
        let bs_tn_p = (0..terminals).map(|_| bs_tn.sample(rng)).collect();
        let mut bs_rn_p = Vec::with_capacity(relays);
        let mut rn_tn_p = Vec::with_capacity(relays);
        for _ in 0..relays {
            bs_rn_p.push(bs_rn.sample(rng));
            rn_tn_p.push((0..terminals).map(|_| rn_tn.sample(rng)).collect());
        }
        Self {
            bs_tn: bs_tn_p,
            bs_rn: bs_rn_p,
            rn_tn: rn_tn_p,
        }
    }

    pub fn terminals(&self) -> usize {
        self.bs_tn.len()
    }

    pub fn relays(&self) -> usize {
        self.bs_rn.len()
    }

    pub fn bs_tn(&self) -> &[f64] {
        &self.bs_tn
    }

    pub fn bs_rn(&self) -> &[f64] {
        &self.bs_rn
    }

    pub fn rn_tn(&self, relay: usize) -> &[f64] {
        &self.rn_tn[relay]
    }

    /// Erasure probability of the directed link, if that link exists.
    pub fn link(&self, sender: NodeId, receiver: NodeId) -> Option<f64> {
        match (sender, receiver) {
            (NodeId::BaseStation, NodeId::Terminal(i)) => self.bs_tn.get(i).copied(),
            (NodeId::BaseStation, NodeId::Relay(h)) => self.bs_rn.get(h).copied(),
            (NodeId::Relay(h), NodeId::Terminal(i)) => {
                self.rn_tn.get(h).and_then(|row| row.get(i)).copied()
            }
            _ => None,
        }
    }

    /// Erasure probability from `sender` to every terminal.
    pub fn to_terminals(&self, sender: NodeId) -> Option<&[f64]> {
        match sender {
            NodeId::BaseStation => Some(&self.bs_tn),
            NodeId::Relay(h) => self.rn_tn.get(h).map(Vec::as_slice),
            NodeId::Terminal(_) => None,
        }
    }
}

/// Which packets each terminal is interested in.
#[derive(Debug, Clone, PartialEq)]
pub struct DemandProfile {
    fraction: f64,
    packets: usize,
    wanted: Vec<FixedBitSet>,
}

impl DemandProfile {
    /// Each (terminal, packet) pair is wanted independently with
    /// probability `fraction`.
    pub fn sample<R: Rng + ?Sized>(
        terminals: usize,
        packets: usize,
        fraction: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::Config(format!(
                "demand fraction {fraction} is outside (0, 1]"
            )));
        }
        let wanted = (0..terminals)
            .map(|_| {
                let mut bits = FixedBitSet::with_capacity(packets);
                for j in 0..packets {
                    if rng.gen::<f64>() < fraction {
                        bits.insert(j);
                    }
                }
                bits
            })
            .collect();
        Ok(Self {
            fraction,
            packets,
            wanted,
        })
    }

    /// Every terminal wants the whole frame.
    pub fn full(terminals: usize, packets: usize) -> Self {
        let mut all = FixedBitSet::with_capacity(packets);
        all.insert_range(..);
        Self {
            fraction: 1.0,
            packets,
            wanted: vec![all; terminals],
        }
    }

    pub fn from_sets(packets: usize, sets: &[Vec<usize>]) -> Result<Self> {
        let mut wanted = Vec::with_capacity(sets.len());
        let mut total = 0usize;
        for (i, set) in sets.iter().enumerate() {
            let mut bits = FixedBitSet::with_capacity(packets);
            for &j in set {
                if j >= packets {
                    return Err(Error::Input(format!(
                        "terminal {i} wants packet {j}, frame has {packets}"
                    )));
                }
                bits.insert(j);
            }
            total += bits.count_ones(..);
            wanted.push(bits);
        }
        let cells = (sets.len() * packets).max(1);
        Ok(Self {
            fraction: total as f64 / cells as f64,
            packets,
            wanted,
        })
    }

    pub fn fraction(&self) -> f64 {
        self.fraction
    }

    pub fn terminals(&self) -> usize {
        self.wanted.len()
    }

    pub fn packets(&self) -> usize {
        self.packets
    }

    pub fn wants(&self, terminal: usize, packet: usize) -> bool {
        self.wanted[terminal].contains(packet)
    }
}

/// Simulates the initial phase: the BS broadcasts each packet once.
///
/// Erasure draws are consumed node by node: every terminal row in order,
/// then every relay row, each row packet by packet.
pub fn generate_initial_state<R: Rng + ?Sized>(
    terminals: usize,
    packets: usize,
    relays: usize,
    demand: &DemandProfile,
    erasures: &ErasureMatrix,
    rng: &mut R,
) -> Result<StateFeedbackMatrix> {
    if terminals == 0 || packets == 0 {
        return Err(Error::Config(
            "need at least one terminal and one packet".into(),
        ));
    }
    if demand.terminals() != terminals || demand.packets() != packets {
        return Err(Error::Config(format!(
            "demand profile is {}x{}, network is {terminals}x{packets}",
            demand.terminals(),
            demand.packets()
        )));
    }
    if erasures.terminals() != terminals || erasures.relays() != relays {
        return Err(Error::Config(format!(
            "erasure matrix covers {} terminals and {} relays, network has {terminals} and {relays}",
            erasures.terminals(),
            erasures.relays()
        )));
    }
    let mut sfm = StateFeedbackMatrix::all_has(terminals, relays, packets);
    for i in 0..terminals {
        let p = erasures.bs_tn[i];
        for j in 0..packets {
            if erased(rng, p) {
                sfm.cells[i * packets + j] = if demand.wants(i, j) {
                    Cell::Wants
                } else {
                    Cell::LacksUnwanted
                };
            }
        }
    }
    for h in 0..relays {
        let p = erasures.bs_rn[h];
        let row = terminals + h;
        for j in 0..packets {
            if erased(rng, p) {
                sfm.cells[row * packets + j] = Cell::LacksUnwanted;
            }
        }
    }
    Ok(sfm)
}
