//! Recovery phase: the BS serves terminals and relays until the relays can
//! take over (Step 1), then the relays serve terminals (Step 2).
//!
//! Every recovery transmission draws one erasure event per listener, in
//! feedback-matrix row order, from the run's random stream. Relays listen
//! only to the BS.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{apply_reception, CodedPacket};
use crate::model::{erased, wants_union, ErasureMatrix, NodeId, PacketId, PacketSet, StateFeedbackMatrix};
use crate::select::{Scheduler, Selection};
use crate::weight::WeightingStrategy;

/// Default cap on recovery transmissions per run.
pub const DEFAULT_ITERATION_CAP: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Step1,
    Step2,
    Complete,
}

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::Step1 => "step1",
            Phase::Step2 => "step2",
            Phase::Complete => "complete",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Topology {
    #[serde(rename = "one-rn")]
    OneRn,
    #[serde(rename = "multi-rn")]
    MultiRn,
}

impl Topology {
    pub fn label(self) -> &'static str {
        match self {
            Topology::OneRn => "one-rn",
            Topology::MultiRn => "multi-rn",
        }
    }
}

/// How the BS picks the transmitting relay in multi-relay Step 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RelaySelection {
    /// The relay whose selected clique scores highest.
    #[serde(rename = "highest-clique-weight")]
    HighestCliqueWeight,
    /// The relay maximising the summed delivery probability of its clique.
    #[serde(rename = "delivery-weighted")]
    DeliveryWeighted,
}

impl RelaySelection {
    /// The rule each weighting strategy is normally run with.
    pub fn paired_with(strategy: WeightingStrategy) -> Self {
        match strategy {
            WeightingStrategy::Worlt { .. } => RelaySelection::HighestCliqueWeight,
            _ => RelaySelection::DeliveryWeighted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProtocolConfig {
    pub scheduler: Scheduler,
    pub topology: Topology,
    pub rn_selection: RelaySelection,
    pub iteration_cap: u64,
}

impl ProtocolConfig {
    pub fn new(scheduler: Scheduler, topology: Topology) -> Self {
        Self {
            scheduler,
            topology,
            rn_selection: RelaySelection::paired_with(scheduler.strategy),
            iteration_cap: DEFAULT_ITERATION_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Reception {
    Received,
    Erased,
    NotListening,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransmissionRecord {
    /// 1-based index among recovery transmissions.
    pub t: u64,
    pub phase: Phase,
    pub sender: NodeId,
    pub payload: PacketSet,
    /// Nodes of the primary clique.
    pub targeted_primary: Vec<NodeId>,
    /// One entry per feedback-matrix row.
    pub receptions: Vec<Reception>,
    pub decoded: Vec<(NodeId, PacketId)>,
}

/// Snapshot taken when Step 1 ends and the relays take over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Handoff {
    /// Number of Step 1 transmissions before the hand-off.
    pub after: u64,
    pub wants_union: PacketSet,
    pub relay_has: Vec<PacketSet>,
}

/// Step 1 ends once the relays jointly (multi-RN) or a single relay
/// (one-RN) hold every packet some terminal still wants.
pub fn check_step1_termination(sfm: &StateFeedbackMatrix, topology: Topology) -> Phase {
    if sfm.is_complete() {
        return Phase::Complete;
    }
    let wanted = sfm.wants_union_bits();
    let terminals = sfm.terminals();
    let ready = match topology {
        Topology::OneRn => (0..sfm.relays()).any(|h| wanted.is_subset(&sfm.has_bits(terminals + h))),
        Topology::MultiRn => {
            let mut held = fixedbitset::FixedBitSet::with_capacity(sfm.packets());
            for h in 0..sfm.relays() {
                held.union_with(&sfm.has_bits(terminals + h));
            }
            wanted.is_subset(&held)
        }
    };
    if ready {
        Phase::Step2
    } else {
        Phase::Step1
    }
}

#[derive(Debug, Clone)]
pub struct NetworkState {
    sfm: StateFeedbackMatrix,
    erasures: ErasureMatrix,
    topology: Topology,
    phase: Phase,
    log: Vec<TransmissionRecord>,
    handoff: Option<Handoff>,
    fallbacks: u64,
}

impl NetworkState {
    pub fn new(sfm: StateFeedbackMatrix, erasures: ErasureMatrix, topology: Topology) -> Result<Self> {
        sfm.validate()?;
        if erasures.terminals() != sfm.terminals() || erasures.relays() != sfm.relays() {
            return Err(Error::Config(format!(
                "erasure matrix covers {} terminals and {} relays, feedback matrix has {} and {}",
                erasures.terminals(),
                erasures.relays(),
                sfm.terminals(),
                sfm.relays()
            )));
        }
        let phase = check_step1_termination(&sfm, topology);
        let mut state = Self {
            sfm,
            erasures,
            topology,
            phase,
            log: Vec::new(),
            handoff: None,
            fallbacks: 0,
        };
        if phase == Phase::Step2 {
            state.record_handoff()?;
        }
        Ok(state)
    }

    pub fn sfm(&self) -> &StateFeedbackMatrix {
        &self.sfm
    }

    pub fn erasures(&self) -> &ErasureMatrix {
        &self.erasures
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn log(&self) -> &[TransmissionRecord] {
        &self.log
    }

    pub fn handoff(&self) -> Option<&Handoff> {
        self.handoff.as_ref()
    }

    pub fn fallbacks(&self) -> u64 {
        self.fallbacks
    }

    fn relay_has(&self, relay: usize) -> PacketSet {
        self.sfm.has_set(NodeId::Relay(relay))
    }

    fn record_handoff(&mut self) -> Result<()> {
        let union = wants_union(&self.sfm);
        let relay_has: Vec<PacketSet> = (0..self.sfm.relays()).map(|h| self.relay_has(h)).collect();
        let held: PacketSet = relay_has.iter().flatten().copied().collect();
        if !union.is_subset(&held) {
            return Err(Error::ProtocolInvariant(
                "Step 2 entered while a wanted packet is held by no relay".into(),
            ));
        }
        self.handoff = Some(Handoff {
            after: self.log.len() as u64,
            wants_union: union,
            relay_has,
        });
        Ok(())
    }

    fn expect_phase(&self, expected: Phase) -> Result<()> {
        if self.phase == expected {
            Ok(())
        } else {
            Err(Error::WrongPhase {
                expected,
                found: self.phase,
            })
        }
    }

    /// Sends `packet` from `sender`; relays listen only when the BS sends.
    fn transmit<R: Rng + ?Sized>(
        &mut self,
        selection: Selection,
        rng: &mut R,
    ) -> &TransmissionRecord {
        let Selection {
            primary,
            packet,
            fallbacks,
            ..
        } = selection;
        self.fallbacks += u64::from(fallbacks);
        let CodedPacket { sender, .. } = packet;
        let relays_listen = sender == NodeId::BaseStation;
        let mut receptions = Vec::with_capacity(self.sfm.rows());
        let mut decoded = Vec::new();
        for row in 0..self.sfm.rows() {
            let node = self.sfm.node_at(row);
            if node.is_relay() && !relays_listen {
                receptions.push(Reception::NotListening);
                continue;
            }
            let p = self
                .erasures
                .link(sender, node)
                .expect("sender has a link to every listener");
            if erased(rng, p) {
                receptions.push(Reception::Erased);
                continue;
            }
            receptions.push(Reception::Received);
            if let Some(pk) = apply_reception(&mut self.sfm, node, &packet) {
                decoded.push((node, pk));
            }
        }
        self.log.push(TransmissionRecord {
            t: self.log.len() as u64 + 1,
            phase: self.phase,
            sender,
            payload: packet.payload,
            targeted_primary: primary.nodes(),
            receptions,
            decoded,
        });
        self.log.last().expect("just pushed")
    }
}

/// One BS transmission. Relay vertices are part of the graph, and every
/// terminal and relay listens.
pub fn run_step1_transmission<R: Rng + ?Sized>(
    state: &mut NetworkState,
    cfg: &ProtocolConfig,
    rng: &mut R,
) -> Result<()> {
    state.expect_phase(Phase::Step1)?;
    let selection = cfg
        .scheduler
        .select_transmission_clique(&state.sfm, &state.erasures, NodeId::BaseStation, true, None)
        .map_err(|e| match e {
            Error::NothingToSend => {
                Error::ProtocolInvariant("Step 1 has no primary vertex but is not complete".into())
            }
            other => other,
        })?;
    state.transmit(selection, rng);
    state.phase = check_step1_termination(&state.sfm, state.topology);
    if state.phase == Phase::Step2 {
        state.record_handoff()?;
    }
    Ok(())
}

fn relay_selection(
    state: &NetworkState,
    cfg: &ProtocolConfig,
    relay: usize,
) -> Result<Option<(Selection, PacketSet)>> {
    let has = state.relay_has(relay);
    match cfg.scheduler.select_transmission_clique(
        &state.sfm,
        &state.erasures,
        NodeId::Relay(relay),
        false,
        Some(&has),
    ) {
        Ok(sel) => Ok(Some((sel, has))),
        Err(Error::NothingToSend) => Ok(None),
        Err(e) => Err(e),
    }
}

fn finish_step2<R: Rng + ?Sized>(
    state: &mut NetworkState,
    selection: Selection,
    has: &PacketSet,
    rng: &mut R,
) -> Result<()> {
    if !selection.packet.payload.is_subset(has) {
        return Err(Error::ProtocolInvariant(format!(
            "{} would send packets it does not hold",
            selection.packet.sender
        )));
    }
    state.transmit(selection, rng);
    if state.sfm.is_complete() {
        state.phase = Phase::Complete;
    }
    Ok(())
}

/// One transmission by the single relay that holds every wanted packet.
pub fn run_step2_one_rn_transmission<R: Rng + ?Sized>(
    state: &mut NetworkState,
    cfg: &ProtocolConfig,
    rng: &mut R,
) -> Result<()> {
    state.expect_phase(Phase::Step2)?;
    let wanted = state.sfm.wants_union_bits();
    let terminals = state.sfm.terminals();
    let relay = (0..state.sfm.relays())
        .find(|&h| wanted.is_subset(&state.sfm.has_bits(terminals + h)))
        .ok_or_else(|| {
            Error::ProtocolInvariant("no single relay holds every wanted packet".into())
        })?;
    let (selection, has) = relay_selection(state, cfg, relay)?.ok_or_else(|| {
        Error::ProtocolInvariant(format!("relay {relay} has nothing to send in Step 2"))
    })?;
    finish_step2(state, selection, &has, rng)
}

/// Summed delivery probability of a clique's vertices from `relay`.
fn delivery_weight(state: &NetworkState, relay: usize, sel: &Selection) -> f64 {
    sel.combined
        .vertices()
        .iter()
        .filter_map(|v| state.erasures.link(NodeId::Relay(relay), v.node))
        .map(|p| 1.0 - p)
        .sum()
}

/// Index of the relay the BS lets transmit, given each relay's candidate.
/// Ties go to the lowest relay index.
pub fn choose_relay(
    state: &NetworkState,
    rule: RelaySelection,
    candidates: &[Option<Selection>],
) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (h, cand) in candidates.iter().enumerate() {
        let Some(sel) = cand else { continue };
        let better = match best {
            None => true,
            Some(b) => {
                let incumbent = candidates[b].as_ref().expect("best is a candidate");
                match rule {
                    RelaySelection::HighestCliqueWeight => sel.score > incumbent.score,
                    RelaySelection::DeliveryWeighted => {
                        delivery_weight(state, h, sel) > delivery_weight(state, b, incumbent)
                    }
                }
            }
        };
        if better {
            best = Some(h);
        }
    }
    best
}

/// One jointly scheduled relay transmission: every relay proposes its best
/// clique over the packets it holds, and only the chosen relay sends.
pub fn run_step2_multi_rn_transmission<R: Rng + ?Sized>(
    state: &mut NetworkState,
    cfg: &ProtocolConfig,
    rng: &mut R,
) -> Result<()> {
    state.expect_phase(Phase::Step2)?;
    let mut candidates = Vec::with_capacity(state.sfm.relays());
    let mut held = Vec::with_capacity(state.sfm.relays());
    for h in 0..state.sfm.relays() {
        match relay_selection(state, cfg, h)? {
            Some((sel, has)) => {
                candidates.push(Some(sel));
                held.push(has);
            }
            None => {
                candidates.push(None);
                held.push(PacketSet::new());
            }
        }
    }
    let chosen = choose_relay(state, cfg.rn_selection, &candidates).ok_or_else(|| {
        Error::ProtocolInvariant("a wanted packet is held by no relay in Step 2".into())
    })?;
    let selection = candidates.swap_remove(chosen).expect("chosen relay has a candidate");
    finish_step2(state, selection, &held[chosen], rng)
}

/// One recovery transmission for the current phase.
pub fn step<R: Rng + ?Sized>(
    state: &mut NetworkState,
    cfg: &ProtocolConfig,
    rng: &mut R,
) -> Result<()> {
    match state.phase {
        Phase::Step1 => run_step1_transmission(state, cfg, rng),
        Phase::Step2 => match cfg.topology {
            Topology::OneRn => run_step2_one_rn_transmission(state, cfg, rng),
            Topology::MultiRn => run_step2_multi_rn_transmission(state, cfg, rng),
        },
        Phase::Complete => Err(Error::WrongPhase {
            expected: Phase::Step1,
            found: Phase::Complete,
        }),
    }
}

fn run_phase<R: Rng + ?Sized>(
    state: &mut NetworkState,
    cfg: &ProtocolConfig,
    rng: &mut R,
    phase: Phase,
) -> Result<()> {
    while state.phase == phase {
        if state.log.len() as u64 >= cfg.iteration_cap {
            return Err(Error::Runaway {
                cap: cfg.iteration_cap,
            });
        }
        step(state, cfg, rng)?;
    }
    Ok(())
}

/// Step 2 with a single relay, repeated until every terminal is served.
pub fn run_step2_one_rn<R: Rng + ?Sized>(
    state: &mut NetworkState,
    cfg: &ProtocolConfig,
    rng: &mut R,
) -> Result<()> {
    state.expect_phase(Phase::Step2)?;
    let cfg = ProtocolConfig {
        topology: Topology::OneRn,
        ..*cfg
    };
    run_phase(state, &cfg, rng, Phase::Step2)
}

/// Multi-relay Step 2, repeated until every terminal is served.
pub fn run_step2_multi_rn<R: Rng + ?Sized>(
    state: &mut NetworkState,
    cfg: &ProtocolConfig,
    rng: &mut R,
) -> Result<()> {
    state.expect_phase(Phase::Step2)?;
    let cfg = ProtocolConfig {
        topology: Topology::MultiRn,
        ..*cfg
    };
    run_phase(state, &cfg, rng, Phase::Step2)
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// Recovery transmissions only; the initial broadcast is not counted.
    pub completion_delay: u64,
    pub step1_transmissions: u64,
    pub step2_transmissions: u64,
    /// Transmissions of the initial phase (one per source packet).
    pub initial_transmissions: u64,
    pub initial_sfm: StateFeedbackMatrix,
    pub final_sfm: StateFeedbackMatrix,
    pub handoff: Option<Handoff>,
    pub fallbacks: u64,
    pub log: Vec<TransmissionRecord>,
}

/// Runs the recovery phase from `state` until every terminal is served.
pub fn run_to_completion<R: Rng + ?Sized>(
    mut state: NetworkState,
    cfg: &ProtocolConfig,
    rng: &mut R,
) -> Result<RunOutcome> {
    let initial_sfm = state.sfm.clone();
    if state.topology != cfg.topology {
        return Err(Error::Config(format!(
            "state built for {} but config runs {}",
            state.topology.label(),
            cfg.topology.label()
        )));
    }
    run_phase(&mut state, cfg, rng, Phase::Step1)?;
    run_phase(&mut state, cfg, rng, Phase::Step2)?;
    let step1 = state
        .handoff
        .as_ref()
        .map_or(state.log.len() as u64, |h| h.after);
    let total = state.log.len() as u64;
    Ok(RunOutcome {
        completion_delay: total,
        step1_transmissions: step1,
        step2_transmissions: total - step1,
        initial_transmissions: initial_sfm.packets() as u64,
        initial_sfm,
        final_sfm: state.sfm,
        handoff: state.handoff,
        fallbacks: state.fallbacks,
        log: state.log,
    })
}
