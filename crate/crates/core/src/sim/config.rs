use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Flavor;
use crate::model::ProbabilityRange;
use crate::protocol::{ProtocolConfig, RelaySelection, Topology, DEFAULT_ITERATION_CAP};
use crate::select::Scheduler;
use crate::solver::{SolverKind, DEFAULT_NODE_BUDGET};
use crate::weight::{WeightingStrategy, DEFAULT_WORLT_EXPONENT};

/// Weighting strategy by name; the WoRLT exponent lives in the config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrategyKind {
    #[serde(rename = "worlt")]
    Worlt,
    #[serde(rename = "unit", alias = "approach1")]
    Unit,
    #[serde(rename = "delivery", alias = "approach2")]
    Delivery,
    #[serde(rename = "popularity", alias = "approach3")]
    Popularity,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 4] = [
        StrategyKind::Worlt,
        StrategyKind::Unit,
        StrategyKind::Delivery,
        StrategyKind::Popularity,
    ];

    pub fn label(self) -> &'static str {
        match self {
            StrategyKind::Worlt => "worlt",
            StrategyKind::Unit => "unit",
            StrategyKind::Delivery => "delivery",
            StrategyKind::Popularity => "popularity",
        }
    }

    pub fn with_exponent(self, n: u32) -> WeightingStrategy {
        match self {
            StrategyKind::Worlt => WeightingStrategy::Worlt { exponent: n },
            StrategyKind::Unit => WeightingStrategy::Unit,
            StrategyKind::Delivery => WeightingStrategy::DeliveryProbability,
            StrategyKind::Popularity => WeightingStrategy::PacketPopularity,
        }
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "worlt" => Ok(StrategyKind::Worlt),
            "unit" | "approach1" => Ok(StrategyKind::Unit),
            "delivery" | "approach2" => Ok(StrategyKind::Delivery),
            "popularity" | "approach3" => Ok(StrategyKind::Popularity),
            other => Err(Error::Config(format!("unknown strategy '{other}'"))),
        }
    }
}

impl FromStr for Flavor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gidnc" => Ok(Flavor::Generalized),
            "sidnc" => Ok(Flavor::Strict),
            other => Err(Error::Config(format!("unknown flavor '{other}'"))),
        }
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "mwc" => Ok(SolverKind::Exact),
            "mvs" => Ok(SolverKind::Greedy),
            other => Err(Error::Config(format!("unknown solver '{other}'"))),
        }
    }
}

impl FromStr for Topology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "one-rn" => Ok(Topology::OneRn),
            "multi-rn" => Ok(Topology::MultiRn),
            other => Err(Error::Config(format!("unknown topology '{other}'"))),
        }
    }
}

fn default_worlt_n() -> u32 {
    DEFAULT_WORLT_EXPONENT
}

fn default_node_budget() -> u64 {
    DEFAULT_NODE_BUDGET
}

fn default_iteration_cap() -> u64 {
    DEFAULT_ITERATION_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_packets: usize,
    pub m_sweep: Vec<usize>,
    pub relays: usize,
    pub demand_fraction: f64,
    pub bs_tn: ProbabilityRange,
    pub bs_rn: ProbabilityRange,
    pub rn_tn: ProbabilityRange,
    pub iterations: usize,
    pub base_seed: u64,
    pub flavor: Flavor,
    pub strategy: StrategyKind,
    #[serde(default = "default_worlt_n")]
    pub worlt_n: u32,
    pub solver: SolverKind,
    /// Unset means the rule paired with the strategy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rn_selection: Option<RelaySelection>,
    pub topology: Topology,
    #[serde(default = "default_node_budget")]
    pub node_budget: u64,
    #[serde(default = "default_iteration_cap")]
    pub iteration_cap: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_packets: 30,
            m_sweep: vec![10, 20, 30, 40, 50, 60],
            relays: 1,
            demand_fraction: 0.8,
            bs_tn: ProbabilityRange { lo: 0.3, hi: 0.5 },
            bs_rn: ProbabilityRange { lo: 0.1, hi: 0.2 },
            rn_tn: ProbabilityRange { lo: 0.05, hi: 0.15 },
            iterations: 500,
            base_seed: 1,
            flavor: Flavor::Generalized,
            strategy: StrategyKind::Worlt,
            worlt_n: DEFAULT_WORLT_EXPONENT,
            solver: SolverKind::Exact,
            rn_selection: None,
            topology: Topology::OneRn,
            node_budget: DEFAULT_NODE_BUDGET,
            iteration_cap: DEFAULT_ITERATION_CAP,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_packets == 0 {
            return bad("n_packets must be at least 1".into());
        }
        if self.m_sweep.is_empty() {
            return bad("m_sweep must list at least one terminal count".into());
        }
        if let Some(&m) = self.m_sweep.iter().find(|&&m| m == 0) {
            return bad(format!("m_sweep entry {m} must be at least 1"));
        }
        if !(self.demand_fraction > 0.0 && self.demand_fraction <= 1.0) {
            return bad(format!(
                "demand_fraction {} is outside (0, 1]",
                self.demand_fraction
            ));
        }
        for (name, r) in [("bs_tn", self.bs_tn), ("bs_rn", self.bs_rn), ("rn_tn", self.rn_tn)] {
            ProbabilityRange::new(r.lo, r.hi).map_err(|e| Error::Config(format!("{name}: {e}")))?;
        }
        if self.iterations == 0 {
            return bad("iterations must be at least 1".into());
        }
        if self.worlt_n == 0 {
            return bad("worlt_n must be at least 1".into());
        }
        match self.topology {
            Topology::OneRn if self.relays > 1 => {
                return bad(format!("one-rn topology takes at most 1 relay, got {}", self.relays))
            }
            Topology::MultiRn if self.relays == 0 => {
                return bad("multi-rn topology needs at least 1 relay".into())
            }
            _ => {}
        }
        if self.iteration_cap == 0 {
            return bad("iteration_cap must be at least 1".into());
        }
        Ok(())
    }

    pub fn weighting(&self) -> WeightingStrategy {
        self.strategy.with_exponent(self.worlt_n)
    }

    pub fn relay_selection(&self) -> RelaySelection {
        self.rn_selection
            .unwrap_or_else(|| RelaySelection::paired_with(self.weighting()))
    }

    pub fn protocol(&self) -> ProtocolConfig {
        let mut scheduler = Scheduler::new(self.flavor, self.weighting(), self.solver);
        scheduler.node_budget = self.node_budget;
        ProtocolConfig {
            scheduler,
            topology: self.topology,
            rn_selection: self.relay_selection(),
            iteration_cap: self.iteration_cap,
        }
    }
}
