//! Deterministic simulated controller cluster.
//!
//! Nodes run a small Raft (election and heartbeats) and SWIM (direct and
//! indirect probes) over a virtual clock. A single external "dummy" node talks
//! to the cluster through [`ClusterHandle::deliver`] and receives the messages
//! addressed to it from [`ClusterHandle::tick`]. The six weaknesses are off by
//! default and switched on per [`Vulnerability`] flag.

mod dummy;
pub mod exploits;
pub mod server;
mod state;
mod topology;

pub use state::RaftRole;
pub use topology::{Link, FAKE_LINK, PHYSICAL_LINKS, SWITCHES};

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alphabet::{AlphabetConfig, ConcreteMessage, Liveness, NodeId};

use state::ClusterState;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid cluster config: {0}")]
    InvalidConfig(String),
    #[error("malformed message: {0}")]
    Malformed(String),
    #[error("tick count must be at least 1")]
    ZeroTicks,
    #[error("cluster did not converge within {0} ticks")]
    NotConverged(u64),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vulnerability {
    UnauthJoin,
    SeizeLeader,
    SessionFlood,
    ClearStore,
    FakeMember,
    FakeLink,
}

impl Vulnerability {
    pub const ALL: [Vulnerability; 6] = [
        Vulnerability::UnauthJoin,
        Vulnerability::SeizeLeader,
        Vulnerability::SessionFlood,
        Vulnerability::ClearStore,
        Vulnerability::FakeMember,
        Vulnerability::FakeLink,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Vulnerability::UnauthJoin => "unauth_join",
            Vulnerability::SeizeLeader => "seize_leader",
            Vulnerability::SessionFlood => "session_flood",
            Vulnerability::ClearStore => "clear_store",
            Vulnerability::FakeMember => "fake_member",
            Vulnerability::FakeLink => "fake_link",
        }
    }

    /// Parses a comma separated list; `all` and `none` are accepted.
    pub fn parse_list(text: &str) -> Result<BTreeSet<Vulnerability>, SimError> {
        let mut out = BTreeSet::new();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part {
                "all" => out.extend(Vulnerability::ALL),
                "none" => {}
                other => {
                    out.insert(other.parse()?);
                }
            }
        }
        Ok(out)
    }
}

impl fmt::Display for Vulnerability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Vulnerability {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, SimError> {
        Vulnerability::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| SimError::InvalidConfig(format!("unknown vulnerability {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusterConfig {
    pub members: Vec<NodeId>,
    pub cluster_id: String,
    /// Identity of the external node driven by the proxy.
    pub dummy_id: NodeId,
    pub heartbeat_threshold: u64,
    pub election_timeout_range: (u64, u64),
    pub indirect_probe_fanout: usize,
    pub vulnerabilities: BTreeSet<Vulnerability>,
    pub seed: u64,
    /// Whether the cluster sends probes and heartbeats to a joined dummy.
    pub keepalive_traffic: bool,
    /// Ticks between two idle-session disconnects.
    pub session_reap_interval: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            members: ["A", "B", "C", "D"].map(String::from).to_vec(),
            cluster_id: "SD-WAN".into(),
            dummy_id: "X".into(),
            heartbeat_threshold: 5,
            election_timeout_range: (10, 20),
            indirect_probe_fanout: 2,
            vulnerabilities: BTreeSet::new(),
            seed: 42,
            keepalive_traffic: true,
            session_reap_interval: 20,
        }
    }
}

impl ClusterConfig {
    pub fn with_members(n: usize) -> Self {
        let members = (0..n)
            .map(|i| {
                let c = (b'A' + (i % 26) as u8) as char;
                if i < 26 {
                    c.to_string()
                } else {
                    format!("{c}{}", i / 26)
                }
            })
            .collect();
        ClusterConfig { members, ..Default::default() }
    }

    pub fn with_vulns(mut self, vulns: impl IntoIterator<Item = Vulnerability>) -> Self {
        self.vulnerabilities = vulns.into_iter().collect();
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn has(&self, v: Vulnerability) -> bool {
        self.vulnerabilities.contains(&v)
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let cfg: ClusterConfig = serde_json::from_str(text).map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if self.members.len() < 3 {
            return bad(format!("need at least 3 members, got {}", self.members.len()));
        }
        let unique: BTreeSet<&NodeId> = self.members.iter().collect();
        if unique.len() != self.members.len() {
            return bad("duplicate member id".into());
        }
        if unique.contains(&self.dummy_id) {
            return bad(format!("dummy id {} is a configured member", self.dummy_id));
        }
        let (lo, hi) = self.election_timeout_range;
        if self.heartbeat_threshold == 0 {
            return bad("heartbeat_threshold must be positive".into());
        }
        if lo <= self.heartbeat_threshold || hi < lo {
            return bad(format!(
                "election timeout range ({lo},{hi}) must exceed heartbeat threshold {}",
                self.heartbeat_threshold
            ));
        }
        if self.session_reap_interval == 0 {
            return bad("session_reap_interval must be positive".into());
        }
        Ok(())
    }

    /// Alphabet config matching this cluster with the dummy as `self`.
    pub fn alphabet_config(&self) -> AlphabetConfig {
        AlphabetConfig::new(self.members.clone(), self.dummy_id.clone(), self.cluster_id.clone())
    }

    fn instance(&self) -> String {
        format!("{}#{}", self.cluster_id, self.seed)
    }
}

/// Snapshot of the cluster used by the detectors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterObservation {
    pub instance: String,
    pub tick: u64,
    pub leader: Option<NodeId>,
    pub term: u64,
    pub membership: BTreeMap<NodeId, Liveness>,
    pub apps: Vec<String>,
    pub links: BTreeSet<Link>,
    pub switches: Vec<String>,
    /// `reachability[i][j]`: ping from `switches[i]` reaches `switches[j]`.
    pub reachability: Vec<Vec<bool>>,
    pub sessions_open: u64,
    pub resource_load: BTreeMap<NodeId, u64>,
}

pub const DEFAULT_APPS: [&str; 3] = ["fwd", "stats", "acl"];

const CONVERGE_LIMIT: u64 = 1000;

/// A running simulated cluster.
#[derive(Debug, Clone)]
pub struct ClusterHandle {
    cfg: ClusterConfig,
    initial: ClusterState,
    state: ClusterState,
}

impl ClusterHandle {
    /// Builds the cluster and runs it until one leader is elected and
    /// acknowledged by every node.
    pub fn spawn(cfg: ClusterConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        let mut state = ClusterState::new(&cfg);
        let mut stable_since = None;
        loop {
            if state.now >= CONVERGE_LIMIT {
                return Err(SimError::NotConverged(CONVERGE_LIMIT));
            }
            state.step(&cfg);
            if state.converged() {
                let since = *stable_since.get_or_insert(state.now);
                if state.now - since >= 2 * cfg.heartbeat_threshold {
                    break;
                }
            } else {
                stable_since = None;
            }
        }
        state.outbox.clear();
        Ok(ClusterHandle { initial: state.clone(), state, cfg })
    }

    pub fn config(&self) -> &ClusterConfig {
        &self.cfg
    }

    pub fn now(&self) -> u64 {
        self.state.now
    }

    /// Highest term held by any node.
    pub fn term(&self) -> u64 {
        self.state.max_term()
    }

    /// Queues a message from the dummy node; it is handled on the next tick.
    pub fn deliver(&mut self, msg: &ConcreteMessage) -> Result<(), SimError> {
        let input = dummy::parse(msg)?;
        if msg.cluster_id == self.cfg.cluster_id {
            self.state.schedule_dummy(input);
        } else {
            log::debug!("dropping message for foreign cluster {}", msg.cluster_id);
        }
        Ok(())
    }

    /// Advances `n` ticks and returns the messages sent to the dummy node.
    pub fn tick(&mut self, n: u64) -> Result<Vec<(u64, ConcreteMessage)>, SimError> {
        if n == 0 {
            return Err(SimError::ZeroTicks);
        }
        for _ in 0..n {
            self.state.step(&self.cfg);
        }
        Ok(std::mem::take(&mut self.state.outbox))
    }

    pub fn observe(&self) -> ClusterObservation {
        self.state.observe(&self.cfg)
    }

    /// Returns the cluster to its state right after [`spawn`](Self::spawn).
    pub fn reset(&mut self) {
        self.state = self.initial.clone();
    }

    /// Logical state with clocks, timers and RNG state left out.
    pub fn fingerprint(&self) -> String {
        self.state.fingerprint()
    }

    pub fn raft_roles(&self) -> Vec<(NodeId, RaftRole, u64)> {
        self.state.roles()
    }
}
