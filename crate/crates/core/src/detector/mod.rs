//! Detection criteria DC1–DC5 over a baseline observation, the observation
//! after a case, and the input/output trace of the case.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alphabet::{InputSymbol, Liveness, NodeId, OutputSymbol, OutputWord, Symbol};
use crate::sulsim::{ClusterConfig, ClusterObservation, Link, Vulnerability};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DetectError {
    #[error("baseline from {baseline} cannot be compared with observation from {post}")]
    InstanceMismatch { baseline: String, post: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Criterion {
    /// Confidentiality leak.
    DC1,
    /// Cluster status or configuration change.
    DC2,
    /// App list manipulation.
    DC3,
    /// Data-plane reachability change.
    DC4,
    /// Resource exhaustion.
    DC5,
}

impl Criterion {
    pub const ALL: [Criterion; 5] = [Criterion::DC1, Criterion::DC2, Criterion::DC3, Criterion::DC4, Criterion::DC5];
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Observation captured after reset and before the case runs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Baseline {
    pub observation: ClusterObservation,
}

impl Baseline {
    pub fn capture(observation: ClusterObservation) -> Self {
        Baseline { observation }
    }
}

/// One executed letter and what the cluster answered.
pub type TraceStep = (InputSymbol, OutputWord);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evidence {
    ConfigLeak { step: usize, message: String, leaked: BTreeSet<NodeId> },
    LeaderChange { before: Option<NodeId>, after: Option<NodeId> },
    TermChange { before: u64, after: u64 },
    MembershipChange { node: NodeId, before: Option<Liveness>, after: Option<Liveness> },
    LinkChange { added: BTreeSet<Link>, removed: BTreeSet<Link> },
    AppListChange { before: Vec<String>, after: Vec<String> },
    ReachabilityChange { flipped: Vec<(String, String, bool)> },
    SessionExhaustion { sessions_open: u64, limit: u64 },
    LoadSpike { node: NodeId, load: u64, baseline: u64, factor: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub criterion: Criterion,
    /// Weakness class the evidence points at.
    pub class: Option<Vulnerability>,
    pub evidence: Evidence,
    pub case_ref: String,
}

/// DC5 limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dc5Thresholds {
    /// Flag when more sessions than this are open.
    pub max_sessions: u64,
    /// Flag when a node's load exceeds this multiple of its baseline load.
    pub load_factor: f64,
}

pub const SESSIONS_PER_MEMBER: u64 = 4;
pub const LOAD_FACTOR: f64 = 3.0;

/// The criterion an attack of class `v` is expected to trip.
pub fn expected_criterion(v: Vulnerability) -> Criterion {
    match v {
        Vulnerability::UnauthJoin => Criterion::DC1,
        Vulnerability::SeizeLeader | Vulnerability::FakeMember => Criterion::DC2,
        Vulnerability::ClearStore => Criterion::DC3,
        Vulnerability::FakeLink => Criterion::DC4,
        Vulnerability::SessionFlood => Criterion::DC5,
    }
}

pub fn thresholds(cfg: &ClusterConfig) -> Dc5Thresholds {
    Dc5Thresholds { max_sessions: SESSIONS_PER_MEMBER * cfg.members.len() as u64, load_factor: LOAD_FACTOR }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detector {
    pub members: BTreeSet<NodeId>,
    pub dummy_id: NodeId,
    pub dc5: Dc5Thresholds,
}

impl Detector {
    pub fn new(cfg: &ClusterConfig) -> Self {
        Detector {
            members: cfg.members.iter().cloned().collect(),
            dummy_id: cfg.dummy_id.clone(),
            dc5: thresholds(cfg),
        }
    }

    pub fn evaluate(
        &self,
        baseline: &Baseline,
        post: &ClusterObservation,
        trace: &[TraceStep],
        case_ref: &str,
    ) -> Result<Vec<Finding>, DetectError> {
        let b = &baseline.observation;
        if b.instance != post.instance {
            return Err(DetectError::InstanceMismatch { baseline: b.instance.clone(), post: post.instance.clone() });
        }
        let mut out = Vec::new();
        let mut emit = |criterion, class, evidence| {
            out.push(Finding { criterion, class, evidence, case_ref: case_ref.to_string() })
        };

        if let Some(evidence) = self.config_leak(trace) {
            emit(Criterion::DC1, Some(Vulnerability::UnauthJoin), evidence);
        }

        if b.leader != post.leader {
            emit(
                Criterion::DC2,
                Some(Vulnerability::SeizeLeader),
                Evidence::LeaderChange { before: b.leader.clone(), after: post.leader.clone() },
            );
        }
        if b.term != post.term {
            emit(
                Criterion::DC2,
                Some(Vulnerability::SeizeLeader),
                Evidence::TermChange { before: b.term, after: post.term },
            );
        }
        let nodes: BTreeSet<&NodeId> = b.membership.keys().chain(post.membership.keys()).collect();
        for node in nodes {
            let (before, after) = (b.membership.get(node).copied(), post.membership.get(node).copied());
            if before == after {
                continue;
            }
            let class = match (before, after) {
                (None, Some(_)) => Vulnerability::UnauthJoin,
                _ => Vulnerability::FakeMember,
            };
            emit(Criterion::DC2, Some(class), Evidence::MembershipChange { node: node.clone(), before, after });
        }
        if b.links != post.links {
            emit(
                Criterion::DC2,
                Some(Vulnerability::FakeLink),
                Evidence::LinkChange {
                    added: post.links.difference(&b.links).cloned().collect(),
                    removed: b.links.difference(&post.links).cloned().collect(),
                },
            );
        }

        if b.apps != post.apps {
            emit(
                Criterion::DC3,
                Some(Vulnerability::ClearStore),
                Evidence::AppListChange { before: b.apps.clone(), after: post.apps.clone() },
            );
        }

        let flipped = reachability_flips(b, post);
        if !flipped.is_empty() {
            emit(Criterion::DC4, Some(Vulnerability::FakeLink), Evidence::ReachabilityChange { flipped });
        }

        if post.sessions_open > self.dc5.max_sessions {
            emit(
                Criterion::DC5,
                Some(Vulnerability::SessionFlood),
                Evidence::SessionExhaustion { sessions_open: post.sessions_open, limit: self.dc5.max_sessions },
            );
        }
        for (node, &load) in &post.resource_load {
            let base = b.resource_load.get(node).copied().unwrap_or(0);
            if base > 0 && load as f64 > self.dc5.load_factor * base as f64 {
                emit(
                    Criterion::DC5,
                    Some(Vulnerability::SessionFlood),
                    Evidence::LoadSpike { node: node.clone(), load, baseline: base, factor: load as f64 / base as f64 },
                );
            }
        }
        Ok(out)
    }

    /// First output that hands the dummy node member configuration.
    fn config_leak(&self, trace: &[TraceStep]) -> Option<Evidence> {
        if self.members.contains(&self.dummy_id) {
            return None;
        }
        for (step, (_, word)) in trace.iter().enumerate() {
            for sym in word.symbols() {
                let OutputSymbol::Msg(msg @ (Symbol::BReq { nodes } | Symbol::BRes { nodes })) = sym else {
                    continue;
                };
                let leaked: BTreeSet<NodeId> = nodes.intersection(&self.members).cloned().collect();
                if !leaked.is_empty() {
                    return Some(Evidence::ConfigLeak { step, message: msg.to_string(), leaked });
                }
            }
        }
        None
    }
}

fn reachability_flips(b: &ClusterObservation, post: &ClusterObservation) -> Vec<(String, String, bool)> {
    let mut flipped = Vec::new();
    for (i, from) in post.switches.iter().enumerate() {
        for (j, to) in post.switches.iter().enumerate() {
            let before = b.reachability.get(i).and_then(|r| r.get(j)).copied().unwrap_or(false);
            let after = post.reachability[i][j];
            if before != after {
                flipped.push((from.clone(), to.clone(), after));
            }
        }
    }
    flipped
}

/// Per-criterion finding counts.
pub fn tally(findings: &[Finding]) -> BTreeMap<Criterion, usize> {
    let mut t = BTreeMap::new();
    for f in findings {
        *t.entry(f.criterion).or_insert(0) += 1;
    }
    t
}

#[cfg(test)]
mod tests;
