//! Abstract input/output alphabets for the East-West cluster protocol.
//!
//! Every letter corresponds to one cluster message type. Parameterized letters
//! draw their arguments from small bounded domains so the learner sees a
//! finite alphabet: one known member, one unknown identity, the learner's own
//! identity, and four node sets built from those.

mod codec;
mod output;

pub use codec::{
    decode, decode_frame, encode, encode_frame, read_frame, write_frame, ConcreteMessage, DecodeError, EncodeCtx,
    MessageType, MAX_FRAME_LEN,
};
pub use output::{canonical_output, OutputWord};

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identifier of a cluster node as carried on the wire.
pub type NodeId = String;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AlphabetError {
    #[error("alphabet config has an empty member set")]
    EmptyMembers,
    #[error("self id {0:?} must not be a configured member")]
    SelfIsMember(String),
    #[error("unknown id {0:?} collides with a member or the self id")]
    UnknownCollides(String),
    #[error("could not parse alphabet config: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Known,
    Unknown,
}

/// A node reference; `kind` is `Known` iff the id is a configured member.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeRef {
    pub id: NodeId,
    pub kind: NodeKind,
}

impl NodeRef {
    pub fn resolve(id: impl Into<NodeId>, cfg: &AlphabetConfig) -> Self {
        let id = id.into();
        let kind = if cfg.is_member(&id) { NodeKind::Known } else { NodeKind::Unknown };
        NodeRef { id, kind }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Liveness {
    Alive,
    Dead,
}

impl Liveness {
    pub fn as_str(self) -> &'static str {
        match self {
            Liveness::Alive => "alive",
            Liveness::Dead => "dead",
        }
    }
}

/// Election term relative to the leader term the session has observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermClass {
    Higher,
    Current,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vote {
    Approved,
    Rejected,
}

impl Vote {
    pub fn as_str(self) -> &'static str {
        match self {
            Vote::Approved => "approved",
            Vote::Rejected => "rejected",
        }
    }
}

/// Shared data targeted by a command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    App,
    Topo,
}

impl DataKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DataKind::App => "app",
            DataKind::Topo => "topo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandOp {
    Add,
    Modify,
    Remove,
}

impl CommandOp {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandOp::Add => "add",
            CommandOp::Modify => "modify",
            CommandOp::Remove => "remove",
        }
    }
}

/// Set of node ids, kept sorted.
pub type NodeSet = BTreeSet<NodeId>;

/// One letter of the cluster message alphabet.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Symbol {
    PReq { n: NodeRef },
    PRes { n: NodeRef, s: Liveness },
    BReq { nodes: NodeSet },
    BRes { nodes: NodeSet },
    RJReq { n: NodeRef },
    RJRes,
    RConReq,
    RConRes,
    RVReq { n: NodeRef, t: TermClass },
    RVRes { v: Vote },
    RComReq { d: DataKind, o: CommandOp },
    RComRes,
    RAReq,
    RARes,
}

/// Input letters are plain symbols; `NoResponse` only exists on the output side.
pub type InputSymbol = Symbol;

impl Symbol {
    pub fn message_type(&self) -> MessageType {
        match self {
            Symbol::PReq { .. } => MessageType::ProbeRequest,
            Symbol::PRes { .. } => MessageType::ProbeResponse,
            Symbol::BReq { .. } => MessageType::BootstrapRequest,
            Symbol::BRes { .. } => MessageType::BootstrapResponse,
            Symbol::RJReq { .. } => MessageType::RaftJoinRequest,
            Symbol::RJRes => MessageType::RaftJoinResponse,
            Symbol::RConReq => MessageType::RaftConfigureRequest,
            Symbol::RConRes => MessageType::RaftConfigureResponse,
            Symbol::RVReq { .. } => MessageType::RaftVoteRequest,
            Symbol::RVRes { .. } => MessageType::RaftVoteResponse,
            Symbol::RComReq { .. } => MessageType::RaftCommandRequest,
            Symbol::RComRes => MessageType::RaftCommandResponse,
            Symbol::RAReq => MessageType::RaftAppendRequest,
            Symbol::RARes => MessageType::RaftAppendResponse,
        }
    }

    pub fn is_parameterized(&self) -> bool {
        !matches!(
            self,
            Symbol::RJRes | Symbol::RConReq | Symbol::RConRes | Symbol::RComRes | Symbol::RAReq | Symbol::RARes
        )
    }

    /// Keep-alive letters: probes aimed at the learner's own identity and
    /// append-request heartbeats.
    pub fn is_keepalive(&self, self_id: &str) -> bool {
        match self {
            Symbol::PReq { n } => n.id == self_id,
            Symbol::RAReq => true,
            _ => false,
        }
    }
}

fn fmt_set(nodes: &NodeSet) -> String {
    let v: Vec<&str> = nodes.iter().map(String::as_str).collect();
    format!("{{{}}}", v.join(","))
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::PReq { n } => write!(f, "PReq({})", n.id),
            Symbol::PRes { n, s } => write!(f, "PRes({},{})", n.id, s.as_str()),
            Symbol::BReq { nodes } => write!(f, "BReq({})", fmt_set(nodes)),
            Symbol::BRes { nodes } => write!(f, "BRes({})", fmt_set(nodes)),
            Symbol::RJReq { n } => write!(f, "RJReq({})", n.id),
            Symbol::RJRes => f.write_str("RJRes"),
            Symbol::RConReq => f.write_str("RConReq"),
            Symbol::RConRes => f.write_str("RConRes"),
            Symbol::RVReq { n, t } => {
                let t = match t {
                    TermClass::Higher => "th",
                    TermClass::Current => "tc",
                };
                write!(f, "RVReq({},{})", n.id, t)
            }
            Symbol::RVRes { v } => write!(f, "RVRes({})", v.as_str()),
            Symbol::RComReq { d, o } => write!(f, "RComReq({},{})", d.as_str(), o.as_str()),
            Symbol::RComRes => f.write_str("RComRes"),
            Symbol::RAReq => f.write_str("RAReq"),
            Symbol::RARes => f.write_str("RARes"),
        }
    }
}

/// Output letter: a decoded cluster message, or the window expiring empty.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OutputSymbol {
    Msg(Symbol),
    NoResponse,
}

impl From<Symbol> for OutputSymbol {
    fn from(s: Symbol) -> Self {
        OutputSymbol::Msg(s)
    }
}

impl fmt::Display for OutputSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OutputSymbol::Msg(s) => s.fmt(f),
            OutputSymbol::NoResponse => f.write_str("-"),
        }
    }
}

fn default_unknown_id() -> String {
    "Z".to_string()
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlphabetConfig {
    pub members: Vec<NodeId>,
    pub self_id: NodeId,
    pub cluster_id: String,
    #[serde(default = "default_true")]
    pub include_keepalive_as_others: bool,
    /// Identity used for the "not a member" node parameter.
    #[serde(default = "default_unknown_id")]
    pub unknown_id: NodeId,
}

impl AlphabetConfig {
    pub fn new(members: Vec<NodeId>, self_id: impl Into<String>, cluster_id: impl Into<String>) -> Self {
        AlphabetConfig {
            members,
            self_id: self_id.into(),
            cluster_id: cluster_id.into(),
            include_keepalive_as_others: true,
            unknown_id: default_unknown_id(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, AlphabetError> {
        let cfg: AlphabetConfig = serde_json::from_str(text).map_err(|e| AlphabetError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), AlphabetError> {
        if self.members.is_empty() {
            return Err(AlphabetError::EmptyMembers);
        }
        if self.is_member(&self.self_id) {
            return Err(AlphabetError::SelfIsMember(self.self_id.clone()));
        }
        if self.is_member(&self.unknown_id) || self.unknown_id == self.self_id {
            return Err(AlphabetError::UnknownCollides(self.unknown_id.clone()));
        }
        Ok(())
    }

    pub fn is_member(&self, id: &str) -> bool {
        self.members.iter().any(|m| m == id)
    }

    pub fn member_set(&self) -> NodeSet {
        self.members.iter().cloned().collect()
    }

    /// The fixed known member used for `n ∈ N` parameters.
    pub fn known_ref(&self) -> NodeRef {
        NodeRef { id: self.members[0].clone(), kind: NodeKind::Known }
    }

    pub fn unknown_ref(&self) -> NodeRef {
        NodeRef { id: self.unknown_id.clone(), kind: NodeKind::Unknown }
    }

    pub fn self_ref(&self) -> NodeRef {
        NodeRef { id: self.self_id.clone(), kind: NodeKind::Unknown }
    }

    /// Node-set domain: ∅, {self}, N, N ∪ {self}.
    pub fn node_set_domain(&self) -> Vec<NodeSet> {
        let members = self.member_set();
        let mut with_self = members.clone();
        with_self.insert(self.self_id.clone());
        vec![NodeSet::new(), std::iter::once(self.self_id.clone()).collect(), members, with_self]
    }

    fn node_domain(&self) -> [NodeRef; 3] {
        [self.known_ref(), self.unknown_ref(), self.self_ref()]
    }
}

/// Expands every alphabet entry over its bounded parameter domain.
///
/// Order follows the message table: discovery and membership messages, then
/// election, then synchronization. Parameters vary with the last one fastest.
pub fn enumerate_input_alphabet(cfg: &AlphabetConfig) -> Result<Vec<InputSymbol>, AlphabetError> {
    cfg.validate()?;
    let nodes = cfg.node_domain();
    let sets = cfg.node_set_domain();
    let mut out = Vec::with_capacity(40);

    for n in &nodes {
        out.push(Symbol::PReq { n: n.clone() });
    }
    for n in &nodes {
        for s in [Liveness::Alive, Liveness::Dead] {
            out.push(Symbol::PRes { n: n.clone(), s });
        }
    }
    for set in &sets {
        out.push(Symbol::BReq { nodes: set.clone() });
    }
    for set in &sets {
        out.push(Symbol::BRes { nodes: set.clone() });
    }
    for n in &nodes {
        out.push(Symbol::RJReq { n: n.clone() });
    }
    out.extend([Symbol::RJRes, Symbol::RConReq, Symbol::RConRes]);
    for n in &nodes {
        for t in [TermClass::Higher, TermClass::Current] {
            out.push(Symbol::RVReq { n: n.clone(), t });
        }
    }
    for v in [Vote::Approved, Vote::Rejected] {
        out.push(Symbol::RVRes { v });
    }
    for d in [DataKind::App, DataKind::Topo] {
        for o in [CommandOp::Add, CommandOp::Modify, CommandOp::Remove] {
            out.push(Symbol::RComReq { d, o });
        }
    }
    out.extend([Symbol::RComRes, Symbol::RAReq, Symbol::RARes]);
    Ok(out)
}

/// Letters of `alphabet` with the same message type as `sym` but different
/// arguments: the candidates for an argument swap.
pub fn argument_alternatives<'a>(sym: &Symbol, alphabet: &'a [InputSymbol]) -> Vec<&'a InputSymbol> {
    if !sym.is_parameterized() {
        return Vec::new();
    }
    let ty = sym.message_type();
    alphabet.iter().filter(|s| s.message_type() == ty && *s != sym).collect()
}
