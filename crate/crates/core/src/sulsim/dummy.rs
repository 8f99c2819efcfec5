//! Cluster-side handling of messages from the external dummy node.

use crate::alphabet::{
    CommandOp, ConcreteMessage, DataKind, Liveness, MessageType, NodeId, NodeKind, NodeRef, NodeSet, Symbol, Vote,
};

use super::state::ClusterState;
use super::topology::{link, master_of, FAKE_LINK};
use super::{ClusterConfig, SimError, Vulnerability, DEFAULT_APPS};

#[derive(Debug, Clone)]
pub(super) enum DummyInput {
    Probe {
        target: NodeId,
    },
    ProbeReply {
        node: NodeId,
        status: Liveness,
    },
    BootstrapRequest {
        members: NodeSet,
    },
    BootstrapResponse {
        members: NodeSet,
    },
    Join {
        member: NodeId,
    },
    Configure,
    Vote {
        candidate: NodeId,
        term: u64,
    },
    Command {
        data: DataKind,
        op: CommandOp,
        member_id: String,
    },
    Append,
    /// Responses the cluster accepts but does not act on.
    Ignored,
}

pub(super) fn parse(msg: &ConcreteMessage) -> Result<DummyInput, SimError> {
    let bad = |e: crate::alphabet::DecodeError| SimError::Malformed(e.to_string());
    let ty =
        msg.message_type().ok_or_else(|| SimError::Malformed(format!("unknown message type {:?}", msg.msg_type)))?;
    let input = match ty {
        MessageType::ProbeRequest => DummyInput::Probe { target: msg.str_field("target").map_err(bad)?.to_string() },
        MessageType::ProbeResponse => DummyInput::ProbeReply {
            node: msg.str_field("node").map_err(bad)?.to_string(),
            status: match msg.str_field("status").map_err(bad)? {
                "alive" => Liveness::Alive,
                "dead" => Liveness::Dead,
                other => return Err(SimError::Malformed(format!("bad status {other:?}"))),
            },
        },
        MessageType::BootstrapRequest => {
            DummyInput::BootstrapRequest { members: msg.set_field("members").map_err(bad)? }
        }
        MessageType::BootstrapResponse => {
            DummyInput::BootstrapResponse { members: msg.set_field("members").map_err(bad)? }
        }
        MessageType::RaftJoinRequest => DummyInput::Join { member: msg.str_field("member").map_err(bad)?.to_string() },
        MessageType::RaftConfigureRequest => DummyInput::Configure,
        MessageType::RaftVoteRequest => DummyInput::Vote {
            candidate: msg.str_field("candidate").map_err(bad)?.to_string(),
            term: msg.u64_field("term").map_err(bad)?,
        },
        MessageType::RaftCommandRequest => DummyInput::Command {
            data: match msg.str_field("data").map_err(bad)? {
                "app" => DataKind::App,
                "topo" => DataKind::Topo,
                other => return Err(SimError::Malformed(format!("bad data kind {other:?}"))),
            },
            op: match msg.str_field("op").map_err(bad)? {
                "add" => CommandOp::Add,
                "modify" => CommandOp::Modify,
                "remove" => CommandOp::Remove,
                other => return Err(SimError::Malformed(format!("bad op {other:?}"))),
            },
            member_id: msg.str_field("member_id").map_err(bad)?.to_string(),
        },
        MessageType::RaftAppendRequest => {
            msg.u64_field("term").map_err(bad)?;
            DummyInput::Append
        }
        MessageType::RaftJoinResponse
        | MessageType::RaftConfigureResponse
        | MessageType::RaftVoteResponse
        | MessageType::RaftCommandResponse
        | MessageType::RaftAppendResponse => DummyInput::Ignored,
    };
    Ok(input)
}

fn node_ref(id: &str) -> NodeRef {
    NodeRef { id: id.to_string(), kind: NodeKind::Known }
}

impl ClusterState {
    fn reply(&mut self, sym: Symbol) {
        let term = self.max_term();
        let contact = self.contact();
        self.emit(contact, &sym, term);
    }

    fn leaked_members(&self, cfg: &ClusterConfig) -> NodeSet {
        if cfg.has(Vulnerability::UnauthJoin) {
            self.members.iter().cloned().collect()
        } else {
            NodeSet::new()
        }
    }

    fn expected_config(&self) -> NodeSet {
        let mut set: NodeSet = self.members.iter().cloned().collect();
        set.insert(self.dummy_id.clone());
        set
    }

    fn try_complete_join(&mut self) {
        if self.dummy.joined || !self.dummy.join_pending || !self.dummy.config_ok {
            return;
        }
        self.dummy.joined = true;
        self.dummy.join_pending = false;
        let id = self.dummy_id.clone();
        for n in &mut self.nodes {
            n.view.insert(id.clone(), Liveness::Alive);
        }
        log::debug!("t={} dummy {id} joined the cluster", self.now);
        self.reply(Symbol::RJRes);
    }

    pub(super) fn handle_dummy(&mut self, cfg: &ClusterConfig, input: DummyInput) {
        match input {
            DummyInput::Probe { target } => {
                let contact = self.contact();
                let status = if self.index_of(&target).is_some() || target == self.dummy_id {
                    self.nodes[contact].view.get(&target).copied().unwrap_or(Liveness::Dead)
                } else {
                    Liveness::Dead
                };
                self.reply(Symbol::PRes { n: node_ref(&target), s: status });
                if !self.dummy.discovered {
                    self.dummy.discovered = true;
                    if !self.dummy.joined {
                        let nodes = self.leaked_members(cfg);
                        self.reply(Symbol::BReq { nodes });
                    }
                }
            }
            DummyInput::ProbeReply { node, status } => {
                if node == self.dummy_id {
                    if status == Liveness::Alive {
                        self.dummy_alive();
                    }
                    return;
                }
                let contact = self.contact();
                if !cfg.has(Vulnerability::FakeMember)
                    || self.index_of(&node).is_none()
                    || node == self.members[contact]
                {
                    return;
                }
                let victim = &mut self.nodes[contact];
                match status {
                    Liveness::Dead => {
                        victim.removed.insert(node.clone());
                    }
                    Liveness::Alive => {
                        victim.removed.remove(&node);
                    }
                }
                victim.view.insert(node, status);
            }
            DummyInput::BootstrapRequest { members } => {
                let nodes = self.leaked_members(cfg);
                self.reply(Symbol::BRes { nodes });
                if cfg.has(Vulnerability::UnauthJoin) {
                    self.dummy.config_ok = members == self.expected_config();
                    self.try_complete_join();
                }
            }
            DummyInput::BootstrapResponse { members } => {
                if cfg.has(Vulnerability::UnauthJoin) {
                    self.dummy.config_ok = members == self.expected_config();
                    self.try_complete_join();
                }
            }
            DummyInput::Join { member } => {
                if member != self.dummy_id {
                    return;
                }
                if self.dummy.joined {
                    self.reply(Symbol::RJRes);
                } else if cfg.has(Vulnerability::UnauthJoin) {
                    self.dummy.join_pending = true;
                    self.try_complete_join();
                }
            }
            DummyInput::Configure => {
                if self.dummy.joined {
                    self.reply(Symbol::RConRes);
                }
            }
            DummyInput::Vote { candidate, term } => {
                let current = self.max_term();
                let eligible = candidate == self.dummy_id || self.index_of(&candidate).is_some();
                if cfg.has(Vulnerability::SeizeLeader) && term > current && eligible {
                    log::debug!("t={} leadership handed to {candidate} at term {term}", self.now);
                    self.hand_leadership(cfg, &candidate, term);
                    self.reply(Symbol::RVRes { v: Vote::Approved });
                } else {
                    self.reply(Symbol::RVRes { v: Vote::Rejected });
                }
            }
            DummyInput::Command { data, op, member_id } => self.command(cfg, data, op, member_id),
            DummyInput::Append => {
                if self.leader().as_ref() == Some(&self.dummy_id) {
                    self.reply(Symbol::RARes);
                }
            }
            DummyInput::Ignored => {}
        }
    }

    fn command(&mut self, cfg: &ClusterConfig, data: DataKind, op: CommandOp, member_id: String) {
        let joined = self.dummy.joined;
        let mut accepted = joined;
        if cfg.has(Vulnerability::SessionFlood) && !self.sessions.iter().any(|s| s.id == member_id) {
            let opened = self.now;
            self.sessions.push(super::state::Session { id: member_id, opened });
        }
        let fake = link(FAKE_LINK.0, FAKE_LINK.1);
        match (data, op) {
            (DataKind::App, CommandOp::Remove) => {
                if cfg.has(Vulnerability::ClearStore) && self.nodes.iter().any(|n| !n.apps.is_empty()) {
                    for n in &mut self.nodes {
                        n.apps.clear();
                    }
                    accepted = true;
                }
            }
            (DataKind::App, CommandOp::Add) => {
                if joined {
                    for n in &mut self.nodes {
                        n.apps.extend(DEFAULT_APPS.iter().map(|s| s.to_string()));
                    }
                }
            }
            (DataKind::Topo, CommandOp::Add) => {
                if cfg.has(Vulnerability::FakeLink) && self.nodes.iter().any(|n| !n.links.contains(&fake)) {
                    let master = master_of(FAKE_LINK.0, &self.members).clone();
                    log::debug!("t={} {master} accepts unverified link {fake:?}", self.now);
                    for n in &mut self.nodes {
                        n.links.insert(fake.clone());
                    }
                    accepted = true;
                }
            }
            (DataKind::Topo, CommandOp::Remove) => {
                if cfg.has(Vulnerability::FakeLink) && self.nodes.iter().any(|n| n.links.contains(&fake)) {
                    for n in &mut self.nodes {
                        n.links.remove(&fake);
                    }
                    accepted = true;
                }
            }
            (DataKind::App, CommandOp::Modify) | (DataKind::Topo, CommandOp::Modify) => {}
        }
        if accepted {
            self.reply(Symbol::RComRes);
        }
    }
}
