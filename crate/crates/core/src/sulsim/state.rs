use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::alphabet::{encode, ConcreteMessage, EncodeCtx, Liveness, NodeId, Symbol};

use super::dummy::DummyInput;
use super::topology::{physical_links, reachability, Link, SWITCHES};
use super::{ClusterConfig, ClusterObservation, DEFAULT_APPS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RaftRole {
    Follower,
    Candidate,
    Leader,
}

pub(super) const BASE_LOAD: u64 = 10;
pub(super) const SESSION_LOAD: u64 = 10;
pub(super) const THRASH_LOAD: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Target {
    Node(usize),
    Dummy,
}

#[derive(Debug, Clone)]
enum Net {
    Append { term: u64, leader: usize },
    AppendAck { term: u64 },
    Vote { term: u64, candidate: usize },
    VoteReply { term: u64, from: usize, granted: bool },
    Ping { prober: usize, origin: usize, seq: u64 },
    Ack { target: Target, origin: usize, seq: u64 },
    PingReq { origin: usize, target: Target, seq: u64 },
}

#[derive(Debug, Clone)]
enum Event {
    Net { to: usize, msg: Net },
    Dummy(DummyInput),
}

#[derive(Debug, Clone)]
struct Probe {
    seq: u64,
    target: Target,
    indirect_at: u64,
    expires: u64,
    indirect_sent: bool,
}

#[derive(Debug, Clone, Serialize)]
pub(super) struct Node {
    pub id: NodeId,
    pub role: RaftRole,
    pub term: u64,
    pub voted_for: Option<NodeId>,
    pub leader: Option<NodeId>,
    pub view: BTreeMap<NodeId, Liveness>,
    /// Peers dropped from the membership list on a spoofed death notice.
    pub removed: BTreeSet<NodeId>,
    pub apps: BTreeSet<String>,
    pub links: BTreeSet<Link>,
    #[serde(skip)]
    election_deadline: u64,
    #[serde(skip)]
    votes: BTreeSet<usize>,
    #[serde(skip)]
    next_heartbeat: u64,
    #[serde(skip)]
    next_probe: u64,
    #[serde(skip)]
    probes: Vec<Probe>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub(super) struct DummyState {
    pub discovered: bool,
    pub config_ok: bool,
    pub join_pending: bool,
    pub joined: bool,
}

#[derive(Debug, Clone)]
pub(super) struct Session {
    pub id: String,
    pub opened: u64,
}

#[derive(Debug, Clone)]
pub(super) struct ClusterState {
    pub now: u64,
    seq: u64,
    rng: ChaCha8Rng,
    pub members: Vec<NodeId>,
    pub cluster_id: String,
    pub dummy_id: NodeId,
    pub nodes: Vec<Node>,
    queue: BTreeMap<(u64, u64), Event>,
    pub outbox: Vec<(u64, ConcreteMessage)>,
    pub dummy: DummyState,
    pub sessions: Vec<Session>,
    dummy_pings: Vec<(usize, usize, u64)>,
}

#[derive(Serialize)]
struct Fingerprint<'a> {
    nodes: &'a [Node],
    dummy: &'a DummyState,
    sessions: usize,
    pending_inputs: usize,
}

impl ClusterState {
    pub fn new(cfg: &ClusterConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let (lo, hi) = cfg.election_timeout_range;
        let view: BTreeMap<NodeId, Liveness> = cfg.members.iter().map(|m| (m.clone(), Liveness::Alive)).collect();
        let nodes = cfg
            .members
            .iter()
            .enumerate()
            .map(|(i, id)| Node {
                id: id.clone(),
                role: RaftRole::Follower,
                term: 0,
                voted_for: None,
                leader: None,
                view: view.clone(),
                removed: BTreeSet::new(),
                apps: DEFAULT_APPS.iter().map(|s| s.to_string()).collect(),
                links: physical_links(),
                election_deadline: rng.gen_range(lo..=hi),
                votes: BTreeSet::new(),
                next_heartbeat: 0,
                next_probe: 1 + (i as u64 % cfg.heartbeat_threshold),
                probes: Vec::new(),
            })
            .collect();
        ClusterState {
            now: 0,
            seq: 0,
            rng,
            members: cfg.members.clone(),
            cluster_id: cfg.cluster_id.clone(),
            dummy_id: cfg.dummy_id.clone(),
            nodes,
            queue: BTreeMap::new(),
            outbox: Vec::new(),
            dummy: DummyState::default(),
            sessions: Vec::new(),
            dummy_pings: Vec::new(),
        }
    }

    fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    fn send(&mut self, to: usize, msg: Net) {
        let key = (self.now + 1, self.next_seq());
        self.queue.insert(key, Event::Net { to, msg });
    }

    pub fn schedule_dummy(&mut self, input: DummyInput) {
        let key = (self.now + 1, self.next_seq());
        self.queue.insert(key, Event::Dummy(input));
    }

    fn election_timeout(&mut self, cfg: &ClusterConfig) -> u64 {
        let (lo, hi) = cfg.election_timeout_range;
        self.now + self.rng.gen_range(lo..=hi)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.members.iter().position(|m| m == id)
    }

    /// Sends a message to the dummy node at the current tick.
    pub fn emit(&mut self, sender: usize, sym: &Symbol, term: u64) {
        let ctx =
            EncodeCtx { cluster_id: &self.cluster_id, self_id: &self.members[sender], ts: self.now, leader_term: term };
        let msg = encode(sym, ctx);
        self.outbox.push((self.now, msg));
    }

    pub fn step(&mut self, cfg: &ClusterConfig) {
        self.now += 1;
        while let Some(entry) = self.queue.first_entry() {
            if entry.key().0 > self.now {
                break;
            }
            match entry.remove() {
                Event::Net { to, msg } => self.on_net(cfg, to, msg),
                Event::Dummy(input) => self.handle_dummy(cfg, input),
            }
        }
        for i in 0..self.nodes.len() {
            self.raft_timers(cfg, i);
            self.swim_timers(cfg, i);
        }
        if self.now.is_multiple_of(cfg.session_reap_interval) {
            let now = self.now;
            if let Some(pos) = self.sessions.iter().position(|s| now - s.opened >= cfg.session_reap_interval) {
                let s = self.sessions.remove(pos);
                log::trace!("t={now} reaped idle session {}", s.id);
            }
        }
    }

    fn raft_timers(&mut self, cfg: &ClusterConfig, i: usize) {
        let node = &self.nodes[i];
        if node.role == RaftRole::Leader {
            if self.now >= node.next_heartbeat {
                self.heartbeat(cfg, i);
            }
            return;
        }
        if node.leader.as_deref() == Some(self.dummy_id.as_str()) {
            return;
        }
        if self.now >= node.election_deadline {
            self.start_election(cfg, i);
        }
    }

    fn heartbeat(&mut self, cfg: &ClusterConfig, i: usize) {
        let term = self.nodes[i].term;
        for j in 0..self.nodes.len() {
            if j != i {
                self.send(j, Net::Append { term, leader: i });
            }
        }
        if self.dummy.joined && cfg.keepalive_traffic {
            self.emit(i, &Symbol::RAReq, term);
        }
        self.nodes[i].next_heartbeat = self.now + cfg.heartbeat_threshold;
    }

    fn start_election(&mut self, cfg: &ClusterConfig, i: usize) {
        let deadline = self.election_timeout(cfg);
        let node = &mut self.nodes[i];
        node.term += 1;
        node.role = RaftRole::Candidate;
        node.voted_for = Some(node.id.clone());
        node.leader = None;
        node.votes = BTreeSet::from([i]);
        node.election_deadline = deadline;
        let term = node.term;
        log::trace!("t={} {} starts election for term {term}", self.now, node.id);
        for j in 0..self.nodes.len() {
            if j != i {
                self.send(j, Net::Vote { term, candidate: i });
            }
        }
    }

    fn step_down(&mut self, i: usize, term: u64) {
        let node = &mut self.nodes[i];
        node.term = term;
        node.role = RaftRole::Follower;
        node.voted_for = None;
        node.leader = None;
    }

    fn on_net(&mut self, cfg: &ClusterConfig, to: usize, msg: Net) {
        match msg {
            Net::Append { term, leader } => {
                if term < self.nodes[to].term {
                    return;
                }
                if term > self.nodes[to].term {
                    self.step_down(to, term);
                }
                let deadline = self.election_timeout(cfg);
                let leader_id = self.members[leader].clone();
                let node = &mut self.nodes[to];
                node.role = RaftRole::Follower;
                node.leader = Some(leader_id);
                node.election_deadline = deadline;
                self.send(leader, Net::AppendAck { term });
            }
            Net::AppendAck { term } => {
                if term > self.nodes[to].term {
                    self.step_down(to, term);
                }
            }
            Net::Vote { term, candidate } => {
                if term > self.nodes[to].term {
                    self.step_down(to, term);
                }
                let cand_id = self.members[candidate].clone();
                let node = &self.nodes[to];
                let granted = term == node.term && node.voted_for.as_ref().is_none_or(|v| *v == cand_id);
                if granted {
                    let deadline = self.election_timeout(cfg);
                    let node = &mut self.nodes[to];
                    node.voted_for = Some(cand_id);
                    node.election_deadline = deadline;
                }
                let term = self.nodes[to].term;
                self.send(candidate, Net::VoteReply { term, from: to, granted });
            }
            Net::VoteReply { term, from, granted } => {
                if term > self.nodes[to].term {
                    self.step_down(to, term);
                    return;
                }
                let node = &mut self.nodes[to];
                if node.role != RaftRole::Candidate || term != node.term || !granted {
                    return;
                }
                node.votes.insert(from);
                if node.votes.len() > self.members.len() / 2 {
                    node.role = RaftRole::Leader;
                    node.leader = Some(node.id.clone());
                    node.next_heartbeat = self.now;
                    log::trace!("t={} {} leads term {term}", self.now, node.id);
                }
            }
            Net::Ping { prober, origin, seq } => {
                self.send(prober, Net::Ack { target: Target::Node(to), origin, seq });
            }
            Net::Ack { target, origin, seq } => {
                if origin != to {
                    self.send(origin, Net::Ack { target, origin, seq });
                    return;
                }
                let node = &mut self.nodes[to];
                if let Some(pos) = node.probes.iter().position(|p| p.seq == seq) {
                    node.probes.remove(pos);
                    let id = match target {
                        Target::Node(j) => self.members[j].clone(),
                        Target::Dummy => self.dummy_id.clone(),
                    };
                    if !node.removed.contains(&id) {
                        node.view.insert(id, Liveness::Alive);
                    }
                }
            }
            Net::PingReq { origin, target, seq } => self.ping(to, origin, target, seq),
        }
    }

    fn ping(&mut self, prober: usize, origin: usize, target: Target, seq: u64) {
        match target {
            Target::Node(j) => self.send(j, Net::Ping { prober, origin, seq }),
            Target::Dummy => {
                let me =
                    crate::alphabet::NodeRef { id: self.dummy_id.clone(), kind: crate::alphabet::NodeKind::Unknown };
                let term = self.nodes[prober].term;
                self.emit(prober, &Symbol::PReq { n: me }, term);
                self.dummy_pings.push((prober, origin, seq));
            }
        }
    }

    /// The dummy answered a probe aimed at itself.
    pub fn dummy_alive(&mut self) {
        for (prober, origin, seq) in std::mem::take(&mut self.dummy_pings) {
            self.send(prober, Net::Ack { target: Target::Dummy, origin, seq });
        }
    }

    fn swim_timers(&mut self, cfg: &ClusterConfig, i: usize) {
        let now = self.now;
        if now >= self.nodes[i].next_probe {
            self.nodes[i].next_probe = now + cfg.heartbeat_threshold;
            let node = &self.nodes[i];
            let mut targets: Vec<Target> = (0..self.members.len())
                .filter(|&j| j != i && !node.removed.contains(&self.members[j]))
                .map(Target::Node)
                .collect();
            if self.dummy.joined && cfg.keepalive_traffic && !node.removed.contains(&self.dummy_id) {
                targets.push(Target::Dummy);
            }
            if let Some(&target) = targets.choose(&mut self.rng) {
                let seq = self.next_seq();
                self.nodes[i].probes.push(Probe {
                    seq,
                    target,
                    indirect_at: now + 2,
                    expires: now + 2 * cfg.heartbeat_threshold,
                    indirect_sent: false,
                });
                self.ping(i, i, target, seq);
            }
        }

        let mut k = 0;
        while k < self.nodes[i].probes.len() {
            let p = self.nodes[i].probes[k].clone();
            if now >= p.expires {
                self.nodes[i].probes.remove(k);
                let id = match p.target {
                    Target::Node(j) => self.members[j].clone(),
                    Target::Dummy => self.dummy_id.clone(),
                };
                log::debug!("t={now} {} marks {id} dead", self.members[i]);
                self.nodes[i].view.insert(id, Liveness::Dead);
                continue;
            }
            if !p.indirect_sent && now >= p.indirect_at {
                self.nodes[i].probes[k].indirect_sent = true;
                let mut helpers: Vec<usize> =
                    (0..self.members.len()).filter(|&j| j != i && Target::Node(j) != p.target).collect();
                helpers.shuffle(&mut self.rng);
                for h in helpers.into_iter().take(cfg.indirect_probe_fanout) {
                    self.send(h, Net::PingReq { origin: i, target: p.target, seq: p.seq });
                }
            }
            k += 1;
        }
    }

    pub fn max_term(&self) -> u64 {
        self.nodes.iter().map(|n| n.term).max().unwrap_or(0)
    }

    /// Leader acknowledged by a majority of nodes.
    pub fn leader(&self) -> Option<NodeId> {
        let mut counts: BTreeMap<&NodeId, usize> = BTreeMap::new();
        for n in &self.nodes {
            if let Some(l) = &n.leader {
                *counts.entry(l).or_default() += 1;
            }
        }
        counts.into_iter().find(|(_, c)| *c > self.nodes.len() / 2).map(|(l, _)| l.clone())
    }

    pub fn converged(&self) -> bool {
        let leaders: Vec<&Node> = self.nodes.iter().filter(|n| n.role == RaftRole::Leader).collect();
        let [l] = leaders.as_slice() else {
            return false;
        };
        self.nodes.iter().all(|n| n.leader.as_ref() == Some(&l.id) && n.term == l.term)
    }

    pub fn contact(&self) -> usize {
        self.members.len() - 1
    }

    /// Node hosting client sessions: the member leader, or the contact node.
    fn session_host(&self) -> usize {
        self.leader().and_then(|l| self.index_of(&l)).unwrap_or_else(|| self.contact())
    }

    pub fn observe(&self, cfg: &ClusterConfig) -> ClusterObservation {
        let mut membership = BTreeMap::new();
        let mut tracked: Vec<&NodeId> = self.members.iter().collect();
        if self.dummy.joined {
            tracked.push(&self.dummy_id);
        }
        for id in tracked {
            let dead = self.nodes.iter().any(|n| n.view.get(id) == Some(&Liveness::Dead));
            membership.insert(id.clone(), if dead { Liveness::Dead } else { Liveness::Alive });
        }
        let apps: BTreeSet<String> = self.nodes.iter().flat_map(|n| n.apps.iter().cloned()).collect();
        let links: BTreeSet<Link> = self.nodes.iter().flat_map(|n| n.links.iter().cloned()).collect();
        let host = self.session_host();
        let resource_load = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let mut load = BASE_LOAD + THRASH_LOAD * n.removed.len() as u64;
                if i == host {
                    load += SESSION_LOAD * self.sessions.len() as u64;
                }
                (n.id.clone(), load)
            })
            .collect();
        ClusterObservation {
            instance: cfg.instance(),
            tick: self.now,
            leader: self.leader(),
            term: self.max_term(),
            membership,
            apps: apps.into_iter().collect(),
            reachability: reachability(&links),
            links,
            switches: SWITCHES.iter().map(|s| s.to_string()).collect(),
            sessions_open: self.sessions.len() as u64,
            resource_load,
        }
    }

    pub fn fingerprint(&self) -> String {
        let pending_inputs = self.queue.values().filter(|e| matches!(e, Event::Dummy(_))).count();
        serde_json::to_string(&Fingerprint {
            nodes: &self.nodes,
            dummy: &self.dummy,
            sessions: self.sessions.len(),
            pending_inputs,
        })
        .expect("fingerprint serializes")
    }

    pub fn roles(&self) -> Vec<(NodeId, RaftRole, u64)> {
        self.nodes.iter().map(|n| (n.id.clone(), n.role, n.term)).collect()
    }

    /// Every node adopts `term` and follows `candidate`.
    pub fn hand_leadership(&mut self, cfg: &ClusterConfig, candidate: &str, term: u64) {
        for i in 0..self.nodes.len() {
            let deadline = self.election_timeout(cfg);
            let now = self.now;
            let node = &mut self.nodes[i];
            node.term = term;
            node.voted_for = Some(candidate.to_string());
            node.leader = Some(candidate.to_string());
            node.votes.clear();
            node.election_deadline = deadline;
            if node.id == candidate {
                node.role = RaftRole::Leader;
                node.next_heartbeat = now;
            } else {
                node.role = RaftRole::Follower;
            }
        }
    }
}
