//! Bridge between abstract symbols and a live SUL session.
//!
//! The proxy encodes each input with its logical clock, delivers it, then
//! advances the SUL for exactly one heartbeat threshold. Everything the SUL
//! sends meanwhile goes through the session keeper (which answers
//! keep-alives) into the [`SharedQueue`]; the translator drains the entries
//! stamped inside the window and abstracts them into an [`OutputWord`].

mod queue;
mod sim;
pub mod tcp;

pub use queue::SharedQueue;
pub use sim::SimProxy;

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::alphabet::{
    canonical_output, decode, encode, encode_frame, AlphabetConfig, ConcreteMessage, DecodeError, EncodeCtx,
    InputSymbol, Liveness, MessageType, NodeKind, NodeRef, OutputWord, Symbol,
};
use crate::learner::{SulError, SulOracle};
use crate::sulsim::{ClusterObservation, SimError};

#[derive(Debug, Error)]
pub enum ProxyError {
    #[error("session is closed")]
    SessionClosed,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("endpoint does not support {0}")]
    Unsupported(&'static str),
}

impl From<ProxyError> for SulError {
    fn from(e: ProxyError) -> Self {
        SulError(e.to_string())
    }
}

/// Transport to the system under learning.
pub trait SulEndpoint {
    fn deliver(&mut self, msg: &ConcreteMessage) -> Result<(), ProxyError>;
    /// Advances the SUL clock and returns what it sent to the dummy node.
    fn advance(&mut self, ticks: u64) -> Result<Vec<(u64, ConcreteMessage)>, ProxyError>;
    fn now(&self) -> u64;
    fn reset(&mut self) -> Result<(), ProxyError>;
    /// Current leader term as reported by the SUL.
    fn leader_term(&mut self) -> Result<u64, ProxyError>;
    fn observe(&mut self) -> Result<ClusterObservation, ProxyError> {
        Err(ProxyError::Unsupported("observe"))
    }
}

impl<T: SulEndpoint + ?Sized> SulEndpoint for Box<T> {
    fn deliver(&mut self, msg: &ConcreteMessage) -> Result<(), ProxyError> {
        (**self).deliver(msg)
    }

    fn advance(&mut self, ticks: u64) -> Result<Vec<(u64, ConcreteMessage)>, ProxyError> {
        (**self).advance(ticks)
    }

    fn now(&self) -> u64 {
        (**self).now()
    }

    fn reset(&mut self) -> Result<(), ProxyError> {
        (**self).reset()
    }

    fn leader_term(&mut self) -> Result<u64, ProxyError> {
        (**self).leader_term()
    }

    fn observe(&mut self) -> Result<ClusterObservation, ProxyError> {
        (**self).observe()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SessionContext {
    pub cluster_id: String,
    pub self_id: String,
    pub logical_clock: u64,
    pub observed_leader_term: u64,
    pub heartbeat_threshold: u64,
    pub open: bool,
}

impl SessionContext {
    fn tick_clock(&mut self) -> u64 {
        let ts = self.logical_clock;
        self.logical_clock += 1;
        ts
    }

    fn observe_term(&mut self, msg: &ConcreteMessage) {
        let carries = matches!(
            msg.message_type(),
            Some(MessageType::RaftVoteResponse | MessageType::RaftAppendRequest | MessageType::RaftAppendResponse)
        );
        if let (true, Some(t)) = (carries, msg.term()) {
            self.observed_leader_term = self.observed_leader_term.max(t);
        }
    }
}

/// Session keeper: answers probes of the dummy itself and leader heartbeats.
pub fn keepalive_autoreply(msg: &ConcreteMessage, ctx: &SessionContext) -> Option<ConcreteMessage> {
    let sym = match msg.message_type()? {
        MessageType::ProbeRequest if msg.str_field("target").ok()? == ctx.self_id => {
            Symbol::PRes { n: NodeRef { id: ctx.self_id.clone(), kind: NodeKind::Unknown }, s: Liveness::Alive }
        }
        MessageType::RaftAppendRequest => Symbol::RARes,
        _ => return None,
    };
    let term = msg.term().unwrap_or(ctx.observed_leader_term);
    Some(encode(
        &sym,
        EncodeCtx { cluster_id: &ctx.cluster_id, self_id: &ctx.self_id, ts: ctx.logical_clock, leader_term: term },
    ))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ProxyStats {
    pub sends: u64,
    pub windows: u64,
    pub keepalives_answered: u64,
    pub resets: u64,
}

pub struct Proxy<E: SulEndpoint> {
    endpoint: E,
    alphabet: AlphabetConfig,
    ctx: SessionContext,
    queue: SharedQueue,
    window_start: Option<u64>,
    frame_log: Option<Box<dyn Write + Send>>,
    stats: ProxyStats,
}

impl<E: SulEndpoint> Proxy<E> {
    pub fn new(mut endpoint: E, alphabet: AlphabetConfig, heartbeat_threshold: u64) -> Result<Self, ProxyError> {
        let term = endpoint.leader_term()?;
        let ctx = SessionContext {
            cluster_id: alphabet.cluster_id.clone(),
            self_id: alphabet.self_id.clone(),
            logical_clock: 0,
            observed_leader_term: term,
            heartbeat_threshold,
            open: true,
        };
        Ok(Proxy {
            endpoint,
            alphabet,
            ctx,
            queue: SharedQueue::new(),
            window_start: None,
            frame_log: None,
            stats: ProxyStats::default(),
        })
    }

    pub fn context(&self) -> &SessionContext {
        &self.ctx
    }

    pub fn alphabet(&self) -> &AlphabetConfig {
        &self.alphabet
    }

    pub fn endpoint(&self) -> &E {
        &self.endpoint
    }

    pub fn endpoint_mut(&mut self) -> &mut E {
        &mut self.endpoint
    }

    pub fn queue(&self) -> &SharedQueue {
        &self.queue
    }

    pub fn stats(&self) -> ProxyStats {
        self.stats
    }

    /// Copies every frame exchanged with the SUL to `sink` as JSON lines.
    pub fn set_frame_log(&mut self, sink: Box<dyn Write + Send>) {
        self.frame_log = Some(sink);
    }

    pub fn close(&mut self) {
        self.ctx.open = false;
    }

    fn log_frame(&mut self, dir: &str, msg: &ConcreteMessage) {
        if let Some(w) = self.frame_log.as_mut() {
            let hex: String = encode_frame(msg).iter().map(|b| format!("{b:02x}")).collect();
            let line = serde_json::json!({ "dir": dir, "frame": hex });
            if let Err(e) = writeln!(w, "{line}") {
                log::warn!("frame log write failed: {e}");
                self.frame_log = None;
            }
        }
    }

    fn transmit(&mut self, msg: &ConcreteMessage) -> Result<(), ProxyError> {
        self.log_frame("out", msg);
        self.endpoint.deliver(msg)
    }

    /// Encodes and delivers `sym`; returns the logical timestamp used.
    pub fn send_symbol(&mut self, sym: &InputSymbol) -> Result<u64, ProxyError> {
        if !self.ctx.open {
            return Err(ProxyError::SessionClosed);
        }
        let ts = self.ctx.tick_clock();
        let msg = encode(
            sym,
            EncodeCtx {
                cluster_id: &self.ctx.cluster_id,
                self_id: &self.ctx.self_id,
                ts,
                leader_term: self.ctx.observed_leader_term,
            },
        );
        self.transmit(&msg)?;
        self.window_start = Some(self.endpoint.now());
        self.stats.sends += 1;
        Ok(ts)
    }

    /// Receiver side: keep-alives are answered immediately, every message is
    /// queued with its SUL timestamp.
    fn receive(&mut self, ts: u64, msg: ConcreteMessage) -> Result<(), ProxyError> {
        self.log_frame("in", &msg);
        self.ctx.observe_term(&msg);
        if let Some(reply) = keepalive_autoreply(&msg, &self.ctx) {
            self.ctx.tick_clock();
            self.stats.keepalives_answered += 1;
            self.transmit(&reply)?;
        }
        self.queue.push(ts, msg);
        Ok(())
    }

    /// Runs one threshold window from the last send and abstracts the replies.
    pub fn collect_window(&mut self) -> Result<OutputWord, ProxyError> {
        let start = self.window_start.take().unwrap_or_else(|| self.endpoint.now());
        let end = start + self.ctx.heartbeat_threshold;
        while self.endpoint.now() < end {
            for (ts, msg) in self.endpoint.advance(1)? {
                self.receive(ts, msg)?;
            }
        }
        self.stats.windows += 1;
        let mut events = Vec::new();
        for (ts, msg) in self.queue.drain_before(end) {
            events.push((ts, decode(&msg, &self.alphabet, self.ctx.observed_leader_term)?));
        }
        Ok(canonical_output(&events, &self.alphabet))
    }

    pub fn reset_session(&mut self) -> Result<(), ProxyError> {
        self.endpoint.reset()?;
        self.queue.clear();
        self.window_start = None;
        self.ctx.logical_clock = 0;
        self.ctx.observed_leader_term = self.endpoint.leader_term()?;
        self.ctx.open = true;
        self.stats.resets += 1;
        Ok(())
    }

    pub fn observe(&mut self) -> Result<ClusterObservation, ProxyError> {
        self.endpoint.observe()
    }
}

impl<E: SulEndpoint> SulOracle for Proxy<E> {
    fn reset(&mut self) -> Result<(), SulError> {
        Ok(self.reset_session()?)
    }

    fn step(&mut self, input: &InputSymbol) -> Result<OutputWord, SulError> {
        self.send_symbol(input)?;
        Ok(self.collect_window()?)
    }
}
