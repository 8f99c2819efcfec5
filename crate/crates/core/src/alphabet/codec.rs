//! Wire codec: abstract symbols <-> concrete messages <-> length-prefixed frames.
//!
//! A frame is a 4-byte big-endian body length followed by a UTF-8 JSON object
//! with the keys `cluster_id`, `payload`, `sender`, `ts` and `type`. Keys are
//! emitted in sorted order so equal messages always produce equal bytes.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use thiserror::Error;

use super::{AlphabetConfig, CommandOp, DataKind, Liveness, NodeRef, NodeSet, OutputSymbol, Symbol, TermClass, Vote};

/// Upper bound on a frame body; larger length prefixes are rejected before
/// allocating.
pub const MAX_FRAME_LEN: usize = 1 << 20;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("frame truncated: need {need} bytes, have {have}")]
    Truncated { need: usize, have: usize },
    #[error("frame length {0} exceeds limit")]
    TooLarge(usize),
    #[error("frame has {0} trailing bytes")]
    Trailing(usize),
    #[error("frame body is not valid JSON: {0}")]
    Json(String),
    #[error("message field {field:?}: {reason}")]
    Field { field: &'static str, reason: String },
    #[error("unknown message type {0:?}")]
    UnknownType(String),
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

fn field_err(field: &'static str, reason: impl Into<String>) -> DecodeError {
    DecodeError::Field { field, reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MessageType {
    ProbeRequest,
    ProbeResponse,
    BootstrapRequest,
    BootstrapResponse,
    RaftJoinRequest,
    RaftJoinResponse,
    RaftConfigureRequest,
    RaftConfigureResponse,
    RaftVoteRequest,
    RaftVoteResponse,
    RaftCommandRequest,
    RaftCommandResponse,
    RaftAppendRequest,
    RaftAppendResponse,
}

impl MessageType {
    pub const ALL: [MessageType; 14] = [
        MessageType::ProbeRequest,
        MessageType::ProbeResponse,
        MessageType::BootstrapRequest,
        MessageType::BootstrapResponse,
        MessageType::RaftJoinRequest,
        MessageType::RaftJoinResponse,
        MessageType::RaftConfigureRequest,
        MessageType::RaftConfigureResponse,
        MessageType::RaftVoteRequest,
        MessageType::RaftVoteResponse,
        MessageType::RaftCommandRequest,
        MessageType::RaftCommandResponse,
        MessageType::RaftAppendRequest,
        MessageType::RaftAppendResponse,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            MessageType::ProbeRequest => "ProbeRequest",
            MessageType::ProbeResponse => "ProbeResponse",
            MessageType::BootstrapRequest => "BootstrapRequest",
            MessageType::BootstrapResponse => "BootstrapResponse",
            MessageType::RaftJoinRequest => "RaftJoinRequest",
            MessageType::RaftJoinResponse => "RaftJoinResponse",
            MessageType::RaftConfigureRequest => "RaftConfigureRequest",
            MessageType::RaftConfigureResponse => "RaftConfigureResponse",
            MessageType::RaftVoteRequest => "RaftVoteRequest",
            MessageType::RaftVoteResponse => "RaftVoteResponse",
            MessageType::RaftCommandRequest => "RaftCommandRequest",
            MessageType::RaftCommandResponse => "RaftCommandResponse",
            MessageType::RaftAppendRequest => "RaftAppendRequest",
            MessageType::RaftAppendResponse => "RaftAppendResponse",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.tag() == tag)
    }
}

/// A concrete East-West message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConcreteMessage {
    pub cluster_id: String,
    pub sender: String,
    /// Sender-local logical timestamp.
    pub ts: u64,
    #[serde(rename = "type")]
    pub msg_type: String,
    pub payload: Map<String, Value>,
}

impl ConcreteMessage {
    pub fn new(
        cluster_id: impl Into<String>,
        sender: impl Into<String>,
        ts: u64,
        ty: MessageType,
        payload: Value,
    ) -> Self {
        let payload = match payload {
            Value::Object(m) => m,
            Value::Null => Map::new(),
            other => {
                let mut m = Map::new();
                m.insert("value".into(), other);
                m
            }
        };
        ConcreteMessage {
            cluster_id: cluster_id.into(),
            sender: sender.into(),
            ts,
            msg_type: ty.tag().to_string(),
            payload,
        }
    }

    pub fn message_type(&self) -> Option<MessageType> {
        MessageType::from_tag(&self.msg_type)
    }

    pub fn str_field(&self, field: &'static str) -> Result<&str, DecodeError> {
        self.payload.get(field).and_then(Value::as_str).ok_or_else(|| field_err(field, "missing or not a string"))
    }

    pub fn u64_field(&self, field: &'static str) -> Result<u64, DecodeError> {
        self.payload
            .get(field)
            .and_then(Value::as_u64)
            .ok_or_else(|| field_err(field, "missing or not a non-negative integer"))
    }

    pub fn set_field(&self, field: &'static str) -> Result<NodeSet, DecodeError> {
        let arr = self
            .payload
            .get(field)
            .and_then(Value::as_array)
            .ok_or_else(|| field_err(field, "missing or not an array"))?;
        arr.iter()
            .map(|v| v.as_str().map(str::to_string).ok_or_else(|| field_err(field, "non-string element")))
            .collect()
    }

    /// Payload term, when the message carries one.
    pub fn term(&self) -> Option<u64> {
        self.payload.get("term").and_then(Value::as_u64)
    }

    /// Canonical JSON body: object keys sorted.
    pub fn to_json_bytes(&self) -> Vec<u8> {
        let v = json!({
            "cluster_id": self.cluster_id,
            "sender": self.sender,
            "ts": self.ts,
            "type": self.msg_type,
            "payload": Value::Object(self.payload.clone()),
        });
        serde_json::to_vec(&v).expect("json values always serialize")
    }
}

/// Length-prefixed frame for one message.
pub fn encode_frame(msg: &ConcreteMessage) -> Vec<u8> {
    let body = msg.to_json_bytes();
    let mut out = Vec::with_capacity(4 + body.len());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    out
}

fn parse_body(body: &[u8]) -> Result<ConcreteMessage, DecodeError> {
    let text = std::str::from_utf8(body).map_err(|e| DecodeError::Json(e.to_string()))?;
    let v: Value = serde_json::from_str(text).map_err(|e| DecodeError::Json(e.to_string()))?;
    let obj = v.as_object().ok_or_else(|| DecodeError::Json("body is not an object".into()))?;
    let get_str = |k: &'static str| -> Result<String, DecodeError> {
        obj.get(k).and_then(Value::as_str).map(str::to_string).ok_or_else(|| field_err(k, "missing or not a string"))
    };
    let ts = obj
        .get("ts")
        .and_then(Value::as_u64)
        .ok_or_else(|| field_err("ts", "missing or not a non-negative integer"))?;
    let payload = obj
        .get("payload")
        .and_then(Value::as_object)
        .cloned()
        .ok_or_else(|| field_err("payload", "missing or not an object"))?;
    Ok(ConcreteMessage {
        cluster_id: get_str("cluster_id")?,
        sender: get_str("sender")?,
        ts,
        msg_type: get_str("type")?,
        payload,
    })
}

/// Decodes exactly one frame occupying all of `bytes`.
pub fn decode_frame(bytes: &[u8]) -> Result<ConcreteMessage, DecodeError> {
    if bytes.len() < 4 {
        return Err(DecodeError::Truncated { need: 4, have: bytes.len() });
    }
    let len = u32::from_be_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) as usize;
    if len > MAX_FRAME_LEN {
        return Err(DecodeError::TooLarge(len));
    }
    let have = bytes.len() - 4;
    if have < len {
        return Err(DecodeError::Truncated { need: len, have });
    }
    if have > len {
        return Err(DecodeError::Trailing(have - len));
    }
    parse_body(&bytes[4..])
}

pub fn write_frame<W: Write>(w: &mut W, msg: &ConcreteMessage) -> io::Result<()> {
    w.write_all(&encode_frame(msg))
}

/// Reads one frame from a stream. `Ok(None)` on clean EOF before a header.
pub fn read_frame<R: Read>(r: &mut R) -> Result<Option<ConcreteMessage>, DecodeError> {
    let mut header = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        let n = r.read(&mut header[got..])?;
        if n == 0 {
            if got == 0 {
                return Ok(None);
            }
            return Err(DecodeError::Truncated { need: 4, have: got });
        }
        got += n;
    }
    let len = u32::from_be_bytes(header) as usize;
    if len > MAX_FRAME_LEN {
        return Err(DecodeError::TooLarge(len));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body).map_err(|e| {
        if e.kind() == io::ErrorKind::UnexpectedEof {
            DecodeError::Truncated { need: len, have: 0 }
        } else {
            DecodeError::Io(e)
        }
    })?;
    parse_body(&body).map(Some)
}

/// Session values needed to concretize a symbol.
#[derive(Debug, Clone, Copy)]
pub struct EncodeCtx<'a> {
    pub cluster_id: &'a str,
    pub self_id: &'a str,
    pub ts: u64,
    /// Leader term observed by the session; `Higher` encodes as this + 1.
    pub leader_term: u64,
}

fn set_value(nodes: &NodeSet) -> Value {
    Value::Array(nodes.iter().map(|n| Value::String(n.clone())).collect())
}

/// Concretizes an input symbol.
pub fn encode(sym: &Symbol, ctx: EncodeCtx<'_>) -> ConcreteMessage {
    let payload = match sym {
        Symbol::PReq { n } => json!({ "target": n.id }),
        Symbol::PRes { n, s } => json!({ "node": n.id, "status": s.as_str() }),
        Symbol::BReq { nodes } | Symbol::BRes { nodes } => json!({ "members": set_value(nodes) }),
        Symbol::RJReq { n } => json!({ "member": n.id }),
        Symbol::RJRes => json!({ "status": "ok" }),
        Symbol::RConReq | Symbol::RConRes => json!({}),
        Symbol::RVReq { n, t } => {
            let term = match t {
                TermClass::Higher => ctx.leader_term + 1,
                TermClass::Current => ctx.leader_term,
            };
            json!({ "candidate": n.id, "term": term })
        }
        Symbol::RVRes { v } => json!({ "vote": v.as_str(), "term": ctx.leader_term }),
        Symbol::RComReq { d, o } => json!({
            "data": d.as_str(),
            "op": o.as_str(),
            // fresh client member id per message
            "member_id": format!("{}/{}", ctx.self_id, ctx.ts),
        }),
        Symbol::RComRes => json!({ "status": "ok" }),
        Symbol::RAReq => json!({ "term": ctx.leader_term, "leader": ctx.self_id, "entries": [] }),
        Symbol::RARes => json!({ "term": ctx.leader_term }),
    };
    ConcreteMessage::new(ctx.cluster_id, ctx.self_id, ctx.ts, sym.message_type(), payload)
}

fn parse_liveness(s: &str) -> Result<Liveness, DecodeError> {
    match s {
        "alive" => Ok(Liveness::Alive),
        "dead" => Ok(Liveness::Dead),
        other => Err(field_err("status", format!("unexpected value {other:?}"))),
    }
}

/// Abstracts a concrete message. Node ids outside `cfg.members` resolve to
/// `Unknown`; vote-request terms are classified against `reference_term`.
pub fn decode(msg: &ConcreteMessage, cfg: &AlphabetConfig, reference_term: u64) -> Result<OutputSymbol, DecodeError> {
    let ty = msg.message_type().ok_or_else(|| DecodeError::UnknownType(msg.msg_type.clone()))?;
    let node =
        |field: &'static str| -> Result<NodeRef, DecodeError> { Ok(NodeRef::resolve(msg.str_field(field)?, cfg)) };
    let sym = match ty {
        MessageType::ProbeRequest => Symbol::PReq { n: node("target")? },
        MessageType::ProbeResponse => Symbol::PRes { n: node("node")?, s: parse_liveness(msg.str_field("status")?)? },
        MessageType::BootstrapRequest => Symbol::BReq { nodes: msg.set_field("members")? },
        MessageType::BootstrapResponse => Symbol::BRes { nodes: msg.set_field("members")? },
        MessageType::RaftJoinRequest => Symbol::RJReq { n: node("member")? },
        MessageType::RaftJoinResponse => Symbol::RJRes,
        MessageType::RaftConfigureRequest => Symbol::RConReq,
        MessageType::RaftConfigureResponse => Symbol::RConRes,
        MessageType::RaftVoteRequest => {
            let term = msg.u64_field("term")?;
            let t = if term > reference_term { TermClass::Higher } else { TermClass::Current };
            Symbol::RVReq { n: node("candidate")?, t }
        }
        MessageType::RaftVoteResponse => {
            let v = match msg.str_field("vote")? {
                "approved" => Vote::Approved,
                "rejected" => Vote::Rejected,
                other => return Err(field_err("vote", format!("unexpected value {other:?}"))),
            };
            Symbol::RVRes { v }
        }
        MessageType::RaftCommandRequest => {
            let d = match msg.str_field("data")? {
                "app" => DataKind::App,
                "topo" => DataKind::Topo,
                other => return Err(field_err("data", format!("unexpected value {other:?}"))),
            };
            let o = match msg.str_field("op")? {
                "add" => CommandOp::Add,
                "modify" => CommandOp::Modify,
                "remove" => CommandOp::Remove,
                other => return Err(field_err("op", format!("unexpected value {other:?}"))),
            };
            Symbol::RComReq { d, o }
        }
        MessageType::RaftCommandResponse => Symbol::RComRes,
        MessageType::RaftAppendRequest => Symbol::RAReq,
        MessageType::RaftAppendResponse => Symbol::RARes,
    };
    Ok(OutputSymbol::Msg(sym))
}
