//! Client endpoint for a simulator served over TCP.

use std::io::{BufReader, BufWriter, Write};
use std::net::{TcpStream, ToSocketAddrs};

use serde_json::json;

use crate::alphabet::{read_frame, write_frame, ConcreteMessage};
use crate::sulsim::server::{
    control, CONTROL_DONE, CONTROL_ERROR, CONTROL_OBSERVATION, CONTROL_OBSERVE, CONTROL_RESET, CONTROL_TICK,
};
use crate::sulsim::ClusterObservation;

use super::{ProxyError, SulEndpoint};

pub struct TcpEndpoint {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
    cluster_id: String,
    now: u64,
    term: u64,
}

impl TcpEndpoint {
    pub fn connect(addr: impl ToSocketAddrs, cluster_id: impl Into<String>) -> Result<Self, ProxyError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        let mut ep = TcpEndpoint {
            reader: BufReader::new(stream.try_clone()?),
            writer: BufWriter::new(stream),
            cluster_id: cluster_id.into(),
            now: 0,
            term: 0,
        };
        ep.request(CONTROL_RESET, json!({}))?;
        Ok(ep)
    }

    fn send(&mut self, msg: &ConcreteMessage) -> Result<(), ProxyError> {
        write_frame(&mut self.writer, msg)?;
        self.writer.flush()?;
        Ok(())
    }

    fn read(&mut self) -> Result<ConcreteMessage, ProxyError> {
        read_frame(&mut self.reader)?.ok_or_else(|| ProxyError::Protocol("connection closed".into()))
    }

    /// Sends a control frame and collects messages up to its terminator.
    fn request(&mut self, ty: &str, payload: serde_json::Value) -> Result<Vec<ConcreteMessage>, ProxyError> {
        let msg = control(&self.cluster_id, "proxy", ty, payload);
        self.send(&msg)?;
        let mut out = Vec::new();
        loop {
            let m = self.read()?;
            match m.msg_type.as_str() {
                CONTROL_DONE => {
                    self.now = m.u64_field("now")?;
                    self.term = m.u64_field("term")?;
                    return Ok(out);
                }
                CONTROL_OBSERVATION => {
                    out.push(m);
                    return Ok(out);
                }
                CONTROL_ERROR => {
                    let reason = m.str_field("reason").unwrap_or("unknown").to_string();
                    return Err(ProxyError::Protocol(reason));
                }
                _ => out.push(m),
            }
        }
    }
}

impl SulEndpoint for TcpEndpoint {
    fn deliver(&mut self, msg: &ConcreteMessage) -> Result<(), ProxyError> {
        self.send(msg)
    }

    fn advance(&mut self, ticks: u64) -> Result<Vec<(u64, ConcreteMessage)>, ProxyError> {
        let msgs = self.request(CONTROL_TICK, json!({ "n": ticks }))?;
        Ok(msgs.into_iter().map(|m| (m.ts, m)).collect())
    }

    fn now(&self) -> u64 {
        self.now
    }

    fn reset(&mut self) -> Result<(), ProxyError> {
        self.request(CONTROL_RESET, json!({}))?;
        Ok(())
    }

    fn leader_term(&mut self) -> Result<u64, ProxyError> {
        Ok(self.term)
    }

    fn observe(&mut self) -> Result<ClusterObservation, ProxyError> {
        let reply = self.request(CONTROL_OBSERVE, json!({}))?;
        let obs = reply
            .last()
            .and_then(|m| m.payload.get("observation"))
            .ok_or_else(|| ProxyError::Protocol("missing observation".into()))?;
        serde_json::from_value(obs.clone()).map_err(|e| ProxyError::Protocol(e.to_string()))
    }
}
