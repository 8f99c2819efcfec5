//! TCP front end for the simulator.
//!
//! Clients exchange wire frames. Alphabet messages are delivered to the
//! cluster; frames whose type starts with `sim.` are control requests:
//!
//! * `sim.tick {n}`: advance `n` ticks; the server answers with every emitted
//!   message followed by `sim.done {now, term}`.
//! * `sim.reset`: reset the cluster; answered by `sim.done`.
//! * `sim.observe`: answered by `sim.observation` carrying the snapshot.
//!
//! Failures are answered with `sim.error {reason}`.

use std::io::{BufReader, BufWriter, Write};
use std::net::{TcpListener, TcpStream};
use std::thread;

use serde_json::json;

use crate::alphabet::{read_frame, write_frame, ConcreteMessage};

use super::{ClusterConfig, ClusterHandle, SimError};

pub const CONTROL_TICK: &str = "sim.tick";
pub const CONTROL_RESET: &str = "sim.reset";
pub const CONTROL_OBSERVE: &str = "sim.observe";
pub const CONTROL_DONE: &str = "sim.done";
pub const CONTROL_OBSERVATION: &str = "sim.observation";
pub const CONTROL_ERROR: &str = "sim.error";

pub fn control(cluster_id: &str, sender: &str, ty: &str, payload: serde_json::Value) -> ConcreteMessage {
    let payload = match payload {
        serde_json::Value::Object(m) => m,
        _ => serde_json::Map::new(),
    };
    ConcreteMessage {
        cluster_id: cluster_id.to_string(),
        sender: sender.to_string(),
        ts: 0,
        msg_type: ty.to_string(),
        payload,
    }
}

/// Accepts connections forever; each one drives its own cluster instance.
pub fn serve(listener: TcpListener, cfg: ClusterConfig) -> Result<(), SimError> {
    cfg.validate()?;
    for stream in listener.incoming() {
        let stream = stream?;
        let cfg = cfg.clone();
        thread::spawn(move || {
            let peer = stream.peer_addr().ok();
            match ClusterHandle::spawn(cfg).and_then(|h| serve_connection(stream, h)) {
                Ok(()) => log::info!("connection {peer:?} closed"),
                Err(e) => log::warn!("connection {peer:?} failed: {e}"),
            }
        });
    }
    Ok(())
}

pub fn serve_connection(stream: TcpStream, mut handle: ClusterHandle) -> Result<(), SimError> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    let cluster_id = handle.config().cluster_id.clone();
    let name = "sim";
    loop {
        let msg = match read_frame(&mut reader) {
            Ok(Some(m)) => m,
            Ok(None) => return Ok(()),
            Err(e) => {
                let err = control(&cluster_id, name, CONTROL_ERROR, json!({ "reason": e.to_string() }));
                write_frame(&mut writer, &err)?;
                writer.flush()?;
                return Ok(());
            }
        };
        let replies: Vec<ConcreteMessage> = match msg.msg_type.as_str() {
            CONTROL_TICK => {
                let n = msg.payload.get("n").and_then(|v| v.as_u64()).unwrap_or(1);
                match handle.tick(n) {
                    Ok(out) => {
                        let mut v: Vec<ConcreteMessage> = out.into_iter().map(|(_, m)| m).collect();
                        v.push(done(&handle));
                        v
                    }
                    Err(e) => vec![control(&cluster_id, name, CONTROL_ERROR, json!({ "reason": e.to_string() }))],
                }
            }
            CONTROL_RESET => {
                handle.reset();
                vec![done(&handle)]
            }
            CONTROL_OBSERVE => {
                let obs = serde_json::to_value(handle.observe()).expect("observation serializes");
                vec![control(&cluster_id, name, CONTROL_OBSERVATION, json!({ "observation": obs }))]
            }
            _ => match handle.deliver(&msg) {
                Ok(()) => Vec::new(),
                Err(e) => vec![control(&cluster_id, name, CONTROL_ERROR, json!({ "reason": e.to_string() }))],
            },
        };
        for r in &replies {
            write_frame(&mut writer, r)?;
        }
        writer.flush()?;
    }
}

fn done(handle: &ClusterHandle) -> ConcreteMessage {
    control(&handle.config().cluster_id, "sim", CONTROL_DONE, json!({ "now": handle.now(), "term": handle.term() }))
}
