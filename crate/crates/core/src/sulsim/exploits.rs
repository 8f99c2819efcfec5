//! Hand-written attack traces, one per vulnerability class.

use crate::alphabet::{AlphabetConfig, CommandOp, DataKind, Liveness, Symbol, TermClass};

use super::Vulnerability;

/// Number of command requests in the session flood trace.
pub const FLOOD_LENGTH: usize = 8;

pub fn exploit_trace(v: Vulnerability, cfg: &AlphabetConfig) -> Vec<Symbol> {
    match v {
        Vulnerability::UnauthJoin => {
            let mut nodes = cfg.member_set();
            nodes.insert(cfg.self_id.clone());
            vec![Symbol::PReq { n: cfg.known_ref() }, Symbol::BRes { nodes }, Symbol::RJReq { n: cfg.self_ref() }]
        }
        Vulnerability::SeizeLeader => vec![Symbol::RVReq { n: cfg.self_ref(), t: TermClass::Higher }],
        Vulnerability::SessionFlood => {
            vec![Symbol::RComReq { d: DataKind::App, o: CommandOp::Add }; FLOOD_LENGTH]
        }
        Vulnerability::ClearStore => vec![Symbol::RComReq { d: DataKind::App, o: CommandOp::Remove }],
        Vulnerability::FakeMember => vec![Symbol::PRes { n: cfg.known_ref(), s: Liveness::Dead }],
        Vulnerability::FakeLink => vec![Symbol::RComReq { d: DataKind::Topo, o: CommandOp::Add }],
    }
}
