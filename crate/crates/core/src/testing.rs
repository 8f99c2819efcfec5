//! Small hand-built machines used by tests across the workspace.

use std::collections::{HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::alphabet::{
    CommandOp, ConcreteMessage, DataKind, Liveness, MessageType, NodeKind, NodeRef, OutputWord, Symbol,
};
use crate::learner::SulOracle;
use crate::mealy::{MealyMachine, Transition};
use crate::proxy::{ProxyError, SimProxy, SulEndpoint};
use crate::sulsim::ClusterConfig;

fn node_a() -> NodeRef {
    NodeRef { id: "A".into(), kind: NodeKind::Known }
}

/// `[PReq(A), RJReq(A), RComReq(app,remove)]`.
pub fn t0_alphabet() -> [Symbol; 3] {
    [
        Symbol::PReq { n: node_a() },
        Symbol::RJReq { n: node_a() },
        Symbol::RComReq { d: DataKind::App, o: CommandOp::Remove },
    ]
}

pub fn t0_names() -> Vec<String> {
    vec!["q0".into(), "q1".into(), "q2".into()]
}

/// Three-state toy machine T0.
///
/// q0 --PReq(A)/PRes(A,alive)--> q1 --RJReq(A)/RJRes--> q2
/// q2 --RComReq(app,remove)/RComRes--> q0; everything else self-loops with `-`.
pub fn t0() -> MealyMachine {
    let pres = OutputWord(vec![Symbol::PRes { n: node_a(), s: Liveness::Alive }.into()]);
    let rjres = OutputWord(vec![Symbol::RJRes.into()]);
    let comres = OutputWord(vec![Symbol::RComRes.into()]);
    let nr = OutputWord::no_response;
    let t = |next, output| Transition { next, output };
    let table = vec![
        vec![t(1, pres.clone()), t(0, nr()), t(0, nr())],
        vec![t(1, pres), t(2, rjres), t(1, nr())],
        vec![t(2, nr()), t(2, nr()), t(0, comres)],
    ];
    MealyMachine::new(t0_names(), 0, t0_alphabet().to_vec(), table).expect("T0 is well formed")
}

struct Rule {
    input: MessageType,
    stamp_delay: u64,
    arrival_delay: u64,
    reply: ConcreteMessage,
}

/// Endpoint with canned replies and adversarial delivery order.
///
/// A rule fires when a message of its input type is delivered at time `t`:
/// the reply is stamped `t + stamp_delay` and handed out by `advance` at
/// `t + arrival_delay`. Replies that become ready in the same tick are
/// shuffled.
pub struct ScriptedEndpoint {
    now: u64,
    rules: Vec<Rule>,
    pending: Vec<(u64, u64, ConcreteMessage)>,
    rng: ChaCha8Rng,
    seed: u64,
    pub delivered: Vec<ConcreteMessage>,
    pub term: u64,
}

impl ScriptedEndpoint {
    pub fn new(seed: u64) -> Self {
        ScriptedEndpoint {
            now: 0,
            rules: Vec::new(),
            pending: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
            delivered: Vec::new(),
            term: 1,
        }
    }

    pub fn on(mut self, input: MessageType, stamp_delay: u64, arrival_delay: u64, reply: ConcreteMessage) -> Self {
        assert!(arrival_delay >= stamp_delay, "replies cannot arrive before they are stamped");
        self.rules.push(Rule { input, stamp_delay, arrival_delay, reply });
        self
    }
}

impl SulEndpoint for ScriptedEndpoint {
    fn deliver(&mut self, msg: &ConcreteMessage) -> Result<(), ProxyError> {
        self.delivered.push(msg.clone());
        for r in &self.rules {
            if msg.message_type() == Some(r.input) {
                let ts = self.now + r.stamp_delay;
                let mut reply = r.reply.clone();
                reply.ts = ts;
                self.pending.push((self.now + r.arrival_delay.max(1), ts, reply));
            }
        }
        Ok(())
    }

    fn advance(&mut self, ticks: u64) -> Result<Vec<(u64, ConcreteMessage)>, ProxyError> {
        self.now += ticks;
        let now = self.now;
        let (mut ready, rest): (Vec<_>, Vec<_>) = self.pending.drain(..).partition(|(due, _, _)| *due <= now);
        self.pending = rest;
        ready.shuffle(&mut self.rng);
        Ok(ready.into_iter().map(|(_, ts, m)| (ts, m)).collect())
    }

    fn now(&self) -> u64 {
        self.now
    }

    fn reset(&mut self) -> Result<(), ProxyError> {
        self.now = 0;
        self.pending.clear();
        self.rng = ChaCha8Rng::seed_from_u64(self.seed);
        Ok(())
    }

    fn leader_term(&mut self) -> Result<u64, ProxyError> {
        Ok(self.term)
    }
}

/// Parameter-free letters used as the alphabet of generated machines.
pub const PLAIN_LETTERS: [Symbol; 6] =
    [Symbol::RConReq, Symbol::RConRes, Symbol::RAReq, Symbol::RARes, Symbol::RJRes, Symbol::RComRes];

/// Uniformly random total machine with `states` states over the first
/// `inputs` plain letters; outputs are drawn from `outputs` distinct words.
pub fn random_machine(rng: &mut impl rand::Rng, states: usize, inputs: usize, outputs: usize) -> MealyMachine {
    assert!(states >= 1 && (1..=PLAIN_LETTERS.len()).contains(&inputs) && outputs >= 1);
    let pool: Vec<OutputWord> = std::iter::once(OutputWord::no_response())
        .chain(PLAIN_LETTERS.iter().map(|s| OutputWord(vec![s.clone().into()])))
        .take(outputs.min(PLAIN_LETTERS.len() + 1))
        .collect();
    let table = (0..states)
        .map(|_| {
            (0..inputs)
                .map(|_| Transition {
                    next: rng.gen_range(0..states),
                    output: pool[rng.gen_range(0..pool.len())].clone(),
                })
                .collect()
        })
        .collect();
    let names = (0..states).map(|i| format!("q{i}")).collect();
    MealyMachine::new(names, 0, PLAIN_LETTERS[..inputs].to_vec(), table).expect("generated machine is well formed")
}

/// Exhaustive product construction of the simulated SUL seen through the
/// proxy: states are identified by the cluster fingerprint, the session's
/// observed term and the deferred queue contents, explored breadth first by
/// replaying access words from reset. Fails once more than `limit` states
/// are found.
pub fn sim_ground_truth(cfg: &ClusterConfig, alphabet: &[Symbol], limit: usize) -> Result<MealyMachine, ProxyError> {
    let mut proxy = SimProxy::simulated(cfg.clone())?;
    let key = |p: &SimProxy| {
        let now = p.endpoint().now();
        let queued: Vec<(u64, String)> =
            p.queue().snapshot().into_iter().map(|(ts, m)| (ts.saturating_sub(now), format!("{m:?}"))).collect();
        format!("{}|{}|{:?}", p.endpoint().fingerprint(), p.context().observed_leader_term, queued)
    };
    let sul_err = |e: crate::learner::SulError| ProxyError::Protocol(e.0);
    proxy.reset_session()?;
    let mut ids: HashMap<String, usize> = HashMap::from([(key(&proxy), 0)]);
    let mut access: Vec<Vec<Symbol>> = vec![Vec::new()];
    let mut queue = VecDeque::from([0usize]);
    let mut table: Vec<Vec<Transition>> = vec![Vec::new()];
    while let Some(s) = queue.pop_front() {
        for a in alphabet {
            proxy.query(&access[s]).map_err(sul_err)?;
            let output = proxy.step(a).map_err(sul_err)?;
            let k = key(&proxy);
            let next = match ids.get(&k) {
                Some(&n) => n,
                None => {
                    if ids.len() >= limit {
                        return Err(ProxyError::Protocol(format!("more than {limit} product states")));
                    }
                    let n = access.len();
                    ids.insert(k, n);
                    let mut w = access[s].clone();
                    w.push(a.clone());
                    access.push(w);
                    table.push(Vec::new());
                    queue.push_back(n);
                    n
                }
            };
            table[s].push(Transition { next, output });
        }
    }
    let names = (0..table.len()).map(|i| format!("g{i}")).collect();
    let raw = MealyMachine::new(names, 0, alphabet.to_vec(), table).map_err(|e| ProxyError::Protocol(e.to_string()))?;
    Ok(crate::mealy::minimize(&raw))
}
