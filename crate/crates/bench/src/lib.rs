//! Shared fixtures for the criterion benches.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statefuzz_core::alphabet::{CommandOp, DataKind, Liveness, OutputWord, Symbol, TermClass};
use statefuzz_core::mealy::{MealyMachine, PrunePolicy, Transition};
use statefuzz_core::sulsim::ClusterConfig;
use statefuzz_core::testing::random_machine;

/// Random machine with self-loops pruned.
pub fn pruned_machine(states: usize, inputs: usize, seed: u64) -> MealyMachine {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_machine(&mut rng, states, inputs, 3).prune(&PrunePolicy::self_loops())
}

/// Star machine: one edge from the initial state per exploit letter.
pub fn exploit_machine(cfg: &ClusterConfig) -> MealyMachine {
    let a = cfg.alphabet_config();
    let letters = vec![
        Symbol::RVReq { n: a.self_ref(), t: TermClass::Higher },
        Symbol::RComReq { d: DataKind::App, o: CommandOp::Remove },
        Symbol::RComReq { d: DataKind::Topo, o: CommandOp::Add },
        Symbol::PRes { n: a.known_ref(), s: Liveness::Dead },
    ];
    let n = letters.len() + 1;
    let table = (0..n)
        .map(|s| {
            (0..letters.len())
                .map(|i| Transition { next: if s == 0 { i + 1 } else { s }, output: OutputWord::no_response() })
                .collect()
        })
        .collect();
    MealyMachine::new((0..n).map(|i| format!("V{i}")).collect(), 0, letters, table).expect("well formed")
}
