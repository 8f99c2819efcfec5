use std::collections::BTreeMap;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::alphabet::{enumerate_input_alphabet, AlphabetConfig, CommandOp, DataKind, OutputWord, Symbol, TermClass};
use crate::detector::{Criterion, Detector, Evidence};
use crate::mealy::{PrunePolicy, StateId, Transition};
use crate::proxy::SimProxy;
use crate::sulsim::{ClusterConfig, Vulnerability};
use crate::testing::random_machine;

fn t(next: StateId) -> Transition {
    Transition { next, output: OutputWord::no_response() }
}

fn seq(v: &[Symbol]) -> MessageSequence {
    MessageSequence::new(v.to_vec())
}

fn alphabet3() -> Vec<InputSymbol> {
    enumerate_input_alphabet(&AlphabetConfig::new(vec!["A".into(), "B".into(), "C".into()], "X", "SD-WAN")).unwrap()
}

/// Explicit-stack DFS recording parent pointers; paths are rebuilt from the
/// tree afterwards.
fn dfs_tree_oracle(m: &MealyMachine) -> Vec<MessageSequence> {
    let n = m.num_states();
    let mut parent: Vec<Option<(StateId, usize)>> = vec![None; n];
    let mut seen = vec![false; n];
    let mut order = Vec::new();
    seen[m.initial()] = true;
    let mut stack = vec![(m.initial(), 0usize)];
    while let Some(&mut (s, ref mut next_input)) = stack.last_mut() {
        if *next_input == m.alphabet().len() {
            stack.pop();
            continue;
        }
        let i = *next_input;
        *next_input += 1;
        if m.is_hidden(s, i) {
            continue;
        }
        let w = m.transition(s, i).next;
        if !seen[w] {
            seen[w] = true;
            parent[w] = Some((s, i));
            order.push(w);
            stack.push((w, 0));
        }
    }
    order
        .into_iter()
        .map(|w| {
            let mut path = Vec::new();
            let mut cur = w;
            while let Some((p, i)) = parent[cur] {
                path.push(m.alphabet()[i].clone());
                cur = p;
            }
            path.reverse();
            MessageSequence::new(path)
        })
        .collect()
}

fn random_pruned(rng: &mut ChaCha8Rng) -> MealyMachine {
    let states = rng.gen_range(1..=8);
    let inputs = rng.gen_range(1..=5);
    let m = random_machine(rng, states, inputs, 3);
    let others: Vec<InputSymbol> = m.alphabet().iter().filter(|_| rng.gen_bool(0.2)).cloned().collect();
    m.prune(&PrunePolicy::self_loops().with_others(others))
}

#[test]
fn chain_yields_both_prefixes() {
    let (a, b) = (Symbol::RConReq, Symbol::RConRes);
    let m = MealyMachine::new(
        vec!["q0".into(), "q1".into(), "q2".into()],
        0,
        vec![a.clone(), b.clone()],
        vec![vec![t(1), t(0)], vec![t(1), t(2)], vec![t(2), t(2)]],
    )
    .unwrap()
    .prune(&PrunePolicy::self_loops());
    let got = sdfs_extract(&m, 0);
    assert_eq!(got.sequences, vec![seq(std::slice::from_ref(&a)), seq(&[a, b])]);
}

#[test]
fn unreachable_state_gets_no_sequence() {
    let a = Symbol::RConReq;
    let m = MealyMachine::new(
        vec!["q0".into(), "q1".into(), "orphan".into()],
        0,
        vec![a.clone()],
        vec![vec![t(1)], vec![t(1)], vec![t(0)]],
    )
    .unwrap();
    let got = sdfs_extract(&m.prune(&PrunePolicy::self_loops()), 0);
    assert_eq!(got.len(), 1);
    assert!(got.iter().all(|s| m.state_after(&s.symbols).unwrap() != 2));
}

#[test]
fn hidden_edges_are_not_followed() {
    let (a, b) = (Symbol::RConReq, Symbol::RAReq);
    let m = MealyMachine::new(
        vec!["q0".into(), "q1".into()],
        0,
        vec![a.clone(), b.clone()],
        vec![vec![t(0), t(1)], vec![t(1), t(1)]],
    )
    .unwrap();
    assert_eq!(sdfs_extract(&m.prune(&PrunePolicy::self_loops()), 0).len(), 1);
    assert!(sdfs_extract(&m.prune(&PrunePolicy::self_loops().with_others([b])), 0).is_empty());
}

#[test]
fn op_count_matches_traversal_size() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let m = random_pruned(&mut rng);
        let (_, stats) = sdfs_extract_counted(&m, m.initial());
        let reach = m.reachable_traversal();
        let scanned: usize = reach.iter().map(|&s| m.traversal_edges(s).count()).sum();
        let expected = m.num_states() + scanned;
        assert_eq!(stats.ops, expected as u64);
        assert_eq!(stats.visited, reach.len());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sdfs_matches_tree_oracle(seed in any::<u64>()) {
        let m = random_pruned(&mut ChaCha8Rng::seed_from_u64(seed));
        let got = sdfs_extract(&m, m.initial());
        prop_assert_eq!(&got.sequences, &dfs_tree_oracle(&m));
        let reach = m.reachable_traversal();
        prop_assert_eq!(got.len(), reach.len() - 1);
        let mut ends = std::collections::BTreeSet::from([m.initial()]);
        for s in got.iter() {
            prop_assert!(m.run(&s.symbols).is_ok());
            prop_assert!(ends.insert(m.state_after(&s.symbols).unwrap()));
            if s.len() >= 2 {
                let shorter = (1..s.len()).rev().map(|k| seq(&s.symbols[..k])).find(|p| got.contains(p));
                prop_assert!(shorter.is_some());
            }
        }
        prop_assert_eq!(ends, reach);
    }

    #[test]
    fn rebuild_reproduces_mutants(seed in any::<u64>(), len in 1usize..12, rounds in 1usize..4) {
        let alphabet = alphabet3();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let start = MessageSequence::new((0..len).map(|_| alphabet[rng.gen_range(0..alphabet.len())].clone()).collect());
        let mut cur = start.clone();
        let mut records = Vec::new();
        for _ in 0..rounds {
            if cur.is_empty() {
                break;
            }
            let (next, r) = mutate(&cur, &alphabet, &mut rng).unwrap();
            let delta = next.len() as isize - cur.len() as isize;
            match &r.detail {
                MutationDetail::Copies { copies } => prop_assert_eq!(delta, *copies as isize - 1),
                MutationDetail::Removed { .. } => prop_assert_eq!(delta, -1),
                _ => {
                    prop_assert_eq!(delta, 0);
                    let diff = (0..cur.len()).filter(|&i| cur.symbols[i] != next.symbols[i]).count();
                    prop_assert_eq!(diff, 1);
                }
            }
            records.push(r);
            cur = next;
        }
        prop_assert_eq!(rebuild(&start, &records, &alphabet).unwrap(), cur);
    }
}

#[test]
fn duplicate_twice() {
    let a = Symbol::RConReq;
    let r = MutationRecord { position: 0, action: ActionKind::Duplicate, detail: MutationDetail::Copies { copies: 2 } };
    assert_eq!(apply_mutation(&seq(std::slice::from_ref(&a)), &r, &[], 0).unwrap(), seq(&[a.clone(), a]));
}

#[test]
fn arg_swap_current_to_higher() {
    let alphabet = alphabet3();
    let cfg = AlphabetConfig::new(vec!["A".into(), "B".into(), "C".into()], "X", "SD-WAN");
    let cur = Symbol::RVReq { n: cfg.known_ref(), t: TermClass::Current };
    let hi = Symbol::RVReq { n: cfg.known_ref(), t: TermClass::Higher };
    let r = MutationRecord {
        position: 0,
        action: ActionKind::ArgSwap,
        detail: MutationDetail::Swapped { from: cur.clone(), to: hi.clone() },
    };
    assert_eq!(apply_mutation(&seq(&[cur]), &r, &alphabet, 0).unwrap(), seq(&[hi]));
}

#[test]
fn removing_only_letter_gives_empty() {
    let a = Symbol::RConReq;
    let r = MutationRecord {
        position: 0,
        action: ActionKind::Remove,
        detail: MutationDetail::Removed { removed: a.clone() },
    };
    assert!(apply_mutation(&seq(&[a]), &r, &[], 0).unwrap().is_empty());
}

#[test]
fn empty_sequence_cannot_mutate() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert!(matches!(mutate(&MessageSequence::default(), &[], &mut rng), Err(FuzzError::EmptySequence)));
}

#[test]
fn actions_uniform_when_all_apply() {
    let alphabet = alphabet3();
    let cfg = AlphabetConfig::new(vec!["A".into(), "B".into(), "C".into()], "X", "SD-WAN");
    let s = seq(&[
        Symbol::RVReq { n: cfg.known_ref(), t: TermClass::Current },
        Symbol::RVReq { n: cfg.self_ref(), t: TermClass::Higher },
    ]);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let draws = 100_000;
    let mut counts: BTreeMap<ActionKind, usize> = BTreeMap::new();
    for _ in 0..draws {
        *counts.entry(mutate(&s, &alphabet, &mut rng).unwrap().1.action).or_default() += 1;
    }
    for k in ActionKind::ALL {
        let f = counts[&k] as f64 / draws as f64;
        assert!((f - 0.25).abs() <= 0.01, "{k:?} {f}");
    }
}

#[test]
fn inconsistent_record_is_replay_error() {
    let (a, b) = (Symbol::RConReq, Symbol::RConRes);
    let wrong = MutationRecord {
        position: 0,
        action: ActionKind::Remove,
        detail: MutationDetail::Removed { removed: b.clone() },
    };
    assert!(matches!(rebuild(&seq(std::slice::from_ref(&a)), &[wrong], &[]), Err(FuzzError::Replay { index: 0, .. })));
    let out_of_range =
        MutationRecord { position: 3, action: ActionKind::Duplicate, detail: MutationDetail::Copies { copies: 2 } };
    let ok =
        MutationRecord { position: 0, action: ActionKind::Duplicate, detail: MutationDetail::Copies { copies: 2 } };
    assert!(matches!(rebuild(&seq(std::slice::from_ref(&a)), &[ok, out_of_range], &[]), Err(FuzzError::Replay { index: 1, .. })));
    let mismatched =
        MutationRecord { position: 0, action: ActionKind::ArgSwap, detail: MutationDetail::Copies { copies: 2 } };
    assert!(rebuild(&seq(&[a]), &[mismatched], &[]).is_err());
}

fn exploit_machine(cfg: &ClusterConfig) -> MealyMachine {
    let a = cfg.alphabet_config();
    let letters = vec![
        Symbol::RVReq { n: a.self_ref(), t: TermClass::Higher },
        Symbol::RComReq { d: DataKind::App, o: CommandOp::Remove },
        Symbol::RComReq { d: DataKind::Topo, o: CommandOp::Add },
        Symbol::RConReq,
    ];
    MealyMachine::new(
        (0..4).map(|i| format!("s{i}")).collect(),
        0,
        letters,
        vec![
            vec![t(1), t(2), t(3), t(0)],
            vec![t(1), t(1), t(1), t(1)],
            vec![t(2), t(2), t(2), t(2)],
            vec![t(3), t(3), t(3), t(3)],
        ],
    )
    .unwrap()
}

fn vulnerable() -> ClusterConfig {
    ClusterConfig::default().with_vulns(Vulnerability::ALL)
}

#[test]
fn zero_budget_rejected() {
    let cfg = vulnerable();
    let mut sul = SimProxy::simulated(cfg.clone()).unwrap();
    let c = CampaignConfig { budget: 0, ..Default::default() };
    assert!(matches!(
        run_campaign(&exploit_machine(&cfg), &mut sul, &Detector::new(&cfg), &c),
        Err(FuzzError::ZeroBudget)
    ));
}

#[test]
fn same_seed_same_report() {
    let cfg = vulnerable();
    let m = exploit_machine(&cfg);
    let det = Detector::new(&cfg);
    let c = CampaignConfig { budget: 60, seed: 9, ..Default::default() };
    let run = || {
        let mut sul = SimProxy::simulated(cfg.clone()).unwrap();
        run_campaign(&m, &mut sul, &det, &c).unwrap().to_json()
    };
    let first = run();
    assert_eq!(first, run());
    let other = {
        let mut sul = SimProxy::simulated(cfg.clone()).unwrap();
        run_campaign(&m, &mut sul, &det, &CampaignConfig { seed: 10, ..c.clone() }).unwrap().to_json()
    };
    assert_ne!(first, other);
}

#[test]
fn sharded_runs_are_deterministic() {
    let cfg = vulnerable();
    let m = exploit_machine(&cfg);
    let det = Detector::new(&cfg);
    let c = CampaignConfig { budget: 40, seed: 3, ..Default::default() };
    let make = |_| SimProxy::simulated(cfg.clone()).map_err(|e| FuzzError::Sul(e.into()));
    let a = run_sharded(&m, make, &det, &c, 3).unwrap();
    let b = run_sharded(&m, make, &det, &c, 3).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.cases_run, 40);
    assert_eq!(a.shards, 3);
}

#[test]
fn findings_replay_to_same_verdict() {
    let cfg = vulnerable();
    let m = exploit_machine(&cfg);
    let det = Detector::new(&cfg);
    let mut sul = SimProxy::simulated(cfg.clone()).unwrap();
    let report =
        run_campaign(&m, &mut sul, &det, &CampaignConfig { budget: 30, seed: 5, ..Default::default() }).unwrap();
    assert!(!report.findings.is_empty());
    for rec in report.cases.iter().filter(|c| !c.findings.is_empty()) {
        let r = replay(&rec.case, &mut sul, &det, m.alphabet()).unwrap();
        assert_eq!(r.findings, rec.findings, "{}", rec.case.id);
    }
}

#[test]
fn seize_replay_names_dummy_leader() {
    let cfg = vulnerable();
    let m = exploit_machine(&cfg);
    let det = Detector::new(&cfg);
    let case = FuzzCase {
        id: "seize".into(),
        seed_sequence: seq(&[m.alphabet()[0].clone()]),
        mutations: Vec::new(),
        rng_seed: 0,
    };
    let mut sul = SimProxy::simulated(cfg.clone()).unwrap();
    let r = replay(&case, &mut sul, &det, m.alphabet()).unwrap();
    assert!(r.findings.iter().any(|f| f.criterion == Criterion::DC2
        && f.class == Some(Vulnerability::SeizeLeader)
        && matches!(&f.evidence, Evidence::LeaderChange { after: Some(x), .. } if *x == cfg.dummy_id)));
}

#[test]
fn benign_replay_is_clean() {
    let cfg = vulnerable();
    let m = exploit_machine(&cfg);
    let det = Detector::new(&cfg);
    let case = FuzzCase { id: "b".into(), seed_sequence: seq(&[Symbol::RConReq]), mutations: Vec::new(), rng_seed: 0 };
    let mut sul = SimProxy::simulated(cfg.clone()).unwrap();
    assert!(replay(&case, &mut sul, &det, m.alphabet()).unwrap().findings.is_empty());
    let empty = FuzzCase { seed_sequence: MessageSequence::default(), ..case };
    assert!(replay(&empty, &mut sul, &det, m.alphabet()).unwrap().findings.is_empty());
}

#[test]
fn seed_policy_hides_keepalives() {
    let cfg = vulnerable();
    let a = cfg.alphabet_config();
    let letters = vec![Symbol::PReq { n: a.self_ref() }, Symbol::RAReq, Symbol::RConReq];
    let m = MealyMachine::new(
        vec!["q0".into(), "q1".into()],
        0,
        letters,
        vec![vec![t(1), t(1), t(1)], vec![t(0), t(0), t(0)]],
    )
    .unwrap();
    let p = m.prune(&seed_policy(&m, &cfg.dummy_id));
    assert_eq!(sdfs_extract(&p, 0).sequences, vec![seq(&[Symbol::RConReq])]);
}
