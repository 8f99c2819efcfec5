use statefuzz_core::alphabet::{enumerate_input_alphabet, OutputSymbol, Symbol};
use statefuzz_core::learner::{membership_query, EquivalenceConfig, Learner};
use statefuzz_core::mealy::isomorphic;
use statefuzz_core::proxy::SimProxy;
use statefuzz_core::sulsim::{ClusterConfig, Vulnerability};
use statefuzz_core::testing::sim_ground_truth;

fn depth(m: usize) -> EquivalenceConfig {
    EquivalenceConfig { extra_state_depth: m, ..Default::default() }
}

#[test]
fn patched_cluster_matches_ground_truth() {
    let cfg = ClusterConfig::default();
    let alphabet = enumerate_input_alphabet(&cfg.alphabet_config()).unwrap();
    let truth = sim_ground_truth(&cfg, &alphabet, 64).unwrap();
    let mut learner = Learner::new(SimProxy::simulated(cfg).unwrap(), &alphabet, depth(2)).unwrap();
    let learned = learner.run().unwrap().machine;
    assert!(isomorphic(&learned, &truth));
    assert_eq!(learned.num_states(), 2);
    for (w, out) in learner.oracle().observations().into_iter().take(2000) {
        assert_eq!(learned.run(&w).unwrap(), out);
    }
}

#[test]
fn join_weakness_path() {
    let cfg = ClusterConfig::default().with_vulns([Vulnerability::UnauthJoin]);
    let acfg = cfg.alphabet_config();
    let alphabet = enumerate_input_alphabet(&acfg).unwrap();
    let truth = sim_ground_truth(&cfg, &alphabet, 64).unwrap();
    let learned = Learner::new(SimProxy::simulated(cfg).unwrap(), &alphabet, depth(1)).unwrap().run().unwrap().machine;
    assert!(isomorphic(&learned, &truth));

    let mut full = acfg.member_set();
    full.insert(acfg.self_id.clone());
    let probe = Symbol::PReq { n: acfg.known_ref() };
    let bres = Symbol::BRes { nodes: full };
    let join = Symbol::RJReq { n: acfg.self_ref() };
    let v1 = learned.state_after(std::slice::from_ref(&probe)).unwrap();
    let v4 = learned.state_after(&[probe.clone(), bres.clone()]).unwrap();
    assert_eq!(learned.state_name(v1), "V1");
    assert_eq!(learned.state_name(v4), "V4");
    let (_, out) = learned.step(v4, &join).unwrap();
    assert_eq!(out.symbols(), [OutputSymbol::Msg(Symbol::RJRes)]);
}

#[test]
fn join_query_ends_in_rjres() {
    let cfg = ClusterConfig::default().with_vulns([Vulnerability::UnauthJoin]);
    let acfg = cfg.alphabet_config();
    let mut full = acfg.member_set();
    full.insert(acfg.self_id.clone());
    let word = [Symbol::BReq { nodes: full }, Symbol::RJReq { n: acfg.self_ref() }];
    let mut sul = SimProxy::simulated(cfg).unwrap();
    let out = membership_query(&mut sul, &word, 3).unwrap();
    assert_eq!(out.last().unwrap().symbols().last(), Some(&OutputSymbol::Msg(Symbol::RJRes)));

    let mut patched = SimProxy::simulated(ClusterConfig::default()).unwrap();
    let out = membership_query(&mut patched, &word, 3).unwrap();
    assert!(out.last().unwrap().is_no_response());
}
