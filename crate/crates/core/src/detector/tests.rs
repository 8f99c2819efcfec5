use proptest::prelude::*;

use super::*;
use crate::sulsim::{ClusterHandle, DEFAULT_APPS};

fn baseline() -> (Detector, ClusterObservation) {
    let cfg = ClusterConfig::default();
    let obs = ClusterHandle::spawn(cfg.clone()).unwrap().observe();
    (Detector::new(&cfg), obs)
}

fn criteria(f: &[Finding]) -> BTreeSet<Criterion> {
    f.iter().map(|f| f.criterion).collect()
}

#[test]
fn quiet_case_has_no_findings() {
    let (det, obs) = baseline();
    let trace = vec![(Symbol::RConReq, OutputWord::no_response())];
    assert!(det.evaluate(&Baseline::capture(obs.clone()), &obs, &trace, "c").unwrap().is_empty());
}

#[test]
fn dummy_leader_is_dc2() {
    let (det, obs) = baseline();
    let mut post = obs.clone();
    post.leader = Some("X".into());
    post.term += 1;
    let f = det.evaluate(&Baseline::capture(obs), &post, &[], "c").unwrap();
    assert_eq!(criteria(&f), BTreeSet::from([Criterion::DC2]));
    assert!(f.iter().all(|f| f.class == Some(Vulnerability::SeizeLeader)));
    assert!(f.iter().any(|f| matches!(&f.evidence, Evidence::LeaderChange { after: Some(x), .. } if x == "X")));
}

#[test]
fn cleared_apps_are_dc3() {
    let (det, obs) = baseline();
    let mut defaults = DEFAULT_APPS.map(String::from).to_vec();
    defaults.sort();
    assert_eq!(obs.apps, defaults);
    let mut post = obs.clone();
    post.apps.clear();
    let f = det.evaluate(&Baseline::capture(obs), &post, &[], "c").unwrap();
    assert_eq!(f.len(), 1);
    assert_eq!(f[0].criterion, Criterion::DC3);
}

#[test]
fn leaked_members_are_dc1() {
    let (det, obs) = baseline();
    let leak = OutputWord(vec![
        Symbol::PRes {
            n: crate::alphabet::NodeRef { id: "A".into(), kind: crate::alphabet::NodeKind::Known },
            s: Liveness::Alive,
        }
        .into(),
        Symbol::BReq { nodes: ["A", "B"].map(String::from).into() }.into(),
    ]);
    let redacted = OutputWord(vec![Symbol::BReq { nodes: BTreeSet::new() }.into()]);
    let b = Baseline::capture(obs.clone());
    assert!(det.evaluate(&b, &obs, &[(Symbol::RConReq, redacted.clone())], "c").unwrap().is_empty());
    let f = det.evaluate(&b, &obs, &[(Symbol::RConReq, redacted), (Symbol::RConReq, leak)], "c").unwrap();
    assert_eq!(f.len(), 1);
    match &f[0].evidence {
        Evidence::ConfigLeak { step, leaked, .. } => {
            assert_eq!(*step, 1);
            assert_eq!(leaked.len(), 2);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn session_threshold_is_strict() {
    let (det, obs) = baseline();
    assert_eq!(det.dc5.max_sessions, 16);
    let b = Baseline::capture(obs.clone());
    let mut post = obs.clone();
    post.sessions_open = 16;
    assert!(det.evaluate(&b, &post, &[], "c").unwrap().is_empty());
    post.sessions_open = 17;
    assert_eq!(criteria(&det.evaluate(&b, &post, &[], "c").unwrap()), BTreeSet::from([Criterion::DC5]));
}

#[test]
fn load_spike_is_dc5() {
    let (det, obs) = baseline();
    let b = Baseline::capture(obs.clone());
    let node = obs.resource_load.keys().next().unwrap().clone();
    let base = obs.resource_load[&node];
    let mut post = obs.clone();
    post.resource_load.insert(node.clone(), base * 3);
    assert!(det.evaluate(&b, &post, &[], "c").unwrap().is_empty());
    post.resource_load.insert(node, base * 7 / 2);
    let f = det.evaluate(&b, &post, &[], "c").unwrap();
    assert!(matches!(f[0].evidence, Evidence::LoadSpike { factor, .. } if (factor - 3.5).abs() < 1e-9));
}

#[test]
fn reachability_flip_is_dc4() {
    let (det, obs) = baseline();
    let mut post = obs.clone();
    post.reachability[1][3] = !post.reachability[1][3];
    let f = det.evaluate(&Baseline::capture(obs), &post, &[], "c").unwrap();
    assert_eq!(criteria(&f), BTreeSet::from([Criterion::DC4]));
}

#[test]
fn mismatched_instances_rejected() {
    let (det, obs) = baseline();
    let mut post = obs.clone();
    post.instance = "other#1".into();
    assert!(matches!(
        det.evaluate(&Baseline::capture(obs), &post, &[], "c"),
        Err(DetectError::InstanceMismatch { .. })
    ));
}

#[test]
fn membership_classes() {
    let (det, obs) = baseline();
    let mut post = obs.clone();
    post.membership.insert("X".into(), Liveness::Alive);
    post.membership.insert("A".into(), Liveness::Dead);
    let f = det.evaluate(&Baseline::capture(obs), &post, &[], "c").unwrap();
    let classes: BTreeSet<_> = f.iter().filter_map(|f| f.class).collect();
    assert_eq!(classes, BTreeSet::from([Vulnerability::UnauthJoin, Vulnerability::FakeMember]));
}

fn arb_change() -> impl Strategy<Value = (bool, bool, bool, bool, u64, u64)> {
    (any::<bool>(), any::<bool>(), any::<bool>(), any::<bool>(), 0u64..40, 0u64..200)
}

proptest! {
    #[test]
    fn extra_evidence_never_removes_findings((leader, apps, reach, dead, sessions, load) in arb_change(), leak_at in 0usize..4) {
        let (det, obs) = baseline();
        let b = Baseline::capture(obs.clone());
        let mut post = obs.clone();
        if leader { post.leader = Some("X".into()); }
        if apps { post.apps.pop(); }
        if reach { post.reachability[0][3] = !post.reachability[0][3]; }
        if dead { post.membership.insert("B".into(), Liveness::Dead); }
        post.sessions_open = sessions;
        let node = obs.resource_load.keys().next().unwrap().clone();
        post.resource_load.insert(node, load);
        let quiet = vec![(Symbol::RConReq, OutputWord::no_response()); 4];
        let mut noisy = quiet.clone();
        noisy[leak_at].1 = OutputWord(vec![Symbol::BRes { nodes: ["C"].map(String::from).into() }.into()]);
        let before = criteria(&det.evaluate(&b, &post, &quiet, "c").unwrap());
        let after = criteria(&det.evaluate(&b, &post, &noisy, "c").unwrap());
        prop_assert!(before.is_subset(&after));
        prop_assert!(after.contains(&Criterion::DC1));
        let more = det.evaluate(&b, &post, &noisy, "c").unwrap();
        prop_assert!(more.iter().all(|f| f.case_ref == "c"));
    }
}
