//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statefuzz_core::alphabet::{
    decode, decode_frame, encode, encode_frame, enumerate_input_alphabet, AlphabetConfig, ConcreteMessage, EncodeCtx,
    InputSymbol, MessageType, OutputSymbol, OutputWord, Symbol,
};
use statefuzz_core::detector::{expected_criterion, Detector};
use statefuzz_core::fuzzer::{
    execute, replay, run_campaign, sdfs_extract_counted, CampaignConfig, FuzzCase, MessageSequence,
};
use statefuzz_core::learner::{EquivalenceConfig, Learner, SulOracle};
use statefuzz_core::mealy::{isomorphic, MealyMachine, PrunePolicy, StateId};
use statefuzz_core::proxy::{Proxy, SimProxy};
use statefuzz_core::sulsim::exploits::exploit_trace;
use statefuzz_core::sulsim::{ClusterConfig, Vulnerability};
use statefuzz_core::testing::{random_machine, sim_ground_truth, ScriptedEndpoint};

const TRIALS: usize = 1000;

fn verdict(n: u32, name: &str, ok: bool, detail: String) {
    println!("criterion {n} {name}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "criterion {n} {name}: {detail}");
}

fn vulnerable() -> ClusterConfig {
    ClusterConfig::default().with_vulns(Vulnerability::ALL)
}

fn sim_alphabet(cfg: &ClusterConfig) -> Vec<InputSymbol> {
    enumerate_input_alphabet(&cfg.alphabet_config()).unwrap()
}

/// The all-flags machine, learned once and shared between criteria.
fn vulnerable_machine() -> &'static (MealyMachine, Duration) {
    static M: OnceLock<(MealyMachine, Duration)> = OnceLock::new();
    M.get_or_init(|| {
        let cfg = vulnerable();
        let eq = EquivalenceConfig { extra_state_depth: 1, ..Default::default() };
        let start = Instant::now();
        let m = Learner::new(SimProxy::simulated(cfg.clone()).unwrap(), &sim_alphabet(&cfg), eq)
            .unwrap()
            .run()
            .unwrap()
            .machine;
        (m, start.elapsed())
    })
}

#[test]
fn criterion_1_learner_exactness() {
    let cfg = ClusterConfig::default().with_seed(42);
    let alphabet = sim_alphabet(&cfg);
    let start = Instant::now();
    let learned = Learner::new(SimProxy::simulated(cfg.clone()).unwrap(), &alphabet, EquivalenceConfig::default())
        .unwrap()
        .run()
        .unwrap()
        .machine;
    let elapsed = start.elapsed();
    let truth = sim_ground_truth(&cfg, &alphabet, 256).unwrap();
    let ok = isomorphic(&learned, &truth) && elapsed < Duration::from_secs(60);
    let detail = format!(
        "learned {} states, ground truth {} states, isomorphic {}, {:.1?}",
        learned.num_states(),
        truth.num_states(),
        isomorphic(&learned, &truth),
        elapsed
    );
    verdict(1, "learner exactness", ok, detail);
}

/// Iterative DFS over explicit frames; tree paths rebuilt from parents.
fn dfs_tree_paths(m: &MealyMachine) -> Vec<MessageSequence> {
    let mut parent: Vec<Option<(StateId, usize)>> = vec![None; m.num_states()];
    let mut seen = vec![false; m.num_states()];
    let mut order = Vec::new();
    seen[m.initial()] = true;
    let mut frames = vec![(m.initial(), 0usize)];
    while let Some(top) = frames.last_mut() {
        let (s, i) = *top;
        if i == m.alphabet().len() {
            frames.pop();
            continue;
        }
        top.1 += 1;
        let w = m.transition(s, i).next;
        if m.is_hidden(s, i) || seen[w] {
            continue;
        }
        seen[w] = true;
        parent[w] = Some((s, i));
        order.push(w);
        frames.push((w, 0));
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

fn r_squared(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    sxy * sxy / (sxx * syy)
}

#[test]
fn criterion_2_sdfs_correctness() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut mismatches, mut bad_counts) = (0, 0);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for _ in 0..TRIALS {
        let states = rng.gen_range(1..=8);
        let inputs = rng.gen_range(1..=5);
        let m = random_machine(&mut rng, states, inputs, 3);
        let others: Vec<InputSymbol> = m.alphabet().iter().filter(|_| rng.gen_bool(0.15)).cloned().collect();
        let p = m.prune(&PrunePolicy::self_loops().with_others(others));
        let (set, stats) = sdfs_extract_counted(&p, p.initial());
        if set.sequences != dfs_tree_paths(&p) {
            mismatches += 1;
        }
        let reach = p.reachable_traversal();
        if set.len() + 1 != reach.len() {
            bad_counts += 1;
        }
        let explored: usize = reach.iter().map(|&s| p.traversal_edges(s).count()).sum();
        xs.push((p.num_states() + explored) as f64);
        ys.push(stats.ops as f64);
    }
    let r2 = r_squared(&xs, &ys);
    let ok = mismatches == 0 && bad_counts == 0 && r2 > 0.99;
    let detail = format!(
        "{TRIALS} machines, {mismatches} oracle mismatches, {bad_counts} |M| mismatches, ops~|V|+|E| R2={r2:.4}"
    );
    verdict(2, "SDFS correctness", ok, detail);
}

#[test]
fn criterion_3_six_attack_rediscovery() {
    let cfg = vulnerable();
    let det = Detector::new(&cfg);
    let (m, learn_time) = vulnerable_machine();
    let start = Instant::now();
    let mut sul = SimProxy::simulated(cfg.clone()).unwrap();
    let fuzz = CampaignConfig { budget: 50_000, seed: 7, ..Default::default() };
    let report = run_campaign(m, &mut sul, &det, &fuzz).unwrap();
    let classes = report.classes();
    let missing: Vec<_> =
        Vulnerability::ALL.into_iter().filter(|v| !classes.contains(&(*v, expected_criterion(*v)))).collect();

    let mut direct_misses = Vec::new();
    for v in Vulnerability::ALL {
        let trace = MessageSequence::new(exploit_trace(v, &cfg.alphabet_config()));
        let run = execute(&mut sul, &det, &trace, "direct").unwrap();
        if !run.findings.iter().any(|f| f.class == Some(v) && f.criterion == expected_criterion(v)) {
            direct_misses.push(v);
        }
    }
    let elapsed = start.elapsed() + *learn_time;
    let ok = missing.is_empty() && direct_misses.is_empty() && elapsed < Duration::from_secs(600);
    let detail = format!(
        "{} cases, machine {} states, {} seeds, missing {missing:?}, direct misses {direct_misses:?}, {:.1?} incl. learning",
        report.cases_run,
        m.num_states(),
        report.seed_sequences,
        elapsed
    );
    verdict(3, "six-attack rediscovery", ok, detail);
}

#[test]
fn criterion_4_false_positive_bound() {
    let cfg = ClusterConfig::default();
    let alphabet = sim_alphabet(&cfg);
    let det = Detector::new(&cfg);
    let patched = Learner::new(SimProxy::simulated(cfg.clone()).unwrap(), &alphabet, EquivalenceConfig::default())
        .unwrap()
        .run()
        .unwrap()
        .machine;
    let mut sul = SimProxy::simulated(cfg.clone()).unwrap();
    let fuzz = CampaignConfig { budget: 10_000, seed: 4, ..Default::default() };
    let own = run_campaign(&patched, &mut sul, &det, &fuzz).unwrap();
    let (rich, _) = vulnerable_machine();
    let cross = run_campaign(rich, &mut sul, &det, &fuzz).unwrap();
    let ok =
        own.findings.is_empty() && cross.findings.is_empty() && own.cases_run == 10_000 && cross.cases_run == 10_000;
    let detail = format!(
        "patched machine: {} cases, {} findings; all-flags machine on patched cluster: {} cases, {} findings",
        own.cases_run,
        own.findings.len(),
        cross.cases_run,
        cross.findings.len()
    );
    verdict(4, "false-positive bound", ok, detail);
}

fn statefuzz(args: &[&str], dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_statefuzz")).args(args).current_dir(dir).output().unwrap()
}

#[test]
fn criterion_5_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("cfg.json"), r#"{"learner":{"extra_state_depth":1},"fuzz":{"budget":2000}}"#).unwrap();
    let mut problems = Vec::new();
    for out in ["a", "b"] {
        let o = statefuzz(
            &["learn", "--config", "cfg.json", "--vulns", "unauth_join", "--seed", "42", "--out-dir", out],
            d,
        );
        if !o.status.success() {
            problems.push(format!("learn {out}: {}", String::from_utf8_lossy(&o.stderr)));
        }
        let machine = format!("{out}/machine.json");
        let o = statefuzz(
            &[
                "fuzz",
                "--machine",
                &machine,
                "--config",
                "cfg.json",
                "--vulns",
                "unauth_join",
                "--seed",
                "5",
                "--out-dir",
                out,
            ],
            d,
        );
        if !o.status.success() {
            problems.push(format!("fuzz {out}: {}", String::from_utf8_lossy(&o.stderr)));
        }
    }
    for f in ["machine.json", "machine.dot", "transcript.jsonl", "learn.json", "report.json"] {
        if fs::read(d.join("a").join(f)).ok() != fs::read(d.join("b").join(f)).ok() {
            problems.push(format!("{f} differs"));
        }
    }
    let cases: Vec<_> =
        fs::read_dir(d.join("a/cases")).map(|r| r.map(|e| e.unwrap().path()).collect()).unwrap_or_default();
    if cases.is_empty() {
        problems.push("no finding cases".into());
    }
    let mut replays = 0;
    if let Some(case) = cases.first() {
        let first = statefuzz(&["replay", case.to_str().unwrap()], d);
        let second = statefuzz(&["replay", case.to_str().unwrap()], d);
        if !first.status.success() || first.stdout != second.stdout {
            problems.push("cli replay differs".into());
        }
        let file: serde_json::Value = serde_json::from_str(&fs::read_to_string(case).unwrap()).unwrap();
        let cfg: ClusterConfig = serde_json::from_value(file["cluster"].clone()).unwrap();
        let fc: FuzzCase = serde_json::from_value(file["record"]["case"].clone()).unwrap();
        let det = Detector::new(&cfg);
        let alphabet = sim_alphabet(&cfg);
        let mut sul = SimProxy::simulated(cfg).unwrap();
        let reference = replay(&fc, &mut sul, &det, &alphabet).unwrap();
        for _ in 0..100 {
            if replay(&fc, &mut sul, &det, &alphabet).unwrap() == reference {
                replays += 1;
            }
        }
    }
    let ok = problems.is_empty() && replays == 100;
    verdict(
        5,
        "determinism",
        ok,
        format!("{} case files, {replays}/100 identical replays, issues {problems:?}", cases.len()),
    );
}

fn scripted_reply(ty: MessageType, payload: serde_json::Value) -> ConcreteMessage {
    ConcreteMessage::new("SD-WAN", "A", 0, ty, payload)
}

/// Random script on `PReq(A)`; the second window only gets late replies.
fn ordering_trial(seed: u64, hb: u64) -> Result<(), String> {
    let acfg = AlphabetConfig::new(vec!["A".into(), "B".into(), "C".into()], "X", "SD-WAN");
    let templates = [
        (MessageType::ProbeResponse, serde_json::json!({"node": "A", "status": "alive"})),
        (MessageType::ProbeResponse, serde_json::json!({"node": "B", "status": "dead"})),
        (MessageType::BootstrapRequest, serde_json::json!({"members": []})),
        (MessageType::RaftJoinResponse, serde_json::json!({"status": "ok"})),
        (MessageType::RaftCommandResponse, serde_json::json!({"status": "ok"})),
        (MessageType::RaftConfigureResponse, serde_json::json!({})),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ep = ScriptedEndpoint::new(rng.gen());
    let mut expected: [Vec<(u64, OutputSymbol)>; 2] = [Vec::new(), Vec::new()];
    for (ty, payload) in &templates {
        if !rng.gen_bool(0.7) {
            continue;
        }
        let stamp = rng.gen_range(0..2 * hb);
        let arrival = rng.gen_range(stamp..=2 * hb).max(1);
        let msg = scripted_reply(*ty, payload.clone());
        let sym = decode(&msg, &acfg, 1).map_err(|e| e.to_string())?;
        let window = usize::from(stamp >= hb || arrival > hb);
        expected[window].push((stamp, sym));
        ep = ep.on(MessageType::ProbeRequest, stamp, arrival, msg);
    }
    let mut proxy = Proxy::new(ep, acfg.clone(), hb).map_err(|e| e.to_string())?;
    let got = [
        proxy.step(&Symbol::PReq { n: acfg.known_ref() }).map_err(|e| e.to_string())?,
        proxy.step(&Symbol::RConReq).map_err(|e| e.to_string())?,
    ];
    for (k, mut want) in expected.into_iter().enumerate() {
        want.sort();
        let want = if want.is_empty() {
            OutputWord::no_response()
        } else {
            OutputWord(want.into_iter().map(|(_, s)| s).collect())
        };
        if got[k] != want {
            return Err(format!("seed {seed} window {k}: got {} want {want}", got[k]));
        }
    }
    Ok(())
}

fn random_word(rng: &mut ChaCha8Rng, alphabet: &[InputSymbol], max: usize) -> Vec<InputSymbol> {
    (0..rng.gen_range(0..=max)).map(|_| alphabet[rng.gen_range(0..alphabet.len())].clone()).collect()
}

#[test]
fn criterion_6_proxy_ordering_and_windowing() {
    let mut failures = Vec::new();
    for t in 0..TRIALS {
        if let Err(e) = ordering_trial(t as u64, 2 + (t as u64 % 6)) {
            failures.push(e);
        }
    }
    let ordering_failures = failures.len();

    let base = ClusterConfig::default().with_vulns([Vulnerability::UnauthJoin]);
    let alphabet = sim_alphabet(&base);
    let mut quiet_cfg = base.clone();
    quiet_cfg.keepalive_traffic = false;
    let mut noisy = SimProxy::simulated(base.clone()).unwrap();
    let mut quiet = SimProxy::simulated(quiet_cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut keepalive_failures = 0;
    for _ in 0..TRIALS {
        let mut word = exploit_trace(Vulnerability::UnauthJoin, &base.alphabet_config());
        word.extend(random_word(&mut rng, &alphabet, 6));
        if noisy.query(&word).unwrap() != quiet.query(&word).unwrap() {
            keepalive_failures += 1;
        }
    }
    let answered = noisy.stats().keepalives_answered;

    let cfg = vulnerable();
    let mut used = SimProxy::simulated(cfg.clone()).unwrap();
    let mut reset_failures = 0;
    for _ in 0..TRIALS {
        used.query(&random_word(&mut rng, &alphabet, 8)).unwrap();
        let w = random_word(&mut rng, &alphabet, 8);
        let mut fresh = SimProxy::simulated(cfg.clone()).unwrap();
        if used.query(&w).unwrap() != fresh.query(&w).unwrap() {
            reset_failures += 1;
        }
    }
    let ok = ordering_failures == 0 && keepalive_failures == 0 && reset_failures == 0 && answered > 0;
    let detail = format!(
        "{TRIALS} trials each: ordering {ordering_failures} failures {:?}, keep-alive {keepalive_failures} failures ({answered} keep-alives answered), reset {reset_failures} failures",
        failures.first()
    );
    verdict(6, "proxy ordering and windowing", ok, detail);
}

fn corrupt(rng: &mut ChaCha8Rng, frame: &[u8]) -> Vec<u8> {
    let mut f = frame.to_vec();
    match rng.gen_range(0..5) {
        0 => {
            for _ in 0..rng.gen_range(1..=4) {
                let i = rng.gen_range(0..f.len());
                f[i] ^= 1 << rng.gen_range(0..8);
            }
        }
        1 => f.truncate(rng.gen_range(0..f.len())),
        2 => f.extend((0..rng.gen_range(1..8)).map(|_| rng.gen::<u8>())),
        3 => {
            let i = rng.gen_range(4..f.len());
            f[i] = rng.gen();
        }
        _ => f = (0..rng.gen_range(0..64)).map(|_| rng.gen()).collect(),
    }
    f
}

#[test]
fn criterion_7_codec_round_trip() {
    let mut exhaustive = 0;
    let mut mismatches = Vec::new();
    for members in 3..=6 {
        let cfg = ClusterConfig::with_members(members).alphabet_config();
        for sym in enumerate_input_alphabet(&cfg).unwrap() {
            for (ts, term) in [(0u64, 0u64), (7, 3), (u64::from(u32::MAX) + 5, 1 << 40)] {
                let ctx = EncodeCtx { cluster_id: &cfg.cluster_id, self_id: &cfg.self_id, ts, leader_term: term };
                let msg = encode(&sym, ctx);
                let back = decode_frame(&encode_frame(&msg)).map_err(|e| e.to_string());
                let abs =
                    back.as_ref().map_err(Clone::clone).and_then(|m| decode(m, &cfg, term).map_err(|e| e.to_string()));
                exhaustive += 1;
                if back.as_ref() != Ok(&msg) || abs != Ok(OutputSymbol::from(sym.clone())) {
                    mismatches.push(sym.to_string());
                }
            }
        }
    }

    let cfg = ClusterConfig::default().alphabet_config();
    let frames: Vec<Vec<u8>> = enumerate_input_alphabet(&cfg)
        .unwrap()
        .iter()
        .map(|s| encode_frame(&encode(s, EncodeCtx { cluster_id: "SD-WAN", self_id: "X", ts: 11, leader_term: 2 })))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let fuzz_trials = 20 * TRIALS;
    let (mut errors, mut valid, mut panics, mut unstable) = (0, 0, 0, 0);
    for _ in 0..fuzz_trials {
        let pick = rng.gen_range(0..frames.len());
        let f = corrupt(&mut rng, &frames[pick]);
        match std::panic::catch_unwind(|| decode_frame(&f)) {
            Err(_) => panics += 1,
            Ok(Err(_)) => errors += 1,
            Ok(Ok(msg)) => {
                valid += 1;
                let again = decode_frame(&encode_frame(&msg));
                let abstracted = std::panic::catch_unwind(|| decode(&msg, &cfg, 2).is_ok());
                if again.as_ref().ok() != Some(&msg) || abstracted.is_err() {
                    unstable += 1;
                }
            }
        }
    }
    let distinct: BTreeSet<&str> = mismatches.iter().map(String::as_str).collect();
    let ok = mismatches.is_empty() && panics == 0 && unstable == 0;
    let detail = format!(
        "{exhaustive} exhaustive round trips, mismatches {distinct:?}; {fuzz_trials} corrupted frames: {errors} errors, {valid} valid, {panics} panics, {unstable} unstable"
    );
    verdict(7, "codec round-trip", ok, detail);
}
