use std::collections::BTreeSet;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use statefuzz_core::alphabet::enumerate_input_alphabet;
use statefuzz_core::detector::{Criterion, Detector, Finding};
use statefuzz_core::fuzzer::{replay, run_sharded, CampaignReport, FuzzError};
use statefuzz_core::learner::{EquivalenceConfig, LearnError, LearnStats, Learner, SulError};
use statefuzz_core::mealy::MealyMachine;
use statefuzz_core::proxy::tcp::TcpEndpoint;
use statefuzz_core::proxy::{Proxy, SulEndpoint};
use statefuzz_core::sulsim::{server, ClusterConfig, ClusterHandle, Vulnerability};

use crate::config::{parse_vulns, CaseFile, RunConfig, CASE_SCHEMA_VERSION};

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERROR: u8 = 1;
pub const EXIT_BUDGET: u8 = 3;
pub const EXIT_NONDETERMINISM: u8 = 4;
pub const EXIT_VERDICT_MISMATCH: u8 = 5;
pub const EXIT_FINDINGS: u8 = 6;

pub type Sul = Proxy<Box<dyn SulEndpoint + Send>>;

/// Opens a proxy session on the in-process simulator, or on a served one.
pub fn open_sul(cluster: &ClusterConfig, connect: Option<&str>) -> Result<Sul> {
    let endpoint: Box<dyn SulEndpoint + Send> = match connect {
        Some(addr) => Box::new(
            TcpEndpoint::connect(addr, cluster.cluster_id.clone()).with_context(|| format!("connecting to {addr}"))?,
        ),
        None => Box::new(ClusterHandle::spawn(cluster.clone())?),
    };
    Ok(Proxy::new(endpoint, cluster.alphabet_config(), cluster.heartbeat_threshold)?)
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub budget: Option<u64>,
    pub vulns: Option<String>,
}

fn load_config(path: Option<&Path>, vulns: Option<&str>) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(list) = vulns {
        cfg.cluster.vulnerabilities = parse_vulns(list)?;
    }
    Ok(cfg)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn names(vulns: &BTreeSet<Vulnerability>) -> String {
    if vulns.is_empty() {
        return "none".into();
    }
    vulns.iter().map(|v| v.as_str()).collect::<Vec<_>>().join(",")
}

#[derive(Serialize)]
struct LearnSummary<'a> {
    schema_version: u32,
    cluster: &'a ClusterConfig,
    learner: &'a EquivalenceConfig,
    states: usize,
    inputs: usize,
    stats: LearnStats,
}

/// Learns the cluster and writes `machine.json`, `machine.dot`,
/// `transcript.jsonl` and `learn.json` into `out_dir`.
pub fn learn(config: Option<&Path>, over: &Overrides, out_dir: &Path) -> Result<u8> {
    let mut cfg = load_config(config, over.vulns.as_deref())?;
    if let Some(seed) = over.seed {
        cfg.cluster.seed = seed;
    }
    if let Some(budget) = over.budget {
        cfg.learner.query_budget = budget;
    }
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let alphabet = enumerate_input_alphabet(&cfg.cluster.alphabet_config())?;
    let transcript = File::create(out_dir.join("transcript.jsonl")).context("creating transcript")?;
    let sul = open_sul(&cfg.cluster, cfg.connect.as_deref())?;
    let mut learner = Learner::new(sul, &alphabet, cfg.learner)?.with_transcript(Box::new(BufWriter::new(transcript)));
    log::info!(
        "learning {} inputs, vulnerabilities {}, m={}",
        alphabet.len(),
        names(&cfg.cluster.vulnerabilities),
        cfg.learner.extra_state_depth
    );
    let start = Instant::now();
    let outcome = match learner.run() {
        Ok(o) => o,
        Err(e) => {
            if let LearnError::BudgetExhausted { hypothesis: Some(h), .. } = &e {
                write_file(&out_dir.join("hypothesis.json"), &h.to_json())?;
                eprintln!("last hypothesis written to {}", out_dir.join("hypothesis.json").display());
            }
            return Err(e.into());
        }
    };
    drop(learner);
    let m = &outcome.machine;
    write_file(&out_dir.join("machine.json"), &m.to_json())?;
    write_file(&out_dir.join("machine.dot"), &m.export_dot())?;
    let summary = LearnSummary {
        schema_version: 1,
        cluster: &cfg.cluster,
        learner: &cfg.learner,
        states: m.num_states(),
        inputs: m.alphabet().len(),
        stats: outcome.stats,
    };
    write_file(&out_dir.join("learn.json"), &serde_json::to_string_pretty(&summary)?)?;
    let q = outcome.stats.queries;
    println!("states       {}", m.num_states());
    println!("inputs       {}", m.alphabet().len());
    println!("rounds       {}", outcome.stats.rounds);
    println!("queries      {} ({} cache hits, {} executions)", q.queries, q.cache_hits, q.executions);
    println!("elapsed      {:.2?}", start.elapsed());
    println!("machine      {}", out_dir.join("machine.json").display());
    Ok(EXIT_OK)
}

fn print_summary(report: &CampaignReport, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "{:<10}{:>10}  classes", "criterion", "findings")?;
    let tally = report.tally();
    for c in Criterion::ALL {
        let classes: BTreeSet<&str> = report
            .findings
            .iter()
            .filter(|f| f.criterion == c)
            .filter_map(|f| f.class.map(Vulnerability::as_str))
            .collect();
        let list = if classes.is_empty() { "-".to_string() } else { classes.into_iter().collect::<Vec<_>>().join(",") };
        writeln!(out, "{:<10}{:>10}  {list}", c.to_string(), tally.get(&c).copied().unwrap_or(0))?;
    }
    let cov = &report.coverage;
    writeln!(
        out,
        "cases {} (failed {}), seeds {}, states {}/{}, pairs {}/{}",
        report.cases_run,
        report.cases_failed,
        report.seed_sequences,
        cov.states_visited,
        cov.states_total,
        cov.pairs_visited,
        cov.pairs_total
    )
}

/// Runs a campaign from a learned machine; writes `report.json` and one
/// file per finding case under `cases/`.
pub fn fuzz(
    machine: &Path,
    config: Option<&Path>,
    over: &Overrides,
    shards: usize,
    dedup: bool,
    fail_on_finding: bool,
    out_dir: &Path,
) -> Result<u8> {
    let mut cfg = load_config(config, over.vulns.as_deref())?;
    if let Some(seed) = over.seed {
        cfg.fuzz.seed = seed;
    }
    if let Some(budget) = over.budget {
        cfg.fuzz.budget = budget;
    }
    cfg.fuzz.dedup |= dedup;
    let text = fs::read_to_string(machine).with_context(|| format!("reading machine {}", machine.display()))?;
    let m = MealyMachine::from_json(&text).with_context(|| format!("loading machine {}", machine.display()))?;
    let alphabet = enumerate_input_alphabet(&cfg.cluster.alphabet_config())?;
    if let Some(foreign) = m.alphabet().iter().find(|s| !alphabet.contains(s)) {
        bail!("machine input {foreign} is not in the alphabet of the configured cluster");
    }
    let det = Detector::new(&cfg.cluster);
    let start = Instant::now();
    let cluster = cfg.cluster.clone();
    let connect = cfg.connect.clone();
    let make = |_| open_sul(&cluster, connect.as_deref()).map_err(|e| FuzzError::Sul(SulError(format!("{e:#}"))));
    let report = run_sharded(&m, make, &det, &cfg.fuzz, shards.max(1))?;
    fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    write_file(&out_dir.join("report.json"), &report.to_json())?;
    let cases_dir = out_dir.join("cases");
    if cases_dir.exists() {
        for entry in fs::read_dir(&cases_dir)? {
            let p = entry?.path();
            if p.extension().is_some_and(|e| e == "json") {
                fs::remove_file(&p)?;
            }
        }
    }
    fs::create_dir_all(&cases_dir)?;
    for rec in &report.cases {
        let file = CaseFile {
            schema_version: CASE_SCHEMA_VERSION,
            cluster: cfg.cluster.clone(),
            connect: cfg.connect.clone(),
            record: rec.clone(),
        };
        write_file(&cases_dir.join(format!("{}.json", rec.case.id)), &serde_json::to_string_pretty(&file)?)?;
    }
    print_summary(&report, &mut std::io::stdout().lock())?;
    println!("elapsed {:.2?}, report {}", start.elapsed(), out_dir.join("report.json").display());
    if fail_on_finding && !report.findings.is_empty() {
        return Ok(EXIT_FINDINGS);
    }
    Ok(EXIT_OK)
}

fn verdict(findings: &[Finding]) -> BTreeSet<(Criterion, Option<Vulnerability>)> {
    findings.iter().map(|f| (f.criterion, f.class)).collect()
}

/// Replays a stored case and compares the verdict with the recorded one.
pub fn replay_case(case: &Path, config: Option<&Path>) -> Result<u8> {
    let mut file = CaseFile::load(case)?;
    if config.is_some() {
        let cfg = RunConfig::load(config)?;
        file.cluster = cfg.cluster;
        file.connect = cfg.connect;
    }
    let alphabet = enumerate_input_alphabet(&file.cluster.alphabet_config())?;
    let det = Detector::new(&file.cluster);
    let mut sul = open_sul(&file.cluster, file.connect.as_deref())?;
    let report = replay(&file.record.case, &mut sul, &det, &alphabet)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    let (want, got) = (verdict(file.findings()), verdict(&report.findings));
    if want != got {
        eprintln!("verdict differs: recorded {want:?}, replayed {got:?}");
        return Ok(EXIT_VERDICT_MISMATCH);
    }
    Ok(EXIT_OK)
}

/// Serves the simulator on `addr` until killed.
pub fn serve(config: Option<&Path>, over: &Overrides, addr: &str) -> Result<u8> {
    let mut cfg = load_config(config, over.vulns.as_deref())?;
    if let Some(seed) = over.seed {
        cfg.cluster.seed = seed;
    }
    let listener = TcpListener::bind(addr).with_context(|| format!("binding {addr}"))?;
    println!(
        "serving {} ({}) on {}",
        cfg.cluster.cluster_id,
        names(&cfg.cluster.vulnerabilities),
        listener.local_addr()?
    );
    server::serve(listener, cfg.cluster)?;
    Ok(EXIT_OK)
}

/// Maps an error to its exit status.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        match cause.downcast_ref::<LearnError>() {
            Some(LearnError::BudgetExhausted { .. }) => return EXIT_BUDGET,
            Some(LearnError::Nondeterminism { .. }) => return EXIT_NONDETERMINISM,
            _ => {}
        }
    }
    EXIT_ERROR
}

pub fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}
