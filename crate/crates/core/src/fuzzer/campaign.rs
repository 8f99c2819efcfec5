use std::collections::{BTreeMap, BTreeSet};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alphabet::InputSymbol;
use crate::detector::{Baseline, Criterion, Detector, Finding, TraceStep};
use crate::learner::{SulError, SulOracle};
use crate::mealy::{MealyMachine, PrunePolicy};
use crate::proxy::{Proxy, SulEndpoint};
use crate::sulsim::{ClusterObservation, Vulnerability};

use super::{mutate, rebuild, sdfs_extract, FuzzError, MessageSequence, MutationRecord};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// A SUL whose cluster state can be snapshotted.
pub trait ObservableSul: SulOracle {
    fn observe(&mut self) -> Result<ClusterObservation, SulError>;
}

impl<E: SulEndpoint> ObservableSul for Proxy<E> {
    fn observe(&mut self) -> Result<ClusterObservation, SulError> {
        Ok(Proxy::observe(self)?)
    }
}

impl<T: ObservableSul + ?Sized> ObservableSul for &mut T {
    fn observe(&mut self) -> Result<ClusterObservation, SulError> {
        (**self).observe()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzCase {
    pub id: String,
    pub seed_sequence: MessageSequence,
    pub mutations: Vec<MutationRecord>,
    pub rng_seed: u64,
}

impl FuzzCase {
    pub fn mutant(&self, alphabet: &[InputSymbol]) -> Result<MessageSequence, FuzzError> {
        rebuild(&self.seed_sequence, &self.mutations, alphabet)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub case: FuzzCase,
    pub findings: Vec<Finding>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CampaignConfig {
    pub budget: u64,
    pub seed: u64,
    /// Inclusive range of mutations applied per case.
    pub mutations: (usize, usize),
    /// Keep only the first finding per (criterion, class).
    pub dedup: bool,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig { budget: 10_000, seed: 1, mutations: (1, 3), dedup: false }
    }
}

impl CampaignConfig {
    fn validate(&self) -> Result<(), FuzzError> {
        if self.budget == 0 {
            return Err(FuzzError::ZeroBudget);
        }
        let (lo, hi) = self.mutations;
        if lo == 0 || hi < lo {
            return Err(FuzzError::InvalidConfig(format!("mutation range {lo}..={hi}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub states_visited: usize,
    pub states_total: usize,
    pub pairs_visited: usize,
    pub pairs_total: usize,
    pub states: Vec<String>,
    /// Visited `(state, input)` pairs of the learned machine.
    pub pairs: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub schema_version: u32,
    pub seed: u64,
    pub budget: u64,
    pub shards: usize,
    pub seed_sequences: usize,
    pub cases_run: u64,
    pub cases_failed: u64,
    pub symbols_sent: u64,
    pub max_mutant_len: usize,
    pub findings: Vec<Finding>,
    pub cases: Vec<CaseRecord>,
    pub coverage: CoverageReport,
}

impl CampaignReport {
    pub fn tally(&self) -> BTreeMap<Criterion, usize> {
        crate::detector::tally(&self.findings)
    }

    /// Distinct (class, criterion) pairs among the findings.
    pub fn classes(&self) -> BTreeSet<(Vulnerability, Criterion)> {
        self.findings.iter().filter_map(|f| f.class.map(|c| (c, f.criterion))).collect()
    }

    /// Keeps the first finding per (criterion, class) and the cases those
    /// findings point at.
    pub fn dedup(&mut self) {
        let mut seen = BTreeSet::new();
        self.findings.retain(|f| seen.insert((f.criterion, f.class)));
        let keep: BTreeSet<&str> = self.findings.iter().map(|f| f.case_ref.as_str()).collect();
        self.cases.retain(|c| keep.contains(c.case.id.as_str()));
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Outcome of running one sequence from reset.
#[derive(Debug, Clone, PartialEq)]
pub struct Execution {
    pub baseline: Baseline,
    pub post: ClusterObservation,
    pub trace: Vec<TraceStep>,
    pub findings: Vec<Finding>,
}

/// Resets the SUL, snapshots the baseline, runs `seq` and evaluates.
/// An empty sequence is a reset plus observe.
pub fn execute<O: ObservableSul + ?Sized>(
    o: &mut O,
    det: &Detector,
    seq: &MessageSequence,
    case_ref: &str,
) -> Result<Execution, FuzzError> {
    o.reset()?;
    let baseline = Baseline::capture(o.observe()?);
    let mut trace = Vec::with_capacity(seq.len());
    for sym in &seq.symbols {
        let out = o.step(sym)?;
        trace.push((sym.clone(), out));
    }
    let post = o.observe()?;
    let findings = det.evaluate(&baseline, &post, &trace, case_ref)?;
    Ok(Execution { baseline, post, trace, findings })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub case_id: String,
    pub mutant: MessageSequence,
    pub trace: Vec<(String, String)>,
    pub findings: Vec<Finding>,
}

/// Rebuilds the mutant of `case` and runs it once from reset.
pub fn replay<O: ObservableSul + ?Sized>(
    case: &FuzzCase,
    o: &mut O,
    det: &Detector,
    alphabet: &[InputSymbol],
) -> Result<ReplayReport, FuzzError> {
    let mutant = case.mutant(alphabet)?;
    let run = execute(o, det, &mutant, &case.id)?;
    Ok(ReplayReport {
        case_id: case.id.clone(),
        mutant,
        trace: run.trace.iter().map(|(i, w)| (i.to_string(), w.to_string())).collect(),
        findings: run.findings,
    })
}

/// Traversal pruning used for seed extraction: self-loops and keep-alive
/// inputs are hidden.
pub fn seed_policy(m: &MealyMachine, self_id: &str) -> PrunePolicy {
    PrunePolicy::self_loops().with_others(m.alphabet().iter().filter(|s| s.is_keepalive(self_id)).cloned())
}

struct Coverage {
    state_hits: Vec<u64>,
    pairs: BTreeSet<(usize, usize)>,
}

impl Coverage {
    fn new(m: &MealyMachine) -> Self {
        Coverage { state_hits: vec![0; m.num_states()], pairs: BTreeSet::new() }
    }

    fn record(&mut self, m: &MealyMachine, seq: &MessageSequence) {
        let mut s = m.initial();
        self.state_hits[s] += 1;
        for sym in &seq.symbols {
            let Some(i) = m.input_index(sym) else { return };
            self.pairs.insert((s, i));
            s = m.transition(s, i).next;
            self.state_hits[s] += 1;
        }
    }

    fn report(&self, m: &MealyMachine) -> CoverageReport {
        let states: Vec<String> =
            (0..m.num_states()).filter(|&s| self.state_hits[s] > 0).map(|s| m.state_name(s).to_string()).collect();
        CoverageReport {
            states_visited: states.len(),
            states,
            states_total: m.num_states(),
            pairs_visited: self.pairs.len(),
            pairs_total: m.num_states() * m.alphabet().len(),
            pairs: self
                .pairs
                .iter()
                .map(|&(s, i)| (m.state_name(s).to_string(), m.alphabet()[i].to_string()))
                .collect(),
        }
    }
}

/// Fuzzes `o` with mutants of the seed sequences of `m`.
///
/// The first pass takes every seed once in extraction order; afterwards a
/// seed is drawn with weight `1 / (1 + hits)` of its end state.
pub fn run_campaign<O: ObservableSul + ?Sized>(
    m: &MealyMachine,
    o: &mut O,
    det: &Detector,
    cfg: &CampaignConfig,
) -> Result<CampaignReport, FuzzError> {
    run_shard(m, o, det, cfg, "")
}

fn run_shard<O: ObservableSul + ?Sized>(
    m: &MealyMachine,
    o: &mut O,
    det: &Detector,
    cfg: &CampaignConfig,
    prefix: &str,
) -> Result<CampaignReport, FuzzError> {
    cfg.validate()?;
    let seeds = sdfs_extract(&m.prune(&seed_policy(m, &det.dummy_id)), m.initial());
    if seeds.is_empty() {
        return Err(FuzzError::NoSeeds);
    }
    let ends: Vec<usize> =
        seeds.iter().map(|s| m.state_after(&s.symbols).expect("seed sequences are feasible")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut cov = Coverage::new(m);
    let mut report = CampaignReport {
        schema_version: REPORT_SCHEMA_VERSION,
        seed: cfg.seed,
        budget: cfg.budget,
        shards: 1,
        seed_sequences: seeds.len(),
        cases_run: 0,
        cases_failed: 0,
        symbols_sent: 0,
        max_mutant_len: 0,
        findings: Vec::new(),
        cases: Vec::new(),
        coverage: CoverageReport::default(),
    };
    for n in 0..cfg.budget {
        let pick = if (n as usize) < seeds.len() {
            n as usize
        } else {
            let weights: Vec<f64> = ends.iter().map(|&e| 1.0 / (1.0 + cov.state_hits[e] as f64)).collect();
            WeightedIndex::new(&weights).expect("positive weights").sample(&mut rng)
        };
        let rng_seed: u64 = rng.gen();
        let mut case_rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let seed_sequence = seeds.sequences[pick].clone();
        let count = case_rng.gen_range(cfg.mutations.0..=cfg.mutations.1);
        let mut mutant = seed_sequence.clone();
        let mut mutations = Vec::with_capacity(count);
        for _ in 0..count {
            if mutant.is_empty() {
                break;
            }
            let (next, record) = mutate(&mutant, m.alphabet(), &mut case_rng)?;
            mutant = next;
            mutations.push(record);
        }
        let case = FuzzCase { id: format!("{prefix}c{n:06}"), seed_sequence, mutations, rng_seed };
        cov.record(m, &mutant);
        report.cases_run += 1;
        report.max_mutant_len = report.max_mutant_len.max(mutant.len());
        match execute(o, det, &mutant, &case.id) {
            Ok(run) => {
                report.symbols_sent += mutant.len() as u64;
                if !run.findings.is_empty() {
                    log::info!("{}: {} finding(s)", case.id, run.findings.len());
                    report.findings.extend(run.findings.iter().cloned());
                    report.cases.push(CaseRecord { case, findings: run.findings });
                }
            }
            Err(e) => {
                log::warn!("{} aborted: {e}", case.id);
                report.cases_failed += 1;
            }
        }
    }
    report.coverage = cov.report(m);
    if cfg.dedup {
        report.dedup();
    }
    Ok(report)
}

fn shard_seed(seed: u64, shard: usize) -> u64 {
    let mut z = seed ^ (shard as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Splits the budget over `shards` independent SUL instances built by
/// `make` and merges the reports in shard order.
pub fn run_sharded<O, F>(
    m: &MealyMachine,
    make: F,
    det: &Detector,
    cfg: &CampaignConfig,
    shards: usize,
) -> Result<CampaignReport, FuzzError>
where
    O: ObservableSul + Send,
    F: Fn(usize) -> Result<O, FuzzError> + Sync,
{
    cfg.validate()?;
    if shards <= 1 {
        return run_campaign(m, &mut make(0)?, det, cfg);
    }
    let shards = shards.min(cfg.budget as usize);
    let results: Vec<Result<CampaignReport, FuzzError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..shards)
            .map(|i| {
                let make = &make;
                let sub = CampaignConfig {
                    budget: cfg.budget / shards as u64 + u64::from((i as u64) < cfg.budget % shards as u64),
                    seed: shard_seed(cfg.seed, i),
                    dedup: false,
                    ..cfg.clone()
                };
                scope.spawn(move || run_shard(m, &mut make(i)?, det, &sub, &format!("s{i}-")))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("shard thread panicked")).collect()
    });
    let mut merged: Option<CampaignReport> = None;
    let mut pairs = BTreeSet::new();
    let mut states = BTreeSet::new();
    for r in results {
        let r = r?;
        pairs.extend(r.coverage.pairs.iter().cloned());
        states.extend(r.coverage.states.iter().cloned());
        match merged.as_mut() {
            None => merged = Some(r),
            Some(acc) => {
                acc.cases_run += r.cases_run;
                acc.cases_failed += r.cases_failed;
                acc.symbols_sent += r.symbols_sent;
                acc.max_mutant_len = acc.max_mutant_len.max(r.max_mutant_len);
                acc.findings.extend(r.findings);
                acc.cases.extend(r.cases);
            }
        }
    }
    let mut report = merged.expect("at least two shards");
    report.seed = cfg.seed;
    report.budget = cfg.budget;
    report.shards = shards;
    report.coverage.states_visited = states.len();
    report.coverage.states = states.into_iter().collect();
    report.coverage.pairs_visited = pairs.len();
    report.coverage.pairs = pairs.into_iter().collect();
    if cfg.dedup {
        report.dedup();
    }
    Ok(report)
}
