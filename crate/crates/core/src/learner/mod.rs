//! Active learning of Mealy machines: L* with suffix-closed counterexample
//! processing and a W-method equivalence oracle.

mod equivalence;
mod membership;
mod oracle;
mod table;

pub use equivalence::{access_words, characterization_set, distinguishing_word, test_suite};
pub use membership::{membership_query, MembershipOracle, QueryStats};
pub use oracle::{MachineOracle, SulError, SulOracle};
pub use table::{ObservationTable, Row};

use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alphabet::{InputSymbol, OutputWord};
use crate::mealy::{minimize, MealyMachine};

#[derive(Debug, Error)]
pub enum LearnError {
    #[error(transparent)]
    Sul(#[from] SulError),
    #[error("no majority after repeated queries of a {}-letter word ({} distinct answers)", word.len(), observed.len())]
    Nondeterminism { word: Vec<InputSymbol>, observed: Vec<Vec<OutputWord>> },
    #[error("query budget exhausted after {queries} queries")]
    BudgetExhausted { queries: u64, hypothesis: Option<Box<MealyMachine>> },
    #[error("invalid learner config: {0}")]
    InvalidConfig(String),
    #[error("symbol {0} is not in the learning alphabet")]
    ForeignSymbol(String),
    #[error("learner invariant violated: {0}")]
    Internal(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EquivalenceConfig {
    /// Extra states the W-method accounts for (`m`).
    pub extra_state_depth: usize,
    /// Upper bound on SUL-answered membership queries.
    pub query_budget: u64,
    /// Repetitions per query for the majority vote (`k`, odd).
    pub nondeterminism_retries: usize,
}

impl Default for EquivalenceConfig {
    fn default() -> Self {
        EquivalenceConfig { extra_state_depth: 2, query_budget: 2_000_000, nondeterminism_retries: 3 }
    }
}

impl EquivalenceConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        if self.extra_state_depth < 1 {
            return Err(LearnError::InvalidConfig("extra_state_depth must be at least 1".into()));
        }
        if self.nondeterminism_retries.is_multiple_of(2) {
            return Err(LearnError::InvalidConfig("nondeterminism_retries must be odd".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LearnStats {
    pub rounds: u64,
    pub counterexamples: u64,
    pub queries: QueryStats,
}

pub struct LearnOutcome {
    pub machine: MealyMachine,
    pub stats: LearnStats,
    /// Final observation table, over letter indices of the alphabet.
    pub table: ObservationTable,
}

pub struct Learner<O> {
    mq: MembershipOracle<O>,
    eq: EquivalenceConfig,
}

impl<O: SulOracle> Learner<O> {
    pub fn new(sul: O, alphabet: &[InputSymbol], eq: EquivalenceConfig) -> Result<Self, LearnError> {
        eq.validate()?;
        if alphabet.is_empty() {
            return Err(LearnError::InvalidConfig("alphabet is empty".into()));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = alphabet.iter().find(|s| !seen.insert(*s)) {
            return Err(LearnError::InvalidConfig(format!("duplicate letter {dup}")));
        }
        Ok(Learner { mq: MembershipOracle::new(sul, alphabet, eq.nondeterminism_retries, eq.query_budget), eq })
    }

    pub fn with_transcript(mut self, sink: Box<dyn Write + Send>) -> Self {
        self.mq.set_transcript(sink);
        self
    }

    pub fn oracle(&self) -> &MembershipOracle<O> {
        &self.mq
    }

    pub fn run(&mut self) -> Result<LearnOutcome, LearnError> {
        let alphabet = self.mq.alphabet().to_vec();
        let mut table = ObservationTable::new(alphabet.len());
        let mut stats = LearnStats::default();
        let mut last: Option<MealyMachine> = None;
        let with_last = |e: LearnError, last: &Option<MealyMachine>| match e {
            LearnError::BudgetExhausted { queries, .. } => {
                LearnError::BudgetExhausted { queries, hypothesis: last.clone().map(Box::new) }
            }
            other => other,
        };
        self.mq.set_phase("explore");
        table.stabilize(&mut self.mq).map_err(|e| with_last(e, &last))?;
        loop {
            stats.rounds += 1;
            let h = table.hypothesis(&alphabet)?;
            log::info!("round {}: hypothesis with {} states", stats.rounds, h.num_states());
            last = Some(h.clone());
            self.mq.set_phase("test");
            let cex = equivalence::find_counterexample(&mut self.mq, &h, self.eq.extra_state_depth)
                .map_err(|e| with_last(e, &last))?;
            let Some(cex) = cex else {
                stats.queries = self.mq.stats();
                return Ok(LearnOutcome { machine: minimize(&h), stats, table });
            };
            stats.counterexamples += 1;
            log::debug!("counterexample of length {}", cex.len());
            let before = table.state_count();
            self.mq.set_phase("refine");
            table.process_counterexample(&cex, &mut self.mq).map_err(|e| with_last(e, &last))?;
            if table.state_count() <= before {
                return Err(LearnError::Internal(
                    "counterexample did not split a state; the SUL may be nondeterministic".into(),
                ));
            }
        }
    }
}

/// Learns a Mealy machine of `sul` over `alphabet`.
pub fn lstar_learn<O: SulOracle>(
    sul: O,
    alphabet: &[InputSymbol],
    eq: &EquivalenceConfig,
) -> Result<MealyMachine, LearnError> {
    Learner::new(sul, alphabet, *eq)?.run().map(|o| o.machine)
}

/// Runs the W-method suite of `h` against `sul` with a fresh cache.
pub fn wmethod_counterexample<O: SulOracle>(
    sul: O,
    h: &MealyMachine,
    eq: &EquivalenceConfig,
) -> Result<Option<Vec<InputSymbol>>, LearnError> {
    eq.validate()?;
    let mut mq = MembershipOracle::new(sul, h.alphabet(), eq.nondeterminism_retries, eq.query_budget);
    let found = equivalence::find_counterexample(&mut mq, h, eq.extra_state_depth).map_err(|e| match e {
        LearnError::BudgetExhausted { queries, .. } => {
            LearnError::BudgetExhausted { queries, hypothesis: Some(Box::new(h.clone())) }
        }
        other => other,
    })?;
    Ok(found.map(|w| w.into_iter().map(|a| h.alphabet()[a].clone()).collect()))
}

/// Adds every suffix of `cex` to the table and restabilizes it.
pub fn process_counterexample<O: SulOracle>(
    table: &mut ObservationTable,
    cex: &[InputSymbol],
    mq: &mut MembershipOracle<O>,
) -> Result<(), LearnError> {
    let letters = cex.iter().map(|s| mq.letter(s)).collect::<Result<Vec<_>, _>>()?;
    table.process_counterexample(&letters, mq)
}
