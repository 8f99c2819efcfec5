//! Deterministic Mealy machines over the cluster alphabet.
//!
//! A machine is stored as a dense transition table indexed by
//! `(state, input index)`. Pruning hides edges from traversal (sequence
//! extraction) without touching the table, so every extracted sequence stays
//! executable.

mod dot;
mod iso;
mod json;

pub use iso::{isomorphic, minimize, Signature};
pub use json::{MachineDocument, TransitionRecord, MACHINE_SCHEMA_VERSION};

use std::collections::{BTreeSet, HashMap};

use thiserror::Error;

use crate::alphabet::{InputSymbol, OutputWord};

pub type StateId = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MealyError {
    #[error("state {0} is not part of the machine")]
    UnknownState(StateId),
    #[error("input {0} is not part of the machine alphabet")]
    UnknownInput(String),
    #[error("no transition for state {state} on input {input}")]
    MissingTransition { state: StateId, input: String },
    #[error("duplicate input {0} in alphabet")]
    DuplicateInput(String),
    #[error("malformed machine document: {0}")]
    Document(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub next: StateId,
    pub output: OutputWord,
}

/// Which transitions are hidden from traversal.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PrunePolicy {
    pub drop_self_loops: bool,
    /// Keep-alive class inputs ("Others").
    pub others_labels: BTreeSet<InputSymbol>,
}

impl PrunePolicy {
    pub fn self_loops() -> Self {
        PrunePolicy { drop_self_loops: true, others_labels: BTreeSet::new() }
    }

    pub fn with_others(mut self, labels: impl IntoIterator<Item = InputSymbol>) -> Self {
        self.others_labels.extend(labels);
        self
    }
}

#[derive(Debug, Clone)]
pub struct MealyMachine {
    names: Vec<String>,
    initial: StateId,
    alphabet: Vec<InputSymbol>,
    index: HashMap<InputSymbol, usize>,
    table: Vec<Vec<Transition>>,
    hidden: BTreeSet<(StateId, usize)>,
}

impl PartialEq for MealyMachine {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names
            && self.initial == other.initial
            && self.alphabet == other.alphabet
            && self.table == other.table
            && self.hidden == other.hidden
    }
}

impl Eq for MealyMachine {}

impl MealyMachine {
    /// Builds a machine from a total table: `table[s][i]` is the transition
    /// of state `s` on `alphabet[i]`.
    pub fn new(
        names: Vec<String>,
        initial: StateId,
        alphabet: Vec<InputSymbol>,
        table: Vec<Vec<Transition>>,
    ) -> Result<Self, MealyError> {
        if initial >= names.len().max(1) || names.is_empty() {
            return Err(MealyError::UnknownState(initial));
        }
        if table.len() != names.len() {
            return Err(MealyError::Document(format!("{} states but {} table rows", names.len(), table.len())));
        }
        let mut index = HashMap::with_capacity(alphabet.len());
        for (i, sym) in alphabet.iter().enumerate() {
            if index.insert(sym.clone(), i).is_some() {
                return Err(MealyError::DuplicateInput(sym.to_string()));
            }
        }
        for (s, row) in table.iter().enumerate() {
            if row.len() != alphabet.len() {
                let input = alphabet.get(row.len()).map(ToString::to_string).unwrap_or_else(|| "<extra>".into());
                return Err(MealyError::MissingTransition { state: s, input });
            }
            if let Some(t) = row.iter().find(|t| t.next >= names.len()) {
                return Err(MealyError::UnknownState(t.next));
            }
        }
        Ok(MealyMachine { names, initial, alphabet, index, table, hidden: BTreeSet::new() })
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn num_states(&self) -> usize {
        self.names.len()
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.names[s]
    }

    pub fn state_names(&self) -> &[String] {
        &self.names
    }

    pub fn alphabet(&self) -> &[InputSymbol] {
        &self.alphabet
    }

    pub fn input_index(&self, sym: &InputSymbol) -> Option<usize> {
        self.index.get(sym).copied()
    }

    pub fn transition(&self, s: StateId, input: usize) -> &Transition {
        &self.table[s][input]
    }

    pub fn step(&self, s: StateId, sym: &InputSymbol) -> Result<(StateId, &OutputWord), MealyError> {
        if s >= self.names.len() {
            return Err(MealyError::UnknownState(s));
        }
        let i = self.input_index(sym).ok_or_else(|| MealyError::UnknownInput(sym.to_string()))?;
        let t = &self.table[s][i];
        Ok((t.next, &t.output))
    }

    /// Per-letter outputs of `word` from the initial state.
    pub fn run(&self, word: &[InputSymbol]) -> Result<Vec<OutputWord>, MealyError> {
        self.run_from(self.initial, word).map(|(_, out)| out)
    }

    pub fn run_from(&self, mut s: StateId, word: &[InputSymbol]) -> Result<(StateId, Vec<OutputWord>), MealyError> {
        let mut out = Vec::with_capacity(word.len());
        for sym in word {
            let (next, o) = self.step(s, sym)?;
            out.push(o.clone());
            s = next;
        }
        Ok((s, out))
    }

    /// Concatenation of the per-letter outputs of `word`.
    pub fn run_concat(&self, word: &[InputSymbol]) -> Result<OutputWord, MealyError> {
        Ok(concat(&self.run(word)?))
    }

    pub fn state_after(&self, word: &[InputSymbol]) -> Result<StateId, MealyError> {
        self.run_from(self.initial, word).map(|(s, _)| s)
    }

    /// Copy with self-loops and/or keep-alive edges hidden from traversal.
    pub fn prune(&self, policy: &PrunePolicy) -> MealyMachine {
        let mut m = self.clone();
        for (s, row) in self.table.iter().enumerate() {
            for (i, t) in row.iter().enumerate() {
                let self_loop = policy.drop_self_loops && t.next == s;
                let other = policy.others_labels.contains(&self.alphabet[i]);
                if self_loop || other {
                    m.hidden.insert((s, i));
                }
            }
        }
        m
    }

    pub fn is_hidden(&self, s: StateId, input: usize) -> bool {
        self.hidden.contains(&(s, input))
    }

    /// Outgoing traversal edges `(input index, successor)` in alphabet order.
    pub fn traversal_edges(&self, s: StateId) -> impl Iterator<Item = (usize, StateId)> + '_ {
        self.table[s].iter().enumerate().filter(move |(i, _)| !self.hidden.contains(&(s, *i))).map(|(i, t)| (i, t.next))
    }

    pub fn traversal_edge_count(&self) -> usize {
        self.names.len() * self.alphabet.len() - self.hidden.len()
    }

    /// States reachable from the initial state over all transitions.
    pub fn reachable(&self) -> BTreeSet<StateId> {
        self.reachable_by(|_, _| true)
    }

    /// States reachable over traversal (unpruned) edges only.
    pub fn reachable_traversal(&self) -> BTreeSet<StateId> {
        self.reachable_by(|s, i| !self.hidden.contains(&(s, i)))
    }

    fn reachable_by(&self, keep: impl Fn(StateId, usize) -> bool) -> BTreeSet<StateId> {
        let mut seen = BTreeSet::new();
        let mut stack = vec![self.initial];
        seen.insert(self.initial);
        while let Some(s) = stack.pop() {
            for (i, t) in self.table[s].iter().enumerate() {
                if keep(s, i) && seen.insert(t.next) {
                    stack.push(t.next);
                }
            }
        }
        seen
    }

    pub fn export_dot(&self) -> String {
        dot::render(self)
    }
}

/// Flattens a per-letter trace into one output word.
pub fn concat(trace: &[OutputWord]) -> OutputWord {
    OutputWord(trace.iter().flat_map(|w| w.0.iter().cloned()).collect())
}
