//! Seed extraction from a learned machine, sequence mutation, campaigns and
//! deterministic replay.

mod campaign;
mod mutate;
mod sdfs;

pub use campaign::{
    execute, replay, run_campaign, run_sharded, seed_policy, CampaignConfig, CampaignReport, CaseRecord,
    CoverageReport, Execution, FuzzCase, ObservableSul, ReplayReport, REPORT_SCHEMA_VERSION,
};
pub use mutate::{apply_mutation, mutate, rebuild, ActionKind, MutationDetail, MutationRecord};
pub use sdfs::{sdfs_extract, sdfs_extract_counted, SdfsStats};

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::alphabet::InputSymbol;
use crate::detector::DetectError;
use crate::learner::SulError;
use crate::mealy::MealyMachine;

#[derive(Debug, Error)]
pub enum FuzzError {
    #[error("cannot mutate an empty sequence")]
    EmptySequence,
    #[error("budget must be at least 1")]
    ZeroBudget,
    #[error("machine has no seed sequences after pruning")]
    NoSeeds,
    #[error("invalid campaign config: {0}")]
    InvalidConfig(String),
    #[error("mutation record {index} does not fit the sequence: {reason}")]
    Replay { index: usize, reason: String },
    #[error(transparent)]
    Sul(#[from] SulError),
    #[error(transparent)]
    Detect(#[from] DetectError),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MessageSequence {
    pub symbols: Vec<InputSymbol>,
}

impl MessageSequence {
    pub fn new(symbols: Vec<InputSymbol>) -> Self {
        MessageSequence { symbols }
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// True when every letter is in the machine alphabet.
    pub fn fits(&self, m: &MealyMachine) -> bool {
        self.symbols.iter().all(|s| m.input_index(s).is_some())
    }
}

impl fmt::Display for MessageSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.symbols.iter().map(ToString::to_string).collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

impl From<Vec<InputSymbol>> for MessageSequence {
    fn from(v: Vec<InputSymbol>) -> Self {
        MessageSequence::new(v)
    }
}

/// Extraction result in discovery order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SequenceSet {
    pub sequences: Vec<MessageSequence>,
}

impl SequenceSet {
    /// Adds `seq` unless present; returns whether it was new.
    pub fn insert(&mut self, seq: MessageSequence) -> bool {
        if self.sequences.contains(&seq) {
            return false;
        }
        self.sequences.push(seq);
        true
    }

    pub fn contains(&self, seq: &MessageSequence) -> bool {
        self.sequences.contains(seq)
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MessageSequence> {
        self.sequences.iter()
    }
}

#[cfg(test)]
mod tests;
