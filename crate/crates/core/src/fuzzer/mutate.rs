use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::alphabet::{argument_alternatives, InputSymbol};

use super::{FuzzError, MessageSequence};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Duplicate,
    Remove,
    Replace,
    ArgSwap,
}

impl ActionKind {
    pub const ALL: [ActionKind; 4] =
        [ActionKind::Duplicate, ActionKind::Remove, ActionKind::Replace, ActionKind::ArgSwap];
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MutationDetail {
    /// Total copies of the letter after duplication.
    Copies {
        copies: usize,
    },
    Removed {
        removed: InputSymbol,
    },
    Replaced {
        from: InputSymbol,
        source: usize,
        to: InputSymbol,
    },
    Swapped {
        from: InputSymbol,
        to: InputSymbol,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MutationRecord {
    /// Zero-based index into the sequence the mutation was applied to.
    pub position: usize,
    pub action: ActionKind,
    pub detail: MutationDetail,
}

pub const MIN_COPIES: usize = 2;
pub const MAX_COPIES: usize = 5;

/// Applies one random action at a uniformly chosen position.
///
/// The action is uniform over the four kinds; a kind that cannot apply at
/// the chosen letter (no other letter to copy in, no argument to swap) is
/// redrawn among the applicable ones.
pub fn mutate(
    seq: &MessageSequence,
    alphabet: &[InputSymbol],
    rng: &mut impl Rng,
) -> Result<(MessageSequence, MutationRecord), FuzzError> {
    if seq.is_empty() {
        return Err(FuzzError::EmptySequence);
    }
    let position = rng.gen_range(0..seq.len());
    let here = &seq.symbols[position];
    let others: Vec<usize> = (0..seq.len()).filter(|&j| seq.symbols[j] != *here).collect();
    let swaps = argument_alternatives(here, alphabet);
    let applicable = |k: ActionKind| match k {
        ActionKind::Duplicate | ActionKind::Remove => true,
        ActionKind::Replace => !others.is_empty(),
        ActionKind::ArgSwap => !swaps.is_empty(),
    };
    let mut action = *ActionKind::ALL.choose(rng).expect("non-empty");
    if !applicable(action) {
        let pool: Vec<ActionKind> = ActionKind::ALL.into_iter().filter(|k| applicable(*k)).collect();
        action = *pool.choose(rng).expect("duplicate always applies");
    }
    let detail = match action {
        ActionKind::Duplicate => MutationDetail::Copies { copies: rng.gen_range(MIN_COPIES..=MAX_COPIES) },
        ActionKind::Remove => MutationDetail::Removed { removed: here.clone() },
        ActionKind::Replace => {
            let source = *others.choose(rng).expect("checked non-empty");
            MutationDetail::Replaced { from: here.clone(), source, to: seq.symbols[source].clone() }
        }
        ActionKind::ArgSwap => {
            MutationDetail::Swapped { from: here.clone(), to: (*swaps.choose(rng).expect("checked non-empty")).clone() }
        }
    };
    let record = MutationRecord { position, action, detail };
    let out = apply_mutation(seq, &record, alphabet, 0)?;
    Ok((out, record))
}

/// Applies a recorded mutation; `index` only labels errors.
pub fn apply_mutation(
    seq: &MessageSequence,
    r: &MutationRecord,
    alphabet: &[InputSymbol],
    index: usize,
) -> Result<MessageSequence, FuzzError> {
    let bad = |reason: String| FuzzError::Replay { index, reason };
    let Some(here) = seq.symbols.get(r.position) else {
        return Err(bad(format!("position {} outside a sequence of {}", r.position, seq.len())));
    };
    let mut s = seq.symbols.clone();
    match (r.action, &r.detail) {
        (ActionKind::Duplicate, MutationDetail::Copies { copies }) => {
            if !(MIN_COPIES..=MAX_COPIES).contains(copies) {
                return Err(bad(format!("{copies} copies outside {MIN_COPIES}..={MAX_COPIES}")));
            }
            let extra = std::iter::repeat_n(here.clone(), copies - 1);
            s.splice(r.position..r.position, extra);
        }
        (ActionKind::Remove, MutationDetail::Removed { removed }) => {
            if removed != here {
                return Err(bad(format!("expected {removed} at {}, found {here}", r.position)));
            }
            s.remove(r.position);
        }
        (ActionKind::Replace, MutationDetail::Replaced { from, source, to }) => {
            if from != here || seq.symbols.get(*source) != Some(to) || from == to {
                return Err(bad(format!("replacement {from} -> {to} from {source} does not match")));
            }
            s[r.position] = to.clone();
        }
        (ActionKind::ArgSwap, MutationDetail::Swapped { from, to }) => {
            if from != here || !argument_alternatives(from, alphabet).contains(&to) {
                return Err(bad(format!("{to} is not an argument alternative of {from}")));
            }
            s[r.position] = to.clone();
        }
        (action, detail) => return Err(bad(format!("{action:?} cannot carry {detail:?}"))),
    }
    Ok(MessageSequence::new(s))
}

/// Reconstructs a mutant from its seed and mutation records.
pub fn rebuild(
    seed: &MessageSequence,
    records: &[MutationRecord],
    alphabet: &[InputSymbol],
) -> Result<MessageSequence, FuzzError> {
    let mut s = seed.clone();
    for (i, r) in records.iter().enumerate() {
        s = apply_mutation(&s, r, alphabet, i)?;
    }
    Ok(s)
}
