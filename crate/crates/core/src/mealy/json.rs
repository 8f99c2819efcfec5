use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::alphabet::{InputSymbol, OutputWord};

use super::{MealyError, MealyMachine, Transition};

pub const MACHINE_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub from: String,
    pub input: InputSymbol,
    pub to: String,
    pub output: OutputWord,
}

/// On-disk form of a machine: state names, the initial state, the alphabet
/// and one record per `(state, input)` pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MachineDocument {
    pub schema_version: u32,
    pub states: Vec<String>,
    pub initial: String,
    pub alphabet: Vec<InputSymbol>,
    pub transitions: Vec<TransitionRecord>,
}

impl From<&MealyMachine> for MachineDocument {
    fn from(m: &MealyMachine) -> Self {
        let mut transitions = Vec::with_capacity(m.num_states() * m.alphabet().len());
        for s in 0..m.num_states() {
            for (i, input) in m.alphabet().iter().enumerate() {
                let t = m.transition(s, i);
                transitions.push(TransitionRecord {
                    from: m.state_name(s).to_string(),
                    input: input.clone(),
                    to: m.state_name(t.next).to_string(),
                    output: t.output.clone(),
                });
            }
        }
        MachineDocument {
            schema_version: MACHINE_SCHEMA_VERSION,
            states: m.state_names().to_vec(),
            initial: m.state_name(m.initial()).to_string(),
            alphabet: m.alphabet().to_vec(),
            transitions,
        }
    }
}

impl TryFrom<MachineDocument> for MealyMachine {
    type Error = MealyError;

    fn try_from(doc: MachineDocument) -> Result<Self, MealyError> {
        if doc.schema_version != MACHINE_SCHEMA_VERSION {
            return Err(MealyError::Document(format!("unsupported schema_version {}", doc.schema_version)));
        }
        let mut ids = HashMap::new();
        for (i, name) in doc.states.iter().enumerate() {
            if ids.insert(name.as_str(), i).is_some() {
                return Err(MealyError::Document(format!("duplicate state {name}")));
            }
        }
        let lookup =
            |name: &str| ids.get(name).copied().ok_or_else(|| MealyError::Document(format!("unknown state {name}")));
        let mut inputs = HashMap::new();
        for (i, sym) in doc.alphabet.iter().enumerate() {
            if inputs.insert(sym, i).is_some() {
                return Err(MealyError::DuplicateInput(sym.to_string()));
            }
        }
        let mut table: Vec<Vec<Option<Transition>>> = vec![vec![None; doc.alphabet.len()]; doc.states.len()];
        for rec in &doc.transitions {
            let from = lookup(&rec.from)?;
            let to = lookup(&rec.to)?;
            let i = *inputs.get(&rec.input).ok_or_else(|| MealyError::UnknownInput(rec.input.to_string()))?;
            if table[from][i].is_some() {
                return Err(MealyError::Document(format!("two transitions for {} on {}", rec.from, rec.input)));
            }
            table[from][i] = Some(Transition { next: to, output: rec.output.clone() });
        }
        let mut full = Vec::with_capacity(table.len());
        for (s, row) in table.into_iter().enumerate() {
            let mut out = Vec::with_capacity(row.len());
            for (i, t) in row.into_iter().enumerate() {
                out.push(
                    t.ok_or_else(|| MealyError::MissingTransition { state: s, input: doc.alphabet[i].to_string() })?,
                );
            }
            full.push(out);
        }
        let initial = lookup(&doc.initial)?;
        MealyMachine::new(doc.states, initial, doc.alphabet, full)
    }
}

impl MealyMachine {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&MachineDocument::from(self)).expect("machine serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, MealyError> {
        let doc: MachineDocument = serde_json::from_str(text).map_err(|e| MealyError::Document(e.to_string()))?;
        MealyMachine::try_from(doc)
    }
}
