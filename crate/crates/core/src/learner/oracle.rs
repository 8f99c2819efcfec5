use thiserror::Error;

use crate::alphabet::{InputSymbol, OutputWord};
use crate::mealy::MealyMachine;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("SUL failure: {0}")]
pub struct SulError(pub String);

/// System under learning.
pub trait SulOracle {
    fn reset(&mut self) -> Result<(), SulError>;

    /// Feeds one input and returns the output of that transition.
    fn step(&mut self, input: &InputSymbol) -> Result<OutputWord, SulError>;

    /// Per-letter outputs of `word` from a fresh reset.
    fn query(&mut self, word: &[InputSymbol]) -> Result<Vec<OutputWord>, SulError> {
        self.reset()?;
        word.iter().map(|i| self.step(i)).collect()
    }
}

impl<T: SulOracle + ?Sized> SulOracle for &mut T {
    fn reset(&mut self) -> Result<(), SulError> {
        (**self).reset()
    }

    fn step(&mut self, input: &InputSymbol) -> Result<OutputWord, SulError> {
        (**self).step(input)
    }
}

impl<T: SulOracle + ?Sized> SulOracle for Box<T> {
    fn reset(&mut self) -> Result<(), SulError> {
        (**self).reset()
    }

    fn step(&mut self, input: &InputSymbol) -> Result<OutputWord, SulError> {
        (**self).step(input)
    }
}

/// A known machine exposed as a SUL.
#[derive(Debug, Clone)]
pub struct MachineOracle {
    machine: MealyMachine,
    state: usize,
}

impl MachineOracle {
    pub fn new(machine: MealyMachine) -> Self {
        let state = machine.initial();
        MachineOracle { machine, state }
    }

    pub fn machine(&self) -> &MealyMachine {
        &self.machine
    }
}

impl SulOracle for MachineOracle {
    fn reset(&mut self) -> Result<(), SulError> {
        self.state = self.machine.initial();
        Ok(())
    }

    fn step(&mut self, input: &InputSymbol) -> Result<OutputWord, SulError> {
        let (next, out) = self.machine.step(self.state, input).map_err(|e| SulError(e.to_string()))?;
        self.state = next;
        Ok(out.clone())
    }
}
