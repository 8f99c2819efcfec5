use std::collections::HashMap;

use crate::alphabet::{InputSymbol, OutputWord};
use crate::mealy::{MealyMachine, Transition};

use super::{LearnError, MembershipOracle, SulOracle};

pub type Row = Vec<Vec<OutputWord>>;

/// L* observation table over letter indices.
///
/// `E` always starts with the single letters in alphabet order, so column
/// `a` of a row holds the output of letter `a` from that row's state.
#[derive(Debug, Clone)]
pub struct ObservationTable {
    letters: usize,
    prefixes: Vec<Vec<usize>>,
    suffixes: Vec<Vec<usize>>,
    rows: HashMap<Vec<usize>, Row>,
}

impl ObservationTable {
    pub fn new(letters: usize) -> Self {
        ObservationTable {
            letters,
            prefixes: vec![Vec::new()],
            suffixes: (0..letters).map(|a| vec![a]).collect(),
            rows: HashMap::new(),
        }
    }

    pub fn prefixes(&self) -> &[Vec<usize>] {
        &self.prefixes
    }

    pub fn suffixes(&self) -> &[Vec<usize>] {
        &self.suffixes
    }

    pub fn row(&self, u: &[usize]) -> Option<&Row> {
        self.rows.get(u)
    }

    fn extensions(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        self.prefixes.iter().flat_map(move |s| {
            (0..self.letters).map(move |a| {
                let mut w = s.clone();
                w.push(a);
                w
            })
        })
    }

    /// Queries every missing cell of `S ∪ S·A`.
    pub fn fill<O: SulOracle>(&mut self, mq: &mut MembershipOracle<O>) -> Result<(), LearnError> {
        let words: Vec<Vec<usize>> = self.prefixes.iter().cloned().chain(self.extensions()).collect();
        for u in words {
            let have = self.rows.get(&u).map_or(0, Vec::len);
            if have == self.suffixes.len() {
                continue;
            }
            let mut cells = Vec::with_capacity(self.suffixes.len() - have);
            for e in &self.suffixes[have..] {
                let mut w = u.clone();
                w.extend_from_slice(e);
                let out = mq.query_letters(&w)?;
                cells.push(out[u.len()..].to_vec());
            }
            self.rows.entry(u).or_default().extend(cells);
        }
        Ok(())
    }

    fn full_row(&self, u: &[usize]) -> &Row {
        self.rows.get(u).expect("table filled before inspection")
    }

    /// First `s·a` whose row matches no row of `S`.
    pub fn find_unclosed(&self) -> Option<Vec<usize>> {
        let known: Vec<&Row> = self.prefixes.iter().map(|s| self.full_row(s)).collect();
        self.extensions().find(|u| !known.contains(&self.full_row(u)))
    }

    /// A suffix `a·e` separating two equal rows of `S`, if any.
    pub fn find_inconsistency(&self) -> Option<Vec<usize>> {
        for (i, s1) in self.prefixes.iter().enumerate() {
            for s2 in &self.prefixes[i + 1..] {
                if self.full_row(s1) != self.full_row(s2) {
                    continue;
                }
                for a in 0..self.letters {
                    let r1 = self.full_row(&[s1.as_slice(), &[a]].concat());
                    let r2 = self.full_row(&[s2.as_slice(), &[a]].concat());
                    if let Some(col) = (0..self.suffixes.len()).find(|&c| r1[c] != r2[c]) {
                        let mut e = vec![a];
                        e.extend_from_slice(&self.suffixes[col]);
                        return Some(e);
                    }
                }
            }
        }
        None
    }

    pub fn is_closed(&self) -> bool {
        self.find_unclosed().is_none()
    }

    pub fn is_consistent(&self) -> bool {
        self.find_inconsistency().is_none()
    }

    pub fn is_prefix_closed(&self) -> bool {
        self.prefixes.iter().all(|s| (0..s.len()).all(|n| self.prefixes.iter().any(|p| p.as_slice() == &s[..n])))
    }

    /// Fills, then grows `S` and `E` until the table is closed and consistent.
    pub fn stabilize<O: SulOracle>(&mut self, mq: &mut MembershipOracle<O>) -> Result<(), LearnError> {
        loop {
            self.fill(mq)?;
            if let Some(u) = self.find_unclosed() {
                self.prefixes.push(u);
                continue;
            }
            if let Some(e) = self.find_inconsistency() {
                self.suffixes.push(e);
                continue;
            }
            return Ok(());
        }
    }

    /// Adds every suffix of `cex` to `E` and restabilizes.
    pub fn process_counterexample<O: SulOracle>(
        &mut self,
        cex: &[usize],
        mq: &mut MembershipOracle<O>,
    ) -> Result<(), LearnError> {
        for start in 0..cex.len() {
            let e = &cex[start..];
            if !self.suffixes.iter().any(|x| x.as_slice() == e) {
                self.suffixes.push(e.to_vec());
            }
        }
        self.stabilize(mq)
    }

    /// Number of distinct rows in `S`.
    pub fn state_count(&self) -> usize {
        let mut rows: Vec<&Row> = self.prefixes.iter().map(|s| self.full_row(s)).collect();
        rows.sort();
        rows.dedup();
        rows.len()
    }

    /// Hypothesis of a closed table; states are the distinct rows of `S`.
    pub fn hypothesis(&self, alphabet: &[InputSymbol]) -> Result<MealyMachine, LearnError> {
        let mut state_of: HashMap<&Row, usize> = HashMap::new();
        let mut reps: Vec<&[usize]> = Vec::new();
        for s in &self.prefixes {
            let row = self.full_row(s);
            if !state_of.contains_key(row) {
                state_of.insert(row, reps.len());
                reps.push(s);
            }
        }
        let mut table = Vec::with_capacity(reps.len());
        for s in &reps {
            let row = self.full_row(s);
            let mut line = Vec::with_capacity(self.letters);
            for a in 0..self.letters {
                let ext = [*s, &[a]].concat();
                let next = *state_of
                    .get(self.full_row(&ext))
                    .ok_or_else(|| LearnError::Internal("hypothesis built from an unclosed table".into()))?;
                line.push(Transition { next, output: row[a][0].clone() });
            }
            table.push(line);
        }
        let names = (0..reps.len()).map(|i| format!("s{i}")).collect();
        MealyMachine::new(names, 0, alphabet.to_vec(), table).map_err(|e| LearnError::Internal(e.to_string()))
    }
}
