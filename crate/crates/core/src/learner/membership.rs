use std::collections::HashMap;
use std::io::Write;

use serde::Serialize;

use crate::alphabet::{InputSymbol, OutputWord};

use super::{LearnError, SulOracle};

/// Majority output of `k` reset-isolated executions of `word`.
///
/// Trials stop as soon as one answer holds a strict majority of `k`.
pub fn membership_query<O: SulOracle + ?Sized>(
    o: &mut O,
    word: &[InputSymbol],
    k: usize,
) -> Result<Vec<OutputWord>, LearnError> {
    majority(o, word, k).map(|(w, _)| w)
}

fn majority<O: SulOracle + ?Sized>(
    o: &mut O,
    word: &[InputSymbol],
    k: usize,
) -> Result<(Vec<OutputWord>, usize), LearnError> {
    if word.is_empty() {
        return Ok((Vec::new(), 0));
    }
    let need = k / 2 + 1;
    let mut seen: Vec<(Vec<OutputWord>, usize)> = Vec::new();
    for trial in 1..=k {
        let out = o.query(word)?;
        let slot = match seen.iter().position(|(w, _)| *w == out) {
            Some(i) => i,
            None => {
                seen.push((out, 0));
                seen.len() - 1
            }
        };
        seen[slot].1 += 1;
        if seen[slot].1 >= need {
            return Ok((seen.swap_remove(slot).0, trial));
        }
    }
    Err(LearnError::Nondeterminism { word: word.to_vec(), observed: seen.into_iter().map(|(w, _)| w).collect() })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct QueryStats {
    /// Words answered by the SUL.
    pub queries: u64,
    /// Individual executions, counting repetitions.
    pub executions: u64,
    pub cache_hits: u64,
    pub symbols_sent: u64,
}

#[derive(Serialize)]
struct TranscriptLine<'a> {
    seq: u64,
    word: Vec<String>,
    output: Vec<String>,
    trials: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    phase: Option<&'a str>,
}

/// Membership oracle with a prefix-tree answer cache and a query budget.
pub struct MembershipOracle<O> {
    sul: O,
    alphabet: Vec<InputSymbol>,
    index: HashMap<InputSymbol, usize>,
    retries: usize,
    budget: u64,
    children: HashMap<(usize, usize), usize>,
    outputs: Vec<Option<OutputWord>>,
    stats: QueryStats,
    transcript: Option<Box<dyn Write + Send>>,
    phase: Option<&'static str>,
}

impl<O: SulOracle> MembershipOracle<O> {
    pub fn new(sul: O, alphabet: &[InputSymbol], retries: usize, budget: u64) -> Self {
        MembershipOracle {
            sul,
            index: alphabet.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect(),
            alphabet: alphabet.to_vec(),
            retries,
            budget,
            children: HashMap::new(),
            outputs: vec![None],
            stats: QueryStats::default(),
            transcript: None,
            phase: None,
        }
    }

    /// Streams every SUL-answered query as one JSON line to `sink`.
    pub fn set_transcript(&mut self, sink: Box<dyn Write + Send>) {
        self.transcript = Some(sink);
    }

    pub(crate) fn set_phase(&mut self, phase: &'static str) {
        self.phase = Some(phase);
    }

    pub fn alphabet(&self) -> &[InputSymbol] {
        &self.alphabet
    }

    pub fn stats(&self) -> QueryStats {
        self.stats
    }

    pub fn sul_mut(&mut self) -> &mut O {
        &mut self.sul
    }

    pub fn into_inner(self) -> O {
        self.sul
    }

    pub fn letter(&self, sym: &InputSymbol) -> Result<usize, LearnError> {
        self.index.get(sym).copied().ok_or_else(|| LearnError::ForeignSymbol(sym.to_string()))
    }

    pub fn query(&mut self, word: &[InputSymbol]) -> Result<Vec<OutputWord>, LearnError> {
        let idx = word.iter().map(|s| self.letter(s)).collect::<Result<Vec<_>, _>>()?;
        self.query_letters(&idx)
    }

    fn lookup(&self, word: &[usize]) -> Option<Vec<OutputWord>> {
        let mut node = 0;
        let mut out = Vec::with_capacity(word.len());
        for &a in word {
            node = *self.children.get(&(node, a))?;
            out.push(self.outputs[node].clone()?);
        }
        Some(out)
    }

    fn store(&mut self, word: &[usize], out: &[OutputWord]) {
        let mut node = 0;
        for (&a, o) in word.iter().zip(out) {
            node = match self.children.get(&(node, a)) {
                Some(&n) => n,
                None => {
                    self.outputs.push(None);
                    let n = self.outputs.len() - 1;
                    self.children.insert((node, a), n);
                    n
                }
            };
            self.outputs[node] = Some(o.clone());
        }
    }

    /// Answers a word given as letter indices.
    pub fn query_letters(&mut self, word: &[usize]) -> Result<Vec<OutputWord>, LearnError> {
        if let Some(hit) = self.lookup(word) {
            self.stats.cache_hits += 1;
            return Ok(hit);
        }
        if self.stats.queries >= self.budget {
            return Err(LearnError::BudgetExhausted { queries: self.stats.queries, hypothesis: None });
        }
        let symbols: Vec<InputSymbol> = word.iter().map(|&a| self.alphabet[a].clone()).collect();
        let (out, trials) = majority(&mut self.sul, &symbols, self.retries)?;
        self.stats.queries += 1;
        self.stats.executions += trials as u64;
        self.stats.symbols_sent += (trials * word.len()) as u64;
        self.store(word, &out);
        self.log(&symbols, &out, trials);
        Ok(out)
    }

    fn log(&mut self, word: &[InputSymbol], out: &[OutputWord], trials: usize) {
        let Some(sink) = self.transcript.as_mut() else { return };
        let line = TranscriptLine {
            seq: self.stats.queries,
            word: word.iter().map(ToString::to_string).collect(),
            output: out.iter().map(ToString::to_string).collect(),
            trials,
            phase: self.phase,
        };
        let text = serde_json::to_string(&line).expect("transcript line serializes");
        if let Err(e) = writeln!(sink, "{text}") {
            log::warn!("transcript write failed: {e}");
            self.transcript = None;
        }
    }

    /// Every cached observation as (word, outputs), one per cache leaf.
    pub fn observations(&self) -> Vec<(Vec<InputSymbol>, Vec<OutputWord>)> {
        let mut kids: HashMap<usize, Vec<(usize, usize)>> = HashMap::new();
        for (&(parent, a), &child) in &self.children {
            kids.entry(parent).or_default().push((a, child));
        }
        let mut out = Vec::new();
        let mut stack = vec![(0usize, Vec::new(), Vec::new())];
        while let Some((node, word, outs)) = stack.pop() {
            match kids.get(&node) {
                None if node != 0 => out.push((word, outs)),
                None => {}
                Some(list) => {
                    for &(a, child) in list {
                        let mut w: Vec<InputSymbol> = word.clone();
                        w.push(self.alphabet[a].clone());
                        let mut o: Vec<OutputWord> = outs.clone();
                        o.push(self.outputs[child].clone().expect("stored nodes carry output"));
                        stack.push((child, w, o));
                    }
                }
            }
        }
        out.sort();
        out
    }
}
