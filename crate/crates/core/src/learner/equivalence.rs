use std::collections::{BTreeSet, HashMap, VecDeque};

use crate::mealy::{MealyMachine, StateId};

use super::{LearnError, MembershipOracle, SulOracle};

/// Shortest access word of every reachable state, breadth first in
/// alphabet order.
pub fn access_words(h: &MealyMachine) -> Vec<(StateId, Vec<usize>)> {
    let mut seen: HashMap<StateId, Vec<usize>> = HashMap::new();
    let mut order = vec![(h.initial(), Vec::new())];
    seen.insert(h.initial(), Vec::new());
    let mut queue = VecDeque::from([h.initial()]);
    while let Some(s) = queue.pop_front() {
        for a in 0..h.alphabet().len() {
            let next = h.transition(s, a).next;
            if !seen.contains_key(&next) {
                let mut w = seen[&s].clone();
                w.push(a);
                seen.insert(next, w.clone());
                order.push((next, w));
                queue.push_back(next);
            }
        }
    }
    order
}

/// Shortest input word on which `p` and `q` produce different outputs.
pub fn distinguishing_word(h: &MealyMachine, p: StateId, q: StateId) -> Option<Vec<usize>> {
    let mut prev: HashMap<(StateId, StateId), ((StateId, StateId), usize)> = HashMap::new();
    let mut queue = VecDeque::from([(p, q)]);
    let start = (p, q);
    let path = |prev: &HashMap<_, ((StateId, StateId), usize)>, mut at: (StateId, StateId), last: usize| {
        let mut w = vec![last];
        while at != start {
            let (from, a) = prev[&at];
            w.push(a);
            at = from;
        }
        w.reverse();
        w
    };
    let mut visited = BTreeSet::from([start]);
    while let Some((x, y)) = queue.pop_front() {
        for a in 0..h.alphabet().len() {
            let (tx, ty) = (h.transition(x, a), h.transition(y, a));
            if tx.output != ty.output {
                return Some(path(&prev, (x, y), a));
            }
            let pair = (tx.next, ty.next);
            if visited.insert(pair) {
                prev.insert(pair, ((x, y), a));
                queue.push_back(pair);
            }
        }
    }
    None
}

/// Characterization set: one shortest separating word per pair of
/// reachable states; `{ε}` for a single-state machine.
pub fn characterization_set(h: &MealyMachine) -> Vec<Vec<usize>> {
    let states: Vec<StateId> = access_words(h).into_iter().map(|(s, _)| s).collect();
    let mut w = BTreeSet::new();
    for (i, &p) in states.iter().enumerate() {
        for &q in &states[i + 1..] {
            if let Some(d) = distinguishing_word(h, p, q) {
                w.insert(d);
            }
        }
    }
    if w.is_empty() {
        w.insert(Vec::new());
    }
    w.into_iter().collect()
}

fn middles(letters: usize, depth: usize) -> Vec<Vec<usize>> {
    let mut all = vec![Vec::new()];
    let mut layer = vec![Vec::new()];
    for _ in 0..depth {
        layer = layer
            .iter()
            .flat_map(|w: &Vec<usize>| {
                (0..letters).map(move |a| {
                    let mut x = w.clone();
                    x.push(a);
                    x
                })
            })
            .collect();
        all.extend(layer.iter().cloned());
    }
    all
}

/// W-method test suite `P · A^{≤m} · W`, with words that are prefixes of
/// other suite words dropped. Sorted, so the result is deterministic.
pub fn test_suite(h: &MealyMachine, depth: usize) -> Vec<Vec<usize>> {
    let letters = h.alphabet().len();
    let mut cover: Vec<Vec<usize>> = Vec::new();
    for (_, w) in access_words(h) {
        for a in 0..letters {
            let mut x = w.clone();
            x.push(a);
            cover.push(x);
        }
        cover.push(w);
    }
    let mids = middles(letters, depth);
    let chars = characterization_set(h);
    let mut suite = Vec::with_capacity(cover.len() * mids.len() * chars.len());
    for p in &cover {
        for m in &mids {
            for w in &chars {
                let mut x = Vec::with_capacity(p.len() + m.len() + w.len());
                x.extend_from_slice(p);
                x.extend_from_slice(m);
                x.extend_from_slice(w);
                suite.push(x);
            }
        }
    }
    suite.sort();
    suite.dedup();
    let mut maximal: Vec<Vec<usize>> = Vec::with_capacity(suite.len());
    for (i, w) in suite.iter().enumerate() {
        let covered = suite.get(i + 1).is_some_and(|next| next.starts_with(w));
        if !covered && !w.is_empty() {
            maximal.push(w.clone());
        }
    }
    maximal
}

/// Runs the W-method suite for `h`; returns the shortest failing prefix of
/// the first failing test word.
pub fn find_counterexample<O: SulOracle>(
    mq: &mut MembershipOracle<O>,
    h: &MealyMachine,
    depth: usize,
) -> Result<Option<Vec<usize>>, LearnError> {
    if h.alphabet() != mq.alphabet() {
        return Err(LearnError::Internal("hypothesis alphabet differs from the oracle alphabet".into()));
    }
    for word in test_suite(h, depth) {
        let actual = mq.query_letters(&word)?;
        let mut s = h.initial();
        for (i, &a) in word.iter().enumerate() {
            let t = h.transition(s, a);
            if t.output != actual[i] {
                return Ok(Some(word[..=i].to_vec()));
            }
            s = t.next;
        }
    }
    Ok(None)
}
