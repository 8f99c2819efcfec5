use std::collections::{BTreeMap, HashMap, VecDeque};

use crate::alphabet::{InputSymbol, OutputWord};

use super::{MealyMachine, StateId, Transition};

/// Relabeling-independent description of the reachable part of a machine:
/// states numbered in breadth-first order from v0, inputs in sorted order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Signature {
    pub alphabet: Vec<InputSymbol>,
    pub rows: Vec<Vec<(usize, OutputWord)>>,
}

impl MealyMachine {
    pub fn signature(&self) -> Signature {
        let mut order: Vec<usize> = (0..self.alphabet.len()).collect();
        order.sort_by(|&a, &b| self.alphabet[a].cmp(&self.alphabet[b]));
        let mut number: HashMap<StateId, usize> = HashMap::new();
        let mut queue = VecDeque::from([self.initial]);
        number.insert(self.initial, 0);
        let mut visit = Vec::new();
        while let Some(s) = queue.pop_front() {
            visit.push(s);
            for &i in &order {
                let next = self.table[s][i].next;
                if !number.contains_key(&next) {
                    number.insert(next, number.len());
                    queue.push_back(next);
                }
            }
        }
        let rows = visit
            .iter()
            .map(|&s| {
                order
                    .iter()
                    .map(|&i| {
                        let t = &self.table[s][i];
                        (number[&t.next], t.output.clone())
                    })
                    .collect()
            })
            .collect();
        Signature { alphabet: order.iter().map(|&i| self.alphabet[i].clone()).collect(), rows }
    }
}

/// True iff a bijection between the reachable states of `a` and `b` maps
/// v0 to v0 and preserves every transition and output.
pub fn isomorphic(a: &MealyMachine, b: &MealyMachine) -> bool {
    a.signature() == b.signature()
}

/// Minimal machine with the same behaviour, restricted to reachable states.
/// States are renamed `V0..` in breadth-first order over the alphabet.
pub fn minimize(m: &MealyMachine) -> MealyMachine {
    let reachable: Vec<StateId> = m.reachable().into_iter().collect();
    let k = m.alphabet.len();

    let mut block: HashMap<StateId, usize> = HashMap::new();
    let mut by_out: BTreeMap<Vec<&OutputWord>, usize> = BTreeMap::new();
    for &s in &reachable {
        let key: Vec<&OutputWord> = m.table[s].iter().map(|t| &t.output).collect();
        let n = by_out.len();
        block.insert(s, *by_out.entry(key).or_insert(n));
    }
    loop {
        let mut by_sig: BTreeMap<(usize, Vec<usize>), usize> = BTreeMap::new();
        let mut next_block = HashMap::new();
        for &s in &reachable {
            let succ: Vec<usize> = m.table[s].iter().map(|t| block[&t.next]).collect();
            let n = by_sig.len();
            next_block.insert(s, *by_sig.entry((block[&s], succ)).or_insert(n));
        }
        let stable = by_sig.len() == count_blocks(&block);
        block = next_block;
        if stable {
            break;
        }
    }

    // breadth-first renumbering of blocks
    let mut number: HashMap<usize, usize> = HashMap::new();
    let mut rep: Vec<StateId> = Vec::new();
    let mut queue = VecDeque::from([m.initial]);
    number.insert(block[&m.initial], 0);
    rep.push(m.initial);
    while let Some(s) = queue.pop_front() {
        for i in 0..k {
            let next = m.table[s][i].next;
            let b = block[&next];
            if let std::collections::hash_map::Entry::Vacant(e) = number.entry(b) {
                e.insert(rep.len());
                rep.push(next);
                queue.push_back(next);
            }
        }
    }
    let table = rep
        .iter()
        .map(|&s| {
            m.table[s].iter().map(|t| Transition { next: number[&block[&t.next]], output: t.output.clone() }).collect()
        })
        .collect();
    let names = (0..rep.len()).map(|i| format!("V{i}")).collect();
    MealyMachine::new(names, 0, m.alphabet.clone(), table).expect("minimized table is total")
}

fn count_blocks(block: &HashMap<StateId, usize>) -> usize {
    let mut ids: Vec<usize> = block.values().copied().collect();
    ids.sort_unstable();
    ids.dedup();
    ids.len()
}
