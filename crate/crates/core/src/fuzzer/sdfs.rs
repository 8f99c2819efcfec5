use crate::alphabet::InputSymbol;
use crate::mealy::{MealyMachine, StateId};

use super::{MessageSequence, SequenceSet};

/// Work done by one extraction: one op per state initialised and one per
/// transition iterated, its constant-time body included.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SdfsStats {
    pub ops: u64,
    pub visited: usize,
}

/// Seed sequences of a pruned machine: one per state first reached along an
/// untraversed edge, being the DFS-tree path to that state.
pub fn sdfs_extract(m: &MealyMachine, v0: StateId) -> SequenceSet {
    sdfs_extract_counted(m, v0).0
}

pub fn sdfs_extract_counted(m: &MealyMachine, v0: StateId) -> (SequenceSet, SdfsStats) {
    let mut stats = SdfsStats::default();
    let mut visited = vec![false; m.num_states()];
    stats.ops += visited.len() as u64;
    visited[v0] = true;
    let mut out = SequenceSet::default();
    let mut pre: Vec<InputSymbol> = Vec::new();
    visit(m, v0, &mut visited, &mut pre, &mut out, &mut stats);
    stats.visited = visited.iter().filter(|v| **v).count();
    (out, stats)
}

fn visit(
    m: &MealyMachine,
    v: StateId,
    visited: &mut [bool],
    pre: &mut Vec<InputSymbol>,
    out: &mut SequenceSet,
    stats: &mut SdfsStats,
) {
    for (input, w) in m.traversal_edges(v) {
        stats.ops += 1;
        if visited[w] {
            continue;
        }
        visited[w] = true;
        pre.push(m.alphabet()[input].clone());
        out.sequences.push(MessageSequence::new(pre.clone()));
        visit(m, w, visited, pre, out, stats);
        pre.pop();
    }
}
