use std::fmt;

use serde::{Deserialize, Serialize};

use super::{AlphabetConfig, OutputSymbol};

/// Output of a single transition: every non-keep-alive message the cluster
/// sent within one collection window, in timestamp order.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OutputWord(pub Vec<OutputSymbol>);

impl OutputWord {
    pub fn no_response() -> Self {
        OutputWord(vec![OutputSymbol::NoResponse])
    }

    pub fn symbols(&self) -> &[OutputSymbol] {
        &self.0
    }

    pub fn is_no_response(&self) -> bool {
        self.0 == [OutputSymbol::NoResponse]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<OutputSymbol>> for OutputWord {
    fn from(v: Vec<OutputSymbol>) -> Self {
        OutputWord(v)
    }
}

impl fmt::Display for OutputWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}

/// Orders the events of one window by timestamp (ties by symbol order),
/// drops keep-alives when the config treats them as "Others", and maps an
/// empty window to `[NoResponse]`.
pub fn canonical_output(events: &[(u64, OutputSymbol)], cfg: &AlphabetConfig) -> OutputWord {
    let mut kept: Vec<&(u64, OutputSymbol)> = events
        .iter()
        .filter(|(_, sym)| match sym {
            OutputSymbol::Msg(s) => !(cfg.include_keepalive_as_others && s.is_keepalive(&cfg.self_id)),
            OutputSymbol::NoResponse => false,
        })
        .collect();
    kept.sort();
    if kept.is_empty() {
        return OutputWord::no_response();
    }
    OutputWord(kept.into_iter().map(|(_, s)| s.clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alphabet::{Liveness, NodeRef, Symbol};
    use proptest::prelude::*;

    fn cfg() -> AlphabetConfig {
        AlphabetConfig::new(vec!["A".into(), "B".into(), "C".into()], "X", "SD-WAN")
    }

    #[test]
    fn empty_window_is_no_response() {
        assert_eq!(canonical_output(&[], &cfg()), OutputWord::no_response());
    }

    #[test]
    fn sorted_by_timestamp() {
        let cfg = cfg();
        let pres = OutputSymbol::Msg(Symbol::PRes { n: cfg.known_ref(), s: Liveness::Alive });
        let rj = OutputSymbol::Msg(Symbol::RJRes);
        let w = canonical_output(&[(5, rj.clone()), (3, pres.clone())], &cfg);
        assert_eq!(w, OutputWord(vec![pres, rj]));
    }

    #[test]
    fn keepalives_filtered() {
        let cfg = cfg();
        let ka = OutputSymbol::Msg(Symbol::PReq { n: cfg.self_ref() });
        let hb = OutputSymbol::Msg(Symbol::RAReq);
        assert!(canonical_output(&[(1, ka.clone()), (2, hb.clone())], &cfg).is_no_response());
        let mut keep = cfg.clone();
        keep.include_keepalive_as_others = false;
        assert_eq!(canonical_output(&[(1, ka.clone()), (2, hb.clone())], &keep), OutputWord(vec![ka, hb]));
    }

    proptest! {
        #[test]
        fn permutation_invariant(perm in Just((0..6usize).collect::<Vec<_>>()).prop_shuffle()) {
            let cfg = cfg();
            let a = cfg.known_ref();
            let events: Vec<(u64, OutputSymbol)> = vec![
                (2, Symbol::RJRes.into()),
                (2, Symbol::RConReq.into()),
                (1, Symbol::PRes { n: a.clone(), s: Liveness::Alive }.into()),
                (4, Symbol::BReq { nodes: cfg.member_set() }.into()),
                (4, Symbol::PReq { n: NodeRef::resolve("B", &cfg) }.into()),
                (0, Symbol::RComRes.into()),
            ];
            let shuffled: Vec<_> = perm.iter().map(|&i| events[i].clone()).collect();
            prop_assert_eq!(canonical_output(&shuffled, &cfg), canonical_output(&events, &cfg));
        }
    }
}
