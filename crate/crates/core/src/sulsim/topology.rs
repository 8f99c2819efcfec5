use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::alphabet::NodeId;

/// Undirected switch link, stored with the smaller endpoint first.
pub type Link = (String, String);

pub const SWITCHES: [&str; 4] = ["a1", "a2", "b1", "b2"];
pub const PHYSICAL_LINKS: [(&str, &str); 3] = [("a1", "a2"), ("a1", "b1"), ("b1", "b2")];
/// Link reported by the fake topology event; absent from the data plane.
pub const FAKE_LINK: (&str, &str) = ("a2", "b2");

pub fn link(a: &str, b: &str) -> Link {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

pub fn physical_links() -> BTreeSet<Link> {
    PHYSICAL_LINKS.iter().map(|(a, b)| link(a, b)).collect()
}

/// Switches at site `a` are mastered by the first member, site `b` by the second.
pub fn master_of<'a>(switch: &str, members: &'a [NodeId]) -> &'a NodeId {
    if switch.starts_with('a') {
        &members[0]
    } else {
        &members[1 % members.len()]
    }
}

/// Pairwise ping matrix: a ping follows the controller's shortest path over
/// `view` (ties broken by switch order) and succeeds only if every hop is a
/// physical link.
pub fn reachability(view: &BTreeSet<Link>) -> Vec<Vec<bool>> {
    let physical = physical_links();
    let mut adj: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for (a, b) in view {
        adj.entry(a).or_default().insert(b);
        adj.entry(b).or_default().insert(a);
    }
    SWITCHES
        .iter()
        .map(|src| {
            let parent = bfs(&adj, src);
            SWITCHES
                .iter()
                .map(|dst| {
                    if src == dst {
                        return true;
                    }
                    let mut cur = *dst;
                    while cur != *src {
                        let Some(&p) = parent.get(cur) else {
                            return false;
                        };
                        if !physical.contains(&link(p, cur)) {
                            return false;
                        }
                        cur = p;
                    }
                    true
                })
                .collect()
        })
        .collect()
}

fn bfs<'a>(adj: &BTreeMap<&'a str, BTreeSet<&'a str>>, src: &'a str) -> BTreeMap<&'a str, &'a str> {
    let mut parent = BTreeMap::new();
    let mut seen = BTreeSet::from([src]);
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        for &v in adj.get(u).into_iter().flatten() {
            if seen.insert(v) {
                parent.insert(v, u);
                queue.push_back(v);
            }
        }
    }
    parent
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn physical_view_fully_reachable() {
        let m = reachability(&physical_links());
        assert!(m.iter().flatten().all(|&r| r));
    }

    #[test]
    fn fake_link_breaks_a2_b2() {
        let mut view = physical_links();
        view.insert(link(FAKE_LINK.0, FAKE_LINK.1));
        let m = reachability(&view);
        assert!(!m[1][3]);
        assert!(!m[3][1]);
        assert!(m[0][2]);
    }

    #[test]
    fn link_is_normalized() {
        assert_eq!(link("b2", "a2"), link("a2", "b2"));
    }
}
