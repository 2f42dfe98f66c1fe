use std::collections::{BTreeMap, BTreeSet, VecDeque};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use super::{IntegerProgram, Location, TransitionId};

/// Locations reachable from the initial location.
pub fn reachable_locations(p: &IntegerProgram) -> BTreeSet<Location> {
    let mut seen = BTreeSet::new();
    let mut queue = VecDeque::new();
    seen.insert(p.initial().clone());
    queue.push_back(p.initial().clone());
    while let Some(l) = queue.pop_front() {
        for t in p.outgoing(&l) {
            if seen.insert(t.target.clone()) {
                queue.push_back(t.target.clone());
            }
        }
    }
    seen
}

/// Non-trivial SCCs of the location graph as transition sets, in topological
/// order of the condensation. Each set holds every transition with both
/// endpoints in the component.
pub fn sccs_topological(p: &IntegerProgram) -> Vec<BTreeSet<TransitionId>> {
    let mut g: DiGraph<Location, TransitionId> = DiGraph::new();
    let mut index: BTreeMap<Location, NodeIndex> = BTreeMap::new();
    for l in p.locations() {
        index.insert(l.clone(), g.add_node(l.clone()));
    }
    for t in p.transitions() {
        g.add_edge(index[&t.source], index[&t.target], t.id);
    }
    // tarjan_scc yields components in reverse topological order.
    let mut comps = tarjan_scc(&g);
    comps.reverse();
    let mut out = Vec::new();
    for comp in comps {
        let locs: BTreeSet<&Location> = comp.iter().map(|n| &g[*n]).collect();
        let ts: BTreeSet<TransitionId> = p
            .transitions()
            .iter()
            .filter(|t| locs.contains(&t.source) && locs.contains(&t.target))
            .map(|t| t.id)
            .collect();
        if !ts.is_empty() {
            out.push(ts);
        }
    }
    out
}

/// Entry locations and entry transitions of a sub-program.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EntryInfo {
    /// For every entry location, its incoming transitions from outside `sub`.
    pub per_location: BTreeMap<Location, BTreeSet<TransitionId>>,
}

impl EntryInfo {
    pub fn locations(&self) -> BTreeSet<Location> {
        self.per_location.keys().cloned().collect()
    }

    pub fn transitions(&self) -> BTreeSet<TransitionId> {
        self.per_location.values().flatten().copied().collect()
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
#[error("entry transitions of an empty transition set")]
pub struct EmptySubProgram;

pub fn entry_transitions(
    p: &IntegerProgram,
    sub: &BTreeSet<TransitionId>,
) -> Result<EntryInfo, EmptySubProgram> {
    if sub.is_empty() {
        return Err(EmptySubProgram);
    }
    let sources: BTreeSet<&Location> =
        p.transitions().iter().filter(|t| sub.contains(&t.id)).map(|t| &t.source).collect();
    let mut per_location: BTreeMap<Location, BTreeSet<TransitionId>> = BTreeMap::new();
    for t in p.transitions() {
        if !sub.contains(&t.id) && sources.contains(&t.target) {
            per_location.entry(t.target.clone()).or_default().insert(t.id);
        }
    }
    Ok(EntryInfo { per_location })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::parse_program;

    const CHAIN: &str = "(GOAL COMPLEXITY)\n(STARTTERM (FUNCTIONSYMBOLS l0))\n(VAR x)\n(RULES\n l0(x) -> l1(x)\n l1(x) -> l2(x)\n)\n";

    #[test]
    fn acyclic_chain_has_no_sccs() {
        let p = parse_program(CHAIN).unwrap();
        assert!(sccs_topological(&p).is_empty());
        assert_eq!(reachable_locations(&p).len(), 3);
    }

    #[test]
    fn empty_sub_is_an_error() {
        let p = parse_program(CHAIN).unwrap();
        assert!(entry_transitions(&p, &BTreeSet::new()).is_err());
    }
}
