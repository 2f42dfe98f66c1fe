//! Bounded exhaustive interpreter used as a test oracle.
//!
//! Nondeterminism is bounded by the range of values tried for temporary
//! variables; all results are exact only for that bounded fragment.

use std::collections::{BTreeMap, HashMap};
use std::ops::RangeInclusive;

use crate::program::{IntegerProgram, Location, State, Transition, TransitionId, Var};

/// Values beyond this magnitude end a run as truncated.
const VALUE_LIMIT: i128 = 1 << 40;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    pub location: Location,
    pub state: State,
}

/// Pointwise worst case over all explored runs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunSummary {
    pub length: u64,
    pub counts: BTreeMap<TransitionId, u64>,
    /// Largest `|v|` seen right after each transition.
    pub max_abs: BTreeMap<(TransitionId, Var), u64>,
    /// Some run hit the fuel limit, the step budget, a value limit or a cycle.
    pub truncated: bool,
}

impl RunSummary {
    fn join(&mut self, o: &RunSummary) {
        self.length = self.length.max(o.length);
        for (t, c) in &o.counts {
            let e = self.counts.entry(*t).or_insert(0);
            *e = (*e).max(*c);
        }
        for (k, c) in &o.max_abs {
            let e = self.max_abs.entry(k.clone()).or_insert(0);
            *e = (*e).max(*c);
        }
        self.truncated |= o.truncated;
    }

    /// Prepends one step by `t` reaching `state`.
    fn prepend(&self, t: TransitionId, state: &State) -> RunSummary {
        let mut s = self.clone();
        s.length += 1;
        *s.counts.entry(t).or_insert(0) += 1;
        for (v, x) in state {
            let e = s.max_abs.entry((t, v.clone())).or_insert(0);
            *e = (*e).max(x.unsigned_abs());
        }
        s
    }

    pub fn count(&self, t: TransitionId) -> u64 {
        self.counts.get(&t).copied().unwrap_or(0)
    }
}

#[derive(Clone, Debug)]
pub struct ExploreConfig {
    /// Longest run explored.
    pub fuel: u64,
    /// Total evaluation steps per call.
    pub budget: u64,
    pub tv_box: RangeInclusive<i64>,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        ExploreConfig { fuel: 10_000, budget: 1_000_000, tv_box: -4..=4 }
    }
}

/// One evaluation step, or `None` if `t` does not apply.
pub fn step(p: &IntegerProgram, c: &Configuration, t: &Transition, tv_choice: &State) -> Option<Configuration> {
    if t.source != c.location {
        return None;
    }
    let lookup = |v: &Var| c.state.get(v).or_else(|| tv_choice.get(v)).copied();
    if !t.guard.holds(lookup)? {
        return None;
    }
    let mut next = State::new();
    for v in p.program_vars() {
        let x = t.update_of(v).eval(lookup)?;
        if x.abs() > VALUE_LIMIT {
            return None;
        }
        next.insert(v.clone(), x as i64);
    }
    Some(Configuration { location: t.target.clone(), state: next })
}

enum Succ {
    Step(TransitionId, Configuration),
    Overflow,
}

fn successors(p: &IntegerProgram, c: &Configuration, tv_box: &RangeInclusive<i64>) -> Vec<Succ> {
    let mut out = Vec::new();
    for t in p.outgoing(&c.location) {
        let tvs: Vec<Var> = p.temp_vars(t).into_iter().collect();
        let mut seen: Vec<Configuration> = Vec::new();
        let mut choice: Vec<i64> = vec![*tv_box.start(); tvs.len()];
        loop {
            let tv: State = tvs.iter().cloned().zip(choice.iter().copied()).collect();
            if let Some(n) = step(p, c, t, &tv) {
                if !seen.contains(&n) {
                    seen.push(n);
                }
            } else if guard_holds_but_overflows(p, c, t, &tv) {
                out.push(Succ::Overflow);
            }
            // Next TV assignment in lexicographic order.
            let mut i = 0;
            while i < choice.len() {
                if choice[i] < *tv_box.end() {
                    choice[i] += 1;
                    break;
                }
                choice[i] = *tv_box.start();
                i += 1;
            }
            if i == choice.len() {
                break;
            }
        }
        out.extend(seen.into_iter().map(|n| Succ::Step(t.id, n)));
    }
    out
}

fn guard_holds_but_overflows(p: &IntegerProgram, c: &Configuration, t: &Transition, tv: &State) -> bool {
    let lookup = |v: &Var| c.state.get(v).or_else(|| tv.get(v)).copied();
    t.guard.holds(lookup) == Some(true)
        && p.program_vars().iter().any(|v| t.update_of(v).eval(lookup).map(|x| x.abs() > VALUE_LIMIT).unwrap_or(true))
}

/// Worst-case summary of all runs from the initial location.
pub fn explore(p: &IntegerProgram, s0: &State, cfg: &ExploreConfig) -> RunSummary {
    explore_from(p, &Configuration { location: p.initial().clone(), state: s0.clone() }, cfg)
}

/// Worst-case summary of all runs from `start`, by memoized depth-first search.
pub fn explore_from(p: &IntegerProgram, start: &Configuration, cfg: &ExploreConfig) -> RunSummary {
    struct Frame {
        config: Configuration,
        succ: Vec<Succ>,
        next: usize,
        acc: RunSummary,
    }
    let mut memo: HashMap<Configuration, RunSummary> = HashMap::new();
    let mut on_stack: HashMap<Configuration, ()> = HashMap::new();
    let mut budget = cfg.budget;
    let mut stack: Vec<Frame> = Vec::new();
    let mut result = RunSummary::default();
    let push = |c: Configuration, stack: &mut Vec<Frame>, on_stack: &mut HashMap<Configuration, ()>| {
        let succ = successors(p, &c, &cfg.tv_box);
        on_stack.insert(c.clone(), ());
        stack.push(Frame { config: c, succ, next: 0, acc: RunSummary::default() });
    };
    push(start.clone(), &mut stack, &mut on_stack);
    while !stack.is_empty() {
        let depth = stack.len() as u64;
        let top = stack.last_mut().unwrap();
        if top.next < top.succ.len() {
            let i = top.next;
            top.next += 1;
            match &top.succ[i] {
                Succ::Overflow => top.acc.truncated = true,
                Succ::Step(t, n) => {
                    let (t, n) = (*t, n.clone());
                    if let Some(s) = memo.get(&n) {
                        let s = s.prepend(t, &n.state);
                        top.acc.join(&s);
                    } else if on_stack.contains_key(&n) || depth > cfg.fuel || budget == 0 {
                        let mut s = RunSummary::default().prepend(t, &n.state);
                        s.truncated = true;
                        top.acc.join(&s);
                    } else {
                        budget -= 1;
                        push(n, &mut stack, &mut on_stack);
                    }
                }
            }
        } else {
            let done = stack.pop().unwrap();
            on_stack.remove(&done.config);
            memo.insert(done.config.clone(), done.acc.clone());
            match stack.last_mut() {
                Some(parent) => {
                    // The parent reached `done.config` through the step just taken.
                    let Succ::Step(t, _) = &parent.succ[parent.next - 1] else { unreachable!() };
                    let s = done.acc.prepend(*t, &done.config.state);
                    parent.acc.join(&s);
                }
                None => result = done.acc,
            }
        }
    }
    result
}

/// Configurations reachable after exactly `k` steps, for `k = 0..=max_k`,
/// with labels erased. Each entry counts the distinct (transition, successor)
/// paths reaching it.
pub fn layers(
    p: &IntegerProgram,
    s0: &State,
    max_k: usize,
    tv_box: &RangeInclusive<i64>,
) -> Vec<BTreeMap<(String, State), u64>> {
    let mut layer: BTreeMap<Configuration, u64> = BTreeMap::new();
    layer.insert(Configuration { location: p.initial().clone(), state: s0.clone() }, 1);
    let mut out = Vec::new();
    for k in 0..=max_k {
        if layer.is_empty() {
            break;
        }
        let mut erased: BTreeMap<(String, State), u64> = BTreeMap::new();
        for (c, n) in &layer {
            *erased.entry((c.location.base_name().to_string(), c.state.clone())).or_insert(0) += n;
        }
        out.push(erased);
        if k == max_k {
            break;
        }
        let mut next: BTreeMap<Configuration, u64> = BTreeMap::new();
        for (c, n) in &layer {
            for s in successors(p, c, tv_box) {
                if let Succ::Step(_, c2) = s {
                    let e = next.entry(c2).or_insert(0);
                    *e = e.saturating_add(*n);
                }
            }
        }
        layer = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::parse_program;

    const NESTED: &str = "(GOAL COMPLEXITY)
(STARTTERM (FUNCTIONSYMBOLS l0))
(VAR x y z)
(RULES
  l0(x, y, z) -> l1(x, y, z)
  l1(x, y, z) -> l2(z - 1, z - 1, z) :|: z > 0
  l2(x, y, z) -> l2(x + y, y - 1, z) :|: x > 0
  l2(x, y, z) -> l1(x, y, z - 1) :|: z > 0
)";

    fn st(p: &IntegerProgram, vals: &[i64]) -> State {
        p.program_vars().iter().cloned().zip(vals.iter().copied()).collect()
    }

    #[test]
    fn single_steps() {
        let p = parse_program(NESTED).unwrap();
        let t1 = &p.transitions()[1];
        let t2 = &p.transitions()[2];
        let c = Configuration { location: Location::new("l1"), state: st(&p, &[0, 0, 2]) };
        let c1 = step(&p, &c, t1, &State::new()).unwrap();
        assert_eq!(c1, Configuration { location: Location::new("l2"), state: st(&p, &[1, 1, 2]) });
        let c2 = step(&p, &c1, t2, &State::new()).unwrap();
        assert_eq!(c2.state, st(&p, &[2, 0, 2]));
        let c0 = Configuration { location: Location::new("l1"), state: st(&p, &[0, 0, 0]) };
        assert!(step(&p, &c0, t1, &State::new()).is_none());
    }

    #[test]
    fn explore_nested_loops() {
        let p = parse_program(NESTED).unwrap();
        let s = explore(&p, &st(&p, &[0, 0, 2]), &ExploreConfig::default());
        assert!(!s.truncated);
        assert!(s.length >= 4 && s.length <= 151, "{}", s.length);
        assert_eq!(s.counts.values().sum::<u64>() >= s.length, true);
    }

    #[test]
    fn dead_start_has_no_runs() {
        let p = parse_program(
            "(GOAL COMPLEXITY)\n(STARTTERM (FUNCTIONSYMBOLS a))\n(VAR x)\n(RULES\n a(x) -> b(x) :|: x > 0 && x < 0\n)",
        )
        .unwrap();
        let s = explore(&p, &st(&p, &[1]), &ExploreConfig::default());
        assert_eq!(s.length, 0);
        assert!(!s.truncated);
    }

    #[test]
    fn cycles_are_truncated() {
        let p = parse_program("(GOAL COMPLEXITY)\n(STARTTERM (FUNCTIONSYMBOLS a))\n(VAR x)\n(RULES\n a(x) -> b(x)\n b(x) -> b(x)\n)")
            .unwrap();
        assert!(explore(&p, &st(&p, &[0]), &ExploreConfig::default()).truncated);
    }

    #[test]
    fn deterministic_loop_counts_exactly() {
        let p = parse_program(
            "(GOAL COMPLEXITY)\n(STARTTERM (FUNCTIONSYMBOLS a))\n(VAR x)\n(RULES\n a(x) -> b(x)\n b(x) -> b(x - 1) :|: x > 0\n)",
        )
        .unwrap();
        let s = explore(&p, &st(&p, &[7]), &ExploreConfig::default());
        assert_eq!(s.length, 8);
        assert_eq!(s.count(p.transitions()[1].id), 7);
        assert_eq!(s.max_abs[&(p.transitions()[1].id, Var::new("x"))], 6);
        let l = layers(&p, &st(&p, &[2]), 10, &(-1..=1));
        assert_eq!(l.len(), 4);
        assert_eq!(l[3].len(), 1);
    }
}
