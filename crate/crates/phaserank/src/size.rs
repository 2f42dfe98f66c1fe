//! Size bounds `SB(t, v)`: bounds on `|v|` right after any application of `t`.
//!
//! Local bounds classify each update under its guard. They are combined
//! along the result-variable graph: acyclic nodes sum over predecessors,
//! cycles of additive updates grow by their increments times the runtime
//! bounds of the transitions involved, everything else is ω.

use std::collections::{BTreeMap, BTreeSet};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::bound::Bound;
use crate::program::{Atom, Constraint, IntegerProgram, Polynomial, TransitionId, Var};
use crate::solver::Solver;
use crate::tables::{RuntimeBoundTable, SizeBoundTable};

/// Largest constant tried when looking for a guard-implied bound.
pub const CONSTANT_LIMIT: u64 = 1 << 16;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LocalSizeBound {
    /// `η(v) = v`.
    Identity(Var),
    /// The guard implies `|η(v)| ≤ c`.
    Constant(u64),
    /// `|η(v)| ≤ Σ |vars| + d`.
    Additive(u64, Vec<Var>),
    /// `|η(v)| ≤ p(|PV|)`, with `p` having nonnegative coefficients.
    Polynomial(Polynomial),
    Unbounded,
}

impl LocalSizeBound {
    /// The bound as a polynomial with nonnegative coefficients over PV.
    pub fn abs_poly(&self) -> Option<Polynomial> {
        match self {
            LocalSizeBound::Identity(v) => Some(Polynomial::var(v.clone())),
            LocalSizeBound::Constant(c) => Some(Polynomial::constant(*c as i64)),
            LocalSizeBound::Additive(d, vars) => {
                let mut p = Polynomial::constant(*d as i64);
                for v in vars {
                    p = p.add(&Polynomial::var(v.clone()));
                }
                Some(p)
            }
            LocalSizeBound::Polynomial(p) => Some(p.clone()),
            LocalSizeBound::Unbounded => None,
        }
    }
}

fn abs_coeffs(p: &Polynomial) -> Polynomial {
    Polynomial::from_terms(p.terms().map(|(m, c)| (m.clone(), c.abs())))
}

/// Smallest `c ≤ CONSTANT_LIMIT` with `guard ⊨ |e| ≤ c`, if any.
fn constant_bound(solver: &Solver, guard: &Constraint, e: &Polynomial) -> Option<u64> {
    if !e.is_linear() {
        return None;
    }
    let fits = |c: u64| {
        let k = Polynomial::constant(c as i64);
        solver.entails(guard, &Atom::le(e, &k)) == Some(true) && solver.entails(guard, &Atom::ge(e, &k.neg())) == Some(true)
    };
    if !fits(CONSTANT_LIMIT) {
        return None;
    }
    let (mut lo, mut hi) = (0u64, CONSTANT_LIMIT);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if fits(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Some(lo)
}

/// Classifies `η_t(v)` under the guard of `t`.
pub fn local_size_bound(p: &IntegerProgram, solver: &Solver, t: TransitionId, v: &Var) -> LocalSizeBound {
    let tr = p.transition(t).expect("transition exists");
    let e = tr.update_of(v);
    if e.as_var() == Some(v) {
        return LocalSizeBound::Identity(v.clone());
    }
    if e.is_constant() {
        return LocalSizeBound::Constant(e.constant_term().unsigned_abs());
    }
    let has_temp = e.vars().iter().any(|w| !p.is_program_var(w));
    let guard_relevant = tr.guard.vars().iter().any(|w| e.mentions(w));
    if guard_relevant {
        if let Some(c) = constant_bound(solver, &tr.guard, &e) {
            return LocalSizeBound::Constant(c);
        }
    }
    if has_temp {
        return LocalSizeBound::Unbounded;
    }
    let mut abs = abs_coeffs(&e);
    // Drop the constant when the guard fixes the sign: e.g. z - 1 under z > 0 is at most z.
    let c0 = e.constant_term();
    if c0 != 0 && e.is_linear() {
        let zero = Polynomial::zero();
        let sign_ok = if c0 < 0 {
            solver.entails(&tr.guard, &Atom::ge(&e, &zero)) == Some(true)
        } else {
            solver.entails(&tr.guard, &Atom::le(&e, &zero)) == Some(true)
        };
        if sign_ok {
            abs = abs.sub(&Polynomial::constant(c0.abs()));
        }
    }
    let abs_c0 = abs.constant_term();
    let additive = abs.terms().all(|(m, c)| m.is_one() || (m.as_var().is_some() && c == 1));
    if additive {
        let vars: Vec<Var> = abs.terms().filter_map(|(m, _)| m.as_var().cloned()).collect();
        LocalSizeBound::Additive(abs_c0 as u64, vars)
    } else {
        LocalSizeBound::Polynomial(abs)
    }
}

/// Local size bounds of every result variable of a program.
#[derive(Clone, Debug, Default)]
pub struct LocalSizeBounds {
    entries: BTreeMap<(TransitionId, Var), LocalSizeBound>,
}

impl LocalSizeBounds {
    pub fn compute(p: &IntegerProgram, solver: &Solver) -> Self {
        let mut entries = BTreeMap::new();
        for t in p.transitions() {
            for v in p.program_vars() {
                entries.insert((t.id, v.clone()), local_size_bound(p, solver, t.id, v));
            }
        }
        LocalSizeBounds { entries }
    }

    pub fn get(&self, t: TransitionId, v: &Var) -> &LocalSizeBound {
        &self.entries[&(t, v.clone())]
    }
}

fn bound_of(p: &Polynomial, subst: &dyn Fn(&Var) -> Bound) -> Bound {
    let mut acc = Bound::zero();
    for (m, c) in p.terms() {
        let mut term = Bound::constant(c.unsigned_abs());
        for (v, e) in m.factors() {
            term = term.mul(&subst(v).pow(*e));
        }
        acc = acc.add(&term);
    }
    acc
}

/// Result-variable graph: `(t', w) → (t, v)` when `t'` can precede `t` and
/// `w` occurs in the local bound of `(t, v)`. Edges into constant or
/// unbounded nodes are omitted.
struct RvGraph {
    graph: DiGraph<(TransitionId, Var), ()>,
}

fn rv_graph(p: &IntegerProgram, local: &LocalSizeBounds) -> RvGraph {
    let mut graph = DiGraph::new();
    let mut index: BTreeMap<(TransitionId, Var), NodeIndex> = BTreeMap::new();
    for t in p.transitions() {
        for v in p.program_vars() {
            index.insert((t.id, v.clone()), graph.add_node((t.id, v.clone())));
        }
    }
    for t in p.transitions() {
        for v in p.program_vars() {
            let Some(poly) = local.get(t.id, v).abs_poly() else { continue };
            if matches!(local.get(t.id, v), LocalSizeBound::Constant(_)) {
                continue;
            }
            for w in poly.vars() {
                for pre in p.incoming(&t.source) {
                    graph.add_edge(index[&(pre.id, w.clone())], index[&(t.id, v.clone())], ());
                }
            }
        }
    }
    RvGraph { graph }
}

/// Computes a size-bound table from the local bounds and the runtime bounds.
pub fn compute_size_bounds(p: &IntegerProgram, local: &LocalSizeBounds, rb: &RuntimeBoundTable) -> SizeBoundTable {
    let rv = rv_graph(p, local);
    let mut sb = SizeBoundTable::default();
    let mut sccs = tarjan_scc(&rv.graph);
    sccs.reverse();
    let initial = p.initial().clone();
    for comp in sccs {
        let nodes: BTreeSet<(TransitionId, Var)> = comp.iter().map(|i| rv.graph[*i].clone()).collect();
        // Size of w before t: the sum over t's predecessors, or |w| itself for initial transitions.
        let pre = |sb: &SizeBoundTable, t: TransitionId, w: &Var, skip: &BTreeSet<(TransitionId, Var)>| -> Bound {
            let tr = p.transition(t).unwrap();
            if tr.source == initial {
                return Bound::var(w.clone());
            }
            let parts: Vec<Bound> = p
                .incoming(&tr.source)
                .filter(|q| !skip.contains(&(q.id, w.clone())))
                .map(|q| sb.get(q.id, w))
                .collect();
            Bound::sum(parts.iter())
        };
        let cyclic = comp.len() > 1 || rv.graph.contains_edge(comp[0], comp[0]);
        if !cyclic {
            let (t, v) = nodes.iter().next().unwrap().clone();
            let b = match local.get(t, &v).abs_poly() {
                None => Bound::omega(),
                Some(poly) => {
                    let none = BTreeSet::new();
                    bound_of(&poly, &|w| pre(&sb, t, w, &none))
                }
            };
            sb.set(t, v, b);
            continue;
        }
        // Every node must depend on exactly one in-component variable with coefficient 1.
        let mut entry = Bound::zero();
        let mut growth = Bound::zero();
        let mut ok = true;
        for (t, v) in &nodes {
            let Some(poly) = local.get(*t, v).abs_poly() else {
                ok = false;
                break;
            };
            let tr = p.transition(*t).unwrap();
            let inner: Vec<Var> = poly
                .vars()
                .into_iter()
                .filter(|w| p.incoming(&tr.source).any(|q| nodes.contains(&(q.id, w.clone()))))
                .collect();
            if inner.len() != 1 {
                ok = false;
                break;
            }
            let w = &inner[0];
            let rest = poly.sub(&Polynomial::var(w.clone()));
            if rest.mentions(w) || rest.terms().any(|(_, c)| c < 0) {
                ok = false;
                break;
            }
            entry = entry.add(&pre(&sb, *t, w, &nodes));
            let side = bound_of(&rest, &|u| pre(&sb, *t, u, &BTreeSet::new()));
            growth = growth.add(&rb.get(*t).mul(&side));
        }
        let b = if ok { entry.add(&growth) } else { Bound::omega() };
        for (t, v) in nodes {
            sb.set(t, v, b.clone());
        }
    }
    sb
}

/// Keeps the old entry when the recomputed one has a worse asymptotic class.
pub fn merge_improving(old: &SizeBoundTable, new: &SizeBoundTable) -> (SizeBoundTable, bool) {
    let mut out = new.clone();
    let mut improved = false;
    for ((t, v), b) in new.iter() {
        let o = old.get(*t, v);
        let (co, cn) = (o.classify(), b.classify());
        if cn > co {
            out.set(*t, v.clone(), o);
        } else if cn < co {
            improved = true;
        }
    }
    (out, improved)
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

    fn v(n: &str) -> Var {
        Var::new(n)
    }

    #[test]
    fn local_classification() {
        let p = parse_program(NESTED).unwrap();
        let s = Solver::default();
        let ts: Vec<TransitionId> = p.transitions().iter().map(|t| t.id).collect();
        for x in ["x", "y", "z"] {
            assert_eq!(local_size_bound(&p, &s, ts[0], &v(x)), LocalSizeBound::Identity(v(x)));
        }
        // z - 1 under z > 0 is at most z.
        assert_eq!(local_size_bound(&p, &s, ts[1], &v("x")), LocalSizeBound::Additive(0, vec![v("z")]));
        assert_eq!(local_size_bound(&p, &s, ts[2], &v("y")), LocalSizeBound::Additive(1, vec![v("y")]));
        assert_eq!(local_size_bound(&p, &s, ts[3], &v("z")), LocalSizeBound::Additive(0, vec![v("z")]));

        let q = parse_program(
            "(GOAL COMPLEXITY)\n(STARTTERM (FUNCTIONSYMBOLS a))\n(VAR x)\n(RULES\n a(x) -> b(u) :|: u > 0\n b(x) -> b(x + 1) :|: 1 <= x && x <= 3\n)",
        )
        .unwrap();
        let qs: Vec<TransitionId> = q.transitions().iter().map(|t| t.id).collect();
        assert_eq!(local_size_bound(&q, &s, qs[0], &v("x")), LocalSizeBound::Unbounded);
        assert_eq!(local_size_bound(&q, &s, qs[1], &v("x")), LocalSizeBound::Constant(4));
    }

    #[test]
    fn nested_loop_sizes() {
        let p = parse_program(NESTED).unwrap();
        let s = Solver::default();
        let local = LocalSizeBounds::compute(&p, &s);
        let ts: Vec<TransitionId> = p.transitions().iter().map(|t| t.id).collect();
        let mut rb = RuntimeBoundTable::default();
        rb.set(ts[0], Bound::one());
        let sb = compute_size_bounds(&p, &local, &rb);
        assert_eq!(sb.get(ts[0], &v("z")).to_string(), "z");
        for t in &ts[1..] {
            assert_eq!(sb.get(*t, &v("z")).to_string(), "z");
        }
        assert_eq!(sb.get(ts[1], &v("x")).to_string(), "2*z");
        assert_eq!(sb.get(ts[1], &v("y")).to_string(), "2*z");
        assert!(sb.get(ts[2], &v("y")).is_omega());
        rb.set(ts[1], Bound::var(v("z")));
        rb.set(ts[3], Bound::var(v("z")));
        let b = Bound::var(v("z")).mul(&Bound::var(v("z"))).scale(32).add(&Bound::var(v("z")).scale(9));
        rb.set(ts[2], b);
        let sb = compute_size_bounds(&p, &local, &rb);
        assert_eq!(sb.get(ts[2], &v("y")).to_string(), "32*z^2+11*z");
        assert!(sb.get(ts[2], &v("x")).is_finite());
    }
}
