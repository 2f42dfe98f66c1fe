//! Interval invariants: a forward fixpoint over per-location boxes with
//! widening, used to strengthen guards.

use std::collections::BTreeMap;

use crate::program::{Atom, Constraint, IntegerProgram, Location, Polynomial, Transition, Var};

/// Number of changes a location may see before its moving bounds are widened.
pub const WIDEN_AFTER: usize = 3;

const LIMIT: i128 = 1 << 40;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Ext {
    NegInf,
    Fin(i128),
    PosInf,
}

impl Ext {
    fn clamp(self) -> Ext {
        match self {
            Ext::Fin(n) if n > LIMIT => Ext::PosInf,
            Ext::Fin(n) if n < -LIMIT => Ext::NegInf,
            e => e,
        }
    }

    fn add(self, o: Ext) -> Ext {
        match (self, o) {
            (Ext::Fin(a), Ext::Fin(b)) => Ext::Fin(a + b).clamp(),
            (Ext::NegInf, Ext::PosInf) | (Ext::PosInf, Ext::NegInf) => unreachable!("lower plus upper"),
            (Ext::NegInf, _) | (_, Ext::NegInf) => Ext::NegInf,
            _ => Ext::PosInf,
        }
    }

    fn mul(self, o: Ext) -> Ext {
        let sign = |e: Ext| match e {
            Ext::NegInf => -1,
            Ext::PosInf => 1,
            Ext::Fin(n) => n.signum(),
        };
        match (self, o) {
            (Ext::Fin(a), Ext::Fin(b)) => Ext::Fin(a.saturating_mul(b)).clamp(),
            // Bounds of finite values: zero times anything is zero.
            _ if sign(self) == 0 || sign(o) == 0 => Ext::Fin(0),
            _ if sign(self) * sign(o) > 0 => Ext::PosInf,
            _ => Ext::NegInf,
        }
    }
}

/// A closed integer interval, possibly unbounded on either side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Interval {
    lo: Ext,
    hi: Ext,
}

impl Interval {
    pub fn top() -> Self {
        Interval { lo: Ext::NegInf, hi: Ext::PosInf }
    }

    pub fn point(n: i64) -> Self {
        Interval { lo: Ext::Fin(n as i128), hi: Ext::Fin(n as i128) }
    }

    pub fn lower(&self) -> Option<i64> {
        match self.lo {
            Ext::Fin(n) => Some(n as i64),
            _ => None,
        }
    }

    pub fn upper(&self) -> Option<i64> {
        match self.hi {
            Ext::Fin(n) => Some(n as i64),
            _ => None,
        }
    }

    fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    fn add(&self, o: &Interval) -> Interval {
        Interval { lo: self.lo.add(o.lo), hi: self.hi.add(o.hi) }
    }

    fn mul(&self, o: &Interval) -> Interval {
        let c = [self.lo.mul(o.lo), self.lo.mul(o.hi), self.hi.mul(o.lo), self.hi.mul(o.hi)];
        Interval { lo: *c.iter().min().unwrap(), hi: *c.iter().max().unwrap() }
    }

    fn join(&self, o: &Interval) -> Interval {
        Interval { lo: self.lo.min(o.lo), hi: self.hi.max(o.hi) }
    }

    fn widen(&self, next: &Interval) -> Interval {
        Interval {
            lo: if next.lo < self.lo { Ext::NegInf } else { self.lo },
            hi: if next.hi > self.hi { Ext::PosInf } else { self.hi },
        }
    }
}

type Box_ = BTreeMap<Var, Interval>;

fn get(b: &Box_, v: &Var) -> Interval {
    b.get(v).copied().unwrap_or_else(Interval::top)
}

fn eval(p: &Polynomial, b: &Box_) -> Interval {
    let mut acc = Interval::point(0);
    for (m, c) in p.terms() {
        let mut t = Interval::point(c);
        for (v, e) in m.factors() {
            for _ in 0..*e {
                t = t.mul(&get(b, v));
            }
        }
        acc = acc.add(&t);
    }
    acc
}

fn floor_div(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn ceil_div(a: i128, b: i128) -> i128 {
    -floor_div(-a, b)
}

/// Tightens `b` with the linear atoms of `guard`; `false` if it becomes empty.
fn restrict(b: &mut Box_, guard: &Constraint) -> bool {
    for _ in 0..2 {
        for a in guard.linear_atoms() {
            let poly = a.poly();
            for v in poly.vars() {
                let k = poly.coeff(&v) as i128;
                // k·v ≤ -(rest)
                let rest = poly.sub(&Polynomial::var(v.clone()).scale(k as i64));
                let Ext::Fin(h) = eval(&rest.neg(), b).hi else { continue };
                let cur = get(b, &v);
                let next = if k > 0 {
                    Interval { lo: cur.lo, hi: cur.hi.min(Ext::Fin(floor_div(h, k))) }
                } else {
                    Interval { lo: cur.lo.max(Ext::Fin(ceil_div(h, k))), hi: cur.hi }
                };
                if next.is_empty() {
                    return false;
                }
                b.insert(v, next);
            }
        }
    }
    true
}

fn post(p: &IntegerProgram, t: &Transition, pre: &Box_) -> Option<Box_> {
    let mut b = pre.clone();
    if !restrict(&mut b, &t.guard) {
        return None;
    }
    Some(p.program_vars().iter().map(|v| (v.clone(), eval(&t.update_of(v), &b))).collect())
}

/// Per-location interval invariants for the reachable locations.
pub fn interval_invariants(p: &IntegerProgram) -> BTreeMap<Location, BTreeMap<Var, Interval>> {
    let top: Box_ = p.program_vars().iter().map(|v| (v.clone(), Interval::top())).collect();
    let mut state: BTreeMap<Location, Box_> = BTreeMap::new();
    let mut changes: BTreeMap<Location, usize> = BTreeMap::new();
    state.insert(p.initial().clone(), top);
    let mut changed = true;
    let mut rounds = 0;
    while changed && rounds < 1000 {
        changed = false;
        rounds += 1;
        for t in p.transitions() {
            let Some(pre) = state.get(&t.source) else { continue };
            let Some(out) = post(p, t, pre) else { continue };
            let next = match state.get(&t.target) {
                None => out,
                Some(old) => {
                    let joined: Box_ = old.iter().map(|(v, i)| (v.clone(), i.join(&get(&out, v)))).collect();
                    if &joined == old {
                        continue;
                    }
                    let n = changes.entry(t.target.clone()).or_default();
                    *n += 1;
                    if *n > WIDEN_AFTER {
                        old.iter().map(|(v, i)| (v.clone(), i.widen(&joined[v]))).collect()
                    } else {
                        joined
                    }
                }
            };
            state.insert(t.target.clone(), next);
            changed = true;
        }
    }
    state
}

/// Conjoins the invariant of each source location to the guards leaving it.
pub fn strengthen_guards(p: &IntegerProgram) -> IntegerProgram {
    let inv = interval_invariants(p);
    let ts: Vec<Transition> = p
        .transitions()
        .iter()
        .map(|t| {
            let mut t = t.clone();
            if let Some(b) = inv.get(&t.source) {
                for (v, i) in b {
                    let x = Polynomial::var(v.clone());
                    if let Some(lo) = i.lower() {
                        t.guard = t.guard.with(Atom::ge(&x, &Polynomial::constant(lo)));
                    }
                    if let Some(hi) = i.upper() {
                        t.guard = t.guard.with(Atom::le(&x, &Polynomial::constant(hi)));
                    }
                }
            }
            t
        })
        .collect();
    p.with_parts(p.program_vars().to_vec(), p.locations().clone(), ts).expect("same shape")
}
