//! Nested multiphase-linear ranking functions for sub-programs.
//!
//! Templates `f_i(ℓ) = Σ c_{i,ℓ,v}·v + c_{i,ℓ,0}` are made decreasing or
//! non-increasing on each transition via Farkas' lemma: an affine `E(x) ≥ 0`
//! holds on `Gx ≤ h` iff some `λ ≥ 0` has `λG = -A` and `λh ≤ A_0`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::bound::{overapprox_poly, Bound};
use crate::program::{entry_transitions, Atom, IntegerProgram, Location, Polynomial, Transition, TransitionId, Var};
use crate::solver::{rat, LinearAtom, LinearExpr, Rat, SatResult, Solver, SolverQuery, Sort};
use crate::tables::{RuntimeBoundTable, SizeBoundTable};

/// `γ_1 = 1`, `γ_i = 2 + γ_{i-1}/(i-1) + 1/(i-1)!`.
pub fn gamma(i: u32) -> BigRational {
    assert!(i >= 1, "gamma is defined for i >= 1");
    let mut g = BigRational::one();
    let mut fact = BigInt::one();
    for k in 2..=i {
        let prev = BigInt::from(k - 1);
        fact *= &prev;
        g = rat(2) + g / BigRational::from_integer(prev) + BigRational::new(BigInt::one(), fact.clone());
    }
    g
}

/// `d!·γ_d`, which is always a natural number.
pub fn factorial_gamma(d: u32) -> BigUint {
    let fact: BigInt = (1..=d).map(BigInt::from).product();
    let v = gamma(d) * BigRational::from_integer(fact);
    assert!(v.is_integer(), "d!·γ_d is integral");
    v.to_integer().to_biguint().expect("nonnegative")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiphaseRankingFunction {
    pub depth: usize,
    /// `functions[i-1][ℓ] = f_i(ℓ)`; locations outside the scope are absent (0).
    pub functions: Vec<BTreeMap<Location, Polynomial>>,
    pub decreasing: BTreeSet<TransitionId>,
    pub scope: BTreeSet<TransitionId>,
}

impl MultiphaseRankingFunction {
    pub fn f(&self, i: usize, l: &Location) -> Polynomial {
        if i == 0 {
            return Polynomial::zero();
        }
        self.functions[i - 1].get(l).cloned().unwrap_or_else(Polynomial::zero)
    }

    /// Locations touched by the scope.
    pub fn locations(&self, p: &IntegerProgram) -> BTreeSet<Location> {
        self.scope
            .iter()
            .filter_map(|t| p.transition(*t))
            .flat_map(|t| [t.source.clone(), t.target.clone()])
            .collect()
    }
}

impl fmt::Display for MultiphaseRankingFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ids = |s: &BTreeSet<TransitionId>| s.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(",");
        writeln!(f, "decreasing={{{}}} non-increasing={{{}}}", ids(&self.decreasing), ids(&(&self.scope - &self.decreasing)))?;
        for (i, fi) in self.functions.iter().enumerate() {
            for (l, p) in fi {
                writeln!(f, "f_{}({}) = {}", i + 1, l, p)?;
            }
        }
        Ok(())
    }
}

/// `β_ℓ` per entry location.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LocalBound {
    pub per_location: BTreeMap<Location, Bound>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MprfSearch {
    Found(MultiphaseRankingFunction),
    NotFound,
    /// The solver gave up on some query.
    Unknown,
}

impl MprfSearch {
    pub fn found(self) -> Option<MultiphaseRankingFunction> {
        match self {
            MprfSearch::Found(f) => Some(f),
            _ => None,
        }
    }
}

/// An affine function of the program state whose coefficients are linear in
/// the template unknowns.
#[derive(Clone, Debug, Default)]
struct ParamAffine {
    coeffs: BTreeMap<Var, LinearExpr>,
    constant: LinearExpr,
}

impl ParamAffine {
    fn add_scaled(&mut self, o: &ParamAffine, k: &Rat) {
        for (v, e) in &o.coeffs {
            let cur = self.coeffs.remove(v).unwrap_or_default();
            self.coeffs.insert(v.clone(), cur.add(&e.scale(k)));
        }
        self.constant = self.constant.add(&o.constant.scale(k));
    }

    fn shift(&mut self, c: i64) {
        self.constant = self.constant.add(&LinearExpr::constant(rat(c)));
    }
}

struct Encoder<'a> {
    p: &'a IntegerProgram,
    depth: usize,
    locations: Vec<Location>,
    /// Unknown for `c_{i,ℓ,v}`; `None` as the variable stands for the constant.
    unknown: BTreeMap<(usize, usize, Option<Var>), Var>,
    zeroed: BTreeSet<(usize, Var)>,
}

impl<'a> Encoder<'a> {
    fn new(p: &'a IntegerProgram, depth: usize, locations: Vec<Location>, zeroed: BTreeSet<(usize, Var)>) -> Self {
        let mut unknown = BTreeMap::new();
        for i in 1..=depth {
            for (li, _) in locations.iter().enumerate() {
                unknown.insert((i, li, None), Var::new(&format!("c{i}_{li}_const")));
                for (vi, v) in p.program_vars().iter().enumerate() {
                    unknown.insert((i, li, Some(v.clone())), Var::new(&format!("c{i}_{li}_{vi}")));
                }
            }
        }
        Encoder { p, depth, locations, unknown, zeroed }
    }

    fn loc_index(&self, l: &Location) -> usize {
        self.locations.iter().position(|x| x == l).expect("location in scope")
    }

    /// `f_i(ℓ)` on the pre-state.
    fn pre(&self, i: usize, l: &Location) -> ParamAffine {
        let mut a = ParamAffine::default();
        if i == 0 {
            return a;
        }
        let li = self.loc_index(l);
        for v in self.p.program_vars() {
            a.coeffs.insert(v.clone(), LinearExpr::var(self.unknown[&(i, li, Some(v.clone()))].clone()));
        }
        a.constant = LinearExpr::var(self.unknown[&(i, li, None)].clone());
        a
    }

    /// `f_i(ℓ')` on the post-state of `t`; nonlinear updates become fresh variables.
    fn post(&self, i: usize, t: &Transition) -> ParamAffine {
        let li = self.loc_index(&t.target);
        let mut a = ParamAffine { coeffs: BTreeMap::new(), constant: LinearExpr::var(self.unknown[&(i, li, None)].clone()) };
        for v in self.p.program_vars() {
            let c = LinearExpr::var(self.unknown[&(i, li, Some(v.clone()))].clone());
            let up = t.update_of(v);
            if up.is_linear() {
                for w in up.vars() {
                    let k = rat(up.coeff(&w));
                    let cur = a.coeffs.remove(&w).unwrap_or_default();
                    a.coeffs.insert(w, cur.add(&c.scale(&k)));
                }
                a.constant = a.constant.add(&c.scale(&rat(up.constant_term())));
            } else {
                let fresh = Var::new(&format!("{}'nonlinear", v.name()));
                a.coeffs.insert(fresh, c);
            }
        }
        a
    }

    /// Asserts `E ≥ 0` on the linear part of the guard of `t`.
    fn farkas(&self, q: &mut SolverQuery, e: &ParamAffine, t: &Transition, tag: &str) {
        let atoms: Vec<&Atom> = t.guard.linear_atoms().collect();
        let lambdas: Vec<Var> = (0..atoms.len()).map(|j| Var::new(&format!("lam_{tag}_{j}"))).collect();
        for l in &lambdas {
            q.declare(l, Sort::Real);
            q.assert(LinearAtom::le(LinearExpr::var(l.clone()).neg()));
        }
        let mut xs: BTreeSet<Var> = e.coeffs.keys().cloned().collect();
        for a in &atoms {
            xs.extend(a.vars());
        }
        for x in &xs {
            // Σ_j λ_j·G_jx + A_x = 0
            let mut row = e.coeffs.get(x).cloned().unwrap_or_default();
            for (j, a) in atoms.iter().enumerate() {
                let g = a.poly().coeff(x);
                if g != 0 {
                    row.add_term(&lambdas[j], &rat(g));
                }
            }
            self.assert_expr(q, row, true);
        }
        // Σ_j λ_j·h_j - A_0 ≤ 0 with h_j = -c_j
        let mut row = e.constant.neg();
        for (j, a) in atoms.iter().enumerate() {
            let h = -a.poly().constant_term();
            if h != 0 {
                row.add_term(&lambdas[j], &rat(h));
            }
        }
        self.assert_expr(q, row, false);
    }

    fn assert_expr(&self, q: &mut SolverQuery, e: LinearExpr, eq: bool) {
        for v in e.coeffs.keys() {
            q.declare(v, Sort::Real);
        }
        q.assertions.push(vec![if eq { LinearAtom::eq(e) } else { LinearAtom::le(e) }]);
    }

    fn base_query(&self) -> SolverQuery {
        let mut q = SolverQuery::default();
        for u in self.unknown.values() {
            q.declare(u, Sort::Real);
        }
        for (li, v) in &self.zeroed {
            for i in 1..=self.depth {
                let u = &self.unknown[&(i, *li, Some(v.clone()))];
                q.assertions.push(vec![LinearAtom::eq(LinearExpr::var(u.clone()))]);
            }
        }
        q
    }

    /// Condition (a): `f_{i-1}(ℓ) + f_i(ℓ) - f_i(ℓ')(η) - 1 ≥ 0` for all i, and `f_d(ℓ) ≥ 0`.
    fn decreasing(&self, q: &mut SolverQuery, t: &Transition) {
        for i in 1..=self.depth {
            let mut e = self.pre(i - 1, &t.source);
            e.add_scaled(&self.pre(i, &t.source), &rat(1));
            e.add_scaled(&self.post(i, t), &rat(-1));
            e.shift(-1);
            self.farkas(q, &e, t, &format!("a{}_{}", t.id.0, i));
        }
        let e = self.pre(self.depth, &t.source);
        self.farkas(q, &e, t, &format!("a{}_nn", t.id.0));
    }

    /// Condition (b): `f_i(ℓ) - f_i(ℓ')(η) ≥ 0` for all i.
    fn non_increasing(&self, q: &mut SolverQuery, t: &Transition) {
        for i in 1..=self.depth {
            let mut e = self.pre(i, &t.source);
            e.add_scaled(&self.post(i, t), &rat(-1));
            self.farkas(q, &e, t, &format!("b{}_{}", t.id.0, i));
        }
    }

    /// Minimizes the weighted absolute coefficients, mostly at entry locations.
    fn objective(&self, q: &mut SolverQuery, entry: &BTreeSet<Location>) {
        let mut obj = LinearExpr::default();
        let mut n = 0;
        for ((i, li, v), u) in &self.unknown {
            let is_entry = entry.contains(&self.locations[*li]);
            let w = match (is_entry, v.is_some()) {
                (true, true) => 256,
                (true, false) => 16,
                (false, _) => 1,
            };
            // For depth one the local bound is ⌈1 + f⌉, so measure the shifted constant.
            let mut e = LinearExpr::var(u.clone());
            if self.depth == 1 && *i == 1 && v.is_none() && is_entry {
                e = e.add(&LinearExpr::constant(rat(1)));
            }
            let aux = Var::new(&format!("abs_{n}"));
            n += 1;
            q.declare(&aux, Sort::Real);
            let a = LinearExpr::var(aux.clone());
            q.assertions.push(vec![LinearAtom::le(e.add(&a.neg()))]);
            q.assertions.push(vec![LinearAtom::le(e.neg().add(&a.neg()))]);
            obj.add_term(&aux, &rat(w));
        }
        q.objective = Some(obj);
    }

    /// Integer witness from a rational model, scaled by the common denominator.
    fn extract(&self, m: &BTreeMap<Var, Rat>) -> Vec<BTreeMap<Location, Polynomial>> {
        let val = |u: &Var| m.get(u).cloned().unwrap_or_else(Rat::zero);
        let mut lcm = BigInt::one();
        for u in self.unknown.values() {
            lcm = lcm.lcm(val(u).denom());
        }
        let scale = BigRational::from_integer(lcm);
        let to_i64 = |r: Rat| -> i64 { (r * &scale).to_integer().to_i64().unwrap_or(i64::MAX) };
        (1..=self.depth)
            .map(|i| {
                self.locations
                    .iter()
                    .enumerate()
                    .map(|(li, l)| {
                        let mut terms: Vec<(crate::program::Monomial, i64)> =
                            vec![(crate::program::Monomial::one(), to_i64(val(&self.unknown[&(i, li, None)])))];
                        for v in self.p.program_vars() {
                            terms.push((crate::program::Monomial::var(v.clone()), to_i64(val(&self.unknown[&(i, li, Some(v.clone()))]))));
                        }
                        (l.clone(), Polynomial::from_terms(terms))
                    })
                    .collect()
            })
            .collect()
    }
}

/// Options for [`find_mprf`].
/// Candidates tried by single removal before falling back to coarser steps.
const SINGLE_REMOVALS: usize = 12;

#[derive(Clone, Debug, Default)]
pub struct MprfContext<'a> {
    /// Size bounds used to rule out variables whose entry size is unbounded.
    pub sizes: Option<&'a SizeBoundTable>,
}

enum Feasible {
    Yes(BTreeMap<Var, Rat>),
    No,
    Unknown,
}

struct Search<'a> {
    p: &'a IntegerProgram,
    solver: &'a Solver,
    depth: usize,
    target: TransitionId,
    ctx: &'a MprfContext<'a>,
    unknown: bool,
}

impl Search<'_> {
    fn encoder(&self, scope: &BTreeSet<TransitionId>) -> Option<(Encoder<'_>, BTreeSet<Location>)> {
        let locs: BTreeSet<Location> = scope
            .iter()
            .map(|t| self.p.transition(*t).unwrap())
            .flat_map(|t| [t.source.clone(), t.target.clone()])
            .collect();
        let locations: Vec<Location> = locs.into_iter().collect();
        let info = entry_transitions(self.p, scope).ok()?;
        let mut zeroed = BTreeSet::new();
        if let Some(sb) = self.ctx.sizes {
            for (l, ts) in &info.per_location {
                let li = locations.iter().position(|x| x == l).unwrap();
                for t in ts {
                    for v in self.p.program_vars() {
                        if sb.get(*t, v).is_omega() {
                            zeroed.insert((li, v.clone()));
                        }
                    }
                }
            }
        }
        Some((Encoder::new(self.p, self.depth, locations, zeroed), info.locations()))
    }

    fn solve(&mut self, scope: &BTreeSet<TransitionId>, pair_only: Option<TransitionId>, objective: bool) -> Feasible {
        let Some((enc, entry)) = self.encoder(scope) else { return Feasible::No };
        let mut q = enc.base_query();
        for id in scope {
            let t = self.p.transition(*id).unwrap();
            if *id == self.target {
                enc.decreasing(&mut q, t);
            } else if pair_only.map_or(true, |o| o == *id) {
                enc.non_increasing(&mut q, t);
            }
        }
        if objective {
            enc.objective(&mut q, &entry);
        }
        match self.solver.check_sat(&q) {
            Ok(SatResult::Sat(m)) => Feasible::Yes(m),
            Ok(SatResult::Unsat) => Feasible::No,
            _ => {
                self.unknown = true;
                Feasible::Unknown
            }
        }
    }

    fn feasible(&mut self, scope: &BTreeSet<TransitionId>) -> bool {
        matches!(self.solve(scope, None, false), Feasible::Yes(_))
    }

    /// Greedy deletion followed by a re-add pass.
    fn choose_scope(&mut self, scc: &BTreeSet<TransitionId>) -> Option<BTreeSet<TransitionId>> {
        let mut scope = scc.clone();
        let mut incompatible: Option<BTreeSet<TransitionId>> = None;
        loop {
            if self.feasible(&scope) {
                break;
            }
            if scope.len() == 1 {
                return None;
            }
            let others: Vec<TransitionId> = scope.iter().copied().filter(|t| *t != self.target).collect();
            let mut done = false;
            for t in others.iter().take(SINGLE_REMOVALS) {
                let mut s = scope.clone();
                s.remove(t);
                if self.feasible(&s) {
                    scope = s;
                    done = true;
                    break;
                }
            }
            if done {
                break;
            }
            // Pairwise compatibility does not depend on the scope, so it is checked once.
            let bad: Vec<TransitionId> = match &incompatible {
                Some(_) => Vec::new(),
                None => {
                    let bad: BTreeSet<TransitionId> = others
                        .iter()
                        .copied()
                        .filter(|t| {
                            let s: BTreeSet<TransitionId> = [self.target, *t].into_iter().collect();
                            matches!(self.solve(&s, Some(*t), false), Feasible::No)
                        })
                        .collect();
                    incompatible = Some(bad.clone());
                    bad.into_iter().collect()
                }
            };
            if bad.is_empty() {
                scope.remove(&others[0]);
            } else {
                for t in bad {
                    scope.remove(&t);
                }
            }
        }
        for t in scc {
            if !scope.contains(t) {
                let mut s = scope.clone();
                s.insert(*t);
                if self.feasible(&s) {
                    scope = s;
                }
            }
        }
        Some(scope)
    }
}

/// Instantiates the conditions of a candidate and checks them by integer entailment.
fn condition_holds(solver: &Solver, f: &MultiphaseRankingFunction, t: &Transition, decreasing: bool) -> bool {
    let post = |i: usize| f.f(i, &t.target).substitute(&t.update);
    let check = |e: Polynomial| solver.entails(&t.guard, &Atom::ge(&e, &Polynomial::zero())) == Some(true);
    for i in 1..=f.depth {
        let e = if decreasing {
            f.f(i - 1, &t.source).add(&f.f(i, &t.source)).sub(&post(i)).sub(&Polynomial::constant(1))
        } else {
            f.f(i, &t.source).sub(&post(i))
        };
        if !check(e) {
            return false;
        }
    }
    !decreasing || check(f.f(f.depth, &t.source))
}

/// Checks every condition of `f` independently of how it was found.
pub fn verify(p: &IntegerProgram, solver: &Solver, f: &MultiphaseRankingFunction) -> bool {
    if f.decreasing.is_empty() || !f.decreasing.is_subset(&f.scope) {
        return false;
    }
    f.scope.iter().all(|id| match p.transition(*id) {
        None => false,
        Some(t) => condition_holds(solver, f, t, f.decreasing.contains(id)),
    })
}

/// Searches for an MΦRF of depth `depth` with `target` decreasing on a
/// maximal scope inside `scc`.
pub fn find_mprf(
    p: &IntegerProgram,
    solver: &Solver,
    target: TransitionId,
    scc: &BTreeSet<TransitionId>,
    depth: usize,
    ctx: &MprfContext<'_>,
) -> MprfSearch {
    assert!(scc.contains(&target), "target lies in the component");
    let mut s = Search { p, solver, depth, target, ctx, unknown: false };
    let Some(scope) = s.choose_scope(scc) else {
        return if s.unknown { MprfSearch::Unknown } else { MprfSearch::NotFound };
    };
    let Feasible::Yes(model) = s.solve(&scope, None, true) else {
        return if s.unknown { MprfSearch::Unknown } else { MprfSearch::NotFound };
    };
    let (enc, _) = s.encoder(&scope).unwrap();
    let functions = enc.extract(&model);
    let mut f = MultiphaseRankingFunction { depth, functions, decreasing: [target].into_iter().collect(), scope: scope.clone() };
    // Everything else in the scope whose decrease already holds joins the decreasing set.
    for id in &scope {
        if *id != target && condition_holds(solver, &f, p.transition(*id).unwrap(), true) {
            f.decreasing.insert(*id);
        }
    }
    if verify(p, solver, &f) {
        MprfSearch::Found(f)
    } else {
        MprfSearch::NotFound
    }
}

/// `β_ℓ = 1 + d!·γ_d·(⌈f_1(ℓ)⌉ + … + ⌈f_d(ℓ)⌉)`, sharpened to `⌈1 + f_1(ℓ)⌉` for depth one.
pub fn local_bound(f: &MultiphaseRankingFunction, entry_locs: &BTreeSet<Location>, program_vars: &[Var]) -> LocalBound {
    let mut per_location = BTreeMap::new();
    for l in entry_locs {
        let b = if f.depth == 1 {
            overapprox_poly(&f.f(1, l).add(&Polynomial::constant(1)), program_vars).expect("program variables only")
        } else {
            let sum = (1..=f.depth)
                .map(|i| overapprox_poly(&f.f(i, l), program_vars).expect("program variables only"))
                .fold(Bound::zero(), |a, b| a.add(&b));
            Bound::one().add(&Bound::constant_big(factorial_gamma(f.depth as u32)).mul(&sum))
        };
        per_location.insert(l.clone(), b);
    }
    LocalBound { per_location }
}

/// `Σ_{ℓ ∈ E} Σ_{t ∈ T_ℓ} RB(t)·β_ℓ[v ↦ SB(t, v)]`, the new bound for every decreasing transition.
pub fn lift_bound(
    p: &IntegerProgram,
    f: &MultiphaseRankingFunction,
    lb: &LocalBound,
    rb: &RuntimeBoundTable,
    sb: &SizeBoundTable,
) -> Bound {
    let info = entry_transitions(p, &f.scope).expect("nonempty scope");
    let mut total = Bound::zero();
    for (l, ts) in &info.per_location {
        let beta = &lb.per_location[l];
        for t in ts {
            let inst = beta.substitute(&sb.substitution(*t, p.program_vars()));
            total = total.add(&rb.get(*t).mul(&inst));
        }
    }
    total
}

/// Whether `new` should replace `old`: only a strictly smaller asymptotic class counts.
pub fn improves(old: &Bound, new: &Bound) -> bool {
    new.classify() < old.classify()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::parse_program;

    const TWO_PHASE: &str = "(GOAL COMPLEXITY)
(STARTTERM (FUNCTIONSYMBOLS l0))
(VAR x y)
(RULES
  l0(x, y) -> l1(x, y)
  l1(x, y) -> l1(x + y, y - 1) :|: x > 0
)";

    const NESTED: &str = "(GOAL COMPLEXITY)
(STARTTERM (FUNCTIONSYMBOLS l0))
(VAR x y z)
(RULES
  l0(x, y, z) -> l1(x, y, z)
  l1(x, y, z) -> l2(z - 1, z - 1, z) :|: z > 0
  l2(x, y, z) -> l2(x + y, y - 1, z) :|: x > 0
  l2(x, y, z) -> l1(x, y, z - 1) :|: z > 0
)";

    const THREE_PHASE: &str = "(GOAL COMPLEXITY)
(STARTTERM (FUNCTIONSYMBOLS l0))
(VAR x y z)
(RULES
  l0(x, y, z) -> l1(x, y, z)
  l1(x, y, z) -> l1(x + y, y + z, z - 1) :|: x > 0
)";

    fn ids(p: &IntegerProgram) -> Vec<TransitionId> {
        p.transitions().iter().map(|t| t.id).collect()
    }

    #[test]
    fn gamma_values() {
        assert_eq!(gamma(1), rat(1));
        assert_eq!(gamma(2), rat(4));
        assert_eq!(gamma(3), BigRational::new(9.into(), 2.into()));
        assert_eq!(factorial_gamma(2), BigUint::from(8u32));
        assert_eq!(factorial_gamma(3), BigUint::from(27u32));
    }

    #[test]
    fn two_phase_loop() {
        let p = parse_program(TWO_PHASE).unwrap();
        let s = Solver::default();
        let t = ids(&p)[1];
        let scc: BTreeSet<TransitionId> = [t].into_iter().collect();
        let ctx = MprfContext::default();
        assert_eq!(find_mprf(&p, &s, t, &scc, 1, &ctx), MprfSearch::NotFound);
        let f = find_mprf(&p, &s, t, &scc, 2, &ctx).found().expect("depth two suffices");
        let l1 = Location::new("l1");
        assert_eq!(f.f(1, &l1).to_string(), "y + 1");
        assert_eq!(f.f(2, &l1).to_string(), "x");
        let lb = local_bound(&f, &[l1.clone()].into_iter().collect(), p.program_vars());
        assert_eq!(lb.per_location[&l1].to_string(), "8*x+8*y+9");
    }

    #[test]
    fn three_phase_loop() {
        let p = parse_program(THREE_PHASE).unwrap();
        let s = Solver::default();
        let t = ids(&p)[1];
        let scc: BTreeSet<TransitionId> = [t].into_iter().collect();
        let ctx = MprfContext::default();
        assert!(find_mprf(&p, &s, t, &scc, 2, &ctx).found().is_none());
        let f = find_mprf(&p, &s, t, &scc, 3, &ctx).found().expect("depth three suffices");
        let l1 = Location::new("l1");
        let got: Vec<String> = (1..=3).map(|i| f.f(i, &l1).to_string()).collect();
        assert_eq!(got, ["z + 1", "y + 1", "x"]);
        let lb = local_bound(&f, &[l1.clone()].into_iter().collect(), p.program_vars());
        assert_eq!(lb.per_location[&l1].to_string(), "27*x+27*y+27*z+55");
    }

    #[test]
    fn nested_loops_scope_and_lift() {
        let p = parse_program(NESTED).unwrap();
        let s = Solver::default();
        let ts = ids(&p);
        let scc: BTreeSet<TransitionId> = ts[1..].iter().copied().collect();
        let ctx = MprfContext::default();
        let f = find_mprf(&p, &s, ts[2], &scc, 2, &ctx).found().unwrap();
        assert_eq!(f.scope, [ts[2], ts[3]].into_iter().collect());
        assert!(f.decreasing.contains(&ts[2]));
        let l2 = Location::new("l2");
        let lb = local_bound(&f, &[l2.clone()].into_iter().collect(), p.program_vars());
        assert_eq!(lb.per_location[&l2].to_string(), "8*x+8*y+9");
        let mut rb = RuntimeBoundTable::default();
        rb.set(ts[1], Bound::var(Var::new("z")));
        let mut sb = SizeBoundTable::default();
        for v in p.program_vars() {
            sb.set(ts[1], v.clone(), Bound::var(Var::new("z")).scale(2));
        }
        assert_eq!(lift_bound(&p, &f, &lb, &rb, &sb).to_string(), "32*z^2+9*z");

        let f1 = find_mprf(&p, &s, ts[1], &scc, 1, &ctx).found().unwrap();
        let l1 = Location::new("l1");
        let lb1 = local_bound(&f1, &[l1.clone()].into_iter().collect(), p.program_vars());
        assert_eq!(lb1.per_location[&l1].to_string(), "z");
    }

    #[test]
    fn verification_rejects_bad_witnesses() {
        let p = parse_program(TWO_PHASE).unwrap();
        let s = Solver::default();
        let t = ids(&p)[1];
        let l1 = Location::new("l1");
        let bad = MultiphaseRankingFunction {
            depth: 1,
            functions: vec![[(l1, Polynomial::var(Var::new("x")))].into_iter().collect()],
            decreasing: [t].into_iter().collect(),
            scope: [t].into_iter().collect(),
        };
        assert!(!verify(&p, &s, &bad));
    }
}
