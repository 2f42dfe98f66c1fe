//! Fourier–Motzkin projection and affine strongest postconditions over
//! linear integer constraints.

use std::collections::{BTreeMap, BTreeSet};

use crate::program::{Atom, Constraint, Monomial, Polynomial, Transition, Var};

/// Atoms kept per projected constraint; the rest are dropped (a sound weakening).
pub const MAX_ATOMS: usize = 64;

const COEFF_LIMIT: i128 = 1 << 40;

/// `Σ coeffs·v + constant ≤ 0` (or `= 0` for equalities).
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Lin {
    coeffs: BTreeMap<Var, i128>,
    constant: i128,
}

impl Lin {
    fn from_poly(p: &Polynomial) -> Option<Lin> {
        if !p.is_linear() {
            return None;
        }
        let mut coeffs = BTreeMap::new();
        for (m, c) in p.terms() {
            if let Some(v) = m.as_var() {
                coeffs.insert(v.clone(), c as i128);
            }
        }
        Some(Lin { coeffs, constant: p.constant_term() as i128 })
    }

    fn to_poly(&self) -> Option<Polynomial> {
        let fits = |c: i128| i64::try_from(c).ok();
        let mut terms = vec![(Monomial::one(), fits(self.constant)?)];
        for (v, c) in &self.coeffs {
            terms.push((Monomial::var(v.clone()), fits(*c)?));
        }
        Some(Polynomial::from_terms(terms))
    }

    fn coeff(&self, v: &Var) -> i128 {
        self.coeffs.get(v).copied().unwrap_or(0)
    }

    /// `a·self + b·other`, or `None` if coefficients grow too large.
    fn combine(&self, a: i128, other: &Lin, b: i128) -> Option<Lin> {
        let mut coeffs = BTreeMap::new();
        let keys: BTreeSet<&Var> = self.coeffs.keys().chain(other.coeffs.keys()).collect();
        for v in keys {
            let c = a.checked_mul(self.coeff(v))?.checked_add(b.checked_mul(other.coeff(v))?)?;
            if c.abs() > COEFF_LIMIT {
                return None;
            }
            if c != 0 {
                coeffs.insert(v.clone(), c);
            }
        }
        let constant = a.checked_mul(self.constant)?.checked_add(b.checked_mul(other.constant)?)?;
        if constant.abs() > COEFF_LIMIT {
            return None;
        }
        Some(Lin { coeffs, constant })
    }

    /// Replaces `v` by `e` (given as `v = e`).
    fn substitute(&self, v: &Var, e: &Lin) -> Option<Lin> {
        let c = self.coeff(v);
        if c == 0 {
            return Some(self.clone());
        }
        let mut base = self.clone();
        base.coeffs.remove(v);
        base.combine(1, e, c)
    }
}

/// A system of linear inequalities `≤ 0` and equalities `= 0`.
#[derive(Clone, Debug, Default)]
struct System {
    ineqs: Vec<Lin>,
    eqs: Vec<Lin>,
}

impl System {
    fn from_constraint(c: &Constraint) -> System {
        let mut s = System::default();
        let mut seen = BTreeSet::new();
        let atoms: Vec<Lin> = c.linear_atoms().filter_map(|a| Lin::from_poly(a.poly())).collect();
        for a in &atoms {
            // Opposite atom pairs are equalities.
            let neg = a.combine(-1, a, 0).unwrap();
            if atoms.contains(&neg) {
                let key = if a < &neg { a.clone() } else { neg.clone() };
                if seen.insert(key.clone()) {
                    s.eqs.push(key);
                }
            } else {
                s.ineqs.push(a.clone());
            }
        }
        s
    }

    /// Eliminates `v` from the system.
    fn eliminate(&mut self, v: &Var) {
        // Prefer a Gaussian step on an equality with a unit coefficient on v.
        if let Some(i) = self.eqs.iter().position(|e| e.coeff(v).abs() == 1) {
            let e = self.eqs.remove(i);
            let c = e.coeff(v);
            // v = -(e - c·v)/c
            let mut rest = e.clone();
            rest.coeffs.remove(v);
            let value = rest.combine(-c, &rest, 0).unwrap();
            self.ineqs = self.ineqs.iter().filter_map(|a| a.substitute(v, &value)).collect();
            self.eqs = self.eqs.iter().filter_map(|a| a.substitute(v, &value)).collect();
            return;
        }
        // Remaining equalities mentioning v become inequality pairs.
        let (with, without): (Vec<Lin>, Vec<Lin>) = self.eqs.drain(..).partition(|e| e.coeff(v) != 0);
        self.eqs = without;
        for e in with {
            self.ineqs.push(e.combine(-1, &e, 0).unwrap());
            self.ineqs.push(e);
        }
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        let mut rest = Vec::new();
        for a in self.ineqs.drain(..) {
            match a.coeff(v).signum() {
                1 => upper.push(a),
                -1 => lower.push(a),
                _ => rest.push(a),
            }
        }
        for u in &upper {
            for l in &lower {
                let cu = u.coeff(v);
                let cl = -l.coeff(v);
                if let Some(mut comb) = u.combine(cl, l, cu) {
                    comb.coeffs.remove(v);
                    rest.push(comb);
                }
            }
        }
        self.ineqs = rest;
        self.normalize();
    }

    fn normalize(&mut self) {
        let mut out: BTreeSet<Lin> = BTreeSet::new();
        for a in self.ineqs.drain(..) {
            if let Some(p) = a.to_poly() {
                let at = Atom::le_zero(p);
                if at.is_trivially_true() {
                    continue;
                }
                if let Some(l) = Lin::from_poly(at.poly()) {
                    out.insert(l);
                }
            }
        }
        self.ineqs = out.into_iter().collect();
        if self.ineqs.len() > 4 * MAX_ATOMS {
            self.ineqs.truncate(4 * MAX_ATOMS);
        }
    }

    fn to_constraint(&self) -> Constraint {
        let mut atoms = Vec::new();
        for e in &self.eqs {
            if let Some(p) = e.to_poly() {
                atoms.push(Atom::le_zero(p.clone()));
                atoms.push(Atom::le_zero(p.neg()));
            }
        }
        for a in &self.ineqs {
            if let Some(p) = a.to_poly() {
                atoms.push(Atom::le_zero(p));
            }
        }
        let c = Constraint::from_atoms(atoms);
        if c.has_false_atom() {
            return Constraint::from_atoms([Atom::falsum()]);
        }
        if c.atoms().len() > MAX_ATOMS {
            return Constraint::from_atoms(c.atoms()[..MAX_ATOMS].iter().cloned());
        }
        c
    }
}

/// Projects the linear part of `c` onto the variables satisfying `keep`.
/// Nonlinear atoms are dropped.
pub fn project(c: &Constraint, keep: impl Fn(&Var) -> bool) -> Constraint {
    let mut s = System::from_constraint(c);
    let elim: Vec<Var> = c.vars().into_iter().filter(|v| !keep(v)).collect();
    for v in &elim {
        s.eliminate(v);
    }
    s.to_constraint()
}

/// An over-approximation of the states reachable by `t` from states
/// satisfying `phi`: every `σ ⊨ phi ∧ guard` yields `η(σ) ⊨ result`.
/// The result only mentions program variables.
pub fn propagate(phi: &Constraint, t: &Transition, program_vars: &[Var]) -> Constraint {
    let primed: BTreeMap<Var, Var> =
        program_vars.iter().map(|v| (v.clone(), Var::new(&format!("{}'post", v.name())))).collect();
    let pre = phi.and(&t.guard);
    let mut s = System::from_constraint(&pre);
    for v in program_vars {
        let up = t.update_of(v);
        if let Some(mut e) = Lin::from_poly(&up) {
            *e.coeffs.entry(primed[v].clone()).or_insert(0) -= 1;
            s.eqs.push(e);
        }
    }
    let mut old: BTreeSet<Var> = pre.vars();
    for p in t.update.values() {
        old.extend(p.vars());
    }
    old.extend(program_vars.iter().cloned());
    for v in &old {
        s.eliminate(v);
    }
    let back: BTreeMap<Var, Polynomial> =
        primed.iter().map(|(v, p)| (p.clone(), Polynomial::var(v.clone()))).collect();
    s.to_constraint().substitute(&back)
}
