//! Monotone bounds over natural numbers extended with ω: polynomials with
//! natural coefficients over program variables, plus exponentials `k^b`.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::program::{Polynomial, Var};

/// Exponents beyond this are treated as ω when folding or evaluating.
const MAX_FOLDED_EXPONENT: u64 = 1 << 16;

/// A natural number or ω.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExtNat {
    Fin(BigUint),
    Omega,
}

impl ExtNat {
    pub fn fin(n: u64) -> Self {
        ExtNat::Fin(BigUint::from(n))
    }

    pub fn add(&self, o: &ExtNat) -> ExtNat {
        match (self, o) {
            (ExtNat::Fin(a), ExtNat::Fin(b)) => ExtNat::Fin(a + b),
            _ => ExtNat::Omega,
        }
    }

    pub fn mul(&self, o: &ExtNat) -> ExtNat {
        match (self, o) {
            (ExtNat::Fin(a), ExtNat::Fin(b)) => ExtNat::Fin(a * b),
            (ExtNat::Fin(a), _) | (_, ExtNat::Fin(a)) if a.is_zero() => ExtNat::fin(0),
            _ => ExtNat::Omega,
        }
    }

    fn pow(base: u64, e: &ExtNat) -> ExtNat {
        match (base, e) {
            (0, ExtNat::Fin(n)) if n.is_zero() => ExtNat::fin(1),
            (0, _) => ExtNat::fin(0),
            (1, _) => ExtNat::fin(1),
            (_, ExtNat::Omega) => ExtNat::Omega,
            (k, ExtNat::Fin(n)) => match n.to_u64() {
                Some(n) if n <= MAX_FOLDED_EXPONENT => ExtNat::Fin(BigUint::from(k).pow(n as u32)),
                _ => ExtNat::Omega,
            },
        }
    }

    pub fn is_omega(&self) -> bool {
        matches!(self, ExtNat::Omega)
    }

    /// Whether `n <= self`.
    pub fn admits(&self, n: u128) -> bool {
        match self {
            ExtNat::Omega => true,
            ExtNat::Fin(b) => BigUint::from(n) <= *b,
        }
    }
}

impl fmt::Display for ExtNat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtNat::Fin(n) => write!(f, "{n}"),
            ExtNat::Omega => f.write_str("INF"),
        }
    }
}

/// Product of variable powers and exponentials `k^e` (k ≥ 2, e without constant term).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
struct Term {
    vars: Vec<(Var, u32)>,
    exps: Vec<(u64, Poly)>,
}

impl Term {
    fn degree(&self) -> u32 {
        self.vars.iter().map(|(_, e)| e).sum()
    }

    fn mul(&self, o: &Term) -> Term {
        let mut vars: BTreeMap<Var, u32> = BTreeMap::new();
        for (v, e) in self.vars.iter().chain(&o.vars) {
            *vars.entry(v.clone()).or_insert(0) += e;
        }
        let mut exps: BTreeMap<u64, Poly> = BTreeMap::new();
        for (k, e) in self.exps.iter().chain(&o.exps) {
            let acc = exps.entry(*k).or_default();
            *acc = acc.add(e);
        }
        Term { vars: vars.into_iter().collect(), exps: exps.into_iter().collect() }
    }
}

/// Finite part of a bound: natural-coefficient sum of terms; no zero coefficients.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
struct Poly {
    terms: BTreeMap<Term, BigUint>,
}

impl Poly {
    fn constant(n: BigUint) -> Poly {
        let mut p = Poly::default();
        if !n.is_zero() {
            p.terms.insert(Term::default(), n);
        }
        p
    }

    fn add_term(&mut self, t: Term, c: BigUint) {
        if c.is_zero() {
            return;
        }
        *self.terms.entry(t).or_default() += c;
    }

    fn add(&self, o: &Poly) -> Poly {
        let mut p = self.clone();
        for (t, c) in &o.terms {
            p.add_term(t.clone(), c.clone());
        }
        p
    }

    fn mul(&self, o: &Poly) -> Poly {
        let mut p = Poly::default();
        for (t1, c1) in &self.terms {
            for (t2, c2) in &o.terms {
                p.add_term(t1.mul(t2), c1 * c2);
            }
        }
        p
    }

    fn constant_part(&self) -> BigUint {
        self.terms.get(&Term::default()).cloned().unwrap_or_default()
    }

    fn without_constant(&self) -> Poly {
        let mut p = self.clone();
        p.terms.remove(&Term::default());
        p
    }

    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

/// An element of the bound domain.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Bound(Option<Poly>);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BoundError {
    #[error("variable {0} is not assigned")]
    Unassigned(Var),
    #[error("{0} is not a program variable")]
    NotProgramVar(Var),
}

impl Bound {
    pub fn omega() -> Bound {
        Bound(None)
    }

    pub fn constant(n: u64) -> Bound {
        Bound(Some(Poly::constant(BigUint::from(n))))
    }

    pub fn constant_big(n: BigUint) -> Bound {
        Bound(Some(Poly::constant(n)))
    }

    pub fn zero() -> Bound {
        Bound::constant(0)
    }

    pub fn one() -> Bound {
        Bound::constant(1)
    }

    pub fn var(v: Var) -> Bound {
        let mut p = Poly::default();
        p.add_term(Term { vars: vec![(v, 1)], exps: vec![] }, BigUint::one());
        Bound(Some(p))
    }

    pub fn is_omega(&self) -> bool {
        self.0.is_none()
    }

    pub fn is_finite(&self) -> bool {
        self.0.is_some()
    }

    pub fn is_zero(&self) -> bool {
        matches!(&self.0, Some(p) if p.is_zero())
    }

    pub fn as_constant(&self) -> Option<BigUint> {
        match &self.0 {
            Some(p) if p.terms.keys().all(|t| *t == Term::default()) => Some(p.constant_part()),
            _ => None,
        }
    }

    pub fn add(&self, o: &Bound) -> Bound {
        match (&self.0, &o.0) {
            (Some(a), Some(b)) => Bound(Some(a.add(b))),
            _ => Bound::omega(),
        }
    }

    pub fn mul(&self, o: &Bound) -> Bound {
        if self.is_zero() || o.is_zero() {
            return Bound::zero();
        }
        match (&self.0, &o.0) {
            (Some(a), Some(b)) => Bound(Some(a.mul(b))),
            _ => Bound::omega(),
        }
    }

    pub fn scale(&self, k: u64) -> Bound {
        self.mul(&Bound::constant(k))
    }

    pub fn pow(&self, e: u32) -> Bound {
        let mut acc = Bound::one();
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn sum<'a>(items: impl IntoIterator<Item = &'a Bound>) -> Bound {
        items.into_iter().fold(Bound::zero(), |acc, b| acc.add(b))
    }

    /// `k^e`. Bases 0 and 1 fold to the constant 1 (an upper bound for `0^e`).
    pub fn exp(k: u64, e: &Bound) -> Bound {
        if k <= 1 {
            return Bound::one();
        }
        let Some(p) = &e.0 else { return Bound::omega() };
        let c = p.constant_part();
        let coeff = match c.to_u64() {
            Some(c) if c <= MAX_FOLDED_EXPONENT => BigUint::from(k).pow(c as u32),
            _ => return Bound::omega(),
        };
        let rest = p.without_constant();
        let mut out = Poly::default();
        if rest.is_zero() {
            out.add_term(Term::default(), coeff);
        } else {
            out.add_term(Term { vars: vec![], exps: vec![(k, rest)] }, coeff);
        }
        Bound(Some(out))
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        fn collect(p: &Poly, out: &mut BTreeSet<Var>) {
            for t in p.terms.keys() {
                out.extend(t.vars.iter().map(|(v, _)| v.clone()));
                for (_, e) in &t.exps {
                    collect(e, out);
                }
            }
        }
        let mut out = BTreeSet::new();
        if let Some(p) = &self.0 {
            collect(p, &mut out);
        }
        out
    }

    /// Replaces each variable by a bound. Variables missing from `m` are kept.
    pub fn substitute(&self, m: &BTreeMap<Var, Bound>) -> Bound {
        self.substitute_with(&|v| m.get(v).cloned().unwrap_or_else(|| Bound::var(v.clone())))
    }

    pub fn substitute_with(&self, m: &dyn Fn(&Var) -> Bound) -> Bound {
        let Some(p) = &self.0 else { return Bound::omega() };
        subst_poly(p, m)
    }

    /// Evaluates under `|s|`, i.e. with every variable replaced by its absolute value.
    pub fn eval_abs(&self, s: &dyn Fn(&Var) -> Option<i64>) -> Result<ExtNat, BoundError> {
        let Some(p) = &self.0 else { return Ok(ExtNat::Omega) };
        eval_poly(p, s)
    }

    pub fn eval_state(&self, s: &BTreeMap<Var, i64>) -> Result<ExtNat, BoundError> {
        self.eval_abs(&|v| s.get(v).copied())
    }

    pub fn classify(&self) -> AsymptoticClass {
        match &self.0 {
            None => AsymptoticClass::Infinite,
            Some(p) if p.terms.keys().any(|t| !t.exps.is_empty()) => AsymptoticClass::Exponential,
            Some(p) => AsymptoticClass::Polynomial(p.terms.keys().map(Term::degree).max().unwrap_or(0)),
        }
    }
}

fn subst_poly(p: &Poly, m: &dyn Fn(&Var) -> Bound) -> Bound {
    let mut acc = Bound::zero();
    for (t, c) in &p.terms {
        let mut prod = Bound::constant_big(c.clone());
        for (v, e) in &t.vars {
            prod = prod.mul(&m(v).pow(*e));
        }
        for (k, e) in &t.exps {
            prod = prod.mul(&Bound::exp(*k, &subst_poly(e, m)));
        }
        acc = acc.add(&prod);
    }
    acc
}

fn eval_poly(p: &Poly, s: &dyn Fn(&Var) -> Option<i64>) -> Result<ExtNat, BoundError> {
    let mut acc = ExtNat::fin(0);
    for (t, c) in &p.terms {
        let mut prod = ExtNat::Fin(c.clone());
        for (v, e) in &t.vars {
            let x = s(v).ok_or_else(|| BoundError::Unassigned(v.clone()))?;
            prod = prod.mul(&ExtNat::Fin(BigUint::from(x.unsigned_abs()).pow(*e)));
        }
        for (k, e) in &t.exps {
            prod = prod.mul(&ExtNat::pow(*k, &eval_poly(e, s)?));
        }
        acc = acc.add(&prod);
    }
    Ok(acc)
}

/// `⌈p⌉`: every coefficient replaced by its absolute value.
pub fn overapprox_poly(p: &Polynomial, program_vars: &[Var]) -> Result<Bound, BoundError> {
    let mut out = Poly::default();
    for (m, c) in p.terms() {
        for (v, _) in m.factors() {
            if !program_vars.contains(v) {
                return Err(BoundError::NotProgramVar(v.clone()));
            }
        }
        out.add_term(Term { vars: m.factors().to_vec(), exps: vec![] }, BigUint::from(c.unsigned_abs()));
    }
    Ok(Bound(Some(out)))
}

/// Asymptotic class in terms of the largest initial absolute value n.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum AsymptoticClass {
    /// `O(n^d)`; degree 0 is `O(1)`.
    Polynomial(u32),
    Exponential,
    Infinite,
}

impl AsymptoticClass {
    pub fn is_finite(self) -> bool {
        self != AsymptoticClass::Infinite
    }

    /// Constant or linear.
    pub fn is_at_most_linear(self) -> bool {
        matches!(self, AsymptoticClass::Polynomial(d) if d <= 1)
    }
}

impl fmt::Display for AsymptoticClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AsymptoticClass::Polynomial(0) => f.write_str("O(1)"),
            AsymptoticClass::Polynomial(1) => f.write_str("O(n)"),
            AsymptoticClass::Polynomial(d) => write!(f, "O(n^{d})"),
            AsymptoticClass::Exponential => f.write_str("O(EXP)"),
            AsymptoticClass::Infinite => f.write_str("INF"),
        }
    }
}

impl Serialize for AsymptoticClass {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

fn term_order(a: &Term, b: &Term) -> Ordering {
    let ea = !a.exps.is_empty();
    let eb = !b.exps.is_empty();
    eb.cmp(&ea)
        .then_with(|| b.degree().cmp(&a.degree()))
        .then_with(|| {
            for (fa, fb) in a.vars.iter().zip(&b.vars) {
                let o = fa.0.cmp(&fb.0).then_with(|| fb.1.cmp(&fa.1));
                if o != Ordering::Equal {
                    return o;
                }
            }
            b.vars.len().cmp(&a.vars.len())
        })
        .then_with(|| a.cmp(b))
}

fn write_poly(f: &mut fmt::Formatter<'_>, p: &Poly) -> fmt::Result {
    if p.is_zero() {
        return f.write_str("0");
    }
    let mut terms: Vec<(&Term, &BigUint)> = p.terms.iter().collect();
    terms.sort_by(|a, b| term_order(a.0, b.0));
    for (i, (t, c)) in terms.iter().enumerate() {
        if i > 0 {
            f.write_str("+")?;
        }
        let mut factors: Vec<String> = Vec::new();
        if !c.is_one() || (t.vars.is_empty() && t.exps.is_empty()) {
            factors.push(c.to_string());
        }
        for (v, e) in &t.vars {
            factors.push(if *e == 1 { v.to_string() } else { format!("{v}^{e}") });
        }
        for (k, e) in &t.exps {
            factors.push(format!("{k}^({})", PolyDisplay(e)));
        }
        f.write_str(&factors.join("*"))?;
    }
    Ok(())
}

struct PolyDisplay<'a>(&'a Poly);

impl fmt::Display for PolyDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_poly(f, self.0)
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.0 {
            None => f.write_str("INF"),
            Some(p) => write_poly(f, p),
        }
    }
}

impl Serialize for Bound {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &str) -> Bound {
        Bound::var(Var::new(n))
    }
    fn c(n: u64) -> Bound {
        Bound::constant(n)
    }
    fn state(pairs: &[(&str, i64)]) -> BTreeMap<Var, i64> {
        pairs.iter().map(|(n, x)| (Var::new(n), *x)).collect()
    }

    #[test]
    fn eval_abs_examples() {
        let s = state(&[("x", 1), ("y", -2)]);
        assert_eq!(v("x").add(&v("y")).eval_state(&s).unwrap(), ExtNat::fin(3));
        assert_eq!(Bound::omega().eval_state(&s).unwrap(), ExtNat::Omega);
        let e = Bound::exp(2, &v("x").pow(2).add(&v("y")));
        assert_eq!(e.eval_state(&state(&[("x", 2), ("y", 1)])).unwrap(), ExtNat::fin(32));
        assert!(v("q").eval_state(&s).is_err());
    }

    #[test]
    fn overapprox_examples() {
        let x = Polynomial::var(Var::new("x"));
        let y = Polynomial::var(Var::new("y"));
        let pv = [Var::new("x"), Var::new("y")];
        let p = x.neg().add(&Polynomial::constant(2));
        assert_eq!(overapprox_poly(&p, &pv).unwrap(), v("x").add(&c(2)));
        assert_eq!(overapprox_poly(&Polynomial::zero(), &pv).unwrap(), c(0));
        let q = x.scale(3).sub(&y.scale(5)).add(&x.mul(&y));
        assert_eq!(overapprox_poly(&q, &pv).unwrap().to_string(), "x*y+3*x+5*y");
        assert!(overapprox_poly(&Polynomial::var(Var::new("u")), &pv).is_err());
    }

    #[test]
    fn substitute_examples() {
        let b = c(8).mul(&v("x")).add(&c(8).mul(&v("y"))).add(&c(9));
        let mut m = BTreeMap::new();
        m.insert(Var::new("x"), c(2).mul(&v("z")));
        m.insert(Var::new("y"), c(2).mul(&v("z")));
        assert_eq!(b.substitute(&m).to_string(), "32*z+9");
        assert_eq!(b.substitute(&BTreeMap::new()), b);
        let mut m2 = BTreeMap::new();
        m2.insert(Var::new("x"), Bound::omega());
        m2.insert(Var::new("y"), c(0));
        assert_eq!(v("x").mul(&v("y")).substitute(&m2), c(0));
    }

    #[test]
    fn add_mul_examples() {
        let z = v("z");
        let total = c(1).add(&z).add(&c(32).mul(&z.pow(2)).add(&c(9).mul(&z))).add(&z);
        assert_eq!(total.to_string(), "32*z^2+11*z+1");
        assert_eq!(total.mul(&c(1)), total);
        assert!(Bound::omega().add(&c(5)).is_omega());
        assert_eq!(Bound::omega().mul(&c(0)), c(0));
        assert!(Bound::omega().mul(&c(3)).is_omega());
    }

    #[test]
    fn classify_examples() {
        let z = v("z");
        let quad = c(32).mul(&z.pow(2)).add(&c(11).mul(&z)).add(&c(1));
        assert_eq!(quad.classify(), AsymptoticClass::Polynomial(2));
        assert_eq!(quad.classify().to_string(), "O(n^2)");
        assert_eq!(c(7).classify().to_string(), "O(1)");
        let lin = c(27).mul(&v("x")).add(&c(27).mul(&v("y"))).add(&c(27).mul(&z)).add(&c(56));
        assert_eq!(lin.classify().to_string(), "O(n)");
        assert_eq!(lin.to_string(), "27*x+27*y+27*z+56");
        assert_eq!(Bound::exp(2, &v("x")).classify(), AsymptoticClass::Exponential);
        assert_eq!(Bound::exp(2, &v("x")).to_string(), "2^(x)");
        assert_eq!(Bound::omega().to_string(), "INF");
        assert!(AsymptoticClass::Polynomial(3) < AsymptoticClass::Exponential);
    }

    #[test]
    fn exponentials_fold_constants_and_merge() {
        assert_eq!(Bound::exp(2, &c(5)), c(32));
        assert_eq!(Bound::exp(0, &v("x")), c(1));
        assert_eq!(Bound::exp(1, &Bound::omega()), c(1));
        let e = Bound::exp(2, &v("x").add(&c(1)));
        assert_eq!(e.to_string(), "2*2^(x)");
        let prod = Bound::exp(2, &v("x")).mul(&Bound::exp(2, &v("y")));
        assert_eq!(prod, Bound::exp(2, &v("x").add(&v("y"))));
    }
}
