use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

/// Interned variable name.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(Arc<str>);

impl Var {
    pub fn new(name: &str) -> Self {
        Var(Arc::from(name))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Var {
    fn from(s: &str) -> Self {
        Var::new(s)
    }
}

/// Product of variables with positive exponents, sorted by variable.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub struct Monomial(Vec<(Var, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(v: Var) -> Self {
        Monomial(vec![(v, 1)])
    }

    pub fn from_factors(factors: impl IntoIterator<Item = (Var, u32)>) -> Self {
        let mut map: BTreeMap<Var, u32> = BTreeMap::new();
        for (v, e) in factors {
            if e > 0 {
                *map.entry(v).or_insert(0) += e;
            }
        }
        Monomial(map.into_iter().collect())
    }

    pub fn factors(&self) -> &[(Var, u32)] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    /// The variable if this monomial is exactly one variable to the first power.
    pub fn as_var(&self) -> Option<&Var> {
        match self.0.as_slice() {
            [(v, 1)] => Some(v),
            _ => None,
        }
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial::from_factors(self.0.iter().chain(other.0.iter()).cloned())
    }
}

/// Polynomial with integer coefficients. Zero coefficients are never stored.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, i64>,
}

fn checked(v: Option<i64>) -> i64 {
    v.expect("polynomial coefficient overflow")
}

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial::default()
    }

    pub fn constant(c: i64) -> Self {
        let mut p = Polynomial::zero();
        p.add_term(Monomial::one(), c);
        p
    }

    pub fn var(v: Var) -> Self {
        let mut p = Polynomial::zero();
        p.add_term(Monomial::var(v), 1);
        p
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, i64)>) -> Self {
        let mut p = Polynomial::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn add_term(&mut self, m: Monomial, c: i64) {
        if c == 0 {
            return;
        }
        let entry = self.terms.entry(m.clone()).or_insert(0);
        *entry = checked(entry.checked_add(c));
        if *entry == 0 {
            self.terms.remove(&m);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, i64)> {
        self.terms.iter().map(|(m, c)| (m, *c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn constant_term(&self) -> i64 {
        self.terms.get(&Monomial::one()).copied().unwrap_or(0)
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(Monomial::is_one)
    }

    pub fn degree(&self) -> u32 {
        self.terms.keys().map(Monomial::degree).max().unwrap_or(0)
    }

    pub fn is_linear(&self) -> bool {
        self.degree() <= 1
    }

    /// Coefficient of the degree-one monomial `v`.
    pub fn coeff(&self, v: &Var) -> i64 {
        self.terms.get(&Monomial::var(v.clone())).copied().unwrap_or(0)
    }

    pub fn as_var(&self) -> Option<&Var> {
        if self.terms.len() != 1 {
            return None;
        }
        let (m, c) = self.terms.iter().next()?;
        if *c == 1 {
            m.as_var()
        } else {
            None
        }
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.terms
            .keys()
            .flat_map(|m| m.factors().iter().map(|(v, _)| v.clone()))
            .collect()
    }

    pub fn mentions(&self, v: &Var) -> bool {
        self.terms.keys().any(|m| m.factors().iter().any(|(w, _)| w == v))
    }

    pub fn scale(&self, k: i64) -> Polynomial {
        Polynomial::from_terms(self.terms.iter().map(|(m, c)| (m.clone(), checked(c.checked_mul(k)))))
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let mut p = self.clone();
        for (m, c) in &other.terms {
            p.add_term(m.clone(), *c);
        }
        p
    }

    pub fn sub(&self, other: &Polynomial) -> Polynomial {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Polynomial {
        self.scale(-1)
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut p = Polynomial::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &other.terms {
                p.add_term(m1.mul(m2), checked(c1.checked_mul(*c2)));
            }
        }
        p
    }

    pub fn pow(&self, e: u32) -> Polynomial {
        let mut acc = Polynomial::constant(1);
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    /// Simultaneous substitution; unmapped variables stay as they are.
    pub fn substitute(&self, map: &BTreeMap<Var, Polynomial>) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m, c) in &self.terms {
            let mut term = Polynomial::constant(*c);
            for (v, e) in m.factors() {
                let base = map.get(v).cloned().unwrap_or_else(|| Polynomial::var(v.clone()));
                term = term.mul(&base.pow(*e));
            }
            out = out.add(&term);
        }
        out
    }

    pub fn rename(&self, map: &BTreeMap<Var, Var>) -> Polynomial {
        let sub = map.iter().map(|(k, v)| (k.clone(), Polynomial::var(v.clone()))).collect();
        self.substitute(&sub)
    }

    /// Evaluates under `lookup`; `None` on a missing variable or i128 overflow.
    pub fn eval(&self, lookup: impl Fn(&Var) -> Option<i64>) -> Option<i128> {
        let mut acc: i128 = 0;
        for (m, c) in &self.terms {
            let mut t: i128 = *c as i128;
            for (v, e) in m.factors() {
                let x = lookup(v)? as i128;
                for _ in 0..*e {
                    t = t.checked_mul(x)?;
                }
            }
            acc = acc.checked_add(t)?;
        }
        Some(acc)
    }

    /// Greatest common divisor of the non-constant coefficients (0 if none).
    pub fn content(&self) -> i64 {
        self.terms
            .iter()
            .filter(|(m, _)| !m.is_one())
            .fold(0i64, |g, (_, c)| num_integer::gcd(g, *c))
    }

    /// Monomials in printing order: higher degree first, then lexicographic.
    pub fn ordered_terms(&self) -> Vec<(&Monomial, i64)> {
        let mut v: Vec<_> = self.terms().collect();
        v.sort_by(|(a, _), (b, _)| b.degree().cmp(&a.degree()).then_with(|| graded_lex(a, b)));
        v
    }
}

/// Among equal degrees: `x^2` before `x*y` before `y^2`.
pub(crate) fn graded_lex(a: &Monomial, b: &Monomial) -> std::cmp::Ordering {
    for (fa, fb) in a.factors().iter().zip(b.factors()) {
        let ord = fa.0.cmp(&fb.0).then_with(|| fb.1.cmp(&fa.1));
        if ord != std::cmp::Ordering::Equal {
            return ord;
        }
    }
    b.factors().len().cmp(&a.factors().len())
}

fn write_monomial(f: &mut fmt::Formatter<'_>, m: &Monomial) -> fmt::Result {
    let mut first = true;
    for (v, e) in m.factors() {
        for _ in 0..*e {
            if !first {
                f.write_str("*")?;
            }
            write!(f, "{v}")?;
            first = false;
        }
    }
    Ok(())
}

/// Writes a sum of terms in ITS syntax (`2*x*y + x - 3`).
pub(crate) fn write_terms(f: &mut fmt::Formatter<'_>, terms: &[(&Monomial, i64)]) -> fmt::Result {
    if terms.is_empty() {
        return f.write_str("0");
    }
    for (i, (m, c)) in terms.iter().enumerate() {
        let (sign, mag) = if *c < 0 { ("-", c.unsigned_abs()) } else { ("+", *c as u64) };
        if i == 0 {
            if sign == "-" {
                f.write_str("-")?;
            }
        } else {
            write!(f, " {sign} ")?;
        }
        if m.is_one() {
            write!(f, "{mag}")?;
        } else {
            if mag != 1 {
                write!(f, "{mag}*")?;
            }
            write_monomial(f, m)?;
        }
    }
    Ok(())
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_terms(f, &self.ordered_terms())
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Polynomial {
        Polynomial::var(Var::new("x"))
    }
    fn y() -> Polynomial {
        Polynomial::var(Var::new("y"))
    }

    #[test]
    fn cancellation_leaves_no_zero_terms() {
        let p = x().add(&y()).sub(&x());
        assert_eq!(p, y());
        assert!(x().sub(&x()).is_zero());
    }

    #[test]
    fn product_and_printing() {
        let p = x().add(&Polynomial::constant(1)).mul(&x().sub(&y()));
        assert_eq!(p.to_string(), "x*x - x*y + x - y");
        assert_eq!(p.degree(), 2);
    }

    #[test]
    fn substitution_is_simultaneous() {
        let mut m = BTreeMap::new();
        m.insert(Var::new("x"), y());
        m.insert(Var::new("y"), x());
        assert_eq!(x().sub(&y()).substitute(&m), y().sub(&x()));
    }

    #[test]
    fn eval_and_content() {
        let p = x().scale(4).add(&y().scale(6)).add(&Polynomial::constant(3));
        assert_eq!(p.content(), 2);
        let v = p.eval(|v| if v.name() == "x" { Some(1) } else { Some(-2) });
        assert_eq!(v, Some(-5));
    }
}
