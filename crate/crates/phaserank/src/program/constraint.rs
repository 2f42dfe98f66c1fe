use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::poly::{write_terms, Monomial, Polynomial, Var};

/// The atom `poly <= 0`, normalized for integer semantics.
///
/// Non-constant coefficients are divided by their gcd and the constant is
/// rounded up accordingly, so `2x - 3 <= 0` and `x - 1 <= 0` are identical.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Atom {
    poly: Polynomial,
}

impl Atom {
    /// `poly <= 0`.
    pub fn le_zero(poly: Polynomial) -> Atom {
        let g = poly.content();
        if g == 0 {
            // Constant atom: keep a canonical true (0 <= 0) or false (1 <= 0).
            let c = if poly.constant_term() <= 0 { 0 } else { 1 };
            return Atom { poly: Polynomial::constant(c) };
        }
        if g == 1 {
            return Atom { poly };
        }
        let c = poly.constant_term();
        let rest = poly.sub(&Polynomial::constant(c));
        let scaled = Polynomial::from_terms(rest.terms().map(|(m, k)| (m.clone(), k / g)));
        let tightened = num_integer::div_ceil(c, g);
        Atom { poly: scaled.add(&Polynomial::constant(tightened)) }
    }

    /// `lhs <= rhs`.
    pub fn le(lhs: &Polynomial, rhs: &Polynomial) -> Atom {
        Atom::le_zero(lhs.sub(rhs))
    }

    /// `lhs < rhs`, i.e. `lhs + 1 <= rhs`.
    pub fn lt(lhs: &Polynomial, rhs: &Polynomial) -> Atom {
        Atom::le_zero(lhs.sub(rhs).add(&Polynomial::constant(1)))
    }

    pub fn ge(lhs: &Polynomial, rhs: &Polynomial) -> Atom {
        Atom::le(rhs, lhs)
    }

    pub fn gt(lhs: &Polynomial, rhs: &Polynomial) -> Atom {
        Atom::lt(rhs, lhs)
    }

    pub fn falsum() -> Atom {
        Atom { poly: Polynomial::constant(1) }
    }

    pub fn poly(&self) -> &Polynomial {
        &self.poly
    }

    pub fn is_trivially_true(&self) -> bool {
        self.poly.is_constant() && self.poly.constant_term() <= 0
    }

    pub fn is_trivially_false(&self) -> bool {
        self.poly.is_constant() && self.poly.constant_term() > 0
    }

    pub fn is_linear(&self) -> bool {
        self.poly.is_linear()
    }

    /// The integer negation `poly >= 1`.
    pub fn negate(&self) -> Atom {
        Atom::le_zero(Polynomial::constant(1).sub(&self.poly))
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.poly.vars()
    }

    pub fn substitute(&self, map: &BTreeMap<Var, Polynomial>) -> Atom {
        Atom::le_zero(self.poly.substitute(map))
    }

    pub fn holds(&self, lookup: impl Fn(&Var) -> Option<i64>) -> Option<bool> {
        self.poly.eval(lookup).map(|v| v <= 0)
    }

    /// Deterministic identifier-safe rendering used for labeled location names,
    /// e.g. `x_lt_0` for `x < 0` and `y_m_z_ge_0` for `y - z >= 0`.
    pub fn mangle(&self) -> String {
        let terms: Vec<(&Monomial, i64)> =
            self.poly.ordered_terms().into_iter().filter(|(m, _)| !m.is_one()).collect();
        let k = self.poly.constant_term();
        if terms.is_empty() {
            return if k <= 0 { "true".into() } else { "false".into() };
        }
        // lin + k <= 0; flip so the leading coefficient is positive.
        let flip = terms[0].1 < 0;
        let sign = if flip { -1 } else { 1 };
        let mut lin = String::new();
        for (i, (m, c)) in terms.iter().enumerate() {
            let c = c * sign;
            if i > 0 {
                lin.push_str(if c < 0 { "_m_" } else { "_p_" });
            }
            let mag = c.unsigned_abs();
            if mag != 1 {
                lin.push_str(&mag.to_string());
            }
            let names: Vec<&str> = m
                .factors()
                .iter()
                .flat_map(|(v, e)| std::iter::repeat(v.name()).take(*e as usize))
                .collect();
            lin.push_str(&names.join("_t_"));
        }
        let num = |n: i64| if n < 0 { format!("m{}", n.unsigned_abs()) } else { n.to_string() };
        if !flip {
            let r = -k;
            if r < 0 {
                format!("{lin}_lt_{}", num(r + 1))
            } else {
                format!("{lin}_le_{}", num(r))
            }
        } else {
            let s = k;
            if s > 0 {
                format!("{lin}_gt_{}", num(s - 1))
            } else {
                format!("{lin}_ge_{}", num(s))
            }
        }
    }

    /// Splits into `lhs <= rhs` with positive coefficients on both sides.
    fn sides(&self) -> (Vec<(Monomial, i64)>, Vec<(Monomial, i64)>) {
        let mut lhs = Vec::new();
        let mut rhs = Vec::new();
        for (m, c) in self.poly.ordered_terms() {
            if c > 0 {
                lhs.push((m.clone(), c));
            } else {
                rhs.push((m.clone(), -c));
            }
        }
        (lhs, rhs)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (lhs, rhs) = self.sides();
        let l: Vec<_> = lhs.iter().map(|(m, c)| (m, *c)).collect();
        let r: Vec<_> = rhs.iter().map(|(m, c)| (m, *c)).collect();
        write_terms(f, &l)?;
        f.write_str(" <= ")?;
        write_terms(f, &r)
    }
}

impl fmt::Debug for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Conjunction of atoms, kept sorted and without trivially true atoms.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Constraint {
    atoms: Vec<Atom>,
}

impl Constraint {
    pub fn truth() -> Self {
        Constraint::default()
    }

    pub fn from_atoms(atoms: impl IntoIterator<Item = Atom>) -> Self {
        let set: BTreeSet<Atom> = atoms.into_iter().filter(|a| !a.is_trivially_true()).collect();
        Constraint { atoms: set.into_iter().collect() }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_true(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn has_false_atom(&self) -> bool {
        self.atoms.iter().any(Atom::is_trivially_false)
    }

    pub fn and(&self, other: &Constraint) -> Constraint {
        Constraint::from_atoms(self.atoms.iter().chain(other.atoms.iter()).cloned())
    }

    pub fn with(&self, atom: Atom) -> Constraint {
        Constraint::from_atoms(self.atoms.iter().cloned().chain(std::iter::once(atom)))
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.atoms.iter().flat_map(|a| a.vars()).collect()
    }

    pub fn is_linear(&self) -> bool {
        self.atoms.iter().all(Atom::is_linear)
    }

    pub fn linear_atoms(&self) -> impl Iterator<Item = &Atom> {
        self.atoms.iter().filter(|a| a.is_linear())
    }

    pub fn substitute(&self, map: &BTreeMap<Var, Polynomial>) -> Constraint {
        Constraint::from_atoms(self.atoms.iter().map(|a| a.substitute(map)))
    }

    pub fn holds(&self, lookup: impl Fn(&Var) -> Option<i64>) -> Option<bool> {
        for a in &self.atoms {
            if !a.holds(&lookup)? {
                return Some(false);
            }
        }
        Some(true)
    }

    pub fn mangle(&self) -> String {
        if self.atoms.is_empty() {
            return "true".into();
        }
        self.atoms.iter().map(Atom::mangle).collect::<Vec<_>>().join("__")
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.is_empty() {
            return f.write_str("true");
        }
        for (i, a) in self.atoms.iter().enumerate() {
            if i > 0 {
                f.write_str(" && ")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(n: &str) -> Polynomial {
        Polynomial::var(Var::new(n))
    }
    fn c(k: i64) -> Polynomial {
        Polynomial::constant(k)
    }

    #[test]
    fn strict_becomes_shifted() {
        assert_eq!(Atom::gt(&v("x"), &c(0)), Atom::le(&c(1), &v("x")));
        assert_eq!(Atom::gt(&v("x"), &c(0)).to_string(), "1 <= x");
    }

    #[test]
    fn gcd_tightening() {
        let a = Atom::le_zero(v("x").scale(2).sub(&c(3)));
        assert_eq!(a, Atom::le(&v("x"), &c(1)));
        let b = Atom::le_zero(v("x").scale(-2).add(&c(3)));
        assert_eq!(b, Atom::le(&c(2), &v("x")));
    }

    #[test]
    fn negation_is_integer_complement() {
        let a = Atom::le(&v("x"), &c(3));
        assert_eq!(a.negate(), Atom::le(&c(4), &v("x")));
    }

    #[test]
    fn constraint_drops_trivial_and_sorts() {
        let k = Constraint::from_atoms([Atom::le(&v("y"), &c(0)), Atom::le(&c(0), &c(0)), Atom::le(&v("x"), &c(0))]);
        assert_eq!(k.atoms().len(), 2);
        let k2 = Constraint::from_atoms([Atom::le(&v("x"), &c(0)), Atom::le(&v("y"), &c(0))]);
        assert_eq!(k, k2);
    }

    #[test]
    fn mangled_names_are_identifiers() {
        let a = Atom::lt(&v("x"), &c(0));
        assert_eq!(a.mangle(), "x_lt_0");
        assert_eq!(Atom::ge(&v("y"), &v("z")).mangle(), "y_m_z_ge_0");
        assert_eq!(Atom::le(&v("x"), &c(3)).mangle(), "x_le_3");
        assert_eq!(Atom::ge(&v("x"), &c(2)).mangle(), "x_gt_1");
        let k = Constraint::from_atoms([a, Atom::ge(&v("y"), &v("z"))]);
        assert!(k.mangle().chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_'));
    }
}
