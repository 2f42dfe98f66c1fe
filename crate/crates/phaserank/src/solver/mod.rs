//! Linear arithmetic queries: satisfiability (optionally with a minimized
//! objective) over rational- and integer-sorted unknowns, and integer
//! entailment between program constraints.

mod inprocess;
mod simplex;
mod smtlib;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};
use thiserror::Error;

use crate::program::{Atom, Constraint, Polynomial, Var};

pub use inprocess::InProcessBackend;
pub use smtlib::SmtLibBackend;

pub type Rat = BigRational;

pub fn rat(n: i64) -> Rat {
    BigRational::from_integer(BigInt::from(n))
}

/// `Σ coeffs·v + constant`.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct LinearExpr {
    pub coeffs: BTreeMap<Var, Rat>,
    pub constant: Rat,
}

impl LinearExpr {
    pub fn constant(c: Rat) -> Self {
        LinearExpr { coeffs: BTreeMap::new(), constant: c }
    }

    pub fn var(v: Var) -> Self {
        let mut e = LinearExpr::default();
        e.coeffs.insert(v, rat(1));
        e
    }

    pub fn add_term(&mut self, v: &Var, c: &Rat) {
        if c.is_zero() {
            return;
        }
        let e = self.coeffs.entry(v.clone()).or_insert_with(Rat::zero);
        *e += c;
        if e.is_zero() {
            self.coeffs.remove(v);
        }
    }

    pub fn add(&self, o: &LinearExpr) -> LinearExpr {
        let mut e = self.clone();
        for (v, c) in &o.coeffs {
            e.add_term(v, c);
        }
        e.constant += &o.constant;
        e
    }

    pub fn scale(&self, k: &Rat) -> LinearExpr {
        if k.is_zero() {
            return LinearExpr::default();
        }
        LinearExpr {
            coeffs: self.coeffs.iter().map(|(v, c)| (v.clone(), c * k)).collect(),
            constant: &self.constant * k,
        }
    }

    pub fn neg(&self) -> LinearExpr {
        self.scale(&rat(-1))
    }

    pub fn eval(&self, m: &BTreeMap<Var, Rat>) -> Rat {
        let mut acc = self.constant.clone();
        for (v, c) in &self.coeffs {
            if let Some(x) = m.get(v) {
                acc += c * x;
            }
        }
        acc
    }

    /// Linear polynomial as an expression; `None` if `p` is nonlinear.
    pub fn from_poly(p: &Polynomial) -> Option<LinearExpr> {
        if !p.is_linear() {
            return None;
        }
        let mut e = LinearExpr::constant(rat(p.constant_term()));
        for v in p.vars() {
            e.add_term(&v, &rat(p.coeff(&v)));
        }
        Some(e)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Lt,
    Eq,
}

/// `expr REL 0`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearAtom {
    pub expr: LinearExpr,
    pub relation: Relation,
}

impl LinearAtom {
    pub fn le(expr: LinearExpr) -> Self {
        LinearAtom { expr, relation: Relation::Le }
    }

    pub fn lt(expr: LinearExpr) -> Self {
        LinearAtom { expr, relation: Relation::Lt }
    }

    pub fn eq(expr: LinearExpr) -> Self {
        LinearAtom { expr, relation: Relation::Eq }
    }

    pub fn holds(&self, m: &BTreeMap<Var, Rat>) -> bool {
        let v = self.expr.eval(m);
        match self.relation {
            Relation::Le => !v.is_positive(),
            Relation::Lt => v.is_negative(),
            Relation::Eq => v.is_zero(),
        }
    }

    pub fn from_atom(a: &Atom) -> Option<LinearAtom> {
        LinearExpr::from_poly(a.poly()).map(LinearAtom::le)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sort {
    Real,
    Int,
}

/// A quantifier-free query: a conjunction of clauses, each a disjunction of atoms.
#[derive(Clone, Debug, Default)]
pub struct SolverQuery {
    pub vars: BTreeMap<Var, Sort>,
    pub assertions: Vec<Vec<LinearAtom>>,
    /// Minimized when present and supported by the backend.
    pub objective: Option<LinearExpr>,
}

impl SolverQuery {
    pub fn declare(&mut self, v: &Var, s: Sort) {
        self.vars.insert(v.clone(), s);
    }

    pub fn assert(&mut self, a: LinearAtom) {
        for v in a.expr.coeffs.keys() {
            self.vars.entry(v.clone()).or_insert(Sort::Real);
        }
        self.assertions.push(vec![a]);
    }

    pub fn assert_any(&mut self, clause: Vec<LinearAtom>) {
        for a in &clause {
            for v in a.expr.coeffs.keys() {
                self.vars.entry(v.clone()).or_insert(Sort::Real);
            }
        }
        self.assertions.push(clause);
    }

    /// Checks a model against every assertion and sort.
    pub fn check_model(&self, m: &BTreeMap<Var, Rat>) -> Result<(), String> {
        for (v, s) in &self.vars {
            if *s == Sort::Int && !m.get(v).map(|x| x.is_integer()).unwrap_or(true) {
                return Err(format!("{v} is not integral"));
            }
        }
        for (i, clause) in self.assertions.iter().enumerate() {
            if !clause.iter().any(|a| a.holds(m)) {
                return Err(format!("assertion {i} violated"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SatResult {
    Sat(BTreeMap<Var, Rat>),
    Unsat,
    Unknown(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolverError {
    #[error("solver process failed: {0}")]
    Process(String),
    #[error("unexpected solver output: {0}")]
    Protocol(String),
    #[error("solver returned an invalid model: {0}")]
    InvalidModel(String),
}

/// A decision procedure for [`SolverQuery`].
pub trait Backend: Send + Sync {
    fn name(&self) -> &str;
    fn check_sat(&self, q: &SolverQuery, timeout: Option<Duration>) -> Result<SatResult, SolverError>;
}

/// Shared solver handle: a backend, a per-query timeout, model checking and an
/// entailment cache.
#[derive(Clone)]
pub struct Solver {
    backend: Arc<dyn Backend>,
    timeout: Option<Duration>,
    cache: Arc<Mutex<HashMap<(Constraint, Atom), Option<bool>>>>,
}

impl fmt::Debug for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Solver").field("backend", &self.backend.name()).field("timeout", &self.timeout).finish()
    }
}

impl Default for Solver {
    fn default() -> Self {
        Solver::new(Arc::new(InProcessBackend::default()))
    }
}

impl Solver {
    pub fn new(backend: Arc<dyn Backend>) -> Self {
        Solver { backend, timeout: Some(Duration::from_secs(5)), cache: Arc::new(Mutex::new(HashMap::new())) }
    }

    pub fn with_timeout(mut self, t: Option<Duration>) -> Self {
        self.timeout = t;
        self
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    /// Runs a query; every model is checked before it is returned.
    pub fn check_sat(&self, q: &SolverQuery) -> Result<SatResult, SolverError> {
        let r = self.backend.check_sat(q, self.timeout)?;
        if let SatResult::Sat(m) = &r {
            q.check_model(m).map_err(SolverError::InvalidModel)?;
        }
        Ok(r)
    }

    /// Integer satisfiability of the linear atoms of `c`; `None` if undecided.
    /// Nonlinear atoms are ignored, so `Some(false)` is always trustworthy.
    pub fn satisfiable(&self, c: &Constraint) -> Option<bool> {
        if c.has_false_atom() {
            return Some(false);
        }
        self.entails(c, &Atom::falsum()).map(|b| !b)
    }

    /// Whether every integer assignment satisfying `premise` satisfies
    /// `conclusion`; `None` if undecided. Nonlinear premise atoms are dropped.
    pub fn entails(&self, premise: &Constraint, conclusion: &Atom) -> Option<bool> {
        if conclusion.is_trivially_true() || premise.atoms().contains(conclusion) {
            return Some(true);
        }
        if premise.has_false_atom() {
            return Some(true);
        }
        let key = (premise.clone(), conclusion.clone());
        if let Some(r) = self.cache.lock().unwrap().get(&key) {
            return *r;
        }
        let r = self.entails_uncached(premise, conclusion);
        self.cache.lock().unwrap().insert(key, r);
        r
    }

    fn entails_uncached(&self, premise: &Constraint, conclusion: &Atom) -> Option<bool> {
        let neg = LinearAtom::from_atom(&conclusion.negate())?;
        let mut q = SolverQuery::default();
        for a in premise.linear_atoms() {
            let la = LinearAtom::from_atom(a).expect("linear");
            for v in la.expr.coeffs.keys() {
                q.declare(v, Sort::Int);
            }
            q.assertions.push(vec![la]);
        }
        for v in neg.expr.coeffs.keys() {
            q.declare(v, Sort::Int);
        }
        q.assertions.push(vec![neg]);
        match self.check_sat(&q) {
            Ok(SatResult::Unsat) => Some(true),
            Ok(SatResult::Sat(_)) => Some(false),
            _ => None,
        }
    }

    pub fn entails_all(&self, premise: &Constraint, conclusion: &Constraint) -> Option<bool> {
        let mut all = true;
        for a in conclusion.atoms() {
            match self.entails(premise, a) {
                Some(true) => {}
                Some(false) => return Some(false),
                None => all = false,
            }
        }
        if all {
            Some(true)
        } else {
            None
        }
    }
}
