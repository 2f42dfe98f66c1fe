//! SMT-LIB2 backend driving an external solver process (z3 by default).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use super::{Backend, LinearExpr, Relation, SatResult, SolverError, SolverQuery, Sort};
use crate::program::Var;

#[derive(Clone, Debug)]
pub struct SmtLibBackend {
    pub binary: PathBuf,
    pub args: Vec<String>,
}

impl Default for SmtLibBackend {
    fn default() -> Self {
        SmtLibBackend { binary: PathBuf::from("z3"), args: vec!["-in".into(), "-smt2".into()] }
    }
}

impl SmtLibBackend {
    pub fn z3(binary: impl Into<PathBuf>) -> Self {
        SmtLibBackend { binary: binary.into(), ..Default::default() }
    }

    /// The first z3 found on `PATH` or in the usual install locations.
    pub fn locate() -> Option<Self> {
        let mut candidates: Vec<PathBuf> = std::env::var_os("PATH")
            .map(|p| std::env::split_paths(&p).map(|d| d.join("z3")).collect())
            .unwrap_or_default();
        candidates.push(PathBuf::from("/usr/local/bin/z3"));
        candidates.push(PathBuf::from("/usr/bin/z3"));
        candidates.into_iter().find(|c| c.is_file()).map(SmtLibBackend::z3)
    }
}

fn sym(v: &Var) -> String {
    format!("|{}|", v.name().replace('|', "_").replace('\\', "_"))
}

fn num(q: &BigRational) -> String {
    let (n, d) = (q.numer().abs(), q.denom());
    let body = if d == &BigInt::from(1) { format!("{n}.0") } else { format!("(/ {n}.0 {d}.0)") };
    if q.is_negative() {
        format!("(- {body})")
    } else {
        body
    }
}

fn term(v: &Var, sort: Sort) -> String {
    match sort {
        Sort::Int => format!("(to_real {})", sym(v)),
        Sort::Real => sym(v),
    }
}

fn expr(e: &LinearExpr, sorts: &BTreeMap<Var, Sort>) -> String {
    let mut parts: Vec<String> = e
        .coeffs
        .iter()
        .map(|(v, c)| format!("(* {} {})", num(c), term(v, sorts.get(v).copied().unwrap_or(Sort::Real))))
        .collect();
    parts.push(num(&e.constant));
    if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        format!("(+ {})", parts.join(" "))
    }
}

/// Renders a query as an SMT-LIB2 script ending in `(check-sat)` and `(get-model)`.
pub fn render(q: &SolverQuery) -> String {
    let mut s = String::new();
    // Integer variables appear under `to_real`, which QF_LIA rejects.
    let logic = if q.objective.is_some() {
        None
    } else if q.vars.values().all(|s| *s == Sort::Real) {
        Some("QF_LRA")
    } else {
        Some("QF_LIRA")
    };
    if let Some(l) = logic {
        let _ = writeln!(s, "(set-logic {l})");
    }
    for (v, sort) in &q.vars {
        let t = match sort {
            Sort::Int => "Int",
            Sort::Real => "Real",
        };
        let _ = writeln!(s, "(declare-const {} {t})", sym(v));
    }
    for clause in &q.assertions {
        let atoms: Vec<String> = clause
            .iter()
            .map(|a| {
                let op = match a.relation {
                    Relation::Le => "<=",
                    Relation::Lt => "<",
                    Relation::Eq => "=",
                };
                format!("({op} {} 0.0)", expr(&a.expr, &q.vars))
            })
            .collect();
        match atoms.len() {
            0 => s.push_str("(assert false)\n"),
            1 => {
                let _ = writeln!(s, "(assert {})", atoms[0]);
            }
            _ => {
                let _ = writeln!(s, "(assert (or {}))", atoms.join(" "));
            }
        }
    }
    if let Some(o) = &q.objective {
        let _ = writeln!(s, "(minimize {})", expr(o, &q.vars));
    }
    s.push_str("(check-sat)\n(get-model)\n(exit)\n");
    s
}

#[derive(Debug, Clone, PartialEq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn parse_sexps(input: &str) -> Result<Vec<Sexp>, String> {
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    let mut chars = input.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '(' => {
                chars.next();
                stack.push(Vec::new());
            }
            ')' => {
                chars.next();
                let l = stack.pop().ok_or("unbalanced")?;
                stack.last_mut().ok_or("unbalanced")?.push(Sexp::List(l));
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            ';' => {
                for c in chars.by_ref() {
                    if c == '\n' {
                        break;
                    }
                }
            }
            '|' => {
                chars.next();
                let mut a = String::from("|");
                for c in chars.by_ref() {
                    a.push(c);
                    if c == '|' {
                        break;
                    }
                }
                stack.last_mut().unwrap().push(Sexp::Atom(a));
            }
            '"' => {
                chars.next();
                let mut a = String::from("\"");
                for c in chars.by_ref() {
                    a.push(c);
                    if c == '"' {
                        break;
                    }
                }
                stack.last_mut().unwrap().push(Sexp::Atom(a));
            }
            _ => {
                let mut a = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' {
                        break;
                    }
                    a.push(c);
                    chars.next();
                }
                stack.last_mut().unwrap().push(Sexp::Atom(a));
            }
        }
    }
    if stack.len() != 1 {
        return Err("unbalanced parentheses".into());
    }
    Ok(stack.pop().unwrap())
}

fn value(e: &Sexp) -> Result<BigRational, String> {
    match e {
        Sexp::Atom(a) => {
            if let Some((i, f)) = a.split_once('.') {
                let digits = format!("{i}{f}");
                let n: BigInt = digits.parse().map_err(|_| format!("bad number {a}"))?;
                let d = num_traits::pow(BigInt::from(10), f.len());
                Ok(BigRational::new(n, d))
            } else {
                let n: BigInt = a.parse().map_err(|_| format!("bad number {a}"))?;
                Ok(BigRational::from_integer(n))
            }
        }
        Sexp::List(l) => match l.as_slice() {
            [Sexp::Atom(op), x] if op == "-" => Ok(-value(x)?),
            [Sexp::Atom(op), x, y] if op == "/" => {
                let d = value(y)?;
                if d.is_zero() {
                    return Err("division by zero".into());
                }
                Ok(value(x)? / d)
            }
            [Sexp::Atom(op), x] if op == "to_real" => value(x),
            _ => Err(format!("unsupported value {e:?}")),
        },
    }
}

fn strip(name: &str) -> &str {
    name.strip_prefix('|').and_then(|n| n.strip_suffix('|')).unwrap_or(name)
}

fn parse_model(out: &[Sexp], q: &SolverQuery) -> Result<BTreeMap<Var, BigRational>, String> {
    let by_name: BTreeMap<String, Var> =
        q.vars.keys().map(|v| (strip(&sym(v)).to_string(), v.clone())).collect();
    let mut m = BTreeMap::new();
    for e in out {
        let Sexp::List(items) = e else { continue };
        let defs: &[Sexp] = match items.first() {
            Some(Sexp::Atom(a)) if a == "model" => &items[1..],
            _ => items,
        };
        for d in defs {
            if let Sexp::List(f) = d {
                if let [Sexp::Atom(kw), Sexp::Atom(name), Sexp::List(args), _sort, body] = f.as_slice() {
                    if kw == "define-fun" && args.is_empty() {
                        if let Some(v) = by_name.get(strip(name)) {
                            m.insert(v.clone(), value(body)?);
                        }
                    }
                }
            }
        }
    }
    // Unconstrained variables may be omitted from the model.
    for v in q.vars.keys() {
        m.entry(v.clone()).or_insert_with(BigRational::zero);
    }
    Ok(m)
}

impl Backend for SmtLibBackend {
    fn name(&self) -> &str {
        "smtlib"
    }

    fn check_sat(&self, q: &SolverQuery, timeout: Option<Duration>) -> Result<SatResult, SolverError> {
        let script = render(q);
        let mut cmd = Command::new(&self.binary);
        cmd.args(&self.args);
        if let Some(t) = timeout {
            cmd.arg(format!("-T:{}", t.as_secs().max(1)));
        }
        let mut child = cmd
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| SolverError::Process(format!("{}: {e}", self.binary.display())))?;
        child
            .stdin
            .take()
            .unwrap()
            .write_all(script.as_bytes())
            .map_err(|e| SolverError::Process(e.to_string()))?;
        let mut stdout = child.stdout.take().unwrap();
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            let mut buf = String::new();
            let r = stdout.read_to_string(&mut buf).map(|_| buf);
            let _ = tx.send(r);
        });
        let wait = timeout.map(|t| t + Duration::from_secs(1)).unwrap_or(Duration::from_secs(3600));
        let out = match rx.recv_timeout(wait) {
            Ok(Ok(s)) => s,
            Ok(Err(e)) => {
                let _ = child.kill();
                return Err(SolverError::Process(e.to_string()));
            }
            Err(_) => {
                let _ = child.kill();
                let _ = child.wait();
                return Ok(SatResult::Unknown("timeout".into()));
            }
        };
        let _ = child.wait();
        let sexps = parse_sexps(&out).map_err(SolverError::Protocol)?;
        // `(get-model)` after `unsat` reports an error of its own; only the
        // errors before the status line mean the query was not understood.
        let status_at = sexps.iter().position(|e| matches!(e, Sexp::Atom(_))).unwrap_or(sexps.len());
        let error = sexps[..status_at].iter().find_map(|e| match e {
            Sexp::List(l) if matches!(l.first(), Some(Sexp::Atom(a)) if a == "error") => Some(format!("{l:?}")),
            _ => None,
        });
        if let Some(e) = error {
            return Err(SolverError::Protocol(e));
        }
        let status = sexps.iter().find_map(|e| match e {
            Sexp::Atom(a) if a == "sat" || a == "unsat" || a == "unknown" || a == "timeout" => Some(a.clone()),
            _ => None,
        });
        match status.as_deref() {
            Some("unsat") => Ok(SatResult::Unsat),
            Some("sat") => {
                let m = parse_model(&sexps, q).map_err(SolverError::Protocol)?;
                Ok(SatResult::Sat(m))
            }
            Some(s) => Ok(SatResult::Unknown(s.to_string())),
            None => Err(SolverError::Protocol(out.lines().next().unwrap_or("").to_string())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{rat, LinearAtom};

    #[test]
    fn renders_quoted_symbols_and_objective() {
        let mut q = SolverQuery::default();
        let x = LinearExpr::var(Var::new("x'"));
        q.assert(LinearAtom::le(x.add(&LinearExpr::constant(rat(-3)))));
        q.objective = Some(x.neg());
        let s = render(&q);
        assert!(s.contains("(declare-const |x'| Real)"));
        assert!(s.contains("(assert (<= (+ (* 1.0 |x'|) (- 3.0)) 0.0))"));
        assert!(s.contains("(minimize"));
    }

    #[test]
    fn parses_models_leniently() {
        let mut q = SolverQuery::default();
        q.declare(&Var::new("a"), Sort::Real);
        q.declare(&Var::new("b"), Sort::Int);
        q.declare(&Var::new("c"), Sort::Int);
        let out = "sat\n(\n  (define-fun a () Real (/ 1.0 3.0))\n  (define-fun |b| () Int (- 4))\n)\n";
        let sx = parse_sexps(out).unwrap();
        let m = parse_model(&sx, &q).unwrap();
        assert_eq!(m[&Var::new("a")], BigRational::new(1.into(), 3.into()));
        assert_eq!(m[&Var::new("b")], rat(-4));
        assert_eq!(m[&Var::new("c")], rat(0));
    }

    #[test]
    fn integer_queries_use_a_logic_with_to_real() {
        let mut q = SolverQuery::default();
        let x = Var::new("x");
        q.declare(&x, Sort::Int);
        q.assert(LinearAtom::le(LinearExpr::var(x.clone()).add(&LinearExpr::constant(rat(1)))));
        q.assert(LinearAtom::le(LinearExpr::var(x).neg().add(&LinearExpr::constant(rat(2)))));
        assert!(!render(&q).contains("QF_LIA"));
        if let Some(z3) = SmtLibBackend::locate() {
            assert_eq!(z3.check_sat(&q, None).unwrap(), SatResult::Unsat);
        }
    }
}
