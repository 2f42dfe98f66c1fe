//! In-process backend: exact simplex for rational queries, branch and bound
//! for integer-sorted variables, case splitting for disjunctions.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::simplex::{solve_lp, Cmp, Lp, LpOutcome, Row};
use super::{Backend, LinearAtom, Relation, SatResult, SolverError, SolverQuery, Sort};
use crate::program::Var;

#[derive(Clone, Debug)]
pub struct InProcessBackend {
    pub node_limit: usize,
    pub max_cases: usize,
}

impl Default for InProcessBackend {
    fn default() -> Self {
        InProcessBackend { node_limit: 4000, max_cases: 4096 }
    }
}

enum Outcome {
    Sat(Vec<BigRational>),
    Unsat,
    Unknown(String),
}

struct Prepared {
    vars: Vec<Var>,
    ints: Vec<bool>,
    rows: Vec<Row>,
    /// Rows that are strict (`< rhs`) in the rational sense.
    strict: Vec<bool>,
}

fn index_of(vars: &[Var], v: &Var) -> usize {
    vars.binary_search(v).expect("variable declared")
}

/// Converts atoms into rows; integer-only strict atoms become shifted non-strict ones.
fn prepare(q: &SolverQuery, chosen: &[&LinearAtom]) -> Prepared {
    let vars: Vec<Var> = q.vars.keys().cloned().collect();
    let ints: Vec<bool> = q.vars.values().map(|s| *s == Sort::Int).collect();
    let mut rows = Vec::new();
    let mut strict = Vec::new();
    for a in chosen {
        let coeffs: Vec<(usize, BigRational)> =
            a.expr.coeffs.iter().filter(|(_, c)| !c.is_zero()).map(|(v, c)| (index_of(&vars, v), c.clone())).collect();
        let all_int = coeffs.iter().all(|(j, _)| ints[*j]);
        let mut rhs = -a.expr.constant.clone();
        match a.relation {
            Relation::Eq => {
                rows.push(Row { coeffs, cmp: Cmp::Eq, rhs });
                strict.push(false);
            }
            Relation::Le | Relation::Lt => {
                let mut coeffs = coeffs;
                let mut is_strict = a.relation == Relation::Lt;
                if all_int && !coeffs.is_empty() {
                    // Scale to integer coefficients and tighten.
                    let l = coeffs.iter().fold(rhs.denom().clone(), |acc, (_, c)| num_integer::lcm(acc, c.denom().clone()));
                    let lq = BigRational::from_integer(l);
                    coeffs = coeffs.into_iter().map(|(j, c)| (j, c * &lq)).collect();
                    rhs *= &lq;
                    let g = coeffs.iter().fold(BigInt::zero(), |acc, (_, c)| num_integer::gcd(acc, c.numer().clone()));
                    let gq = BigRational::from_integer(g);
                    coeffs = coeffs.into_iter().map(|(j, c)| (j, c / &gq)).collect();
                    rhs /= &gq;
                    rhs = if is_strict {
                        (rhs - BigRational::one()).ceil()
                    } else {
                        rhs.floor()
                    };
                    is_strict = false;
                }
                rows.push(Row { coeffs, cmp: Cmp::Le, rhs });
                strict.push(is_strict);
            }
        }
    }
    Prepared { vars, ints, rows, strict }
}

fn objective_row(q: &SolverQuery, vars: &[Var]) -> Option<Vec<(usize, BigRational)>> {
    q.objective
        .as_ref()
        .map(|o| o.coeffs.iter().filter(|(_, c)| !c.is_zero()).map(|(v, c)| (index_of(vars, v), c.clone())).collect())
}

/// Solves the rational relaxation, honoring strict rows via an epsilon variable.
fn relaxation(p: &Prepared, extra: &[Row], objective: Option<Vec<(usize, BigRational)>>, deadline: Option<Instant>) -> LpOutcome {
    let n = p.vars.len();
    let any_strict = p.strict.iter().any(|s| *s);
    let mut rows: Vec<Row> = p.rows.iter().cloned().chain(extra.iter().cloned()).collect();
    let free = vec![true; n];
    if !any_strict {
        return solve_lp(&Lp { nvars: n, free, rows, objective }, deadline);
    }
    // Maximize eps in row + eps <= rhs for strict rows, 0 <= eps <= 1.
    let eps = n;
    for (i, s) in p.strict.iter().enumerate() {
        if *s {
            rows[i].coeffs.push((eps, BigRational::one()));
        }
    }
    rows.push(Row { coeffs: vec![(eps, BigRational::one())], cmp: Cmp::Le, rhs: BigRational::one() });
    let mut free_e = free.clone();
    free_e.push(false);
    let lp = Lp { nvars: n + 1, free: free_e.clone(), rows: rows.clone(), objective: Some(vec![(eps, -BigRational::one())]) };
    let best = match solve_lp(&lp, deadline) {
        LpOutcome::Optimal(x) => x[eps].clone(),
        LpOutcome::Unbounded(_) => unreachable!("eps is bounded"),
        other => return other,
    };
    if !best.is_positive() {
        return LpOutcome::Infeasible;
    }
    let half = best / BigRational::from_integer(2.into());
    rows.push(Row { coeffs: vec![(eps, BigRational::one())], cmp: Cmp::Eq, rhs: half });
    let objective = objective.or(Some(Vec::new())).filter(|o| !o.is_empty());
    match solve_lp(&Lp { nvars: n + 1, free: free_e, rows, objective }, deadline) {
        LpOutcome::Optimal(mut x) => {
            x.truncate(n);
            LpOutcome::Optimal(x)
        }
        LpOutcome::Unbounded(mut x) => {
            x.truncate(n);
            LpOutcome::Unbounded(x)
        }
        o => o,
    }
}

fn branch_and_bound(p: &Prepared, objective: Option<Vec<(usize, BigRational)>>, node_limit: usize, deadline: Option<Instant>) -> Outcome {
    let mut stack: Vec<Vec<Row>> = vec![Vec::new()];
    let mut nodes = 0;
    let has_int = p.ints.iter().any(|b| *b);
    while let Some(extra) = stack.pop() {
        nodes += 1;
        if nodes > node_limit {
            return Outcome::Unknown("branch-and-bound node limit".into());
        }
        // The objective only matters for purely rational queries.
        let obj = if has_int { None } else { objective.clone() };
        let x = match relaxation(p, &extra, obj, deadline) {
            LpOutcome::Infeasible => continue,
            LpOutcome::Timeout => return Outcome::Unknown("timeout".into()),
            LpOutcome::Optimal(x) | LpOutcome::Unbounded(x) => x,
        };
        let frac = (0..p.vars.len()).find(|&j| p.ints[j] && !x[j].is_integer());
        match frac {
            None => return Outcome::Sat(x),
            Some(j) => {
                let lo = x[j].floor();
                let hi = x[j].ceil();
                let mut up = extra.clone();
                up.push(Row { coeffs: vec![(j, -BigRational::one())], cmp: Cmp::Le, rhs: -hi });
                let mut down = extra;
                down.push(Row { coeffs: vec![(j, BigRational::one())], cmp: Cmp::Le, rhs: lo });
                stack.push(up);
                stack.push(down);
            }
        }
    }
    Outcome::Unsat
}

impl InProcessBackend {
    fn solve_case(&self, q: &SolverQuery, chosen: &[&LinearAtom], deadline: Option<Instant>) -> Outcome {
        let p = prepare(q, chosen);
        let obj = objective_row(q, &p.vars);
        branch_and_bound(&p, obj, self.node_limit, deadline)
    }
}

impl Backend for InProcessBackend {
    fn name(&self) -> &str {
        "in-process"
    }

    fn check_sat(&self, q: &SolverQuery, timeout: Option<Duration>) -> Result<SatResult, SolverError> {
        let deadline = timeout.map(|t| Instant::now() + t);
        let units: Vec<&LinearAtom> = q.assertions.iter().filter(|c| c.len() == 1).map(|c| &c[0]).collect();
        let clauses: Vec<&Vec<LinearAtom>> = q.assertions.iter().filter(|c| c.len() != 1).collect();
        if clauses.iter().any(|c| c.is_empty()) {
            return Ok(SatResult::Unsat);
        }
        let cases: usize = clauses.iter().try_fold(1usize, |acc, c| acc.checked_mul(c.len())).unwrap_or(usize::MAX);
        if cases > self.max_cases {
            return Ok(SatResult::Unknown("too many disjunctive cases".into()));
        }
        let mut unknown = None;
        for case in 0..cases {
            let mut chosen = units.clone();
            let mut k = case;
            for c in &clauses {
                chosen.push(&c[k % c.len()]);
                k /= c.len();
            }
            match self.solve_case(q, &chosen, deadline) {
                Outcome::Sat(x) => {
                    let vars: Vec<Var> = q.vars.keys().cloned().collect();
                    let model: BTreeMap<Var, BigRational> = vars.into_iter().zip(x).collect();
                    return Ok(SatResult::Sat(model));
                }
                Outcome::Unsat => {}
                Outcome::Unknown(r) => unknown = Some(r),
            }
        }
        Ok(match unknown {
            Some(r) => SatResult::Unknown(r),
            None => SatResult::Unsat,
        })
    }
}
