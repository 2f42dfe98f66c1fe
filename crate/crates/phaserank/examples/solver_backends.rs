//! The same entailment queries and analysis run on the in-process solver
//! and on z3 through SMT-LIB, when z3 is installed.
//!
//! cargo run --example solver_backends

use std::sync::Arc;
use std::time::Instant;

use phaserank::analysis::{analyze_with, AnalysisConfig};
use phaserank::program::{parse_program, Atom, Constraint, Polynomial, Var};
use phaserank::solver::{SmtLibBackend, Solver};

fn main() {
    let mut solvers = vec![Solver::default()];
    match SmtLibBackend::locate() {
        Some(z3) => solvers.push(Solver::new(Arc::new(z3))),
        None => println!("z3 not found; only the in-process solver runs"),
    }
    let x = Polynomial::var(Var::new("x"));
    let y = Polynomial::var(Var::new("y"));
    // 2x = y + 1 has no solution with y even.
    let premise = Constraint::from_atoms([
        Atom::le(&x.scale(2), &y.add(&Polynomial::constant(1))),
        Atom::ge(&x.scale(2), &y.add(&Polynomial::constant(1))),
    ]);
    let goal = Atom::ge(&x, &Polynomial::constant(0));
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/corpus/nested_loops.koat");
    let p = parse_program(&std::fs::read_to_string(path).unwrap()).unwrap();
    for s in &solvers {
        println!("[{}]", s.backend_name());
        println!("  sat(2x = y + 1): {:?}", s.satisfiable(&premise));
        println!("  2x = y + 1 entails x >= 0: {:?}", s.entails(&premise, &goal));
        let start = Instant::now();
        let r = analyze_with(&p, &AnalysisConfig::default(), s);
        println!("  nested loops: {} {} in {} ms", r.class, r.overall, start.elapsed().as_millis());
    }
}
