//! The in-process backend and z3 must agree on every query the analysis
//! issues. Skipped with a notice when no z3 binary is available.

mod common;

use std::sync::{Arc, Mutex};
use std::time::Duration;

use phaserank::analysis::{analyze_with, AnalysisConfig};
use phaserank::solver::{Backend, InProcessBackend, SatResult, SmtLibBackend, Solver, SolverError, SolverQuery};

use common::*;

/// Runs both backends and records every query on which they disagree.
struct Both {
    inprocess: InProcessBackend,
    z3: SmtLibBackend,
    queries: Mutex<usize>,
    disagreements: Mutex<Vec<String>>,
}

fn kind(r: &Result<SatResult, SolverError>) -> &'static str {
    match r {
        Ok(SatResult::Sat(_)) => "sat",
        Ok(SatResult::Unsat) => "unsat",
        Ok(SatResult::Unknown(_)) => "unknown",
        Err(_) => "error",
    }
}

impl Backend for Both {
    fn name(&self) -> &str {
        "both"
    }

    fn check_sat(&self, q: &SolverQuery, timeout: Option<Duration>) -> Result<SatResult, SolverError> {
        let a = self.inprocess.check_sat(q, timeout);
        let b = self.z3.check_sat(q, timeout);
        *self.queries.lock().unwrap() += 1;
        let decided = |k: &str| k == "sat" || k == "unsat";
        if decided(kind(&a)) && decided(kind(&b)) && kind(&a) != kind(&b) {
            self.disagreements.lock().unwrap().push(format!("{} vs {} on {q:?}", kind(&a), kind(&b)));
        }
        if kind(&b) == "error" {
            self.disagreements.lock().unwrap().push(format!("z3 failed: {b:?}"));
        }
        a
    }
}

fn z3() -> Option<SmtLibBackend> {
    let z = SmtLibBackend::locate();
    if z.is_none() {
        eprintln!("z3 not found; skipping");
    }
    z
}

#[test]
fn backends_agree_on_all_analysis_queries() {
    let Some(z3) = z3() else { return };
    let both = Arc::new(Both { inprocess: InProcessBackend::default(), z3, queries: Mutex::new(0), disagreements: Mutex::new(Vec::new()) });
    let s = Solver::new(both.clone());
    let mut programs: Vec<_> = CORPUS.iter().map(|n| corpus(n)).collect();
    programs.extend(random_programs(8).into_iter().map(|(_, p)| p));
    for p in &programs {
        analyze_with(p, &AnalysisConfig::default(), &s);
    }
    let d = both.disagreements.lock().unwrap();
    assert!(d.is_empty(), "{} of {} queries disagree, first: {}", d.len(), both.queries.lock().unwrap(), d[0]);
    assert!(*both.queries.lock().unwrap() > 100);
}

#[test]
fn corpus_results_do_not_depend_on_the_backend() {
    let Some(z3) = z3() else { return };
    let a = Solver::default();
    let b = Solver::new(Arc::new(z3));
    for name in CORPUS {
        let p = corpus(name);
        let ra = analyze_with(&p, &AnalysisConfig::default(), &a);
        let rb = analyze_with(&p, &AnalysisConfig::default(), &b);
        assert_eq!(ra.class, rb.class, "{name}");
        assert_eq!(ra.overall.to_string(), rb.overall.to_string(), "{name}");
    }
}
