//! Bounded exhaustive simulation: worst-case run length and per-transition
//! counts from one initial state, set against the inferred bounds.
//!
//! cargo run --example simulate -- [file.koat] [v=value ...]

use phaserank::analysis::{analyze, AnalysisConfig};
use phaserank::program::{parse_program, State, Var};
use phaserank::sim::{explore, ExploreConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/corpus/two_phase.koat").to_string());
    let p = parse_program(&std::fs::read_to_string(&path).expect("readable file")).expect("valid program");
    let mut s0: State = p.program_vars().iter().map(|v| (v.clone(), 3)).collect();
    for a in args {
        let (v, n) = a.split_once('=').expect("v=value");
        s0.insert(Var::new(v), n.parse().expect("integer"));
    }
    let run = explore(&p, &s0, &ExploreConfig::default());
    let r = analyze(&p, &AnalysisConfig::default());
    let rb = r.original_rb(&p);
    println!("from {s0:?}{}", if run.truncated { " (truncated)" } else { "" });
    println!("longest run: {} steps, bound {} = {}", run.length, r.overall, r.overall.eval_state(&s0).unwrap());
    for t in p.transitions() {
        let b = rb.get(t.id);
        println!("  {}: at most {} times, bound {b} = {}", t.id, run.count(t.id), b.eval_state(&s0).unwrap());
    }
}
