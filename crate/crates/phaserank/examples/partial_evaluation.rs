//! Control-flow refinement by partial evaluation, both for a whole SCC with
//! harvested abstraction layers and for selected transitions only.
//!
//! cargo run --example partial_evaluation

use std::collections::BTreeSet;

use phaserank::analysis::{analyze, AnalysisConfig, CfrMode};
use phaserank::cfr::{build_abstraction_layer, partial_evaluate_scc, partial_evaluate_subscc};
use phaserank::program::{parse_program, sccs_topological, IntegerProgram, TransitionId};
use phaserank::solver::Solver;

fn load(name: &str) -> IntegerProgram {
    let path = format!("{}/corpus/{name}", env!("CARGO_MANIFEST_DIR"));
    parse_program(&std::fs::read_to_string(path).expect("corpus file")).expect("valid program")
}

fn main() {
    let s = Solver::default();

    let p = load("phase_switch.koat");
    println!("== whole SCC\n{p}");
    let scc = sccs_topological(&p).remove(0);
    let layer = build_abstraction_layer(&p, &scc);
    for l in p.locations() {
        let atoms: Vec<String> = layer.atoms(l).map(|a| a.to_string()).collect();
        if !atoms.is_empty() {
            println!("layer at {l}: {}", atoms.join(", "));
        }
    }
    let r = partial_evaluate_scc(&p, &scc, &layer, &s).expect("refinable");
    println!("\n{}", r.program);
    println!("components after refinement: {}", sccs_topological(&r.program).len());

    let p = load("guarded_counter.koat");
    println!("\n== selected transitions\n{p}");
    let t1: BTreeSet<TransitionId> = [TransitionId(1)].into_iter().collect();
    let r = partial_evaluate_subscc(&p, &t1, &s).expect("refinable");
    println!("{}", r.program);
    for (new, old) in &r.parent {
        if new != old {
            println!("{new} copies {old}");
        }
    }

    for cfr in [CfrMode::Off, CfrMode::SubScc] {
        let a = analyze(&p, &AnalysisConfig { mdepth: 1, cfr, ..AnalysisConfig::default() });
        println!("mdepth 1, cfr {cfr}: {} {}", a.class, a.overall);
    }
}
