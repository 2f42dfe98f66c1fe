//! Local size bounds per transition and the global size-bound table after
//! runtime bounds are known.
//!
//! cargo run --example size_bounds -- [file.koat]

use phaserank::analysis::{analyze, AnalysisConfig, CfrMode};
use phaserank::program::parse_program;
use phaserank::size::{compute_size_bounds, LocalSizeBound, LocalSizeBounds};
use phaserank::solver::Solver;

fn main() {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/corpus/nested_loops.koat").to_string());
    let p = parse_program(&std::fs::read_to_string(&path).expect("readable file")).expect("valid program");
    let s = Solver::default();
    let local = LocalSizeBounds::compute(&p, &s);
    println!("local size bounds:");
    for t in p.transitions() {
        for v in p.program_vars() {
            let shown = match local.get(t.id, v) {
                LocalSizeBound::Unbounded => "unbounded".to_string(),
                b => format!("{:?}: |{v}'| <= {}", b, b.abs_poly().unwrap()),
            };
            println!("  {} {v}: {shown}", t.id);
        }
    }
    let r = analyze(&p, &AnalysisConfig { cfr: CfrMode::Off, ..AnalysisConfig::default() });
    println!("\nglobal size bounds from the final runtime bounds:\n{}", compute_size_bounds(&r.program, &local, &r.rb));
}
