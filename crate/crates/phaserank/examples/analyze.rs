//! Full analysis of one program.
//!
//! cargo run --example analyze -- [file.koat] [mdepth] [off|scc|sub-scc|global]

use phaserank::analysis::{analyze, AnalysisConfig, CfrMode};
use phaserank::program::parse_program;

fn main() {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/corpus/nested_loops.koat").to_string());
    let mdepth = args.next().map(|s| s.parse().expect("mdepth")).unwrap_or(5);
    let cfr: CfrMode = args.next().map(|s| s.parse().expect("cfr mode")).unwrap_or(CfrMode::SubScc);

    let text = std::fs::read_to_string(&path).expect("readable file");
    let p = parse_program(&text).unwrap_or_else(|e| panic!("{path}:{e}"));
    println!("{p}");
    let r = analyze(&p, &AnalysisConfig { mdepth, cfr, ..AnalysisConfig::default() });
    println!("overall: {} ({})", r.overall, r.class);
    println!("\nruntime bounds of the input transitions:\n{}", r.original_rb(&p));
    println!("size bounds:\n{}", r.sb);
    println!("proof log:");
    for l in &r.proof_log {
        println!("  {l}");
    }
}
