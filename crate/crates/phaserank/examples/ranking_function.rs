//! Synthesizes multiphase ranking functions for every transition of every SCC
//! and prints the functions, their local bounds and the independent check.
//!
//! cargo run --example ranking_function -- [file.koat] [max depth]

use std::collections::BTreeSet;

use phaserank::mprf::{factorial_gamma, find_mprf, local_bound, verify, MprfContext, MprfSearch};
use phaserank::program::{entry_transitions, parse_program, sccs_topological};
use phaserank::solver::Solver;

fn main() {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/corpus/three_phase.koat").to_string());
    let max_depth: usize = args.next().map(|s| s.parse().expect("depth")).unwrap_or(3);
    let p = parse_program(&std::fs::read_to_string(&path).expect("readable file")).expect("valid program");
    let s = Solver::default();

    for d in 1..=max_depth {
        println!("{d}!*gamma_{d} = {}", factorial_gamma(d as u32));
    }
    for scc in sccs_topological(&p) {
        for t in &scc {
            let mut found = None;
            for d in 1..=max_depth {
                match find_mprf(&p, &s, *t, &scc, d, &MprfContext::default()) {
                    MprfSearch::Found(f) => {
                        found = Some(f);
                        break;
                    }
                    MprfSearch::NotFound => println!("{t}: no function of depth {d}"),
                    MprfSearch::Unknown => println!("{t}: depth {d} undecided"),
                }
            }
            let Some(f) = found else { continue };
            println!("{t}: depth {}, scope {:?}, decreasing {:?}", f.depth, f.scope, f.decreasing);
            print!("{f}");
            let entries: BTreeSet<_> = entry_transitions(&p, &f.scope).unwrap().locations();
            for (l, b) in local_bound(&f, &entries, p.program_vars()).per_location {
                println!("  beta({l}) = {b}");
            }
            println!("  verified: {}", verify(&p, &s, &f));
        }
    }
}
