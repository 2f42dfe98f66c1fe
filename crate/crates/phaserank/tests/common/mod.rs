#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use phaserank::analysis::{analyze, AnalysisConfig};
use phaserank::mprf::{factorial_gamma, MultiphaseRankingFunction};
use phaserank::program::{
    parse_program, Constraint, IntegerProgram, Location, Polynomial, State, Transition, TransitionId, Var,
};
use phaserank::sim::{explore, explore_from, layers, Configuration, ExploreConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CORPUS: [&str; 6] = [
    "two_phase",
    "nested_loops",
    "phase_switch",
    "phase_switch_split",
    "three_phase",
    "guarded_counter",
];

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

pub fn corpus(name: &str) -> IntegerProgram {
    let text = std::fs::read_to_string(corpus_dir().join(format!("{name}.koat"))).unwrap();
    parse_program(&text).unwrap()
}

/// All states over `vars` with every value in `-r..=r`.
pub fn states(vars: &[Var], r: i64) -> Vec<State> {
    let mut out = vec![State::new()];
    for v in vars {
        out = out
            .into_iter()
            .flat_map(|s| {
                (-r..=r).map(move |x| {
                    let mut s = s.clone();
                    s.insert(v.clone(), x);
                    s
                })
            })
            .collect();
    }
    out
}

fn random_atom(rng: &mut ChaCha8Rng, vars: &[&str]) -> String {
    let v = vars[rng.gen_range(0..vars.len())];
    let ops = [">", ">=", "<", "<=", "="];
    let op = ops[rng.gen_range(0..ops.len())];
    if rng.gen_bool(0.3) {
        let w = vars[rng.gen_range(0..vars.len())];
        format!("{v} {op} {w}")
    } else {
        format!("{v} {op} {}", rng.gen_range(-2..=2))
    }
}

fn random_update(rng: &mut ChaCha8Rng, v: &str, vars: &[&str]) -> String {
    match rng.gen_range(0..10) {
        0..=4 => {
            let c: i64 = rng.gen_range(-2..=2);
            if c == 0 {
                v.to_string()
            } else if c > 0 {
                format!("{v} + {c}")
            } else {
                format!("{v} - {}", -c)
            }
        }
        5 | 6 => v.to_string(),
        7 => vars[rng.gen_range(0..vars.len())].to_string(),
        8 => format!("{v} + {}", vars[rng.gen_range(0..vars.len())]),
        _ => "u".to_string(),
    }
}

/// Small seeded programs: two or three variables, a few locations, linear
/// guards and updates, occasionally a temporary variable `u`.
pub fn random_program(seed: u64) -> (String, IntegerProgram) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vars: &[&str] = if rng.gen_bool(0.8) { &["x", "y"] } else { &["x", "y", "z"] };
    let n_locs = rng.gen_range(1..=3);
    let n_rules = rng.gen_range(1..=4);
    let args = vars.join(", ");
    let mut rules = vec![format!("  l0({args}) -> l1({args})")];
    for _ in 0..n_rules {
        let s = rng.gen_range(1..=n_locs);
        let t = rng.gen_range(1..=n_locs + 1);
        let ups: Vec<String> = vars.iter().map(|v| random_update(&mut rng, v, vars)).collect();
        let n_atoms = rng.gen_range(0..=2);
        let atoms: Vec<String> = (0..n_atoms).map(|_| random_atom(&mut rng, vars)).collect();
        let guard = if atoms.is_empty() { String::new() } else { format!(" :|: {}", atoms.join(" && ")) };
        rules.push(format!("  l{s}({args}) -> l{t}({}){guard}", ups.join(", ")));
    }
    let text = format!(
        "(GOAL COMPLEXITY)\n(STARTTERM (FUNCTIONSYMBOLS l0))\n(VAR {} u)\n(RULES\n{}\n)\n",
        vars.join(" "),
        rules.join("\n")
    );
    let p = parse_program(&text).unwrap_or_else(|e| panic!("{e}\n{text}"));
    (text, p)
}

pub fn random_programs(n: u64) -> Vec<(String, IntegerProgram)> {
    (0..n).map(|i| random_program(0x5eed + i)).collect()
}

#[derive(Debug, Default)]
pub struct SoundnessStats {
    pub states: usize,
    pub checks: usize,
    pub violations: Vec<String>,
}

/// Checks the runtime, size and overall bounds of the default analysis
/// against exhaustive bounded runs from every state in `-r..=r`.
pub fn soundness(name: &str, p: &IntegerProgram, r: i64, sim: &ExploreConfig, stats: &mut SoundnessStats) {
    let res = analyze(p, &AnalysisConfig::default());
    let rb = res.original_rb(p);
    let sb = res.original_sb(p);
    for s0 in states(p.program_vars(), r) {
        stats.states += 1;
        let run = explore(p, &s0, sim);
        let ev = |b: &phaserank::bound::Bound| b.eval_state(&s0).unwrap();
        let overall = ev(&res.overall);
        stats.checks += 1;
        if !overall.admits(run.length as u128) {
            stats.violations.push(format!("{name} {s0:?}: run length {} > {}", run.length, res.overall));
        }
        for t in p.transitions() {
            let b = rb.get(t.id);
            stats.checks += 1;
            if !ev(&b).admits(run.count(t.id) as u128) {
                stats.violations.push(format!("{name} {s0:?}: {} fired {} > {b}", t.id, run.count(t.id)));
            }
            for v in p.program_vars() {
                let Some(m) = run.max_abs.get(&(t.id, v.clone())) else { continue };
                let b = sb.get(t.id, v);
                stats.checks += 1;
                if !ev(&b).admits(*m as u128) {
                    stats.violations.push(format!("{name} {s0:?}: |{v}| after {} is {m} > {b}", t.id));
                }
            }
        }
    }
}

/// Compares label-erased configurations reachable in exactly `k` steps
/// (`k ≤ depth`) plus the worst-case run length, from every state in `-r..=r`.
pub fn equivalent(a: &IntegerProgram, b: &IntegerProgram, r: i64, depth: usize, sim: &ExploreConfig) -> Result<usize, String> {
    let mut n = 0;
    for s0 in states(a.program_vars(), r) {
        let la = layers(a, &s0, depth, &sim.tv_box);
        let lb = layers(b, &s0, depth, &sim.tv_box);
        if la != lb {
            let k = la.iter().zip(&lb).position(|(x, y)| x != y).unwrap_or(la.len().min(lb.len()));
            return Err(format!("from {s0:?}: step {k} differs"));
        }
        let (ra, rb) = (explore(a, &s0, sim), explore(b, &s0, sim));
        if ra.length != rb.length || ra.truncated != rb.truncated {
            return Err(format!("from {s0:?}: run length {} vs {}", ra.length, rb.length));
        }
        n += 1;
    }
    Ok(n)
}

pub const COUNTER: &str = "step_counter";

/// The scope of `f` as a stand-alone program entered at `entry`, with an
/// extra variable counting the decreasing steps.
pub fn counting_subprogram(p: &IntegerProgram, f: &MultiphaseRankingFunction, entry: &Location) -> IntegerProgram {
    let c = Var::new(COUNTER);
    let start = Location::new("count_start");
    let mut vars = p.program_vars().to_vec();
    vars.push(c.clone());
    let mut ts: Vec<Transition> = Vec::new();
    let mut locs = vec![start.clone(), entry.clone()];
    for id in &f.scope {
        let mut t = p.transition(*id).unwrap().clone();
        let step = if f.decreasing.contains(id) { 1 } else { 0 };
        t.update.insert(c.clone(), Polynomial::var(c.clone()).add(&Polynomial::constant(step)));
        locs.push(t.source.clone());
        locs.push(t.target.clone());
        ts.push(t);
    }
    let id = TransitionId(ts.iter().map(|t| t.id.0).max().unwrap() + 1);
    ts.push(Transition { id, source: start.clone(), target: entry.clone(), guard: Constraint::truth(), update: BTreeMap::new() });
    IntegerProgram::new(vars, locs, start, ts).unwrap()
}

/// `1 + d!·γ_d·max{0, f_1(σ), …, f_d(σ)}`, rounded up.
pub fn max_form_beta(f: &MultiphaseRankingFunction, l: &Location, s: &State) -> i128 {
    let m = (1..=f.depth)
        .map(|i| f.f(i, l).eval(|v| s.get(v).copied()).expect("program variables only"))
        .fold(0i128, i128::max);
    let g: i128 = factorial_gamma(f.depth as u32).try_into().unwrap();
    1 + g * m
}

/// Largest number of decreasing steps of any bounded run entering at `entry` from `s`.
pub fn decreasing_steps(q: &IntegerProgram, entry: &Location, s: &State, sim: &ExploreConfig) -> u64 {
    let mut st = s.clone();
    st.insert(Var::new(COUNTER), 0);
    let run = explore_from(q, &Configuration { location: entry.clone(), state: st }, sim);
    let c = Var::new(COUNTER);
    run.max_abs.iter().filter(|((_, v), _)| *v == c).map(|(_, n)| *n).max().unwrap_or(0)
}
