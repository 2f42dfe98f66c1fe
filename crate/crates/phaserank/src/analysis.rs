//! The overall analysis: preprocessing, SCC-wise alternation of runtime and
//! size bounds, and control-flow refinement on demand.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::bound::{AsymptoticClass, Bound};
use crate::cfr::{build_abstraction_layer, partial_evaluate_scc, partial_evaluate_subscc, Refinement};
use crate::invariants::strengthen_guards;
use crate::mprf::{find_mprf, improves, lift_bound, local_bound, MprfContext, MprfSearch};
use crate::program::{entry_transitions, reachable_locations, sccs_topological, IntegerProgram, Transition, TransitionId, Var};
use crate::size::{compute_size_bounds, merge_improving, LocalSizeBounds};
use crate::solver::Solver;
use crate::tables::{RuntimeBoundTable, SizeBoundTable};

/// Per-query solver timeout, capped by the remaining global budget.
pub const QUERY_TIMEOUT: Duration = Duration::from_secs(5);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CfrMode {
    Off,
    Scc,
    SubScc,
    Global,
}

impl fmt::Display for CfrMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CfrMode::Off => "off",
            CfrMode::Scc => "scc",
            CfrMode::SubScc => "sub-scc",
            CfrMode::Global => "global",
        })
    }
}

impl FromStr for CfrMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "off" => Ok(CfrMode::Off),
            "scc" => Ok(CfrMode::Scc),
            "sub-scc" => Ok(CfrMode::SubScc),
            "global" => Ok(CfrMode::Global),
            _ => Err(format!("unknown CFR mode `{s}` (expected off, scc, sub-scc or global)")),
        }
    }
}

#[derive(Clone, Debug)]
pub struct AnalysisConfig {
    /// Maximal MΦRF depth, at least 1.
    pub mdepth: usize,
    pub cfr: CfrMode,
    pub timeout: Duration,
    pub invariants: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig { mdepth: 5, cfr: CfrMode::SubScc, timeout: Duration::from_secs(300), invariants: false }
    }
}

#[derive(Clone, Debug)]
pub struct AnalysisResult {
    /// The program the tables refer to: preprocessed, possibly refined.
    pub program: IntegerProgram,
    /// Origin of each transition of `program` in the input program.
    pub parent: BTreeMap<TransitionId, TransitionId>,
    pub rb: RuntimeBoundTable,
    pub sb: SizeBoundTable,
    pub overall: Bound,
    pub class: AsymptoticClass,
    pub proof_log: Vec<String>,
    pub timeout: bool,
}

impl AnalysisResult {
    /// Runtime bounds of the input program's transitions: copies are summed,
    /// removed transitions get 0.
    pub fn original_rb(&self, input: &IntegerProgram) -> RuntimeBoundTable {
        let mut out = RuntimeBoundTable::default();
        for t in input.transitions() {
            out.set(t.id, Bound::zero());
        }
        for t in self.program.transitions() {
            let o = self.parent[&t.id];
            out.set(o, out.get(o).add(&self.rb.get(t.id)));
        }
        out
    }

    /// Size bounds of the input program's transitions, summed over copies.
    pub fn original_sb(&self, input: &IntegerProgram) -> SizeBoundTable {
        let mut out = SizeBoundTable::default();
        let mut seen: BTreeSet<TransitionId> = BTreeSet::new();
        for t in self.program.transitions() {
            let o = self.parent[&t.id];
            for v in input.program_vars() {
                let b = if self.program.is_program_var(v) { self.sb.get(t.id, v) } else { Bound::omega() };
                let cur = if seen.contains(&o) { out.get(o, v) } else { Bound::zero() };
                out.set(o, v.clone(), cur.add(&b));
            }
            seen.insert(o);
        }
        out
    }
}

/// Removes unreachable locations, unsatisfiable transitions and variables
/// that cannot influence any guard.
pub fn preprocess(p: &IntegerProgram, solver: &Solver, invariants: bool) -> IntegerProgram {
    let p = if invariants { strengthen_guards(p) } else { p.clone() };
    let ts: Vec<Transition> = p.transitions().iter().filter(|t| solver.satisfiable(&t.guard) != Some(false)).cloned().collect();
    let q = p.with_parts(p.program_vars().to_vec(), p.locations().clone(), ts).expect("subset");
    let reach = reachable_locations(&q);
    let ts: Vec<Transition> = q.transitions().iter().filter(|t| reach.contains(&t.source)).cloned().collect();

    let mut relevant: BTreeSet<Var> = ts.iter().flat_map(|t| t.guard.vars()).collect();
    loop {
        let before = relevant.len();
        for t in &ts {
            for (v, up) in &t.update {
                if relevant.contains(v) {
                    relevant.extend(up.vars());
                }
            }
        }
        if relevant.len() == before {
            break;
        }
    }
    let pv: Vec<Var> = q.program_vars().iter().filter(|v| relevant.contains(*v)).cloned().collect();
    let ts: Vec<Transition> = ts
        .into_iter()
        .map(|mut t| {
            t.update.retain(|v, _| relevant.contains(v));
            t
        })
        .collect();
    q.with_parts(pv, reach, ts).expect("subset")
}

/// `RB(t) = 1` outside cycles and ω inside; size bounds from those.
pub fn initial_tables(p: &IntegerProgram, local: &LocalSizeBounds) -> (RuntimeBoundTable, SizeBoundTable) {
    let cyclic: BTreeSet<TransitionId> = sccs_topological(p).into_iter().flatten().collect();
    let mut rb = RuntimeBoundTable::default();
    for t in p.transitions() {
        if !cyclic.contains(&t.id) {
            rb.set(t.id, Bound::one());
        }
    }
    let sb = compute_size_bounds(p, local, &rb);
    (rb, sb)
}

fn ids(s: &BTreeSet<TransitionId>) -> String {
    s.iter().map(|t| t.to_string()).collect::<Vec<_>>().join(",")
}

struct State {
    p: IntegerProgram,
    parent: BTreeMap<TransitionId, TransitionId>,
    local: LocalSizeBounds,
    rb: RuntimeBoundTable,
    sb: SizeBoundTable,
    log: Vec<String>,
}

struct Engine<'a> {
    cfg: &'a AnalysisConfig,
    solver: Solver,
    deadline: Instant,
    timed_out: bool,
}

impl Engine<'_> {
    fn expired(&mut self) -> bool {
        if Instant::now() >= self.deadline {
            self.timed_out = true;
        }
        self.timed_out
    }

    /// Repeatedly improves the runtime bounds of one SCC until nothing changes.
    fn process_scc(&mut self, st: &mut State, scc: &BTreeSet<TransitionId>) {
        loop {
            let mut improved = false;
            for t in scc {
                if !st.rb.get(*t).is_omega() {
                    continue;
                }
                // Depth escalation restarts for every transition.
                for d in 1..=self.cfg.mdepth {
                    if self.expired() {
                        return;
                    }
                    let ctx = MprfContext { sizes: Some(&st.sb) };
                    match find_mprf(&st.p, &self.solver, *t, scc, d, &ctx) {
                        MprfSearch::Found(f) => {
                            let entry = entry_transitions(&st.p, &f.scope).expect("nonempty").locations();
                            let lb = local_bound(&f, &entry, st.p.program_vars());
                            let new = lift_bound(&st.p, &f, &lb, &st.rb, &st.sb);
                            let betas: Vec<String> = lb.per_location.iter().map(|(l, b)| format!("beta({l})={b}")).collect();
                            st.log.push(format!(
                                "MPRF d={} scope={{{}}} decreasing={{{}}} {}",
                                d,
                                ids(&f.scope),
                                ids(&f.decreasing),
                                betas.join(" ")
                            ));
                            for u in &f.decreasing {
                                if improves(&st.rb.get(*u), &new) {
                                    st.rb.set(*u, new.clone());
                                    st.log.push(format!("RB {u} := {new}"));
                                    improved = true;
                                }
                            }
                            break;
                        }
                        MprfSearch::NotFound | MprfSearch::Unknown => {}
                    }
                }
            }
            let fresh = compute_size_bounds(&st.p, &st.local, &st.rb);
            let (sb, changed) = merge_improving(&st.sb, &fresh);
            st.sb = sb;
            if !(improved || changed) {
                break;
            }
        }
    }

    fn refine(&self, st: &State, scc: &BTreeSet<TransitionId>, t_cfr: &BTreeSet<TransitionId>) -> Option<Refinement> {
        match self.cfg.cfr {
            CfrMode::Scc | CfrMode::Global => {
                let layer = build_abstraction_layer(&st.p, scc);
                partial_evaluate_scc(&st.p, scc, &layer, &self.solver).ok()
            }
            CfrMode::SubScc => partial_evaluate_subscc(&st.p, t_cfr, &self.solver).ok(),
            CfrMode::Off => None,
        }
    }

    /// Switches to a refined program, keeping bounds of unchanged transitions.
    fn adopt(&self, st: &State, r: Refinement) -> (State, BTreeMap<TransitionId, TransitionId>) {
        let q = r.program;
        let local = LocalSizeBounds::compute(&q, &self.solver);
        let cyclic: BTreeSet<TransitionId> = sccs_topological(&q).into_iter().flatten().collect();
        let mut rb = RuntimeBoundTable::default();
        let mut sb = SizeBoundTable::default();
        for t in q.transitions() {
            match st.p.transition(t.id) {
                Some(old) if old.source == t.source && old.guard == t.guard && old.update == t.update => {
                    rb.set(t.id, st.rb.get(t.id));
                    for v in q.program_vars() {
                        sb.set(t.id, v.clone(), st.sb.get(t.id, v));
                    }
                }
                _ => {
                    if !cyclic.contains(&t.id) {
                        rb.set(t.id, Bound::one());
                    }
                }
            }
        }
        let (sb, _) = merge_improving(&sb, &compute_size_bounds(&q, &local, &rb));
        let parent = q.transitions().iter().map(|t| (t.id, st.parent[&r.parent[&t.id]])).collect();
        (State { p: q, parent, local, rb, sb, log: st.log.clone() }, r.parent)
    }

    /// Refines `scc` once and keeps the result only if its bound class drops.
    fn try_cfr(&mut self, st: &mut State, scc: &BTreeSet<TransitionId>) {
        let t_cfr: BTreeSet<TransitionId> =
            scc.iter().copied().filter(|t| !st.rb.get(*t).classify().is_at_most_linear()).collect();
        if t_cfr.is_empty() || self.expired() {
            return;
        }
        let on = if self.cfg.cfr == CfrMode::SubScc { &t_cfr } else { scc };
        let Some(r) = self.refine(st, scc, &t_cfr) else {
            st.log.push(format!("CFR mode={} on={{{}}} result=failed", self.cfg.cfr, ids(on)));
            return;
        };
        if too_large(&r, scc) {
            st.log.push(format!("CFR mode={} on={{{}}} result=failed (too large)", self.cfg.cfr, ids(on)));
            return;
        }
        let (mut next, local_parent) = self.adopt(st, r);
        let before = Bound::sum(scc.iter().map(|t| st.rb.get(*t)).collect::<Vec<_>>().iter());
        let derived: BTreeSet<TransitionId> =
            local_parent.iter().filter(|(_, o)| scc.contains(*o)).map(|(t, _)| *t).collect();
        for s in sccs_topological(&next.p) {
            if s.is_subset(&derived) {
                self.process_scc(&mut next, &s);
            }
        }
        let after = Bound::sum(derived.iter().map(|t| next.rb.get(*t)).collect::<Vec<_>>().iter());
        if improves(&before, &after) {
            next.log.push(format!("CFR mode={} on={{{}}} result=kept", self.cfg.cfr, ids(on)));
            *st = next;
        } else {
            st.log.push(format!("CFR mode={} on={{{}}} result=reverted", self.cfg.cfr, ids(on)));
        }
    }
}

/// Largest SCC of a refined program that is analyzed further.
pub const MAX_REFINED_SCC: usize = 24;

fn too_large(r: &Refinement, scc: &BTreeSet<TransitionId>) -> bool {
    sccs_topological(&r.program)
        .iter()
        .any(|s| s.len() > MAX_REFINED_SCC && s.iter().any(|t| scc.contains(&r.parent[t])))
}

/// Runs the analysis with the default solver.
pub fn analyze(p: &IntegerProgram, cfg: &AnalysisConfig) -> AnalysisResult {
    analyze_with(p, cfg, &Solver::default())
}

pub fn analyze_with(p: &IntegerProgram, cfg: &AnalysisConfig, solver: &Solver) -> AnalysisResult {
    assert!(cfg.mdepth >= 1, "mdepth must be at least 1");
    let start = Instant::now();
    let solver = solver.clone().with_timeout(Some(QUERY_TIMEOUT.min(cfg.timeout)));
    let mut eng = Engine { cfg, solver, deadline: start + cfg.timeout, timed_out: false };

    let pre = preprocess(p, &eng.solver, cfg.invariants);
    let local = LocalSizeBounds::compute(&pre, &eng.solver);
    let (rb, sb) = initial_tables(&pre, &local);
    let parent = pre.transitions().iter().map(|t| (t.id, t.id)).collect();
    let mut st = State { p: pre, parent, local, rb, sb, log: Vec::new() };

    if cfg.cfr == CfrMode::Global {
        for scc in sccs_topological(&st.p) {
            let layer = build_abstraction_layer(&st.p, &scc);
            match partial_evaluate_scc(&st.p, &scc, &layer, &eng.solver) {
                Ok(r) if too_large(&r, &scc) => {
                    st.log.push(format!("CFR mode=global on={{{}}} result=failed (too large)", ids(&scc)));
                }
                Ok(r) => {
                    let (mut next, _) = eng.adopt(&st, r);
                    next.log.push(format!("CFR mode=global on={{{}}}", ids(&scc)));
                    st = next;
                }
                Err(e) => st.log.push(format!("CFR mode=global on={{{}}} result=failed ({e})", ids(&scc))),
            }
        }
    }

    for scc in sccs_topological(&st.p) {
        // Earlier refinements never touch later SCCs, so the ids stay valid.
        if !scc.iter().all(|t| st.p.transition(*t).is_some()) {
            continue;
        }
        eng.process_scc(&mut st, &scc);
        if matches!(cfg.cfr, CfrMode::Scc | CfrMode::SubScc) {
            eng.try_cfr(&mut st, &scc);
        }
        if eng.timed_out {
            break;
        }
    }
    let fresh = compute_size_bounds(&st.p, &st.local, &st.rb);
    st.sb = merge_improving(&st.sb, &fresh).0;

    let overall = Bound::sum(st.p.transitions().iter().map(|t| st.rb.get(t.id)).collect::<Vec<_>>().iter());
    let class = if eng.timed_out && !overall.is_finite() { AsymptoticClass::Infinite } else { overall.classify() };
    AnalysisResult {
        program: st.p,
        parent: st.parent,
        rb: st.rb,
        sb: st.sb,
        overall,
        class,
        proof_log: st.log,
        timeout: eng.timed_out,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::parse_program;

    fn run(file: &str, mdepth: usize, cfr: CfrMode) -> AnalysisResult {
        let text = std::fs::read_to_string(format!("{}/corpus/{file}", env!("CARGO_MANIFEST_DIR"))).unwrap();
        let p = parse_program(&text).unwrap();
        analyze(&p, &AnalysisConfig { mdepth, cfr, ..AnalysisConfig::default() })
    }

    #[test]
    fn nested_loops_quadratic() {
        let r = run("nested_loops.koat", 5, CfrMode::Off);
        assert_eq!(r.overall.to_string(), "32*z^2+11*z+1", "{:#?}", r.proof_log);
        assert_eq!(r.class, AsymptoticClass::Polynomial(2));
    }

    #[test]
    fn depth_one_is_not_enough() {
        for cfr in [CfrMode::Off, CfrMode::Scc, CfrMode::SubScc, CfrMode::Global] {
            assert_eq!(run("nested_loops.koat", 1, cfr).class, AsymptoticClass::Infinite);
            assert_eq!(run("two_phase.koat", 1, cfr).class, AsymptoticClass::Infinite);
        }
        assert!(run("two_phase.koat", 2, CfrMode::Off).class.is_finite());
    }

    #[test]
    fn refinement_separates_independent_cycles() {
        assert_eq!(run("guarded_counter.koat", 5, CfrMode::Off).class, AsymptoticClass::Infinite);
        let r = run("guarded_counter.koat", 1, CfrMode::SubScc);
        assert_eq!(r.class, AsymptoticClass::Polynomial(1), "{:#?}\n{}", r.proof_log, r.program);
    }

    #[test]
    fn empty_program() {
        let r = run("empty_rules.koat", 5, CfrMode::SubScc);
        assert_eq!(r.overall.to_string(), "0");
        assert_eq!(r.class, AsymptoticClass::Polynomial(0));
    }

    #[test]
    fn preprocessing_drops_dead_parts() {
        let text = "(GOAL COMPLEXITY)\n(STARTTERM (FUNCTIONSYMBOLS l0))\n(VAR x y)\n(RULES\n  l0(x, y) -> l1(x, y)\n  l1(x, y) -> l2(x, y + 1) :|: x < 0 && x >= 0\n  l1(x, y) -> l1(x - 1, y + 1) :|: x > 0\n)\n";
        let p = parse_program(text).unwrap();
        let q = preprocess(&p, &Solver::default(), false);
        assert_eq!(q.transitions().len(), 2);
        assert_eq!(q.program_vars(), &[Var::new("x")]);
    }
}
