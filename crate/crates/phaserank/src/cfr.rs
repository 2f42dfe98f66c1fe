//! Control-flow refinement by partial evaluation, for whole SCCs and for
//! minimal cycles around selected transitions.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use thiserror::Error;

use crate::fm::propagate;
use crate::program::{
    entry_transitions, reachable_locations, sccs_topological, Atom, Constraint, IntegerProgram, Location, ProgramError,
    Transition, TransitionId,
};
use crate::solver::Solver;

/// Upper bound on the labeled locations created for one SCC.
pub const MAX_LABELED_LOCATIONS: usize = 512;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CfrError {
    #[error("transition set is not a non-trivial SCC of the program")]
    NotAnScc,
    #[error("transitions to refine span several SCCs")]
    SpansSccs,
    #[error("refinement exceeded {MAX_LABELED_LOCATIONS} labeled locations")]
    TooLarge,
    #[error(transparent)]
    Program(#[from] ProgramError),
}

/// The finite set `α_ℓ` of candidate label atoms of each location.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AbstractionLayer {
    atoms: BTreeMap<Location, BTreeSet<Atom>>,
}

impl AbstractionLayer {
    pub fn from_map(atoms: BTreeMap<Location, BTreeSet<Atom>>) -> Self {
        AbstractionLayer { atoms }
    }

    pub fn atoms(&self, l: &Location) -> impl Iterator<Item = &Atom> {
        self.atoms.get(l).into_iter().flatten()
    }
}

/// A refined program with the origin of each of its transitions.
#[derive(Clone, Debug)]
pub struct Refinement {
    pub program: IntegerProgram,
    pub parent: BTreeMap<TransitionId, TransitionId>,
}

fn pv_atom(p: &IntegerProgram, a: &Atom) -> bool {
    a.is_linear() && !a.is_trivially_true() && !a.is_trivially_false() && a.vars().iter().all(|v| p.is_program_var(v))
}

/// Guard atoms of the SCC transitions at both endpoints, together with the
/// post-image of each guard at the transition's target.
pub fn build_abstraction_layer(p: &IntegerProgram, scc: &BTreeSet<TransitionId>) -> AbstractionLayer {
    let mut atoms: BTreeMap<Location, BTreeSet<Atom>> = BTreeMap::new();
    for t in p.transitions().iter().filter(|t| scc.contains(&t.id)) {
        for a in t.guard.atoms().iter().filter(|a| pv_atom(p, a)) {
            atoms.entry(t.source.clone()).or_default().insert(a.clone());
            atoms.entry(t.target.clone()).or_default().insert(a.clone());
        }
        let post = propagate(&Constraint::truth(), t, p.program_vars());
        for a in post.atoms().iter().filter(|a| pv_atom(p, a)) {
            atoms.entry(t.target.clone()).or_default().insert(a.clone());
        }
    }
    AbstractionLayer { atoms }
}

/// `α_ℓ(φ)`: the entailed atoms of `α_ℓ`, with redundant ones dropped.
pub fn abstract_constraint(layer: &AbstractionLayer, solver: &Solver, l: &Location, phi: &Constraint) -> Constraint {
    let entailed: Vec<Atom> = layer.atoms(l).filter(|a| solver.entails(phi, a) == Some(true)).cloned().collect();
    simplify(solver, entailed)
}

fn simplify(solver: &Solver, mut atoms: Vec<Atom>) -> Constraint {
    let mut i = 0;
    while i < atoms.len() {
        let rest = Constraint::from_atoms(atoms.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, a)| a.clone()));
        if solver.entails(&rest, &atoms[i]) == Some(true) {
            atoms.remove(i);
        } else {
            i += 1;
        }
    }
    Constraint::from_atoms(atoms)
}

/// `⟨ℓ, φ⟩`, conjoining with an existing label.
fn labeled(l: &Location, phi: &Constraint) -> Location {
    match l.label() {
        None => Location::labeled(l, phi.clone()),
        Some(old) => Location::labeled(l, old.and(phi)),
    }
}

type Evaluated = (IntegerProgram, BTreeMap<TransitionId, TransitionId>, BTreeMap<Location, (Location, Constraint)>);

struct Ids {
    next: u32,
}

impl Ids {
    fn fresh(&mut self) -> TransitionId {
        let id = TransitionId(self.next);
        self.next += 1;
        id
    }
}

/// Drops transitions with unsatisfiable guards, then unreachable locations.
pub fn cleanup(p: &IntegerProgram, solver: &Solver) -> Result<IntegerProgram, ProgramError> {
    let ts: Vec<Transition> =
        p.transitions().iter().filter(|t| solver.satisfiable(&t.guard) != Some(false)).cloned().collect();
    let q = p.with_parts(p.program_vars().to_vec(), p.locations().clone(), ts)?;
    let reach = reachable_locations(&q);
    let ts: Vec<Transition> = q.transitions().iter().filter(|t| reach.contains(&t.source)).cloned().collect();
    q.with_parts(q.program_vars().to_vec(), reach, ts)
}

fn is_scc(p: &IntegerProgram, scc: &BTreeSet<TransitionId>) -> bool {
    sccs_topological(p).iter().any(|s| s == scc)
}

/// Partial evaluation of a non-trivial SCC. Transitions whose guard becomes
/// unsatisfiable do not seed new labeled locations; they are removed by the
/// final cleanup either way.
pub fn partial_evaluate_scc(
    p: &IntegerProgram,
    scc: &BTreeSet<TransitionId>,
    layer: &AbstractionLayer,
    solver: &Solver,
) -> Result<Refinement, CfrError> {
    if !is_scc(p, scc) {
        return Err(CfrError::NotAnScc);
    }
    let (program, parent, _) = evaluate(p, scc, layer, solver, &mut Ids { next: p.next_id() })?;
    let program = cleanup(&program, solver)?;
    let parent = program.transitions().iter().map(|t| (t.id, parent[&t.id])).collect();
    Ok(Refinement { program, parent })
}

fn evaluate(
    p: &IntegerProgram,
    scc: &BTreeSet<TransitionId>,
    layer: &AbstractionLayer,
    solver: &Solver,
    ids: &mut Ids,
) -> Result<Evaluated, CfrError> {
    let scc_ts: Vec<&Transition> = p.transitions().iter().filter(|t| scc.contains(&t.id)).collect();
    let scc_locs: BTreeSet<Location> = scc_ts.iter().flat_map(|t| [t.source.clone(), t.target.clone()]).collect();
    let info = entry_transitions(p, scc).map_err(|_| CfrError::NotAnScc)?;
    let truth = Constraint::truth();

    let mut parent = BTreeMap::new();
    let mut res: Vec<Transition> = Vec::new();
    let mut l1: Vec<(Location, Constraint)> = Vec::new();
    for (l, ts) in &info.per_location {
        l1.push((l.clone(), truth.clone()));
        for id in ts {
            let mut t = p.transition(*id).unwrap().clone();
            t.target = labeled(l, &truth);
            parent.insert(t.id, *id);
            res.push(t);
        }
    }
    let mut done: BTreeSet<(Location, Constraint)> = BTreeSet::new();
    let mut done_locs: BTreeMap<Location, (Location, Constraint)> = BTreeMap::new();
    while !l1.is_empty() {
        let l0 = std::mem::take(&mut l1);
        for (l, phi) in l0 {
            if done.contains(&(l.clone(), phi.clone())) {
                continue;
            }
            let src = labeled(&l, &phi);
            for t in scc_ts.iter().filter(|t| t.source == l) {
                let guard = phi.and(&t.guard);
                let label = if solver.satisfiable(&guard) == Some(false) {
                    None
                } else {
                    let new = propagate(&phi, t, p.program_vars());
                    Some(abstract_constraint(layer, solver, &t.target, &new))
                };
                let label = match label {
                    Some(lab) => {
                        let key = (t.target.clone(), lab.clone());
                        if !done.contains(&key) && !l1.contains(&key) {
                            l1.push(key);
                        }
                        lab
                    }
                    // Dead: its target never matters after cleanup.
                    None => truth.clone(),
                };
                let nt = Transition {
                    id: ids.fresh(),
                    source: src.clone(),
                    target: labeled(&t.target, &label),
                    guard,
                    update: t.update.clone(),
                };
                parent.insert(nt.id, t.id);
                res.push(nt);
            }
            for t in p.transitions().iter().filter(|t| t.source == l && !scc.contains(&t.id)) {
                let nt = Transition {
                    id: ids.fresh(),
                    source: src.clone(),
                    target: t.target.clone(),
                    guard: phi.and(&t.guard),
                    update: t.update.clone(),
                };
                parent.insert(nt.id, t.id);
                res.push(nt);
            }
            done.insert((l.clone(), phi.clone()));
            done_locs.insert(src, (l.clone(), phi.clone()));
            if done.len() > MAX_LABELED_LOCATIONS {
                return Err(CfrError::TooLarge);
            }
        }
    }
    let mut locations: BTreeSet<Location> = p.locations().iter().filter(|l| !scc_locs.contains(*l)).cloned().collect();
    locations.extend(done_locs.keys().cloned());
    // Dead transitions may target labels that were never processed.
    for t in &res {
        locations.insert(t.target.clone());
    }
    let mut transitions: Vec<Transition> = Vec::new();
    for t in p.transitions() {
        if !scc_locs.contains(&t.source) && !scc_locs.contains(&t.target) {
            parent.insert(t.id, t.id);
            transitions.push(t.clone());
        }
    }
    transitions.extend(res);
    let out = IntegerProgram::new(p.program_vars().to_vec(), locations, p.initial().clone(), transitions)?;
    Ok((out, parent, done_locs))
}

/// A shortest path from `from` to `to` over `scc`, preferring lower ids.
fn shortest_path(p: &IntegerProgram, scc: &BTreeSet<TransitionId>, from: &Location, to: &Location) -> Option<Vec<TransitionId>> {
    if from == to {
        return Some(Vec::new());
    }
    let mut pred: BTreeMap<Location, TransitionId> = BTreeMap::new();
    let mut seen: BTreeSet<Location> = [from.clone()].into_iter().collect();
    let mut queue: VecDeque<Location> = [from.clone()].into_iter().collect();
    while let Some(l) = queue.pop_front() {
        for t in p.outgoing(&l).filter(|t| scc.contains(&t.id)) {
            if seen.insert(t.target.clone()) {
                pred.insert(t.target.clone(), t.id);
                if &t.target == to {
                    let mut path = Vec::new();
                    let mut cur = to.clone();
                    while &cur != from {
                        let id = pred[&cur];
                        path.push(id);
                        cur = p.transition(id).unwrap().source.clone();
                    }
                    path.reverse();
                    return Some(path);
                }
                queue.push_back(t.target.clone());
            }
        }
    }
    None
}

fn locs_of(p: &IntegerProgram, ts: &BTreeSet<TransitionId>) -> BTreeSet<Location> {
    ts.iter().map(|id| p.transition(*id).unwrap()).flat_map(|t| [t.source.clone(), t.target.clone()]).collect()
}

fn fresh_initial(p: &IntegerProgram) -> Location {
    let mut name = String::from("l_new");
    while p.locations().iter().any(|l| l.base_name() == name) {
        name.push('_');
    }
    Location::new(&name)
}

/// Partial evaluation restricted to minimal cycles through `t_cfr`.
pub fn partial_evaluate_subscc(p: &IntegerProgram, t_cfr: &BTreeSet<TransitionId>, solver: &Solver) -> Result<Refinement, CfrError> {
    let sccs = sccs_topological(p);
    let Some(scc) = sccs.iter().find(|s| t_cfr.iter().next().is_some_and(|t| s.contains(t))) else {
        return Err(CfrError::NotAnScc);
    };
    if !t_cfr.is_subset(scc) {
        return Err(CfrError::SpansSccs);
    }

    let mut pieces: Vec<BTreeSet<TransitionId>> = Vec::new();
    for id in t_cfr {
        let t = p.transition(*id).unwrap();
        let mut piece: BTreeSet<TransitionId> =
            shortest_path(p, scc, &t.target, &t.source).expect("strongly connected").into_iter().collect();
        piece.insert(*id);
        let ends: BTreeSet<(Location, Location)> =
            piece.iter().map(|i| p.transition(*i).unwrap()).map(|t| (t.source.clone(), t.target.clone())).collect();
        for u in p.transitions() {
            if ends.contains(&(u.source.clone(), u.target.clone())) {
                piece.insert(u.id);
            }
        }
        pieces.push(piece);
    }
    'merge: loop {
        for i in 0..pieces.len() {
            for j in i + 1..pieces.len() {
                if !locs_of(p, &pieces[i]).is_disjoint(&locs_of(p, &pieces[j])) {
                    let b = pieces.remove(j);
                    pieces[i].extend(b);
                    continue 'merge;
                }
            }
        }
        break;
    }

    let mut ids = Ids { next: p.next_id() };
    let l_new = fresh_initial(p);
    let mut parent: BTreeMap<TransitionId, TransitionId> = BTreeMap::new();
    let mut current: Vec<Transition> = p.transitions().to_vec();
    let mut locations: BTreeSet<Location> = p.locations().clone();
    for piece in &pieces {
        let piece_locs = locs_of(p, piece);
        let entries = entry_transitions(p, piece).expect("nonempty").transitions();
        // The piece as a program of its own, entered from a fresh initial location.
        let mut ts: Vec<Transition> = piece.iter().map(|id| p.transition(*id).unwrap().clone()).collect();
        let mut copy_of: BTreeMap<TransitionId, TransitionId> = BTreeMap::new();
        for id in &entries {
            let mut t = p.transition(*id).unwrap().clone();
            t.id = ids.fresh();
            t.source = l_new.clone();
            copy_of.insert(t.id, *id);
            ts.push(t);
        }
        let mut locs = p.locations().clone();
        locs.insert(l_new.clone());
        let sub = IntegerProgram::new(p.program_vars().to_vec(), locs, l_new.clone(), ts)?;
        let layer = build_abstraction_layer(&sub, piece);
        let (refined, sub_parent, origin) = evaluate(&sub, piece, &layer, solver, &mut ids)?;
        let refined = cleanup(&refined, solver)?;
        let new_locs: Vec<(&Location, &(Location, Constraint))> =
            origin.iter().filter(|(l, _)| refined.locations().contains(*l)).collect();

        // Entry transitions of the piece now reach ⟨ℓ', true⟩.
        for t in current.iter_mut() {
            if !piece.contains(&t.id) && piece_locs.contains(&t.target) {
                t.target = labeled(&t.target, &Constraint::truth());
            }
        }
        // Transitions leaving the piece are copied to every ⟨ℓ, φ⟩.
        let mut next: Vec<Transition> = Vec::new();
        for t in current {
            if piece.contains(&t.id) {
                continue;
            }
            if piece_locs.contains(&t.source) {
                for (l, (_, phi)) in new_locs.iter().filter(|(_, (o, _))| *o == t.source) {
                    let nt = Transition { id: ids.fresh(), source: (*l).clone(), target: t.target.clone(), guard: phi.and(&t.guard), update: t.update.clone() };
                    parent.insert(nt.id, *parent.get(&t.id).unwrap_or(&t.id));
                    next.push(nt);
                }
            } else {
                next.push(t);
            }
        }
        for t in refined.transitions() {
            if t.source != l_new {
                let origin = sub_parent[&t.id];
                parent.insert(t.id, *copy_of.get(&origin).unwrap_or(&origin));
                next.push(t.clone());
            }
        }
        current = next;
        locations.extend(new_locs.into_iter().map(|(l, _)| l.clone()));
    }
    let out = IntegerProgram::new(p.program_vars().to_vec(), locations, p.initial().clone(), current)?;
    let out = cleanup(&out, solver)?;
    let parent = out.transitions().iter().map(|t| (t.id, *parent.get(&t.id).unwrap_or(&t.id))).collect();
    Ok(Refinement { program: out, parent })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::{parse_program, Polynomial, Var};

    fn pv(n: &str) -> Polynomial {
        Polynomial::var(Var::new(n))
    }

    fn nontrivial_sccs(p: &IntegerProgram) -> Vec<BTreeSet<Location>> {
        sccs_topological(p).iter().map(|s| locs_of(p, s)).collect()
    }

    fn lab(base: &str, atoms: Vec<Atom>) -> Location {
        Location::labeled(&Location::new(base), Constraint::from_atoms(atoms))
    }

    #[test]
    fn whole_scc_with_hand_layer() {
        let p = parse_program(include_str!("../corpus/phase_switch.koat")).unwrap();
        let s = Solver::default();
        let xneg = Atom::lt(&pv("x"), &Polynomial::zero());
        let ygez = Atom::ge(&pv("y"), &pv("z"));
        let both: BTreeSet<Atom> = [xneg.clone(), ygez.clone()].into_iter().collect();
        let layer = AbstractionLayer::from_map(
            [(Location::new("l1"), both.clone()), (Location::new("l2"), both)].into_iter().collect(),
        );
        let scc = sccs_topological(&p).remove(0);
        let r = partial_evaluate_scc(&p, &scc, &layer, &s).unwrap();
        let sccs = nontrivial_sccs(&r.program);
        assert_eq!(sccs.len(), 2);
        assert_eq!(sccs[0], [lab("l1", vec![xneg.clone()]), lab("l2", vec![xneg.clone()])].into_iter().collect());
        assert_eq!(
            sccs[1],
            [lab("l1", vec![ygez.clone()]), lab("l2", vec![xneg.clone(), ygez.clone()])].into_iter().collect()
        );
        assert_eq!(r.program.locations().len(), 7);
        for t in r.program.transitions() {
            assert_eq!(r.program.transitions().iter().filter(|u| u.id == t.id).count(), 1);
            assert!(p.transition(r.parent[&t.id]).is_some());
        }
    }

    #[test]
    fn harvested_layer_splits_phases() {
        let p = parse_program(include_str!("../corpus/phase_switch.koat")).unwrap();
        let s = Solver::default();
        let scc = sccs_topological(&p).remove(0);
        let layer = build_abstraction_layer(&p, &scc);
        assert!(layer.atoms(&Location::new("l1")).any(|a| *a == Atom::lt(&pv("x"), &Polynomial::zero())));
        let r = partial_evaluate_scc(&p, &scc, &layer, &s).unwrap();
        let sccs = nontrivial_sccs(&r.program);
        assert_eq!(sccs.len(), 2, "{}", r.program);
    }

    #[test]
    fn sub_scc_refines_only_the_self_loop() {
        let p = parse_program(include_str!("../corpus/guarded_counter.koat")).unwrap();
        let s = Solver::default();
        let t1: BTreeSet<TransitionId> = [TransitionId(1)].into_iter().collect();
        let r = partial_evaluate_subscc(&p, &t1, &s).unwrap();
        let q = &r.program;
        let x = pv("x");
        let window = [Atom::ge(&x, &Polynomial::constant(2)), Atom::le(&x, &Polynomial::constant(3))];
        let loops: Vec<&Transition> = q.transitions().iter().filter(|t| t.is_self_loop()).collect();
        assert_eq!(loops.len(), 1, "{q}");
        assert!(window.iter().all(|a| s.entails(&loops[0].guard, a) == Some(true)));
        assert_eq!(r.parent[&loops[0].id], TransitionId(1));
        // t2 keeps its guard and update, now entering ⟨l1, true⟩.
        let t2 = q.transition(TransitionId(2)).unwrap();
        assert_eq!(t2.target, Location::labeled(&Location::new("l1"), Constraint::truth()));
        assert_eq!(q.transitions().len(), 6);
    }

    #[test]
    fn spanning_sccs_is_an_error() {
        let text = "(GOAL COMPLEXITY)\n(STARTTERM (FUNCTIONSYMBOLS l0))\n(VAR x)\n(RULES\n  l0(x) -> l1(x)\n  l1(x) -> l1(x - 1) :|: x > 0\n  l1(x) -> l2(x)\n  l2(x) -> l2(x - 1) :|: x > 0\n)\n";
        let p = parse_program(text).unwrap();
        let both: BTreeSet<TransitionId> = [TransitionId(1), TransitionId(3)].into_iter().collect();
        assert_eq!(partial_evaluate_subscc(&p, &both, &Solver::default()).unwrap_err(), CfrError::SpansSccs);
    }
}
