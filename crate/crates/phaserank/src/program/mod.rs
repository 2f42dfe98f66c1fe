//! Integer programs: locations, guarded transitions with polynomial updates,
//! the textual ITS dialect, and graph queries (SCCs, entry transitions).

mod constraint;
mod graph;
mod parse;
mod poly;
mod print;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use constraint::{Atom, Constraint};
pub use graph::{entry_transitions, reachable_locations, sccs_topological, EntryInfo};
pub use parse::{parse_program, ParseError};
pub use poly::{Monomial, Polynomial, Var};

/// A location, optionally carrying the constraint label added by partial evaluation.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Location {
    base: Arc<str>,
    label: Option<Constraint>,
}

impl Location {
    pub fn new(name: &str) -> Self {
        Location { base: Arc::from(name), label: None }
    }

    pub fn labeled(base: &Location, label: Constraint) -> Self {
        Location { base: base.base.clone(), label: Some(label) }
    }

    pub fn base_name(&self) -> &str {
        &self.base
    }

    /// The location without its label.
    pub fn base(&self) -> Location {
        Location { base: self.base.clone(), label: None }
    }

    pub fn label(&self) -> Option<&Constraint> {
        self.label.as_ref()
    }

    /// Identifier used when printing: labels are mangled into the name.
    pub fn mangled(&self) -> String {
        match &self.label {
            None => self.base.to_string(),
            Some(l) => format!("{}__{}", self.base, l.mangle()),
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.mangled())
    }
}

impl fmt::Debug for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.label {
            None => write!(f, "{}", self.base),
            Some(l) => write!(f, "<{}, {}>", self.base, l),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TransitionId(pub u32);

impl fmt::Display for TransitionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

impl fmt::Debug for TransitionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Transition {
    pub id: TransitionId,
    pub source: Location,
    pub target: Location,
    pub guard: Constraint,
    /// Total on the program variables.
    pub update: BTreeMap<Var, Polynomial>,
}

impl Transition {
    pub fn update_of(&self, v: &Var) -> Polynomial {
        self.update.get(v).cloned().unwrap_or_else(|| Polynomial::var(v.clone()))
    }

    /// Variables read by the guard or the update.
    pub fn vars(&self) -> BTreeSet<Var> {
        let mut vs = self.guard.vars();
        for p in self.update.values() {
            vs.extend(p.vars());
        }
        vs
    }

    pub fn is_self_loop(&self) -> bool {
        self.source == self.target
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProgramError {
    #[error("transition {0} targets the initial location")]
    TargetsInitial(TransitionId),
    #[error("transition {0} uses a location not declared in the program")]
    UnknownLocation(TransitionId),
    #[error("transition {0} updates {1}, which is not a program variable")]
    UpdatesTemporary(TransitionId, Var),
    #[error("duplicate transition id {0}")]
    DuplicateId(TransitionId),
    #[error("duplicate program variable {0}")]
    DuplicateVariable(Var),
}

/// An integer program. Immutable once constructed.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct IntegerProgram {
    program_vars: Vec<Var>,
    locations: BTreeSet<Location>,
    initial: Location,
    transitions: Vec<Transition>,
}

impl IntegerProgram {
    /// Validates and builds a program. Missing update entries become identities.
    pub fn new(
        program_vars: Vec<Var>,
        locations: impl IntoIterator<Item = Location>,
        initial: Location,
        transitions: impl IntoIterator<Item = Transition>,
    ) -> Result<Self, ProgramError> {
        let mut seen = BTreeSet::new();
        for v in &program_vars {
            if !seen.insert(v.clone()) {
                return Err(ProgramError::DuplicateVariable(v.clone()));
            }
        }
        let mut locations: BTreeSet<Location> = locations.into_iter().collect();
        locations.insert(initial.clone());
        let mut ts: Vec<Transition> = Vec::new();
        let mut ids = BTreeSet::new();
        for mut t in transitions {
            if !ids.insert(t.id) {
                return Err(ProgramError::DuplicateId(t.id));
            }
            if t.target == initial {
                return Err(ProgramError::TargetsInitial(t.id));
            }
            if !locations.contains(&t.source) || !locations.contains(&t.target) {
                return Err(ProgramError::UnknownLocation(t.id));
            }
            if let Some(v) = t.update.keys().find(|v| !seen.contains(*v)) {
                return Err(ProgramError::UpdatesTemporary(t.id, v.clone()));
            }
            for v in &program_vars {
                t.update.entry(v.clone()).or_insert_with(|| Polynomial::var(v.clone()));
            }
            ts.push(t);
        }
        ts.sort_by_key(|t| t.id);
        Ok(IntegerProgram { program_vars, locations, initial, transitions: ts })
    }

    pub fn program_vars(&self) -> &[Var] {
        &self.program_vars
    }

    pub fn is_program_var(&self, v: &Var) -> bool {
        self.program_vars.contains(v)
    }

    pub fn locations(&self) -> &BTreeSet<Location> {
        &self.locations
    }

    pub fn initial(&self) -> &Location {
        &self.initial
    }

    /// Transitions sorted by id.
    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn transition(&self, id: TransitionId) -> Option<&Transition> {
        self.transitions.binary_search_by_key(&id, |t| t.id).ok().map(|i| &self.transitions[i])
    }

    pub fn next_id(&self) -> u32 {
        self.transitions.last().map(|t| t.id.0 + 1).unwrap_or(0)
    }

    /// Temporary variables of one transition, i.e. ones read but not in PV.
    pub fn temp_vars(&self, t: &Transition) -> BTreeSet<Var> {
        t.vars().into_iter().filter(|v| !self.is_program_var(v)).collect()
    }

    /// All temporary variables of the program.
    pub fn all_temp_vars(&self) -> BTreeSet<Var> {
        self.transitions.iter().flat_map(|t| self.temp_vars(t)).collect()
    }

    pub fn outgoing<'a>(&'a self, l: &'a Location) -> impl Iterator<Item = &'a Transition> + 'a {
        self.transitions.iter().filter(move |t| &t.source == l)
    }

    pub fn incoming<'a>(&'a self, l: &'a Location) -> impl Iterator<Item = &'a Transition> + 'a {
        self.transitions.iter().filter(move |t| &t.target == l)
    }

    /// A copy restricted to the given transitions and locations.
    pub fn with_parts(
        &self,
        program_vars: Vec<Var>,
        locations: BTreeSet<Location>,
        transitions: Vec<Transition>,
    ) -> Result<IntegerProgram, ProgramError> {
        IntegerProgram::new(program_vars, locations, self.initial.clone(), transitions)
    }
}

impl fmt::Display for IntegerProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print::print_program(self))
    }
}

/// A state: an assignment of integers to variables.
pub type State = BTreeMap<Var, i64>;
