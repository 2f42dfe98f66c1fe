//! Runtime and size bound tables.

use std::collections::BTreeMap;
use std::fmt;

use crate::bound::Bound;
use crate::program::{TransitionId, Var};

/// `RB: T -> B`. Missing entries are ω.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RuntimeBoundTable {
    entries: BTreeMap<TransitionId, Bound>,
}

impl RuntimeBoundTable {
    pub fn get(&self, t: TransitionId) -> Bound {
        self.entries.get(&t).cloned().unwrap_or_else(Bound::omega)
    }

    pub fn set(&mut self, t: TransitionId, b: Bound) {
        self.entries.insert(t, b);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TransitionId, &Bound)> {
        self.entries.iter()
    }

    pub fn remove(&mut self, t: TransitionId) {
        self.entries.remove(&t);
    }
}

impl fmt::Display for RuntimeBoundTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (t, b) in &self.entries {
            writeln!(f, "RB({t}) = {b}")?;
        }
        Ok(())
    }
}

/// `SB: T x PV -> B`. Missing entries are ω.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SizeBoundTable {
    entries: BTreeMap<(TransitionId, Var), Bound>,
}

impl SizeBoundTable {
    pub fn get(&self, t: TransitionId, v: &Var) -> Bound {
        self.entries.get(&(t, v.clone())).cloned().unwrap_or_else(Bound::omega)
    }

    pub fn set(&mut self, t: TransitionId, v: Var, b: Bound) {
        self.entries.insert((t, v), b);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(TransitionId, Var), &Bound)> {
        self.entries.iter()
    }

    /// The substitution `v ↦ SB(t, v)`.
    pub fn substitution(&self, t: TransitionId, vars: &[Var]) -> BTreeMap<Var, Bound> {
        vars.iter().map(|v| (v.clone(), self.get(t, v))).collect()
    }
}

impl fmt::Display for SizeBoundTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for ((t, v), b) in &self.entries {
            writeln!(f, "SB({t}, {v}) = {b}")?;
        }
        Ok(())
    }
}
