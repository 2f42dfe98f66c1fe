//! Worst-case runtime bounds for integer transition systems.

pub mod bound;
pub mod cfr;
pub mod cli;
pub mod analysis;
pub mod fm;
pub mod invariants;
pub mod mprf;
pub mod program;
pub mod sim;
pub mod size;
pub mod solver;
pub mod tables;
