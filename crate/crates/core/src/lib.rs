pub mod cli;
pub mod fixpoint;
pub mod grounder;
pub mod inference;
pub mod lang;
pub mod solver;
pub mod structure;
