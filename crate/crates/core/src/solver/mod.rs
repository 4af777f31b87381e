//! Satisfiability and minimization over ECNF.

mod cdcl;

use crate::grounder::ecnf::{CardCmp, Ecnf, Lit};

pub use cdcl::{SolveResult, Solver, Stats};

/// Weighted literals to minimize.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Objective {
    pub terms: Vec<(Lit, u64)>,
}

impl Objective {
    pub fn new(terms: Vec<(Lit, u64)>) -> Self {
        Objective { terms }
    }

    pub fn count(lits: impl IntoIterator<Item = Lit>) -> Self {
        Objective {
            terms: lits.into_iter().map(|l| (l, 1)).collect(),
        }
    }

    pub fn value(&self, model: &[bool]) -> u64 {
        self.terms
            .iter()
            .filter(|(l, _)| l.holds(model[l.var() as usize]))
            .map(|(_, w)| *w)
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MinimizeResult {
    Optimal { model: Vec<bool>, value: u64 },
    Unsat,
}

impl Solver {
    /// Linear descent: every model found tightens the bound to one below its
    /// value until no model is left. The bound constraints stay in the
    /// solver afterwards.
    pub fn minimize(&mut self, objective: &Objective, assumptions: &[Lit]) -> MinimizeResult {
        let lits: Vec<Lit> = objective.terms.iter().map(|(l, _)| *l).collect();
        let weights: Vec<i64> = objective.terms.iter().map(|(_, w)| *w as i64).collect();
        let mut best = None;
        while let SolveResult::Sat(model) = self.solve(assumptions) {
            let value = objective.value(&model);
            best = Some((model, value));
            if value == 0 {
                break;
            }
            self.add_constraint(&lits, &weights, CardCmp::Le, value as i64 - 1);
        }
        match best {
            Some((model, value)) => MinimizeResult::Optimal { model, value },
            None => MinimizeResult::Unsat,
        }
    }
}

pub fn solve(ecnf: &Ecnf, assumptions: &[Lit], seed: u64) -> (SolveResult, Stats) {
    let mut s = Solver::new(ecnf, seed);
    let r = s.solve(assumptions);
    (r, s.stats())
}

pub fn minimize(
    ecnf: &Ecnf,
    objective: &Objective,
    assumptions: &[Lit],
    seed: u64,
) -> (MinimizeResult, Stats) {
    let mut s = Solver::new(ecnf, seed);
    let r = s.minimize(objective, assumptions);
    (r, s.stats())
}
