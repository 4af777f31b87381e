//! Structure refinement by ground unit propagation.

use crate::lang::ast::Vocabulary;
use crate::lang::TypedTheory;
use crate::solver::Solver;
use crate::structure::ThreeValuedStructure;

use super::{ground, GroundError, GroundOptions};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Propagation {
    Consistent(ThreeValuedStructure),
    /// No model extends the input.
    Inconsistent,
}

/// Grounds, unit-propagates at the root and feeds the forced values back
/// until nothing changes. Values forced on atoms of definitions that stay
/// rule groups are not fed back.
pub fn propagate(
    voc: &Vocabulary,
    theory: &TypedTheory,
    structure: &ThreeValuedStructure,
    options: &GroundOptions,
) -> Result<Propagation, GroundError> {
    let mut s = structure.clone();
    loop {
        let g = ground(voc, theory, &s, options)?;
        let mut solver = Solver::new(&g.ecnf, 0);
        let Some(values) = solver.root_values() else {
            return Ok(Propagation::Inconsistent);
        };
        let mut next = g.known.clone();
        for (a, v) in g.ecnf.atoms() {
            if g.grouped_predicates.contains(&a.pred) {
                continue;
            }
            if let Some(b) = values[v as usize] {
                if next.set(a, b).is_err() {
                    return Ok(Propagation::Inconsistent);
                }
            }
        }
        if next == s {
            return Ok(Propagation::Consistent(s));
        }
        s = next;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::load;
    use crate::structure::DomainAtom;

    fn run(src: &str) -> Propagation {
        let (kb, typed) = load(src).unwrap();
        propagate(&kb.vocabulary, &typed, &kb.structure, &GroundOptions::default()).unwrap()
    }

    #[test]
    fn implication_chain() {
        let Propagation::Consistent(s) = run("vocabulary V { pred p pred q } theory T : V { p. p => q. }")
        else {
            panic!()
        };
        assert_eq!(s.value(&DomainAtom::sym("p", &[])), Some(true));
        assert_eq!(s.value(&DomainAtom::sym("q", &[])), Some(true));
    }

    #[test]
    fn empty_theory_changes_nothing() {
        let src = "vocabulary V { type T = {a,b} pred p(T) } theory T : V { } structure S : V { p = {a} }";
        let (kb, _) = load(src).unwrap();
        assert_eq!(run(src), Propagation::Consistent(kb.structure));
    }

    #[test]
    fn contradiction() {
        assert_eq!(
            run("vocabulary V { pred p } theory T : V { p. ~p. }"),
            Propagation::Inconsistent
        );
    }
}
