//! Domain atoms, three-valued structures and models.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::lang::ast::{Element, PredicateKind, Vocabulary};

/// A predicate applied to a tuple of domain elements.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DomainAtom {
    pub pred: String,
    pub args: Vec<Element>,
}

impl DomainAtom {
    pub fn new(pred: impl Into<String>, args: Vec<Element>) -> Self {
        DomainAtom {
            pred: pred.into(),
            args,
        }
    }

    /// Shorthand for atoms over symbolic elements, mostly for tests.
    pub fn sym(pred: &str, args: &[&str]) -> Self {
        DomainAtom::new(
            pred,
            args.iter().map(|a| parse_element(a)).collect(),
        )
    }
}

fn parse_element(s: &str) -> Element {
    match s.parse::<i64>() {
        Ok(i) => Element::Int(i),
        Err(_) => Element::Sym(s.to_owned()),
    }
}

impl fmt::Display for DomainAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pred)?;
        if !self.args.is_empty() {
            f.write_str("(")?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")?;
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("malformed atom `{0}`")]
pub struct AtomSyntaxError(pub String);

/// Parses `pred(el1,el2)`, `pred()` or `pred`. Numeric elements become
/// integers.
impl FromStr for DomainAtom {
    type Err = AtomSyntaxError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let bad = || AtomSyntaxError(s.to_owned());
        let is_ident = |x: &str| {
            !x.is_empty()
                && x.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '-')
        };
        match s.find('(') {
            None => {
                if is_ident(s) && !s.starts_with(|c: char| c.is_ascii_digit()) {
                    Ok(DomainAtom::new(s, Vec::new()))
                } else {
                    Err(bad())
                }
            }
            Some(open) => {
                let pred = s[..open].trim();
                let rest = s[open + 1..].strip_suffix(')').ok_or_else(bad)?;
                if !is_ident(pred) {
                    return Err(bad());
                }
                let args = if rest.trim().is_empty() {
                    Vec::new()
                } else {
                    rest.split(',')
                        .map(|a| {
                            let a = a.trim();
                            if is_ident(a) {
                                Ok(parse_element(a))
                            } else {
                                Err(bad())
                            }
                        })
                        .collect::<Result<_, _>>()?
                };
                Ok(DomainAtom::new(pred, args))
            }
        }
    }
}

/// Certainly-true and certainly-false tuples of one predicate.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PredicateInterp {
    pub ct: BTreeSet<Vec<Element>>,
    pub cf: BTreeSet<Vec<Element>>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StructureError {
    #[error("atom {0} would be both true and false")]
    Conflict(DomainAtom),
    #[error("atom {0} is not well-sorted for the vocabulary")]
    IllSorted(DomainAtom),
    #[error("structure is not total: {0} is unknown")]
    NotTotal(DomainAtom),
}

/// Per-predicate certainly-true / certainly-false sets; everything else is
/// unknown.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ThreeValuedStructure {
    pub name: String,
    pub vocabulary: String,
    interps: BTreeMap<String, PredicateInterp>,
}

impl ThreeValuedStructure {
    pub fn new(name: impl Into<String>, vocabulary: impl Into<String>) -> Self {
        ThreeValuedStructure {
            name: name.into(),
            vocabulary: vocabulary.into(),
            interps: BTreeMap::new(),
        }
    }

    /// The empty (all-unknown) structure over `voc`.
    pub fn empty(voc: &Vocabulary) -> Self {
        ThreeValuedStructure::new("S", voc.name.clone())
    }

    pub fn value(&self, atom: &DomainAtom) -> Option<bool> {
        let interp = self.interps.get(&atom.pred)?;
        if interp.ct.contains(&atom.args) {
            Some(true)
        } else if interp.cf.contains(&atom.args) {
            Some(false)
        } else {
            None
        }
    }

    /// Records a value; setting the opposite of a known value is a conflict.
    pub fn set(&mut self, atom: &DomainAtom, value: bool) -> Result<bool, StructureError> {
        match self.value(atom) {
            Some(v) if v == value => return Ok(false),
            Some(_) => return Err(StructureError::Conflict(atom.clone())),
            None => {}
        }
        let interp = self.interps.entry(atom.pred.clone()).or_default();
        if value {
            interp.ct.insert(atom.args.clone());
        } else {
            interp.cf.insert(atom.args.clone());
        }
        Ok(true)
    }

    /// Forgets whatever is known about `atom`.
    pub fn unset(&mut self, atom: &DomainAtom) {
        if let Some(i) = self.interps.get_mut(&atom.pred) {
            i.ct.remove(&atom.args);
            i.cf.remove(&atom.args);
        }
    }

    pub fn interp(&self, pred: &str) -> Option<&PredicateInterp> {
        self.interps.get(pred)
    }

    /// All two-valued atoms with their values, in atom order.
    pub fn known(&self) -> impl Iterator<Item = (DomainAtom, bool)> + '_ {
        self.interps.iter().flat_map(|(p, i)| {
            i.ct.iter()
                .map(move |t| (DomainAtom::new(p.clone(), t.clone()), true))
                .chain(
                    i.cf.iter()
                        .map(move |t| (DomainAtom::new(p.clone(), t.clone()), false)),
                )
        })
    }

    pub fn known_count(&self) -> usize {
        self.interps.values().map(|i| i.ct.len() + i.cf.len()).sum()
    }

    pub fn is_total(&self, voc: &Vocabulary) -> bool {
        self.known_count() == voc.atom_count()
    }

    /// Verifies that every recorded atom is well-sorted.
    pub fn check_sorts(&self, voc: &Vocabulary) -> Result<(), StructureError> {
        for (atom, _) in self.known() {
            if !voc.is_well_sorted(&atom) {
                return Err(StructureError::IllSorted(atom));
            }
        }
        Ok(())
    }

    /// Whether every known value of `other` is also known, identically, here.
    pub fn extends(&self, other: &ThreeValuedStructure) -> bool {
        other.known().all(|(a, v)| self.value(&a) == Some(v))
    }

    /// Keeps only the atoms of predicates of the given kind.
    pub fn restricted_to(&self, voc: &Vocabulary, kind: PredicateKind) -> Self {
        let mut out = ThreeValuedStructure::new(self.name.clone(), self.vocabulary.clone());
        for (p, i) in &self.interps {
            if voc.kind_of(p) == Some(kind) {
                out.interps.insert(p.clone(), i.clone());
            }
        }
        out
    }

    /// Marks every unknown atom false.
    pub fn close_world(&mut self, voc: &Vocabulary) {
        for atom in voc.all_atoms() {
            if self.value(&atom).is_none() {
                let _ = self.set(&atom, false);
            }
        }
    }
}

/// A two-valued structure: every domain atom of the vocabulary is known.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Model(ThreeValuedStructure);

impl Model {
    pub fn new(structure: ThreeValuedStructure, voc: &Vocabulary) -> Result<Model, StructureError> {
        structure.check_sorts(voc)?;
        if let Some(a) = voc.all_atoms().into_iter().find(|a| structure.value(a).is_none()) {
            return Err(StructureError::NotTotal(a));
        }
        Ok(Model(structure))
    }

    /// Builds a model from the set of true atoms; all others are false.
    pub fn from_true_atoms<'a>(
        voc: &Vocabulary,
        true_atoms: impl IntoIterator<Item = &'a DomainAtom>,
    ) -> Result<Model, StructureError> {
        let mut s = ThreeValuedStructure::new("M", voc.name.clone());
        for a in true_atoms {
            s.set(a, true)?;
        }
        s.close_world(voc);
        Model::new(s, voc)
    }

    /// Value of an atom. Atoms outside the vocabulary are false.
    pub fn value(&self, atom: &DomainAtom) -> bool {
        self.0.value(atom).unwrap_or(false)
    }

    pub fn structure(&self) -> &ThreeValuedStructure {
        &self.0
    }

    pub fn into_structure(self) -> ThreeValuedStructure {
        self.0
    }

    pub fn true_atoms(&self) -> Vec<DomainAtom> {
        self.0.known().filter(|(_, v)| *v).map(|(a, _)| a).collect()
    }
}
