//! Lowering of a typed theory plus a three-valued structure to ECNF.
//!
//! Definitions whose bodies end up mentioning only their own defined atoms
//! are evaluated during grounding and never reach the ECNF. The rest become
//! rule groups.

pub mod ecnf;
mod encode;
pub mod instantiate;
pub mod propagate;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::fixpoint::{FixpointError, GroundRuleSet, StratStatus};
use crate::lang::ast::{Aggregate, Definition, Vocabulary};
use crate::lang::eval::{Env, EvalError};
use crate::lang::TypedTheory;
use crate::structure::{DomainAtom, Model, StructureError, ThreeValuedStructure};

pub use ecnf::{
    CardCmp, CardConstraint, Ecnf, EcnfError, EcnfRule, EcnfSize, Lit, Provenance, RuleGroup,
    RuleKind, Var,
};
pub use instantiate::{GFormula, Instantiator};
pub use propagate::{propagate, Propagation};

use encode::{EncodeInput, GroupInput};

pub const DEFAULT_SIZE_CAP: usize = 1_000_000;
pub const SIZE_CAP_ENV: &str = "KBREVISE_SIZE_CAP";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GroundError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("set expression with {size} instances exceeds the size cap of {cap}")]
    SizeCap { size: usize, cap: usize },
    #[error("product aggregate with {factors} undecided factors exceeds the limit of {limit}")]
    ProductTooLarge { factors: usize, limit: usize },
    #[error("definition {definition} is not stratified; cycle through negation: {}", cycle.join(" -> "))]
    NotStratified { definition: usize, cycle: Vec<String> },
    #[error(transparent)]
    Structure(#[from] StructureError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GroundOptions {
    /// Largest number of instances of a single quantifier or set expression.
    pub size_cap: usize,
}

impl Default for GroundOptions {
    fn default() -> Self {
        GroundOptions {
            size_cap: DEFAULT_SIZE_CAP,
        }
    }
}

impl GroundOptions {
    /// Defaults, with the size cap taken from `KBREVISE_SIZE_CAP` when set.
    pub fn from_env() -> Self {
        let size_cap = std::env::var(SIZE_CAP_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(DEFAULT_SIZE_CAP);
        GroundOptions { size_cap }
    }
}

#[derive(Clone, Debug)]
pub struct Grounding {
    pub ecnf: Ecnf,
    /// The input structure extended with evaluated definitions and with
    /// defined atoms that have no applicable rule.
    pub known: ThreeValuedStructure,
    /// Predicates whose definitions were kept as rule groups.
    pub grouped_predicates: BTreeSet<String>,
}

impl Grounding {
    /// Domain-level model of an ECNF assignment (`value[0]` unused). Atoms
    /// that neither the ECNF nor `known` mention are free and taken false.
    pub fn model(&self, voc: &Vocabulary, value: &[bool]) -> Model {
        let mut s = self.known.clone();
        for (a, v) in self.ecnf.atoms() {
            if s.value(a).is_none() {
                let _ = s.set(a, value[v as usize]);
            }
        }
        s.close_world(voc);
        Model::new(s, voc).expect("closed structure is total")
    }
}

struct Known<'a> {
    base: &'a ThreeValuedStructure,
    evaluated: BTreeMap<DomainAtom, bool>,
    derived_false: BTreeSet<DomainAtom>,
    pending_preds: BTreeSet<String>,
}

impl Known<'_> {
    fn value(&self, a: &DomainAtom) -> Option<bool> {
        if let Some(&v) = self.evaluated.get(a) {
            return Some(v);
        }
        if self.pending_preds.contains(&a.pred) {
            return self.derived_false.contains(a).then_some(false);
        }
        self.base.value(a)
    }
}

type Instances = BTreeMap<DomainAtom, Vec<GFormula>>;

fn instantiate_definition(inst: &Instantiator, d: &Definition) -> Result<Instances, GroundError> {
    let mut out: Instances = BTreeMap::new();
    for r in &d.rules {
        for (head, body) in inst.rule_instances(r)? {
            out.entry(head).or_default().push(body);
        }
    }
    Ok(out)
}

fn defined_atoms(voc: &Vocabulary, d: &Definition) -> Vec<DomainAtom> {
    d.defined_predicates()
        .iter()
        .filter_map(|p| voc.predicate(p))
        .flat_map(|p| voc.atoms_of(p))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Node {
    Atom(DomainAtom),
    Aux(usize),
}

impl Node {
    fn name(&self) -> String {
        match self {
            Node::Atom(a) => a.to_string(),
            Node::Aux(i) => format!("_aux{i}"),
        }
    }
}

/// Whether the instances can be evaluated on their own: no aggregate is
/// left and every remaining atom is defined here.
fn evaluable(heads: &Instances, preds: &BTreeSet<String>) -> bool {
    fn closed(f: &GFormula, preds: &BTreeSet<String>) -> bool {
        match f {
            GFormula::Const(_) => true,
            GFormula::Lit(a, _) => preds.contains(&a.pred),
            GFormula::And(v) | GFormula::Or(v) => v.iter().all(|g| closed(g, preds)),
            GFormula::Agg(_) => false,
        }
    }
    heads.values().flatten().all(|b| closed(b, preds))
}

/// Least fixpoint of fully instantiated rules; nested connectives become
/// auxiliary defined nodes.
fn evaluate_instances(
    index: usize,
    heads: &Instances,
    atoms: &[DomainAtom],
) -> Result<BTreeSet<DomainAtom>, GroundError> {
    let mut rules: Vec<(Node, Vec<(Node, bool)>)> = Vec::new();
    let mut aux = 0;
    fn node(f: &GFormula, rules: &mut Vec<(Node, Vec<(Node, bool)>)>, aux: &mut usize) -> (Node, bool) {
        match f {
            GFormula::Lit(a, p) => (Node::Atom(a.clone()), *p),
            _ => {
                let n = Node::Aux(*aux);
                *aux += 1;
                match f {
                    GFormula::Const(true) => rules.push((n.clone(), Vec::new())),
                    GFormula::And(v) => {
                        let body = v.iter().map(|g| node(g, rules, aux)).collect();
                        rules.push((n.clone(), body));
                    }
                    GFormula::Or(v) => {
                        for g in v {
                            let l = node(g, rules, aux);
                            rules.push((n.clone(), vec![l]));
                        }
                    }
                    _ => {}
                }
                (n, true)
            }
        }
    }
    for (h, bodies) in heads {
        for b in bodies {
            let body = match b {
                GFormula::Const(true) => Vec::new(),
                GFormula::And(v) => v.iter().map(|g| node(g, &mut rules, &mut aux)).collect(),
                g => vec![node(g, &mut rules, &mut aux)],
            };
            rules.push((Node::Atom(h.clone()), body));
        }
    }
    let defined = atoms
        .iter()
        .cloned()
        .map(Node::Atom)
        .chain((0..aux).map(Node::Aux));
    let mut rs = GroundRuleSet::new(defined, std::iter::empty());
    for (h, body) in rules {
        rs.add_rule(h, body).expect("all nodes are declared");
    }
    match rs.evaluate(&|_| None) {
        Ok(lfp) => Ok(lfp
            .into_iter()
            .filter_map(|n| match n {
                Node::Atom(a) => Some(a),
                Node::Aux(_) => None,
            })
            .collect()),
        Err(FixpointError::NotStratified(cycle)) => Err(GroundError::NotStratified {
            definition: index,
            cycle: cycle.iter().map(Node::name).collect(),
        }),
        Err(e) => unreachable!("closed rule set: {e}"),
    }
}

/// Grounds a type-checked theory against a well-sorted structure.
pub fn ground(
    voc: &Vocabulary,
    theory: &TypedTheory,
    structure: &ThreeValuedStructure,
    options: &GroundOptions,
) -> Result<Grounding, GroundError> {
    structure.check_sorts(voc)?;
    let theory = theory.theory();
    let defs = &theory.definitions;
    let mut known = Known {
        base: structure,
        evaluated: BTreeMap::new(),
        derived_false: BTreeSet::new(),
        pending_preds: defs.iter().flat_map(|d| d.defined_predicates()).collect(),
    };
    let mut pending: Vec<usize> = (0..defs.len()).collect();
    let mut inconsistent = false;

    let instances = loop {
        let instances = loop {
            let lookup = |a: &DomainAtom| known.value(a);
            let inst = Instantiator {
                voc,
                lookup: &lookup,
                cap: options.size_cap,
            };
            let mut instances = Vec::with_capacity(pending.len());
            for &d in &pending {
                instances.push((d, instantiate_definition(&inst, &defs[d])?));
            }
            let mut fresh = Vec::new();
            for (d, heads) in &instances {
                for a in defined_atoms(voc, &defs[*d]) {
                    if !heads.contains_key(&a) && !known.derived_false.contains(&a) {
                        fresh.push(a);
                    }
                }
            }
            if fresh.is_empty() {
                break instances;
            }
            known.derived_false.extend(fresh);
        };

        let mut progressed = false;
        for (d, heads) in &instances {
            let preds = defs[*d].defined_predicates();
            if !evaluable(heads, &preds) {
                continue;
            }
            let atoms = defined_atoms(voc, &defs[*d]);
            let lfp = evaluate_instances(*d, heads, &atoms)?;
            for a in atoms {
                let v = lfp.contains(&a);
                if structure.value(&a).is_some_and(|x| x != v) {
                    inconsistent = true;
                }
                known.evaluated.insert(a, v);
            }
            pending.retain(|p| p != d);
            for p in preds {
                known.pending_preds.remove(&p);
            }
            progressed = true;
        }
        if !progressed {
            break instances;
        }
    };

    let lookup = |a: &DomainAtom| known.value(a);
    let inst = Instantiator {
        voc,
        lookup: &lookup,
        cap: options.size_cap,
    };
    let mut sentences = Vec::new();
    for (i, s) in theory.sentences.iter().enumerate() {
        let g = inst.formula(&s.formula, &mut Env::new())?;
        if g != GFormula::Const(true) {
            sentences.push((i, g));
        }
    }

    let mut pins = Vec::new();
    for &d in &pending {
        for a in defined_atoms(voc, &defs[d]) {
            if let Some(v) = structure.value(&a) {
                if known.derived_false.contains(&a) {
                    inconsistent |= v;
                } else {
                    pins.push((a, v));
                }
            }
        }
    }

    let groups: Vec<GroupInput> = instances
        .into_iter()
        .map(|(definition, heads)| GroupInput { definition, heads })
        .collect();
    let ecnf = encode::encode(EncodeInput {
        sentences,
        groups,
        pins,
        inconsistent,
    });

    for g in &ecnf.groups {
        if let StratStatus::NonStratified(cycle) = g.rule_set().stratify().status {
            return Err(GroundError::NotStratified {
                definition: g.definition,
                cycle: cycle.iter().map(|v| var_name(&ecnf, *v)).collect(),
            });
        }
    }

    let mut out = structure.clone();
    for (a, v) in known.evaluated.iter() {
        let _ = out.set(a, *v);
    }
    for a in &known.derived_false {
        if known.pending_preds.contains(&a.pred) {
            let _ = out.set(a, false);
        }
    }
    Ok(Grounding {
        ecnf,
        known: out,
        grouped_predicates: known.pending_preds,
    })
}

impl Grounding {
    /// Instantiates a set expression against this grounding and returns
    /// `(literal, weight)` terms plus the weight of conditions that are
    /// already true. Conditions get literals in the ECNF, which may grow.
    pub fn set_terms(
        &mut self,
        voc: &Vocabulary,
        agg: &Aggregate,
        options: &GroundOptions,
    ) -> Result<(Vec<(Lit, i64)>, i64), GroundError> {
        let known = &self.known;
        let lookup = |a: &DomainAtom| known.value(a);
        let inst = Instantiator {
            voc,
            lookup: &lookup,
            cap: options.size_cap,
        };
        let elems = inst.elements(agg, &mut Env::new())?;
        let mut constant = 0i64;
        let mut conds = Vec::new();
        let mut weights = Vec::new();
        for (g, w) in elems {
            if g == GFormula::Const(true) {
                constant += w;
            } else {
                conds.push(g);
                weights.push(w);
            }
        }
        let lits = encode::encode_conditions(&mut self.ecnf, &conds, "objective");
        Ok((lits.into_iter().zip(weights).collect(), constant))
    }
}

fn var_name(e: &Ecnf, v: Var) -> String {
    match e.provenance(v) {
        Some(Provenance::Atom(a)) => a.to_string(),
        Some(Provenance::Tseitin(t)) => format!("_{v} ({t})"),
        None => format!("_{v}"),
    }
}
