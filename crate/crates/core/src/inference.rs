//! Model checking, model expansion, optimization and model revision.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grounder::{
    ground, propagate, EcnfSize, GroundError, GroundOptions, Grounding, Lit, Propagation,
};
use crate::lang::ast::{AggFn, Aggregate, PredicateKind, Theory, Vocabulary};
use crate::lang::eval::{sentences_hold, EvalError};
use crate::lang::TypedTheory;
use crate::solver::{MinimizeResult, Objective, SolveResult, Solver, Stats};
use crate::structure::{DomainAtom, Model, StructureError, ThreeValuedStructure};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InferenceError {
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error("objectives must be card or sum aggregates, not {0}")]
    UnsupportedObjective(String),
    #[error("atom {0} is both a required change and fixed")]
    ChangeAndFixed(DomainAtom),
    #[error("atom {0} belongs to a data predicate")]
    DataAtom(DomainAtom),
    #[error("atom {0} is not a well-sorted atom of the vocabulary")]
    UnknownAtom(DomainAtom),
    #[error("the given model does not satisfy the theory")]
    NotAModel,
    #[error("weight of {0} must be at least 1")]
    BadWeight(DomainAtom),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InferOptions {
    pub seed: u64,
    /// Propagate before grounding.
    pub propagate: bool,
    pub ground: GroundOptions,
}

impl Default for InferOptions {
    fn default() -> Self {
        InferOptions {
            seed: 0,
            propagate: true,
            ground: GroundOptions::default(),
        }
    }
}

/// Grounding sizes without and with propagation, plus search counters.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineStats {
    pub naive: EcnfSize,
    pub propagated: Option<EcnfSize>,
    pub solver: Stats,
}

/// Grounds, optionally after propagation. `None` when propagation already
/// shows there is no model.
fn prepare(
    voc: &Vocabulary,
    theory: &TypedTheory,
    structure: &ThreeValuedStructure,
    opts: &InferOptions,
) -> Result<(Option<Grounding>, PipelineStats), InferenceError> {
    let naive = ground(voc, theory, structure, &opts.ground)?;
    let mut stats = PipelineStats {
        naive: naive.ecnf.size(),
        ..Default::default()
    };
    if !opts.propagate {
        return Ok((Some(naive), stats));
    }
    match propagate(voc, theory, structure, &opts.ground)? {
        Propagation::Inconsistent => Ok((None, stats)),
        Propagation::Consistent(s) => {
            let g = ground(voc, theory, &s, &opts.ground)?;
            stats.propagated = Some(g.ecnf.size());
            Ok((Some(g), stats))
        }
    }
}

/// Whether a total structure satisfies every sentence and every definition.
/// Definitions are evaluated from the model's open atoms; a definition that
/// is not stratified is an error.
pub fn model_check(
    voc: &Vocabulary,
    theory: &TypedTheory,
    model: &Model,
) -> Result<bool, InferenceError> {
    let holds = |a: &DomainAtom| model.value(a);
    if !sentences_hold(voc, theory.theory(), &holds)? {
        return Ok(false);
    }
    for (i, d) in theory.theory().definitions.iter().enumerate() {
        let mut s = model.structure().clone();
        let mut atoms = Vec::new();
        for p in d.defined_predicates() {
            if let Some(decl) = voc.predicate(&p) {
                atoms.extend(voc.atoms_of(decl));
            }
        }
        atoms.iter().for_each(|a| s.unset(a));
        let single = TypedTheory {
            theory: Theory {
                sentences: Vec::new(),
                definitions: vec![d.clone()],
                ..theory.theory().clone()
            },
            desugared: theory.is_desugared(),
        };
        let g = ground(voc, &single, &s, &GroundOptions::default()).map_err(|e| match e {
            GroundError::NotStratified { cycle, .. } => GroundError::NotStratified {
                definition: i,
                cycle,
            },
            e => e,
        })?;
        if atoms
            .iter()
            .any(|a| g.known.value(a) != Some(model.value(a)))
        {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Expansion {
    pub model: Option<Model>,
    pub stats: PipelineStats,
}

/// A model extending the structure, if there is one.
pub fn model_expand(
    voc: &Vocabulary,
    theory: &TypedTheory,
    structure: &ThreeValuedStructure,
    opts: &InferOptions,
) -> Result<Expansion, InferenceError> {
    let (g, mut stats) = prepare(voc, theory, structure, opts)?;
    let Some(g) = g else {
        return Ok(Expansion { model: None, stats });
    };
    let mut solver = Solver::new(&g.ecnf, opts.seed);
    let result = solver.solve(&[]);
    stats.solver = solver.stats();
    let model = match result {
        SolveResult::Sat(m) => Some(g.model(voc, &m)),
        SolveResult::Unsat => None,
    };
    Ok(Expansion { model, stats })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Optimum {
    /// The model and the objective value it attains.
    pub best: Option<(Model, i64)>,
    pub stats: PipelineStats,
}

/// A model extending the structure with the least value of a card or sum
/// aggregate.
pub fn optimize(
    voc: &Vocabulary,
    theory: &TypedTheory,
    structure: &ThreeValuedStructure,
    objective: &Aggregate,
    opts: &InferOptions,
) -> Result<Optimum, InferenceError> {
    if !matches!(objective.func, AggFn::Card | AggFn::Sum) {
        return Err(InferenceError::UnsupportedObjective(format!("{:?}", objective.func).to_lowercase()));
    }
    let (g, mut stats) = prepare(voc, theory, structure, opts)?;
    let Some(mut g) = g else {
        return Ok(Optimum { best: None, stats });
    };
    let (terms, constant) = g.set_terms(voc, objective, &opts.ground)?;
    let mut offset = constant;
    let mut obj = Vec::new();
    for (l, w) in terms {
        if w > 0 {
            obj.push((l, w as u64));
        } else if w < 0 {
            offset += w;
            obj.push((!l, w.unsigned_abs()));
        }
    }
    let mut solver = Solver::new(&g.ecnf, opts.seed);
    let result = solver.minimize(&Objective::new(obj), &[]);
    stats.solver = solver.stats();
    let best = match result {
        MinimizeResult::Optimal { model, value } => Some((g.model(voc, &model), offset + value as i64)),
        MinimizeResult::Unsat => None,
    };
    Ok(Optimum { best, stats })
}

/// Per-atom change weights; atoms not listed weigh 1.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CostFunction {
    weights: BTreeMap<DomainAtom, u64>,
}

impl CostFunction {
    pub fn new(weights: BTreeMap<DomainAtom, u64>) -> Result<Self, InferenceError> {
        if let Some((a, _)) = weights.iter().find(|(_, w)| **w == 0) {
            return Err(InferenceError::BadWeight(a.clone()));
        }
        Ok(CostFunction { weights })
    }

    pub fn weight(&self, a: &DomainAtom) -> u64 {
        self.weights.get(a).copied().unwrap_or(1)
    }

    pub fn atoms(&self) -> impl Iterator<Item = &DomainAtom> {
        self.weights.keys()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Criterion {
    /// Number of additional changes.
    Count,
    Weighted(CostFunction),
}

impl Criterion {
    pub fn weight(&self, a: &DomainAtom) -> u64 {
        match self {
            Criterion::Count => 1,
            Criterion::Weighted(c) => c.weight(a),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RevisionProblem<'a> {
    pub vocabulary: &'a Vocabulary,
    pub theory: &'a TypedTheory,
    pub model: &'a Model,
    /// Atoms that must change value.
    pub changes: BTreeSet<DomainAtom>,
    /// Atoms that must keep their value.
    pub fixed: BTreeSet<DomainAtom>,
    pub criterion: Criterion,
    pub verify_model: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Change {
    pub atom: DomainAtom,
    pub from: bool,
    pub to: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RevisionStatus {
    Revised,
    Unsat,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RevisionResult {
    pub status: RevisionStatus,
    pub model: Option<Model>,
    pub required: Vec<Change>,
    /// Changes beyond the required ones.
    pub additional: Vec<Change>,
    pub metric: u64,
    pub stats: PipelineStats,
}

impl RevisionResult {
    fn unsat(stats: PipelineStats) -> Self {
        RevisionResult {
            status: RevisionStatus::Unsat,
            model: None,
            required: Vec::new(),
            additional: Vec::new(),
            metric: 0,
            stats,
        }
    }
}

fn check_revision_atoms(voc: &Vocabulary, atoms: &BTreeSet<DomainAtom>) -> Result<(), InferenceError> {
    for a in atoms {
        if !voc.is_well_sorted(a) {
            return Err(InferenceError::UnknownAtom(a.clone()));
        }
        if voc.kind_of(&a.pred) == Some(PredicateKind::Data) {
            return Err(InferenceError::DataAtom(a.clone()));
        }
    }
    Ok(())
}

/// A model that flips every required change, keeps every fixed atom and
/// data atom, and minimizes the weight of the remaining changes.
pub fn revise(p: &RevisionProblem, opts: &InferOptions) -> Result<RevisionResult, InferenceError> {
    let voc = p.vocabulary;
    let m = p.model;
    if let Some(a) = p.changes.intersection(&p.fixed).next() {
        return Err(InferenceError::ChangeAndFixed(a.clone()));
    }
    check_revision_atoms(voc, &p.changes)?;
    check_revision_atoms(voc, &p.fixed)?;
    if p.verify_model && !model_check(voc, p.theory, m)? {
        return Err(InferenceError::NotAModel);
    }

    let mut data = ThreeValuedStructure::new("data", voc.name.clone());
    for decl in voc.predicates.iter().filter(|d| d.kind == PredicateKind::Data) {
        for a in voc.atoms_of(decl) {
            data.set(&a, m.value(&a))?;
        }
    }
    let (g, mut stats) = prepare(voc, p.theory, &data, opts)?;
    let Some(g) = g else {
        return Ok(RevisionResult::unsat(stats));
    };

    // value each C/G atom must take
    let target = |a: &DomainAtom| {
        if p.changes.contains(a) {
            Some(!m.value(a))
        } else if p.fixed.contains(a) {
            Some(m.value(a))
        } else {
            None
        }
    };
    let mut assumptions = Vec::new();
    for a in p.changes.iter().chain(&p.fixed) {
        let want = target(a).expect("listed atom");
        if let Some(v) = g.ecnf.atom_var(a) {
            assumptions.push(Lit::new(v, want));
        } else if g.known.value(a).is_some_and(|k| k != want) {
            return Ok(RevisionResult::unsat(stats));
        }
    }

    let mut constant = 0u64;
    let mut terms = Vec::new();
    for decl in voc.predicates.iter().filter(|d| d.kind == PredicateKind::Search) {
        for a in voc.atoms_of(decl) {
            if target(&a).is_some() {
                continue;
            }
            let w = p.criterion.weight(&a);
            if let Some(v) = g.ecnf.atom_var(&a) {
                terms.push((Lit::new(v, !m.value(&a)), w));
            } else if g.known.value(&a).is_some_and(|k| k != m.value(&a)) {
                constant += w;
            }
        }
    }

    let mut solver = Solver::new(&g.ecnf, opts.seed);
    let result = solver.minimize(&Objective::new(terms), &assumptions);
    stats.solver = solver.stats();
    let MinimizeResult::Optimal { model: values, value } = result else {
        return Ok(RevisionResult::unsat(stats));
    };

    let mut revised = ThreeValuedStructure::new(m.structure().name.clone(), voc.name.clone());
    let mut required = Vec::new();
    let mut additional = Vec::new();
    let mut metric = 0;
    for a in voc.all_atoms() {
        let old = m.value(&a);
        let new = if let Some(v) = g.ecnf.atom_var(&a) {
            values[v as usize]
        } else if let Some(k) = g.known.value(&a) {
            k
        } else {
            target(&a).unwrap_or(old)
        };
        revised.set(&a, new)?;
        if new != old {
            let c = Change {
                atom: a.clone(),
                from: old,
                to: new,
            };
            if p.changes.contains(&a) {
                required.push(c);
            } else {
                metric += p.criterion.weight(&a);
                additional.push(c);
            }
        }
    }
    debug_assert_eq!(metric, value + constant);
    Ok(RevisionResult {
        status: RevisionStatus::Revised,
        model: Some(Model::new(revised, voc)?),
        required,
        additional,
        metric,
        stats,
    })
}
