//! Direct evaluation of formulas and terms over a two-valued interpretation.
//!
//! This is the reference semantics: sentences are evaluated by expanding
//! quantifiers over sort domains, and definitions are checked by recomputing
//! the least fixpoint of the rules, reading negative occurrences of defined
//! atoms from the candidate interpretation.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use super::ast::*;
use crate::structure::DomainAtom;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("value {value} of argument {index} of {pred} is outside sort {sort}")]
    OutOfRange {
        pred: String,
        index: usize,
        value: Element,
        sort: String,
    },
    #[error("division by zero")]
    DivisionByZero,
    #[error("integer overflow")]
    Overflow,
    #[error("unbound variable {0}")]
    Unbound(String),
    #[error("unknown sort {0}")]
    UnknownSort(String),
}

/// Integers extended with the values of `min`/`max` over the empty set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ExtInt {
    NegInf,
    Fin(i64),
    PosInf,
}

impl fmt::Display for ExtInt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtInt::NegInf => f.write_str("-inf"),
            ExtInt::Fin(i) => write!(f, "{i}"),
            ExtInt::PosInf => f.write_str("+inf"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Sym(String),
    Int(ExtInt),
}

impl Value {
    fn fin(&self) -> Option<i64> {
        match self {
            Value::Int(ExtInt::Fin(i)) => Some(*i),
            _ => None,
        }
    }
}

/// Variable bindings, innermost last.
#[derive(Clone, Debug, Default)]
pub struct Env(Vec<(String, Element)>);

impl Env {
    pub fn new() -> Self {
        Env(Vec::new())
    }

    pub fn get(&self, name: &str) -> Option<&Element> {
        self.0.iter().rev().find(|(n, _)| n == name).map(|(_, e)| e)
    }

    pub fn push(&mut self, name: &str, el: Element) {
        self.0.push((name.to_owned(), el));
    }

    pub fn pop(&mut self) {
        self.0.pop();
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn truncate(&mut self, n: usize) {
        self.0.truncate(n);
    }
}

pub(crate) fn checked(op: ArithOp, a: i64, b: i64) -> Result<i64, EvalError> {
    match op {
        ArithOp::Add => a.checked_add(b).ok_or(EvalError::Overflow),
        ArithOp::Sub => a.checked_sub(b).ok_or(EvalError::Overflow),
        ArithOp::Mul => a.checked_mul(b).ok_or(EvalError::Overflow),
        ArithOp::Div if b == 0 => Err(EvalError::DivisionByZero),
        ArithOp::Mod if b == 0 => Err(EvalError::DivisionByZero),
        ArithOp::Div => a.checked_div(b).ok_or(EvalError::Overflow),
        ArithOp::Mod => a.checked_rem(b).ok_or(EvalError::Overflow),
    }
}

/// Folds a list of weights with an aggregate function.
pub fn fold_aggregate(func: AggFn, weights: &[i64]) -> Result<ExtInt, EvalError> {
    Ok(match func {
        AggFn::Card => ExtInt::Fin(weights.len() as i64),
        AggFn::Sum => {
            let mut acc = 0i64;
            for w in weights {
                acc = acc.checked_add(*w).ok_or(EvalError::Overflow)?;
            }
            ExtInt::Fin(acc)
        }
        AggFn::Prod => {
            let mut acc = 1i64;
            for w in weights {
                acc = acc.checked_mul(*w).ok_or(EvalError::Overflow)?;
            }
            ExtInt::Fin(acc)
        }
        AggFn::Min => weights.iter().min().map_or(ExtInt::PosInf, |w| ExtInt::Fin(*w)),
        AggFn::Max => weights.iter().max().map_or(ExtInt::NegInf, |w| ExtInt::Fin(*w)),
    })
}

pub(crate) fn sort_elements(voc: &Vocabulary, v: &VarDecl) -> Result<Vec<Element>, EvalError> {
    let name = v.sort.as_deref().unwrap_or("");
    voc.sort(name)
        .map(|s| s.domain.elements())
        .ok_or_else(|| EvalError::UnknownSort(name.to_owned()))
}

/// Calls `f` once per assignment of `vars`, stopping early when it returns
/// `Some`.
pub(crate) fn for_each_binding<T, E: From<EvalError>>(
    voc: &Vocabulary,
    vars: &[VarDecl],
    env: &mut Env,
    f: &mut dyn FnMut(&mut Env) -> Result<Option<T>, E>,
) -> Result<Option<T>, E> {
    let Some((first, rest)) = vars.split_first() else {
        return f(env);
    };
    for el in sort_elements(voc, first)? {
        env.push(&first.name, el);
        let r = for_each_binding(voc, rest, env, f);
        env.pop();
        if let Some(v) = r? {
            return Ok(Some(v));
        }
    }
    Ok(None)
}

/// Where defined atoms are looked up during definition checking.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Polarity {
    Pos,
    Neg,
}

impl Polarity {
    fn flip(self) -> Polarity {
        match self {
            Polarity::Pos => Polarity::Neg,
            Polarity::Neg => Polarity::Pos,
        }
    }
}

/// Evaluation context: a candidate interpretation, and optionally a set of
/// derived atoms for defined predicates occurring positively.
pub struct Evaluator<'a> {
    voc: &'a Vocabulary,
    holds: &'a dyn Fn(&DomainAtom) -> bool,
    derived: Option<(&'a BTreeSet<String>, &'a BTreeSet<DomainAtom>)>,
}

impl<'a> Evaluator<'a> {
    pub fn new(voc: &'a Vocabulary, holds: &'a dyn Fn(&DomainAtom) -> bool) -> Self {
        Evaluator {
            voc,
            holds,
            derived: None,
        }
    }

    pub fn term(&self, t: &Term, env: &mut Env) -> Result<Value, EvalError> {
        match t {
            Term::Var(name) | Term::Ident { name, .. } => match env.get(name) {
                Some(Element::Int(i)) => Ok(Value::Int(ExtInt::Fin(*i))),
                Some(Element::Sym(s)) => Ok(Value::Sym(s.clone())),
                None => Err(EvalError::Unbound(name.clone())),
            },
            Term::Const(Element::Int(i)) => Ok(Value::Int(ExtInt::Fin(*i))),
            Term::Const(Element::Sym(s)) => Ok(Value::Sym(s.clone())),
            Term::Neg(a) => {
                let a = self.int(a, env)?;
                Ok(Value::Int(ExtInt::Fin(a.checked_neg().ok_or(EvalError::Overflow)?)))
            }
            Term::Abs(a) => {
                let a = self.int(a, env)?;
                Ok(Value::Int(ExtInt::Fin(a.checked_abs().ok_or(EvalError::Overflow)?)))
            }
            Term::Arith(op, a, b) => {
                let a = self.int(a, env)?;
                let b = self.int(b, env)?;
                Ok(Value::Int(ExtInt::Fin(checked(*op, a, b)?)))
            }
            Term::Agg(agg) => Ok(Value::Int(self.aggregate(agg, env)?)),
        }
    }

    fn int(&self, t: &Term, env: &mut Env) -> Result<i64, EvalError> {
        self.term(t, env)?.fin().ok_or(EvalError::Overflow)
    }

    pub fn aggregate(&self, agg: &Aggregate, env: &mut Env) -> Result<ExtInt, EvalError> {
        let mut weights = Vec::new();
        for_each_binding::<(), EvalError>(self.voc, &agg.vars, env, &mut |env| {
            if self.formula_at(&agg.cond, env, None)? {
                weights.push(self.int(&agg.weight, env)?);
            }
            Ok(None)
        })?;
        fold_aggregate(agg.func, &weights)
    }

    /// Instantiates an atom under `env`, checking that the arguments lie in
    /// their sorts.
    pub fn atom(&self, a: &Atom, env: &mut Env) -> Result<DomainAtom, EvalError> {
        ground_atom(self.voc, a, &mut |t| self.term(t, env))
    }

    pub fn formula(&self, f: &Formula, env: &mut Env) -> Result<bool, EvalError> {
        self.formula_at(f, env, Some(Polarity::Pos))
    }

    /// `pol` is `None` inside aggregates and equivalences, where occurrences
    /// count as both positive and negative.
    fn formula_at(
        &self,
        f: &Formula,
        env: &mut Env,
        pol: Option<Polarity>,
    ) -> Result<bool, EvalError> {
        match f {
            Formula::True => Ok(true),
            Formula::False => Ok(false),
            Formula::Atom(a) => {
                let atom = self.atom(a, env)?;
                if let (Some((defined, derived)), Some(Polarity::Pos)) = (self.derived, pol) {
                    if defined.contains(&atom.pred) {
                        return Ok(derived.contains(&atom));
                    }
                }
                Ok((self.holds)(&atom))
            }
            Formula::Cmp(op, l, r) => {
                let l = self.term(l, env)?;
                let r = self.term(r, env)?;
                Ok(match (l, r) {
                    (Value::Int(a), Value::Int(b)) => op.holds(a, b),
                    (Value::Sym(a), Value::Sym(b)) => op.holds(a, b),
                    _ => *op == CmpOp::Ne,
                })
            }
            Formula::Not(g) => Ok(!self.formula_at(g, env, pol.map(Polarity::flip))?),
            Formula::And(v) => {
                for g in v {
                    if !self.formula_at(g, env, pol)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Formula::Or(v) => {
                for g in v {
                    if self.formula_at(g, env, pol)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            Formula::Implies(a, b) => Ok(!self.formula_at(a, env, pol.map(Polarity::flip))?
                || self.formula_at(b, env, pol)?),
            Formula::Equiv(a, b) => {
                Ok(self.formula_at(a, env, None)? == self.formula_at(b, env, None)?)
            }
            Formula::Quant(kind, vars, body) => {
                let want = *kind == QuantKind::Exists;
                let found = for_each_binding::<(), EvalError>(self.voc, vars, env, &mut |env| {
                    Ok((self.formula_at(body, env, pol)? == want).then_some(()))
                })?;
                Ok(found.is_some() == want)
            }
            Formula::Count(op, k, vars, body) => {
                let mut n = 0u64;
                for_each_binding::<(), EvalError>(self.voc, vars, env, &mut |env| {
                    if self.formula_at(body, env, None)? {
                        n += 1;
                    }
                    Ok(None)
                })?;
                Ok(op.holds(n, *k))
            }
        }
    }
}

/// Evaluates an atom's argument terms and checks sort membership.
pub(crate) fn ground_atom(
    voc: &Vocabulary,
    a: &Atom,
    term: &mut dyn FnMut(&Term) -> Result<Value, EvalError>,
) -> Result<DomainAtom, EvalError> {
    let decl = voc.predicate(&a.pred);
    let mut args = Vec::with_capacity(a.args.len());
    for (i, t) in a.args.iter().enumerate() {
        let el = match term(t)? {
            Value::Sym(s) => Element::Sym(s),
            Value::Int(ExtInt::Fin(i)) => Element::Int(i),
            Value::Int(_) => return Err(EvalError::Overflow),
        };
        if let Some(sort) = decl.and_then(|d| d.args.get(i)).and_then(|s| voc.sort(s)) {
            if !sort.domain.contains(&el) {
                return Err(EvalError::OutOfRange {
                    pred: a.pred.clone(),
                    index: i + 1,
                    value: el,
                    sort: sort.name.clone(),
                });
            }
        }
        args.push(el);
    }
    Ok(DomainAtom::new(a.pred.clone(), args))
}

/// Whether every sentence of the theory is true.
pub fn sentences_hold(
    voc: &Vocabulary,
    theory: &Theory,
    holds: &dyn Fn(&DomainAtom) -> bool,
) -> Result<bool, EvalError> {
    let ev = Evaluator::new(voc, holds);
    for s in &theory.sentences {
        if !ev.formula(&s.formula, &mut Env::new())? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Least fixpoint of one definition, with negative occurrences of its defined
/// atoms read from `holds`.
pub fn definition_fixpoint(
    voc: &Vocabulary,
    def: &Definition,
    holds: &dyn Fn(&DomainAtom) -> bool,
) -> Result<BTreeSet<DomainAtom>, EvalError> {
    let defined = def.defined_predicates();
    let mut current: BTreeSet<DomainAtom> = BTreeSet::new();
    loop {
        let mut next = BTreeSet::new();
        {
            let ev = Evaluator {
                voc,
                holds,
                derived: Some((&defined, &current)),
            };
            for r in &def.rules {
                for_each_binding::<(), EvalError>(voc, &r.vars, &mut Env::new(), &mut |env| {
                    if ev.formula(&r.body, env)? {
                        next.insert(ev.atom(&r.head, env)?);
                    }
                    Ok(None)
                })?;
            }
        }
        if next == current {
            return Ok(current);
        }
        current = next;
    }
}

/// Whether the interpretation of every defined predicate equals the least
/// fixpoint of its definition.
pub fn definitions_hold(
    voc: &Vocabulary,
    theory: &Theory,
    holds: &dyn Fn(&DomainAtom) -> bool,
) -> Result<bool, EvalError> {
    for def in &theory.definitions {
        let lfp = definition_fixpoint(voc, def, holds)?;
        for pred in def.defined_predicates() {
            let Some(decl) = voc.predicate(&pred) else { continue };
            for atom in voc.atoms_of(decl) {
                if holds(&atom) != lfp.contains(&atom) {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Sentences and definitions together.
pub fn is_model(
    voc: &Vocabulary,
    theory: &Theory,
    holds: &dyn Fn(&DomainAtom) -> bool,
) -> Result<bool, EvalError> {
    Ok(sentences_hold(voc, theory, holds)? && definitions_hold(voc, theory, holds)?)
}
