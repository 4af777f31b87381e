//! Instantiation of quantifiers and set expressions over the sort domains,
//! folding every atom the structure already decides.

use std::collections::BTreeSet;

use crate::lang::ast::*;
use crate::lang::eval::{for_each_binding, ground_atom, Env, EvalError, Evaluator, ExtInt, Value};
use crate::structure::DomainAtom;

use super::GroundError;

/// Comparison kept by ground aggregates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AggOp {
    Ge,
    Le,
    Eq,
}

/// `Σ w·[φ] op bound` over ground conditions.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GAgg {
    pub elems: Vec<(GFormula, i64)>,
    pub op: AggOp,
    pub bound: i64,
}

/// Ground formula in negation normal form.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GFormula {
    Const(bool),
    Lit(DomainAtom, bool),
    And(Vec<GFormula>),
    Or(Vec<GFormula>),
    Agg(Box<GAgg>),
}

impl GFormula {
    pub fn and(parts: Vec<GFormula>) -> GFormula {
        let mut out = Vec::with_capacity(parts.len());
        for p in parts {
            match p {
                GFormula::Const(true) => {}
                GFormula::Const(false) => return GFormula::Const(false),
                GFormula::And(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => GFormula::Const(true),
            1 => out.pop().unwrap(),
            _ => GFormula::And(out),
        }
    }

    pub fn or(parts: Vec<GFormula>) -> GFormula {
        let mut out = Vec::with_capacity(parts.len());
        for p in parts {
            match p {
                GFormula::Const(false) => {}
                GFormula::Const(true) => return GFormula::Const(true),
                GFormula::Or(inner) => out.extend(inner),
                other => out.push(other),
            }
        }
        match out.len() {
            0 => GFormula::Const(false),
            1 => out.pop().unwrap(),
            _ => GFormula::Or(out),
        }
    }

    pub fn negate(self) -> GFormula {
        match self {
            GFormula::Const(b) => GFormula::Const(!b),
            GFormula::Lit(a, p) => GFormula::Lit(a, !p),
            GFormula::And(v) => GFormula::or(v.into_iter().map(GFormula::negate).collect()),
            GFormula::Or(v) => GFormula::and(v.into_iter().map(GFormula::negate).collect()),
            GFormula::Agg(a) => {
                let GAgg { elems, op, bound } = *a;
                let b = bound as i128;
                match op {
                    AggOp::Ge => aggregate(elems, AggOp::Le, b - 1),
                    AggOp::Le => aggregate(elems, AggOp::Ge, b + 1),
                    AggOp::Eq => GFormula::or(vec![
                        aggregate(elems.clone(), AggOp::Le, b - 1),
                        aggregate(elems, AggOp::Ge, b + 1),
                    ]),
                }
            }
        }
    }

    /// Re-folds with additional known atoms.
    pub fn simplify(&self, lookup: &dyn Fn(&DomainAtom) -> Option<bool>) -> GFormula {
        match self {
            GFormula::Const(b) => GFormula::Const(*b),
            GFormula::Lit(a, p) => match lookup(a) {
                Some(v) => GFormula::Const(v == *p),
                None => self.clone(),
            },
            GFormula::And(v) => GFormula::and(v.iter().map(|g| g.simplify(lookup)).collect()),
            GFormula::Or(v) => GFormula::or(v.iter().map(|g| g.simplify(lookup)).collect()),
            GFormula::Agg(a) => aggregate(
                a.elems.iter().map(|(g, w)| (g.simplify(lookup), *w)).collect(),
                a.op,
                a.bound as i128,
            ),
        }
    }

    pub fn atoms(&self, out: &mut BTreeSet<DomainAtom>) {
        match self {
            GFormula::Const(_) => {}
            GFormula::Lit(a, _) => {
                out.insert(a.clone());
            }
            GFormula::And(v) | GFormula::Or(v) => v.iter().for_each(|g| g.atoms(out)),
            GFormula::Agg(a) => a.elems.iter().for_each(|(g, _)| g.atoms(out)),
        }
    }

    /// Truth value under a total assignment of its atoms.
    pub fn eval(&self, value: &dyn Fn(&DomainAtom) -> bool) -> bool {
        match self {
            GFormula::Const(b) => *b,
            GFormula::Lit(a, p) => value(a) == *p,
            GFormula::And(v) => v.iter().all(|g| g.eval(value)),
            GFormula::Or(v) => v.iter().any(|g| g.eval(value)),
            GFormula::Agg(a) => {
                let s: i64 = a
                    .elems
                    .iter()
                    .filter(|(g, _)| g.eval(value))
                    .map(|(_, w)| *w)
                    .sum();
                match a.op {
                    AggOp::Ge => s >= a.bound,
                    AggOp::Le => s <= a.bound,
                    AggOp::Eq => s == a.bound,
                }
            }
        }
    }
}

/// Builds `Σ w·[φ] op bound`, folding decided conditions and trivial bounds.
pub fn aggregate(elems: Vec<(GFormula, i64)>, op: AggOp, bound: i128) -> GFormula {
    let mut bound = bound;
    let mut kept = Vec::new();
    for (g, w) in elems {
        match g {
            _ if w == 0 => {}
            GFormula::Const(false) => {}
            GFormula::Const(true) => bound -= w as i128,
            g => kept.push((g, w)),
        }
    }
    let lo: i128 = kept.iter().map(|(_, w)| (*w as i128).min(0)).sum();
    let hi: i128 = kept.iter().map(|(_, w)| (*w as i128).max(0)).sum();
    let decided = match op {
        AggOp::Ge if bound <= lo => Some(true),
        AggOp::Ge if bound > hi => Some(false),
        AggOp::Le if bound >= hi => Some(true),
        AggOp::Le if bound < lo => Some(false),
        AggOp::Eq if bound < lo || bound > hi => Some(false),
        AggOp::Eq if lo == hi => Some(true),
        _ => None,
    };
    match decided {
        Some(b) => GFormula::Const(b),
        None => GFormula::Agg(Box::new(GAgg {
            elems: kept,
            op,
            bound: bound as i64,
        })),
    }
}

/// Largest number of non-trivial factors a product aggregate may case-split
/// on.
pub const PROD_SPLIT_LIMIT: usize = 12;

pub struct Instantiator<'a> {
    pub voc: &'a Vocabulary,
    pub lookup: &'a dyn Fn(&DomainAtom) -> Option<bool>,
    pub cap: usize,
}

fn never(_: &DomainAtom) -> bool {
    false
}

impl<'a> Instantiator<'a> {
    fn evaluator(&self) -> Evaluator<'a> {
        Evaluator::new(self.voc, &never)
    }

    fn check_size(&self, vars: &[VarDecl]) -> Result<(), GroundError> {
        let mut size: usize = 1;
        for v in vars {
            let n = v
                .sort
                .as_deref()
                .and_then(|s| self.voc.sort(s))
                .map_or(0, |s| s.domain.len());
            size = size.saturating_mul(n);
        }
        if size > self.cap {
            return Err(GroundError::SizeCap {
                size,
                cap: self.cap,
            });
        }
        Ok(())
    }

    fn int(&self, t: &Term, env: &mut Env) -> Result<i128, GroundError> {
        match self.evaluator().term(t, env)? {
            Value::Int(ExtInt::Fin(i)) => Ok(i as i128),
            _ => Err(GroundError::Eval(EvalError::Overflow)),
        }
    }

    pub fn atom(&self, a: &Atom, env: &mut Env) -> Result<DomainAtom, GroundError> {
        let ev = self.evaluator();
        Ok(ground_atom(self.voc, a, &mut |t| ev.term(t, env))?)
    }

    pub fn formula(&self, f: &Formula, env: &mut Env) -> Result<GFormula, GroundError> {
        Ok(match f {
            Formula::True => GFormula::Const(true),
            Formula::False => GFormula::Const(false),
            Formula::Atom(a) => {
                let atom = self.atom(a, env)?;
                match (self.lookup)(&atom) {
                    Some(v) => GFormula::Const(v),
                    None => GFormula::Lit(atom, true),
                }
            }
            Formula::Not(g) => self.formula(g, env)?.negate(),
            Formula::And(v) => {
                let mut parts = Vec::with_capacity(v.len());
                for g in v {
                    let p = self.formula(g, env)?;
                    if p == GFormula::Const(false) {
                        return Ok(p);
                    }
                    parts.push(p);
                }
                GFormula::and(parts)
            }
            Formula::Or(v) => {
                let mut parts = Vec::with_capacity(v.len());
                for g in v {
                    let p = self.formula(g, env)?;
                    if p == GFormula::Const(true) {
                        return Ok(p);
                    }
                    parts.push(p);
                }
                GFormula::or(parts)
            }
            Formula::Implies(a, b) => {
                let a = self.formula(a, env)?.negate();
                let b = self.formula(b, env)?;
                GFormula::or(vec![a, b])
            }
            Formula::Equiv(a, b) => {
                let a = self.formula(a, env)?;
                let b = self.formula(b, env)?;
                GFormula::or(vec![
                    GFormula::and(vec![a.clone(), b.clone()]),
                    GFormula::and(vec![a.negate(), b.negate()]),
                ])
            }
            Formula::Quant(kind, vars, body) => {
                self.check_size(vars)?;
                let mut parts = Vec::new();
                let stop = GFormula::Const(*kind == QuantKind::Exists);
                let hit = for_each_binding::<(), GroundError>(self.voc, vars, env, &mut |env| {
                    let g = self.formula(body, env)?;
                    if g == stop {
                        return Ok(Some(()));
                    }
                    parts.push(g);
                    Ok(None)
                })
                ?;
                if hit.is_some() {
                    stop
                } else if *kind == QuantKind::Forall {
                    GFormula::and(parts)
                } else {
                    GFormula::or(parts)
                }
            }
            Formula::Count(op, k, vars, body) => {
                let agg = Aggregate {
                    func: AggFn::Card,
                    vars: vars.clone(),
                    cond: (**body).clone(),
                    weight: Term::int(1),
                };
                self.comparison(*op, &Term::Agg(Box::new(agg)), &Term::int(*k as i64), env)?
            }
            Formula::Cmp(op, l, r) => self.comparison(*op, l, r, env)?,
        })
    }

    fn comparison(
        &self,
        op: CmpOp,
        l: &Term,
        r: &Term,
        env: &mut Env,
    ) -> Result<GFormula, GroundError> {
        let (agg, op, other) = match (l, r) {
            (Term::Agg(a), other) => (a, op, other),
            (other, Term::Agg(a)) => (a, op.flip(), other),
            _ => {
                let ev = self.evaluator();
                let a = ev.term(l, env)?;
                let b = ev.term(r, env)?;
                let holds = match (a, b) {
                    (Value::Int(x), Value::Int(y)) => op.holds(x, y),
                    (Value::Sym(x), Value::Sym(y)) => op.holds(x, y),
                    _ => op == CmpOp::Ne,
                };
                return Ok(GFormula::Const(holds));
            }
        };
        let k = self.int(other, env)?;
        let elems = self.elements(agg, env)?;
        match agg.func {
            AggFn::Card | AggFn::Sum => Ok(sum_cmp(elems, op, k)),
            AggFn::Min => Ok(extremum_cmp(elems, op, k, true)),
            AggFn::Max => Ok(extremum_cmp(elems, op, k, false)),
            AggFn::Prod => prod_cmp(elems, op, k),
        }
    }

    /// Instances `(condition, weight)` of a set expression whose condition
    /// is not folded to false.
    pub fn elements(&self, agg: &Aggregate, env: &mut Env) -> Result<Vec<(GFormula, i64)>, GroundError> {
        self.check_size(&agg.vars)?;
        let mut elems: Vec<(GFormula, i64)> = Vec::new();
        for_each_binding::<(), GroundError>(self.voc, &agg.vars, env, &mut |env| {
            let cond = self.formula(&agg.cond, env)?;
            if cond != GFormula::Const(false) {
                let w = match agg.func {
                    AggFn::Card => 1,
                    _ => self.int(&agg.weight, env)? as i64,
                };
                elems.push((cond, w));
            }
            Ok(None)
        })?;
        Ok(elems)
    }

    /// Instances `(head, body)` of a rule whose body is not folded to false.
    pub fn rule_instances(&self, r: &Rule) -> Result<Vec<(DomainAtom, GFormula)>, GroundError> {
        self.check_size(&r.vars)?;
        let mut out = Vec::new();
        for_each_binding::<(), GroundError>(self.voc, &r.vars, &mut Env::new(), &mut |env| {
            let body = self.formula(&r.body, env)?;
            if body != GFormula::Const(false) {
                let head = self.atom(&r.head, env)?;
                out.push((head, body));
            }
            Ok(None)
        })?;
        Ok(out)
    }
}

fn sum_cmp(elems: Vec<(GFormula, i64)>, op: CmpOp, k: i128) -> GFormula {
    match op {
        CmpOp::Ge => aggregate(elems, AggOp::Ge, k),
        CmpOp::Gt => aggregate(elems, AggOp::Ge, k + 1),
        CmpOp::Le => aggregate(elems, AggOp::Le, k),
        CmpOp::Lt => aggregate(elems, AggOp::Le, k - 1),
        CmpOp::Eq => aggregate(elems, AggOp::Eq, k),
        CmpOp::Ne => GFormula::or(vec![
            aggregate(elems.clone(), AggOp::Le, k - 1),
            aggregate(elems, AggOp::Ge, k + 1),
        ]),
    }
}

/// `min`/`max` comparisons as plain formulas. The empty set has minimum +∞
/// and maximum −∞.
fn extremum_cmp(elems: Vec<(GFormula, i64)>, op: CmpOp, k: i128, is_min: bool) -> GFormula {
    // "some element at or beyond k" / "no element strictly short of k"
    let some = |pred: &dyn Fn(i128) -> bool| {
        GFormula::or(
            elems
                .iter()
                .filter(|(_, w)| pred(*w as i128))
                .map(|(g, _)| g.clone())
                .collect(),
        )
    };
    let none = |pred: &dyn Fn(i128) -> bool| {
        GFormula::and(
            elems
                .iter()
                .filter(|(_, w)| pred(*w as i128))
                .map(|(g, _)| g.clone().negate())
                .collect(),
        )
    };
    let ge = |k: i128| {
        if is_min {
            none(&|w| w < k)
        } else {
            some(&|w| w >= k)
        }
    };
    let le = |k: i128| {
        if is_min {
            some(&|w| w <= k)
        } else {
            none(&|w| w > k)
        }
    };
    match op {
        CmpOp::Ge => ge(k),
        CmpOp::Gt => ge(k + 1),
        CmpOp::Le => le(k),
        CmpOp::Lt => le(k - 1),
        CmpOp::Eq => GFormula::and(vec![ge(k), le(k)]),
        CmpOp::Ne => GFormula::or(vec![le(k - 1), ge(k + 1)]),
    }
}

/// Products by case split over the undecided factors.
fn prod_cmp(elems: Vec<(GFormula, i64)>, op: CmpOp, k: i128) -> Result<GFormula, GroundError> {
    let mut constant: i128 = 1;
    let mut zeros = Vec::new();
    let mut factors = Vec::new();
    for (g, w) in elems {
        match (g, w) {
            (GFormula::Const(true), w) => constant *= w as i128,
            (_, 1) => {}
            (g, 0) => zeros.push(g),
            (g, w) => factors.push((g, w)),
        }
    }
    let holds = |v: i128| GFormula::Const(op.holds(v, k));
    if constant == 0 {
        return Ok(holds(0));
    }
    if factors.len() > PROD_SPLIT_LIMIT {
        return Err(GroundError::ProductTooLarge {
            factors: factors.len(),
            limit: PROD_SPLIT_LIMIT,
        });
    }
    let any_zero = GFormula::or(zeros.clone());
    let no_zero = GFormula::and(zeros.into_iter().map(GFormula::negate).collect());
    let mut cases = Vec::new();
    for mask in 0u32..(1 << factors.len()) {
        let mut value = constant;
        let mut cube = Vec::with_capacity(factors.len());
        for (i, (g, w)) in factors.iter().enumerate() {
            if mask & (1 << i) != 0 {
                value *= *w as i128;
                cube.push(g.clone());
            } else {
                cube.push(g.clone().negate());
            }
        }
        let outcome = GFormula::or(vec![
            GFormula::and(vec![any_zero.clone(), holds(0)]),
            GFormula::and(vec![no_zero.clone(), holds(value)]),
        ]);
        if outcome == GFormula::Const(false) {
            continue;
        }
        cube.push(outcome);
        cases.push(GFormula::and(cube));
    }
    Ok(GFormula::or(cases))
}
