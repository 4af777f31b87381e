//! Rewrites a typed theory into the core fragment used downstream.
//!
//! Counting quantifiers become cardinality comparisons, `=>` and `<=>` are
//! expanded, and negation is pushed onto atoms. The rewrite is idempotent.

use super::ast::*;
use super::typecheck::TypedTheory;

pub fn desugar(t: &TypedTheory) -> TypedTheory {
    let th = &t.theory;
    let mut out = Theory::empty(th.name.clone(), th.vocabulary.clone());
    for s in &th.sentences {
        out.sentences.push(Sentence {
            formula: nnf(&s.formula, true),
            span: s.span,
        });
    }
    for d in &th.definitions {
        let rules = d
            .rules
            .iter()
            .map(|r| Rule {
                vars: r.vars.clone(),
                head: atom(&r.head),
                body: nnf(&r.body, true),
                span: r.span,
            })
            .collect();
        out.definitions.push(Definition {
            rules,
            span: d.span,
        });
    }
    TypedTheory {
        theory: out,
        desugared: true,
    }
}

pub fn desugar_formula(f: &Formula) -> Formula {
    nnf(f, true)
}

pub fn desugar_aggregate(a: &Aggregate) -> Aggregate {
    Aggregate {
        func: a.func,
        vars: a.vars.clone(),
        cond: nnf(&a.cond, true),
        weight: term(&a.weight),
    }
}

fn atom(a: &Atom) -> Atom {
    Atom {
        pred: a.pred.clone(),
        args: a.args.iter().map(term).collect(),
        span: a.span,
    }
}

fn term(t: &Term) -> Term {
    match t {
        Term::Neg(x) => Term::Neg(Box::new(term(x))),
        Term::Abs(x) => Term::Abs(Box::new(term(x))),
        Term::Arith(op, a, b) => Term::Arith(*op, Box::new(term(a)), Box::new(term(b))),
        Term::Agg(a) => Term::Agg(Box::new(desugar_aggregate(a))),
        other => other.clone(),
    }
}

/// Negation normal form of `f` (or of `~f` when `pos` is false).
fn nnf(f: &Formula, pos: bool) -> Formula {
    match f {
        Formula::True => {
            if pos {
                Formula::True
            } else {
                Formula::False
            }
        }
        Formula::False => {
            if pos {
                Formula::False
            } else {
                Formula::True
            }
        }
        Formula::Atom(a) => {
            let a = Formula::Atom(atom(a));
            if pos {
                a
            } else {
                Formula::not(a)
            }
        }
        Formula::Cmp(op, l, r) => {
            let op = if pos { *op } else { op.negate() };
            Formula::Cmp(op, term(l), term(r))
        }
        Formula::Not(g) => nnf(g, !pos),
        Formula::And(v) => {
            let parts = v.iter().map(|g| nnf(g, pos)).collect();
            if pos {
                Formula::And(parts)
            } else {
                Formula::Or(parts)
            }
        }
        Formula::Or(v) => {
            let parts = v.iter().map(|g| nnf(g, pos)).collect();
            if pos {
                Formula::Or(parts)
            } else {
                Formula::And(parts)
            }
        }
        Formula::Implies(a, b) => {
            if pos {
                Formula::Or(vec![nnf(a, false), nnf(b, true)])
            } else {
                Formula::And(vec![nnf(a, true), nnf(b, false)])
            }
        }
        Formula::Equiv(a, b) => {
            if pos {
                Formula::And(vec![
                    Formula::Or(vec![nnf(a, false), nnf(b, true)]),
                    Formula::Or(vec![nnf(a, true), nnf(b, false)]),
                ])
            } else {
                Formula::Or(vec![
                    Formula::And(vec![nnf(a, true), nnf(b, false)]),
                    Formula::And(vec![nnf(a, false), nnf(b, true)]),
                ])
            }
        }
        Formula::Quant(k, vars, body) => {
            let kind = match (k, pos) {
                (QuantKind::Forall, true) | (QuantKind::Exists, false) => QuantKind::Forall,
                _ => QuantKind::Exists,
            };
            Formula::Quant(kind, vars.clone(), Box::new(nnf(body, pos)))
        }
        Formula::Count(op, k, vars, body) => {
            let agg = Aggregate {
                func: AggFn::Card,
                vars: vars.clone(),
                cond: nnf(body, true),
                weight: Term::int(1),
            };
            let op = if pos { *op } else { op.negate() };
            Formula::Cmp(op, Term::Agg(Box::new(agg)), Term::int(*k as i64))
        }
    }
}
