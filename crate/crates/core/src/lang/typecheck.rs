//! Sort checking and identifier resolution.
//!
//! Every identifier in term position is resolved either to a bound
//! variable or to a domain element; quantified variables without an explicit
//! `[Sort]` annotation get their sort from the first atom argument position
//! they occupy. Integer terms are checked to stay within 64-bit bounds given
//! the declared ranges.

use std::collections::BTreeMap;

use super::ast::*;
use super::desugar::desugar_aggregate;
use super::LangError;

/// A theory whose identifiers are resolved and whose variables are sorted.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypedTheory {
    pub(crate) theory: Theory,
    pub(crate) desugared: bool,
}

impl TypedTheory {
    pub fn theory(&self) -> &Theory {
        &self.theory
    }

    pub fn is_desugared(&self) -> bool {
        self.desugared
    }

    pub fn into_theory(self) -> Theory {
        self.theory
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Ty {
    Int,
    Sym(String),
}

struct Checker<'a> {
    voc: &'a Vocabulary,
    errors: Vec<LangError>,
    scope: Vec<(String, String)>,
}

pub fn typecheck(voc: &Vocabulary, theory: &Theory) -> Result<TypedTheory, Vec<LangError>> {
    let mut c = Checker {
        voc,
        errors: Vec::new(),
        scope: Vec::new(),
    };
    let mut out = Theory::empty(theory.name.clone(), theory.vocabulary.clone());
    for s in &theory.sentences {
        let formula = c.formula(&s.formula, s.span);
        out.sentences.push(Sentence {
            formula,
            span: s.span,
        });
    }

    let mut defined_in: BTreeMap<String, usize> = BTreeMap::new();
    for (i, d) in theory.definitions.iter().enumerate() {
        let own = d.defined_predicates();
        for p in &own {
            if let Some(prev) = defined_in.insert(p.clone(), i) {
                if prev != i {
                    c.errors.push(LangError::Definition {
                        span: d.span,
                        message: format!("predicate {p} is defined in more than one definition"),
                    });
                }
            }
        }
        let mut rules = Vec::new();
        for r in &d.rules {
            if voc.kind_of(&r.head.pred) == Some(PredicateKind::Data) {
                c.errors.push(LangError::Definition {
                    span: r.span,
                    message: format!("data predicate {} cannot be defined by rules", r.head.pred),
                });
            }
            let mut in_aggs = std::collections::BTreeSet::new();
            r.body.aggregate_predicates(&mut in_aggs);
            if let Some(p) = in_aggs.iter().find(|p| own.contains(*p)) {
                c.errors.push(LangError::Definition {
                    span: r.span,
                    message: format!(
                        "aggregate in a rule body ranges over {p}, which the same definition defines"
                    ),
                });
            }
            rules.push(c.rule(r));
        }
        out.definitions.push(Definition {
            rules,
            span: d.span,
        });
    }

    if c.errors.is_empty() {
        Ok(TypedTheory {
            theory: out,
            desugared: false,
        })
    } else {
        Err(c.errors)
    }
}

/// Checks an objective term; it must be an aggregate over closed variables.
pub fn typecheck_objective(voc: &Vocabulary, term: &Term) -> Result<Aggregate, Vec<LangError>> {
    let Term::Agg(agg) = term else {
        return Err(vec![LangError::Aggregate {
            span: Span::default(),
            message: "objective must be an aggregate term".into(),
        }]);
    };
    let mut c = Checker {
        voc,
        errors: Vec::new(),
        scope: Vec::new(),
    };
    let span = Span::default();
    let (checked, _) = c.term(term, None, span);
    if c.errors.is_empty() {
        if let Term::Agg(a) = checked {
            c.check_bounds(&Term::Agg(a.clone()), span);
            if c.errors.is_empty() {
                return Ok(desugar_aggregate(&a));
            }
        }
    }
    if c.errors.is_empty() {
        c.errors.push(LangError::Aggregate {
            span,
            message: format!("objective {:?} is not an aggregate", agg.func),
        });
    }
    Err(c.errors)
}

fn first_span(f: &Formula) -> Option<Span> {
    match f {
        Formula::Atom(a) => Some(a.span),
        Formula::Cmp(_, a, b) => term_span(a).or_else(|| term_span(b)),
        Formula::Not(g) | Formula::Quant(_, _, g) | Formula::Count(_, _, _, g) => first_span(g),
        Formula::And(v) | Formula::Or(v) => v.iter().find_map(first_span),
        Formula::Implies(a, b) | Formula::Equiv(a, b) => first_span(a).or_else(|| first_span(b)),
        Formula::True | Formula::False => None,
    }
}

fn term_span(t: &Term) -> Option<Span> {
    match t {
        Term::Ident { span, .. } => Some(*span),
        Term::Neg(t) | Term::Abs(t) => term_span(t),
        Term::Arith(_, a, b) => term_span(a).or_else(|| term_span(b)),
        Term::Agg(a) => first_span(&a.cond),
        _ => None,
    }
}

impl<'a> Checker<'a> {
    fn lookup(&self, name: &str) -> Option<&str> {
        self.scope
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|(_, s)| s.as_str())
    }

    fn sort_ty(&self, sort: &str) -> Ty {
        match self.voc.sort(sort) {
            Some(s) if s.domain.is_int() => Ty::Int,
            _ => Ty::Sym(sort.to_owned()),
        }
    }

    fn symbol_sort(&self, name: &str) -> Option<&'a Sort> {
        self.voc
            .sorts
            .iter()
            .find(|s| s.domain.contains(&Element::Sym(name.to_owned())))
    }

    /// Sort of `name` implied by its first use as an atom argument or in an
    /// equality with a symbolic constant.
    fn infer_sort(&self, name: &str, f: &Formula) -> Option<String> {
        fn ident_is(t: &Term, name: &str) -> bool {
            matches!(t, Term::Ident { name: n, .. } if n == name)
        }
        fn in_term(c: &Checker<'_>, name: &str, t: &Term) -> Option<String> {
            match t {
                Term::Agg(a) => {
                    if a.vars.iter().any(|v| v.name == name) {
                        return None;
                    }
                    c.infer_sort(name, &a.cond)
                }
                Term::Neg(t) | Term::Abs(t) => in_term(c, name, t),
                Term::Arith(_, a, b) => in_term(c, name, a).or_else(|| in_term(c, name, b)),
                _ => None,
            }
        }
        match f {
            Formula::Atom(a) => {
                let decl = self.voc.predicate(&a.pred)?;
                for (t, s) in a.args.iter().zip(&decl.args) {
                    if ident_is(t, name) {
                        return Some(s.clone());
                    }
                }
                a.args.iter().find_map(|t| in_term(self, name, t))
            }
            Formula::Cmp(_, l, r) => {
                for (x, y) in [(l, r), (r, l)] {
                    if ident_is(x, name) {
                        if let Term::Ident { name: other, .. } = y {
                            if let Some(s) = self.lookup(other) {
                                return Some(s.to_owned());
                            }
                            if let Some(s) = self.symbol_sort(other) {
                                return Some(s.name.clone());
                            }
                        }
                    }
                }
                in_term(self, name, l).or_else(|| in_term(self, name, r))
            }
            Formula::Not(g) => self.infer_sort(name, g),
            Formula::Quant(_, vars, g) | Formula::Count(_, _, vars, g) => {
                if vars.iter().any(|v| v.name == name) {
                    None
                } else {
                    self.infer_sort(name, g)
                }
            }
            Formula::And(v) | Formula::Or(v) => v.iter().find_map(|g| self.infer_sort(name, g)),
            Formula::Implies(a, b) | Formula::Equiv(a, b) => {
                self.infer_sort(name, a).or_else(|| self.infer_sort(name, b))
            }
            Formula::True | Formula::False => None,
        }
    }

    fn bind(&mut self, vars: &[VarDecl], body: &[&Formula], span: Span) -> Vec<VarDecl> {
        let mut out = Vec::new();
        for v in vars {
            let sort = v
                .sort
                .clone()
                .or_else(|| body.iter().find_map(|f| self.infer_sort(&v.name, f)));
            match sort {
                Some(s) => {
                    self.scope.push((v.name.clone(), s.clone()));
                    out.push(VarDecl {
                        name: v.name.clone(),
                        sort: Some(s),
                    });
                }
                None => {
                    self.errors.push(LangError::CannotInferSort {
                        span,
                        name: v.name.clone(),
                    });
                    // keep going with a dummy binding to avoid cascades
                    self.scope.push((v.name.clone(), String::new()));
                    out.push(v.clone());
                }
            }
        }
        out
    }

    fn unbind(&mut self, n: usize) {
        let len = self.scope.len();
        self.scope.truncate(len - n);
    }

    fn rule(&mut self, r: &Rule) -> Rule {
        let head_formula = Formula::Atom(r.head.clone());
        let vars = self.bind(&r.vars, &[&head_formula, &r.body], r.span);
        let head = match self.formula(&head_formula, r.span) {
            Formula::Atom(a) => a,
            _ => r.head.clone(),
        };
        let body = self.formula(&r.body, r.span);
        self.unbind(vars.len());
        Rule {
            vars,
            head,
            body,
            span: r.span,
        }
    }

    fn formula(&mut self, f: &Formula, outer: Span) -> Formula {
        let span = first_span(f).unwrap_or(outer);
        match f {
            Formula::True => Formula::True,
            Formula::False => Formula::False,
            Formula::Atom(a) => Formula::Atom(self.atom(a)),
            Formula::Cmp(op, l, r) => self.comparison(*op, l, r, span),
            Formula::Not(g) => Formula::not(self.formula(g, span)),
            Formula::And(v) => Formula::And(v.iter().map(|g| self.formula(g, span)).collect()),
            Formula::Or(v) => Formula::Or(v.iter().map(|g| self.formula(g, span)).collect()),
            Formula::Implies(a, b) => Formula::Implies(
                Box::new(self.formula(a, span)),
                Box::new(self.formula(b, span)),
            ),
            Formula::Equiv(a, b) => Formula::Equiv(
                Box::new(self.formula(a, span)),
                Box::new(self.formula(b, span)),
            ),
            Formula::Quant(k, vars, body) => {
                let vars = self.bind(vars, &[body], span);
                let body = self.formula(body, span);
                self.unbind(vars.len());
                Formula::Quant(*k, vars, Box::new(body))
            }
            Formula::Count(op, k, vars, body) => {
                let vars = self.bind(vars, &[body], span);
                let body = self.formula(body, span);
                self.unbind(vars.len());
                Formula::Count(*op, *k, vars, Box::new(body))
            }
        }
    }

    fn atom(&mut self, a: &Atom) -> Atom {
        let Some(decl) = self.voc.predicate(&a.pred) else {
            self.errors.push(LangError::Undeclared {
                span: a.span,
                what: "predicate",
                name: a.pred.clone(),
            });
            return a.clone();
        };
        if decl.arity() != a.args.len() {
            self.errors.push(LangError::SortMismatch {
                span: a.span,
                message: format!(
                    "{} expects {} arguments, got {}",
                    a.pred,
                    decl.arity(),
                    a.args.len()
                ),
            });
            return a.clone();
        }
        let mut args = Vec::new();
        for (t, sort_name) in a.args.iter().zip(decl.args.clone()) {
            let sort = self.voc.sort(&sort_name).expect("declared sort");
            let span = term_span(t).unwrap_or(a.span);
            if t.contains_aggregate() {
                self.errors.push(LangError::Aggregate {
                    span,
                    message: "aggregates may only appear as a side of a comparison".into(),
                });
                args.push(t.clone());
                continue;
            }
            let (rt, ty) = self.term(t, Some(sort), span);
            match (&ty, sort.domain.is_int()) {
                (Some(Ty::Int), true) => self.check_bounds(&rt, span),
                (Some(Ty::Sym(s)), false) if *s == sort.name => {
                    if let Term::Const(e) = &rt {
                        if !sort.domain.contains(e) {
                            self.errors.push(LangError::SortMismatch {
                                span,
                                message: format!("`{e}` is not an element of sort {}", sort.name),
                            });
                        }
                    }
                }
                (None, _) => {}
                (Some(Ty::Int), false) => self.errors.push(LangError::SortMismatch {
                    span,
                    message: format!(
                        "argument of {} must be of sort {}, found an integer term",
                        a.pred, sort.name
                    ),
                }),
                (Some(Ty::Sym(s)), _) => self.errors.push(LangError::SortMismatch {
                    span,
                    message: format!(
                        "argument of {} must be of sort {}, found sort {s}",
                        a.pred, sort.name
                    ),
                }),
            }
            args.push(rt);
        }
        Atom {
            pred: a.pred.clone(),
            args,
            span: a.span,
        }
    }

    fn comparison(&mut self, op: CmpOp, l: &Term, r: &Term, span: Span) -> Formula {
        if l.contains_aggregate() || r.contains_aggregate() {
            let agg_side_ok = |t: &Term| matches!(t, Term::Agg(_)) || !t.contains_aggregate();
            if (matches!(l, Term::Agg(_)) && matches!(r, Term::Agg(_)))
                || !agg_side_ok(l)
                || !agg_side_ok(r)
            {
                self.errors.push(LangError::Aggregate {
                    span,
                    message: "a comparison may contain one aggregate, as one of its sides".into(),
                });
                return Formula::Cmp(op, l.clone(), r.clone());
            }
        }
        // a side that is a bound variable fixes the sort of the other side
        let anchor = [l, r].iter().find_map(|t| match t {
            Term::Ident { name, .. } => self.lookup(name).map(str::to_owned),
            _ => None,
        });
        let anchor_sort = anchor.as_deref().and_then(|s| self.voc.sort(s));
        let (lt, lty) = self.term(l, anchor_sort, span);
        let (rt, rty) = self.term(r, anchor_sort, span);
        match (&lty, &rty) {
            (Some(Ty::Int), Some(Ty::Int)) => {
                self.check_bounds(&lt, span);
                self.check_bounds(&rt, span);
            }
            (Some(Ty::Sym(a)), Some(Ty::Sym(b))) => {
                if a != b {
                    // constants may live in several sorts
                    let ok = match (&lt, &rt) {
                        (Term::Const(e), _) => {
                            self.voc.sort(b).is_some_and(|s| s.domain.contains(e))
                        }
                        (_, Term::Const(e)) => {
                            self.voc.sort(a).is_some_and(|s| s.domain.contains(e))
                        }
                        _ => false,
                    };
                    if !ok {
                        self.errors.push(LangError::SortMismatch {
                            span,
                            message: format!("cannot compare sort {a} with sort {b}"),
                        });
                    }
                }
                if !matches!(op, CmpOp::Eq | CmpOp::Ne) {
                    self.errors.push(LangError::SortMismatch {
                        span,
                        message: format!("ordering comparison on symbolic sort {a}"),
                    });
                }
            }
            (Some(x), Some(y)) => self.errors.push(LangError::SortMismatch {
                span,
                message: format!("cannot compare {x:?} with {y:?}"),
            }),
            _ => {}
        }
        Formula::Cmp(op, lt, rt)
    }

    fn term(&mut self, t: &Term, expected: Option<&Sort>, span: Span) -> (Term, Option<Ty>) {
        match t {
            Term::Ident { name, span } => {
                if let Some(sort) = self.lookup(name) {
                    if sort.is_empty() {
                        return (Term::Var(name.clone()), None);
                    }
                    let ty = self.sort_ty(sort);
                    return (Term::Var(name.clone()), Some(ty));
                }
                let el = Element::Sym(name.clone());
                if let Some(s) = expected {
                    if s.domain.contains(&el) {
                        return (Term::Const(el), Some(Ty::Sym(s.name.clone())));
                    }
                }
                if let Some(s) = self.symbol_sort(name) {
                    return (Term::Const(el), Some(Ty::Sym(s.name.clone())));
                }
                self.errors.push(LangError::UnboundVariable {
                    span: *span,
                    name: name.clone(),
                });
                (t.clone(), None)
            }
            Term::Var(name) => {
                let ty = self.lookup(name).map(|s| self.sort_ty(s));
                (t.clone(), ty)
            }
            Term::Const(Element::Int(_)) => (t.clone(), Some(Ty::Int)),
            Term::Const(Element::Sym(s)) => {
                let ty = self.symbol_sort(s).map(|s| Ty::Sym(s.name.clone()));
                (t.clone(), ty)
            }
            Term::Neg(inner) => {
                let inner = self.int_operand(inner, span);
                (Term::Neg(Box::new(inner)), Some(Ty::Int))
            }
            Term::Abs(inner) => {
                let inner = self.int_operand(inner, span);
                (Term::Abs(Box::new(inner)), Some(Ty::Int))
            }
            Term::Arith(op, a, b) => {
                let a = self.int_operand(a, span);
                let b = self.int_operand(b, span);
                (Term::Arith(*op, Box::new(a), Box::new(b)), Some(Ty::Int))
            }
            Term::Agg(agg) => (Term::Agg(Box::new(self.aggregate(agg, span))), Some(Ty::Int)),
        }
    }

    fn int_operand(&mut self, t: &Term, span: Span) -> Term {
        let span = term_span(t).unwrap_or(span);
        let (rt, ty) = self.term(t, None, span);
        if let Some(Ty::Sym(s)) = ty {
            self.errors.push(LangError::IntegerOverSymbolic {
                span,
                message: format!("arithmetic on a term of symbolic sort {s}"),
            });
        }
        rt
    }

    fn aggregate(&mut self, agg: &Aggregate, span: Span) -> Aggregate {
        let vars = self.bind(&agg.vars, &[&agg.cond], span);
        let cond = self.formula(&agg.cond, span);
        // the weight may only use the set expression's own variables
        let outer = std::mem::take(&mut self.scope);
        let own: Vec<(String, String)> = outer[outer.len() - vars.len()..].to_vec();
        self.scope = own;
        let wspan = term_span(&agg.weight).unwrap_or(span);
        let (weight, wty) = self.term(&agg.weight, None, wspan);
        self.scope = outer;
        if let Some(Ty::Sym(s)) = wty {
            self.errors.push(LangError::IntegerOverSymbolic {
                span: wspan,
                message: format!("aggregate weight of symbolic sort {s}"),
            });
        }
        self.unbind(vars.len());
        Aggregate {
            func: agg.func,
            vars,
            cond,
            weight,
        }
    }

    fn check_bounds(&mut self, t: &Term, span: Span) {
        if let Err(message) = self.bounds(t) {
            self.errors.push(LangError::Unbounded { span, message });
        }
    }

    fn bounds(&self, t: &Term) -> Result<(i128, i128), String> {
        const LO: i128 = i64::MIN as i128;
        const HI: i128 = i64::MAX as i128;
        let fit = |lo: i128, hi: i128| {
            if lo < LO || hi > HI {
                Err(format!("range [{lo}, {hi}] exceeds 64-bit integers"))
            } else {
                Ok((lo, hi))
            }
        };
        match t {
            Term::Const(Element::Int(i)) => Ok((*i as i128, *i as i128)),
            Term::Var(v) => {
                let sort = self.lookup(v).and_then(|s| self.voc.sort(s));
                match sort.and_then(|s| s.domain.int_bounds()) {
                    Some((lo, hi)) => Ok((lo as i128, hi as i128)),
                    None => Err(format!("variable {v} is not integer-valued")),
                }
            }
            Term::Neg(a) => {
                let (lo, hi) = self.bounds(a)?;
                fit(-hi, -lo)
            }
            Term::Abs(a) => {
                let (lo, hi) = self.bounds(a)?;
                let m = lo.abs().max(hi.abs());
                let low = if lo <= 0 && hi >= 0 { 0 } else { lo.abs().min(hi.abs()) };
                fit(low, m)
            }
            Term::Arith(op, a, b) => {
                let (al, ah) = self.bounds(a)?;
                let (bl, bh) = self.bounds(b)?;
                match op {
                    ArithOp::Add => fit(al + bl, ah + bh),
                    ArithOp::Sub => fit(al - bh, ah - bl),
                    ArithOp::Mul => {
                        let c = [al * bl, al * bh, ah * bl, ah * bh];
                        fit(*c.iter().min().unwrap(), *c.iter().max().unwrap())
                    }
                    ArithOp::Div => {
                        let m = al.abs().max(ah.abs());
                        fit(-m, m)
                    }
                    ArithOp::Mod => {
                        let m = bl.abs().max(bh.abs()).max(1) - 1;
                        fit(-m, m)
                    }
                }
            }
            Term::Agg(agg) => {
                let n: i128 = agg
                    .vars
                    .iter()
                    .map(|v| {
                        v.sort
                            .as_deref()
                            .and_then(|s| self.voc.sort(s))
                            .map_or(0, |s| s.domain.len() as i128)
                    })
                    .product();
                if agg.func == AggFn::Card {
                    return fit(0, n);
                }
                let mut inner = Checker {
                    voc: self.voc,
                    errors: Vec::new(),
                    scope: agg
                        .vars
                        .iter()
                        .map(|v| (v.name.clone(), v.sort.clone().unwrap_or_default()))
                        .collect(),
                };
                let (wl, wh) = inner.bounds(&agg.weight)?;
                inner.errors.clear();
                match agg.func {
                    AggFn::Sum => fit(n * wl.min(0), n * wh.max(0)),
                    AggFn::Min | AggFn::Max => fit(wl, wh),
                    AggFn::Prod => {
                        let m = wl.abs().max(wh.abs()).max(1);
                        let mut acc: i128 = 1;
                        for _ in 0..n {
                            acc = acc.checked_mul(m).filter(|v| *v <= HI).ok_or_else(|| {
                                "product aggregate may exceed 64-bit integers".to_string()
                            })?;
                        }
                        fit(-acc, acc)
                    }
                    AggFn::Card => unreachable!(),
                }
            }
            Term::Const(Element::Sym(s)) => Err(format!("`{s}` is not an integer")),
            Term::Ident { name, .. } => Err(format!("unresolved identifier {name}")),
        }
    }
}
