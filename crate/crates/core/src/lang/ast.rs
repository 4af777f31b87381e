//! Abstract syntax for vocabularies, theories and the formula language.

use std::collections::BTreeSet;
use std::fmt;

use crate::structure::DomainAtom;

/// Source position (1-based line and column).
///
/// Spans never take part in structural equality, so a pretty-printed and
/// re-parsed tree compares equal to the original.
#[derive(Clone, Copy, Debug, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Span {}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

/// A domain element: a symbolic constant or an integer.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Element {
    Int(i64),
    Sym(String),
}

impl Element {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            Element::Int(i) => Some(*i),
            Element::Sym(_) => None,
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Int(i) => write!(f, "{i}"),
            Element::Sym(s) => f.write_str(s),
        }
    }
}

/// Ordered finite domain of a sort.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Domain {
    Symbols(Vec<String>),
    Ints(Vec<i64>),
}

impl Domain {
    pub fn len(&self) -> usize {
        match self {
            Domain::Symbols(s) => s.len(),
            Domain::Ints(i) => i.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_int(&self) -> bool {
        matches!(self, Domain::Ints(_))
    }

    pub fn elements(&self) -> Vec<Element> {
        match self {
            Domain::Symbols(s) => s.iter().cloned().map(Element::Sym).collect(),
            Domain::Ints(i) => i.iter().copied().map(Element::Int).collect(),
        }
    }

    pub fn contains(&self, el: &Element) -> bool {
        match (self, el) {
            (Domain::Symbols(s), Element::Sym(x)) => s.iter().any(|y| y == x),
            (Domain::Ints(i), Element::Int(x)) => i.contains(x),
            _ => false,
        }
    }

    /// Smallest and largest value of an integer domain.
    pub fn int_bounds(&self) -> Option<(i64, i64)> {
        match self {
            Domain::Ints(i) => Some((*i.iter().min()?, *i.iter().max()?)),
            Domain::Symbols(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sort {
    pub name: String,
    pub domain: Domain,
    pub span: Span,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PredicateKind {
    /// Fixed input data; immutable under revision.
    Data,
    /// Unknowns the inferences may assign.
    Search,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PredicateDecl {
    pub name: String,
    pub args: Vec<String>,
    pub kind: PredicateKind,
    pub span: Span,
}

impl PredicateDecl {
    pub fn arity(&self) -> usize {
        self.args.len()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    pub name: String,
    pub sorts: Vec<Sort>,
    pub predicates: Vec<PredicateDecl>,
}

impl Vocabulary {
    pub fn new(name: impl Into<String>) -> Self {
        Vocabulary {
            name: name.into(),
            sorts: Vec::new(),
            predicates: Vec::new(),
        }
    }

    pub fn sort(&self, name: &str) -> Option<&Sort> {
        self.sorts.iter().find(|s| s.name == name)
    }

    pub fn predicate(&self, name: &str) -> Option<&PredicateDecl> {
        self.predicates.iter().find(|p| p.name == name)
    }

    /// All domain atoms of one predicate, in lexicographic tuple order of
    /// the sort domains.
    pub fn atoms_of(&self, pred: &PredicateDecl) -> Vec<DomainAtom> {
        let domains: Vec<Vec<Element>> = pred
            .args
            .iter()
            .map(|s| self.sort(s).map(|s| s.domain.elements()).unwrap_or_default())
            .collect();
        cartesian(&domains)
            .into_iter()
            .map(|args| DomainAtom::new(pred.name.clone(), args))
            .collect()
    }

    /// Every domain atom of the vocabulary.
    pub fn all_atoms(&self) -> Vec<DomainAtom> {
        self.predicates.iter().flat_map(|p| self.atoms_of(p)).collect()
    }

    /// Number of domain atoms, without materializing them.
    pub fn atom_count(&self) -> usize {
        self.predicates
            .iter()
            .map(|p| {
                p.args
                    .iter()
                    .map(|s| self.sort(s).map_or(0, |s| s.domain.len()))
                    .product::<usize>()
            })
            .sum()
    }

    /// Checks arity and sort membership of an atom.
    pub fn is_well_sorted(&self, atom: &DomainAtom) -> bool {
        let Some(decl) = self.predicate(&atom.pred) else {
            return false;
        };
        decl.args.len() == atom.args.len()
            && decl
                .args
                .iter()
                .zip(&atom.args)
                .all(|(s, e)| self.sort(s).is_some_and(|s| s.domain.contains(e)))
    }

    pub fn kind_of(&self, pred: &str) -> Option<PredicateKind> {
        self.predicate(pred).map(|p| p.kind)
    }
}

pub(crate) fn cartesian(domains: &[Vec<Element>]) -> Vec<Vec<Element>> {
    let mut out = vec![Vec::new()];
    for dom in domains {
        let mut next = Vec::with_capacity(out.len() * dom.len());
        for prefix in &out {
            for el in dom {
                let mut t = prefix.clone();
                t.push(el.clone());
                next.push(t);
            }
        }
        out = next;
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AggFn {
    Card,
    Sum,
    Min,
    Max,
    Prod,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    /// The operator of the negated comparison.
    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Ge => CmpOp::Lt,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
        }
    }

    /// The operator obtained by swapping both sides.
    pub fn flip(self) -> CmpOp {
        match self {
            CmpOp::Lt => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Lt,
            CmpOp::Le => CmpOp::Ge,
            CmpOp::Ge => CmpOp::Le,
            op => op,
        }
    }

    pub fn holds<T: Ord>(self, a: T, b: T) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub sort: Option<String>,
}

impl VarDecl {
    pub fn new(name: impl Into<String>, sort: Option<&str>) -> Self {
        VarDecl {
            name: name.into(),
            sort: sort.map(str::to_owned),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Term {
    /// Unresolved identifier as produced by the parser.
    Ident { name: String, span: Span },
    Var(String),
    Const(Element),
    Neg(Box<Term>),
    Abs(Box<Term>),
    Arith(ArithOp, Box<Term>, Box<Term>),
    Agg(Box<Aggregate>),
}

impl Term {
    pub fn int(i: i64) -> Term {
        Term::Const(Element::Int(i))
    }

    pub fn contains_aggregate(&self) -> bool {
        match self {
            Term::Agg(_) => true,
            Term::Neg(t) | Term::Abs(t) => t.contains_aggregate(),
            Term::Arith(_, a, b) => a.contains_aggregate() || b.contains_aggregate(),
            _ => false,
        }
    }
}

/// Aggregate over a set expression `{ vars : cond }` with a weight term.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Aggregate {
    pub func: AggFn,
    pub vars: Vec<VarDecl>,
    pub cond: Formula,
    /// Fixed to the constant 1 for cardinality.
    pub weight: Term,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QuantKind {
    Forall,
    Exists,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Atom {
    pub pred: String,
    pub args: Vec<Term>,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Formula {
    True,
    False,
    Atom(Atom),
    Cmp(CmpOp, Term, Term),
    Not(Box<Formula>),
    And(Vec<Formula>),
    Or(Vec<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Equiv(Box<Formula>, Box<Formula>),
    Quant(QuantKind, Vec<VarDecl>, Box<Formula>),
    /// Counting quantifier; the operator is one of `=`, `>=`, `=<`.
    Count(CmpOp, u64, Vec<VarDecl>, Box<Formula>),
}

impl Formula {
    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    /// Predicates mentioned anywhere in the formula, aggregates included.
    pub fn predicates(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(a) => {
                out.insert(a.pred.clone());
                for t in &a.args {
                    term_predicates(t, out);
                }
            }
            Formula::Cmp(_, a, b) => {
                term_predicates(a, out);
                term_predicates(b, out);
            }
            Formula::Not(f) | Formula::Quant(_, _, f) | Formula::Count(_, _, _, f) => {
                f.predicates(out)
            }
            Formula::And(fs) | Formula::Or(fs) => fs.iter().for_each(|f| f.predicates(out)),
            Formula::Implies(a, b) | Formula::Equiv(a, b) => {
                a.predicates(out);
                b.predicates(out);
            }
        }
    }

    /// Predicates mentioned inside aggregate set expressions only.
    pub fn aggregate_predicates(&self, out: &mut BTreeSet<String>) {
        fn in_term(t: &Term, out: &mut BTreeSet<String>) {
            match t {
                Term::Agg(a) => {
                    a.cond.predicates(out);
                    term_predicates(&a.weight, out);
                }
                Term::Neg(t) | Term::Abs(t) => in_term(t, out),
                Term::Arith(_, a, b) => {
                    in_term(a, out);
                    in_term(b, out);
                }
                _ => {}
            }
        }
        match self {
            Formula::True | Formula::False => {}
            Formula::Atom(a) => a.args.iter().for_each(|t| in_term(t, out)),
            Formula::Cmp(_, a, b) => {
                in_term(a, out);
                in_term(b, out);
            }
            // counting quantifiers are aggregates in disguise
            Formula::Count(_, _, _, f) => f.predicates(out),
            Formula::Not(f) | Formula::Quant(_, _, f) => f.aggregate_predicates(out),
            Formula::And(fs) | Formula::Or(fs) => {
                fs.iter().for_each(|f| f.aggregate_predicates(out))
            }
            Formula::Implies(a, b) | Formula::Equiv(a, b) => {
                a.aggregate_predicates(out);
                b.aggregate_predicates(out);
            }
        }
    }
}

fn term_predicates(t: &Term, out: &mut BTreeSet<String>) {
    match t {
        Term::Agg(a) => {
            a.cond.predicates(out);
            term_predicates(&a.weight, out);
        }
        Term::Neg(t) | Term::Abs(t) => term_predicates(t, out),
        Term::Arith(_, a, b) => {
            term_predicates(a, out);
            term_predicates(b, out);
        }
        _ => {}
    }
}

/// `! vars : head <- body.`
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rule {
    pub vars: Vec<VarDecl>,
    pub head: Atom,
    pub body: Formula,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Definition {
    pub rules: Vec<Rule>,
    pub span: Span,
}

impl Definition {
    /// Predicates occurring in a rule head.
    pub fn defined_predicates(&self) -> BTreeSet<String> {
        self.rules.iter().map(|r| r.head.pred.clone()).collect()
    }

    /// Predicates used in bodies that this definition does not define.
    pub fn open_predicates(&self) -> BTreeSet<String> {
        let defined = self.defined_predicates();
        let mut used = BTreeSet::new();
        for r in &self.rules {
            r.body.predicates(&mut used);
            for t in &r.head.args {
                term_predicates(t, &mut used);
            }
        }
        used.retain(|p| !defined.contains(p));
        used
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    pub formula: Formula,
    pub span: Span,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Theory {
    pub name: String,
    pub vocabulary: String,
    pub sentences: Vec<Sentence>,
    pub definitions: Vec<Definition>,
}

impl Theory {
    pub fn empty(name: impl Into<String>, vocabulary: impl Into<String>) -> Self {
        Theory {
            name: name.into(),
            vocabulary: vocabulary.into(),
            sentences: Vec::new(),
            definitions: Vec::new(),
        }
    }

    /// Index of the definition defining `pred`, if any.
    pub fn definition_of(&self, pred: &str) -> Option<usize> {
        self.definitions
            .iter()
            .position(|d| d.rules.iter().any(|r| r.head.pred == pred))
    }
}
