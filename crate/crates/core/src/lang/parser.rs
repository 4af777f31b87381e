use std::collections::BTreeSet;

use super::ast::*;
use super::lexer::{lex, Tok};
use super::{KnowledgeBase, LangError};
use crate::structure::{DomainAtom, ThreeValuedStructure};

type PResult<T> = Result<T, LangError>;

const AGG_KEYWORDS: [&str; 5] = ["card", "sum", "min", "max", "prod"];

struct Parser<'v> {
    toks: Vec<(Tok, Span)>,
    pos: usize,
    voc: Option<&'v Vocabulary>,
}

/// Parses a knowledge-base file into its vocabulary, theory and structure.
///
/// The vocabulary block is mandatory and must come first; a missing theory
/// or structure block yields an empty one.
pub fn parse(src: &str) -> Result<KnowledgeBase, LangError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, pos: 0, voc: None };

    let voc_owned;
    match p.peek() {
        Tok::Ident(k) if k == "vocabulary" => {
            voc_owned = p.vocabulary()?;
        }
        _ => return Err(p.unexpected(&["`vocabulary`"])),
    }
    let mut q = Parser {
        toks: p.toks,
        pos: p.pos,
        voc: Some(&voc_owned),
    };

    let mut theory: Option<Theory> = None;
    let mut structure: Option<ThreeValuedStructure> = None;
    loop {
        let span = q.span();
        match q.peek().clone() {
            Tok::Eof => break,
            Tok::Ident(k) if k == "theory" => {
                let t = q.theory()?;
                if theory.is_some() {
                    return Err(LangError::Duplicate {
                        span,
                        what: "theory block",
                        name: t.name,
                    });
                }
                theory = Some(t);
            }
            Tok::Ident(k) if k == "structure" || k == "total" => {
                let s = q.structure()?;
                if structure.is_some() {
                    return Err(LangError::Duplicate {
                        span,
                        what: "structure block",
                        name: s.name,
                    });
                }
                structure = Some(s);
            }
            Tok::Ident(k) if k == "vocabulary" => {
                return Err(LangError::Duplicate {
                    span,
                    what: "vocabulary block",
                    name: voc_owned.name.clone(),
                })
            }
            _ => return Err(q.unexpected(&["`theory`", "`structure`", "end of input"])),
        }
    }
    let theory = theory.unwrap_or_else(|| Theory::empty("T", voc_owned.name.clone()));
    let structure = structure.unwrap_or_else(|| ThreeValuedStructure::empty(&voc_owned));
    Ok(KnowledgeBase {
        vocabulary: voc_owned,
        theory,
        structure,
    })
}

/// Parses a standalone structure block (e.g. a model file) against an
/// existing vocabulary.
pub fn parse_structure(src: &str, voc: &Vocabulary) -> Result<ThreeValuedStructure, LangError> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
        voc: Some(voc),
    };
    let s = p.structure()?;
    p.expect(Tok::Eof, "end of input")?;
    Ok(s)
}

/// Parses a term such as an optimization objective `#{x : p(x)}`.
pub fn parse_term(src: &str, voc: &Vocabulary) -> Result<Term, LangError> {
    let mut p = Parser {
        toks: lex(src)?,
        pos: 0,
        voc: Some(voc),
    };
    let t = p.term()?;
    p.expect(Tok::Eof, "end of input")?;
    Ok(t)
}

/// Parses an atom list file: one `pred(el,...)` per line, `//` comments and
/// blank lines ignored. Every atom is checked against the vocabulary.
pub fn parse_atom_list(src: &str, voc: &Vocabulary) -> Result<Vec<DomainAtom>, LangError> {
    let mut out = Vec::new();
    for (n, line) in src.lines().enumerate() {
        let text = line.split("//").next().unwrap_or("").trim();
        if text.is_empty() {
            continue;
        }
        let span = Span::new(n as u32 + 1, 1);
        let atom: DomainAtom = text.parse().map_err(|_| LangError::Syntax {
            span,
            expected: vec!["an atom `pred(el,...)`".into()],
            found: format!("`{text}`"),
        })?;
        check_atom(voc, &atom, span)?;
        out.push(atom);
    }
    Ok(out)
}

pub(crate) fn check_atom(voc: &Vocabulary, atom: &DomainAtom, span: Span) -> PResult<()> {
    let Some(decl) = voc.predicate(&atom.pred) else {
        return Err(LangError::Undeclared {
            span,
            what: "predicate",
            name: atom.pred.clone(),
        });
    };
    if decl.arity() != atom.args.len() {
        return Err(LangError::SortMismatch {
            span,
            message: format!(
                "{} expects {} arguments, got {}",
                decl.name,
                decl.arity(),
                atom.args.len()
            ),
        });
    }
    for (s, e) in decl.args.iter().zip(&atom.args) {
        let sort = voc.sort(s).expect("declared sort");
        if !sort.domain.contains(e) {
            return Err(LangError::SortMismatch {
                span,
                message: format!("`{e}` is not an element of sort {s} in {atom}"),
            });
        }
    }
    Ok(())
}

impl<'v> Parser<'v> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].0
    }

    fn span(&self) -> Span {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, Span) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == tok {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Tok::Ident(k) if k == kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn unexpected(&self, expected: &[&str]) -> LangError {
        LangError::Syntax {
            span: self.span(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().to_string(),
        }
    }

    fn expect(&mut self, tok: Tok, what: &str) -> PResult<Span> {
        if *self.peek() == tok {
            Ok(self.bump().1)
        } else {
            Err(self.unexpected(&[what]))
        }
    }

    fn ident(&mut self, what: &str) -> PResult<(String, Span)> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                let span = self.bump().1;
                Ok((s, span))
            }
            _ => Err(self.unexpected(&[what])),
        }
    }

    fn skip_separator(&mut self) {
        while matches!(self.peek(), Tok::Semi) {
            self.bump();
        }
    }

    fn voc(&self) -> &'v Vocabulary {
        self.voc.expect("vocabulary parsed first")
    }

    // ---------------------------------------------------------------- blocks

    fn vocabulary(&mut self) -> PResult<Vocabulary> {
        self.bump();
        let (name, _) = self.ident("vocabulary name")?;
        self.expect(Tok::LBrace, "`{`")?;
        let mut voc = Vocabulary::new(name);
        loop {
            let span = self.span();
            if self.eat(&Tok::RBrace) {
                break;
            }
            if self.eat_kw("type") {
                let (name, _) = self.ident("sort name")?;
                if voc.sort(&name).is_some() {
                    return Err(LangError::Duplicate {
                        span,
                        what: "sort",
                        name,
                    });
                }
                self.expect(Tok::Eq, "`=`")?;
                let domain = self.domain(&name, span)?;
                voc.sorts.push(Sort { name, domain, span });
            } else {
                let kind = if self.eat_kw("data") {
                    PredicateKind::Data
                } else {
                    PredicateKind::Search
                };
                if !self.eat_kw("pred") {
                    return Err(self.unexpected(&["`type`", "`pred`", "`data pred`", "`}`"]));
                }
                let (name, _) = self.ident("predicate name")?;
                if voc.predicate(&name).is_some() {
                    return Err(LangError::Duplicate {
                        span,
                        what: "predicate",
                        name,
                    });
                }
                let mut args = Vec::new();
                if self.eat(&Tok::LParen) {
                    if !self.eat(&Tok::RParen) {
                        loop {
                            let (s, sspan) = self.ident("sort name")?;
                            if voc.sort(&s).is_none() {
                                return Err(LangError::Undeclared {
                                    span: sspan,
                                    what: "sort",
                                    name: s,
                                });
                            }
                            args.push(s);
                            if self.eat(&Tok::RParen) {
                                break;
                            }
                            self.expect(Tok::Comma, "`,` or `)`")?;
                        }
                    }
                }
                voc.predicates.push(PredicateDecl {
                    name,
                    args,
                    kind,
                    span,
                });
            }
            self.skip_separator();
        }
        Ok(voc)
    }

    fn signed_int(&mut self) -> Option<i64> {
        match (self.peek().clone(), self.peek_at(1).clone()) {
            (Tok::Int(i), _) => {
                self.bump();
                Some(i)
            }
            (Tok::Minus, Tok::Int(i)) => {
                self.bump();
                self.bump();
                Some(-i)
            }
            _ => None,
        }
    }

    fn domain(&mut self, sort: &str, span: Span) -> PResult<Domain> {
        self.expect(Tok::LBrace, "`{`")?;
        if self.eat(&Tok::RBrace) {
            return Err(LangError::EmptySort {
                span,
                name: sort.to_owned(),
            });
        }
        let save = self.pos;
        if let Some(lo) = self.signed_int() {
            if self.eat(&Tok::DotDot) {
                let hi = self
                    .signed_int()
                    .ok_or_else(|| self.unexpected(&["integer upper bound"]))?;
                self.expect(Tok::RBrace, "`}`")?;
                if hi < lo {
                    return Err(LangError::EmptySort {
                        span,
                        name: sort.to_owned(),
                    });
                }
                return Ok(Domain::Ints((lo..=hi).collect()));
            }
        }
        self.pos = save;

        let mut syms: Vec<String> = Vec::new();
        let mut ints: Vec<i64> = Vec::new();
        loop {
            let espan = self.span();
            if let Some(i) = self.signed_int() {
                if ints.contains(&i) {
                    return Err(LangError::Duplicate {
                        span: espan,
                        what: "element",
                        name: i.to_string(),
                    });
                }
                ints.push(i);
            } else {
                let (s, _) = self.ident("domain element")?;
                if syms.contains(&s) {
                    return Err(LangError::Duplicate {
                        span: espan,
                        what: "element",
                        name: s,
                    });
                }
                syms.push(s);
            }
            if !syms.is_empty() && !ints.is_empty() {
                return Err(LangError::SortMismatch {
                    span: espan,
                    message: format!("sort {sort} mixes integers and symbols"),
                });
            }
            if self.eat(&Tok::RBrace) {
                break;
            }
            if !self.eat(&Tok::Comma) && !self.eat(&Tok::Semi) {
                return Err(self.unexpected(&["`,`", "`;`", "`}`"]));
            }
        }
        Ok(if ints.is_empty() {
            Domain::Symbols(syms)
        } else {
            Domain::Ints(ints)
        })
    }

    fn block_header(&mut self) -> PResult<String> {
        let (name, _) = self.ident("block name")?;
        self.expect(Tok::Colon, "`:`")?;
        let (v, vspan) = self.ident("vocabulary name")?;
        if v != self.voc().name {
            return Err(LangError::Undeclared {
                span: vspan,
                what: "vocabulary",
                name: v,
            });
        }
        self.expect(Tok::LBrace, "`{`")?;
        Ok(name)
    }

    fn theory(&mut self) -> PResult<Theory> {
        self.bump();
        let name = self.block_header()?;
        let mut theory = Theory::empty(name, self.voc().name.clone());
        loop {
            let span = self.span();
            if self.eat(&Tok::RBrace) {
                break;
            }
            if self.eat(&Tok::LBrace) {
                let mut rules = Vec::new();
                while !self.eat(&Tok::RBrace) {
                    rules.push(self.rule()?);
                }
                theory.definitions.push(Definition { rules, span });
            } else {
                let formula = self.formula()?;
                self.expect(Tok::Dot, "`.` after sentence")?;
                theory.sentences.push(Sentence { formula, span });
            }
        }
        Ok(theory)
    }

    fn rule(&mut self) -> PResult<Rule> {
        let span = self.span();
        let vars = if self.eat(&Tok::Bang) {
            let v = self.var_decls()?;
            self.expect(Tok::Colon, "`:`")?;
            v
        } else {
            Vec::new()
        };
        let (name, hspan) = self.ident("rule head atom")?;
        let head = self.atom_after_name(name, hspan)?;
        let body = if self.peek() == &Tok::Arrow {
            let arrow = self.bump().1;
            self.operand_after(arrow, "<-")?;
            self.formula()?
        } else {
            Formula::True
        };
        self.expect(Tok::Dot, "`.` after rule")?;
        Ok(Rule {
            vars,
            head,
            body,
            span,
        })
    }

    fn structure(&mut self) -> PResult<ThreeValuedStructure> {
        let total = self.eat_kw("total");
        if !self.eat_kw("structure") {
            return Err(self.unexpected(&["`structure`"]));
        }
        let name = self.block_header()?;
        let voc = self.voc();
        let mut s = ThreeValuedStructure::new(name, voc.name.clone());
        let mut seen: BTreeSet<(String, bool)> = BTreeSet::new();
        loop {
            if self.eat(&Tok::RBrace) {
                break;
            }
            let (pred, pspan) = self.ident("predicate name or `}`")?;
            let Some(decl) = voc.predicate(&pred) else {
                return Err(LangError::Undeclared {
                    span: pspan,
                    what: "predicate",
                    name: pred,
                });
            };
            let mut positive = true;
            if self.eat(&Tok::Dot) {
                let (sel, sspan) = self.ident("`ct` or `cf`")?;
                positive = match sel.as_str() {
                    "ct" => true,
                    "cf" => false,
                    _ => {
                        return Err(LangError::Syntax {
                            span: sspan,
                            expected: vec!["`ct`".into(), "`cf`".into()],
                            found: format!("`{sel}`"),
                        })
                    }
                };
            }
            if !seen.insert((pred.clone(), positive)) {
                return Err(LangError::Duplicate {
                    span: pspan,
                    what: "interpretation of",
                    name: pred,
                });
            }
            self.expect(Tok::Eq, "`=`")?;
            let tuples: Vec<(Vec<Element>, Span)> = if self.eat_kw("true") {
                vec![(Vec::new(), pspan)]
            } else if self.eat_kw("false") {
                if decl.arity() == 0 {
                    positive = !positive;
                }
                vec![(Vec::new(), pspan)]
            } else {
                self.tuples()?
            };
            for (tuple, tspan) in tuples {
                let atom = DomainAtom::new(pred.clone(), tuple);
                check_atom(voc, &atom, tspan)?;
                s.set(&atom, positive).map_err(|_| LangError::Inconsistent {
                    span: tspan,
                    atom: atom.to_string(),
                })?;
            }
            self.skip_separator();
        }
        if total {
            s.close_world(voc);
        } else {
            for decl in voc.predicates.iter().filter(|d| d.kind == PredicateKind::Data) {
                for atom in voc.atoms_of(decl) {
                    if s.value(&atom).is_none() {
                        let _ = s.set(&atom, false);
                    }
                }
            }
        }
        Ok(s)
    }

    fn element(&mut self) -> PResult<Element> {
        if let Some(i) = self.signed_int() {
            return Ok(Element::Int(i));
        }
        let (s, _) = self.ident("domain element")?;
        Ok(Element::Sym(s))
    }

    fn tuples(&mut self) -> PResult<Vec<(Vec<Element>, Span)>> {
        self.expect(Tok::LBrace, "`{`")?;
        let mut out = Vec::new();
        if self.eat(&Tok::RBrace) {
            return Ok(out);
        }
        loop {
            let span = self.span();
            let mut tuple = Vec::new();
            if self.eat(&Tok::LParen) {
                if !self.eat(&Tok::RParen) {
                    loop {
                        tuple.push(self.element()?);
                        if self.eat(&Tok::RParen) {
                            break;
                        }
                        self.expect(Tok::Comma, "`,` or `)`")?;
                    }
                }
            } else {
                loop {
                    tuple.push(self.element()?);
                    if !self.eat(&Tok::Comma) {
                        break;
                    }
                }
            }
            out.push((tuple, span));
            if self.eat(&Tok::RBrace) {
                break;
            }
            self.expect(Tok::Semi, "`;` or `}`")?;
            if self.eat(&Tok::RBrace) {
                break;
            }
        }
        Ok(out)
    }

    // -------------------------------------------------------------- formulas

    fn var_decls(&mut self) -> PResult<Vec<VarDecl>> {
        let mut vars = Vec::new();
        while let Tok::Ident(name) = self.peek().clone() {
            self.bump();
            let sort = if self.eat(&Tok::LBrack) {
                let (s, sspan) = self.ident("sort name")?;
                if self.voc().sort(&s).is_none() {
                    return Err(LangError::Undeclared {
                        span: sspan,
                        what: "sort",
                        name: s,
                    });
                }
                self.expect(Tok::RBrack, "`]`")?;
                Some(s)
            } else {
                None
            };
            vars.push(VarDecl { name, sort });
        }
        if vars.is_empty() {
            return Err(self.unexpected(&["variable"]));
        }
        Ok(vars)
    }

    fn can_start_formula(tok: &Tok) -> bool {
        matches!(
            tok,
            Tok::Ident(_)
                | Tok::Int(_)
                | Tok::LParen
                | Tok::Tilde
                | Tok::Bang
                | Tok::Question
                | Tok::Hash
                | Tok::Minus
        )
    }

    /// A binary operator needs a right operand; report the operator itself
    /// when it dangles.
    fn operand_after(&self, op_span: Span, op: &str) -> PResult<()> {
        if Self::can_start_formula(self.peek()) {
            Ok(())
        } else {
            Err(LangError::Syntax {
                span: op_span,
                expected: vec![format!("a formula after `{op}`")],
                found: self.peek().to_string(),
            })
        }
    }

    fn formula(&mut self) -> PResult<Formula> {
        let mut lhs = self.implication()?;
        while self.peek() == &Tok::Equiv {
            let span = self.bump().1;
            self.operand_after(span, "<=>")?;
            let rhs = self.implication()?;
            lhs = Formula::Equiv(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn implication(&mut self) -> PResult<Formula> {
        let lhs = self.disjunction()?;
        if self.peek() == &Tok::Implies {
            let span = self.bump().1;
            self.operand_after(span, "=>")?;
            let rhs = self.implication()?;
            return Ok(Formula::Implies(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> PResult<Formula> {
        let mut parts = vec![self.conjunction()?];
        while self.peek() == &Tok::Pipe {
            let span = self.bump().1;
            self.operand_after(span, "|")?;
            parts.push(self.conjunction()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Formula::Or(parts)
        })
    }

    fn conjunction(&mut self) -> PResult<Formula> {
        let mut parts = vec![self.unary()?];
        while self.peek() == &Tok::Amp {
            let span = self.bump().1;
            self.operand_after(span, "&")?;
            parts.push(self.unary()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Formula::And(parts)
        })
    }

    fn unary(&mut self) -> PResult<Formula> {
        match self.peek() {
            Tok::Tilde => {
                let span = self.bump().1;
                self.operand_after(span, "~")?;
                Ok(Formula::not(self.unary()?))
            }
            Tok::Bang => {
                self.bump();
                let vars = self.var_decls()?;
                self.expect(Tok::Colon, "`:`")?;
                let body = self.formula()?;
                Ok(Formula::Quant(QuantKind::Forall, vars, Box::new(body)))
            }
            Tok::Question => {
                self.bump();
                let count = match self.peek() {
                    Tok::Eq => Some(CmpOp::Eq),
                    Tok::Ge => Some(CmpOp::Ge),
                    Tok::Le => Some(CmpOp::Le),
                    Tok::Gt => Some(CmpOp::Gt),
                    Tok::Lt => Some(CmpOp::Lt),
                    _ => None,
                };
                let Some(op) = count else {
                    let vars = self.var_decls()?;
                    self.expect(Tok::Colon, "`:`")?;
                    let body = self.formula()?;
                    return Ok(Formula::Quant(QuantKind::Exists, vars, Box::new(body)));
                };
                self.bump();
                let k = match self.peek().clone() {
                    Tok::Int(k) => {
                        self.bump();
                        k as u64
                    }
                    _ => return Err(self.unexpected(&["count bound"])),
                };
                let vars = self.var_decls()?;
                self.expect(Tok::Colon, "`:`")?;
                let body = Box::new(self.formula()?);
                Ok(match op {
                    CmpOp::Gt => Formula::Count(CmpOp::Ge, k + 1, vars, body),
                    CmpOp::Lt if k == 0 => Formula::False,
                    CmpOp::Lt => Formula::Count(CmpOp::Le, k - 1, vars, body),
                    op => Formula::Count(op, k, vars, body),
                })
            }
            _ => self.primary(),
        }
    }

    fn cmp_op(&self) -> Option<CmpOp> {
        Some(match self.peek() {
            Tok::Eq => CmpOp::Eq,
            Tok::Ne => CmpOp::Ne,
            Tok::Lt => CmpOp::Lt,
            Tok::Le => CmpOp::Le,
            Tok::Gt => CmpOp::Gt,
            Tok::Ge => CmpOp::Ge,
            _ => return None,
        })
    }

    fn comparison_rest(&mut self, lhs: Term) -> PResult<Formula> {
        let Some(op) = self.cmp_op() else {
            return Err(self.unexpected(&["comparison operator"]));
        };
        self.bump();
        let rhs = self.term()?;
        Ok(Formula::Cmp(op, lhs, rhs))
    }

    fn primary(&mut self) -> PResult<Formula> {
        match self.peek().clone() {
            Tok::LParen => {
                // `(x + 1) = y` or `(p & q)`: try the comparison first
                let save = self.pos;
                if let Ok(t) = self.term() {
                    if self.cmp_op().is_some() {
                        return self.comparison_rest(t);
                    }
                }
                self.pos = save;
                self.bump();
                let f = self.formula()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Tok::Ident(name) if name == "true" => {
                self.bump();
                Ok(Formula::True)
            }
            Tok::Ident(name) if name == "false" => {
                self.bump();
                Ok(Formula::False)
            }
            Tok::Ident(name) if self.voc().predicate(&name).is_some() => {
                let span = self.bump().1;
                Ok(Formula::Atom(self.atom_after_name(name, span)?))
            }
            Tok::Ident(name)
                if matches!(self.peek_at(1), Tok::LParen)
                    && name != "abs"
                    && !AGG_KEYWORDS.contains(&name.as_str()) =>
            {
                Err(LangError::Undeclared {
                    span: self.span(),
                    what: "predicate",
                    name,
                })
            }
            t if Self::can_start_formula(&t) => {
                let lhs = self.term()?;
                self.comparison_rest(lhs)
            }
            _ => Err(self.unexpected(&["formula"])),
        }
    }

    fn atom_after_name(&mut self, name: String, span: Span) -> PResult<Atom> {
        if self.voc().predicate(&name).is_none() {
            return Err(LangError::Undeclared {
                span,
                what: "predicate",
                name,
            });
        }
        let mut args = Vec::new();
        if self.eat(&Tok::LParen) && !self.eat(&Tok::RParen) {
            loop {
                args.push(self.term()?);
                if self.eat(&Tok::RParen) {
                    break;
                }
                self.expect(Tok::Comma, "`,` or `)`")?;
            }
        }
        Ok(Atom {
            pred: name,
            args,
            span,
        })
    }

    // ----------------------------------------------------------------- terms

    fn term(&mut self) -> PResult<Term> {
        let mut lhs = self.mul_term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => ArithOp::Add,
                Tok::Minus => ArithOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.mul_term()?;
            lhs = Term::Arith(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn mul_term(&mut self) -> PResult<Term> {
        let mut lhs = self.unary_term()?;
        loop {
            let op = match self.peek() {
                Tok::Star => ArithOp::Mul,
                Tok::Slash => ArithOp::Div,
                Tok::Percent => ArithOp::Mod,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary_term()?;
            lhs = Term::Arith(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary_term(&mut self) -> PResult<Term> {
        if self.peek() == &Tok::Minus {
            if let Tok::Int(i) = *self.peek_at(1) {
                self.bump();
                self.bump();
                return Ok(Term::int(-i));
            }
            self.bump();
            return Ok(Term::Neg(Box::new(self.unary_term()?)));
        }
        self.term_primary()
    }

    fn term_primary(&mut self) -> PResult<Term> {
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(Term::int(i))
            }
            Tok::LParen => {
                self.bump();
                let t = self.term()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(t)
            }
            Tok::Hash => {
                self.bump();
                self.aggregate(AggFn::Card)
            }
            Tok::Ident(name) if name == "abs" && self.peek_at(1) == &Tok::LParen => {
                self.bump();
                self.bump();
                let t = self.term()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(Term::Abs(Box::new(t)))
            }
            Tok::Ident(name)
                if AGG_KEYWORDS.contains(&name.as_str()) && self.peek_at(1) == &Tok::LBrace =>
            {
                self.bump();
                let func = match name.as_str() {
                    "card" => AggFn::Card,
                    "sum" => AggFn::Sum,
                    "min" => AggFn::Min,
                    "max" => AggFn::Max,
                    _ => AggFn::Prod,
                };
                self.aggregate(func)
            }
            Tok::Ident(name) => {
                let span = self.bump().1;
                Ok(Term::Ident { name, span })
            }
            _ => Err(self.unexpected(&["term"])),
        }
    }

    fn aggregate(&mut self, func: AggFn) -> PResult<Term> {
        self.expect(Tok::LBrace, "`{`")?;
        let vars = self.var_decls()?;
        self.expect(Tok::Colon, "`:`")?;
        let cond = self.formula()?;
        let weight = if func == AggFn::Card {
            Term::int(1)
        } else {
            self.expect(Tok::Colon, "`:` before the weight term")?;
            self.term()?
        };
        self.expect(Tok::RBrace, "`}`")?;
        Ok(Term::Agg(Box::new(Aggregate {
            func,
            vars,
            cond,
            weight,
        })))
    }
}
