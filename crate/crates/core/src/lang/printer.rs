//! Concrete-syntax printing. Output re-parses to an equal tree.

use std::fmt::{self, Display, Formatter, Write};

use super::ast::*;
use super::KnowledgeBase;
use crate::structure::ThreeValuedStructure;

fn vars(f: &mut Formatter<'_>, vs: &[VarDecl]) -> fmt::Result {
    for (i, v) in vs.iter().enumerate() {
        if i > 0 {
            f.write_char(' ')?;
        }
        f.write_str(&v.name)?;
        if let Some(s) = &v.sort {
            write!(f, "[{s}]")?;
        }
    }
    Ok(())
}

fn cmp_str(op: CmpOp) -> &'static str {
    match op {
        CmpOp::Eq => "=",
        CmpOp::Ne => "~=",
        CmpOp::Lt => "<",
        CmpOp::Le => "=<",
        CmpOp::Gt => ">",
        CmpOp::Ge => ">=",
    }
}

impl Display for Term {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        match self {
            Term::Ident { name, .. } | Term::Var(name) => f.write_str(name),
            Term::Const(e) => write!(f, "{e}"),
            Term::Neg(t) => write!(f, "-({t})"),
            Term::Abs(t) => write!(f, "abs({t})"),
            Term::Arith(op, a, b) => {
                let op = match op {
                    ArithOp::Add => "+",
                    ArithOp::Sub => "-",
                    ArithOp::Mul => "*",
                    ArithOp::Div => "/",
                    ArithOp::Mod => "%",
                };
                write!(f, "({a} {op} {b})")
            }
            Term::Agg(a) => write!(f, "{a}"),
        }
    }
}

impl Display for Aggregate {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let name = match self.func {
            AggFn::Card => "#",
            AggFn::Sum => "sum",
            AggFn::Min => "min",
            AggFn::Max => "max",
            AggFn::Prod => "prod",
        };
        write!(f, "{name}{{")?;
        vars(f, &self.vars)?;
        write!(f, " : {}", self.cond)?;
        if self.func != AggFn::Card {
            write!(f, " : {}", self.weight)?;
        }
        f.write_char('}')
    }
}

impl Display for Atom {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pred)?;
        if !self.args.is_empty() {
            f.write_char('(')?;
            for (i, a) in self.args.iter().enumerate() {
                if i > 0 {
                    f.write_char(',')?;
                }
                write!(f, "{a}")?;
            }
            f.write_char(')')?;
        }
        Ok(())
    }
}

impl Display for Formula {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        let join = |f: &mut Formatter<'_>, parts: &[Formula], op: &str, empty: &str| {
            match parts {
                [] => f.write_str(empty),
                [one] => write!(f, "{one}"),
                _ => {
                    f.write_char('(')?;
                    for (i, p) in parts.iter().enumerate() {
                        if i > 0 {
                            write!(f, " {op} ")?;
                        }
                        write!(f, "{p}")?;
                    }
                    f.write_char(')')
                }
            }
        };
        match self {
            Formula::True => f.write_str("true"),
            Formula::False => f.write_str("false"),
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::Cmp(op, a, b) => write!(f, "({a} {} {b})", cmp_str(*op)),
            Formula::Not(g) => write!(f, "~{g}"),
            Formula::And(v) => join(f, v, "&", "true"),
            Formula::Or(v) => join(f, v, "|", "false"),
            Formula::Implies(a, b) => write!(f, "({a} => {b})"),
            Formula::Equiv(a, b) => write!(f, "({a} <=> {b})"),
            Formula::Quant(k, vs, body) => {
                f.write_str(match k {
                    QuantKind::Forall => "(! ",
                    QuantKind::Exists => "(? ",
                })?;
                vars(f, vs)?;
                write!(f, " : {body})")
            }
            Formula::Count(op, k, vs, body) => {
                write!(f, "(?{}{k} ", cmp_str(*op))?;
                vars(f, vs)?;
                write!(f, " : {body})")
            }
        }
    }
}

impl Display for Rule {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        if !self.vars.is_empty() {
            f.write_str("! ")?;
            vars(f, &self.vars)?;
            f.write_str(" : ")?;
        }
        write!(f, "{}", self.head)?;
        if self.body != Formula::True {
            write!(f, " <- {}", self.body)?;
        }
        f.write_char('.')
    }
}

impl Display for Vocabulary {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        writeln!(f, "vocabulary {} {{", self.name)?;
        for s in &self.sorts {
            write!(f, "    type {} = {{", s.name)?;
            match &s.domain {
                Domain::Symbols(syms) => f.write_str(&syms.join(", "))?,
                Domain::Ints(is) => {
                    let contiguous = is.windows(2).all(|w| w[1] == w[0] + 1);
                    if contiguous && is.len() > 1 {
                        write!(f, "{}..{}", is[0], is[is.len() - 1])?;
                    } else {
                        let parts: Vec<String> = is.iter().map(i64::to_string).collect();
                        f.write_str(&parts.join(", "))?;
                    }
                }
            }
            writeln!(f, "}}")?;
        }
        for p in &self.predicates {
            f.write_str("    ")?;
            if p.kind == PredicateKind::Data {
                f.write_str("data ")?;
            }
            write!(f, "pred {}", p.name)?;
            if !p.args.is_empty() {
                write!(f, "({})", p.args.join(", "))?;
            }
            writeln!(f)?;
        }
        f.write_char('}')
    }
}

impl Display for Theory {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        writeln!(f, "theory {} : {} {{", self.name, self.vocabulary)?;
        for s in &self.sentences {
            writeln!(f, "    {}.", s.formula)?;
        }
        for d in &self.definitions {
            writeln!(f, "    {{")?;
            for r in &d.rules {
                writeln!(f, "        {r}")?;
            }
            writeln!(f, "    }}")?;
        }
        f.write_char('}')
    }
}

fn tuple_str(t: &[Element]) -> String {
    let parts: Vec<String> = t.iter().map(Element::to_string).collect();
    format!("({})", parts.join(","))
}

impl Display for ThreeValuedStructure {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        writeln!(f, "structure {} : {} {{", self.name, self.vocabulary)?;
        let mut preds: Vec<(String, bool, Vec<String>)> = Vec::new();
        for (atom, v) in self.known() {
            let t = tuple_str(&atom.args);
            match preds.iter_mut().find(|(p, pv, _)| *p == atom.pred && *pv == v) {
                Some(entry) => entry.2.push(t),
                None => preds.push((atom.pred, v, vec![t])),
            }
        }
        for (p, v, tuples) in preds {
            let sel = if v { "" } else { ".cf" };
            if tuples.len() == 1 && tuples[0] == "()" {
                writeln!(f, "    {p}{sel} = true")?;
            } else {
                writeln!(f, "    {p}{sel} = {{{}}}", tuples.join("; "))?;
            }
        }
        f.write_char('}')
    }
}

impl Display for KnowledgeBase {
    fn fmt(&self, f: &mut Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.vocabulary)?;
        writeln!(f, "{}", self.theory)?;
        write!(f, "{}", self.structure)
    }
}
