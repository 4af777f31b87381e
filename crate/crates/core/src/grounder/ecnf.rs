//! Extended CNF: clauses, ground rule groups and cardinality/weighted-sum
//! constraints over propositional variables, with a provenance table.

use std::collections::BTreeMap;
use std::fmt::{self, Write};

use thiserror::Error;

use crate::fixpoint::GroundRuleSet;
use crate::structure::DomainAtom;

/// Propositional variable, numbered from 1.
pub type Var = u32;

/// A literal in DIMACS convention: `v` or `-v`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit(i32);

impl Lit {
    pub fn new(var: Var, positive: bool) -> Lit {
        assert!(var > 0);
        Lit(if positive { var as i32 } else { -(var as i32) })
    }

    pub fn pos(var: Var) -> Lit {
        Lit::new(var, true)
    }

    pub fn neg(var: Var) -> Lit {
        Lit::new(var, false)
    }

    pub fn from_dimacs(d: i32) -> Option<Lit> {
        (d != 0).then_some(Lit(d))
    }

    pub fn dimacs(self) -> i32 {
        self.0
    }

    pub fn var(self) -> Var {
        self.0.unsigned_abs()
    }

    pub fn is_pos(self) -> bool {
        self.0 > 0
    }

    /// Truth under an assignment of its variable.
    pub fn holds(self, value: bool) -> bool {
        value == self.is_pos()
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;

    fn not(self) -> Lit {
        Lit(-self.0)
    }
}

impl fmt::Display for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RuleKind {
    Disj,
    Conj,
}

/// `head <- l1 | ... | ln` or `head <- l1 & ... & ln`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EcnfRule {
    pub head: Var,
    pub kind: RuleKind,
    pub body: Vec<Lit>,
}

/// The rules coming from one definition.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RuleGroup {
    pub definition: usize,
    pub rules: Vec<EcnfRule>,
}

impl RuleGroup {
    /// The group as a rule set over variables; every body variable that is
    /// not a head is open.
    pub fn rule_set(&self) -> GroundRuleSet<Var> {
        let heads: Vec<Var> = self.rules.iter().map(|r| r.head).collect();
        let opens: Vec<Var> = self
            .rules
            .iter()
            .flat_map(|r| r.body.iter().map(|l| l.var()))
            .filter(|v| !heads.contains(v))
            .collect();
        let mut rs = GroundRuleSet::new(heads, opens);
        for r in &self.rules {
            let lits = |ls: &[Lit]| ls.iter().map(|l| (l.var(), l.is_pos())).collect();
            let res = match r.kind {
                RuleKind::Conj => rs.add_rule(r.head, lits(&r.body)),
                RuleKind::Disj => r
                    .body
                    .iter()
                    .try_for_each(|l| rs.add_rule(r.head, lits(std::slice::from_ref(l)))),
            };
            res.expect("rule atoms are declared");
        }
        rs
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CardCmp {
    Ge,
    Le,
    Eq,
}

impl CardCmp {
    pub fn symbol(self) -> &'static str {
        match self {
            CardCmp::Ge => ">=",
            CardCmp::Le => "=<",
            CardCmp::Eq => "=",
        }
    }

    pub fn holds(self, sum: i64, bound: i64) -> bool {
        match self {
            CardCmp::Ge => sum >= bound,
            CardCmp::Le => sum <= bound,
            CardCmp::Eq => sum == bound,
        }
    }
}

/// `Σ weights[i]·lits[i] cmp bound`. Weights are non-zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CardConstraint {
    pub lits: Vec<Lit>,
    pub weights: Vec<i64>,
    pub bound: i64,
    pub cmp: CardCmp,
}

impl CardConstraint {
    pub fn sum(&self, value: &dyn Fn(Var) -> bool) -> i64 {
        self.lits
            .iter()
            .zip(&self.weights)
            .filter(|(l, _)| l.holds(value(l.var())))
            .map(|(_, w)| *w)
            .sum()
    }

    pub fn holds(&self, value: &dyn Fn(Var) -> bool) -> bool {
        self.cmp.holds(self.sum(value), self.bound)
    }
}

/// What a variable stands for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Provenance {
    Atom(DomainAtom),
    /// Introduced symbol; the text names the construct it abbreviates.
    Tseitin(String),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Ecnf {
    provenance: Vec<Provenance>,
    atoms: BTreeMap<DomainAtom, Var>,
    pub clauses: Vec<Vec<Lit>>,
    pub groups: Vec<RuleGroup>,
    pub cards: Vec<CardConstraint>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct EcnfSize {
    pub vars: usize,
    pub clauses: usize,
    pub rules: usize,
    pub cards: usize,
}

impl fmt::Display for EcnfSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "vars={} clauses={} rules={} cards={}",
            self.vars, self.clauses, self.rules, self.cards
        )
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EcnfError {
    #[error("assignment misses variable {0}")]
    Missing(Var),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Ecnf {
    pub fn new() -> Self {
        Ecnf::default()
    }

    pub fn num_vars(&self) -> usize {
        self.provenance.len()
    }

    pub fn add_atom(&mut self, atom: DomainAtom) -> Var {
        if let Some(&v) = self.atoms.get(&atom) {
            return v;
        }
        self.provenance.push(Provenance::Atom(atom.clone()));
        let v = self.provenance.len() as Var;
        self.atoms.insert(atom, v);
        v
    }

    pub fn add_tseitin(&mut self, what: impl Into<String>) -> Var {
        self.provenance.push(Provenance::Tseitin(what.into()));
        self.provenance.len() as Var
    }

    pub fn atom_var(&self, atom: &DomainAtom) -> Option<Var> {
        self.atoms.get(atom).copied()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&DomainAtom, Var)> {
        self.atoms.iter().map(|(a, v)| (a, *v))
    }

    pub fn provenance(&self, v: Var) -> Option<&Provenance> {
        self.provenance.get((v as usize).checked_sub(1)?)
    }

    pub fn tseitin_count(&self) -> usize {
        self.provenance.len() - self.atoms.len()
    }

    pub fn has_empty_clause(&self) -> bool {
        self.clauses.iter().any(Vec::is_empty)
    }

    pub fn rule_count(&self) -> usize {
        self.groups.iter().map(|g| g.rules.len()).sum()
    }

    pub fn size(&self) -> EcnfSize {
        EcnfSize {
            vars: self.num_vars(),
            clauses: self.clauses.len(),
            rules: self.rule_count(),
            cards: self.cards.len(),
        }
    }

    /// Whether a total assignment (`value[v]` for `v` in `1..=num_vars`,
    /// index 0 unused) satisfies every clause, constraint and rule group.
    pub fn check(&self, value: &[bool]) -> Result<bool, EcnfError> {
        if value.len() <= self.num_vars() {
            return Err(EcnfError::Missing(value.len().max(1) as Var));
        }
        let val = |v: Var| value[v as usize];
        if !self
            .clauses
            .iter()
            .all(|c| c.iter().any(|l| l.holds(val(l.var()))))
        {
            return Ok(false);
        }
        if !self.cards.iter().all(|c| c.holds(&val)) {
            return Ok(false);
        }
        for g in &self.groups {
            let ok = g
                .rule_set()
                .check_defined(&|v| Some(val(*v)))
                .unwrap_or(false);
            if !ok {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// True atoms of an assignment.
    pub fn project(&self, value: &[bool]) -> Vec<DomainAtom> {
        self.atoms
            .iter()
            .filter(|(_, v)| value.get(**v as usize).copied().unwrap_or(false))
            .map(|(a, _)| a.clone())
            .collect()
    }

    /// The textual dump format.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let s = self.size();
        let _ = writeln!(out, "p ecnf {} {} {} {}", s.vars, s.clauses, s.rules, s.cards);
        for (i, p) in self.provenance.iter().enumerate() {
            match p {
                Provenance::Atom(a) => {
                    let _ = writeln!(out, "c# atom {} {a}", i + 1);
                }
                Provenance::Tseitin(t) => {
                    let _ = writeln!(out, "c# tseitin {} {t}", i + 1);
                }
            }
        }
        for c in &self.clauses {
            for l in c {
                let _ = write!(out, "{l} ");
            }
            out.push_str("0\n");
        }
        for g in &self.groups {
            let _ = writeln!(out, "c# definition {}", g.definition);
            for r in &g.rules {
                let kind = match r.kind {
                    RuleKind::Disj => "disj",
                    RuleKind::Conj => "conj",
                };
                let _ = write!(out, "r {} {kind}", r.head);
                for l in &r.body {
                    let _ = write!(out, " {l}");
                }
                out.push_str(" 0\n");
            }
        }
        for c in &self.cards {
            let _ = write!(out, "c {} {}", c.bound, c.cmp.symbol());
            for (l, w) in c.lits.iter().zip(&c.weights) {
                if *w == 1 {
                    let _ = write!(out, " {l}");
                } else {
                    let _ = write!(out, " {w}*{l}");
                }
            }
            out.push_str(" 0\n");
        }
        out
    }

    /// Reads the dump format back.
    pub fn parse_dump(text: &str) -> Result<Ecnf, EcnfError> {
        let mut e = Ecnf::new();
        let mut group: Option<RuleGroup> = None;
        let mut declared_vars = None;
        for (n, line) in text.lines().enumerate() {
            let line_no = n + 1;
            let err = |m: &str| EcnfError::Parse {
                line: line_no,
                message: m.to_owned(),
            };
            let parts: Vec<&str> = line.split_whitespace().collect();
            let lit = |s: &str| -> Result<Lit, EcnfError> {
                s.parse::<i32>()
                    .ok()
                    .and_then(Lit::from_dimacs)
                    .ok_or_else(|| err("bad literal"))
            };
            let terminated = |ps: &[&str]| ps.last() == Some(&"0");
            match parts.as_slice() {
                [] => {}
                ["p", "ecnf", v, ..] => {
                    declared_vars = Some(v.parse::<usize>().map_err(|_| err("bad header"))?);
                }
                ["c#", "atom", v, atom] => {
                    let v: usize = v.parse().map_err(|_| err("bad variable"))?;
                    let atom: DomainAtom = atom.parse().map_err(|_| err("bad atom"))?;
                    if v != e.provenance.len() + 1 {
                        return Err(err("variables must be listed in order"));
                    }
                    e.add_atom(atom);
                }
                ["c#", "tseitin", v, rest @ ..] => {
                    let v: usize = v.parse().map_err(|_| err("bad variable"))?;
                    if v != e.provenance.len() + 1 {
                        return Err(err("variables must be listed in order"));
                    }
                    e.add_tseitin(rest.join(" "));
                }
                ["c#", "definition", d] => {
                    if let Some(g) = group.take() {
                        e.groups.push(g);
                    }
                    group = Some(RuleGroup {
                        definition: d.parse().map_err(|_| err("bad definition index"))?,
                        rules: Vec::new(),
                    });
                }
                ["c#", ..] => {}
                ["r", head, kind, rest @ ..] => {
                    if !terminated(rest) {
                        return Err(err("rule not terminated by 0"));
                    }
                    let kind = match *kind {
                        "disj" => RuleKind::Disj,
                        "conj" => RuleKind::Conj,
                        _ => return Err(err("rule kind must be disj or conj")),
                    };
                    let body = rest[..rest.len() - 1]
                        .iter()
                        .map(|s| lit(s))
                        .collect::<Result<_, _>>()?;
                    let head = head.parse().map_err(|_| err("bad head"))?;
                    group
                        .as_mut()
                        .ok_or_else(|| err("rule outside a definition"))?
                        .rules
                        .push(EcnfRule { head, kind, body });
                }
                ["c", bound, cmp, rest @ ..] if bound.parse::<i64>().is_ok() => {
                    if !terminated(rest) {
                        return Err(err("constraint not terminated by 0"));
                    }
                    let cmp = match *cmp {
                        ">=" => CardCmp::Ge,
                        "=<" => CardCmp::Le,
                        "=" => CardCmp::Eq,
                        _ => return Err(err("bad comparison")),
                    };
                    let mut c = CardConstraint {
                        lits: Vec::new(),
                        weights: Vec::new(),
                        bound: bound.parse().unwrap(),
                        cmp,
                    };
                    for t in &rest[..rest.len() - 1] {
                        let (w, l) = match t.split_once('*') {
                            Some((w, l)) => (w.parse().map_err(|_| err("bad weight"))?, l),
                            None => (1, *t),
                        };
                        c.weights.push(w);
                        c.lits.push(lit(l)?);
                    }
                    e.cards.push(c);
                }
                ["c", ..] => {}
                ps => {
                    if !terminated(ps) {
                        return Err(err("clause not terminated by 0"));
                    }
                    let clause = ps[..ps.len() - 1]
                        .iter()
                        .map(|s| lit(s))
                        .collect::<Result<_, _>>()?;
                    e.clauses.push(clause);
                }
            }
        }
        if let Some(g) = group {
            e.groups.push(g);
        }
        if let Some(n) = declared_vars {
            while e.provenance.len() < n {
                e.add_tseitin("");
            }
        }
        Ok(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn check_examples() {
        let mut e = Ecnf::new();
        let p = e.add_atom("p".parse().unwrap());
        let q = e.add_atom("q".parse().unwrap());
        e.clauses.push(vec![Lit::pos(p), Lit::pos(q)]);
        assert!(e.check(&[false, true, false]).unwrap());
        assert!(e.check(&[false, true]).is_err());

        let mut l = Ecnf::new();
        let p = l.add_atom("p".parse().unwrap());
        l.groups.push(RuleGroup {
            definition: 0,
            rules: vec![EcnfRule {
                head: p,
                kind: RuleKind::Conj,
                body: vec![Lit::pos(p)],
            }],
        });
        assert!(!l.check(&[false, true]).unwrap());
        assert!(l.check(&[false, false]).unwrap());

        let mut c = Ecnf::new();
        let a = c.add_atom("p(a)".parse().unwrap());
        let b = c.add_atom("p(b)".parse().unwrap());
        c.cards.push(CardConstraint {
            lits: vec![Lit::pos(a), Lit::pos(b)],
            weights: vec![1, 1],
            bound: 2,
            cmp: CardCmp::Ge,
        });
        assert!(!c.check(&[false, true, false]).unwrap());
        assert!(c.check(&[false, true, true]).unwrap());
    }

    #[test]
    fn dump_round_trip() {
        let mut e = Ecnf::new();
        let p = e.add_atom("p(a,b)".parse().unwrap());
        let q = e.add_atom("q".parse().unwrap());
        let t = e.add_tseitin("or sentence 0");
        e.clauses.push(vec![Lit::pos(p), Lit::neg(t)]);
        e.clauses.push(vec![]);
        e.groups.push(RuleGroup {
            definition: 1,
            rules: vec![EcnfRule {
                head: q,
                kind: RuleKind::Disj,
                body: vec![Lit::neg(p), Lit::pos(t)],
            }],
        });
        e.cards.push(CardConstraint {
            lits: vec![Lit::pos(p), Lit::neg(q)],
            weights: vec![1, -3],
            bound: -1,
            cmp: CardCmp::Le,
        });
        let text = e.dump();
        assert!(text.starts_with("p ecnf 3 2 1 1\n"));
        assert!(text.contains("c# atom 1 p(a,b)\n"));
        assert!(text.contains("c -1 =< 1 -3*-2 0\n"));
        assert_eq!(Ecnf::parse_dump(&text).unwrap(), e);
    }
}
