//! Clausification of instantiated formulas and rule bodies.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::structure::DomainAtom;

use super::ecnf::{CardCmp, CardConstraint, Ecnf, EcnfRule, Lit, RuleGroup, RuleKind, Var};
use super::instantiate::{AggOp, GAgg, GFormula};

/// Ground material for one definition that stays in the clausal form.
pub struct GroupInput {
    pub definition: usize,
    /// Distinct heads, each with its non-false bodies.
    pub heads: BTreeMap<DomainAtom, Vec<GFormula>>,
}

pub struct EncodeInput {
    pub sentences: Vec<(usize, GFormula)>,
    pub groups: Vec<GroupInput>,
    /// Known values of atoms that may not be folded.
    pub pins: Vec<(DomainAtom, bool)>,
    pub inconsistent: bool,
}

struct Encoder {
    e: Ecnf,
    /// Tseitin per subformula, with the directions already emitted.
    memo: HashMap<GFormula, (Var, bool, bool)>,
}

pub fn encode(input: EncodeInput) -> Ecnf {
    let mut atoms = BTreeSet::new();
    for (_, f) in &input.sentences {
        f.atoms(&mut atoms);
    }
    for g in &input.groups {
        for (h, bodies) in &g.heads {
            atoms.insert(h.clone());
            bodies.iter().for_each(|b| b.atoms(&mut atoms));
        }
    }
    let mut enc = Encoder {
        e: Ecnf::new(),
        memo: HashMap::new(),
    };
    for a in atoms {
        enc.e.add_atom(a);
    }

    if input.inconsistent {
        enc.e.clauses.push(Vec::new());
    }
    for (a, v) in &input.pins {
        if let Some(var) = enc.e.atom_var(a) {
            enc.e.clauses.push(vec![Lit::new(var, *v)]);
        }
    }
    for (i, f) in &input.sentences {
        enc.sentence(f, &format!("sentence {i}"));
    }
    for g in &input.groups {
        enc.group(g);
    }
    enc.e
}

/// Literals equivalent to `conds` inside an existing ECNF. Missing atoms
/// and new symbols are appended.
pub fn encode_conditions(e: &mut Ecnf, conds: &[GFormula], src: &str) -> Vec<Lit> {
    let mut enc = Encoder {
        e: std::mem::take(e),
        memo: HashMap::new(),
    };
    let mut atoms = BTreeSet::new();
    conds.iter().for_each(|c| c.atoms(&mut atoms));
    for a in atoms {
        enc.e.add_atom(a);
    }
    let lits = conds.iter().map(|c| enc.lit(c, true, true, src)).collect();
    *e = enc.e;
    lits
}

impl Encoder {
    fn sentence(&mut self, f: &GFormula, src: &str) {
        match f {
            GFormula::Const(true) => {}
            GFormula::Const(false) => self.e.clauses.push(Vec::new()),
            GFormula::Lit(..) => {
                let l = self.lit(f, true, false, src);
                self.e.clauses.push(vec![l]);
            }
            GFormula::And(parts) => parts.iter().for_each(|p| self.sentence(p, src)),
            GFormula::Or(parts) => {
                let clause = parts.iter().map(|p| self.lit(p, true, false, src)).collect();
                self.e.clauses.push(clause);
            }
            GFormula::Agg(a) => {
                let (lits, weights) = self.terms(a, src);
                let cmp = match a.op {
                    AggOp::Ge => CardCmp::Ge,
                    AggOp::Le => CardCmp::Le,
                    AggOp::Eq => CardCmp::Eq,
                };
                self.e.cards.push(CardConstraint {
                    lits,
                    weights,
                    bound: a.bound,
                    cmp,
                });
            }
        }
    }

    fn terms(&mut self, a: &GAgg, src: &str) -> (Vec<Lit>, Vec<i64>) {
        a.elems
            .iter()
            .map(|(g, w)| (self.lit(g, true, true, src), *w))
            .unzip()
    }

    /// A literal for `f`. `pos` asks for `lit -> f`, `neg` for `f -> lit`.
    fn lit(&mut self, f: &GFormula, pos: bool, neg: bool, src: &str) -> Lit {
        if let GFormula::Lit(a, p) = f {
            let v = self.e.atom_var(a).expect("atoms are numbered up front");
            return Lit::new(v, *p);
        }
        let (var, has_pos, has_neg) = match self.memo.get(f) {
            Some(&entry) => entry,
            None => {
                let kind = match f {
                    GFormula::Const(_) => "const",
                    GFormula::And(_) => "and",
                    GFormula::Or(_) => "or",
                    GFormula::Agg(_) => "agg",
                    GFormula::Lit(..) => unreachable!(),
                };
                let v = self.e.add_tseitin(format!("{kind} {src}"));
                (v, false, false)
            }
        };
        let want_pos = pos && !has_pos;
        let want_neg = neg && !has_neg;
        self.memo
            .insert(f.clone(), (var, has_pos || pos, has_neg || neg));
        let t = Lit::pos(var);
        match f {
            GFormula::Const(b) => {
                if want_pos || want_neg {
                    self.e.clauses.push(vec![Lit::new(var, *b)]);
                }
            }
            GFormula::And(parts) => {
                if want_pos {
                    for p in parts {
                        let c = self.lit(p, true, false, src);
                        self.e.clauses.push(vec![!t, c]);
                    }
                }
                if want_neg {
                    let mut clause = vec![t];
                    for p in parts {
                        clause.push(!self.lit(p, false, true, src));
                    }
                    self.e.clauses.push(clause);
                }
            }
            GFormula::Or(parts) => {
                if want_pos {
                    let mut clause = vec![!t];
                    for p in parts {
                        clause.push(self.lit(p, true, false, src));
                    }
                    self.e.clauses.push(clause);
                }
                if want_neg {
                    for p in parts {
                        let c = self.lit(p, false, true, src);
                        self.e.clauses.push(vec![t, !c]);
                    }
                }
            }
            GFormula::Agg(a) => {
                let (lits, weights) = self.terms(a, src);
                let terms: Vec<(Lit, i64)> = lits.into_iter().zip(weights).collect();
                let k = a.bound as i128;
                let neg_terms: Vec<(Lit, i64)> = terms.iter().map(|&(l, w)| (l, -w)).collect();
                if want_pos {
                    match a.op {
                        AggOp::Ge => self.at_least(t, &terms, k),
                        AggOp::Le => self.at_least(t, &neg_terms, -k),
                        AggOp::Eq => {
                            self.at_least(t, &terms, k);
                            self.at_least(t, &neg_terms, -k);
                        }
                    }
                }
                if want_neg {
                    match a.op {
                        AggOp::Ge => self.at_least(!t, &neg_terms, -(k - 1)),
                        AggOp::Le => self.at_least(!t, &terms, k + 1),
                        AggOp::Eq => {
                            let below = Lit::pos(self.e.add_tseitin(format!("agg-below {src}")));
                            let above = Lit::pos(self.e.add_tseitin(format!("agg-above {src}")));
                            self.e.clauses.push(vec![t, below, above]);
                            self.at_least(below, &neg_terms, -(k - 1));
                            self.at_least(above, &terms, k + 1);
                        }
                    }
                }
            }
            GFormula::Lit(..) => unreachable!(),
        }
        t
    }

    /// `guard -> Σ w·l >= k` as one positive-weight constraint.
    fn at_least(&mut self, guard: Lit, terms: &[(Lit, i64)], k: i128) {
        let mut k = k;
        let mut lits = Vec::with_capacity(terms.len() + 1);
        let mut weights = Vec::with_capacity(terms.len() + 1);
        for &(l, w) in terms {
            if w < 0 {
                k += -(w as i128);
                lits.push(!l);
                weights.push(-w);
            } else {
                lits.push(l);
                weights.push(w);
            }
        }
        if k <= 0 {
            return;
        }
        let total: i128 = weights.iter().map(|w| *w as i128).sum();
        if k > total {
            self.e.clauses.push(vec![!guard]);
            return;
        }
        let k = k as i64;
        lits.push(!guard);
        weights.push(k);
        self.e.cards.push(CardConstraint {
            lits,
            weights,
            bound: k,
            cmp: CardCmp::Ge,
        });
    }

    fn group(&mut self, g: &GroupInput) {
        let src = format!("definition {}", g.definition);
        let mut rules = Vec::new();
        for (head, bodies) in &g.heads {
            let h = self.e.atom_var(head).expect("heads are numbered");
            let rule = if bodies.iter().any(|b| *b == GFormula::Const(true)) {
                EcnfRule {
                    head: h,
                    kind: RuleKind::Conj,
                    body: Vec::new(),
                }
            } else {
                match bodies.as_slice() {
                    [GFormula::And(parts)] => EcnfRule {
                        head: h,
                        kind: RuleKind::Conj,
                        body: parts.iter().map(|p| self.body_lit(p, &mut rules, &src)).collect(),
                    },
                    [GFormula::Or(parts)] => EcnfRule {
                        head: h,
                        kind: RuleKind::Disj,
                        body: parts.iter().map(|p| self.body_lit(p, &mut rules, &src)).collect(),
                    },
                    _ => EcnfRule {
                        head: h,
                        kind: RuleKind::Disj,
                        body: bodies.iter().map(|p| self.body_lit(p, &mut rules, &src)).collect(),
                    },
                }
            };
            rules.push(rule);
        }
        self.e.groups.push(RuleGroup {
            definition: g.definition,
            rules,
        });
    }

    /// Conjunctions and disjunctions inside bodies become auxiliary defined
    /// atoms of the same group; aggregates become clause-defined symbols.
    fn body_lit(&mut self, f: &GFormula, rules: &mut Vec<EcnfRule>, src: &str) -> Lit {
        match f {
            GFormula::Lit(..) | GFormula::Agg(_) => self.lit(f, true, true, src),
            GFormula::And(parts) | GFormula::Or(parts) => {
                let kind = if matches!(f, GFormula::And(_)) {
                    RuleKind::Conj
                } else {
                    RuleKind::Disj
                };
                let name = match kind {
                    RuleKind::Conj => "aux-and",
                    RuleKind::Disj => "aux-or",
                };
                let head = self.e.add_tseitin(format!("{name} {src}"));
                let body = parts.iter().map(|p| self.body_lit(p, rules, src)).collect();
                rules.push(EcnfRule { head, kind, body });
                Lit::pos(head)
            }
            GFormula::Const(b) => {
                let head = self.e.add_tseitin(format!("aux-const {src}"));
                rules.push(EcnfRule {
                    head,
                    kind: if *b { RuleKind::Conj } else { RuleKind::Disj },
                    body: Vec::new(),
                });
                Lit::pos(head)
            }
        }
    }
}
