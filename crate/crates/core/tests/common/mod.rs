//! Generators and brute-force oracles shared by the integration tests.
//!
//! Nothing here calls the grounder, the solver or the fixpoint module: the
//! oracles enumerate assignments and evaluate formulas on their own.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::process::Command;

use kbrevise::grounder::{CardCmp, Ecnf, Lit, RuleKind};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ------------------------------------------------------------ FO instances

#[derive(Clone, Debug)]
pub enum Arg {
    Var(usize),
    El(usize),
}

#[derive(Clone, Copy, Debug)]
pub enum Cmp {
    Ge,
    Le,
    Eq,
}

impl Cmp {
    fn holds(self, a: i64, b: i64) -> bool {
        match self {
            Cmp::Ge => a >= b,
            Cmp::Le => a <= b,
            Cmp::Eq => a == b,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Cmp::Ge => ">=",
            Cmp::Le => "=<",
            Cmp::Eq => "=",
        }
    }
}

#[derive(Clone, Debug)]
pub enum F {
    Atom(&'static str, Vec<Arg>, bool),
    And(Vec<F>),
    Or(Vec<F>),
    Implies(Box<F>, Box<F>),
    Equiv(Box<F>, Box<F>),
    All(usize, Box<F>),
    Ex(usize, Box<F>),
    /// `#{x : body} cmp k`
    Card(usize, Box<F>, Cmp, i64),
}

/// `! vars : d(head) <- body.`
#[derive(Clone, Debug)]
pub struct DRule {
    pub vars: Vec<usize>,
    pub head: Arg,
    pub body: F,
}

/// A small theory over one sort `T`, unary search predicates, two
/// propositions `u` and `v`, a data predicate `e(T,T)` and a predicate `d(T)`
/// defined by positive recursion.
#[derive(Clone, Debug)]
pub struct Instance {
    pub elems: Vec<&'static str>,
    pub unary: Vec<&'static str>,
    pub edges: BTreeSet<(usize, usize)>,
    pub sentences: Vec<F>,
    pub rules: Vec<DRule>,
    /// Partial interpretation of search atoms.
    pub structure: BTreeMap<String, bool>,
}

pub type Assignment = BTreeMap<String, bool>;

const ELEMS: [&str; 3] = ["a", "b", "c"];

impl Instance {
    pub fn open_atoms(&self) -> Vec<String> {
        let mut out = Vec::new();
        for p in &self.unary {
            for e in &self.elems {
                out.push(format!("{p}({e})"));
            }
        }
        out.push("u".into());
        out.push("v".into());
        out
    }

    pub fn defined_atoms(&self) -> Vec<String> {
        self.elems.iter().map(|e| format!("d({e})")).collect()
    }

    pub fn search_atoms(&self) -> Vec<String> {
        let mut v = self.open_atoms();
        v.extend(self.defined_atoms());
        v
    }

    pub fn data_atoms(&self) -> Vec<String> {
        self.edges
            .iter()
            .map(|&(x, y)| format!("e({},{})", self.elems[x], self.elems[y]))
            .collect()
    }

    fn atom_name(&self, pred: &str, args: &[Arg], env: &[usize]) -> String {
        if args.is_empty() {
            return pred.to_string();
        }
        let els: Vec<&str> = args
            .iter()
            .map(|a| match a {
                Arg::Var(i) => self.elems[env[*i]],
                Arg::El(i) => self.elems[*i],
            })
            .collect();
        format!("{pred}({})", els.join(","))
    }

    fn eval(&self, f: &F, env: &mut Vec<usize>, val: &dyn Fn(&str) -> bool) -> bool {
        match f {
            F::Atom(p, args, pos) => {
                let v = if *p == "e" {
                    let el = |a: &Arg| match a {
                        Arg::Var(i) => env[*i],
                        Arg::El(i) => *i,
                    };
                    self.edges.contains(&(el(&args[0]), el(&args[1])))
                } else {
                    val(&self.atom_name(p, args, env))
                };
                v == *pos
            }
            F::And(fs) => fs.iter().all(|g| self.eval(g, env, val)),
            F::Or(fs) => fs.iter().any(|g| self.eval(g, env, val)),
            F::Implies(a, b) => !self.eval(a, env, val) || self.eval(b, env, val),
            F::Equiv(a, b) => self.eval(a, env, val) == self.eval(b, env, val),
            F::All(x, g) | F::Ex(x, g) => {
                let all = matches!(f, F::All(..));
                for i in 0..self.elems.len() {
                    env[*x] = i;
                    let r = self.eval(g, env, val);
                    if all && !r {
                        return false;
                    }
                    if !all && r {
                        return true;
                    }
                }
                all
            }
            F::Card(x, g, cmp, k) => {
                let mut n = 0;
                for i in 0..self.elems.len() {
                    env[*x] = i;
                    if self.eval(g, env, val) {
                        n += 1;
                    }
                }
                cmp.holds(n, *k)
            }
        }
    }

    /// Least fixpoint of the definition by naive iteration.
    pub fn lfp(&self, open: &Assignment) -> BTreeSet<String> {
        let mut derived: BTreeSet<String> = BTreeSet::new();
        loop {
            let mut next = derived.clone();
            for r in &self.rules {
                let n = self.elems.len();
                let combos = n.pow(r.vars.len() as u32);
                for c in 0..combos {
                    let mut env = vec![0; 8];
                    let mut rest = c;
                    for &v in &r.vars {
                        env[v] = rest % n;
                        rest /= n;
                    }
                    let val = |a: &str| {
                        if a.starts_with("d(") {
                            derived.contains(a)
                        } else {
                            open[a]
                        }
                    };
                    if self.eval(&r.body, &mut env, &val) {
                        next.insert(self.atom_name("d", std::slice::from_ref(&r.head), &env));
                    }
                }
            }
            if next == derived {
                return derived;
            }
            derived = next;
        }
    }

    pub fn sentences_hold(&self, m: &Assignment) -> bool {
        let val = |a: &str| m[a];
        self.sentences
            .iter()
            .all(|s| self.eval(s, &mut vec![0; 8], &val))
    }

    /// Whether a total assignment of the search atoms is a model.
    pub fn is_model(&self, m: &Assignment) -> bool {
        let lfp = self.lfp(m);
        self.defined_atoms()
            .iter()
            .all(|d| m[d] == lfp.contains(d))
            && self.sentences_hold(m)
    }

    /// Every model, by enumerating the open atoms and computing `d`.
    pub fn models(&self) -> Vec<Assignment> {
        let open = self.open_atoms();
        let mut out = Vec::new();
        for mask in 0u32..(1 << open.len()) {
            let mut m: Assignment = open
                .iter()
                .enumerate()
                .map(|(i, a)| (a.clone(), mask >> i & 1 == 1))
                .collect();
            let lfp = self.lfp(&m);
            for d in self.defined_atoms() {
                let v = lfp.contains(&d);
                m.insert(d, v);
            }
            if self.sentences_hold(&m) {
                out.push(m);
            }
        }
        out
    }

    pub fn models_extending(&self, partial: &Assignment) -> Vec<Assignment> {
        self.models()
            .into_iter()
            .filter(|m| partial.iter().all(|(a, v)| m[a] == *v))
            .collect()
    }

    fn render(&self, f: &F) -> String {
        let var = |i: &usize| format!("x{i}");
        let args = |args: &[Arg]| {
            args.iter()
                .map(|a| match a {
                    Arg::Var(i) => var(i),
                    Arg::El(i) => self.elems[*i].to_string(),
                })
                .collect::<Vec<_>>()
                .join(",")
        };
        match f {
            F::Atom(p, a, pos) => {
                let neg = if *pos { "" } else { "~" };
                if a.is_empty() {
                    format!("{neg}{p}")
                } else {
                    format!("{neg}{p}({})", args(a))
                }
            }
            F::And(fs) | F::Or(fs) => {
                let op = if matches!(f, F::And(_)) { " & " } else { " | " };
                let parts: Vec<String> = fs.iter().map(|g| self.render(g)).collect();
                format!("({})", parts.join(op))
            }
            F::Implies(a, b) => format!("({} => {})", self.render(a), self.render(b)),
            F::Equiv(a, b) => format!("({} <=> {})", self.render(a), self.render(b)),
            F::All(x, g) => format!("(! {}[T] : {})", var(x), self.render(g)),
            F::Ex(x, g) => format!("(? {}[T] : {})", var(x), self.render(g)),
            F::Card(x, g, cmp, k) => format!(
                "(#{{{}[T] : {}}} {} {k})",
                var(x),
                self.render(g),
                cmp.symbol()
            ),
        }
    }

    fn vocabulary_source(&self) -> String {
        let mut s = format!("vocabulary V {{\n  type T = {{{}}}\n  data pred e(T,T)\n", self.elems.join(", "));
        for p in &self.unary {
            s += &format!("  pred {p}(T)\n");
        }
        s += "  pred u\n  pred v\n  pred d(T)\n}\n";
        s
    }

    pub fn theory_source(&self) -> String {
        let mut s = "theory Th : V {\n".to_string();
        if !self.rules.is_empty() {
            s += "  {\n";
            for r in &self.rules {
                let vars: Vec<String> = r.vars.iter().map(|v| format!("x{v}[T]")).collect();
                let head = match &r.head {
                    Arg::Var(i) => format!("x{i}"),
                    Arg::El(i) => self.elems[*i].to_string(),
                };
                let quant = if vars.is_empty() {
                    String::new()
                } else {
                    format!("! {} : ", vars.join(" "))
                };
                s += &format!("    {quant}d({head}) <- {}.\n", self.render(&r.body));
            }
            s += "  }\n";
        }
        for f in &self.sentences {
            s += &format!("  {}.\n", self.render(f));
        }
        s += "}\n";
        s
    }

    fn tuples(atoms: impl Iterator<Item = String>) -> BTreeMap<String, Vec<String>> {
        let mut by_pred: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for a in atoms {
            let (p, t) = match a.find('(') {
                Some(i) => (a[..i].to_string(), a[i..].to_string()),
                None => (a.clone(), String::new()),
            };
            by_pred.entry(p).or_default().push(t);
        }
        by_pred
    }

    fn interp_lines(atoms: impl Iterator<Item = String>, suffix: &str) -> String {
        let mut s = String::new();
        for (p, ts) in Self::tuples(atoms) {
            if ts.len() == 1 && ts[0].is_empty() {
                s += &format!("  {p}{suffix} = true\n");
            } else {
                s += &format!("  {p}{suffix} = {{{}}}\n", ts.join("; "));
            }
        }
        s
    }

    /// The knowledge base with the instance's partial structure.
    pub fn source(&self) -> String {
        let mut s = self.vocabulary_source() + &self.theory_source();
        s += "structure S : V {\n";
        s += &Self::interp_lines(self.data_atoms().into_iter(), "");
        let ct = self.structure.iter().filter(|(_, v)| **v).map(|(a, _)| a.clone());
        s += &Self::interp_lines(ct, ".ct");
        let cf = self.structure.iter().filter(|(_, v)| !**v).map(|(a, _)| a.clone());
        s += &Self::interp_lines(cf, ".cf");
        s += "}\n";
        s
    }

    /// The knowledge base without search-atom information.
    pub fn bare_source(&self) -> String {
        Instance {
            structure: BTreeMap::new(),
            ..self.clone()
        }
        .source()
    }

    /// A `total structure` block for a model.
    pub fn model_source(&self, m: &Assignment) -> String {
        let mut s = "total structure M : V {\n".to_string();
        let atoms = self
            .data_atoms()
            .into_iter()
            .chain(m.iter().filter(|(_, v)| **v).map(|(a, _)| a.clone()));
        s += &Self::interp_lines(atoms, "");
        s += "}\n";
        s
    }
}

struct Gen<'r> {
    rng: &'r mut ChaCha8Rng,
    n: usize,
    unary: Vec<&'static str>,
}

impl Gen<'_> {
    fn arg(&mut self, scope: &[usize]) -> Arg {
        if !scope.is_empty() && self.rng.gen_bool(0.75) {
            Arg::Var(*scope.choose(self.rng).unwrap())
        } else {
            Arg::El(self.rng.gen_range(0..self.n))
        }
    }

    /// A literal over an open predicate, or `d` when allowed.
    fn lit(&mut self, scope: &[usize], allow_d: bool, allow_neg: bool) -> F {
        let pos = !allow_neg || self.rng.gen_bool(0.5);
        let roll = self.rng.gen_range(0..10);
        if roll < 2 {
            let p = if self.rng.gen_bool(0.5) { "u" } else { "v" };
            return F::Atom(p, vec![], pos);
        }
        if allow_d && roll < 4 {
            let a = self.arg(scope);
            return F::Atom("d", vec![a], pos);
        }
        if scope.len() >= 1 && roll == 9 {
            let a = self.arg(scope);
            let b = self.arg(scope);
            return F::Atom("e", vec![a, b], pos);
        }
        let p = *self.unary.choose(self.rng).unwrap();
        let a = self.arg(scope);
        F::Atom(p, vec![a], pos)
    }

    fn lits(&mut self, scope: &[usize], lo: usize, hi: usize, allow_d: bool) -> Vec<F> {
        let k = self.rng.gen_range(lo..=hi);
        (0..k).map(|_| self.lit(scope, allow_d, true)).collect()
    }

    fn sentence(&mut self) -> F {
        match self.rng.gen_range(0..6) {
            0 => F::Or(self.lits(&[], 1, 3, true)),
            1 => F::All(0, Box::new(F::Or(self.lits(&[0], 1, 3, true)))),
            2 => F::Ex(0, Box::new(F::And(self.lits(&[0], 1, 2, true)))),
            3 => F::All(
                0,
                Box::new(F::All(
                    1,
                    Box::new(F::Implies(
                        Box::new(F::Atom("e", vec![Arg::Var(0), Arg::Var(1)], true)),
                        Box::new(F::Or(self.lits(&[0, 1], 1, 2, true))),
                    )),
                )),
            ),
            4 => {
                let a = self.lit(&[], true, true);
                let b = self.lit(&[], true, true);
                if self.rng.gen_bool(0.5) {
                    F::Equiv(Box::new(a), Box::new(b))
                } else {
                    F::Implies(Box::new(a), Box::new(b))
                }
            }
            _ => {
                let a = self.lit(&[0], true, true);
                let b = self.lit(&[1], true, true);
                F::All(
                    0,
                    Box::new(F::Implies(
                        Box::new(a),
                        Box::new(F::Ex(
                            1,
                            Box::new(F::And(vec![
                                F::Atom("e", vec![Arg::Var(0), Arg::Var(1)], true),
                                b,
                            ])),
                        )),
                    )),
                )
            }
        }
    }

    fn cmp(&mut self) -> Cmp {
        *[Cmp::Ge, Cmp::Le, Cmp::Eq].choose(self.rng).unwrap()
    }

    fn card(&mut self) -> F {
        let k = self.rng.gen_range(0..=self.n as i64);
        let cmp = self.cmp();
        if self.rng.gen_bool(0.7) {
            let body = F::And(self.lits(&[0], 1, 2, true));
            F::Card(0, Box::new(body), cmp, k)
        } else {
            let guard = self.lit(&[0], true, true);
            let inner = F::And(vec![
                F::Atom("e", vec![Arg::Var(0), Arg::Var(1)], true),
                self.lit(&[1], true, true),
            ]);
            F::All(
                0,
                Box::new(F::Implies(
                    Box::new(guard),
                    Box::new(F::Card(1, Box::new(inner), cmp, k)),
                )),
            )
        }
    }

    fn open_body(&mut self, scope: &[usize]) -> Vec<F> {
        let k = self.rng.gen_range(1..=2);
        (0..k).map(|_| self.lit(scope, false, true)).collect()
    }

    fn rules(&mut self) -> Vec<DRule> {
        let mut rules = vec![DRule {
            vars: vec![0],
            head: Arg::Var(0),
            body: F::And(self.open_body(&[0])),
        }];
        if self.rng.gen_bool(0.7) {
            let mut body = vec![
                F::Atom("e", vec![Arg::Var(0), Arg::Var(1)], true),
                F::Atom("d", vec![Arg::Var(1)], true),
            ];
            if self.rng.gen_bool(0.5) {
                body.push(self.lit(&[0, 1], false, true));
            }
            rules.push(DRule {
                vars: vec![0, 1],
                head: Arg::Var(0),
                body: F::And(body),
            });
        }
        if self.rng.gen_bool(0.4) {
            let inner = F::And(vec![
                F::Atom("d", vec![Arg::Var(1)], true),
                self.lit(&[1], false, true),
            ]);
            rules.push(DRule {
                vars: vec![],
                head: Arg::El(self.rng.gen_range(0..self.n)),
                body: F::Or(vec![self.lit(&[], false, true), F::Ex(1, Box::new(inner))]),
            });
        }
        rules
    }
}

/// A random instance with one definition, one cardinality constraint and a
/// few other sentences; at most 12 search atoms.
pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let n = rng.gen_range(2..=3);
    let unary = if n == 2 { vec!["p", "q", "r"] } else { vec!["p", "q"] };
    let mut edges = BTreeSet::new();
    for x in 0..n {
        for y in 0..n {
            if rng.gen_bool(0.4) {
                edges.insert((x, y));
            }
        }
    }
    let mut g = Gen { rng, n, unary: unary.clone() };
    let k = g.rng.gen_range(1..=3);
    let mut sentences: Vec<F> = (0..k).map(|_| g.sentence()).collect();
    let card = g.card();
    let at = g.rng.gen_range(0..=sentences.len());
    sentences.insert(at, card);
    let rules = g.rules();
    Instance {
        elems: ELEMS[..n].to_vec(),
        unary,
        edges,
        sentences,
        rules,
        structure: BTreeMap::new(),
    }
}

/// Fixes a random share of the search atoms to random values.
pub fn random_partial(rng: &mut ChaCha8Rng, inst: &Instance, share: f64) -> Assignment {
    let mut out = Assignment::new();
    for a in inst.search_atoms() {
        if rng.gen_bool(share) {
            out.insert(a, rng.gen_bool(0.5));
        }
    }
    out
}

// ------------------------------------------------------------- revision

#[derive(Clone, Debug)]
pub struct RevisionCase {
    pub model: Assignment,
    pub changes: BTreeSet<String>,
    pub fixed: BTreeSet<String>,
    /// Empty for the count criterion.
    pub weights: BTreeMap<String, u64>,
}

impl RevisionCase {
    pub fn weight(&self, a: &str) -> u64 {
        self.weights.get(a).copied().unwrap_or(1)
    }
}

/// An instance with at least one model plus a revision request on it.
pub fn random_revision(rng: &mut ChaCha8Rng, weighted: bool) -> (Instance, RevisionCase) {
    loop {
        let inst = random_instance(rng);
        let models = inst.models();
        let Some(model) = models.choose(rng).cloned() else {
            continue;
        };
        let mut atoms = inst.search_atoms();
        atoms.shuffle(rng);
        let nc = rng.gen_range(0..=3);
        let ng = rng.gen_range(0..=3);
        let changes: BTreeSet<String> = atoms[..nc].iter().cloned().collect();
        let fixed: BTreeSet<String> = atoms[nc..nc + ng].iter().cloned().collect();
        let mut weights = BTreeMap::new();
        if weighted {
            for a in inst.search_atoms() {
                if rng.gen_bool(0.6) {
                    weights.insert(a, rng.gen_range(1..=4));
                }
            }
        }
        return (
            inst,
            RevisionCase {
                model,
                changes,
                fixed,
                weights,
            },
        );
    }
}

/// Least cost of a model flipping every change and keeping every fixed
/// atom, or `None` when there is none.
pub fn revision_oracle(inst: &Instance, case: &RevisionCase) -> Option<u64> {
    inst.models()
        .into_iter()
        .filter(|m| case.changes.iter().all(|c| m[c] != case.model[c]))
        .filter(|m| case.fixed.iter().all(|g| m[g] == case.model[g]))
        .map(|m| {
            m.iter()
                .filter(|(a, v)| !case.changes.contains(*a) && case.model[*a] != **v)
                .map(|(a, _)| case.weight(a))
                .sum()
        })
        .min()
}

// ------------------------------------------------------------------ ECNF

/// Independent check of a total assignment against an ECNF. Rule groups are
/// checked as the least fixpoint of the reduct: negative body literals are
/// read from the assignment itself, which agrees with the stratified
/// fixpoint on stratified groups.
pub fn ecnf_accepts(e: &Ecnf, value: &[bool]) -> bool {
    let holds = |l: &Lit| value[l.var() as usize] == l.is_pos();
    if !e.clauses.iter().all(|c| c.iter().any(holds)) {
        return false;
    }
    for c in &e.cards {
        let sum: i64 = c
            .lits
            .iter()
            .zip(&c.weights)
            .filter(|(l, _)| holds(l))
            .map(|(_, w)| *w)
            .sum();
        let ok = match c.cmp {
            CardCmp::Ge => sum >= c.bound,
            CardCmp::Le => sum <= c.bound,
            CardCmp::Eq => sum == c.bound,
        };
        if !ok {
            return false;
        }
    }
    for g in &e.groups {
        let heads: BTreeSet<u32> = g.rules.iter().map(|r| r.head).collect();
        let mut derived: BTreeSet<u32> = BTreeSet::new();
        loop {
            let lit_true = |l: &Lit| {
                if l.is_pos() && heads.contains(&l.var()) {
                    derived.contains(&l.var())
                } else {
                    holds(l)
                }
            };
            let mut next = derived.clone();
            for r in &g.rules {
                let fire = match r.kind {
                    RuleKind::Conj => r.body.iter().all(lit_true),
                    RuleKind::Disj => r.body.iter().any(lit_true),
                };
                if fire {
                    next.insert(r.head);
                }
            }
            if next == derived {
                break;
            }
            derived = next;
        }
        if heads.iter().any(|h| value[*h as usize] != derived.contains(h)) {
            return false;
        }
    }
    true
}

/// Every accepted assignment (index 0 unused) of an ECNF with few variables.
pub fn ecnf_models(e: &Ecnf) -> Vec<Vec<bool>> {
    let n = e.num_vars();
    assert!(n <= 22, "too many variables to enumerate: {n}");
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        let value: Vec<bool> = std::iter::once(false)
            .chain((0..n).map(|i| mask >> i & 1 == 1))
            .collect();
        if ecnf_accepts(e, &value) {
            out.push(value);
        }
    }
    out
}

/// Accepted assignments projected to the ECNF's atoms. Tseitin variables
/// are searched depth first with clause pruning, so only the atom part is
/// enumerated exhaustively.
pub fn ecnf_atom_projections(e: &Ecnf) -> BTreeSet<BTreeMap<String, bool>> {
    let atoms: Vec<(String, u32)> = e.atoms().map(|(a, v)| (a.to_string(), v)).collect();
    let atom_vars: BTreeSet<u32> = atoms.iter().map(|(_, v)| *v).collect();
    let tseitins: Vec<u32> = (1..=e.num_vars() as u32)
        .filter(|v| !atom_vars.contains(v))
        .collect();
    // clauses become checkable once their last tseitin is assigned
    let mut pos_of = vec![usize::MAX; e.num_vars() + 1];
    for (i, v) in tseitins.iter().enumerate() {
        pos_of[*v as usize] = i;
    }
    let mut ready: Vec<Vec<usize>> = vec![Vec::new(); tseitins.len() + 1];
    for (ci, c) in e.clauses.iter().enumerate() {
        let last = c
            .iter()
            .map(|l| pos_of[l.var() as usize])
            .filter(|&p| p != usize::MAX)
            .map(|p| p + 1)
            .max()
            .unwrap_or(0);
        ready[last].push(ci);
    }
    let mut out = BTreeSet::new();
    let mut value = vec![false; e.num_vars() + 1];
    for mask in 0u64..(1u64 << atoms.len()) {
        for (i, (_, v)) in atoms.iter().enumerate() {
            value[*v as usize] = mask >> i & 1 == 1;
        }
        if extend(e, &tseitins, &ready, 0, &mut value) {
            out.insert(
                atoms
                    .iter()
                    .map(|(a, v)| (a.clone(), value[*v as usize]))
                    .collect(),
            );
        }
    }
    out
}

fn extend(e: &Ecnf, ts: &[u32], ready: &[Vec<usize>], depth: usize, value: &mut [bool]) -> bool {
    let ok = ready[depth].iter().all(|&ci| {
        e.clauses[ci]
            .iter()
            .any(|l| value[l.var() as usize] == l.is_pos())
    });
    if !ok {
        return false;
    }
    if depth == ts.len() {
        return ecnf_accepts(e, value);
    }
    for b in [false, true] {
        value[ts[depth] as usize] = b;
        if extend(e, ts, ready, depth + 1, value) {
            return true;
        }
    }
    false
}

#[derive(Clone, Debug)]
pub struct EcnfCase {
    pub ecnf: Ecnf,
    pub objective: Vec<(Lit, u64)>,
}

/// A random ECNF over at most 12 variables with clauses, weighted
/// constraints and rule groups whose negative literals avoid their own
/// heads, plus a random objective.
pub fn random_ecnf(rng: &mut ChaCha8Rng) -> EcnfCase {
    use kbrevise::grounder::{CardConstraint, EcnfRule, RuleGroup};
    let n = rng.gen_range(3..=12u32);
    let mut e = Ecnf::new();
    for i in 0..n {
        e.add_tseitin(format!("x{i}"));
    }
    let lit = |rng: &mut ChaCha8Rng| Lit::new(rng.gen_range(1..=n), rng.gen_bool(0.5));
    for _ in 0..rng.gen_range(0..=n) {
        let k = rng.gen_range(1..=3);
        e.clauses.push((0..k).map(|_| lit(rng)).collect());
    }
    for _ in 0..rng.gen_range(0..=2) {
        let mut vars: Vec<u32> = (1..=n).collect();
        vars.shuffle(rng);
        let m = rng.gen_range(2..=n.min(5) as usize);
        let lits: Vec<Lit> = vars[..m].iter().map(|&v| Lit::new(v, rng.gen_bool(0.6))).collect();
        let weights: Vec<i64> = (0..m).map(|_| *[-2, -1, 1, 1, 2, 3].choose(rng).unwrap()).collect();
        let lo: i64 = weights.iter().filter(|w| **w < 0).sum();
        let hi: i64 = weights.iter().filter(|w| **w > 0).sum();
        e.cards.push(CardConstraint {
            lits,
            weights,
            bound: rng.gen_range(lo..=hi),
            cmp: *[CardCmp::Ge, CardCmp::Le, CardCmp::Eq].choose(rng).unwrap(),
        });
    }
    let mut free: Vec<u32> = (1..=n).collect();
    free.shuffle(rng);
    for d in 0..rng.gen_range(0..=2) {
        if free.is_empty() {
            break;
        }
        let k = rng.gen_range(1..=3.min(free.len()));
        let heads: Vec<u32> = free.drain(..k).collect();
        let mut rules = Vec::new();
        for &h in &heads {
            let blen = rng.gen_range(1..=3);
            let body = (0..blen)
                .map(|_| {
                    let v = rng.gen_range(1..=n);
                    let pos = heads.contains(&v) || rng.gen_bool(0.6);
                    Lit::new(v, pos)
                })
                .collect();
            let kind = if rng.gen_bool(0.5) { RuleKind::Conj } else { RuleKind::Disj };
            rules.push(EcnfRule { head: h, kind, body });
        }
        e.groups.push(RuleGroup { definition: d, rules });
    }
    let terms = rng.gen_range(1..=n as usize);
    let objective = (0..terms)
        .map(|_| (lit(rng), rng.gen_range(1..=5)))
        .collect();
    EcnfCase { ecnf: e, objective }
}

pub fn objective_value(obj: &[(Lit, u64)], value: &[bool]) -> u64 {
    obj.iter()
        .filter(|(l, _)| value[l.var() as usize] == l.is_pos())
        .map(|(_, w)| *w)
        .sum()
}

// ------------------------------------------------------------- rule sets

#[derive(Clone, Debug)]
pub struct RuleCase {
    pub defined: Vec<u32>,
    pub open: BTreeMap<u32, bool>,
    pub rules: Vec<(u32, Vec<(u32, bool)>)>,
    level: BTreeMap<u32, usize>,
}

/// A stratified rule set over at most 50 atoms: every defined atom gets a
/// level, positive literals look at levels up to the head's and negative
/// ones strictly below.
pub fn random_rules(rng: &mut ChaCha8Rng) -> RuleCase {
    let nd = rng.gen_range(2..=40u32);
    let no = rng.gen_range(0..=10u32);
    let defined: Vec<u32> = (0..nd).collect();
    let open: BTreeMap<u32, bool> = (nd..nd + no).map(|a| (a, rng.gen_bool(0.5))).collect();
    let level: BTreeMap<u32, usize> = defined.iter().map(|&a| (a, rng.gen_range(0..4))).collect();
    let mut rules = Vec::new();
    for _ in 0..rng.gen_range(1..=2 * nd) {
        let h = rng.gen_range(0..nd);
        let lh = level[&h];
        let mut body = Vec::new();
        for _ in 0..rng.gen_range(0..=3) {
            if no > 0 && rng.gen_bool(0.3) {
                body.push((rng.gen_range(nd..nd + no), rng.gen_bool(0.5)));
                continue;
            }
            let b = rng.gen_range(0..nd);
            let lb = level[&b];
            if lb < lh {
                body.push((b, rng.gen_bool(0.5)));
            } else if lb == lh {
                body.push((b, true));
            }
        }
        rules.push((h, body));
    }
    RuleCase {
        defined,
        open,
        rules,
        level,
    }
}

impl RuleCase {
    /// Naive iteration level by level.
    pub fn naive(&self) -> BTreeSet<u32> {
        let mut truth: BTreeSet<u32> = BTreeSet::new();
        let max = self.level.values().copied().max().unwrap_or(0);
        for l in 0..=max {
            loop {
                let mut changed = false;
                for (h, body) in &self.rules {
                    if self.level[h] != l || truth.contains(h) {
                        continue;
                    }
                    let ok = body.iter().all(|(b, pos)| {
                        let v = match self.open.get(b) {
                            Some(v) => *v,
                            None => truth.contains(b),
                        };
                        v == *pos
                    });
                    if ok {
                        truth.insert(*h);
                        changed = true;
                    }
                }
                if !changed {
                    break;
                }
            }
        }
        truth
    }

    /// Adds rules that put a negative edge on a cycle.
    pub fn break_stratification(&mut self, rng: &mut ChaCha8Rng) {
        let n = self.defined.len() as u32;
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        self.rules.push((a, vec![(b, false)]));
        if a != b {
            self.rules.push((b, vec![(a, true)]));
        }
    }

    /// Whether `cycle` is a dependency cycle whose first edge is negative:
    /// some rule for `cycle[i]` mentions `cycle[i+1]`, wrapping around.
    pub fn is_negative_cycle(&self, cycle: &[u32]) -> bool {
        if cycle.is_empty() {
            return false;
        }
        let has = |h: u32, b: u32, neg_only: bool| {
            self.rules.iter().any(|(rh, body)| {
                *rh == h && body.iter().any(|(x, pos)| *x == b && (!neg_only || !pos))
            })
        };
        let k = cycle.len();
        (0..k).all(|i| has(cycle[i], cycle[(i + 1) % k], i == 0))
    }
}

// ------------------------------------------------------------ train corpus

pub struct Rail {
    pub tracks: BTreeSet<(String, String)>,
    pub starts: BTreeMap<String, String>,
    pub visits: BTreeMap<String, Vec<String>>,
    pub platforms: BTreeMap<String, String>,
}

impl Rail {
    /// Reads the network from the data predicates of a parsed structure.
    pub fn from_true_atoms(atoms: &[String]) -> Rail {
        let mut r = Rail {
            tracks: BTreeSet::new(),
            starts: BTreeMap::new(),
            visits: BTreeMap::new(),
            platforms: BTreeMap::new(),
        };
        for a in atoms {
            let Some(open) = a.find('(') else { continue };
            let pred = &a[..open];
            let args: Vec<String> = a[open + 1..a.len() - 1].split(',').map(str::to_string).collect();
            match pred {
                "Track" => {
                    r.tracks.insert((args[0].clone(), args[1].clone()));
                }
                "Start" => {
                    r.starts.insert(args[0].clone(), args[1].clone());
                }
                "Visits" => r.visits.entry(args[0].clone()).or_default().push(args[1].clone()),
                "PlatformOf" => {
                    r.platforms.insert(args[0].clone(), args[1].clone());
                }
                _ => {}
            }
        }
        r
    }

    /// Every simple path from the train's start, as node sequences.
    pub fn routes(&self, train: &str) -> Vec<Vec<String>> {
        let mut out = Vec::new();
        let mut path = vec![self.starts[train].clone()];
        self.walk(&mut path, &mut out);
        out
    }

    fn walk(&self, path: &mut Vec<String>, out: &mut Vec<Vec<String>>) {
        out.push(path.clone());
        let last = path.last().unwrap().clone();
        let next: Vec<String> = self
            .tracks
            .iter()
            .filter(|(a, b)| *a == last && !path.contains(b))
            .map(|(_, b)| b.clone())
            .collect();
        for n in next {
            path.push(n);
            self.walk(path, out);
            path.pop();
        }
    }

    fn serves(&self, train: &str, route: &[String]) -> bool {
        self.visits.get(train).map_or(true, |stations| {
            stations.iter().all(|s| {
                route
                    .iter()
                    .any(|n| self.platforms.get(n) == Some(s))
            })
        })
    }

    /// Search atoms that hold for a route.
    pub fn route_atoms(train: &str, route: &[String]) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = route.iter().map(|n| format!("Reach({train},{n})")).collect();
        for w in route.windows(2) {
            out.insert(format!("Use({train},{},{})", w[0], w[1]));
        }
        out
    }

    /// Every valid dispatch as the set of true search atoms.
    pub fn dispatches(&self) -> Vec<BTreeSet<String>> {
        let trains: Vec<&String> = self.starts.keys().collect();
        let mut partial: Vec<(BTreeSet<String>, BTreeSet<String>)> = vec![(BTreeSet::new(), BTreeSet::new())];
        for t in trains {
            let mut next = Vec::new();
            for (atoms, used_platforms) in &partial {
                for r in self.routes(t) {
                    if !self.serves(t, &r) {
                        continue;
                    }
                    let plats: BTreeSet<String> = r
                        .iter()
                        .filter(|n| self.platforms.contains_key(*n))
                        .cloned()
                        .collect();
                    if !plats.is_disjoint(used_platforms) {
                        continue;
                    }
                    let mut a = atoms.clone();
                    a.extend(Self::route_atoms(t, &r));
                    let mut u = used_platforms.clone();
                    u.extend(plats);
                    next.push((a, u));
                }
            }
            partial = next;
        }
        partial.into_iter().map(|(a, _)| a).collect()
    }

    /// Least number of additional changes over all dispatches that flip
    /// every change and keep every fixed atom, with one optimal dispatch.
    pub fn revision_minimum(
        &self,
        current: &BTreeSet<String>,
        changes: &BTreeSet<String>,
        fixed: &BTreeSet<String>,
    ) -> Option<(usize, BTreeSet<String>)> {
        self.dispatches()
            .into_iter()
            .filter(|d| changes.iter().all(|c| d.contains(c) != current.contains(c)))
            .filter(|d| fixed.iter().all(|g| d.contains(g) == current.contains(g)))
            .map(|d| {
                let cost = d
                    .symmetric_difference(current)
                    .filter(|a| !changes.contains(*a))
                    .count();
                (cost, d)
            })
            .min_by(|a, b| a.0.cmp(&b.0))
    }
}

// -------------------------------------------------------------- json schema

/// Validates a value against the subset of JSON Schema used by the report
/// schema: `type`, `enum`, `required`, `properties`, `additionalProperties`,
/// `pattern`, `minimum` and local `$ref`.
pub fn schema_errors(schema: &Value, value: &Value) -> Vec<String> {
    let mut errs = Vec::new();
    validate(schema, schema, value, "$", &mut errs);
    errs
}

fn type_matches(t: &str, v: &Value) -> bool {
    match t {
        "null" => v.is_null(),
        "boolean" => v.is_boolean(),
        "integer" => v.is_i64() || v.is_u64(),
        "number" => v.is_number(),
        "string" => v.is_string(),
        "array" => v.is_array(),
        "object" => v.is_object(),
        _ => false,
    }
}

fn validate(root: &Value, schema: &Value, v: &Value, path: &str, errs: &mut Vec<String>) {
    if let Some(r) = schema.get("$ref").and_then(Value::as_str) {
        let target = r
            .strip_prefix("#/")
            .unwrap_or_default()
            .split('/')
            .fold(root, |s, k| &s[k]);
        validate(root, target, v, path, errs);
        return;
    }
    if let Some(t) = schema.get("type") {
        let ok = match t {
            Value::String(s) => type_matches(s, v),
            Value::Array(ts) => ts.iter().filter_map(Value::as_str).any(|s| type_matches(s, v)),
            _ => false,
        };
        if !ok {
            errs.push(format!("{path}: expected type {t}, got {v}"));
            return;
        }
    }
    if let Some(vals) = schema.get("enum").and_then(Value::as_array) {
        if !vals.contains(v) {
            errs.push(format!("{path}: {v} not in enum"));
        }
    }
    if let (Some(p), Some(s)) = (schema.get("pattern").and_then(Value::as_str), v.as_str()) {
        if !regex::Regex::new(p).unwrap().is_match(s) {
            errs.push(format!("{path}: `{s}` does not match {p}"));
        }
    }
    if let (Some(min), Some(x)) = (schema.get("minimum").and_then(Value::as_f64), v.as_f64()) {
        if x < min {
            errs.push(format!("{path}: {x} < {min}"));
        }
    }
    let Some(obj) = v.as_object() else { return };
    if let Some(req) = schema.get("required").and_then(Value::as_array) {
        for k in req.iter().filter_map(Value::as_str) {
            if !obj.contains_key(k) {
                errs.push(format!("{path}: missing `{k}`"));
            }
        }
    }
    let props = schema.get("properties").and_then(Value::as_object);
    for (k, val) in obj {
        let sub = format!("{path}.{k}");
        match props.and_then(|p| p.get(k)) {
            Some(s) => validate(root, s, val, &sub, errs),
            None => match schema.get("additionalProperties") {
                Some(Value::Bool(false)) => errs.push(format!("{sub}: unexpected property")),
                Some(s @ Value::Object(_)) => validate(root, s, val, &sub, errs),
                _ => {}
            },
        }
    }
}

// --------------------------------------------------------------------- cli

pub fn corpus(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "corpus", name].iter().collect();
    p.to_string_lossy().into_owned()
}

pub fn report_schema() -> Value {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "schema", "run_report.schema.json"]
        .iter()
        .collect();
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

pub struct CliRun {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

impl CliRun {
    pub fn json(&self) -> Value {
        serde_json::from_str(&self.stdout)
            .unwrap_or_else(|e| panic!("stdout is not JSON ({e}):\n{}", self.stdout))
    }
}

pub fn kbrevise(args: &[&str]) -> CliRun {
    let out = Command::new(env!("CARGO_BIN_EXE_kbrevise"))
        .args(args)
        .output()
        .expect("binary runs");
    CliRun {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

/// The `vars= clauses= rules= cards=` line of a `ground` run.
pub fn size_line(stdout: &str) -> BTreeMap<String, usize> {
    let line = stdout
        .lines()
        .rev()
        .find(|l| l.starts_with("vars="))
        .expect("size line");
    line.split_whitespace()
        .map(|kv| {
            let (k, v) = kv.split_once('=').unwrap();
            (k.to_string(), v.parse().unwrap())
        })
        .collect()
}

/// Knowledge bases shipped in the corpus.
pub const CORPUS_KBS: [&str; 4] = ["train.kb", "coloring.kb", "scheduling.kb", "unsat.kb"];
