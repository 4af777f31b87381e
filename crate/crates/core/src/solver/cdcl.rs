//! Conflict-driven clause learning over clauses, linear constraints and rule
//! groups.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fixpoint::{Foundedness, GroundRuleSet};
use crate::grounder::ecnf::{CardCmp, Ecnf, Lit, RuleKind, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Reason {
    Decision,
    Clause(u32),
    Card(u32),
}

struct Clause {
    lits: Vec<Lit>,
}

/// `Σ weights·lits >= bound`, weights positive and sorted descending.
struct Card {
    lits: Vec<Lit>,
    weights: Vec<i64>,
    /// Total weight of literals not yet seen false, minus the bound.
    slack: i64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stats {
    pub conflicts: u64,
    pub decisions: u64,
    pub propagations: u64,
    pub restarts: u64,
    pub learned_clauses: u64,
    pub loop_clauses: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveResult {
    /// `model[v]` for every variable `v`; index 0 is unused.
    Sat(Vec<bool>),
    Unsat,
}

const RESTART_UNIT: u64 = 100;
const VAR_DECAY: f64 = 0.95;

fn code(l: Lit) -> usize {
    (l.var() as usize) * 2 + usize::from(!l.is_pos())
}

fn lit_value(value: &[i8], l: Lit) -> i8 {
    let v = value[l.var() as usize];
    if l.is_pos() {
        v
    } else {
        -v
    }
}

fn luby(mut x: u64) -> u64 {
    let mut size = 1u64;
    let mut seq = 0u32;
    while size < x + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != x {
        size = (size - 1) >> 1;
        seq -= 1;
        x %= size;
    }
    1 << seq
}

pub struct Solver {
    n: usize,
    value: Vec<i8>,
    level: Vec<u32>,
    reason: Vec<Reason>,
    trail_pos: Vec<u32>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    clauses: Vec<Clause>,
    watches: Vec<Vec<u32>>,
    cards: Vec<Card>,
    card_occ: Vec<Vec<(u32, u32)>>,
    groups: Vec<GroundRuleSet<Var>>,
    activity: Vec<f64>,
    var_inc: f64,
    phase: Vec<bool>,
    seen: Vec<bool>,
    unsat: bool,
    seed: u64,
    stats: Stats,
}

impl Solver {
    /// Loads clauses, constraints and rule groups; rule groups contribute
    /// their completion eagerly.
    pub fn new(ecnf: &Ecnf, seed: u64) -> Solver {
        let n = ecnf.num_vars();
        let mut activity = vec![0.0; n + 1];
        if seed != 0 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for a in activity.iter_mut().skip(1) {
                *a = rng.gen::<f64>() * 1e-3;
            }
        }
        let mut s = Solver {
            n,
            value: vec![0; n + 1],
            level: vec![0; n + 1],
            reason: vec![Reason::Decision; n + 1],
            trail_pos: vec![0; n + 1],
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            clauses: Vec::new(),
            watches: vec![Vec::new(); 2 * n + 2],
            cards: Vec::new(),
            card_occ: vec![Vec::new(); 2 * n + 2],
            groups: Vec::new(),
            activity,
            var_inc: 1.0,
            phase: vec![false; n + 1],
            seen: vec![false; n + 1],
            unsat: false,
            seed,
            stats: Stats::default(),
        };
        for c in &ecnf.clauses {
            s.add_clause(c);
        }
        for g in &ecnf.groups {
            for r in &g.rules {
                let h = Lit::pos(r.head);
                match r.kind {
                    RuleKind::Disj => {
                        let mut c = vec![!h];
                        c.extend(&r.body);
                        s.add_clause(&c);
                        for &l in &r.body {
                            s.add_clause(&[h, !l]);
                        }
                    }
                    RuleKind::Conj => {
                        let mut c = vec![h];
                        c.extend(r.body.iter().map(|&l| !l));
                        s.add_clause(&c);
                        for &l in &r.body {
                            s.add_clause(&[!h, l]);
                        }
                    }
                }
            }
            let rs = g.rule_set();
            if !rs.stratify().is_stratified() {
                s.unsat = true;
            }
            s.groups.push(rs);
        }
        for c in &ecnf.cards {
            s.add_constraint(&c.lits, &c.weights, c.cmp, c.bound);
        }
        s
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stats(&self) -> Stats {
        self.stats
    }

    fn decision_level(&self) -> usize {
        self.trail_lim.len()
    }

    fn enqueue(&mut self, l: Lit, reason: Reason) {
        let v = l.var() as usize;
        debug_assert_eq!(self.value[v], 0);
        self.value[v] = if l.is_pos() { 1 } else { -1 };
        self.level[v] = self.decision_level() as u32;
        self.reason[v] = reason;
        self.trail_pos[v] = self.trail.len() as u32;
        self.trail.push(l);
    }

    /// Adds a clause that holds in every model. Must be called between
    /// searches.
    pub fn add_clause(&mut self, lits: &[Lit]) {
        self.backtrack(0);
        let mut ls: Vec<Lit> = Vec::with_capacity(lits.len());
        for &l in lits {
            match lit_value(&self.value, l) {
                1 => return,
                -1 => continue,
                _ => {}
            }
            if ls.contains(&!l) {
                return;
            }
            if !ls.contains(&l) {
                ls.push(l);
            }
        }
        match ls.len() {
            0 => self.unsat = true,
            1 => self.enqueue(ls[0], Reason::Decision),
            _ => {
                self.attach(ls);
            }
        }
    }

    fn attach(&mut self, lits: Vec<Lit>) -> u32 {
        let ci = self.clauses.len() as u32;
        self.watches[code(lits[0])].push(ci);
        self.watches[code(lits[1])].push(ci);
        self.clauses.push(Clause { lits });
        ci
    }

    /// Adds `Σ weights·lits cmp bound`. Must be called between searches.
    pub fn add_constraint(&mut self, lits: &[Lit], weights: &[i64], cmp: CardCmp, bound: i64) {
        let terms: Vec<(Lit, i128)> = lits.iter().copied().zip(weights.iter().map(|&w| w as i128)).collect();
        let negated: Vec<(Lit, i128)> = terms.iter().map(|&(l, w)| (l, -w)).collect();
        let k = bound as i128;
        match cmp {
            CardCmp::Ge => self.add_at_least(&terms, k),
            CardCmp::Le => self.add_at_least(&negated, -k),
            CardCmp::Eq => {
                self.add_at_least(&terms, k);
                self.add_at_least(&negated, -k);
            }
        }
    }

    fn add_at_least(&mut self, terms: &[(Lit, i128)], k: i128) {
        self.backtrack(0);
        let mut k = k;
        // per variable: weight on the positive and on the negative literal
        let mut per_var: std::collections::BTreeMap<Var, (i128, i128)> = Default::default();
        let mut order: Vec<Var> = Vec::new();
        for &(l, w) in terms {
            let (l, w) = if w < 0 {
                k -= w;
                (!l, -w)
            } else {
                (l, w)
            };
            match lit_value(&self.value, l) {
                1 => {
                    k -= w;
                    continue;
                }
                -1 => continue,
                _ => {}
            }
            let e = per_var.entry(l.var()).or_insert_with(|| {
                order.push(l.var());
                (0, 0)
            });
            if l.is_pos() {
                e.0 += w;
            } else {
                e.1 += w;
            }
        }
        let mut lits = Vec::new();
        let mut ws: Vec<i128> = Vec::new();
        for v in order {
            let (wp, wn) = per_var[&v];
            let c = wp.min(wn);
            k -= c;
            if wp > c {
                lits.push(Lit::pos(v));
                ws.push(wp - c);
            }
            if wn > c {
                lits.push(Lit::neg(v));
                ws.push(wn - c);
            }
        }
        if k <= 0 {
            return;
        }
        for w in ws.iter_mut() {
            *w = (*w).min(k);
        }
        let total: i128 = ws.iter().sum();
        if total < k {
            self.unsat = true;
            return;
        }
        if ws.iter().all(|&w| w == k) {
            self.add_clause(&lits);
            return;
        }
        let mut idx: Vec<usize> = (0..lits.len()).collect();
        idx.sort_by(|&a, &b| ws[b].cmp(&ws[a]));
        let ci = self.cards.len() as u32;
        let card = Card {
            lits: idx.iter().map(|&i| lits[i]).collect(),
            weights: idx.iter().map(|&i| ws[i] as i64).collect(),
            slack: (total - k) as i64,
        };
        for (j, &l) in card.lits.iter().enumerate() {
            self.card_occ[code(l)].push((ci, j as u32));
        }
        self.cards.push(card);
        if self.check_card(ci).is_some() {
            self.unsat = true;
        }
    }

    /// Propagates a constraint after its slack changed; returns the false
    /// literals on conflict.
    fn check_card(&mut self, ci: u32) -> Option<Vec<Lit>> {
        let c = &self.cards[ci as usize];
        if c.slack < 0 {
            let lits = c
                .lits
                .iter()
                .copied()
                .filter(|&l| lit_value(&self.value, l) == -1)
                .collect();
            return Some(lits);
        }
        let slack = c.slack;
        let mut implied = Vec::new();
        for (j, &w) in c.weights.iter().enumerate() {
            if w <= slack {
                break;
            }
            let l = c.lits[j];
            if lit_value(&self.value, l) == 0 && !implied.contains(&l) {
                implied.push(l);
            }
        }
        for l in implied {
            if lit_value(&self.value, l) == 0 {
                self.enqueue(l, Reason::Card(ci));
            }
        }
        None
    }

    /// Unit propagation; returns a falsified clause on conflict.
    fn propagate(&mut self) -> Option<Vec<Lit>> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let fl = !p;

            let fc = code(fl);
            let occ_len = self.card_occ[fc].len();
            for k in 0..occ_len {
                let (ci, wi) = self.card_occ[fc][k];
                let c = &mut self.cards[ci as usize];
                c.slack -= c.weights[wi as usize];
            }
            for k in 0..occ_len {
                let (ci, _) = self.card_occ[fc][k];
                if let Some(confl) = self.check_card(ci) {
                    return Some(confl);
                }
            }

            let mut ws = std::mem::take(&mut self.watches[fc]);
            let mut i = 0;
            let mut j = 0;
            let mut conflict = None;
            while i < ws.len() {
                let ci = ws[i];
                i += 1;
                let lits = &mut self.clauses[ci as usize].lits;
                if lits[0] == fl {
                    lits.swap(0, 1);
                }
                let first = lits[0];
                if lit_value(&self.value, first) == 1 {
                    ws[j] = ci;
                    j += 1;
                    continue;
                }
                let mut moved = false;
                for k in 2..lits.len() {
                    if lit_value(&self.value, lits[k]) != -1 {
                        lits.swap(1, k);
                        self.watches[code(lits[1])].push(ci);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = ci;
                j += 1;
                if lit_value(&self.value, first) == -1 {
                    conflict = Some(self.clauses[ci as usize].lits.clone());
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, Reason::Clause(ci));
                }
            }
            ws.truncate(j);
            self.watches[fc] = ws;
            if conflict.is_some() {
                return conflict;
            }
        }
        None
    }

    fn backtrack(&mut self, lvl: usize) {
        if self.decision_level() <= lvl {
            return;
        }
        let lim = self.trail_lim[lvl];
        for i in (lim..self.trail.len()).rev() {
            let l = self.trail[i];
            if i < self.qhead {
                let fc = code(!l);
                for k in 0..self.card_occ[fc].len() {
                    let (ci, wi) = self.card_occ[fc][k];
                    let c = &mut self.cards[ci as usize];
                    c.slack += c.weights[wi as usize];
                }
            }
            let v = l.var() as usize;
            self.phase[v] = l.is_pos();
            self.value[v] = 0;
            self.reason[v] = Reason::Decision;
        }
        self.trail.truncate(lim);
        self.trail_lim.truncate(lvl);
        self.qhead = self.qhead.min(lim);
    }

    fn reason_lits(&self, l: Lit) -> Vec<Lit> {
        let v = l.var() as usize;
        match self.reason[v] {
            Reason::Clause(ci) => self.clauses[ci as usize].lits.clone(),
            Reason::Card(ci) => {
                let pos = self.trail_pos[v];
                let mut out = vec![l];
                for &x in &self.cards[ci as usize].lits {
                    if lit_value(&self.value, x) == -1 && self.trail_pos[x.var() as usize] < pos {
                        out.push(x);
                    }
                }
                out
            }
            Reason::Decision => unreachable!("decisions have no reason"),
        }
    }

    fn bump(&mut self, v: usize) {
        self.activity[v] += self.var_inc;
        if self.activity[v] > 1e100 {
            for a in self.activity.iter_mut() {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
    }

    /// First-UIP learning from a clause falsified at the current level.
    fn analyze(&mut self, confl: Vec<Lit>) -> (Vec<Lit>, usize) {
        let dl = self.decision_level() as u32;
        let mut learnt = vec![Lit::pos(1)];
        let mut counter = 0;
        let mut lits = confl;
        let mut p: Option<Lit> = None;
        let mut idx = self.trail.len();
        loop {
            for &q in &lits {
                let v = q.var() as usize;
                if p.is_some_and(|p| p.var() == q.var()) {
                    continue;
                }
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump(v);
                    if self.level[v] == dl {
                        counter += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if self.seen[self.trail[idx].var() as usize] {
                    break;
                }
            }
            let pl = self.trail[idx];
            self.seen[pl.var() as usize] = false;
            counter -= 1;
            p = Some(pl);
            if counter == 0 {
                break;
            }
            lits = self.reason_lits(pl);
        }
        learnt[0] = !p.expect("conflict has a literal at the current level");
        for l in &learnt[1..] {
            self.seen[l.var() as usize] = false;
        }
        let mut bj = 0;
        if learnt.len() > 1 {
            let mut best = 1;
            for i in 2..learnt.len() {
                if self.level[learnt[i].var() as usize] > self.level[learnt[best].var() as usize] {
                    best = i;
                }
            }
            learnt.swap(1, best);
            bj = self.level[learnt[1].var() as usize] as usize;
        }
        (learnt, bj)
    }

    fn resolve(&mut self, confl: Vec<Lit>) {
        let (learnt, bj) = self.analyze(confl);
        self.backtrack(bj);
        self.stats.learned_clauses += 1;
        if learnt.len() == 1 {
            self.enqueue(learnt[0], Reason::Decision);
        } else {
            let first = learnt[0];
            let ci = self.attach(learnt);
            self.enqueue(first, Reason::Clause(ci));
        }
        self.var_inc /= VAR_DECAY;
    }

    fn pick_branch(&self) -> Option<Var> {
        let mut best: Option<usize> = None;
        for v in 1..=self.n {
            if self.value[v] == 0 && best.map_or(true, |b| self.activity[v] > self.activity[b]) {
                best = Some(v);
            }
        }
        best.map(|v| v as Var)
    }

    /// A clause violated by the current total assignment when some rule
    /// group is not founded.
    fn group_violation(&self) -> Option<Vec<Lit>> {
        let val = |v: &Var| self.value[*v as usize] == 1;
        for rs in &self.groups {
            match rs.foundedness(&val) {
                Ok(Foundedness::Founded) => {}
                Ok(Foundedness::Unfounded(u)) => {
                    let mut c = vec![Lit::neg(u[0])];
                    c.extend(
                        rs.loop_literals(&u, &val)
                            .into_iter()
                            .map(|(v, pos)| Lit::new(v, pos)),
                    );
                    return Some(c);
                }
                Ok(Foundedness::Unsupported(_)) | Err(_) => {
                    // completion rules this out; block the decisions as a fallback
                    return Some(
                        self.trail_lim
                            .iter()
                            .map(|&i| !self.trail[i])
                            .filter(|l| self.reason[l.var() as usize] == Reason::Decision)
                            .collect(),
                    );
                }
            }
        }
        None
    }

    /// Searches for a model containing all assumption literals.
    pub fn solve(&mut self, assumptions: &[Lit]) -> SolveResult {
        self.backtrack(0);
        if self.unsat {
            return SolveResult::Unsat;
        }
        if self.propagate().is_some() {
            self.unsat = true;
            return SolveResult::Unsat;
        }
        let mut restart_idx = 0;
        let mut budget = luby(restart_idx) * RESTART_UNIT;
        let mut since_restart = 0;
        loop {
            if let Some(confl) = self.propagate() {
                self.stats.conflicts += 1;
                since_restart += 1;
                if self.decision_level() == 0 {
                    self.unsat = true;
                    return SolveResult::Unsat;
                }
                self.resolve(confl);
                continue;
            }
            if since_restart >= budget {
                self.backtrack(0);
                self.stats.restarts += 1;
                restart_idx += 1;
                budget = luby(restart_idx) * RESTART_UNIT;
                since_restart = 0;
                continue;
            }
            let dl = self.decision_level();
            if dl < assumptions.len() {
                let a = assumptions[dl];
                match lit_value(&self.value, a) {
                    1 => self.trail_lim.push(self.trail.len()),
                    -1 => {
                        self.backtrack(0);
                        return SolveResult::Unsat;
                    }
                    _ => {
                        self.trail_lim.push(self.trail.len());
                        self.enqueue(a, Reason::Decision);
                    }
                }
                continue;
            }
            if let Some(v) = self.pick_branch() {
                self.stats.decisions += 1;
                self.trail_lim.push(self.trail.len());
                let ph = self.phase[v as usize];
                self.enqueue(Lit::new(v, ph), Reason::Decision);
                continue;
            }
            match self.group_violation() {
                None => {
                    let model: Vec<bool> = self.value.iter().map(|&x| x == 1).collect();
                    self.backtrack(0);
                    return SolveResult::Sat(model);
                }
                Some(clause) => {
                    self.stats.loop_clauses += 1;
                    self.stats.conflicts += 1;
                    since_restart += 1;
                    let top = clause
                        .iter()
                        .map(|l| self.level[l.var() as usize] as usize)
                        .max()
                        .unwrap_or(0);
                    if top == 0 {
                        self.unsat = true;
                        self.backtrack(0);
                        return SolveResult::Unsat;
                    }
                    self.backtrack(top);
                    self.resolve(clause);
                }
            }
        }
    }

    /// Values forced at the root, or `None` when propagation alone finds a
    /// conflict.
    pub fn root_values(&mut self) -> Option<Vec<Option<bool>>> {
        self.backtrack(0);
        if self.unsat || self.propagate().is_some() {
            self.unsat = true;
            return None;
        }
        Some(
            self.value
                .iter()
                .map(|&x| match x {
                    1 => Some(true),
                    -1 => Some(false),
                    _ => None,
                })
                .collect(),
        )
    }
}
