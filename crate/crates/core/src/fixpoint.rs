//! Ground rule sets: stratification, least-fixpoint evaluation and the
//! founded-ness check shared by the grounder, the solver and the oracles.
//!
//! ```
//! use kbrevise::fixpoint::GroundRuleSet;
//!
//! // p <- ~q.  q <- r.   with r open and false
//! let mut rules = GroundRuleSet::new(["p", "q"], ["r"]);
//! rules.add_rule("p", vec![("q", false)]).unwrap();
//! rules.add_rule("q", vec![("r", true)]).unwrap();
//! let truth = rules.evaluate(&|_| Some(false)).unwrap();
//! assert!(truth.contains("p") && !truth.contains("q"));
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Debug};

use crate::structure::{DomainAtom, StructureError, ThreeValuedStructure};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FixpointError<A> {
    /// A head atom that is not defined, or a body atom that is unknown to the
    /// rule set.
    Undeclared(A),
    /// Defined and open atoms overlap.
    Overlap(A),
    NotStratified(Vec<A>),
    OpenUnknown(A),
    Incomplete(A),
    Conflict(A),
}

impl<A: Debug> fmt::Display for FixpointError<A> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FixpointError::Undeclared(a) => write!(f, "atom {a:?} is not declared in the rule set"),
            FixpointError::Overlap(a) => write!(f, "atom {a:?} is both defined and open"),
            FixpointError::NotStratified(c) => {
                write!(f, "rules are not stratified; cycle through negation: {c:?}")
            }
            FixpointError::OpenUnknown(a) => write!(f, "open atom {a:?} is not two-valued"),
            FixpointError::Incomplete(a) => write!(f, "assignment misses atom {a:?}"),
            FixpointError::Conflict(a) => {
                write!(f, "defined atom {a:?} contradicts its given value")
            }
        }
    }
}

impl<A: Debug> std::error::Error for FixpointError<A> {}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GroundRule<A> {
    pub head: A,
    /// `(atom, positive)` pairs, read as a conjunction.
    pub body: Vec<(A, bool)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StratStatus<A> {
    Stratified,
    /// Atoms of a dependency cycle containing a negative edge, starting at
    /// the head of that edge.
    NonStratified(Vec<A>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StratificationReport<A> {
    /// Defined atoms, lowest stratum first. Empty when not stratified.
    pub strata: Vec<Vec<A>>,
    pub status: StratStatus<A>,
}

impl<A> StratificationReport<A> {
    pub fn is_stratified(&self) -> bool {
        matches!(self.status, StratStatus::Stratified)
    }
}

#[derive(Clone, Debug)]
struct IRule {
    head: usize,
    body: Vec<(usize, bool)>,
}

/// Rules over defined atoms with bodies over defined and open atoms.
#[derive(Clone, Debug)]
pub struct GroundRuleSet<A: Ord + Clone> {
    atoms: Vec<A>,
    index: BTreeMap<A, usize>,
    defined: Vec<bool>,
    rules: Vec<IRule>,
}

/// Outcome of comparing a total assignment with the least fixpoint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Foundedness<A> {
    Founded,
    /// Atoms true in the assignment but not derivable, in the lowest stratum
    /// where the two differ.
    Unfounded(Vec<A>),
    /// A defined atom derivable from the assignment is false in it.
    Unsupported(A),
}

impl<A: Ord + Clone + Debug> GroundRuleSet<A> {
    pub fn new(
        defined: impl IntoIterator<Item = A>,
        open: impl IntoIterator<Item = A>,
    ) -> Self {
        let mut s = GroundRuleSet {
            atoms: Vec::new(),
            index: BTreeMap::new(),
            defined: Vec::new(),
            rules: Vec::new(),
        };
        for a in defined {
            s.intern(a, true);
        }
        for a in open {
            s.intern(a, false);
        }
        s
    }

    /// Like `new`, but rejects atoms listed as both defined and open.
    pub fn try_new(
        defined: impl IntoIterator<Item = A>,
        open: impl IntoIterator<Item = A>,
    ) -> Result<Self, FixpointError<A>> {
        let mut s = GroundRuleSet::new(defined, std::iter::empty());
        for a in open {
            if s.index.get(&a).is_some_and(|&i| s.defined[i]) {
                return Err(FixpointError::Overlap(a));
            }
            if !s.index.contains_key(&a) {
                s.intern(a, false);
            }
        }
        Ok(s)
    }

    fn intern(&mut self, a: A, defined: bool) -> usize {
        if let Some(&i) = self.index.get(&a) {
            return i;
        }
        let i = self.atoms.len();
        self.atoms.push(a.clone());
        self.index.insert(a, i);
        self.defined.push(defined);
        i
    }

    pub fn add_rule(&mut self, head: A, body: Vec<(A, bool)>) -> Result<(), FixpointError<A>> {
        let h = match self.index.get(&head) {
            Some(&i) if self.defined[i] => i,
            _ => return Err(FixpointError::Undeclared(head)),
        };
        let mut ib = Vec::with_capacity(body.len());
        for (a, pos) in body {
            match self.index.get(&a) {
                Some(&i) => ib.push((i, pos)),
                None => return Err(FixpointError::Undeclared(a)),
            }
        }
        self.rules.push(IRule { head: h, body: ib });
        Ok(())
    }

    pub fn is_defined(&self, a: &A) -> bool {
        self.index.get(a).is_some_and(|&i| self.defined[i])
    }

    pub fn defined_atoms(&self) -> impl Iterator<Item = &A> {
        self.atoms.iter().zip(&self.defined).filter(|(_, d)| **d).map(|(a, _)| a)
    }

    pub fn open_atoms(&self) -> impl Iterator<Item = &A> {
        self.atoms.iter().zip(&self.defined).filter(|(_, d)| !**d).map(|(a, _)| a)
    }

    pub fn rules(&self) -> impl Iterator<Item = GroundRule<A>> + '_ {
        self.rules.iter().map(|r| GroundRule {
            head: self.atoms[r.head].clone(),
            body: r.body.iter().map(|&(i, p)| (self.atoms[i].clone(), p)).collect(),
        })
    }

    pub fn rule_count(&self) -> usize {
        self.rules.len()
    }

    /// Strata as atom indices, or the index cycle through negation.
    fn strata_idx(&self) -> Result<Vec<Vec<usize>>, Vec<usize>> {
        let n = self.atoms.len();
        let mut edges: Vec<Vec<(usize, bool)>> = vec![Vec::new(); n];
        for r in &self.rules {
            for &(b, pos) in &r.body {
                if self.defined[b] {
                    edges[r.head].push((b, !pos));
                }
            }
        }
        for e in &mut edges {
            e.sort_unstable();
            e.dedup();
        }
        let comp = tarjan(&edges, &self.defined);

        // a negative edge inside one component breaks stratification
        for h in 0..n {
            for &(b, neg) in &edges[h] {
                if neg && comp[h] == comp[b] {
                    let mut cycle = vec![h];
                    cycle.extend(path_within(&edges, &comp, b, h));
                    return Err(cycle);
                }
            }
        }

        // components come out sinks first, so bodies are numbered before heads
        let ncomp = comp.iter().filter_map(|c| *c).max().map_or(0, |m| m + 1);
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); ncomp];
        for (i, c) in comp.iter().enumerate() {
            if let Some(c) = c {
                members[*c].push(i);
            }
        }
        let mut level = vec![0usize; ncomp];
        for c in 0..ncomp {
            let mut l = 0;
            for &h in &members[c] {
                for &(b, neg) in &edges[h] {
                    let bc = comp[b].unwrap();
                    if bc != c {
                        l = l.max(level[bc] + usize::from(neg));
                    }
                }
            }
            level[c] = l;
        }
        let nlevels = level.iter().max().map_or(0, |m| m + 1);
        let mut strata: Vec<Vec<usize>> = vec![Vec::new(); nlevels];
        for (i, c) in comp.iter().enumerate() {
            if let Some(c) = c {
                strata[level[*c]].push(i);
            }
        }
        for s in &mut strata {
            s.sort_by(|a, b| self.atoms[*a].cmp(&self.atoms[*b]));
        }
        Ok(strata)
    }

    pub fn stratify(&self) -> StratificationReport<A> {
        match self.strata_idx() {
            Ok(strata) => StratificationReport {
                strata: strata
                    .into_iter()
                    .map(|s| s.into_iter().map(|i| self.atoms[i].clone()).collect())
                    .collect(),
                status: StratStatus::Stratified,
            },
            Err(cycle) => StratificationReport {
                strata: Vec::new(),
                status: StratStatus::NonStratified(
                    cycle.into_iter().map(|i| self.atoms[i].clone()).collect(),
                ),
            },
        }
    }

    fn not_stratified(&self, cycle: Vec<usize>) -> FixpointError<A> {
        FixpointError::NotStratified(cycle.into_iter().map(|i| self.atoms[i].clone()).collect())
    }

    /// Semi-naive least fixpoint of one stratum. `value` gives the truth of
    /// every atom outside the stratum.
    fn lfp_stratum(&self, stratum: &[usize], in_stratum: &[bool], value: &[bool]) -> Vec<usize> {
        let mut remaining: Vec<usize> = Vec::new();
        let mut watchers: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        let mut derived = vec![false; self.atoms.len()];
        let mut queue = Vec::new();
        let heads: BTreeSet<usize> = stratum.iter().copied().collect();
        let mut rule_ids = Vec::new();
        for (ri, r) in self.rules.iter().enumerate() {
            if !heads.contains(&r.head) {
                continue;
            }
            let mut alive = true;
            let mut count = 0;
            for &(b, pos) in &r.body {
                if in_stratum[b] && pos {
                    count += 1;
                    watchers.entry(b).or_default().push(rule_ids.len());
                } else if value[b] != pos {
                    alive = false;
                }
            }
            rule_ids.push(ri);
            remaining.push(if alive { count } else { usize::MAX });
            if alive && count == 0 && !derived[r.head] {
                derived[r.head] = true;
                queue.push(r.head);
            }
        }
        let mut out = Vec::new();
        while let Some(a) = queue.pop() {
            out.push(a);
            if let Some(ws) = watchers.get(&a) {
                for &k in ws {
                    if remaining[k] == usize::MAX {
                        continue;
                    }
                    remaining[k] -= 1;
                    let h = self.rules[rule_ids[k]].head;
                    if remaining[k] == 0 && !derived[h] {
                        derived[h] = true;
                        queue.push(h);
                    }
                }
            }
        }
        out
    }

    /// True defined atoms of the stratified least fixpoint, given two-valued
    /// open atoms.
    pub fn evaluate(
        &self,
        open: &dyn Fn(&A) -> Option<bool>,
    ) -> Result<BTreeSet<A>, FixpointError<A>> {
        let strata = self.strata_idx().map_err(|c| self.not_stratified(c))?;
        let mut value = vec![false; self.atoms.len()];
        for (i, a) in self.atoms.iter().enumerate() {
            if !self.defined[i] {
                value[i] = open(a).ok_or_else(|| FixpointError::OpenUnknown(a.clone()))?;
            }
        }
        let mut in_stratum = vec![false; self.atoms.len()];
        for s in &strata {
            s.iter().for_each(|&i| in_stratum[i] = true);
            for i in self.lfp_stratum(s, &in_stratum, &value) {
                value[i] = true;
            }
            s.iter().for_each(|&i| in_stratum[i] = false);
        }
        Ok(self
            .atoms
            .iter()
            .enumerate()
            .filter(|(i, _)| self.defined[*i] && value[*i])
            .map(|(_, a)| a.clone())
            .collect())
    }

    /// Whether the defined part of a total assignment equals the least
    /// fixpoint over its open part.
    pub fn check_defined(
        &self,
        assignment: &dyn Fn(&A) -> Option<bool>,
    ) -> Result<bool, FixpointError<A>> {
        for a in &self.atoms {
            if assignment(a).is_none() {
                return Err(FixpointError::Incomplete(a.clone()));
            }
        }
        let lfp = self.evaluate(assignment)?;
        Ok(self
            .defined_atoms()
            .all(|a| assignment(a) == Some(lfp.contains(a))))
    }

    /// Compares a total assignment with the fixpoint stratum by stratum.
    ///
    /// Lower strata are read from the assignment itself, so the result
    /// pinpoints the first stratum where the assignment goes wrong.
    pub fn foundedness(&self, value: &dyn Fn(&A) -> bool) -> Result<Foundedness<A>, FixpointError<A>> {
        let strata = self.strata_idx().map_err(|c| self.not_stratified(c))?;
        let vals: Vec<bool> = self.atoms.iter().map(value).collect();
        let mut in_stratum = vec![false; self.atoms.len()];
        for s in &strata {
            s.iter().for_each(|&i| in_stratum[i] = true);
            let mut lfp = vec![false; self.atoms.len()];
            for i in self.lfp_stratum(s, &in_stratum, &vals) {
                lfp[i] = true;
            }
            s.iter().for_each(|&i| in_stratum[i] = false);
            if let Some(&i) = s.iter().find(|&&i| lfp[i] && !vals[i]) {
                return Ok(Foundedness::Unsupported(self.atoms[i].clone()));
            }
            let unfounded: Vec<A> = s
                .iter()
                .filter(|&&i| vals[i] && !lfp[i])
                .map(|&i| self.atoms[i].clone())
                .collect();
            if !unfounded.is_empty() {
                return Ok(Foundedness::Unfounded(unfounded));
            }
        }
        Ok(Foundedness::Founded)
    }

    /// For an unfounded set `u` under `value`: one false body literal of each
    /// rule that could support `u` from outside. Together with `~a` for any
    /// `a` in `u` these form a clause valid in every founded model.
    pub fn loop_literals(&self, u: &[A], value: &dyn Fn(&A) -> bool) -> Vec<(A, bool)> {
        let set: BTreeSet<usize> = u.iter().filter_map(|a| self.index.get(a).copied()).collect();
        let mut out: BTreeSet<(A, bool)> = BTreeSet::new();
        for r in &self.rules {
            if !set.contains(&r.head) {
                continue;
            }
            if r.body.iter().any(|&(b, pos)| pos && set.contains(&b)) {
                continue;
            }
            let false_lit = r
                .body
                .iter()
                .find(|&&(b, pos)| value(&self.atoms[b]) != pos)
                .map(|&(b, pos)| (self.atoms[b].clone(), pos));
            if let Some(l) = false_lit {
                out.insert(l);
            }
        }
        out.into_iter().collect()
    }
}

impl GroundRuleSet<DomainAtom> {
    /// Extends a structure in which every open atom is two-valued with the
    /// values of all defined atoms.
    pub fn evaluate_structure(
        &self,
        s: &ThreeValuedStructure,
    ) -> Result<ThreeValuedStructure, FixpointError<DomainAtom>> {
        let lfp = self.evaluate(&|a| s.value(a))?;
        let mut out = s.clone();
        for a in self.defined_atoms() {
            out.set(a, lfp.contains(a)).map_err(|e| match e {
                StructureError::Conflict(a) => FixpointError::Conflict(a),
                _ => FixpointError::Conflict(a.clone()),
            })?;
        }
        Ok(out)
    }
}

/// Iterative Tarjan over the defined atoms; `None` for open atoms.
fn tarjan(edges: &[Vec<(usize, bool)>], defined: &[bool]) -> Vec<Option<usize>> {
    let n = edges.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comp = vec![None; n];
    let mut next_index = 0;
    let mut next_comp = 0;
    for root in 0..n {
        if !defined[root] || index[root] != usize::MAX {
            continue;
        }
        let mut call: Vec<(usize, usize)> = vec![(root, 0)];
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (v, ref mut ei)) = call.last_mut() {
            if *ei < edges[v].len() {
                let w = edges[v][*ei].0;
                *ei += 1;
                if index[w] == usize::MAX {
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                call.pop();
                if let Some(&(p, _)) = call.last() {
                    low[p] = low[p].min(low[v]);
                }
                if low[v] == index[v] {
                    loop {
                        let w = stack.pop().unwrap();
                        on_stack[w] = false;
                        comp[w] = Some(next_comp);
                        if w == v {
                            break;
                        }
                    }
                    next_comp += 1;
                }
            }
        }
    }
    comp
}

/// Shortest path from `from` to `to` inside one component, excluding `to`.
fn path_within(
    edges: &[Vec<(usize, bool)>],
    comp: &[Option<usize>],
    from: usize,
    to: usize,
) -> Vec<usize> {
    if from == to {
        return Vec::new();
    }
    let mut prev: BTreeMap<usize, usize> = BTreeMap::new();
    let mut queue = std::collections::VecDeque::from([from]);
    let mut seen = BTreeSet::from([from]);
    while let Some(v) = queue.pop_front() {
        if v == to {
            break;
        }
        for &(w, _) in &edges[v] {
            if comp[w] == comp[from] && seen.insert(w) {
                prev.insert(w, v);
                queue.push_back(w);
            }
        }
    }
    let mut path = Vec::new();
    let mut cur = to;
    while let Some(&p) = prev.get(&cur) {
        path.push(p);
        cur = p;
    }
    path.reverse();
    path
}
