//! Acceptance suite: one PASS/FAIL line per criterion.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use common::*;
use kbrevise::fixpoint::{FixpointError, GroundRuleSet};
use kbrevise::grounder::{ground, propagate, GroundOptions, Propagation};
use kbrevise::inference::{
    model_check, revise, CostFunction, Criterion, InferOptions, RevisionProblem, RevisionResult,
    RevisionStatus,
};
use kbrevise::lang::{load, parse_atom_list, parse_structure, KnowledgeBase, TypedTheory};
use kbrevise::solver::{minimize, MinimizeResult, Objective};
use kbrevise::structure::{DomainAtom, Model, ThreeValuedStructure};

type Outcome = Result<String, String>;

fn atom(s: &str) -> DomainAtom {
    s.parse().unwrap()
}

fn loaded(src: &str) -> (KnowledgeBase, TypedTheory) {
    load(src).unwrap_or_else(|e| panic!("{e:?}\n{src}"))
}

fn to_model(kb: &KnowledgeBase, src: &str) -> Model {
    let s = parse_structure(src, &kb.vocabulary).unwrap();
    Model::new(s, &kb.vocabulary).unwrap()
}

fn run_revision(
    inst: &Instance,
    case: &RevisionCase,
    weighted: bool,
    opts: &InferOptions,
) -> (KnowledgeBase, TypedTheory, Model, RevisionResult) {
    let (kb, t) = loaded(&inst.bare_source());
    let m = to_model(&kb, &inst.model_source(&case.model));
    let criterion = if weighted {
        let w: BTreeMap<DomainAtom, u64> = case.weights.iter().map(|(a, w)| (atom(a), *w)).collect();
        Criterion::Weighted(CostFunction::new(w).unwrap())
    } else {
        Criterion::Count
    };
    let problem = RevisionProblem {
        vocabulary: &kb.vocabulary,
        theory: &t,
        model: &m,
        changes: case.changes.iter().map(|a| atom(a)).collect(),
        fixed: case.fixed.iter().map(|a| atom(a)).collect(),
        criterion,
        verify_model: true,
    };
    let r = revise(&problem, opts).unwrap_or_else(|e| panic!("{e}\n{}", inst.bare_source()));
    (kb.clone(), t.clone(), m, r)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut revised = 0;
    for seed in 0..200u64 {
        let mut rng = rng(1_000 + seed);
        let weighted = seed % 2 == 1;
        let (inst, case) = random_revision(&mut rng, weighted);
        let expected = revision_oracle(&inst, &case);
        let (_, _, _, r) = run_revision(&inst, &case, weighted, &InferOptions::default());
        let got = match r.status {
            RevisionStatus::Revised => Some(r.metric),
            RevisionStatus::Unsat => None,
        };
        if got != expected {
            return Err(format!(
                "seed {seed}: oracle {expected:?}, revise {got:?}\n{}\n{case:?}",
                inst.bare_source()
            ));
        }
        revised += usize::from(got.is_some());
    }
    let elapsed = start.elapsed();
    if elapsed > Duration::from_secs(60) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!("200 instances ({revised} revised), {:.2}s", elapsed.as_secs_f64()))
}

fn criterion_2() -> Outcome {
    let mut checked = 0;
    let mut seed = 0u64;
    while checked < 1000 {
        seed += 1;
        if seed > 10_000 {
            return Err(format!("only {checked} revised results in 10000 attempts"));
        }
        let mut rng = rng(50_000 + seed);
        let weighted = seed % 3 == 0;
        let (inst, case) = random_revision(&mut rng, weighted);
        let opts = InferOptions {
            seed: seed % 4,
            propagate: seed % 2 == 0,
            ..InferOptions::default()
        };
        let (kb, t, m, r) = run_revision(&inst, &case, weighted, &opts);
        if r.status != RevisionStatus::Revised {
            continue;
        }
        checked += 1;
        let m2 = r.model.as_ref().unwrap();
        let fail = |why: &str| Err(format!("seed {seed}: {why}\n{}\n{case:?}", inst.bare_source()));
        let changes: BTreeSet<DomainAtom> = case.changes.iter().map(|a| atom(a)).collect();
        let fixed: BTreeSet<DomainAtom> = case.fixed.iter().map(|a| atom(a)).collect();
        if !changes.iter().all(|c| m2.value(c) != m.value(c)) {
            return fail("a required change did not flip");
        }
        if !fixed.iter().all(|g| m2.value(g) == m.value(g)) {
            return fail("a fixed atom changed");
        }
        let s: BTreeSet<DomainAtom> = r.additional.iter().map(|c| c.atom.clone()).collect();
        if s.iter().any(|a| changes.contains(a) || fixed.contains(a)) {
            return fail("S meets C or G");
        }
        let diff: BTreeSet<DomainAtom> = kb
            .vocabulary
            .all_atoms()
            .into_iter()
            .filter(|a| !changes.contains(a) && m.value(a) != m2.value(a))
            .collect();
        if diff != s {
            return fail("S is not the set of other changed atoms");
        }
        if !model_check(&kb.vocabulary, &t, m2).unwrap() {
            return fail("revised model fails model_check");
        }
        let assignment: Assignment = inst
            .search_atoms()
            .into_iter()
            .map(|a| {
                let v = m2.value(&atom(&a));
                (a, v)
            })
            .collect();
        if !inst.is_model(&assignment) {
            return fail("revised model fails the oracle");
        }
        let metric: u64 = s.iter().map(|a| case.weight(&a.to_string())).sum();
        if weighted && metric != r.metric || !weighted && s.len() as u64 != r.metric {
            return fail("metric is not the weight of S");
        }
    }
    Ok(format!("1000 revised results checked ({seed} instances)"))
}

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let kb_src = std::fs::read_to_string(corpus("train.kb")).unwrap();
    let (kb, t) = loaded(&kb_src);
    let m = to_model(&kb, &std::fs::read_to_string(corpus("dispatch.model")).unwrap());
    let atoms = |f: &str| -> BTreeSet<DomainAtom> {
        parse_atom_list(&std::fs::read_to_string(corpus(f)).unwrap(), &kb.vocabulary)
            .unwrap()
            .into_iter()
            .collect()
    };
    let changes = atoms("broken.atoms");
    let fixed = atoms("broken.fixed");
    let problem = RevisionProblem {
        vocabulary: &kb.vocabulary,
        theory: &t,
        model: &m,
        changes: changes.clone(),
        fixed: fixed.clone(),
        criterion: Criterion::Count,
        verify_model: true,
    };
    let r = revise(&problem, &InferOptions::default()).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    if r.status != RevisionStatus::Revised {
        return Err("no revision found".into());
    }

    let true_atoms: Vec<String> = m.true_atoms().iter().map(|a| a.to_string()).collect();
    let rail = Rail::from_true_atoms(&true_atoms);
    let current: BTreeSet<String> = true_atoms
        .iter()
        .filter(|a| a.starts_with("Use(") || a.starts_with("Reach("))
        .cloned()
        .collect();
    if !rail.dispatches().contains(&current) {
        return Err("the dispatched routes are not a valid dispatch for the oracle".into());
    }
    let names = |s: &BTreeSet<DomainAtom>| s.iter().map(|a| a.to_string()).collect::<BTreeSet<_>>();
    let (best, _) = rail
        .revision_minimum(&current, &names(&changes), &names(&fixed))
        .ok_or("oracle finds no revision")?;
    let touched_train2: Vec<String> = r
        .additional
        .iter()
        .map(|c| c.atom.to_string())
        .filter(|a| a.contains("Train2"))
        .collect();
    if !touched_train2.is_empty() {
        return Err(format!("S changes Train2: {touched_train2:?}"));
    }
    if r.metric != best as u64 {
        return Err(format!("metric {} but oracle minimum {best}", r.metric));
    }
    if elapsed > Duration::from_secs(5) {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!(
        "metric {} = oracle minimum, {} dispatches enumerated, S avoids Train2, {:.3}s",
        r.metric,
        rail.dispatches().len(),
        elapsed.as_secs_f64()
    ))
}

fn instance_with_structure(seed: u64) -> Instance {
    let mut rng = rng(200_000 + seed);
    let mut inst = random_instance(&mut rng);
    inst.structure = random_partial(&mut rng, &inst, 0.15);
    inst
}

/// Full search-atom assignments described by a grounding.
fn grounded_models(inst: &Instance, g: &kbrevise::grounder::Grounding) -> BTreeSet<Assignment> {
    let projections = ecnf_atom_projections(&g.ecnf);
    let search = inst.search_atoms();
    let in_ecnf: BTreeSet<String> = g.ecnf.atoms().map(|(a, _)| a.to_string()).collect();
    let known = |a: &str| g.known.value(&atom(a));
    let free: Vec<&String> = search
        .iter()
        .filter(|a| !in_ecnf.contains(*a) && known(a).is_none())
        .collect();
    let mut out = BTreeSet::new();
    for p in projections {
        for mask in 0u32..(1 << free.len()) {
            let mut m: Assignment = BTreeMap::new();
            for a in &search {
                let v = if let Some(v) = p.get(a) {
                    *v
                } else if let Some(v) = known(a) {
                    v
                } else {
                    let i = free.iter().position(|f| *f == a).unwrap();
                    mask >> i & 1 == 1
                };
                m.insert(a.clone(), v);
            }
            out.insert(m);
        }
    }
    out
}

fn criterion_4() -> Outcome {
    let mut total_models = 0;
    for seed in 0..500u64 {
        let inst = instance_with_structure(seed);
        let (kb, t) = loaded(&inst.source());
        let g = ground(&kb.vocabulary, &t, &kb.structure, &GroundOptions::default())
            .map_err(|e| format!("seed {seed}: {e}\n{}", inst.source()))?;
        let got = grounded_models(&inst, &g);
        let expected: BTreeSet<Assignment> = inst.models_extending(&inst.structure).into_iter().collect();
        if got != expected {
            return Err(format!(
                "seed {seed}: grounding has {} models, enumeration {}\n{}\n{}",
                got.len(),
                expected.len(),
                inst.source(),
                g.ecnf.dump()
            ));
        }
        total_models += expected.len();
    }
    Ok(format!("500 instances, {total_models} models matched"))
}

fn criterion_5() -> Outcome {
    let mut inconsistent = 0;
    let mut gained = 0;
    for seed in 0..500u64 {
        let inst = instance_with_structure(seed);
        let (kb, t) = loaded(&inst.source());
        let opts = GroundOptions::default();
        let models = inst.models_extending(&inst.structure);
        let p = propagate(&kb.vocabulary, &t, &kb.structure, &opts).map_err(|e| e.to_string())?;
        let s: ThreeValuedStructure = match p {
            Propagation::Inconsistent => {
                if !models.is_empty() {
                    return Err(format!("seed {seed}: declared inconsistent but has models"));
                }
                inconsistent += 1;
                continue;
            }
            Propagation::Consistent(s) => s,
        };
        if !s.extends(&kb.structure) {
            return Err(format!("seed {seed}: output loses input information"));
        }
        for m in &models {
            for a in inst.search_atoms() {
                if let Some(v) = s.value(&atom(&a)) {
                    if v != m[&a] {
                        return Err(format!("seed {seed}: model excluded via {a}\n{}", inst.source()));
                    }
                }
            }
        }
        gained += s.known_count() - kb.structure.known_count();
        match propagate(&kb.vocabulary, &t, &s, &opts).map_err(|e| e.to_string())? {
            Propagation::Consistent(s2) if s2 == s => {}
            _ => return Err(format!("seed {seed}: propagate is not idempotent")),
        }
    }
    Ok(format!(
        "500 instances, 0 violations, {gained} atoms fixed, {inconsistent} inconsistent"
    ))
}

fn criterion_6() -> Outcome {
    for seed in 0..300u64 {
        let mut rng = rng(300_000 + seed);
        let case = random_rules(&mut rng);
        let mut rs = GroundRuleSet::new(case.defined.clone(), case.open.keys().copied());
        for (h, b) in &case.rules {
            rs.add_rule(*h, b.clone()).unwrap();
        }
        let got = rs
            .evaluate(&|a| case.open.get(a).copied())
            .map_err(|e| format!("seed {seed}: {e}"))?;
        if got != case.naive() {
            return Err(format!("seed {seed}: evaluate differs from naive iteration"));
        }

        let mut bad = case.clone();
        bad.break_stratification(&mut rng);
        let mut rs = GroundRuleSet::new(bad.defined.clone(), bad.open.keys().copied());
        for (h, b) in &bad.rules {
            rs.add_rule(*h, b.clone()).unwrap();
        }
        match rs.evaluate(&|a| bad.open.get(a).copied()) {
            Err(FixpointError::NotStratified(cycle)) if bad.is_negative_cycle(&cycle) => {}
            Err(FixpointError::NotStratified(cycle)) => {
                return Err(format!("seed {seed}: witness {cycle:?} is not a negative cycle"))
            }
            other => return Err(format!("seed {seed}: non-stratified input gave {other:?}")),
        }
    }
    Ok("300 stratified sets equal, 300 non-stratified rejected with witness".into())
}

fn criterion_7() -> Outcome {
    let (mut with_groups, mut with_cards, mut unsat) = (0, 0, 0);
    for seed in 0..200u64 {
        let mut rng = rng(400_000 + seed);
        let case = random_ecnf(&mut rng);
        with_groups += usize::from(!case.ecnf.groups.is_empty());
        with_cards += usize::from(!case.ecnf.cards.is_empty());
        let best = ecnf_models(&case.ecnf)
            .iter()
            .map(|m| objective_value(&case.objective, m))
            .min();
        let (r, _) = minimize(&case.ecnf, &Objective::new(case.objective.clone()), &[], seed % 3);
        match (r, best) {
            (MinimizeResult::Unsat, None) => unsat += 1,
            (MinimizeResult::Optimal { model, value }, Some(b)) => {
                if !ecnf_accepts(&case.ecnf, &model) {
                    return Err(format!("seed {seed}: returned assignment is rejected\n{}", case.ecnf.dump()));
                }
                if value != b || objective_value(&case.objective, &model) != b {
                    return Err(format!("seed {seed}: value {value}, optimum {b}\n{}", case.ecnf.dump()));
                }
            }
            (r, b) => return Err(format!("seed {seed}: solver {r:?}, oracle {b:?}\n{}", case.ecnf.dump())),
        }
    }
    Ok(format!(
        "200 ECNFs ({with_groups} with rule groups, {with_cards} with constraints, {unsat} unsat)"
    ))
}

fn criterion_8() -> Outcome {
    let mut lines = Vec::new();
    for kb in CORPUS_KBS {
        let path = corpus(kb);
        let on = kbrevise(&["ground", "--kb", &path, "--propagate", "on"]);
        let off = kbrevise(&["ground", "--kb", &path, "--propagate", "off"]);
        if on.code != 0 || off.code != 0 {
            return Err(format!("{kb}: ground exited {} / {}", on.code, off.code));
        }
        let (a, b) = (size_line(&on.stdout), size_line(&off.stdout));
        lines.push(format!(
            "  {kb}: off vars={} clauses={} rules={} cards={} | on vars={} clauses={} rules={} cards={}",
            b["vars"], b["clauses"], b["rules"], b["cards"], a["vars"], a["clauses"], a["rules"], a["cards"]
        ));
        if a["clauses"] > b["clauses"] {
            return Err(format!("{kb}: propagation grew the clause count\n{}", lines.join("\n")));
        }
    }
    Ok(format!("clauses(on) <= clauses(off) on every instance\n{}", lines.join("\n")))
}

fn criterion_9() -> Outcome {
    let (train, dispatch) = (corpus("train.kb"), corpus("dispatch.model"));
    let (broken, fixed, weights) = (corpus("broken.atoms"), corpus("broken.fixed"), corpus("weights.json"));
    let (coloring, scheduling) = (corpus("coloring.kb"), corpus("scheduling.kb"));
    let runs: Vec<Vec<&str>> = vec![
        vec!["check", "--kb", &train, "--model", &dispatch],
        vec!["expand", "--kb", &train],
        vec!["expand", "--kb", &coloring, "--seed", "7"],
        vec!["optimize", "--kb", &scheduling, "--objective", "#{j[Job] : Assigned(j,m2)}"],
        vec!["revise", "--kb", &train, "--model", &dispatch, "--changes", &broken, "--fixed", &fixed],
        vec![
            "revise", "--kb", &train, "--model", &dispatch, "--changes", &broken, "--criterion",
            "weighted", "--weights", &weights, "--seed", "3",
        ],
        vec!["ground", "--kb", &train, "--format", "json"],
    ];
    for args in &runs {
        let mut full = args.clone();
        full.push("--deterministic");
        let a = kbrevise(&full);
        let b = kbrevise(&full);
        if a.stdout != b.stdout || a.stdout.is_empty() {
            return Err(format!("{} differs between runs", args.join(" ")));
        }
    }
    Ok(format!("{} invocations byte-identical across runs", runs.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("revision oracle equivalence", criterion_1),
        ("revision contracts", criterion_2),
        ("train corpus revision", criterion_3),
        ("grounding soundness", criterion_4),
        ("propagation safety", criterion_5),
        ("definition evaluation", criterion_6),
        ("solver optimality", criterion_7),
        ("grounding size", criterion_8),
        ("determinism", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let r = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match r {
            Ok(detail) => println!("PASS {} {name} [{secs:.2}s]: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name} [{secs:.2}s]: {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
