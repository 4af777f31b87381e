use kbrevise::inference::{revise, Criterion, InferOptions, RevisionProblem};
use kbrevise::lang::{load, parse_atom_list, parse_structure};
use kbrevise::structure::Model;

fn main() {
    let (kb, t) = load(include_str!("../corpus/train.kb")).unwrap();
    let voc = &kb.vocabulary;
    let s = parse_structure(include_str!("../corpus/dispatch.model"), voc).unwrap();
    let m = Model::new(s, voc).unwrap();
    let atoms = |src: &str| parse_atom_list(src, voc).unwrap().into_iter().collect();

    let p = RevisionProblem {
        vocabulary: voc,
        theory: &t,
        model: &m,
        changes: atoms(include_str!("../corpus/broken.atoms")),
        fixed: atoms(include_str!("../corpus/broken.fixed")),
        criterion: Criterion::Count,
        verify_model: true,
    };
    let r = revise(&p, &InferOptions::default()).unwrap();
    println!("{:?}, {} additional changes", r.status, r.metric);
    for c in &r.additional {
        println!("  {} {} -> {}", c.atom, c.from, c.to);
    }
}
