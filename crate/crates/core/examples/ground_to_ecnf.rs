use kbrevise::grounder::{ground, propagate, GroundOptions, Propagation};
use kbrevise::lang::load;

fn main() {
    let src = include_str!("../corpus/coloring.kb");
    let (kb, t) = load(src).unwrap();
    let opts = GroundOptions::default();
    let naive = ground(&kb.vocabulary, &t, &kb.structure, &opts).unwrap();
    println!("naive:      {}", naive.ecnf.size());
    let Propagation::Consistent(s) = propagate(&kb.vocabulary, &t, &kb.structure, &opts).unwrap() else {
        println!("no model");
        return;
    };
    let g = ground(&kb.vocabulary, &t, &s, &opts).unwrap();
    println!("propagated: {}", g.ecnf.size());
    print!("{}", g.ecnf.dump());
}
