use kbrevise::inference::{model_expand, InferOptions};
use kbrevise::lang::load;

fn main() {
    let (kb, t) = load(include_str!("../corpus/coloring.kb")).unwrap();
    let e = model_expand(&kb.vocabulary, &t, &kb.structure, &InferOptions::default()).unwrap();
    match e.model {
        Some(m) => {
            for a in m.true_atoms().iter().filter(|a| a.pred == "Colours") {
                println!("{a}");
            }
        }
        None => println!("no model"),
    }
    println!("{:?}", e.stats);
}
