use kbrevise::inference::{optimize, InferOptions};
use kbrevise::lang::{load, parse_term, typecheck_objective};

fn main() {
    let (kb, t) = load(include_str!("../corpus/scheduling.kb")).unwrap();
    let term = parse_term("#{j[Job] : Assigned(j,m2)}", &kb.vocabulary).unwrap();
    let objective = typecheck_objective(&kb.vocabulary, &term).unwrap();
    let o = optimize(&kb.vocabulary, &t, &kb.structure, &objective, &InferOptions::default()).unwrap();
    let Some((m, value)) = o.best else {
        println!("no model");
        return;
    };
    println!("least {objective} = {value}");
    for a in m.true_atoms().iter().filter(|a| a.pred == "Assigned") {
        println!("{a}");
    }
}
