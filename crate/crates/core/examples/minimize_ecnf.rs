use kbrevise::grounder::{Ecnf, Lit};
use kbrevise::solver::{minimize, solve, MinimizeResult, Objective};

fn main() {
    // A set cover: every element needs one of its sets.
    let sets = ["s1", "s2", "s3", "s4"];
    let covers: [&[i32]; 4] = [&[1, 2], &[2, 3], &[3, 4], &[1, 4]];
    let mut e = Ecnf::new();
    for s in sets {
        e.add_tseitin(s);
    }
    e.clauses = covers
        .iter()
        .map(|c| c.iter().map(|&d| Lit::from_dimacs(d).unwrap()).collect())
        .collect();

    let (r, stats) = solve(&e, &[], 0);
    println!("{r:?}\n{stats:?}");
    let obj = Objective::count((1..=4).map(Lit::pos));
    if let (MinimizeResult::Optimal { model, value }, _) = minimize(&e, &obj, &[], 0) {
        let chosen: Vec<&str> = (1..=4).filter(|&v| model[v]).map(|v| sets[v - 1]).collect();
        println!("{value} sets: {chosen:?}");
    }
}
