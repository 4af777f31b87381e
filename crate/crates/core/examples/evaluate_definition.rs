use kbrevise::fixpoint::GroundRuleSet;

fn main() {
    let edges = [("a", "b"), ("b", "c"), ("d", "e")];
    let nodes = ["a", "b", "c", "d", "e"];
    let reach = |x: &str| format!("reach({x})");
    let edge = |x: &str, y: &str| format!("edge({x},{y})");

    let open: Vec<String> = nodes.iter().flat_map(|x| nodes.iter().map(move |y| edge(x, y))).collect();
    let mut rs = GroundRuleSet::new(nodes.iter().map(|x| reach(x)), open);
    rs.add_rule(reach("a"), vec![]).unwrap();
    for x in nodes {
        for y in nodes {
            rs.add_rule(reach(y), vec![(reach(x), true), (edge(x, y), true)]).unwrap();
        }
    }
    let report = rs.stratify();
    println!("strata: {}", report.strata.len());
    let lfp = rs
        .evaluate(&|a: &String| Some(edges.iter().any(|(x, y)| *a == edge(x, y))))
        .unwrap();
    for a in lfp {
        println!("{a}");
    }
}
