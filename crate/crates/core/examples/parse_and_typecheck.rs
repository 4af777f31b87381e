use kbrevise::lang::load;

fn main() {
    let src = "
        vocabulary V { type Node = {a,b,c} data pred Edge(Node,Node) pred Reach(Node) }
        theory T : V {
            { Reach(a). ! x[Node] y[Node] : Reach(y) <- Reach(x) & Edge(x,y). }
            ~Reach(c).
        }
        structure S : V { Edge = { (a,b); (b,c) } }
    ";
    let (kb, _) = load(src).expect("well-typed");
    print!("{kb}");

    let bad = "vocabulary V { type T = {a} pred p(T) } theory T : V { p(a,a). }";
    for e in load(bad).unwrap_err() {
        println!("rejected: {e}");
    }
}
