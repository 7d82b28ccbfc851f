//! Parse, print and evaluate structure strings under parameter bindings.
use factorlab::shapes::{order, parse_shape, print_shape, Bindings};

fn main() {
    let q2: Bindings = [("q".to_string(), 2)].into_iter().collect();
    for s in ["2^3:SL(3,2)", "[gcd(q^5,q^6/4)]:SL(2,q)", "(SL(2,3) x SL(2,9))/2", "q^(1+4):SU(2,q)", "Omega-(2*4,q)"] {
        let ast = parse_shape(s).expect("grammar");
        println!("{:<28} printed {:<28} order {}", s, print_shape(&ast), order(&ast, &q2).expect("evaluable"));
    }
    // A fractional bracket is fine as long as the whole shape is integral.
    let s = parse_shape("[1/2].Sp(4,q)").unwrap();
    println!("[1/2].Sp(4,2) has order {}", order(&s, &q2).unwrap());
}
