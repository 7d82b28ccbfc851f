//! Order formulas against Schreier-Sims on the constructed generators.
//!
//! Pass `family n q` triples on the command line to check others, e.g.
//! `cargo run --release --example classical_orders -- Omega- 8 2`.
use factorlab::construct::{gens_classical, Family};
use factorlab::perm::DEFAULT_MAX_DOMAIN;
use factorlab::shapes::classical_order;

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cases: Vec<(String, usize, u64)> = if args.is_empty() {
        vec![("Sp".into(), 6, 2), ("SU".into(), 4, 2), ("Omega+".into(), 8, 2), ("SigmaL".into(), 2, 4), ("Omega".into(), 5, 3)]
    } else {
        args.chunks(3).map(|c| (c[0].clone(), c[1].parse().expect("n"), c[2].parse().expect("q"))).collect()
    };
    for (name, n, q) in cases {
        let family: Family = name.parse().expect("known family");
        let formula = classical_order(&name, n as u64, q).expect("legal parameters");
        let p = gens_classical(family, n, q).expect("constructible");
        let bsgs = p.closed_chain(0, DEFAULT_MAX_DOMAIN).expect("chain").order();
        let tag = if formula == bsgs { "ok" } else { "MISMATCH" };
        println!("{name}({n},{q}): formula {formula}, bsgs {bsgs} [{tag}]");
    }
}
