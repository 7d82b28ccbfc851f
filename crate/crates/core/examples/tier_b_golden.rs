//! Constructive verification of the golden cases, with residual orders.
//!
//! `--admissible` widens the scope to every binding with `|G| <= 1e9`.
use factorlab::tables::load_db;
use factorlab::verify::{sweep, Filter, Scope, Tier, VerifyOptions};

fn main() {
    let scope = if std::env::args().any(|a| a == "--admissible") { Scope::Admissible } else { Scope::Golden };
    let mut opts = VerifyOptions::for_tier(Tier::B);
    opts.residual = true;
    opts.timings = true;
    let db = load_db().expect("bundled database");
    let (reports, summary) = sweep(&db, &Filter::default(), Tier::B, scope, &opts, 0).expect("thread pool");
    for r in &reports {
        println!("{}  {} ms", r.text_line(), r.elapsed_ms.unwrap_or(0));
    }
    println!("{summary}");
}
