//! Order identity `|H||K| = |G||H∩K|` over every admissible binding.
//!
//! The first argument is the cap on `|G|` as a power of ten (default 40).
use factorlab::cli::parse_big;
use factorlab::tables::load_db;
use factorlab::verify::{sweep, Filter, Scope, Status, Tier, VerifyOptions};

fn main() {
    let exp = std::env::args().nth(1).unwrap_or_else(|| "40".into());
    let mut opts = VerifyOptions::for_tier(Tier::A);
    opts.caps.max_order = parse_big(&format!("1e{exp}")).expect("integer exponent");
    let db = load_db().expect("bundled database");
    let t = std::time::Instant::now();
    let (reports, summary) = sweep(&db, &Filter::default(), Tier::A, Scope::Admissible, &opts, 0).expect("thread pool");
    for r in reports.iter().filter(|r| r.status != Status::Pass) {
        println!("{}", r.text_line());
    }
    println!("{summary} in {:.2?}", t.elapsed());
}
