//! Build the subgroup recipes behind a database row and certify their orders.
//!
//! `cargo run --release --example build_subgroups -- T2R2 m=2 q=3`
use factorlab::cli::parse_binding;
use factorlab::perm::DEFAULT_MAX_DOMAIN;
use factorlab::shapes::Bindings;
use factorlab::tables::load_db;

fn main() {
    let mut args = std::env::args().skip(1);
    let id = args.next().unwrap_or_else(|| "T2R2".into());
    let rest: Vec<String> = args.collect();
    let b: Bindings = if rest.is_empty() { [("m".into(), 2), ("q".into(), 2)].into_iter().collect() } else { rest.iter().map(|s| parse_binding(s).expect("name=value")).collect() };
    let db = load_db().expect("bundled database");
    let rec = db.iter().find(|r| r.id == id).expect("no such record");
    let case = rec.case(&b).expect("evaluable").expect("constraints hold");
    let recipes = case.recipes().expect("evaluable").expect("row has tier-b recipes");
    for (role, recipe) in [("G", &recipes.g), ("H", &recipes.h)] {
        let p = recipe.build(0, DEFAULT_MAX_DOMAIN).expect("constructible");
        let c = p.closed_chain(0, DEFAULT_MAX_DOMAIN).expect("chain");
        println!("{role} = {:<36} {} generators, order {}, base orbits {:?}", p.name, p.gens.len(), c.order(), c.orbit_lengths());
    }
    println!("K recipe: {:?}", recipes.k);
}
