//! Walk the bundled database: record counts per table and one record in full.
use std::collections::BTreeMap;

use factorlab::tables::load_db;

fn main() {
    let db = load_db().expect("bundled database");
    let mut per_table: BTreeMap<u32, usize> = BTreeMap::new();
    for r in &db {
        *per_table.entry(r.table).or_default() += 1;
    }
    for (t, n) in &per_table {
        println!("table {t}: {n} records");
    }
    let r = db.iter().find(|r| r.id == "T8R1.1").expect("present");
    println!("{}", serde_json::to_string_pretty(r).unwrap());
}
