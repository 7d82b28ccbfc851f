//! Generator files for `SL_4(2)`, `ΣL_2(4)` and an antiflag stabilizer, then
//! the factorization test on them. A second triple sharing a parabolic fails.
//!
//! The files land in a temporary directory and can be fed to
//! `factorlab check-triple G.json H.json K.json`.
use factorlab::cli::{check_triple, GenFile};
use factorlab::construct::{field_ext_linear, gens_classical, Family};
use factorlab::perm::{stabilizer, Domain, DomainKind, DEFAULT_MAX_DOMAIN, DEFAULT_MAX_ENUM};

fn main() {
    let g = gens_classical(Family::SL, 4, 2).unwrap();
    let h = field_ext_linear(2, 2, 2, true).unwrap();
    let gc = g.closed_chain(0, DEFAULT_MAX_DOMAIN).unwrap();
    let e1 = [1, 0, 0, 0];

    let flags = Domain::new(DomainKind::RefinedAntiflags, g.field(), 4, None).unwrap();
    let (orbit, k) = stabilizer(&gc, &flags, flags.antiflag(&e1, &e1).unwrap(), 0, DEFAULT_MAX_DOMAIN).unwrap();
    println!("antiflag orbit {} so |K| = {}", orbit.len(), k.order());

    let dir = std::env::temp_dir().join("factorlab-triple");
    std::fs::create_dir_all(&dir).unwrap();
    let files = [
        ("G", GenFile::of_presentation(&g)),
        ("H", GenFile::of_presentation(&h)),
        ("K", GenFile::of_elements(g.field(), 4, k.generators())),
    ];
    for (name, f) in &files {
        f.write(&dir.join(format!("{name}.json"))).unwrap();
    }
    let r = check_triple(&files[0].1, &files[1].1, &files[2].1, 0, DEFAULT_MAX_DOMAIN, DEFAULT_MAX_ENUM).unwrap();
    println!("SL(4,2) = SigmaL(2,4) * K: {}  (|H∩K| = {})  files in {}", r.factorizes, r.order_int, dir.display());

    // H = K = stabilizer of e_1: both inside the same parabolic, so HK != G.
    let points = Domain::new(DomainKind::NonzeroVectors, g.field(), 4, None).unwrap();
    let (_, p1) = stabilizer(&gc, &points, points.point_of_vector(&e1), 0, DEFAULT_MAX_DOMAIN).unwrap();
    let pf = GenFile::of_elements(g.field(), 4, p1.generators());
    let r = check_triple(&files[0].1, &pf, &pf, 0, DEFAULT_MAX_DOMAIN, DEFAULT_MAX_ENUM).unwrap();
    println!("SL(4,2) = P1 * P1: {}  (|H∩K| = {})", r.factorizes, r.order_int);
}
