//! One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.
//!
//! Runs without the libtest harness so the output is exactly the eight lines
//! plus diagnostics for failures.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use factorlab::construct::{gens_classical, Family};
use factorlab::gf::Field;
use factorlab::linalg::{GroupElem, MatF};
use factorlab::perm::{coset_orbit_len, solvable_residual, StabChain, DEFAULT_MAX_DOMAIN, DEFAULT_MAX_ENUM};
use factorlab::shapes::{classical_order, ppd, Bindings};
use factorlab::tables::{all_shape_strings, load_db, round_trips, FactorizationRecord};
use factorlab::verify::{
    chain_of, factorizes, sweep, verify, verify_tier_a, Filter, Scope, Status, Tier, VerificationReport, VerifyOptions,
};

// Pinned limits. Runtimes are wall-clock budgets under the test profile.
const PPD_MAX_A: u64 = 16;
const PPD_MAX_K: u32 = 24;
const PPD_BUDGET: Duration = Duration::from_secs(1);
const ORDER_CAP: u64 = 1_000_000_000;
const MIN_GROUPS: usize = 25;
const ORDERS_BUDGET: Duration = Duration::from_secs(60);
const TIER_A_CAP_EXP: u32 = 40;
const TIER_A_BUDGET: Duration = Duration::from_secs(60);
const GOLDEN_CASE_BUDGET: Duration = Duration::from_secs(60);
const GOLDEN_SUITE_BUDGET: Duration = Duration::from_secs(300);
const CRITERION_PAIRS: usize = 60;
const CRITERION_GROUP_CAP: u64 = 100_000;
const REGENERATIONS: usize = 10;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn bind(pairs: &[(&str, i64)]) -> Bindings {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn record<'a>(db: &'a [FactorizationRecord], id: &str) -> &'a FactorizationRecord {
    db.iter().find(|r| r.id == id).unwrap_or_else(|| panic!("record {id} missing"))
}

// 1. ppd against an oracle that strips from a^k - 1 every prime shared with
// some a^j - 1 (by repeated gcd), then checks the returned set accounts for
// exactly what remains.
fn ppd_oracle_agrees(a: u64, k: u32, got: &[BigUint]) -> Result<(), String> {
    let ab = BigUint::from(a);
    let n = num_traits::pow(ab.clone(), k as usize) - 1u32;
    let mut rest = n.clone();
    for j in 1..k {
        let m = num_traits::pow(ab.clone(), j as usize) - 1u32;
        loop {
            let g = rest.gcd(&m);
            if g.is_one() {
                break;
            }
            rest /= g;
        }
    }
    for p in got {
        check(miller_rabin(p), format!("ppd({a},{k}) returned composite {p}"))?;
        check((&n % p).to_u32() == Some(0), format!("{p} does not divide {a}^{k}-1"))?;
        check((1..k).all(|j| !ab.modpow(&BigUint::from(j), p).is_one()), format!("{p} is not primitive for ({a},{k})"))?;
        while (&rest % p).to_u32() == Some(0) {
            rest /= p;
        }
    }
    check(rest.is_one(), format!("ppd({a},{k}) misses a prime factor of {rest}"))
}

fn miller_rabin(n: &BigUint) -> bool {
    let two = BigUint::from(2u32);
    if *n < two {
        return false;
    }
    for p in [2u32, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41] {
        if *n == BigUint::from(p) {
            return true;
        }
        if (n % p).to_u32() == Some(0) {
            return false;
        }
    }
    let nm1 = n - 1u32;
    let s = nm1.trailing_zeros().unwrap_or(0);
    let d = &nm1 >> s;
    'witness: for a in [2u32, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41] {
        let mut x = BigUint::from(a).modpow(&d, n);
        if x.is_one() || x == nm1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == nm1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let set = |a, k| ppd(a, k).iter().map(|p| p.to_u64().unwrap()).collect::<Vec<_>>();
    check(set(2, 4) == [5], "ppd(2,4) != {5}")?;
    check(set(2, 6) == [7], "ppd(2,6) != {7}")?;
    check(set(2, 2) == [3], "ppd(2,2) != {3}")?;
    for a in [3u64, 7, 15] {
        check(set(a, 2).is_empty(), format!("ppd({a},2) should be empty since {a}+1 is a power of 2"))?;
    }
    let mut n = 0;
    for a in 2..=PPD_MAX_A {
        for k in 2..=PPD_MAX_K {
            // 2^6 - 1 has no primitive prime divisor; the convention names 7.
            let got = if (a, k) == (2, 6) { Vec::new() } else { ppd(a, k) };
            ppd_oracle_agrees(a, k, &got)?;
            n += 1;
        }
    }
    let el = t.elapsed();
    check(el < PPD_BUDGET, format!("took {el:.2?}"))?;
    Ok(format!("{n} (a,k) pairs agree with the oracle in {el:.2?}"))
}

// 2. Formula orders against Schreier-Sims on constructed generators.
const ORDER_GROUPS: &[(&str, usize, u64)] = &[
    ("SL", 2, 2), ("SL", 2, 3), ("SL", 2, 4), ("SL", 3, 2), ("SL", 3, 3), ("SL", 4, 2), ("GL", 3, 3),
    ("SigmaL", 2, 4), ("SigmaL", 2, 8), ("GammaL", 2, 9),
    ("Sp", 2, 3), ("Sp", 4, 2), ("Sp", 4, 3), ("Sp", 6, 2), ("GammaSp", 4, 4), ("Sp", 8, 2),
    ("SU", 2, 3), ("SU", 3, 2), ("SU", 3, 3), ("SU", 4, 2), ("SU", 5, 2), ("GU", 3, 2), ("SigmaU", 3, 3), ("GammaU", 4, 2),
    ("Omega+", 4, 3), ("Omega-", 4, 2), ("Omega-", 4, 3), ("Omega+", 6, 2), ("Omega-", 6, 2), ("Omega+", 8, 2), ("Omega-", 8, 2),
    ("Omega", 3, 3), ("Omega", 5, 3), ("Omega", 3, 5),
    ("SO+", 4, 3), ("SO-", 4, 3), ("SO", 5, 3), ("O+", 4, 3), ("O-", 4, 2), ("O", 3, 5), ("O+", 6, 2),
    ("GammaO+", 4, 4), ("GammaO-", 4, 4),
];

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let cap = BigUint::from(ORDER_CAP);
    let mut n = 0;
    let mut seen = BTreeSet::new();
    for &(name, dim, q) in ORDER_GROUPS {
        let formula = classical_order(name, dim as u64, q).map_err(|e| format!("{name}({dim},{q}): {e}"))?;
        if formula > cap {
            continue;
        }
        let family: Family = name.parse().map_err(|e| format!("{e}"))?;
        let p = gens_classical(family, dim, q).map_err(|e| format!("{name}({dim},{q}): {e}"))?;
        let bsgs = p.closed_chain(0, DEFAULT_MAX_DOMAIN).map_err(|e| format!("{name}({dim},{q}): {e}"))?.order();
        check(bsgs == formula, format!("{name}({dim},{q}): formula {formula}, BSGS {bsgs}"))?;
        seen.insert((name, dim, q, bsgs.to_string()));
        n += 1;
    }
    for (name, dim, q, o) in [("Sp", 6, 2, "1451520"), ("SU", 4, 2, "25920"), ("Omega+", 8, 2, "174182400"), ("SigmaL", 2, 4, "120")] {
        check(seen.contains(&(name, dim, q, o.to_string())), format!("{name}({dim},{q}) = {o} not confirmed"))?;
    }
    check(n >= MIN_GROUPS, format!("only {n} groups"))?;
    let el = t.elapsed();
    check(el < ORDERS_BUDGET, format!("took {el:.2?}"))?;
    Ok(format!("{n} groups, formula = BSGS, in {el:.2?}"))
}

fn tier_a_options() -> VerifyOptions {
    let mut o = VerifyOptions::for_tier(Tier::A);
    o.caps.max_order = BigUint::from(10u32).pow(TIER_A_CAP_EXP);
    o
}

fn criterion_3(db: &[FactorizationRecord]) -> Outcome {
    let t = Instant::now();
    let (reports, s) = sweep(db, &Filter::default(), Tier::A, Scope::Admissible, &tier_a_options(), 0).map_err(|e| e.to_string())?;
    let el = t.elapsed();
    if let Some(r) = reports.iter().find(|r| r.status != Status::Pass) {
        return Err(format!("{s}; first: {}", r.text_line()));
    }
    check(s.cases >= 300, format!("only {} cases", s.cases))?;
    check(el < TIER_A_BUDGET, format!("took {el:.2?}"))?;
    Ok(format!("{s} in {el:.2?}"))
}

struct Golden {
    id: &'static str,
    bind: &'static [(&'static str, i64)],
    orbit: Option<u64>,
    int: u64,
    order_h: Option<u64>,
    route: &'static str,
}

const GOLDEN: &[Golden] = &[
    Golden { id: "T1R1.2", bind: &[("a", 4), ("b", 1), ("q", 2)], orbit: Some(15), int: 24, order_h: None, route: "orbit" },
    Golden { id: "T1R3.1", bind: &[("m", 2)], orbit: Some(120), int: 1, order_h: Some(120), route: "orbit" },
    Golden { id: "T2R2", bind: &[("m", 2), ("q", 2)], orbit: Some(120), int: 6, order_h: None, route: "orbit" },
    Golden { id: "T2R2", bind: &[("m", 2), ("q", 3)], orbit: Some(2160), int: 24, order_h: None, route: "orbit" },
    Golden { id: "T6R15", bind: &[("m", 4), ("q", 2)], orbit: Some(135), int: 192, order_h: None, route: "orbit" },
    Golden { id: "T5R1", bind: &[("m", 5), ("q", 2)], orbit: Some(495), int: 27648, order_h: None, route: "orbit" },
    Golden { id: "T8R1.1", bind: &[("a", 1), ("b", 3), ("q", 2)], orbit: None, int: 4, order_h: None, route: "sift" },
    Golden { id: "T8R14.1", bind: &[("a", 2), ("b", 2), ("q", 2)], orbit: Some(120), int: 8160, order_h: None, route: "orbit" },
    Golden { id: "T5R7", bind: &[("m", 4)], orbit: Some(136), int: 120, order_h: Some(16320), route: "orbit" },
];

fn golden_report(db: &[FactorizationRecord], g: &Golden, seed: u64) -> Result<VerificationReport, String> {
    let case = record(db, g.id).case(&bind(g.bind)).map_err(|e| e.to_string())?.ok_or("constraints reject the golden binding")?;
    let mut o = VerifyOptions::for_tier(Tier::B);
    o.seed = seed;
    Ok(verify(&case, Tier::B, &o))
}

fn numbers(r: &VerificationReport) -> String {
    format!("{:?} {:?} {:?}", r.status, r.computed, r.expected)
}

fn criterion_4(db: &[FactorizationRecord]) -> Outcome {
    let t = Instant::now();
    for g in GOLDEN {
        let c = Instant::now();
        let r = golden_report(db, g, 0)?;
        let el = c.elapsed();
        let line = r.text_line();
        check(r.status == Status::Pass, line.clone())?;
        let num = |s: &Option<String>| s.as_deref().and_then(|x| x.parse::<u64>().ok());
        check(num(&r.computed.order_int) == Some(g.int), format!("|H∩K|: {line}"))?;
        if g.orbit.is_some() {
            check(num(&r.computed.orbit_size) == g.orbit, format!("orbit: {line}"))?;
        }
        if g.order_h.is_some() {
            check(num(&r.computed.order_h) == g.order_h, format!("|H|: {line}"))?;
        }
        check(r.route.as_deref().is_some_and(|x| x.starts_with(g.route)), format!("route: {line}"))?;
        check(el < GOLDEN_CASE_BUDGET, format!("{} took {el:.2?}", r.case))?;
        let other = golden_report(db, g, 0x5eed)?;
        check(numbers(&other) == numbers(&r), format!("{} depends on the seed", r.case))?;
    }
    let el = t.elapsed();
    check(el < GOLDEN_SUITE_BUDGET, format!("took {el:.2?}"))?;
    Ok(format!("{} golden cases exact under two seeds in {el:.2?}", GOLDEN.len()))
}

// 5. Random subgroup pairs: the order identity against transitivity of H on
// the right cosets of K.
fn random_subgroup(g: &StabChain, rng: &mut ChaCha8Rng) -> Vec<GroupElem> {
    let n = rng.gen_range(1..=2);
    (0..n).map(|_| g.random_element(rng)).collect()
}

fn criterion_5() -> Outcome {
    let ambients: Vec<StabChain> = [(Family::SL, 2, 4), (Family::SL, 3, 2), (Family::SU, 3, 2), (Family::Sp, 4, 2), (Family::SL, 2, 9), (Family::SL, 2, 8)]
        .into_iter()
        .map(|(f, n, q)| gens_classical(f, n, q).unwrap().closed_chain(0, DEFAULT_MAX_DOMAIN).unwrap())
        .collect();
    for g in &ambients {
        check(g.order() <= BigUint::from(CRITERION_GROUP_CAP), "ambient group too large")?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut pairs, mut yes) = (0, 0);
    let mut attempts = 0;
    while pairs < CRITERION_PAIRS {
        attempts += 1;
        check(attempts < 50 * CRITERION_PAIRS, "could not draw enough proper pairs")?;
        let g = &ambients[pairs % ambients.len()];
        let (field, n) = (g.field().clone(), g.dim());
        let h = chain_of(&field, n, &random_subgroup(g, &mut rng), 0, DEFAULT_MAX_DOMAIN).map_err(|e| e.to_string())?;
        let k = chain_of(&field, n, &random_subgroup(g, &mut rng), 0, DEFAULT_MAX_DOMAIN).map_err(|e| e.to_string())?;
        // Pairs with H or K equal to G factorize trivially; keep a few only.
        if (h.order() == g.order() || k.order() == g.order()) && rng.gen_bool(0.8) {
            continue;
        }
        let (_, d) = factorizes(g, &h, &k, DEFAULT_MAX_ENUM).map_err(|e| e.to_string())?;
        let index = (g.order() / k.order()).to_u64().unwrap();
        let f = coset_orbit_len(&k, h.generators(), index + 1).map_err(|e| e.to_string())? == index;
        check(d == f, format!("|G|={} |H|={} |K|={}: identity {d}, transitive {f}", g.order(), h.order(), k.order()))?;
        pairs += 1;
        yes += d as usize;
    }
    check(yes > 0 && yes < pairs, format!("degenerate sample: {yes}/{pairs} factorize"))?;
    Ok(format!("{pairs} pairs agree ({yes} factorizations)"))
}

// 6. Solvable residuals.
fn criterion_6() -> Outcome {
    let sp = gens_classical(Family::Sp, 4, 2).unwrap();
    let c = sp.closed_chain(0, DEFAULT_MAX_DOMAIN).map_err(|e| e.to_string())?;
    let r = solvable_residual(&c).map_err(|e| e.to_string())?.order();
    check(r == BigUint::from(360u32), format!("Sp(4,2) residual {r}"))?;

    // Upper unitriangular SL_3(3) and the Borel subgroup of SL_3(2) are solvable.
    let mut solvable = 0;
    for (p, diag) in [(3u32, 1), (2, 1), (3, 2)] {
        let k = Field::get(p, 1).unwrap();
        let mut gens: Vec<GroupElem> = [(0, 1), (1, 2), (0, 2)]
            .into_iter()
            .map(|(i, j)| {
                let mut m = MatF::identity(&k, 3);
                m.set(i, j, 1);
                GroupElem::linear(m)
            })
            .collect();
        if diag != 1 {
            let mut d = MatF::identity(&k, 3);
            d.set(0, 0, k.from_int(diag));
            d.set(1, 1, k.from_int(diag));
            gens.push(GroupElem::linear(d));
        }
        let ch = chain_of(&k, 3, &gens, 0, DEFAULT_MAX_DOMAIN).map_err(|e| e.to_string())?;
        let o = solvable_residual(&ch).map_err(|e| e.to_string())?.order();
        check(o.is_one(), format!("solvable group of order {} has residual {o}", ch.order()))?;
        solvable += 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for (fam, n, q, want) in [(Family::Sp, 4, 2, 360u32), (Family::SigmaL, 2, 4, 60)] {
        let p = gens_classical(fam, n, q).unwrap();
        let full = p.closed_chain(0, DEFAULT_MAX_DOMAIN).map_err(|e| e.to_string())?;
        let mut done = 0;
        while done < REGENERATIONS {
            let gens: Vec<GroupElem> = (0..3).map(|_| full.random_element(&mut rng)).collect();
            let ch = chain_of(p.field(), n, &gens, 0, DEFAULT_MAX_DOMAIN).map_err(|e| e.to_string())?;
            if ch.order() != full.order() {
                continue;
            }
            let o = solvable_residual(&ch).map_err(|e| e.to_string())?.order();
            check(o == BigUint::from(want), format!("{}: regenerated residual {o}", p.name))?;
            done += 1;
        }
    }
    Ok(format!("Sp(4,2) gives 360, {solvable} solvable inputs give 1, stable over {REGENERATIONS} regenerations of 2 groups"))
}

// 7. Grammar round trip and three mutated shapes.
fn criterion_7(db: &[FactorizationRecord]) -> Outcome {
    let all = all_shape_strings(db);
    let bad: Vec<&String> = all.iter().filter(|s| !round_trips(s)).collect();
    check(bad.is_empty(), format!("{} strings fail, first {:?}", bad.len(), bad.first()))?;

    let mutate = |id: &str, b: &[(&str, i64)], f: &dyn Fn(&mut FactorizationRecord)| -> Result<Status, String> {
        let mut r = record(db, id).clone();
        f(&mut r);
        let case = r.case(&bind(b)).map_err(|e| e.to_string())?.ok_or("binding rejected")?;
        Ok(verify_tier_a(&case, 0).status)
    };
    let t1 = [("a", 2), ("b", 2), ("q", 2)];
    check(mutate("T1R1.1", &t1, &|_| ())? == Status::Pass, "unmutated T1R1.1 does not pass")?;
    let mutations: [(&str, &[(&str, i64)], Box<dyn Fn(&mut FactorizationRecord)>); 3] = [
        ("T1R1.1", &t1, Box::new(|r| r.shapes.int = "[5]".into())),
        ("T2R2", &[("m", 2), ("q", 2)], Box::new(|r| r.shapes.int = "Sp(2*m,q)".into())),
        ("T5R1", &[("m", 5), ("q", 2)], Box::new(|r| r.shapes.h = "SU(m+1,q)".into())),
    ];
    for (id, b, f) in &mutations {
        let s = mutate(id, b, f.as_ref())?;
        check(s == Status::Fail, format!("mutated {id} gave {s}"))?;
    }
    Ok(format!("{} shape strings round-trip; 3 mutations FAIL", all.len()))
}

// 8. Byte-identical JSON for equal seeds; equal verdicts and numbers across seeds.
fn criterion_8(db: &[FactorizationRecord]) -> Outcome {
    let run = |tier: Tier, seed: u64| -> Result<Vec<VerificationReport>, String> {
        let mut o = if tier == Tier::A { tier_a_options() } else { VerifyOptions::for_tier(Tier::B) };
        o.seed = seed;
        o.residual = tier == Tier::B;
        sweep(db, &Filter::default(), tier, Scope::Golden, &o, 0).map(|x| x.0).map_err(|e| e.to_string())
    };
    let mut cases = 0;
    for tier in [Tier::A, Tier::B] {
        let a = serde_json::to_string(&run(tier, 11)?).unwrap();
        let b = serde_json::to_string(&run(tier, 11)?).unwrap();
        check(a == b, format!("tier {tier}: same seed, different JSON"))?;
        let x = run(tier, 11)?;
        let y = run(tier, 12)?;
        for (p, q) in x.iter().zip(&y) {
            check(numbers(p) == numbers(q), format!("tier {tier}: {} differs across seeds", p.case))?;
        }
        cases += x.len();
    }
    Ok(format!("{cases} reports byte-identical per seed, seed-independent numbers"))
}

fn main() {
    let db = load_db().expect("bundled database");
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("ppd oracle", Box::new(criterion_1)),
        ("order formulas vs BSGS", Box::new(criterion_2)),
        ("tier-A sweep", Box::new(|| criterion_3(&db))),
        ("tier-B golden suite", Box::new(|| criterion_4(&db))),
        ("criterion equivalence", Box::new(criterion_5)),
        ("solvable residuals", Box::new(criterion_6)),
        ("grammar round trip", Box::new(|| criterion_7(&db))),
        ("determinism", Box::new(|| criterion_8(&db))),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(msg) => println!("criterion {} PASS {name}: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {msg}", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
