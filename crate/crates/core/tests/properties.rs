//! Randomized invariants across the library.

use num_bigint::BigUint;
use proptest::prelude::*;

use factorlab::construct::{gens_classical, Family};
use factorlab::gf::{Elt, Field};
use factorlab::linalg::{GroupElem, MatF};
use factorlab::perm::{orbit, stabilizer, Domain, DomainKind, DEFAULT_MAX_DOMAIN};
use factorlab::shapes::{order, parse_shape, print_shape, Bindings, Shape};
use factorlab::tables::load_db;
use factorlab::verify::{verify, Status, Tier, VerifyOptions};

const FIELDS: &[u64] = &[2, 3, 4, 5, 7, 8, 9, 11, 16, 25, 27, 32, 49, 64, 81];

fn field() -> impl Strategy<Value = std::sync::Arc<Field>> {
    prop::sample::select(FIELDS).prop_map(|q| Field::of_order(q).unwrap())
}

fn elts(k: &Field, n: usize) -> impl Strategy<Value = Vec<Elt>> {
    prop::collection::vec(0..k.q(), n)
}

fn matrix(k: &std::sync::Arc<Field>, n: usize, codes: &[Elt]) -> MatF {
    MatF::from_rows(k, &codes.chunks(n).map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn field_axioms((k, v) in field().prop_flat_map(|k| { let e = elts(&k, 3); (Just(k), e) })) {
        let (a, b, c) = (v[0], v[1], v[2]);
        prop_assert_eq!(k.add(k.add(a, b), c), k.add(a, k.add(b, c)));
        prop_assert_eq!(k.mul(k.mul(a, b), c), k.mul(a, k.mul(b, c)));
        prop_assert_eq!(k.mul(a, b), k.mul(b, a));
        prop_assert_eq!(k.mul(a, k.add(b, c)), k.add(k.mul(a, b), k.mul(a, c)));
        prop_assert_eq!(k.add(a, k.neg(a)), k.zero());
        if a != k.zero() {
            prop_assert_eq!(k.mul(a, k.inv(a).unwrap()), k.one());
        }
        // Frobenius is a field automorphism.
        prop_assert_eq!(k.frobenius(k.add(a, b), 1), k.add(k.frobenius(a, 1), k.frobenius(b, 1)));
        prop_assert_eq!(k.frobenius(k.mul(a, b), 1), k.mul(k.frobenius(a, 1), k.frobenius(b, 1)));
        prop_assert_eq!(k.frobenius(a, k.f()), a);
    }

    #[test]
    fn determinant_is_multiplicative((k, n, v) in (field(), 1usize..5).prop_flat_map(|(k, n)| { let e = elts(&k, 2 * n * n); (Just(k), Just(n), e) })) {
        let a = matrix(&k, n, &v[..n * n]);
        let b = matrix(&k, n, &v[n * n..]);
        prop_assert_eq!(a.mul(&b).det(), k.mul(a.det(), b.det()));
        if a.det() != k.zero() {
            prop_assert!(a.mul(&a.inverse().unwrap()).is_identity());
        }
    }

    #[test]
    fn semilinear_composition((k, v, fr) in field().prop_flat_map(|k| { let e = elts(&k, 27); let f = prop::collection::vec(0..k.f(), 3); (Just(k), e, f) })) {
        let g: Vec<GroupElem> = (0..3)
            .map(|i| {
                let mut m = matrix(&k, 3, &v[9 * i..9 * i + 9]);
                for d in 0..3 {
                    if m.det() != k.zero() { break; }
                    m.set(d, d, k.add(m.get(d, d), k.one()));
                }
                GroupElem { mat: m, frob: fr[i] }
            })
            .filter(|x| x.mat.det() != k.zero())
            .collect();
        prop_assume!(g.len() == 3);
        prop_assert_eq!(g[0].compose(&g[1]).compose(&g[2]), g[0].compose(&g[1].compose(&g[2])));
        prop_assert!(g[0].compose(&g[0].inverse()).is_identity());
        let x = vec![k.one(), k.zero(), k.one()];
        prop_assert_eq!(g[0].compose(&g[1]).apply(&x), g[1].apply(&g[0].apply(&x)));
    }
}

// Closed shapes with known orders, combined at random.
const ATOMS: &[(&str, u64)] = &[
    ("SL(2,4)", 60), ("2^3", 8), ("Sp(4,2)", 720), ("A(5)", 60), ("[6]", 6), ("SU(3,2)", 216),
    ("q^2", 4), ("Omega-(4,q)", 60), ("M12", 95040), ("Sp(4,2)'", 360), ("3", 3), ("PSL(2,7)", 168),
];

fn joined(ops: &[(usize, char)]) -> (String, u64) {
    let mut s = String::new();
    let mut o = 1u64;
    for (i, (a, op)) in ops.iter().enumerate() {
        if i > 0 {
            s.push_str(match op { ':' => ":", '.' => ".", _ => " x " });
        }
        let (atom, n) = ATOMS[*a];
        s.push_str(atom);
        o *= n;
    }
    (s, o)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn shape_orders_multiply(ops in prop::collection::vec((0..ATOMS.len(), prop::sample::select(vec![':', '.', 'x'])), 1..4)) {
        let q: Bindings = [("q".to_string(), 2)].into_iter().collect();
        let (s, want) = joined(&ops);
        let ast = parse_shape(&s).unwrap();
        prop_assert_eq!(order(&ast, &q).unwrap(), BigUint::from(want));
        let again = parse_shape(&print_shape(&ast)).unwrap();
        prop_assert_eq!(&again, &ast);
        // Splitting the product anywhere multiplies the parts.
        let cut = ops.len() / 2;
        if cut > 0 {
            let (l, _) = joined(&ops[..cut]);
            let (r, _) = joined(&ops[cut..]);
            let lr = parse_shape(&format!("({l}):({r})")).unwrap();
            prop_assert_eq!(order(&lr, &q).unwrap(), BigUint::from(want));
            prop_assert!(matches!(lr, Shape::Split(..)));
        }
    }

    #[test]
    fn quotient_divides(a in 0..ATOMS.len(), k in prop::sample::select(vec![1u64, 2, 3, 4, 6])) {
        let q: Bindings = [("q".to_string(), 2)].into_iter().collect();
        let (s, n) = (ATOMS[a].0, ATOMS[a].1);
        let r = order(&parse_shape(&format!("({s})/{k}")).unwrap(), &q);
        if n % k == 0 {
            prop_assert_eq!(r.unwrap(), BigUint::from(n / k));
        } else {
            prop_assert!(r.is_err());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn orbit_stabilizer(g in 0usize..4, v in prop::collection::vec(0u32..3, 4), seed in 0u64..1000) {
        let (fam, n, q) = [(Family::SL, 3, 3), (Family::Sp, 4, 3), (Family::SU, 3, 2), (Family::OmegaMinus, 4, 3)][g];
        let p = gens_classical(fam, n, q).unwrap();
        let k = p.field();
        let v: Vec<Elt> = v[..n].iter().map(|&x| x % k.q()).collect();
        prop_assume!(v.iter().any(|&x| x != 0));
        let chain = p.closed_chain(seed, DEFAULT_MAX_DOMAIN).unwrap();
        let dom = Domain::new(DomainKind::NonzeroVectors, k, n, None).unwrap();
        let x = dom.point_of_vector(&v);
        let (o, stab) = stabilizer(&chain, &dom, x, seed, DEFAULT_MAX_DOMAIN).unwrap();
        prop_assert_eq!(stab.order() * BigUint::from(o.len()), chain.order());
        prop_assert_eq!(orbit(&dom, &p.gens, x, DEFAULT_MAX_DOMAIN).unwrap().len(), o.len());
        for s in stab.generators() {
            prop_assert_eq!(s.apply(&v), v.clone());
            prop_assert!(chain.contains(s));
        }
    }
}

#[test]
fn admissible_bindings_satisfy_constraints() {
    let cap = BigUint::from(10u32).pow(12);
    for r in load_db().unwrap() {
        for c in r.admissible_bindings(&cap) {
            assert!(r.check_constraints(&c.bindings).unwrap(), "{}", c.label());
            assert!(c.orders().unwrap()[0] <= cap, "{}", c.label());
        }
    }
}

#[test]
fn tier_b_pass_implies_tier_a_pass() {
    let db = load_db().unwrap();
    let opts = VerifyOptions::for_tier(Tier::B);
    let mut n = 0;
    for r in db.iter().filter(|r| r.tier_b.is_some()) {
        for b in &r.tier_b.as_ref().unwrap().golden {
            let c = r.case(b).unwrap().unwrap();
            if verify(&c, Tier::B, &opts).status == Status::Pass {
                assert_eq!(verify(&c, Tier::A, &opts).status, Status::Pass, "{}", c.label());
                n += 1;
            }
        }
    }
    assert!(n >= 9);
}

#[test]
fn gl_element_outside_sl_chain() {
    let p = gens_classical(Family::SL, 3, 3).unwrap();
    let chain = p.closed_chain(0, DEFAULT_MAX_DOMAIN).unwrap();
    let k = p.field();
    let d = MatF::scalar(k, 3, k.from_int(-1));
    assert!(!chain.contains(&GroupElem::linear(d)));
    assert!(p.gens.iter().all(|g| chain.contains(g)));
}
