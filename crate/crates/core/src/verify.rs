//! Two-tier verification of table cases.
//!
//! TIER-A checks `|H||K| = |G||H∩K|` on shape orders. TIER-B builds the
//! groups, certifies their orders by Schreier-Sims and measures `|H∩K|`
//! either as a point stabilizer in `H` (orbit route) or by enumerating the
//! smaller factor and sifting through the other (sift route).

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use num_bigint::BigUint;
use num_integer::Integer;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::construct::{gate, ConstructError, KRecipe, Presentation, SubgroupRecipe};
use crate::gf::{Elt, Field};
use crate::linalg::GroupElem;
use crate::perm::{
    coset_orbit_len, enumerate_and_sift, orbit, solvable_residual, stabilizer, ChainOptions, Domain, DomainKind,
    PermError, PointKey, StabChain, DEFAULT_MAX_DOMAIN, DEFAULT_MAX_ENUM,
};
use crate::shapes::{order_of_str, Bindings, ShapeError};
use crate::tables::{ConcreteCase, FactorizationRecord};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum VerifyError {
    #[error("unknown tier {0:?}; expected a or b")]
    UnknownTier(String),
    #[error("unknown scope {0:?}; expected golden or admissible")]
    UnknownScope(String),
    #[error("could not start a worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tier {
    A,
    B,
}

impl FromStr for Tier {
    type Err = VerifyError;
    fn from_str(s: &str) -> Result<Tier, VerifyError> {
        match s {
            "a" | "A" => Ok(Tier::A),
            "b" | "B" => Ok(Tier::B),
            _ => Err(VerifyError::UnknownTier(s.into())),
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tier::A => "A",
            Tier::B => "B",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::Skipped => "SKIPPED",
        })
    }
}

/// Group orders as decimal strings; absent fields were not computed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Orders {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order_g: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order_h: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order_k: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order_int: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orbit_size: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_order_int: Option<String>,
}

impl Orders {
    fn fields(&self) -> [(&'static str, &Option<String>); 6] {
        [
            ("|G|", &self.order_g),
            ("|H|", &self.order_h),
            ("|K|", &self.order_k),
            ("|H∩K|", &self.order_int),
            ("orbit", &self.orbit_size),
            ("residual", &self.residual_order_int),
        ]
    }
}

/// Outcome of one case. PASS means every computed field equals its expected
/// counterpart; FAIL and SKIPPED carry a reason prefixed by its class
/// (`identity`, `mismatch`, `construction`, `scale`, `config`, `shape`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerificationReport {
    pub case: String,
    pub record: String,
    pub tier: Tier,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub bindings: Bindings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route: Option<String>,
    pub computed: Orders,
    pub expected: Orders,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u64>,
}

impl VerificationReport {
    fn new(case: &ConcreteCase, tier: Tier, seed: u64) -> VerificationReport {
        VerificationReport {
            case: case.label(),
            record: case.id.clone(),
            tier,
            status: Status::Pass,
            reason: None,
            bindings: case.bindings.clone(),
            route: None,
            computed: Orders::default(),
            expected: Orders::default(),
            seed,
            elapsed_ms: None,
        }
    }

    fn set(&mut self, outcome: Outcome) {
        let (status, why) = match outcome {
            Outcome::Skip(w) => (Status::Skipped, w),
            Outcome::Fail(w) => (Status::Fail, w),
        };
        self.status = status;
        self.reason = Some(why);
    }

    /// One text line: status, case, the numbers, and the reason if any.
    pub fn text_line(&self) -> String {
        let mut s = format!("{:<7} {} tier={}", self.status.to_string(), self.case, self.tier);
        for ((name, c), (_, e)) in self.computed.fields().iter().zip(self.expected.fields().iter()) {
            match (c, e) {
                (Some(c), Some(e)) if c == e => s += &format!(" {name}={c}"),
                (Some(c), Some(e)) => s += &format!(" {name}={c} (expected {e})"),
                (Some(c), None) => s += &format!(" {name}={c}"),
                (None, Some(e)) => s += &format!(" {name}=? (expected {e})"),
                (None, None) => {}
            }
        }
        if let Some(r) = &self.route {
            s += &format!(" route={r}");
        }
        if let Some(r) = &self.reason {
            s += &format!(" reason=\"{r}\"");
        }
        s
    }
}

enum Outcome {
    Skip(String),
    Fail(String),
}

type Step<T> = Result<T, Outcome>;

/// Size limits. Exceeding one yields SKIPPED(scale), never FAIL.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Caps {
    /// TIER-A: the `|G0|` cap of the binding scan. TIER-B: the largest group
    /// whose chain is built.
    pub max_order: BigUint,
    pub max_domain: u64,
    pub max_enum: u64,
}

impl Caps {
    pub fn for_tier(t: Tier) -> Caps {
        let max_order = match t {
            Tier::A => BigUint::from(10u32).pow(40),
            Tier::B => BigUint::from(10u32).pow(9),
        };
        Caps { max_order, max_domain: DEFAULT_MAX_DOMAIN, max_enum: DEFAULT_MAX_ENUM }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VerifyOptions {
    pub caps: Caps,
    pub seed: u64,
    /// Compare the solvable residual of `H∩K` where the DB states it.
    pub residual: bool,
    /// Record `elapsed_ms`; off by default so reports are byte-reproducible.
    pub timings: bool,
}

impl VerifyOptions {
    pub fn for_tier(t: Tier) -> VerifyOptions {
        VerifyOptions { caps: Caps::for_tier(t), seed: 0, residual: false, timings: false }
    }
}

fn ratio_string(n: &BigUint, d: &BigUint) -> String {
    let (q, r) = n.div_rem(d);
    if r == BigUint::ZERO {
        q.to_string()
    } else {
        let g = n.gcd(d);
        format!("{}/{}", n / &g, d / &g)
    }
}

fn shape_outcome(e: ShapeError) -> Outcome {
    match e {
        ShapeError::UnboundSymbol(s) => Outcome::Skip(format!("config: unbound symbol {s}")),
        e => Outcome::Fail(format!("shape: {e}")),
    }
}

pub fn verify(case: &ConcreteCase, tier: Tier, opts: &VerifyOptions) -> VerificationReport {
    let t0 = Instant::now();
    let mut r = match tier {
        Tier::A => verify_tier_a(case, opts.seed),
        Tier::B => verify_tier_b(case, opts),
    };
    if opts.timings {
        r.elapsed_ms = Some(t0.elapsed().as_millis() as u64);
    }
    r
}

/// PASS iff `|H||K| = |G||H∩K|` on the shape orders. The expected
/// intersection order is `|H||K|/|G|`, printed as a fraction if it is not
/// an integer.
pub fn verify_tier_a(case: &ConcreteCase, seed: u64) -> VerificationReport {
    let mut r = VerificationReport::new(case, Tier::A, seed);
    match case.orders() {
        Err(e) => r.set(shape_outcome(e)),
        Ok([g, h, k, i]) => {
            r.computed = Orders {
                order_g: Some(g.to_string()),
                order_h: Some(h.to_string()),
                order_k: Some(k.to_string()),
                order_int: Some(i.to_string()),
                ..Orders::default()
            };
            let hk = &h * &k;
            r.expected.order_int = Some(ratio_string(&hk, &g));
            if hk != &g * &i {
                r.set(Outcome::Fail(format!("identity: |H||K| = {hk} but |G||H∩K| = {}", &g * &i)));
            }
        }
    }
    r
}

/// Builds `G`, `H`, `K` from the record's recipes and certifies the
/// factorization. Never panics on bad input; see [`VerificationReport`].
pub fn verify_tier_b(case: &ConcreteCase, opts: &VerifyOptions) -> VerificationReport {
    let mut r = VerificationReport::new(case, Tier::B, opts.seed);
    if let Err(o) = tier_b(case, opts, &mut r) {
        r.set(o);
    }
    r
}

fn construct_outcome(e: ConstructError) -> Outcome {
    match e {
        ConstructError::Perm(p) => perm_outcome(p),
        e => Outcome::Fail(format!("construction: {e}")),
    }
}

fn perm_outcome(e: PermError) -> Outcome {
    match e {
        PermError::DomainOverflow { .. } | PermError::CapExceeded { .. } => Outcome::Skip(format!("scale: {e}")),
        e => Outcome::Fail(format!("construction: {e}")),
    }
}

fn build(recipe: &SubgroupRecipe, opts: &VerifyOptions) -> Step<Presentation> {
    recipe.build(opts.seed, opts.caps.max_domain).map_err(construct_outcome)
}

/// Schreier-closed chain, so its order is exact without a target.
fn closed(p: &Presentation, expected: &BigUint, opts: &VerifyOptions) -> Step<StabChain> {
    if *expected > opts.caps.max_order {
        return Err(Outcome::Skip(format!("scale: |{}| = {expected} exceeds max-order", p.name)));
    }
    p.closed_chain(opts.seed, opts.caps.max_domain).map_err(construct_outcome)
}

/// Every generator of `sub` lies in `G`: by sifting when `G`'s chain exists,
/// otherwise by the membership gate of `G`'s classical family.
fn check_subgroup(name: &str, sub: &Presentation, g: &Presentation, g_recipe: &SubgroupRecipe, gchain: Option<&StabChain>) -> Step<()> {
    if sub.field() != g.field() || sub.dim() != g.dim() {
        return Err(Outcome::Fail(format!("construction: {name} and G live in different spaces")));
    }
    match (gchain, g_recipe) {
        (Some(c), _) => {
            if let Some(i) = sub.gens.iter().position(|x| !c.contains(x)) {
                return Err(Outcome::Fail(format!("construction: generator {i} of {name} is not in G")));
            }
            Ok(())
        }
        (None, SubgroupRecipe::Classical { family, .. }) => {
            let probe = Presentation {
                name: format!("{name} in {}", g.name),
                frame: g.frame.clone(),
                gens: sub.gens.clone(),
                expected_order: None,
            };
            gate(&probe, *family).map_err(|e| Outcome::Fail(format!("construction: {e}")))
        }
        (None, _) => Err(Outcome::Skip(format!("scale: membership of {name} in G needs G's chain"))),
    }
}

fn nonsquare(k: &Field) -> Option<Elt> {
    k.elements().find(|&x| x != 0 && !k.is_square(x))
}

fn domain_kind(name: &str, value: Option<&str>, k: &Field) -> Step<DomainKind> {
    let bad = |what: &str| Outcome::Fail(format!("config: {what}"));
    Ok(match name {
        "NonzeroVectors" => DomainKind::NonzeroVectors,
        "SingularNonzeroVectors" => DomainKind::SingularNonzeroVectors,
        "ProjectivePoints" => DomainKind::ProjectivePoints,
        "RefinedAntiflags" => DomainKind::RefinedAntiflags,
        "UnorderedVectorPairs" => DomainKind::UnorderedVectorPairs,
        "NormLevelSet" => {
            let c = match value {
                Some("nonsquare") => nonsquare(k).ok_or_else(|| bad("the field has no nonsquares"))?,
                Some(v) => k.from_int(v.parse::<i64>().map_err(|_| bad(&format!("level {v:?}")))?),
                None => return Err(bad("NormLevelSet needs a level")),
            };
            DomainKind::NormLevelSet(c)
        }
        other => return Err(bad(&format!("unknown domain {other:?}"))),
    })
}

/// The first point of the domain in key order; antiflags use `(e_1, e_1^*)`.
fn base_point(dom: &Domain) -> Step<PointKey> {
    if dom.kind == DomainKind::RefinedAntiflags {
        let mut e = vec![0; dom.n];
        e[0] = 1;
        return dom.antiflag(&e, &e).ok_or_else(|| Outcome::Fail("construction: no base antiflag".into()));
    }
    let total = (dom.field.q() as u64).checked_pow(dom.n as u32).unwrap_or(u64::MAX);
    (1..total)
        .map(|a| (a, 0))
        .find(|&x| dom.contains(x))
        .ok_or_else(|| Outcome::Fail("construction: the domain is empty".into()))
}

fn tier_b(case: &ConcreteCase, opts: &VerifyOptions, r: &mut VerificationReport) -> Step<()> {
    let [eg, eh, ek, ei] = case.orders().map_err(shape_outcome)?;
    r.expected = Orders {
        order_g: Some(eg.to_string()),
        order_h: Some(eh.to_string()),
        order_k: Some(ek.to_string()),
        order_int: Some(ei.to_string()),
        orbit_size: Some(ratio_string(&eg, &ek)),
        residual_order_int: None,
    };
    if opts.residual && case.is_golden() {
        if let Some(s) = case.record.tier_b.as_ref().and_then(|t| t.residual.as_ref()) {
            r.expected.residual_order_int = Some(order_of_str(s, &case.bindings).map_err(shape_outcome)?.to_string());
        }
    }
    let rec = case
        .recipes()
        .map_err(shape_outcome)?
        .ok_or_else(|| Outcome::Skip("config: no constructive recipe for this binding".into()))?;

    let g = build(&rec.g, opts)?;
    let gchain = if eg <= opts.caps.max_order {
        let c = g.checked_chain(opts.seed, opts.caps.max_domain).map_err(construct_outcome)?;
        r.computed.order_g = Some(c.order().to_string());
        Some(c)
    } else {
        None
    };
    let gorder = gchain.as_ref().map_or_else(|| eg.clone(), |c| c.order());

    let h = build(&rec.h, opts)?;
    let hchain = closed(&h, &eh, opts)?;
    r.computed.order_h = Some(hchain.order().to_string());
    check_subgroup("H", &h, &g, &rec.g, gchain.as_ref())?;

    let int_chain = match &rec.k {
        KRecipe::PointStabilizer { .. } | KRecipe::FormOrbit { .. } => {
            let (dom, x) = match &rec.k {
                KRecipe::PointStabilizer { domain, value } => {
                    let kind = domain_kind(domain, value.as_deref(), g.field())?;
                    let dom = Domain::new(kind, g.field(), g.dim(), g.frame.form.clone()).map_err(perm_outcome)?;
                    let x = base_point(&dom)?;
                    (dom, x)
                }
                KRecipe::FormOrbit { sign } => {
                    let form = rec
                        .h
                        .stored_form(*sign)
                        .map_err(construct_outcome)?
                        .ok_or_else(|| Outcome::Fail("config: H stores no form of this sign".into()))?;
                    let qd = form.qdiag.ok_or_else(|| Outcome::Fail("config: stored form is not quadratic".into()))?;
                    let dom = Domain::new(DomainKind::FormOrbit, g.field(), g.dim(), g.frame.form.clone())
                        .map_err(perm_outcome)?;
                    let x = dom.form_point(&qd);
                    (dom, x)
                }
                KRecipe::Group(_) => unreachable!(),
            };
            orbit_route(&dom, x, &g, gchain.as_ref(), &gorder, &hchain, opts, r)?
        }
        KRecipe::Group(kr) => {
            let k = build(kr, opts)?;
            let kchain = closed(&k, &ek, opts)?;
            r.computed.order_k = Some(kchain.order().to_string());
            check_subgroup("K", &k, &g, &rec.g, gchain.as_ref())?;
            sift_route(&hchain, &kchain, &h.gens, opts, r)?
        }
    };

    if opts.residual {
        if let Some(c) = int_chain {
            let res = solvable_residual(&c).map_err(perm_outcome)?;
            r.computed.residual_order_int = Some(res.order().to_string());
        }
    }
    compare(r)
}

/// `K` is the stabilizer in `G` of `x`; `|K| = |G|/|x^G|` and
/// `H∩K = Stab_H(x)`. Returns the intersection chain.
#[allow(clippy::too_many_arguments)]
fn orbit_route(
    dom: &Domain,
    x: PointKey,
    g: &Presentation,
    gchain: Option<&StabChain>,
    gorder: &BigUint,
    hchain: &StabChain,
    opts: &VerifyOptions,
    r: &mut VerificationReport,
) -> Step<Option<StabChain>> {
    let og = orbit(dom, &g.gens, x, opts.caps.max_domain).map_err(perm_outcome)?;
    let (korder, rem) = gorder.div_rem(&BigUint::from(og.len()));
    if rem != BigUint::ZERO {
        return Err(Outcome::Fail(format!("construction: G-orbit of length {} does not divide |G|", og.len())));
    }
    r.computed.order_k = Some(korder.to_string());
    let (oh, st) = stabilizer(hchain, dom, x, opts.seed, opts.caps.max_domain).map_err(perm_outcome)?;
    r.computed.orbit_size = Some(oh.len().to_string());
    r.computed.order_int = Some(st.order().to_string());
    r.route = Some("orbit".into());
    if let Some(gc) = gchain {
        let small = hchain.order().min(korder.clone());
        if small <= BigUint::from(opts.caps.max_enum) {
            let (_, kchain) = stabilizer(gc, dom, x, opts.seed, opts.caps.max_domain).map_err(perm_outcome)?;
            let sifted = intersect_order(hchain, &kchain, opts.caps.max_enum)?;
            if sifted != st.order() {
                return Err(Outcome::Fail(format!(
                    "mismatch: orbit route gives |H∩K| = {} but sift route gives {sifted}",
                    st.order()
                )));
            }
            r.route = Some("orbit+sift".into());
        }
    }
    Ok(Some(st))
}

/// Enumerates the smaller factor and sifts through the larger one.
fn intersect_order(h: &StabChain, k: &StabChain, cap: u64) -> Step<BigUint> {
    let (small, large) = if h.order() <= k.order() { (h, k) } else { (k, h) };
    enumerate_and_sift(small, large, cap).map_err(perm_outcome)
}

/// Longest coset orbit used for the cross-check; its cost is quadratic.
pub const COSET_ORBIT_MAX: u64 = 4096;

/// `K` is given by generators. `|H∩K|` comes from sifting; when the coset orbit is
/// short, its length gives it again.
fn sift_route(
    hchain: &StabChain,
    kchain: &StabChain,
    hgens: &[GroupElem],
    opts: &VerifyOptions,
    r: &mut VerificationReport,
) -> Step<Option<StabChain>> {
    let cap = BigUint::from(opts.caps.max_enum);
    if hchain.order().min(kchain.order()) > cap {
        return Err(Outcome::Skip("scale: both factors exceed max-enum".into()));
    }
    let int = intersect_order(hchain, kchain, opts.caps.max_enum)?;
    r.computed.order_int = Some(int.to_string());
    r.route = Some("sift".into());
    if hchain.order() / &int <= BigUint::from(COSET_ORBIT_MAX) {
        let len = coset_orbit_len(kchain, hgens, COSET_ORBIT_MAX).map_err(perm_outcome)?;
        r.computed.orbit_size = Some(len.to_string());
        let via_orbit = hchain.order() / BigUint::from(len);
        if via_orbit != int {
            return Err(Outcome::Fail(format!(
                "mismatch: sift route gives |H∩K| = {int} but the coset orbit gives {via_orbit}"
            )));
        }
        r.route = Some("sift+orbit".into());
    }
    if !opts.residual {
        return Ok(None);
    }
    let (small, large) = if hchain.order() <= kchain.order() { (hchain, kchain) } else { (kchain, hchain) };
    let mut c = chain_of(small.field(), small.dim(), &[], opts.seed, opts.caps.max_domain).map_err(perm_outcome)?;
    let mut err = None;
    small
        .for_each_element(opts.caps.max_enum, |x| {
            if err.is_none() && large.contains(x) && !c.contains(x) {
                if let Err(e) = c.add_generator(x) {
                    err = Some(e);
                }
            }
        })
        .map_err(perm_outcome)?;
    if let Some(e) = err {
        return Err(perm_outcome(e));
    }
    Ok(Some(c))
}

/// The first field whose computed value differs from the expected one.
fn compare(r: &VerificationReport) -> Step<()> {
    for ((name, c), (_, e)) in r.computed.fields().iter().zip(r.expected.fields().iter()) {
        if let (Some(c), Some(e)) = (c, e) {
            if c != e {
                return Err(Outcome::Fail(format!("mismatch: {name} computed {c}, expected {e}")));
            }
        }
    }
    Ok(())
}

/// Which bindings a TIER-B sweep visits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    /// The curated golden bindings stored with each recipe.
    Golden,
    /// Every admissible binding with `|G0| <= max-order` that has a recipe.
    Admissible,
}

impl FromStr for Scope {
    type Err = VerifyError;
    fn from_str(s: &str) -> Result<Scope, VerifyError> {
        match s {
            "golden" => Ok(Scope::Golden),
            "admissible" => Ok(Scope::Admissible),
            _ => Err(VerifyError::UnknownScope(s.into())),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Filter {
    pub table: Option<u32>,
    /// `"2"` or `"2.1"`.
    pub row: Option<String>,
}

impl Filter {
    pub fn matches(&self, r: &FactorizationRecord) -> bool {
        self.table.is_none_or(|t| r.table == t) && self.row.as_ref().is_none_or(|f| r.matches_row(f))
    }
}

/// A unit of sweep work: a case, or a golden binding that failed to resolve.
#[derive(Debug, Clone)]
pub enum Work {
    Case(ConcreteCase),
    Invalid { record: String, bindings: Bindings, reason: String },
}

/// Cases of a sweep in deterministic order: records in DB order, bindings
/// in the order of [`FactorizationRecord::admissible_bindings`] or of the
/// golden list.
pub fn plan(records: &[FactorizationRecord], filter: &Filter, tier: Tier, scope: Scope, caps: &Caps) -> Vec<Work> {
    let mut out = Vec::new();
    for r in records.iter().filter(|r| filter.matches(r)) {
        match (tier, scope, &r.tier_b) {
            (Tier::A, _, _) => out.extend(r.admissible_bindings(&caps.max_order).into_iter().map(Work::Case)),
            (Tier::B, _, None) => {}
            (Tier::B, Scope::Golden, Some(t)) => {
                for b in &t.golden {
                    out.push(match r.case(b) {
                        Ok(Some(c)) => Work::Case(c),
                        Ok(None) => Work::Invalid {
                            record: r.id.clone(),
                            bindings: b.clone(),
                            reason: "config: golden binding violates the record's constraints".into(),
                        },
                        Err(e) => Work::Invalid { record: r.id.clone(), bindings: b.clone(), reason: format!("config: {e}") },
                    });
                }
            }
            (Tier::B, Scope::Admissible, Some(_)) => out.extend(
                r.admissible_bindings(&caps.max_order)
                    .into_iter()
                    .filter(|c| matches!(c.recipes(), Ok(Some(_))))
                    .map(Work::Case),
            ),
        }
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub tables: usize,
    pub cases: usize,
    pub pass: usize,
    pub fail: usize,
    pub skipped: usize,
}

impl Summary {
    pub fn of(reports: &[VerificationReport], tables: usize) -> Summary {
        let count = |s: Status| reports.iter().filter(|r| r.status == s).count();
        Summary {
            tables,
            cases: reports.len(),
            pass: count(Status::Pass),
            fail: count(Status::Fail),
            skipped: count(Status::Skipped),
        }
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "tables={} cases={} pass={} fail={} skipped={}",
            self.tables, self.cases, self.pass, self.fail, self.skipped
        )
    }
}

fn run_work(w: &Work, tier: Tier, opts: &VerifyOptions) -> VerificationReport {
    match w {
        Work::Case(c) => verify(c, tier, opts),
        Work::Invalid { record, bindings, reason } => VerificationReport {
            case: format!("{record}[{}]", bindings.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(",")),
            record: record.clone(),
            tier,
            status: Status::Skipped,
            reason: Some(reason.clone()),
            bindings: bindings.clone(),
            route: None,
            computed: Orders::default(),
            expected: Orders::default(),
            seed: opts.seed,
            elapsed_ms: None,
        },
    }
}

/// Verifies every planned case on up to `jobs` workers (0 means one per
/// core). Report order is the plan order regardless of scheduling.
pub fn sweep(
    records: &[FactorizationRecord],
    filter: &Filter,
    tier: Tier,
    scope: Scope,
    opts: &VerifyOptions,
    jobs: usize,
) -> Result<(Vec<VerificationReport>, Summary), VerifyError> {
    let work = plan(records, filter, tier, scope, &opts.caps);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| VerifyError::Pool(e.to_string()))?;
    let reports: Vec<VerificationReport> = pool.install(|| work.par_iter().map(|w| run_work(w, tier, opts)).collect());
    let tables: BTreeSet<u32> = records
        .iter()
        .filter(|r| reports.iter().any(|x| x.record == r.id))
        .map(|r| r.table)
        .collect();
    let summary = Summary::of(&reports, tables.len());
    Ok((reports, summary))
}

/// Certified chain of an arbitrary generator list, for ad hoc triples.
pub fn chain_of(field: &std::sync::Arc<Field>, n: usize, gens: &[GroupElem], seed: u64, max_orbit: u64) -> Result<StabChain, PermError> {
    let opts = ChainOptions { seed, target: None, max_orbit, stall: 40 };
    StabChain::build(field, n, gens, &opts)
}

/// `|G||H∩K| = |H||K|` with `|H∩K|` by sifting; `None` if `H∩K` is too big
/// to enumerate.
pub fn factorizes(g: &StabChain, h: &StabChain, k: &StabChain, max_enum: u64) -> Result<(BigUint, bool), PermError> {
    let (small, large) = if h.order() <= k.order() { (h, k) } else { (k, h) };
    let int = enumerate_and_sift(small, large, max_enum)?;
    let holds = g.order() * &int == h.order() * k.order();
    Ok((int, holds))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tables::load_db;

    fn case(id: &str, b: &[(&str, i64)]) -> ConcreteCase {
        let db = load_db().unwrap();
        let r = db.iter().find(|r| r.id == id).unwrap();
        let b: Bindings = b.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        r.case(&b).unwrap().unwrap()
    }

    #[test]
    fn tier_a_unitary_row_two() {
        let r = verify_tier_a(&case("T2R2", &[("m", 2), ("q", 2)]), 0);
        assert_eq!(r.status, Status::Pass);
        assert_eq!(r.computed.order_int.as_deref(), Some("6"));
    }

    #[test]
    fn tier_a_mutation_fails() {
        let mut c = case("T1R1.1", &[("a", 2), ("b", 2), ("q", 2)]);
        c.record.shapes.int = "[5]".into();
        let r = verify_tier_a(&c, 0);
        assert_eq!(r.status, Status::Fail);
        assert!(r.reason.unwrap().starts_with("identity"));
    }

    #[test]
    fn tier_b_sp_in_su() {
        let r = verify_tier_b(&case("T2R2", &[("m", 2), ("q", 2)]), &VerifyOptions::for_tier(Tier::B));
        assert_eq!(r.status, Status::Pass, "{}", r.text_line());
        assert_eq!(r.computed.orbit_size.as_deref(), Some("120"));
        assert_eq!(r.route.as_deref(), Some("orbit+sift"));
    }

    #[test]
    fn missing_recipe_is_skipped() {
        let r = verify_tier_b(&case("T2R7.1", &[]), &VerifyOptions::for_tier(Tier::B));
        assert_eq!(r.status, Status::Skipped);
        assert!(r.reason.unwrap().starts_with("config"));
    }

    #[test]
    fn ratio_strings() {
        assert_eq!(ratio_string(&BigUint::from(12u8), &BigUint::from(4u8)), "3");
        assert_eq!(ratio_string(&BigUint::from(6u8), &BigUint::from(4u8)), "3/2");
    }
}
