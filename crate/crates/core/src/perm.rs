//! Group actions on enumerated geometric domains and stabilizer chains.
//!
//! Chains are built over the nonzero vectors of the natural module, which
//! every matrix group acts on faithfully. Base points are vectors and the
//! transversals hold the semilinear elements themselves, so membership and
//! orders never pass through permutation arrays. Geometric domains are only
//! used for orbits and point stabilizers.

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::gf::{Elt, Field};
use crate::linalg::{decode_vector, encode_vector, FormSpec, GroupElem, LinalgError, MatF};

/// Default cap on enumerated domains and basic orbits.
pub const DEFAULT_MAX_DOMAIN: u64 = 1 << 20;
/// Default cap on `|H|` for element enumeration.
pub const DEFAULT_MAX_ENUM: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PermError {
    #[error("domain or orbit exceeds the cap of {cap} points")]
    DomainOverflow { cap: u64 },
    #[error("image point lies outside the domain (the domain is not invariant)")]
    PointNotInDomain,
    #[error("{what} of size {size} exceeds the cap {cap}")]
    CapExceeded { what: &'static str, size: String, cap: String },
    #[error("verification failed: {0}")]
    VerificationFailed(String),
    #[error("action not supported: {0}")]
    UnsupportedAction(&'static str),
    #[error("elements live over different fields or dimensions")]
    Mismatch,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Canonical key of a domain point. Vectors use their base-`q` code in the
/// first slot; antiflags and pairs use both slots.
pub type PointKey = (u64, u64);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DomainKind {
    NonzeroVectors,
    /// Vectors with `Q(v) = c` (quadratic) or `β(v,v) = c` (otherwise).
    NormLevelSet(Elt),
    SingularNonzeroVectors,
    ProjectivePoints,
    /// Pairs `(v, φ)` with `φ(v) = 1`; the hyperplane is `ker φ`.
    RefinedAntiflags,
    UnorderedVectorPairs,
    /// Quadratic forms with the frame's polar form, keyed by `Q(e_i)`.
    FormOrbit,
}

/// A geometric set acted on by semilinear elements of a fixed space.
#[derive(Debug, Clone)]
pub struct Domain {
    pub kind: DomainKind,
    pub field: Arc<Field>,
    pub n: usize,
    pub form: Option<FormSpec>,
}

/// An element with the inverse data that some actions need, computed once.
#[derive(Debug, Clone)]
pub struct Actor {
    pub g: GroupElem,
    ainv: Option<MatF>,
    ginv: Option<GroupElem>,
}

impl Actor {
    pub fn new(g: &GroupElem, dom: &Domain) -> Actor {
        let (ainv, ginv) = match dom.kind {
            DomainKind::RefinedAntiflags => (Some(g.mat.inverse().expect("invertible")), None),
            DomainKind::FormOrbit => (None, Some(g.inverse())),
            _ => (None, None),
        };
        Actor { g: g.clone(), ainv, ginv }
    }
}

impl Domain {
    pub fn new(kind: DomainKind, field: &Arc<Field>, n: usize, form: Option<FormSpec>) -> Result<Domain, PermError> {
        let needs_form = matches!(
            kind,
            DomainKind::NormLevelSet(_) | DomainKind::SingularNonzeroVectors | DomainKind::FormOrbit
        );
        if needs_form && form.is_none() {
            return Err(PermError::UnsupportedAction("this domain needs a form"));
        }
        if let Some(f) = &form {
            if f.dim() != n || f.field() != field {
                return Err(PermError::Mismatch);
            }
        }
        Ok(Domain { kind, field: field.clone(), n, form })
    }

    pub fn vectors(field: &Arc<Field>, n: usize) -> Domain {
        Domain { kind: DomainKind::NonzeroVectors, field: field.clone(), n, form: None }
    }

    fn q(&self) -> u32 {
        self.field.q()
    }

    pub fn vec_key(&self, v: &[Elt]) -> u64 {
        encode_vector(self.q(), v)
    }

    pub fn key_vec(&self, code: u64) -> Vec<Elt> {
        decode_vector(self.q(), self.n, code)
    }

    fn normalize_projective(&self, v: &[Elt]) -> Vec<Elt> {
        let k = &self.field;
        match v.iter().find(|&&x| x != 0) {
            Some(&lead) => {
                let inv = k.inv(lead).expect("nonzero");
                v.iter().map(|&x| k.mul(x, inv)).collect()
            }
            None => v.to_vec(),
        }
    }

    /// Key for a vector point, normalized for projective points.
    pub fn point_of_vector(&self, v: &[Elt]) -> PointKey {
        match self.kind {
            DomainKind::ProjectivePoints => (self.vec_key(&self.normalize_projective(v)), 0),
            _ => (self.vec_key(v), 0),
        }
    }

    /// Key of a refined antiflag; `phi` is rescaled so that `φ(v) = 1`.
    pub fn antiflag(&self, v: &[Elt], phi: &[Elt]) -> Option<PointKey> {
        let k = &self.field;
        let s = v.iter().zip(phi).fold(0, |acc, (&a, &b)| k.add(acc, k.mul(a, b)));
        let inv = k.inv(s).ok()?;
        let phi: Vec<Elt> = phi.iter().map(|&x| k.mul(x, inv)).collect();
        Some((self.vec_key(v), self.vec_key(&phi)))
    }

    pub fn pair(&self, u: &[Elt], v: &[Elt]) -> PointKey {
        let (a, b) = (self.vec_key(u), self.vec_key(v));
        (a.min(b), a.max(b))
    }

    /// Key of the quadratic form with `Q(e_i) = qdiag[i]`.
    pub fn form_point(&self, qdiag: &[Elt]) -> PointKey {
        (self.vec_key(qdiag), 0)
    }

    pub fn contains(&self, x: PointKey) -> bool {
        let total = (self.q() as u64).checked_pow(self.n as u32).unwrap_or(u64::MAX);
        if x.0 >= total {
            return false;
        }
        let v = self.key_vec(x.0);
        let nonzero = x.0 != 0;
        match &self.kind {
            DomainKind::NonzeroVectors => nonzero && x.1 == 0,
            DomainKind::NormLevelSet(c) => nonzero && x.1 == 0 && self.form.as_ref().unwrap().q_eval(&v) == *c,
            DomainKind::SingularNonzeroVectors => {
                nonzero && x.1 == 0 && self.form.as_ref().unwrap().q_eval(&v) == 0
            }
            DomainKind::ProjectivePoints => nonzero && x.1 == 0 && self.normalize_projective(&v) == v,
            DomainKind::RefinedAntiflags => {
                if x.1 >= total {
                    return false;
                }
                let phi = self.key_vec(x.1);
                let k = &self.field;
                v.iter().zip(&phi).fold(0, |acc, (&a, &b)| k.add(acc, k.mul(a, b))) == 1
            }
            DomainKind::UnorderedVectorPairs => nonzero && x.0 < x.1 && x.1 < total,
            DomainKind::FormOrbit => x.1 == 0,
        }
    }

    fn act_vec(&self, g: &GroupElem, code: u64) -> u64 {
        self.vec_key(&g.apply(&self.key_vec(code)))
    }

    /// Image of `x` under the right action of `a.g`.
    pub fn act(&self, a: &Actor, x: PointKey) -> Result<PointKey, PermError> {
        let g = &a.g;
        Ok(match &self.kind {
            DomainKind::NonzeroVectors | DomainKind::NormLevelSet(_) | DomainKind::SingularNonzeroVectors => {
                (self.act_vec(g, x.0), 0)
            }
            DomainKind::ProjectivePoints => {
                let w = g.apply(&self.key_vec(x.0));
                (self.vec_key(&self.normalize_projective(&w)), 0)
            }
            DomainKind::UnorderedVectorPairs => {
                let (u, v) = (self.act_vec(g, x.0), self.act_vec(g, x.1));
                (u.min(v), u.max(v))
            }
            DomainKind::RefinedAntiflags => {
                // ker φ maps to ker φ' with φ' = A^{-1} φ^{σ^j}; φ'(vg) = φ(v)^{σ^j} = 1.
                let ainv = a.ainv.as_ref().ok_or(PermError::UnsupportedAction("actor built for another domain"))?;
                let k = &self.field;
                let phi: Vec<Elt> = self.key_vec(x.1).iter().map(|&c| k.frobenius(c, g.frob)).collect();
                let mut out = vec![0; self.n];
                for (i, o) in out.iter_mut().enumerate() {
                    *o = ainv.row(i).iter().zip(&phi).fold(0, |acc, (&a, &b)| k.add(acc, k.mul(a, b)));
                }
                (self.act_vec(g, x.0), self.vec_key(&out))
            }
            DomainKind::FormOrbit => {
                // Q^g(v) = Q(v g^{-1}); valid because g preserves the polar form.
                if g.frob != 0 {
                    return Err(PermError::UnsupportedAction("semilinear elements on forms"));
                }
                let ginv = a.ginv.as_ref().ok_or(PermError::UnsupportedAction("actor built for another domain"))?;
                let base = self.form.as_ref().unwrap();
                let q = FormSpec::quadratic(self.key_vec(x.0), base.gram.clone());
                let qd: Vec<Elt> = (0..self.n).map(|i| q.q_eval(ginv.mat.row(i))).collect();
                (self.vec_key(&qd), 0)
            }
        })
    }

    /// All points of the domain, in increasing key order.
    pub fn enumerate(&self, cap: u64) -> Result<Vec<PointKey>, PermError> {
        let total = (self.q() as u64).checked_pow(self.n as u32).ok_or(PermError::DomainOverflow { cap })?;
        let mut out = Vec::new();
        let push = |out: &mut Vec<PointKey>, x: PointKey| -> Result<(), PermError> {
            out.push(x);
            if out.len() as u64 > cap {
                return Err(PermError::DomainOverflow { cap });
            }
            Ok(())
        };
        match &self.kind {
            DomainKind::RefinedAntiflags | DomainKind::UnorderedVectorPairs => {
                if total.saturating_mul(total) > cap.saturating_mul(64) {
                    return Err(PermError::DomainOverflow { cap });
                }
                for a in 1..total {
                    for b in 0..total {
                        if self.contains((a, b)) {
                            push(&mut out, (a, b))?;
                        }
                    }
                }
            }
            DomainKind::FormOrbit => {
                return Err(PermError::UnsupportedAction("form orbits are enumerated as orbits"));
            }
            _ => {
                if total > cap.saturating_mul(64) {
                    return Err(PermError::DomainOverflow { cap });
                }
                for a in 1..total {
                    if self.contains((a, 0)) {
                        push(&mut out, (a, 0))?;
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Orbit with a Schreier tree: `parent[i] = (j, s)` means `points[i] = points[j]^{gens[s]}`.
#[derive(Debug, Clone)]
pub struct Orbit {
    pub points: Vec<PointKey>,
    index: HashMap<PointKey, u32>,
    parent: Vec<(u32, u32)>,
}

impl Orbit {
    pub fn len(&self) -> usize {
        self.points.len()
    }
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
    pub fn position(&self, x: &PointKey) -> Option<usize> {
        self.index.get(x).map(|&i| i as usize)
    }
    pub fn contains(&self, x: &PointKey) -> bool {
        self.index.contains_key(x)
    }

    /// Element of `<gens>` mapping the root to `points[i]`.
    pub fn transversal(&self, i: usize, gens: &[GroupElem], field: &Arc<Field>, n: usize) -> GroupElem {
        let mut path = Vec::new();
        let mut j = i;
        while j != 0 {
            let (p, s) = self.parent[j];
            path.push(s as usize);
            j = p as usize;
        }
        path.iter().rev().fold(GroupElem::identity(field, n), |acc, &s| acc.compose(&gens[s]))
    }
}

/// Breadth-first orbit of `x` under `gens`.
pub fn orbit(dom: &Domain, gens: &[GroupElem], x: PointKey, cap: u64) -> Result<Orbit, PermError> {
    if !dom.contains(x) {
        return Err(PermError::PointNotInDomain);
    }
    let actors: Vec<Actor> = gens.iter().map(|g| Actor::new(g, dom)).collect();
    let mut o = Orbit { points: vec![x], index: HashMap::from([(x, 0)]), parent: vec![(u32::MAX, 0)] };
    let mut i = 0;
    while i < o.points.len() {
        let y = o.points[i];
        for (s, a) in actors.iter().enumerate() {
            let z = dom.act(a, y)?;
            if !o.index.contains_key(&z) {
                if !dom.contains(z) {
                    return Err(PermError::PointNotInDomain);
                }
                if o.points.len() as u64 >= cap {
                    return Err(PermError::DomainOverflow { cap });
                }
                o.index.insert(z, o.points.len() as u32);
                o.points.push(z);
                o.parent.push((i as u32, s as u32));
            }
        }
        i += 1;
    }
    Ok(o)
}

#[derive(Debug, Clone)]
struct Level {
    point: u64,
    gens: Vec<GroupElem>,
    orbit: Vec<u64>,
    index: HashMap<u64, u32>,
    trans: Vec<GroupElem>,
    trans_inv: Vec<GroupElem>,
    /// `checked[s]`: orbit prefix whose Schreier generators with `gens[s]` are known to sift.
    checked: Vec<usize>,
}

/// How a chain's order was certified.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Certification {
    /// All Schreier generators sift; order exact unconditionally.
    SchreierClosure,
    /// Lower bound met a caller-supplied upper bound.
    TargetOrder,
}

#[derive(Debug, Clone)]
pub struct ChainOptions {
    pub seed: u64,
    /// A proven upper bound for the group order; reaching it certifies the chain.
    pub target: Option<BigUint>,
    pub max_orbit: u64,
    /// Consecutive useless random sifts before falling back to closure.
    pub stall: usize,
}

impl Default for ChainOptions {
    fn default() -> Self {
        ChainOptions { seed: 0, target: None, max_orbit: DEFAULT_MAX_DOMAIN, stall: 40 }
    }
}

impl ChainOptions {
    pub fn seeded(seed: u64) -> Self {
        ChainOptions { seed, ..Self::default() }
    }
    pub fn with_target(mut self, t: BigUint) -> Self {
        self.target = Some(t);
        self
    }
}

/// Base and strong generating set of a group of semilinear maps.
#[derive(Debug, Clone)]
pub struct StabChain {
    field: Arc<Field>,
    n: usize,
    gens: Vec<GroupElem>,
    levels: Vec<Level>,
    max_orbit: u64,
    certified: Certification,
}

fn identity_like(g: &GroupElem) -> GroupElem {
    GroupElem::identity(g.field(), g.dim())
}

/// Product replacement generator of random elements.
pub struct RandomElements {
    state: Vec<GroupElem>,
    acc: GroupElem,
    rng: ChaCha8Rng,
}

impl RandomElements {
    pub fn new(gens: &[GroupElem], field: &Arc<Field>, n: usize, seed: u64) -> RandomElements {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let id = GroupElem::identity(field, n);
        let mut state: Vec<GroupElem> = gens.to_vec();
        if state.is_empty() {
            state.push(id.clone());
        }
        let base = state.clone();
        while state.len() < 10.max(2 * base.len()) {
            state.push(base[state.len() % base.len()].clone());
        }
        let mut r = RandomElements { state, acc: id, rng: ChaCha8Rng::seed_from_u64(rng.gen()) };
        for _ in 0..60 {
            r.next_elem();
        }
        r
    }

    pub fn next_elem(&mut self) -> GroupElem {
        let len = self.state.len();
        let i = self.rng.gen_range(0..len);
        let mut j = self.rng.gen_range(0..len - 1);
        if j >= i {
            j += 1;
        }
        let x = if self.rng.gen_bool(0.5) { self.state[j].clone() } else { self.state[j].inverse() };
        self.state[i] = if self.rng.gen_bool(0.5) { self.state[i].compose(&x) } else { x.compose(&self.state[i]) };
        self.acc = self.acc.compose(&self.state[i]);
        self.acc.clone()
    }
}

impl StabChain {
    pub fn trivial(field: &Arc<Field>, n: usize) -> StabChain {
        StabChain {
            field: field.clone(),
            n,
            gens: Vec::new(),
            levels: Vec::new(),
            max_orbit: DEFAULT_MAX_DOMAIN,
            certified: Certification::SchreierClosure,
        }
    }

    /// Chain for `<gens>`; randomized when a target is given, closed otherwise.
    pub fn build(field: &Arc<Field>, n: usize, gens: &[GroupElem], opts: &ChainOptions) -> Result<StabChain, PermError> {
        for g in gens {
            if g.dim() != n || g.field() != field {
                return Err(PermError::Mismatch);
            }
        }
        let mut c = StabChain::trivial(field, n);
        c.max_orbit = opts.max_orbit;
        for g in gens {
            if g.is_identity() {
                continue;
            }
            c.gens.push(g.clone());
            let (r, j) = c.sift(g);
            if !r.is_identity() {
                c.add_strong(r, 0, j)?;
            }
        }
        if let Some(t) = &opts.target {
            c.random_fill(opts.seed, t, opts.stall)?;
            if c.order() >= *t {
                c.certified = Certification::TargetOrder;
                return Ok(c);
            }
        }
        c.complete()?;
        c.certified = Certification::SchreierClosure;
        Ok(c)
    }

    pub fn field(&self) -> &Arc<Field> {
        &self.field
    }
    pub fn dim(&self) -> usize {
        self.n
    }
    pub fn generators(&self) -> &[GroupElem] {
        &self.gens
    }
    pub fn certification(&self) -> Certification {
        self.certified
    }

    pub fn order(&self) -> BigUint {
        self.levels.iter().fold(BigUint::one(), |acc, l| acc * l.orbit.len())
    }

    pub fn orbit_lengths(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.orbit.len()).collect()
    }

    pub fn base(&self) -> Vec<Vec<Elt>> {
        self.levels.iter().map(|l| decode_vector(self.field.q(), self.n, l.point)).collect()
    }

    pub fn strong_generators(&self) -> Vec<GroupElem> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for l in &self.levels {
            for g in &l.gens {
                if seen.insert(g.clone()) {
                    out.push(g.clone());
                }
            }
        }
        out
    }

    fn img(&self, g: &GroupElem, code: u64) -> u64 {
        let q = self.field.q();
        encode_vector(q, &g.apply(&decode_vector(q, self.n, code)))
    }

    /// Strips `g` through the chain; returns the residue and the level it stopped at.
    pub fn sift(&self, g: &GroupElem) -> (GroupElem, usize) {
        let mut h = g.clone();
        for (i, l) in self.levels.iter().enumerate() {
            let x = self.img(&h, l.point);
            match l.index.get(&x) {
                Some(&t) => h = h.compose(&l.trans_inv[t as usize]),
                None => return (h, i),
            }
        }
        (h, self.levels.len())
    }

    pub fn contains(&self, g: &GroupElem) -> bool {
        if g.dim() != self.n || g.field() != &self.field {
            return false;
        }
        self.sift(g).0.is_identity()
    }

    /// First candidate base point moved by `g`: basis vectors, then `ω e_1`.
    fn moved_point(&self, g: &GroupElem) -> u64 {
        let q = self.field.q();
        for i in 0..self.n {
            let mut v = vec![0; self.n];
            v[i] = 1;
            if g.apply(&v) != v {
                return encode_vector(q, &v);
            }
        }
        let mut v = vec![0; self.n];
        v[0] = self.field.primitive();
        encode_vector(q, &v)
    }

    fn extend_orbit(&mut self, li: usize) -> Result<(), PermError> {
        let q = self.field.q();
        let n = self.n;
        let cap = self.max_orbit;
        let l = &mut self.levels[li];
        let mut i = 0;
        // Rescan every point against every generator; new points are appended.
        while i < l.orbit.len() {
            let x = decode_vector(q, n, l.orbit[i]);
            for s in 0..l.gens.len() {
                let y = encode_vector(q, &l.gens[s].apply(&x));
                if !l.index.contains_key(&y) {
                    if l.orbit.len() as u64 >= cap {
                        return Err(PermError::DomainOverflow { cap });
                    }
                    let u = l.trans[i].compose(&l.gens[s]);
                    l.index.insert(y, l.orbit.len() as u32);
                    l.orbit.push(y);
                    l.trans_inv.push(u.inverse());
                    l.trans.push(u);
                }
            }
            i += 1;
        }
        Ok(())
    }

    /// Adds `r` as a strong generator on levels `from..=to`, creating level `to` if needed.
    fn add_strong(&mut self, r: GroupElem, from: usize, to: usize) -> Result<(), PermError> {
        if to == self.levels.len() {
            let point = self.moved_point(&r);
            let id = identity_like(&r);
            self.levels.push(Level {
                point,
                gens: Vec::new(),
                orbit: vec![point],
                index: HashMap::from([(point, 0)]),
                trans: vec![id.clone()],
                trans_inv: vec![id],
                checked: Vec::new(),
            });
        }
        for li in from.min(to)..=to {
            self.levels[li].gens.push(r.clone());
            self.levels[li].checked.push(0);
            self.extend_orbit(li)?;
        }
        Ok(())
    }

    /// Adds a generator to a closed chain and restores closure.
    pub fn add_generator(&mut self, g: &GroupElem) -> Result<bool, PermError> {
        let (r, j) = self.sift(g);
        self.gens.push(g.clone());
        if r.is_identity() {
            return Ok(false);
        }
        self.add_strong(r, 0, j)?;
        self.complete()?;
        self.certified = Certification::SchreierClosure;
        Ok(true)
    }

    fn random_fill(&mut self, seed: u64, target: &BigUint, stall: usize) -> Result<(), PermError> {
        if self.gens.is_empty() {
            return Ok(());
        }
        let mut pr = RandomElements::new(&self.gens, &self.field, self.n, seed);
        let mut useless = 0;
        while self.order() < *target && useless < stall {
            let g = pr.next_elem();
            let (r, j) = self.sift(&g);
            if r.is_identity() {
                useless += 1;
            } else {
                useless = 0;
                self.add_strong(r, 1, j)?;
            }
        }
        Ok(())
    }

    /// Deterministic Schreier closure, bottom level first.
    fn complete(&mut self) -> Result<(), PermError> {
        let mut i = self.levels.len() as isize - 1;
        while i >= 0 {
            match self.next_failure(i as usize) {
                Some((r, j)) => {
                    self.add_strong(r, i as usize + 1, j)?;
                    i = j as isize;
                }
                None => i -= 1,
            }
        }
        Ok(())
    }

    /// First Schreier generator at level `li` that does not sift through the levels below.
    fn next_failure(&mut self, li: usize) -> Option<(GroupElem, usize)> {
        let ngens = self.levels[li].gens.len();
        for s in 0..ngens {
            while self.levels[li].checked[s] < self.levels[li].orbit.len() {
                let xi = self.levels[li].checked[s];
                self.levels[li].checked[s] += 1;
                let l = &self.levels[li];
                let u = l.trans[xi].compose(&l.gens[s]);
                let y = self.img(&u, l.point);
                let yi = l.index[&y] as usize;
                let sch = u.compose(&l.trans_inv[yi]);
                if sch.is_identity() {
                    continue;
                }
                let mut h = sch;
                let mut stop = self.levels.len();
                for (k, lk) in self.levels.iter().enumerate().skip(li + 1) {
                    let x = self.img(&h, lk.point);
                    match lk.index.get(&x) {
                        Some(&t) => h = h.compose(&lk.trans_inv[t as usize]),
                        None => {
                            stop = k;
                            break;
                        }
                    }
                }
                if !h.is_identity() {
                    // Undo the pair so it is rechecked against the enlarged chain.
                    self.levels[li].checked[s] -= 1;
                    return Some((h, stop));
                }
            }
        }
        None
    }

    /// Uniformly random element via a random transversal product.
    pub fn random_element<R: Rng>(&self, rng: &mut R) -> GroupElem {
        let mut g = GroupElem::identity(&self.field, self.n);
        for l in self.levels.iter().rev() {
            let t = rng.gen_range(0..l.trans.len());
            g = g.compose(&l.trans[t]);
        }
        g
    }

    /// Calls `f` on every element; each element is `u_{L-1} ... u_1 u_0`.
    pub fn for_each_element<F: FnMut(&GroupElem)>(&self, cap: u64, mut f: F) -> Result<(), PermError> {
        let ord = self.order();
        if ord > BigUint::from(cap) {
            return Err(PermError::CapExceeded { what: "group", size: ord.to_string(), cap: cap.to_string() });
        }
        fn rec<F: FnMut(&GroupElem)>(levels: &[Level], prefix: &GroupElem, f: &mut F) {
            match levels.split_last() {
                None => f(prefix),
                Some((last, rest)) => {
                    for t in &last.trans {
                        rec(rest, &prefix.compose(t), f);
                    }
                }
            }
        }
        rec(&self.levels, &GroupElem::identity(&self.field, self.n), &mut f);
        Ok(())
    }

    pub fn elements(&self, cap: u64) -> Result<Vec<GroupElem>, PermError> {
        let mut out = Vec::new();
        self.for_each_element(cap, |g| out.push(g.clone()))?;
        Ok(out)
    }
}

/// `|H ∩ K|` by enumerating `H` and sifting each element through `K`.
pub fn enumerate_and_sift(h: &StabChain, k: &StabChain, cap: u64) -> Result<BigUint, PermError> {
    if h.field() != k.field() || h.dim() != k.dim() {
        return Err(PermError::Mismatch);
    }
    let mut count = 0u64;
    h.for_each_element(cap, |g| {
        if k.contains(g) {
            count += 1;
        }
    })?;
    Ok(BigUint::from(count))
}

/// Stabilizer of `x` in the group of `chain`, with the orbit of `x`.
///
/// Random Schreier generators are added until the chain order reaches
/// `|G| / |x^G|`, which is the exact stabilizer order.
pub fn stabilizer(
    chain: &StabChain,
    dom: &Domain,
    x: PointKey,
    seed: u64,
    cap: u64,
) -> Result<(Orbit, StabChain), PermError> {
    let gens = chain.generators().to_vec();
    let o = orbit(dom, &gens, x, cap)?;
    let target = chain.order() / BigUint::from(o.len());
    stabilizer_with_order(&gens, dom, &o, target, seed, chain.max_orbit)
}

/// As [`stabilizer`], given the orbit and the known stabilizer order.
pub fn stabilizer_with_order(
    gens: &[GroupElem],
    dom: &Domain,
    o: &Orbit,
    target: BigUint,
    seed: u64,
    max_orbit: u64,
) -> Result<(Orbit, StabChain), PermError> {
    let (field, n) = (dom.field.clone(), dom.n);
    let actors: Vec<Actor> = gens.iter().map(|g| Actor::new(g, dom)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_57ab);
    let mut sgens: Vec<GroupElem> = Vec::new();
    let mut chain = StabChain::trivial(&field, n);
    let mut round = 0u64;
    while chain.order() < target {
        round += 1;
        if round > 400 {
            return Err(PermError::VerificationFailed(format!(
                "stabilizer stalled at {} of {}",
                chain.order(),
                target
            )));
        }
        let mut grew = false;
        for _ in 0..4 {
            if gens.is_empty() {
                break;
            }
            let yi = rng.gen_range(0..o.len());
            let s = rng.gen_range(0..gens.len());
            let z = dom.act(&actors[s], o.points[yi])?;
            let zi = o.position(&z).ok_or(PermError::PointNotInDomain)?;
            let u = o.transversal(yi, gens, &field, n).compose(&gens[s]);
            let sch = u.compose(&o.transversal(zi, gens, &field, n).inverse());
            if !chain.sift(&sch).0.is_identity() {
                sgens.push(sch);
                grew = true;
            }
        }
        if grew {
            let opts = ChainOptions {
                seed: rng.gen(),
                target: Some(target.clone()),
                max_orbit,
                stall: 40,
            };
            chain = StabChain::build(&field, n, &sgens, &opts)?;
        }
    }
    if chain.order() != target {
        return Err(PermError::VerificationFailed(format!("stabilizer order {} exceeds {}", chain.order(), target)));
    }
    chain.certified = Certification::TargetOrder;
    Ok((o.clone(), chain))
}

/// Closure of `ngens` under conjugation by `ggens`.
pub fn normal_closure(
    field: &Arc<Field>,
    n: usize,
    ggens: &[GroupElem],
    ngens: &[GroupElem],
    max_orbit: u64,
) -> Result<StabChain, PermError> {
    let mut chain = StabChain::trivial(field, n);
    chain.max_orbit = max_orbit;
    let mut queue: VecDeque<GroupElem> = ngens.iter().cloned().collect();
    while let Some(x) = queue.pop_front() {
        if chain.contains(&x) {
            continue;
        }
        chain.add_generator(&x)?;
        for g in ggens {
            queue.push_back(x.conjugate_by(g));
        }
    }
    Ok(chain)
}

/// Derived subgroup: normal closure of the generator commutators.
pub fn derived_subgroup(chain: &StabChain) -> Result<StabChain, PermError> {
    let gens = chain.generators();
    let mut comms = Vec::new();
    for (i, a) in gens.iter().enumerate() {
        for b in &gens[i + 1..] {
            let c = a.commutator(b);
            if !c.is_identity() {
                comms.push(c);
            }
        }
    }
    normal_closure(chain.field(), chain.dim(), gens, &comms, chain.max_orbit)
}

/// Last term of the derived series.
pub fn solvable_residual(chain: &StabChain) -> Result<StabChain, PermError> {
    let mut cur = chain.clone();
    loop {
        let d = derived_subgroup(&cur)?;
        if d.order() == cur.order() || d.order().is_one() {
            return Ok(d);
        }
        cur = d;
    }
}

/// Size of the orbit of the trivial coset `K` under right multiplication by `H`.
///
/// Cosets are compared by membership: `Kx = Ky` iff `x y^{-1} ∈ K`. The cost
/// is quadratic in the orbit length, which `cap` bounds.
pub fn coset_orbit_len(k: &StabChain, hgens: &[GroupElem], cap: u64) -> Result<u64, PermError> {
    let id = GroupElem::identity(k.field(), k.dim());
    let mut reps: Vec<(GroupElem, GroupElem)> = vec![(id.clone(), id)];
    let mut next = 0;
    while next < reps.len() {
        let g = reps[next].0.clone();
        next += 1;
        for h in hgens {
            let gh = g.compose(h);
            if !reps.iter().any(|(_, rinv)| k.contains(&gh.compose(rinv))) {
                if reps.len() as u64 >= cap {
                    return Err(PermError::CapExceeded { what: "coset orbit", size: reps.len().to_string(), cap: cap.to_string() });
                }
                let inv = gh.inverse();
                reps.push((gh, inv));
            }
        }
    }
    Ok(reps.len() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn elem(k: &Arc<Field>, rows: &[Vec<Elt>]) -> GroupElem {
        GroupElem::linear(MatF::from_rows(k, rows).unwrap())
    }

    fn sl3_2() -> (Arc<Field>, Vec<GroupElem>) {
        let k = Field::get(2, 1).unwrap();
        let a = elem(&k, &[vec![1, 1, 0], vec![0, 1, 0], vec![0, 0, 1]]);
        let b = elem(&k, &[vec![0, 1, 0], vec![0, 0, 1], vec![1, 0, 0]]);
        (k, vec![a, b])
    }

    #[test]
    fn sl3_order_and_membership() {
        let (k, gens) = sl3_2();
        let c = StabChain::build(&k, 3, &gens, &ChainOptions::default()).unwrap();
        assert_eq!(c.order(), BigUint::from(168u32));
        assert!(c.contains(&gens[0].compose(&gens[1])));
        let seeded = StabChain::build(&k, 3, &gens, &ChainOptions::seeded(7).with_target(BigUint::from(168u32))).unwrap();
        assert_eq!(seeded.order(), BigUint::from(168u32));
    }

    #[test]
    fn projective_points_and_stabilizer() {
        let (k, gens) = sl3_2();
        let c = StabChain::build(&k, 3, &gens, &ChainOptions::default()).unwrap();
        let dom = Domain::new(DomainKind::ProjectivePoints, &k, 3, None).unwrap();
        let (o, st) = stabilizer(&c, &dom, (1, 0), 1, 1 << 10).unwrap();
        assert_eq!(o.len(), 7);
        assert_eq!(st.order(), BigUint::from(24u32));
    }

    #[test]
    fn residual_and_intersection() {
        let (k, gens) = sl3_2();
        let c = StabChain::build(&k, 3, &gens, &ChainOptions::default()).unwrap();
        assert_eq!(solvable_residual(&c).unwrap().order(), c.order());
        let b = StabChain::build(&k, 3, &gens[..1], &ChainOptions::default()).unwrap();
        assert_eq!(enumerate_and_sift(&b, &c, 1000).unwrap(), BigUint::from(2u32));
        assert!(solvable_residual(&b).unwrap().order().is_one());
    }

    #[test]
    fn trivial_group() {
        let k = Field::get(3, 1).unwrap();
        let c = StabChain::build(&k, 2, &[], &ChainOptions::default()).unwrap();
        assert!(c.order().is_one());
    }
}
