//! Finite fields GF(p^f) and towers GF(q) < GF(q^b).
//!
//! Elements are encoded as `u32` codes: the coefficient vector of the
//! reduced polynomial read as a base-p integer (`c0 + c1 p + ...`).
//! Every field is interned, so two handles for the same `(p, f)` share one
//! `Arc<Field>` and compare equal by spec.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Raw element code inside a known field.
pub type Elt = u32;

/// Largest field order with precomputed log tables.
pub const MAX_FIELD_ORDER: u64 = 1 << 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GfError {
    #[error("{0} is not prime")]
    NotPrime(u32),
    #[error("field order {0} exceeds the supported maximum {MAX_FIELD_ORDER}")]
    FieldTooLarge(u64),
    #[error("degree must be at least 1")]
    ZeroDegree,
    #[error("operands belong to different fields ({0} vs {1})")]
    FieldMismatch(String, String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("element is not in the subfield")]
    NotInSubfield,
    #[error("no constant satisfies: {0}")]
    NoSuchConstant(&'static str),
    #[error("invalid element code {0}")]
    BadElement(u64),
    #[error("modulus {0:?} is not a monic irreducible of degree {1}")]
    BadModulus(Vec<u32>, u32),
}

/// Serializable identity of a field: characteristic, degree and the monic
/// modulus (coefficients low to high, length `f + 1`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FieldSpec {
    pub p: u32,
    pub f: u32,
    pub modulus: Vec<u32>,
}

/// Arithmetic tables for GF(p^f).
pub struct Field {
    spec: FieldSpec,
    q: u32,
    exp: Vec<Elt>,
    log: Vec<u32>,
    add_tab: Option<Vec<Elt>>,
    neg: Vec<Elt>,
    frob: Vec<Elt>,
}

impl fmt::Debug for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF({}^{})", self.spec.p, self.spec.f)
    }
}

impl PartialEq for Field {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}
impl Eq for Field {}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Returns `(p, f)` with `q = p^f`, or `None` if `q` is not a prime power.
pub fn prime_power(q: u64) -> Option<(u64, u32)> {
    if q < 2 {
        return None;
    }
    let mut p = 2u64;
    while p * p <= q && q % p != 0 {
        p += 1;
    }
    if q % p != 0 {
        p = q;
    }
    let mut r = q;
    let mut f = 0;
    while r % p == 0 {
        r /= p;
        f += 1;
    }
    (r == 1).then_some((p, f))
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

// Dense polynomial helpers over GF(p); coefficient vectors low to high.

fn poly_trim(a: &mut Vec<u32>) {
    while a.len() > 1 && *a.last().unwrap() == 0 {
        a.pop();
    }
}

fn poly_mulmod(a: &[u32], b: &[u32], m: &[u32], p: u32) -> Vec<u32> {
    let f = m.len() - 1;
    let mut prod = vec![0u64; a.len() + b.len()];
    for (i, &x) in a.iter().enumerate() {
        if x == 0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            prod[i + j] = (prod[i + j] + x as u64 * y as u64) % p as u64;
        }
    }
    // m is monic of degree f
    for k in (f..prod.len()).rev() {
        let c = prod[k] % p as u64;
        if c == 0 {
            continue;
        }
        for (t, &mt) in m.iter().enumerate() {
            let idx = k - f + t;
            prod[idx] = (prod[idx] + (p as u64 - c) * mt as u64) % p as u64;
        }
    }
    let mut out: Vec<u32> = prod.iter().take(f).map(|&x| (x % p as u64) as u32).collect();
    out.resize(f, 0);
    out
}

fn poly_rem(a: &[u32], m: &[u32], p: u32) -> Vec<u32> {
    let mut r = a.to_vec();
    let dm = m.len() - 1;
    let lead_inv = inv_mod(m[dm], p);
    while r.len() > dm {
        let c = (*r.last().unwrap() as u64 * lead_inv as u64 % p as u64) as u32;
        let shift = r.len() - 1 - dm;
        for (t, &mt) in m.iter().enumerate() {
            let idx = shift + t;
            r[idx] = ((r[idx] as u64 + (p as u64 - c as u64) * mt as u64) % p as u64) as u32;
        }
        r.pop();
        poly_trim(&mut r);
        if r.len() == 1 && r[0] == 0 {
            break;
        }
    }
    r
}

fn inv_mod(a: u32, p: u32) -> u32 {
    let mut r = 1u64;
    let mut b = a as u64 % p as u64;
    let mut e = p as u64 - 2;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % p as u64;
        }
        b = b * b % p as u64;
        e >>= 1;
    }
    r as u32
}

fn digits(mut code: u64, p: u32, f: u32) -> Vec<u32> {
    let mut out = Vec::with_capacity(f as usize);
    for _ in 0..f {
        out.push((code % p as u64) as u32);
        code /= p as u64;
    }
    out
}

fn undigits(d: &[u32], p: u32) -> u32 {
    d.iter().rev().fold(0u64, |acc, &x| acc * p as u64 + x as u64) as u32
}

fn is_irreducible(m: &[u32], p: u32) -> bool {
    let f = m.len() - 1;
    if f == 1 {
        return true;
    }
    // trial division by every monic polynomial of degree 1..=f/2
    for d in 1..=f / 2 {
        let count = (p as u64).pow(d as u32);
        for code in 0..count {
            let mut g = digits(code, p, d as u32);
            g.push(1);
            let r = poly_rem(m, &g, p);
            if r.iter().all(|&x| x == 0) {
                return false;
            }
        }
    }
    true
}

/// Lexicographically first monic irreducible of degree `f` over GF(p).
pub fn default_modulus(p: u32, f: u32) -> Vec<u32> {
    let count = (p as u64).pow(f);
    for code in 0..count {
        let mut m = digits(code, p, f);
        if f > 1 && m[0] == 0 {
            continue;
        }
        m.push(1);
        if is_irreducible(&m, p) {
            return m;
        }
    }
    unreachable!("irreducible polynomials exist in every degree")
}

static REGISTRY: OnceLock<Mutex<HashMap<FieldSpec, Arc<Field>>>> = OnceLock::new();

impl Field {
    /// The interned field GF(p^f) with the default modulus.
    pub fn get(p: u32, f: u32) -> Result<Arc<Field>, GfError> {
        if !is_prime(p as u64) {
            return Err(GfError::NotPrime(p));
        }
        if f == 0 {
            return Err(GfError::ZeroDegree);
        }
        let q = (p as u64).checked_pow(f).unwrap_or(u64::MAX);
        if q > MAX_FIELD_ORDER {
            return Err(GfError::FieldTooLarge(q));
        }
        Self::with_modulus(p, f, default_modulus(p, f))
    }

    /// The interned field of order `q`.
    pub fn of_order(q: u64) -> Result<Arc<Field>, GfError> {
        let (p, f) = prime_power(q).ok_or(GfError::NotPrime(q as u32))?;
        Self::get(p as u32, f)
    }

    pub fn from_spec(spec: &FieldSpec) -> Result<Arc<Field>, GfError> {
        Self::with_modulus(spec.p, spec.f, spec.modulus.clone())
    }

    pub fn with_modulus(p: u32, f: u32, modulus: Vec<u32>) -> Result<Arc<Field>, GfError> {
        if !is_prime(p as u64) {
            return Err(GfError::NotPrime(p));
        }
        if f == 0 {
            return Err(GfError::ZeroDegree);
        }
        let q = (p as u64).checked_pow(f).unwrap_or(u64::MAX);
        if q > MAX_FIELD_ORDER {
            return Err(GfError::FieldTooLarge(q));
        }
        if modulus.len() != f as usize + 1
            || modulus[f as usize] != 1
            || modulus.iter().any(|&c| c >= p)
            || !is_irreducible(&modulus, p)
        {
            return Err(GfError::BadModulus(modulus, f));
        }
        let spec = FieldSpec { p, f, modulus };
        let reg = REGISTRY.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(k) = reg.lock().unwrap().get(&spec) {
            return Ok(k.clone());
        }
        let field = Arc::new(Self::build(spec.clone()));
        reg.lock().unwrap().entry(spec).or_insert(field.clone());
        Ok(field)
    }

    fn build(spec: FieldSpec) -> Field {
        let (p, f) = (spec.p, spec.f);
        let q = p.pow(f);
        let m = &spec.modulus;
        let qm1 = (q - 1) as u64;
        let factors = prime_factors(qm1);
        let slow_pow = |g: &[u32], mut e: u64| {
            let mut r = vec![0u32; f as usize];
            r[0] = 1;
            let mut b = g.to_vec();
            while e > 0 {
                if e & 1 == 1 {
                    r = poly_mulmod(&r, &b, m, p);
                }
                b = poly_mulmod(&b, &b, m, p);
                e >>= 1;
            }
            r
        };
        let one = {
            let mut v = vec![0u32; f as usize];
            v[0] = 1;
            v
        };
        // smallest code of a primitive element
        let mut gen = None;
        for code in 1..q {
            let g = digits(code as u64, p, f);
            if qm1 == 1 || factors.iter().all(|&r| slow_pow(&g, qm1 / r) != one) {
                gen = Some(g);
                break;
            }
        }
        let g = gen.expect("multiplicative group is cyclic");
        let mut exp = vec![0u32; q as usize - 1];
        let mut log = vec![0u32; q as usize];
        let mut cur = one.clone();
        for (i, slot) in exp.iter_mut().enumerate() {
            let c = undigits(&cur, p);
            *slot = c;
            log[c as usize] = i as u32;
            cur = poly_mulmod(&cur, &g, m, p);
        }
        let neg: Vec<Elt> = (0..q)
            .map(|c| {
                let d: Vec<u32> = digits(c as u64, p, f).iter().map(|&x| (p - x) % p).collect();
                undigits(&d, p)
            })
            .collect();
        let add_tab = if p != 2 && (q as u64) * (q as u64) <= 1 << 20 {
            let mut t = vec![0u32; (q * q) as usize];
            for a in 0..q {
                let da = digits(a as u64, p, f);
                for b in 0..q {
                    let db = digits(b as u64, p, f);
                    let s: Vec<u32> = da.iter().zip(&db).map(|(x, y)| (x + y) % p).collect();
                    t[(a * q + b) as usize] = undigits(&s, p);
                }
            }
            Some(t)
        } else {
            None
        };
        let mut field = Field { spec, q, exp, log, add_tab, neg, frob: Vec::new() };
        field.frob = (0..q).map(|x| field.pow(x, p as u64)).collect();
        field
    }

    pub fn spec(&self) -> &FieldSpec {
        &self.spec
    }
    pub fn p(&self) -> u32 {
        self.spec.p
    }
    pub fn f(&self) -> u32 {
        self.spec.f
    }
    pub fn q(&self) -> u32 {
        self.q
    }
    pub fn zero(&self) -> Elt {
        0
    }
    pub fn one(&self) -> Elt {
        1
    }
    /// The primitive element used for the log tables.
    pub fn primitive(&self) -> Elt {
        if self.q == 2 {
            1
        } else {
            self.exp[1]
        }
    }
    /// The polynomial generator `x` (code `p`), or 1 for prime fields.
    pub fn generator(&self) -> Elt {
        if self.spec.f == 1 {
            1
        } else {
            self.spec.p
        }
    }

    pub fn contains(&self, x: Elt) -> bool {
        x < self.q
    }

    /// Embeds an integer via the prime subfield.
    pub fn from_int(&self, n: i64) -> Elt {
        n.rem_euclid(self.spec.p as i64) as Elt
    }

    /// Coefficients of `x` in the polynomial basis.
    pub fn coeffs(&self, x: Elt) -> Vec<u32> {
        digits(x as u64, self.spec.p, self.spec.f)
    }

    pub fn from_coeffs(&self, c: &[u32]) -> Result<Elt, GfError> {
        let mut d = c.to_vec();
        d.resize(self.spec.f as usize, 0);
        if c.len() > self.spec.f as usize || d.iter().any(|&x| x >= self.spec.p) {
            return Err(GfError::BadElement(c.len() as u64));
        }
        Ok(undigits(&d, self.spec.p))
    }

    #[inline]
    pub fn add(&self, a: Elt, b: Elt) -> Elt {
        if self.spec.p == 2 {
            return a ^ b;
        }
        if let Some(t) = &self.add_tab {
            return t[(a * self.q + b) as usize];
        }
        let p = self.spec.p;
        let (mut x, mut y, mut out, mut place) = (a, b, 0u32, 1u32);
        while x > 0 || y > 0 {
            out += ((x % p + y % p) % p) * place;
            x /= p;
            y /= p;
            place *= p;
        }
        out
    }

    #[inline]
    pub fn neg(&self, a: Elt) -> Elt {
        self.neg[a as usize]
    }

    #[inline]
    pub fn sub(&self, a: Elt, b: Elt) -> Elt {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: Elt, b: Elt) -> Elt {
        if a == 0 || b == 0 {
            return 0;
        }
        let s = self.log[a as usize] as u64 + self.log[b as usize] as u64;
        self.exp[(s % (self.q as u64 - 1)) as usize]
    }

    pub fn inv(&self, a: Elt) -> Result<Elt, GfError> {
        if a == 0 {
            return Err(GfError::DivisionByZero);
        }
        let l = self.log[a as usize];
        Ok(if l == 0 { 1 } else { self.exp[(self.q - 1 - l) as usize] })
    }

    pub fn div(&self, a: Elt, b: Elt) -> Result<Elt, GfError> {
        Ok(self.mul(a, self.inv(b)?))
    }

    pub fn pow(&self, a: Elt, e: u64) -> Elt {
        if e == 0 {
            return 1;
        }
        if a == 0 {
            return 0;
        }
        let l = self.log[a as usize] as u128 * e as u128 % (self.q as u128 - 1);
        self.exp[l as usize]
    }

    /// Signed powers; negative exponents invert.
    pub fn powi(&self, a: Elt, e: i64) -> Result<Elt, GfError> {
        if e >= 0 {
            Ok(self.pow(a, e as u64))
        } else {
            Ok(self.pow(self.inv(a)?, e.unsigned_abs()))
        }
    }

    /// `x^(p^k)`, with `k` taken modulo `f`.
    #[inline]
    pub fn frobenius(&self, mut x: Elt, k: u32) -> Elt {
        for _ in 0..(k % self.spec.f) {
            x = self.frob[x as usize];
        }
        x
    }

    /// Discrete log to the primitive element; `None` for zero.
    pub fn log(&self, a: Elt) -> Option<u32> {
        (a != 0).then(|| self.log[a as usize])
    }

    pub fn is_square(&self, a: Elt) -> bool {
        a == 0 || self.spec.p == 2 || self.log[a as usize] % 2 == 0
    }

    /// A square root when one exists.
    pub fn sqrt(&self, a: Elt) -> Option<Elt> {
        if a == 0 {
            return Some(0);
        }
        let l = self.log[a as usize];
        let n = self.q - 1;
        if l % 2 == 0 {
            return Some(self.exp[(l / 2) as usize]);
        }
        if n % 2 == 1 {
            // odd group order: 2 is invertible mod n
            let h = (l as u64 + n as u64) / 2;
            return Some(self.exp[(h % n as u64) as usize]);
        }
        None
    }

    pub fn elements(&self) -> impl Iterator<Item = Elt> {
        0..self.q
    }

    /// Checked wrapper for a raw code.
    pub fn elem(self: &Arc<Self>, x: Elt) -> Result<Fq, GfError> {
        if !self.contains(x) {
            return Err(GfError::BadElement(x as u64));
        }
        Ok(Fq { field: self.clone(), v: x })
    }

    /// μ with `x^2 + x + μ` irreducible over this field.
    pub fn find_mu_irreducible(&self) -> Result<Elt, GfError> {
        'outer: for mu in 1..self.q {
            for t in 0..self.q {
                let v = self.add(self.add(self.mul(t, t), t), mu);
                if v == 0 {
                    continue 'outer;
                }
            }
            return Ok(mu);
        }
        Err(GfError::NoSuchConstant("x^2+x+mu irreducible"))
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF({}^{})", self.p, self.f)
    }
}

/// A checked field element bound to its field.
#[derive(Clone)]
pub struct Fq {
    field: Arc<Field>,
    v: Elt,
}

impl fmt::Debug for Fq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{:?}", self.v, self.field)
    }
}

impl PartialEq for Fq {
    fn eq(&self, other: &Self) -> bool {
        self.v == other.v && self.field == other.field
    }
}
impl Eq for Fq {}

impl Fq {
    pub fn field(&self) -> &Arc<Field> {
        &self.field
    }
    pub fn code(&self) -> Elt {
        self.v
    }
    pub fn is_zero(&self) -> bool {
        self.v == 0
    }

    fn same(&self, o: &Fq) -> Result<(), GfError> {
        if self.field == o.field {
            Ok(())
        } else {
            Err(GfError::FieldMismatch(self.field.spec.to_string(), o.field.spec.to_string()))
        }
    }

    fn wrap(&self, v: Elt) -> Fq {
        Fq { field: self.field.clone(), v }
    }

    pub fn add(&self, o: &Fq) -> Result<Fq, GfError> {
        self.same(o)?;
        Ok(self.wrap(self.field.add(self.v, o.v)))
    }
    pub fn sub(&self, o: &Fq) -> Result<Fq, GfError> {
        self.same(o)?;
        Ok(self.wrap(self.field.sub(self.v, o.v)))
    }
    pub fn mul(&self, o: &Fq) -> Result<Fq, GfError> {
        self.same(o)?;
        Ok(self.wrap(self.field.mul(self.v, o.v)))
    }
    pub fn div(&self, o: &Fq) -> Result<Fq, GfError> {
        self.same(o)?;
        Ok(self.wrap(self.field.div(self.v, o.v)?))
    }
    pub fn neg(&self) -> Fq {
        self.wrap(self.field.neg(self.v))
    }
    pub fn inv(&self) -> Result<Fq, GfError> {
        Ok(self.wrap(self.field.inv(self.v)?))
    }
    pub fn pow(&self, e: i64) -> Result<Fq, GfError> {
        Ok(self.wrap(self.field.powi(self.v, e)?))
    }
    pub fn frobenius(&self, k: u32) -> Fq {
        self.wrap(self.field.frobenius(self.v, k))
    }
}

/// GF(q) embedded in GF(q^b), with a GF(q)-basis of the big field.
pub struct Tower {
    pub small: Arc<Field>,
    pub big: Arc<Field>,
    pub degree: u32,
    embed: Vec<Elt>,
    restrict: HashMap<Elt, Elt>,
    basis: Vec<Elt>,
    coords: Vec<Vec<Elt>>,
}

impl fmt::Debug for Tower {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} < {:?}", self.small, self.big)
    }
}

impl Tower {
    /// Builds GF(q^b) over `small`; the embedding sends the generator of
    /// `small` to the least root of its modulus in the big field.
    pub fn new(small: &Arc<Field>, b: u32) -> Result<Tower, GfError> {
        if b == 0 {
            return Err(GfError::ZeroDegree);
        }
        let (p, f) = (small.p(), small.f());
        let big = Field::get(p, f * b)?;
        let modulus = &small.spec().modulus;
        let eval = |x: Elt| {
            modulus.iter().rev().fold(0, |acc, &c| big.add(big.mul(acc, x), c as Elt))
        };
        let root = (0..big.q()).find(|&x| eval(x) == 0).ok_or(GfError::NoSuchConstant("root of subfield modulus"))?;
        let embed: Vec<Elt> = (0..small.q())
            .map(|c| {
                small.coeffs(c).iter().rev().fold(0, |acc, &d| big.add(big.mul(acc, root), d as Elt))
            })
            .collect();
        let restrict: HashMap<Elt, Elt> = embed.iter().enumerate().map(|(i, &e)| (e, i as Elt)).collect();
        let theta = big.primitive();
        let basis: Vec<Elt> = (0..b).map(|i| big.pow(theta, i as u64)).collect();
        let mut coords = vec![Vec::new(); big.q() as usize];
        let sq = small.q() as u64;
        for code in 0..sq.pow(b) {
            let a: Vec<Elt> = digits(code, small.q(), b);
            let mut x = 0;
            for (j, &aj) in a.iter().enumerate() {
                x = big.add(x, big.mul(embed[aj as usize], basis[j]));
            }
            coords[x as usize] = a;
        }
        if coords.iter().any(|c| c.is_empty()) {
            return Err(GfError::NoSuchConstant("GF(q)-basis of the extension"));
        }
        Ok(Tower { small: small.clone(), big, degree: b, embed, restrict, basis, coords })
    }

    pub fn embed(&self, x: Elt) -> Elt {
        self.embed[x as usize]
    }

    pub fn restrict(&self, x: Elt) -> Result<Elt, GfError> {
        self.restrict.get(&x).copied().ok_or(GfError::NotInSubfield)
    }

    /// The GF(q)-basis `theta^0, ..., theta^(b-1)` of the big field.
    pub fn basis(&self) -> &[Elt] {
        &self.basis
    }

    /// Coordinates of `x` in [`Tower::basis`], as small-field codes.
    pub fn coords(&self, x: Elt) -> &[Elt] {
        &self.coords[x as usize]
    }

    /// `x^q`, the Frobenius of the big field over the small one.
    pub fn relative_frobenius(&self, x: Elt) -> Elt {
        self.big.frobenius(x, self.small.f())
    }

    pub fn trace(&self, x: Elt) -> Elt {
        let mut acc = 0;
        let mut y = x;
        for _ in 0..self.degree {
            acc = self.big.add(acc, y);
            y = self.relative_frobenius(y);
        }
        self.restrict(acc).expect("trace lies in the subfield")
    }

    pub fn norm(&self, x: Elt) -> Elt {
        let mut acc = 1;
        let mut y = x;
        for _ in 0..self.degree {
            acc = self.big.mul(acc, y);
            y = self.relative_frobenius(y);
        }
        self.restrict(acc).expect("norm lies in the subfield")
    }

    /// λ in GF(q^2) with `λ + λ^q = 1`.
    pub fn find_lambda(&self) -> Result<Elt, GfError> {
        if self.degree != 2 {
            return Err(GfError::NoSuchConstant("lambda needs a quadratic extension"));
        }
        (0..self.big.q())
            .find(|&x| self.big.add(x, self.relative_frobenius(x)) == 1)
            .ok_or(GfError::NoSuchConstant("lambda + lambda^q = 1"))
    }

    /// μ in GF(q^2) with `μ^(q-1) = -1`.
    pub fn find_mu_norm_minus_one(&self) -> Result<Elt, GfError> {
        if self.degree != 2 {
            return Err(GfError::NoSuchConstant("mu needs a quadratic extension"));
        }
        let minus_one = self.big.neg(1);
        let qm1 = self.small.q() as u64 - 1;
        (1..self.big.q())
            .find(|&x| self.big.pow(x, qm1) == minus_one)
            .ok_or(GfError::NoSuchConstant("mu^(q-1) = -1"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gf4_basics() {
        let k = Field::get(2, 2).unwrap();
        let w = k.generator();
        assert_eq!(k.mul(w, w), k.add(w, 1));
        assert_eq!(k.inv(w).unwrap(), k.add(w, 1));
        assert_eq!(k.frobenius(w, 1), k.add(w, 1));
        let t = Tower::new(&Field::get(2, 1).unwrap(), 2).unwrap();
        assert_eq!(t.trace(t.big.generator()), 1);
    }

    #[test]
    fn interned() {
        let a = Field::get(3, 2).unwrap();
        let b = Field::get(3, 2).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
    }

    #[test]
    fn mismatch_is_an_error() {
        let a = Field::get(2, 2).unwrap().elem(1).unwrap();
        let b = Field::get(2, 3).unwrap().elem(1).unwrap();
        assert!(matches!(a.add(&b), Err(GfError::FieldMismatch(..))));
    }

    #[test]
    fn division_by_zero() {
        let k = Field::get(5, 1).unwrap();
        assert_eq!(k.inv(0), Err(GfError::DivisionByZero));
    }

    #[test]
    fn special_constants() {
        for q in [2u32, 3, 4, 5, 7, 8, 9] {
            let k = Field::of_order(q as u64).unwrap();
            let t = Tower::new(&k, 2).unwrap();
            let l = t.find_lambda().unwrap();
            assert_eq!(t.big.add(l, t.relative_frobenius(l)), 1);
            let mu = t.find_mu_norm_minus_one().unwrap();
            assert_eq!(t.big.pow(mu, q as u64 - 1), t.big.neg(1));
            let nu = k.find_mu_irreducible().unwrap();
            assert!(k.elements().all(|x| k.add(k.add(k.mul(x, x), x), nu) != 0));
        }
    }

    #[test]
    fn rejects_non_prime() {
        assert_eq!(Field::get(6, 1).unwrap_err(), GfError::NotPrime(6));
    }
}
