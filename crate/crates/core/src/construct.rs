//! Generators of classical groups and the subgroup recipes used by the tables.
//!
//! Every generator set is checked against its frame (isometry, determinant,
//! Ω-membership) before use, and orders are confirmed by stabilizer chains.
//! Frame basis orders follow [`SpaceFrame`]: `e1,f1,e2,f2,...` then `d`/`d'`.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigUint;
use thiserror::Error;

use crate::gf::{prime_power, Elt, Field, GfError, Tower};
use crate::linalg::{standardize, FormKind, FormSpec, FrameKind, GroupElem, LinalgError, MatF, SpaceFrame};
use crate::perm::{derived_subgroup, solvable_residual, ChainOptions, PermError, StabChain};
use crate::shapes::{classical_order, ShapeError};

#[derive(Debug, Error)]
pub enum ConstructError {
    #[error("unsupported parameters for {0}")]
    Unsupported(String),
    #[error("SU({m}) embeds in the {expected} type orthogonal group, not {got}")]
    SignParityMismatch { m: usize, expected: char, got: char },
    #[error("generator {index} of {group} failed the gate: {why}")]
    GateFailed { group: String, index: usize, why: String },
    #[error("order check failed for {group}: chain order {got}, expected {expected}")]
    OrderMismatch { group: String, got: BigUint, expected: BigUint },
    #[error("adjoined element does not normalize the group")]
    NotNormalizing,
    #[error(transparent)]
    Field(#[from] GfError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Perm(#[from] PermError),
    #[error(transparent)]
    Shape(#[from] ShapeError),
}

type Result<T> = std::result::Result<T, ConstructError>;

/// Families with generator sets. Names match the shape grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    SL,
    GL,
    SigmaL,
    GammaL,
    Sp,
    GammaSp,
    SU,
    GU,
    SigmaU,
    GammaU,
    OmegaPlus,
    OmegaMinus,
    OmegaOdd,
    SOPlus,
    SOMinus,
    SOOdd,
    OPlus,
    OMinus,
    OOdd,
    GammaOPlus,
    GammaOMinus,
}

const FAMILY_NAMES: &[(Family, &str)] = &[
    (Family::SL, "SL"),
    (Family::GL, "GL"),
    (Family::SigmaL, "SigmaL"),
    (Family::GammaL, "GammaL"),
    (Family::Sp, "Sp"),
    (Family::GammaSp, "GammaSp"),
    (Family::SU, "SU"),
    (Family::GU, "GU"),
    (Family::SigmaU, "SigmaU"),
    (Family::GammaU, "GammaU"),
    (Family::OmegaPlus, "Omega+"),
    (Family::OmegaMinus, "Omega-"),
    (Family::OmegaOdd, "Omega"),
    (Family::SOPlus, "SO+"),
    (Family::SOMinus, "SO-"),
    (Family::SOOdd, "SO"),
    (Family::OPlus, "O+"),
    (Family::OMinus, "O-"),
    (Family::OOdd, "O"),
    (Family::GammaOPlus, "GammaO+"),
    (Family::GammaOMinus, "GammaO-"),
];

impl Family {
    pub fn name(self) -> &'static str {
        FAMILY_NAMES.iter().find(|(f, _)| *f == self).unwrap().1
    }

    pub fn all() -> impl Iterator<Item = Family> {
        FAMILY_NAMES.iter().map(|(f, _)| *f)
    }

    fn frame_kind(self) -> FrameKind {
        use Family::*;
        match self {
            SL | GL | SigmaL | GammaL => FrameKind::Linear,
            Sp | GammaSp => FrameKind::Symplectic,
            SU | GU | SigmaU | GammaU => FrameKind::Unitary,
            OmegaPlus | SOPlus | OPlus | GammaOPlus => FrameKind::OrthPlus,
            OmegaMinus | SOMinus | OMinus | GammaOMinus => FrameKind::OrthMinus,
            OmegaOdd | SOOdd | OOdd => FrameKind::OrthOdd,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = ConstructError;
    fn from_str(s: &str) -> Result<Family> {
        let s = match s {
            "GO+" => "O+",
            "GO-" => "O-",
            "GO" => "O",
            other => other,
        };
        FAMILY_NAMES
            .iter()
            .find(|(_, n)| *n == s)
            .map(|(f, _)| *f)
            .ok_or_else(|| ConstructError::Unsupported(s.to_string()))
    }
}

/// A generator set over a standard frame with its expected order.
#[derive(Debug, Clone)]
pub struct Presentation {
    pub name: String,
    pub frame: SpaceFrame,
    pub gens: Vec<GroupElem>,
    pub expected_order: Option<BigUint>,
}

impl Presentation {
    pub fn field(&self) -> &Arc<Field> {
        &self.frame.field
    }
    pub fn dim(&self) -> usize {
        self.frame.n
    }

    /// Chain using the expected order as the certifying target.
    pub fn chain(&self, seed: u64, max_orbit: u64) -> Result<StabChain> {
        let opts = ChainOptions { seed, target: self.expected_order.clone(), max_orbit, stall: 40 };
        Ok(StabChain::build(self.field(), self.dim(), &self.gens, &opts)?)
    }

    /// Chain certified by Schreier closure alone, ignoring the expected order.
    pub fn closed_chain(&self, seed: u64, max_orbit: u64) -> Result<StabChain> {
        let opts = ChainOptions { seed, target: None, max_orbit, stall: 40 };
        Ok(StabChain::build(self.field(), self.dim(), &self.gens, &opts)?)
    }

    /// Builds the chain and fails unless its order is the expected one.
    pub fn checked_chain(&self, seed: u64, max_orbit: u64) -> Result<StabChain> {
        let c = self.chain(seed, max_orbit)?;
        if let Some(e) = &self.expected_order {
            if c.order() != *e {
                return Err(ConstructError::OrderMismatch { group: self.name.clone(), got: c.order(), expected: e.clone() });
            }
        }
        Ok(c)
    }
}

/// `1, x, ..., x^(f-1)`: a basis of GF(q) over GF(p).
pub fn fp_basis(k: &Field) -> Vec<Elt> {
    (0..k.f()).map(|i| k.p().pow(i)).collect()
}

fn unit(n: usize, i: usize) -> Vec<Elt> {
    let mut v = vec![0; n];
    v[i] = 1;
    v
}

/// Identity with the listed rows replaced (row `i` is the image of basis vector `i`).
fn from_images(k: &Arc<Field>, n: usize, images: &[(usize, Vec<Elt>)]) -> GroupElem {
    let mut m = MatF::identity(k, n);
    for (i, row) in images {
        for (j, &x) in row.iter().enumerate() {
            m.set(*i, j, x);
        }
    }
    GroupElem::linear(m)
}

fn axpy(k: &Field, y: &mut [Elt], a: Elt, x: &[Elt]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = k.add(*yi, k.mul(a, xi));
    }
}

fn diag(k: &Arc<Field>, d: &[Elt]) -> GroupElem {
    let mut m = MatF::identity(k, d.len());
    for (i, &x) in d.iter().enumerate() {
        m.set(i, i, x);
    }
    GroupElem::linear(m)
}

/// Transvection `e_i -> e_i + t e_j`.
fn elementary(k: &Arc<Field>, n: usize, i: usize, j: usize, t: Elt) -> GroupElem {
    let mut row = unit(n, i);
    row[j] = t;
    from_images(k, n, &[(i, row)])
}

fn sl_gens(k: &Arc<Field>, n: usize) -> Vec<GroupElem> {
    let mut out = Vec::new();
    for i in 0..n.saturating_sub(1) {
        for &t in &fp_basis(k) {
            out.push(elementary(k, n, i, i + 1, t));
            out.push(elementary(k, n, i + 1, i, t));
        }
    }
    out
}

/// Root elements for the simple roots of Sp_{2m} and their negatives.
fn sp_gens(k: &Arc<Field>, m: usize) -> Vec<GroupElem> {
    let n = 2 * m;
    let mut out = Vec::new();
    for &t in &fp_basis(k) {
        let nt = k.neg(t);
        for i in 0..m.saturating_sub(1) {
            let (ei, fi, ej, fj) = (2 * i, 2 * i + 1, 2 * i + 2, 2 * i + 3);
            let mut a = unit(n, ei);
            a[ej] = t;
            let mut b = unit(n, fj);
            b[fi] = nt;
            out.push(from_images(k, n, &[(ei, a), (fj, b)]));
            let mut a = unit(n, ej);
            a[ei] = t;
            let mut b = unit(n, fi);
            b[fj] = nt;
            out.push(from_images(k, n, &[(ej, a), (fi, b)]));
        }
        let (e, f) = (n - 2, n - 1);
        let mut a = unit(n, e);
        a[f] = t;
        out.push(from_images(k, n, &[(e, a)]));
        let mut b = unit(n, f);
        b[e] = t;
        out.push(from_images(k, n, &[(f, b)]));
    }
    out
}

struct UnitaryConsts {
    tower: Tower,
    lambda: Elt,
    /// F_p-basis of `{c : c + c^q = 0}`.
    skew: Vec<Elt>,
}

fn unitary_consts(big: &Arc<Field>) -> Result<UnitaryConsts> {
    if big.f() % 2 != 0 {
        return Err(ConstructError::Unsupported("unitary groups need GF(q^2)".into()));
    }
    let small = Field::get(big.p(), big.f() / 2)?;
    let tower = Tower::new(&small, 2)?;
    let lambda = tower.find_lambda()?;
    let mu0 = tower.find_mu_norm_minus_one()?;
    let skew = fp_basis(&small).into_iter().map(|t| big.mul(mu0, tower.embed(t))).collect();
    Ok(UnitaryConsts { tower, lambda, skew })
}

/// Root elements of SU_n(q) over GF(q^2), plus a torus element.
fn su_gens(big: &Arc<Field>, n: usize) -> Result<Vec<GroupElem>> {
    let c = unitary_consts(big)?;
    let conj = |x: Elt| c.tower.relative_frobenius(x);
    let k = big;
    let m = n / 2;
    let mut out = Vec::new();
    for i in 0..m.saturating_sub(1) {
        let (ei, fi, ej, fj) = (2 * i, 2 * i + 1, 2 * i + 2, 2 * i + 3);
        for &t in &fp_basis(k) {
            let ntq = k.neg(conj(t));
            let mut a = unit(n, ei);
            a[ej] = t;
            let mut b = unit(n, fj);
            b[fi] = ntq;
            out.push(from_images(k, n, &[(ei, a), (fj, b)]));
            let mut a = unit(n, ej);
            a[ei] = t;
            let mut b = unit(n, fi);
            b[fj] = ntq;
            out.push(from_images(k, n, &[(ej, a), (fi, b)]));
        }
    }
    if m >= 1 {
        let (e, f) = (2 * m - 2, 2 * m - 1);
        for &s in &c.skew {
            let mut a = unit(n, f);
            a[e] = s;
            out.push(from_images(k, n, &[(f, a)]));
            let mut b = unit(n, e);
            b[f] = s;
            out.push(from_images(k, n, &[(e, b)]));
        }
        if n % 2 == 1 {
            let d = n - 1;
            for &bp in &fp_basis(k) {
                // f -> f + β' d + γ e, d -> d - β'^q e, with N(β') + Tr(γ) = 0
                let norm = k.mul(bp, conj(bp));
                let gamma = k.mul(c.lambda, k.neg(norm));
                for (x, y) in [(e, f), (f, e)] {
                    let mut a = unit(n, y);
                    a[d] = bp;
                    a[x] = gamma;
                    let mut b = unit(n, d);
                    b[x] = k.neg(conj(bp));
                    out.push(from_images(k, n, &[(y, a), (d, b)]));
                }
            }
        }
    }
    let alpha = k.primitive();
    let q = c.tower.small.q() as u64;
    if n >= 2 {
        let mut dg = vec![1; n];
        if n == 2 {
            let a = c.tower.embed(c.tower.small.primitive());
            dg[0] = a;
            dg[1] = k.inv(a)?;
        } else {
            dg[0] = alpha;
            dg[1] = k.inv(k.pow(alpha, q))?;
            if n % 2 == 1 {
                dg[n - 1] = k.mul(k.pow(alpha, q), k.inv(alpha)?);
            } else {
                dg[2] = k.inv(alpha)?;
                dg[3] = k.pow(alpha, q);
            }
        }
        out.push(diag(k, &dg));
    }
    Ok(out)
}

/// Determinant-(q+1)-generating isometry of the unitary frame.
fn gu_extra(big: &Arc<Field>, n: usize) -> Result<GroupElem> {
    let c = unitary_consts(big)?;
    let k = big;
    let alpha = k.primitive();
    let q = c.tower.small.q() as u64;
    let mut dg = vec![1; n];
    if n >= 2 {
        dg[0] = alpha;
        dg[1] = k.inv(k.pow(alpha, q))?;
    } else {
        dg[0] = k.mul(k.pow(alpha, q), k.inv(alpha)?);
    }
    Ok(diag(k, &dg))
}

/// Siegel transformation `x -> x + β(x,u)v - β(x,v)u - Q(v)β(x,u)u` (u singular, v ⊥ u).
pub fn siegel(form: &FormSpec, u: &[Elt], v: &[Elt]) -> GroupElem {
    let k = form.field().clone();
    let n = form.dim();
    let qv = form.q_eval(v);
    let images: Vec<(usize, Vec<Elt>)> = (0..n)
        .map(|i| {
            let x = unit(n, i);
            let (bu, bv) = (form.eval(&x, u), form.eval(&x, v));
            let mut y = x.clone();
            axpy(&k, &mut y, bu, v);
            axpy(&k, &mut y, k.neg(bv), u);
            axpy(&k, &mut y, k.neg(k.mul(qv, bu)), u);
            (i, y)
        })
        .collect();
    from_images(&k, n, &images)
}

fn omega_gens(frame: &SpaceFrame) -> Result<Vec<GroupElem>> {
    let k = &frame.field;
    let n = frame.n;
    let form = frame.form.as_ref().unwrap();
    let hyp = match frame.kind {
        FrameKind::OrthPlus => n / 2,
        FrameKind::OrthMinus => n / 2 - 1,
        FrameKind::OrthOdd => n / 2,
        _ => return Err(ConstructError::Unsupported("orthogonal frame expected".into())),
    };
    let aniso: Vec<usize> = (2 * hyp..n).collect();
    let need = if frame.kind == FrameKind::OrthPlus { 2 } else { 1 };
    if hyp < need {
        return Err(ConstructError::Unsupported(format!("Omega in dimension {n}")));
    }
    let scaled = |i: usize, t: Elt| {
        let mut v = vec![0; n];
        v[i] = t;
        v
    };
    let mut out = Vec::new();
    for &t in &fp_basis(k) {
        for i in 0..hyp.saturating_sub(1) {
            for u in [2 * i, 2 * i + 1] {
                for v in [2 * i + 2, 2 * i + 3] {
                    out.push(siegel(form, &unit(n, u), &scaled(v, t)));
                }
            }
        }
        if hyp >= 1 {
            for u in [2 * hyp - 2, 2 * hyp - 1] {
                for &v in &aniso {
                    out.push(siegel(form, &unit(n, u), &scaled(v, t)));
                }
            }
        }
    }
    Ok(out)
}

/// Nonsingular vectors `w1, w2` in `<e1, f1>` with `Q(w1) = 1` and `Q(w2)` a nonsquare (q odd).
fn reflection_vectors(frame: &SpaceFrame) -> (Vec<Elt>, Vec<Elt>) {
    let k = &frame.field;
    let n = frame.n;
    let mut w1 = unit(n, 0);
    w1[1] = 1;
    let mut w2 = unit(n, 0);
    w2[1] = k.primitive();
    (w1, w2)
}

/// Coordinatewise Frobenius composed with an isometry on `<d, d'>` so that
/// the minus-type form is preserved up to the twist.
pub fn minus_semilinear(frame: &SpaceFrame) -> Result<GroupElem> {
    let k = &frame.field;
    let n = frame.n;
    let form = frame.form.as_ref().unwrap();
    if frame.kind != FrameKind::OrthMinus {
        return Err(ConstructError::Unsupported("minus-type frame expected".into()));
    }
    if k.f() == 1 {
        return Ok(GroupElem::identity(k, n));
    }
    let q = k.q();
    for code in 0..(q as u64).pow(4) {
        let c = crate::linalg::decode_vector(q, 4, code);
        let mut m = MatF::identity(k, n);
        m.set(n - 2, n - 2, c[0]);
        m.set(n - 2, n - 1, c[1]);
        m.set(n - 1, n - 2, c[2]);
        m.set(n - 1, n - 1, c[3]);
        let g = GroupElem { mat: m, frob: 1 };
        if g.mat.det() != 0 && form.is_isometry(&g) {
            return Ok(g);
        }
    }
    Err(ConstructError::Unsupported("no semilinear isometry on the anisotropic plane".into()))
}

fn frame_for(family: Family, n: usize, q: u64) -> Result<SpaceFrame> {
    let bad = || ConstructError::Unsupported(format!("{family}({n},{q})"));
    prime_power(q).ok_or_else(bad)?;
    let k = Field::of_order(q)?;
    Ok(match family.frame_kind() {
        FrameKind::Linear => SpaceFrame::linear(&k, n),
        FrameKind::Symplectic => {
            if n % 2 != 0 || n == 0 {
                return Err(bad());
            }
            SpaceFrame::symplectic(&k, n / 2)
        }
        FrameKind::Unitary => SpaceFrame::unitary(&Field::of_order(q * q)?, n)?,
        FrameKind::OrthPlus => {
            if n % 2 != 0 || n == 0 {
                return Err(bad());
            }
            SpaceFrame::orthogonal_plus(&k, n / 2)
        }
        FrameKind::OrthMinus => {
            if n % 2 != 0 || n == 0 {
                return Err(bad());
            }
            SpaceFrame::orthogonal_minus(&k, n / 2)?
        }
        FrameKind::OrthOdd => {
            if n % 2 != 1 || q % 2 == 0 {
                return Err(bad());
            }
            SpaceFrame::orthogonal_odd(&k, n / 2, 1)?
        }
    })
}

/// Standard generators of a classical group, gate-checked against the frame.
pub fn gens_classical(family: Family, n: usize, q: u64) -> Result<Presentation> {
    use Family::*;
    let frame = frame_for(family, n, q)?;
    let k = frame.field.clone();
    if n == 0 {
        return Err(ConstructError::Unsupported(format!("{family} in dimension 0")));
    }
    let mut gens = match family {
        SL | GL | SigmaL | GammaL => sl_gens(&k, n),
        Sp | GammaSp => sp_gens(&k, n / 2),
        SU | GU | SigmaU | GammaU => su_gens(&k, n)?,
        _ => omega_gens(&frame)?,
    };
    let odd_q = k.p() != 2;
    let form = frame.form.clone();
    match family {
        GL | GammaL => {
            let mut d = vec![1; n];
            d[0] = k.primitive();
            gens.push(diag(&k, &d));
        }
        GU | GammaU => gens.push(gu_extra(&k, n)?),
        SOPlus | SOMinus | SOOdd if odd_q => {
            let f = form.as_ref().unwrap();
            let (w1, w2) = reflection_vectors(&frame);
            gens.push(f.reflection(&w1)?.compose(&f.reflection(&w2)?));
        }
        OPlus | OMinus | OOdd | GammaOPlus | GammaOMinus => {
            let f = form.as_ref().unwrap();
            let (w1, w2) = reflection_vectors(&frame);
            gens.push(f.reflection(&w1)?);
            if odd_q {
                gens.push(f.reflection(&w2)?);
            }
        }
        _ => {}
    }
    match family {
        SigmaL | GammaL | GammaSp | SigmaU | GammaU | GammaOPlus => {
            if k.f() > 1 {
                gens.push(GroupElem::frobenius(&k, n, 1));
            }
        }
        GammaOMinus => {
            if k.f() > 1 {
                gens.push(minus_semilinear(&frame)?);
            }
        }
        _ => {}
    }
    let expected = classical_order(family.name(), n as u64, q)?;
    let p = Presentation { name: format!("{family}({n},{q})"), frame, gens, expected_order: Some(expected) };
    gate(&p, family)?;
    Ok(p)
}

/// Membership gate: each generator lies in the family's group on its frame.
pub fn gate(p: &Presentation, family: Family) -> Result<()> {
    use Family::*;
    let form = p.frame.form.as_ref();
    let odd_q = p.field().p() != 2;
    for (i, g) in p.gens.iter().enumerate() {
        let fail = |why: &str| ConstructError::GateFailed { group: p.name.clone(), index: i, why: why.to_string() };
        if g.mat.det() == 0 {
            return Err(fail("singular matrix"));
        }
        let semilinear_ok = matches!(family, SigmaL | GammaL | GammaSp | SigmaU | GammaU | GammaOPlus | GammaOMinus);
        if g.frob != 0 && !semilinear_ok {
            return Err(fail("semilinear element in a linear group"));
        }
        if let Some(f) = form {
            if !f.is_isometry(g) {
                return Err(fail("not an isometry"));
            }
        }
        let det_one = matches!(family, SL | SigmaL | SU | SigmaU) || (matches!(family, SOPlus | SOMinus | SOOdd) && odd_q);
        if det_one && g.mat.det() != 1 {
            return Err(fail("determinant is not 1"));
        }
        let needs_omega = matches!(family, OmegaPlus | OmegaMinus | OmegaOdd) || (matches!(family, SOPlus | SOMinus) && !odd_q);
        if needs_omega && !form.unwrap().in_omega(g)? {
            return Err(fail("not in Omega"));
        }
    }
    Ok(())
}

/// Replaces each entry of `(A, j)` over GF(q^b) by its b x b block over GF(q).
///
/// Coordinate `k*b + l` of the small space is the coefficient of `θ^l e_k`.
pub fn blowup_elem(t: &Tower, g: &GroupElem) -> GroupElem {
    let (small, big) = (&t.small, &t.big);
    let b = t.degree as usize;
    let a = g.dim();
    let basis = t.basis();
    let mut blow = MatF::zeros(small, a * b, a * b);
    for r in 0..a {
        for c in 0..a {
            let x = g.mat.get(r, c);
            if x == 0 {
                continue;
            }
            for (l, &th) in basis.iter().enumerate() {
                let co = t.coords(big.mul(th, x));
                for (l2, &v) in co.iter().enumerate() {
                    blow.set(r * b + l, c * b + l2, v);
                }
            }
        }
    }
    if g.frob == 0 {
        return GroupElem::linear(blow);
    }
    let mut fj = MatF::zeros(small, a * b, a * b);
    for r in 0..a {
        for (l, &th) in basis.iter().enumerate() {
            let co = t.coords(big.frobenius(th, g.frob));
            for (l2, &v) in co.iter().enumerate() {
                fj.set(r * b + l, r * b + l2, v);
            }
        }
    }
    GroupElem { mat: fj.mul(&blow), frob: g.frob % small.f() }
}

pub fn blowup_gens(t: &Tower, gens: &[GroupElem]) -> Vec<GroupElem> {
    gens.iter().map(|g| blowup_elem(t, g)).collect()
}

/// Big-field vector of the small basis vector `k*b + l`, i.e. `θ^l e_k`.
fn small_basis_vector(t: &Tower, a: usize, idx: usize) -> Vec<Elt> {
    let b = t.degree as usize;
    let mut v = vec![0; a];
    v[idx / b] = t.basis()[idx % b];
    v
}

/// Form over GF(q) obtained from a form over GF(q^b) by composing with the trace.
///
/// Alternating and Hermitian-polar Gram entries become `Tr β♯(B_i, B_j)`; a
/// quadratic form becomes `Q = Tr ∘ Q♯`.
pub fn trace_form(t: &Tower, form: &FormSpec) -> Result<FormSpec> {
    let a = form.dim();
    let n = a * t.degree as usize;
    let vecs: Vec<Vec<Elt>> = (0..n).map(|i| small_basis_vector(t, a, i)).collect();
    let mut gram = MatF::zeros(&t.small, n, n);
    for i in 0..n {
        for j in 0..n {
            gram.set(i, j, t.trace(form.eval(&vecs[i], &vecs[j])));
        }
    }
    Ok(match form.kind {
        FormKind::Quadratic => FormSpec::quadratic(vecs.iter().map(|v| t.trace(form.q_eval(v))).collect(), gram),
        FormKind::Alternating => FormSpec::bilinear(FormKind::Alternating, gram),
        _ => return Err(ConstructError::Unsupported("trace of a symmetric or Hermitian form".into())),
    })
}

/// Quadratic form `Q(v) = β♯(v, v)` of a Hermitian form over GF(q^2), over GF(q).
pub fn hermitian_to_quadratic(t: &Tower, form: &FormSpec) -> Result<FormSpec> {
    if form.kind != FormKind::Hermitian || t.degree != 2 {
        return Err(ConstructError::Unsupported("Hermitian form over a quadratic extension expected".into()));
    }
    let a = form.dim();
    let n = 2 * a;
    let vecs: Vec<Vec<Elt>> = (0..n).map(|i| small_basis_vector(t, a, i)).collect();
    let mut gram = MatF::zeros(&t.small, n, n);
    for i in 0..n {
        for j in 0..n {
            gram.set(i, j, t.trace(form.eval(&vecs[i], &vecs[j])));
        }
    }
    let qdiag = vecs.iter().map(|v| t.restrict(form.eval(v, v))).collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(FormSpec::quadratic(qdiag, gram))
}

/// Generators rewritten in a standard frame of `form`.
#[derive(Debug, Clone)]
pub struct Standardized {
    pub frame: SpaceFrame,
    /// Rows are the frame basis in the old coordinates.
    pub p: MatF,
    pub p_inv: MatF,
    pub gens: Vec<GroupElem>,
}

impl Standardized {
    pub fn transport(&self, g: &GroupElem) -> GroupElem {
        g.change_basis(&self.p, &self.p_inv)
    }
    /// A form given in the old coordinates, in frame coordinates.
    pub fn transport_form(&self, f: &FormSpec) -> FormSpec {
        f.in_basis(&self.p)
    }
}

pub fn to_standard(form: &FormSpec, gens: &[GroupElem]) -> Result<Standardized> {
    let (frame, p) = standardize(form)?;
    let p_inv = p.inverse()?;
    let gens = gens.iter().map(|g| g.change_basis(&p, &p_inv)).collect();
    Ok(Standardized { frame, p, p_inv, gens })
}

fn check_isometries(name: &str, form: &FormSpec, gens: &[GroupElem]) -> Result<()> {
    for (i, g) in gens.iter().enumerate() {
        if !form.is_isometry(g) {
            return Err(ConstructError::GateFailed { group: name.into(), index: i, why: "not an isometry".into() });
        }
    }
    Ok(())
}

/// `SL_a(q^b)` (optionally with the field automorphism) blown up into `GL_{ab}(q)`.
pub fn field_ext_linear(a: usize, b: u32, q: u64, frobenius: bool) -> Result<Presentation> {
    let small = Field::of_order(q)?;
    let t = Tower::new(&small, b)?;
    let mut gens = sl_gens(&t.big, a);
    if frobenius && t.big.f() > 1 {
        gens.push(GroupElem::frobenius(&t.big, a, 1));
    }
    let qb = q.pow(b);
    let base = classical_order("SL", a as u64, qb)?;
    let expected = if frobenius { base * t.big.f() } else { base };
    let tag = if frobenius { "SigmaL" } else { "SL" };
    Ok(Presentation {
        name: format!("{tag}({a},{qb}) < GL({},{q})", a * b as usize),
        frame: SpaceFrame::linear(&small, a * b as usize),
        gens: blowup_gens(&t, &gens),
        expected_order: Some(expected),
    })
}

/// `Sp_{2m}(q) < SU_{2m}(q)` via the basis `μ e_1, f_1, ..., μ e_m, f_m`, `μ^(q-1) = -1`.
///
/// Also returns the preserved alternating form in frame coordinates.
pub fn sp_in_su(m: usize, q: u64) -> Result<(Presentation, FormSpec)> {
    let small = Field::of_order(q)?;
    let t = Tower::new(&small, 2)?;
    let big = t.big.clone();
    let frame = SpaceFrame::unitary(&big, 2 * m)?;
    let mu = t.find_mu_norm_minus_one()?;
    let n = 2 * m;
    let mut dv = vec![1; n];
    for i in 0..m {
        dv[2 * i] = mu;
    }
    let d = diag(&big, &dv).mat;
    let d_inv = d.inverse()?;
    let gens: Vec<GroupElem> = sp_gens(&small, m)
        .iter()
        .map(|g| {
            let mut a = MatF::zeros(&big, n, n);
            for r in 0..n {
                for c in 0..n {
                    a.set(r, c, t.embed(g.mat.get(r, c)));
                }
            }
            GroupElem::linear(d_inv.mul(&a).mul(&d))
        })
        .collect();
    // alternating form for which the basis above is symplectic
    let alt_small = SpaceFrame::symplectic(&small, m).form.unwrap();
    let mut g = MatF::zeros(&big, n, n);
    for r in 0..n {
        for c in 0..n {
            g.set(r, c, t.embed(alt_small.gram.get(r, c)));
        }
    }
    let alt = FormSpec::bilinear(FormKind::Alternating, g).in_basis(&d_inv);
    check_isometries("Sp in SU", frame.form.as_ref().unwrap(), &gens)?;
    check_isometries("Sp in SU", &alt, &gens)?;
    let expected = classical_order("Sp", n as u64, q)?;
    Ok((Presentation { name: format!("Sp({n},{q}) < SU({n},{q})"), frame, gens, expected_order: Some(expected) }, alt))
}

/// Sign of an orthogonal frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    fn ch(self) -> char {
        match self {
            Sign::Plus => '+',
            Sign::Minus => '-',
        }
    }
}

/// `SU_m(q) < Ω^ε_{2m}(q)` with `Q(v) = β♯(v, v)` and `ε = (-1)^m`.
pub fn su_in_omega(m: usize, q: u64, sign: Sign) -> Result<Presentation> {
    let expected_sign = if m % 2 == 0 { Sign::Plus } else { Sign::Minus };
    if sign != expected_sign {
        return Err(ConstructError::SignParityMismatch { m, expected: expected_sign.ch(), got: sign.ch() });
    }
    let su = gens_classical(Family::SU, m, q)?;
    let small = Field::of_order(q)?;
    let t = Tower::new(&small, 2)?;
    let qf = hermitian_to_quadratic(&t, su.frame.form.as_ref().unwrap())?;
    let st = to_standard(&qf, &blowup_gens(&t, &su.gens))?;
    let want = if sign == Sign::Plus { FrameKind::OrthPlus } else { FrameKind::OrthMinus };
    if st.frame.kind != want {
        return Err(ConstructError::SignParityMismatch { m, expected: expected_sign.ch(), got: sign.ch() });
    }
    let form = st.frame.form.as_ref().unwrap();
    for (i, g) in st.gens.iter().enumerate() {
        if !form.is_isometry(g) || !form.in_omega(g)? {
            return Err(ConstructError::GateFailed { group: "SU in Omega".into(), index: i, why: "not in Omega".into() });
        }
    }
    Ok(Presentation {
        name: format!("SU({m},{q}) < Omega{}({},{q})", sign.ch(), 2 * m),
        frame: st.frame,
        gens: st.gens,
        expected_order: su.expected_order,
    })
}

/// Field-extension subgroup `Sp_{2a}(q^b) < Sp_{2ab}(q)` for the form `Tr β♯`.
#[derive(Debug, Clone)]
pub struct SpExtField {
    pub group: Presentation,
    /// `Tr ∘ Q♯^ε` in frame coordinates (q even only).
    pub plus_form: Option<FormSpec>,
    pub minus_form: Option<FormSpec>,
}

pub fn sp_ext_field(a: usize, b: u32, q: u64) -> Result<SpExtField> {
    let small = Field::of_order(q)?;
    let t = Tower::new(&small, b)?;
    let qb = q.pow(b);
    let big_frame = SpaceFrame::symplectic(&t.big, a);
    let bform = big_frame.form.as_ref().unwrap();
    let tf = trace_form(&t, bform)?;
    let st = to_standard(&tf, &blowup_gens(&t, &sp_gens(&t.big, a)))?;
    check_isometries("Sp ext field", st.frame.form.as_ref().unwrap(), &st.gens)?;
    let (mut plus_form, mut minus_form) = (None, None);
    if q % 2 == 0 {
        let n = 2 * a;
        let plus = FormSpec::quadratic(vec![0; n], bform.gram.clone());
        let mut qd = vec![0; n];
        qd[n - 2] = 1;
        qd[n - 1] = t.big.find_mu_irreducible()?;
        let minus = FormSpec::quadratic(qd, bform.gram.clone());
        plus_form = Some(st.transport_form(&trace_form(&t, &plus)?));
        minus_form = Some(st.transport_form(&trace_form(&t, &minus)?));
    }
    let expected = classical_order("Sp", 2 * a as u64, qb)?;
    Ok(SpExtField {
        group: Presentation {
            name: format!("Sp({},{qb}) < Sp({},{q})", 2 * a, 2 * a * b as usize),
            frame: st.frame,
            gens: st.gens,
            expected_order: Some(expected),
        },
        plus_form,
        minus_form,
    })
}

/// An orthogonal-family group over GF(q^b) in its `Tr ∘ Q♯` embedding over GF(q).
pub fn orth_ext_field(family: Family, n: usize, b: u32, q: u64) -> Result<Presentation> {
    if !matches!(family.frame_kind(), FrameKind::OrthPlus | FrameKind::OrthMinus | FrameKind::OrthOdd) {
        return Err(ConstructError::Unsupported(format!("{family} is not orthogonal")));
    }
    let small = Field::of_order(q)?;
    let t = Tower::new(&small, b)?;
    let qb = q.pow(b);
    let inner = gens_classical(family, n, qb)?;
    let tf = trace_form(&t, inner.frame.form.as_ref().unwrap())?;
    let st = to_standard(&tf, &blowup_gens(&t, &inner.gens))?;
    check_isometries("orthogonal ext field", st.frame.form.as_ref().unwrap(), &st.gens)?;
    let sign = match st.frame.kind {
        FrameKind::OrthPlus => "+",
        FrameKind::OrthMinus => "-",
        _ => "",
    };
    Ok(Presentation {
        name: format!("{family}({n},{qb}) < GO{sign}({},{q})", n * b as usize),
        frame: st.frame,
        gens: st.gens,
        expected_order: inner.expected_order,
    })
}

/// `R:S` inside the stabilizer of `<e1>` in Sp_{2m}(q), optionally replaced by
/// its solvable residual.
///
/// `R(c,u)`: `f1 -> f1 + u + c e1`, `w -> w - β(w,u) e1` for `w ∈ <e2..fm>`.
pub fn parabolic_p1_sp(m: usize, q: u64, residual: bool) -> Result<(Presentation, Option<StabChain>)> {
    if m < 2 {
        return Err(ConstructError::Unsupported("P1 needs m >= 2".into()));
    }
    let frame = frame_for(Family::Sp, 2 * m, q)?;
    let k = frame.field.clone();
    let n = 2 * m;
    let form = frame.form.clone().unwrap();
    let mut gens = Vec::new();
    let r_elem = |c: Elt, u: &[Elt]| {
        let mut images = Vec::new();
        let mut f1 = u.to_vec();
        f1[0] = k.add(f1[0], c);
        f1[1] = 1;
        images.push((1, f1));
        for i in 2..n {
            let w = unit(n, i);
            let mut img = w.clone();
            img[0] = k.neg(form.eval(&w, u));
            images.push((i, img));
        }
        from_images(&k, n, &images)
    };
    for &t in &fp_basis(&k) {
        gens.push(r_elem(t, &vec![0; n]));
        for i in 2..n {
            let mut u = vec![0; n];
            u[i] = t;
            gens.push(r_elem(0, &u));
        }
    }
    for g in sp_gens(&k, m - 1) {
        let mut mat = MatF::identity(&k, n);
        for r in 0..n - 2 {
            for c in 0..n - 2 {
                mat.set(r + 2, c + 2, g.mat.get(r, c));
            }
        }
        gens.push(GroupElem::linear(mat));
    }
    check_isometries("P1", &form, &gens)?;
    let full = BigUint::from(q).pow(n as u32 - 1) * classical_order("Sp", n as u64 - 2, q)?;
    let p = Presentation { name: format!("R:Sp({},{q})", n - 2), frame, gens, expected_order: Some(full) };
    if !residual {
        return Ok((p, None));
    }
    let chain = p.checked_chain(1, crate::perm::DEFAULT_MAX_DOMAIN)?;
    let res = solvable_residual(&chain)?;
    let rp = Presentation {
        name: format!("P1[Sp({n},{q})]^(inf)"),
        frame: p.frame.clone(),
        gens: res.generators().to_vec(),
        expected_order: Some(res.order()),
    };
    Ok((rp, Some(res)))
}

/// Full-radical `R:T` in the stabilizer of `<e1..em>`, with Levi `T = SL_m`.
pub fn pm_residual(family: Family, m: usize, q: u64) -> Result<Presentation> {
    use Family::*;
    let (n, fam_frame) = match family {
        SL => (2 * m, SL),
        SU => (2 * m, SU),
        Sp => (2 * m, Sp),
        OmegaPlus => (2 * m, OmegaPlus),
        OmegaOdd => (2 * m + 1, OmegaOdd),
        _ => return Err(ConstructError::Unsupported(format!("P_m residual for {family}"))),
    };
    if m == 0 {
        return Err(ConstructError::Unsupported("m >= 1".into()));
    }
    let frame = frame_for(fam_frame, n, q)?;
    let k = frame.field.clone();
    let e = |i: usize| 2 * i;
    let f = |i: usize| 2 * i + 1;
    let conj = |x: Elt| if family == SU { k.frobenius(x, k.f() / 2) } else { x };
    let mut gens = Vec::new();
    // Levi: A on <e_i>, conj(A^{-T}) on <f_i>; for SL the second block is independent.
    for i in 0..m.saturating_sub(1) {
        for &t in &fp_basis(&k) {
            for (x, y) in [(i, i + 1), (i + 1, i)] {
                let mut a = unit(n, e(x));
                a[e(y)] = t;
                if family == SL {
                    gens.push(from_images(&k, n, &[(e(x), a)]));
                    let mut b = unit(n, f(x));
                    b[f(y)] = t;
                    gens.push(from_images(&k, n, &[(f(x), b)]));
                } else {
                    let mut b = unit(n, f(y));
                    b[f(x)] = k.neg(conj(t));
                    gens.push(from_images(&k, n, &[(e(x), a), (f(y), b)]));
                }
            }
        }
    }
    // Radical: f_i -> f_i + sum_j C_ij e_j (plus d-terms for odd dimension).
    let mut radical = |c: &[(usize, usize, Elt)]| {
        let mut images: Vec<(usize, Vec<Elt>)> = Vec::new();
        for &(i, j, x) in c {
            match images.iter_mut().find(|(r, _)| *r == f(i)) {
                Some((_, row)) => row[e(j)] = k.add(row[e(j)], x),
                None => {
                    let mut row = unit(n, f(i));
                    row[e(j)] = x;
                    images.push((f(i), row));
                }
            }
        }
        gens.push(from_images(&k, n, &images));
    };
    let skew: Vec<Elt> = if family == SU { unitary_consts(&k)?.skew } else { Vec::new() };
    for i in 0..m {
        for j in 0..m {
            match family {
                SL => {
                    for &t in &fp_basis(&k) {
                        radical(&[(i, j, t)]);
                    }
                }
                Sp if i <= j => {
                    for &t in &fp_basis(&k) {
                        if i == j {
                            radical(&[(i, i, t)]);
                        } else {
                            radical(&[(i, j, t), (j, i, t)]);
                        }
                    }
                }
                OmegaPlus | OmegaOdd if i < j => {
                    for &t in &fp_basis(&k) {
                        radical(&[(i, j, t), (j, i, k.neg(t))]);
                    }
                }
                SU if i < j => {
                    for &t in &fp_basis(&k) {
                        radical(&[(i, j, t), (j, i, k.neg(conj(t)))]);
                    }
                }
                SU if i == j => {
                    for &s in &skew {
                        radical(&[(i, i, s)]);
                    }
                }
                _ => {}
            }
        }
    }
    if family == OmegaOdd {
        let form = frame.form.as_ref().unwrap();
        for i in 0..m {
            for &t in &fp_basis(&k) {
                let mut v = vec![0; n];
                v[n - 1] = t;
                gens.push(siegel(form, &unit(n, e(i)), &v));
            }
        }
    }
    if family != SL {
        check_isometries("P_m", frame.form.as_ref().unwrap(), &gens)?;
    }
    let qq = BigUint::from(q);
    let mu = m as u32;
    let (radical_order, levi) = match family {
        SL => (qq.pow(mu * mu), classical_order("SL", m as u64, q)?.pow(2)),
        SU => (qq.pow(mu * mu), classical_order("SL", m as u64, q * q)?),
        Sp => (qq.pow(mu * (mu + 1) / 2), classical_order("SL", m as u64, q)?),
        OmegaPlus => (qq.pow(mu * (mu - 1) / 2), classical_order("SL", m as u64, q)?),
        _ => (qq.pow(mu * (mu - 1) / 2 + mu), classical_order("SL", m as u64, q)?),
    };
    Ok(Presentation {
        name: format!("P{m}[{family}({n},{q})] residual"),
        frame,
        gens,
        expected_order: Some(radical_order * levi),
    })
}

/// Swap `e_i <-> f_i` for all hyperbolic pairs.
pub fn gamma_swap(frame: &SpaceFrame) -> GroupElem {
    let k = &frame.field;
    let n = frame.n;
    let pairs = match frame.kind {
        FrameKind::OrthMinus => n / 2 - 1,
        _ => n / 2,
    };
    let mut images = Vec::new();
    for i in 0..pairs {
        images.push((2 * i, unit(n, 2 * i + 1)));
        images.push((2 * i + 1, unit(n, 2 * i)));
    }
    from_images(k, n, &images)
}

/// Swap `e_i <-> e_{l+i}` and `f_i <-> f_{l+i}` for `i < l`.
pub fn sigma_swap(frame: &SpaceFrame, l: usize) -> GroupElem {
    let k = &frame.field;
    let n = frame.n;
    let mut images = Vec::new();
    for i in 0..l {
        for s in 0..2 {
            let (x, y) = (2 * i + s, 2 * (l + i) + s);
            images.push((x, unit(n, y)));
            images.push((y, unit(n, x)));
        }
    }
    from_images(k, n, &images)
}

/// `<base, elem>`; with `check`, requires `elem` to normalize `<base>`.
pub fn adjoin(base: &Presentation, elem: &GroupElem, check: Option<&StabChain>) -> Result<Presentation> {
    if let Some(chain) = check {
        for g in &base.gens {
            if !chain.contains(&g.conjugate_by(elem)) {
                return Err(ConstructError::NotNormalizing);
            }
        }
    }
    let mut p = base.clone();
    if !elem.is_identity() {
        p.gens.push(elem.clone());
    }
    p.expected_order = None;
    Ok(p)
}

/// Derived subgroup of a presented group as a new presentation.
pub fn derived(p: &Presentation, seed: u64, max_orbit: u64) -> Result<Presentation> {
    let c = p.checked_chain(seed, max_orbit)?;
    let d = derived_subgroup(&c)?;
    Ok(Presentation {
        name: format!("{}'", p.name),
        frame: p.frame.clone(),
        gens: d.generators().to_vec(),
        expected_order: Some(d.order()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perm::DEFAULT_MAX_DOMAIN;

    fn order_of(p: &Presentation) -> BigUint {
        p.closed_chain(0, DEFAULT_MAX_DOMAIN).unwrap().order()
    }

    #[test]
    fn small_classical_orders() {
        for (fam, n, q) in [
            (Family::SL, 2, 4),
            (Family::SigmaL, 2, 4),
            (Family::Sp, 4, 2),
            (Family::SU, 3, 2),
            (Family::SU, 4, 2),
            (Family::OmegaMinus, 4, 2),
            (Family::OmegaOdd, 3, 3),
            (Family::SOPlus, 4, 3),
            (Family::GammaOMinus, 4, 4),
        ] {
            let p = gens_classical(fam, n, q).unwrap();
            assert_eq!(order_of(&p), p.expected_order.clone().unwrap(), "{}", p.name);
        }
    }

    #[test]
    fn blowup_is_a_homomorphism() {
        let t = Tower::new(&Field::get(2, 1).unwrap(), 2).unwrap();
        let p = gens_classical(Family::SigmaL, 2, 4).unwrap();
        for a in &p.gens {
            for b in &p.gens {
                assert_eq!(blowup_elem(&t, &a.compose(b)), blowup_elem(&t, a).compose(&blowup_elem(&t, b)));
            }
        }
    }

    #[test]
    fn sign_parity_is_enforced() {
        assert!(matches!(su_in_omega(3, 2, Sign::Plus), Err(ConstructError::SignParityMismatch { .. })));
    }

    #[test]
    fn p1_residual_sp6_2() {
        let (p, _) = parabolic_p1_sp(3, 2, true).unwrap();
        assert_eq!(p.expected_order.unwrap(), BigUint::from(11520u32));
    }
}

impl serde::Serialize for Family {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> serde::Deserialize<'de> for Family {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Family, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// A constructible subgroup. `P` is `u64` for a concrete instance and
/// `String` (shape arithmetic over the bindings) in the tables database.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum SubgroupRecipe<P = u64> {
    Classical { family: Family, n: P, q: P },
    /// `SL_a(q^b)`, or `ΣL_a(q^b)` with `frobenius`, blown up into `SL_{ab}(q)`.
    FieldExtBlowup { a: P, b: P, q: P, frobenius: bool },
    /// `Sp_{2m}(q)'` in `SL_{2m}(q)`.
    SpInSL { m: P, q: P },
    SpInSU { m: P, q: P },
    SUInOmegaMinus { m: P, q: P },
    SUInOmegaPlus { m: P, q: P },
    /// An orthogonal group of dimension `m` over `GF(q^b)` inside dimension `mb` over `GF(q)`.
    OmegaExtField { family: Family, m: P, b: P, q: P },
    /// `Sp_{2a}(q^b)` in `Sp_{2ab}(q)`; `derived` takes the derived subgroup.
    SpExtFieldTrace { a: P, b: P, q: P, derived: bool },
    ParabolicP1SpResidual { m: P, q: P },
    ParabolicPmResidual { family: Family, m: P, q: P },
}

impl<P> SubgroupRecipe<P> {
    /// Maps every numeric parameter, keeping tags and flags.
    pub fn try_map<T, E>(&self, f: impl Fn(&P) -> std::result::Result<T, E>) -> std::result::Result<SubgroupRecipe<T>, E> {
        use SubgroupRecipe::*;
        Ok(match self {
            Classical { family, n, q } => Classical { family: *family, n: f(n)?, q: f(q)? },
            FieldExtBlowup { a, b, q, frobenius } => FieldExtBlowup { a: f(a)?, b: f(b)?, q: f(q)?, frobenius: *frobenius },
            SpInSL { m, q } => SpInSL { m: f(m)?, q: f(q)? },
            SpInSU { m, q } => SpInSU { m: f(m)?, q: f(q)? },
            SUInOmegaMinus { m, q } => SUInOmegaMinus { m: f(m)?, q: f(q)? },
            SUInOmegaPlus { m, q } => SUInOmegaPlus { m: f(m)?, q: f(q)? },
            OmegaExtField { family, m, b, q } => OmegaExtField { family: *family, m: f(m)?, b: f(b)?, q: f(q)? },
            SpExtFieldTrace { a, b, q, derived } => SpExtFieldTrace { a: f(a)?, b: f(b)?, q: f(q)?, derived: *derived },
            ParabolicP1SpResidual { m, q } => ParabolicP1SpResidual { m: f(m)?, q: f(q)? },
            ParabolicPmResidual { family, m, q } => ParabolicPmResidual { family: *family, m: f(m)?, q: f(q)? },
        })
    }
}

impl SubgroupRecipe<u64> {
    /// Generators with their expected order. `seed` and `max_orbit` are used
    /// only by recipes that need a chain (derived subgroups, P1 residual).
    pub fn build(&self, seed: u64, max_orbit: u64) -> Result<Presentation> {
        use SubgroupRecipe::*;
        let us = |x: u64| x as usize;
        Ok(match *self {
            Classical { family, n, q } => gens_classical(family, us(n), q)?,
            FieldExtBlowup { a, b, q, frobenius } => field_ext_linear(us(a), b as u32, q, frobenius)?,
            SpInSL { m, q } => {
                let sp = gens_classical(Family::Sp, 2 * us(m), q)?;
                derived(&sp, seed, max_orbit)?
            }
            SpInSU { m, q } => sp_in_su(us(m), q)?.0,
            SUInOmegaMinus { m, q } => su_in_omega(us(m), q, Sign::Minus)?,
            SUInOmegaPlus { m, q } => su_in_omega(us(m), q, Sign::Plus)?,
            OmegaExtField { family, m, b, q } => orth_ext_field(family, us(m), b as u32, q)?,
            SpExtFieldTrace { a, b, q, derived: d } => {
                let g = sp_ext_field(us(a), b as u32, q)?.group;
                if d {
                    derived(&g, seed, max_orbit)?
                } else {
                    g
                }
            }
            ParabolicP1SpResidual { m, q } => parabolic_p1_sp(us(m), q, true)?.0,
            ParabolicPmResidual { family, m, q } => pm_residual(family, us(m), q)?,
        })
    }

    /// The trace form of the given sign preserved by an extension-field
    /// symplectic recipe, in the ambient frame (even `q` only).
    pub fn stored_form(&self, sign: Sign) -> Result<Option<FormSpec>> {
        match *self {
            SubgroupRecipe::SpExtFieldTrace { a, b, q, .. } => {
                let e = sp_ext_field(a as usize, b as u32, q)?;
                Ok(match sign {
                    Sign::Plus => e.plus_form,
                    Sign::Minus => e.minus_form,
                })
            }
            _ => Ok(None),
        }
    }

    /// Shape-grammar name of the constructed group, used in reports.
    pub fn label(&self) -> String {
        use SubgroupRecipe::*;
        match self {
            Classical { family, n, q } => format!("{family}({n},{q})"),
            FieldExtBlowup { a, b, q, frobenius } => {
                format!("{}({a},{})", if *frobenius { "SigmaL" } else { "SL" }, q.pow(*b as u32))
            }
            SpInSL { m, q } => format!("Sp({},{q})'", 2 * m),
            SpInSU { m, q } => format!("Sp({},{q})", 2 * m),
            SUInOmegaMinus { m, q } | SUInOmegaPlus { m, q } => format!("SU({m},{q})"),
            OmegaExtField { family, m, b, q } => format!("{family}({m},{})", q.pow(*b as u32)),
            SpExtFieldTrace { a, b, q, derived } => {
                format!("Sp({},{}){}", 2 * a, q.pow(*b as u32), if *derived { "'" } else { "" })
            }
            ParabolicP1SpResidual { m, q } => format!("P1(Sp({},{q}))^inf", 2 * m),
            ParabolicPmResidual { family, m, q } => format!("Pm({family},{m},{q})^inf"),
        }
    }
}

/// How the factor `K` is realized.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum KRecipe<P = u64> {
    /// Stabilizer in `G` of a point of a geometric domain of `G`'s frame.
    /// `value` selects the level of a `NormLevelSet`: an integer code or `"nonsquare"`.
    PointStabilizer { domain: String, value: Option<String> },
    /// Stabilizer of the quadratic form of the given sign stored by the `H` recipe.
    FormOrbit { sign: Sign },
    Group(SubgroupRecipe<P>),
}

impl<P> KRecipe<P> {
    pub fn try_map<T, E>(&self, f: impl Fn(&P) -> std::result::Result<T, E>) -> std::result::Result<KRecipe<T>, E> {
        Ok(match self {
            KRecipe::PointStabilizer { domain, value } => {
                KRecipe::PointStabilizer { domain: domain.clone(), value: value.clone() }
            }
            KRecipe::FormOrbit { sign } => KRecipe::FormOrbit { sign: *sign },
            KRecipe::Group(r) => KRecipe::Group(r.try_map(f)?),
        })
    }
}
