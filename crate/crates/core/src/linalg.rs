//! Dense matrices over GF(q), semilinear group elements, forms and frames.
//!
//! Vectors are rows and elements act on the right: `(A, i)` sends `v` to
//! `v^(σ^i) A`, where `σ` is the absolute Frobenius `x -> x^p`.

use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use thiserror::Error;

use crate::gf::{Elt, Field, GfError, Tower};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is singular")]
    SingularMatrix,
    #[error("element is not an isometry of the form")]
    NotAnIsometry,
    #[error("reflection vector is singular")]
    SingularReflectionVector,
    #[error("operation requires {0}")]
    WrongFormKind(&'static str),
    #[error("form is degenerate")]
    DegenerateForm,
    #[error("degenerate Wall form")]
    DecompositionFailure,
    #[error("vector search exceeded {0} candidates")]
    SearchTooLarge(u64),
    #[error(transparent)]
    Field(#[from] GfError),
}

/// Row-major matrix over a finite field.
#[derive(Clone)]
pub struct MatF {
    field: Arc<Field>,
    rows: usize,
    cols: usize,
    data: Vec<Elt>,
}

impl PartialEq for MatF {
    fn eq(&self, o: &Self) -> bool {
        self.rows == o.rows && self.cols == o.cols && self.data == o.data && self.field == o.field
    }
}
impl Eq for MatF {}

impl Hash for MatF {
    fn hash<H: Hasher>(&self, h: &mut H) {
        self.rows.hash(h);
        self.data.hash(h);
    }
}

impl fmt::Debug for MatF {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:?} {}x{}", self.field, self.rows, self.cols)?;
        for r in 0..self.rows {
            writeln!(f, "  {:?}", self.row(r))?;
        }
        Ok(())
    }
}

impl MatF {
    pub fn zeros(field: &Arc<Field>, rows: usize, cols: usize) -> MatF {
        MatF { field: field.clone(), rows, cols, data: vec![0; rows * cols] }
    }

    pub fn identity(field: &Arc<Field>, n: usize) -> MatF {
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    pub fn scalar(field: &Arc<Field>, n: usize, c: Elt) -> MatF {
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            m.data[i * n + i] = c;
        }
        m
    }

    pub fn from_rows(field: &Arc<Field>, rows: &[Vec<Elt>]) -> Result<MatF, LinalgError> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        if rows.iter().any(|x| x.len() != c) {
            return Err(LinalgError::DimensionMismatch("ragged rows".into()));
        }
        if rows.iter().flatten().any(|&x| !field.contains(x)) {
            return Err(LinalgError::Field(GfError::BadElement(field.q() as u64)));
        }
        Ok(MatF { field: field.clone(), rows: r, cols: c, data: rows.concat() })
    }

    pub fn field(&self) -> &Arc<Field> {
        &self.field
    }
    pub fn rows(&self) -> usize {
        self.rows
    }
    pub fn cols(&self) -> usize {
        self.cols
    }
    pub fn data(&self) -> &[Elt] {
        &self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Elt {
        self.data[r * self.cols + c]
    }
    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Elt) {
        self.data[r * self.cols + c] = v;
    }
    pub fn row(&self, r: usize) -> &[Elt] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
    pub fn to_rows(&self) -> Vec<Vec<Elt>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_identity(&self) -> bool {
        self.is_scalar_value(1)
    }

    fn is_scalar_value(&self, c: Elt) -> bool {
        (0..self.rows).all(|i| (0..self.cols).all(|j| self.get(i, j) == if i == j { c } else { 0 }))
    }

    pub fn is_scalar(&self) -> bool {
        self.rows > 0 && self.is_scalar_value(self.get(0, 0)) && self.get(0, 0) != 0
    }

    pub fn mul(&self, o: &MatF) -> MatF {
        assert_eq!(self.cols, o.rows, "matrix product dimensions");
        let k = &self.field;
        let mut out = vec![0; self.rows * o.cols];
        for i in 0..self.rows {
            for t in 0..self.cols {
                let a = self.data[i * self.cols + t];
                if a == 0 {
                    continue;
                }
                let orow = &o.data[t * o.cols..(t + 1) * o.cols];
                let dst = &mut out[i * o.cols..(i + 1) * o.cols];
                for (d, &b) in dst.iter_mut().zip(orow) {
                    if b != 0 {
                        *d = k.add(*d, k.mul(a, b));
                    }
                }
            }
        }
        MatF { field: self.field.clone(), rows: self.rows, cols: o.cols, data: out }
    }

    pub fn add(&self, o: &MatF) -> MatF {
        let data = self.data.iter().zip(&o.data).map(|(&a, &b)| self.field.add(a, b)).collect();
        MatF { data, ..self.clone() }
    }

    pub fn sub(&self, o: &MatF) -> MatF {
        let data = self.data.iter().zip(&o.data).map(|(&a, &b)| self.field.sub(a, b)).collect();
        MatF { data, ..self.clone() }
    }

    pub fn scale(&self, c: Elt) -> MatF {
        let data = self.data.iter().map(|&a| self.field.mul(a, c)).collect();
        MatF { data, ..self.clone() }
    }

    pub fn transpose(&self) -> MatF {
        let mut out = Self::zeros(&self.field, self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    /// Applies `x -> x^(p^k)` entrywise.
    pub fn frob(&self, k: u32) -> MatF {
        if k % self.field.f() == 0 {
            return self.clone();
        }
        let data = self.data.iter().map(|&a| self.field.frobenius(a, k)).collect();
        MatF { data, ..self.clone() }
    }

    /// Row vector times matrix.
    pub fn left_mul_vec(&self, v: &[Elt]) -> Vec<Elt> {
        let k = &self.field;
        let mut out = vec![0; self.cols];
        for (t, &a) in v.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (d, &b) in out.iter_mut().zip(self.row(t)) {
                if b != 0 {
                    *d = k.add(*d, k.mul(a, b));
                }
            }
        }
        out
    }

    /// Reduced row echelon form; returns the pivot columns.
    pub fn rref(&mut self) -> Vec<usize> {
        let k = self.field.clone();
        let mut pivots = Vec::new();
        let mut r = 0;
        for c in 0..self.cols {
            if r == self.rows {
                break;
            }
            let Some(pr) = (r..self.rows).find(|&i| self.get(i, c) != 0) else { continue };
            if pr != r {
                for j in 0..self.cols {
                    self.data.swap(pr * self.cols + j, r * self.cols + j);
                }
            }
            let inv = k.inv(self.get(r, c)).expect("pivot is nonzero");
            for j in 0..self.cols {
                let v = k.mul(self.get(r, j), inv);
                self.set(r, j, v);
            }
            for i in 0..self.rows {
                if i != r {
                    let f = self.get(i, c);
                    if f != 0 {
                        for j in 0..self.cols {
                            let v = k.sub(self.get(i, j), k.mul(f, self.get(r, j)));
                            self.set(i, j, v);
                        }
                    }
                }
            }
            pivots.push(c);
            r += 1;
        }
        pivots
    }

    pub fn rank(&self) -> usize {
        self.clone().rref().len()
    }

    pub fn inverse(&self) -> Result<MatF, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::DimensionMismatch("inverse of a non-square matrix".into()));
        }
        let n = self.rows;
        let mut aug = Self::zeros(&self.field, n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                aug.set(i, j, self.get(i, j));
            }
            aug.set(i, n + i, 1);
        }
        let piv = aug.rref();
        if piv.len() < n || piv[n - 1] != n - 1 {
            return Err(LinalgError::SingularMatrix);
        }
        let mut out = Self::zeros(&self.field, n, n);
        for i in 0..n {
            for j in 0..n {
                out.set(i, j, aug.get(i, n + j));
            }
        }
        Ok(out)
    }

    pub fn det(&self) -> Elt {
        let k = self.field.clone();
        let n = self.rows;
        let mut m = self.clone();
        let mut det = 1;
        for c in 0..n {
            let Some(pr) = (c..n).find(|&i| m.get(i, c) != 0) else { return 0 };
            if pr != c {
                for j in 0..n {
                    m.data.swap(pr * n + j, c * n + j);
                }
                det = k.neg(det);
            }
            let pv = m.get(c, c);
            det = k.mul(det, pv);
            let inv = k.inv(pv).expect("pivot is nonzero");
            for i in c + 1..n {
                let f = k.mul(m.get(i, c), inv);
                if f != 0 {
                    for j in c..n {
                        let v = k.sub(m.get(i, j), k.mul(f, m.get(c, j)));
                        m.set(i, j, v);
                    }
                }
            }
        }
        det
    }

    /// Basis (as rows) of `{ y : self * y^T = 0 }`.
    pub fn right_nullspace(&self) -> Vec<Vec<Elt>> {
        let mut m = self.clone();
        let piv = m.rref();
        let k = &self.field;
        let free: Vec<usize> = (0..self.cols).filter(|c| !piv.contains(c)).collect();
        free.iter()
            .map(|&fc| {
                let mut y = vec![0; self.cols];
                y[fc] = 1;
                for (r, &pc) in piv.iter().enumerate() {
                    y[pc] = k.neg(m.get(r, fc));
                }
                y
            })
            .collect()
    }

    /// Block diagonal sum.
    pub fn block_diag(blocks: &[MatF]) -> MatF {
        let n: usize = blocks.iter().map(|b| b.rows).sum();
        let m: usize = blocks.iter().map(|b| b.cols).sum();
        let mut out = Self::zeros(&blocks[0].field, n, m);
        let (mut r0, mut c0) = (0, 0);
        for b in blocks {
            for i in 0..b.rows {
                for j in 0..b.cols {
                    out.set(r0 + i, c0 + j, b.get(i, j));
                }
            }
            r0 += b.rows;
            c0 += b.cols;
        }
        out
    }
}

/// Semilinear element `(A, i)` acting as `v -> v^(σ^i) A`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct GroupElem {
    pub mat: MatF,
    pub frob: u32,
}

impl fmt::Debug for GroupElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GroupElem(frob={}) {:?}", self.frob, self.mat)
    }
}

impl GroupElem {
    pub fn linear(mat: MatF) -> GroupElem {
        GroupElem { mat, frob: 0 }
    }

    pub fn identity(field: &Arc<Field>, n: usize) -> GroupElem {
        Self::linear(MatF::identity(field, n))
    }

    /// Coordinatewise Frobenius `v -> v^(σ^k)`.
    pub fn frobenius(field: &Arc<Field>, n: usize, k: u32) -> GroupElem {
        GroupElem { mat: MatF::identity(field, n), frob: k % field.f() }
    }

    pub fn field(&self) -> &Arc<Field> {
        self.mat.field()
    }
    pub fn dim(&self) -> usize {
        self.mat.rows()
    }

    /// `(A,i)(B,j) = (A^(σ^j) B, i+j)`.
    pub fn compose(&self, o: &GroupElem) -> GroupElem {
        let f = self.field().f();
        GroupElem { mat: self.mat.frob(o.frob).mul(&o.mat), frob: (self.frob + o.frob) % f }
    }

    pub fn inverse(&self) -> GroupElem {
        let f = self.field().f();
        let back = (f - self.frob % f) % f;
        let inv = self.mat.inverse().expect("group elements are invertible");
        GroupElem { mat: inv.frob(back), frob: back }
    }

    pub fn pow(&self, mut e: u64) -> GroupElem {
        let mut r = Self::identity(self.field(), self.dim());
        let mut b = self.clone();
        while e > 0 {
            if e & 1 == 1 {
                r = r.compose(&b);
            }
            b = b.compose(&b);
            e >>= 1;
        }
        r
    }

    pub fn conjugate_by(&self, g: &GroupElem) -> GroupElem {
        g.inverse().compose(self).compose(g)
    }

    pub fn commutator(&self, o: &GroupElem) -> GroupElem {
        self.inverse().compose(&o.inverse()).compose(self).compose(o)
    }

    pub fn apply(&self, v: &[Elt]) -> Vec<Elt> {
        if self.frob == 0 {
            return self.mat.left_mul_vec(v);
        }
        let k = self.field();
        let w: Vec<Elt> = v.iter().map(|&x| k.frobenius(x, self.frob)).collect();
        self.mat.left_mul_vec(&w)
    }

    pub fn is_identity(&self) -> bool {
        self.frob == 0 && self.mat.is_identity()
    }

    pub fn is_scalar(&self) -> bool {
        self.frob == 0 && self.mat.is_scalar()
    }

    /// Rewrites the element in the basis whose rows are `p` (old coordinates).
    pub fn change_basis(&self, p: &MatF, p_inv: &MatF) -> GroupElem {
        GroupElem { mat: p.frob(self.frob).mul(&self.mat).mul(p_inv), frob: self.frob }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum FormKind {
    Alternating,
    Symmetric,
    Quadratic,
    Hermitian,
}

/// A sesquilinear or quadratic form given by its Gram matrix.
///
/// For quadratic forms `gram` is the polar form and `qdiag[i] = Q(e_i)`, so
/// `Q(v) = sum qdiag[i] v_i^2 + sum_{i<j} gram[i][j] v_i v_j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FormSpec {
    pub kind: FormKind,
    pub gram: MatF,
    pub qdiag: Option<Vec<Elt>>,
}

impl FormSpec {
    pub fn bilinear(kind: FormKind, gram: MatF) -> FormSpec {
        FormSpec { kind, gram, qdiag: None }
    }

    /// Quadratic form from `Q(e_i)` and the polar Gram matrix.
    pub fn quadratic(qdiag: Vec<Elt>, gram: MatF) -> FormSpec {
        FormSpec { kind: FormKind::Quadratic, gram, qdiag: Some(qdiag) }
    }

    pub fn field(&self) -> &Arc<Field> {
        self.gram.field()
    }
    pub fn dim(&self) -> usize {
        self.gram.rows()
    }

    fn conj_power(&self) -> u32 {
        self.field().f() / 2
    }

    /// `β(u, v)`; Hermitian forms are linear in `u` and semilinear in `v`.
    pub fn eval(&self, u: &[Elt], v: &[Elt]) -> Elt {
        let k = self.field();
        let gv: Vec<Elt> = match self.kind {
            FormKind::Hermitian => v.iter().map(|&x| k.frobenius(x, self.conj_power())).collect(),
            _ => v.to_vec(),
        };
        let ug = self.gram.left_mul_vec(u);
        ug.iter().zip(&gv).fold(0, |acc, (&a, &b)| k.add(acc, k.mul(a, b)))
    }

    /// `Q(v)` for quadratic forms, `β(v, v)` otherwise.
    pub fn q_eval(&self, v: &[Elt]) -> Elt {
        let Some(qd) = &self.qdiag else { return self.eval(v, v) };
        let k = self.field();
        let n = v.len();
        let mut acc = 0;
        for i in 0..n {
            if v[i] == 0 {
                continue;
            }
            acc = k.add(acc, k.mul(qd[i], k.mul(v[i], v[i])));
            for j in i + 1..n {
                let g = self.gram.get(i, j);
                if g != 0 && v[j] != 0 {
                    acc = k.add(acc, k.mul(g, k.mul(v[i], v[j])));
                }
            }
        }
        acc
    }

    /// Whether `g` preserves the form, up to the Frobenius twist of `g`.
    pub fn is_isometry(&self, g: &GroupElem) -> bool {
        let n = self.dim();
        if g.dim() != n || g.field() != self.field() {
            return false;
        }
        let k = self.field();
        let images: Vec<Vec<Elt>> = (0..n).map(|i| g.mat.row(i).to_vec()).collect();
        for i in 0..n {
            for j in 0..n {
                let want = k.frobenius(self.gram.get(i, j), g.frob);
                if self.eval(&images[i], &images[j]) != want {
                    return false;
                }
            }
            if let Some(qd) = &self.qdiag {
                if self.q_eval(&images[i]) != k.frobenius(qd[i], g.frob) {
                    return false;
                }
            }
        }
        true
    }

    /// Form transported to the basis given by the rows of `p`.
    pub fn in_basis(&self, p: &MatF) -> FormSpec {
        let n = p.rows();
        let rows: Vec<Vec<Elt>> = (0..n).map(|i| p.row(i).to_vec()).collect();
        let mut gram = MatF::zeros(self.field(), n, n);
        for i in 0..n {
            for j in 0..n {
                gram.set(i, j, self.eval(&rows[i], &rows[j]));
            }
        }
        let qdiag = self.qdiag.as_ref().map(|_| rows.iter().map(|r| self.q_eval(r)).collect());
        FormSpec { kind: self.kind, gram, qdiag }
    }

    pub fn is_nondegenerate(&self) -> bool {
        self.gram.rank() == self.dim()
    }

    /// Reflection `v -> v - β(v,w)/Q(w) w` in a nonsingular vector.
    pub fn reflection(&self, w: &[Elt]) -> Result<GroupElem, LinalgError> {
        if self.kind != FormKind::Quadratic {
            return Err(LinalgError::WrongFormKind("a quadratic form"));
        }
        let k = self.field();
        let qw = self.q_eval(w);
        if qw == 0 {
            return Err(LinalgError::SingularReflectionVector);
        }
        let inv = k.inv(qw)?;
        let n = self.dim();
        let mut m = MatF::identity(k, n);
        for i in 0..n {
            let mut e = vec![0; n];
            e[i] = 1;
            let c = k.mul(self.eval(&e, w), inv);
            for j in 0..n {
                let v = k.sub(m.get(i, j), k.mul(c, w[j]));
                m.set(i, j, v);
            }
        }
        Ok(GroupElem::linear(m))
    }

    /// Dickson invariant `rank(g - 1) mod 2` of a linear isometry (q even).
    pub fn dickson_invariant(&self, g: &GroupElem) -> Result<u32, LinalgError> {
        if self.kind != FormKind::Quadratic || self.field().p() != 2 {
            return Err(LinalgError::WrongFormKind("a quadratic form in characteristic 2"));
        }
        if g.frob != 0 || !self.is_isometry(g) {
            return Err(LinalgError::NotAnIsometry);
        }
        let n = self.dim();
        Ok((g.mat.sub(&MatF::identity(self.field(), n)).rank() % 2) as u32)
    }

    /// Spinor norm class of a linear isometry (q odd): `true` when square.
    ///
    /// The element is peeled into reflections `r_w`; each step either fixes
    /// one more vector or, when `v g - v` is singular for every candidate,
    /// multiplies by one auxiliary reflection.
    pub fn spinor_norm_is_square(&self, g: &GroupElem) -> Result<bool, LinalgError> {
        if self.kind != FormKind::Quadratic || self.field().p() == 2 {
            return Err(LinalgError::WrongFormKind("a quadratic form in odd characteristic"));
        }
        if g.frob != 0 || !self.is_isometry(g) {
            return Err(LinalgError::NotAnIsometry);
        }
        // Wall form on W = im(1 - g): [x(1-g), y(1-g)] = B(x, y(1-g)); its
        // discriminant is the spinor norm (a reflection r_w gives Q(w)).
        let k = self.field().clone();
        let n = self.dim();
        let m = MatF::identity(&k, n).sub(&g.mat);
        let mut picked: Vec<usize> = Vec::new();
        let mut rows: Vec<Vec<Elt>> = Vec::new();
        for i in 0..n {
            rows.push(m.row(i).to_vec());
            if MatF::from_rows(&k, &rows)?.rank() == rows.len() {
                picked.push(i);
            } else {
                rows.pop();
            }
        }
        let d = picked.len();
        let mut wall = MatF::zeros(&k, d, d);
        for (a, &i) in picked.iter().enumerate() {
            for (b, &j) in picked.iter().enumerate() {
                let u = m.row(j);
                let v = (0..n).fold(0, |acc, c| k.add(acc, k.mul(self.gram.get(i, c), u[c])));
                wall.set(a, b, v);
            }
        }
        let disc = if d == 0 { 1 } else { wall.det() };
        if disc == 0 {
            return Err(LinalgError::DecompositionFailure);
        }
        Ok(k.is_square(disc))
    }

    /// Whether a linear isometry lies in Ω: Dickson invariant 0 for q even,
    /// determinant 1 and square spinor norm for q odd.
    pub fn in_omega(&self, g: &GroupElem) -> Result<bool, LinalgError> {
        if self.field().p() == 2 {
            Ok(self.dickson_invariant(g)? == 0)
        } else {
            if g.mat.det() != 1 {
                return Ok(false);
            }
            self.spinor_norm_is_square(g)
        }
    }
}

/// Vector with coordinates read from `code` in base `q`, first coordinate lowest.
pub fn decode_vector(q: u32, n: usize, mut code: u64) -> Vec<Elt> {
    let mut v = vec![0; n];
    for x in v.iter_mut() {
        *x = (code % q as u64) as Elt;
        code /= q as u64;
    }
    v
}

pub fn encode_vector(q: u32, v: &[Elt]) -> u64 {
    v.iter().rev().fold(0u64, |acc, &x| acc * q as u64 + x as u64)
}

/// Witt type of a standard frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum FrameKind {
    Linear,
    Symplectic,
    Unitary,
    OrthPlus,
    OrthMinus,
    OrthOdd,
}

/// A vector space with a standard basis and form.
///
/// Basis orders: symplectic, unitary and plus type use `e1,f1,...,em,fm`;
/// unitary in odd dimension appends `d` with `β(d,d) = 1`; minus type ends
/// with `d,d'` where `Q(d) = 1`, `β(d,d') = 1`, `Q(d') = μ`; odd orthogonal
/// appends `d` with `Q(d) = dval`.
#[derive(Clone, Debug)]
pub struct SpaceFrame {
    pub kind: FrameKind,
    pub field: Arc<Field>,
    pub n: usize,
    pub form: Option<FormSpec>,
    pub labels: Vec<String>,
    pub mu: Option<Elt>,
}

fn hyperbolic_labels(m: usize) -> Vec<String> {
    (1..=m).flat_map(|i| [format!("e{i}"), format!("f{i}")]).collect()
}

impl SpaceFrame {
    pub fn linear(field: &Arc<Field>, n: usize) -> SpaceFrame {
        SpaceFrame {
            kind: FrameKind::Linear,
            field: field.clone(),
            n,
            form: None,
            labels: (1..=n).map(|i| format!("e{i}")).collect(),
            mu: None,
        }
    }

    pub fn symplectic(field: &Arc<Field>, m: usize) -> SpaceFrame {
        let n = 2 * m;
        let mut g = MatF::zeros(field, n, n);
        for i in 0..m {
            g.set(2 * i, 2 * i + 1, 1);
            g.set(2 * i + 1, 2 * i, field.neg(1));
        }
        SpaceFrame {
            kind: FrameKind::Symplectic,
            field: field.clone(),
            n,
            form: Some(FormSpec::bilinear(FormKind::Alternating, g)),
            labels: hyperbolic_labels(m),
            mu: None,
        }
    }

    /// Hermitian frame over `field = GF(q^2)`.
    pub fn unitary(field: &Arc<Field>, n: usize) -> Result<SpaceFrame, LinalgError> {
        if field.f() % 2 != 0 {
            return Err(LinalgError::WrongFormKind("a field of square order"));
        }
        let m = n / 2;
        let mut g = MatF::zeros(field, n, n);
        for i in 0..m {
            g.set(2 * i, 2 * i + 1, 1);
            g.set(2 * i + 1, 2 * i, 1);
        }
        let mut labels = hyperbolic_labels(m);
        if n % 2 == 1 {
            g.set(n - 1, n - 1, 1);
            labels.push("d".into());
        }
        Ok(SpaceFrame {
            kind: FrameKind::Unitary,
            field: field.clone(),
            n,
            form: Some(FormSpec::bilinear(FormKind::Hermitian, g)),
            labels,
            mu: None,
        })
    }

    pub fn orthogonal_plus(field: &Arc<Field>, m: usize) -> SpaceFrame {
        let n = 2 * m;
        let mut g = MatF::zeros(field, n, n);
        for i in 0..m {
            g.set(2 * i, 2 * i + 1, 1);
            g.set(2 * i + 1, 2 * i, 1);
        }
        SpaceFrame {
            kind: FrameKind::OrthPlus,
            field: field.clone(),
            n,
            form: Some(FormSpec::quadratic(vec![0; n], g)),
            labels: hyperbolic_labels(m),
            mu: None,
        }
    }

    pub fn orthogonal_minus(field: &Arc<Field>, m: usize) -> Result<SpaceFrame, LinalgError> {
        let n = 2 * m;
        let mu = field.find_mu_irreducible()?;
        let mut g = MatF::zeros(field, n, n);
        for i in 0..m {
            g.set(2 * i, 2 * i + 1, 1);
            g.set(2 * i + 1, 2 * i, 1);
        }
        let two = field.from_int(2);
        let mut qd = vec![0; n];
        qd[n - 2] = 1;
        qd[n - 1] = mu;
        g.set(n - 2, n - 2, field.mul(two, 1));
        g.set(n - 1, n - 1, field.mul(two, mu));
        let mut labels = hyperbolic_labels(m - 1);
        labels.push("d".into());
        labels.push("d'".into());
        Ok(SpaceFrame {
            kind: FrameKind::OrthMinus,
            field: field.clone(),
            n,
            form: Some(FormSpec::quadratic(qd, g)),
            labels,
            mu: Some(mu),
        })
    }

    /// Odd-dimensional orthogonal frame (q odd) with `Q(d) = dval`.
    pub fn orthogonal_odd(field: &Arc<Field>, m: usize, dval: Elt) -> Result<SpaceFrame, LinalgError> {
        if field.p() == 2 {
            return Err(LinalgError::WrongFormKind("odd characteristic"));
        }
        let n = 2 * m + 1;
        let mut g = MatF::zeros(field, n, n);
        for i in 0..m {
            g.set(2 * i, 2 * i + 1, 1);
            g.set(2 * i + 1, 2 * i, 1);
        }
        g.set(n - 1, n - 1, field.mul(field.from_int(2), dval));
        let mut qd = vec![0; n];
        qd[n - 1] = dval;
        let mut labels = hyperbolic_labels(m);
        labels.push("d".into());
        Ok(SpaceFrame {
            kind: FrameKind::OrthOdd,
            field: field.clone(),
            n,
            form: Some(FormSpec::quadratic(qd, g)),
            labels,
            mu: None,
        })
    }

    pub fn form(&self) -> Option<&FormSpec> {
        self.form.as_ref()
    }
}

/// Subspace enumeration cap for vector searches.
const SEARCH_CAP: u64 = 1 << 22;

fn span_vectors<'a>(k: &Arc<Field>, basis: &'a [Vec<Elt>]) -> Result<impl Iterator<Item = Vec<Elt>> + 'a, LinalgError> {
    let s = basis.len();
    let total = (k.q() as u64).checked_pow(s as u32).unwrap_or(u64::MAX);
    if total > SEARCH_CAP {
        return Err(LinalgError::SearchTooLarge(total));
    }
    let n = basis.first().map_or(0, |b| b.len());
    let k2 = k.clone();
    Ok((1..total).map(move |code| {
        let y = decode_vector(k2.q(), s, code);
        combine(&k2, &y, basis, n)
    }))
}

fn combine(k: &Arc<Field>, y: &[Elt], basis: &[Vec<Elt>], n: usize) -> Vec<Elt> {
    let mut x = vec![0; n];
    for (c, b) in y.iter().zip(basis) {
        if *c == 0 {
            continue;
        }
        for (xi, &bi) in x.iter_mut().zip(b) {
            *xi = k.add(*xi, k.mul(*c, bi));
        }
    }
    x
}

/// Vectors of `span(basis)` orthogonal (on the left) to each of `vs`.
fn perp_within(form: &FormSpec, basis: &[Vec<Elt>], vs: &[Vec<Elt>]) -> Vec<Vec<Elt>> {
    let k = form.field();
    let n = form.dim();
    let s = basis.len();
    let mut cons = MatF::zeros(k, vs.len(), s);
    for (r, v) in vs.iter().enumerate() {
        for (c, b) in basis.iter().enumerate() {
            cons.set(r, c, form.eval(b, v));
        }
    }
    cons.right_nullspace().iter().map(|y| combine(k, y, basis, n)).collect()
}

fn scale_vec(k: &Arc<Field>, v: &[Elt], c: Elt) -> Vec<Elt> {
    v.iter().map(|&x| k.mul(x, c)).collect()
}

fn add_vec(k: &Arc<Field>, u: &[Elt], v: &[Elt]) -> Vec<Elt> {
    u.iter().zip(v).map(|(&a, &b)| k.add(a, b)).collect()
}

/// Change of basis onto a standard frame.
///
/// Returns the target frame and `P` whose rows are the new basis vectors in
/// the old coordinates, so `form.in_basis(&P)` equals the frame's form.
pub fn standardize(form: &FormSpec) -> Result<(SpaceFrame, MatF), LinalgError> {
    let k = form.field().clone();
    let n = form.dim();
    if !form.is_nondegenerate() {
        return Err(LinalgError::DegenerateForm);
    }
    let mut rest: Vec<Vec<Elt>> = (0..n)
        .map(|i| {
            let mut e = vec![0; n];
            e[i] = 1;
            e
        })
        .collect();
    let mut out: Vec<Vec<Elt>> = Vec::new();
    let lambda = if form.kind == FormKind::Hermitian {
        let small = Field::get(k.p(), k.f() / 2)?;
        Some(Tower::new(&small, 2)?.find_lambda()?)
    } else {
        None
    };
    let conj = |x: Elt| k.frobenius(x, k.f() / 2);
    loop {
        if rest.is_empty() {
            break;
        }
        // isotropic (singular) vector in the remaining space
        let v = match form.kind {
            FormKind::Alternating => Some(rest[0].clone()),
            _ if rest.len() == 1 => None,
            _ => span_vectors(&k, &rest)?.find(|x| form.q_eval(x) == 0),
        };
        let Some(v) = v else { break };
        let w0 = rest
            .iter()
            .find(|b| form.eval(&v, b) != 0)
            .cloned()
            .ok_or(LinalgError::DegenerateForm)?;
        let c = form.eval(&v, &w0);
        let w = match form.kind {
            FormKind::Hermitian => scale_vec(&k, &w0, conj(k.inv(c)?)),
            _ => scale_vec(&k, &w0, k.inv(c)?),
        };
        let w = match form.kind {
            FormKind::Alternating => w,
            FormKind::Hermitian => {
                let t = k.mul(k.neg(form.q_eval(&w)), lambda.unwrap());
                add_vec(&k, &w, &scale_vec(&k, &v, t))
            }
            _ => {
                // β(v,w) = 1, so Q(w - Q(w) v) = 0
                let qw = form.q_eval(&w);
                add_vec(&k, &w, &scale_vec(&k, &v, k.neg(qw)))
            }
        };
        if form.kind == FormKind::Symmetric {
            return Err(LinalgError::WrongFormKind("alternating, quadratic or hermitian"));
        }
        rest = perp_within(form, &rest, &[v.clone(), w.clone()]);
        out.push(v);
        out.push(w);
    }
    let m = out.len() / 2;
    let frame = match (form.kind, rest.len()) {
        (FormKind::Alternating, 0) => SpaceFrame::symplectic(&k, m),
        (FormKind::Hermitian, 0) => SpaceFrame::unitary(&k, n)?,
        (FormKind::Hermitian, 1) => {
            let c = form.q_eval(&rest[0]);
            let small_q = (k.q() as f64).sqrt().round() as u64;
            let a = k
                .elements()
                .find(|&a| a != 0 && k.mul(k.pow(a, small_q + 1), c) == 1)
                .ok_or(LinalgError::DegenerateForm)?;
            out.push(scale_vec(&k, &rest[0], a));
            SpaceFrame::unitary(&k, n)?
        }
        (FormKind::Quadratic, 0) => SpaceFrame::orthogonal_plus(&k, m),
        (FormKind::Quadratic, 2) => {
            let frame = SpaceFrame::orthogonal_minus(&k, m + 1)?;
            let mu = frame.mu.unwrap();
            let vecs: Vec<Vec<Elt>> = span_vectors(&k, &rest)?.collect();
            let mut found = None;
            'search: for d in vecs.iter().filter(|d| form.q_eval(d) == 1) {
                for d2 in &vecs {
                    if form.eval(d, d2) == 1 && form.q_eval(d2) == mu {
                        found = Some((d.clone(), d2.clone()));
                        break 'search;
                    }
                }
            }
            let (d, d2) = found.ok_or(LinalgError::DegenerateForm)?;
            out.push(d);
            out.push(d2);
            frame
        }
        (FormKind::Quadratic, 1) => {
            let c = form.q_eval(&rest[0]);
            let (dval, a) = match k.sqrt(c) {
                Some(s) => (1, k.inv(s)?),
                None => {
                    let nu = k.primitive();
                    let s = k.sqrt(k.div(c, nu)?).ok_or(LinalgError::DegenerateForm)?;
                    (nu, k.inv(s)?)
                }
            };
            out.push(scale_vec(&k, &rest[0], a));
            SpaceFrame::orthogonal_odd(&k, m, dval)?
        }
        _ => return Err(LinalgError::DegenerateForm),
    };
    let p = MatF::from_rows(&k, &out)?;
    let check = form.in_basis(&p);
    let target = frame.form.as_ref().unwrap();
    if check.gram != target.gram || check.qdiag != target.qdiag {
        return Err(LinalgError::DegenerateForm);
    }
    Ok((frame, p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spinor_norm_of_reflection_products() {
        let k = Field::get(5, 1).unwrap();
        let frame = SpaceFrame::orthogonal_plus(&k, 2);
        let form = frame.form.unwrap();
        let (a, b) = (vec![1, 1, 0, 0], vec![1, k.primitive(), 0, 0]);
        let (ra, rb) = (form.reflection(&a).unwrap(), form.reflection(&b).unwrap());
        assert!(form.in_omega(&ra.compose(&ra)).unwrap());
        assert!(!form.in_omega(&ra.compose(&rb)).unwrap());
        assert!(!form.in_omega(&ra).unwrap());
        let c = vec![0, 0, 1, 4];
        assert!(form.in_omega(&ra.compose(&form.reflection(&c).unwrap())).unwrap() == k.is_square(k.mul(form.q_eval(&a), form.q_eval(&c))));
    }

    #[test]
    fn compose_matches_action() {
        let k = Field::get(2, 2).unwrap();
        let w = k.generator();
        let a = GroupElem { mat: MatF::from_rows(&k, &[vec![1, w], vec![0, 1]]).unwrap(), frob: 1 };
        let b = GroupElem { mat: MatF::from_rows(&k, &[vec![w, 0], vec![1, 1]]).unwrap(), frob: 0 };
        let v = vec![w, 1];
        assert_eq!(a.compose(&b).apply(&v), b.apply(&a.apply(&v)));
        assert!(a.compose(&a.inverse()).is_identity());
    }

    #[test]
    fn reflection_is_isometry_and_involution() {
        let k = Field::get(3, 1).unwrap();
        let fr = SpaceFrame::orthogonal_odd(&k, 1, 1).unwrap();
        let form = fr.form.unwrap();
        let r = form.reflection(&[0, 0, 1]).unwrap();
        assert!(form.is_isometry(&r));
        assert!(r.compose(&r).is_identity());
        assert!(!form.spinor_norm_is_square(&r).unwrap() || k.is_square(1));
    }

    #[test]
    fn standardize_round_trip() {
        let k = Field::get(2, 1).unwrap();
        let fr = SpaceFrame::orthogonal_minus(&k, 3).unwrap();
        let form = fr.form.unwrap();
        // scramble with an invertible matrix
        let p = MatF::from_rows(
            &k,
            &[
                vec![1, 1, 0, 0, 0, 0],
                vec![0, 1, 1, 0, 0, 0],
                vec![0, 0, 1, 1, 0, 0],
                vec![0, 0, 0, 1, 1, 0],
                vec![0, 0, 0, 0, 1, 1],
                vec![0, 0, 0, 0, 0, 1],
            ],
        )
        .unwrap();
        let scrambled = form.in_basis(&p);
        let (frame, s) = standardize(&scrambled).unwrap();
        assert_eq!(frame.kind, FrameKind::OrthMinus);
        assert_eq!(scrambled.in_basis(&s).qdiag, frame.form.unwrap().qdiag);
    }
}
