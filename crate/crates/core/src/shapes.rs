//! ASCII structure strings for finite groups and their orders.
//!
//! ```text
//! expr  := prod ('/' int)?
//! prod  := term (' x ' term)*
//! term  := unit ((':' | '.') unit)*
//! unit  := atom "'"?
//! atom  := FAMILY '(' arith (',' arith)* ')' | NAMED | base '^' expo
//!        | '[' arith ']' | int | var | '(' expr ')'
//! ```
//!
//! Semantics are order-only: `:`, `.` and ` x ` multiply orders, `/k`
//! divides exactly, `[n]` is a group of order `n` and `'` is the derived
//! subgroup (tabulated for the few non-perfect cases).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::gf::prime_power;

/// Integer bindings for the symbols of a shape.
pub type Bindings = BTreeMap<String, i64>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ShapeError {
    #[error("parse error at {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("unknown family or name {0:?}")]
    UnknownFamily(String),
    #[error("unbound symbol {0:?}")]
    UnboundSymbol(String),
    #[error("non-integral quotient {0} / {1}")]
    NonIntegralQuotient(String, String),
    #[error("invalid parameter for {0}: {1}")]
    InvalidParameter(String, String),
    #[error("derived subgroup of {0} is not tabulated")]
    UnsupportedDerived(String),
}

fn parse_err<T>(pos: usize, msg: impl Into<String>) -> Result<T, ShapeError> {
    Err(ShapeError::Parse { pos, msg: msg.into() })
}

/// Family names accepted before an argument list.
pub const FAMILIES: &[&str] = &[
    "SL", "GL", "PSL", "PGL", "SigmaL", "GammaL", "PSigmaL", "PGammaL", "SU", "GU", "PSU", "PGU", "SigmaU",
    "GammaU", "Sp", "PSp", "GammaSp", "Omega", "Omega+", "Omega-", "POmega+", "POmega-", "SO", "SO+", "SO-", "O",
    "O+", "O-", "GO", "GO+", "GO-", "GammaO+", "GammaO-", "Spin", "G2", "GammaG2", "Sz", "2G2", "F4", "A", "S",
    "D", "AGL", "ASL", "AGammaL",
];

const SIGNED_STEMS: &[&str] = &["Omega", "POmega", "O", "GO", "SO", "GammaO"];
const FUNCTIONS: &[&str] = &["gcd", "ppart", "sqrt", "if", "min", "max"];
const PRED_FUNCTIONS: &[&str] = &["odd", "even", "prime", "prime_power", "square"];

fn named_orders() -> &'static BTreeMap<String, BigUint> {
    static T: OnceLock<BTreeMap<String, BigUint>> = OnceLock::new();
    T.get_or_init(|| {
        let raw: BTreeMap<String, String> =
            serde_json::from_str(include_str!("../data/named_orders.json")).expect("named order table");
        raw.into_iter().map(|(k, v)| (k, v.parse().expect("decimal order"))).collect()
    })
}

pub fn is_named(s: &str) -> bool {
    named_orders().contains_key(s)
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Int(BigUint),
    Ident(String),
    Times,
    Sym(&'static str),
}

#[derive(Debug, Clone)]
struct Lexed {
    tok: Tok,
    pos: usize,
}

fn lex(s: &str) -> Result<Vec<Lexed>, ShapeError> {
    let b = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    const SYMS2: &[&str] = &["==", "!=", "<=", ">=", "&&", "||"];
    const SYMS1: &[&str] =
        &["(", ")", "[", "]", ",", ":", ".", "^", "'", "+", "-", "*", "/", "%", "<", ">", "!"];
    while i < b.len() {
        let c = b[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() {
            while i < b.len() && b[i].is_ascii_digit() {
                i += 1;
            }
            if i < b.len() && b[i].is_ascii_uppercase() {
                while i < b.len() && (b[i] as char).is_ascii_alphanumeric() {
                    i += 1;
                }
                out.push(Lexed { tok: Tok::Ident(s[start..i].to_string()), pos: start });
                continue;
            }
            out.push(Lexed { tok: Tok::Int(s[start..i].parse().unwrap()), pos: start });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < b.len() && ((b[i] as char).is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            let mut id = s[start..i].to_string();
            if SIGNED_STEMS.contains(&id.as_str())
                && i + 1 < b.len()
                && (b[i] == b'+' || b[i] == b'-')
                && b[i + 1] == b'('
            {
                id.push(b[i] as char);
                i += 1;
            }
            let tok = if id == "x" { Tok::Times } else { Tok::Ident(id) };
            out.push(Lexed { tok, pos: start });
            continue;
        }
        if let Some(sym) = SYMS2.iter().find(|x| s[i..].starts_with(**x)) {
            out.push(Lexed { tok: Tok::Sym(sym), pos: start });
            i += 2;
            continue;
        }
        if let Some(sym) = SYMS1.iter().find(|x| s[i..].starts_with(**x)) {
            out.push(Lexed { tok: Tok::Sym(sym), pos: start });
            i += 1;
            continue;
        }
        return parse_err(i, format!("unexpected character {c:?}"));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Mod,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Mod => "%",
            BinOp::Pow => "^",
        }
    }
}

/// Integer expression; parentheses are kept so printing is exact.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Arith {
    Int(BigUint),
    Var(String),
    Neg(Box<Arith>),
    Bin(BinOp, Box<Arith>, Box<Arith>),
    Call(String, Vec<Arith>),
    If(Box<Pred>, Box<Arith>, Box<Arith>),
    Paren(Box<Arith>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

/// Boolean expression over integer bindings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Pred {
    Cmp(CmpOp, Arith, Arith),
    And(Box<Pred>, Box<Pred>),
    Or(Box<Pred>, Box<Pred>),
    Not(Box<Pred>),
    Call(String, Vec<Arith>),
    Paren(Box<Pred>),
}

/// Parsed structure string.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Shape {
    Family(String, Vec<Arith>),
    Named(String),
    Power(Arith, Arith),
    Bracket(Arith),
    Cyclic(Arith),
    Paren(Box<Shape>),
    Derived(Box<Shape>),
    Split(Box<Shape>, Box<Shape>),
    Ext(Box<Shape>, Box<Shape>),
    Direct(Vec<Shape>),
    Quotient(Box<Shape>, Arith),
}

struct Parser {
    toks: Vec<Lexed>,
    i: usize,
    end: usize,
}

impl Parser {
    fn new(s: &str) -> Result<Parser, ShapeError> {
        Ok(Parser { toks: lex(s)?, i: 0, end: s.len() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.i).map(|t| &t.tok)
    }
    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.i + k).map(|t| &t.tok)
    }
    fn pos(&self) -> usize {
        self.toks.get(self.i).map_or(self.end, |t| t.pos)
    }
    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }
    fn eat(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.i += 1;
            true
        } else {
            false
        }
    }
    fn expect(&mut self, s: &str) -> Result<(), ShapeError> {
        if self.eat(s) {
            Ok(())
        } else {
            parse_err(self.pos(), format!("expected {s:?}"))
        }
    }
    fn done(&self) -> Result<(), ShapeError> {
        if self.i == self.toks.len() {
            Ok(())
        } else {
            parse_err(self.pos(), "trailing input")
        }
    }

    fn shape_expr(&mut self) -> Result<Shape, ShapeError> {
        let p = self.shape_prod()?;
        if self.eat("/") {
            let k = self.arith_primary()?;
            return Ok(Shape::Quotient(Box::new(p), k));
        }
        Ok(p)
    }

    fn shape_prod(&mut self) -> Result<Shape, ShapeError> {
        let mut terms = vec![self.shape_term()?];
        while self.peek() == Some(&Tok::Times) {
            self.i += 1;
            terms.push(self.shape_term()?);
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Shape::Direct(terms) })
    }

    fn shape_term(&mut self) -> Result<Shape, ShapeError> {
        let mut acc = self.shape_unit()?;
        loop {
            if self.eat(":") {
                acc = Shape::Split(Box::new(acc), Box::new(self.shape_unit()?));
            } else if self.eat(".") {
                acc = Shape::Ext(Box::new(acc), Box::new(self.shape_unit()?));
            } else {
                return Ok(acc);
            }
        }
    }

    fn shape_unit(&mut self) -> Result<Shape, ShapeError> {
        let a = self.shape_atom()?;
        if self.eat("'") {
            return Ok(Shape::Derived(Box::new(a)));
        }
        Ok(a)
    }

    fn power_expo(&mut self) -> Result<Arith, ShapeError> {
        match self.peek().cloned() {
            Some(Tok::Int(n)) => {
                self.i += 1;
                Ok(Arith::Int(n))
            }
            Some(Tok::Ident(v)) => {
                self.i += 1;
                Ok(Arith::Var(v))
            }
            Some(Tok::Sym("(")) => {
                self.i += 1;
                let e = self.arith()?;
                self.expect(")")?;
                Ok(Arith::Paren(Box::new(e)))
            }
            _ => parse_err(self.pos(), "expected exponent"),
        }
    }

    fn shape_atom(&mut self) -> Result<Shape, ShapeError> {
        let pos = self.pos();
        match self.peek().cloned() {
            Some(Tok::Ident(id)) => {
                self.i += 1;
                if self.is_sym("(") && FAMILIES.contains(&id.as_str()) {
                    self.i += 1;
                    let mut args = vec![self.arith()?];
                    while self.eat(",") {
                        args.push(self.arith()?);
                    }
                    self.expect(")")?;
                    return Ok(Shape::Family(id, args));
                }
                if is_named(&id) {
                    return Ok(Shape::Named(id));
                }
                if self.is_sym("(") || id.chars().next().unwrap().is_ascii_uppercase() {
                    return Err(ShapeError::UnknownFamily(id));
                }
                if self.eat("^") {
                    let e = self.power_expo()?;
                    return Ok(Shape::Power(Arith::Var(id), e));
                }
                Ok(Shape::Cyclic(Arith::Var(id)))
            }
            Some(Tok::Int(n)) => {
                self.i += 1;
                if self.eat("^") {
                    let e = self.power_expo()?;
                    return Ok(Shape::Power(Arith::Int(n), e));
                }
                Ok(Shape::Cyclic(Arith::Int(n)))
            }
            Some(Tok::Sym("[")) => {
                self.i += 1;
                let e = self.arith()?;
                self.expect("]")?;
                Ok(Shape::Bracket(e))
            }
            Some(Tok::Sym("(")) => {
                self.i += 1;
                let e = self.shape_expr()?;
                self.expect(")")?;
                Ok(Shape::Paren(Box::new(e)))
            }
            _ => parse_err(pos, "expected a group"),
        }
    }

    fn arith(&mut self) -> Result<Arith, ShapeError> {
        let mut acc = self.arith_mul()?;
        loop {
            let op = if self.eat("+") {
                BinOp::Add
            } else if self.eat("-") {
                BinOp::Sub
            } else {
                return Ok(acc);
            };
            acc = Arith::Bin(op, Box::new(acc), Box::new(self.arith_mul()?));
        }
    }

    fn arith_mul(&mut self) -> Result<Arith, ShapeError> {
        let mut acc = self.arith_unary()?;
        loop {
            let op = if self.eat("*") {
                BinOp::Mul
            } else if self.eat("/") {
                BinOp::Div
            } else if self.eat("%") {
                BinOp::Mod
            } else {
                return Ok(acc);
            };
            acc = Arith::Bin(op, Box::new(acc), Box::new(self.arith_unary()?));
        }
    }

    fn arith_unary(&mut self) -> Result<Arith, ShapeError> {
        if self.eat("-") {
            return Ok(Arith::Neg(Box::new(self.arith_unary()?)));
        }
        let base = self.arith_primary()?;
        if self.eat("^") {
            let e = self.arith_unary()?;
            return Ok(Arith::Bin(BinOp::Pow, Box::new(base), Box::new(e)));
        }
        Ok(base)
    }

    fn arith_primary(&mut self) -> Result<Arith, ShapeError> {
        let pos = self.pos();
        match self.peek().cloned() {
            Some(Tok::Int(n)) => {
                self.i += 1;
                Ok(Arith::Int(n))
            }
            Some(Tok::Ident(id)) => {
                self.i += 1;
                if self.eat("(") {
                    if !FUNCTIONS.contains(&id.as_str()) {
                        return parse_err(pos, format!("unknown function {id}"));
                    }
                    if id == "if" {
                        let c = self.pred()?;
                        self.expect(",")?;
                        let a = self.arith()?;
                        self.expect(",")?;
                        let b = self.arith()?;
                        self.expect(")")?;
                        return Ok(Arith::If(Box::new(c), Box::new(a), Box::new(b)));
                    }
                    let mut args = vec![self.arith()?];
                    while self.eat(",") {
                        args.push(self.arith()?);
                    }
                    self.expect(")")?;
                    return Ok(Arith::Call(id, args));
                }
                Ok(Arith::Var(id))
            }
            Some(Tok::Sym("(")) => {
                self.i += 1;
                let e = self.arith()?;
                self.expect(")")?;
                Ok(Arith::Paren(Box::new(e)))
            }
            _ => parse_err(pos, "expected a number"),
        }
    }

    fn pred(&mut self) -> Result<Pred, ShapeError> {
        let mut acc = self.pred_and()?;
        while self.eat("||") {
            acc = Pred::Or(Box::new(acc), Box::new(self.pred_and()?));
        }
        Ok(acc)
    }

    fn pred_and(&mut self) -> Result<Pred, ShapeError> {
        let mut acc = self.pred_not()?;
        while self.eat("&&") {
            acc = Pred::And(Box::new(acc), Box::new(self.pred_not()?));
        }
        Ok(acc)
    }

    fn pred_not(&mut self) -> Result<Pred, ShapeError> {
        if self.eat("!") {
            return Ok(Pred::Not(Box::new(self.pred_not()?)));
        }
        self.pred_atom()
    }

    fn cmp_op(&mut self) -> Option<CmpOp> {
        let op = match self.peek() {
            Some(Tok::Sym("==")) => CmpOp::Eq,
            Some(Tok::Sym("!=")) => CmpOp::Ne,
            Some(Tok::Sym("<")) => CmpOp::Lt,
            Some(Tok::Sym("<=")) => CmpOp::Le,
            Some(Tok::Sym(">")) => CmpOp::Gt,
            Some(Tok::Sym(">=")) => CmpOp::Ge,
            _ => return None,
        };
        self.i += 1;
        Some(op)
    }

    fn pred_atom(&mut self) -> Result<Pred, ShapeError> {
        if self.is_sym("(") {
            let save = self.i;
            self.i += 1;
            if let Ok(p) = self.pred() {
                if self.eat(")") && self.cmp_op().is_none() && !self.next_is_arith_op() {
                    return Ok(Pred::Paren(Box::new(p)));
                }
            }
            self.i = save;
        }
        if let (Some(Tok::Ident(id)), Some(Tok::Sym("("))) = (self.peek().cloned(), self.peek_at(1)) {
            if PRED_FUNCTIONS.contains(&id.as_str()) {
                self.i += 2;
                let mut args = vec![self.arith()?];
                while self.eat(",") {
                    args.push(self.arith()?);
                }
                self.expect(")")?;
                return Ok(Pred::Call(id, args));
            }
        }
        let a = self.arith()?;
        let pos = self.pos();
        let op = match self.cmp_op() {
            Some(op) => op,
            None => return parse_err(pos, "expected comparison"),
        };
        let b = self.arith()?;
        Ok(Pred::Cmp(op, a, b))
    }

    fn next_is_arith_op(&self) -> bool {
        ["+", "-", "*", "/", "%", "^"].iter().any(|s| self.is_sym(s))
    }
}

pub fn parse_shape(s: &str) -> Result<Shape, ShapeError> {
    let mut p = Parser::new(s)?;
    let e = p.shape_expr()?;
    p.done()?;
    Ok(e)
}

pub fn parse_arith(s: &str) -> Result<Arith, ShapeError> {
    let mut p = Parser::new(s)?;
    let e = p.arith()?;
    p.done()?;
    Ok(e)
}

pub fn parse_pred(s: &str) -> Result<Pred, ShapeError> {
    let mut p = Parser::new(s)?;
    let e = p.pred()?;
    p.done()?;
    Ok(e)
}

impl fmt::Display for Arith {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arith::Int(n) => write!(f, "{n}"),
            Arith::Var(v) => write!(f, "{v}"),
            Arith::Neg(a) => write!(f, "-{a}"),
            Arith::Bin(op, a, b) => write!(f, "{a}{}{b}", op.symbol()),
            Arith::Call(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
            Arith::If(c, a, b) => write!(f, "if({c},{a},{b})"),
            Arith::Paren(a) => write!(f, "({a})"),
        }
    }
}

impl fmt::Display for Pred {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pred::Cmp(op, a, b) => write!(f, "{a}{}{b}", op.symbol()),
            Pred::And(a, b) => write!(f, "{a}&&{b}"),
            Pred::Or(a, b) => write!(f, "{a}||{b}"),
            Pred::Not(a) => write!(f, "!{a}"),
            Pred::Call(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
            Pred::Paren(p) => write!(f, "({p})"),
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Family(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
            Shape::Named(n) => write!(f, "{n}"),
            Shape::Power(b, e) => write!(f, "{b}^{e}"),
            Shape::Bracket(a) => write!(f, "[{a}]"),
            Shape::Cyclic(a) => write!(f, "{a}"),
            Shape::Paren(s) => write!(f, "({s})"),
            Shape::Derived(s) => write!(f, "{s}'"),
            Shape::Split(a, b) => write!(f, "{a}:{b}"),
            Shape::Ext(a, b) => write!(f, "{a}.{b}"),
            Shape::Direct(v) => {
                for (i, s) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, " x ")?;
                    }
                    write!(f, "{s}")?;
                }
                Ok(())
            }
            Shape::Quotient(s, k) => write!(f, "{s}/{k}"),
        }
    }
}

/// Canonical printing; `parse_shape(&print_shape(&s)) == s`.
pub fn print_shape(s: &Shape) -> String {
    s.to_string()
}

fn big(n: i64) -> BigInt {
    BigInt::from(n)
}

fn to_small(v: &BigInt, what: &str) -> Result<u64, ShapeError> {
    v.to_u64().ok_or_else(|| ShapeError::InvalidParameter(what.into(), v.to_string()))
}

impl Arith {
    pub fn eval(&self, b: &Bindings) -> Result<BigInt, ShapeError> {
        Ok(match self {
            Arith::Int(n) => BigInt::from(n.clone()),
            Arith::Var(v) => big(*b.get(v).ok_or_else(|| ShapeError::UnboundSymbol(v.clone()))?),
            Arith::Neg(a) => -a.eval(b)?,
            Arith::Paren(a) => a.eval(b)?,
            Arith::Bin(op, x, y) => {
                let (x, y) = (x.eval(b)?, y.eval(b)?);
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div | BinOp::Mod => {
                        if y.is_zero() {
                            return Err(ShapeError::NonIntegralQuotient(x.to_string(), y.to_string()));
                        }
                        let (q, r) = x.div_mod_floor(&y);
                        if *op == BinOp::Mod {
                            r
                        } else if r.is_zero() {
                            q
                        } else {
                            return Err(ShapeError::NonIntegralQuotient(x.to_string(), y.to_string()));
                        }
                    }
                    BinOp::Pow => {
                        if y.is_negative() {
                            return Err(ShapeError::InvalidParameter("exponent".into(), y.to_string()));
                        }
                        let e = y.to_u32().ok_or_else(|| ShapeError::InvalidParameter("exponent".into(), y.to_string()))?;
                        num_traits::pow(x, e as usize)
                    }
                }
            }
            Arith::If(c, x, y) => {
                if c.eval(b)? {
                    x.eval(b)?
                } else {
                    y.eval(b)?
                }
            }
            Arith::Call(name, args) => {
                let v: Vec<BigInt> = args.iter().map(|a| a.eval(b)).collect::<Result<_, _>>()?;
                let arity = |n: usize| {
                    if v.len() == n {
                        Ok(())
                    } else {
                        Err(ShapeError::InvalidParameter(name.clone(), format!("{} arguments", v.len())))
                    }
                };
                match name.as_str() {
                    "gcd" => {
                        arity(2)?;
                        v[0].gcd(&v[1])
                    }
                    "min" => {
                        arity(2)?;
                        v[0].clone().min(v[1].clone())
                    }
                    "max" => {
                        arity(2)?;
                        v[0].clone().max(v[1].clone())
                    }
                    "ppart" => {
                        arity(2)?;
                        let (mut n, p) = (v[0].abs(), v[1].clone());
                        if p < big(2) || n.is_zero() {
                            return Err(ShapeError::InvalidParameter("ppart".into(), format!("{n},{p}")));
                        }
                        let mut out = BigInt::one();
                        while (&n % &p).is_zero() {
                            n /= &p;
                            out *= &p;
                        }
                        out
                    }
                    "sqrt" => {
                        arity(1)?;
                        if v[0].is_negative() {
                            return Err(ShapeError::InvalidParameter("sqrt".into(), v[0].to_string()));
                        }
                        let r = v[0].sqrt();
                        if &r * &r != v[0] {
                            return Err(ShapeError::NonIntegralQuotient(format!("sqrt({})", v[0]), "1".into()));
                        }
                        r
                    }
                    _ => return Err(ShapeError::UnknownFamily(name.clone())),
                }
            }
        })
    }

    /// Rational evaluation, used inside `[..]`: division is exact, exponents
    /// may be negative and `gcd` extends to `Q` by clearing denominators.
    pub fn eval_ratio(&self, b: &Bindings) -> Result<BigRational, ShapeError> {
        Ok(match self {
            Arith::Neg(a) => -a.eval_ratio(b)?,
            Arith::Paren(a) => a.eval_ratio(b)?,
            Arith::Bin(op @ (BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Pow), x, y) => {
                let x = x.eval_ratio(b)?;
                match op {
                    BinOp::Pow => {
                        let e = y.eval(b)?;
                        let e = e.to_i32().ok_or_else(|| ShapeError::InvalidParameter("exponent".into(), e.to_string()))?;
                        if x.is_zero() && e < 0 {
                            return Err(ShapeError::InvalidParameter("exponent".into(), e.to_string()));
                        }
                        num_traits::Pow::pow(x, e)
                    }
                    _ => {
                        let y = y.eval_ratio(b)?;
                        match op {
                            BinOp::Add => x + y,
                            BinOp::Sub => x - y,
                            BinOp::Mul => x * y,
                            _ if y.is_zero() => {
                                return Err(ShapeError::NonIntegralQuotient(x.to_string(), "0".into()))
                            }
                            _ => x / y,
                        }
                    }
                }
            }
            Arith::If(c, x, y) => {
                if c.eval(b)? {
                    x.eval_ratio(b)?
                } else {
                    y.eval_ratio(b)?
                }
            }
            Arith::Call(name, args) if matches!(name.as_str(), "gcd" | "min" | "max") && args.len() == 2 => {
                let (x, y) = (args[0].eval_ratio(b)?, args[1].eval_ratio(b)?);
                match name.as_str() {
                    "min" => x.min(y),
                    "max" => x.max(y),
                    _ => {
                        let d = x.denom() * y.denom();
                        let g = (x.numer() * y.denom()).gcd(&(y.numer() * x.denom()));
                        BigRational::new(g, d)
                    }
                }
            }
            other => BigRational::from_integer(other.eval(b)?),
        })
    }

    pub fn symbols(&self, out: &mut BTreeSet<String>) {
        match self {
            Arith::Int(_) => {}
            Arith::Var(v) => {
                out.insert(v.clone());
            }
            Arith::Neg(a) | Arith::Paren(a) => a.symbols(out),
            Arith::Bin(_, a, b) => {
                a.symbols(out);
                b.symbols(out);
            }
            Arith::Call(_, args) => args.iter().for_each(|a| a.symbols(out)),
            Arith::If(c, a, b) => {
                c.symbols(out);
                a.symbols(out);
                b.symbols(out);
            }
        }
    }
}

impl Pred {
    pub fn eval(&self, b: &Bindings) -> Result<bool, ShapeError> {
        Ok(match self {
            Pred::Cmp(op, x, y) => {
                let (x, y) = (x.eval(b)?, y.eval(b)?);
                match op {
                    CmpOp::Eq => x == y,
                    CmpOp::Ne => x != y,
                    CmpOp::Lt => x < y,
                    CmpOp::Le => x <= y,
                    CmpOp::Gt => x > y,
                    CmpOp::Ge => x >= y,
                }
            }
            Pred::And(x, y) => x.eval(b)? && y.eval(b)?,
            Pred::Or(x, y) => x.eval(b)? || y.eval(b)?,
            Pred::Not(x) => !x.eval(b)?,
            Pred::Paren(x) => x.eval(b)?,
            Pred::Call(name, args) => {
                let v = args.first().ok_or_else(|| ShapeError::InvalidParameter(name.clone(), "no argument".into()))?.eval(b)?;
                match name.as_str() {
                    "odd" => v.is_odd(),
                    "even" => v.is_even(),
                    "prime" => v.to_u64().is_some_and(crate::gf::is_prime),
                    "prime_power" => v.to_u64().and_then(prime_power).is_some(),
                    "square" => !v.is_negative() && v.sqrt().pow(2) == v,
                    _ => return Err(ShapeError::UnknownFamily(name.clone())),
                }
            }
        })
    }

    pub fn symbols(&self, out: &mut BTreeSet<String>) {
        match self {
            Pred::Cmp(_, a, b) => {
                a.symbols(out);
                b.symbols(out);
            }
            Pred::And(a, b) | Pred::Or(a, b) => {
                a.symbols(out);
                b.symbols(out);
            }
            Pred::Not(a) | Pred::Paren(a) => a.symbols(out),
            Pred::Call(_, args) => args.iter().for_each(|a| a.symbols(out)),
        }
    }
}

impl Shape {
    pub fn symbols(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<String>) {
        match self {
            Shape::Family(_, args) => args.iter().for_each(|a| a.symbols(out)),
            Shape::Named(_) => {}
            Shape::Power(b, e) => {
                b.symbols(out);
                e.symbols(out);
            }
            Shape::Bracket(a) | Shape::Cyclic(a) => a.symbols(out),
            Shape::Paren(s) | Shape::Derived(s) => s.collect_symbols(out),
            Shape::Split(a, b) | Shape::Ext(a, b) => {
                a.collect_symbols(out);
                b.collect_symbols(out);
            }
            Shape::Direct(v) => v.iter().for_each(|s| s.collect_symbols(out)),
            Shape::Quotient(s, k) => {
                s.collect_symbols(out);
                k.symbols(out);
            }
        }
    }
}

fn positive(v: BigInt, what: &str) -> Result<BigUint, ShapeError> {
    match v.sign() {
        Sign::Plus => Ok(v.to_biguint().unwrap()),
        _ => Err(ShapeError::InvalidParameter(what.into(), v.to_string())),
    }
}

/// Group order of a shape under the given bindings. Bracketed factors may be
/// rational; the total must be an integer.
pub fn order(s: &Shape, b: &Bindings) -> Result<BigUint, ShapeError> {
    let r = order_ratio(s, b)?;
    if !r.is_integer() {
        return Err(ShapeError::NonIntegralQuotient(r.numer().to_string(), r.denom().to_string()));
    }
    positive(r.to_integer(), "order")
}

fn ratio(n: BigUint) -> BigRational {
    BigRational::from_integer(BigInt::from(n))
}

fn order_ratio(s: &Shape, b: &Bindings) -> Result<BigRational, ShapeError> {
    match s {
        Shape::Family(name, args) => {
            let v: Vec<BigInt> = args.iter().map(|a| a.eval(b)).collect::<Result<_, _>>()?;
            Ok(ratio(family_order(name, &v)?))
        }
        Shape::Named(n) => Ok(ratio(named_orders()[n].clone())),
        Shape::Power(base, e) => {
            let base = positive(base.eval(b)?, "power base")?;
            let e = e.eval(b)?;
            if e.is_negative() {
                return Err(ShapeError::InvalidParameter("exponent".into(), e.to_string()));
            }
            let e = e.to_u32().ok_or_else(|| ShapeError::InvalidParameter("exponent".into(), e.to_string()))?;
            Ok(ratio(num_traits::pow(base, e as usize)))
        }
        Shape::Bracket(a) => {
            let v = a.eval_ratio(b)?;
            if !v.is_positive() {
                return Err(ShapeError::InvalidParameter("bracket".into(), v.to_string()));
            }
            Ok(v)
        }
        Shape::Cyclic(a) => Ok(ratio(positive(a.eval(b)?, "cyclic order")?)),
        Shape::Paren(s) => order_ratio(s, b),
        Shape::Derived(s) => Ok(ratio(derived_order(s, b)?)),
        Shape::Split(x, y) | Shape::Ext(x, y) => Ok(order_ratio(x, b)? * order_ratio(y, b)?),
        Shape::Direct(v) => v.iter().try_fold(BigRational::one(), |acc, s| Ok(acc * order_ratio(s, b)?)),
        Shape::Quotient(s, k) => {
            let k = positive(k.eval(b)?, "quotient")?;
            Ok(order_ratio(s, b)? / ratio(k))
        }
    }
}

pub fn order_of_str(s: &str, b: &Bindings) -> Result<BigUint, ShapeError> {
    order(&parse_shape(s)?, b)
}

fn derived_order(s: &Shape, b: &Bindings) -> Result<BigUint, ShapeError> {
    let inner = match s {
        Shape::Paren(x) => x.as_ref(),
        x => x,
    };
    if let Shape::Family(name, args) = inner {
        let v: Vec<BigInt> = args.iter().map(|a| a.eval(b)).collect::<Result<_, _>>()?;
        let small: Vec<i64> = v.iter().map(|x| x.to_i64().unwrap_or(i64::MAX)).collect();
        let special = match (name.as_str(), small.as_slice()) {
            ("Sp", [4, 2]) => Some(360u64),
            ("Sp", [2, 2]) | ("SL", [2, 2]) => Some(3),
            ("Sp", [2, 3]) | ("SL", [2, 3]) => Some(8),
            ("G2", [2]) => Some(6048),
            ("Sp" | "SL" | "G2", _) => None,
            _ => return Err(ShapeError::UnsupportedDerived(inner.to_string())),
        };
        return match special {
            Some(n) => Ok(BigUint::from(n)),
            None => family_order(name, &v),
        };
    }
    Err(ShapeError::UnsupportedDerived(inner.to_string()))
}

fn gcd_u(a: &BigUint, b: &BigUint) -> BigUint {
    a.gcd(b)
}

fn qpow(q: &BigUint, e: u64) -> BigUint {
    num_traits::pow(q.clone(), e as usize)
}

fn sl_order(n: u64, q: &BigUint) -> BigUint {
    let mut r = qpow(q, n * n.saturating_sub(1) / 2);
    for i in 2..=n {
        r *= qpow(q, i) - 1u32;
    }
    r
}

fn su_order(n: u64, q: &BigUint) -> BigUint {
    let mut r = qpow(q, n * n.saturating_sub(1) / 2);
    for i in 2..=n {
        if i % 2 == 0 {
            r *= qpow(q, i) - 1u32;
        } else {
            r *= qpow(q, i) + 1u32;
        }
    }
    r
}

fn sp_like(m: u64, q: &BigUint) -> BigUint {
    let mut r = qpow(q, m * m);
    for i in 1..=m {
        r *= qpow(q, 2 * i) - 1u32;
    }
    r
}

/// `q^(m(m-1)) (q^m - ε) prod_{i<m} (q^(2i) - 1)`, the order of SO^ε_{2m}(q).
fn orth_x(m: u64, q: &BigUint, plus: bool) -> BigUint {
    if m == 0 {
        return BigUint::one();
    }
    let mut r = qpow(q, m * (m - 1));
    r *= if plus { qpow(q, m) - 1u32 } else { qpow(q, m) + 1u32 };
    for i in 1..m {
        r *= qpow(q, 2 * i) - 1u32;
    }
    r
}

fn factorial(n: u64) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * i)
}

/// Order of a named family with evaluated arguments.
pub fn family_order(name: &str, args: &[BigInt]) -> Result<BigUint, ShapeError> {
    let bad = |msg: &str| ShapeError::InvalidParameter(name.to_string(), msg.to_string());
    let one_arg = || -> Result<u64, ShapeError> {
        if args.len() != 1 {
            return Err(bad("expects one argument"));
        }
        to_small(&args[0], name)
    };
    match name {
        "A" | "S" | "D" => {
            let n = one_arg()?;
            return Ok(match name {
                "A" if n >= 2 => factorial(n) / 2u32,
                "A" => BigUint::one(),
                "S" => factorial(n),
                _ if n >= 1 => BigUint::from(n),
                _ => return Err(bad("dihedral order must be positive")),
            });
        }
        "G2" | "GammaG2" | "Sz" | "2G2" | "F4" => {
            let qv = one_arg()?;
            let (p, f) = prime_power(qv).ok_or_else(|| bad("q must be a prime power"))?;
            let q = BigUint::from(qv);
            let base = match name {
                "G2" | "GammaG2" => qpow(&q, 6) * (qpow(&q, 6) - 1u32) * (qpow(&q, 2) - 1u32),
                "Sz" => {
                    if p != 2 || f % 2 == 0 {
                        return Err(bad("Sz needs q = 2^odd"));
                    }
                    qpow(&q, 2) * (qpow(&q, 2) + 1u32) * (&q - 1u32)
                }
                "2G2" => {
                    if p != 3 || f % 2 == 0 {
                        return Err(bad("2G2 needs q = 3^odd"));
                    }
                    qpow(&q, 3) * (qpow(&q, 3) + 1u32) * (&q - 1u32)
                }
                _ => {
                    qpow(&q, 24)
                        * (qpow(&q, 12) - 1u32)
                        * (qpow(&q, 8) - 1u32)
                        * (qpow(&q, 6) - 1u32)
                        * (qpow(&q, 2) - 1u32)
                }
            };
            return Ok(if name == "GammaG2" { base * f } else { base });
        }
        _ => {}
    }
    if !FAMILIES.contains(&name) {
        return Err(ShapeError::UnknownFamily(name.to_string()));
    }
    if args.len() != 2 {
        return Err(bad("expects (n, q)"));
    }
    let n = to_small(&args[0], name)?;
    let qv = to_small(&args[1], name)?;
    let (_p, f) = prime_power(qv).ok_or_else(|| bad("q must be a prime power"))?;
    let q = BigUint::from(qv);
    let qm1 = &q - 1u32;
    let qp1 = &q + 1u32;
    let two = BigUint::from(2u32);
    let g2 = gcd_u(&two, &qm1);
    let gl = |n: u64| if n == 0 { BigUint::one() } else { sl_order(n, &q) * &qm1 };
    let gu = |n: u64| if n == 0 { BigUint::one() } else { su_order(n, &q) * &qp1 };
    let even_n = |n: u64| if n % 2 == 0 { Ok(n / 2) } else { Err(bad("dimension must be even")) };
    let odd_m = |n: u64| if n % 2 == 1 { Ok(n / 2) } else { Err(bad("dimension must be odd")) };
    let omega_odd = |n: u64| -> Result<BigUint, ShapeError> {
        let m = odd_m(n)?;
        Ok(if m == 0 { BigUint::one() } else { sp_like(m, &q) / &g2 })
    };
    let f = BigUint::from(f);
    Ok(match name {
        "SL" => sl_order(n, &q),
        "GL" => gl(n),
        "PSL" => sl_order(n, &q) / gcd_u(&BigUint::from(n.max(1)), &qm1),
        "PGL" => sl_order(n, &q),
        "SigmaL" => sl_order(n, &q) * f,
        "GammaL" => gl(n) * f,
        "PSigmaL" => sl_order(n, &q) / gcd_u(&BigUint::from(n.max(1)), &qm1) * f,
        "PGammaL" => sl_order(n, &q) * f,
        "SU" => su_order(n, &q),
        "GU" => gu(n),
        "PSU" => su_order(n, &q) / gcd_u(&BigUint::from(n.max(1)), &qp1),
        "PGU" => su_order(n, &q),
        "SigmaU" => su_order(n, &q) * f * 2u32,
        "GammaU" => gu(n) * f * 2u32,
        "Sp" => sp_like(even_n(n)?, &q),
        "PSp" => sp_like(even_n(n)?, &q) / &g2,
        "GammaSp" => sp_like(even_n(n)?, &q) * f,
        "Omega" => omega_odd(n)?,
        "Spin" => omega_odd(n)? * &g2,
        "SO" => omega_odd(n)? * &g2,
        "O" | "GO" => omega_odd(n)? * &g2 * &g2,
        "Omega+" | "Omega-" => {
            let m = even_n(n)?;
            if m == 0 {
                BigUint::one()
            } else {
                orth_x(m, &q, name.ends_with('+')) / &g2
            }
        }
        "SO+" | "SO-" => orth_x(even_n(n)?, &q, name.ends_with('+')),
        "O+" | "O-" | "GO+" | "GO-" => orth_x(even_n(n)?, &q, name.ends_with('+')) * 2u32,
        "GammaO+" | "GammaO-" => orth_x(even_n(n)?, &q, name.ends_with('+')) * 2u32 * f,
        "POmega+" | "POmega-" => {
            let m = even_n(n)?;
            let x = orth_x(m, &q, name.ends_with('+'));
            let qm = qpow(&q, m);
            let t = if name.ends_with('+') { qm - 1u32 } else { qm + 1u32 };
            x / gcd_u(&BigUint::from(4u32), &t)
        }
        "AGL" => qpow(&q, n) * gl(n),
        "ASL" => qpow(&q, n) * sl_order(n, &q),
        "AGammaL" => qpow(&q, n) * gl(n) * f,
        _ => return Err(ShapeError::UnknownFamily(name.to_string())),
    })
}

/// Order of a classical family, as used by the generator gates.
pub fn classical_order(family: &str, n: u64, q: u64) -> Result<BigUint, ShapeError> {
    family_order(family, &[BigInt::from(n), BigInt::from(q)])
}


fn mul_mod(a: &BigUint, b: &BigUint, m: &BigUint) -> BigUint {
    (a * b) % m
}

/// Deterministic Miller-Rabin; the witness set is exact below 3.3e24 and
/// probabilistic beyond, which is far past every caller's range.
pub fn is_probable_prime(n: &BigUint) -> bool {
    let two = BigUint::from(2u32);
    if *n < two {
        return false;
    }
    for p in [2u32, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41] {
        let p = BigUint::from(p);
        if *n == p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }
    let n1 = n - 1u32;
    let s = n1.trailing_zeros().unwrap_or(0);
    let d = &n1 >> s;
    'witness: for a in [2u32, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41] {
        let mut x = BigUint::from(a).modpow(&d, n);
        if x.is_one() || x == n1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(&x, &x, n);
            if x == n1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Brent's variant of Pollard rho; gcds are batched over `BATCH` steps.
fn pollard_rho(n: &BigUint) -> BigUint {
    const BATCH: u32 = 64;
    if n.is_even() {
        return BigUint::from(2u32);
    }
    let dist = |a: &BigUint, b: &BigUint| if a > b { a - b } else { b - a };
    let mut c = BigUint::one();
    loop {
        let f = |x: &BigUint| (mul_mod(x, x, n) + &c) % n;
        let mut y = BigUint::from(2u32);
        let (mut x, mut ys) = (y.clone(), y.clone());
        let (mut r, mut d) = (1u64, BigUint::one());
        let mut acc = BigUint::one();
        while d.is_one() {
            x = y.clone();
            for _ in 0..r {
                y = f(&y);
            }
            let mut k = 0;
            while k < r && d.is_one() {
                ys = y.clone();
                for _ in 0..BATCH.min((r - k) as u32) {
                    y = f(&y);
                    acc = mul_mod(&acc, &dist(&x, &y), n);
                }
                d = acc.gcd(n);
                k += BATCH as u64;
            }
            r *= 2;
        }
        if d == *n {
            // The batch overshot; redo it one step at a time.
            loop {
                ys = f(&ys);
                d = dist(&x, &ys).gcd(n);
                if !d.is_one() {
                    break;
                }
            }
        }
        if d != *n {
            return d;
        }
        c += 1u32;
    }
}

/// Distinct prime factors of `n`, ascending.
pub fn prime_factors(n: &BigUint) -> Vec<BigUint> {
    let mut out = BTreeSet::new();
    let mut stack = vec![n.clone()];
    while let Some(m) = stack.pop() {
        if m.is_one() || m.is_zero() {
            continue;
        }
        let mut m = m;
        for p in 2u32..1000 {
            let pb = BigUint::from(p);
            while (&m % &pb).is_zero() {
                out.insert(pb.clone());
                m /= &pb;
            }
        }
        if m.is_one() {
            continue;
        }
        if is_probable_prime(&m) {
            out.insert(m);
            continue;
        }
        let d = pollard_rho(&m);
        stack.push(&m / &d);
        stack.push(d);
    }
    out.into_iter().collect()
}

/// Primitive prime divisors of `a^k - 1`: primes `r` for which `a` has
/// multiplicative order exactly `k` mod `r`. By convention `ppd(2,6) = {7}`.
pub fn ppd(a: u64, k: u32) -> Vec<BigUint> {
    if a == 2 && k == 6 {
        return vec![BigUint::from(7u32)];
    }
    if a < 2 || k < 1 {
        return Vec::new();
    }
    let ab = BigUint::from(a);
    let n = num_traits::pow(ab.clone(), k as usize) - 1u32;
    prime_factors(&n)
        .into_iter()
        .filter(|r| (1..k).all(|j| !ab.modpow(&BigUint::from(j), r).is_one()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ord(s: &str) -> BigUint {
        order_of_str(s, &Bindings::new()).unwrap()
    }

    #[test]
    fn known_orders() {
        assert_eq!(ord("Sp(6,2)"), BigUint::from(1451520u64));
        assert_eq!(ord("SU(4,2)"), BigUint::from(25920u64));
        assert_eq!(ord("Omega+(8,2)"), BigUint::from(174182400u64));
        assert_eq!(ord("SigmaL(2,4)"), BigUint::from(120u64));
        assert_eq!(ord("Sp(4,2)'"), BigUint::from(360u64));
        assert_eq!(ord("G2(2)'"), BigUint::from(6048u64));
        assert_eq!(ord("PGammaL(2,8)"), BigUint::from(1512u64));
        assert_eq!(ord("AGammaL(1,8)"), BigUint::from(168u64));
        assert_eq!(ord("3.M22"), BigUint::from(3u64 * 443520));
        assert_eq!(ord("(SL(2,3) x SL(2,9))/2"), BigUint::from(24u64 * 720 / 2));
    }

    #[test]
    fn round_trip() {
        for s in ["q^(a*b-1):SL(a*b-1,q)", "[gcd(q^(5*b),q^(6*b)/4)]:SL(2,q^b)'", "2^(1+4).A(5)", "(A(8) x A(4)):2"] {
            assert_eq!(print_shape(&parse_shape(s).unwrap()), s);
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(parse_shape("Foo(2,3)"), Err(ShapeError::UnknownFamily(_))));
        assert!(matches!(order_of_str("[q]", &Bindings::new()), Err(ShapeError::UnboundSymbol(_))));
        assert!(matches!(order_of_str("A(5)/7", &Bindings::new()), Err(ShapeError::NonIntegralQuotient(..))));
        assert!(matches!(parse_shape("SL(2,"), Err(ShapeError::Parse { .. })));
    }

    #[test]
    fn primitive_prime_divisors() {
        let v = |a, k| ppd(a, k).iter().map(|x| x.to_u64().unwrap()).collect::<Vec<_>>();
        assert_eq!(v(2, 4), vec![5]);
        assert_eq!(v(2, 6), vec![7]);
        assert_eq!(v(2, 2), vec![3]);
        assert_eq!(v(3, 2), Vec::<u64>::new());
        assert_eq!(v(7, 2), Vec::<u64>::new());
    }

    #[test]
    fn predicates() {
        let mut b = Bindings::new();
        b.insert("q".into(), 2);
        b.insert("a".into(), 4);
        assert!(parse_pred("!(q==2&&a==3)").unwrap().eval(&b).unwrap());
        assert!(parse_pred("(a+1)*2==10").unwrap().eval(&b).unwrap());
        assert!(parse_pred("even(a)||odd(q)").unwrap().eval(&b).unwrap());
    }
}
