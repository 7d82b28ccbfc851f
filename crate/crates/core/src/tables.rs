//! The factorization tables as data.
//!
//! One record per (table, row, sub-row) claim `G0 = H0 K0` with the shape of
//! `H0 ∩ K0`. Records carry parameter constraints, derived symbols in shape
//! arithmetic, and optionally the recipes that build the triple concretely.
//! The bundled database is checked against a manifest on every load.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::construct::{KRecipe, SubgroupRecipe};
use crate::gf::prime_power;
use crate::shapes::{self, order_of_str, parse_arith, parse_pred, parse_shape, Bindings, ShapeError};

/// Environment variable naming a replacement database file.
pub const DB_ENV: &str = "FACTORLAB_DB";

const BUNDLED_DB: &str = include_str!("../data/db.json");
const BUNDLED_MANIFEST: &str = include_str!("../data/manifest.json");

/// Largest `q` tried for a free `q`, and the ranges of other free parameters.
pub const MAX_Q: u64 = 64;
pub const MAX_F: i64 = 6;
pub const MAX_PARAM: i64 = 16;

#[derive(Debug, Error)]
pub enum TablesError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed database: {0}")]
    Json(#[from] serde_json::Error),
    #[error("database does not match its manifest: {0}")]
    ManifestMismatch(String),
    #[error("record {id}: {source}")]
    Shape { id: String, source: ShapeError },
}

type Result<T> = std::result::Result<T, TablesError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeSet {
    #[serde(rename = "G")]
    pub g: String,
    #[serde(rename = "H")]
    pub h: String,
    #[serde(rename = "K")]
    pub k: String,
    pub int: String,
}

impl ShapeSet {
    pub fn iter(&self) -> impl Iterator<Item = (&'static str, &str)> {
        [("G", self.g.as_str()), ("H", self.h.as_str()), ("K", self.k.as_str()), ("int", self.int.as_str())].into_iter()
    }
}

/// Constructive data for a record: recipes with parameters in shape arithmetic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TierB {
    #[serde(rename = "G")]
    pub g: SubgroupRecipe<String>,
    #[serde(rename = "H")]
    pub h: SubgroupRecipe<String>,
    #[serde(rename = "K")]
    pub k: KRecipe<String>,
    /// Bindings failing this predicate have no recipe.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub when: Option<String>,
    /// Bindings of the golden suite, free parameters included.
    pub golden: Vec<Bindings>,
    /// Shape whose order is the solvable residual order of `H∩K` at the
    /// golden bindings; other bindings are not compared.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationRecord {
    pub id: String,
    pub table: u32,
    pub row: u32,
    /// 0 when the row has a single record.
    pub sub: u32,
    pub family: String,
    pub params: Vec<String>,
    /// Structural parameters enumerated over `[lo, hi]` (shape arithmetic in the other parameters).
    #[serde(default)]
    pub free: BTreeMap<String, [String; 2]>,
    pub shapes: ShapeSet,
    pub constraints: Vec<String>,
    #[serde(default)]
    pub derived: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derived_text: Option<String>,
    #[serde(rename = "ref")]
    pub ref_label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub remarks: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tier_b: Option<TierB>,
}

/// Record count, per-table counts, row count and the set of reference labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub records: usize,
    pub per_table: BTreeMap<String, usize>,
    pub rows: usize,
    pub refs: Vec<String>,
}

impl Manifest {
    pub fn of(records: &[FactorizationRecord]) -> Manifest {
        let mut per_table = BTreeMap::new();
        for r in records {
            *per_table.entry(r.table.to_string()).or_insert(0) += 1;
        }
        let rows: BTreeSet<(u32, u32)> = records.iter().map(|r| (r.table, r.row)).collect();
        let refs: BTreeSet<String> = records.iter().flat_map(|r| r.ref_labels()).collect();
        Manifest { records: records.len(), per_table, rows: rows.len(), refs: refs.into_iter().collect() }
    }
}

/// A record at one admissible binding, derived symbols included.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcreteCase {
    pub id: String,
    pub bindings: Bindings,
    #[serde(skip)]
    pub record: FactorizationRecord,
}

impl ConcreteCase {
    /// `T2R2[m=2,q=2]`; derived symbols are omitted.
    pub fn label(&self) -> String {
        let own: Vec<String> = self.own_bindings().iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{}[{}]", self.id, own.join(","))
    }

    /// The bindings without derived symbols.
    pub fn own_bindings(&self) -> Bindings {
        self.bindings.iter().filter(|(k, _)| !self.record.derived.contains_key(*k)).map(|(k, v)| (k.clone(), *v)).collect()
    }

    pub fn is_golden(&self) -> bool {
        let own = self.own_bindings();
        self.record.tier_b.as_ref().is_some_and(|t| t.golden.contains(&own))
    }

    pub fn orders(&self) -> std::result::Result<[BigUint; 4], ShapeError> {
        let s = &self.record.shapes;
        Ok([
            order_of_str(&s.g, &self.bindings)?,
            order_of_str(&s.h, &self.bindings)?,
            order_of_str(&s.k, &self.bindings)?,
            order_of_str(&s.int, &self.bindings)?,
        ])
    }

    /// The recipes at this binding, or `None` if the record has none here.
    pub fn recipes(&self) -> std::result::Result<Option<ResolvedRecipes>, ShapeError> {
        let Some(t) = &self.record.tier_b else { return Ok(None) };
        if let Some(w) = &t.when {
            if !parse_pred(w)?.eval(&self.bindings)? {
                return Ok(None);
            }
        }
        let eval = |s: &String| -> std::result::Result<u64, ShapeError> {
            let v = parse_arith(s)?.eval(&self.bindings)?;
            u64::try_from(&v).map_err(|_| ShapeError::InvalidParameter(s.clone(), v.to_string()))
        };
        Ok(Some(ResolvedRecipes { g: t.g.try_map(eval)?, h: t.h.try_map(eval)?, k: t.k.try_map(eval)? }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedRecipes {
    #[serde(rename = "G")]
    pub g: SubgroupRecipe,
    #[serde(rename = "H")]
    pub h: SubgroupRecipe,
    #[serde(rename = "K")]
    pub k: KRecipe,
}

impl FactorizationRecord {
    /// The individual labels of the `ref` cell.
    pub fn ref_labels(&self) -> impl Iterator<Item = String> + '_ {
        self.ref_label.split(", ").map(|s| s.trim().to_string())
    }

    /// Adds the derived symbols to `b`.
    pub fn resolve(&self, b: &Bindings) -> std::result::Result<Bindings, ShapeError> {
        let mut out = b.clone();
        // Derived symbols may refer to each other; settle in passes.
        let mut pending: Vec<(&String, &String)> = self.derived.iter().collect();
        while !pending.is_empty() {
            let before = pending.len();
            let mut err = None;
            pending.retain(|(k, src)| match parse_arith(src).and_then(|a| a.eval(&out)) {
                Ok(v) => {
                    out.insert((*k).clone(), small(&v));
                    false
                }
                Err(e) => {
                    err = Some(e);
                    true
                }
            });
            if pending.len() == before {
                return Err(err.expect("a pending symbol failed"));
            }
        }
        Ok(out)
    }

    /// Constraints in order; the first false one stops evaluation, so later
    /// constraints may assume earlier ones.
    pub fn check_constraints(&self, b: &Bindings) -> std::result::Result<bool, ShapeError> {
        for c in &self.constraints {
            if !parse_pred(c)?.eval(b)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// The case at `b` (free parameters included) if it is admissible.
    pub fn case(&self, b: &Bindings) -> std::result::Result<Option<ConcreteCase>, ShapeError> {
        let full = self.resolve(b)?;
        if !self.check_constraints(&full)? {
            return Ok(None);
        }
        Ok(Some(ConcreteCase { id: self.id.clone(), bindings: full, record: self.clone() }))
    }

    /// All admissible bindings with `|G0| <= cap`, in lexicographic order of
    /// the sorted parameter names, free parameters innermost.
    ///
    /// Every `G0` shape has order nondecreasing in each parameter, so a loop
    /// stops at the first value whose whole subtree exceeds the cap.
    pub fn admissible_bindings(&self, cap: &BigUint) -> Vec<ConcreteCase> {
        let mut out = Vec::new();
        let Ok(c) = Compiled::new(self) else { return out };
        let mut b = Bindings::new();
        self.walk_params(&c, 0, &mut b, cap, &mut out);
        out
    }

    /// Returns false when every binding below had `|G0| > cap`.
    fn walk_params(&self, c: &Compiled, i: usize, b: &mut Bindings, cap: &BigUint, out: &mut Vec<ConcreteCase>) -> bool {
        if i == self.params.len() {
            let partial = c.resolve_partial(b);
            match shapes::order(&c.g, &partial) {
                Ok(g) if g > *cap => return false,
                Err(ShapeError::UnboundSymbol(_)) | Ok(_) => {}
                Err(_) => return true,
            }
            self.walk_free(c, 0, b, cap, out);
            return true;
        }
        let name = &self.params[i];
        for v in param_range(name) {
            b.insert(name.clone(), v);
            if !self.walk_params(c, i + 1, b, cap, out) {
                break;
            }
        }
        b.remove(name);
        true
    }

    fn walk_free(&self, c: &Compiled, i: usize, b: &mut Bindings, cap: &BigUint, out: &mut Vec<ConcreteCase>) {
        if i == c.free.len() {
            let Ok(full) = self.resolve(b) else { return };
            if c.constraints.iter().all(|p| p.eval(&full) == Ok(true))
                && shapes::order(&c.g, &full).is_ok_and(|g| g <= *cap)
            {
                out.push(ConcreteCase { id: self.id.clone(), bindings: full, record: self.clone() });
            }
            return;
        }
        let (name, lo, hi) = &c.free[i];
        let bound = |a: &shapes::Arith| a.eval(b).map(|v| small(&v));
        let (Ok(lo), Ok(hi)) = (bound(lo), bound(hi)) else { return };
        for v in lo..=hi {
            b.insert(name.clone(), v);
            self.walk_free(c, i + 1, b, cap, out);
        }
        b.remove(name.as_str());
    }

    /// Every shape, constraint, derived and recipe string parses.
    pub fn validate(&self) -> Result<()> {
        let wrap = |e: ShapeError| TablesError::Shape { id: self.id.clone(), source: e };
        let mut syms = BTreeSet::new();
        for (_, s) in self.shapes.iter() {
            syms.extend(parse_shape(s).map_err(wrap)?.symbols());
        }
        for c in &self.constraints {
            parse_pred(c).map_err(wrap)?.symbols(&mut syms);
        }
        for d in self.derived.values() {
            parse_arith(d).map_err(wrap)?.symbols(&mut syms);
        }
        syms.retain(|s| !self.derived.contains_key(s) && !self.free.contains_key(s));
        if syms.iter().ne(self.params.iter()) {
            return Err(TablesError::ManifestMismatch(format!("{}: params {:?} but symbols {syms:?}", self.id, self.params)));
        }
        for [lo, hi] in self.free.values() {
            parse_arith(lo).map_err(wrap)?;
            parse_arith(hi).map_err(wrap)?;
        }
        if let Some(t) = &self.tier_b {
            let check = |s: &String| parse_arith(s).map(|_| ());
            t.g.try_map(check).map_err(wrap)?;
            t.h.try_map(check).map_err(wrap)?;
            t.k.try_map(check).map_err(wrap)?;
            if let Some(w) = &t.when {
                parse_pred(w).map_err(wrap)?;
            }
        }
        Ok(())
    }

    /// Whether `filter` (`"2"` or `"2.1"`) selects this record's row.
    pub fn matches_row(&self, filter: &str) -> bool {
        match filter.split_once('.') {
            Some((r, s)) => r.parse() == Ok(self.row) && s.parse() == Ok(self.sub),
            None => filter.parse() == Ok(self.row),
        }
    }
}

/// A record's strings parsed once for enumeration.
struct Compiled {
    g: shapes::Shape,
    constraints: Vec<shapes::Pred>,
    derived: Vec<(String, shapes::Arith)>,
    free: Vec<(String, shapes::Arith, shapes::Arith)>,
}

impl Compiled {
    fn new(r: &FactorizationRecord) -> std::result::Result<Compiled, ShapeError> {
        Ok(Compiled {
            g: parse_shape(&r.shapes.g)?,
            constraints: r.constraints.iter().map(|c| parse_pred(c)).collect::<std::result::Result<_, _>>()?,
            derived: r
                .derived
                .iter()
                .map(|(k, v)| Ok((k.clone(), parse_arith(v)?)))
                .collect::<std::result::Result<_, ShapeError>>()?,
            free: r
                .free
                .iter()
                .map(|(k, [lo, hi])| Ok((k.clone(), parse_arith(lo)?, parse_arith(hi)?)))
                .collect::<std::result::Result<_, ShapeError>>()?,
        })
    }

    /// The derived symbols that evaluate without the free parameters.
    fn resolve_partial(&self, b: &Bindings) -> Bindings {
        let mut out = b.clone();
        for (k, a) in &self.derived {
            if let Ok(v) = a.eval(&out) {
                out.insert(k.clone(), small(&v));
            }
        }
        out
    }
}

fn small(v: &num_bigint::BigInt) -> i64 {
    i64::try_from(v).unwrap_or(i64::MAX)
}

/// Values tried for a free parameter: prime powers up to [`MAX_Q`] for `q`,
/// `1..=MAX_F` for `f`, `1..=MAX_PARAM` otherwise.
pub fn param_range(name: &str) -> Vec<i64> {
    match name {
        "q" => (2..=MAX_Q).filter(|&q| prime_power(q).is_some()).map(|q| q as i64).collect(),
        "f" => (1..=MAX_F).collect(),
        _ => (1..=MAX_PARAM).collect(),
    }
}

/// Parses and checks a database against a manifest.
pub fn parse_db(json: &str, manifest: &Manifest) -> Result<Vec<FactorizationRecord>> {
    let records: Vec<FactorizationRecord> = serde_json::from_str(json)?;
    let mut ids = BTreeSet::new();
    for r in &records {
        if !ids.insert(r.id.as_str()) {
            return Err(TablesError::ManifestMismatch(format!("duplicate id {}", r.id)));
        }
        r.validate()?;
    }
    let got = Manifest::of(&records);
    if got.records != manifest.records || got.rows != manifest.rows {
        return Err(TablesError::ManifestMismatch(format!(
            "{} records in {} rows, manifest has {} in {}",
            got.records, got.rows, manifest.records, manifest.rows
        )));
    }
    if got.per_table != manifest.per_table {
        return Err(TablesError::ManifestMismatch(format!("per-table counts {:?}", got.per_table)));
    }
    if got.refs != manifest.refs {
        let a: BTreeSet<_> = got.refs.iter().collect();
        let b: BTreeSet<_> = manifest.refs.iter().collect();
        let diff: Vec<_> = a.symmetric_difference(&b).collect();
        return Err(TablesError::ManifestMismatch(format!("reference labels differ: {diff:?}")));
    }
    Ok(records)
}

pub fn bundled_manifest() -> Manifest {
    serde_json::from_str(BUNDLED_MANIFEST).expect("bundled manifest")
}

/// The database text: the file named by [`DB_ENV`] if set, else the bundled copy.
pub fn db_source() -> Result<(String, Manifest)> {
    match std::env::var_os(DB_ENV) {
        Some(p) => {
            let path = PathBuf::from(p);
            let text = read(&path)?;
            // A sibling manifest wins; otherwise the edited file must still match the bundled one.
            let sibling = path.with_file_name("manifest.json");
            let manifest =
                if sibling.exists() { serde_json::from_str(&read(&sibling)?)? } else { bundled_manifest() };
            Ok((text, manifest))
        }
        None => Ok((BUNDLED_DB.to_string(), bundled_manifest())),
    }
}

fn read(p: &Path) -> Result<String> {
    std::fs::read_to_string(p).map_err(|e| TablesError::Io { path: p.to_path_buf(), source: e })
}

pub fn load_db() -> Result<Vec<FactorizationRecord>> {
    let (text, manifest) = db_source()?;
    parse_db(&text, &manifest)
}

/// Records of `table` (and `row`, see [`FactorizationRecord::matches_row`]).
pub fn select<'a>(
    records: &'a [FactorizationRecord],
    table: Option<u32>,
    row: Option<&str>,
) -> Vec<&'a FactorizationRecord> {
    records
        .iter()
        .filter(|r| table.is_none_or(|t| r.table == t))
        .filter(|r| row.is_none_or(|f| r.matches_row(f)))
        .collect()
}

/// Every distinct shape string of the database.
pub fn all_shape_strings(records: &[FactorizationRecord]) -> BTreeSet<String> {
    records.iter().flat_map(|r| r.shapes.iter().map(|(_, s)| s.to_string())).collect()
}

/// Parses, prints and re-parses `s`; true when both printed forms agree.
pub fn round_trips(s: &str) -> bool {
    let Ok(a) = parse_shape(s) else { return false };
    let p = shapes::print_shape(&a);
    parse_shape(&p).is_ok_and(|b| b == a && shapes::print_shape(&b) == p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bind(kv: &[(&str, i64)]) -> Bindings {
        kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn bundled_db_matches_manifest() {
        let db = parse_db(BUNDLED_DB, &bundled_manifest()).unwrap();
        assert_eq!(db.iter().filter(|r| r.table == 8).map(|r| r.row).max(), Some(21));
    }

    #[test]
    fn dropped_record_is_a_manifest_mismatch() {
        let mut v: Vec<serde_json::Value> = serde_json::from_str(BUNDLED_DB).unwrap();
        v.pop();
        let err = parse_db(&serde_json::to_string(&v).unwrap(), &bundled_manifest()).unwrap_err();
        assert!(matches!(err, TablesError::ManifestMismatch(_)));
    }

    #[test]
    fn d_branch() {
        let db = parse_db(BUNDLED_DB, &bundled_manifest()).unwrap();
        let r = db.iter().find(|r| r.id == "T8R1.1").unwrap();
        let c = r.case(&bind(&[("a", 1), ("b", 3), ("q", 2)])).unwrap().unwrap();
        assert_eq!(c.bindings["d"], 2);
        let c = r.case(&bind(&[("a", 1), ("b", 3), ("q", 4)])).unwrap().unwrap();
        assert_eq!(c.bindings["d"], 3);
    }

    #[test]
    fn odd_m_excludes_four() {
        let db = parse_db(BUNDLED_DB, &bundled_manifest()).unwrap();
        let r = db.iter().find(|r| r.id == "T5R4").unwrap();
        assert!(r.case(&bind(&[("m", 4), ("q", 2)])).unwrap().is_none());
        assert!(r.case(&bind(&[("m", 5), ("q", 2)])).unwrap().is_some());
    }

    #[test]
    fn unitary_row_two_small_cases() {
        let db = parse_db(BUNDLED_DB, &bundled_manifest()).unwrap();
        let r = db.iter().find(|r| r.id == "T2R2").unwrap();
        let cases = r.admissible_bindings(&BigUint::from(100_000_000u64));
        let got: Vec<String> = cases.iter().map(|c| c.label()).collect();
        assert!(got.contains(&"T2R2[m=2,q=2]".to_string()));
        assert!(got.contains(&"T2R2[m=2,q=3]".to_string()));
    }
}
