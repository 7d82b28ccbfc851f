//! Command-line surface: subcommands, generator files and report emission.
//!
//! Exit codes: 0 when no case failed, 1 when some case failed, 2 on usage or
//! configuration errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::construct::Presentation;
use crate::gf::{Elt, Field, FieldSpec, GfError};
use crate::linalg::{GroupElem, LinalgError, MatF};
use crate::perm::PermError;
use crate::shapes::Bindings;
use crate::tables::{self, FactorizationRecord, TablesError};
use crate::verify::{self, Filter, Scope, Status, Tier, VerificationReport, VerifyError, VerifyOptions};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed JSON in {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error(transparent)]
    Tables(#[from] TablesError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error("generator files disagree on the field or dimension")]
    FieldMismatch,
    #[error("a generator of {0} does not lie in G")]
    NotSubgroup(&'static str),
    #[error("bad generator file {path}: {why}")]
    BadGenFile { path: PathBuf, why: String },
    #[error(transparent)]
    Field(#[from] GfError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Perm(#[from] PermError),
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "factorlab", about = "Check factorizations G = HK of finite classical groups against the tables")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One line per record.
    List(ListArgs),
    /// Full record: shapes, constraints, derived symbols, reference, recipes.
    Show(ShowArgs),
    /// Verify the selected records at the given bindings.
    Verify(VerifyArgs),
    /// Verify every case selected by the filters.
    Sweep(SweepArgs),
    /// Write the database as JSON.
    ExportDb(ExportArgs),
    /// Test `|G||H∩K| = |H||K|` for three generator files.
    CheckTriple(TripleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TierArg {
    A,
    B,
}

impl From<TierArg> for Tier {
    fn from(t: TierArg) -> Tier {
        match t {
            TierArg::A => Tier::A,
            TierArg::B => Tier::B,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScopeArg {
    Golden,
    Admissible,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub table: Option<u32>,
    /// Row number, or `row.sub` for one sub-row.
    #[arg(long)]
    pub row: Option<String>,
}

impl FilterArgs {
    fn filter(&self) -> Filter {
        Filter { table: self.table, row: self.row.clone() }
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value = "text")]
    pub format: Format,
    /// Write the output here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CapArgs {
    /// Largest |G0| scanned (tier a) or largest group given a chain (tier b); accepts `1e40`.
    #[arg(long, value_parser = parse_big)]
    pub max_order: Option<BigUint>,
    #[arg(long, default_value_t = crate::perm::DEFAULT_MAX_DOMAIN)]
    pub max_domain: u64,
    #[arg(long, default_value_t = crate::perm::DEFAULT_MAX_ENUM)]
    pub max_enum: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also compare the solvable residual of H∩K where the database states it.
    #[arg(long)]
    pub residual: bool,
    /// Include elapsed_ms in reports.
    #[arg(long)]
    pub timings: bool,
}

impl CapArgs {
    fn options(&self, tier: Tier) -> VerifyOptions {
        let mut o = VerifyOptions::for_tier(tier);
        if let Some(m) = &self.max_order {
            o.caps.max_order = m.clone();
        }
        o.caps.max_domain = self.max_domain;
        o.caps.max_enum = self.max_enum;
        o.seed = self.seed;
        o.residual = self.residual;
        o.timings = self.timings;
        o
    }
}

#[derive(Debug, Args)]
pub struct ListArgs {
    #[command(flatten)]
    pub filter: FilterArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ShowArgs {
    #[command(flatten)]
    pub filter: FilterArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub filter: FilterArgs,
    /// `name=value`; repeat for each parameter.
    #[arg(long = "bind", value_parser = parse_binding)]
    pub bind: Vec<(String, i64)>,
    #[arg(long, value_enum, default_value = "a")]
    pub tier: TierArg,
    #[command(flatten)]
    pub caps: CapArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub filter: FilterArgs,
    #[arg(long, value_enum, default_value = "a")]
    pub tier: TierArg,
    /// Tier-b bindings: the golden list, or every admissible binding within max-order.
    #[arg(long, value_enum, default_value = "golden")]
    pub scope: ScopeArg,
    #[command(flatten)]
    pub caps: CapArgs,
    /// Worker threads; 0 means one per core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TripleArgs {
    pub g: PathBuf,
    pub h: PathBuf,
    pub k: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = crate::perm::DEFAULT_MAX_DOMAIN)]
    pub max_domain: u64,
    #[arg(long, default_value_t = crate::perm::DEFAULT_MAX_ENUM)]
    pub max_enum: u64,
    #[command(flatten)]
    pub output: OutputArgs,
}

/// `1000`, `1e40` or `3e9` as an exact integer.
pub fn parse_big(s: &str) -> std::result::Result<BigUint, String> {
    let bad = || format!("not a nonnegative integer: {s:?}");
    match s.split_once(['e', 'E']) {
        Some((m, e)) => {
            let m: BigUint = m.parse().map_err(|_| bad())?;
            let e: u32 = e.parse().map_err(|_| bad())?;
            Ok(m * BigUint::from(10u32).pow(e))
        }
        None => s.parse().map_err(|_| bad()),
    }
}

pub fn parse_binding(s: &str) -> std::result::Result<(String, i64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got {s:?}"))?;
    let v = v.trim().parse().map_err(|_| format!("value of {k} is not an integer: {v:?}"))?;
    Ok((k.trim().to_string(), v))
}

/// A generator file: `{field: {p, f, modulus}, n, gens: [{frob, matrix}]}`.
/// Matrix entries are field elements coded as `sum c_i p^i` for the
/// polynomial-basis coefficients `c_i`; vectors are rows acted on from the right.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenFile {
    pub field: FieldSpec,
    pub n: usize,
    pub gens: Vec<GenElem>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenElem {
    /// Power of the Frobenius applied after the matrix; 0 for linear maps.
    #[serde(default)]
    pub frob: u32,
    pub matrix: Vec<Vec<Elt>>,
}

impl GenFile {
    pub fn of_elements(field: &Field, n: usize, gens: &[GroupElem]) -> GenFile {
        GenFile {
            field: field.spec().clone(),
            n,
            gens: gens.iter().map(|g| GenElem { frob: g.frob, matrix: g.mat.to_rows() }).collect(),
        }
    }

    pub fn of_presentation(p: &Presentation) -> GenFile {
        GenFile::of_elements(p.field(), p.dim(), &p.gens)
    }

    pub fn elements(&self) -> std::result::Result<(Arc<Field>, Vec<GroupElem>), CliError> {
        let k = Field::from_spec(&self.field)?;
        let mut out = Vec::with_capacity(self.gens.len());
        for g in &self.gens {
            let mat = MatF::from_rows(&k, &g.matrix)?;
            if mat.rows() != self.n || mat.cols() != self.n {
                return Err(LinalgError::DimensionMismatch(format!("{}x{} matrix in dimension {}", mat.rows(), mat.cols(), self.n)).into());
            }
            if mat.det() == 0 {
                return Err(LinalgError::SingularMatrix.into());
            }
            out.push(GroupElem { mat, frob: g.frob % k.f() });
        }
        Ok((k, out))
    }

    pub fn read(path: &Path) -> Result<GenFile> {
        let text = fs::read_to_string(path).map_err(|source| CliError::Io { path: path.into(), source })?;
        serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.into(), source })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("serializable");
        fs::write(path, text + "\n").map_err(|source| CliError::Io { path: path.into(), source })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TripleReport {
    pub status: Status,
    pub order_g: String,
    pub order_h: String,
    pub order_k: String,
    pub order_int: String,
    pub factorizes: bool,
    pub seed: u64,
}

/// Orders of the three groups and of `H∩K`, and whether `G = HK`.
pub fn check_triple(g: &GenFile, h: &GenFile, k: &GenFile, seed: u64, max_domain: u64, max_enum: u64) -> Result<TripleReport> {
    if g.field != h.field || g.field != k.field || g.n != h.n || g.n != k.n {
        return Err(CliError::FieldMismatch);
    }
    let (field, ge) = g.elements()?;
    let (_, he) = h.elements()?;
    let (_, ke) = k.elements()?;
    let chain = |gens: &[GroupElem]| verify::chain_of(&field, g.n, gens, seed, max_domain);
    let (gc, hc, kc) = (chain(&ge)?, chain(&he)?, chain(&ke)?);
    if !he.iter().all(|x| gc.contains(x)) {
        return Err(CliError::NotSubgroup("H"));
    }
    if !ke.iter().all(|x| gc.contains(x)) {
        return Err(CliError::NotSubgroup("K"));
    }
    let (int, holds) = verify::factorizes(&gc, &hc, &kc, max_enum)?;
    Ok(TripleReport {
        status: if holds { Status::Pass } else { Status::Fail },
        order_g: gc.order().to_string(),
        order_h: hc.order().to_string(),
        order_k: kc.order().to_string(),
        order_int: int.to_string(),
        factorizes: holds,
        seed,
    })
}

fn emit(out: &OutputArgs, text: String, stdout: &mut dyn Write) -> Result<()> {
    match &out.out {
        Some(p) => fs::write(p, text).map_err(|source| CliError::Io { path: p.clone(), source }),
        None => stdout.write_all(text.as_bytes()).map_err(|source| CliError::Io { path: "<stdout>".into(), source }),
    }
}

fn json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn selected<'a>(db: &'a [FactorizationRecord], f: &Filter) -> Vec<&'a FactorizationRecord> {
    db.iter().filter(|r| f.matches(r)).collect()
}

fn list_line(r: &FactorizationRecord) -> String {
    let s = &r.shapes;
    format!("{:<9} {} = {} * {}  int {}  [{}]", r.id, s.g, s.h, s.k, s.int, r.ref_label)
}

fn show_text(r: &FactorizationRecord) -> String {
    let mut t = format!("{}  (table {}, row {}, family {})\n", r.id, r.table, r.row, r.family);
    for (k, v) in r.shapes.iter() {
        t += &format!("  {k:<4} {v}\n");
    }
    t += &format!("  params      {}\n", r.params.join(", "));
    t += &format!("  constraints {}\n", if r.constraints.is_empty() { "-".into() } else { r.constraints.join("; ") });
    for (k, v) in &r.derived {
        t += &format!("  derived     {k} = {v}\n");
    }
    if let Some(d) = &r.derived_text {
        t += &format!("  branches    {d}\n");
    }
    for (k, [lo, hi]) in &r.free {
        t += &format!("  free        {k} in [{lo}, {hi}]\n");
    }
    t += &format!("  ref         {}\n", r.ref_label);
    if let Some(m) = &r.remarks {
        t += &format!("  remarks     {m}\n");
    }
    if let Some(b) = &r.tier_b {
        t += &format!("  tier-b      {}\n", serde_json::to_string(b).expect("serializable"));
    }
    t
}

fn reports_out(reports: &[VerificationReport], summary: &verify::Summary, out: &OutputArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let text = match out.format {
        Format::Json => {
            let _ = writeln!(stderr, "{summary}");
            json(&reports)
        }
        Format::Text => {
            let mut t: String = reports.iter().map(|r| r.text_line() + "\n").collect();
            t += &format!("{summary}\n");
            t
        }
    };
    emit(out, text, stdout)?;
    Ok(if summary.fail > 0 { 1 } else { 0 })
}

fn run_command(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    match cli.command {
        Command::List(a) => {
            let db = tables::load_db()?;
            let rs = selected(&db, &a.filter.filter());
            let text = match a.output.format {
                Format::Json => json(&rs),
                Format::Text => rs.iter().map(|r| list_line(r) + "\n").collect(),
            };
            emit(&a.output, text, stdout)?;
            Ok(0)
        }
        Command::Show(a) => {
            if a.filter.table.is_none() || a.filter.row.is_none() {
                return Err(CliError::Usage("show needs --table and --row".into()));
            }
            let db = tables::load_db()?;
            let rs = selected(&db, &a.filter.filter());
            if rs.is_empty() {
                return Err(CliError::Usage("no record matches".into()));
            }
            let text = match a.output.format {
                Format::Json => json(&rs),
                Format::Text => rs.iter().map(|r| show_text(r)).collect::<Vec<_>>().join("\n"),
            };
            emit(&a.output, text, stdout)?;
            Ok(0)
        }
        Command::Verify(a) => {
            let db = tables::load_db()?;
            let rs = selected(&db, &a.filter.filter());
            if rs.is_empty() {
                return Err(CliError::Usage("no record matches".into()));
            }
            let tier = Tier::from(a.tier);
            let opts = a.caps.options(tier);
            let b: Bindings = a.bind.iter().cloned().collect();
            let reports: Vec<VerificationReport> = rs
                .iter()
                .map(|r| match r.case(&b) {
                    Ok(Some(c)) => verify::verify(&c, tier, &opts),
                    Ok(None) => skipped(r, &b, tier, &opts, "config: bindings violate the record's constraints".into()),
                    Err(e) => skipped(r, &b, tier, &opts, format!("config: {e}")),
                })
                .collect();
            let tables: std::collections::BTreeSet<u32> = rs.iter().map(|r| r.table).collect();
            let summary = verify::Summary::of(&reports, tables.len());
            reports_out(&reports, &summary, &a.output, stdout, stderr)
        }
        Command::Sweep(a) => {
            let db = tables::load_db()?;
            let tier = Tier::from(a.tier);
            let scope = match a.scope {
                ScopeArg::Golden => Scope::Golden,
                ScopeArg::Admissible => Scope::Admissible,
            };
            let opts = a.caps.options(tier);
            let (reports, summary) = verify::sweep(&db, &a.filter.filter(), tier, scope, &opts, a.jobs)?;
            reports_out(&reports, &summary, &a.output, stdout, stderr)
        }
        Command::ExportDb(a) => {
            let db = tables::load_db()?;
            let text = json(&db);
            emit(&OutputArgs { format: Format::Json, out: a.out }, text, stdout)?;
            Ok(0)
        }
        Command::CheckTriple(a) => {
            let (g, h, k) = (GenFile::read(&a.g)?, GenFile::read(&a.h)?, GenFile::read(&a.k)?);
            let r = check_triple(&g, &h, &k, a.seed, a.max_domain, a.max_enum)?;
            let text = match a.output.format {
                Format::Json => json(&r),
                Format::Text => format!(
                    "{} |G|={} |H|={} |K|={} |H∩K|={} factorizes={}\n",
                    r.status, r.order_g, r.order_h, r.order_k, r.order_int, r.factorizes
                ),
            };
            emit(&a.output, text, stdout)?;
            Ok(if r.factorizes { 0 } else { 1 })
        }
    }
}

fn skipped(r: &FactorizationRecord, b: &Bindings, tier: Tier, opts: &VerifyOptions, reason: String) -> VerificationReport {
    VerificationReport {
        case: format!("{}[{}]", r.id, b.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(",")),
        record: r.id.clone(),
        tier,
        status: Status::Skipped,
        reason: Some(reason),
        bindings: b.clone(),
        route: None,
        computed: Default::default(),
        expected: Default::default(),
        seed: opts.seed,
        elapsed_ms: None,
    }
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run_with<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run_command(cli, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            2
        }
    }
}

pub fn run() -> i32 {
    run_with(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let mut full = vec!["factorlab"];
        full.extend_from_slice(args);
        let code = run_with(full, &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn big_numbers() {
        assert_eq!(parse_big("1e3").unwrap(), BigUint::from(1000u32));
        assert_eq!(parse_big("42").unwrap(), BigUint::from(42u32));
        assert!(parse_big("x").is_err());
    }

    #[test]
    fn usage_errors_exit_two() {
        let (code, _, err) = run(&["verify", "--bind", "m"]);
        assert_eq!(code, 2);
        assert!(!err.is_empty());
        assert_eq!(run(&["show", "--table", "2"]).0, 2);
    }

    #[test]
    fn verify_tier_b_case() {
        let (code, out, _) = run(&["verify", "--table", "2", "--row", "2", "--bind", "m=2", "--bind", "q=2", "--tier", "b"]);
        assert_eq!(code, 0, "{out}");
        assert!(out.starts_with("PASS"));
        assert!(out.ends_with("tables=1 cases=1 pass=1 fail=0 skipped=0\n"));
    }

    #[test]
    fn show_echoes_branch_text() {
        let (code, out, _) = run(&["show", "--table", "8", "--row", "1"]);
        assert_eq!(code, 0);
        assert!(out.contains("ex:K<P1<Sp"));
        assert!(out.contains("(a,b,q)=(1,3,2)"));
    }
}
