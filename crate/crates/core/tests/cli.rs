//! The `factorlab` binary: exit codes, output formats and shipped schemas.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use factorlab::cli::GenFile;
use factorlab::construct::{field_ext_linear, gens_classical, Family};
use factorlab::perm::{stabilizer, Domain, DomainKind, DEFAULT_MAX_DOMAIN};
use factorlab::tables::{load_db, FactorizationRecord};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_factorlab")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn schema(name: &str) -> jsonschema::JSONSchema {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs").join(name);
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::JSONSchema::compile(&v).expect("valid schema")
}

fn assert_valid(schema_file: &str, doc: &Value) {
    let s = schema(schema_file);
    let msgs: Vec<String> = match s.validate(doc) {
        Ok(()) => return,
        Err(errors) => errors.take(5).map(|e| format!("{} at {}", e, e.instance_path)).collect(),
    };
    panic!("{schema_file}: {msgs:?}");
}

#[test]
fn verify_golden_case_passes() {
    let o = run(&["verify", "--table", "2", "--row", "2", "--bind", "m=2", "--bind", "q=2", "--tier", "b"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.starts_with("PASS"), "{out}");
    assert!(out.contains("|H∩K|=6"));
}

#[test]
fn tier_a_sweep_json_matches_schema_and_text() {
    let o = run(&["sweep", "--tier", "a", "--max-order", "1e40", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let doc: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_valid("report.schema.json", &doc);
    let reports = doc.as_array().unwrap();
    assert!(reports.len() > 300);
    let summary = String::from_utf8(o.stderr).unwrap();
    assert!(summary.contains("fail=0"), "{summary}");

    let text = run(&["sweep", "--tier", "a", "--max-order", "1e40"]);
    let text = stdout(&text);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), reports.len() + 1);
    assert_eq!(lines.last().unwrap(), &summary.trim_end());
    for (line, r) in lines.iter().zip(reports) {
        let int = r["computed"]["orderInt"].as_str().unwrap();
        assert!(line.contains(&format!("|H∩K|={int}")), "{line} vs {int}");
        assert!(line.contains(r["case"].as_str().unwrap()));
    }
}

#[test]
fn tier_b_reports_match_schema() {
    let o = run(&["sweep", "--tier", "b", "--residual", "--timings", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    assert_valid("report.schema.json", &serde_json::from_slice(&o.stdout).unwrap());
}

#[test]
fn empty_filter_gives_zero_summary() {
    let o = run(&["sweep", "--table", "9", "--row", "999"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "tables=0 cases=0 pass=0 fail=0 skipped=0\n");
    let o = run(&["sweep", "--table", "9", "--row", "999", "--format", "json"]);
    assert_eq!(stdout(&o).trim(), "[]");
}

#[test]
fn usage_errors_exit_two_with_diagnostics() {
    for args in [
        &["verify", "--tier", "c"][..],
        &["verify", "--table", "2", "--row", "2", "--bind", "m"],
        &["sweep", "--max-order", "lots"],
        &["show", "--table", "2"],
        &["frobnicate"],
    ] {
        let o = run(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty(), "{args:?}");
    }
}

#[test]
fn show_prints_branch_text_and_ref() {
    let o = run(&["show", "--table", "8", "--row", "1"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    for needle in ["Sp(2*a*b,q)", "branches", "ref", "a*b>=2"] {
        assert!(out.contains(needle), "missing {needle}: {out}");
    }
}

#[test]
fn export_db_round_trips_and_matches_schema() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("db.json");
    let o = run(&["export-db", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    assert_valid("db.schema.json", &serde_json::from_str(&text).unwrap());
    let back: Vec<FactorizationRecord> = serde_json::from_str(&text).unwrap();
    assert_eq!(back, load_db().unwrap());
}

fn triple_files(dir: &Path) -> [PathBuf; 4] {
    let g = gens_classical(Family::SL, 4, 2).unwrap();
    let h = field_ext_linear(2, 2, 2, true).unwrap();
    let gc = g.closed_chain(0, DEFAULT_MAX_DOMAIN).unwrap();
    let e1 = [1, 0, 0, 0];
    let flags = Domain::new(DomainKind::RefinedAntiflags, g.field(), 4, None).unwrap();
    let (_, k) = stabilizer(&gc, &flags, flags.antiflag(&e1, &e1).unwrap(), 0, DEFAULT_MAX_DOMAIN).unwrap();
    let points = Domain::new(DomainKind::NonzeroVectors, g.field(), 4, None).unwrap();
    let (_, p1) = stabilizer(&gc, &points, points.point_of_vector(&e1), 0, DEFAULT_MAX_DOMAIN).unwrap();
    let files = [
        GenFile::of_presentation(&g),
        GenFile::of_presentation(&h),
        GenFile::of_elements(g.field(), 4, k.generators()),
        GenFile::of_elements(g.field(), 4, p1.generators()),
    ];
    let names = ["G", "H", "K", "P1"].map(|n| dir.join(format!("{n}.json")));
    for (f, p) in files.iter().zip(&names) {
        f.write(p).unwrap();
        assert_valid("genfile.schema.json", &serde_json::to_value(f).unwrap());
    }
    names
}

#[test]
fn check_triple_outcomes() {
    let dir = tempfile::tempdir().unwrap();
    let [g, h, k, p1] = triple_files(dir.path());
    let s = |p: &PathBuf| p.to_str().unwrap().to_string();

    let o = run(&["check-triple", &s(&g), &s(&h), &s(&k), "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["orderInt"], "1");
    assert_eq!(r["factorizes"], true);

    let o = run(&["check-triple", &s(&g), &s(&g), &s(&g)]);
    assert_eq!(o.status.code(), Some(0), "H = K = G");

    let o = run(&["check-triple", &s(&g), &s(&p1), &s(&p1)]);
    assert_eq!(o.status.code(), Some(1), "both factors in one parabolic");
    assert!(stdout(&o).starts_with("FAIL"));

    // SL_4(2) generators do not lie in the parabolic.
    let o = run(&["check-triple", &s(&p1), &s(&g), &s(&p1)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("does not lie in G"));

    let other = dir.path().join("other.json");
    GenFile::of_presentation(&gens_classical(Family::SL, 2, 3).unwrap()).write(&other).unwrap();
    let o = run(&["check-triple", &s(&g), &s(&other), &s(&k)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("disagree"));
}
