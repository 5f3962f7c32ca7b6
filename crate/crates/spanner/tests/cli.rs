//! The command-line front end is a thin adapter: each subcommand's bytes
//! must match the corresponding library calls, errors must be machine
//! readable, and evaluation must stream.

use std::collections::BTreeSet;
use std::io::{BufRead, BufReader};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use spanner::enumerate::enumerate;
use spanner::model::Document;
use spanner::regex::{oracle_eval, parse_regex};
use spanner::va::{compile_regex, va_to_json};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_spanner"))
}

fn run(args: &[&str]) -> (String, String, i32) {
    let out = bin().args(args).output().expect("spawn spanner");
    (
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
        out.status.code().unwrap_or(-1),
    )
}

fn mapping_lines(a: &spanner::va::Va, d: &Document) -> String {
    let mut s = String::new();
    for m in enumerate(&a.trim(), d).unwrap() {
        s.push_str(&m.to_json().to_string());
        s.push('\n');
    }
    s
}

#[test]
fn eval_matches_library_bytes() {
    let (stdout, stderr, code) = run(&["eval", "--regex", "a x{a}", "--doc-text", "aa"]);
    assert_eq!(code, 0, "{stderr}");
    let alphabet: BTreeSet<char> = ['a'].into();
    let ast = parse_regex("a x{a}", &alphabet).unwrap();
    assert_eq!(stdout, mapping_lines(&compile_regex(&ast), &Document::new("aa")));
    assert_eq!(stdout, "{\"x\":[2,3]}\n");
}

#[test]
fn oracle_matches_library_bytes() {
    let (stdout, _, code) = run(&["oracle", "--regex", ".* x{.} .*", "--doc-text", "ab"]);
    assert_eq!(code, 0);
    let alphabet: BTreeSet<char> = ['a', 'b'].into();
    let ast = parse_regex(".* x{.} .*", &alphabet).unwrap();
    let mut want = String::new();
    for m in oracle_eval(&ast, &Document::new("ab")) {
        want.push_str(&m.to_json().to_string());
        want.push('\n');
    }
    assert_eq!(stdout, want);
}

#[test]
fn compile_matches_library_bytes() {
    let (stdout, _, code) = run(&["compile", "--regex", "x{a}|b", "--alphabet", "ab"]);
    assert_eq!(code, 0);
    let alphabet: BTreeSet<char> = ['a', 'b'].into();
    let ast = parse_regex("x{a}|b", &alphabet).unwrap();
    assert_eq!(stdout.trim_end(), va_to_json(&compile_regex(&ast)).to_string());
}

#[test]
fn classify_reports_classes() {
    let (stdout, _, code) = run(&["classify", "--regex", "x{a}b|ab"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["functional"], false);
    assert_eq!(v["sequential"], true);
    assert_eq!(v["disjunctive_functional"], true);
    assert_eq!(v["vars"], serde_json::json!(["x"]));
}

#[test]
fn plan_and_eval_query_files() {
    let dir = tempfile::tempdir().unwrap();
    let tree = dir.path().join("t.json");
    let inst = dir.path().join("i.json");
    std::fs::write(
        &tree,
        r#"{"op":"join","left":{"leaf":"a"},"right":{"leaf":"b"}}"#,
    )
    .unwrap();
    std::fs::write(&inst, r#"{"a":{"regex":"x{a}.*"},"b":{"regex":"x{a} .*|x{a}"}}"#).unwrap();
    let (stdout, _, code) =
        run(&["plan", "--tree", tree.to_str().unwrap(), "--inst", inst.to_str().unwrap(), "-k", "1"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["tractable"], true);
    assert_eq!(v["nodes"][0]["shared"], 1);
    // k = 0 still exits 0: the report is the answer.
    let (stdout, _, code) =
        run(&["plan", "--tree", tree.to_str().unwrap(), "--inst", inst.to_str().unwrap(), "-k", "0"]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["tractable"], false);
    // Evaluating the refused plan is a domain error with JSON on stderr.
    let (_, stderr, code) = run(&[
        "eval", "--tree", tree.to_str().unwrap(), "--inst", inst.to_str().unwrap(),
        "--doc-text", "aa", "-k", "0",
    ]);
    assert_eq!(code, 1);
    let v: serde_json::Value = serde_json::from_str(&stderr).unwrap();
    assert_eq!(v["error"]["kind"], "plan_refused");
    // With the bound satisfied it evaluates.
    let (stdout, _, code) = run(&[
        "eval", "--tree", tree.to_str().unwrap(), "--inst", inst.to_str().unwrap(),
        "--doc-text", "aa", "-k", "1",
    ]);
    assert_eq!(code, 0);
    assert!(stdout.lines().count() > 0);
}

#[test]
fn gen_produces_runnable_instances() {
    let dir = tempfile::tempdir().unwrap();
    let cnf = dir.path().join("phi.cnf");
    std::fs::write(&cnf, "p cnf 3 2\n1 2 3 0\n-1 2 -3 0\n").unwrap();
    // A small bounded-occurrence instance keeps the ad-hoc difference cheap.
    let cnf2 = dir.path().join("phi2.cnf");
    std::fs::write(&cnf2, "p cnf 2 2\n1 2 0\n-1 2 0\n").unwrap();
    let prefix = dir.path().join("inst").display().to_string();
    for (kind, cnf) in [("join-3sat", &cnf), ("diff-3sat", &cnf), ("diff-bounded", &cnf2)] {
        let (stdout, stderr, code) =
            run(&["gen", kind, "--cnf", cnf.to_str().unwrap(), "--out-prefix", &prefix]);
        assert_eq!(code, 0, "{kind}: {stderr}");
        let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
        let doc = std::fs::read_to_string(v["doc"].as_str().unwrap()).unwrap();
        assert!(!doc.is_empty());
        // The example formula is satisfiable: evaluation yields ≥ 1 line.
        // (The 3SAT join instance shares more than the default k.)
        let (stdout, stderr, code) = run(&[
            "eval",
            "--tree", v["tree"].as_str().unwrap(),
            "--inst", v["inst"].as_str().unwrap(),
            "--doc", v["doc"].as_str().unwrap(),
            "-k", "9",
        ]);
        assert_eq!(code, 0, "{kind}: {stderr}");
        assert!(stdout.lines().count() >= 1, "{kind} produced no mappings");
    }
    let (stdout, _, code) = run(&[
        "gen", "diff-weighted", "--cnf", cnf.to_str().unwrap(), "--out-prefix", &prefix, "-p", "1",
    ]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    let (stdout, _, code) = run(&[
        "eval",
        "--tree", v["tree"].as_str().unwrap(),
        "--inst", v["inst"].as_str().unwrap(),
        "--doc", v["doc"].as_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.lines().count() >= 1);
}

#[test]
fn usage_errors_exit_two() {
    let (_, _, code) = run(&["eval", "--regex", "a"]);
    assert_eq!(code, 2);
    let (_, _, code) = run(&["eval", "--regex", "a", "--doc-text", "a", "--doc", "/none"]);
    assert_eq!(code, 2);
    let (_, _, code) = run(&["frobnicate"]);
    assert_eq!(code, 2);
}

#[test]
fn domain_errors_are_machine_readable() {
    let (_, stderr, code) = run(&["eval", "--regex", "x{", "--doc-text", "a"]);
    assert_eq!(code, 1);
    let v: serde_json::Value = serde_json::from_str(&stderr).unwrap();
    assert_eq!(v["error"]["kind"], "parse");
    assert!(v["error"]["message"].as_str().unwrap().len() > 0);
}

#[test]
fn eval_streams_first_line_early() {
    // A large result family: the first mapping must arrive while the
    // process is still producing the rest.
    let doc = "a".repeat(60);
    let mut child = bin()
        .args(["eval", "--regex", ".* x{.*} .* y{.*} .*", "--doc-text", &doc])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let stdout = child.stdout.take().unwrap();
    let started = Instant::now();
    let mut reader = BufReader::new(stdout);
    let mut line = String::new();
    reader.read_line(&mut line).unwrap();
    let first = started.elapsed();
    assert!(!line.trim().is_empty(), "no first line");
    assert!(first < Duration::from_secs(2), "first line took {first:?}");
    // Still running (or at least produced far more than one line overall).
    let running = child.try_wait().unwrap().is_none();
    let _ = child.kill();
    let _ = child.wait();
    assert!(running, "process had already drained everything before the first read");
}
