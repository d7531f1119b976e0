use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn corpus(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/corpus")
        .join(format!("{}.lq", name))
}

fn lq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lq"))
        .args(args)
        .env_remove("LLQ_PRELUDE")
        .output()
        .expect("lq runs")
}

fn lq_on(args: &[&str], file: &Path) -> Output {
    let mut all: Vec<&str> = args.to_vec();
    all.push(file.to_str().unwrap());
    lq(&all)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn check_accepts_swap() {
    let o = lq_on(&["check"], &corpus("swap"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).trim(), "main : Pair 1 1 Int Int");
}

#[test]
fn check_rejects_dup_with_a_linearity_mismatch() {
    let o = lq_on(&["check"], &corpus("dup_linear"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("LinearityMismatch"), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
}

#[test]
fn both_semantics_print_seven() {
    let o = lq_on(&["run", "--sem=both"], &corpus("array7"));
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "7\n");
}

#[test]
fn each_semantics_alone() {
    for sem in ["ordinary", "pure"] {
        let o = lq_on(&["run", "--sem", sem], &corpus("list_sum"));
        assert_eq!(o.status.code(), Some(0));
        assert_eq!(stdout(&o), "5050\n");
    }
}

#[test]
fn json_output_follows_the_schema() {
    let o = lq_on(&["run", "--sem=both", "--json", "--trace"], &corpus("swap"));
    assert_eq!(o.status.code(), Some(0));
    let lines: Vec<Value> = stdout(&o)
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    for (v, sem) in lines.iter().zip(["ordinary", "pure"]) {
        assert_eq!(v["outcome"], "value");
        assert_eq!(v["value"], "Pair 2 1");
        assert_eq!(v["semantics"], sem);
        assert!(v["steps"].as_u64().unwrap() > 0);
        let trace = v["trace"].as_array().unwrap();
        assert_eq!(trace.len() as u64, v["steps"].as_u64().unwrap());
        assert!(trace
            .iter()
            .all(|t| t["rule"].is_string() && t["redex"].is_string()));
    }
    let plain = lq_on(&["run", "--json"], &corpus("swap"));
    let v: Value = serde_json::from_slice(&plain.stdout).unwrap();
    assert!(v.get("trace").is_none());
}

#[test]
fn traces_use_rule_names() {
    let o = lq_on(&["run", "--trace"], &corpus("sharing"));
    let out = stdout(&o);
    assert!(
        out.contains("[ordinary] linear variable") || out.contains("[ordinary] variable"),
        "{}",
        out
    );
    assert!(out.lines().last().unwrap() == "84");
    let o = lq_on(&["run", "--trace", "--sem=pure"], &corpus("array7"));
    assert!(stdout(&o).contains("[pure] newMArray"), "{}", stdout(&o));
}

#[test]
fn running_out_of_fuel() {
    let o = lq_on(&["run", "--fuel=10", "--json"], &corpus("fib"));
    assert_eq!(o.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["outcome"], "fuel");
    assert_eq!(v["steps"], 10);
    assert!(v.get("value").is_none());
}

#[test]
fn blackholes_are_reported() {
    let o = lq_on(&["run", "--sem=both", "--json"], &corpus("blackhole"));
    assert_eq!(o.status.code(), Some(1));
    for line in stdout(&o).lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["outcome"], "blackhole");
    }
    assert!(!stderr(&o).contains("disagree"));
}

#[test]
fn forced_run_of_an_ill_typed_program() {
    let file = corpus("write_after_freeze");
    assert_eq!(lq_on(&["run"], &file).status.code(), Some(1));
    let o = lq_on(&["run", "--no-typecheck"], &file);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stdout(&o).starts_with("blocked: TypestateViolation"),
        "{}",
        stdout(&o)
    );
}

#[test]
fn usage_and_io_errors_exit_with_two() {
    assert_eq!(lq(&["run", "/nonexistent/file.lq"]).status.code(), Some(2));
    assert_eq!(lq(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(lq(&["run", "--sem=lazy", "x.lq"]).status.code(), Some(2));
    assert_eq!(lq(&["fuzz", "--count=0"]).status.code(), Some(2));
}

#[test]
fn syntax_errors_are_positioned() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bad.lq");
    std::fs::write(&file, "main = \\[1] x : Int .\n").unwrap();
    let o = lq_on(&["check"], &file);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.starts_with(&format!("{}:", file.display())), "{}", err);
    assert!(err.contains(":2:") || err.contains(":1:"), "{}", err);
}

#[test]
fn prelude_can_be_replaced_or_dropped() {
    let dir = tempfile::tempdir().unwrap();
    let prog = dir.path().join("flag.lq");
    std::fs::write(&prog, "main = On").unwrap();
    let prelude = dir.path().join("prelude.lq");
    std::fs::write(&prelude, "data Flag where { On : Flag ; Off : Flag }").unwrap();

    assert_eq!(lq_on(&["run"], &prog).status.code(), Some(1));
    let o = Command::new(env!("CARGO_BIN_EXE_lq"))
        .args(["run", prog.to_str().unwrap()])
        .env("LLQ_PRELUDE", &prelude)
        .output()
        .unwrap();
    assert_eq!(stdout(&o), "On\n", "{}", stderr(&o));

    let missing = Command::new(env!("CARGO_BIN_EXE_lq"))
        .args(["check", prog.to_str().unwrap()])
        .env("LLQ_PRELUDE", dir.path().join("nope.lq"))
        .output()
        .unwrap();
    assert_eq!(missing.status.code(), Some(2));

    let own = dir.path().join("own.lq");
    std::fs::write(&own, "data Flag where { On : Flag }\nmain = On").unwrap();
    assert_eq!(lq_on(&["run", "--no-prelude"], &own).status.code(), Some(0));
    // Bool is unknown without the prelude
    assert_eq!(
        lq_on(&["check", "--no-prelude"], &corpus("bool_logic"))
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn fuzz_reports_a_clean_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("repro");
    let o = lq(&[
        "fuzz",
        "--count=40",
        "--seed=9",
        "--json",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["programs"], 40);
    for k in [
        "progress_violations",
        "preservation_violations",
        "disagreements",
    ] {
        assert_eq!(v[k], 0, "{}", k);
    }
    assert!(v["state_checks"].as_u64().unwrap() > 0);
    assert_eq!(v["failures"], Value::Array(vec![]));
    assert!(!out.exists());

    let table = stdout(&lq(&["fuzz", "--count=5"]));
    assert!(table.lines().next().unwrap().starts_with("programs"));
    assert!(table.contains("disagreements"));
}
