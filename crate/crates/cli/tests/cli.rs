use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lpe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lpe")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const CHAIN: &str = "network ab
node A states t f
node B states t f
parents B A
cpt A
0.3 0.7
cpt B
0.9 0.1
0.2 0.8
";

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn query_to_saturation_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "ab.net", CHAIN);
    let o = lpe(&["query", &f, "--node", "B", "--target-width", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let out = stdout(&o);
    assert!(out.contains("iteration 1 active 1"));
    assert!(out.contains("t=[0.410000000, 0.410000000]"), "{out}");
    assert!(out.lines().last().unwrap().starts_with("status saturated"));
}

#[test]
fn satisfied_query_exits_with_zero() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "ab.net", CHAIN);
    let o = lpe(&["query", &f, "--node", "B", "--target-width", "0.8"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("status satisfied iterations 1"));
}

#[test]
fn threshold_reports_a_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "ab.net", CHAIN);
    let o = lpe(&["query", &f, "--node", "A", "--evidence", "B=t", "--threshold", "A:t>0.5"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("verdict P(A=t) > 0.5 is true"), "{}", stdout(&o));
}

#[test]
fn iteration_budget_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "ab.net", CHAIN);
    let o = lpe(&["query", &f, "--node", "B", "--target-width", "0", "--max-iterations", "1"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("status budget_exhausted"));
}

#[test]
fn errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "ab.net", CHAIN);
    for args in [
        vec!["query", f.as_str(), "--node", "Z"],
        vec!["query", f.as_str(), "--node", "B", "--evidence", "B=maybe"],
        vec!["query", f.as_str(), "--node", "B", "--threshold", "A:t>0.5"],
        vec!["exact", "/nonexistent/file.net", "--node", "A"],
    ] {
        let o = lpe(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    }
    let bad = write(dir.path(), "bad.net", "node A states t f\n");
    assert_eq!(lpe(&["exact", &bad, "--node", "A"]).status.code(), Some(1));
}

#[test]
fn exact_prints_both_oracles_on_a_polytree() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "ab.net", CHAIN);
    let o = lpe(&["exact", &f, "--node", "A", "--evidence", "B=t"]);
    assert!(o.status.success());
    let out = stdout(&o);
    let want = format!("t={:.12}", 0.27 / 0.41);
    assert!(out.lines().next().unwrap().starts_with("enumeration") && out.contains(&want), "{out}");
    assert!(out.lines().nth(1).unwrap().starts_with("polytree"));
}

#[test]
fn generated_networks_round_trip_through_query_and_exact() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("loopy.net");
    let f = f.to_str().unwrap();
    let o = lpe(&["gen", "--nodes", "14", "--topology", "loopy", "--ratio", "1.3", "--seed", "5", "--with-evidence", "--out", f]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(f).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("parents")).flat_map(|l| l.split_whitespace().skip(2)).count(), 19);

    let exact = stdout(&lpe(&["exact", f, "--node", "n0"]));
    assert!(exact.starts_with("enumeration") && !exact.contains("polytree"));
    let o = lpe(&["query", f, "--node", "n0", "--strategy", "delayed", "--delay", "1", "--target-width", "0"]);
    assert!(matches!(o.status.code(), Some(0) | Some(2)));
    let last_iteration = stdout(&o).lines().rev().find(|l| l.starts_with("iteration")).unwrap().to_string();
    assert!(last_iteration.contains("width 0.000000000"), "{last_iteration}");
}

#[test]
fn generation_is_reproducible() {
    let a = stdout(&lpe(&["gen", "--nodes", "20", "--seed", "9"]));
    let b = stdout(&lpe(&["gen", "--nodes", "20", "--seed", "9"]));
    assert_eq!(a, b);
    assert!(a.starts_with("network polytree-n20-s9"));
}

#[test]
fn bench_writes_jsonl_and_csv() {
    let dir = tempfile::tempdir().unwrap();
    let suite = write(
        dir.path(),
        "suite.json",
        r#"{"grids":[{"node_counts":[10],"topology":{"kind":"polytree"},"seed_count":2}],
            "queries_per_network":3,"strategies":["bfs","no-loops"],"target_widths":[0.5]}"#,
    );
    let out = dir.path().join("results.jsonl");
    let o = lpe(&["bench", "--suite", &suite, "--out", out.to_str().unwrap(), "--csv"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lines = fs::read_to_string(&out).unwrap();
    assert_eq!(lines.lines().count(), 12);
    assert!(lines.lines().all(|l| l.starts_with('{') && l.contains("\"status\":\"satisfied\"")));
    let csv = fs::read_to_string(out.with_extension("csv")).unwrap();
    assert_eq!(csv.lines().count(), 13);
}

#[test]
fn bench_rejects_bad_suites() {
    let dir = tempfile::tempdir().unwrap();
    let suite = write(dir.path(), "suite.json", r#"{"strategies":["sideways"],"target_widths":[0.5]}"#);
    let o = lpe(&["bench", "--suite", &suite, "--out", dir.path().join("r.jsonl").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}
