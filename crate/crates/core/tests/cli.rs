use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use knn_certify::cli::{BenchReport, RobustnessReport};
use knn_certify::data::{generate_synthetic, write_dataset, write_queries};
use knn_certify::{Dataset, Query};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_knn-certify"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn report(out: &Output) -> RobustnessReport {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn exact_on_two_point_line() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "a.csv", "1,-1\n2,3\n");
    let queries = write(dir.path(), "q.csv", "1,0\n");
    let r = report(&run(&["exact", "--data", s(&data), "--queries", s(&queries)]));
    assert_eq!(r.records.len(), 1);
    assert!((r.records[0].epsilon.unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(r.aggregates.mean_epsilon, Some(1.0));
}

#[test]
fn header_row_is_skipped() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "b.csv", "label,x,y\n1,1,1\n2,2,0\n");
    let queries = write(dir.path(), "q.csv", "label,x,y\n1,0,0\n");
    let r = report(&run(&["exact", "--data", s(&data), "--queries", s(&queries)]));
    assert!((r.records[0].epsilon.unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);

    let r = report(&run(&["attack", "--method", "naive", "--data", s(&data), "--queries", s(&queries)]));
    assert!((r.records[0].epsilon.unwrap() - 1.0).abs() < 1e-6);

    let r = report(&run(&["exact", "--norm", "linf", "--data", s(&data), "--queries", s(&queries)]));
    assert!((r.records[0].epsilon.unwrap() - 0.5).abs() < 1e-6);
    assert_eq!(r.norm, "linf");
}

#[test]
fn verify_three_neighbors() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "c.csv", "1,-0.5\n1,-1\n2,2\n2,3\n2,4\n");
    let queries = write(dir.path(), "q.csv", "1,0\n");
    let r = report(&run(&["verify", "--k", "3", "--data", s(&data), "--queries", s(&queries)]));
    assert!((r.records[0].epsilon.unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(r.records[0].binding_pair, Some((1, 3)));

    let r = report(&run(&[
        "attack", "--method", "qp-greedy", "--k", "3", "--data", s(&data), "--queries", s(&queries),
    ]));
    assert!((r.records[0].epsilon.unwrap() - 1.0).abs() < 1e-6);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "a.csv", "1,-1\n2,3\n");
    let queries = write(dir.path(), "q.csv", "1,0\n");
    let missing = dir.path().join("missing.csv");
    let bad = write(dir.path(), "bad.csv", "1,-1\n2,abc\n");
    let ragged = write(dir.path(), "ragged.csv", "1,-1,0\n2,3\n");

    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["exact"]).status.code(), Some(2));
    assert_eq!(run(&["exact", "--k", "2", "--data", s(&data), "--queries", s(&queries)]).status.code(), Some(2));
    assert_eq!(run(&["exact", "--k", "3", "--data", s(&data), "--queries", s(&queries)]).status.code(), Some(2));
    assert_eq!(run(&["verify", "--norm", "l1", "--data", s(&data), "--queries", s(&queries)]).status.code(), Some(2));
    assert_eq!(run(&["exact", "--data", s(&missing), "--queries", s(&queries)]).status.code(), Some(3));
    assert_eq!(run(&["exact", "--data", s(&bad), "--queries", s(&queries)]).status.code(), Some(3));
    assert_eq!(run(&["exact", "--data", s(&ragged), "--queries", s(&queries)]).status.code(), Some(3));
    let wide = write(dir.path(), "wide.csv", "1,0,0\n");
    assert_eq!(run(&["exact", "--data", s(&data), "--queries", s(&wide)]).status.code(), Some(2));
}

fn synthetic(dir: &Path) -> (PathBuf, PathBuf) {
    let ds = generate_synthetic(40, 6, 3, 1.5, 7).unwrap();
    let test = generate_synthetic(8, 6, 3, 1.5, 8).unwrap();
    let queries: Vec<Query> = (0..test.len()).map(|i| Query::new(test.point(i).to_vec(), test.label(i))).collect();
    let data = dir.join("train.csv");
    let qpath = dir.join("test.csv");
    write_dataset(&data, &ds).unwrap();
    write_queries(&qpath, &queries).unwrap();
    (data, qpath)
}

#[test]
fn reports_are_reproducible_across_workers() {
    let dir = tempfile::tempdir().unwrap();
    let (data, queries) = synthetic(dir.path());
    let go = |workers: &str, name: &str| {
        let out = dir.path().join(name);
        let status = run(&[
            "exact", "--data", s(&data), "--queries", s(&queries), "--no-timing", "--emit-deltas",
            "--workers", workers, "--output", s(&out),
        ]);
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        std::fs::read(out).unwrap()
    };
    let a = go("1", "a.json");
    assert_eq!(a, go("1", "b.json"));
    assert_eq!(a, go("4", "c.json"));
    let parsed: RobustnessReport = serde_json::from_slice(&a).unwrap();
    assert_eq!(parsed.records.len(), 24);
    assert!(parsed.records.iter().all(|r| r.delta.is_some() && r.stats.wall_time == 0.0));
}

#[test]
fn bench_writes_table_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let (data, queries) = synthetic(dir.path());
    let json = dir.path().join("bench.json");
    let csv = dir.path().join("bench.csv");
    let out = run(&[
        "bench", "--data", s(&data), "--queries", s(&queries), "--sample", "10", "--seed", "3",
        "--sweep-n-scr", "1,8", "--sort-ablation", "--output", s(&json), "--table-csv", s(&csv),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8(out.stdout).unwrap();
    for name in ["Exact", "Verifier", "QP-1", "QP-10", "Naive-1", "Naive-10", "Mean"] {
        assert!(table.contains(name), "{name} missing from\n{table}");
    }
    let report: BenchReport = serde_json::from_slice(&std::fs::read(&json).unwrap()).unwrap();
    assert_eq!(report.query_indices.len(), 10);
    assert_eq!(report.n_scr_sweep.len(), 2);
    assert_eq!(report.sort_ablation.len(), 2);
    let exact = report.rows.iter().find(|r| r.method == "Exact").unwrap().mean_epsilon.unwrap();
    let lower = report.rows.iter().find(|r| r.method == "Verifier").unwrap().mean_epsilon.unwrap();
    assert!(lower <= exact);
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("method,kind,"));
    assert!(dir.path().join("bench.sweep.csv").exists());

    let k3 = run(&["bench", "--k", "3", "--data", s(&data), "--queries", s(&queries), "--sample", "5"]);
    assert!(k3.status.success(), "{}", String::from_utf8_lossy(&k3.stderr));
    let report: BenchReport = serde_json::from_slice(&k3.stdout).unwrap();
    assert!(report.rows.iter().any(|r| r.method == "QP-greedy"));
}

#[test]
fn library_round_trip_matches_cli() {
    let dir = tempfile::tempdir().unwrap();
    let ds = Dataset::from_rows(&[vec![1.0, 1.0], vec![2.0, 0.0]], vec![1, 2]).unwrap();
    let data = dir.path().join("d.csv");
    write_dataset(&data, &ds).unwrap();
    let queries = dir.path().join("q.csv");
    write_queries(&queries, &[Query::new(vec![0.0, 0.0], 1)]).unwrap();
    let r = report(&run(&["verify", "--data", s(&data), "--queries", s(&queries)]));
    assert!((r.records[0].epsilon.unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
}
