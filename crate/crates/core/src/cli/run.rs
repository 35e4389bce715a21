use std::fs;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::args::{Command, MethodArg, NormArg, RunConfig};
use super::report::{
    round_sig, Aggregates, BenchReport, BenchRow, QueryRecord, RobustnessReport, SearchProfile, SCHEMA_VERSION,
};
use crate::attack::{
    exact_1nn, mean_attack, naive_attack, qp_greedy_knn, qp_top_m, CertificateKind, PerturbationCertificate,
    SearchConfig, SearchStats,
};
use crate::data::{detect_header, knn_predict, load_csv, load_queries, Dataset, Query, TieRule};
use crate::error::{Error, Result};
use crate::lp::{exact_1nn_lp, LpNorm};
use crate::verify::verify_knn;

/// One evaluation procedure applied per query.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Exact,
    ExactLp(LpNorm),
    Verifier,
    Qp(usize),
    QpGreedy,
    Naive(usize),
    Mean,
}

impl Method {
    pub fn label(self) -> String {
        match self {
            Method::Exact => "Exact".into(),
            Method::ExactLp(n) => format!("Exact-{}", n.name()),
            Method::Verifier => "Verifier".into(),
            Method::Qp(m) => format!("QP-{m}"),
            Method::QpGreedy => "QP-greedy".into(),
            Method::Naive(m) => format!("Naive-{m}"),
            Method::Mean => "Mean".into(),
        }
    }

    fn kind(self) -> CertificateKind {
        match self {
            Method::Exact | Method::ExactLp(_) => CertificateKind::Exact,
            Method::Verifier => CertificateKind::LowerBound,
            _ => CertificateKind::UpperBound,
        }
    }
}

/// Runs one method on one query and packages the result.
pub fn evaluate(
    ds: &Dataset,
    q: &Query,
    query_index: usize,
    method: Method,
    k: usize,
    search: &SearchConfig,
) -> Result<QueryRecord> {
    let predicted_label = knn_predict(ds, &q.z, k, &search.tie, Some(q.true_label))?;
    let (cert, binding_pair) = match method {
        Method::Verifier => {
            let started = Instant::now();
            let v = verify_knn(ds, q, k)?;
            let cert = PerturbationCertificate {
                delta: None,
                epsilon: v.epsilon_lower,
                kind: CertificateKind::LowerBound,
                method: "verifier".into(),
                stats: SearchStats {
                    wall_time: started.elapsed().as_secs_f64(),
                    ..SearchStats::default()
                },
                misclassified: v.misclassified,
            };
            (cert, v.binding_pair)
        }
        _ => {
            let attempt = match method {
                Method::Exact => exact_1nn(ds, q, search),
                Method::ExactLp(norm) => exact_1nn_lp(ds, q, norm),
                Method::Qp(m) => qp_top_m(ds, q, m, search),
                Method::QpGreedy => qp_greedy_knn(ds, q, k, search),
                Method::Naive(m) => naive_attack(ds, q, k, m),
                Method::Mean => mean_attack(ds, q, k),
                Method::Verifier => unreachable!("handled above"),
            };
            match attempt {
                Ok(cert) => (cert, None),
                // A heuristic that finds nothing is a result, not a run failure.
                Err(e @ (Error::NoFlip | Error::NoFeasibleTarget { .. })) => {
                    return Ok(QueryRecord {
                        query_index,
                        true_label: q.true_label,
                        predicted_label,
                        epsilon: None,
                        kind: method.kind(),
                        method: method.label(),
                        delta: None,
                        binding_pair: None,
                        misclassified: false,
                        failure: Some(e.to_string()),
                        stats: SearchStats::default(),
                    })
                }
                Err(e) => return Err(e),
            }
        }
    };
    Ok(QueryRecord {
        query_index,
        true_label: q.true_label,
        predicted_label,
        epsilon: Some(round_sig(cert.epsilon)),
        kind: cert.kind,
        method: method.label(),
        delta: cert.delta,
        binding_pair,
        misclassified: cert.misclassified,
        failure: None,
        stats: cert.stats,
    })
}

fn load_inputs(cfg: &RunConfig) -> Result<(Dataset, Vec<Query>)> {
    let ds = load_csv(&cfg.data_path, detect_header(&cfg.data_path)?)?;
    let queries = load_queries(&cfg.query_path, detect_header(&cfg.query_path)?)?;
    for q in &queries {
        ds.check_dim(&q.z)?;
    }
    Ok((ds, queries))
}

/// Indices of queries to evaluate: everything, or a seeded uniform sample of
/// the correctly classified ones, returned in ascending order.
pub fn select_queries(ds: &Dataset, queries: &[Query], k: usize, sample: Option<usize>, seed: u64) -> Result<Vec<usize>> {
    let Some(n) = sample else {
        return Ok((0..queries.len()).collect());
    };
    let tie = TieRule::default();
    let mut correct = Vec::new();
    for (i, q) in queries.iter().enumerate() {
        if knn_predict(ds, &q.z, k, &tie, Some(q.true_label))? == q.true_label {
            correct.push(i);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, correct.len(), n.min(correct.len()))
        .into_iter()
        .map(|p| correct[p])
        .collect();
    picked.sort_unstable();
    Ok(picked)
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))
}

/// Evaluates `method` on the selected queries; results come back in query
/// order regardless of the worker count. Returns records and wall time.
fn run_method(
    pool: &rayon::ThreadPool,
    ds: &Dataset,
    queries: &[Query],
    picked: &[usize],
    method: Method,
    k: usize,
    search: &SearchConfig,
) -> Result<(Vec<QueryRecord>, f64)> {
    let started = Instant::now();
    let records = pool.install(|| {
        picked
            .par_iter()
            .map(|&i| evaluate(ds, &queries[i], i, method, k, search))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok((records, started.elapsed().as_secs_f64()))
}

fn strip(records: &mut [QueryRecord], deltas: bool, timing: bool) {
    for r in records {
        if !deltas {
            r.delta = None;
        }
        if !timing {
            r.stats.wall_time = 0.0;
        }
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|source| Error::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("reports serialize")
}

/// Executes `exact`, `verify` or `attack` and returns the report.
pub fn run_report(cfg: &RunConfig) -> Result<RobustnessReport> {
    cfg.validate()?;
    let (ds, queries) = load_inputs(cfg)?;
    let method = match (cfg.command, cfg.norm, cfg.method) {
        (Command::Exact, NormArg::L2, _) => Method::Exact,
        (Command::Exact, NormArg::Linf, _) => Method::ExactLp(LpNorm::Linf),
        (Command::Exact, NormArg::L1, _) => Method::ExactLp(LpNorm::L1),
        (Command::Verify, ..) => Method::Verifier,
        (Command::Attack, _, MethodArg::Qp) => Method::Qp(cfg.m),
        (Command::Attack, _, MethodArg::QpGreedy) => Method::QpGreedy,
        (Command::Attack, _, MethodArg::Naive) => Method::Naive(cfg.m),
        (Command::Attack, _, MethodArg::Mean) => Method::Mean,
        (Command::Bench, ..) => return Err(Error::Config("bench produces a bench report".into())),
    };
    let picked = select_queries(&ds, &queries, cfg.k, cfg.sample, cfg.seed)?;
    let (mut records, wall) = run_method(&pool(cfg.workers)?, &ds, &queries, &picked, method, cfg.k, &cfg.search_config())?;
    strip(&mut records, cfg.emit_deltas, !cfg.no_timing);
    let aggregates = Aggregates::from_records(&records, if cfg.no_timing { 0.0 } else { wall });
    Ok(RobustnessReport {
        schema_version: SCHEMA_VERSION,
        command: format!("{:?}", cfg.command).to_lowercase(),
        method: method.label(),
        k: cfg.k,
        norm: cfg.norm.name().into(),
        records,
        aggregates,
    })
}

fn bench_methods(k: usize) -> Vec<Method> {
    if k == 1 {
        vec![
            Method::Exact,
            Method::Verifier,
            Method::Qp(1),
            Method::Qp(10),
            Method::QpGreedy,
            Method::Naive(1),
            Method::Naive(10),
            Method::Mean,
        ]
    } else {
        vec![Method::Verifier, Method::QpGreedy, Method::Naive(1), Method::Naive(10), Method::Mean]
    }
}

/// Lower bounds must not exceed exact values, which must not exceed upper
/// bounds, and truncating the QP search harder can only hurt.
fn check_ordering(per_method: &[(Method, Vec<QueryRecord>)]) -> Result<()> {
    let slack = |v: f64| 1e-6 * (1.0 + v.abs());
    let count = per_method.first().map_or(0, |(_, r)| r.len());
    for q in 0..count {
        let eps = |m: Method| per_method.iter().find(|(x, _)| *x == m).and_then(|(_, r)| r[q].epsilon);
        let rank = |m: Method| match m.kind() {
            CertificateKind::LowerBound => 0,
            CertificateKind::Exact => 1,
            CertificateKind::UpperBound => 2,
        };
        for (a, ra) in per_method {
            for (b, rb) in per_method {
                let (Some(x), Some(y)) = (ra[q].epsilon, rb[q].epsilon) else {
                    continue;
                };
                if rank(*a) < rank(*b) && x > y + slack(y) {
                    return Err(Error::CertificationViolation(format!(
                        "query {}: {} = {x} exceeds {} = {y}",
                        ra[q].query_index,
                        a.label(),
                        b.label()
                    )));
                }
            }
        }
        if let (Some(ten), Some(one)) = (eps(Method::Qp(10)), eps(Method::Qp(1))) {
            if ten > one + slack(one) {
                return Err(Error::CertificationViolation(format!(
                    "query {}: QP-10 = {ten} exceeds QP-1 = {one}",
                    per_method[0].1[q].query_index
                )));
            }
        }
    }
    Ok(())
}

fn profile(
    pool: &rayon::ThreadPool,
    ds: &Dataset,
    queries: &[Query],
    picked: &[usize],
    search: &SearchConfig,
    timing: bool,
) -> Result<SearchProfile> {
    let (records, wall) = run_method(pool, ds, queries, picked, Method::Exact, 1, search)?;
    let n = records.len().max(1) as f64;
    let mean = |f: &dyn Fn(&QueryRecord) -> usize| round_sig(records.iter().map(|r| f(r) as f64).sum::<f64>() / n);
    Ok(SearchProfile {
        n_scr: search.n_scr,
        sorted: search.sort_candidates,
        mean_subproblems_solved: mean(&|r| r.stats.subproblems_solved),
        mean_subproblems_screened: mean(&|r| r.stats.subproblems_screened),
        mean_subproblems_pruned: mean(&|r| r.stats.subproblems_pruned),
        runtime: if timing { round_sig(wall) } else { 0.0 },
    })
}

/// Runs every applicable method on the same sampled queries.
pub fn run_bench(cfg: &RunConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let (ds, queries) = load_inputs(cfg)?;
    let picked = select_queries(&ds, &queries, cfg.k, Some(cfg.sample.unwrap_or(100)), cfg.seed)?;
    if picked.is_empty() {
        return Err(Error::Config("no correctly classified queries to benchmark".into()));
    }
    let pool = pool(cfg.workers)?;
    let search = cfg.search_config();
    let timing = !cfg.no_timing;

    let mut per_method = Vec::new();
    let mut rows = Vec::new();
    for method in bench_methods(cfg.k) {
        let mut total = 0.0;
        let mut first = None;
        for _ in 0..cfg.repeats {
            let (records, wall) = run_method(&pool, &ds, &queries, &picked, method, cfg.k, &search)?;
            total += wall;
            first.get_or_insert(records);
        }
        let records = first.expect("at least one repeat");
        let agg = Aggregates::from_records(&records, 0.0);
        rows.push(BenchRow {
            method: method.label(),
            kind: method.kind(),
            mean_epsilon: agg.mean_epsilon,
            failures: agg.attack_failures,
            runtime: if timing { round_sig(total / cfg.repeats as f64) } else { 0.0 },
            mean_subproblems_solved: agg.mean_subproblems_solved,
            mean_subproblems_screened: agg.mean_subproblems_screened,
        });
        per_method.push((method, records));
    }
    check_ordering(&per_method)?;

    let mut n_scr_sweep = Vec::new();
    let mut sort_ablation = Vec::new();
    if cfg.k == 1 {
        for &n_scr in &cfg.sweep_n_scr {
            let s = SearchConfig { n_scr, ..search.clone() };
            n_scr_sweep.push(profile(&pool, &ds, &queries, &picked, &s, timing)?);
        }
        if cfg.sort_ablation {
            for sorted in [true, false] {
                let s = SearchConfig {
                    sort_candidates: sorted,
                    ..search.clone()
                };
                sort_ablation.push(profile(&pool, &ds, &queries, &picked, &s, timing)?);
            }
        }
    }
    Ok(BenchReport {
        schema_version: SCHEMA_VERSION,
        k: cfg.k,
        seed: cfg.seed,
        query_indices: picked,
        rows,
        n_scr_sweep,
        sort_ablation,
    })
}

/// Runs a validated configuration and writes its outputs.
pub fn run(cfg: &RunConfig) -> Result<()> {
    if cfg.command == Command::Bench {
        let report = run_bench(cfg)?;
        let table = report.to_table();
        if cfg.output_path.is_some() {
            print!("{table}");
        } else {
            eprint!("{table}");
        }
        if let Some(path) = &cfg.table_csv {
            write_output(Some(path), &report.to_csv())?;
            if !report.n_scr_sweep.is_empty() || !report.sort_ablation.is_empty() {
                let sweep = path.with_extension("sweep.csv");
                write_output(Some(&sweep), &report.sweep_csv())?;
            }
        }
        write_output(cfg.output_path.as_deref(), &to_json(&report))
    } else {
        let report = run_report(cfg)?;
        write_output(cfg.output_path.as_deref(), &to_json(&report))
    }
}
