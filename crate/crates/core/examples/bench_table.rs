//! The comparison table produced by `knn-certify bench`, driven from the
//! library: writes CSV inputs, runs every method on a seeded sample of
//! correctly classified queries, and adds the screening sweep and the
//! sorting ablation.
//!
//!     cargo run --release --example bench_table

use knn_certify::cli::{run_bench, Command, MethodArg, NormArg, RunConfig};
use knn_certify::data::{generate_synthetic, write_dataset, write_queries};
use knn_certify::Query;

fn main() -> knn_certify::Result<()> {
    let dir = std::env::temp_dir().join("knn-certify-bench-example");
    std::fs::create_dir_all(&dir).map_err(|source| knn_certify::Error::Io { path: dir.clone(), source })?;
    let train = generate_synthetic(500, 20, 10, 4.0, 21)?;
    let test = generate_synthetic(10, 20, 10, 4.0, 22)?;
    let queries: Vec<Query> = (0..test.len()).map(|i| Query::new(test.point(i).to_vec(), test.label(i))).collect();
    let (data_path, query_path) = (dir.join("train.csv"), dir.join("test.csv"));
    write_dataset(&data_path, &train)?;
    write_queries(&query_path, &queries)?;

    for k in [1, 3] {
        let cfg = RunConfig {
            command: Command::Bench,
            data_path: data_path.clone(),
            query_path: query_path.clone(),
            k,
            norm: NormArg::L2,
            method: MethodArg::Qp,
            m: 1,
            n_scr: 8,
            tolerance: 1e-8,
            workers: 4,
            seed: 0,
            output_path: None,
            emit_deltas: false,
            sample: Some(50),
            repeats: 1,
            no_timing: false,
            no_sort: false,
            sweep_n_scr: if k == 1 { vec![1, 2, 4, 8, 16, 32] } else { Vec::new() },
            sort_ablation: k == 1,
            table_csv: None,
        };
        let report = run_bench(&cfg)?;
        println!("{}", report.to_table());
    }
    Ok(())
}
