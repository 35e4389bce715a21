//! Exact minimum l2 perturbations for a 1-NN classifier on Gaussian blobs,
//! next to the certified lower bound and two cheap attacks.
//!
//!     cargo run --release --example exact_1nn -- [n_per_class] [dim] [queries]

use std::time::Instant;

use knn_certify::data::generate_synthetic;
use knn_certify::{exact_1nn, is_adversarial, naive_attack, qp_top_m, verify_1nn, Query, SearchConfig, TieRule};

fn main() -> knn_certify::Result<()> {
    let arg = |i: usize, default: usize| std::env::args().nth(i).and_then(|s| s.parse().ok()).unwrap_or(default);
    let (n_per_class, dim, count) = (arg(1, 300), arg(2, 20), arg(3, 10));
    let train = generate_synthetic(n_per_class, dim, 5, 4.0, 7)?;
    let test = generate_synthetic(count.div_ceil(5).max(1), dim, 5, 4.0, 8)?;
    let cfg = SearchConfig::default();

    println!("{} training points in {dim} dimensions", train.len());
    println!("{:>5} {:>10} {:>10} {:>10} {:>10} {:>8} {:>8}", "query", "verifier", "exact", "qp-1", "naive-1", "solved", "ms");
    for i in 0..count.min(test.len()) {
        let q = Query::new(test.point(i).to_vec(), test.label(i));
        let started = Instant::now();
        let exact = exact_1nn(&train, &q, &cfg)?;
        let ms = started.elapsed().as_secs_f64() * 1e3;
        if exact.misclassified {
            println!("{i:>5} misclassified");
            continue;
        }
        let lower = verify_1nn(&train, &q)?.epsilon_lower;
        let qp1 = qp_top_m(&train, &q, 1, &cfg)?.epsilon;
        let naive = naive_attack(&train, &q, 1, 1)?.epsilon;
        let delta = exact.delta.as_deref().expect("attack carries a perturbation");
        assert!(is_adversarial(&train, &q, delta, 1, &TieRule::default()));
        assert!(lower <= exact.epsilon + 1e-9 && exact.epsilon <= qp1 + 1e-9);
        println!(
            "{i:>5} {lower:>10.4} {:>10.4} {qp1:>10.4} {naive:>10.4} {:>8} {ms:>8.1}",
            exact.epsilon, exact.stats.subproblems_solved
        );
    }
    Ok(())
}
