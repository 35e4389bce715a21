//! Certified lower bounds and attack upper bounds for K-NN as K grows, on a
//! two-class problem.
//!
//!     cargo run --release --example knn_bounds

use knn_certify::data::generate_synthetic;
use knn_certify::{is_adversarial, Error, mean_attack, naive_attack, qp_greedy_knn, verify_knn, Query, SearchConfig, TieRule};

fn main() -> knn_certify::Result<()> {
    let train = generate_synthetic(200, 10, 2, 3.0, 11)?;
    let test = generate_synthetic(15, 10, 2, 3.0, 12)?;
    let cfg = SearchConfig::default();
    let tie = TieRule::default();

    println!("{:>3} {:>9} {:>10} {:>9} {:>9}   (means over correctly classified queries)", "K", "verifier", "qp-greedy", "naive-1", "mean");
    for k in [1, 3, 5, 7, 9] {
        let mut sums = [0.0; 4];
        let mut n = 0;
        let mut naive_failed = 0;
        for i in 0..test.len() {
            let q = Query::new(test.point(i).to_vec(), test.label(i));
            let lower = verify_knn(&train, &q, k)?;
            if lower.misclassified {
                continue;
            }
            let greedy = qp_greedy_knn(&train, &q, k, &cfg)?;
            // The cluster centroid need not flip the vote even when reached.
            let naive = match naive_attack(&train, &q, k, 1) {
                Ok(c) => c,
                Err(Error::NoFlip) => {
                    naive_failed += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let mean = mean_attack(&train, &q, k)?;
            for c in [&greedy, &naive, &mean] {
                let delta = c.delta.as_deref().expect("attacks carry a perturbation");
                assert!(is_adversarial(&train, &q, delta, k, &tie));
                assert!(lower.epsilon_lower <= c.epsilon + 1e-9);
            }
            for (s, v) in sums.iter_mut().zip([lower.epsilon_lower, greedy.epsilon, naive.epsilon, mean.epsilon]) {
                *s += v;
            }
            n += 1;
        }
        let [v, g, nv, m] = sums.map(|s| s / n.max(1) as f64);
        println!("{k:>3} {v:>9.4} {g:>10.4} {nv:>9.4} {m:>9.4}   n={n}, naive found nothing on {naive_failed}");
    }
    Ok(())
}
