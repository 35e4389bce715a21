//! Minimum perturbations of the same 1-NN prediction under the l-infinity,
//! l2 and l1 norms. Since |v|inf <= |v|2 <= |v|1, the minima come out in the
//! same order.
//!
//!     cargo run --release --example lp_norms

use knn_certify::data::generate_synthetic;
use knn_certify::linalg::{norm, norm_inf, norm_l1};
use knn_certify::{exact_1nn, exact_1nn_lp, LpNorm, Query, SearchConfig};

fn main() -> knn_certify::Result<()> {
    let train = generate_synthetic(40, 4, 3, 3.0, 3)?;
    let test = generate_synthetic(3, 4, 3, 3.0, 4)?;
    println!("{:>5} {:>9} {:>9} {:>9}", "query", "linf", "l2", "l1");
    for i in 0..test.len() {
        let q = Query::new(test.point(i).to_vec(), test.label(i));
        let l2 = exact_1nn(&train, &q, &SearchConfig::default())?;
        if l2.misclassified {
            continue;
        }
        let linf = exact_1nn_lp(&train, &q, LpNorm::Linf)?;
        let l1 = exact_1nn_lp(&train, &q, LpNorm::L1)?;
        assert!(linf.epsilon <= l2.epsilon + 1e-7 && l2.epsilon <= l1.epsilon + 1e-7);
        // each certificate carries a witness nudged just past the optimal boundary
        let d = |c: &knn_certify::PerturbationCertificate| c.delta.clone().unwrap_or_default();
        let near = |w: f64, e: f64| (w - e).abs() <= 1e-7 * (1.0 + e);
        assert!(near(norm_inf(&d(&linf)), linf.epsilon));
        assert!(near(norm(&d(&l2)), l2.epsilon));
        assert!(near(norm_l1(&d(&l1)), l1.epsilon));
        println!("{i:>5} {:>9.4} {:>9.4} {:>9.4}", linf.epsilon, l2.epsilon, l1.epsilon);
    }
    Ok(())
}
