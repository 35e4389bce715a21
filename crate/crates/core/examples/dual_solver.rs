//! One target subproblem solved three ways: greedy coordinate ascent on the
//! dual, the same after variable screening, and exhaustive active-set
//! enumeration. Also shows how sparse the optimal multipliers are.
//!
//!     cargo run --release --example dual_solver

use std::time::Instant;

use knn_certify::data::generate_synthetic;
use knn_certify::linalg::norm;
use knn_certify::qp::{active_set_oracle, kkt_check, recover_primal, screen_variables, solve_dual_gca, SolverConfig};
use knn_certify::subproblem::build_1nn_subproblem;
use knn_certify::Query;

fn main() -> knn_certify::Result<()> {
    // Large problem: every same-class point contributes one dual variable.
    let train = generate_synthetic(2000, 30, 2, 3.0, 5)?;
    let q = Query::new(vec![0.5; 30], 1);
    let target = train.indices_with_label(2)[0];
    let sp = build_1nn_subproblem(&train, &q, target)?;

    let started = Instant::now();
    let sol = solve_dual_gca(&sp, &SolverConfig::default())?;
    let plain = started.elapsed();
    let delta = recover_primal(&sp, &sol);
    let kkt = kkt_check(&sp, &sol, 1e-6);
    println!(
        "m={} rows: eps={:.6} in {} iterations ({:?}), nonzero multipliers={}, KKT pass={}",
        sp.m(),
        norm(&delta),
        sol.iterations,
        plain,
        sol.nnz(),
        kkt.pass
    );

    let dropped = screen_variables(&sp, norm(train.point(target).iter().zip(&q.z).map(|(a, b)| a - b).collect::<Vec<_>>().as_slice()));
    println!("variable screening with the naive bound drops {} of {} rows", dropped.len(), sp.m());

    // Small problem: compare against exhaustive enumeration of active sets.
    let small = generate_synthetic(6, 3, 2, 1.0, 9)?;
    let q = Query::new(vec![0.1, -0.2, 0.3], 1);
    for target in small.indices_with_label(2) {
        let sp = build_1nn_subproblem(&small, &q, target)?;
        let mut cfg = SolverConfig::default();
        cfg.record_trace = true;
        let gca = solve_dual_gca(&sp, &cfg)?;
        let (oracle_delta, oracle) = active_set_oracle(&sp)?;
        assert!(gca.trace.windows(2).all(|w| w[1] >= w[0] - 1e-12), "dual ascent is monotone");
        println!(
            "target {target:>2}: gca objective {:.9}, oracle {:.9}, eps {:.6}",
            gca.objective,
            oracle.objective,
            norm(&oracle_delta)
        );
    }
    Ok(())
}
