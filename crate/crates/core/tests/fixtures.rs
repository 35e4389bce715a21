mod common;

use common::{fix_a, fix_b, fix_c};
use knn_certify::{
    exact_1nn, exact_1nn_lp, is_adversarial, mean_attack, naive_attack, qp_greedy_knn, qp_top_m, verify_1nn,
    verify_knn, CertificateKind, Error, LpNorm, SearchConfig, TieRule,
};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn fix_a_all_methods_agree_at_one() {
    let (ds, q) = fix_a();
    let cfg = SearchConfig::default();
    let exact = exact_1nn(&ds, &q, &cfg).unwrap();
    assert!(close(exact.epsilon, 1.0, 1e-9), "{}", exact.epsilon);
    assert_eq!(exact.kind, CertificateKind::Exact);
    assert!(close(verify_1nn(&ds, &q).unwrap().epsilon_lower, 1.0, 1e-12));
    assert!(close(naive_attack(&ds, &q, 1, 1).unwrap().epsilon, 1.0, 1e-8));
    assert!(close(mean_attack(&ds, &q, 1).unwrap().epsilon, 1.0, 1e-8));
    assert!(close(qp_greedy_knn(&ds, &q, 1, &cfg).unwrap().epsilon, 1.0, 1e-9));
}

#[test]
fn fix_b_gap_between_exact_and_naive() {
    let (ds, q) = fix_b();
    let exact = exact_1nn(&ds, &q, &SearchConfig::default()).unwrap();
    assert!(close(exact.epsilon, 0.5f64.sqrt(), 1e-6));
    let delta = exact.delta.unwrap();
    assert!(close(delta[0], 0.5, 1e-6) && close(delta[1], -0.5, 1e-6), "{delta:?}");
    assert!(close(naive_attack(&ds, &q, 1, 1).unwrap().epsilon, 1.0, 1e-8));
    assert!(close(verify_1nn(&ds, &q).unwrap().epsilon_lower, 0.5f64.sqrt(), 1e-12));
}

#[test]
fn fix_b_other_norms() {
    let (ds, q) = fix_b();
    let linf = exact_1nn_lp(&ds, &q, LpNorm::Linf).unwrap();
    assert!(close(linf.epsilon, 0.5, 1e-6), "{}", linf.epsilon);
    let l1 = exact_1nn_lp(&ds, &q, LpNorm::L1).unwrap();
    assert!(close(l1.epsilon, 1.0, 1e-6), "{}", l1.epsilon);
    let tie = TieRule::default();
    assert!(is_adversarial(&ds, &q, linf.delta.as_ref().unwrap(), 1, &tie));
    assert!(is_adversarial(&ds, &q, l1.delta.as_ref().unwrap(), 1, &tie));
}

#[test]
fn fix_c_three_nn() {
    let (ds, q) = fix_c();
    let cfg = SearchConfig::default();
    let lower = verify_knn(&ds, &q, 3).unwrap();
    assert!(close(lower.epsilon_lower, 1.0, 1e-6));
    assert_eq!(lower.binding_pair, Some((1, 3)));
    let greedy = qp_greedy_knn(&ds, &q, 3, &cfg).unwrap();
    assert!(close(greedy.epsilon, 1.0, 1e-6), "{}", greedy.epsilon);
    assert!(close(naive_attack(&ds, &q, 3, 1).unwrap().epsilon, 1.0, 1e-8));
    assert!(is_adversarial(&ds, &q, &[1.0], 3, &TieRule::default()));
}

#[test]
fn fix_c_one_nn() {
    let (ds, q) = fix_c();
    let cfg = SearchConfig::default();
    assert!(close(exact_1nn(&ds, &q, &cfg).unwrap().epsilon, 0.75, 1e-9));
    assert!(close(verify_1nn(&ds, &q).unwrap().epsilon_lower, 0.75, 1e-12));
    assert!(close(mean_attack(&ds, &q, 1).unwrap().epsilon, 0.75, 1e-8));
    assert!(close(qp_top_m(&ds, &q, 1, &cfg).unwrap().epsilon, 0.75, 1e-9));
}

#[test]
fn adversarial_predicate_on_boundaries() {
    let (ds, q) = fix_a();
    let tie = TieRule::default();
    assert!(is_adversarial(&ds, &q, &[1.0], 1, &tie));
    assert!(!is_adversarial(&ds, &q, &[0.5], 1, &tie));
}

#[test]
fn too_few_points_for_k() {
    let (ds, q) = fix_c();
    assert!(matches!(
        verify_knn(&ds, &q, 5),
        Err(Error::InsufficientPoints { k: 3, same: 2, other: 3 })
    ));
}

#[test]
fn misclassified_query_is_zero_everywhere() {
    let (ds, _) = fix_a();
    let q = knn_certify::Query::new(vec![2.5], 1);
    let cfg = SearchConfig::default();
    let exact = exact_1nn(&ds, &q, &cfg).unwrap();
    assert!(exact.misclassified && exact.epsilon == 0.0);
    assert_eq!(verify_1nn(&ds, &q).unwrap().epsilon_lower, 0.0);
    assert_eq!(naive_attack(&ds, &q, 1, 1).unwrap().epsilon, 0.0);
}
