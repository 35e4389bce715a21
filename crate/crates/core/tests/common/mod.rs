#![allow(dead_code)]

use knn_certify::data::k_nearest;
use knn_certify::linalg::norm;
use knn_certify::qp::active_set_oracle;
use knn_certify::subproblem::build_1nn_subproblem;
use knn_certify::{Dataset, Query};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fix_a() -> (Dataset, Query) {
    let ds = Dataset::from_rows(&[vec![-1.0], vec![3.0]], vec![1, 2]).unwrap();
    (ds, Query::new(vec![0.0], 1))
}

pub fn fix_b() -> (Dataset, Query) {
    let ds = Dataset::from_rows(&[vec![1.0, 1.0], vec![2.0, 0.0]], vec![1, 2]).unwrap();
    (ds, Query::new(vec![0.0, 0.0], 1))
}

pub fn fix_c() -> (Dataset, Query) {
    let ds = Dataset::from_rows(
        &[vec![-0.5], vec![-1.0], vec![2.0], vec![3.0], vec![4.0]],
        vec![1, 1, 2, 2, 2],
    )
    .unwrap();
    (ds, Query::new(vec![0.0], 1))
}

/// Small instance: distinct integer points in `[-5, 5]^d`, 2-3 classes, at
/// most 12 points, and a continuous query labelled by its nearest neighbor.
pub struct Instance {
    pub ds: Dataset,
    pub q: Query,
    pub seed: u64,
}

pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = rng.random_range(1..=3usize);
    let classes = rng.random_range(2..=3u32);
    // in one dimension the grid only has 11 distinct points
    let n = rng.random_range(2 * classes as usize..=12usize.min(if dim == 1 { 11 } else { 12 }));
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    while rows.len() < n {
        let p: Vec<f64> = (0..dim).map(|_| rng.random_range(-5..=5i32) as f64).collect();
        if !rows.contains(&p) {
            rows.push(p);
        }
    }
    let labels: Vec<u32> = (0..n)
        .map(|i| if i < classes as usize { i as u32 + 1 } else { rng.random_range(1..=classes) })
        .collect();
    let ds = Dataset::from_rows(&rows, labels).unwrap();
    let z: Vec<f64> = (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect();
    let nearest = k_nearest(&ds, &z, 1).unwrap()[0];
    let q = Query::new(z, ds.label(nearest));
    Instance { ds, q, seed }
}

pub fn instances(count: usize) -> Vec<Instance> {
    (0..count as u64).map(|s| random_instance(0x5eed_0000 + s)).collect()
}

/// Brute-force minimum over every other-class target, and the per-target
/// values (indexed like `ds.indices_without_label`).
pub fn oracle_minimum(ds: &Dataset, q: &Query) -> (f64, Vec<(usize, f64)>) {
    let per: Vec<(usize, f64)> = ds
        .indices_without_label(q.true_label)
        .into_iter()
        .map(|j| {
            let sp = build_1nn_subproblem(ds, q, j).unwrap();
            let (delta, _) = active_set_oracle(&sp).unwrap();
            (j, norm(&delta))
        })
        .collect();
    let min = per.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    (min, per)
}

/// Dense `kth-min_j kth-max_i C_ij`, written without any pruning.
pub fn dense_verifier(ds: &Dataset, q: &Query, k: usize) -> f64 {
    let order = k.div_ceil(2);
    let d2 = |p: &[f64]| p.iter().zip(&q.z).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let mut per_target: Vec<f64> = ds
        .indices_without_label(q.true_label)
        .into_iter()
        .map(|j| {
            let mut c: Vec<f64> = ds
                .indices_with_label(q.true_label)
                .into_iter()
                .map(|i| {
                    let sep: f64 = ds
                        .point(i)
                        .iter()
                        .zip(ds.point(j))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        .sqrt();
                    (d2(ds.point(j)) - d2(ds.point(i))).max(0.0) / (2.0 * sep)
                })
                .collect();
            c.sort_by(|a, b| b.total_cmp(a));
            c[order - 1]
        })
        .collect();
    per_target.sort_by(f64::total_cmp);
    per_target[order - 1]
}
