use std::time::Instant;

use super::{is_adversarial, is_misclassified_query, CertificateKind, PerturbationCertificate, SearchStats};
use crate::data::{check_k, class_mean, Dataset, Query, TieRule};
use crate::error::{Error, Result};
use crate::linalg::sq_dist;

/// Absolute resolution of the line searches, in units of the step parameter.
const LINE_TOL: f64 = 1e-9;
/// The mean attack gives up beyond this multiple of the query-to-mean distance.
const MEAN_RAY_CAP: f64 = 1024.0;

fn scaled(dir: &[f64], t: f64) -> Vec<f64> {
    dir.iter().map(|v| t * v).collect()
}

/// Smallest `t` in `(lo, hi]` (to [`LINE_TOL`]) at which `z + t dir` flips,
/// given that it flips at `hi` and not at `lo`.
fn bisect(ds: &Dataset, q: &Query, dir: &[f64], k: usize, tie: &TieRule, mut lo: f64, mut hi: f64) -> f64 {
    while hi - lo > LINE_TOL {
        let mid = 0.5 * (lo + hi);
        if is_adversarial(ds, q, &scaled(dir, mid), k, tie) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Line-search baseline toward the `tries` nearest other-class points (K=1)
/// or toward centroids of `(K+1)/2`-point other-class clusters seeded at the
/// `tries` nearest other-class points (K>1). Returns the best flip found.
pub fn naive_attack(ds: &Dataset, q: &Query, k: usize, tries: usize) -> Result<PerturbationCertificate> {
    let started = Instant::now();
    ds.check_dim(&q.z)?;
    check_k(k, ds.len())?;
    if tries == 0 {
        return Err(Error::Config("tries must be at least 1".into()));
    }
    let method = format!("naive-{tries}");
    let tie = TieRule::default();
    if is_misclassified_query(ds, q, k, &tie)? {
        return Ok(PerturbationCertificate::misclassified(ds.dim(), CertificateKind::UpperBound, &method));
    }
    let d2 = ds.sq_dists_to(&q.z);
    let mut others = ds.indices_without_label(q.true_label);
    others.sort_unstable_by(|a, b| d2[*a].total_cmp(&d2[*b]).then(a.cmp(b)));
    let size = k.div_ceil(2);

    let mut stats = SearchStats::default();
    let mut best: Option<Vec<f64>> = None;
    let mut best_sq = f64::INFINITY;
    for &seed in others.iter().take(tries) {
        let target = if size == 1 {
            ds.point(seed).to_vec()
        } else {
            let seed_pt = ds.point(seed);
            let mut mates = ds.indices_with_label(ds.label(seed));
            mates.retain(|&i| i != seed);
            let sd: Vec<(usize, f64)> = mates.iter().map(|&i| (i, sq_dist(ds.point(i), seed_pt))).collect();
            let mut sd = sd;
            sd.sort_unstable_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            let mut centroid = seed_pt.to_vec();
            for &(i, _) in sd.iter().take(size - 1) {
                centroid.iter_mut().zip(ds.point(i)).for_each(|(c, x)| *c += x);
            }
            let count = 1 + sd.len().min(size - 1);
            centroid.iter_mut().for_each(|c| *c /= count as f64);
            centroid
        };
        let dir: Vec<f64> = target.iter().zip(&q.z).map(|(t, z)| t - z).collect();
        stats.subproblems_built += 1;
        if !is_adversarial(ds, q, &dir, k, &tie) {
            continue;
        }
        let t = bisect(ds, q, &dir, k, &tie, 0.0, 1.0);
        let delta = scaled(&dir, t);
        let nsq: f64 = delta.iter().map(|v| v * v).sum();
        if nsq < best_sq {
            best_sq = nsq;
            best = Some(delta);
        }
    }
    let delta = best.ok_or(Error::NoFlip)?;
    stats.wall_time = started.elapsed().as_secs_f64();
    Ok(PerturbationCertificate::attack(delta, CertificateKind::UpperBound, &method, stats))
}

/// Line-search baseline along the ray from the query through the nearest
/// other-class mean, extended past the mean when needed.
pub fn mean_attack(ds: &Dataset, q: &Query, k: usize) -> Result<PerturbationCertificate> {
    let started = Instant::now();
    ds.check_dim(&q.z)?;
    check_k(k, ds.len())?;
    let method = "mean";
    let tie = TieRule::default();
    if is_misclassified_query(ds, q, k, &tie)? {
        return Ok(PerturbationCertificate::misclassified(ds.dim(), CertificateKind::UpperBound, method));
    }
    let target = ds
        .present_labels()
        .into_iter()
        .filter(|&label| label != q.true_label)
        .filter_map(|label| class_mean(ds, label))
        .min_by(|a, b| sq_dist(a, &q.z).total_cmp(&sq_dist(b, &q.z)))
        .ok_or(Error::NoFlip)?;
    let dir: Vec<f64> = target.iter().zip(&q.z).map(|(t, z)| t - z).collect();
    if dir.iter().all(|&v| v == 0.0) {
        return Err(Error::NoFlip);
    }

    let mut lo = 0.0;
    let mut hi = 1.0;
    while !is_adversarial(ds, q, &scaled(&dir, hi), k, &tie) {
        lo = hi;
        hi *= 2.0;
        if hi > MEAN_RAY_CAP {
            return Err(Error::NoFlip);
        }
    }
    let t = bisect(ds, q, &dir, k, &tie, lo, hi);
    let stats = SearchStats {
        subproblems_built: 1,
        wall_time: started.elapsed().as_secs_f64(),
        ..SearchStats::default()
    };
    Ok(PerturbationCertificate::attack(scaled(&dir, t), CertificateKind::UpperBound, method, stats))
}
