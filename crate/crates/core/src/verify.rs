//! Certified lower bounds on the minimum adversarial perturbation.
//!
//! For a same-class point `i` and an other-class point `j`, `C_ij` is the
//! distance from the query to the bisector of `(x_i, x_j)`. A perturbation
//! that brings `x_j` ahead of `x_i` must be at least that long. With
//! `k = (K+1)/2`, a K-NN prediction can only change once `k` other-class
//! points each overtake all but `k-1` same-class points, which gives
//!
//! ```text
//! eps >= kth-min_j ( kth-max_i C_ij ).
//! ```
//!
//! All labels other than the query's are merged into a single negative class.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::is_misclassified_query;
use crate::data::{check_k, Dataset, Query, TieRule};
use crate::error::{Error, Result};
use crate::subproblem::pair_bound_from;

/// Targets bounded per parallel batch; the pruning threshold is refreshed
/// between batches.
const TARGET_CHUNK: usize = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationResult {
    pub epsilon_lower: f64,
    /// `(i, j)` attaining the bound; `None` for a misclassified query.
    pub binding_pair: Option<(usize, usize)>,
    /// Order statistic `(K+1)/2`.
    pub k_used: usize,
    pub misclassified: bool,
}

/// 1-NN lower bound `min_j max_i C_ij`.
pub fn verify_1nn(ds: &Dataset, q: &Query) -> Result<VerificationResult> {
    verify_knn(ds, q, 1)
}

/// K-NN lower bound `kth-min_j kth-max_i C_ij` with `k = (K+1)/2`.
pub fn verify_knn(ds: &Dataset, q: &Query, k: usize) -> Result<VerificationResult> {
    ds.check_dim(&q.z)?;
    check_k(k, ds.len())?;
    let order = k.div_ceil(2);
    let same = ds.indices_with_label(q.true_label);
    let others = ds.indices_without_label(q.true_label);
    if same.len() < order || others.len() < order {
        return Err(Error::InsufficientPoints {
            k: order,
            same: same.len(),
            other: others.len(),
        });
    }
    if is_misclassified_query(ds, q, k, &TieRule::default())? {
        return Ok(VerificationResult {
            epsilon_lower: 0.0,
            binding_pair: None,
            k_used: order,
            misclassified: true,
        });
    }

    let d2 = ds.sq_dists_to(&q.z);
    let by_dist = |a: &usize, b: &usize| d2[*a].total_cmp(&d2[*b]).then(a.cmp(b));
    let mut same = same;
    same.sort_unstable_by(by_dist);
    let mut others = others;
    others.sort_unstable_by(by_dist);
    // Since C_ij >= (d_j - d_i) / 2, target j's order statistic is at least
    // (d_j - d_(k)) / 2 with d_(k) the k-th nearest same-class distance.
    let same_kth = d2[same[order - 1]].sqrt();
    let floor = |j: usize| 0.5 * (d2[j].sqrt() - same_kth) - 1e-12 * (1.0 + d2[j].sqrt());

    // The `order` smallest (D_j, i, j) seen so far, ascending by (D_j, j).
    let mut best: Vec<(f64, usize, usize)> = Vec::with_capacity(order + TARGET_CHUNK);
    for chunk in others.chunks(TARGET_CHUNK) {
        let cut = if best.len() == order { best[order - 1].0 } else { f64::INFINITY };
        if floor(chunk[0]) > cut {
            break;
        }
        let found: Vec<Option<(f64, usize, usize)>> = chunk
            .par_iter()
            .map(|&j| {
                if floor(j) > cut {
                    return Ok(None);
                }
                let mut c = Vec::with_capacity(same.len());
                let mut above = 0;
                for &i in &same {
                    let v = pair_bound_from(ds, &d2, i, j)?;
                    if v > cut {
                        above += 1;
                        if above >= order {
                            return Ok(None);
                        }
                    }
                    c.push((v, i));
                }
                let (_, &mut (v, i), _) =
                    c.select_nth_unstable_by(order - 1, |a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                Ok(Some((v, i, j)))
            })
            .collect::<Result<_>>()?;
        best.extend(found.into_iter().flatten());
        best.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.2.cmp(&b.2)));
        best.truncate(order);
    }
    let (eps, i, j) = best[order - 1];
    Ok(VerificationResult {
        epsilon_lower: eps,
        binding_pair: Some((i, j)),
        k_used: order,
        misclassified: false,
    })
}
