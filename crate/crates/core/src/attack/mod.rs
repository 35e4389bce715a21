//! Upper bounds on the minimum adversarial perturbation.
//!
//! [`exact_1nn`] runs the sorted, screened search over per-target QPs and
//! returns the exact minimum for 1-NN; [`qp_top_m`] truncates that search.
//! [`qp_greedy_knn`] handles K > 1, and [`naive_attack`] / [`mean_attack`] are
//! line-search baselines.

mod baseline;
mod exact;
mod greedy;

use serde::{Deserialize, Serialize};

pub use baseline::{mean_attack, naive_attack};
pub use exact::{exact_1nn, qp_top_m, screen_subproblem};
pub use greedy::{qp_greedy_knn, GREEDY_BUDGET};

use crate::data::{knn_predict, Dataset, Query, TieRule};
use crate::linalg::{dot, norm};
use crate::qp::SolverConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CertificateKind {
    Exact,
    UpperBound,
    LowerBound,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub subproblems_built: usize,
    pub subproblems_solved: usize,
    /// Targets discarded by the single-row dual bound against the incumbent.
    pub subproblems_screened: usize,
    /// Targets skipped by the sorted-order termination rule.
    pub subproblems_pruned: usize,
    /// Dual variables removed before solving.
    pub rows_screened: usize,
    pub solver_iterations: usize,
    pub wall_time: f64,
}

impl SearchStats {
    pub fn absorb(&mut self, other: &SearchStats) {
        self.subproblems_built += other.subproblems_built;
        self.subproblems_solved += other.subproblems_solved;
        self.subproblems_screened += other.subproblems_screened;
        self.subproblems_pruned += other.subproblems_pruned;
        self.rows_screened += other.rows_screened;
        self.solver_iterations += other.solver_iterations;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PerturbationCertificate {
    /// A perturbation that passes [`is_adversarial`].
    pub delta: Option<Vec<f64>>,
    /// For the QP and LP searches, the norm of the optimal boundary point.
    /// `delta` may have been nudged off that boundary toward the target, so
    /// its norm can be larger by a relative `1e-8` at most.
    pub epsilon: f64,
    pub kind: CertificateKind,
    pub method: String,
    pub stats: SearchStats,
    /// The query was not classified as its true label to begin with.
    pub misclassified: bool,
}

impl PerturbationCertificate {
    pub(crate) fn misclassified(dim: usize, kind: CertificateKind, method: &str) -> Self {
        let delta = (kind != CertificateKind::LowerBound).then(|| vec![0.0; dim]);
        Self {
            delta,
            epsilon: 0.0,
            kind,
            method: method.to_string(),
            stats: SearchStats::default(),
            misclassified: true,
        }
    }

    pub(crate) fn attack(delta: Vec<f64>, kind: CertificateKind, method: &str, stats: SearchStats) -> Self {
        Self::witness(delta, None, kind, method, stats)
    }

    /// `epsilon` defaults to the norm of `delta`; solvers pass the norm of the
    /// boundary point the witness was settled from.
    pub(crate) fn witness(
        delta: Vec<f64>,
        epsilon: Option<f64>,
        kind: CertificateKind,
        method: &str,
        stats: SearchStats,
    ) -> Self {
        Self {
            epsilon: epsilon.unwrap_or_else(|| norm(&delta)),
            delta: Some(delta),
            kind,
            method: method.to_string(),
            stats,
            misclassified: false,
        }
    }
}

/// Options for the per-target QP search.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub solver: SolverConfig,
    /// Same-class rows tried per target by the subproblem screening test.
    pub n_scr: usize,
    /// Visit targets by ascending distance to the query.
    pub sort_candidates: bool,
    /// Stop once no remaining sorted target can beat the incumbent.
    pub early_termination: bool,
    pub tie: TieRule,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            n_scr: 8,
            sort_candidates: true,
            early_termination: true,
            tie: TieRule::default(),
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> crate::Result<()> {
        self.solver.validate()?;
        if self.n_scr == 0 {
            return Err(crate::Error::Config("n_scr must be at least 1".into()));
        }
        TieRule::new(self.tie.inflation).map(|_| ())
    }
}

/// Whether `z + (1 + inflation) delta` is classified away from the true label.
pub fn is_adversarial(ds: &Dataset, q: &Query, delta: &[f64], k: usize, tie: &TieRule) -> bool {
    if delta.len() != q.z.len() {
        return false;
    }
    let scale = 1.0 + tie.inflation;
    let moved: Vec<f64> = q.z.iter().zip(delta).map(|(z, d)| z + scale * d).collect();
    knn_predict(ds, &moved, k, tie, Some(q.true_label)).is_ok_and(|l| l != q.true_label)
}

/// Whether the query is already classified away from its true label.
pub(crate) fn is_misclassified_query(ds: &Dataset, q: &Query, k: usize, tie: &TieRule) -> crate::Result<bool> {
    Ok(knn_predict(ds, &q.z, k, tie, Some(q.true_label))? != q.true_label)
}

/// Rescales `delta` so that every listed constraint row it violates, and
/// that it points into, becomes satisfied. Used to absorb round-off left by
/// the solver before a certificate is validated.
pub(crate) fn stretch_to_feasible(delta: &mut [f64], rows: &[(Vec<f64>, f64)]) {
    let mut factor = 1.0f64;
    for (a, b) in rows {
        let ad = dot(a, delta);
        if ad + b < 0.0 && ad > 0.0 {
            factor = factor.max(-b / ad);
        }
    }
    if factor > 1.0 {
        let f = factor * (1.0 + 1e-12);
        delta.iter_mut().for_each(|v| *v *= f);
    }
}

/// Returns a validated perturbation close to `delta`. A solution lying exactly
/// on a bisector counts as adversarial under the attacker-favorable tie rule,
/// but once inflated it can fall back to the query's side. Moving a small
/// fraction `eta` of the way from `z + delta` toward one of the `anchors`
/// (target points, which lie strictly inside the target region) fixes that.
pub(crate) fn settle(
    ds: &Dataset,
    q: &Query,
    delta: &[f64],
    anchors: &[usize],
    k: usize,
    tie: &TieRule,
) -> Option<Vec<f64>> {
    if is_adversarial(ds, q, delta, k, tie) {
        return Some(delta.to_vec());
    }
    (-14..=-8).find_map(|exp| {
        let eta = 10f64.powi(exp);
        anchors.iter().find_map(|&target| {
            let moved: Vec<f64> = delta
                .iter()
                .zip(ds.point(target).iter().zip(&q.z))
                .map(|(d, (xv, zv))| d + eta * (xv - zv - d))
                .collect();
            is_adversarial(ds, q, &moved, k, tie).then_some(moved)
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fix_a() -> (Dataset, Query) {
        let ds = Dataset::from_rows(&[vec![-1.0], vec![3.0]], vec![1, 2]).unwrap();
        (ds, Query::new(vec![0.0], 1))
    }

    #[test]
    fn adversarial_predicate() {
        let (ds, q) = fix_a();
        let tie = TieRule::default();
        assert!(is_adversarial(&ds, &q, &[1.0], 1, &tie));
        assert!(!is_adversarial(&ds, &q, &[0.5], 1, &tie));
        let ds = Dataset::from_rows(
            &[vec![-0.5], vec![-1.0], vec![2.0], vec![3.0], vec![4.0]],
            vec![1, 1, 2, 2, 2],
        )
        .unwrap();
        assert!(is_adversarial(&ds, &Query::new(vec![0.0], 1), &[1.0], 3, &tie));
        assert!(!is_adversarial(&ds, &Query::new(vec![0.0], 1), &[0.9], 3, &tie));
    }

    #[test]
    fn stretch() {
        let mut d = vec![0.999_999_999];
        stretch_to_feasible(&mut d, &[(vec![4.0], -4.0)]);
        assert!(4.0 * d[0] - 4.0 >= 0.0);
        let mut d = vec![2.0];
        stretch_to_feasible(&mut d, &[(vec![4.0], -4.0)]);
        assert_eq!(d, vec![2.0]);
    }
}
