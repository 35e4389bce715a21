use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};
use std::time::Instant;

use super::{
    is_misclassified_query, settle, stretch_to_feasible, CertificateKind, PerturbationCertificate,
    SearchConfig, SearchStats,
};
use crate::data::{Dataset, Label, Query};
use crate::error::{Error, Result};
use crate::linalg::{dist, norm};
use crate::qp::{recover_primal, solve_dual_gca_from, DualSolution, SolveStatus};
use crate::subproblem::{build_knn_subproblem, Subproblem};

/// Number of candidate target sets tried before giving up.
pub const GREEDY_BUDGET: usize = 50;

/// Lazily enumerates same-label target sets of a fixed size in ascending
/// order of summed distance to the query.
struct TargetSets {
    /// Per label: member indices sorted by distance, with distances.
    pools: Vec<Vec<(usize, f64)>>,
    /// Keyed by the bit pattern of the (nonnegative) summed distance, which
    /// orders the same way as the value.
    heap: BinaryHeap<Reverse<(u64, usize, Vec<usize>)>>,
    seen: HashSet<(usize, Vec<usize>)>,
}

impl TargetSets {
    fn new(ds: &Dataset, z: &[f64], true_label: Label, size: usize) -> Self {
        let mut pools = Vec::new();
        for label in ds.present_labels() {
            if label == true_label {
                continue;
            }
            let mut pool: Vec<(usize, f64)> = ds
                .indices_with_label(label)
                .into_iter()
                .map(|j| (j, dist(ds.point(j), z)))
                .collect();
            if pool.len() < size {
                continue;
            }
            pool.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            pools.push(pool);
        }
        let mut sets = Self {
            pools,
            heap: BinaryHeap::new(),
            seen: HashSet::new(),
        };
        for p in 0..sets.pools.len() {
            sets.push(p, (0..size).collect());
        }
        sets
    }

    fn push(&mut self, pool: usize, pos: Vec<usize>) {
        if self.seen.insert((pool, pos.clone())) {
            let cost: f64 = pos.iter().map(|&k| self.pools[pool][k].1).sum();
            self.heap.push(Reverse((cost.to_bits(), pool, pos)));
        }
    }
}

impl Iterator for TargetSets {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let Reverse((_, pool, pos)) = self.heap.pop()?;
        let len = self.pools[pool].len();
        for t in 0..pos.len() {
            let bumped = pos[t] + 1;
            let blocked = if t + 1 < pos.len() { bumped >= pos[t + 1] } else { bumped >= len };
            if !blocked {
                let mut nxt = pos.clone();
                nxt[t] = bumped;
                self.push(pool, nxt);
            }
        }
        Some(pos.iter().map(|&k| self.pools[pool][k].0).collect())
    }
}

/// Solves one K-NN subproblem; `None` when it looks infeasible (dual
/// objective beyond `cutoff`) or the iteration cap is hit.
fn solve_set(
    sp: &Subproblem,
    cfg: &SearchConfig,
    cutoff: f64,
    stats: &mut SearchStats,
) -> Result<Option<(Vec<f64>, DualSolution)>> {
    stats.subproblems_built += 1;
    stats.subproblems_solved += 1;
    let sol = solve_dual_gca_from(sp, &cfg.solver, None, Some(cutoff))?;
    stats.solver_iterations += sol.iterations;
    if sol.status != SolveStatus::Converged {
        return Ok(None);
    }
    let mut delta = recover_primal(sp, &sol);
    if sp.max_violation(&delta) > sp.feasibility_slack() {
        return Ok(None);
    }
    let rows: Vec<(Vec<f64>, f64)> = (0..sp.m()).map(|r| (sp.row(r).to_vec(), sp.offset(r))).collect();
    stretch_to_feasible(&mut delta, &rows);
    Ok(Some((delta, sol)))
}

/// Greedy K-NN attack: find the nearest feasible set of `(K+1)/2` same-label
/// targets, then drop the constraints of up to `(K-1)/2` same-class points
/// that carry nonzero multipliers and solve again.
///
/// Target sets are tried in ascending order of summed distance to the query,
/// at most [`GREEDY_BUDGET`] of them. A subproblem is treated as infeasible
/// once its dual objective certifies a perturbation longer than three times
/// the distance from the query to the farthest dataset point.
pub fn qp_greedy_knn(ds: &Dataset, q: &Query, k: usize, cfg: &SearchConfig) -> Result<PerturbationCertificate> {
    let started = Instant::now();
    cfg.validate()?;
    ds.check_dim(&q.z)?;
    let method = "qp-greedy";
    if is_misclassified_query(ds, q, k, &cfg.tie)? {
        return Ok(PerturbationCertificate::misclassified(ds.dim(), CertificateKind::UpperBound, method));
    }
    let want = k.div_ceil(2);
    let relax = (k - 1) / 2;
    let reach = (0..ds.len()).map(|i| dist(ds.point(i), &q.z)).fold(0.0, f64::max);
    let cutoff = 0.5 * (3.0 * reach).powi(2);
    let same_count = ds.indices_with_label(q.true_label).len();

    let mut stats = SearchStats::default();
    let mut phase1 = None;
    for s_minus in TargetSets::new(ds, &q.z, q.true_label, want).take(GREEDY_BUDGET) {
        let sp = build_knn_subproblem(ds, q, &s_minus, &[])?;
        if let Some((delta, sol)) = solve_set(&sp, cfg, cutoff, &mut stats)? {
            if let Some(witness) = settle(ds, q, &delta, &s_minus, k, &cfg.tie) {
                phase1 = Some((s_minus, sp, (norm(&delta), witness), sol));
                break;
            }
        }
    }
    let (s_minus, sp, mut best, sol) = phase1.ok_or(Error::NoFeasibleTarget {
        budget: GREEDY_BUDGET,
    })?;

    // Same-class points ranked by the multiplier mass on their rows.
    let mut mass: Vec<(usize, f64)> = Vec::new();
    for &(r, v) in &sol.lambda {
        let i = sp.pairs()[r].0;
        match mass.iter_mut().find(|(p, _)| *p == i) {
            Some(e) => e.1 += v,
            None => mass.push((i, v)),
        }
    }
    mass.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let s_plus: Vec<usize> = mass.iter().take(relax).map(|&(i, _)| i).collect();
    if !s_plus.is_empty() && s_plus.len() < same_count {
        let relaxed = build_knn_subproblem(ds, q, &s_minus, &s_plus)?;
        if let Some((delta, _)) = solve_set(&relaxed, cfg, cutoff, &mut stats)? {
            if norm(&delta) <= best.0 {
                if let Some(witness) = settle(ds, q, &delta, &s_minus, k, &cfg.tie) {
                    best = (norm(&delta), witness);
                }
            }
        }
    }
    stats.wall_time = started.elapsed().as_secs_f64();
    Ok(PerturbationCertificate::witness(best.1, Some(best.0), CertificateKind::UpperBound, method, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fix_c() -> (Dataset, Query) {
        let ds = Dataset::from_rows(
            &[vec![-0.5], vec![-1.0], vec![2.0], vec![3.0], vec![4.0]],
            vec![1, 1, 2, 2, 2],
        )
        .unwrap();
        (ds, Query::new(vec![0.0], 1))
    }

    #[test]
    fn target_sets_ascending() {
        let (ds, q) = fix_c();
        let sets: Vec<Vec<usize>> = TargetSets::new(&ds, &q.z, 1, 2).collect();
        assert_eq!(sets, vec![vec![2, 3], vec![2, 4], vec![3, 4]]);
    }

    #[test]
    fn fix_c_k3() {
        let (ds, q) = fix_c();
        let c = qp_greedy_knn(&ds, &q, 3, &SearchConfig::default()).unwrap();
        // phase 1 needs 1.25 (row (p1, q2)); relaxing p1 leaves 1.0
        assert!((c.epsilon - 1.0).abs() < 1e-9, "{}", c.epsilon);
        assert_eq!(c.kind, CertificateKind::UpperBound);
        assert!(c.stats.subproblems_solved >= 2);
    }

    #[test]
    fn k1_matches_nearest_target() {
        let (ds, q) = fix_c();
        let c = qp_greedy_knn(&ds, &q, 1, &SearchConfig::default()).unwrap();
        assert!((c.epsilon - 0.75).abs() < 1e-9);
    }
}
