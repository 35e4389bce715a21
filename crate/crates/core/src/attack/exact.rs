use std::time::Instant;

use super::{
    is_misclassified_query, settle, stretch_to_feasible, CertificateKind, PerturbationCertificate,
    SearchConfig, SearchStats,
};
use crate::data::{Dataset, Query};
use crate::error::{Error, Result};
use crate::linalg::{norm, sq_dist};
use crate::qp::{recover_primal, screen_variables, solve_dual_gca_from, SolveStatus};
use crate::subproblem::Subproblem;

/// Per-query quantities shared by all target subproblems.
pub(crate) struct QueryContext {
    pub d2: Vec<f64>,
    pub same: Vec<usize>,
    /// Other-class targets in visiting order.
    pub others: Vec<usize>,
    /// Same-class points used by the subproblem screening test.
    pub screen_rows: Vec<usize>,
    /// Distance from the query to its nearest same-class point.
    pub nearest_same: f64,
}

impl QueryContext {
    pub fn new(ds: &Dataset, q: &Query, n_scr: usize, sorted: bool) -> Result<Self> {
        ds.check_dim(&q.z)?;
        let d2 = ds.sq_dists_to(&q.z);
        let same = ds.indices_with_label(q.true_label);
        if same.is_empty() {
            return Err(Error::EmptyClass(q.true_label));
        }
        let by_dist = |a: &usize, b: &usize| d2[*a].total_cmp(&d2[*b]).then(a.cmp(b));
        let mut others = ds.indices_without_label(q.true_label);
        if sorted {
            others.sort_unstable_by(by_dist);
        }
        let mut screen_rows = same.clone();
        screen_rows.sort_unstable_by(by_dist);
        screen_rows.truncate(n_scr);
        let nearest_same = d2[screen_rows[0]].sqrt();
        Ok(Self {
            d2,
            same,
            others,
            screen_rows,
            nearest_same,
        })
    }

    /// Single-row dual test: some screening row certifies that target `j`
    /// needs a squared perturbation strictly above `incumbent_sq`.
    fn screens(&self, ds: &Dataset, j: usize, incumbent_sq: f64) -> bool {
        self.screen_rows.iter().any(|&i| {
            let sep_sq = sq_dist(ds.point(i), ds.point(j));
            if sep_sq == 0.0 {
                return false;
            }
            let neg_b = 0.5 * (self.d2[j] - self.d2[i]).max(0.0);
            incumbent_sq < neg_b * neg_b / sep_sq
        })
    }
}

/// Subproblem screening test: whether target `j` can be discarded given an
/// incumbent attack of squared norm `incumbent_sq`, testing the `n_scr`
/// same-class points nearest to the query.
pub fn screen_subproblem(ds: &Dataset, q: &Query, j: usize, incumbent_sq: f64, n_scr: usize) -> bool {
    match QueryContext::new(ds, q, n_scr.max(1), false) {
        Ok(ctx) => ctx.screens(ds, j, incumbent_sq),
        Err(_) => false,
    }
}

/// Solves the target-`j` QP unless it provably cannot beat `incumbent`.
///
/// Rows are screened with the bound `min(|x_j - z|, incumbent)`. The smaller
/// bound is only valid when the subproblem can improve the incumbent, so rows
/// it removes are re-admitted if the reduced solution violates them.
fn solve_target(
    ds: &Dataset,
    q: &Query,
    ctx: &QueryContext,
    j: usize,
    incumbent: f64,
    cfg: &SearchConfig,
    stats: &mut SearchStats,
) -> Result<Option<Vec<f64>>> {
    let pairs = ctx.same.iter().map(|&i| (i, j)).collect();
    let full = Subproblem::from_pairs(ds, &q.z, pairs, &ctx.d2, vec![j], Vec::new())?;
    stats.subproblems_built += 1;
    stats.subproblems_solved += 1;
    let m = full.m();

    let mut keep: Vec<usize> = if cfg.solver.screening_enabled {
        let bound = ctx.d2[j].sqrt().min(incumbent);
        let dropped = screen_variables(&full, bound);
        let mut it = dropped.iter().peekable();
        (0..m)
            .filter(|r| {
                if it.peek() == Some(&r) {
                    it.next();
                    false
                } else {
                    true
                }
            })
            .collect()
    } else {
        (0..m).collect()
    };
    stats.rows_screened += m - keep.len();
    if keep.is_empty() {
        // Every bisection already has z on the target side.
        return Ok(Some(vec![0.0; ds.dim()]));
    }

    let cutoff = incumbent.is_finite().then_some(0.5 * incumbent * incumbent);
    let slack = full.feasibility_slack();
    let mut warm: Option<Vec<f64>> = None;
    loop {
        let sp = full.restricted(&keep);
        let sol = solve_dual_gca_from(&sp, &cfg.solver, warm.as_deref(), cutoff)?;
        stats.solver_iterations += sol.iterations;
        match sol.status {
            SolveStatus::Cutoff => return Ok(None),
            SolveStatus::IterationCap => {
                let delta = recover_primal(&sp, &sol);
                return Err(Error::NotConverged {
                    violation: sp.max_violation(&delta),
                });
            }
            SolveStatus::Converged => {}
        }
        let delta = recover_primal(&sp, &sol);
        let res = full.residuals(&delta);
        let violated: Vec<usize> = (0..m).filter(|&r| res[r] < -slack).collect();
        if violated.is_empty() {
            return Ok(Some(delta));
        }
        if violated.iter().any(|r| keep.binary_search(r).is_ok()) {
            let worst = violated.iter().fold(0.0f64, |a, &r| a.max(-res[r]));
            return Err(Error::NotConverged { violation: worst });
        }
        if let Some(c) = cutoff {
            if sol.objective >= c {
                return Ok(None);
            }
        }
        let lam = sol.dense();
        let mut next: Vec<(usize, f64)> = keep.iter().copied().zip(lam).collect();
        next.extend(violated.iter().map(|&r| (r, 0.0)));
        next.sort_unstable_by_key(|&(r, _)| r);
        keep = next.iter().map(|&(r, _)| r).collect();
        warm = Some(next.into_iter().map(|(_, v)| v).collect());
    }
}

fn search(
    ds: &Dataset,
    q: &Query,
    cfg: &SearchConfig,
    limit: Option<usize>,
    method: &str,
) -> Result<PerturbationCertificate> {
    let started = Instant::now();
    cfg.validate()?;
    ds.check_dim(&q.z)?;
    if is_misclassified_query(ds, q, 1, &cfg.tie)? {
        return Ok(PerturbationCertificate::misclassified(ds.dim(), CertificateKind::Exact, method));
    }
    let sorted = cfg.sort_candidates || limit.is_some();
    let ctx = QueryContext::new(ds, q, cfg.n_scr, sorted)?;
    let total = ctx.others.len();
    let limit = limit.unwrap_or(total).min(total);

    let mut stats = SearchStats::default();
    let mut incumbent = f64::INFINITY;
    let mut best: Option<(usize, Vec<f64>)> = None;
    for (pos, &j) in ctx.others[..limit].iter().enumerate() {
        if incumbent.is_finite() {
            // (|z - x_j| - |z - x_i|) / 2 lower-bounds every pair bound for j.
            if sorted
                && cfg.early_termination
                && (ctx.d2[j].sqrt() - ctx.nearest_same) / 2.0 > incumbent
            {
                stats.subproblems_pruned += limit - pos;
                break;
            }
            if cfg.solver.screening_enabled && ctx.screens(ds, j, incumbent * incumbent) {
                stats.subproblems_screened += 1;
                continue;
            }
        }
        if let Some(delta) = solve_target(ds, q, &ctx, j, incumbent, cfg, &mut stats)? {
            let eps = norm(&delta);
            if eps < incumbent {
                incumbent = eps;
                best = Some((j, delta));
            }
        }
    }

    let (j, mut delta) = best.ok_or(Error::Config("no target subproblem was solved".into()))?;
    let rows: Vec<(Vec<f64>, f64)> = ctx
        .same
        .iter()
        .map(|&i| {
            let a: Vec<f64> = ds.point(j).iter().zip(ds.point(i)).map(|(x, y)| x - y).collect();
            (a, 0.5 * (ctx.d2[i] - ctx.d2[j]))
        })
        .collect();
    stretch_to_feasible(&mut delta, &rows);
    let eps = norm(&delta);
    let delta = settle(ds, q, &delta, &[j], 1, &cfg.tie).ok_or_else(|| {
        Error::CertificationViolation(format!(
            "{method}: perturbation toward point {j} (norm {}) does not change the prediction",
            norm(&delta)
        ))
    })?;
    let kind = if limit == total {
        CertificateKind::Exact
    } else {
        CertificateKind::UpperBound
    };
    stats.wall_time = started.elapsed().as_secs_f64();
    Ok(PerturbationCertificate::witness(delta, Some(eps), kind, method, stats))
}

/// Exact minimum 1-NN perturbation: per-target QPs visited by ascending
/// distance, discarded by the dual screening tests, solved by greedy
/// coordinate ascent; the best feasible perturbation wins.
pub fn exact_1nn(ds: &Dataset, q: &Query, cfg: &SearchConfig) -> Result<PerturbationCertificate> {
    search(ds, q, cfg, None, "exact")
}

/// Same search restricted to the `m` targets nearest to the query.
pub fn qp_top_m(ds: &Dataset, q: &Query, m: usize, cfg: &SearchConfig) -> Result<PerturbationCertificate> {
    if m == 0 {
        return Err(Error::Config("m must be at least 1".into()));
    }
    search(ds, q, cfg, Some(m), &format!("qp-{m}"))
}
