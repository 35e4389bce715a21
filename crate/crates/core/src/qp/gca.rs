use std::collections::HashMap;

use super::{DualSolution, Selection, SolveStatus, SolverConfig};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, solve_dense};
use crate::subproblem::Subproblem;

const REFRESH_EVERY: usize = 1000;
/// Upper bound on cached Gram-column entries (floats).
const CACHE_BUDGET: usize = 1 << 23;

/// Greedy coordinate ascent on the dual, starting from `lambda = 0`.
pub fn solve_dual_gca(sp: &Subproblem, cfg: &SolverConfig) -> Result<DualSolution> {
    solve_dual_gca_from(sp, cfg, None, None)
}

/// `D(lambda) = -1/2 |A^T lambda|^2 - lambda^T b`, evaluated from scratch.
pub(crate) fn dual_objective(sp: &Subproblem, sol: &DualSolution) -> f64 {
    let delta = super::recover_primal(sp, sol);
    let lb: f64 = sol.lambda.iter().map(|&(r, v)| v * sp.offset(r)).sum();
    -0.5 * dot(&delta, &delta) - lb
}

struct State<'a> {
    sp: &'a Subproblem,
    lambda: Vec<f64>,
    grad: Vec<f64>,
    delta: Vec<f64>,
    lb: f64,
    cache: HashMap<usize, Vec<f64>>,
    cache_cap: usize,
}

impl<'a> State<'a> {
    fn new(sp: &'a Subproblem, warm: Option<&[f64]>) -> Self {
        let m = sp.m();
        let lambda = match warm {
            Some(w) => w.iter().map(|v| v.max(0.0)).collect(),
            None => vec![0.0; m],
        };
        let mut st = Self {
            sp,
            lambda,
            grad: vec![0.0; m],
            delta: vec![0.0; sp.dim()],
            lb: 0.0,
            cache: HashMap::new(),
            cache_cap: (CACHE_BUDGET / m.max(1)).max(16),
        };
        st.refresh();
        st
    }

    /// Recomputes `delta`, `lambda^T b` and `g = -A delta - b` from `lambda`.
    fn refresh(&mut self) {
        let sp = self.sp;
        self.delta.iter_mut().for_each(|v| *v = 0.0);
        self.lb = 0.0;
        for (r, &v) in self.lambda.iter().enumerate() {
            if v > 0.0 {
                axpy(v, sp.row(r), &mut self.delta);
                self.lb += v * sp.offset(r);
            }
        }
        for r in 0..sp.m() {
            self.grad[r] = -dot(sp.row(r), &self.delta) - sp.offset(r);
        }
    }

    fn objective(&self) -> f64 {
        -0.5 * dot(&self.delta, &self.delta) - self.lb
    }

    /// Returns the chosen row and the sup-norm of the projected gradient.
    fn select(&self, rule: Selection) -> (usize, f64) {
        let mut best = (0, -1.0);
        let mut pg_max = 0.0f64;
        for (r, (&l, &g)) in self.lambda.iter().zip(&self.grad).enumerate() {
            let pg = ((l + g).max(0.0) - l).abs();
            pg_max = pg_max.max(pg);
            let score = match rule {
                Selection::ProjectedGradient => pg,
                Selection::ScaledStep => {
                    let nsq = self.sp.row_norm_sq(r);
                    ((l + g / nsq).max(0.0) - l).abs() * nsq.sqrt()
                }
            };
            if score > best.1 {
                best = (r, score);
            }
        }
        (best.0, pg_max)
    }

    fn step(&mut self, r: usize) -> f64 {
        let sp = self.sp;
        let old = self.lambda[r];
        let new = (old + self.grad[r] / sp.row_norm_sq(r)).max(0.0);
        let change = new - old;
        if change == 0.0 {
            return 0.0;
        }
        // Gram column A a_r, cached while the budget allows.
        if !self.cache.contains_key(&r) {
            let col: Vec<f64> = (0..sp.m()).map(|k| dot(sp.row(k), sp.row(r))).collect();
            if self.cache.len() >= self.cache_cap {
                axpy(-change, &col, &mut self.grad);
                return self.finish_step(r, new, change);
            }
            self.cache.insert(r, col);
        }
        axpy(-change, &self.cache[&r], &mut self.grad);
        self.finish_step(r, new, change)
    }

    fn finish_step(&mut self, r: usize, new: f64, change: f64) -> f64 {
        axpy(change, self.sp.row(r), &mut self.delta);
        self.lb += change * self.sp.offset(r);
        self.lambda[r] = new;
        change
    }

    fn sup_projected_gradient(&self) -> f64 {
        self.lambda
            .iter()
            .zip(&self.grad)
            .fold(0.0f64, |m, (&l, &g)| m.max(((l + g).max(0.0) - l).abs()))
    }

    /// Attempts to jump to the exact optimum supported on the current nonzero
    /// multipliers by solving the reduced equality system, dropping rows whose
    /// multiplier comes out non-positive and solving again. Accepted only if
    /// the result is a KKT point at `tol` and does not lower the objective.
    fn polish(&mut self, tol: f64) -> bool {
        let sp = self.sp;
        let mut support: Vec<usize> = (0..sp.m()).filter(|&r| self.lambda[r] > 0.0).collect();
        if support.is_empty() {
            return false;
        }
        if support.len() > sp.dim() {
            // keep the heaviest rows; a larger support is linearly dependent
            support.sort_unstable_by(|&x, &y| self.lambda[y].total_cmp(&self.lambda[x]).then(x.cmp(&y)));
            support.truncate(sp.dim());
            support.sort_unstable();
        }
        let mu = loop {
            let Some(mu) = reduced_solve(sp, &support) else {
                return false;
            };
            if mu.iter().any(|v| !v.is_finite()) {
                return false;
            }
            let keep: Vec<usize> = support.iter().zip(&mu).filter(|(_, &v)| v > 0.0).map(|(&r, _)| r).collect();
            if keep.len() == support.len() {
                break mu;
            }
            if keep.is_empty() {
                return false;
            }
            support = keep;
        };
        let before = self.objective();
        let saved = std::mem::replace(&mut self.lambda, vec![0.0; sp.m()]);
        for (&r, &v) in support.iter().zip(&mu) {
            self.lambda[r] = v;
        }
        self.refresh();
        let after = self.objective();
        if after + 1e-12 * before.abs().max(1.0) >= before && self.sup_projected_gradient() <= tol {
            true
        } else {
            self.lambda = saved;
            self.refresh();
            false
        }
    }
}

/// Multipliers making every row of `support` tight: `(A_S A_S^T) mu = -b_S`.
fn reduced_solve(sp: &Subproblem, support: &[usize]) -> Option<Vec<f64>> {
    let k = support.len();
    let mut gram = vec![0.0; k * k];
    for (a, &ra) in support.iter().enumerate() {
        for (b, &rb) in support.iter().enumerate().skip(a) {
            let v = dot(sp.row(ra), sp.row(rb));
            gram[a * k + b] = v;
            gram[b * k + a] = v;
        }
    }
    let rhs: Vec<f64> = support.iter().map(|&r| -sp.offset(r)).collect();
    solve_dense(&gram, &rhs, 1e-12)
}

/// Greedy coordinate ascent with optional warm start and objective cutoff.
///
/// With `cutoff = Some(c)` the solve stops as soon as the dual objective
/// reaches `c` (status [`SolveStatus::Cutoff`]).
pub(crate) fn solve_dual_gca_from(
    sp: &Subproblem,
    cfg: &SolverConfig,
    warm: Option<&[f64]>,
    cutoff: Option<f64>,
) -> Result<DualSolution> {
    cfg.validate()?;
    let cap = cfg.iteration_cap(sp.m());
    let mut st = State::new(sp, warm);
    let mut trace = Vec::new();
    let mut iterations = 0usize;
    let mut since_refresh = 0usize;

    let status = loop {
        let (r, pg_max) = st.select(cfg.selection);
        if !pg_max.is_finite() {
            return Err(Error::NonFinite);
        }
        if pg_max <= cfg.tolerance {
            break SolveStatus::Converged;
        }
        if iterations >= cap {
            break if st.polish(cfg.tolerance) {
                SolveStatus::Converged
            } else {
                SolveStatus::IterationCap
            };
        }
        st.step(r);
        iterations += 1;
        since_refresh += 1;
        let obj = st.objective();
        if !obj.is_finite() {
            return Err(Error::NonFinite);
        }
        if cfg.record_trace {
            trace.push(obj);
        }
        if cutoff.is_some_and(|c| obj >= c) {
            break SolveStatus::Cutoff;
        }
        if since_refresh >= REFRESH_EVERY.min(10 * sp.m().max(1)) {
            since_refresh = 0;
            st.refresh();
            if st.polish(cfg.tolerance) {
                break SolveStatus::Converged;
            }
        }
    };
    if status == SolveStatus::Converged {
        st.polish(cfg.tolerance);
    }

    let mut sol = DualSolution::from_dense(&st.lambda, 0.0, iterations, status);
    sol.objective = dual_objective(sp, &sol);
    if cfg.record_trace {
        sol.trace = trace;
    }
    Ok(sol)
}
