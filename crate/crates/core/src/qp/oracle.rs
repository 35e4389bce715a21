//! Exhaustive active-set reference solver for small subproblems.
//!
//! Every subset `S` of at most `min(m, d)` rows is tried as the active set:
//! the minimum-norm point of `A_S delta + b_S = 0` is `delta = A_S^T mu` with
//! `(A_S A_S^T) mu = -b_S`. A subset qualifies when `mu >= 0` and `delta` is
//! feasible for every row; the qualifying point of smallest norm is optimal.

use super::{DualSolution, SolveStatus};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, solve_dense};
use crate::subproblem::Subproblem;

pub const ORACLE_MAX_ROWS: usize = 16;
pub const ORACLE_MAX_DIM: usize = 6;

pub fn active_set_oracle(sp: &Subproblem) -> Result<(Vec<f64>, DualSolution)> {
    active_set_oracle_with_limits(sp, ORACLE_MAX_ROWS, ORACLE_MAX_DIM)
}

pub fn active_set_oracle_with_limits(
    sp: &Subproblem,
    max_rows: usize,
    max_dim: usize,
) -> Result<(Vec<f64>, DualSolution)> {
    let (m, d) = (sp.m(), sp.dim());
    if m > max_rows || d > max_dim {
        return Err(Error::OracleTooLarge { m, d });
    }
    let scale = 1.0 + sp.offsets().iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let feas_tol = 1e-10 * scale;

    let mut best: Option<(f64, Vec<f64>, Vec<(usize, f64)>)> = None;
    let mut checked = 0usize;
    let mut subset = Vec::with_capacity(d);
    for size in 0..=m.min(d) {
        for_each_subset(m, size, &mut subset, &mut |s| {
            checked += 1;
            let Some((delta, mu)) = solve_on(sp, s) else {
                return;
            };
            if mu.iter().any(|&v| v < -feas_tol) {
                return;
            }
            if sp.max_violation(&delta) > feas_tol {
                return;
            }
            let nsq = dot(&delta, &delta);
            if best.as_ref().is_none_or(|(b, _, _)| nsq < *b) {
                let lambda = s
                    .iter()
                    .zip(&mu)
                    .filter(|(_, &v)| v > 0.0)
                    .map(|(&r, &v)| (r, v))
                    .collect();
                best = Some((nsq, delta, lambda));
            }
        });
    }
    let (_, delta, mut lambda) = best.ok_or(Error::OracleInfeasible)?;
    lambda.sort_unstable_by_key(|&(r, _)| r);
    let mut sol = DualSolution {
        lambda,
        m,
        objective: 0.0,
        iterations: checked,
        status: SolveStatus::Converged,
        trace: Vec::new(),
    };
    sol.objective = super::dual_objective(sp, &sol);
    Ok((delta, sol))
}

fn solve_on(sp: &Subproblem, s: &[usize]) -> Option<(Vec<f64>, Vec<f64>)> {
    let k = s.len();
    let mut gram = vec![0.0; k * k];
    for a in 0..k {
        for b in 0..k {
            gram[a * k + b] = dot(sp.row(s[a]), sp.row(s[b]));
        }
    }
    let rhs: Vec<f64> = s.iter().map(|&r| -sp.offset(r)).collect();
    let mu = solve_dense(&gram, &rhs, 1e-10)?;
    let mut delta = vec![0.0; sp.dim()];
    for (&r, &v) in s.iter().zip(&mu) {
        axpy(v, sp.row(r), &mut delta);
    }
    Some((delta, mu))
}

fn for_each_subset(m: usize, size: usize, buf: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    fn rec(start: usize, m: usize, size: usize, buf: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if buf.len() == size {
            f(buf);
            return;
        }
        for i in start..m {
            if m - i < size - buf.len() {
                break;
            }
            buf.push(i);
            rec(i + 1, m, size, buf, f);
            buf.pop();
        }
    }
    buf.clear();
    rec(0, m, size, buf, f);
}
