//! Dual solver for the per-target perturbation QP.
//!
//! The primal is `min 1/2 |delta|^2 s.t. A delta + b >= 0`; its dual is
//! `max_{lambda >= 0} -1/2 |A^T lambda|^2 - lambda^T b` with the primal point
//! recovered as `delta = A^T lambda`. Any dual-feasible `lambda` lower-bounds
//! the primal value, which is what makes dual iterates usable as certificates.

mod gca;
mod oracle;

use serde::{Deserialize, Serialize};

pub use gca::solve_dual_gca;
pub(crate) use gca::{dual_objective, solve_dual_gca_from};
pub use oracle::{active_set_oracle, active_set_oracle_with_limits};

use crate::linalg::{axpy, dot};
use crate::subproblem::Subproblem;

/// Coordinate selection rule for greedy coordinate ascent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Selection {
    /// Largest `|max(lambda + g, 0) - lambda|`.
    #[default]
    ProjectedGradient,
    /// Largest `|step| * |a_i|`, i.e. the coordinate with the largest
    /// guaranteed ascent.
    ScaledStep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Stop once the sup-norm of the projected gradient is at most this.
    pub tolerance: f64,
    /// Iteration cap; `None` means `100 * m`.
    pub max_iterations: Option<usize>,
    /// Lemma-style variable screening before solving.
    pub screening_enabled: bool,
    pub selection: Selection,
    /// Keep the dual objective after every step in [`DualSolution::trace`].
    pub record_trace: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: None,
            screening_enabled: true,
            selection: Selection::ProjectedGradient,
            record_trace: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(crate::Error::Config(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == Some(0) {
            return Err(crate::Error::Config("max_iterations must be at least 1".into()));
        }
        Ok(())
    }

    pub(crate) fn iteration_cap(&self, m: usize) -> usize {
        self.max_iterations.unwrap_or(100 * m.max(1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Converged,
    IterationCap,
    /// The dual objective passed a caller-provided cutoff; the iterate is a
    /// certified lower bound above that cutoff, not an optimum.
    Cutoff,
}

/// Sparse non-negative multipliers with solver diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct DualSolution {
    /// `(row, multiplier)` pairs with multiplier > 0, ascending by row.
    pub lambda: Vec<(usize, f64)>,
    pub m: usize,
    pub objective: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    pub trace: Vec<f64>,
}

impl DualSolution {
    pub fn zero(m: usize) -> Self {
        Self {
            lambda: Vec::new(),
            m,
            objective: 0.0,
            iterations: 0,
            status: SolveStatus::Converged,
            trace: Vec::new(),
        }
    }

    pub(crate) fn from_dense(dense: &[f64], objective: f64, iterations: usize, status: SolveStatus) -> Self {
        Self {
            lambda: dense
                .iter()
                .enumerate()
                .filter(|(_, &v)| v > 0.0)
                .map(|(i, &v)| (i, v))
                .collect(),
            m: dense.len(),
            objective,
            iterations,
            status,
            trace: Vec::new(),
        }
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.lambda.len()
    }

    pub fn get(&self, row: usize) -> f64 {
        self.lambda
            .binary_search_by_key(&row, |&(r, _)| r)
            .map_or(0.0, |k| self.lambda[k].1)
    }

    pub fn dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        for &(r, v) in &self.lambda {
            out[r] = v;
        }
        out
    }

    pub fn is_converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

/// `delta = A^T lambda`.
pub fn recover_primal(sp: &Subproblem, sol: &DualSolution) -> Vec<f64> {
    let mut delta = vec![0.0; sp.dim()];
    for &(r, v) in &sol.lambda {
        axpy(v, sp.row(r), &mut delta);
    }
    delta
}

/// Rows whose multiplier is zero at every dual optimum, given an upper bound
/// on the optimal perturbation norm: `-b_i + |a_i| * bound < 0`.
pub fn screen_variables(sp: &Subproblem, delta_norm_bound: f64) -> Vec<usize> {
    (0..sp.m())
        .filter(|&r| -sp.offset(r) + sp.row_norm_sq(r).sqrt() * delta_norm_bound < 0.0)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktReport {
    /// `max_r max(0, -(A delta + b)_r)`.
    pub primal_violation: f64,
    /// `max_r lambda_r |(A delta + b)_r|`.
    pub complementarity: f64,
    /// `1/2 |delta|^2 - D(lambda)`.
    pub gap: f64,
    pub dual_feasible: bool,
    pub pass: bool,
}

/// Optimality residuals of `sol` for `sp`. Stationarity holds by construction
/// since `delta` is recovered as `A^T lambda`.
///
/// Thresholds are scaled: primal and complementarity residuals against
/// `tol * (1 + |b|_inf)` (complementarity additionally by `max(1, |lambda|_inf)`),
/// the gap against `tol * max(1, D)`.
pub fn kkt_check(sp: &Subproblem, sol: &DualSolution, tol: f64) -> KktReport {
    let delta = recover_primal(sp, sol);
    let res = sp.residuals(&delta);
    let primal_violation = res.iter().fold(0.0f64, |m, &v| m.max(-v));
    let complementarity = sol
        .lambda
        .iter()
        .fold(0.0f64, |m, &(r, v)| m.max(v * res[r].abs()));
    let dual = dual_objective(sp, sol);
    let gap = 0.5 * dot(&delta, &delta) - dual;
    let dual_feasible = sol.lambda.iter().all(|&(_, v)| v >= 0.0);
    let b_scale = 1.0 + sp.offsets().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let lam_scale = sol.lambda.iter().fold(1.0f64, |m, &(_, v)| m.max(v));
    let pass = dual_feasible
        && primal_violation <= tol * b_scale
        && complementarity <= tol * b_scale * lam_scale
        && gap.abs() <= tol * dual.abs().max(1.0);
    KktReport {
        primal_violation,
        complementarity,
        gap,
        dual_feasible,
        pass,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Dataset, Query};
    use crate::subproblem::build_1nn_subproblem;

    fn fix_b_sp() -> Subproblem {
        let ds = Dataset::from_rows(&[vec![1.0, 1.0], vec![2.0, 0.0]], vec![1, 2]).unwrap();
        build_1nn_subproblem(&ds, &Query::new(vec![0.0, 0.0], 1), 1).unwrap()
    }

    #[test]
    fn recover_fixtures() {
        let sp = fix_b_sp();
        let sol = DualSolution::from_dense(&[0.5], 0.25, 1, SolveStatus::Converged);
        assert_eq!(recover_primal(&sp, &sol), vec![0.5, -0.5]);
        assert_eq!(recover_primal(&sp, &DualSolution::zero(1)), vec![0.0, 0.0]);
    }

    #[test]
    fn screening_fixtures() {
        let sp = fix_b_sp();
        assert!(screen_variables(&sp, 2.0).is_empty());
        let sp = Subproblem::from_raw(vec![vec![1.0], vec![1.0]], vec![5.0, -1.0]).unwrap();
        assert_eq!(screen_variables(&sp, 2.0), vec![0]);
        assert_eq!(screen_variables(&sp, 0.0), vec![0]);
    }

    #[test]
    fn kkt_fixtures() {
        let sp = fix_b_sp();
        let good = DualSolution::from_dense(&[0.5], 0.25, 1, SolveStatus::Converged);
        let rep = kkt_check(&sp, &good, 1e-8);
        assert!(rep.pass, "{rep:?}");
        assert!(rep.primal_violation <= 1e-8 && rep.complementarity <= 1e-8 && rep.gap.abs() <= 1e-8);

        let rep = kkt_check(&sp, &DualSolution::zero(1), 1e-8);
        assert_eq!(rep.primal_violation, 1.0);
        assert!(!rep.pass);

        let easy = Subproblem::from_raw(vec![vec![1.0, 0.0]], vec![2.0]).unwrap();
        let rep = kkt_check(&easy, &DualSolution::zero(1), 1e-8);
        assert!(rep.pass);
        assert_eq!(rep.gap, 0.0);
    }

    #[test]
    fn sparse_accessors() {
        let sol = DualSolution::from_dense(&[0.0, 2.0, 0.0, 1.0], 0.0, 0, SolveStatus::Converged);
        assert_eq!(sol.nnz(), 2);
        assert_eq!(sol.get(1), 2.0);
        assert_eq!(sol.get(2), 0.0);
        assert_eq!(sol.dense(), vec![0.0, 2.0, 0.0, 1.0]);
    }
}
