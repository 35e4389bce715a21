//! Minimum l-infinity and l1 perturbations. The per-target problem keeps the
//! bisector constraints `A delta + b >= 0` but minimizes a polyhedral norm,
//! so each target becomes a linear program.

mod simplex;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use simplex::solve_lp;

use crate::attack::{
    is_misclassified_query, settle, stretch_to_feasible, CertificateKind, PerturbationCertificate,
    SearchStats,
};
use crate::data::{Dataset, Query, TieRule};
use crate::error::{Error, Result};
use crate::linalg::{norm_inf, norm_l1, sq_dist};
use crate::subproblem::Subproblem;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Ge,
    Le,
    Eq,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `min objective . x` subject to the constraints and per-variable
/// `(lower, upper)` bounds, either of which may be infinite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<(f64, f64)>,
}

impl LinearProgram {
    pub fn validate(&self) -> Result<()> {
        let p = self.objective.len();
        if self.bounds.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: self.bounds.len(),
            });
        }
        for c in &self.constraints {
            if c.coeffs.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: c.coeffs.len(),
                });
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("LP coefficients must be finite".into()));
            }
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("LP objective must be finite".into()));
        }
        let bad = |&(lo, hi): &(f64, f64)| {
            lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY
        };
        if self.bounds.iter().any(bad) {
            return Err(Error::Config("invalid variable bounds".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpNorm {
    Linf,
    L1,
}

impl LpNorm {
    pub fn of(self, v: &[f64]) -> f64 {
        match self {
            LpNorm::Linf => norm_inf(v),
            LpNorm::L1 => norm_l1(v),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LpNorm::Linf => "linf",
            LpNorm::L1 => "l1",
        }
    }
}

fn bisector_rows(sp: &Subproblem, width: usize, negate_tail: bool) -> Vec<Constraint> {
    let d = sp.dim();
    (0..sp.m())
        .map(|r| {
            let mut coeffs = vec![0.0; width];
            coeffs[..d].copy_from_slice(sp.row(r));
            if negate_tail {
                for k in 0..d {
                    coeffs[d + k] = -sp.row(r)[k];
                }
            }
            Constraint {
                coeffs,
                relation: Relation::Ge,
                rhs: -sp.offset(r),
            }
        })
        .collect()
}

/// Variables `(delta_1..delta_d, v)`: minimize `v` subject to
/// `A delta + b >= 0` and `-v <= delta_k <= v`.
pub fn build_linf_lp(sp: &Subproblem) -> LinearProgram {
    let d = sp.dim();
    let mut constraints = bisector_rows(sp, d + 1, false);
    for k in 0..d {
        let mut upper = vec![0.0; d + 1];
        upper[k] = 1.0;
        upper[d] = -1.0;
        constraints.push(Constraint {
            coeffs: upper,
            relation: Relation::Le,
            rhs: 0.0,
        });
        let mut lower = vec![0.0; d + 1];
        lower[k] = 1.0;
        lower[d] = 1.0;
        constraints.push(Constraint {
            coeffs: lower,
            relation: Relation::Ge,
            rhs: 0.0,
        });
    }
    let mut objective = vec![0.0; d + 1];
    objective[d] = 1.0;
    let mut bounds = vec![(f64::NEG_INFINITY, f64::INFINITY); d];
    bounds.push((0.0, f64::INFINITY));
    LinearProgram {
        objective,
        constraints,
        bounds,
    }
}

/// Variables `(delta+, delta-)`, both nonnegative: minimize their sum subject
/// to `A (delta+ - delta-) + b >= 0`.
pub fn build_l1_lp(sp: &Subproblem) -> LinearProgram {
    let d = sp.dim();
    LinearProgram {
        objective: vec![1.0; 2 * d],
        constraints: bisector_rows(sp, 2 * d, true),
        bounds: vec![(0.0, f64::INFINITY); 2 * d],
    }
}

/// Solves the per-target LP and returns the perturbation.
pub fn solve_target_lp(sp: &Subproblem, norm: LpNorm, tol: f64) -> Result<(Vec<f64>, LpSolution)> {
    let d = sp.dim();
    let (lp, delta_of): (LinearProgram, fn(&[f64], usize) -> Vec<f64>) = match norm {
        LpNorm::Linf => (build_linf_lp(sp), |x, d| x[..d].to_vec()),
        LpNorm::L1 => (build_l1_lp(sp), |x, d| (0..d).map(|k| x[k] - x[d + k]).collect()),
    };
    let sol = solve_lp(&lp, tol)?;
    Ok((delta_of(&sol.x, d), sol))
}

const LP_TOL: f64 = 1e-9;

/// Exact minimum 1-NN perturbation in the l-infinity or l1 norm.
///
/// Targets are visited by ascending Euclidean distance. The search stops once
/// `(|x_j - z| - |x_nearest_same - z|) / 2`, a Euclidean lower bound for every
/// remaining target, exceeds the incumbent converted to Euclidean length:
/// `sqrt(d)` times the l-infinity value, or the l1 value itself.
pub fn exact_1nn_lp(ds: &Dataset, q: &Query, norm: LpNorm) -> Result<PerturbationCertificate> {
    let started = Instant::now();
    ds.check_dim(&q.z)?;
    let tie = TieRule::default();
    let method = format!("exact-{}", norm.name());
    if is_misclassified_query(ds, q, 1, &tie)? {
        return Ok(PerturbationCertificate::misclassified(ds.dim(), CertificateKind::Exact, &method));
    }
    let d2 = ds.sq_dists_to(&q.z);
    let same = ds.indices_with_label(q.true_label);
    let nearest_same = same.iter().map(|&i| d2[i]).fold(f64::INFINITY, f64::min).sqrt();
    let mut others = ds.indices_without_label(q.true_label);
    others.sort_unstable_by(|a, b| d2[*a].total_cmp(&d2[*b]).then(a.cmp(b)));
    let to_l2 = match norm {
        LpNorm::Linf => (ds.dim() as f64).sqrt(),
        LpNorm::L1 => 1.0,
    };

    let mut stats = SearchStats::default();
    let mut incumbent = f64::INFINITY;
    let mut best: Option<(usize, Vec<f64>)> = None;
    for (pos, &j) in others.iter().enumerate() {
        if (d2[j].sqrt() - nearest_same) / 2.0 > to_l2 * incumbent {
            stats.subproblems_pruned += others.len() - pos;
            break;
        }
        let pairs = same.iter().map(|&i| (i, j)).collect();
        let sp = Subproblem::from_pairs(ds, &q.z, pairs, &d2, vec![j], Vec::new())?;
        stats.subproblems_built += 1;
        stats.subproblems_solved += 1;
        let (delta, sol) = solve_target_lp(&sp, norm, LP_TOL)?;
        stats.solver_iterations += sol.iterations;
        let eps = norm.of(&delta);
        if eps < incumbent {
            incumbent = eps;
            best = Some((j, delta));
        }
    }
    let (j, mut delta) = best.ok_or(Error::Config("no target subproblem was solved".into()))?;
    let rows: Vec<(Vec<f64>, f64)> = same
        .iter()
        .map(|&i| {
            let a: Vec<f64> = ds.point(j).iter().zip(ds.point(i)).map(|(x, y)| x - y).collect();
            (a, 0.5 * (d2[i] - d2[j]))
        })
        .collect();
    stretch_to_feasible(&mut delta, &rows);
    let eps = norm.of(&delta);
    let delta = settle(ds, q, &delta, &[j], 1, &tie).ok_or_else(|| {
        Error::CertificationViolation(format!(
            "{method}: perturbation toward point {j} (distance {}) does not change the prediction",
            sq_dist(ds.point(j), &q.z).sqrt()
        ))
    })?;
    stats.wall_time = started.elapsed().as_secs_f64();
    Ok(PerturbationCertificate::witness(delta, Some(eps), CertificateKind::Exact, &method, stats))
}
