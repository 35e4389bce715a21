//! Two-phase dense tableau simplex with Bland's rule.

use super::{LinearProgram, LpSolution, Relation};
use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-10;

/// How an original variable is expressed through nonnegative columns.
#[derive(Clone, Copy)]
enum Repr {
    /// `x = lo + col`
    Shift(f64, usize),
    /// `x = hi - col`
    Flip(f64, usize),
    /// `x = pos - neg`
    Split(usize, usize),
}

struct Tableau {
    /// `rows + 1` rows of `cols + 1` entries; the last row holds reduced
    /// costs, the last column right-hand sides.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn rows(&self) -> usize {
        self.basis.len()
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.t[r][c];
        self.t[r].iter_mut().for_each(|v| *v /= p);
        let pivot_row = self.t[r].clone();
        for (i, row) in self.t.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                row.iter_mut().zip(&pivot_row).for_each(|(v, p)| *v -= f * p);
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    /// Loads `cost` into the objective row, expressed in the current basis.
    fn set_cost(&mut self, cost: &[f64]) {
        let m = self.rows();
        let mut obj = cost.to_vec();
        obj.push(0.0);
        for r in 0..m {
            let cb = cost[self.basis[r]];
            if cb != 0.0 {
                obj.iter_mut().zip(&self.t[r]).for_each(|(o, v)| *o -= cb * v);
            }
        }
        self.t[m] = obj;
    }

    /// Minimizes the loaded cost over columns with `allowed[c]`.
    fn optimize(&mut self, allowed: &[bool], tol: f64, iters: &mut usize, cap: usize) -> Result<()> {
        let m = self.rows();
        loop {
            let Some(c) = (0..self.cols).find(|&c| allowed[c] && self.t[m][c] < -tol) else {
                return Ok(());
            };
            let mut best: Option<(f64, usize)> = None;
            for r in 0..m {
                let a = self.t[r][c];
                if a > PIVOT_TOL {
                    let ratio = self.t[r][self.cols] / a;
                    let better = match best {
                        None => true,
                        Some((br, bi)) => {
                            ratio < br - 1e-12 || (ratio <= br + 1e-12 && self.basis[r] < self.basis[bi])
                        }
                    };
                    if better {
                        best = Some((ratio, r));
                    }
                }
            }
            let Some((_, r)) = best else {
                return Err(Error::LpUnbounded);
            };
            *iters += 1;
            if *iters > cap {
                return Err(Error::LpIterationLimit);
            }
            self.pivot(r, c);
        }
    }
}

/// Minimizes `lp.objective . x` over the feasible set. `tol` bounds the
/// reduced-cost and feasibility tolerances.
pub fn solve_lp(lp: &LinearProgram, tol: f64) -> Result<LpSolution> {
    lp.validate()?;
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Config("LP tolerance must be positive".into()));
    }
    let p = lp.objective.len();

    // Nonnegative columns for the original variables.
    let mut ncols = 0usize;
    let mut reprs = Vec::with_capacity(p);
    let mut extra_rows: Vec<(usize, f64)> = Vec::new();
    for &(lo, hi) in &lp.bounds {
        let r = if lo.is_finite() {
            if hi.is_finite() {
                extra_rows.push((ncols, hi - lo));
            }
            Repr::Shift(lo, ncols)
        } else if hi.is_finite() {
            Repr::Flip(hi, ncols)
        } else {
            ncols += 1;
            Repr::Split(ncols - 1, ncols)
        };
        ncols += 1;
        reprs.push(r);
    }
    let nvar = ncols;

    // Rows as (coefficients over columns, relation, rhs).
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    for con in &lp.constraints {
        let mut a = vec![0.0; nvar];
        let mut rhs = con.rhs;
        for (k, &coef) in con.coeffs.iter().enumerate() {
            match reprs[k] {
                Repr::Shift(lo, c) => {
                    a[c] += coef;
                    rhs -= coef * lo;
                }
                Repr::Flip(hi, c) => {
                    a[c] -= coef;
                    rhs -= coef * hi;
                }
                Repr::Split(pc, nc) => {
                    a[pc] += coef;
                    a[nc] -= coef;
                }
            }
        }
        rows.push((a, con.relation, rhs));
    }
    for &(c, width) in &extra_rows {
        let mut a = vec![0.0; nvar];
        a[c] = 1.0;
        rows.push((a, Relation::Le, width));
    }

    // Slack columns, then artificial columns where no slack can start basic.
    let m = rows.len();
    let slack_count = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let mut slack_of = vec![None; m];
    let mut next = nvar;
    for (i, r) in rows.iter().enumerate() {
        if r.1 != Relation::Eq {
            slack_of[i] = Some(next);
            next += 1;
        }
    }
    let mut dense: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut needs_art = Vec::new();
    let mut basis = vec![usize::MAX; m];
    for (i, (a, rel, rhs)) in rows.into_iter().enumerate() {
        let mut row = a;
        row.resize(nvar + slack_count, 0.0);
        if let Some(s) = slack_of[i] {
            row[s] = if rel == Relation::Le { 1.0 } else { -1.0 };
        }
        let mut rhs = rhs;
        if rhs < 0.0 {
            row.iter_mut().for_each(|v| *v = -*v);
            rhs = -rhs;
        }
        match slack_of[i] {
            Some(s) if row[s] > 0.0 => basis[i] = s,
            _ => needs_art.push(i),
        }
        row.push(rhs);
        dense.push(row);
    }
    let art_start = nvar + slack_count;
    let cols = art_start + needs_art.len();
    for row in dense.iter_mut() {
        let rhs = row.pop().expect("rhs entry");
        row.resize(cols, 0.0);
        row.push(rhs);
    }
    for (n, &i) in needs_art.iter().enumerate() {
        dense[i][art_start + n] = 1.0;
        basis[i] = art_start + n;
    }
    dense.push(vec![0.0; cols + 1]);
    let mut tab = Tableau { t: dense, basis, cols };

    let cap = 5000 + 50 * (m + cols);
    let mut iters = 0usize;
    let rhs_scale = 1.0 + tab.t[..m].iter().fold(0.0f64, |a, r| a.max(r[cols].abs()));

    if !needs_art.is_empty() {
        let mut cost = vec![0.0; cols];
        cost[art_start..].iter_mut().for_each(|c| *c = 1.0);
        tab.set_cost(&cost);
        tab.optimize(&vec![true; cols], tol, &mut iters, cap)?;
        if -tab.t[m][cols] > tol * rhs_scale {
            return Err(Error::LpInfeasible);
        }
        // Drive remaining artificials out of the basis; drop redundant rows.
        let mut r = 0;
        while r < tab.rows() {
            if tab.basis[r] >= art_start {
                match (0..art_start).find(|&c| tab.t[r][c].abs() > 1e-9) {
                    Some(c) => tab.pivot(r, c),
                    None => {
                        tab.t.remove(r);
                        tab.basis.remove(r);
                        continue;
                    }
                }
            }
            r += 1;
        }
    }

    let mut cost = vec![0.0; cols];
    for (k, &ck) in lp.objective.iter().enumerate() {
        match reprs[k] {
            Repr::Shift(_, c) => cost[c] += ck,
            Repr::Flip(_, c) => cost[c] -= ck,
            Repr::Split(pc, nc) => {
                cost[pc] += ck;
                cost[nc] -= ck;
            }
        }
    }
    tab.set_cost(&cost);
    let allowed: Vec<bool> = (0..cols).map(|c| c < art_start).collect();
    tab.optimize(&allowed, tol, &mut iters, cap)?;

    let mut col_val = vec![0.0; cols];
    for (r, &b) in tab.basis.iter().enumerate() {
        col_val[b] = tab.t[r][cols];
    }
    let x: Vec<f64> = reprs
        .iter()
        .map(|r| match *r {
            Repr::Shift(lo, c) => lo + col_val[c],
            Repr::Flip(hi, c) => hi - col_val[c],
            Repr::Split(pc, nc) => col_val[pc] - col_val[nc],
        })
        .collect();
    let objective = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution {
        x,
        objective,
        iterations: iters,
    })
}
