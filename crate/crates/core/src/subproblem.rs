//! Constraint systems `A delta + b >= 0` for perturbation subproblems.
//!
//! Row `r` encodes "z + delta is at least as close to target `j` as to
//! same-class point `i`": `a_r = x_j - x_i` and
//! `b_r = (|z - x_i|^2 - |z - x_j|^2) / 2`. Rows for points of other classes
//! would be zero and are never stored.

use crate::data::{Dataset, Query};
use crate::error::{Error, Result};
use crate::linalg::{dist, dot, sq_dist};

#[derive(Clone, Debug, PartialEq)]
pub struct Subproblem {
    rows: Vec<f64>,
    offsets: Vec<f64>,
    row_norms_sq: Vec<f64>,
    /// `(same-class index, target index)` for every row.
    pairs: Vec<(usize, usize)>,
    dim: usize,
    pub target_ids: Vec<usize>,
    pub excluded_ids: Vec<usize>,
    pub query: Vec<f64>,
}

impl Subproblem {
    /// Builds rows for the given `(i, j)` pairs. `sq_dists[k]` must be
    /// `|z - x_k|^2`.
    pub(crate) fn from_pairs(
        ds: &Dataset,
        z: &[f64],
        pairs: Vec<(usize, usize)>,
        sq_dists: &[f64],
        target_ids: Vec<usize>,
        excluded_ids: Vec<usize>,
    ) -> Result<Self> {
        let dim = ds.dim();
        let mut rows = Vec::with_capacity(pairs.len() * dim);
        let mut offsets = Vec::with_capacity(pairs.len());
        let mut row_norms_sq = Vec::with_capacity(pairs.len());
        for &(i, j) in &pairs {
            let (xi, xj) = (ds.point(i), ds.point(j));
            let start = rows.len();
            rows.extend(xj.iter().zip(xi).map(|(a, b)| a - b));
            let nsq = dot(&rows[start..], &rows[start..]);
            if nsq == 0.0 {
                return Err(Error::DegeneratePair { same: i, other: j });
            }
            row_norms_sq.push(nsq);
            offsets.push(0.5 * (sq_dists[i] - sq_dists[j]));
        }
        Ok(Self {
            rows,
            offsets,
            row_norms_sq,
            pairs,
            dim,
            target_ids,
            excluded_ids,
            query: z.to_vec(),
        })
    }

    /// Assembles a subproblem from raw rows. Each row is tagged with a dummy
    /// pair `(r, usize::MAX)`.
    pub fn from_raw(rows: Vec<Vec<f64>>, offsets: Vec<f64>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || rows.len() != offsets.len() || rows.iter().any(|r| r.len() != dim)
        {
            return Err(Error::Config("rows and offsets must be non-empty and consistent".into()));
        }
        let row_norms_sq: Vec<f64> = rows.iter().map(|r| dot(r, r)).collect();
        if let Some(r) = row_norms_sq.iter().position(|&v| v == 0.0) {
            return Err(Error::DegeneratePair { same: r, other: usize::MAX });
        }
        let m = rows.len();
        Ok(Self {
            rows: rows.concat(),
            offsets,
            row_norms_sq,
            pairs: (0..m).map(|r| (r, usize::MAX)).collect(),
            dim,
            target_ids: Vec::new(),
            excluded_ids: Vec::new(),
            query: vec![0.0; dim],
        })
    }

    /// Keeps only the listed rows, in the given order.
    pub fn restricted(&self, keep: &[usize]) -> Subproblem {
        let mut rows = Vec::with_capacity(keep.len() * self.dim);
        for &r in keep {
            rows.extend_from_slice(self.row(r));
        }
        Subproblem {
            rows,
            offsets: keep.iter().map(|&r| self.offsets[r]).collect(),
            row_norms_sq: keep.iter().map(|&r| self.row_norms_sq[r]).collect(),
            pairs: keep.iter().map(|&r| self.pairs[r]).collect(),
            dim: self.dim,
            target_ids: self.target_ids.clone(),
            excluded_ids: self.excluded_ids.clone(),
            query: self.query.clone(),
        }
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.offsets.len()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.rows[r * self.dim..(r + 1) * self.dim]
    }

    #[inline]
    pub fn offset(&self, r: usize) -> f64 {
        self.offsets[r]
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    #[inline]
    pub fn row_norm_sq(&self, r: usize) -> f64 {
        self.row_norms_sq[r]
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// `(A delta + b)_r` for every row.
    pub fn residuals(&self, delta: &[f64]) -> Vec<f64> {
        (0..self.m())
            .map(|r| dot(self.row(r), delta) + self.offsets[r])
            .collect()
    }

    /// Largest constraint violation `max(0, -(A delta + b)_r)`.
    pub fn max_violation(&self, delta: &[f64]) -> f64 {
        self.residuals(delta)
            .into_iter()
            .fold(0.0, |m, v| m.max(-v))
    }

    /// Slack allowed on recovered primal points: `1e-6 (1 + |b|_inf)`.
    pub fn feasibility_slack(&self) -> f64 {
        1e-6 * (1.0 + self.offsets.iter().fold(0.0f64, |m, v| m.max(v.abs())))
    }
}

fn same_class_checked(ds: &Dataset, q: &Query) -> Result<Vec<usize>> {
    ds.check_dim(&q.z)?;
    let same = ds.indices_with_label(q.true_label);
    if same.is_empty() {
        return Err(Error::EmptyClass(q.true_label));
    }
    Ok(same)
}

/// One row per point of the query's class, all aimed at target `j`.
pub fn build_1nn_subproblem(ds: &Dataset, q: &Query, j: usize) -> Result<Subproblem> {
    if ds.label(j) == q.true_label {
        return Err(Error::SameClassTarget(j));
    }
    let same = same_class_checked(ds, q)?;
    let d2 = ds.sq_dists_to(&q.z);
    let pairs = same.into_iter().map(|i| (i, j)).collect();
    Subproblem::from_pairs(ds, &q.z, pairs, &d2, vec![j], Vec::new())
}

/// One row per (same-class `i` not in `excluded`, target `j` in `s_minus`)
/// pair, grouped by target.
pub fn build_knn_subproblem(
    ds: &Dataset,
    q: &Query,
    s_minus: &[usize],
    excluded: &[usize],
) -> Result<Subproblem> {
    let first = *s_minus.first().ok_or(Error::MixedTargetLabels)?;
    let target_label = ds.label(first);
    if target_label == q.true_label || s_minus.iter().any(|&j| ds.label(j) != target_label) {
        return Err(Error::MixedTargetLabels);
    }
    if let Some(&bad) = excluded.iter().find(|&&i| ds.label(i) != q.true_label) {
        return Err(Error::InvalidExclusion(bad));
    }
    let same: Vec<usize> = same_class_checked(ds, q)?
        .into_iter()
        .filter(|i| !excluded.contains(i))
        .collect();
    if same.is_empty() {
        return Err(Error::Config("every same-class point is excluded".into()));
    }
    let d2 = ds.sq_dists_to(&q.z);
    let pairs = s_minus
        .iter()
        .flat_map(|&j| same.iter().map(move |&i| (i, j)))
        .collect();
    Subproblem::from_pairs(ds, &q.z, pairs, &d2, s_minus.to_vec(), excluded.to_vec())
}

/// Distance from `z` to the bisecting hyperplane of `(x_i, x_j)`, or zero
/// when `z` is already on `x_j`'s side.
pub fn pair_bound(ds: &Dataset, z: &[f64], i: usize, j: usize) -> Result<f64> {
    let sep = dist(ds.point(i), ds.point(j));
    if sep == 0.0 {
        return Err(Error::DegeneratePair { same: i, other: j });
    }
    let gap = sq_dist(z, ds.point(j)) - sq_dist(z, ds.point(i));
    Ok(gap.max(0.0) / (2.0 * sep))
}

/// Same as [`pair_bound`] but with precomputed squared distances to `z`.
#[inline]
pub(crate) fn pair_bound_from(ds: &Dataset, d2: &[f64], i: usize, j: usize) -> Result<f64> {
    let sep = dist(ds.point(i), ds.point(j));
    if sep == 0.0 {
        return Err(Error::DegeneratePair { same: i, other: j });
    }
    Ok((d2[j] - d2[i]).max(0.0) / (2.0 * sep))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fix_b() -> (Dataset, Query) {
        let ds = Dataset::from_rows(&[vec![1.0, 1.0], vec![2.0, 0.0]], vec![1, 2]).unwrap();
        (ds, Query::new(vec![0.0, 0.0], 1))
    }

    fn fix_c() -> (Dataset, Query) {
        let ds = Dataset::from_rows(
            &[vec![-0.5], vec![-1.0], vec![2.0], vec![3.0], vec![4.0]],
            vec![1, 1, 2, 2, 2],
        )
        .unwrap();
        (ds, Query::new(vec![0.0], 1))
    }

    #[test]
    fn one_nn_rows() {
        let (ds, q) = fix_b();
        let sp = build_1nn_subproblem(&ds, &q, 1).unwrap();
        assert_eq!(sp.m(), 1);
        assert_eq!(sp.row(0), &[1.0, -1.0]);
        assert_eq!(sp.offset(0), -1.0);

        let ds = Dataset::from_rows(&[vec![-1.0], vec![3.0]], vec![1, 2]).unwrap();
        let sp = build_1nn_subproblem(&ds, &Query::new(vec![0.0], 1), 1).unwrap();
        assert_eq!(sp.row(0), &[4.0]);
        assert_eq!(sp.offset(0), -4.0);

        let ds = Dataset::from_rows(&[vec![0.0, 2.0], vec![2.0, 0.0]], vec![1, 2]).unwrap();
        let sp = build_1nn_subproblem(&ds, &Query::new(vec![0.0, 0.0], 1), 1).unwrap();
        assert_eq!(sp.row(0), &[2.0, -2.0]);
        assert_eq!(sp.offset(0), 0.0);
    }

    #[test]
    fn one_nn_errors() {
        let (ds, q) = fix_b();
        assert!(matches!(
            build_1nn_subproblem(&ds, &q, 0),
            Err(Error::SameClassTarget(0))
        ));
        let dup = Dataset::from_rows(&[vec![1.0], vec![1.0]], vec![1, 2]).unwrap();
        assert!(matches!(
            build_1nn_subproblem(&dup, &Query::new(vec![0.0], 1), 1),
            Err(Error::DegeneratePair { same: 0, other: 1 })
        ));
    }

    #[test]
    fn knn_rows() {
        let (ds, q) = fix_c();
        let sp = build_knn_subproblem(&ds, &q, &[2, 3], &[]).unwrap();
        assert_eq!(sp.m(), 4);
        let expect = [(2.5, -1.875), (3.0, -1.5), (3.5, -4.375), (4.0, -4.0)];
        for (r, (a, b)) in expect.iter().enumerate() {
            assert_eq!(sp.row(r), &[*a]);
            assert_eq!(sp.offset(r), *b);
        }
        assert_eq!(sp.pairs(), &[(0, 2), (1, 2), (0, 3), (1, 3)]);

        let sp = build_knn_subproblem(&ds, &q, &[2, 3], &[1]).unwrap();
        assert_eq!(sp.m(), 2);
        assert_eq!((sp.row(0)[0], sp.offset(0)), (2.5, -1.875));
        assert_eq!((sp.row(1)[0], sp.offset(1)), (3.5, -4.375));
        assert_eq!(sp.excluded_ids, vec![1]);

        let single = build_knn_subproblem(&ds, &q, &[3], &[]).unwrap();
        assert_eq!(single, build_1nn_subproblem(&ds, &q, 3).unwrap());
    }

    #[test]
    fn knn_errors() {
        let (ds, q) = fix_c();
        assert!(matches!(
            build_knn_subproblem(&ds, &q, &[2, 0], &[]),
            Err(Error::MixedTargetLabels)
        ));
        assert!(matches!(
            build_knn_subproblem(&ds, &q, &[2, 3], &[4]),
            Err(Error::InvalidExclusion(4))
        ));
    }

    #[test]
    fn pair_bounds() {
        let (ds, q) = fix_b();
        let c = pair_bound(&ds, &q.z, 0, 1).unwrap();
        assert!((c - 0.5f64.sqrt()).abs() < 1e-15);
        let (ds, q) = fix_c();
        assert_eq!(pair_bound(&ds, &q.z, 0, 2).unwrap(), 0.75);
        // z already closer to the target
        assert_eq!(pair_bound(&ds, &[3.0], 0, 2).unwrap(), 0.0);
    }

    #[test]
    fn target_point_is_feasible() {
        let (ds, q) = fix_c();
        for j in 2..5 {
            let sp = build_1nn_subproblem(&ds, &q, j).unwrap();
            let delta: Vec<f64> = ds.point(j).iter().zip(&q.z).map(|(x, z)| x - z).collect();
            assert!(sp.residuals(&delta).iter().all(|&r| r >= 0.0));
        }
    }
}
