//! Reference database, queries, and exact K-NN prediction.
//!
//! Distances are always plain euclidean distances computed from coordinate
//! differences. Neighbor ranking breaks equal distances by ascending index;
//! prediction can additionally resolve boundary ties against a reference label
//! (see [`TieRule`]).

use std::collections::BTreeMap;
use std::path::Path;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::sq_dist;

pub type Label = u32;

/// Immutable labelled point set, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    points: Vec<f64>,
    labels: Vec<Label>,
    dim: usize,
    class_count: u32,
}

impl Dataset {
    /// Builds a dataset from a row-major `n x dim` buffer.
    pub fn new(points: Vec<f64>, dim: usize, labels: Vec<Label>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDataset("dimension must be at least 1".into()));
        }
        if points.len() != dim * labels.len() {
            return Err(Error::InvalidDataset(format!(
                "{} coordinates do not form {} rows of dimension {}",
                points.len(),
                labels.len(),
                dim
            )));
        }
        if labels.len() < 2 {
            return Err(Error::InvalidDataset("need at least two points".into()));
        }
        if labels.contains(&0) {
            return Err(Error::InvalidDataset("labels must be positive".into()));
        }
        if let Some(pos) = points.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset(format!(
                "non-finite coordinate in row {}",
                pos / dim
            )));
        }
        let first = labels[0];
        if labels.iter().all(|&l| l == first) {
            return Err(Error::InvalidDataset(
                "at least two distinct classes are required".into(),
            ));
        }
        let class_count = *labels.iter().max().unwrap();
        Ok(Self {
            points,
            labels,
            dim,
            class_count,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], labels: Vec<Label>) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::RaggedRow {
                row: bad + 1,
                expected: dim,
                found: rows[bad].len(),
            });
        }
        Self::new(rows.concat(), dim, labels)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Largest label value `C`; labels live in `1..=C`.
    #[inline]
    pub fn class_count(&self) -> u32 {
        self.class_count
    }

    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    #[inline]
    pub fn label(&self, i: usize) -> Label {
        self.labels[i]
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Indices of points carrying `label`, in dataset order.
    pub fn indices_with_label(&self, label: Label) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == label).collect()
    }

    /// Indices of points whose label differs from `label`, in dataset order.
    pub fn indices_without_label(&self, label: Label) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] != label).collect()
    }

    /// Labels that actually occur, ascending.
    pub fn present_labels(&self) -> Vec<Label> {
        let mut ls = self.labels.clone();
        ls.sort_unstable();
        ls.dedup();
        ls
    }

    pub fn sq_dists_to(&self, z: &[f64]) -> Vec<f64> {
        (0..self.len()).map(|i| sq_dist(self.point(i), z)).collect()
    }

    pub fn check_dim(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: z.len(),
            });
        }
        Ok(())
    }

    /// Returns a copy whose rows are reordered by `perm` (row `r` of the result
    /// is row `perm[r]` of `self`).
    pub fn permuted(&self, perm: &[usize]) -> Dataset {
        let mut points = Vec::with_capacity(self.points.len());
        let mut labels = Vec::with_capacity(self.len());
        for &p in perm {
            points.extend_from_slice(self.point(p));
            labels.push(self.labels[p]);
        }
        Dataset {
            points,
            labels,
            dim: self.dim,
            class_count: self.class_count,
        }
    }
}

/// A test instance together with the label the model assigns to it.
#[derive(Clone, Debug, PartialEq)]
pub struct Query {
    pub z: Vec<f64>,
    pub true_label: Label,
}

impl Query {
    pub fn new(z: Vec<f64>, true_label: Label) -> Self {
        Self { z, true_label }
    }

    /// Labels `z` with the model's own K-NN prediction.
    pub fn predicted(ds: &Dataset, z: Vec<f64>, k: usize) -> Result<Self> {
        let label = knn_predict(ds, &z, k, &TieRule::default(), None)?;
        Ok(Self { z, true_label: label })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TieMode {
    /// Boundary ties resolve away from the reference label whenever some
    /// admissible choice allows it.
    #[default]
    AttackerFavorable,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TieRule {
    pub mode: TieMode,
    /// Relative factor by which candidate perturbations are inflated before
    /// they are checked.
    pub inflation: f64,
}

impl Default for TieRule {
    fn default() -> Self {
        Self {
            mode: TieMode::AttackerFavorable,
            inflation: 1e-9,
        }
    }
}

impl TieRule {
    pub fn new(inflation: f64) -> Result<Self> {
        if !(inflation > 0.0 && inflation.is_finite()) {
            return Err(Error::Config(format!(
                "tie inflation must be positive, got {inflation}"
            )));
        }
        Ok(Self {
            mode: TieMode::AttackerFavorable,
            inflation,
        })
    }
}

pub(crate) fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k.is_multiple_of(2) || k > n {
        return Err(Error::InvalidK { k, n });
    }
    Ok(())
}

/// Indices of the `k` nearest points, ascending by distance then by index.
pub fn k_nearest(ds: &Dataset, z: &[f64], k: usize) -> Result<Vec<usize>> {
    ds.check_dim(z)?;
    if k > ds.len() {
        return Err(Error::InvalidK { k, n: ds.len() });
    }
    let d2 = ds.sq_dists_to(z);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let cmp = |a: &usize, b: &usize| d2[*a].total_cmp(&d2[*b]).then(a.cmp(b));
    if k < order.len() && k > 0 {
        order.select_nth_unstable_by(k - 1, cmp);
        order.truncate(k);
    }
    order.sort_unstable_by(cmp);
    order.truncate(k);
    Ok(order)
}

/// Majority vote of the `k` nearest neighbors.
///
/// With `against = Some(label)`, ties are resolved attacker-favorably with
/// respect to `label`: when several points share the `k`-th distance, the
/// admissible subset that moves the vote away from `label` is used, and vote
/// ties prefer any class other than `label`. Without a reference label, ties
/// fall back to ascending index and the class of the best-ranked neighbor.
pub fn knn_predict(
    ds: &Dataset,
    z: &[f64],
    k: usize,
    tie: &TieRule,
    against: Option<Label>,
) -> Result<Label> {
    ds.check_dim(z)?;
    check_k(k, ds.len())?;
    let d2 = ds.sq_dists_to(z);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    let cmp = |a: &usize, b: &usize| d2[*a].total_cmp(&d2[*b]).then(a.cmp(b));
    order.select_nth_unstable_by(k - 1, cmp);
    let kth = d2[order[k - 1]];

    let mut certain: Vec<usize> = order[..k].iter().copied().filter(|&i| d2[i] < kth).collect();
    certain.sort_unstable_by(cmp);
    let mut tied: Vec<usize> = (0..ds.len()).filter(|&i| d2[i] == kth).collect();
    tied.sort_unstable();
    let need = k - certain.len();

    let reference = match (tie.mode, against) {
        (TieMode::AttackerFavorable, Some(r)) => r,
        (_, None) => {
            let chosen: Vec<usize> = certain.iter().chain(&tied[..need]).copied().collect();
            return Ok(vote(ds, &chosen, None));
        }
    };

    let default: Vec<usize> = certain.iter().chain(&tied[..need]).copied().collect();
    let winner = vote(ds, &default, Some(reference));
    if winner != reference || tied.len() == need {
        return Ok(winner);
    }

    // Try to steer the boundary group toward each rival class in turn.
    let mut rivals: Vec<Label> = certain
        .iter()
        .chain(&tied)
        .map(|&i| ds.label(i))
        .filter(|&l| l != reference)
        .collect();
    rivals.sort_unstable();
    rivals.dedup();
    for c in rivals {
        let mut pick: Vec<usize> = tied.iter().copied().filter(|&i| ds.label(i) == c).collect();
        pick.extend(
            tied.iter()
                .copied()
                .filter(|&i| ds.label(i) != c && ds.label(i) != reference),
        );
        pick.extend(tied.iter().copied().filter(|&i| ds.label(i) == reference));
        let chosen: Vec<usize> = certain.iter().chain(&pick[..need]).copied().collect();
        let w = vote(ds, &chosen, Some(reference));
        if w != reference {
            return Ok(w);
        }
    }
    Ok(reference)
}

/// Plurality vote over `chosen` (ordered by rank). Vote ties go to a class
/// other than `against` when possible, then to the best-ranked class.
fn vote(ds: &Dataset, chosen: &[usize], against: Option<Label>) -> Label {
    // label -> (votes, best rank)
    let mut tally: BTreeMap<Label, (usize, usize)> = BTreeMap::new();
    for (rank, &i) in chosen.iter().enumerate() {
        let e = tally.entry(ds.label(i)).or_insert((0, rank));
        e.0 += 1;
    }
    let top = tally.values().map(|v| v.0).max().unwrap_or(0);
    tally
        .into_iter()
        .filter(|(_, (c, _))| *c == top)
        .min_by_key(|(l, (_, rank))| (Some(*l) == against, *rank))
        .map(|(l, _)| l)
        .expect("non-empty neighbor set")
}

/// Row `c - 1` holds the mean of class `c`.
pub fn class_means(ds: &Dataset) -> Result<Vec<Vec<f64>>> {
    (1..=ds.class_count())
        .map(|c| class_mean(ds, c).ok_or(Error::EmptyClass(c)))
        .collect()
}

pub fn class_mean(ds: &Dataset, label: Label) -> Option<Vec<f64>> {
    let mut mean = vec![0.0; ds.dim()];
    let mut count = 0usize;
    for i in 0..ds.len() {
        if ds.label(i) == label {
            for (m, x) in mean.iter_mut().zip(ds.point(i)) {
                *m += x;
            }
            count += 1;
        }
    }
    if count == 0 {
        return None;
    }
    mean.iter_mut().for_each(|m| *m /= count as f64);
    Some(mean)
}

fn parse_rows(path: &Path, has_header: bool) -> Result<(Vec<Vec<f64>>, Vec<Label>)> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut dim = None;
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row = record.position().map_or(idx + 1, |p| p.line() as usize);
        if record.iter().all(str::is_empty) {
            continue;
        }
        let mut fields = record.iter();
        let raw_label = fields.next().unwrap_or("");
        let label: Label = match raw_label.parse::<Label>() {
            Ok(l) if l > 0 => l,
            _ => {
                return Err(Error::Parse {
                    row,
                    message: format!("label '{raw_label}' is not a positive integer"),
                })
            }
        };
        let feats = fields
            .enumerate()
            .map(|(f, s)| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        row,
                        message: format!("field {} ('{s}') is not a finite number", f + 2),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        match dim {
            None => dim = Some(feats.len()),
            Some(d) if d != feats.len() => {
                return Err(Error::RaggedRow {
                    row,
                    expected: d,
                    found: feats.len(),
                })
            }
            _ => {}
        }
        rows.push(feats);
        labels.push(label);
    }
    Ok((rows, labels))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Parse {
            row: 0,
            message: format!("{other:?}"),
        },
    }
}

/// Whether the first non-blank line of a CSV file is a header, judged by its
/// first field not being numeric.
pub fn detect_header(path: impl AsRef<Path>) -> Result<bool> {
    use std::io::BufRead;
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::open(path).map_err(io_err)?;
    for line in std::io::BufReader::new(file).lines() {
        let line = line.map_err(io_err)?;
        let first = line.split(',').next().unwrap_or("").trim();
        if line.trim().is_empty() {
            continue;
        }
        return Ok(first.parse::<f64>().is_err());
    }
    Ok(false)
}

/// Reads `label,f1,...,fd` rows. Row numbers in errors are file line numbers.
pub fn load_csv(path: impl AsRef<Path>, has_header: bool) -> Result<Dataset> {
    let (rows, labels) = parse_rows(path.as_ref(), has_header)?;
    if rows.first().is_some_and(Vec::is_empty) {
        return Err(Error::InvalidDataset("rows carry no features".into()));
    }
    Dataset::from_rows(&rows, labels)
}

/// Reads queries in the dataset CSV format; the label column is the true label.
pub fn load_queries(path: impl AsRef<Path>, has_header: bool) -> Result<Vec<Query>> {
    let (rows, labels) = parse_rows(path.as_ref(), has_header)?;
    Ok(rows
        .into_iter()
        .zip(labels)
        .map(|(z, l)| Query::new(z, l))
        .collect())
}

/// Writes `label,f1,...,fd` rows without a header.
pub fn write_csv(path: impl AsRef<Path>, rows: impl IntoIterator<Item = (Label, Vec<f64>)>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    for (label, feats) in rows {
        let mut rec = vec![label.to_string()];
        rec.extend(feats.iter().map(f64::to_string));
        w.write_record(&rec).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes a dataset in the format read by [`load_csv`].
pub fn write_dataset(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    write_csv(path, (0..ds.len()).map(|i| (ds.label(i), ds.point(i).to_vec())))
}

/// Writes queries in the format read by [`load_queries`].
pub fn write_queries(path: impl AsRef<Path>, queries: &[Query]) -> Result<()> {
    write_csv(path, queries.iter().map(|q| (q.true_label, q.z.clone())))
}

/// Gaussian blobs with unit variance, one per class.
///
/// With `d >= class_count` the class means sit on scaled unit vectors, pairwise
/// `separation` apart. In lower dimension they are placed along the first axis
/// with consecutive means `separation` apart.
pub fn generate_synthetic(
    n_per_class: usize,
    d: usize,
    class_count: u32,
    separation: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_per_class == 0 || d == 0 || class_count < 2 {
        return Err(Error::Config(
            "need n_per_class >= 1, d >= 1 and at least two classes".into(),
        ));
    }
    if !(separation >= 0.0 && separation.is_finite()) {
        return Err(Error::Config("separation must be a finite non-negative number".into()));
    }
    let c = class_count as usize;
    let means: Vec<Vec<f64>> = (0..c)
        .map(|k| {
            let mut m = vec![0.0; d];
            if d >= c {
                m[k] = separation / std::f64::consts::SQRT_2;
            } else {
                m[0] = k as f64 * separation;
            }
            m
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n_per_class * c * d);
    let mut labels = Vec::with_capacity(n_per_class * c);
    for (k, mean) in means.iter().enumerate() {
        for _ in 0..n_per_class {
            for &mu in mean {
                let e: f64 = StandardNormal.sample(&mut rng);
                points.push(mu + e);
            }
            labels.push(k as Label + 1);
        }
    }
    Dataset::new(points, d, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn fix_a() -> Dataset {
        Dataset::from_rows(&[vec![-1.0], vec![3.0]], vec![1, 2]).unwrap()
    }

    fn fix_c() -> Dataset {
        Dataset::from_rows(
            &[vec![-0.5], vec![-1.0], vec![2.0], vec![3.0], vec![4.0]],
            vec![1, 1, 2, 2, 2],
        )
        .unwrap()
    }

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_fix_a_and_b() {
        let f = write_tmp("1,-1\n2,3\n");
        let ds = load_csv(f.path(), false).unwrap();
        assert_eq!(ds, fix_a());
        assert_eq!((ds.len(), ds.dim(), ds.class_count()), (2, 1, 2));

        let f = write_tmp("label,x,y\n1,1,1\n2,2,0\n");
        let ds = load_csv(f.path(), true).unwrap();
        assert_eq!(ds.point(0), &[1.0, 1.0]);
        assert_eq!(ds.point(1), &[2.0, 0.0]);
    }

    #[test]
    fn load_reports_bad_field() {
        let f = write_tmp("1,1,x\n");
        match load_csv(f.path(), false) {
            Err(Error::Parse { row, message }) => {
                assert_eq!(row, 1);
                assert!(message.contains("'x'"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn load_reports_ragged_and_single_class() {
        let f = write_tmp("1,1,1\n2,2\n");
        assert!(matches!(
            load_csv(f.path(), false),
            Err(Error::RaggedRow { row: 2, expected: 2, found: 1 })
        ));
        let f = write_tmp("1,1\n1,2\n");
        assert!(matches!(load_csv(f.path(), false), Err(Error::InvalidDataset(_))));
        let f = write_tmp("0,1\n1,2\n");
        assert!(matches!(load_csv(f.path(), false), Err(Error::Parse { row: 1, .. })));
        assert!(matches!(
            load_csv("/nonexistent/x.csv", false),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn synthetic_shapes_and_determinism() {
        let ds = generate_synthetic(1, 1, 2, 4.0, 0).unwrap();
        assert_eq!((ds.len(), ds.dim(), ds.class_count()), (2, 1, 2));
        let a = generate_synthetic(5, 2, 2, 3.0, 7).unwrap();
        let b = generate_synthetic(5, 2, 2, 3.0, 7).unwrap();
        assert_eq!(a, b);
        let ds = generate_synthetic(100, 3, 3, 2.0, 1).unwrap();
        assert_eq!((ds.len(), ds.dim(), ds.class_count()), (300, 3, 3));
        assert_eq!(ds.present_labels(), vec![1, 2, 3]);
    }

    #[test]
    fn predict_fixtures() {
        let tie = TieRule::default();
        assert_eq!(knn_predict(&fix_a(), &[0.0], 1, &tie, None).unwrap(), 1);
        assert_eq!(knn_predict(&fix_c(), &[0.0], 3, &tie, Some(1)).unwrap(), 1);
        // exact bisection tie resolves to the non-reference class
        assert_eq!(knn_predict(&fix_a(), &[1.0], 1, &tie, Some(1)).unwrap(), 2);
        // without a reference the lower index wins
        assert_eq!(knn_predict(&fix_a(), &[1.0], 1, &tie, None).unwrap(), 1);
    }

    #[test]
    fn predict_rejects_bad_k() {
        let tie = TieRule::default();
        assert!(matches!(
            knn_predict(&fix_c(), &[0.0], 2, &tie, None),
            Err(Error::InvalidK { .. })
        ));
        assert!(matches!(
            knn_predict(&fix_c(), &[0.0], 7, &tie, None),
            Err(Error::InvalidK { .. })
        ));
    }

    #[test]
    fn tie_group_straddling_k() {
        // z=1: q1 at distance 1, p1 at 1.5, then p2 and q2 both at 2.
        let tie = TieRule::default();
        assert_eq!(knn_predict(&fix_c(), &[1.0], 3, &tie, Some(1)).unwrap(), 2);
        assert_eq!(knn_predict(&fix_c(), &[1.0], 3, &tie, None).unwrap(), 1);
    }

    #[test]
    fn multiclass_vote_tie() {
        let ds = Dataset::from_rows(&[vec![0.0], vec![1.0], vec![-2.0]], vec![1, 2, 3]).unwrap();
        let tie = TieRule::default();
        // three-way vote tie: best-ranked class without reference, rival with one
        assert_eq!(knn_predict(&ds, &[0.1], 3, &tie, None).unwrap(), 1);
        assert_eq!(knn_predict(&ds, &[0.1], 3, &tie, Some(1)).unwrap(), 2);
    }

    #[test]
    fn nearest_fixtures() {
        assert_eq!(k_nearest(&fix_c(), &[0.0], 3).unwrap(), vec![0, 1, 2]);
        assert_eq!(k_nearest(&fix_a(), &[0.0], 2).unwrap(), vec![0, 1]);
        let fix_b = Dataset::from_rows(&[vec![1.0, 1.0], vec![2.0, 0.0]], vec![1, 2]).unwrap();
        assert_eq!(k_nearest(&fix_b, &[0.0, 0.0], 1).unwrap(), vec![0]);
        assert!(k_nearest(&fix_a(), &[0.0], 3).is_err());
    }

    #[test]
    fn means() {
        let m = class_means(&fix_c()).unwrap();
        assert_eq!(m, vec![vec![-0.75], vec![3.0]]);
        assert_eq!(class_means(&fix_a()).unwrap(), vec![vec![-1.0], vec![3.0]]);
        let gap = Dataset::from_rows(&[vec![0.0], vec![1.0]], vec![1, 3]).unwrap();
        assert!(matches!(class_means(&gap), Err(Error::EmptyClass(2))));
    }
}
