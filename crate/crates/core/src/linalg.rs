//! Small dense helpers on `&[f64]` slices.

#[inline]
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Squared euclidean distance, computed from the difference to avoid cancellation.
#[inline]
pub fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let t = a - b;
            t * t
        })
        .sum()
}

#[inline]
pub fn dist(x: &[f64], y: &[f64]) -> f64 {
    sq_dist(x, y).sqrt()
}

#[inline]
pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

/// y += a * x
#[inline]
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn norm_l1(x: &[f64]) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

/// Solves the square system `mat * x = rhs` (row-major, `n x n`) by Gaussian
/// elimination with partial pivoting. Returns `None` when a pivot falls below
/// `pivot_tol` relative to the largest entry of the matrix.
pub fn solve_dense(mat: &[f64], rhs: &[f64], pivot_tol: f64) -> Option<Vec<f64>> {
    let n = rhs.len();
    debug_assert_eq!(mat.len(), n * n);
    if n == 0 {
        return Some(Vec::new());
    }
    let mut a = mat.to_vec();
    let mut x = rhs.to_vec();
    let scale = norm_inf(&a).max(f64::MIN_POSITIVE);
    for col in 0..n {
        let (piv, best) = (col..n)
            .map(|r| (r, a[r * n + col].abs()))
            .fold((col, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if best <= pivot_tol * scale {
            return None;
        }
        if piv != col {
            for c in 0..n {
                a.swap(col * n + c, piv * n + c);
            }
            x.swap(col, piv);
        }
        let p = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / p;
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r * n + c] -= f * a[col * n + c];
            }
            x[r] -= f * x[col];
        }
    }
    for r in (0..n).rev() {
        let mut s = x[r];
        for c in r + 1..n {
            s -= a[r * n + c] * x[c];
        }
        x[r] = s / a[r * n + r];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let m = [2.0, 1.0, 1.0, 3.0];
        let x = solve_dense(&m, &[3.0, 5.0], 1e-12).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12);
        assert!((x[1] - 1.4).abs() < 1e-12);
    }

    #[test]
    fn singular_is_none() {
        let m = [1.0, 2.0, 2.0, 4.0];
        assert!(solve_dense(&m, &[1.0, 2.0], 1e-12).is_none());
    }

    #[test]
    fn distances() {
        assert_eq!(sq_dist(&[0.0, 0.0], &[3.0, 4.0]), 25.0);
        assert_eq!(dist(&[0.0, 0.0], &[3.0, 4.0]), 5.0);
        assert_eq!(norm_l1(&[1.0, -2.0]), 3.0);
        assert_eq!(norm_inf(&[1.0, -2.0]), 2.0);
    }
}
