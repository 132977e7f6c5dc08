//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[inline]
pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

/// Minimum Euclidean distance from `x` to any row of `set` (infinity if empty).
pub fn min_dist(x: &[f64], set: &[Vec<f64>]) -> f64 {
    set.iter()
        .map(|p| dist2(x, p))
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

/// Smallest pairwise distance between rows.
pub fn min_pairwise_dist(points: &[Vec<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            best = best.min(dist2(&points[i], &points[j]));
        }
    }
    best.sqrt()
}

pub fn to_matrix(rows: &[Vec<f64>], cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j])
}

fn norm1(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves `A x = b` for a square symmetric `A` by LU with partial pivoting
/// followed by one step of iterative refinement.
///
/// Returns the solution together with a 1-norm condition estimate
/// (Hager's estimator, which only needs solves with `A` since `A = Aᵀ`).
pub fn solve_symmetric(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<(DVector<f64>, f64)> {
    let n = a.nrows();
    let lu = a.clone().lu();
    let mut x = lu
        .solve(b)
        .ok_or_else(|| Error::numerical("singular system"))?;
    let r = b - a * &x;
    if let Some(dx) = lu.solve(&r) {
        x += dx;
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::numerical("non-finite solution"));
    }

    // Hager / Higham 1-norm estimate of ||A^-1||
    let mut v = DVector::from_element(n, 1.0 / n as f64);
    let mut inv_norm = 0.0;
    for _ in 0..5 {
        let y = match lu.solve(&v) {
            Some(y) => y,
            None => return Err(Error::numerical("singular system")),
        };
        inv_norm = y.iter().map(|t| t.abs()).sum::<f64>();
        let xi = y.map(|t| if t >= 0.0 { 1.0 } else { -1.0 });
        let z = match lu.solve(&xi) {
            Some(z) => z,
            None => break,
        };
        let (jmax, zmax) = z
            .iter()
            .enumerate()
            .map(|(j, t)| (j, t.abs()))
            .fold((0, f64::NEG_INFINITY), |acc, c| if c.1 > acc.1 { c } else { acc });
        if zmax <= z.dot(&v) {
            break;
        }
        v = DVector::zeros(n);
        v[jmax] = 1.0;
    }
    Ok((x, norm1(a) * inv_norm))
}

/// Minimum-norm least-squares solution of `A x ≈ b` via SVD.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let (m, n) = a.shape();
    if n == 0 {
        return DVector::zeros(0);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * f64::EPSILON * m.max(n) as f64;
    svd.solve(b, tol).expect("SVD computed with U and V")
}

/// Numerical rank via singular values.
pub fn rank(a: &DMatrix<f64>) -> usize {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return 0;
    }
    let sv = a.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let tol = smax * 1e-10 * m.max(n) as f64;
    sv.iter().filter(|&&s| s > tol).count()
}

/// Whether the points affinely span their dimension, i.e. `[1, X]` has full
/// column rank.
pub fn affine_full_rank(points: &[Vec<f64>], d: usize) -> bool {
    if points.len() < d + 1 {
        return false;
    }
    let p = DMatrix::from_fn(points.len(), d + 1, |i, j| if j == 0 { 1.0 } else { points[i][j - 1] });
    rank(&p) == d + 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn condition_estimate_matches_exact() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 1e-4]);
        let b = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let (x, cond) = solve_symmetric(&a, &b).unwrap();
        assert!((&a * &x - &b).norm() < 1e-10);
        let inv = a.clone().try_inverse().unwrap();
        let exact = norm1(&a) * norm1(&inv);
        assert!(cond <= exact * (1.0 + 1e-9));
        assert!(cond >= exact / 3.0);
    }

    #[test]
    fn singular_is_reported() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let b = DVector::from_vec(vec![1.0, 1.0]);
        match solve_symmetric(&a, &b) {
            Err(_) => {}
            Ok((_, cond)) => assert!(cond > 1e12),
        }
    }

    #[test]
    fn min_norm_least_squares() {
        // duplicate column: minimum-norm solution splits the weight evenly
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 3.0, 3.0]);
        let b = DVector::from_vec(vec![2.0, 4.0, 6.0]);
        let x = lstsq(&a, &b);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn affine_rank() {
        let line = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]];
        assert!(!affine_full_rank(&line, 2));
        let tri = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        assert!(affine_full_rank(&tri, 2));
    }
}
