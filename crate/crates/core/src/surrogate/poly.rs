use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::lstsq;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PolyVariant {
    /// `1, x_i`
    Lin,
    /// full quadratic: `1, x_i, x_i x_j (i <= j)`
    Quad,
    /// reduced quadratic: `1, x_i, x_i²`
    Quadr,
    /// full cubic
    Cub,
    /// reduced cubic: `1, x_i, x_i², x_i³`
    Cubr,
}

/// Monomials as multisets of coordinate indices; `[]` is the constant.
pub fn poly_basis(variant: PolyVariant, d: usize) -> Vec<Vec<usize>> {
    let mut basis = vec![vec![]];
    basis.extend((0..d).map(|i| vec![i]));
    match variant {
        PolyVariant::Lin => {}
        PolyVariant::Quadr => basis.extend((0..d).map(|i| vec![i, i])),
        PolyVariant::Cubr => {
            basis.extend((0..d).map(|i| vec![i, i]));
            basis.extend((0..d).map(|i| vec![i, i, i]));
        }
        PolyVariant::Quad | PolyVariant::Cub => {
            for i in 0..d {
                for j in i..d {
                    basis.push(vec![i, j]);
                }
            }
            if variant == PolyVariant::Cub {
                for i in 0..d {
                    for j in i..d {
                        for k in j..d {
                            basis.push(vec![i, j, k]);
                        }
                    }
                }
            }
        }
    }
    basis
}

#[inline]
fn monomial(m: &[usize], x: &[f64]) -> f64 {
    m.iter().map(|&i| x[i]).product()
}

/// Least-squares regression polynomial.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolyModel {
    pub variant: PolyVariant,
    pub dim: usize,
    pub basis: Vec<Vec<usize>>,
    pub beta: Vec<f64>,
}

impl PolyModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn predict_one(&self, x: &[f64]) -> f64 {
        self.basis
            .iter()
            .zip(&self.beta)
            .map(|(m, b)| b * monomial(m, x))
            .sum()
    }

    /// Regression matrix of the model's basis at `points`.
    pub fn design_matrix(&self, points: &[Vec<f64>]) -> DMatrix<f64> {
        DMatrix::from_fn(points.len(), self.basis.len(), |i, j| monomial(&self.basis[j], &points[i]))
    }
}

/// Minimum-norm least-squares fit of a regression polynomial.
pub fn fit_poly(points: &[Vec<f64>], values: &[f64], variant: PolyVariant) -> Result<PolyModel> {
    let n = points.len();
    if values.len() != n {
        return Err(Error::Dimension { expected: n, got: values.len() });
    }
    let d = points.first().map_or(0, |p| p.len());
    if let Some(p) = points.iter().find(|p| p.len() != d) {
        return Err(Error::Dimension { expected: d, got: p.len() });
    }
    let mut model = PolyModel {
        variant,
        dim: d,
        basis: poly_basis(variant, d),
        beta: vec![],
    };
    let a = model.design_matrix(points);
    let beta = lstsq(&a, &DVector::from_column_slice(values));
    model.beta = beta.iter().copied().collect();
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_sizes() {
        let binom = |n: usize, k: usize| (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1));
        for d in 1..7 {
            assert_eq!(poly_basis(PolyVariant::Lin, d).len(), d + 1);
            assert_eq!(poly_basis(PolyVariant::Quad, d).len(), (d + 1) * (d + 2) / 2);
            assert_eq!(poly_basis(PolyVariant::Quadr, d).len(), 2 * d + 1);
            assert_eq!(poly_basis(PolyVariant::Cub, d).len(), binom(d + 3, 3));
            assert_eq!(poly_basis(PolyVariant::Cubr, d).len(), 3 * d + 1);
        }
        assert_eq!(poly_basis(PolyVariant::Quad, 3).len(), 10);
    }

    #[test]
    fn recovers_square() {
        let pts: Vec<Vec<f64>> = [-2.0, -1.0, 0.0, 1.5, 3.0].iter().map(|&x| vec![x]).collect();
        let vals: Vec<f64> = pts.iter().map(|p| p[0] * p[0]).collect();
        let m = fit_poly(&pts, &vals, PolyVariant::Quadr).unwrap();
        for (b, want) in m.beta.iter().zip([0.0, 0.0, 1.0]) {
            assert!((b - want).abs() < 1e-8);
        }
    }

    #[test]
    fn line_through_two_points() {
        let pts = vec![vec![1.0], vec![3.0]];
        let m = fit_poly(&pts, &[2.0, 6.0], PolyVariant::Lin).unwrap();
        assert!((m.predict_one(&[1.0]) - 2.0).abs() < 1e-10);
        assert!((m.predict_one(&[3.0]) - 6.0).abs() < 1e-10);
        assert!((m.predict_one(&[2.0]) - 4.0).abs() < 1e-10);
    }

    #[test]
    fn constant_beta() {
        let m = PolyModel {
            variant: PolyVariant::Lin,
            dim: 3,
            basis: poly_basis(PolyVariant::Lin, 3),
            beta: vec![1.0, 0.0, 0.0, 0.0],
        };
        assert_eq!(m.predict_one(&[5.0, -2.0, 7.0]), 1.0);
    }

    #[test]
    fn rank_deficient_does_not_fail() {
        // all points on a line: the quadratic basis is rank deficient
        let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, i as f64]).collect();
        let vals: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let m = fit_poly(&pts, &vals, PolyVariant::Quad).unwrap();
        for (p, v) in pts.iter().zip(&vals) {
            assert!((m.predict_one(p) - v).abs() < 1e-8);
        }
    }
}
