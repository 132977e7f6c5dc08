//! Radial basis function interpolation with a linear polynomial tail.
//!
//! The interpolant is `s(x) = Σ λ_i φ(‖x − x_i‖) + c_0 + Σ c_j x_j`. The
//! coefficients solve the augmented system
//!
//! ```text
//! [ Φ  P ] [λ]   [f]
//! [ Pᵀ 0 ] [c] = [0]
//! ```
//!
//! where `Φ_ij = φ(‖x_i − x_j‖)` and `P` holds the rows `[1, x_i]`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{affine_full_rank, dist, solve_symmetric};

/// Systems with a condition estimate above this are rejected.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// φ(r) = r³
    Cubic,
    /// φ(r) = r² log r, φ(0) = 0
    ThinPlate,
    /// φ(r) = r
    Linear,
}

impl Kernel {
    #[inline]
    pub fn phi(self, r: f64) -> f64 {
        match self {
            Kernel::Cubic => r * r * r,
            Kernel::ThinPlate => {
                if r <= 0.0 {
                    0.0
                } else {
                    r * r * r.ln()
                }
            }
            Kernel::Linear => r,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RbfModel {
    pub kernel: Kernel,
    pub centers: Vec<Vec<f64>>,
    pub lambda: Vec<f64>,
    /// `[c_0, c_1, …, c_d]`: constant then one slope per coordinate.
    pub tail: Vec<f64>,
}

impl RbfModel {
    pub fn dim(&self) -> usize {
        self.tail.len() - 1
    }

    pub fn predict_one(&self, x: &[f64]) -> f64 {
        let mut s = self.tail[0];
        for (j, v) in x.iter().enumerate() {
            s += self.tail[j + 1] * v;
        }
        for (c, l) in self.centers.iter().zip(&self.lambda) {
            s += l * self.kernel.phi(dist(x, c));
        }
        s
    }
}

/// Fits an interpolating RBF model.
pub fn fit_rbf(points: &[Vec<f64>], values: &[f64], kernel: Kernel) -> Result<RbfModel> {
    let n = points.len();
    if n == 0 {
        return Err(Error::numerical("RBF fit needs at least one point"));
    }
    let d = points[0].len();
    if values.len() != n {
        return Err(Error::Dimension { expected: n, got: values.len() });
    }
    if let Some(p) = points.iter().find(|p| p.len() != d) {
        return Err(Error::Dimension { expected: d, got: p.len() });
    }
    if n < d + 1 {
        return Err(Error::numerical(format!(
            "RBF fit in {d} dimensions needs at least {} points, got {n}",
            d + 1
        )));
    }
    if !affine_full_rank(points, d) {
        return Err(Error::numerical(format!(
            "RBF tail is rank deficient: the {n} points do not span {d} dimensions"
        )));
    }

    let m = n + d + 1;
    let mut a = DMatrix::zeros(m, m);
    for i in 0..n {
        for j in i + 1..n {
            let v = kernel.phi(dist(&points[i], &points[j]));
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
        a[(i, i)] = kernel.phi(0.0);
        a[(i, n)] = 1.0;
        a[(n, i)] = 1.0;
        for k in 0..d {
            a[(i, n + 1 + k)] = points[i][k];
            a[(n + 1 + k, i)] = points[i][k];
        }
    }
    let mut rhs = DVector::zeros(m);
    for i in 0..n {
        rhs[i] = values[i];
    }
    let (sol, cond) = solve_symmetric(&a, &rhs).map_err(|e| {
        Error::numerical(format!("RBF system: {e}; points: {points:?}"))
    })?;
    if cond > MAX_CONDITION {
        return Err(Error::numerical(format!(
            "RBF system ill-conditioned (condition estimate {cond:.3e}); points: {points:?}"
        )));
    }
    Ok(RbfModel {
        kernel,
        centers: points.to_vec(),
        lambda: sol.rows(0, n).iter().copied().collect(),
        tail: sol.rows(n, d + 1).iter().copied().collect(),
    })
}
