//! Multivariate adaptive regression splines.
//!
//! The forward pass starts from the intercept and greedily adds the pair of
//! mirrored hinges `B(x)·max(0, x_v − t)`, `B(x)·max(0, t − x_v)` that most
//! reduces the residual sum of squares, where `B` is an existing term and `t`
//! a data value of `x_v`. It stops at `max_terms` or when the best split no
//! longer lowers the generalized cross-validation score. The backward pass
//! then deletes terms one at a time and keeps the subset with the lowest GCV.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::lstsq;

/// Knot candidates per (parent term, variable) are thinned to this many.
const MAX_KNOTS: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hinge {
    pub var: usize,
    pub knot: f64,
    /// `+1` for `max(0, x − t)`, `−1` for `max(0, t − x)`.
    pub sign: f64,
}

impl Hinge {
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.sign * (x[self.var] - self.knot)).max(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarsOptions {
    /// Cap on basis functions in the forward pass, intercept included.
    pub max_terms: usize,
    pub max_interaction: usize,
    /// GCV cost per knot.
    pub penalty: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarsModel {
    pub dim: usize,
    /// Basis terms as hinge products; the empty product is the intercept.
    pub terms: Vec<Vec<Hinge>>,
    pub coef: Vec<f64>,
    pub gcv: f64,
    /// Basis and GCV of the model at the end of the forward pass.
    pub forward_terms: Vec<Vec<Hinge>>,
    pub forward_gcv: f64,
}

fn term_value(term: &[Hinge], x: &[f64]) -> f64 {
    term.iter().map(|h| h.eval(x)).product()
}

impl MarsModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn predict_one(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .zip(&self.coef)
            .map(|(t, c)| c * term_value(t, x))
            .sum()
    }

    /// Number of hinge terms, intercept excluded.
    pub fn hinge_terms(&self) -> usize {
        self.terms.iter().filter(|t| !t.is_empty()).count()
    }
}

/// Generalized cross-validation score for `m` basis functions.
pub fn gcv(rss: f64, n: usize, m: usize, penalty: f64) -> f64 {
    let n = n as f64;
    let c = m as f64 + penalty * (m as f64 - 1.0) / 2.0;
    if c >= n {
        return f64::INFINITY;
    }
    (rss / n) / (1.0 - c / n).powi(2)
}

fn column(term: &[Hinge], points: &[Vec<f64>]) -> Vec<f64> {
    points.iter().map(|p| term_value(term, p)).collect()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Orthogonalizes `c` against the orthonormal `q` (twice, for stability) and
/// returns the unit residual direction, or `None` if `c` lies in their span.
fn orthonormalize(c: &[f64], q: &[Vec<f64>]) -> Option<Vec<f64>> {
    let norm0 = dot(c, c).sqrt();
    if norm0 == 0.0 {
        return None;
    }
    let mut u = c.to_vec();
    for _ in 0..2 {
        for v in q {
            let p = dot(v, &u);
            axpy(-p, v, &mut u);
        }
    }
    let nu = dot(&u, &u).sqrt();
    if nu <= 1e-10 * norm0 {
        None
    } else {
        u.iter_mut().for_each(|x| *x /= nu);
        Some(u)
    }
}

fn knot_candidates(points: &[Vec<f64>], parent: &[f64], var: usize) -> Vec<f64> {
    let mut vals: Vec<f64> = points
        .iter()
        .zip(parent)
        .filter(|(_, &b)| b > 0.0)
        .map(|(p, _)| p[var])
        .collect();
    vals.sort_by(|a, b| a.total_cmp(b));
    vals.dedup();
    if vals.len() > MAX_KNOTS {
        let k = vals.len();
        vals = (0..MAX_KNOTS)
            .map(|i| vals[i * (k - 1) / (MAX_KNOTS - 1)])
            .collect();
        vals.dedup();
    }
    vals
}

/// Below this squared ratio of residual to original column norm a
/// candidate column counts as lying in the current span.
const SPAN_TOL: f64 = 1e-12;

struct Candidate {
    reduction: f64,
    hinges: Vec<Vec<Hinge>>,
}

/// Best RSS reduction from adding the mirrored pair `c1`, `c2` (or only one
/// of them when `room == 1`), given the orthonormal basis `q` and a residual
/// orthogonal to it. `n1`, `n2` are the squared column norms, `r1`, `r2`
/// their products with the residual and `a`, `b` their projections on `q`.
/// Returns the reduction and which hinges to add.
fn score_pair(n1: f64, n2: f64, r1: f64, r2: f64, a: &[f64], b: &[f64], room: usize) -> Option<(f64, [bool; 2])> {
    // the two hinges have disjoint support, so c1·c2 = 0
    let (mut s1, mut s2, mut s12) = (n1, n2, 0.0);
    for (x, y) in a.iter().zip(b) {
        s1 -= x * x;
        s2 -= y * y;
        s12 -= x * y;
    }
    let ok1 = n1 > 0.0 && s1 > SPAN_TOL * n1;
    let ok2 = n2 > 0.0 && s2 > SPAN_TOL * n2;
    let g1 = if ok1 { r1 * r1 / s1 } else { 0.0 };
    let g2 = if ok2 { r2 * r2 / s2 } else { 0.0 };
    let single = match (ok1, ok2) {
        (false, false) => return None,
        (true, false) => (g1, [true, false]),
        (false, true) => (g2, [false, true]),
        (true, true) => {
            if g2 > g1 {
                (g2, [false, true])
            } else {
                (g1, [true, false])
            }
        }
    };
    if room < 2 || !(ok1 && ok2) {
        return Some(single);
    }
    let det = s1 * s2 - s12 * s12;
    if det <= SPAN_TOL * s1 * s2 {
        return Some(single);
    }
    let both = (s2 * r1 * r1 - 2.0 * s12 * r1 * r2 + s1 * r2 * r2) / det;
    Some((both.max(single.0), [true, true]))
}

/// Scores every knot of `var` under the parent column `pcol` in one sweep.
///
/// With the points sorted by `x_v`, every quantity `score_pair` needs is a
/// linear combination of running sums over the points right of the knot,
/// so each knot costs O(|q|) instead of O(n·|q|). Calls `visit(knot,
/// reduction, keep)` for each scorable knot.
fn sweep_knots(
    points: &[Vec<f64>],
    pcol: &[f64],
    var: usize,
    q: &[Vec<f64>],
    resid: &[f64],
    room: usize,
    mut visit: impl FnMut(f64, f64, [bool; 2]),
) {
    let knots = knot_candidates(points, pcol, var);
    if knots.is_empty() {
        return;
    }
    let mut idx: Vec<usize> = (0..points.len()).filter(|&i| pcol[i] != 0.0).collect();
    let shift = idx.iter().map(|&i| points[i][var]).sum::<f64>() / idx.len() as f64;
    idx.sort_by(|&i, &j| points[j][var].total_cmp(&points[i][var]));
    let m = q.len();
    // rows 0..m are the basis vectors, row m the residual
    let vec_at = |k: usize, i: usize| if k < m { q[k][i] } else { resid[i] };
    let (mut sa, mut sb) = (vec![0.0; m + 1], vec![0.0; m + 1]);
    let (mut ta, mut tb) = (vec![0.0; m + 1], vec![0.0; m + 1]);
    let mut sp = [0.0; 3];
    let mut tp = [0.0; 3];
    for &i in &idx {
        let (p, x) = (pcol[i], points[i][var] - shift);
        for k in 0..=m {
            let v = vec_at(k, i) * p;
            ta[k] += v * x;
            tb[k] += v;
        }
        let w = p * p;
        tp[0] += w;
        tp[1] += w * x;
        tp[2] += w * x * x;
    }
    let (mut a, mut b) = (vec![0.0; m], vec![0.0; m]);
    let mut next = 0;
    for &knot in knots.iter().rev() {
        let t = knot - shift;
        while next < idx.len() && points[idx[next]][var] > knot {
            let i = idx[next];
            let (p, x) = (pcol[i], points[i][var] - shift);
            for k in 0..=m {
                let v = vec_at(k, i) * p;
                sa[k] += v * x;
                sb[k] += v;
            }
            let w = p * p;
            sp[0] += w;
            sp[1] += w * x;
            sp[2] += w * x * x;
            next += 1;
        }
        // c1 = p·max(0, x − t) lives right of the knot, c2 = p·max(0, t − x) left of it
        for k in 0..m {
            a[k] = sa[k] - t * sb[k];
            b[k] = t * (tb[k] - sb[k]) - (ta[k] - sa[k]);
        }
        let r1 = sa[m] - t * sb[m];
        let r2 = t * (tb[m] - sb[m]) - (ta[m] - sa[m]);
        let n1 = (sp[2] - 2.0 * t * sp[1] + t * t * sp[0]).max(0.0);
        let (l0, l1, l2) = (tp[0] - sp[0], tp[1] - sp[1], tp[2] - sp[2]);
        let n2 = (l2 - 2.0 * t * l1 + t * t * l0).max(0.0);
        if let Some((red, keep)) = score_pair(n1, n2, r1, r2, &a, &b, room) {
            visit(knot, red, keep);
        }
    }
}

fn forward_pass(points: &[Vec<f64>], y: &DVector<f64>, opts: &MarsOptions) -> Vec<Vec<Hinge>> {
    let n = points.len();
    let d = points[0].len();
    let mut terms: Vec<Vec<Hinge>> = vec![vec![]];
    let mut cols: Vec<Vec<f64>> = vec![vec![1.0; n]];
    let mut q: Vec<Vec<f64>> = vec![vec![1.0 / (n as f64).sqrt(); n]];
    let mean = y.mean();
    let mut resid: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let ynorm2 = y.norm_squared();
    let mut rss = dot(&resid, &resid);
    let mut current_gcv = gcv(rss, n, 1, opts.penalty);

    while terms.len() < opts.max_terms {
        if rss <= 1e-20 * (1.0 + ynorm2) || rss <= 1e-24 {
            break;
        }
        let room = opts.max_terms - terms.len();
        let mut best: Option<Candidate> = None;
        for (pi, parent) in terms.iter().enumerate() {
            if parent.len() >= opts.max_interaction {
                continue;
            }
            let pcol = &cols[pi];
            for var in 0..d {
                if parent.iter().any(|h| h.var == var) {
                    continue;
                }
                sweep_knots(points, pcol, var, &q, &resid, room, |knot, reduction, keep| {
                    if best.as_ref().is_none_or(|b| reduction > b.reduction) {
                        let hinges = [1.0, -1.0]
                            .into_iter()
                            .zip(keep)
                            .filter(|(_, k)| *k)
                            .map(|(sign, _)| {
                                let mut t = parent.clone();
                                t.push(Hinge { var, knot, sign });
                                t
                            })
                            .collect();
                        best = Some(Candidate { reduction, hinges });
                    }
                });
            }
        }
        let Some(cand) = best else { break };
        // recompute the winner with a stable orthogonalization
        let mut added = vec![];
        let mut trial_resid = resid.clone();
        let mut trial_q = q.clone();
        for t in cand.hinges {
            let c = column(&t, points);
            if let Some(u) = orthonormalize(&c, &trial_q) {
                let p = dot(&u, &trial_resid);
                axpy(-p, &u, &mut trial_resid);
                trial_q.push(u);
                added.push((t, c));
            }
        }
        if added.is_empty() {
            break;
        }
        let new_rss = dot(&trial_resid, &trial_resid);
        let new_gcv = gcv(new_rss, n, terms.len() + added.len(), opts.penalty);
        if !(new_gcv < current_gcv) {
            break;
        }
        for (t, c) in added {
            terms.push(t);
            cols.push(c);
        }
        q = trial_q;
        resid = trial_resid;
        rss = new_rss;
        current_gcv = new_gcv;
    }
    terms
}

/// Least squares on a subset of basis columns; returns coefficients and RSS.
fn subset_fit(b: &DMatrix<f64>, y: &DVector<f64>, subset: &[usize]) -> (DVector<f64>, f64) {
    let sub = b.select_columns(subset.iter());
    let beta = lstsq(&sub, y);
    let rss = (y - &sub * &beta).norm_squared();
    (beta, rss)
}

/// Cheaper subset fit for the backward search: Cholesky on the Gram matrix
/// with a tiny ridge, residual computed directly.
fn subset_rss_fast(b: &DMatrix<f64>, gram: &DMatrix<f64>, bty: &DVector<f64>, y: &DVector<f64>, subset: &[usize]) -> f64 {
    let k = subset.len();
    let mut g = DMatrix::from_fn(k, k, |i, j| gram[(subset[i], subset[j])]);
    let scale = (0..k).map(|i| g[(i, i)]).fold(0.0, f64::max);
    for i in 0..k {
        g[(i, i)] += 1e-12 * scale.max(1e-300);
    }
    let rhs = DVector::from_fn(k, |i, _| bty[subset[i]]);
    match g.cholesky() {
        Some(ch) => {
            let beta = ch.solve(&rhs);
            let mut fitted = DVector::zeros(y.len());
            for (c, &j) in subset.iter().enumerate() {
                fitted.axpy(beta[c], &b.column(j).into_owned(), 1.0);
            }
            (y - fitted).norm_squared()
        }
        None => subset_fit(b, y, subset).1,
    }
}

/// Fits a MARS model.
pub fn fit_mars(points: &[Vec<f64>], values: &[f64], opts: &MarsOptions) -> Result<MarsModel> {
    let n = points.len();
    if n == 0 {
        return Err(Error::numerical("MARS fit needs data"));
    }
    if values.len() != n {
        return Err(Error::Dimension { expected: n, got: values.len() });
    }
    let d = points[0].len();
    if let Some(p) = points.iter().find(|p| p.len() != d) {
        return Err(Error::Dimension { expected: d, got: p.len() });
    }
    let y = DVector::from_column_slice(values);
    let forward = forward_pass(points, &y, opts);
    let m = forward.len();
    let b = DMatrix::from_fn(n, m, |i, j| term_value(&forward[j], &points[i]));

    let all: Vec<usize> = (0..m).collect();
    let (full_beta, full_rss) = subset_fit(&b, &y, &all);
    let forward_gcv = gcv(full_rss, n, m, opts.penalty);

    // backward elimination, the intercept always stays
    let gram = b.transpose() * &b;
    let bty = b.transpose() * &y;
    let mut current = all.clone();
    let mut best_subset = all.clone();
    let mut best_gcv = forward_gcv;
    while current.len() > 1 {
        let mut step: Option<(f64, usize)> = None;
        for pos in 1..current.len() {
            let mut trial = current.clone();
            trial.remove(pos);
            let rss = subset_rss_fast(&b, &gram, &bty, &y, &trial);
            let g = gcv(rss, n, trial.len(), opts.penalty);
            if step.is_none_or(|(bg, _)| g < bg) {
                step = Some((g, pos));
            }
        }
        let (g, pos) = step.expect("at least one removable term");
        current.remove(pos);
        if g < best_gcv {
            best_gcv = g;
            best_subset = current.clone();
        }
    }

    let (terms, coef, gcv_final) = if best_subset.len() == m {
        (forward.clone(), full_beta.iter().copied().collect(), forward_gcv)
    } else {
        let (beta, rss) = subset_fit(&b, &y, &best_subset);
        let g = gcv(rss, n, best_subset.len(), opts.penalty);
        if g <= forward_gcv {
            (
                best_subset.iter().map(|&j| forward[j].clone()).collect(),
                beta.iter().copied().collect(),
                g,
            )
        } else {
            (forward.clone(), full_beta.iter().copied().collect(), forward_gcv)
        }
    };

    Ok(MarsModel {
        dim: d,
        terms,
        coef,
        gcv: gcv_final,
        forward_terms: forward,
        forward_gcv,
    })
}
