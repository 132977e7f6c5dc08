//! Mixture surrogates weighted by Dempster–Shafer evidence.
//!
//! Each member is judged by cross-validation on the training data. Three
//! statistics (correlation between cross-validated predictions and data,
//! RMSE, maximum absolute error) each become a basic probability assignment
//! over the members. The assignments are combined with Dempster's rule and
//! the pignistic probabilities of the result are the mixture weights.

use serde::{Deserialize, Serialize};

use super::{fit, Surrogate, SurrogateKind};
use crate::error::{Error, Result};

/// Training sets larger than this use 10-fold instead of leave-one-out.
const LOO_LIMIT: usize = 50;
const FOLDS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberStats {
    pub corr: f64,
    pub rmse: f64,
    pub max_abs: f64,
}

impl MemberStats {
    pub fn from_predictions(pred: &[f64], values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mp = pred.iter().sum::<f64>() / n;
        let mv = values.iter().sum::<f64>() / n;
        let (mut sxy, mut sxx, mut syy, mut sse, mut max_abs) = (0.0, 0.0, 0.0, 0.0, 0.0f64);
        for (p, v) in pred.iter().zip(values) {
            sxy += (p - mp) * (v - mv);
            sxx += (p - mp) * (p - mp);
            syy += (v - mv) * (v - mv);
            sse += (p - v) * (p - v);
            max_abs = max_abs.max((p - v).abs());
        }
        let corr = if sxx > 0.0 && syy > 0.0 {
            sxy / (sxx.sqrt() * syy.sqrt())
        } else {
            f64::NAN
        };
        MemberStats {
            corr,
            rmse: (sse / n).sqrt(),
            max_abs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleMember {
    pub kind: SurrogateKind,
    /// `None` if the member could not be fitted.
    pub model: Option<Surrogate>,
    pub stats: Option<MemberStats>,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub dim: usize,
    pub members: Vec<EnsembleMember>,
}

impl EnsembleModel {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.weight).collect()
    }

    pub fn predict_one(&self, x: &[f64]) -> f64 {
        self.members
            .iter()
            .filter_map(|m| m.model.as_ref().map(|s| m.weight * s.predict_one(x)))
            .sum()
    }
}

/// Cross-validated predictions of a single model kind: leave-one-out up to
/// 50 points, 10-fold (by index modulo 10) above. A fold whose fit fails
/// predicts the mean of its training values.
pub fn cross_validated_predictions(kind: SurrogateKind, points: &[Vec<f64>], values: &[f64]) -> Vec<f64> {
    let n = points.len();
    let folds = if n <= LOO_LIMIT { n } else { FOLDS };
    let mut pred = vec![0.0; n];
    for f in 0..folds {
        let (mut tp, mut tv) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for i in (0..n).filter(|i| i % folds != f) {
            tp.push(points[i].clone());
            tv.push(values[i]);
        }
        let fallback = tv.iter().sum::<f64>() / tv.len().max(1) as f64;
        let model = fit(kind, &tp, &tv).ok();
        for i in (0..n).filter(|i| i % folds == f) {
            pred[i] = model.as_ref().map_or(fallback, |m| m.predict_one(&points[i]));
            if !pred[i].is_finite() {
                pred[i] = fallback;
            }
        }
    }
    pred
}

/// Dempster's rule for two mass functions over the subsets of a frame of
/// `k` members, indexed by bitmask (length `2^k`, entry 0 is the empty set).
/// Returns `None` under total conflict.
pub fn dempster_combine(m1: &[f64], m2: &[f64]) -> Option<Vec<f64>> {
    let size = m1.len();
    let mut out = vec![0.0; size];
    let mut conflict = 0.0;
    for (a, &ma) in m1.iter().enumerate().skip(1) {
        if ma == 0.0 {
            continue;
        }
        for (b, &mb) in m2.iter().enumerate().skip(1) {
            if mb == 0.0 {
                continue;
            }
            let c = a & b;
            if c == 0 {
                conflict += ma * mb;
            } else {
                out[c] += ma * mb;
            }
        }
    }
    let k = 1.0 - conflict;
    if k <= 1e-300 {
        return None;
    }
    out.iter_mut().for_each(|v| *v /= k);
    Some(out)
}

fn pignistic(m: &[f64], k: usize) -> Vec<f64> {
    let mut p = vec![0.0; k];
    for (set, &mass) in m.iter().enumerate().skip(1) {
        let card = (set as u32).count_ones() as f64;
        for (i, pi) in p.iter_mut().enumerate() {
            if set & (1 << i) != 0 {
                *pi += mass / card;
            }
        }
    }
    p
}

/// Mass on singletons proportional to `scores`; all mass on the whole frame
/// when the scores carry no information.
fn singleton_masses(scores: &[f64]) -> Vec<f64> {
    let k = scores.len();
    let mut m = vec![0.0; 1 << k];
    let total: f64 = scores.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        m[(1 << k) - 1] = 1.0;
        return m;
    }
    for (i, s) in scores.iter().enumerate() {
        m[1 << i] = s / total;
    }
    m
}

fn inverse_error_scores(errors: &[f64]) -> Vec<f64> {
    let floor = 1e-12 * errors.iter().copied().fold(0.0, f64::max) + f64::MIN_POSITIVE;
    errors.iter().map(|e| 1.0 / (e.max(0.0) + floor)).collect()
}

/// Mixture weights from member statistics; failed members (`None`) get 0.
pub fn evidence_weights(stats: &[Option<MemberStats>]) -> Result<Vec<f64>> {
    let alive: Vec<usize> = (0..stats.len()).filter(|&i| stats[i].is_some()).collect();
    if alive.is_empty() {
        return Err(Error::numerical("every mixture member failed to fit"));
    }
    let k = alive.len();
    let s: Vec<MemberStats> = alive.iter().map(|&i| stats[i].unwrap()).collect();

    let corr: Vec<f64> = s
        .iter()
        .map(|m| if m.corr.is_finite() { m.corr.max(0.0) } else { 0.0 })
        .collect();
    let rmse = inverse_error_scores(&s.iter().map(|m| m.rmse).collect::<Vec<_>>());
    let maxe = inverse_error_scores(&s.iter().map(|m| m.max_abs).collect::<Vec<_>>());

    let mut combined = singleton_masses(&corr);
    for src in [rmse, maxe] {
        combined = match dempster_combine(&combined, &singleton_masses(&src)) {
            Some(m) => m,
            None => {
                let mut m = vec![0.0; 1 << k];
                m[(1 << k) - 1] = 1.0;
                m
            }
        };
    }
    let bet = pignistic(&combined, k);
    let total: f64 = bet.iter().sum();
    let mut w = vec![0.0; stats.len()];
    for (j, &i) in alive.iter().enumerate() {
        w[i] = if total > 0.0 { bet[j] / total } else { 1.0 / k as f64 };
    }
    Ok(w)
}

/// Fits every member on the full data and weights them by evidence.
pub fn fit_ensemble(points: &[Vec<f64>], values: &[f64], members: &[SurrogateKind]) -> Result<EnsembleModel> {
    if members.is_empty() {
        return Err(Error::config("a mixture needs at least one member"));
    }
    if let Some(m) = members.iter().find(|m| m.is_mixture()) {
        return Err(Error::config(format!("mixture member {m} is itself a mixture")));
    }
    let dim = points.first().map_or(0, |p| p.len());
    let mut out = Vec::with_capacity(members.len());
    for &kind in members {
        match fit(kind, points, values) {
            Ok(model) => {
                let pred = cross_validated_predictions(kind, points, values);
                let stats = MemberStats::from_predictions(&pred, values);
                out.push(EnsembleMember { kind, model: Some(model), stats: Some(stats), weight: 0.0 });
            }
            Err(e) => {
                log::debug!("mixture member {kind} dropped: {e}");
                out.push(EnsembleMember { kind, model: None, stats: None, weight: 0.0 });
            }
        }
    }
    let stats: Vec<Option<MemberStats>> = out.iter().map(|m| m.stats).collect();
    let w = evidence_weights(&stats)?;
    for (m, wi) in out.iter_mut().zip(w) {
        m.weight = wi;
    }
    Ok(EnsembleModel { dim, members: out })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| vec![(i % 4) as f64 / 3.0 + 0.01 * i as f64, (i / 4) as f64 / 3.0])
            .collect()
    }

    #[test]
    fn exact_member_dominates() {
        // a quadratic target is reproduced exactly by the quadratic polynomial
        let pts = grid(16);
        let vals: Vec<f64> = pts.iter().map(|p| 1.0 + p[0] - 2.0 * p[1] + p[0] * p[1] + 3.0 * p[0] * p[0]).collect();
        let m = fit_ensemble(&pts, &vals, &[SurrogateKind::RbfCub, SurrogateKind::PolyQuad]).unwrap();

        // independent oracle: recompute LOO statistics by hand
        for mem in &m.members {
            let mut loo = vec![];
            for i in 0..pts.len() {
                let tp: Vec<Vec<f64>> = pts.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, p)| p.clone()).collect();
                let tv: Vec<f64> = vals.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v).collect();
                loo.push(fit(mem.kind, &tp, &tv).unwrap().predict_one(&pts[i]));
            }
            let st = MemberStats::from_predictions(&loo, &vals);
            assert!((st.rmse - mem.stats.unwrap().rmse).abs() < 1e-12);
        }
        let w = m.weights();
        assert!(w[1] > 0.9, "{w:?}");
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_members_split_evenly() {
        let pts = grid(12);
        let vals: Vec<f64> = pts.iter().map(|p| (3.0 * p[0]).sin() + p[1]).collect();
        let m = fit_ensemble(&pts, &vals, &[SurrogateKind::RbfCub, SurrogateKind::RbfCub]).unwrap();
        assert_eq!(m.weights(), vec![0.5, 0.5]);
        let x = [0.3, 0.7];
        let a = m.members[0].model.as_ref().unwrap().predict_one(&x);
        let b = m.members[1].model.as_ref().unwrap().predict_one(&x);
        assert!((m.predict_one(&x) - 0.5 * (a + b)).abs() < 1e-12);
    }

    #[test]
    fn failed_member_gets_zero_weight() {
        // collinear points: the RBF tail is rank deficient, the polynomial survives
        let pts: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 7.0, i as f64 / 7.0]).collect();
        let vals: Vec<f64> = pts.iter().map(|p| p[0] * p[0]).collect();
        let m = fit_ensemble(&pts, &vals, &[SurrogateKind::RbfCub, SurrogateKind::PolyQuad]).unwrap();
        assert_eq!(m.weights(), vec![0.0, 1.0]);
        assert!(m.members[0].model.is_none());
    }

    #[test]
    fn all_failed_is_error() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]];
        assert!(fit_ensemble(&pts, &[0.0, 1.0, 2.0], &[SurrogateKind::RbfCub, SurrogateKind::RbfTps]).is_err());
    }

    #[test]
    fn dempster_rule_textbook() {
        // frame {a, b}: m1(a)=0.6, m1(ab)=0.4; m2(b)=0.5, m2(ab)=0.5
        let m1 = [0.0, 0.6, 0.0, 0.4];
        let m2 = [0.0, 0.0, 0.5, 0.5];
        let m = dempster_combine(&m1, &m2).unwrap();
        // conflict 0.3
        assert!((m[1] - 0.3 / 0.7).abs() < 1e-15);
        assert!((m[2] - 0.2 / 0.7).abs() < 1e-15);
        assert!((m[3] - 0.2 / 0.7).abs() < 1e-15);
        assert!(dempster_combine(&[0.0, 1.0, 0.0, 0.0], &[0.0, 0.0, 1.0, 0.0]).is_none());
        let p = pignistic(&m, 2);
        assert!((p[0] - (0.3 + 0.1) / 0.7).abs() < 1e-15);
    }

    #[test]
    fn weights_are_convex() {
        let stats = [
            Some(MemberStats { corr: 0.9, rmse: 0.1, max_abs: 0.3 }),
            None,
            Some(MemberStats { corr: -0.2, rmse: 2.0, max_abs: 5.0 }),
        ];
        let w = evidence_weights(&stats).unwrap();
        assert_eq!(w[1], 0.0);
        assert!(w.iter().all(|v| *v >= 0.0));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w[0] > w[2]);
    }
}
