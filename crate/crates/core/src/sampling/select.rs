use super::{is_duplicate, CandidateSet, SamplerState};
use crate::linalg::{dist, min_dist};
use crate::problem::ProblemSpec;
use crate::surrogate::Predictor;

/// A chosen point and the response-surface weight that chose it.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub point: Vec<f64>,
    pub w_r: f64,
}

/// Scales `v` to `[0, 1]` so that the smallest maps to 0, or reversed so
/// that the largest maps to 0. Constant inputs score 1 everywhere.
fn scale(values: &[f64], alive: &[bool], reverse: bool) -> Vec<f64> {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (v, _) in values.iter().zip(alive).filter(|(_, a)| **a) {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    let range = hi - lo;
    if !(range > 0.0) || !range.is_finite() {
        return vec![1.0; values.len()];
    }
    values
        .iter()
        .map(|v| if reverse { (hi - v) / range } else { (v - lo) / range })
        .collect()
}

/// Picks up to `batch` candidates by weighted score.
///
/// For each pick the weight `w_R` is taken from the state's cycle, the
/// predicted values and the distances to the evaluated set (plus the points
/// already picked in this batch) are scaled to `[0, 1]`, and the candidate
/// minimizing `w_R·s_R + (1 − w_R)·s_D` wins, ties going to the lower index.
/// Picked points, and candidates duplicating them, leave the pool.
pub fn score_and_select<P: Predictor + ?Sized>(
    cands: &CandidateSet,
    model: &P,
    evaluated: &[Vec<f64>],
    spec: &ProblemSpec,
    state: &mut SamplerState,
    batch: usize,
) -> Vec<Selection> {
    let n = cands.len();
    let pred: Vec<f64> = cands.points.iter().map(|x| model.predict_at(x)).collect();
    let mut delta: Vec<f64> = cands.points.iter().map(|x| min_dist(x, evaluated)).collect();
    let mut alive = vec![true; n];
    let mut out = Vec::with_capacity(batch);

    for _ in 0..batch {
        if !alive.iter().any(|a| *a) {
            log::warn!("only {} of {batch} points could be selected", out.len());
            break;
        }
        let w_r = state.next_weight();
        let s_r = scale(&pred, &alive, false);
        let s_d = scale(&delta, &alive, true);
        let mut best: Option<(usize, f64)> = None;
        for i in (0..n).filter(|&i| alive[i]) {
            let mut w = w_r * s_r[i] + (1.0 - w_r) * s_d[i];
            if w.is_nan() {
                w = f64::INFINITY;
            }
            if best.is_none_or(|(_, bw)| w < bw) {
                best = Some((i, w));
            }
        }
        let (k, _) = best.expect("pool is nonempty");
        let chosen = cands.points[k].clone();
        alive[k] = false;
        let picked = std::slice::from_ref(&chosen);
        for i in 0..n {
            if alive[i] {
                if is_duplicate(spec, &cands.points[i], picked) {
                    alive[i] = false;
                } else {
                    delta[i] = delta[i].min(dist(&cands.points[i], &chosen));
                }
            }
        }
        out.push(Selection { point: chosen, w_r });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::CandidateGroup;
    use super::*;
    use crate::problem::builtin_problem;

    fn set(points: Vec<Vec<f64>>) -> CandidateSet {
        let n = points.len();
        CandidateSet {
            points,
            groups: vec![CandidateGroup::Uniform; n],
            generated: vec![(CandidateGroup::Uniform, n)],
        }
    }

    #[test]
    fn pure_prediction_and_pure_distance() {
        let spec = builtin_problem("sphere", 2).unwrap();
        let cands = set(vec![vec![1.0, 1.0], vec![0.1, 0.0], vec![-4.0, -4.0], vec![3.0, 0.0]]);
        let evaluated = vec![vec![0.0, 0.0]];
        let model = |x: &[f64]| x[0] * x[0] + x[1] * x[1];

        let mut s = SamplerState::default();
        let pick = score_and_select(&cands, &model, &evaluated, &spec, &mut s, 1);
        assert_eq!(pick[0].point, vec![0.1, 0.0]);
        assert_eq!(pick[0].w_r, 1.0);

        let mut s = SamplerState { cycle_pos: 4, ..SamplerState::default() };
        let pick = score_and_select(&cands, &model, &evaluated, &spec, &mut s, 1);
        assert_eq!(pick[0].point, vec![-4.0, -4.0]);
        assert_eq!(pick[0].w_r, 0.0);
    }

    #[test]
    fn weights_cycle_per_point() {
        let spec = builtin_problem("sphere", 2).unwrap();
        let cands = set((0..40).map(|i| vec![(i % 7) as f64 * 0.5, (i / 7) as f64 * 0.5]).collect());
        let mut s = SamplerState::default();
        let picks = score_and_select(&cands, &|x: &[f64]| x[0], &[vec![0.0, 0.0]], &spec, &mut s, 7);
        let w: Vec<f64> = picks.iter().map(|p| p.w_r).collect();
        assert_eq!(w, vec![1.0, 0.75, 0.5, 0.25, 0.0, 1.0, 0.75]);
        assert_eq!(s.cycle_pos, 2);
    }

    #[test]
    fn batch_picks_are_distinct() {
        let spec = builtin_problem("sphere", 1).unwrap();
        // two copies of the best candidate
        let cands = set(vec![vec![1.0], vec![1.0], vec![2.0], vec![3.0]]);
        let mut s = SamplerState::default();
        let picks = score_and_select(&cands, &|x: &[f64]| x[0], &[vec![-5.0]], &spec, &mut s, 3);
        let pts: Vec<f64> = picks.iter().map(|p| p.point[0]).collect();
        assert_eq!(pts.len(), 3);
        assert_eq!(pts[0], 1.0);
        assert!(!pts[1..].contains(&1.0));
    }

    #[test]
    fn short_pool() {
        let spec = builtin_problem("sphere", 1).unwrap();
        let cands = set(vec![vec![1.0]]);
        let mut s = SamplerState::default();
        assert_eq!(score_and_select(&cands, &|x: &[f64]| x[0], &[vec![0.0]], &spec, &mut s, 3).len(), 1);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let spec = builtin_problem("sphere", 1).unwrap();
        let cands = set(vec![vec![1.0], vec![-1.0], vec![2.0]]);
        let mut s = SamplerState::default();
        let picks = score_and_select(&cands, &|_: &[f64]| 5.0, &[vec![0.0]], &spec, &mut s, 1);
        // constant predictions: every s_R is 1, so the tie breaks on index
        assert_eq!(picks[0].point, vec![1.0]);
    }
}
