//! The optimization loop: design, evaluate, fit, sample, adapt, restart.

use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::design::{build_design, default_design_size, min_design_size, DesignKind};
use crate::error::{Error, Result};
use crate::problem::{EvaluationRecord, ProblemSpec};
use crate::sampling::{
    generate_candidates, is_duplicate, maximin_point, score_and_select, surfmin_point, SamplerState, SamplingKind,
    SearchMode,
};
use crate::surrogate::{ScaledSurrogate, SurrogateKind};
use crate::Rng;

/// Consecutive successes needed (exceeded) before the perturbation range doubles.
pub const SUCCESS_THRESHOLD: usize = 3;
/// Halvings allowed per epoch; one more triggers a restart.
pub const MAX_REDUCTIONS: usize = 5;

#[derive(Clone, Debug)]
pub struct DriverOptions {
    pub max_evals: usize,
    pub surrogate: SurrogateKind,
    pub sampling: SamplingKind,
    pub design: DesignKind,
    pub design_size: usize,
    /// Extra points evaluated with the first design.
    pub start_points: Vec<Vec<f64>>,
    /// Points selected per iteration.
    pub batch: usize,
    pub seed: u64,
    /// Maximum number of concurrent objective evaluations.
    pub workers: usize,
}

impl DriverOptions {
    /// Default options for `spec` with the given evaluation budget.
    pub fn new(spec: &ProblemSpec, max_evals: usize) -> Self {
        let surrogate = SurrogateKind::MixRcM;
        DriverOptions {
            max_evals,
            surrogate,
            sampling: SamplingKind::CandGlob,
            design: DesignKind::Slhd,
            design_size: default_design_size(surrogate, spec.dim()),
            start_points: vec![],
            batch: 1,
            seed: 0,
            workers: 1,
        }
    }

    pub fn validate(&self, spec: &ProblemSpec) -> Result<()> {
        let d = spec.dim();
        if self.batch == 0 {
            return Err(Error::config("batch size must be at least 1"));
        }
        if self.workers == 0 {
            return Err(Error::config("need at least one worker"));
        }
        let min = min_design_size(self.surrogate, d);
        if self.design_size < min {
            return Err(Error::config(format!(
                "design size {} is too small for {} in dimension {d} (need at least {min})",
                self.design_size, self.surrogate
            )));
        }
        if self.max_evals < self.design_size {
            return Err(Error::config(format!(
                "budget of {} evaluations is smaller than the initial design ({})",
                self.max_evals, self.design_size
            )));
        }
        for p in &self.start_points {
            spec.check_feasible(p)?;
        }
        Ok(())
    }
}

/// Why an epoch started.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpochReason {
    Initial,
    /// The perturbation range was halved too often.
    RangeExhausted,
    /// The surrogate could not be fitted to the epoch's points.
    FitFailure,
    /// No point distinct from the evaluated ones could be found.
    NoNewPoints,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochStart {
    pub epoch: usize,
    /// 1-based index of the epoch's first evaluation.
    pub start_eval: usize,
    pub reason: EpochReason,
}

/// Snapshot after one sampling iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub epoch: usize,
    /// Index of the last evaluation of the iteration.
    pub eval_index: usize,
    pub improved: bool,
    /// Sampler state after the counter update.
    pub state: SamplerState,
    /// Evaluations the surrogate was fitted to.
    pub fit_evals: Vec<usize>,
    /// Ensemble weights, for mixture surrogates.
    pub weights: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub history: Vec<EvaluationRecord>,
    pub epochs: Vec<EpochStart>,
    pub state_trace: Vec<IterationTrace>,
}

impl RunResult {
    pub fn restarts(&self) -> usize {
        self.epochs.len().saturating_sub(1)
    }
}

/// Advances the success/failure counters after one iteration and adapts
/// the perturbation range.
pub fn update_counters(state: &mut SamplerState, improved: bool, d: usize) {
    if improved {
        state.success_count += 1;
        state.fail_count = 0;
        if state.success_count > SUCCESS_THRESHOLD {
            state.sigma = (2.0 * state.sigma).min(1.0);
            state.success_count = 0;
        }
    } else {
        state.fail_count += 1;
        state.success_count = 0;
        if state.fail_count > d.max(5) {
            state.fail_count = 0;
            if state.reduction_count >= MAX_REDUCTIONS {
                state.restart_pending = true;
            } else {
                state.sigma *= 0.5;
                state.reduction_count += 1;
            }
        }
    }
}

/// Whether the epoch should end: a halving beyond the allowed number was due.
pub fn should_restart(state: &SamplerState) -> bool {
    state.restart_pending || state.reduction_count > MAX_REDUCTIONS
}

fn evaluate_timed(spec: &ProblemSpec, x: &[f64]) -> Result<Timed> {
    let t = Instant::now();
    let v = spec.evaluate(x)?;
    Ok((v, t.elapsed().as_secs_f64()))
}

/// Evaluates `points` with up to `workers` evaluations in flight. Results
/// are in input order. The first failure (in input order) is returned and
/// stops workers from starting new evaluations.
pub fn evaluate_batch(spec: &ProblemSpec, points: &[Vec<f64>], workers: usize) -> Result<Vec<f64>> {
    Ok(evaluate_batch_timed(spec, points, workers)?.into_iter().map(|(v, _)| v).collect())
}

/// Objective value and evaluation time in seconds.
type Timed = (f64, f64);

fn evaluate_batch_timed(spec: &ProblemSpec, points: &[Vec<f64>], workers: usize) -> Result<Vec<Timed>> {
    let workers = workers.max(1).min(points.len());
    if workers <= 1 {
        return points.iter().map(|x| evaluate_timed(spec, x)).collect();
    }
    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let slots: Mutex<Vec<Option<Result<Timed>>>> = Mutex::new((0..points.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                if failed.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= points.len() {
                    break;
                }
                let r = evaluate_timed(spec, &points[i]);
                if r.is_err() {
                    failed.store(true, Ordering::SeqCst);
                }
                slots.lock().expect("result slots")[i] = Some(r);
            });
        }
    });
    let slots = slots.into_inner().expect("result slots");
    if let Some(e) = slots.iter().position(|r| matches!(r, Some(Err(_)))) {
        return Err(slots.into_iter().nth(e).flatten().expect("error slot").unwrap_err());
    }
    Ok(slots.into_iter().map(|r| r.expect("every slot filled").expect("no errors")).collect())
}

/// Run bookkeeping: history, global and epoch incumbents.
struct Run<'a> {
    spec: &'a ProblemSpec,
    opts: &'a DriverOptions,
    history: Vec<EvaluationRecord>,
    best: Option<(Vec<f64>, f64)>,
    epoch: usize,
    /// History indices (0-based) of the current epoch's evaluations.
    epoch_evals: Vec<usize>,
    epoch_best: Option<usize>,
}

impl Run<'_> {
    fn remaining(&self) -> usize {
        self.opts.max_evals.saturating_sub(self.history.len())
    }

    fn epoch_points(&self) -> Vec<Vec<f64>> {
        self.epoch_evals.iter().map(|&i| self.history[i].point.clone()).collect()
    }

    fn epoch_values(&self) -> Vec<f64> {
        self.epoch_evals.iter().map(|&i| self.history[i].value).collect()
    }

    fn epoch_best_value(&self) -> f64 {
        self.epoch_best.map_or(f64::INFINITY, |i| self.history[i].value)
    }

    /// Evaluates and records a batch; returns whether the epoch incumbent
    /// strictly improved.
    fn evaluate(&mut self, points: Vec<Vec<f64>>, w_r: &[Option<f64>], sigma: f64) -> Result<bool> {
        let results = evaluate_batch_timed(self.spec, &points, self.opts.workers)?;
        let before = self.epoch_best_value();
        for ((point, (value, secs)), w) in points.into_iter().zip(results).zip(w_r) {
            if self.best.as_ref().is_none_or(|(_, b)| value < *b) {
                self.best = Some((point.clone(), value));
            }
            let idx = self.history.len();
            if value < self.epoch_best_value() {
                self.epoch_best = Some(idx);
            }
            self.history.push(EvaluationRecord {
                eval_index: idx + 1,
                epoch: self.epoch,
                point,
                value,
                best_so_far: self.best.as_ref().expect("incumbent").1,
                w_r: *w,
                sigma,
                wall_time: secs,
            });
            self.epoch_evals.push(idx);
        }
        Ok(self.epoch_best_value() < before)
    }
}

/// Selected points and the response-surface weight behind each.
type Picked = (Vec<Vec<f64>>, Vec<Option<f64>>);

/// Picks the next batch.
fn select(
    run: &Run<'_>,
    model: &ScaledSurrogate,
    state: &mut SamplerState,
    p: usize,
    rng: &mut Rng,
) -> Result<Picked> {
    let spec = run.spec;
    let evaluated = run.epoch_points();
    match run.opts.sampling {
        SamplingKind::CandLoc | SamplingKind::CandGlob => {
            let mode = if run.opts.sampling == SamplingKind::CandLoc { SearchMode::Local } else { SearchMode::Global };
            let best = &run.history[run.epoch_best.expect("epoch has evaluations")].point;
            let cands = generate_candidates(best, spec, mode, state, &evaluated, rng)?;
            if cands.is_empty() {
                return Ok((vec![], vec![]));
            }
            let picks = score_and_select(&cands, model, &evaluated, spec, state, p);
            Ok(picks.into_iter().map(|s| (s.point, Some(s.w_r))).unzip())
        }
        SamplingKind::SurfMin => {
            let mut known = evaluated;
            let mut out = vec![];
            let first = surfmin_point(model, spec, &known, rng);
            if !is_duplicate(spec, &first, &known) {
                known.push(first.clone());
                out.push(first);
            }
            while out.len() < p {
                let x = maximin_point(&known, spec, rng);
                if is_duplicate(spec, &x, &known) {
                    break;
                }
                known.push(x.clone());
                out.push(x);
            }
            let n = out.len();
            Ok((out, vec![None; n]))
        }
    }
}

/// Runs the optimizer until the evaluation budget is used up.
///
/// Each epoch evaluates a fresh initial design (plus the user's start
/// points in the first epoch) and then iterates: fit the surrogate to the
/// epoch's points, select `batch` points, evaluate them, and update the
/// sampler counters. An epoch ends when the perturbation range has been
/// halved too often, when the surrogate cannot be fitted, or when no new
/// point can be found; the next epoch ignores all earlier points except for
/// reporting the overall best.
pub fn optimize(spec: &ProblemSpec, opts: &DriverOptions) -> Result<RunResult> {
    opts.validate(spec)?;
    let d = spec.dim();
    let min_size = min_design_size(opts.surrogate, d);
    let mut rng = Rng::seed_from_u64(opts.seed);
    let mut run = Run {
        spec,
        opts,
        history: vec![],
        best: None,
        epoch: 0,
        epoch_evals: vec![],
        epoch_best: None,
    };
    let mut epochs = vec![];
    let mut trace = vec![];
    let mut reason = EpochReason::Initial;

    'epochs: loop {
        let remaining = run.remaining();
        if remaining == 0 {
            break;
        }
        if remaining < min_size {
            log::info!("{remaining} evaluations left, too few for a new design; stopping");
            break;
        }
        let user = if run.epoch == 0 { opts.start_points.as_slice() } else { &[] };
        let design = build_design(opts.design, opts.design_size.min(remaining), spec, &mut rng, user)?;
        let mut points = design.points;
        points.truncate(remaining);
        epochs.push(EpochStart { epoch: run.epoch, start_eval: run.history.len() + 1, reason });
        if run.epoch > 0 {
            log::info!("restart {} at evaluation {} ({reason:?})", run.epoch, run.history.len() + 1);
        }
        let n = points.len();
        run.evaluate(points, &vec![None; n], 1.0)?;
        let mut state = SamplerState::default();

        loop {
            let remaining = run.remaining();
            if remaining == 0 {
                break 'epochs;
            }
            let (points, values) = (run.epoch_points(), run.epoch_values());
            let model = match ScaledSurrogate::fit(opts.surrogate, spec, &points, &values) {
                Ok(m) => m,
                Err(e) => {
                    log::warn!("surrogate fit failed: {e}");
                    reason = EpochReason::FitFailure;
                    break;
                }
            };
            let p = opts.batch.min(remaining);
            let sigma = state.sigma;
            let (picked, weights) = select(&run, &model, &mut state, p, &mut rng)?;
            if picked.is_empty() {
                log::warn!("no unevaluated point found");
                reason = EpochReason::NoNewPoints;
                break;
            }
            let improved = run.evaluate(picked, &weights, sigma)?;
            update_counters(&mut state, improved, d);
            trace.push(IterationTrace {
                epoch: run.epoch,
                eval_index: run.history.len(),
                improved,
                state: state.clone(),
                fit_evals: run.epoch_evals[..points.len()].iter().map(|i| i + 1).collect(),
                weights: model.model().weights(),
            });
            if should_restart(&state) {
                reason = EpochReason::RangeExhausted;
                break;
            }
        }
        run.epoch += 1;
        run.epoch_evals.clear();
        run.epoch_best = None;
    }

    let (best_point, best_value) = run.best.ok_or_else(|| Error::config("no evaluations performed"))?;
    Ok(RunResult { best_point, best_value, history: run.history, epochs, state_trace: trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{builtin_problem, Objective};

    #[test]
    fn halving_after_six_failures() {
        let mut s = SamplerState::default();
        for i in 1..=6 {
            update_counters(&mut s, false, 2);
            assert_eq!(s.sigma, if i < 6 { 1.0 } else { 0.5 });
        }
        assert_eq!((s.fail_count, s.reduction_count), (0, 1));
    }

    #[test]
    fn threshold_grows_with_dimension() {
        let mut s = SamplerState::default();
        for _ in 0..8 {
            update_counters(&mut s, false, 8);
        }
        assert_eq!(s.sigma, 1.0);
        update_counters(&mut s, false, 8);
        assert_eq!(s.sigma, 0.5);
    }

    #[test]
    fn doubling_after_four_successes() {
        let mut s = SamplerState { sigma: 0.25, reduction_count: 2, ..SamplerState::default() };
        for _ in 0..4 {
            update_counters(&mut s, true, 2);
        }
        assert_eq!(s.sigma, 0.5);
        assert_eq!(s.success_count, 0);
        assert_eq!(s.reduction_count, 2);

        let mut s = SamplerState::default();
        for _ in 0..4 {
            update_counters(&mut s, true, 2);
        }
        assert_eq!(s.sigma, 1.0);
    }

    #[test]
    fn one_counter_active() {
        let mut s = SamplerState::default();
        for ok in [true, true, false, true, false, false] {
            update_counters(&mut s, ok, 3);
            assert!(s.fail_count == 0 || s.success_count == 0);
        }
    }

    #[test]
    fn restart_on_sixth_halving() {
        assert!(!should_restart(&SamplerState::default()));
        assert!(!should_restart(&SamplerState { reduction_count: 3, ..SamplerState::default() }));
        let mut s = SamplerState { reduction_count: 5, fail_count: 5, sigma: 1.0 / 32.0, ..SamplerState::default() };
        update_counters(&mut s, false, 2);
        assert!(should_restart(&s));
        assert_eq!(s.reduction_count, 5);
        assert_eq!(s.sigma, 1.0 / 32.0);
    }

    #[test]
    fn batch_keeps_input_order() {
        let spec = ProblemSpec::new(
            "slow",
            vec![0.0],
            vec![10.0],
            &[],
            Objective::from_fn(|x| {
                std::thread::sleep(std::time::Duration::from_millis((10.0 - x[0]) as u64 * 3));
                x[0] * 2.0
            }),
        )
        .unwrap();
        let pts: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64]).collect();
        let serial = evaluate_batch(&spec, &pts, 1).unwrap();
        assert_eq!(evaluate_batch(&spec, &pts, 3).unwrap(), serial);
        assert_eq!(serial, (0..8).map(|i| 2.0 * i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn batch_limits_concurrency() {
        use std::sync::Arc;
        let live = Arc::new(AtomicUsize::new(0));
        let peak = Arc::new(AtomicUsize::new(0));
        let (l, pk) = (live.clone(), peak.clone());
        let spec = ProblemSpec::new(
            "count",
            vec![0.0],
            vec![1.0],
            &[],
            Objective::from_fn(move |x| {
                let now = l.fetch_add(1, Ordering::SeqCst) + 1;
                pk.fetch_max(now, Ordering::SeqCst);
                std::thread::sleep(std::time::Duration::from_millis(20));
                l.fetch_sub(1, Ordering::SeqCst);
                x[0]
            }),
        )
        .unwrap();
        let pts: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64 / 4.0]).collect();
        evaluate_batch(&spec, &pts, 2).unwrap();
        assert_eq!(peak.load(Ordering::SeqCst), 2);
    }

    #[test]
    fn batch_failure_names_point() {
        let spec = ProblemSpec::new(
            "fails",
            vec![0.0],
            vec![1.0],
            &[],
            Objective::from_fn(|x| if x[0] > 0.5 { f64::NAN } else { x[0] }),
        )
        .unwrap();
        let err = evaluate_batch(&spec, &[vec![0.1], vec![0.9], vec![0.2]], 2).unwrap_err();
        match err {
            Error::Objective { point, .. } => assert_eq!(point, vec![0.9]),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn budget_equal_to_design() {
        let spec = builtin_problem("branin", 2).unwrap();
        let mut opts = DriverOptions::new(&spec, 6);
        opts.surrogate = SurrogateKind::RbfCub;
        opts.design_size = 6;
        let r = optimize(&spec, &opts).unwrap();
        assert_eq!(r.history.len(), 6);
        assert!(r.state_trace.is_empty());
        assert!(r.history.iter().all(|h| h.w_r.is_none()));
    }

    #[test]
    fn budget_too_small() {
        let spec = builtin_problem("branin", 2).unwrap();
        let opts = DriverOptions::new(&spec, 3);
        assert!(matches!(optimize(&spec, &opts), Err(Error::Config(_))));
    }

    #[test]
    fn partial_final_batch() {
        let spec = builtin_problem("sphere", 2).unwrap();
        let mut opts = DriverOptions::new(&spec, 23);
        opts.surrogate = SurrogateKind::RbfCub;
        opts.batch = 4;
        let r = optimize(&spec, &opts).unwrap();
        assert_eq!(r.history.len(), 23);
        assert!(r.history.windows(2).all(|w| w[1].best_so_far <= w[0].best_so_far));
        let min = r.history.iter().map(|h| h.value).fold(f64::INFINITY, f64::min);
        assert_eq!(r.best_value, min);
    }

    #[test]
    fn start_points_come_first() {
        let spec = builtin_problem("sphere", 2).unwrap();
        let mut opts = DriverOptions::new(&spec, 12);
        opts.surrogate = SurrogateKind::RbfCub;
        opts.start_points = vec![vec![0.0, 0.0]];
        let r = optimize(&spec, &opts).unwrap();
        assert_eq!(r.history[0].point, vec![0.0, 0.0]);
        assert_eq!(r.best_value, 0.0);
    }

    #[test]
    fn surfmin_batch() {
        let spec = builtin_problem("sphere", 2).unwrap();
        let mut opts = DriverOptions::new(&spec, 14);
        opts.surrogate = SurrogateKind::RbfCub;
        opts.sampling = SamplingKind::SurfMin;
        opts.batch = 2;
        let r = optimize(&spec, &opts).unwrap();
        assert_eq!(r.history.len(), 14);
        assert_eq!(r.state_trace.len(), 4);
    }
}
