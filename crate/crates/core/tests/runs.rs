use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use surropt::design::{build_design, DesignKind};
use surropt::driver::{optimize, DriverOptions, EpochReason};
use surropt::{builtin_problem, Objective, ProblemSpec, Rng, SamplingKind, SurrogateKind};

use rand::SeedableRng;

fn opts(spec: &ProblemSpec, budget: usize, surrogate: SurrogateKind) -> DriverOptions {
    let mut o = DriverOptions::new(spec, budget);
    o.surrogate = surrogate;
    o.design_size = surropt::design::default_design_size(surrogate, spec.dim());
    o
}

#[test]
fn restart_epochs_fit_only_their_own_points() {
    // a flat objective forces restarts
    let spec = ProblemSpec::new("flat", vec![0.0; 3], vec![1.0; 3], &[], Objective::from_fn(|_| 1.0)).unwrap();
    let o = opts(&spec, 150, SurrogateKind::RbfCub);
    let r = optimize(&spec, &o).unwrap();
    assert!(r.epochs.len() >= 3, "{:?}", r.epochs);
    assert_eq!(r.epochs[0].reason, EpochReason::Initial);
    for t in &r.state_trace {
        for &e in &t.fit_evals {
            assert_eq!(r.history[e - 1].epoch, t.epoch, "evaluation {e} leaked into epoch {}", t.epoch);
        }
        // every earlier point of the epoch is used (batch size 1)
        let expected = r.history[..t.eval_index - 1].iter().filter(|h| h.epoch == t.epoch).count();
        assert_eq!(t.fit_evals.len(), expected);
    }
    for w in r.epochs.windows(2) {
        assert!(w[1].start_eval > w[0].start_eval);
        assert_eq!(r.history[w[1].start_eval - 1].epoch, w[1].epoch);
        assert_eq!(r.history[w[1].start_eval - 2].epoch, w[0].epoch);
    }
}

#[test]
fn incumbent_is_global_across_epochs() {
    let spec = builtin_problem("rastrigin", 2).unwrap();
    let mut o = opts(&spec, 300, SurrogateKind::RbfCub);
    o.sampling = SamplingKind::CandLoc;
    o.seed = 4;
    let r = optimize(&spec, &o).unwrap();
    assert_eq!(r.history.len(), 300);
    let min = r.history.iter().map(|h| h.value).fold(f64::INFINITY, f64::min);
    assert_eq!(r.best_value, min);
    assert!(r.history.windows(2).all(|w| w[1].best_so_far <= w[0].best_so_far));
    let at = r.history.iter().find(|h| h.value == min).unwrap();
    assert_eq!(at.point, r.best_point);
}

#[test]
fn workers_do_not_change_the_run() {
    let spec = builtin_problem("ackley-mixed", 4).unwrap();
    let mut o = opts(&spec, 60, SurrogateKind::MixRcPq);
    o.batch = 4;
    o.seed = 8;
    let serial = optimize(&spec, &o).unwrap();
    o.workers = 4;
    let parallel = optimize(&spec, &o).unwrap();
    let strip = |r: &surropt::RunResult| r.history.iter().map(|h| (h.point.clone(), h.value)).collect::<Vec<_>>();
    assert_eq!(strip(&serial), strip(&parallel));
}

#[test]
fn batch_size_is_respected() {
    let calls = Arc::new(AtomicUsize::new(0));
    let c = calls.clone();
    let spec = ProblemSpec::new(
        "count",
        vec![-2.0; 2],
        vec![2.0; 2],
        &[],
        Objective::from_fn(move |x| {
            c.fetch_add(1, Ordering::SeqCst);
            x[0] * x[0] + x[1] * x[1]
        }),
    )
    .unwrap();
    let mut o = opts(&spec, 40, SurrogateKind::RbfTps);
    o.batch = 5;
    let r = optimize(&spec, &o).unwrap();
    assert_eq!(calls.load(Ordering::SeqCst), 40);
    // 6 design points, then 6 full batches of 5 and a final batch of 4
    for t in &r.state_trace[..r.state_trace.len() - 1] {
        assert_eq!((t.eval_index - 6) % 5, 0);
    }
    assert_eq!(r.state_trace.last().unwrap().eval_index, 40);
}

#[test]
fn every_surrogate_runs() {
    let spec = builtin_problem("sphere", 2).unwrap();
    for kind in SurrogateKind::ALL {
        let budget = surropt::design::default_design_size(kind, 2) + 8;
        let r = optimize(&spec, &opts(&spec, budget, kind)).unwrap_or_else(|e| panic!("{kind}: {e}"));
        assert_eq!(r.history.len(), budget, "{kind}");
        assert_eq!(r.state_trace.iter().all(|t| t.weights.is_some()), kind.is_mixture());
    }
}

#[test]
fn every_design_runs() {
    for (name, d) in [("branin", 2), ("sphere-int", 3), ("ackley-mixed", 4)] {
        let spec = builtin_problem(name, d).unwrap();
        for design in DesignKind::ALL {
            let mut o = opts(&spec, 30, SurrogateKind::RbfCub);
            o.design = design;
            if design == DesignKind::Corner {
                o.design_size = o.design_size.min((1 << d) + 1);
            }
            let r = optimize(&spec, &o).unwrap_or_else(|e| panic!("{name}/{design}: {e}"));
            assert_eq!(r.history.len(), 30);
            assert!(r.history.iter().all(|h| spec.is_feasible(&h.point)));
        }
    }
}

#[test]
fn tiny_integer_lattice_runs_out_gracefully() {
    // 3 x 3 = 9 lattice points, budget larger than the lattice
    let spec = ProblemSpec::new(
        "lattice",
        vec![0.0, 0.0],
        vec![2.0, 2.0],
        &[0, 1],
        Objective::from_fn(|x| (x[0] - 1.0).powi(2) + x[1]),
    )
    .unwrap();
    let mut o = opts(&spec, 40, SurrogateKind::RbfCub);
    o.design_size = 4;
    let r = optimize(&spec, &o).unwrap();
    assert!(r.history.len() <= 40);
    assert_eq!(r.best_value, 0.0);
    for e in 0..=r.history.last().unwrap().epoch {
        let pts: Vec<_> = r.history.iter().filter(|h| h.epoch == e).map(|h| h.point.clone()).collect();
        for (i, a) in pts.iter().enumerate() {
            assert!(!pts[i + 1..].contains(a), "duplicate {a:?} in epoch {e}");
        }
    }
}

#[test]
fn design_includes_user_rows_first() {
    let spec = builtin_problem("branin", 2).unwrap();
    let mut rng = Rng::seed_from_u64(1);
    let user = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
    let d = build_design(DesignKind::Slhd, 6, &spec, &mut rng, &user).unwrap();
    assert_eq!(&d.points[..2], &user[..]);
    assert_eq!(d.points.len(), 8);
}
