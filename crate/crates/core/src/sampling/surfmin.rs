use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{is_duplicate, uniform_point};
use crate::linalg::min_dist;
use crate::problem::ProblemSpec;
use crate::surrogate::Predictor;
use crate::Rng;

pub const MAXIMIN_DRAWS_PER_DIM: usize = 1000;
const DESCENT_STARTS: usize = 3;
const DESCENT_ITERS: usize = 500;
const GA_POP_PER_DIM: usize = 20;
const GA_GENERATIONS: usize = 50;

fn clamp_box(x: &mut [f64], lo: &[f64], up: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], up[i]);
    }
}

fn fd_gradient<P: Predictor + ?Sized>(f: &P, x: &[f64], lo: &[f64], up: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut y = x.to_vec();
    for i in 0..x.len() {
        let h = 1e-7 * (up[i] - lo[i]);
        let a = (x[i] - h).max(lo[i]);
        let b = (x[i] + h).min(up[i]);
        y[i] = b;
        let fb = f.predict_at(&y);
        y[i] = a;
        let fa = f.predict_at(&y);
        y[i] = x[i];
        g[i] = (fb - fa) / (b - a);
    }
    g
}

/// Projected gradient descent with Barzilai–Borwein steps, an Armijo
/// backtracking line search and finite-difference gradients. Returns the
/// final point and its value.
pub fn local_descent<P: Predictor + ?Sized>(f: &P, start: &[f64], lo: &[f64], up: &[f64]) -> (Vec<f64>, f64) {
    let d = start.len();
    let scale = (0..d).map(|i| up[i] - lo[i]).fold(0.0, f64::max);
    let mut x = start.to_vec();
    clamp_box(&mut x, lo, up);
    let mut fx = f.predict_at(&x);
    if !fx.is_finite() {
        return (x, fx);
    }
    let mut g = fd_gradient(f, &x, lo, up);
    let gnorm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut alpha = if gnorm > 0.0 { 0.1 * scale / gnorm } else { return (x, fx) };

    for _ in 0..DESCENT_ITERS {
        let mut accepted = None;
        let mut a = alpha;
        for _ in 0..40 {
            let mut xn: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi - a * gi).collect();
            clamp_box(&mut xn, lo, up);
            let decrease: f64 = g.iter().zip(x.iter().zip(&xn)).map(|(gi, (xi, ni))| gi * (xi - ni)).sum();
            let fn_ = f.predict_at(&xn);
            if fn_.is_finite() && fn_ <= fx - 1e-4 * decrease {
                accepted = Some((xn, fn_));
                break;
            }
            a *= 0.5;
        }
        let Some((xn, fn_)) = accepted else { break };
        let step: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let step_norm = step.iter().map(|v| v * v).sum::<f64>().sqrt();
        let gn = fd_gradient(f, &xn, lo, up);
        let sy: f64 = step.iter().zip(gn.iter().zip(&g)).map(|(s, (a, b))| s * (a - b)).sum();
        let ss: f64 = step.iter().map(|v| v * v).sum();
        let improvement = fx - fn_;
        x = xn;
        fx = fn_;
        g = gn;
        if step_norm <= 1e-12 * scale || improvement <= 1e-15 * (1.0 + fx.abs()) {
            break;
        }
        alpha = if sy > 0.0 { ss / sy } else { a * 2.0 };
    }
    (x, fx)
}

fn multistart_descent<P: Predictor + ?Sized>(model: &P, spec: &ProblemSpec, rng: &mut Rng) -> Option<Vec<f64>> {
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..DESCENT_STARTS {
        let start = uniform_point(spec, rng);
        let (x, fx) = local_descent(model, &start, spec.lower(), spec.upper());
        if fx.is_finite() && best.as_ref().is_none_or(|(_, b)| fx < *b) {
            best = Some((x, fx));
        }
    }
    best.map(|(x, _)| x)
}

fn mutate(x: &mut [f64], spec: &ProblemSpec, rng: &mut Rng) {
    let d = spec.dim();
    let rate = 1.0 / d as f64;
    let forced = rng.random_range(0..d);
    for i in 0..d {
        if i != forced && rng.random::<f64>() >= rate {
            continue;
        }
        let phi: f64 = rng.sample(StandardNormal);
        if spec.is_integer(i) {
            let mut step = (phi * (0.1 * spec.side(i)).max(1.0)).round();
            if step == 0.0 {
                step = if phi < 0.0 { -1.0 } else { 1.0 };
            }
            x[i] += step;
        } else {
            x[i] += 0.1 * spec.side(i) * phi;
        }
    }
    spec.project(x);
}

/// Steady-state genetic search: binary tournaments, uniform crossover,
/// integrality-preserving mutation; a child replaces the worst member when
/// it is better.
fn genetic_search<P: Predictor + ?Sized>(model: &P, spec: &ProblemSpec, rng: &mut Rng) -> Option<Vec<f64>> {
    let d = spec.dim();
    let pop_size = GA_POP_PER_DIM * d;
    let mut pop: Vec<(Vec<f64>, f64)> = (0..pop_size)
        .map(|_| {
            let x = uniform_point(spec, rng);
            let f = model.predict_at(&x);
            (x, if f.is_finite() { f } else { f64::INFINITY })
        })
        .collect();
    let tournament = |pop: &[(Vec<f64>, f64)], rng: &mut Rng| {
        let a = rng.random_range(0..pop.len());
        let b = rng.random_range(0..pop.len());
        if pop[a].1 <= pop[b].1 { a } else { b }
    };
    for _ in 0..GA_GENERATIONS {
        for _ in 0..pop_size {
            let pa = tournament(&pop, rng);
            let pb = tournament(&pop, rng);
            let mut child: Vec<f64> = (0..d)
                .map(|i| if rng.random::<bool>() { pop[pa].0[i] } else { pop[pb].0[i] })
                .collect();
            mutate(&mut child, spec, rng);
            let fc = model.predict_at(&child);
            if !fc.is_finite() {
                continue;
            }
            let worst = (0..pop.len())
                .max_by(|&a, &b| pop[a].1.total_cmp(&pop[b].1))
                .expect("nonempty population");
            if fc < pop[worst].1 {
                pop[worst] = (child, fc);
            }
        }
    }
    pop.into_iter()
        .filter(|(_, f)| f.is_finite())
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(x, _)| x)
}

/// Approximate maximin point: the best of `1000·d` uniform feasible draws
/// by distance to the nearest evaluated point.
pub fn maximin_point(evaluated: &[Vec<f64>], spec: &ProblemSpec, rng: &mut Rng) -> Vec<f64> {
    let draws = MAXIMIN_DRAWS_PER_DIM * spec.dim();
    let mut best: Option<(Vec<f64>, f64)> = None;
    for _ in 0..draws {
        let x = uniform_point(spec, rng);
        let dmin = min_dist(&x, evaluated);
        if best.as_ref().is_none_or(|(_, b)| dmin > *b) {
            best = Some((x, dmin));
        }
    }
    best.expect("at least one draw").0
}

/// A local minimum of the surrogate: multistart projected descent for
/// continuous problems, a genetic search when integer variables are
/// present. Falls back to [`maximin_point`] when the search fails or lands
/// on an already evaluated point.
pub fn surfmin_point<P: Predictor + ?Sized>(
    model: &P,
    spec: &ProblemSpec,
    evaluated: &[Vec<f64>],
    rng: &mut Rng,
) -> Vec<f64> {
    let found = if spec.d2() == 0 {
        multistart_descent(model, spec, rng)
    } else {
        genetic_search(model, spec, rng)
    };
    match found {
        Some(mut x) => {
            spec.project(&mut x);
            if is_duplicate(spec, &x, evaluated) {
                maximin_point(evaluated, spec, rng)
            } else {
                x
            }
        }
        None => maximin_point(evaluated, spec, rng),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{builtin_problem, Objective, ProblemSpec};
    use rand::SeedableRng;

    fn unit_square() -> ProblemSpec {
        ProblemSpec::new("u", vec![0.0, 0.0], vec![1.0, 1.0], &[], Objective::from_fn(|_| 0.0)).unwrap()
    }

    #[test]
    fn quadratic_minimum() {
        let spec = builtin_problem("branin", 2).unwrap();
        let m = [2.0, 7.5];
        let q = move |x: &[f64]| 3.0 * (x[0] - m[0]).powi(2) + (x[1] - m[1]).powi(2) + 0.5 * (x[0] - m[0]) * (x[1] - m[1]);
        let evaluated = vec![vec![-5.0, 0.0], vec![10.0, 15.0]];
        let x = surfmin_point(&q, &spec, &evaluated, &mut Rng::seed_from_u64(2));
        assert!((x[0] - m[0]).abs() <= 1e-3 * 15.0 && (x[1] - m[1]).abs() <= 1e-3 * 15.0, "{x:?}");
    }

    #[test]
    fn bound_constrained_minimum() {
        let (x, _) = local_descent(&|x: &[f64]| (x[0] - 2.0).powi(2) + x[1] * x[1], &[0.3, 0.7], &[0.0, 0.0], &[1.0, 1.0]);
        assert!((x[0] - 1.0).abs() < 1e-9 && x[1].abs() < 1e-6, "{x:?}");
    }

    #[test]
    fn minimum_at_evaluated_point_falls_back() {
        let spec = unit_square();
        let q = |x: &[f64]| (x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2);
        let evaluated = vec![vec![0.5, 0.5]];
        let x = surfmin_point(&q, &spec, &evaluated, &mut Rng::seed_from_u64(3));
        assert!(min_dist(&x, &evaluated) >= 0.6);
    }

    #[test]
    fn integer_search_is_integral() {
        let spec = builtin_problem("rastrigin-int", 3).unwrap();
        let q = |x: &[f64]| (x[0] - 2.0).powi(2) + (x[1] + 1.0).powi(2) + x[2] * x[2];
        let x = surfmin_point(&q, &spec, &[vec![0.0, 0.0, 0.0]], &mut Rng::seed_from_u64(4));
        assert!(spec.is_feasible(&x));
        assert_eq!(x, vec![2.0, -1.0, 0.0]);

        let m = builtin_problem("sphere-mixed", 4).unwrap();
        let x = surfmin_point(&q, &m, &[vec![0.0; 4]], &mut Rng::seed_from_u64(4));
        assert!(m.is_feasible(&x));
    }

    #[test]
    fn maximin_from_center() {
        let spec = unit_square();
        let x = maximin_point(&[vec![0.5, 0.5]], &spec, &mut Rng::seed_from_u64(5));
        assert!(min_dist(&x, &[vec![0.5, 0.5]]) >= 0.6);
    }

    #[test]
    fn maximin_with_corners_and_center() {
        // grid oracle: the best points are the four edge midpoints at distance 0.5
        let spec = unit_square();
        let ev = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0], vec![0.5, 0.5]];
        let mut oracle = 0.0f64;
        for i in 0..=200 {
            for j in 0..=200 {
                oracle = oracle.max(min_dist(&[i as f64 / 200.0, j as f64 / 200.0], &ev));
            }
        }
        assert!((oracle - 0.5).abs() < 1e-12);
        let x = maximin_point(&ev, &spec, &mut Rng::seed_from_u64(6));
        let mids = [[0.5, 0.0], [0.0, 0.5], [1.0, 0.5], [0.5, 1.0]];
        let near = mids.iter().map(|m| crate::linalg::dist(&x, m)).fold(f64::INFINITY, f64::min);
        assert!(near < 0.1, "{x:?}");
        assert!(min_dist(&x, &ev) > 0.45);
    }

    #[test]
    fn maximin_integer() {
        let spec = builtin_problem("rastrigin-int", 2).unwrap();
        let x = maximin_point(&[vec![0.0, 0.0]], &spec, &mut Rng::seed_from_u64(7));
        assert!(spec.is_feasible(&x));
        assert_eq!(x.iter().map(|v| v.abs()).collect::<Vec<_>>(), vec![5.0, 5.0]);
    }
}
