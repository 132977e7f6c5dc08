use rand::seq::IndexedRandom;
use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{is_duplicate, perturbation_probability, uniform_point, SamplerState};
use crate::error::{Error, Result};
use crate::problem::ProblemSpec;
use crate::Rng;

pub const CONTINUOUS_RHO: [f64; 3] = [0.2, 0.1, 0.05];
pub const INTEGER_RHO: [f64; 3] = [1.0, 2.0, 3.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchMode {
    Local,
    Global,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CandidateGroup {
    PerturbContinuous,
    PerturbInteger,
    PerturbAll,
    Uniform,
}

#[derive(Clone, Debug, Default)]
pub struct CandidateSet {
    pub points: Vec<Vec<f64>>,
    pub groups: Vec<CandidateGroup>,
    /// Size of every group before duplicates were filtered out.
    pub generated: Vec<(CandidateGroup, usize)>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn generated_total(&self) -> usize {
        self.generated.iter().map(|(_, n)| n).sum()
    }

    fn push_group(&mut self, group: CandidateGroup, pts: Vec<Vec<f64>>) {
        self.generated.push((group, pts.len()));
        self.groups.extend(std::iter::repeat_n(group, pts.len()));
        self.points.extend(pts);
    }

    fn retain_new(&mut self, spec: &ProblemSpec, evaluated: &[Vec<f64>]) {
        let keep: Vec<bool> = self.points.iter().map(|p| !is_duplicate(spec, p, evaluated)).collect();
        let mut k = keep.iter();
        self.points.retain(|_| *k.next().unwrap());
        let mut k = keep.iter();
        self.groups.retain(|_| *k.next().unwrap());
    }
}

/// Perturbs the coordinates listed in `eligible`, each with probability
/// `prob`; forces one random coordinate when the draw selected none.
/// Continuous coordinates move by `r·ρ·σ·φ`, integer ones by a nonzero
/// integer `round(ρ·σ·φ)`, with `φ ~ N(0, 1)`. The result is clipped to the box.
fn perturb(
    best: &[f64],
    spec: &ProblemSpec,
    eligible: &[usize],
    prob: f64,
    r: f64,
    sigma: f64,
    rng: &mut Rng,
) -> Vec<f64> {
    let rho_c = *CONTINUOUS_RHO.choose(rng).expect("nonempty");
    let rho_i = *INTEGER_RHO.choose(rng).expect("nonempty");
    let mut selected: Vec<usize> = eligible.iter().copied().filter(|_| rng.random::<f64>() < prob).collect();
    if selected.is_empty() {
        selected.push(*eligible.choose(rng).expect("eligible coordinates"));
    }
    let mut x = best.to_vec();
    for i in selected {
        let phi: f64 = rng.sample(StandardNormal);
        if spec.is_integer(i) {
            let mut step = (rho_i * sigma * phi).round();
            if step == 0.0 {
                step = if phi < 0.0 { -1.0 } else { 1.0 };
            }
            x[i] += step;
        } else {
            x[i] += r * rho_c * sigma * phi;
        }
    }
    spec.project(&mut x);
    x
}

fn perturb_group(
    best: &[f64],
    spec: &ProblemSpec,
    eligible: &[usize],
    count: usize,
    sigma: f64,
    rng: &mut Rng,
) -> Vec<Vec<f64>> {
    let prob = perturbation_probability(spec.dim());
    let cont = spec.continuous_idx();
    let r = cont.iter().map(|&i| spec.side(i)).fold(f64::INFINITY, f64::min);
    (0..count)
        .map(|_| perturb(best, spec, eligible, prob, r, sigma, rng))
        .collect()
}

fn uniform_group(spec: &ProblemSpec, count: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    (0..count).map(|_| uniform_point(spec, rng)).collect()
}

fn check_best(best: &[f64], spec: &ProblemSpec) -> Result<()> {
    if best.len() != spec.dim() {
        return Err(Error::Dimension { expected: spec.dim(), got: best.len() });
    }
    Ok(())
}

/// Candidates for a purely continuous problem: `500·d₁` perturbations of
/// `best` (plus `500·d₁` uniform points in global mode).
pub fn gen_candidates_continuous(
    best: &[f64],
    spec: &ProblemSpec,
    mode: SearchMode,
    state: &SamplerState,
    evaluated: &[Vec<f64>],
    rng: &mut Rng,
) -> Result<CandidateSet> {
    check_best(best, spec)?;
    if spec.d2() != 0 {
        return Err(Error::config("continuous candidate generation on a problem with integer variables"));
    }
    let n = 500 * spec.d1();
    let all: Vec<usize> = (0..spec.dim()).collect();
    let mut set = CandidateSet::default();
    set.push_group(CandidateGroup::PerturbContinuous, perturb_group(best, spec, &all, n, state.sigma, rng));
    if mode == SearchMode::Global {
        set.push_group(CandidateGroup::Uniform, uniform_group(spec, n, rng));
    }
    set.retain_new(spec, evaluated);
    Ok(set)
}

/// Candidates for a purely integer problem: `500·d₂` per group. Only exact
/// coincidences with evaluated points are dropped.
pub fn gen_candidates_integer(
    best: &[f64],
    spec: &ProblemSpec,
    mode: SearchMode,
    state: &SamplerState,
    evaluated: &[Vec<f64>],
    rng: &mut Rng,
) -> Result<CandidateSet> {
    check_best(best, spec)?;
    if spec.d1() != 0 {
        return Err(Error::config("integer candidate generation on a problem with continuous variables"));
    }
    let n = 500 * spec.d2();
    let all: Vec<usize> = (0..spec.dim()).collect();
    let mut set = CandidateSet::default();
    set.push_group(CandidateGroup::PerturbInteger, perturb_group(best, spec, &all, n, state.sigma, rng));
    if mode == SearchMode::Global {
        set.push_group(CandidateGroup::Uniform, uniform_group(spec, n, rng));
    }
    set.retain_new(spec, evaluated);
    Ok(set)
}

/// Candidates for a mixed-integer problem: three perturbation groups
/// (continuous only, integer only, all coordinates) and, in global mode, a
/// uniform group, each of `125·(d₁ + d₂)` points.
pub fn gen_candidates_mixed(
    best: &[f64],
    spec: &ProblemSpec,
    mode: SearchMode,
    state: &SamplerState,
    evaluated: &[Vec<f64>],
    rng: &mut Rng,
) -> Result<CandidateSet> {
    check_best(best, spec)?;
    if spec.d1() == 0 || spec.d2() == 0 {
        return Err(Error::config("mixed candidate generation needs both continuous and integer variables"));
    }
    let n = 125 * spec.dim();
    let cont = spec.continuous_idx();
    let ints = spec.integer_idx();
    let all: Vec<usize> = (0..spec.dim()).collect();
    let mut set = CandidateSet::default();
    set.push_group(CandidateGroup::PerturbContinuous, perturb_group(best, spec, &cont, n, state.sigma, rng));
    set.push_group(CandidateGroup::PerturbInteger, perturb_group(best, spec, &ints, n, state.sigma, rng));
    set.push_group(CandidateGroup::PerturbAll, perturb_group(best, spec, &all, n, state.sigma, rng));
    if mode == SearchMode::Global {
        set.push_group(CandidateGroup::Uniform, uniform_group(spec, n, rng));
    }
    set.retain_new(spec, evaluated);
    Ok(set)
}

/// Dispatches on the variable classes of `spec`. If every candidate is a
/// duplicate the set is regenerated once; a second empty set is returned
/// with a warning.
pub fn generate_candidates(
    best: &[f64],
    spec: &ProblemSpec,
    mode: SearchMode,
    state: &SamplerState,
    evaluated: &[Vec<f64>],
    rng: &mut Rng,
) -> Result<CandidateSet> {
    let gen = |rng: &mut Rng| match (spec.d1(), spec.d2()) {
        (_, 0) => gen_candidates_continuous(best, spec, mode, state, evaluated, rng),
        (0, _) => gen_candidates_integer(best, spec, mode, state, evaluated, rng),
        _ => gen_candidates_mixed(best, spec, mode, state, evaluated, rng),
    };
    let set = gen(rng)?;
    if !set.is_empty() {
        return Ok(set);
    }
    let set = gen(rng)?;
    if set.is_empty() {
        log::warn!("all {} candidates coincide with evaluated points", set.generated_total());
    }
    Ok(set)
}
