//! Choosing the next evaluation point(s).
//!
//! Two families of strategies are provided:
//!
//! * candidate search (`CANDloc`, `CANDglob`): perturb the best point found
//!   so far (and, for the global variant, add uniform points), then pick the
//!   candidate with the best weighted score of predicted value and distance
//!   to the evaluated set;
//! * surrogate minimization (`SurfMin`): minimize the surrogate directly and
//!   fall back to the point farthest from all evaluated points.

mod candidates;
mod select;
mod surfmin;

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::ProblemSpec;
use crate::Rng;

pub use candidates::{
    gen_candidates_continuous, gen_candidates_integer, gen_candidates_mixed, generate_candidates, CandidateGroup,
    CandidateSet, SearchMode, CONTINUOUS_RHO, INTEGER_RHO,
};
pub use select::{score_and_select, Selection};
pub use surfmin::{local_descent, maximin_point, surfmin_point, MAXIMIN_DRAWS_PER_DIM};

/// Response-surface weights cycled through by candidate selection.
pub const WEIGHT_PATTERN: [f64; 5] = [1.0, 0.75, 0.5, 0.25, 0.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplingKind {
    CandLoc,
    CandGlob,
    SurfMin,
}

impl SamplingKind {
    pub const ALL: [SamplingKind; 3] = [SamplingKind::CandLoc, SamplingKind::CandGlob, SamplingKind::SurfMin];

    pub fn tag(self) -> &'static str {
        match self {
            SamplingKind::CandLoc => "CANDloc",
            SamplingKind::CandGlob => "CANDglob",
            SamplingKind::SurfMin => "SurfMin",
        }
    }
}

impl fmt::Display for SamplingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for SamplingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SamplingKind::ALL
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| Error::config(format!("unknown sampling strategy `{s}`; valid: CANDloc, CANDglob, SurfMin")))
    }
}

/// Adaptive state of the candidate search within one restart epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerState {
    /// Position in [`WEIGHT_PATTERN`] of the next selection.
    pub cycle_pos: usize,
    pub fail_count: usize,
    pub success_count: usize,
    /// Multiplier on the perturbation range, in `(0, 1]`.
    pub sigma: f64,
    pub reduction_count: usize,
    /// Set when a halving beyond the allowed number of reductions was due.
    pub restart_pending: bool,
}

impl Default for SamplerState {
    fn default() -> Self {
        SamplerState {
            cycle_pos: 0,
            fail_count: 0,
            success_count: 0,
            sigma: 1.0,
            reduction_count: 0,
            restart_pending: false,
        }
    }
}

impl SamplerState {
    /// Returns the current response-surface weight and advances the cycle.
    pub fn next_weight(&mut self) -> f64 {
        let w = WEIGHT_PATTERN[self.cycle_pos];
        self.cycle_pos = (self.cycle_pos + 1) % WEIGHT_PATTERN.len();
        w
    }
}

/// Probability of perturbing each coordinate in a problem of dimension `d`.
pub fn perturbation_probability(d: usize) -> f64 {
    if d > 5 {
        (5.0 / d as f64).max(0.1)
    } else {
        1.0
    }
}

/// A uniformly random feasible point (integer coordinates uniform over
/// their levels).
pub fn uniform_point(spec: &ProblemSpec, rng: &mut Rng) -> Vec<f64> {
    (0..spec.dim())
        .map(|i| {
            let (lo, up) = (spec.lower()[i], spec.upper()[i]);
            if spec.is_integer(i) {
                rng.random_range(lo as i64..=up as i64) as f64
            } else {
                lo + rng.random::<f64>() * (up - lo)
            }
        })
        .collect()
}

/// Whether `x` counts as a duplicate of an evaluated point: exact
/// coincidence on pure-integer problems, otherwise closer than the
/// problem's duplicate radius.
pub fn is_duplicate(spec: &ProblemSpec, x: &[f64], evaluated: &[Vec<f64>]) -> bool {
    if spec.d1() == 0 {
        evaluated.iter().any(|e| e.as_slice() == x)
    } else {
        let tol = spec.dedup_tol();
        evaluated.iter().any(|e| crate::linalg::dist2(e, x) < tol * tol)
    }
}
