//! Surrogate-model optimization for computationally expensive black-box
//! functions over a box, with continuous, integer or mixed-integer
//! variables.
//!
//! A run follows the classic surrogate loop: evaluate an initial design,
//! fit a cheap model of the objective, pick the next point(s) with a
//! sampling strategy, evaluate, refit, and restart from a fresh design when
//! the search stalls. See [`driver::optimize`].
//!
//! ```no_run
//! use surropt::{builtin_problem, optimize, DriverOptions, SurrogateKind};
//!
//! let spec = builtin_problem("branin", 2).unwrap();
//! let mut opts = DriverOptions::new(&spec, 100);
//! opts.surrogate = SurrogateKind::RbfCub;
//! let result = optimize(&spec, &opts).unwrap();
//! println!("best {} at {:?}", result.best_value, result.best_point);
//! ```

// index loops read better in the numeric kernels, and `!(a < b)` is the
// intended NaN-rejecting comparison
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod design;
pub mod driver;
pub mod error;
pub mod linalg;
pub mod problem;
pub mod sampling;
pub mod surrogate;
pub mod testfns;

pub use design::{DesignKind, DesignMatrix};
pub use driver::{optimize, DriverOptions, RunResult};
pub use error::{Error, Result};
pub use problem::{builtin_problem, load_problem, parse_problem, EvaluationRecord, Objective, ProblemSpec};
pub use sampling::{SamplerState, SamplingKind};
pub use surrogate::{Surrogate, SurrogateKind};

/// Random stream used throughout; a fixed algorithm keeps seeded runs
/// reproducible across platforms and dependency updates.
pub type Rng = rand_chacha::ChaCha8Rng;
