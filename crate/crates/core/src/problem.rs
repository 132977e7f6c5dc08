//! Box-constrained problem definitions and objective adapters.
//!
//! A problem is `min f(x)` over `lower <= x <= upper`, where a subset of the
//! coordinates may be constrained to integers. Problems are either built from
//! the builtin catalogue ([`builtin_problem`]) or loaded from a TOML file
//! ([`load_problem`]):
//!
//! ```toml
//! name = "my-simulator"
//! dim = 3
//! lower = [0.0, -1.0, 1]
//! upper = [1.0, 1.0, 10]
//! integer_idx = [3]          # 1-based coordinate indices
//!
//! [objective]
//! kind = "command"           # or "builtin" with `name = "branin"`
//! cmd = "./simulate --quiet"
//! ```
//!
//! External commands run through `sh -c`. The point is written to the child's
//! stdin as one line of space-separated decimals and the child must print a
//! single number on stdout.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::process::{Command, Stdio};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::testfns::TestFunction;

type ObjectiveFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Evaluation handle of a problem. Cheap to clone and safe to call from
/// several threads at once.
#[derive(Clone)]
pub enum Objective {
    Builtin(TestFunction),
    Command(String),
    Custom(Arc<ObjectiveFn>),
}

impl Objective {
    pub fn from_fn<F>(f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Objective::Custom(Arc::new(f))
    }

    fn call(&self, x: &[f64]) -> Result<f64> {
        match self {
            Objective::Builtin(t) => Ok(t.eval(x)),
            Objective::Custom(f) => Ok(f(x)),
            Objective::Command(cmd) => run_command(cmd, x),
        }
    }
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Objective::Builtin(t) => write!(f, "Builtin({t})"),
            Objective::Command(c) => write!(f, "Command({c:?})"),
            Objective::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Serializes a point the way external objectives receive it.
pub fn format_point(x: &[f64]) -> String {
    x.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn run_command(cmd: &str, x: &[f64]) -> Result<f64> {
    let fail = |reason: String| Error::Objective {
        point: x.to_vec(),
        reason,
    };
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(cmd)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| fail(format!("cannot spawn `{cmd}`: {e}")))?;
    if let Some(mut stdin) = child.stdin.take() {
        // a child that ignores its input may already have exited
        let _ = writeln!(stdin, "{}", format_point(x));
    }
    let out = child
        .wait_with_output()
        .map_err(|e| fail(format!("waiting for `{cmd}`: {e}")))?;
    if !out.status.success() {
        return Err(fail(format!(
            "`{cmd}` exited with {}: {}",
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        )));
    }
    let text = String::from_utf8_lossy(&out.stdout);
    let text = text.trim();
    text.parse::<f64>()
        .map_err(|_| fail(format!("`{cmd}` printed {text:?}, expected a single number")))
}

/// A validated optimization problem. Immutable once built.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    name: String,
    lower: Vec<f64>,
    upper: Vec<f64>,
    is_int: Vec<bool>,
    objective: Objective,
}

impl ProblemSpec {
    /// Builds a problem. `integer_idx` holds 0-based coordinate indices.
    ///
    /// Bounds of integer coordinates are rounded inward (ceil lower, floor
    /// upper) before the `lower < upper` check.
    pub fn new(
        name: impl Into<String>,
        lower: Vec<f64>,
        upper: Vec<f64>,
        integer_idx: &[usize],
        objective: Objective,
    ) -> Result<Self> {
        let d = lower.len();
        if d == 0 {
            return Err(Error::config("problem dimension must be positive"));
        }
        if upper.len() != d {
            return Err(Error::config(format!(
                "lower has {d} entries but upper has {}",
                upper.len()
            )));
        }
        let mut is_int = vec![false; d];
        for &i in integer_idx {
            if i >= d {
                return Err(Error::config(format!(
                    "integer index {} out of range 1..={d}",
                    i + 1
                )));
            }
            is_int[i] = true;
        }
        let (mut lower, mut upper) = (lower, upper);
        for i in 0..d {
            if !lower[i].is_finite() || !upper[i].is_finite() {
                return Err(Error::config(format!("bounds of coordinate {} are not finite", i + 1)));
            }
            if is_int[i] {
                lower[i] = lower[i].ceil();
                upper[i] = upper[i].floor();
            }
            if lower[i] >= upper[i] {
                return Err(Error::config(format!(
                    "coordinate {}: lower {} is not below upper {}",
                    i + 1,
                    lower[i],
                    upper[i]
                )));
            }
        }
        Ok(ProblemSpec {
            name: name.into(),
            lower,
            upper,
            is_int,
            objective,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Number of continuous coordinates.
    pub fn d1(&self) -> usize {
        self.is_int.iter().filter(|b| !**b).count()
    }

    /// Number of integer coordinates.
    pub fn d2(&self) -> usize {
        self.is_int.iter().filter(|b| **b).count()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn is_integer(&self, i: usize) -> bool {
        self.is_int[i]
    }

    pub fn integer_mask(&self) -> &[bool] {
        &self.is_int
    }

    /// 0-based indices of the integer coordinates.
    pub fn integer_idx(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.is_int[i]).collect()
    }

    pub fn continuous_idx(&self) -> Vec<usize> {
        (0..self.dim()).filter(|&i| !self.is_int[i]).collect()
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    pub fn side(&self, i: usize) -> f64 {
        self.upper[i] - self.lower[i]
    }

    /// Shortest side of the box.
    pub fn min_side(&self) -> f64 {
        (0..self.dim()).map(|i| self.side(i)).fold(f64::INFINITY, f64::min)
    }

    /// Euclidean radius below which two points count as duplicates.
    pub fn dedup_tol(&self) -> f64 {
        0.001 * self.min_side()
    }

    pub fn center(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| 0.5 * (self.lower[i] + self.upper[i]))
            .collect()
    }

    /// Clamps to the box and rounds integer coordinates to the nearest
    /// feasible integer.
    pub fn project(&self, x: &mut [f64]) {
        for i in 0..self.dim() {
            let mut v = x[i].clamp(self.lower[i], self.upper[i]);
            if self.is_int[i] {
                v = v.round().clamp(self.lower[i], self.upper[i]);
            }
            x[i] = v;
        }
    }

    pub fn is_feasible(&self, x: &[f64]) -> bool {
        self.check_feasible(x).is_ok()
    }

    pub fn check_feasible(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        for (i, &v) in x.iter().enumerate() {
            if !(v >= self.lower[i] && v <= self.upper[i]) {
                return Err(Error::Infeasible {
                    point: x.to_vec(),
                    reason: format!("coordinate {} = {v} outside [{}, {}]", i + 1, self.lower[i], self.upper[i]),
                });
            }
            if self.is_int[i] && v.fract() != 0.0 {
                return Err(Error::Infeasible {
                    point: x.to_vec(),
                    reason: format!("coordinate {} = {v} is not integral", i + 1),
                });
            }
        }
        Ok(())
    }

    /// Evaluates the objective at a feasible point.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        self.check_feasible(x)?;
        let v = self.objective.call(x)?;
        if !v.is_finite() {
            return Err(Error::Objective {
                point: x.to_vec(),
                reason: format!("non-finite value {v}"),
            });
        }
        Ok(v)
    }
}

/// One expensive evaluation as recorded in a run history.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub eval_index: usize,
    pub epoch: usize,
    pub point: Vec<f64>,
    pub value: f64,
    pub best_so_far: f64,
    /// Response-surface weight used to pick the point, if a candidate search chose it.
    pub w_r: Option<f64>,
    pub sigma: f64,
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemConfig {
    name: Option<String>,
    dim: usize,
    lower: Option<Vec<f64>>,
    upper: Option<Vec<f64>>,
    #[serde(default)]
    integer_idx: Vec<usize>,
    objective: ObjectiveConfig,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum ObjectiveConfig {
    Builtin { name: String },
    Command { cmd: String },
}

/// Parses a problem description (TOML text).
pub fn parse_problem(text: &str) -> Result<ProblemSpec> {
    let cfg: ProblemConfig =
        toml::from_str(text).map_err(|e| Error::config(format!("problem file: {e}")))?;
    let d = cfg.dim;
    if d == 0 {
        return Err(Error::config("dim must be positive"));
    }
    let lower = cfg.lower.ok_or_else(|| Error::config("missing `lower` bounds"))?;
    let upper = cfg.upper.ok_or_else(|| Error::config("missing `upper` bounds"))?;
    if lower.len() != d || upper.len() != d {
        return Err(Error::config(format!(
            "bounds must have {d} entries (lower has {}, upper has {})",
            lower.len(),
            upper.len()
        )));
    }
    let mut idx = Vec::with_capacity(cfg.integer_idx.len());
    for &i in &cfg.integer_idx {
        if i == 0 || i > d {
            return Err(Error::config(format!("integer index {i} out of range 1..={d}")));
        }
        idx.push(i - 1);
    }
    let (objective, default_name) = match cfg.objective {
        ObjectiveConfig::Builtin { name } => {
            let (f, _) = parse_builtin_name(&name)?;
            if let Some(fd) = f.fixed_dim() {
                if fd != d {
                    return Err(Error::config(format!("builtin `{f}` is only defined for dim = {fd}")));
                }
            }
            (Objective::Builtin(f), name)
        }
        ObjectiveConfig::Command { cmd } => (Objective::Command(cmd), "external".to_string()),
    };
    ProblemSpec::new(cfg.name.unwrap_or(default_name), lower, upper, &idx, objective)
}

/// Loads a problem description file.
pub fn load_problem(path: impl AsRef<Path>) -> Result<ProblemSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_problem(&text)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Variant {
    Continuous,
    Integer,
    Mixed,
}

fn parse_builtin_name(name: &str) -> Result<(TestFunction, Variant)> {
    let (base, variant) = if let Some(b) = name.strip_suffix("-int") {
        (b, Variant::Integer)
    } else if let Some(b) = name.strip_suffix("-mixed") {
        (b, Variant::Mixed)
    } else {
        (name, Variant::Continuous)
    };
    Ok((base.parse()?, variant))
}

/// Builds a catalogue problem.
///
/// Names are `sphere`, `branin`, `ackley`, `rastrigin`, each optionally
/// suffixed with `-int` (every coordinate integer) or `-mixed` (the last
/// `d / 2` coordinates integer).
pub fn builtin_problem(name: &str, dim: usize) -> Result<ProblemSpec> {
    let (f, variant) = parse_builtin_name(name)?;
    if dim == 0 {
        return Err(Error::config("dim must be positive"));
    }
    if let Some(fd) = f.fixed_dim() {
        if fd != dim {
            return Err(Error::config(format!("builtin `{f}` is only defined for dim = {fd}")));
        }
    }
    let integer_idx: Vec<usize> = match variant {
        Variant::Continuous => vec![],
        Variant::Integer => (0..dim).collect(),
        Variant::Mixed => {
            if dim < 2 {
                return Err(Error::config("mixed-integer builtins need dim >= 2"));
            }
            (dim - dim / 2..dim).collect()
        }
    };
    let (lower, upper) = f.bounds(dim);
    ProblemSpec::new(name, lower, upper, &integer_idx, Objective::Builtin(f))
}
