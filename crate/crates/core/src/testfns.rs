//! Builtin benchmark functions.

use std::f64::consts::{E, PI};
use std::fmt;
use std::str::FromStr;

use crate::error::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TestFunction {
    Sphere,
    Branin,
    Ackley,
    Rastrigin,
}

impl TestFunction {
    pub const ALL: [TestFunction; 4] = [
        TestFunction::Sphere,
        TestFunction::Branin,
        TestFunction::Ackley,
        TestFunction::Rastrigin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestFunction::Sphere => "sphere",
            TestFunction::Branin => "branin",
            TestFunction::Ackley => "ackley",
            TestFunction::Rastrigin => "rastrigin",
        }
    }

    /// Fixed dimension, if the function is not defined for arbitrary `d`.
    pub fn fixed_dim(self) -> Option<usize> {
        match self {
            TestFunction::Branin => Some(2),
            _ => None,
        }
    }

    /// Canonical box for dimension `d`.
    pub fn bounds(self, d: usize) -> (Vec<f64>, Vec<f64>) {
        match self {
            TestFunction::Sphere => (vec![-5.12; d], vec![5.12; d]),
            TestFunction::Branin => (vec![-5.0, 0.0], vec![10.0, 15.0]),
            TestFunction::Ackley => (vec![-32.768; d], vec![32.768; d]),
            TestFunction::Rastrigin => (vec![-5.12; d], vec![5.12; d]),
        }
    }

    pub fn eval(self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Sphere => sphere(x),
            TestFunction::Branin => branin(x),
            TestFunction::Ackley => ackley(x),
            TestFunction::Rastrigin => rastrigin(x),
        }
    }
}

impl fmt::Display for TestFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TestFunction::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown builtin function `{s}` (known: sphere, branin, ackley, rastrigin)"
                ))
            })
    }
}

pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn branin(x: &[f64]) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    (x2 - b * x1 * x1 + c * x1 - 6.0).powi(2) + 10.0 * (1.0 - t) * x1.cos() + 10.0
}

pub fn ackley(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let sq = x.iter().map(|v| v * v).sum::<f64>() / n;
    let cs = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / n;
    -20.0 * (-0.2 * sq.sqrt()).exp() - cs.exp() + 20.0 + E
}

pub fn rastrigin(x: &[f64]) -> f64 {
    10.0 * x.len() as f64
        + x.iter()
            .map(|v| v * v - 10.0 * (2.0 * PI * v).cos())
            .sum::<f64>()
}
