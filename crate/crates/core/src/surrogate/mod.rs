//! Surrogate models: radial basis function interpolants, regression
//! polynomials, MARS and evidence-weighted mixtures of these.
//!
//! Every model is a pure function of its training data once fitted, so
//! models can be shared freely between threads. A fitted model can be dumped
//! to JSON text ([`Surrogate::to_text`]) and read back bit-exactly.

mod ensemble;
mod mars;
mod poly;
mod rbf;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::ProblemSpec;

pub use ensemble::{
    cross_validated_predictions, dempster_combine, evidence_weights, fit_ensemble, EnsembleMember,
    EnsembleModel, MemberStats,
};
pub use mars::{fit_mars, Hinge, MarsModel, MarsOptions};
pub use poly::{fit_poly, poly_basis, PolyModel, PolyVariant};
pub use rbf::{fit_rbf, Kernel, RbfModel};

/// Surrogate model choices, named as in the option vocabulary of the tool.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SurrogateKind {
    RbfCub,
    RbfTps,
    RbfLin,
    Mars,
    PolyLin,
    PolyQuad,
    PolyQuadr,
    PolyCub,
    PolyCubr,
    MixRcM,
    MixRcPc,
    MixRcPcr,
    MixRcPq,
    MixRcPqr,
    MixRcPcM,
}

impl SurrogateKind {
    pub const ALL: [SurrogateKind; 15] = [
        SurrogateKind::RbfCub,
        SurrogateKind::RbfTps,
        SurrogateKind::RbfLin,
        SurrogateKind::Mars,
        SurrogateKind::PolyLin,
        SurrogateKind::PolyQuad,
        SurrogateKind::PolyQuadr,
        SurrogateKind::PolyCub,
        SurrogateKind::PolyCubr,
        SurrogateKind::MixRcM,
        SurrogateKind::MixRcPc,
        SurrogateKind::MixRcPcr,
        SurrogateKind::MixRcPq,
        SurrogateKind::MixRcPqr,
        SurrogateKind::MixRcPcM,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            SurrogateKind::RbfCub => "RBFcub",
            SurrogateKind::RbfTps => "RBFtps",
            SurrogateKind::RbfLin => "RBFlin",
            SurrogateKind::Mars => "MARS",
            SurrogateKind::PolyLin => "POLYlin",
            SurrogateKind::PolyQuad => "POLYquad",
            SurrogateKind::PolyQuadr => "POLYquadr",
            SurrogateKind::PolyCub => "POLYcub",
            SurrogateKind::PolyCubr => "POLYcubr",
            SurrogateKind::MixRcM => "MIX_RcM",
            SurrogateKind::MixRcPc => "MIX_RcPc",
            SurrogateKind::MixRcPcr => "MIX_RcPcr",
            SurrogateKind::MixRcPq => "MIX_RcPq",
            SurrogateKind::MixRcPqr => "MIX_RcPqr",
            SurrogateKind::MixRcPcM => "MIX_RcPcM",
        }
    }

    /// Component models of a mixture; a single model is its own only member.
    pub fn members(self) -> Vec<SurrogateKind> {
        use SurrogateKind::*;
        match self {
            MixRcM => vec![RbfCub, Mars],
            MixRcPc => vec![RbfCub, PolyCub],
            MixRcPcr => vec![RbfCub, PolyCubr],
            MixRcPq => vec![RbfCub, PolyQuad],
            MixRcPqr => vec![RbfCub, PolyQuadr],
            MixRcPcM => vec![RbfCub, PolyCub, Mars],
            k => vec![k],
        }
    }

    pub fn is_mixture(self) -> bool {
        self.members().len() > 1
    }

    /// Fewest points for a well-posed fit in dimension `d`.
    pub fn min_points(self, d: usize) -> usize {
        use SurrogateKind::*;
        match self {
            RbfCub | RbfTps | RbfLin => d + 1,
            Mars | PolyLin => d + 2,
            PolyQuad => (d + 1) * (d + 2) / 2 + 1,
            PolyQuadr => 2 * d + 2,
            PolyCub => (d + 1) * (d + 2) * (d + 3) / 6 + 1,
            PolyCubr => 3 * d + 2,
            mix => mix.members().into_iter().map(|k| k.min_points(d)).max().unwrap_or(0),
        }
    }
}

impl fmt::Display for SurrogateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for SurrogateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SurrogateKind::ALL
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| {
                let valid: Vec<_> = SurrogateKind::ALL.iter().map(|k| k.tag()).collect();
                Error::config(format!("unknown surrogate `{s}`; valid: {}", valid.join(", ")))
            })
    }
}

/// A fitted surrogate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Surrogate {
    Rbf(RbfModel),
    Poly(PolyModel),
    Mars(MarsModel),
    Ensemble(EnsembleModel),
}

impl Surrogate {
    pub fn dim(&self) -> usize {
        match self {
            Surrogate::Rbf(m) => m.dim(),
            Surrogate::Poly(m) => m.dim(),
            Surrogate::Mars(m) => m.dim(),
            Surrogate::Ensemble(m) => m.dim(),
        }
    }

    /// Prediction at a single point of the right dimension.
    pub fn predict_one(&self, x: &[f64]) -> f64 {
        match self {
            Surrogate::Rbf(m) => m.predict_one(x),
            Surrogate::Poly(m) => m.predict_one(x),
            Surrogate::Mars(m) => m.predict_one(x),
            Surrogate::Ensemble(m) => m.predict_one(x),
        }
    }

    pub fn predict(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        let d = self.dim();
        xs.iter()
            .map(|x| {
                if x.len() != d {
                    Err(Error::Dimension { expected: d, got: x.len() })
                } else {
                    Ok(self.predict_one(x))
                }
            })
            .collect()
    }

    /// Ensemble weights, if this is a mixture.
    pub fn weights(&self) -> Option<Vec<f64>> {
        match self {
            Surrogate::Ensemble(m) => Some(m.weights()),
            _ => None,
        }
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string_pretty(self).expect("models serialize")
    }

    pub fn from_text(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config(format!("model dump: {e}")))
    }
}

/// Default MARS settings for dimension `d`.
pub fn mars_defaults(d: usize) -> MarsOptions {
    MarsOptions {
        max_terms: (2 * d + 1).min(21),
        max_interaction: 2,
        penalty: 3.0,
    }
}

fn fit_single(kind: SurrogateKind, points: &[Vec<f64>], values: &[f64]) -> Result<Surrogate> {
    use SurrogateKind::*;
    let d = points.first().map_or(0, |p| p.len());
    Ok(match kind {
        RbfCub => Surrogate::Rbf(fit_rbf(points, values, Kernel::Cubic)?),
        RbfTps => Surrogate::Rbf(fit_rbf(points, values, Kernel::ThinPlate)?),
        RbfLin => Surrogate::Rbf(fit_rbf(points, values, Kernel::Linear)?),
        Mars => Surrogate::Mars(fit_mars(points, values, &mars_defaults(d))?),
        PolyLin => Surrogate::Poly(fit_poly(points, values, PolyVariant::Lin)?),
        PolyQuad => Surrogate::Poly(fit_poly(points, values, PolyVariant::Quad)?),
        PolyQuadr => Surrogate::Poly(fit_poly(points, values, PolyVariant::Quadr)?),
        PolyCub => Surrogate::Poly(fit_poly(points, values, PolyVariant::Cub)?),
        PolyCubr => Surrogate::Poly(fit_poly(points, values, PolyVariant::Cubr)?),
        mix => return Err(Error::config(format!("{mix} is a mixture, not a single model"))),
    })
}

/// Fits any model or mixture from the vocabulary.
pub fn fit(kind: SurrogateKind, points: &[Vec<f64>], values: &[f64]) -> Result<Surrogate> {
    if points.len() != values.len() {
        return Err(Error::Dimension { expected: points.len(), got: values.len() });
    }
    if points.is_empty() {
        return Err(Error::numerical("cannot fit a surrogate to zero points"));
    }
    if kind.is_mixture() {
        Ok(Surrogate::Ensemble(fit_ensemble(points, values, &kind.members())?))
    } else {
        fit_single(kind, points, values)
    }
}

/// A surrogate fitted in unit-box coordinates of a problem and queried in
/// the problem's own coordinates.
#[derive(Clone, Debug)]
pub struct ScaledSurrogate {
    model: Surrogate,
    lower: Vec<f64>,
    side: Vec<f64>,
}

impl ScaledSurrogate {
    pub fn fit(kind: SurrogateKind, spec: &ProblemSpec, points: &[Vec<f64>], values: &[f64]) -> Result<Self> {
        let lower = spec.lower().to_vec();
        let side: Vec<f64> = (0..spec.dim()).map(|i| spec.side(i)).collect();
        let scaled: Vec<Vec<f64>> = points
            .iter()
            .map(|p| p.iter().enumerate().map(|(i, v)| (v - lower[i]) / side[i]).collect())
            .collect();
        let model = fit(kind, &scaled, values)?;
        Ok(ScaledSurrogate { model, lower, side })
    }

    pub fn predict_one(&self, x: &[f64]) -> f64 {
        let u: Vec<f64> = x
            .iter()
            .enumerate()
            .map(|(i, v)| (v - self.lower[i]) / self.side[i])
            .collect();
        self.model.predict_one(&u)
    }

    pub fn model(&self) -> &Surrogate {
        &self.model
    }
}

/// Anything that predicts objective values at points of the problem space.
pub trait Predictor {
    fn predict_at(&self, x: &[f64]) -> f64;
}

impl Predictor for Surrogate {
    fn predict_at(&self, x: &[f64]) -> f64 {
        self.predict_one(x)
    }
}

impl Predictor for ScaledSurrogate {
    fn predict_at(&self, x: &[f64]) -> f64 {
        self.predict_one(x)
    }
}

impl<F: Fn(&[f64]) -> f64> Predictor for F {
    fn predict_at(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_roundtrip() {
        for k in SurrogateKind::ALL {
            assert_eq!(k.tag().parse::<SurrogateKind>().unwrap(), k);
        }
        let err = "RBFfancy".parse::<SurrogateKind>().unwrap_err().to_string();
        assert!(err.contains("MIX_RcPcM") && err.contains("RBFcub"));
    }

    #[test]
    fn minimum_sizes() {
        assert_eq!(SurrogateKind::RbfCub.min_points(5), 6);
        assert_eq!(SurrogateKind::PolyQuad.min_points(3), 11);
        assert_eq!(SurrogateKind::MixRcM.min_points(4), 6);
        // C(d+3, 3) + 1
        assert_eq!(SurrogateKind::PolyCub.min_points(2), 11);
        assert_eq!(SurrogateKind::PolyCubr.min_points(2), 8);
        assert_eq!(SurrogateKind::MixRcPcM.min_points(2), 11);
    }

    #[test]
    fn dump_roundtrip() {
        let pts: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 / 7.0, ((i * 3) % 8) as f64 / 7.0]).collect();
        let vals: Vec<f64> = pts.iter().map(|p| (3.0 * p[0]).sin() + p[1] * p[1]).collect();
        for kind in [SurrogateKind::RbfTps, SurrogateKind::PolyQuadr, SurrogateKind::MixRcM] {
            let m = fit(kind, &pts, &vals).unwrap();
            let back = Surrogate::from_text(&m.to_text()).unwrap();
            assert_eq!(m, back);
        }
    }

    #[test]
    fn predict_checks_dimension() {
        let pts = vec![vec![0.0], vec![1.0], vec![2.0]];
        let m = fit(SurrogateKind::RbfCub, &pts, &[0.0, 1.0, 4.0]).unwrap();
        assert!(matches!(m.predict(&[vec![0.0, 1.0]]), Err(Error::Dimension { .. })));
    }
}
