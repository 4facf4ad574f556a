//! The metric family used for tracking: Euclidean on ℝⁿ, ξ-isotropic
//! Riemannian on SE(n), and (ε-relaxed) sub-Riemannian on SE(n), each scaled
//! by a data-driven cost.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::LiftedGrid;
use crate::se2::Se2;
use crate::se3::OrientedPoint3;

/// Base manifold of a metric.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Manifold {
    R2,
    R3,
    SE2,
    SE3,
}

/// Which row of the metric family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricMode {
    Euclidean,
    Riemannian,
    SubRiemannian,
}

/// A fully specified metric with cost parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub manifold: Manifold,
    pub mode: MetricMode,
    #[serde(default = "default_xi")]
    pub xi: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "default_p")]
    pub p: f64,
}

fn default_xi() -> f64 {
    1.0
}

fn default_epsilon() -> f64 {
    0.1
}

fn default_p() -> f64 {
    1.0
}

impl MetricSpec {
    pub fn euclidean(manifold: Manifold) -> Self {
        MetricSpec {
            manifold,
            mode: MetricMode::Euclidean,
            xi: 1.0,
            epsilon: 1.0,
            lambda: 0.0,
            p: 1.0,
        }
    }

    pub fn riemannian(manifold: Manifold, xi: f64) -> Self {
        MetricSpec {
            manifold,
            mode: MetricMode::Riemannian,
            xi,
            epsilon: 1.0,
            lambda: 0.0,
            p: 1.0,
        }
    }

    pub fn sub_riemannian(manifold: Manifold, xi: f64, epsilon: f64) -> Self {
        MetricSpec {
            manifold,
            mode: MetricMode::SubRiemannian,
            xi,
            epsilon,
            lambda: 0.0,
            p: 1.0,
        }
    }

    /// Sets the cost parameters `(λ, p)`.
    pub fn with_cost(mut self, lambda: f64, p: f64) -> Self {
        self.lambda = lambda;
        self.p = p;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let lifted = matches!(self.manifold, Manifold::SE2 | Manifold::SE3);
        match self.mode {
            MetricMode::Euclidean if lifted => {
                return Err(Error::param("mode", "euclidean mode applies to R2 or R3"))
            }
            MetricMode::Riemannian | MetricMode::SubRiemannian if !lifted => {
                return Err(Error::param("mode", "lifted modes require SE2 or SE3"))
            }
            _ => {}
        }
        if !(self.xi > 0.0) || !self.xi.is_finite() {
            return Err(Error::param("xi", "must be positive"));
        }
        if self.mode == MetricMode::SubRiemannian && !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::param("epsilon", "must lie in (0, 1]"));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::param("lambda", "must be non-negative"));
        }
        if !(self.p > 0.0) || !self.p.is_finite() {
            return Err(Error::param("p", "must be positive"));
        }
        Ok(())
    }

    /// Number of tangent coefficients for this manifold.
    pub fn tangent_dim(&self) -> usize {
        match self.manifold {
            Manifold::R2 => 2,
            Manifold::R3 => 3,
            Manifold::SE2 => 3,
            Manifold::SE3 => 6,
        }
    }

    pub fn spatial_dim(&self) -> usize {
        match self.manifold {
            Manifold::R2 | Manifold::SE2 => 2,
            Manifold::R3 | Manifold::SE3 => 3,
        }
    }

    /// Squared weights of the frame coefficients (cost excluded).
    ///
    /// SE(2) coefficients are `(u1, u2, u3)` along `(𝒜1, 𝒜2, 𝒜3)`; SE(3)
    /// coefficients are `(u1..u6)` along `(𝒜1..𝒜6)`.
    pub fn frame_weights(&self) -> Vec<f64> {
        let x2 = self.xi * self.xi;
        let e2 = self.epsilon * self.epsilon;
        match (self.manifold, self.mode) {
            (Manifold::R2, _) => vec![1.0, 1.0],
            (Manifold::R3, _) => vec![1.0, 1.0, 1.0],
            (Manifold::SE2, MetricMode::SubRiemannian) => vec![1.0, x2, x2 / e2],
            (Manifold::SE2, _) => vec![1.0, x2, x2],
            (Manifold::SE3, MetricMode::SubRiemannian) => {
                vec![x2 / e2, x2 / e2, x2, 1.0, 1.0, 1.0 / e2]
            }
            (Manifold::SE3, _) => vec![x2, x2, x2, 1.0, 1.0, 1.0],
        }
    }

    /// Whether the spatial block of the metric is isotropic.
    pub fn spatially_isotropic(&self) -> bool {
        self.mode != MetricMode::SubRiemannian || self.epsilon == 1.0
    }

    /// Checks that a lifted grid carries the orientation axis this metric needs.
    pub fn check_grid(&self, grid: &LiftedGrid) -> Result<()> {
        self.validate()?;
        if grid.spatial.ndim() != self.spatial_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.spatial_dim(),
                actual: grid.spatial.ndim(),
            });
        }
        let want = match self.manifold {
            Manifold::R2 | Manifold::R3 => 0,
            Manifold::SE2 => 2,
            Manifold::SE3 => 3,
        };
        if grid.orientations.ambient_dim() != want {
            return Err(Error::param(
                "grid",
                format!(
                    "{:?} metric needs {want}D orientation samples",
                    self.manifold
                ),
            ));
        }
        Ok(())
    }
}

/// Metric length `C √(𝒢(u, u))` of a tangent vector in frame coefficients.
pub fn metric_norm(t: &[f64], spec: &MetricSpec, cost: f64) -> Result<f64> {
    if t.len() != spec.tangent_dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.tangent_dim(),
            actual: t.len(),
        });
    }
    let q: f64 = spec
        .frame_weights()
        .iter()
        .zip(t)
        .map(|(w, u)| w * u * u)
        .sum();
    Ok(cost * q.sqrt())
}

/// Cost `1 / (1 + λ 𝒱^p)` from a vesselness value in `[0, 1]`.
pub fn cost_from_vesselness(v: f64, lambda: f64, p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::param("v", format!("vesselness {v} outside [0, 1]")));
    }
    if !(lambda >= 0.0) {
        return Err(Error::param("lambda", "must be non-negative"));
    }
    if !(p > 0.0) {
        return Err(Error::param("p", "must be positive"));
    }
    if lambda == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 / (1.0 + lambda * v.powf(p)))
}

/// Per-node cost values on a lifted grid (orientation-major layout).
#[derive(Clone, Debug, PartialEq)]
pub struct CostField {
    pub grid: LiftedGrid,
    values: Vec<f32>,
}

impl CostField {
    pub fn new(grid: LiftedGrid, values: Vec<f32>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        if let Some(bad) = values.iter().find(|&&c| !(c > 0.0 && c <= 1.0)) {
            return Err(Error::param("cost", format!("value {bad} outside (0, 1]")));
        }
        Ok(CostField { grid, values })
    }

    pub fn uniform(grid: LiftedGrid) -> Self {
        let n = grid.len();
        CostField {
            grid,
            values: vec![1.0; n],
        }
    }

    /// Cost `1 / (1 + λ 𝒱^p)` from a vesselness volume on the same grid.
    pub fn from_vesselness(
        grid: LiftedGrid,
        vesselness: &[f32],
        lambda: f64,
        p: f64,
    ) -> Result<Self> {
        if vesselness.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                actual: vesselness.len(),
            });
        }
        let values = vesselness
            .iter()
            .map(|&v| {
                cost_from_vesselness(f64::from(v).clamp(0.0, 1.0), lambda, p).map(|c| c as f32)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, values)
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn at(&self, node: usize) -> f64 {
        f64::from(self.values[node])
    }
}

/// Points with an orientation whose sign can be flipped.
pub trait Projective: Sized {
    fn antipode(&self) -> Self;
}

impl Projective for Se2 {
    fn antipode(&self) -> Self {
        Se2::antipode(self)
    }
}

impl Projective for OrientedPoint3 {
    fn antipode(&self) -> Self {
        OrientedPoint3::antipode(self)
    }
}

/// Distance on the projective line bundle: the smaller of the distances to
/// `target` and to its antipode.
pub fn projective_distance<P, E>(
    d: impl Fn(&P) -> std::result::Result<f64, E>,
    target: &P,
) -> std::result::Result<f64, E>
where
    P: Projective,
{
    let a = d(target)?;
    let b = d(&target.antipode())?;
    Ok(a.min(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn norm_examples() {
        let sr = MetricSpec::sub_riemannian(Manifold::SE2, 1.0, 0.1);
        assert_eq!(metric_norm(&[0.0; 3], &sr, 1.0).unwrap(), 0.0);
        assert_eq!(metric_norm(&[1.0, 0.0, 0.0], &sr, 1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(
            metric_norm(&[0.0, 0.0, 1.0], &sr, 1.0).unwrap(),
            10.0,
            epsilon = 1e-12
        );
        assert!(metric_norm(&[1.0, 0.0], &sr, 1.0).is_err());
    }

    #[test]
    fn se3_weights() {
        let sr = MetricSpec::sub_riemannian(Manifold::SE3, 2.0, 0.5);
        assert_abs_diff_eq!(
            metric_norm(&[0.0, 0.0, 1.0, 0.0, 0.0, 0.0], &sr, 1.0).unwrap(),
            2.0
        );
        assert_abs_diff_eq!(
            metric_norm(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], &sr, 1.0).unwrap(),
            4.0
        );
        assert_abs_diff_eq!(
            metric_norm(&[0.0, 0.0, 0.0, 0.0, 0.0, 1.0], &sr, 1.0).unwrap(),
            2.0
        );
        let r = MetricSpec::riemannian(Manifold::SE3, 2.0);
        assert_abs_diff_eq!(
            metric_norm(&[0.0, 0.0, 0.0, 0.0, 0.0, 1.0], &r, 0.5).unwrap(),
            0.5
        );
    }

    #[test]
    fn cost_examples() {
        assert_eq!(cost_from_vesselness(0.0, 100.0, 1.0).unwrap(), 1.0);
        assert_abs_diff_eq!(cost_from_vesselness(1.0, 100.0, 1.0).unwrap(), 1.0 / 101.0);
        assert_eq!(cost_from_vesselness(0.7, 0.0, 2.0).unwrap(), 1.0);
        assert!(cost_from_vesselness(1.2, 1.0, 1.0).is_err());
        assert!(cost_from_vesselness(-0.1, 1.0, 1.0).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(MetricSpec::sub_riemannian(Manifold::R2, 1.0, 0.1)
            .validate()
            .is_err());
        assert!(MetricSpec::euclidean(Manifold::SE2).validate().is_err());
        assert!(MetricSpec::sub_riemannian(Manifold::SE2, 1.0, 0.0)
            .validate()
            .is_err());
        assert!(MetricSpec::riemannian(Manifold::SE3, -1.0)
            .validate()
            .is_err());
        assert!(MetricSpec::euclidean(Manifold::R3).validate().is_ok());
    }

    #[test]
    fn spec_json_keys() {
        let s = MetricSpec::sub_riemannian(Manifold::SE3, 1.0, 0.1).with_cost(100.0, 1.0);
        let v: serde_json::Value = serde_json::to_value(s).unwrap();
        let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["epsilon", "lambda", "manifold", "mode", "p", "xi"]);
        assert_eq!(v["mode"], "subriemannian");
        let back: MetricSpec = serde_json::from_value(v).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn cost_field_rejects_nonpositive() {
        let g = LiftedGrid::new(
            crate::grid::SpatialGrid::unit(vec![2, 2]).unwrap(),
            crate::grid::OrientationSampling::None,
        )
        .unwrap();
        assert!(CostField::new(g.clone(), vec![1.0, 0.5, 0.0, 1.0]).is_err());
        assert!(CostField::new(g, vec![1.0, 0.5, 0.2, 1.0]).is_ok());
    }

    #[test]
    fn projective_takes_min() {
        let d = |p: &Se2| -> Result<f64> { Ok(p.theta.abs()) };
        let v = projective_distance(d, &Se2::new(1.0, 0.0, 3.0)).unwrap();
        assert_abs_diff_eq!(v, std::f64::consts::PI - 3.0, epsilon = 1e-12);
    }
}
