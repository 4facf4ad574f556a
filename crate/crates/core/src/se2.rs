//! The roto-translation group SE(2), its Lie algebra in canonical coordinates
//! of the first kind, and the step-2 nilpotent approximation used for fast
//! distance estimates.
//!
//! Elements are stored as `(x, y, θ)` with θ wrapped to `(−π, π]`. Algebra
//! coordinates `(c1, c2, c3)` refer to the basis `A1 = ∂θ`, `A2 = ∂x`,
//! `A3 = ∂y` at the identity.

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Logarithm;

/// Homogeneous dimension of the nilpotent approximation (weights 1 + 1 + 2).
pub const HOMOGENEOUS_DIMENSION: i32 = 4;

/// Default ζ for [`approx_distance`].
pub const DEFAULT_ZETA: f64 = 44.0;

/// Small-angle threshold below which series expansions replace closed forms.
const SERIES_THRESHOLD: f64 = 1e-6;

/// Wraps an angle to `(−π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// A rigid motion of the plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Se2 {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

/// Lie-algebra coefficients `(c1, c2, c3)` in the basis `(∂θ, ∂x, ∂y)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Se2Coords {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl Se2 {
    pub const IDENTITY: Se2 = Se2 {
        x: 0.0,
        y: 0.0,
        theta: 0.0,
    };

    /// Builds an element, wrapping `theta` to `(−π, π]`.
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Se2 {
            x,
            y,
            theta: wrap_angle(theta),
        }
    }

    /// Group product `(R_θ x′ + x, θ + θ′)`.
    pub fn compose(&self, other: &Se2) -> Se2 {
        let (s, c) = self.theta.sin_cos();
        Se2::new(
            c * other.x - s * other.y + self.x,
            s * other.x + c * other.y + self.y,
            self.theta + other.theta,
        )
    }

    pub fn inverse(&self) -> Se2 {
        let (s, c) = self.theta.sin_cos();
        Se2::new(
            -(c * self.x + s * self.y),
            -(-s * self.x + c * self.y),
            -self.theta,
        )
    }

    /// Principal logarithm. Always defined on `(−π, π]`.
    pub fn log(&self) -> Se2Coords {
        let t = self.theta;
        let k = half_cot_factor(t);
        Se2Coords {
            c1: t,
            c2: k * self.x + 0.5 * t * self.y,
            c3: -0.5 * t * self.x + k * self.y,
        }
    }

    /// Logarithm together with a flag raised on the cut locus `θ = π`.
    pub fn log_flagged(&self) -> Logarithm<Se2Coords> {
        Logarithm {
            coords: self.log(),
            near_cut_locus: PI - self.theta.abs() < SERIES_THRESHOLD,
        }
    }

    /// Left-invariant frame `[𝒜1, 𝒜2, 𝒜3]` as vectors in `(x, y, θ)` coordinates.
    pub fn frame(&self) -> [Vector3<f64>; 3] {
        let (s, c) = self.theta.sin_cos();
        [
            Vector3::new(0.0, 0.0, 1.0),
            Vector3::new(c, s, 0.0),
            Vector3::new(-s, c, 0.0),
        ]
    }

    /// 3×3 homogeneous matrix representation.
    pub fn to_matrix(&self) -> Matrix3<f64> {
        let (s, c) = self.theta.sin_cos();
        Matrix3::new(c, -s, self.x, s, c, self.y, 0.0, 0.0, 1.0)
    }

    /// Reads back a homogeneous matrix; the rotation block is trusted.
    pub fn from_matrix(m: &Matrix3<f64>) -> Se2 {
        Se2::new(m[(0, 2)], m[(1, 2)], m[(1, 0)].atan2(m[(0, 0)]))
    }

    /// The same position with the opposite orientation (θ + π).
    pub fn antipode(&self) -> Se2 {
        Se2::new(self.x, self.y, self.theta + PI)
    }
}

/// `(θ/2) cot(θ/2)` with its removable singularity at 0 filled in.
fn half_cot_factor(t: f64) -> f64 {
    if t.abs() < SERIES_THRESHOLD {
        1.0 - t * t / 12.0
    } else {
        let h = 0.5 * t;
        h * h.cos() / h.sin()
    }
}

impl Se2Coords {
    pub const ZERO: Se2Coords = Se2Coords {
        c1: 0.0,
        c2: 0.0,
        c3: 0.0,
    };

    pub fn new(c1: f64, c2: f64, c3: f64) -> Self {
        Se2Coords { c1, c2, c3 }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.c1, self.c2, self.c3]
    }

    /// Group exponential. The resulting angle is `c1` wrapped.
    pub fn exp(&self) -> Se2 {
        let t = self.c1;
        let (a, b) = if t.abs() < SERIES_THRESHOLD {
            (1.0 - t * t / 6.0, 0.5 * t - t * t * t / 24.0)
        } else {
            (t.sin() / t, (1.0 - t.cos()) / t)
        };
        Se2::new(a * self.c2 - b * self.c3, b * self.c2 + a * self.c3, t)
    }

    /// Matrix form `c1 A1 + c2 A2 + c3 A3` in the homogeneous representation.
    pub fn hat(&self) -> Matrix3<f64> {
        Matrix3::new(
            0.0, -self.c1, self.c2, //
            self.c1, 0.0, self.c3, //
            0.0, 0.0, 0.0,
        )
    }

    /// Inverse of [`Se2Coords::hat`].
    pub fn vee(m: &Matrix3<f64>) -> Se2Coords {
        Se2Coords::new(0.5 * (m[(1, 0)] - m[(0, 1)]), m[(0, 2)], m[(1, 2)])
    }

    /// Lie bracket from `[A1, A2] = A3`, `[A1, A3] = −A2`, `[A2, A3] = 0`.
    pub fn bracket(&self, o: &Se2Coords) -> Se2Coords {
        Se2Coords::new(
            0.0,
            -(self.c1 * o.c3 - self.c3 * o.c1),
            self.c1 * o.c2 - self.c2 * o.c1,
        )
    }

    /// Product in the Heisenberg approximation `(SE(2))₀`.
    pub fn nilpotent_compose(&self, b: &Se2Coords) -> Se2Coords {
        Se2Coords::new(
            self.c1 + b.c1,
            self.c2 + b.c2,
            self.c3 + b.c3 + 0.5 * (self.c1 * b.c2 - self.c2 * b.c1),
        )
    }

    /// Anisotropic dilation `(s c1, s c2, s² c3)`.
    pub fn dilate(&self, s: f64) -> Result<Se2Coords> {
        if !(s > 0.0) {
            return Err(Error::param(
                "s",
                format!("dilation factor must be positive, got {s}"),
            ));
        }
        Ok(Se2Coords::new(s * self.c1, s * self.c2, s * s * self.c3))
    }

    /// ξ-isotropic gauge norm `((c1² + ξ²c2²)² + ζ ξ² c3²)^{1/4}`.
    pub fn gauge_norm(&self, xi: f64, zeta: f64) -> f64 {
        let h = self.c1 * self.c1 + xi * xi * self.c2 * self.c2;
        (h * h + zeta * xi * xi * self.c3 * self.c3).sqrt().sqrt()
    }

    /// `‖c‖^{2−Q}` with ξ = 1 and ζ = 16, proportional to the sub-Laplacian
    /// fundamental solution of the approximating group.
    pub fn fundamental_gauge(&self) -> Result<f64> {
        let n = self.gauge_norm(1.0, 16.0);
        if n == 0.0 {
            return Err(Error::Singularity);
        }
        Ok(n.powi(2 - HOMOGENEOUS_DIMENSION))
    }

    pub fn norm_squared(&self) -> f64 {
        self.c1 * self.c1 + self.c2 * self.c2 + self.c3 * self.c3
    }
}

impl Add for Se2Coords {
    type Output = Se2Coords;
    fn add(self, o: Se2Coords) -> Se2Coords {
        Se2Coords::new(self.c1 + o.c1, self.c2 + o.c2, self.c3 + o.c3)
    }
}

impl Sub for Se2Coords {
    type Output = Se2Coords;
    fn sub(self, o: Se2Coords) -> Se2Coords {
        Se2Coords::new(self.c1 - o.c1, self.c2 - o.c2, self.c3 - o.c3)
    }
}

impl Neg for Se2Coords {
    type Output = Se2Coords;
    fn neg(self) -> Se2Coords {
        Se2Coords::new(-self.c1, -self.c2, -self.c3)
    }
}

impl Mul<f64> for Se2Coords {
    type Output = Se2Coords;
    fn mul(self, s: f64) -> Se2Coords {
        Se2Coords::new(s * self.c1, s * self.c2, s * self.c3)
    }
}

/// Analytic approximation `‖Log(g⁻¹h)‖_{ξ,ζ}` of the sub-Riemannian distance.
pub fn approx_distance(g: &Se2, h: &Se2, xi: f64, zeta: f64) -> f64 {
    g.inverse().compose(h).log().gauge_norm(xi, zeta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn wrap_is_half_open() {
        assert_eq!(wrap_angle(PI), PI);
        assert_abs_diff_eq!(wrap_angle(-PI), PI);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(0.5 + TAU), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn compose_example() {
        let g = Se2::new(1.0, 0.0, FRAC_PI_2);
        let r = g.compose(&Se2::new(1.0, 0.0, 0.0));
        assert_abs_diff_eq!(r.x, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.y, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.theta, FRAC_PI_2);
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(Se2::IDENTITY.inverse(), Se2::IDENTITY);
        let t = Se2::new(1.0, 0.0, 0.0).inverse();
        assert_abs_diff_eq!(t.x, -1.0);
        let r = Se2::new(1.0, 0.0, FRAC_PI_2).inverse();
        assert_abs_diff_eq!(r.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.y, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.theta, -FRAC_PI_2);
    }

    #[test]
    fn log_examples() {
        assert_eq!(Se2::new(1.0, 2.0, 0.0).log(), Se2Coords::new(0.0, 1.0, 2.0));
        assert_eq!(Se2::IDENTITY.log(), Se2Coords::ZERO);
        let c = Se2::new(1.0, 0.0, FRAC_PI_2).log();
        assert_abs_diff_eq!(c.c1, FRAC_PI_2);
        assert_abs_diff_eq!(c.c2, PI / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(c.c3, -PI / 4.0, epsilon = 1e-15);
    }

    #[test]
    fn log_flags_cut_locus() {
        assert!(Se2::new(1.0, 1.0, PI).log_flagged().near_cut_locus);
        assert!(!Se2::new(1.0, 1.0, 3.0).log_flagged().near_cut_locus);
    }

    #[test]
    fn series_matches_closed_form_at_threshold() {
        for t in [0.999e-6, -0.999e-6] {
            let h = 0.5 * t;
            assert_abs_diff_eq!(half_cot_factor(t), h / h.tan(), epsilon = 1e-12);
        }
        let g = Se2::new(0.3, -0.7, 0.5e-6);
        let c = g.log();
        assert_abs_diff_eq!(c.exp().x, g.x, epsilon = 1e-14);
        assert_abs_diff_eq!(c.exp().y, g.y, epsilon = 1e-14);
    }

    #[test]
    fn exp_examples() {
        assert_eq!(Se2Coords::ZERO.exp(), Se2::IDENTITY);
        let t = Se2Coords::new(0.0, 0.4, -1.5).exp();
        assert_eq!((t.x, t.y, t.theta), (0.4, -1.5, 0.0));
        let g = Se2Coords::new(FRAC_PI_2, PI / 4.0, -PI / 4.0).exp();
        assert_abs_diff_eq!(g.x, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.y, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g.theta, FRAC_PI_2);
    }

    #[test]
    fn frame_at_quarter_turn() {
        let f = Se2::new(0.0, 0.0, FRAC_PI_2).frame();
        assert_abs_diff_eq!(f[1][0], 0.0, epsilon = 1e-16);
        assert_abs_diff_eq!(f[1][1], 1.0);
        let id = Se2::IDENTITY.frame();
        assert_eq!(id[0], Vector3::z());
        assert_eq!(id[1], Vector3::x());
        assert_eq!(id[2], Vector3::y());
    }

    #[test]
    fn nilpotent_examples() {
        let r = Se2Coords::new(1.0, 0.0, 0.0).nilpotent_compose(&Se2Coords::new(0.0, 1.0, 0.0));
        assert_eq!(r, Se2Coords::new(1.0, 1.0, 0.5));
        let c = Se2Coords::new(0.3, -2.0, 1.1);
        assert_eq!(c.nilpotent_compose(&-c), Se2Coords::ZERO);
        assert_eq!(Se2Coords::ZERO.nilpotent_compose(&c), c);
    }

    #[test]
    fn dilation_examples() {
        let c = Se2Coords::new(1.0, 1.0, 1.0);
        assert_eq!(c.dilate(1.0).unwrap(), c);
        assert_eq!(c.dilate(2.0).unwrap(), Se2Coords::new(2.0, 2.0, 4.0));
        assert!(c.dilate(0.0).is_err());
        assert!(c.dilate(-1.0).is_err());
    }

    #[test]
    fn gauge_examples() {
        assert_eq!(Se2Coords::ZERO.gauge_norm(1.0, 44.0), 0.0);
        assert_eq!(Se2Coords::new(1.0, 0.0, 0.0).gauge_norm(1.0, 7.0), 1.0);
        assert_abs_diff_eq!(Se2Coords::new(0.0, 0.0, 1.0).gauge_norm(1.0, 16.0), 2.0);
    }

    #[test]
    fn fundamental_gauge_examples() {
        assert!(Se2Coords::ZERO.fundamental_gauge().is_err());
        assert_abs_diff_eq!(
            Se2Coords::new(0.0, 1.0, 0.0).fundamental_gauge().unwrap(),
            1.0
        );
        let c = Se2Coords::new(0.2, -0.5, 0.3);
        let s: f64 = 1.7;
        let scaled = c.dilate(s).unwrap().fundamental_gauge().unwrap();
        assert_abs_diff_eq!(
            scaled,
            s.powi(2 - HOMOGENEOUS_DIMENSION) * c.fundamental_gauge().unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn distance_to_self_is_zero() {
        let g = Se2::new(0.3, 2.0, -1.0);
        assert_abs_diff_eq!(approx_distance(&g, &g, 1.0, 44.0), 0.0, epsilon = 1e-15);
    }
}
