//! The rigid-motion group SE(3), rotation exponential and logarithm, the
//! quotient lift from oriented points `ℝ³ × S²` with the `α = −γ` section, and
//! the free step-2 nilpotent approximation `(SE(3))₀`.
//!
//! Algebra coordinates `c = (c1..c6)` use translations `X1..X3` along the
//! body axes and rotations `X4..X6` about them. The horizontal directions of
//! the sub-Riemannian structure are `X3` (forward), `X4` and `X5` (bending).

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Logarithm;

/// Homogeneous dimension of `(SE(3))₀` with weights `(2, 2, 1, 1, 1, 2)`.
pub const HOMOGENEOUS_DIMENSION: i32 = 9;

/// Dilation weights of the six coordinates.
pub const DILATION_WEIGHTS: [i32; 6] = [2, 2, 1, 1, 1, 2];

/// Default ζ for [`approx_distance`].
pub const DEFAULT_ZETA: f64 = 100.0;

/// Tolerance on `‖RᵀR − I‖` and `|det R − 1|` accepted by [`Se3::new`].
pub const ROTATION_TOLERANCE: f64 = 1e-10;

const SERIES_THRESHOLD: f64 = 1e-6;

/// Skew-symmetric matrix `[w]×` with `[w]× v = w × v`.
pub fn hat(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w.z, w.y, w.z, 0.0, -w.x, -w.y, w.x, 0.0)
}

/// Inverse of [`hat`] using the antisymmetric part of `m`.
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// Rotation by `angle` about `e_x`.
pub fn rot_x(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// Rotation by `angle` about `e_y`.
pub fn rot_y(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

/// Rotation by `angle` about `e_z`.
pub fn rot_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Largest deviation of `m` from being a proper rotation.
pub fn rotation_defect(m: &Matrix3<f64>) -> f64 {
    let orth = (m.transpose() * m - Matrix3::identity()).abs().max();
    orth.max((m.determinant() - 1.0).abs())
}

/// Rodrigues formula for the rotation with axis-angle vector `w`.
pub fn rot_exp(w: &Vector3<f64>) -> Matrix3<f64> {
    let q2 = w.norm_squared();
    let q = q2.sqrt();
    let (a, b) = if q < SERIES_THRESHOLD {
        (1.0 - q2 / 6.0, 0.5 - q2 / 24.0)
    } else {
        (q.sin() / q, (1.0 - q.cos()) / q2)
    };
    let k = hat(w);
    Matrix3::identity() + k * a + k * k * b
}

/// Principal rotation logarithm with angle in `[0, π]`.
///
/// At angle π the axis is read from the symmetric part `(R + I)/2 = n nᵀ`
/// and its sign is chosen so the largest-magnitude component is positive;
/// `near_cut_locus` is raised in that case.
pub fn rot_log(r: &Matrix3<f64>) -> Logarithm<Vector3<f64>> {
    let cos_q = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let q = cos_q.acos();
    let anti = Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    );
    if q < SERIES_THRESHOLD {
        return Logarithm {
            coords: anti * (0.5 * (1.0 + q * q / 6.0)),
            near_cut_locus: false,
        };
    }
    if PI - q > SERIES_THRESHOLD {
        return Logarithm {
            coords: anti * (q / (2.0 * q.sin())),
            near_cut_locus: false,
        };
    }
    let b = (r + Matrix3::identity()) * 0.5;
    let k = (0..3)
        .max_by(|&i, &j| b[(i, i)].total_cmp(&b[(j, j)]))
        .unwrap_or(0);
    let mut n = b.column(k) / b[(k, k)].max(0.0).sqrt();
    n /= n.norm();
    if anti.norm() > 1e-12 {
        if n.dot(&anti) < 0.0 {
            n = -n;
        }
    } else {
        let m = n.iamax();
        if n[m] < 0.0 {
            n = -n;
        }
    }
    Logarithm {
        coords: n * q,
        near_cut_locus: true,
    }
}

/// `(1 − (q/2)cot(q/2)) / q²` with its limit at 0.
fn log_v_coeff(q: f64) -> f64 {
    if q < 1e-4 {
        1.0 / 12.0 + q * q / 720.0
    } else {
        let h = 0.5 * q;
        (1.0 - h * h.cos() / h.sin()) / (q * q)
    }
}

/// A rigid motion `(x, R)` of ℝ³.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Se3 {
    pub translation: Vector3<f64>,
    pub rotation: Matrix3<f64>,
}

/// Lie-algebra coefficients `(c1..c6)`; `c1..c3` spatial, `c4..c6` rotational.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Se3Coords(pub [f64; 6]);

/// A position with an unsigned-or-signed unit orientation on S².
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrientedPoint3 {
    pub position: Vector3<f64>,
    pub orientation: Vector3<f64>,
}

impl Se3 {
    pub fn identity() -> Se3 {
        Se3 {
            translation: Vector3::zeros(),
            rotation: Matrix3::identity(),
        }
    }

    /// Builds an element after checking that `rotation` is a proper rotation.
    pub fn new(translation: Vector3<f64>, rotation: Matrix3<f64>) -> Result<Se3> {
        let defect = rotation_defect(&rotation);
        if !(defect <= ROTATION_TOLERANCE) {
            return Err(Error::NotARotation { defect });
        }
        Ok(Se3 {
            translation,
            rotation,
        })
    }

    pub fn from_translation(translation: Vector3<f64>) -> Se3 {
        Se3 {
            translation,
            rotation: Matrix3::identity(),
        }
    }

    /// Group product `(x + R x′, R R′)`.
    pub fn compose(&self, o: &Se3) -> Se3 {
        Se3 {
            translation: self.translation + self.rotation * o.translation,
            rotation: self.rotation * o.rotation,
        }
    }

    pub fn inverse(&self) -> Se3 {
        let rt = self.rotation.transpose();
        Se3 {
            translation: -(rt * self.translation),
            rotation: rt,
        }
    }

    /// Projects the rotation block back onto SO(3) (polar decomposition).
    pub fn orthonormalized(&self) -> Se3 {
        let svd = self.rotation.svd(true, true);
        let (u, vt) = (svd.u.unwrap_or_default(), svd.v_t.unwrap_or_default());
        let mut r = u * vt;
        if r.determinant() < 0.0 {
            let mut u2 = u;
            u2.column_mut(2).neg_mut();
            r = u2 * vt;
        }
        Se3 {
            translation: self.translation,
            rotation: r,
        }
    }

    /// Principal logarithm in first-kind coordinates.
    pub fn log(&self) -> Se3Coords {
        self.log_flagged().coords
    }

    pub fn log_flagged(&self) -> Logarithm<Se3Coords> {
        let rl = rot_log(&self.rotation);
        let w = rl.coords;
        let q = w.norm();
        let om = hat(&w);
        let v_inv = Matrix3::identity() - om * 0.5 + om * om * log_v_coeff(q);
        let sp = v_inv * self.translation;
        Logarithm {
            coords: Se3Coords([sp.x, sp.y, sp.z, w.x, w.y, w.z]),
            near_cut_locus: rl.near_cut_locus,
        }
    }

    /// Left-invariant frame `𝒜i = g·Xi` as tangent vectors `(ẋ, Ṙ)`.
    pub fn frame(&self) -> [Se3Tangent; 6] {
        std::array::from_fn(|i| {
            if i < 3 {
                Se3Tangent {
                    translation: self.rotation.column(i).into_owned(),
                    rotation: Matrix3::zeros(),
                }
            } else {
                Se3Tangent {
                    translation: Vector3::zeros(),
                    rotation: self.rotation * hat(&Vector3::ith(i - 3, 1.0)),
                }
            }
        })
    }

    /// 4×4 homogeneous matrix representation.
    pub fn to_matrix(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_matrix(m: &Matrix4<f64>) -> Se3 {
        Se3 {
            translation: m.fixed_view::<3, 1>(0, 3).into_owned(),
            rotation: m.fixed_view::<3, 3>(0, 0).into_owned(),
        }
    }
}

/// A tangent vector at a group element: translation and rotation velocity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Se3Tangent {
    pub translation: Vector3<f64>,
    pub rotation: Matrix3<f64>,
}

impl Se3Coords {
    pub const ZERO: Se3Coords = Se3Coords([0.0; 6]);

    pub fn spatial(&self) -> Vector3<f64> {
        Vector3::new(self.0[0], self.0[1], self.0[2])
    }

    pub fn rotational(&self) -> Vector3<f64> {
        Vector3::new(self.0[3], self.0[4], self.0[5])
    }

    pub fn from_parts(spatial: Vector3<f64>, rotational: Vector3<f64>) -> Se3Coords {
        Se3Coords([
            spatial.x,
            spatial.y,
            spatial.z,
            rotational.x,
            rotational.y,
            rotational.z,
        ])
    }

    /// Closed-form group exponential.
    pub fn exp(&self) -> Se3 {
        let w = self.rotational();
        let q2 = w.norm_squared();
        let q = q2.sqrt();
        let (a, b) = if q < 1e-4 {
            (0.5 - q2 / 24.0, 1.0 / 6.0 - q2 / 120.0)
        } else {
            ((1.0 - q.cos()) / q2, (q - q.sin()) / (q2 * q))
        };
        let om = hat(&w);
        let v = Matrix3::identity() + om * a + om * om * b;
        Se3 {
            translation: v * self.spatial(),
            rotation: rot_exp(&w),
        }
    }

    /// 4×4 algebra matrix `Σ ci Xi`.
    pub fn hat(&self) -> Matrix4<f64> {
        let mut m = Matrix4::zeros();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&hat(&self.rotational()));
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.spatial());
        m
    }

    pub fn vee(m: &Matrix4<f64>) -> Se3Coords {
        let rot = vee(&m.fixed_view::<3, 3>(0, 0).into_owned());
        Se3Coords::from_parts(m.fixed_view::<3, 1>(0, 3).into_owned(), rot)
    }

    /// Lie bracket: `[(v, ω), (v′, ω′)] = (ω × v′ − ω′ × v, ω × ω′)`.
    pub fn bracket(&self, o: &Se3Coords) -> Se3Coords {
        let (v, w) = (self.spatial(), self.rotational());
        let (v2, w2) = (o.spatial(), o.rotational());
        Se3Coords::from_parts(w.cross(&v2) - w2.cross(&v), w.cross(&w2))
    }

    /// Product in the nilpotent approximation `(SE(3))₀`.
    pub fn nilpotent_compose(&self, b: &Se3Coords) -> Se3Coords {
        let a = &self.0;
        let b = &b.0;
        Se3Coords([
            a[0] + b[0] + 0.5 * (a[4] * b[2] - a[2] * b[4]),
            a[1] + b[1] + 0.5 * (a[2] * b[3] - a[3] * b[2]),
            a[2] + b[2],
            a[3] + b[3],
            a[4] + b[4],
            a[5] + b[5] + 0.5 * (a[3] * b[4] - a[4] * b[3]),
        ])
    }

    /// Dilation with weights `(2, 2, 1, 1, 1, 2)`.
    pub fn dilate(&self, s: f64) -> Result<Se3Coords> {
        if !(s > 0.0) {
            return Err(Error::param(
                "s",
                format!("dilation factor must be positive, got {s}"),
            ));
        }
        Ok(Se3Coords(std::array::from_fn(|i| {
            if DILATION_WEIGHTS[i] == 2 {
                s * s * self.0[i]
            } else {
                s * self.0[i]
            }
        })))
    }

    /// Gauge norm `((ξ²c3² + c4² + c5²)² + ζ(ξ²(c1² + c2²) + c6²))^{1/4}`.
    pub fn gauge_norm(&self, xi: f64, zeta: f64) -> f64 {
        let c = &self.0;
        let x2 = xi * xi;
        let h = x2 * c[2] * c[2] + c[3] * c[3] + c[4] * c[4];
        let v = x2 * (c[0] * c[0] + c[1] * c[1]) + c[5] * c[5];
        (h * h + zeta * v).sqrt().sqrt()
    }

    /// `‖c‖^{2−Q}` with ξ = 1 and ζ = 16.
    pub fn fundamental_gauge(&self) -> Result<f64> {
        let n = self.gauge_norm(1.0, 16.0);
        if n == 0.0 {
            return Err(Error::Singularity);
        }
        Ok(n.powi(2 - HOMOGENEOUS_DIMENSION))
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl Add for Se3Coords {
    type Output = Se3Coords;
    fn add(self, o: Se3Coords) -> Se3Coords {
        Se3Coords(std::array::from_fn(|i| self.0[i] + o.0[i]))
    }
}

impl Sub for Se3Coords {
    type Output = Se3Coords;
    fn sub(self, o: Se3Coords) -> Se3Coords {
        Se3Coords(std::array::from_fn(|i| self.0[i] - o.0[i]))
    }
}

impl Neg for Se3Coords {
    type Output = Se3Coords;
    fn neg(self) -> Se3Coords {
        Se3Coords(self.0.map(|v| -v))
    }
}

impl Mul<f64> for Se3Coords {
    type Output = Se3Coords;
    fn mul(self, s: f64) -> Se3Coords {
        Se3Coords(self.0.map(|v| s * v))
    }
}

impl OrientedPoint3 {
    /// Builds an oriented point, normalizing `orientation`.
    pub fn new(position: Vector3<f64>, orientation: Vector3<f64>) -> Result<Self> {
        let n = orientation.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::param(
                "orientation",
                "must be a nonzero finite vector",
            ));
        }
        Ok(OrientedPoint3 {
            position,
            orientation: orientation / n,
        })
    }

    pub fn antipode(&self) -> Self {
        OrientedPoint3 {
            position: self.position,
            orientation: -self.orientation,
        }
    }

    /// Section `R = R_z(γ) R_y(β) R_z(−γ)` of the quotient, so `R e_z = n`.
    pub fn lift(&self) -> Se3 {
        Se3 {
            translation: self.position,
            rotation: orientation_frame(&self.orientation),
        }
    }
}

/// Rotation `R_z(γ) R_y(β) R_z(−γ)` mapping `e_z` to the unit vector `n`.
///
/// For `n = −e_z` the azimuth is taken as 0, giving `R_y(π)`.
pub fn orientation_frame(n: &Vector3<f64>) -> Matrix3<f64> {
    let beta = n.z.clamp(-1.0, 1.0).acos();
    let rho = n.x.hypot(n.y);
    if rho == 0.0 {
        return rot_y(beta);
    }
    let (sg, cg) = (n.y / rho, n.x / rho);
    let (sb, cb) = (rho, n.z);
    let rz = Matrix3::new(cg, -sg, 0.0, sg, cg, 0.0, 0.0, 0.0, 1.0);
    let ry = Matrix3::new(cb, 0.0, sb, 0.0, 1.0, 0.0, -sb, 0.0, cb);
    rz * ry * rz.transpose()
}

/// Analytic approximation `‖Log(g⁻¹h)‖_{ξ,ζ}` of the sub-Riemannian distance.
pub fn approx_distance(g: &Se3, h: &Se3, xi: f64, zeta: f64) -> f64 {
    g.inverse().compose(h).log().gauge_norm(xi, zeta)
}

/// [`approx_distance`] between lifted oriented points.
pub fn approx_distance_oriented(p: &OrientedPoint3, q: &OrientedPoint3, xi: f64, zeta: f64) -> f64 {
    approx_distance(&p.lift(), &q.lift(), xi, zeta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn compose_example() {
        let g = Se3::new(Vector3::x(), rot_z(FRAC_PI_2)).unwrap();
        let h = Se3::from_translation(Vector3::x());
        let r = g.compose(&h);
        assert!((r.translation - Vector3::new(1.0, 1.0, 0.0)).norm() < 1e-15);
        assert_eq!(r.rotation, rot_z(FRAC_PI_2));
        let t = Se3::from_translation(Vector3::new(1.0, 2.0, 3.0))
            .compose(&Se3::from_translation(Vector3::new(-1.0, 0.5, 0.0)));
        assert_eq!(t.translation, Vector3::new(0.0, 2.5, 3.0));
    }

    #[test]
    fn rejects_non_rotation() {
        let bad = Matrix3::identity() * 1.01;
        assert!(matches!(
            Se3::new(Vector3::zeros(), bad),
            Err(Error::NotARotation { .. })
        ));
        let reflection = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(Se3::new(Vector3::zeros(), reflection).is_err());
    }

    #[test]
    fn orthonormalize_repairs_drift() {
        let g = Se3 {
            translation: Vector3::zeros(),
            rotation: rot_x(0.3) * rot_z(1.1) + Matrix3::repeat(1e-7),
        };
        assert!(rotation_defect(&g.orthonormalized().rotation) < 1e-14);
    }

    #[test]
    fn rot_exp_quarter_turn_about_z() {
        let r = rot_exp(&Vector3::new(0.0, 0.0, FRAC_PI_2));
        assert!((r * Vector3::x() - Vector3::y()).norm() < 1e-15);
        assert_eq!(rot_exp(&Vector3::zeros()), Matrix3::identity());
        assert_eq!(rot_log(&Matrix3::identity()).coords, Vector3::zeros());
    }

    #[test]
    fn rot_log_at_half_turn() {
        let l = rot_log(&rot_x(PI));
        assert!(l.near_cut_locus);
        assert!((l.coords - Vector3::new(PI, 0.0, 0.0)).norm() < 1e-12);
        let axis = Vector3::new(1.0, -2.0, 0.5).normalize();
        let r = rot_exp(&(axis * PI));
        let back = rot_log(&r).coords;
        assert!((rot_exp(&back) - r).abs().max() < 1e-10);
        assert_abs_diff_eq!(back.norm(), PI, epsilon = 1e-12);
    }

    #[test]
    fn rot_log_just_below_half_turn() {
        let axis = Vector3::new(0.3, 0.4, -0.8).normalize();
        let w = axis * (PI - 1e-8);
        let back = rot_log(&rot_exp(&w)).coords;
        assert!((back - w).norm() < 1e-6);
    }

    #[test]
    fn log_example() {
        let g = Se3::new(Vector3::x(), rot_z(FRAC_PI_2)).unwrap();
        let c = g.log();
        let expected = [PI / 4.0, -PI / 4.0, 0.0, 0.0, 0.0, FRAC_PI_2];
        for (a, b) in c.0.iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
        let t = Se3::from_translation(Vector3::new(0.2, -1.0, 3.0));
        assert_eq!(t.log(), Se3Coords([0.2, -1.0, 3.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn exp_examples() {
        let id = Se3Coords::ZERO.exp();
        assert_eq!(id, Se3::identity());
        let t = Se3Coords([1.0, 2.0, -3.0, 0.0, 0.0, 0.0]).exp();
        assert_eq!(t.translation, Vector3::new(1.0, 2.0, -3.0));
    }

    #[test]
    fn lift_examples() {
        let ez = OrientedPoint3::new(Vector3::zeros(), Vector3::z()).unwrap();
        assert_eq!(ez.lift().rotation, Matrix3::identity());
        let ex = OrientedPoint3::new(Vector3::zeros(), Vector3::x()).unwrap();
        assert!((ex.lift().rotation - rot_y(FRAC_PI_2)).abs().max() < 1e-15);
        let down = OrientedPoint3::new(Vector3::zeros(), -Vector3::z()).unwrap();
        assert!((down.lift().rotation - rot_y(PI)).abs().max() < 1e-15);
    }

    #[test]
    fn frame_third_field_points_along_orientation() {
        let n = Vector3::new(0.2, -0.4, 0.7).normalize();
        let g = OrientedPoint3::new(Vector3::zeros(), n).unwrap().lift();
        assert!((g.frame()[2].translation - n).norm() < 1e-12);
        assert_eq!(Se3::identity().frame()[2].translation, Vector3::z());
    }

    #[test]
    fn nilpotent_example() {
        let a = Se3Coords([0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let b = Se3Coords([0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert_eq!(
            a.nilpotent_compose(&b),
            Se3Coords([-0.5, 0.0, 1.0, 0.0, 1.0, 0.0])
        );
        let c = Se3Coords([0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        assert_eq!(c.nilpotent_compose(&-c), Se3Coords::ZERO);
        assert_eq!(Se3Coords::ZERO.nilpotent_compose(&c), c);
    }

    #[test]
    fn gauge_examples() {
        assert_eq!(Se3Coords::ZERO.gauge_norm(1.0, 100.0), 0.0);
        assert_eq!(
            Se3Coords([0.0, 0.0, 0.0, 1.0, 0.0, 0.0]).gauge_norm(1.0, 100.0),
            1.0
        );
        assert_abs_diff_eq!(
            Se3Coords([0.0, 0.0, 0.0, 0.0, 0.0, 1.0]).gauge_norm(1.0, 16.0),
            2.0
        );
    }

    #[test]
    fn fundamental_gauge_scaling() {
        assert!(Se3Coords::ZERO.fundamental_gauge().is_err());
        assert_abs_diff_eq!(
            Se3Coords([0.0, 0.0, 1.0, 0.0, 0.0, 0.0])
                .fundamental_gauge()
                .unwrap(),
            1.0
        );
        let c = Se3Coords([0.1, -0.3, 0.2, 0.4, -0.1, 0.25]);
        let s: f64 = 0.6;
        assert_abs_diff_eq!(
            c.dilate(s).unwrap().fundamental_gauge().unwrap(),
            s.powi(-7) * c.fundamental_gauge().unwrap(),
            epsilon = 1e-9
        );
        assert_eq!(DILATION_WEIGHTS.iter().sum::<i32>(), HOMOGENEOUS_DIMENSION);
    }
}
