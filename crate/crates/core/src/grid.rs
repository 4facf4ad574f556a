//! Discretizations of position space and of the orientation circle/sphere.
//!
//! A [`LiftedGrid`] is a regular spatial grid times an [`OrientationSampling`].
//! Nodes are numbered orientation-major: `node = o * n_spatial + s` with the
//! spatial index `s = i + nx * (j + ny * k)` (x fastest).

use std::f64::consts::{PI, TAU};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A regular axis-aligned grid in two or three dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpatialGrid {
    /// Number of samples per axis, x first.
    pub dims: Vec<usize>,
    /// Sample spacing per axis.
    pub spacing: Vec<f64>,
    /// Physical position of sample `(0, 0[, 0])`.
    pub origin: Vec<f64>,
}

impl SpatialGrid {
    pub fn new(dims: Vec<usize>, spacing: Vec<f64>, origin: Vec<f64>) -> Result<Self> {
        let d = dims.len();
        if !(2..=3).contains(&d) {
            return Err(Error::param("dims", "spatial grids are 2D or 3D"));
        }
        if spacing.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: spacing.len(),
            });
        }
        if origin.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: origin.len(),
            });
        }
        if dims.contains(&0) {
            return Err(Error::param("dims", "every axis needs at least one sample"));
        }
        if spacing.iter().any(|&h| !(h > 0.0) || !h.is_finite()) {
            return Err(Error::param("spacing", "all spacings must be positive"));
        }
        Ok(SpatialGrid {
            dims,
            spacing,
            origin,
        })
    }

    /// Unit-spacing grid with origin at sample zero.
    pub fn unit(dims: Vec<usize>) -> Result<Self> {
        let d = dims.len();
        Self::new(dims, vec![1.0; d], vec![0.0; d])
    }

    /// Grid with `n` samples per axis covering `[−half_width, half_width]^d`.
    pub fn centered(d: usize, n: usize, half_width: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::param("n", "need at least two samples per axis"));
        }
        let h = 2.0 * half_width / (n - 1) as f64;
        Self::new(vec![n; d], vec![h; d], vec![-half_width; d])
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Dims padded to three axes with a trailing 1.
    pub fn dims3(&self) -> [usize; 3] {
        [
            self.dims[0],
            self.dims[1],
            self.dims.get(2).copied().unwrap_or(1),
        ]
    }

    pub fn spacing3(&self) -> [f64; 3] {
        [
            self.spacing[0],
            self.spacing[1],
            self.spacing.get(2).copied().unwrap_or(1.0),
        ]
    }

    pub fn index(&self, ijk: [usize; 3]) -> usize {
        let [nx, ny, _] = self.dims3();
        ijk[0] + nx * (ijk[1] + ny * ijk[2])
    }

    pub fn coords(&self, s: usize) -> [usize; 3] {
        let [nx, ny, _] = self.dims3();
        [s % nx, (s / nx) % ny, s / (nx * ny)]
    }

    /// Physical position of spatial sample `s`.
    pub fn position(&self, s: usize) -> Vec<f64> {
        let ijk = self.coords(s);
        (0..self.ndim())
            .map(|a| self.origin[a] + self.spacing[a] * ijk[a] as f64)
            .collect()
    }

    /// Continuous index coordinates of a physical point.
    pub fn to_index_space(&self, p: &[f64]) -> Vec<f64> {
        (0..self.ndim())
            .map(|a| (p[a] - self.origin[a]) / self.spacing[a])
            .collect()
    }

    /// Nearest sample to a physical point, if inside the grid.
    pub fn nearest(&self, p: &[f64]) -> Option<usize> {
        if p.len() != self.ndim() {
            return None;
        }
        let mut ijk = [0usize; 3];
        for (a, f) in self.to_index_space(p).into_iter().enumerate() {
            let r = f.round();
            if !(r >= 0.0 && r < self.dims[a] as f64) {
                return None;
            }
            ijk[a] = r as usize;
        }
        Some(self.index(ijk))
    }
}

/// Sampled orientations: none (ℝⁿ), a periodic circle, or an Euler grid on S².
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OrientationSampling {
    None,
    /// `n` equispaced angles `θ_k = 2πk/n`.
    Circle {
        n: usize,
    },
    /// Euler grid `β_b = (b + ½)π/nβ`, `γ_g = gπ/nβ` with `2nβ` azimuths.
    /// Directions are mapped through the rotation `chart` (identity by default).
    Sphere {
        #[serde(rename = "nBeta")]
        n_beta: usize,
        #[serde(default = "identity_rows")]
        chart: [[f64; 3]; 3],
    },
}

fn identity_rows() -> [[f64; 3]; 3] {
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

/// One orientation-axis neighbor pair with its stencil weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AngularTerm {
    /// Metric weight `ρ` of the offset (index units).
    pub weight: f64,
    pub plus: usize,
    pub minus: usize,
    /// Which chart coordinate the pair moves along (0: θ or β, 1: γ).
    pub axis: usize,
}

impl OrientationSampling {
    pub fn circle(n: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::param("n", "orientation count must be at least 4"));
        }
        Ok(OrientationSampling::Circle { n })
    }

    pub fn sphere(n_beta: usize) -> Result<Self> {
        Self::sphere_with_chart(n_beta, Matrix3::identity())
    }

    pub fn sphere_with_chart(n_beta: usize, chart: Matrix3<f64>) -> Result<Self> {
        if n_beta < 2 {
            return Err(Error::param("n_beta", "need at least 2 polar samples"));
        }
        if crate::se3::rotation_defect(&chart) > 1e-9 {
            return Err(Error::param("chart", "must be a rotation"));
        }
        let mut rows = [[0.0; 3]; 3];
        for (r, row) in rows.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = chart[(r, c)];
            }
        }
        Ok(OrientationSampling::Sphere {
            n_beta,
            chart: rows,
        })
    }

    /// Spatial dimension these orientations live in (0 for none).
    pub fn ambient_dim(&self) -> usize {
        match self {
            OrientationSampling::None => 0,
            OrientationSampling::Circle { .. } => 2,
            OrientationSampling::Sphere { .. } => 3,
        }
    }

    pub fn count(&self) -> usize {
        match self {
            OrientationSampling::None => 1,
            OrientationSampling::Circle { n } => *n,
            OrientationSampling::Sphere { n_beta, .. } => 2 * n_beta * n_beta,
        }
    }

    fn chart(&self) -> Matrix3<f64> {
        match self {
            OrientationSampling::Sphere { chart, .. } => Matrix3::from_fn(|r, c| chart[r][c]),
            _ => Matrix3::identity(),
        }
    }

    /// Angle `θ` of circle sample `o`.
    pub fn theta(&self, o: usize) -> f64 {
        match self {
            OrientationSampling::Circle { n } => TAU * o as f64 / *n as f64,
            _ => 0.0,
        }
    }

    /// Euler angles `(β, γ)` of sphere sample `o` in the chart frame.
    pub fn beta_gamma(&self, o: usize) -> (f64, f64) {
        match self {
            OrientationSampling::Sphere { n_beta, .. } => {
                let nb = *n_beta;
                let (b, g) = (o / (2 * nb), o % (2 * nb));
                ((b as f64 + 0.5) * PI / nb as f64, g as f64 * PI / nb as f64)
            }
            _ => (0.0, 0.0),
        }
    }

    /// Unit direction of sample `o` (2 or 3 components; empty for none).
    pub fn direction(&self, o: usize) -> Vec<f64> {
        match self {
            OrientationSampling::None => Vec::new(),
            OrientationSampling::Circle { .. } => {
                let (s, c) = self.theta(o).sin_cos();
                vec![c, s]
            }
            OrientationSampling::Sphere { .. } => {
                let v = self.direction3(o);
                vec![v.x, v.y, v.z]
            }
        }
    }

    /// Direction of a sphere sample as a vector.
    pub fn direction3(&self, o: usize) -> Vector3<f64> {
        let (beta, gamma) = self.beta_gamma(o);
        let (sb, cb) = beta.sin_cos();
        let (sg, cg) = gamma.sin_cos();
        self.chart() * Vector3::new(sb * cg, sb * sg, cb)
    }

    /// Index of the opposite direction.
    pub fn antipode(&self, o: usize) -> usize {
        match self {
            OrientationSampling::None => o,
            OrientationSampling::Circle { n } => (o + n / 2) % n,
            OrientationSampling::Sphere { n_beta, .. } => {
                let nb = *n_beta;
                let (b, g) = (o / (2 * nb), o % (2 * nb));
                (nb - 1 - b) * 2 * nb + (g + nb) % (2 * nb)
            }
        }
    }

    /// Whether every sample has an exactly opposite sample.
    pub fn has_antipodes(&self) -> bool {
        match self {
            OrientationSampling::Circle { n } => n % 2 == 0,
            _ => true,
        }
    }

    /// Sample whose direction is closest to `v` (largest dot product).
    pub fn nearest(&self, v: &[f64]) -> usize {
        let mut best = (f64::NEG_INFINITY, 0);
        for o in 0..self.count() {
            let d: f64 = self.direction(o).iter().zip(v).map(|(a, b)| a * b).sum();
            if d > best.0 {
                best = (d, o);
            }
        }
        best.1
    }

    /// Neighbor of sphere sample `(b, g)` one step along β, stitched over the poles.
    fn beta_step(&self, nb: usize, b: usize, g: usize, up: bool) -> usize {
        let ng = 2 * nb;
        if up {
            if b + 1 < nb {
                (b + 1) * ng + g
            } else {
                b * ng + (g + nb) % ng
            }
        } else if b > 0 {
            (b - 1) * ng + g
        } else {
            (g + nb) % ng
        }
    }

    /// Orientation-axis stencil at sample `o` for the round metric on the
    /// circle or sphere, in index units. Empty for `None`.
    pub fn angular_terms(&self, o: usize) -> Vec<AngularTerm> {
        match self {
            OrientationSampling::None => Vec::new(),
            OrientationSampling::Circle { n } => {
                let h = TAU / *n as f64;
                vec![AngularTerm {
                    weight: 1.0 / (h * h),
                    plus: (o + 1) % n,
                    minus: (o + n - 1) % n,
                    axis: 0,
                }]
            }
            OrientationSampling::Sphere { n_beta, .. } => {
                let nb = *n_beta;
                let ng = 2 * nb;
                let h = PI / nb as f64;
                let (b, g) = (o / ng, o % ng);
                let (beta, _) = self.beta_gamma(o);
                let sb = beta.sin();
                vec![
                    AngularTerm {
                        weight: 1.0 / (h * h),
                        plus: self.beta_step(nb, b, g, true),
                        minus: self.beta_step(nb, b, g, false),
                        axis: 0,
                    },
                    AngularTerm {
                        weight: 1.0 / (h * h * sb * sb),
                        plus: b * ng + (g + 1) % ng,
                        minus: b * ng + (g + ng - 1) % ng,
                        axis: 1,
                    },
                ]
            }
        }
    }

    /// Grid spacing of the chart coordinates (θ, or β and γ).
    pub fn chart_spacing(&self) -> f64 {
        match self {
            OrientationSampling::None => 1.0,
            OrientationSampling::Circle { n } => TAU / *n as f64,
            OrientationSampling::Sphere { n_beta, .. } => PI / *n_beta as f64,
        }
    }
}

/// Position grid times orientation samples.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LiftedGrid {
    pub spatial: SpatialGrid,
    pub orientations: OrientationSampling,
}

impl LiftedGrid {
    pub fn new(spatial: SpatialGrid, orientations: OrientationSampling) -> Result<Self> {
        let amb = orientations.ambient_dim();
        if amb != 0 && amb != spatial.ndim() {
            return Err(Error::param(
                "orientations",
                format!("{amb}D orientations on a {}D grid", spatial.ndim()),
            ));
        }
        if amb != 0 && orientations.count() < 4 {
            return Err(Error::param(
                "orientations",
                "orientation count must be at least 4",
            ));
        }
        Ok(LiftedGrid {
            spatial,
            orientations,
        })
    }

    pub fn n_spatial(&self) -> usize {
        self.spatial.len()
    }

    pub fn n_orientations(&self) -> usize {
        self.orientations.count()
    }

    pub fn len(&self) -> usize {
        self.n_spatial() * self.n_orientations()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node(&self, spatial: usize, orientation: usize) -> usize {
        orientation * self.n_spatial() + spatial
    }

    /// Splits a node into `(spatial, orientation)`.
    pub fn split(&self, node: usize) -> (usize, usize) {
        (node % self.n_spatial(), node / self.n_spatial())
    }

    /// Node at the given position and orientation (nearest samples).
    pub fn locate(&self, position: &[f64], direction: Option<&[f64]>) -> Option<usize> {
        let s = self.spatial.nearest(position)?;
        let o = match direction {
            Some(v) if self.orientations.ambient_dim() > 0 => self.orientations.nearest(v),
            _ => 0,
        };
        Some(self.node(s, o))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spatial_roundtrip() {
        let g = SpatialGrid::new(vec![4, 5, 6], vec![0.5, 1.0, 2.0], vec![-1.0, 0.0, 3.0]).unwrap();
        for s in 0..g.len() {
            assert_eq!(g.index(g.coords(s)), s);
            assert_eq!(g.nearest(&g.position(s)), Some(s));
        }
        assert_eq!(g.nearest(&[-2.0, 0.0, 3.0]), None);
    }

    #[test]
    fn rejects_bad_spacing() {
        assert!(SpatialGrid::new(vec![3, 3], vec![0.0, 1.0], vec![0.0, 0.0]).is_err());
        assert!(SpatialGrid::new(vec![3], vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn circle_antipodes() {
        let c = OrientationSampling::circle(8).unwrap();
        for o in 0..8 {
            let a = c.antipode(o);
            let (d, e) = (c.direction(o), c.direction(a));
            assert!((d[0] + e[0]).abs() < 1e-12 && (d[1] + e[1]).abs() < 1e-12);
        }
        assert!(OrientationSampling::circle(3).is_err());
    }

    #[test]
    fn sphere_antipodes_and_stitching() {
        let s = OrientationSampling::sphere_with_chart(5, crate::se3::rot_y(0.7)).unwrap();
        assert_eq!(s.count(), 50);
        for o in 0..s.count() {
            let a = s.antipode(o);
            assert!((s.direction3(o) + s.direction3(a)).norm() < 1e-12);
            assert_eq!(s.antipode(a), o);
            for t in s.angular_terms(o) {
                let back = s.angular_terms(t.plus);
                assert!(back.iter().any(|u| u.plus == o || u.minus == o));
                // neighbors are geometrically close
                assert!(s.direction3(o).dot(&s.direction3(t.plus)) > 0.75);
                assert!(s.direction3(o).dot(&s.direction3(t.minus)) > 0.75);
            }
        }
    }

    #[test]
    fn sphere_nearest_finds_exact_sample() {
        let s = OrientationSampling::sphere(10).unwrap();
        for o in [0, 17, 99, 150] {
            let v = s.direction(o);
            assert_eq!(s.nearest(&v), o);
        }
    }

    #[test]
    fn lifted_node_split() {
        let sp = SpatialGrid::unit(vec![3, 4]).unwrap();
        let g = LiftedGrid::new(sp, OrientationSampling::circle(6).unwrap()).unwrap();
        assert_eq!(g.len(), 72);
        assert_eq!(g.split(g.node(7, 5)), (7, 5));
        let sp3 = SpatialGrid::unit(vec![3, 4, 2]).unwrap();
        assert!(LiftedGrid::new(sp3, OrientationSampling::circle(6).unwrap()).is_err());
    }
}
