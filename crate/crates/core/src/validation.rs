//! Calibration of the gauge parameter `ζ`: reference sub-Riemannian distance
//! volumes from fast marching are compared with the gauge norm of the
//! logarithm on regular sample grids of growing half-width.

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eikonal::{solve_eikonal, DistanceField, MarchOptions};
use crate::error::{Error, Result};
use crate::grid::{LiftedGrid, OrientationSampling, SpatialGrid};
use crate::metrics::{Manifold, MetricSpec};
use crate::se2::{Se2, Se2Coords};
use crate::se3::{orientation_frame, rot_y, OrientedPoint3, Se3Coords};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    SE2,
    SE3,
}

impl Group {
    pub fn manifold(self) -> Manifold {
        match self {
            Group::SE2 => Manifold::SE2,
            Group::SE3 => Manifold::SE3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Group::SE2 => "SE2",
            Group::SE3 => "SE3",
        }
    }
}

/// Default node cap of SE(3) reference grids.
pub const DEFAULT_MAX_NODES: usize = 20_000_000;

/// Discretization of a reference distance volume.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ReferenceGrid {
    pub group: Group,
    /// Samples per spatial axis (odd, so the origin is a node).
    pub samples_per_axis: usize,
    pub half_width: f64,
    /// Orientation count on the circle, or `nβ` of the sphere grid.
    pub orientations: usize,
    pub xi: f64,
    pub epsilon: f64,
    /// Direction of the source orientation in SE(3).
    pub source_direction: [f64; 3],
    /// Refuse SE(3) grids with more nodes than this.
    pub max_nodes: usize,
}

impl ReferenceGrid {
    /// 101×101×64 over [−4, 4]².
    pub fn se2_desk() -> Self {
        ReferenceGrid {
            group: Group::SE2,
            samples_per_axis: 101,
            half_width: 4.0,
            orientations: 64,
            xi: 1.0,
            epsilon: 0.1,
            source_direction: [1.0, 0.0, 0.0],
            max_nodes: DEFAULT_MAX_NODES,
        }
    }

    /// 41³ over [−2, 2]³ with 200 directions.
    pub fn se3_desk() -> Self {
        ReferenceGrid {
            group: Group::SE3,
            samples_per_axis: 41,
            half_width: 2.0,
            orientations: 10,
            xi: 1.0,
            epsilon: 0.1,
            source_direction: [0.0, 0.0, 1.0],
            max_nodes: DEFAULT_MAX_NODES,
        }
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.samples_per_axis - 1) as f64
    }

    fn validate(&self) -> Result<()> {
        if self.samples_per_axis < 3 || self.samples_per_axis.is_multiple_of(2) {
            return Err(Error::param(
                "samples_per_axis",
                "must be odd and at least 3",
            ));
        }
        if !(self.half_width > 0.0) {
            return Err(Error::param("half_width", "must be positive"));
        }
        if self.group == Group::SE2 && self.source_direction[..2] != [1.0, 0.0] {
            return Err(Error::param(
                "source_direction",
                "SE(2) references start at the identity",
            ));
        }
        Ok(())
    }

    /// Lifted grid and source node. In SE(3) the sphere grid is rotated so
    /// that one of its samples coincides with the source direction.
    pub fn lifted_grid(&self) -> Result<(LiftedGrid, usize)> {
        self.validate()?;
        let d = match self.group {
            Group::SE2 => 2,
            Group::SE3 => 3,
        };
        let spatial = SpatialGrid::centered(d, self.samples_per_axis, self.half_width)?;
        let origin = spatial
            .nearest(&vec![0.0; d])
            .ok_or_else(|| Error::Numerical("origin outside the reference grid".into()))?;
        match self.group {
            Group::SE2 => {
                let grid =
                    LiftedGrid::new(spatial, OrientationSampling::circle(self.orientations)?)?;
                let src = grid.node(origin, 0);
                Ok((grid, src))
            }
            Group::SE3 => {
                let nb = self.orientations;
                let nodes = spatial.len().saturating_mul(2 * nb * nb);
                if nodes > self.max_nodes {
                    return Err(Error::param(
                        "max_nodes",
                        format!(
                            "grid has {nodes} nodes, above the cap of {}",
                            self.max_nodes
                        ),
                    ));
                }
                let b = (nb - 1) / 2;
                let beta = (b as f64 + 0.5) * std::f64::consts::PI / nb as f64;
                let s = Vector3::from(self.source_direction);
                if !(s.norm() > 1e-12) {
                    return Err(Error::param("source_direction", "must be nonzero"));
                }
                let chart: Matrix3<f64> = orientation_frame(&s.normalize()) * rot_y(-beta);
                let grid =
                    LiftedGrid::new(spatial, OrientationSampling::sphere_with_chart(nb, chart)?)?;
                let src = grid.node(origin, b * 2 * nb);
                Ok((grid, src))
            }
        }
    }

    pub fn metric(&self) -> MetricSpec {
        MetricSpec::sub_riemannian(self.group.manifold(), self.xi, self.epsilon)
    }
}

/// Sub-Riemannian distance from the origin with unit cost.
pub fn reference_distance_volume(spec: &ReferenceGrid) -> Result<DistanceField> {
    let (grid, src) = spec.lifted_grid()?;
    solve_eikonal(&grid, &spec.metric(), None, &[src], MarchOptions::default())
}

/// Mean squared errors per (range, ζ).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepResult {
    pub group: Group,
    pub ranges: Vec<f64>,
    pub zetas: Vec<f64>,
    /// `mse[r][z]`.
    pub mse: Vec<Vec<f64>>,
    pub n_samples: Vec<usize>,
}

impl SweepResult {
    /// CSV with columns `group,range,zeta,mse,nSamples`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("group,range,zeta,mse,nSamples\n");
        for (r, range) in self.ranges.iter().enumerate() {
            for (z, zeta) in self.zetas.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    self.group.name(),
                    range,
                    zeta,
                    self.mse[r][z],
                    self.n_samples[r]
                );
            }
        }
        out
    }

    /// Index into `zetas` of the smallest error at range `r` (first on ties).
    pub fn best_zeta(&self, r: usize) -> usize {
        let row = &self.mse[r];
        (0..row.len()).fold(0, |b, z| if row[z] < row[b] { z } else { b })
    }
}

/// Metadata written next to a sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepMetadata {
    pub reference: ReferenceGrid,
    pub spacing: f64,
    pub samples_per_axis: usize,
    pub collar_cells: f64,
    pub solve_seconds: f64,
    pub sweep_seconds: f64,
}

/// Sweep settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SweepSpec {
    pub ranges: Vec<f64>,
    pub zetas: Vec<f64>,
    /// Samples per axis of the regular subsample over `[−range, range]ⁿ`.
    pub samples_per_axis: usize,
    /// Samples within this many reference cells of the origin (max norm)
    /// are skipped.
    pub collar_cells: f64,
}

impl SweepSpec {
    pub fn se2_default() -> Self {
        SweepSpec {
            ranges: vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0],
            zetas: vec![1.0, 16.0, 32.0, 44.0, 64.0, 100.0],
            samples_per_axis: 41,
            collar_cells: 2.0,
        }
    }

    pub fn se3_default() -> Self {
        SweepSpec {
            ranges: vec![0.5, 1.0, 1.5, 2.0],
            zetas: vec![1.0, 16.0, 44.0, 100.0, 200.0, 400.0],
            samples_per_axis: 21,
            collar_cells: 2.0,
        }
    }
}

enum Log {
    Two(Se2Coords),
    Three(Se3Coords),
}

impl Log {
    fn gauge_norm(&self, xi: f64, zeta: f64) -> f64 {
        match self {
            Log::Two(c) => c.gauge_norm(xi, zeta),
            Log::Three(c) => c.gauge_norm(xi, zeta),
        }
    }
}

fn linspace(r: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| -r + 2.0 * r * k as f64 / (n - 1) as f64)
        .collect()
}

/// Compares `reference` with `‖Log‖_{ξ,ζ}` over every range and ζ.
pub fn zeta_sweep(reference: &DistanceField, spec: &SweepSpec, xi: f64) -> Result<SweepResult> {
    let grid = &reference.grid;
    let group = match grid.orientations {
        OrientationSampling::Circle { .. } => Group::SE2,
        OrientationSampling::Sphere { .. } => Group::SE3,
        OrientationSampling::None => return Err(Error::param("reference", "needs a lifted grid")),
    };
    if spec.samples_per_axis < 2 || spec.zetas.is_empty() || spec.ranges.is_empty() {
        return Err(Error::param(
            "spec",
            "need ranges, zetas, and at least two samples per axis",
        ));
    }
    if spec.zetas.iter().any(|z| !(*z > 0.0)) {
        return Err(Error::param("zetas", "must be positive"));
    }
    let src = *reference
        .sources
        .first()
        .ok_or_else(|| Error::param("reference", "has no source"))?;
    let (s0, o0) = grid.split(src);
    let origin = grid.spatial.position(s0);
    if origin.iter().any(|c| c.abs() > 1e-9) {
        return Err(Error::param(
            "reference",
            "source must sit at the spatial origin",
        ));
    }
    let sp = &grid.spatial;
    let d = sp.ndim();
    for &r in &spec.ranges {
        let covered = (0..d).all(|a| {
            let lo = sp.origin[a];
            let hi = lo + (sp.dims[a] - 1) as f64 * sp.spacing[a];
            lo <= -r + 1e-9 && hi >= r - 1e-9
        });
        if !(r > 0.0) || !covered {
            return Err(Error::param(
                "ranges",
                format!("range {r} is not covered by the reference"),
            ));
        }
    }
    let collar = spec.collar_cells * sp.spacing.iter().copied().fold(0.0, f64::max);
    let no = grid.n_orientations();
    let source_frame = match group {
        Group::SE3 => {
            Some(OrientedPoint3::new(Vector3::zeros(), grid.orientations.direction3(o0))?.lift())
        }
        Group::SE2 => None,
    };
    let theta0 = grid.orientations.theta(o0);
    let rows: Vec<(Vec<f64>, usize)> = spec
        .ranges
        .par_iter()
        .map(|&r| {
            let axis = linspace(r, spec.samples_per_axis);
            let n = spec.samples_per_axis;
            let count = n.pow(d as u32);
            let mut sums = vec![0.0; spec.zetas.len()];
            let mut samples = 0usize;
            for k in 0..count {
                let mut p = Vec::with_capacity(d);
                let mut rem = k;
                for _ in 0..d {
                    p.push(axis[rem % n]);
                    rem /= n;
                }
                if p.iter().map(|c| c.abs()).fold(0.0, f64::max) <= collar + 1e-12 {
                    continue;
                }
                for o in 0..no {
                    let d0 = reference.interpolate(o, &p);
                    if !d0.is_finite() {
                        continue;
                    }
                    let c = match &source_frame {
                        None => Log::Two(
                            Se2::new(0.0, 0.0, theta0)
                                .inverse()
                                .compose(&Se2::new(p[0], p[1], grid.orientations.theta(o)))
                                .log(),
                        ),
                        Some(g) => {
                            let q = OrientedPoint3::new(
                                Vector3::new(p[0], p[1], p[2]),
                                grid.orientations.direction3(o),
                            )?;
                            Log::Three(g.inverse().compose(&q.lift()).log())
                        }
                    };
                    for (s, &z) in sums.iter_mut().zip(&spec.zetas) {
                        let e = c.gauge_norm(xi, z) - d0;
                        *s += e * e;
                    }
                    samples += 1;
                }
            }
            let mse = sums
                .iter()
                .map(|s| {
                    if samples > 0 {
                        s / samples as f64
                    } else {
                        f64::NAN
                    }
                })
                .collect();
            Ok((mse, samples))
        })
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        group,
        ranges: spec.ranges.clone(),
        zetas: spec.zetas.clone(),
        mse: rows.iter().map(|r| r.0.clone()).collect(),
        n_samples: rows.iter().map(|r| r.1).collect(),
    })
}

/// Solves the reference and sweeps it.
pub fn run_sweep(
    reference: &ReferenceGrid,
    spec: &SweepSpec,
) -> Result<(SweepResult, SweepMetadata)> {
    let t0 = Instant::now();
    let field = reference_distance_volume(reference)?;
    let solve_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let result = zeta_sweep(&field, spec, reference.xi)?;
    let meta = SweepMetadata {
        reference: reference.clone(),
        spacing: reference.spacing(),
        samples_per_axis: spec.samples_per_axis,
        collar_cells: spec.collar_cells,
        solve_seconds,
        sweep_seconds: t1.elapsed().as_secs_f64(),
    };
    Ok((result, meta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn se3_source_direction_is_a_sample() {
        let mut spec = ReferenceGrid::se3_desk();
        spec.samples_per_axis = 5;
        spec.orientations = 4;
        for dir in [[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.3, -0.4, 0.2]] {
            spec.source_direction = dir;
            let (grid, src) = spec.lifted_grid().unwrap();
            let (_, o) = grid.split(src);
            let want = Vector3::from(dir).normalize();
            assert!((grid.orientations.direction3(o) - want).norm() < 1e-12);
        }
    }

    #[test]
    fn node_cap_is_enforced() {
        let mut spec = ReferenceGrid::se3_desk();
        spec.max_nodes = 1000;
        assert!(matches!(
            spec.lifted_grid(),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn small_se2_sweep_has_expected_shape() {
        let mut r = ReferenceGrid::se2_desk();
        r.samples_per_axis = 21;
        r.half_width = 1.0;
        r.orientations = 16;
        let spec = SweepSpec {
            ranges: vec![0.5, 1.0],
            zetas: vec![16.0, 44.0],
            samples_per_axis: 5,
            collar_cells: 2.0,
        };
        let (res, _) = run_sweep(&r, &spec).unwrap();
        assert_eq!(res.mse.len(), 2);
        assert!(res.mse.iter().flatten().all(|m| *m >= 0.0));
        let csv = res.to_csv();
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.starts_with("group,range,zeta,mse,nSamples\nSE2,0.5,16,"));
        let too_far = SweepSpec {
            ranges: vec![1.5],
            ..spec
        };
        let field = reference_distance_volume(&r).unwrap();
        assert!(zeta_sweep(&field, &too_far, 1.0).is_err());
    }
}
