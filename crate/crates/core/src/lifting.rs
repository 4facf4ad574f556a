//! Orientation lift of binary centerline masks.
//!
//! Each orientation slice is the correlation of the mask with an elongated
//! Gaussian stick aligned with that orientation. Per location, the response
//! of the least aligned orientation is subtracted, and the volume is then
//! scaled to a maximum of 1. Kernel sizes are in grid cells.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{LiftedGrid, OrientationSampling, SpatialGrid};

/// Default number of planar orientations.
pub const DEFAULT_N_THETA: usize = 32;
/// Default polar resolution of the sphere grid (`2·10² = 200` directions).
pub const DEFAULT_N_BETA: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LiftParams {
    /// Extent of the stick along its axis.
    pub kernel_length: f64,
    /// Cross-sectional width (twice the cross-sectional standard deviation).
    pub kernel_width: f64,
}

impl Default for LiftParams {
    fn default() -> Self {
        LiftParams {
            kernel_length: 9.0,
            kernel_width: 1.5,
        }
    }
}

impl LiftParams {
    fn validate(&self) -> Result<()> {
        if !(self.kernel_length.is_finite() && self.kernel_length > 0.0) {
            return Err(Error::param("kernel_length", "must be positive"));
        }
        if !(self.kernel_width.is_finite() && self.kernel_width > 0.0) {
            return Err(Error::param("kernel_width", "must be positive"));
        }
        Ok(())
    }
}

/// Vesselness `𝒱 ∈ [0, 1]` on a lifted grid, in node order.
#[derive(Clone, Debug, PartialEq)]
pub struct OrientationVolume {
    pub grid: LiftedGrid,
    pub values: Vec<f32>,
}

impl OrientationVolume {
    pub fn new(grid: LiftedGrid, values: Vec<f32>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                actual: values.len(),
            });
        }
        Ok(OrientationVolume { grid, values })
    }

    pub fn at(&self, spatial: usize, orientation: usize) -> f32 {
        self.values[self.grid.node(spatial, orientation)]
    }
}

/// Converts a field of zeros and ones into a mask.
pub fn binary_mask(values: &[f32]) -> Result<Vec<bool>> {
    values
        .iter()
        .map(|&v| match v {
            0.0 => Ok(false),
            1.0 => Ok(true),
            _ => Err(Error::param("mask", format!("value {v} is not 0 or 1"))),
        })
        .collect()
}

/// Integer offsets and weights of the stick kernel along `n`.
fn kernel(n: &Vector3<f64>, d: usize, params: &LiftParams) -> Vec<([i32; 3], f32)> {
    let half = params.kernel_length / 2.0;
    let sigma_along = params.kernel_length / 2.0;
    let sigma_across = params.kernel_width / 2.0;
    let reach_across = 3.0 * sigma_across;
    let r = (half + reach_across).ceil() as i32;
    let rz = if d == 3 { r } else { 0 };
    let mut out = Vec::new();
    for k in -rz..=rz {
        for j in -r..=r {
            for i in -r..=r {
                let v = Vector3::new(i as f64, j as f64, k as f64);
                let t = v.dot(n);
                let perp2 = (v - n * t).norm_squared();
                if t.abs() > half + 1e-9 || perp2 > reach_across * reach_across {
                    continue;
                }
                let w = (-0.5 * t * t / (sigma_along * sigma_along)
                    - 0.5 * perp2 / (sigma_across * sigma_across))
                    .exp();
                out.push(([i, j, k], w as f32));
            }
        }
    }
    out
}

fn direction3(orientations: &OrientationSampling, o: usize) -> Vector3<f64> {
    let v = orientations.direction(o);
    Vector3::new(v[0], v[1], v.get(2).copied().unwrap_or(0.0))
}

/// Lifts a binary mask to an orientation volume.
///
/// An empty mask yields an all-zero volume.
pub fn lift_mask(
    mask: &[bool],
    spatial: &SpatialGrid,
    orientations: &OrientationSampling,
    params: &LiftParams,
) -> Result<OrientationVolume> {
    params.validate()?;
    if mask.len() != spatial.len() {
        return Err(Error::DimensionMismatch {
            expected: spatial.len(),
            actual: mask.len(),
        });
    }
    if orientations.ambient_dim() == 0 {
        return Err(Error::param(
            "orientations",
            "a lift needs orientation samples",
        ));
    }
    let grid = LiftedGrid::new(spatial.clone(), orientations.clone())?;
    let ns = spatial.len();
    let no = orientations.count();
    let d = spatial.ndim();
    let dims = spatial.dims3();
    let on: Vec<[usize; 3]> = (0..ns)
        .filter(|&s| mask[s])
        .map(|s| spatial.coords(s))
        .collect();

    let symmetric = orientations.has_antipodes();
    let computed: Vec<usize> = (0..no)
        .filter(|&o| !symmetric || o <= orientations.antipode(o))
        .collect();
    let slices: Vec<(usize, Vec<f32>)> = computed
        .par_iter()
        .map(|&o| {
            let k = kernel(&direction3(orientations, o), d, params);
            let mut r = vec![0.0f32; ns];
            for ijk in &on {
                for (off, w) in &k {
                    let mut t = [0usize; 3];
                    let mut inside = true;
                    for a in 0..3 {
                        let c = ijk[a] as i64 + off[a] as i64;
                        if c < 0 || c >= dims[a] as i64 {
                            inside = false;
                            break;
                        }
                        t[a] = c as usize;
                    }
                    if inside {
                        r[spatial.index(t)] += w;
                    }
                }
            }
            (o, r)
        })
        .collect();

    let mut values = vec![0.0f32; grid.len()];
    for (o, r) in &slices {
        values[o * ns..(o + 1) * ns].copy_from_slice(r);
        let a = orientations.antipode(*o);
        if symmetric && a != *o {
            values[a * ns..(a + 1) * ns].copy_from_slice(r);
        }
    }
    for s in 0..ns {
        let floor = (0..no)
            .map(|o| values[o * ns + s])
            .fold(f32::INFINITY, f32::min);
        for o in 0..no {
            values[o * ns + s] = (values[o * ns + s] - floor).max(0.0);
        }
    }
    let top = values.iter().copied().fold(0.0f32, f32::max);
    if top > 0.0 {
        for v in &mut values {
            *v /= top;
        }
    }
    OrientationVolume::new(grid, values)
}

/// Pointwise maximum over the orientation axis.
pub fn max_project(volume: &OrientationVolume) -> Vec<f32> {
    let ns = volume.grid.n_spatial();
    let mut out = vec![f32::NEG_INFINITY; ns];
    for slice in volume.values.chunks(ns) {
        for (m, &v) in out.iter_mut().zip(slice) {
            *m = m.max(v);
        }
    }
    out
}

/// Orientation index of maximal response at a spatial node; ties go to the
/// lowest index.
pub fn estimate_orientation(volume: &OrientationVolume, spatial: usize) -> Result<usize> {
    if spatial >= volume.grid.n_spatial() {
        return Err(Error::param("spatial", "node outside the grid"));
    }
    let mut best = (0.0f32, None);
    for o in 0..volume.grid.n_orientations() {
        let v = volume.at(spatial, o);
        if v > best.0 {
            best = (v, Some(o));
        }
    }
    best.1.ok_or_else(|| {
        Error::MissingData(format!("no orientation evidence at spatial node {spatial}"))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane(n: usize) -> SpatialGrid {
        SpatialGrid::unit(vec![n, n]).unwrap()
    }

    fn line_mask(g: &SpatialGrid, pts: impl Iterator<Item = [usize; 2]>) -> Vec<bool> {
        let mut m = vec![false; g.len()];
        for [i, j] in pts {
            m[g.index([i, j, 0])] = true;
        }
        m
    }

    #[test]
    fn empty_mask_gives_zero_volume() {
        let g = plane(9);
        let v = lift_mask(
            &vec![false; g.len()],
            &g,
            &OrientationSampling::circle(8).unwrap(),
            &LiftParams::default(),
        )
        .unwrap();
        assert!(v.values.iter().all(|&x| x == 0.0));
        assert!(max_project(&v).iter().all(|&x| x == 0.0));
        assert!(estimate_orientation(&v, 40).is_err());
    }

    #[test]
    fn horizontal_line_prefers_zero_or_pi() {
        let g = plane(41);
        let m = line_mask(&g, (5..36).map(|i| [i, 20]));
        let o = OrientationSampling::circle(DEFAULT_N_THETA).unwrap();
        let v = lift_mask(&m, &g, &o, &LiftParams::default()).unwrap();
        let top = v.values.iter().copied().fold(0.0, f32::max);
        assert_eq!(top, 1.0);
        assert!(v.values.iter().all(|&x| (0.0..=1.0).contains(&x)));
        for i in 10..31 {
            let best = estimate_orientation(&v, g.index([i, 20, 0])).unwrap();
            assert_eq!(best, 0, "at x={i}");
        }
    }

    #[test]
    fn quarter_turn_permutes_orientations() {
        let n = 41;
        let g = plane(n);
        let pts: Vec<[usize; 2]> = (0..25).map(|k| [8 + k, 10 + (k * 2) / 3]).collect();
        let m = line_mask(&g, pts.iter().copied());
        let rotated = line_mask(&g, pts.iter().map(|&[i, j]| [n - 1 - j, i]));
        let o = OrientationSampling::circle(32).unwrap();
        let a = lift_mask(&m, &g, &o, &LiftParams::default()).unwrap();
        let b = lift_mask(&rotated, &g, &o, &LiftParams::default()).unwrap();
        for s in 0..g.len() {
            let [i, j, _] = g.coords(s);
            let t = g.index([n - 1 - j, i, 0]);
            for k in 0..32 {
                let x = a.at(s, k);
                let y = b.at(t, (k + 8) % 32);
                assert!((x - y).abs() <= 1e-5, "s={s} k={k}: {x} vs {y}");
            }
        }
    }

    #[test]
    fn sphere_lift_of_axis_line() {
        let g = SpatialGrid::unit(vec![15, 15, 15]).unwrap();
        let mut m = vec![false; g.len()];
        for k in 2..13 {
            m[g.index([7, 7, k])] = true;
        }
        let o = OrientationSampling::sphere(4).unwrap();
        let v = lift_mask(&m, &g, &o, &LiftParams::default()).unwrap();
        let best = estimate_orientation(&v, g.index([7, 7, 7])).unwrap();
        assert!(o.direction3(best).z.abs() > 0.9);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let grid = LiftedGrid::new(plane(2), OrientationSampling::circle(4).unwrap()).unwrap();
        let mut values = vec![0.0; grid.len()];
        values[grid.node(1, 1)] = 0.5;
        values[grid.node(1, 3)] = 0.5;
        values[grid.node(2, 2)] = 0.25;
        let v = OrientationVolume::new(grid, values).unwrap();
        assert_eq!(estimate_orientation(&v, 1).unwrap(), 1);
        assert_eq!(estimate_orientation(&v, 2).unwrap(), 2);
        assert_eq!(max_project(&v), vec![0.0, 0.5, 0.25, 0.0]);
    }

    #[test]
    fn binary_mask_rejects_other_values() {
        assert_eq!(binary_mask(&[0.0, 1.0]).unwrap(), vec![false, true]);
        assert!(binary_mask(&[0.5]).is_err());
    }
}
