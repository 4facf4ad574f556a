//! Fast marching for the eikonal equation `‖∇U‖_𝒢 = 1` on ℝⁿ and on the
//! lifted spaces ℝ²×S¹ and ℝ³×S², with spatial arc-length tracking,
//! geodesic backtracking, and iterative key-point detection.
//!
//! The dual metric is decomposed per orientation into nonnegative
//! combinations of integer offsets: an 8/26-neighbor decomposition for
//! isotropic metrics on ℝ², ℝ³ and ℝ²×S¹, the Selling decomposition for
//! every other spatial block, and axis neighbors on the orientation chart.
//! The resulting upwind scheme is monotone and causal, so nodes are accepted
//! in increasing order of `U`.

mod backtrack;
mod heap;
mod keypoints;
pub mod selling;
mod solver;
mod stencil;

pub use backtrack::{backtrack_geodesic, Geodesic};
pub use heap::IndexedHeap;
pub use keypoints::{detect_keypoints, detect_keypoints_covering, KeyPointOptions};
pub use solver::{FastMarcher, MarchOptions};
pub use stencil::{Stencils, Term};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::LiftedGrid;
use crate::metrics::{CostField, MetricSpec};

/// Geodesic distance `U` and spatial arc length `U_l` from a source set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceField {
    pub grid: LiftedGrid,
    pub metric: MetricSpec,
    /// `U` per node; `+∞` where the front never arrived.
    pub values: Vec<f64>,
    /// `U_l` per node; `+∞` where the front never arrived.
    pub lengths: Vec<f64>,
    pub sources: Vec<usize>,
}

impl DistanceField {
    pub fn value(&self, node: usize) -> f64 {
        self.values[node]
    }

    pub fn length(&self, node: usize) -> f64 {
        self.lengths[node]
    }

    /// Multilinear interpolation of `U` on orientation slice `o` at a
    /// physical position. Returns `+∞` outside the grid or next to unreached
    /// nodes.
    pub fn interpolate(&self, o: usize, position: &[f64]) -> f64 {
        interpolate_slice(&self.grid, &self.values, o, position)
    }
}

pub(crate) fn interpolate_slice(
    grid: &LiftedGrid,
    data: &[f64],
    o: usize,
    position: &[f64],
) -> f64 {
    let sp = &grid.spatial;
    let d = sp.ndim();
    if position.len() != d {
        return f64::INFINITY;
    }
    let f = sp.to_index_space(position);
    let dims = sp.dims3();
    let mut base = [0usize; 3];
    let mut frac = [0.0f64; 3];
    for a in 0..d {
        let n = dims[a];
        if !(f[a] >= 0.0 && f[a] <= (n - 1) as f64) {
            return f64::INFINITY;
        }
        let b = (f[a].floor() as usize).min(n.saturating_sub(2));
        base[a] = b;
        frac[a] = f[a] - b as f64;
    }
    let offset = o * grid.n_spatial();
    let mut acc = 0.0;
    for corner in 0..(1usize << d) {
        let mut w = 1.0;
        let mut ijk = base;
        for a in 0..d {
            let bit = (corner >> a) & 1;
            if dims[a] == 1 {
                if bit == 1 {
                    w = 0.0;
                }
                continue;
            }
            ijk[a] += bit;
            w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
        }
        if w == 0.0 {
            continue;
        }
        let v = data[offset + sp.index(ijk)];
        if !v.is_finite() {
            return f64::INFINITY;
        }
        acc += w * v;
    }
    acc
}

/// Solves the eikonal equation from `sources` (node indices) to completion.
pub fn solve_eikonal(
    grid: &LiftedGrid,
    metric: &MetricSpec,
    cost: Option<&CostField>,
    sources: &[usize],
    options: MarchOptions,
) -> Result<DistanceField> {
    let stencils = Stencils::build(grid, metric)?;
    if let Some(c) = cost {
        if c.grid != *grid {
            return Err(Error::param("cost", "cost field lives on a different grid"));
        }
    }
    if sources.is_empty() {
        return Err(Error::param("sources", "at least one source is required"));
    }
    if let Some(&bad) = sources.iter().find(|&&s| s >= grid.len()) {
        return Err(Error::param(
            "sources",
            format!("node {bad} outside the grid"),
        ));
    }
    let mut fm = FastMarcher::new(grid, &stencils, cost.map(CostField::values), options);
    for &s in sources {
        fm.add_source(s);
    }
    fm.run();
    let (values, lengths, sources) = fm.take_values();
    Ok(DistanceField {
        grid: grid.clone(),
        metric: *metric,
        values,
        lengths,
        sources,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{OrientationSampling, SpatialGrid};
    use crate::metrics::Manifold;

    fn plane(n: usize, half: f64) -> LiftedGrid {
        LiftedGrid::new(
            SpatialGrid::centered(2, n, half).unwrap(),
            OrientationSampling::None,
        )
        .unwrap()
    }

    #[test]
    fn source_value_is_zero() {
        let g = plane(21, 1.0);
        let src = g.locate(&[0.0, 0.0], None).unwrap();
        let f = solve_eikonal(
            &g,
            &MetricSpec::euclidean(Manifold::R2),
            None,
            &[src],
            MarchOptions::default(),
        )
        .unwrap();
        assert_eq!(f.value(src), 0.0);
        assert_eq!(f.length(src), 0.0);
        assert!(f.values.iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn straight_line_distance() {
        let g = plane(201, 5.0);
        let src = g.locate(&[0.0, 0.0], None).unwrap();
        let f = solve_eikonal(
            &g,
            &MetricSpec::euclidean(Manifold::R2),
            None,
            &[src],
            MarchOptions::default(),
        )
        .unwrap();
        let t = g.locate(&[3.0, 4.0], None).unwrap();
        assert!((f.value(t) - 5.0).abs() < 0.1, "U = {}", f.value(t));
        assert!((f.length(t) - 5.0).abs() < 0.1, "U_l = {}", f.length(t));
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = plane(5, 1.0);
        let m = MetricSpec::euclidean(Manifold::R2);
        assert!(solve_eikonal(&g, &m, None, &[], MarchOptions::default()).is_err());
        assert!(solve_eikonal(&g, &m, None, &[1000], MarchOptions::default()).is_err());
        let se2 = MetricSpec::sub_riemannian(Manifold::SE2, 1.0, 0.1);
        assert!(solve_eikonal(&g, &se2, None, &[0], MarchOptions::default()).is_err());
    }

    #[test]
    fn interpolation_reproduces_nodes() {
        let g = plane(11, 1.0);
        let data: Vec<f64> = (0..g.len()).map(|i| i as f64).collect();
        for s in [0, 17, 60, 120] {
            let p = g.spatial.position(s);
            assert!((interpolate_slice(&g, &data, 0, &p) - s as f64).abs() < 1e-9);
        }
    }
}
