//! Key points from a centerline mask: fronts of the Euclidean metric with the
//! mask as cost plant key points every `l_max` of arc length, and each point
//! takes the orientation of maximal lifted response.

use serde::{Deserialize, Serialize};

use super::KeyPoint;
use crate::eikonal::{detect_keypoints_covering, KeyPointOptions};
use crate::error::{Error, Result};
use crate::grid::{LiftedGrid, OrientationSampling, SpatialGrid};
use crate::lifting::{estimate_orientation, OrientationVolume};
use crate::metrics::{CostField, Manifold, MetricSpec};
use crate::synthesis::Raster;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KeyPointPipeline {
    pub l_max: f64,
    /// Cost parameters `C = 1/(1 + λ m^p)` of the mask `m`.
    pub lambda: f64,
    pub p: f64,
}

impl KeyPointPipeline {
    pub fn new(l_max: f64) -> Self {
        KeyPointPipeline {
            l_max,
            lambda: 100.0,
            p: 1.0,
        }
    }
}

/// Key points on `mask` with orientations from `volume`. A point without
/// orientation evidence takes orientation sample 0.
pub fn keypoints_from_mask(
    mask: &[bool],
    spatial: &SpatialGrid,
    volume: &OrientationVolume,
    opts: &KeyPointPipeline,
) -> Result<Vec<KeyPoint>> {
    if volume.grid.spatial != *spatial {
        return Err(Error::param(
            "volume",
            "orientation volume lives on a different grid",
        ));
    }
    let manifold = match spatial.ndim() {
        2 => Manifold::R2,
        3 => Manifold::R3,
        d => {
            return Err(Error::param(
                "mask",
                format!("{d}D masks are not supported"),
            ))
        }
    };
    let grid = LiftedGrid::new(spatial.clone(), OrientationSampling::None)?;
    let m: Vec<f32> = mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let cost = CostField::from_vesselness(grid.clone(), &m, opts.lambda, opts.p)?;
    let nodes = detect_keypoints_covering(
        &grid,
        &MetricSpec::euclidean(manifold),
        Some(&cost),
        mask,
        &KeyPointOptions::new(opts.l_max),
    )?;
    let mut seen = vec![false; spatial.len()];
    let mut out = Vec::new();
    for s in nodes {
        if std::mem::replace(&mut seen[s], true) {
            continue;
        }
        let o = estimate_orientation(volume, s).unwrap_or(0);
        out.push(KeyPoint {
            position: spatial.position(s),
            orientation: volume.grid.orientations.direction(o),
            labels: Vec::new(),
        });
    }
    Ok(out)
}

/// [`keypoints_from_mask`] on a synthetic raster, with ground-truth labels.
pub fn keypoints_from_raster(
    raster: &Raster,
    volume: &OrientationVolume,
    opts: &KeyPointPipeline,
) -> Result<Vec<KeyPoint>> {
    let mut pts = keypoints_from_mask(&raster.mask, &raster.grid, volume, opts)?;
    for p in &mut pts {
        let s = raster
            .grid
            .nearest(&p.position)
            .ok_or_else(|| Error::Numerical("key point left the grid".into()))?;
        p.labels = raster.labels_at(s);
    }
    Ok(pts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lifting::{lift_mask, LiftParams};

    #[test]
    fn keypoints_follow_a_line() {
        let sp = SpatialGrid::unit(vec![60, 21]).unwrap();
        let mut mask = vec![false; sp.len()];
        for x in 5..55 {
            mask[sp.index([x, 10, 0])] = true;
        }
        let vol = lift_mask(
            &mask,
            &sp,
            &OrientationSampling::circle(16).unwrap(),
            &LiftParams::default(),
        )
        .unwrap();
        let pts = keypoints_from_mask(&mask, &sp, &vol, &KeyPointPipeline::new(10.0)).unwrap();
        assert!(pts.len() >= 5, "{} key points", pts.len());
        for p in &pts {
            assert_eq!(p.position[1], 10.0);
            assert!(
                p.orientation[0].abs() > 0.9,
                "{:?} at {:?}",
                p.orientation,
                p.position
            );
        }
    }
}
