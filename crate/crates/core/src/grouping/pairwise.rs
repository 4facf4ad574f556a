//! Pairwise distance tables from the nilpotent approximation or from fast
//! marching, with the orientation of the target taken up to sign.

use nalgebra::Vector3;
use rayon::prelude::*;

use super::{KeyPoint, PairTable};
use crate::eikonal::{FastMarcher, MarchOptions, Stencils};
use crate::error::{Error, Result};
use crate::grid::LiftedGrid;
use crate::metrics::{CostField, Manifold};
use crate::se2::{self, Se2};
use crate::se3::{self, OrientedPoint3};

/// How pairwise distances are obtained.
#[derive(Clone, Copy, Debug)]
pub enum Backend<'a> {
    /// Gauge norm of the logarithm on SE(2)/SE(3), or the Euclidean distance
    /// on ℝ²/ℝ³. The spatial length of a pair is the chord.
    Analytic {
        manifold: Manifold,
        xi: f64,
        zeta: f64,
    },
    /// One fast-marching solve per key point. With `s_max` set, fronts are
    /// not expanded past that arc length and only pairs within that chord
    /// length are measured.
    FastMarching {
        grid: &'a LiftedGrid,
        metric: &'a crate::metrics::MetricSpec,
        cost: Option<&'a CostField>,
        s_max: Option<f64>,
    },
}

fn chord(a: &KeyPoint, b: &KeyPoint) -> f64 {
    a.position
        .iter()
        .zip(&b.position)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn check_points(points: &[KeyPoint], d: usize, oriented: bool) -> Result<()> {
    for (k, p) in points.iter().enumerate() {
        if p.position.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: p.position.len(),
            });
        }
        if oriented {
            let norm: f64 = p.orientation.iter().map(|v| v * v).sum::<f64>().sqrt();
            if p.orientation.len() != d || !(norm > 1e-12) {
                return Err(Error::param(
                    "orientation",
                    format!("key point {k} needs a nonzero {d}D orientation"),
                ));
            }
        }
    }
    Ok(())
}

fn se2_pose(p: &KeyPoint) -> Se2 {
    Se2::new(
        p.position[0],
        p.position[1],
        p.orientation[1].atan2(p.orientation[0]),
    )
}

fn oriented3(p: &KeyPoint) -> Result<OrientedPoint3> {
    OrientedPoint3::new(
        Vector3::new(p.position[0], p.position[1], p.position[2]),
        Vector3::new(p.orientation[0], p.orientation[1], p.orientation[2]),
    )
}

/// Analytic table; see [`Backend::Analytic`].
pub fn analytic_table(
    points: &[KeyPoint],
    manifold: Manifold,
    xi: f64,
    zeta: f64,
) -> Result<PairTable> {
    if !(xi > 0.0 && zeta > 0.0) {
        return Err(Error::param("xi/zeta", "must be positive"));
    }
    let n = points.len();
    let mut t = PairTable::new(n);
    match manifold {
        Manifold::R2 | Manifold::R3 => {
            check_points(points, if manifold == Manifold::R2 { 2 } else { 3 }, false)?;
            for i in 0..n {
                for j in i + 1..n {
                    let c = chord(&points[i], &points[j]);
                    t.set(i, j, c, c);
                }
            }
        }
        Manifold::SE2 => {
            check_points(points, 2, true)?;
            let poses: Vec<Se2> = points.iter().map(se2_pose).collect();
            for i in 0..n {
                for j in i + 1..n {
                    let d = se2::approx_distance(&poses[i], &poses[j], xi, zeta).min(
                        se2::approx_distance(&poses[i], &poses[j].antipode(), xi, zeta),
                    );
                    t.set(i, j, d, chord(&points[i], &points[j]));
                }
            }
        }
        Manifold::SE3 => {
            check_points(points, 3, true)?;
            let poses = points.iter().map(oriented3).collect::<Result<Vec<_>>>()?;
            for i in 0..n {
                for j in i + 1..n {
                    let d = se3::approx_distance_oriented(&poses[i], &poses[j], xi, zeta).min(
                        se3::approx_distance_oriented(&poses[i], &poses[j].antipode(), xi, zeta),
                    );
                    t.set(i, j, d, chord(&points[i], &points[j]));
                }
            }
        }
    }
    Ok(t)
}

/// Fast-marching table; see [`Backend::FastMarching`]. Unreached pairs
/// stay at `+∞`.
pub fn fast_marching_table(
    points: &[KeyPoint],
    grid: &LiftedGrid,
    metric: &crate::metrics::MetricSpec,
    cost: Option<&CostField>,
    s_max: Option<f64>,
) -> Result<PairTable> {
    let stencils = Stencils::build(grid, metric)?;
    if let Some(c) = cost {
        if c.grid != *grid {
            return Err(Error::param("cost", "cost field lives on a different grid"));
        }
    }
    let lifted = grid.orientations.ambient_dim() > 0;
    check_points(points, grid.spatial.ndim(), lifted)?;
    let n = points.len();
    let mut nodes = Vec::with_capacity(n);
    for (k, p) in points.iter().enumerate() {
        let dir = lifted.then_some(p.orientation.as_slice());
        let node = grid.locate(&p.position, dir).ok_or_else(|| {
            Error::param("keypoints", format!("key point {k} lies outside the grid"))
        })?;
        let (s, o) = grid.split(node);
        nodes.push([node, grid.node(s, grid.orientations.antipode(o))]);
    }
    let options = MarchOptions {
        length_limit: s_max,
        value_limit: None,
    };
    let rows: Vec<Vec<(usize, f64, f64)>> = (0..n)
        .into_par_iter()
        .map_init(
            || FastMarcher::new(grid, &stencils, cost.map(CostField::values), options),
            |fm, i| {
                let targets: Vec<usize> = (i + 1..n)
                    .filter(|&j| s_max.is_none_or(|s| chord(&points[i], &points[j]) <= s))
                    .collect();
                if targets.is_empty() {
                    return Vec::new();
                }
                fm.reset();
                fm.add_source(nodes[i][0]);
                let mut pending = targets.len();
                let mut done = vec![false; targets.len()];
                while pending > 0 {
                    let Some(acc) = fm.step() else { break };
                    for (k, &j) in targets.iter().enumerate() {
                        if !done[k] && nodes[j].contains(&acc) {
                            done[k] = true;
                            pending -= 1;
                        }
                    }
                }
                targets
                    .iter()
                    .filter_map(|&j| {
                        nodes[j]
                            .iter()
                            .filter(|&&t| fm.is_accepted(t))
                            .map(|&t| (fm.value(t), fm.length(t)))
                            .min_by(|a, b| a.0.total_cmp(&b.0))
                            .map(|(d, l)| (j, d, l))
                    })
                    .collect()
            },
        )
        .collect();
    let mut t = PairTable::new(n);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, d, l) in row {
            t.set(i, j, d, l);
        }
    }
    Ok(t)
}

/// Dispatches to [`analytic_table`] or [`fast_marching_table`].
pub fn pairwise_geodesics(points: &[KeyPoint], backend: &Backend<'_>) -> Result<PairTable> {
    if points.len() < 2 {
        return Err(Error::param(
            "keypoints",
            "at least two key points are required",
        ));
    }
    match *backend {
        Backend::Analytic { manifold, xi, zeta } => analytic_table(points, manifold, xi, zeta),
        Backend::FastMarching {
            grid,
            metric,
            cost,
            s_max,
        } => fast_marching_table(points, grid, metric, cost, s_max),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{OrientationSampling, SpatialGrid};
    use crate::metrics::MetricSpec;

    fn kp(x: &[f64], o: &[f64]) -> KeyPoint {
        KeyPoint {
            position: x.to_vec(),
            orientation: o.to_vec(),
            labels: Vec::new(),
        }
    }

    #[test]
    fn aligned_pair_is_gauge_norm_of_log() {
        let pts = [kp(&[0.0, 0.0], &[1.0, 0.0]), kp(&[2.0, 0.0], &[1.0, 0.0])];
        let t = pairwise_geodesics(
            &pts,
            &Backend::Analytic {
                manifold: Manifold::SE2,
                xi: 1.0,
                zeta: 44.0,
            },
        )
        .unwrap();
        let want = Se2::new(2.0, 0.0, 0.0).log().gauge_norm(1.0, 44.0);
        assert!((t.distance(0, 1) - want).abs() < 1e-12);
        assert_eq!(t.distance(0, 0), 0.0);
        assert_eq!(t.distance(1, 0), t.distance(0, 1));
        assert_eq!(t.spatial_length(0, 1), 2.0);
    }

    #[test]
    fn target_sign_is_ignored() {
        let a = [
            kp(&[0.0, 0.0, 0.0], &[0.0, 0.0, 1.0]),
            kp(&[0.3, 0.1, 2.0], &[0.1, 0.0, 1.0]),
        ];
        let b = [a[0].clone(), kp(&[0.3, 0.1, 2.0], &[-0.1, 0.0, -1.0])];
        let m = Manifold::SE3;
        let ta = analytic_table(&a, m, 1.0, 100.0).unwrap();
        let tb = analytic_table(&b, m, 1.0, 100.0).unwrap();
        assert!((ta.distance(0, 1) - tb.distance(0, 1)).abs() < 1e-12);
    }

    #[test]
    fn euclidean_fast_marching_matches_chord() {
        let grid = LiftedGrid::new(
            SpatialGrid::unit(vec![31, 31]).unwrap(),
            OrientationSampling::None,
        )
        .unwrap();
        let pts = [
            kp(&[5.0, 5.0], &[]),
            kp(&[15.0, 5.0], &[]),
            kp(&[25.0, 25.0], &[]),
        ];
        let t = fast_marching_table(
            &pts,
            &grid,
            &MetricSpec::euclidean(Manifold::R2),
            None,
            Some(12.0),
        )
        .unwrap();
        assert!(
            (10.0..11.1).contains(&t.distance(0, 1)),
            "{}",
            t.distance(0, 1)
        );
        assert!((10.0..11.1).contains(&t.spatial_length(0, 1)));
        assert!(t.distance(0, 2).is_infinite());
        let full = fast_marching_table(
            &pts,
            &grid,
            &MetricSpec::euclidean(Manifold::R2),
            None,
            None,
        )
        .unwrap();
        let d = full.distance(0, 2);
        assert!(d >= 800f64.sqrt() - 0.1 && d < 800f64.sqrt() + 1.1, "{d}");
    }

    #[test]
    fn off_grid_points_are_rejected() {
        let grid = LiftedGrid::new(
            SpatialGrid::unit(vec![5, 5]).unwrap(),
            OrientationSampling::None,
        )
        .unwrap();
        let pts = [kp(&[1.0, 1.0], &[]), kp(&[9.0, 1.0], &[])];
        assert!(fast_marching_table(
            &pts,
            &grid,
            &MetricSpec::euclidean(Manifold::R2),
            None,
            None
        )
        .is_err());
    }
}
