//! Iterative key-point detection: fronts grow from a seed along a mask and a
//! new zero-distance source is planted each time the accumulated spatial arc
//! length reaches `l_max` on the mask.

use serde::{Deserialize, Serialize};

use super::{FastMarcher, MarchOptions, Stencils};
use crate::error::{Error, Result};
use crate::grid::LiftedGrid;
use crate::metrics::{CostField, MetricSpec};

/// Spacing and termination parameters of key-point detection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyPointOptions {
    /// Arc length between consecutive key points.
    pub l_max: f64,
    /// The march ends once every pending node has `U_l ≥ stop_factor · l_max`.
    pub stop_factor: f64,
}

impl KeyPointOptions {
    pub fn new(l_max: f64) -> Self {
        KeyPointOptions {
            l_max,
            stop_factor: 3.0,
        }
    }
}

fn check(grid: &LiftedGrid, mask: &[bool], opts: &KeyPointOptions) -> Result<()> {
    if mask.len() != grid.n_spatial() {
        return Err(Error::DimensionMismatch {
            expected: grid.n_spatial(),
            actual: mask.len(),
        });
    }
    if !(opts.l_max > 0.0) || !(opts.stop_factor >= 1.0) {
        return Err(Error::param(
            "l_max",
            "l_max must be positive and stop_factor ≥ 1",
        ));
    }
    Ok(())
}

/// Runs one detection march. `sources` start at zero distance; the first one
/// is reported as the first key point when `seed_is_keypoint` is set.
fn march(
    fm: &mut FastMarcher<'_>,
    grid: &LiftedGrid,
    mask: &[bool],
    sources: &[usize],
    opts: &KeyPointOptions,
    visited: &mut [bool],
) -> Vec<usize> {
    let ns = grid.n_spatial();
    let stop = opts.stop_factor * opts.l_max;
    fm.reset();
    fm.watch_length(stop);
    for &s in sources {
        fm.add_source(s);
    }
    let mut found = Vec::new();
    while let Some(node) = fm.step() {
        let s = node % ns;
        visited[s] = true;
        if mask[s] && fm.length(node) >= opts.l_max {
            fm.add_source(node);
            found.push(node);
        }
        if fm.pending_below_watch() == 0 {
            break;
        }
    }
    found
}

/// Detects key points from `seed` (a node whose spatial sample is on the
/// mask). Returns the seed followed by the detected key points in order.
pub fn detect_keypoints(
    grid: &LiftedGrid,
    metric: &MetricSpec,
    cost: Option<&CostField>,
    mask: &[bool],
    seed: usize,
    opts: &KeyPointOptions,
) -> Result<Vec<usize>> {
    check(grid, mask, opts)?;
    if seed >= grid.len() || !mask[seed % grid.n_spatial()] {
        return Err(Error::param("seed", "seed must be a grid node on the mask"));
    }
    let stencils = Stencils::build(grid, metric)?;
    let mut fm = FastMarcher::new(
        grid,
        &stencils,
        cost.map(CostField::values),
        MarchOptions::default(),
    );
    let mut visited = vec![false; grid.n_spatial()];
    let mut out = vec![seed];
    out.extend(march(&mut fm, grid, mask, &[seed], opts, &mut visited));
    Ok(out)
}

/// Repeats [`detect_keypoints`] from the lowest-index unvisited mask sample
/// until every mask sample has been visited by some front. Earlier key points
/// act as sources of later marches so no duplicates are planted near them.
/// On lifted grids, seeds use orientation 0.
pub fn detect_keypoints_covering(
    grid: &LiftedGrid,
    metric: &MetricSpec,
    cost: Option<&CostField>,
    mask: &[bool],
    opts: &KeyPointOptions,
) -> Result<Vec<usize>> {
    check(grid, mask, opts)?;
    let stencils = Stencils::build(grid, metric)?;
    let mut fm = FastMarcher::new(
        grid,
        &stencils,
        cost.map(CostField::values),
        MarchOptions::default(),
    );
    let mut visited = vec![false; grid.n_spatial()];
    let mut out: Vec<usize> = Vec::new();
    while let Some(seed) = (0..mask.len()).find(|&s| mask[s] && !visited[s]) {
        let mut sources = out.clone();
        sources.push(seed);
        out.push(seed);
        visited[seed] = true;
        let found = march(&mut fm, grid, mask, &sources, opts, &mut visited);
        out.extend(found);
    }
    Ok(out)
}
