//! Perceptual grouping of oriented key points into chains.
//!
//! Candidate edges are the pairs whose connecting geodesic is spatially
//! shorter than `s_max`. They are taken in order of increasing distance and
//! kept when both endpoints still have fewer than two edges and lie in
//! different components, so the result is a union of simple paths.

mod experiment;
mod pairwise;
mod pipeline;
mod union_find;

pub use experiment::{
    run_synthetic_experiment, BackendKind, BackendScore, ExperimentConfig, ExperimentReport,
};
pub use pairwise::{analytic_table, fast_marching_table, pairwise_geodesics, Backend};
pub use pipeline::{keypoints_from_mask, keypoints_from_raster, KeyPointPipeline};
pub use union_find::UnionFind;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default `s_max` for planar data, in pixels.
pub const DEFAULT_S_MAX_2D: f64 = 80.0;
/// Default `s_max` for volumes, in voxels.
pub const DEFAULT_S_MAX_3D: f64 = 15.0;
/// Default `ξ` for planar data.
pub const DEFAULT_XI_2D: f64 = 0.01;
/// Default `ξ` for volumes.
pub const DEFAULT_XI_3D: f64 = 1.0;

/// A position with an unsigned orientation and optional ground-truth labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KeyPoint {
    #[serde(rename = "x")]
    pub position: Vec<f64>,
    pub orientation: Vec<f64>,
    /// Ground-truth components this point belongs to (several at crossings).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<usize>,
}

/// Symmetric table of pairwise distances and connecting spatial lengths.
#[derive(Clone, Debug, PartialEq)]
pub struct PairTable {
    n: usize,
    distance: Vec<f64>,
    spatial_length: Vec<f64>,
}

impl PairTable {
    /// Zero diagonal, `+∞` elsewhere.
    pub fn new(n: usize) -> Self {
        let mut distance = vec![f64::INFINITY; n * n];
        let mut spatial_length = vec![f64::INFINITY; n * n];
        for i in 0..n {
            distance[i * n + i] = 0.0;
            spatial_length[i * n + i] = 0.0;
        }
        PairTable {
            n,
            distance,
            spatial_length,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn set(&mut self, i: usize, j: usize, distance: f64, spatial_length: f64) {
        let n = self.n;
        self.distance[i * n + j] = distance;
        self.distance[j * n + i] = distance;
        self.spatial_length[i * n + j] = spatial_length;
        self.spatial_length[j * n + i] = spatial_length;
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.distance[i * self.n + j]
    }

    pub fn spatial_length(&self, i: usize, j: usize) -> f64 {
        self.spatial_length[i * self.n + j]
    }

    /// The same table with every distance multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        PairTable {
            n: self.n,
            distance: self.distance.iter().map(|d| d * factor).collect(),
            spatial_length: self.spatial_length.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub distance: f64,
    pub spatial_length: f64,
}

/// Candidate set, selected edges, and final node degrees of one grouping run.
#[derive(Clone, Debug, PartialEq)]
pub struct Grouping {
    pub candidates: Vec<Edge>,
    pub edges: Vec<Edge>,
    pub degrees: Vec<u8>,
}

/// Greedy grouping over all pairs with spatial length at most `s_max`.
/// Equal distances are resolved by the lexicographic order of `(i, j)`.
pub fn perceptual_group(table: &PairTable, s_max: f64) -> Grouping {
    let n = table.len();
    let mut candidates: Vec<Edge> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let d = table.distance(i, j);
            let l = table.spatial_length(i, j);
            if d.is_finite() && l <= s_max {
                candidates.push(Edge {
                    i,
                    j,
                    distance: d,
                    spatial_length: l,
                });
            }
        }
    }
    candidates.sort_by(|a, b| {
        a.distance
            .total_cmp(&b.distance)
            .then((a.i, a.j).cmp(&(b.i, b.j)))
    });
    let mut degrees = vec![0u8; n];
    let mut components = UnionFind::new(n);
    let mut edges = Vec::new();
    for e in &candidates {
        if degrees[e.i] < 2 && degrees[e.j] < 2 && components.union(e.i, e.j) {
            degrees[e.i] += 1;
            degrees[e.j] += 1;
            edges.push(*e);
        }
    }
    Grouping {
        candidates,
        edges,
        degrees,
    }
}

/// Checks that `edges` over `n` nodes form a forest with degrees at most 2
/// and spatial lengths at most `s_max`; returns a description of the first
/// violation.
pub fn check_structure(n: usize, edges: &[Edge], s_max: f64) -> std::result::Result<(), String> {
    let mut deg = vec![0usize; n];
    let mut uf = UnionFind::new(n);
    for e in edges {
        if e.i >= n || e.j >= n || e.i == e.j {
            return Err(format!(
                "edge ({}, {}) is not between two distinct nodes",
                e.i, e.j
            ));
        }
        if e.spatial_length > s_max {
            return Err(format!(
                "edge ({}, {}) has spatial length {} > {s_max}",
                e.i, e.j, e.spatial_length
            ));
        }
        deg[e.i] += 1;
        deg[e.j] += 1;
        if deg[e.i] > 2 || deg[e.j] > 2 {
            return Err(format!("edge ({}, {}) raises a degree above 2", e.i, e.j));
        }
        if !uf.union(e.i, e.j) {
            return Err(format!("edge ({}, {}) closes a cycle", e.i, e.j));
        }
    }
    Ok(())
}

/// Correctness of a grouping against ground-truth labels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Accuracy {
    pub edges: usize,
    pub correct: usize,
    pub false_connections: usize,
    /// Share of correct edges in percent (100 when there are no edges).
    pub percent: f64,
}

/// An edge is correct when its endpoints share a ground-truth label.
pub fn evaluate_grouping(edges: &[Edge], labels: &[Vec<usize>]) -> Result<Accuracy> {
    if let Some(k) = labels.iter().position(Vec::is_empty) {
        return Err(Error::MissingData(format!("key point {k} has no label")));
    }
    let mut correct = 0;
    for e in edges {
        let (a, b) = (
            labels
                .get(e.i)
                .ok_or_else(|| Error::param("edges", "edge endpoint without a label"))?,
            labels
                .get(e.j)
                .ok_or_else(|| Error::param("edges", "edge endpoint without a label"))?,
        );
        if a.iter().any(|l| b.contains(l)) {
            correct += 1;
        }
    }
    let total = edges.len();
    Ok(Accuracy {
        edges: total,
        correct,
        false_connections: total - correct,
        percent: if total == 0 {
            100.0
        } else {
            100.0 * correct as f64 / total as f64
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct NodeRecord {
    id: usize,
    x: Vec<f64>,
    orientation: Vec<f64>,
    label: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    labels: Vec<usize>,
}

/// Serializable key-point graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphRecord {
    nodes: Vec<NodeRecord>,
    pub edges: Vec<Edge>,
}

impl GraphRecord {
    pub fn new(points: &[KeyPoint], edges: &[Edge]) -> Self {
        GraphRecord {
            nodes: points
                .iter()
                .enumerate()
                .map(|(id, p)| NodeRecord {
                    id,
                    x: p.position.clone(),
                    orientation: p.orientation.clone(),
                    label: p.labels.first().copied(),
                    labels: if p.labels.len() > 1 {
                        p.labels.clone()
                    } else {
                        Vec::new()
                    },
                })
                .collect(),
            edges: edges.to_vec(),
        }
    }

    pub fn points(&self) -> Vec<KeyPoint> {
        self.nodes
            .iter()
            .map(|n| KeyPoint {
                position: n.x.clone(),
                orientation: n.orientation.clone(),
                labels: if n.labels.is_empty() {
                    n.label.into_iter().collect()
                } else {
                    n.labels.clone()
                },
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(n: usize, entries: &[(usize, usize, f64, f64)]) -> PairTable {
        let mut t = PairTable::new(n);
        for &(i, j, d, l) in entries {
            t.set(i, j, d, l);
        }
        t
    }

    #[test]
    fn two_nodes_one_edge() {
        let g = perceptual_group(&table(2, &[(0, 1, 1.0, 1.0)]), 5.0);
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.degrees, vec![1, 1]);
    }

    #[test]
    fn triangle_keeps_two_edges() {
        let t = table(3, &[(0, 1, 1.0, 1.0), (1, 2, 1.0, 1.0), (0, 2, 1.0, 1.0)]);
        let g = perceptual_group(&t, 5.0);
        assert_eq!(g.edges.len(), 2);
        assert_eq!((g.edges[0].i, g.edges[0].j), (0, 1));
        assert_eq!((g.edges[1].i, g.edges[1].j), (0, 2));
        assert!(check_structure(3, &g.edges, 5.0).is_ok());
    }

    #[test]
    fn degree_cap_forces_path() {
        // Node 1 is closest to all of 0, 2, 3; 3 also reaches 2.
        let t = table(
            4,
            &[
                (0, 1, 1.0, 1.0),
                (1, 2, 1.1, 1.0),
                (1, 3, 1.2, 1.0),
                (2, 3, 2.0, 1.0),
                (0, 3, 3.0, 1.0),
            ],
        );
        let g = perceptual_group(&t, 5.0);
        let pairs: Vec<(usize, usize)> = g.edges.iter().map(|e| (e.i, e.j)).collect();
        assert_eq!(pairs, vec![(0, 1), (1, 2), (2, 3)]);
        assert!(g.degrees.iter().all(|&d| d <= 2));
    }

    #[test]
    fn long_pairs_are_not_candidates() {
        let g = perceptual_group(&table(2, &[(0, 1, 1.0, 6.0)]), 5.0);
        assert!(g.candidates.is_empty() && g.edges.is_empty());
    }

    #[test]
    fn accuracy_counts() {
        let e = |i, j| Edge {
            i,
            j,
            distance: 1.0,
            spatial_length: 1.0,
        };
        let labels: Vec<Vec<usize>> = (0..11).map(|k| vec![usize::from(k == 10)]).collect();
        let within: Vec<Edge> = (0..9).map(|k| e(k, k + 1)).collect();
        let a = evaluate_grouping(&within, &labels).unwrap();
        assert_eq!((a.percent, a.false_connections), (100.0, 0));
        let mut mixed = within.clone();
        mixed.push(e(9, 10));
        let a = evaluate_grouping(&mixed, &labels).unwrap();
        assert_eq!((a.percent, a.false_connections), (90.0, 1));
        let mut unlabeled = labels.clone();
        unlabeled[3].clear();
        assert!(evaluate_grouping(&within, &unlabeled).is_err());
    }

    #[test]
    fn shared_label_at_crossing_counts_as_correct() {
        let e = Edge {
            i: 0,
            j: 1,
            distance: 1.0,
            spatial_length: 1.0,
        };
        let a = evaluate_grouping(&[e], &[vec![0, 2], vec![2]]).unwrap();
        assert_eq!(a.correct, 1);
    }

    #[test]
    fn graph_record_roundtrip() {
        let pts = vec![
            KeyPoint {
                position: vec![0.0, 1.0],
                orientation: vec![1.0, 0.0],
                labels: vec![3],
            },
            KeyPoint {
                position: vec![2.0, 1.0],
                orientation: vec![0.0, 1.0],
                labels: vec![1, 3],
            },
        ];
        let rec = GraphRecord::new(&pts, &[]);
        let text = serde_json::to_string(&rec).unwrap();
        assert!(text.contains("\"label\":3"));
        let back: GraphRecord = serde_json::from_str(&text).unwrap();
        assert_eq!(back.points(), pts);
    }
}
