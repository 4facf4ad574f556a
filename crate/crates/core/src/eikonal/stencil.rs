//! Per-orientation finite-difference stencils `D̃ = Σ ρ_k e_k e_kᵀ` of the
//! dual metric in index coordinates.

use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

use super::selling::{selling_2d, selling_3d};
use crate::error::Result;
use crate::grid::{LiftedGrid, OrientationSampling};
use crate::metrics::MetricSpec;

/// One symmetric stencil term: an integer spatial offset, or the two
/// neighboring orientation indices for an angular term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Term {
    pub weight: f64,
    pub offset: [i32; 3],
    pub angular: Option<(u32, u32)>,
}

/// Stencils for every orientation of a lifted grid.
#[derive(Clone, Debug)]
pub struct Stencils {
    terms: Vec<Vec<Term>>,
    metrics: Vec<Matrix3<f64>>,
    /// Linear index offset of every spatial term (0 for angular terms).
    linear: Vec<Vec<isize>>,
    /// Largest absolute offset per axis over all spatial terms.
    reach: [usize; 3],
    dims: [usize; 3],
}

const WEIGHT_FLOOR: f64 = 1e-14;

/// Isotropic decomposition of the identity over the 8- or 26-neighborhood.
fn isotropic_terms(d: usize, scale: f64) -> Vec<Term> {
    let mut out = Vec::new();
    let push = |out: &mut Vec<Term>, w: f64, e: [i32; 3]| {
        out.push(Term {
            weight: w * scale,
            offset: e,
            angular: None,
        })
    };
    if d == 2 {
        push(&mut out, 0.5, [1, 0, 0]);
        push(&mut out, 0.5, [0, 1, 0]);
        push(&mut out, 0.25, [1, 1, 0]);
        push(&mut out, 0.25, [1, -1, 0]);
    } else {
        for a in 0..3 {
            let mut e = [0; 3];
            e[a] = 1;
            push(&mut out, 1.0 / 3.0, e);
        }
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            for s in [1, -1] {
                let mut e = [0; 3];
                e[a] = 1;
                e[b] = s;
                push(&mut out, 1.0 / 12.0, e);
            }
        }
        for (sy, sz) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
            push(&mut out, 1.0 / 12.0, [1, sy, sz]);
        }
    }
    out
}

fn uniform_spacing(h: &[f64]) -> bool {
    h.iter().all(|&v| (v - h[0]).abs() <= 1e-12 * h[0])
}

/// Spatial dual tensor `ξ⁻²(n nᵀ + ε²(I − n nᵀ))` (or `ξ⁻² I`).
fn spatial_dual_3(spec: &MetricSpec, n: &Vector3<f64>) -> Matrix3<f64> {
    let x2 = spec.xi * spec.xi;
    if spec.spatially_isotropic() {
        return Matrix3::identity() / x2;
    }
    let e2 = spec.epsilon * spec.epsilon;
    let nn = n * n.transpose();
    (nn + (Matrix3::identity() - nn) * e2) / x2
}

fn spatial_dual_2(spec: &MetricSpec, n: &Vector2<f64>) -> Matrix2<f64> {
    let x2 = spec.xi * spec.xi;
    if spec.spatially_isotropic() {
        return Matrix2::identity() / x2;
    }
    let e2 = spec.epsilon * spec.epsilon;
    let nn = n * n.transpose();
    (nn + (Matrix2::identity() - nn) * e2) / x2
}

fn spatial_metric(terms: &[Term], d: usize) -> Matrix3<f64> {
    let mut dual = Matrix3::zeros();
    for t in terms {
        let e = Vector3::new(t.offset[0] as f64, t.offset[1] as f64, t.offset[2] as f64);
        dual += e * e.transpose() * t.weight;
    }
    if d == 2 {
        dual[(2, 2)] = 1.0;
    }
    let mut g = dual.try_inverse().unwrap_or_else(Matrix3::zeros);
    if d == 2 {
        g[(2, 2)] = 0.0;
    }
    g
}

impl Stencils {
    pub fn build(grid: &LiftedGrid, spec: &MetricSpec) -> Result<Self> {
        spec.check_grid(grid)?;
        let sp = &grid.spatial;
        let d = sp.ndim();
        let h = sp.spacing3();
        let iso = spec.spatially_isotropic()
            && uniform_spacing(&sp.spacing)
            && (d == 2 || grid.orientations == OrientationSampling::None);
        let no = grid.n_orientations();
        let mut terms = Vec::with_capacity(no);
        let mut metrics = Vec::with_capacity(no);
        for o in 0..no {
            let mut t: Vec<Term> = if iso {
                let x2 = spec.xi * spec.xi;
                isotropic_terms(d, 1.0 / (x2 * h[0] * h[0]))
            } else if d == 2 {
                let dir = grid.orientations.direction(o);
                let n = if dir.is_empty() {
                    Vector2::x()
                } else {
                    Vector2::new(dir[0], dir[1])
                };
                let m = spatial_dual_2(spec, &n);
                let s = Matrix2::from_diagonal(&Vector2::new(1.0 / h[0], 1.0 / h[1]));
                let dt = s * m * s;
                selling_2d(&[[dt[(0, 0)], dt[(0, 1)]], [dt[(1, 0)], dt[(1, 1)]]])
                    .iter()
                    .map(|&(w, e)| Term {
                        weight: w,
                        offset: [e[0], e[1], 0],
                        angular: None,
                    })
                    .collect()
            } else {
                let n = match grid.orientations {
                    OrientationSampling::Sphere { .. } => grid.orientations.direction3(o),
                    _ => Vector3::z(),
                };
                let m = spatial_dual_3(spec, &n);
                let s = Matrix3::from_diagonal(&Vector3::new(1.0 / h[0], 1.0 / h[1], 1.0 / h[2]));
                let dt = s * m * s;
                let rows: [[f64; 3]; 3] =
                    std::array::from_fn(|r| std::array::from_fn(|c| dt[(r, c)]));
                selling_3d(&rows)
                    .iter()
                    .map(|&(w, e)| Term {
                        weight: w,
                        offset: e,
                        angular: None,
                    })
                    .collect()
            };
            let scale = t.iter().map(|x| x.weight).fold(0.0, f64::max);
            t.retain(|x| x.weight > WEIGHT_FLOOR * scale);
            metrics.push(spatial_metric(&t, d));
            for a in grid.orientations.angular_terms(o) {
                t.push(Term {
                    weight: a.weight,
                    offset: [0; 3],
                    angular: Some((a.plus as u32, a.minus as u32)),
                });
            }
            terms.push(t);
        }
        let dims = sp.dims3();
        let mut reach = [0usize; 3];
        let linear = terms
            .iter()
            .map(|ts| {
                ts.iter()
                    .map(|t| {
                        if t.angular.is_some() {
                            return 0;
                        }
                        for a in 0..3 {
                            reach[a] = reach[a].max(t.offset[a].unsigned_abs() as usize);
                        }
                        t.offset[0] as isize
                            + t.offset[1] as isize * dims[0] as isize
                            + t.offset[2] as isize * (dims[0] * dims[1]) as isize
                    })
                    .collect()
            })
            .collect();
        Ok(Stencils {
            terms,
            metrics,
            linear,
            reach,
            dims,
        })
    }

    pub fn terms(&self, orientation: usize) -> &[Term] {
        &self.terms[orientation]
    }

    /// Spatial metric in index coordinates at orientation `o`: the inverse
    /// of `Σ ρ_k e_k e_kᵀ` over the spatial terms.
    pub fn spatial_metric(&self, orientation: usize) -> &Matrix3<f64> {
        &self.metrics[orientation]
    }

    pub(crate) fn linear(&self, orientation: usize) -> &[isize] {
        &self.linear[orientation]
    }

    /// True when every spatial term of every orientation stays inside the
    /// grid from `ijk`.
    #[inline]
    pub(crate) fn interior(&self, ijk: [usize; 3]) -> bool {
        (0..3).all(|a| ijk[a] >= self.reach[a] && ijk[a] + self.reach[a] < self.dims[a])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// Largest number of terms at any orientation.
    pub fn max_terms(&self) -> usize {
        self.terms.iter().map(Vec::len).max().unwrap_or(0)
    }
}
