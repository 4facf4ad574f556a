//! Steepest-descent backtracking `γ̇ ∝ −𝒢⁻¹ dU` through a solved field.

use std::collections::HashSet;

use super::solver::{Ctx, Local};
use super::{DistanceField, Stencils};
use crate::error::{Error, Result};
use crate::grid::OrientationSampling;
use crate::metrics::CostField;

/// A backtracked minimal path, ordered from the endpoint to a source.
#[derive(Clone, Debug, PartialEq)]
pub struct Geodesic {
    /// Physical positions along the path.
    pub positions: Vec<Vec<f64>>,
    /// Unit orientation at each position (empty vectors on ℝⁿ).
    pub orientations: Vec<Vec<f64>>,
    /// Euclidean length of the spatial projection.
    pub spatial_length: f64,
    /// `U(endpoint) − U(final point)`.
    pub value_drop: f64,
}

/// Continuous position in (spatial index, orientation chart index) space.
#[derive(Clone, Copy, Debug)]
struct State {
    p: [f64; 3],
    q: [f64; 2],
}

struct Tracer<'a> {
    field: &'a DistanceField,
    ctx: Ctx<'a>,
    d: usize,
}

impl<'a> Tracer<'a> {
    /// Orientation nodes around chart position `q` with weights and a flag
    /// for rows reached across a pole (β axis reversed).
    fn orientation_corners(&self, q: [f64; 2]) -> Vec<(usize, f64, bool)> {
        match self.field.grid.orientations {
            OrientationSampling::None => vec![(0, 1.0, false)],
            OrientationSampling::Circle { n } => {
                let b = q[0].floor();
                let t = q[0] - b;
                let i0 = (b as i64).rem_euclid(n as i64) as usize;
                vec![(i0, 1.0 - t, false), ((i0 + 1) % n, t, false)]
            }
            OrientationSampling::Sphere { n_beta, .. } => {
                let nb = n_beta as i64;
                let ng = 2 * nb;
                let b0 = q[0].floor();
                let g0 = q[1].floor();
                let (tb, tg) = (q[0] - b0, q[1] - g0);
                let mut out = Vec::with_capacity(4);
                for (db, wb) in [(0i64, 1.0 - tb), (1, tb)] {
                    for (dg, wg) in [(0i64, 1.0 - tg), (1, tg)] {
                        let (mut b, mut g) = (b0 as i64 + db, g0 as i64 + dg);
                        let mut flip = false;
                        if b < 0 {
                            b = -1 - b;
                            g += nb;
                            flip = true;
                        } else if b >= nb {
                            b = 2 * nb - 1 - b;
                            g += nb;
                            flip = true;
                        }
                        let g = g.rem_euclid(ng);
                        out.push(((b * ng + g) as usize, wb * wg, flip));
                    }
                }
                out
            }
        }
    }

    fn spatial_corners(&self, p: [f64; 3]) -> Vec<([usize; 3], f64)> {
        let dims = self.ctx.dims;
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..self.d {
            let n = dims[a];
            let x = p[a].clamp(0.0, (n - 1) as f64);
            let b = (x.floor() as usize).min(n.saturating_sub(2));
            base[a] = b;
            frac[a] = if n > 1 { x - b as f64 } else { 0.0 };
        }
        let mut out = Vec::with_capacity(1 << self.d);
        for corner in 0..(1usize << self.d) {
            let mut ijk = base;
            let mut w = 1.0;
            for a in 0..self.d {
                let bit = (corner >> a) & 1;
                if dims[a] == 1 && bit == 1 {
                    w = 0.0;
                }
                ijk[a] = (ijk[a] + bit).min(dims[a] - 1);
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
            }
            if w > 0.0 {
                out.push((ijk, w));
            }
        }
        out
    }

    fn node_flow(&self, node: usize, ijk: [usize; 3], o: usize) -> Option<Local> {
        let u = &self.field.values;
        let un = u[node];
        if !un.is_finite() {
            return None;
        }
        self.ctx
            .solve(node, ijk, o, u, &self.field.lengths, f64::INFINITY, |nb| {
                u[nb] < un
            })
    }

    /// Interpolated `U` and descent velocity at a continuous state.
    fn sample(&self, st: &State) -> (f64, [f64; 3], [f64; 2]) {
        let ns = self.ctx.n_spatial;
        let sp = &self.field.grid.spatial;
        let mut value = 0.0;
        let mut wsum = 0.0;
        let mut vel = [0.0; 3];
        let mut ang = [0.0; 2];
        for (o, wo, flip) in self.orientation_corners(st.q) {
            for (ijk, ws) in self.spatial_corners(st.p) {
                let w = wo * ws;
                if w == 0.0 {
                    continue;
                }
                let node = o * ns + sp.index(ijk);
                let u = self.field.values[node];
                if !u.is_finite() {
                    continue;
                }
                value += w * u;
                wsum += w;
                if let Some(l) = self.node_flow(node, ijk, o) {
                    for a in 0..3 {
                        vel[a] += w * l.velocity[a];
                    }
                    ang[0] += w * if flip { -l.angular[0] } else { l.angular[0] };
                    ang[1] += w * l.angular[1];
                }
            }
        }
        if wsum == 0.0 {
            return (f64::INFINITY, vel, ang);
        }
        let inv = 1.0 / wsum;
        (value * inv, vel.map(|v| v * inv), ang.map(|v| v * inv))
    }

    fn normalize(&self, st: &mut State) {
        match self.field.grid.orientations {
            OrientationSampling::None => {}
            OrientationSampling::Circle { n } => st.q[0] = st.q[0].rem_euclid(n as f64),
            OrientationSampling::Sphere { n_beta, .. } => {
                let nb = n_beta as f64;
                if st.q[0] < -0.5 {
                    st.q[0] = -1.0 - st.q[0];
                    st.q[1] += nb;
                } else if st.q[0] > nb - 0.5 {
                    st.q[0] = 2.0 * nb - 1.0 - st.q[0];
                    st.q[1] += nb;
                }
                st.q[1] = st.q[1].rem_euclid(2.0 * nb);
            }
        }
        for a in 0..self.d {
            st.p[a] = st.p[a].clamp(0.0, (self.ctx.dims[a] - 1) as f64);
        }
    }

    fn nearest_node(&self, st: &State) -> usize {
        let sp = &self.field.grid.spatial;
        let mut ijk = [0usize; 3];
        for a in 0..self.d {
            ijk[a] = st.p[a].round().clamp(0.0, (self.ctx.dims[a] - 1) as f64) as usize;
        }
        let o = self
            .orientation_corners(st.q)
            .into_iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map_or(0, |c| c.0);
        o * self.ctx.n_spatial + sp.index(ijk)
    }

    fn physical(&self, st: &State) -> Vec<f64> {
        let sp = &self.field.grid.spatial;
        (0..self.d)
            .map(|a| sp.origin[a] + sp.spacing[a] * st.p[a])
            .collect()
    }

    fn direction(&self, st: &State) -> Vec<f64> {
        let ori = &self.field.grid.orientations;
        match ori {
            OrientationSampling::None => Vec::new(),
            OrientationSampling::Circle { .. } => {
                let t = st.q[0] * ori.chart_spacing();
                vec![t.cos(), t.sin()]
            }
            OrientationSampling::Sphere { .. } => {
                let h = ori.chart_spacing();
                let (b, g) = ((st.q[0] + 0.5) * h, st.q[1] * h);
                let local = nalgebra::Vector3::new(b.sin() * g.cos(), b.sin() * g.sin(), b.cos());
                let e = chart_matrix(ori) * local;
                vec![e.x, e.y, e.z]
            }
        }
    }

    fn state_of(&self, node: usize) -> State {
        let (s, o) = self.field.grid.split(node);
        let ijk = self.field.grid.spatial.coords(s);
        let mut st = State {
            p: [ijk[0] as f64, ijk[1] as f64, ijk[2] as f64],
            q: [0.0; 2],
        };
        match self.field.grid.orientations {
            OrientationSampling::None => {}
            OrientationSampling::Circle { .. } => st.q[0] = o as f64,
            OrientationSampling::Sphere { n_beta, .. } => {
                st.q = [(o / (2 * n_beta)) as f64, (o % (2 * n_beta)) as f64];
            }
        }
        st
    }

    fn spatial_step(&self, a: &State, b: &State) -> f64 {
        let h = self.ctx.spacing;
        (0..self.d)
            .map(|k| ((b.p[k] - a.p[k]) * h[k]).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

fn chart_matrix(o: &OrientationSampling) -> nalgebra::Matrix3<f64> {
    match o {
        OrientationSampling::Sphere { chart, .. } => nalgebra::Matrix3::from_fn(|r, c| chart[r][c]),
        _ => nalgebra::Matrix3::identity(),
    }
}

/// Integrates the descent flow from `endpoint` until a source is reached.
///
/// The flow is the characteristic velocity of the upwind scheme, interpolated
/// multilinearly between nodes; steps move at most `max_step` cells.
pub fn backtrack_geodesic(
    field: &DistanceField,
    cost: Option<&CostField>,
    endpoint: usize,
    max_step: f64,
) -> Result<Geodesic> {
    if endpoint >= field.grid.len() {
        return Err(Error::param("endpoint", "node outside the grid"));
    }
    let u_end = field.values[endpoint];
    if !u_end.is_finite() {
        return Err(Error::param(
            "endpoint",
            "endpoint was not reached by the front",
        ));
    }
    if !(max_step > 0.0 && max_step <= 1.0) {
        return Err(Error::param("max_step", "must lie in (0, 1]"));
    }
    let stencils = Stencils::build(&field.grid, &field.metric)?;
    let tracer = Tracer {
        field,
        ctx: Ctx::new(&field.grid, &stencils, cost.map(CostField::values)),
        d: field.grid.spatial.ndim(),
    };
    let sources: HashSet<usize> = field.sources.iter().copied().collect();
    let mut st = tracer.state_of(endpoint);
    let mut geo = Geodesic {
        positions: vec![tracer.physical(&st)],
        orientations: vec![tracer.direction(&st)],
        spatial_length: 0.0,
        value_drop: 0.0,
    };
    if sources.contains(&endpoint) {
        return Ok(geo);
    }
    let mut best_u = u_end;
    let mut since_progress = 0;
    let max_iter = 200 + (40.0 * field.grid.len() as f64).sqrt() as usize * 50;
    for _ in 0..max_iter {
        let (u0, v1, a1) = tracer.sample(&st);
        let speed = v1
            .iter()
            .chain(a1.iter())
            .fold(0.0f64, |m, x| m.max(x.abs()));
        if speed == 0.0 || !u0.is_finite() {
            return Err(Error::Numerical(format!(
                "backtracking stalled at U = {u0:.4} (no descent direction)"
            )));
        }
        let dt = (max_step / speed).min(u0.max(1e-12));
        let mut mid = st;
        for a in 0..3 {
            mid.p[a] -= 0.5 * dt * v1[a];
        }
        for a in 0..2 {
            mid.q[a] -= 0.5 * dt * a1[a];
        }
        tracer.normalize(&mut mid);
        let (_, v2, a2) = tracer.sample(&mid);
        let mut next = st;
        for a in 0..3 {
            next.p[a] -= dt * v2[a];
        }
        for a in 0..2 {
            next.q[a] -= dt * a2[a];
        }
        tracer.normalize(&mut next);
        geo.spatial_length += tracer.spatial_step(&st, &next);
        st = next;
        geo.positions.push(tracer.physical(&st));
        geo.orientations.push(tracer.direction(&st));
        let near = tracer.nearest_node(&st);
        let (u_now, _, _) = tracer.sample(&st);
        if sources.contains(&near) {
            let src = tracer.state_of(near);
            geo.spatial_length += tracer.spatial_step(&st, &src);
            geo.positions.push(tracer.physical(&src));
            geo.orientations.push(tracer.direction(&src));
            geo.value_drop = u_end;
            return Ok(geo);
        }
        if u_now < best_u - 1e-12 {
            best_u = u_now;
            since_progress = 0;
        } else {
            since_progress += 1;
            if since_progress > 50 {
                return Err(Error::Numerical(format!(
                    "backtracking stalled at U = {u_now:.4} on a plateau"
                )));
            }
        }
    }
    Err(Error::Numerical(
        "backtracking exceeded its iteration budget".into(),
    ))
}
