//! Causal single-pass solver for `Σ_k ρ_k/C² (u − a_k)₊² = 1`, the upwind
//! discretization of `‖∇U‖_𝒢 = 1` on a stencil with nonnegative weights.

use super::heap::IndexedHeap;
use super::stencil::Stencils;
use crate::grid::LiftedGrid;

const FAR: u8 = 0;
const TRIAL: u8 = 1;
const ACCEPTED: u8 = 2;

/// Maximal number of stencil terms handled per node.
pub(crate) const MAX_TERMS: usize = 16;

/// Result of a local update at one node.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Local {
    pub u: f64,
    pub ul: f64,
    /// Characteristic velocity per unit of `U` in spatial index units.
    pub velocity: [f64; 3],
    /// Characteristic velocity along the orientation chart axes (index units).
    pub angular: [f64; 2],
}

/// Read-only data shared by the marcher and backtracking.
#[derive(Clone, Copy)]
pub(crate) struct Ctx<'a> {
    pub stencils: &'a Stencils,
    pub cost: Option<&'a [f32]>,
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub n_spatial: usize,
}

impl<'a> Ctx<'a> {
    pub fn new(grid: &LiftedGrid, stencils: &'a Stencils, cost: Option<&'a [f32]>) -> Self {
        Ctx {
            stencils,
            cost,
            dims: grid.spatial.dims3(),
            spacing: grid.spatial.spacing3(),
            n_spatial: grid.n_spatial(),
        }
    }

    #[inline]
    pub fn cost_at(&self, node: usize) -> f64 {
        self.cost.map_or(1.0, |c| f64::from(c[node]))
    }

    #[inline]
    pub fn shift(&self, ijk: [usize; 3], off: [i32; 3], sign: i64) -> Option<usize> {
        let mut lin = 0usize;
        let mut stride = 1usize;
        for a in 0..3 {
            let v = ijk[a] as i64 + sign * off[a] as i64;
            if v < 0 || v >= self.dims[a] as i64 {
                return None;
            }
            lin += v as usize * stride;
            stride *= self.dims[a];
        }
        Some(lin)
    }

    /// Solves the local quadratic at `node` using neighbors accepted by
    /// `upwind`. Returns `None` when no neighbor qualifies or the value is
    /// not below `bound`.
    #[inline]
    #[allow(clippy::too_many_arguments)]
    pub fn solve(
        &self,
        node: usize,
        ijk: [usize; 3],
        o: usize,
        u: &[f64],
        ul: &[f64],
        bound: f64,
        upwind: impl Fn(usize) -> bool,
    ) -> Option<Local> {
        let s = node - o * self.n_spatial;
        let inv_c2 = match self.cost {
            Some(c) => {
                let v = f64::from(c[node]);
                1.0 / (v * v)
            }
            None => 1.0,
        };
        // (a, ρ, neighbor, sign, term)
        let mut cand = [(0.0f64, 0.0f64, 0usize, 0.0f64, 0usize); MAX_TERMS];
        let mut m = 0;
        let terms = self.stencils.terms(o);
        let linear = self.stencils.linear(o);
        let interior = self.stencils.interior(ijk);
        for (ti, t) in terms.iter().enumerate() {
            let (p, q) = match t.angular {
                None if interior => {
                    let step = linear[ti];
                    (
                        Some(node.wrapping_add_signed(step)),
                        Some(node.wrapping_add_signed(-step)),
                    )
                }
                None => (
                    self.shift(ijk, t.offset, 1)
                        .map(|sp| o * self.n_spatial + sp),
                    self.shift(ijk, t.offset, -1)
                        .map(|sp| o * self.n_spatial + sp),
                ),
                Some((op, om)) => (
                    Some(op as usize * self.n_spatial + s),
                    Some(om as usize * self.n_spatial + s),
                ),
            };
            let mut best = (f64::INFINITY, 0usize, 0.0);
            if let Some(p) = p {
                if upwind(p) && u[p] < best.0 {
                    best = (u[p], p, -1.0);
                }
            }
            if let Some(q) = q {
                if upwind(q) && u[q] < best.0 {
                    best = (u[q], q, 1.0);
                }
            }
            if best.0.is_finite() && m < MAX_TERMS {
                cand[m] = (best.0, t.weight * inv_c2, best.1, best.2, ti);
                m += 1;
            }
        }
        if m == 0 {
            return None;
        }
        let cand = &mut cand[..m];
        cand.sort_unstable_by(|x, y| x.0.total_cmp(&y.0));
        let (mut a_sum, mut b_sum, mut c_sum) = (0.0, 0.0, 0.0);
        let mut val = f64::INFINITY;
        let mut active = 0;
        for k in 0..m {
            let (a, rho) = (cand[k].0, cand[k].1);
            a_sum += rho;
            b_sum += rho * a;
            c_sum += rho * a * a;
            let disc = (b_sum * b_sum - a_sum * (c_sum - 1.0)).max(0.0);
            let v = (b_sum + disc.sqrt()) / a_sum;
            val = v;
            active = k + 1;
            if k + 1 == m || v <= cand[k + 1].0 {
                break;
            }
        }
        if !(val < bound) {
            return None;
        }
        let mut vel = [0.0; 3];
        let mut ang = [0.0; 2];
        let (mut wsum, mut lsum) = (0.0, 0.0);
        for &(a, rho, nb, sign, ti) in &cand[..active] {
            let w = rho * (val - a).max(0.0);
            wsum += w;
            lsum += w * ul[nb];
            let t = &terms[ti];
            match t.angular {
                None => {
                    for (v, off) in vel.iter_mut().zip(t.offset) {
                        *v += w * sign * off as f64;
                    }
                }
                Some(_) => {
                    let axis = angular_axis(terms, ti);
                    ang[axis] += w * sign;
                }
            }
        }
        let phys = (0..3)
            .map(|a| (vel[a] * self.spacing[a]).powi(2))
            .sum::<f64>()
            .sqrt();
        let ul_new = if wsum > 0.0 {
            (phys + lsum) / wsum
        } else {
            ul[cand[0].2]
        };
        Some(Local {
            u: val,
            ul: ul_new,
            velocity: vel,
            angular: ang,
        })
    }
}

/// Angular terms are appended in chart-axis order after the spatial terms.
fn angular_axis(terms: &[super::stencil::Term], ti: usize) -> usize {
    terms[..ti].iter().filter(|t| t.angular.is_some()).count()
}

/// Options controlling how far a march proceeds.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MarchOptions {
    /// Nodes whose arc length exceeds this are accepted but not expanded.
    pub length_limit: Option<f64>,
    /// The march stops once the smallest pending value exceeds this.
    pub value_limit: Option<f64>,
}

/// Incremental fast-marching state over one lifted grid.
///
/// Buffers are reused across [`FastMarcher::reset`] calls, so one marcher can
/// serve many consecutive single-source solves.
pub struct FastMarcher<'a> {
    ctx: Ctx<'a>,
    u: Vec<f64>,
    ul: Vec<f64>,
    state: Vec<u8>,
    heap: IndexedHeap,
    touched: Vec<u32>,
    sources: Vec<usize>,
    options: MarchOptions,
    last_value: f64,
    watch: Option<(f64, usize)>,
}

impl<'a> FastMarcher<'a> {
    pub fn new(
        grid: &LiftedGrid,
        stencils: &'a Stencils,
        cost: Option<&'a [f32]>,
        options: MarchOptions,
    ) -> Self {
        let n = grid.len();
        FastMarcher {
            ctx: Ctx::new(grid, stencils, cost),
            u: vec![f64::INFINITY; n],
            ul: vec![f64::INFINITY; n],
            state: vec![FAR; n],
            heap: IndexedHeap::new(n),
            touched: Vec::new(),
            sources: Vec::new(),
            options,
            last_value: 0.0,
            watch: None,
        }
    }

    pub fn set_options(&mut self, options: MarchOptions) {
        self.options = options;
    }

    /// Tracks the number of pending nodes whose arc length is below `threshold`.
    pub fn watch_length(&mut self, threshold: f64) {
        let count = self
            .touched
            .iter()
            .filter(|&&n| self.state[n as usize] == TRIAL && self.ul[n as usize] < threshold)
            .count();
        self.watch = Some((threshold, count));
    }

    /// Pending nodes with arc length below the watched threshold.
    pub fn pending_below_watch(&self) -> usize {
        self.watch.map_or(0, |w| w.1)
    }

    /// Clears all values touched since the last reset.
    pub fn reset(&mut self) {
        for &n in &self.touched {
            let n = n as usize;
            self.u[n] = f64::INFINITY;
            self.ul[n] = f64::INFINITY;
            self.state[n] = FAR;
        }
        self.touched.clear();
        self.heap.clear();
        self.sources.clear();
        self.last_value = 0.0;
        if let Some(w) = self.watch.as_mut() {
            w.1 = 0;
        }
    }

    fn set_trial(&mut self, node: usize, u: f64, ul: f64) {
        match self.state[node] {
            FAR => {
                self.touched.push(node as u32);
                self.state[node] = TRIAL;
                if let Some((thr, c)) = self.watch.as_mut() {
                    if ul < *thr {
                        *c += 1;
                    }
                }
            }
            TRIAL => {
                if let Some((thr, c)) = self.watch.as_mut() {
                    let was = self.ul[node] < *thr;
                    let now = ul < *thr;
                    if was && !now {
                        *c -= 1;
                    } else if now && !was {
                        *c += 1;
                    }
                }
            }
            _ => {
                self.state[node] = TRIAL;
                if let Some((thr, c)) = self.watch.as_mut() {
                    if ul < *thr {
                        *c += 1;
                    }
                }
            }
        }
        self.u[node] = u;
        self.ul[node] = ul;
        self.heap.push_or_decrease(node, u);
    }

    /// Adds a zero-distance source; accepted nodes are reopened. The
    /// stencil neighbors of the source start from their distance in the
    /// local metric at the source.
    pub fn add_source(&mut self, node: usize) {
        self.set_trial(node, 0.0, 0.0);
        self.sources.push(node);
        let ctx = self.ctx;
        let ns = ctx.n_spatial;
        let (s, o) = (node % ns, node / ns);
        let [nx, ny, _] = ctx.dims;
        let ijk = [s % nx, (s / nx) % ny, s / (nx * ny)];
        let g = ctx.stencils.spatial_metric(o);
        let c0 = ctx.cost_at(node);
        for t in ctx.stencils.terms(o) {
            match t.angular {
                None => {
                    let e = nalgebra::Vector3::new(
                        t.offset[0] as f64,
                        t.offset[1] as f64,
                        t.offset[2] as f64,
                    );
                    let dist = e.dot(&(g * e)).max(0.0).sqrt();
                    let len = (0..3)
                        .map(|a| (e[a] * ctx.spacing[a]).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    for sign in [1i64, -1] {
                        if let Some(sp) = ctx.shift(ijk, t.offset, sign) {
                            let nb = o * ns + sp;
                            self.seed(nb, 0.5 * (c0 + ctx.cost_at(nb)) * dist, len);
                        }
                    }
                }
                Some((op, om)) => {
                    let dist = 1.0 / t.weight.sqrt();
                    for nb in [op as usize * ns + s, om as usize * ns + s] {
                        self.seed(nb, 0.5 * (c0 + ctx.cost_at(nb)) * dist, 0.0);
                    }
                }
            }
        }
    }

    fn seed(&mut self, node: usize, u: f64, ul: f64) {
        if u.is_finite() && u < self.u[node] {
            self.set_trial(node, u, ul);
        }
    }

    /// Accepts the next node and updates its neighbors.
    pub fn step(&mut self) -> Option<usize> {
        let (node, val) = self.heap.pop()?;
        if let Some(limit) = self.options.value_limit {
            if val > limit {
                self.heap.push_or_decrease(node, val);
                return None;
            }
        }
        self.state[node] = ACCEPTED;
        self.last_value = val;
        if let Some((thr, c)) = self.watch.as_mut() {
            if self.ul[node] < *thr {
                *c -= 1;
            }
        }
        if let Some(limit) = self.options.length_limit {
            if self.ul[node] > limit {
                return Some(node);
            }
        }
        self.expand(node);
        Some(node)
    }

    fn expand(&mut self, node: usize) {
        let ns = self.ctx.n_spatial;
        let (s, o) = (node % ns, node / ns);
        let [nx, ny, _] = self.ctx.dims;
        let ijk = [s % nx, (s / nx) % ny, s / (nx * ny)];
        let stencils = self.ctx.stencils;
        for t in stencils.terms(o) {
            match t.angular {
                None => {
                    for sign in [1i64, -1] {
                        if let Some(sp) = self.ctx.shift(ijk, t.offset, sign) {
                            let [a, b, c] = [
                                (ijk[0] as i64 + sign * t.offset[0] as i64) as usize,
                                (ijk[1] as i64 + sign * t.offset[1] as i64) as usize,
                                (ijk[2] as i64 + sign * t.offset[2] as i64) as usize,
                            ];
                            self.update(o * ns + sp, [a, b, c], o);
                        }
                    }
                }
                Some((op, om)) => {
                    self.update(op as usize * ns + s, ijk, op as usize);
                    self.update(om as usize * ns + s, ijk, om as usize);
                }
            }
        }
    }

    fn update(&mut self, node: usize, ijk: [usize; 3], o: usize) {
        if self.state[node] == ACCEPTED {
            return;
        }
        let state = &self.state;
        let local = self
            .ctx
            .solve(node, ijk, o, &self.u, &self.ul, self.u[node], |n| {
                state[n] == ACCEPTED
            });
        if let Some(l) = local {
            self.set_trial(node, l.u, l.ul);
        }
    }

    /// Runs until the queue is exhausted or a limit stops the march.
    pub fn run(&mut self) {
        while self.step().is_some() {}
    }

    pub fn is_accepted(&self, node: usize) -> bool {
        self.state[node] == ACCEPTED
    }

    pub fn value(&self, node: usize) -> f64 {
        self.u[node]
    }

    pub fn length(&self, node: usize) -> f64 {
        self.ul[node]
    }

    /// Value of the most recently accepted node.
    pub fn last_value(&self) -> f64 {
        self.last_value
    }

    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn lengths(&self) -> &[f64] {
        &self.ul
    }

    /// Values of nodes never accepted are reported as `+∞`.
    pub fn accepted_values(&self) -> (Vec<f64>, Vec<f64>) {
        let mut u = vec![f64::INFINITY; self.u.len()];
        let mut ul = vec![f64::INFINITY; self.u.len()];
        for &n in &self.touched {
            let n = n as usize;
            if self.state[n] == ACCEPTED {
                u[n] = self.u[n];
                ul[n] = self.ul[n];
            }
        }
        (u, ul)
    }

    /// Moves the accepted values out, leaving the marcher empty.
    pub fn take_values(mut self) -> (Vec<f64>, Vec<f64>, Vec<usize>) {
        for &n in &self.touched {
            let n = n as usize;
            if self.state[n] != ACCEPTED {
                self.u[n] = f64::INFINITY;
                self.ul[n] = f64::INFINITY;
            }
        }
        (self.u, self.ul, self.sources)
    }
}
