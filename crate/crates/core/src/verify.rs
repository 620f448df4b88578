//! Independent checks of a solved net: PDE residual, decomposition residuals,
//! the integral representation of `∂±p`, the `p^{-1/2}` bound and the sign
//! structure.

use std::f64::consts::SQRT_2;

use rayon::prelude::*;

use crate::coords::{decomposition_rhs_m, decomposition_rhs_q, lambda_raw, Family, PolarPoint};
use crate::error::{Error, Result};
use crate::solver::{CharGrid, StateNode};

/// One evaluation point of a residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualSample {
    pub r: f64,
    pub theta: f64,
    pub value: f64,
    /// Largest physical extent of the stencil.
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResidualField {
    pub samples: Vec<ResidualSample>,
    pub norm_inf: f64,
    /// Root mean square over the samples.
    pub norm_l2: f64,
    /// Candidate points dropped because their stencil left the solved region.
    pub skipped: usize,
}

impl ResidualField {
    fn from_samples(samples: Vec<ResidualSample>, skipped: usize) -> Self {
        let norm_inf = samples.iter().fold(0.0f64, |m, s| m.max(s.value.abs()));
        let norm_l2 = if samples.is_empty() {
            0.0
        } else {
            (samples.iter().map(|s| s.value * s.value).sum::<f64>() / samples.len() as f64).sqrt()
        };
        Self {
            samples,
            norm_inf,
            norm_l2,
            skipped,
        }
    }
}

/// Polar form of the self-similar equation at one point:
/// `(r∂r)²p/p - Δp + r p_r/p - (r p_r)²/p²`.
pub fn pde_residual(r: f64, p: f64, p_r: f64, p_rr: f64, p_thth: f64) -> f64 {
    let rpr = r * p_r;
    (rpr + r * r * p_rr) / p - (p_rr + p_r / r + p_thth / (r * r)) + rpr / p - rpr * rpr / (p * p)
}

// ---------------------------------------------------------------------------
// Interpolation on the characteristic net

/// Piecewise-linear interpolant on the net, triangulated in Cartesian
/// `(ξ, η)`: every quad `(i, j)..(i+1, j+1)` is split along the diagonal from
/// `(i, j)` to `(i+1, j+1)`, which runs toward smaller `p`.
#[derive(Debug, Clone)]
pub struct NetInterpolator {
    xy: Vec<(f64, f64)>,
    tris: Vec<[usize; 3]>,
    origin: (f64, f64),
    cell: (f64, f64),
    dims: (usize, usize),
    buckets: Vec<Vec<u32>>,
}

/// Barycentric location of a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub vertices: [usize; 3],
    pub weights: [f64; 3],
}

impl NetInterpolator {
    pub fn new(grid: &CharGrid) -> Self {
        Self::with_positions(grid, |nd| PolarPoint::new(nd.r, nd.theta).to_cartesian())
    }

    /// Triangulate the net at the planar positions `place(node)`; queries are
    /// then made in the same plane.
    pub fn with_positions(grid: &CharGrid, place: impl Fn(&StateNode) -> (f64, f64)) -> Self {
        let n = grid.n;
        let xy: Vec<(f64, f64)> = grid.nodes.iter().map(place).collect();
        let valid = |k: usize| grid.nodes[k].status.is_valid();
        let mut tris = Vec::new();
        for i in 0..n.saturating_sub(1) {
            for j in 0..n - 1 {
                let (a, b, c, d) = (i * n + j, (i + 1) * n + j, i * n + j + 1, (i + 1) * n + j + 1);
                for t in [[a, b, d], [a, c, d]] {
                    if t.iter().all(|&k| valid(k)) && area2(&xy, t) != 0.0 {
                        tris.push(t);
                    }
                }
            }
        }

        let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
        for t in &tris {
            for &k in t {
                let (x, y) = xy[k];
                lo = (lo.0.min(x), lo.1.min(y));
                hi = (hi.0.max(x), hi.1.max(y));
            }
        }
        let side = ((tris.len() as f64 / 2.0).sqrt().ceil() as usize).clamp(1, 512);
        let dims = (side, side);
        let cell = if tris.is_empty() {
            (1.0, 1.0)
        } else {
            (((hi.0 - lo.0) / side as f64).max(1e-300), ((hi.1 - lo.1) / side as f64).max(1e-300))
        };
        let mut buckets = vec![Vec::new(); side * side];
        let clampi = |v: f64, m: usize| (v.max(0.0) as usize).min(m - 1);
        for (ti, t) in tris.iter().enumerate() {
            let (mut bx0, mut by0, mut bx1, mut by1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
            for &k in t {
                bx0 = bx0.min(xy[k].0);
                by0 = by0.min(xy[k].1);
                bx1 = bx1.max(xy[k].0);
                by1 = by1.max(xy[k].1);
            }
            let (ix0, ix1) = (clampi((bx0 - lo.0) / cell.0, side), clampi((bx1 - lo.0) / cell.0, side));
            let (iy0, iy1) = (clampi((by0 - lo.1) / cell.1, side), clampi((by1 - lo.1) / cell.1, side));
            for iy in iy0..=iy1 {
                for ix in ix0..=ix1 {
                    buckets[iy * side + ix].push(ti as u32);
                }
            }
        }
        Self {
            xy,
            tris,
            origin: lo,
            cell,
            dims,
            buckets,
        }
    }

    pub fn triangle_count(&self) -> usize {
        self.tris.len()
    }

    /// Triangle containing `(x, y)` and the barycentric weights. Points on a
    /// shared edge resolve to the first triangle in net order.
    pub fn locate(&self, x: f64, y: f64) -> Option<Location> {
        if self.tris.is_empty() {
            return None;
        }
        let fx = (x - self.origin.0) / self.cell.0;
        let fy = (y - self.origin.1) / self.cell.1;
        if !(fx >= 0.0 && fy >= 0.0) {
            return None;
        }
        let (ix, iy) = (fx as usize, fy as usize);
        // the top and right edges belong to the last bucket
        let ix = if ix == self.dims.0 && fx <= self.dims.0 as f64 { ix - 1 } else { ix };
        let iy = if iy == self.dims.1 && fy <= self.dims.1 as f64 { iy - 1 } else { iy };
        if ix >= self.dims.0 || iy >= self.dims.1 {
            return None;
        }
        const TOL: f64 = 1e-12;
        for &ti in &self.buckets[iy * self.dims.0 + ix] {
            let t = self.tris[ti as usize];
            if let Some(&k) = t.iter().find(|&&k| self.xy[k] == (x, y)) {
                let mut weights = [0.0; 3];
                weights[t.iter().position(|&v| v == k).unwrap()] = 1.0;
                return Some(Location { vertices: t, weights });
            }
            let w = barycentric(&self.xy, t, x, y);
            if w.iter().all(|&v| v >= -TOL) {
                return Some(Location { vertices: t, weights: w });
            }
        }
        None
    }

    /// Interpolate a nodal field (indexed like `CharGrid::nodes`).
    pub fn interpolate(&self, x: f64, y: f64, values: &[f64]) -> Option<f64> {
        self.locate(x, y).map(|loc| {
            if let Some(k) = loc.weights.iter().position(|&w| w == 1.0) {
                return values[loc.vertices[k]];
            }
            (0..3).map(|k| loc.weights[k] * values[loc.vertices[k]]).sum()
        })
    }
}

fn area2(xy: &[(f64, f64)], t: [usize; 3]) -> f64 {
    let (a, b, c) = (xy[t[0]], xy[t[1]], xy[t[2]]);
    (b.0 - a.0) * (c.1 - a.1) - (c.0 - a.0) * (b.1 - a.1)
}

fn barycentric(xy: &[(f64, f64)], t: [usize; 3], x: f64, y: f64) -> [f64; 3] {
    let (a, b, c) = (xy[t[0]], xy[t[1]], xy[t[2]]);
    let det = (b.0 - a.0) * (c.1 - a.1) - (c.0 - a.0) * (b.1 - a.1);
    let wb = ((x - a.0) * (c.1 - a.1) - (c.0 - a.0) * (y - a.1)) / det;
    let wc = ((b.0 - a.0) * (y - a.1) - (x - a.0) * (b.1 - a.1)) / det;
    [1.0 - wb - wc, wb, wc]
}

/// A regular raster in `(r, θ)`; `values[it * r.len() + ir]`, `None` outside
/// the solved region.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarRaster {
    pub r: Vec<f64>,
    pub theta: Vec<f64>,
    pub values: Vec<Option<f64>>,
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    (0..n)
        .map(|k| if k == n - 1 { b } else { a + (b - a) * k as f64 / (n - 1) as f64 })
        .collect()
}

impl PolarRaster {
    /// Sample `f(r, θ)` on `[r0, r1] × [t0, t1]`.
    pub fn from_fn(
        (r0, r1): (f64, f64),
        (t0, t1): (f64, f64),
        n_r: usize,
        n_theta: usize,
        f: impl Fn(f64, f64) -> Option<f64> + Sync,
    ) -> Self {
        let r = linspace(r0, r1, n_r);
        let theta = linspace(t0, t1, n_theta);
        let values = theta
            .par_iter()
            .flat_map_iter(|&t| r.iter().map(move |&rr| (rr, t)).collect::<Vec<_>>())
            .map(|(rr, t)| f(rr, t))
            .collect();
        Self { r, theta, values }
    }

    pub fn get(&self, ir: usize, it: usize) -> Option<f64> {
        self.values[it * self.r.len() + ir]
    }

    pub fn covered(&self) -> usize {
        self.values.iter().filter(|v| v.is_some()).count()
    }
}

/// Resample `p` onto an `n_r × n_theta` polar raster spanning the solved nodes.
pub fn resample_to_polar(grid: &CharGrid, n_r: usize, n_theta: usize) -> Result<PolarRaster> {
    let values: Vec<f64> = grid.nodes.iter().map(|nd| nd.p).collect();
    resample_field(grid, n_r, n_theta, &values)
}

/// Resample an arbitrary nodal field.
pub fn resample_field(grid: &CharGrid, n_r: usize, n_theta: usize, values: &[f64]) -> Result<PolarRaster> {
    if n_r < 1 || n_theta < 1 {
        return Err(Error::Config("raster needs at least one point per axis".into()));
    }
    let interp = NetInterpolator::new(grid);
    if interp.triangle_count() == 0 {
        return Err(Error::Empty("grid has no interior cells to interpolate".into()));
    }
    let (mut r0, mut r1, mut t0, mut t1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (_, nd) in grid.valid_nodes() {
        r0 = r0.min(nd.r);
        r1 = r1.max(nd.r);
        t0 = t0.min(nd.theta);
        t1 = t1.max(nd.theta);
    }
    Ok(PolarRaster::from_fn((r0, r1), (t0, t1), n_r, n_theta, |r, t| {
        let (x, y) = PolarPoint::new(r, t).to_cartesian();
        interp.interpolate(x, y, values)
    }))
}

// ---------------------------------------------------------------------------
// PDE residuals

/// Residual of the polar equation on a raster by centered second-order
/// differences, one raster cell wide; points whose 5-point stencil is not fully
/// covered are skipped.
pub fn residual_pde(raster: &PolarRaster) -> Result<ResidualField> {
    let (nr, nt) = (raster.r.len(), raster.theta.len());
    if nr < 3 || nt < 3 {
        return Err(Error::Empty("raster too small for centered stencils".into()));
    }
    let dr = (raster.r[nr - 1] - raster.r[0]) / (nr - 1) as f64;
    let dt = (raster.theta[nt - 1] - raster.theta[0]) / (nt - 1) as f64;
    let rows: Vec<(Vec<ResidualSample>, usize)> = (1..nt - 1)
        .into_par_iter()
        .map(|it| {
            let mut out = Vec::new();
            let mut skipped = 0;
            for ir in 1..nr - 1 {
                let Some(c) = raster.get(ir, it) else { continue };
                let st = [raster.get(ir - 1, it), raster.get(ir + 1, it), raster.get(ir, it - 1), raster.get(ir, it + 1)];
                let [Some(w), Some(e), Some(s), Some(n)] = st else {
                    skipped += 1;
                    continue;
                };
                let r = raster.r[ir];
                let p_r = (e - w) / (2.0 * dr);
                let p_rr = (e - 2.0 * c + w) / (dr * dr);
                let p_tt = (n - 2.0 * c + s) / (dt * dt);
                out.push(ResidualSample {
                    r,
                    theta: raster.theta[it],
                    value: pde_residual(r, c, p_r, p_rr, p_tt),
                    width: dr.max(r * dt),
                });
            }
            (out, skipped)
        })
        .collect();
    let skipped = rows.iter().map(|r| r.1).sum();
    Ok(ResidualField::from_samples(rows.into_iter().flat_map(|r| r.0).collect(), skipped))
}

/// PDE residual evaluated directly on the net.
///
/// At node `(i, j)` the stored `p_r` and `p_θ` are differentiated by centered
/// differences in index space and mapped to `(r, θ)` through the local
/// Jacobian of the net. Only nodes `(stride·a, stride·b)` are evaluated, so
/// nested nets can be compared at the same physical points.
pub fn residual_net(grid: &CharGrid, stride: usize) -> ResidualField {
    let n = grid.n;
    let stride = stride.max(1);
    let pts: Vec<(usize, usize)> = (0..n)
        .step_by(stride)
        .flat_map(|i| (0..n).step_by(stride).map(move |j| (i, j)))
        .filter(|&(i, j)| i > 0 && j > 0 && i + 1 < n && j + 1 < n)
        .collect();
    let res: Vec<Option<ResidualSample>> = pts
        .par_iter()
        .map(|&(i, j)| {
            let c = grid.node(i, j);
            let nb = [grid.node(i - 1, j), grid.node(i + 1, j), grid.node(i, j - 1), grid.node(i, j + 1)];
            if !c.status.is_valid() || nb.iter().any(|nd| !nd.status.is_valid()) {
                return None;
            }
            let [im, ip, jm, jp] = nb;
            let di = |f: fn(&StateNode) -> f64| 0.5 * (f(ip) - f(im));
            let dj = |f: fn(&StateNode) -> f64| 0.5 * (f(jp) - f(jm));
            let (r_i, r_j, t_i, t_j) = (di(|n| n.r), dj(|n| n.r), di(|n| n.theta), dj(|n| n.theta));
            let det = r_i * t_j - r_j * t_i;
            if det == 0.0 || !det.is_finite() {
                return None;
            }
            // [f_i, f_j] = [[r_i, t_i], [r_j, t_j]] [f_r, f_θ]
            let grad = |fi: f64, fj: f64| ((fi * t_j - fj * t_i) / det, (r_i * fj - r_j * fi) / det);
            let (p_rr, _) = grad(di(StateNode::p_r), dj(StateNode::p_r));
            let (_, p_tt) = grad(di(StateNode::p_theta), dj(StateNode::p_theta));
            let width = nb.iter().map(|nd| (nd.r - c.r).hypot(c.r * (nd.theta - c.theta))).fold(0.0, f64::max);
            Some(ResidualSample {
                r: c.r,
                theta: c.theta,
                value: pde_residual(c.r, c.p, c.p_r(), p_rr, p_tt),
                width,
            })
        })
        .collect();
    let skipped = res.iter().filter(|s| s.is_none()).count();
    ResidualField::from_samples(res.into_iter().flatten().collect(), skipped)
}

/// Residuals of the transport equations along every grid segment, in both
/// algebraic forms of the right-hand side.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionCheck {
    /// Right side written with `m p_r`.
    pub m_form: ResidualField,
    /// Right side written with `q`.
    pub q_form: ResidualField,
    /// Largest relative difference between the two right sides.
    pub max_form_difference: f64,
}

/// Difference quotient of the transported derivative against the right side
/// at the segment midpoint. Zero-length segments contribute a zero residual.
fn segment_residual(a: &StateNode, b: &StateNode, family: Family) -> Option<(ResidualSample, ResidualSample, f64)> {
    if !(a.status.is_valid() && b.status.is_valid()) {
        return None;
    }
    let (r, p) = (0.5 * (a.r + b.r), 0.5 * (a.p + b.p));
    let (dpp, dpm) = (0.5 * (a.dp_plus + b.dp_plus), 0.5 * (a.dp_minus + b.dp_minus));
    let dth = b.theta - a.theta;
    let width = (b.r - a.r).hypot(r * dth);
    let sample = |value: f64| ResidualSample {
        r,
        theta: 0.5 * (a.theta + b.theta),
        value,
        width,
    };
    if dth == 0.0 && a.r == b.r {
        return Some((sample(0.0), sample(0.0), 0.0));
    }
    let (m_pm, m_mp) = decomposition_rhs_m(r, p, dpp, dpm);
    let (q_pm, q_mp) = decomposition_rhs_q(r, p, dpp, dpm);
    // ∂₊ is d/dθ along a plus line, ∂₋ along a minus line
    let (lhs, rm, rq) = match family {
        Family::Plus => ((b.dp_minus - a.dp_minus) / dth, m_pm, q_pm),
        Family::Minus => ((b.dp_plus - a.dp_plus) / dth, m_mp, q_mp),
    };
    let diff = (rm - rq).abs() / rm.abs().max(rq.abs()).max(f64::MIN_POSITIVE);
    Some((sample(lhs - rm), sample(lhs - rq), diff))
}

pub fn check_decomposition(grid: &CharGrid) -> DecompositionCheck {
    let n = grid.n;
    let segs: Vec<(usize, usize, Family)> = (0..n)
        .flat_map(|i| (0..n).flat_map(move |j| [(i, j, Family::Plus), (i, j, Family::Minus)]))
        .filter(|&(i, j, f)| match f {
            Family::Plus => i + 1 < n,
            Family::Minus => j + 1 < n,
        })
        .collect();
    let res: Vec<Option<(ResidualSample, ResidualSample, f64)>> = segs
        .par_iter()
        .map(|&(i, j, f)| {
            let a = grid.node(i, j);
            match f {
                Family::Plus => segment_residual(a, grid.node(i + 1, j), f),
                Family::Minus => segment_residual(a, grid.node(i, j + 1), f),
            }
        })
        .collect();
    let skipped = res.iter().filter(|s| s.is_none()).count();
    let (mut m, mut q, mut diff) = (Vec::new(), Vec::new(), 0.0f64);
    for (sm, sq, d) in res.into_iter().flatten() {
        m.push(sm);
        q.push(sq);
        diff = diff.max(d);
    }
    DecompositionCheck {
        m_form: ResidualField::from_samples(m, skipped),
        q_form: ResidualField::from_samples(q, skipped),
        max_form_difference: diff,
    }
}

// ---------------------------------------------------------------------------
// Integral representation of ∂±p

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralCheck {
    pub i: usize,
    pub j: usize,
    pub node: StateNode,
    /// Stored `∂₊p` (plus check) or `-∂₋p` (minus check).
    pub lhs: f64,
    pub rhs: f64,
    /// Prefactor `A` (plus) or `B` (minus).
    pub prefactor: f64,
    pub rel_err: f64,
}

/// Evaluate the integral formula along `path`, which runs from the arc anchor
/// to the node. Returns `(value, prefactor)`. `anchor_const` is the
/// denominator constant at the anchor and `orient` the sign in front of the
/// ψ-integral (`+1` on minus lines, `-1` on plus lines). Both inner and outer
/// integrals use the trapezoid on the polyline, the inner one in `p`.
fn integral_formula(path: &[StateNode], anchor_const: f64, orient: f64) -> (f64, f64) {
    let inner = |nd: &StateNode| 1.0 / (nd.r * nd.r - nd.p);
    let outer = |nd: &StateNode, e: f64| nd.r * nd.r * nd.p.powf(-0.75) / (nd.r * nd.r - nd.p) * e;
    let mut log_e = 0.0;
    let mut e_prev = 1.0;
    let mut psi = 0.0;
    for w in path.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        log_e += 0.25 * 0.5 * (inner(a) + inner(b)) * (b.p - a.p);
        let e = log_e.exp();
        psi += 0.5 * (outer(a, e_prev) + outer(b, e)) * (b.theta - a.theta);
        e_prev = e;
    }
    let node = path.last().expect("non-empty path");
    let e = log_e.exp();
    let value = 4.0 * node.p.powf(0.25) * e / (anchor_const + orient * psi);
    (value, anchor_const / e)
}

fn finish(i: usize, j: usize, node: StateNode, lhs: f64, (rhs, prefactor): (f64, f64)) -> IntegralCheck {
    IntegralCheck {
        i,
        j,
        node,
        lhs,
        rhs,
        prefactor,
        rel_err: (lhs - rhs).abs() / lhs.abs(),
    }
}

/// Integral formula for `∂₊p` at node `(i, j)` along its minus characteristic
/// back to the lower-arc anchor `θ_a`.
pub fn integral_formula_plus(grid: &CharGrid, i: usize, j: usize) -> Result<IntegralCheck> {
    let node = *grid
        .get(i, j)
        .ok_or_else(|| Error::Range(format!("node ({i}, {j}) outside the grid")))?;
    let path = grid.path_to_anchor(i, j, Family::Minus).ok_or(Error::AnchorMissing { i, j })?;
    let ta = path[0].theta;
    let (s, c) = ta.sin_cos();
    let k = 1.0 / (2.0 * SQRT_2 * s * s * c);
    Ok(finish(i, j, node, node.dp_plus, integral_formula(&path, k, 1.0)))
}

/// Integral formula for `-∂₋p` at node `(i, j)` along its plus characteristic
/// back to the upper-arc anchor `θ_b`.
pub fn integral_formula_minus(grid: &CharGrid, i: usize, j: usize) -> Result<IntegralCheck> {
    let node = *grid
        .get(i, j)
        .ok_or_else(|| Error::Range(format!("node ({i}, {j}) outside the grid")))?;
    let path = grid.path_to_anchor(i, j, Family::Plus).ok_or(Error::AnchorMissing { i, j })?;
    let tb = path[0].theta;
    let (s, c) = tb.sin_cos();
    let k = 1.0 / (2.0 * SQRT_2 * c * c * s);
    Ok(finish(i, j, node, -node.dp_minus, integral_formula(&path, k, -1.0)))
}

/// Aggregate of the integral checks over all valid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralSummary {
    pub checks: usize,
    pub median_rel_err: f64,
    pub max_rel_err: f64,
    /// Checks whose formula value has the wrong sign.
    pub sign_mismatches: usize,
}

pub fn integral_summary(grid: &CharGrid) -> Result<IntegralSummary> {
    let idx: Vec<(usize, usize)> = grid.valid_nodes().map(|(ij, _)| ij).collect();
    let mut errs: Vec<(f64, bool)> = idx
        .par_iter()
        .flat_map_iter(|&(i, j)| {
            [integral_formula_plus(grid, i, j), integral_formula_minus(grid, i, j)]
                .into_iter()
                .filter_map(|c| c.ok())
                .map(|c| (c.rel_err, c.rhs.signum() == c.lhs.signum()))
        })
        .collect();
    if errs.is_empty() {
        return Err(Error::Empty("no node has a traced path to its anchor".into()));
    }
    errs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let m = errs.len();
    let median = if m % 2 == 1 {
        errs[m / 2].0
    } else {
        0.5 * (errs[m / 2 - 1].0 + errs[m / 2].0)
    };
    Ok(IntegralSummary {
        checks: m,
        median_rel_err: median,
        max_rel_err: errs[m - 1].0,
        sign_mismatches: errs.iter().filter(|e| !e.1).count(),
    })
}

// ---------------------------------------------------------------------------
// Bounds and signs

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupRatio {
    pub value: f64,
    pub i: usize,
    pub j: usize,
    pub r: f64,
    pub theta: f64,
}

/// `sup p^{-1/2} max(∂₊p, -∂₋p)` over valid nodes with `r ≥ r_level`.
pub fn sup_ratio(grid: &CharGrid, r_level: f64) -> Result<SupRatio> {
    grid.valid_nodes()
        .filter(|(_, nd)| nd.r >= r_level)
        .map(|((i, j), nd)| SupRatio {
            value: nd.dp_plus.max(-nd.dp_minus) / nd.p.sqrt(),
            i,
            j,
            r: nd.r,
            theta: nd.theta,
        })
        .fold(None, |best: Option<SupRatio>, s| match best {
            Some(b) if b.value >= s.value => Some(b),
            _ => Some(s),
        })
        .ok_or_else(|| Error::Empty(format!("no valid node with r >= {r_level}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ViolationKind {
    /// `∂₊p > 0` fails.
    DpPlus,
    /// `∂₋p < 0` fails.
    DpMinus,
    /// `p_r > 0` fails.
    RadialMonotonicity,
    /// `0 < p < r²` fails.
    Hyperbolicity,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Violation {
    pub i: usize,
    pub j: usize,
    pub kind: ViolationKind,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SignReport {
    pub checked: usize,
    pub violations: Vec<Violation>,
}

impl SignReport {
    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Count sign violations at every valid node. Reflection maps `∂₊p` to `-∂₋p`,
/// so the signs `∂₊p > 0 > ∂₋p` are expected on both sides of the diagonal.
pub fn check_signs_and_monotonicity(grid: &CharGrid) -> SignReport {
    let mut report = SignReport::default();
    for ((i, j), nd) in grid.valid_nodes() {
        report.checked += 1;
        let mut flag = |kind| report.violations.push(Violation { i, j, kind });
        if !(nd.dp_plus > 0.0) {
            flag(ViolationKind::DpPlus);
        }
        if !(nd.dp_minus < 0.0) {
            flag(ViolationKind::DpMinus);
        }
        if !(nd.p > 0.0 && nd.p < nd.r * nd.r) {
            flag(ViolationKind::Hyperbolicity);
        } else if !(0.5 * lambda_raw(nd.r, nd.p) * (nd.dp_plus - nd.dp_minus) > 0.0) {
            flag(ViolationKind::RadialMonotonicity);
        }
    }
    report
}
