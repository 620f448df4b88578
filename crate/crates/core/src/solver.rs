//! Massau-type marching on the net of plus and minus characteristics.
//!
//! Node `(i, j)` is the intersection of the minus characteristic launched from
//! lower-arc seed `i` and the plus characteristic launched from upper-arc seed
//! `j`. Seed 0 on both arcs is the corner, so `(i, 0)` are the lower-arc seeds
//! (the plus characteristic through the corner is the lower arc) and `(0, j)`
//! the upper-arc seeds. Moving along a minus line (`j` increasing) θ grows
//! and `r` shrinks; moving along a plus line (`i` increasing) both shrink.
//!
//! Each interior node is found from its two predecessors with a trapezoidal
//! predictor-corrector applied to
//!
//! ```text
//! dr/dθ = ±1/λ,   dp/dθ = ∂±p,
//! ∂₊(∂₋p) = q ∂₋p (∂₊p - ∂₋p),   ∂₋(∂₊p) = q ∂₊p (∂₋p - ∂₊p).
//! ```

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use rayon::prelude::*;

use crate::boundary::{self, ArcSample};
use crate::coords::{lambda_raw, q_raw, radial_derivative, Family};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeStatus {
    Solved,
    Boundary,
    StoppedVacuum,
    StoppedSonic,
    StoppedDomain,
}

impl NodeStatus {
    pub fn is_valid(self) -> bool {
        matches!(self, NodeStatus::Solved | NodeStatus::Boundary)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeStatus::Solved => "solved",
            NodeStatus::Boundary => "boundary",
            NodeStatus::StoppedVacuum => "stopped_vacuum",
            NodeStatus::StoppedSonic => "stopped_sonic",
            NodeStatus::StoppedDomain => "stopped_domain",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "solved" => NodeStatus::Solved,
            "boundary" => NodeStatus::Boundary,
            "stopped_vacuum" => NodeStatus::StoppedVacuum,
            "stopped_sonic" => NodeStatus::StoppedSonic,
            "stopped_domain" => NodeStatus::StoppedDomain,
            _ => return None,
        })
    }
}

/// One point of the characteristic net.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateNode {
    pub r: f64,
    pub theta: f64,
    pub p: f64,
    pub dp_plus: f64,
    pub dp_minus: f64,
    pub status: NodeStatus,
}

impl StateNode {
    pub fn stopped(status: NodeStatus) -> Self {
        Self {
            r: f64::NAN,
            theta: f64::NAN,
            p: f64::NAN,
            dp_plus: f64::NAN,
            dp_minus: f64::NAN,
            status,
        }
    }

    pub fn lambda(&self) -> f64 {
        lambda_raw(self.r, self.p)
    }

    /// `p_r = λ (∂₊p - ∂₋p) / 2`.
    pub fn p_r(&self) -> f64 {
        radial_derivative(self.lambda(), self.dp_plus, self.dp_minus)
    }

    pub fn p_theta(&self) -> f64 {
        0.5 * (self.dp_plus + self.dp_minus)
    }

    /// Reflection `θ -> π/2 - θ`, under which `∂₊p` and `-∂₋p` trade places.
    pub fn mirrored(&self) -> Self {
        Self {
            theta: FRAC_PI_2 - self.theta,
            dp_plus: -self.dp_minus,
            dp_minus: -self.dp_plus,
            ..*self
        }
    }
}

/// Spacing law of a graded layout.
///
/// With `d = θ - θ_c` the distance to the accumulation angle `θ_c`, seed `k`
/// sits at the index coordinate `u_k = k/(n-1)` proportional to
/// `ln(D/d) + (D - d)/(knee·D)`, `D = π/4 - θ_c`. Gaps are therefore uniform
/// while `d ≫ knee·D` and geometric (`Δd ∝ d`) below it, and the last seed is at
/// `d = total_ratio·D`. Layouts with equal parameters are nested under
/// `n -> 2n - 1`. `knee = 0` is a pure geometric progression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grading {
    pub total_ratio: f64,
    pub knee: f64,
}

impl Default for Grading {
    fn default() -> Self {
        Self {
            total_ratio: DEFAULT_TOTAL_RATIO,
            knee: DEFAULT_KNEE,
        }
    }
}

/// Placement of the seeds on the data arcs. Lower seeds descend from `π/4` to
/// `theta_min`; upper seeds are their mirror images.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeedLayout {
    Uniform { theta_min: f64 },
    Graded { theta_min: f64, grading: Grading },
    /// Graded layout whose last seed is chosen by bisection over full solves so
    /// that the deepest diagonal node has `p` just above `floor_multiple·p_floor`.
    Critical { grading: Grading, floor_multiple: f64 },
}

pub const DEFAULT_TOTAL_RATIO: f64 = 1e-5;
pub const DEFAULT_KNEE: f64 = 0.03;
pub const DEFAULT_FLOOR_MULTIPLE: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub n_seeds: usize,
    pub seeds: SeedLayout,
    /// Fixed-point tolerance on the per-sweep change of `p`, relative to `p`.
    pub corrector_tol: f64,
    pub max_corrector_iters: usize,
    pub p_floor: f64,
    pub sonic_margin: f64,
    pub param_switch_lambda: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            n_seeds: 65,
            seeds: SeedLayout::Critical {
                grading: Grading::default(),
                floor_multiple: DEFAULT_FLOOR_MULTIPLE,
            },
            corrector_tol: 1e-12,
            max_corrector_iters: 50,
            p_floor: 1e-12,
            sonic_margin: 1e-12,
            param_switch_lambda: 0.1,
        }
    }
}

impl SolverConfig {
    pub fn with_seeds(n_seeds: usize) -> Self {
        Self {
            n_seeds,
            ..Self::default()
        }
    }

    /// Uniform seeds down to `theta_min`; nested under `n -> 2n - 1`.
    pub fn uniform(n_seeds: usize, theta_min: f64) -> Self {
        Self {
            n_seeds,
            seeds: SeedLayout::Uniform { theta_min },
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_seeds < 2 {
            return bad(format!("n_seeds = {} must be at least 2", self.n_seeds));
        }
        match self.seeds {
            SeedLayout::Uniform { theta_min } | SeedLayout::Graded { theta_min, .. }
                if !(theta_min > 0.0 && theta_min < FRAC_PI_4) =>
            {
                return bad(format!("theta_min = {theta_min} must lie in (0, pi/4)"));
            }
            SeedLayout::Critical { floor_multiple, .. } if !(floor_multiple >= 1.0) => {
                return bad(format!("floor_multiple = {floor_multiple} must be at least 1"));
            }
            _ => {}
        }
        if let SeedLayout::Graded { grading, .. } | SeedLayout::Critical { grading, .. } = self.seeds {
            if !(grading.total_ratio > 0.0 && grading.total_ratio < 1.0) {
                return bad(format!("total_ratio = {} must lie in (0, 1)", grading.total_ratio));
            }
            if !(grading.knee >= 0.0 && grading.knee.is_finite()) {
                return bad(format!("knee = {} must be finite and non-negative", grading.knee));
            }
        }
        if !(self.corrector_tol > 0.0) {
            return bad("corrector_tol must be positive".into());
        }
        if self.max_corrector_iters == 0 {
            return bad("max_corrector_iters must be positive".into());
        }
        if !(self.p_floor > 0.0) {
            return bad("p_floor must be positive".into());
        }
        if !(self.sonic_margin > 0.0) {
            return bad("sonic_margin must be positive".into());
        }
        if !(self.param_switch_lambda >= 0.0) {
            return bad("param_switch_lambda must be non-negative".into());
        }
        Ok(())
    }
}

/// Uniformly spaced lower-arc seed angles from `π/4` down to `theta_min`.
pub fn uniform_angles(n_seeds: usize, theta_min: f64) -> Vec<f64> {
    let last = n_seeds - 1;
    let span = FRAC_PI_4 - theta_min;
    (0..n_seeds)
        .map(|k| if k == last { theta_min } else { FRAC_PI_4 - span * (k as f64 / last as f64) })
        .collect()
}

/// Lower-arc seed angles, descending from `π/4` to `theta_min`, spaced by the
/// law described on [`Grading`].
pub fn graded_angles(n_seeds: usize, theta_min: f64, grading: Grading) -> Vec<f64> {
    let Grading { total_ratio, knee } = grading;
    let last = n_seeds - 1;
    let theta_c = (theta_min - FRAC_PI_4 * total_ratio) / (1.0 - total_ratio);
    let span = FRAC_PI_4 - theta_c;
    // index coordinate as a function of x = ln(d / span), d = θ - θ_c
    let u = |x: f64| -x + if knee > 0.0 { (1.0 - x.exp()) / knee } else { 0.0 };
    let x_last = total_ratio.ln();
    let u_last = u(x_last);
    (0..n_seeds)
        .map(|k| match k {
            0 => FRAC_PI_4,
            k if k == last => theta_min,
            k => {
                let target = u_last * k as f64 / last as f64;
                let (mut lo, mut hi) = (x_last, 0.0);
                for _ in 0..80 {
                    let mid = 0.5 * (lo + hi);
                    if u(mid) > target {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                theta_c + span * (0.5 * (lo + hi)).exp()
            }
        })
        .collect()
}

fn seeds_from_angles(angles: &[f64]) -> Result<(Vec<ArcSample>, Vec<ArcSample>)> {
    let lower = angles
        .iter()
        .map(|&t| boundary::lower_arc(t))
        .collect::<Result<Vec<_>>>()?;
    let upper = angles
        .iter()
        .map(|&t| boundary::upper_arc(FRAC_PI_2 - t))
        .collect::<Result<Vec<_>>>()?;
    Ok((lower, upper))
}

/// Seeds on both arcs for a layout with an explicit `theta_min`. Lower seeds
/// descend from `π/4`, upper seeds ascend from `π/4`, and seed `k` of one arc
/// is the mirror of seed `k` of the other.
///
/// A [`SeedLayout::Critical`] layout has no explicit last angle; use
/// [`solve_interior`] and read the seeds off the returned grid.
pub fn seed_boundaries(cfg: &SolverConfig) -> Result<(Vec<ArcSample>, Vec<ArcSample>)> {
    cfg.validate()?;
    match cfg.seeds {
        SeedLayout::Uniform { theta_min } => seeds_from_angles(&uniform_angles(cfg.n_seeds, theta_min)),
        SeedLayout::Graded { theta_min, grading } => {
            seeds_from_angles(&graded_angles(cfg.n_seeds, theta_min, grading))
        }
        SeedLayout::Critical { .. } => Err(Error::Config(
            "critical seed layout is resolved during the solve".into(),
        )),
    }
}

/// Why a single node update could not produce a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepError {
    Vacuum,
    Sonic,
    Domain,
    NoConvergence { last_change: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NodeDiagnostics {
    pub iterations: usize,
    /// `|p_plus - p_minus|` between the two characteristic integrals.
    pub p_mismatch: f64,
}

#[derive(Debug, Clone, Copy)]
struct Trial {
    r: f64,
    theta: f64,
    p: f64,
    a: f64,
    b: f64,
}

#[inline]
fn plus_rhs(r: f64, p: f64, a: f64, b: f64) -> f64 {
    // ∂₊(∂₋p)
    q_raw(r, p) * b * (a - b)
}

#[inline]
fn minus_rhs(r: f64, p: f64, a: f64, b: f64) -> f64 {
    // ∂₋(∂₊p)
    q_raw(r, p) * a * (b - a)
}

/// Rates carried along the two families at one end point of a cell.
///
/// In log form the transported quantities are `ln p`, `ln(-∂₋p)` (plus family)
/// and `ln p`, `ln ∂₊p` (minus family); near vacuum `p` and `∂±p` decay
/// exponentially while their logarithms stay smooth, so the trapezoid keeps
/// its accuracy there.
#[derive(Debug, Clone, Copy)]
struct Rates {
    lambda: f64,
    p_plus: f64,
    p_minus: f64,
    b_plus: f64,
    a_minus: f64,
}

impl Rates {
    fn at(r: f64, p: f64, a: f64, b: f64, log_form: bool) -> Self {
        let lambda = lambda_raw(r, p);
        if log_form {
            let q = q_raw(r, p);
            Self {
                lambda,
                p_plus: a / p,
                p_minus: b / p,
                b_plus: q * (a - b),
                a_minus: q * (b - a),
            }
        } else {
            Self {
                lambda,
                p_plus: a,
                p_minus: b,
                b_plus: plus_rhs(r, p, a, b),
                a_minus: minus_rhs(r, p, a, b),
            }
        }
    }
}

/// Inputs of one cell that do not change during the corrector.
struct Cell<'a> {
    a: &'a StateNode,
    b: &'a StateNode,
    ra: Rates,
    rb: Rates,
    by_theta: bool,
    log_form: bool,
}

/// Estimate of the unknowns at C used for the trapezoidal averages.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Guess {
    r: f64,
    p: f64,
    a: f64,
    b: f64,
}

impl Guess {
    fn as_array(&self) -> [f64; 4] {
        [self.r, self.p, self.a, self.b]
    }

    fn from_array(v: [f64; 4]) -> Self {
        Self {
            r: v[0],
            p: v[1],
            a: v[2],
            b: v[3],
        }
    }
}

struct Sweep {
    trial: Trial,
    p_plus: f64,
    p_minus: f64,
}

impl Cell<'_> {
    /// One trapezoidal sweep (a)-(d). With `guess = None` the end-point values
    /// are replaced by the predecessor values, which is the Euler predictor.
    fn sweep(&self, guess: Option<&Guess>) -> std::result::Result<Sweep, StepError> {
        let (na, nb) = (self.a, self.b);
        let (ra, rb) = (self.ra, self.rb);
        let (cp, cm) = match guess {
            Some(g) => {
                let c = Rates::at(g.r, g.p, g.a, g.b, self.log_form);
                (c, c)
            }
            None => (ra, rb),
        };
        let (r, theta) = if self.by_theta {
            let s_plus = 0.5 * (1.0 / ra.lambda + 1.0 / cp.lambda);
            let s_minus = 0.5 * (1.0 / rb.lambda + 1.0 / cm.lambda);
            let theta = (nb.r - na.r + s_plus * na.theta + s_minus * nb.theta) / (s_plus + s_minus);
            (na.r + s_plus * (theta - na.theta), theta)
        } else {
            let l_plus = 0.5 * (ra.lambda + cp.lambda);
            let l_minus = 0.5 * (rb.lambda + cm.lambda);
            let r = (nb.theta - na.theta + l_plus * na.r + l_minus * nb.r) / (l_plus + l_minus);
            (r, na.theta + l_plus * (r - na.r))
        };
        if !(theta > 0.0 && theta < FRAC_PI_2) {
            return Err(StepError::Domain);
        }
        if !(r > 0.0 && r.is_finite()) {
            // Both characteristics run into the origin before meeting; this
            // only happens once λ has collapsed near vacuum.
            return Err(StepError::Vacuum);
        }
        // Increments along each family as ½·(w_start·f_start + w_end·f_end)·Δ,
        // the weights being 1 in θ and ±λ in r (d/dr = ±λ d/dθ).
        let (h_a, h_b, w) = if self.by_theta {
            (0.5 * (theta - na.theta), 0.5 * (theta - nb.theta), [1.0; 4])
        } else {
            (
                0.5 * (r - na.r),
                -0.5 * (r - nb.r),
                [ra.lambda, cp.lambda, rb.lambda, cm.lambda],
            )
        };
        let plus = |fa: f64, fc: f64| h_a * (w[0] * fa + w[1] * fc);
        let minus = |fb: f64, fc: f64| h_b * (w[2] * fb + w[3] * fc);
        let d_p_plus = plus(ra.p_plus, cp.p_plus);
        let d_p_minus = minus(rb.p_minus, cm.p_minus);
        let d_b = plus(ra.b_plus, cp.b_plus);
        let d_a = minus(rb.a_minus, cm.a_minus);
        let (p_plus, p_minus, p, a, b) = if self.log_form {
            let (pp, pm) = (na.p * d_p_plus.exp(), nb.p * d_p_minus.exp());
            (pp, pm, (pp * pm).sqrt(), nb.dp_plus * d_a.exp(), na.dp_minus * d_b.exp())
        } else {
            let (pp, pm) = (na.p + d_p_plus, nb.p + d_p_minus);
            (pp, pm, 0.5 * (pp + pm), nb.dp_plus + d_a, na.dp_minus + d_b)
        };
        if !(p.is_finite() && a.is_finite() && b.is_finite()) {
            return Err(StepError::Vacuum);
        }
        Ok(Sweep {
            trial: Trial { r, theta, p, a, b },
            p_plus,
            p_minus,
        })
    }

    fn admissible(&self, g: &Guess) -> bool {
        let signs = !self.log_form || (g.a > 0.0 && g.b < 0.0);
        signs && g.r > 0.0 && g.p > 0.0 && g.r * g.r > g.p
    }

    /// Residual `Φ(g) - g` of the fixed-point map.
    fn residual(&self, g: &Guess) -> std::result::Result<[f64; 4], StepError> {
        let s = self.sweep(Some(g))?;
        let t = s.trial;
        Ok([t.r - g.r, t.p - g.p, t.a - g.a, t.b - g.b])
    }
}

/// Solve the 4x4 system `m x = rhs` by Gaussian elimination with partial pivoting.
fn solve4(mut m: [[f64; 4]; 4], mut rhs: [f64; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let piv = (col..4).max_by(|&x, &y| m[x][col].abs().total_cmp(&m[y][col].abs()))?;
        if m[piv][col] == 0.0 || !m[piv][col].is_finite() {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for row in col + 1..4 {
            let f = m[row][col] / m[col][col];
            for k in col..4 {
                m[row][k] -= f * m[col][k];
            }
            rhs[row] -= f * rhs[col];
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let mut acc = rhs[row];
        for k in row + 1..4 {
            acc -= m[row][k] * x[k];
        }
        x[row] = acc / m[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Compute the node where the plus characteristic through `pred_plus` meets the
/// minus characteristic through `pred_minus`.
///
/// The trapezoidal cell equations are the fixed point `g = Φ(g)` of one sweep
/// of the predictor-corrector; the corrector solves them by Newton iteration
/// on `Φ(g) - g` started from the Euler predictor.
pub fn node_update(
    pred_plus: &StateNode,
    pred_minus: &StateNode,
    cfg: &SolverConfig,
) -> std::result::Result<(StateNode, NodeDiagnostics), StepError> {
    let (na, nb) = (pred_plus, pred_minus);
    if na.r == nb.r && na.theta == nb.theta {
        return Ok((
            StateNode {
                status: NodeStatus::Solved,
                ..*na
            },
            NodeDiagnostics::default(),
        ));
    }
    // Both choices are fixed per cell so the fixed point is well defined.
    let log_form = [na, nb].iter().all(|n| n.dp_plus > 0.0 && n.dp_minus < 0.0);
    let ra = Rates::at(na.r, na.p, na.dp_plus, na.dp_minus, log_form);
    let rb = Rates::at(nb.r, nb.p, nb.dp_plus, nb.dp_minus, log_form);
    let cell = Cell {
        a: na,
        b: nb,
        ra,
        rb,
        by_theta: ra.lambda.min(rb.lambda) >= cfg.param_switch_lambda,
        log_form,
    };

    let pred = cell.sweep(None)?.trial;
    let mut g = Guess {
        r: pred.r,
        p: pred.p,
        a: pred.a,
        b: pred.b,
    };
    if !cell.admissible(&g) {
        // Linear extrapolation of a decaying p overshoots; restart from a small
        // positive pressure below both predecessors.
        g.p = 1e-3 * na.p.min(nb.p);
        if !cell.admissible(&g) {
            return Err(StepError::Vacuum);
        }
    }

    let mut last_change = f64::INFINITY;
    for iter in 1..=cfg.max_corrector_iters {
        let f0 = cell.residual(&g)?;
        let x0 = g.as_array();
        let mut jac = [[0.0; 4]; 4];
        for k in 0..4 {
            let h = 1e-7 * x0[k].abs().max(1e-300);
            let mut xp = x0;
            xp[k] += h;
            let gp = Guess::from_array(xp);
            let fp = if cell.admissible(&gp) {
                cell.residual(&gp)?
            } else {
                return Err(StepError::Vacuum);
            };
            for row in 0..4 {
                jac[row][k] = (fp[row] - f0[row]) / h;
            }
        }
        let step = solve4(jac, f0.map(|v| -v)).ok_or(StepError::NoConvergence { last_change })?;

        let mut t = 1.0;
        let mut next = g;
        for _ in 0..30 {
            next = Guess::from_array(std::array::from_fn(|k| x0[k] + t * step[k]));
            if cell.admissible(&next) {
                break;
            }
            t *= 0.5;
        }
        if !cell.admissible(&next) {
            return Err(StepError::Vacuum);
        }

        let dp = (next.p - g.p).abs();
        let da = (next.a - g.a).abs() / next.a.abs().max(f64::MIN_POSITIVE);
        let db = (next.b - g.b).abs() / next.b.abs().max(f64::MIN_POSITIVE);
        let dr = (next.r - g.r).abs() / next.r;
        last_change = dp / next.p;
        g = next;
        if dp <= cfg.corrector_tol * g.p && da.max(db).max(dr) <= cfg.corrector_tol {
            let s = cell.sweep(Some(&g))?;
            let t = s.trial;
            if t.p < cfg.p_floor {
                return Err(StepError::Vacuum);
            }
            if t.r * t.r - t.p < cfg.sonic_margin {
                return Err(StepError::Sonic);
            }
            let node = StateNode {
                r: t.r,
                theta: t.theta,
                p: t.p,
                dp_plus: t.a,
                dp_minus: t.b,
                status: NodeStatus::Solved,
            };
            let diag = NodeDiagnostics {
                iterations: iter,
                p_mismatch: (s.p_plus - s.p_minus).abs(),
            };
            return Ok((node, diag));
        }
    }
    if g.p < cfg.p_floor {
        return Err(StepError::Vacuum);
    }
    Err(StepError::NoConvergence { last_change })
}

/// Aggregated solve statistics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveSummary {
    pub solved: usize,
    pub boundary: usize,
    pub stopped_vacuum: usize,
    pub stopped_sonic: usize,
    pub stopped_domain: usize,
    pub max_iterations: usize,
    pub max_p_mismatch: f64,
}

/// The solved characteristic net.
#[derive(Debug, Clone, PartialEq)]
pub struct CharGrid {
    pub n: usize,
    /// Row-major: `nodes[i * n + j]`.
    pub nodes: Vec<StateNode>,
    pub seeds_lower: Vec<ArcSample>,
    pub seeds_upper: Vec<ArcSample>,
    pub config: SolverConfig,
    pub diagnostics: Vec<NodeDiagnostics>,
    /// Pressure scale `p1` the grid is expressed in (1 for the unit problem).
    pub scale: f64,
}

impl CharGrid {
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> &StateNode {
        &self.nodes[i * self.n + j]
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&StateNode> {
        (i < self.n && j < self.n).then(|| self.node(i, j))
    }

    /// Indices and nodes that carry valid data.
    pub fn valid_nodes(&self) -> impl Iterator<Item = ((usize, usize), &StateNode)> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, nd)| nd.status.is_valid())
            .map(move |(k, nd)| ((k / self.n, k % self.n), nd))
    }

    pub fn summary(&self) -> SolveSummary {
        let mut s = SolveSummary::default();
        for nd in &self.nodes {
            match nd.status {
                NodeStatus::Solved => s.solved += 1,
                NodeStatus::Boundary => s.boundary += 1,
                NodeStatus::StoppedVacuum => s.stopped_vacuum += 1,
                NodeStatus::StoppedSonic => s.stopped_sonic += 1,
                NodeStatus::StoppedDomain => s.stopped_domain += 1,
            }
        }
        for d in &self.diagnostics {
            s.max_iterations = s.max_iterations.max(d.iterations);
            s.max_p_mismatch = s.max_p_mismatch.max(d.p_mismatch);
        }
        s
    }

    /// True when `p` strictly decreases along every grid line away from the
    /// arcs, i.e. no two characteristics of one family have crossed.
    pub fn is_unfolded(&self) -> bool {
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                let nd = self.node(i, j);
                if !nd.status.is_valid() {
                    continue;
                }
                if i > 0 && !(nd.p < self.node(i - 1, j).p) {
                    return false;
                }
                if j > 0 && !(nd.p < self.node(i, j - 1).p) {
                    return false;
                }
            }
        }
        true
    }

    /// Whether `p` strictly decreases along the symmetry diagonal `(k, k)`.
    ///
    /// Cheaper and more robust than [`CharGrid::is_unfolded`]: once seeds
    /// cluster, neighbouring lines are closer than the local truncation error
    /// and off-diagonal comparisons become noise.
    pub fn diagonal_decreasing(&self) -> bool {
        (1..self.n).all(|k| {
            let nd = self.node(k, k);
            nd.status.is_valid() && nd.p < self.node(k - 1, k - 1).p
        })
    }

    /// Whole grid line of `family` through node `(i, j)`, ordered by increasing θ,
    /// truncated at the first stopped node.
    ///
    /// A minus line therefore begins at its lower-arc anchor `(i, 0)`; a plus line
    /// ends at its upper-arc anchor `(0, j)`.
    pub fn trace_characteristic(&self, i: usize, j: usize, family: Family) -> Vec<StateNode> {
        match family {
            Family::Minus => (0..self.n)
                .map(|jj| *self.node(i, jj))
                .take_while(|nd| nd.status.is_valid())
                .collect(),
            Family::Plus => {
                let mut line: Vec<StateNode> = (0..self.n)
                    .map(|ii| *self.node(ii, j))
                    .take_while(|nd| nd.status.is_valid())
                    .collect();
                line.reverse();
                line
            }
        }
    }

    /// Nodes from the arc anchor of `family` to `(i, j)` inclusive.
    /// `None` if a node on the way is not valid.
    pub fn path_to_anchor(&self, i: usize, j: usize, family: Family) -> Option<Vec<StateNode>> {
        let path: Vec<StateNode> = match family {
            Family::Minus => (0..=j).map(|jj| *self.node(i, jj)).collect(),
            Family::Plus => (0..=i).map(|ii| *self.node(ii, j)).collect(),
        };
        path.iter().all(|nd| nd.status.is_valid()).then_some(path)
    }
}

fn boundary_node(seed: &ArcSample, transverse: f64) -> StateNode {
    let (dp_plus, dp_minus) = match seed.which {
        boundary::Arc::Lower => (seed.tangential_dp, transverse),
        boundary::Arc::Upper => (transverse, seed.tangential_dp),
    };
    StateNode {
        r: seed.r,
        theta: seed.theta,
        p: seed.p,
        dp_plus,
        dp_minus,
        status: NodeStatus::Boundary,
    }
}

/// Fill the net diagonal by diagonal from the corner.
pub fn solve_interior(cfg: &SolverConfig) -> Result<CharGrid> {
    cfg.validate()?;
    match cfg.seeds {
        SeedLayout::Uniform { theta_min } => march(cfg, &uniform_angles(cfg.n_seeds, theta_min)),
        SeedLayout::Graded { theta_min, grading } => march(cfg, &graded_angles(cfg.n_seeds, theta_min, grading)),
        SeedLayout::Critical { grading, floor_multiple } => {
            solve_critical(cfg, grading, floor_multiple * cfg.p_floor)
        }
    }
}

/// Bisect the last seed angle so the deepest diagonal node has `p` just above
/// `p_target`. Below the critical anchor angle the last minus characteristic
/// turns radial before reaching the diagonal and the node is lost.
fn solve_critical(cfg: &SolverConfig, grading: Grading, p_target: f64) -> Result<CharGrid> {
    let n = cfg.n_seeds;
    let deepest = |grid: &CharGrid| {
        let nd = grid.node(n - 1, n - 1);
        nd.status.is_valid().then_some(nd.p)
    };
    let attempt = |theta_min: f64| -> Option<CharGrid> {
        let grid = march(cfg, &graded_angles(n, theta_min, grading)).ok()?;
        match deepest(&grid) {
            Some(p) if p >= p_target && grid.diagonal_decreasing() => Some(grid),
            _ => None,
        }
    };

    let mut hi = 0.9 * FRAC_PI_4;
    // a failure of the shallowest layout is a genuine solver failure
    march(cfg, &graded_angles(n, hi, grading))?;
    let mut best = attempt(hi).ok_or(Error::Unreachable { p_target })?;
    let mut lo = 0.0;
    for _ in 0..200 {
        if deepest(&best).is_some_and(|p| p <= 2.0 * p_target) || hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match attempt(mid) {
            Some(grid) => {
                hi = mid;
                best = grid;
            }
            None => lo = mid,
        }
    }
    Ok(best)
}

fn march(cfg: &SolverConfig, angles: &[f64]) -> Result<CharGrid> {
    let (seeds_lower, seeds_upper) = seeds_from_angles(angles)?;
    let n = cfg.n_seeds;
    let mut nodes = vec![StateNode::stopped(NodeStatus::StoppedDomain); n * n];
    let mut diagnostics = vec![NodeDiagnostics::default(); n * n];

    let corner = boundary::corner_state();
    nodes[0] = StateNode {
        r: corner.r,
        theta: corner.theta,
        p: corner.p,
        dp_plus: corner.dp_plus,
        dp_minus: corner.dp_minus,
        status: NodeStatus::Boundary,
    };
    for k in 1..n {
        let lo = &seeds_lower[k];
        nodes[k * n] = boundary_node(lo, boundary::lower_arc_transverse_dp(lo.theta)?);
        let up = &seeds_upper[k];
        nodes[k] = boundary_node(up, boundary::upper_arc_transverse_dp(up.theta)?);
    }

    for d in 2..=2 * (n - 1) {
        let i_lo = d.saturating_sub(n - 1).max(1);
        let i_hi = (d - 1).min(n - 1);
        let results: Vec<(usize, std::result::Result<(StateNode, NodeDiagnostics), StepError>)> =
            (i_lo..=i_hi)
                .into_par_iter()
                .map(|i| {
                    let j = d - i;
                    let a = &nodes[(i - 1) * n + j];
                    let b = &nodes[i * n + j - 1];
                    let res = if a.status.is_valid() && b.status.is_valid() {
                        node_update(a, b, cfg)
                    } else {
                        // Inherit the stop of a blocked predecessor.
                        let blocked = if a.status.is_valid() { b.status } else { a.status };
                        Ok((StateNode::stopped(blocked), NodeDiagnostics::default()))
                    };
                    (i, res)
                })
                .collect();
        for (i, res) in results {
            let k = i * n + (d - i);
            match res {
                Ok((node, diag)) => {
                    nodes[k] = node;
                    diagnostics[k] = diag;
                }
                Err(StepError::Vacuum) => nodes[k] = StateNode::stopped(NodeStatus::StoppedVacuum),
                Err(StepError::Sonic) => nodes[k] = StateNode::stopped(NodeStatus::StoppedSonic),
                Err(StepError::Domain) => nodes[k] = StateNode::stopped(NodeStatus::StoppedDomain),
                Err(StepError::NoConvergence { last_change }) => {
                    return Err(Error::NoConvergence {
                        i,
                        j: d - i,
                        last_change,
                    })
                }
            }
        }
    }

    Ok(CharGrid {
        n,
        nodes,
        seeds_lower,
        seeds_upper,
        config: *cfg,
        diagnostics,
        scale: 1.0,
    })
}
