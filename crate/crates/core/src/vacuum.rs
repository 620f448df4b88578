//! Near-vacuum analysis: level curves `p = ε`, the decay law
//! `p ≈ c·exp(-M0/r)`, minimum pressure and the shrinkage of the
//! low-pressure region toward the origin.
//!
//! Rays are sampled by barycentric interpolation of `ln p` on the net
//! triangulated in inverted coordinates `(ξ, η)/r²`. Inversion keeps rays
//! and maps `r` to `1/r`, so along a ray the interpolant is linear in `1/r`
//! and reproduces `ln p = ln c - M0/r` exactly.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use rayon::prelude::*;

use crate::coords::PolarPoint;
use crate::error::{Error, Result};
use crate::solver::CharGrid;
use crate::verify::NetInterpolator;

pub const DEFAULT_RAYS: usize = 181;
pub const DEFAULT_DELTA: f64 = PI / 36.0;
pub const MIN_FIT_SAMPLES: usize = 8;
/// Samples placed in a decay-fit window.
pub const FIT_SAMPLES: usize = 64;
/// Radial samples used to bracket a crossing on one ray.
const RAY_SAMPLES: usize = 512;

/// Interpolated `ln p` along rays of a solved grid.
pub struct RaySampler<'g> {
    grid: &'g CharGrid,
    interp: NetInterpolator,
    log_p: Vec<f64>,
    r_max: f64,
}

impl<'g> RaySampler<'g> {
    pub fn new(grid: &'g CharGrid) -> Self {
        let log_p = grid.nodes.iter().map(|nd| nd.p.ln()).collect();
        let r_max = grid.valid_nodes().map(|(_, nd)| nd.r).fold(0.0, f64::max);
        Self {
            grid,
            interp: NetInterpolator::with_positions(grid, |nd| PolarPoint::new(1.0 / nd.r, nd.theta).to_cartesian()),
            log_p,
            r_max,
        }
    }

    pub fn grid(&self) -> &CharGrid {
        self.grid
    }

    pub fn log_p(&self, r: f64, theta: f64) -> Option<f64> {
        let (x, y) = PolarPoint::new(1.0 / r, theta).to_cartesian();
        self.interp.interpolate(x, y, &self.log_p)
    }

    pub fn p(&self, r: f64, theta: f64) -> Option<f64> {
        self.log_p(r, theta).map(f64::exp)
    }

    /// Covered radial range `[r_lo, r_hi]` of the ray, from a uniform scan.
    pub fn coverage(&self, theta: f64) -> Option<(f64, f64)> {
        let h = self.r_max / RAY_SAMPLES as f64;
        let covered: Vec<f64> = (1..=RAY_SAMPLES)
            .map(|k| h * k as f64)
            .filter(|&r| self.log_p(r, theta).is_some())
            .collect();
        let (lo, hi) = (*covered.first()?, *covered.last()?);
        // tighten both ends to the net boundary
        let edge = |inside: f64, outside: f64| {
            let (mut a, mut b) = (inside, outside);
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                if self.log_p(m, theta).is_some() {
                    a = m;
                } else {
                    b = m;
                }
            }
            a
        };
        Some((edge(lo, (lo - h).max(0.0)), edge(hi, hi + h)))
    }

    /// Radius where `ln p = target` on the ray, by bisection inside the
    /// covered range (`p` is increasing in `r`).
    pub fn crossing(&self, theta: f64, target: f64) -> Option<f64> {
        let (lo, hi) = self.coverage(theta)?;
        let f = |r: f64| self.log_p(r, theta);
        let (flo, fhi) = (f(lo)?, f(hi)?);
        if !(flo <= target && target <= fhi) {
            return None;
        }
        // bracket on the scan, then bisect
        let m = RAY_SAMPLES;
        let mut prev = (lo, flo);
        for k in 1..=m {
            let r = lo + (hi - lo) * k as f64 / m as f64;
            let Some(v) = f(r) else { continue };
            if v >= target {
                let (mut a, mut b) = (prev.0, r);
                for _ in 0..80 {
                    let mid = 0.5 * (a + b);
                    match f(mid) {
                        Some(x) if x < target => a = mid,
                        _ => b = mid,
                    }
                }
                return Some(0.5 * (a + b));
            }
            prev = (r, v);
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelCurve {
    pub epsilon: f64,
    /// `(θ, r_ε)` on covered rays, ascending in θ.
    pub points: Vec<(f64, f64)>,
    /// Smallest and largest covered θ.
    pub coverage: Option<(f64, f64)>,
    pub uncovered_rays: usize,
}

impl LevelCurve {
    pub fn r_at(&self, theta: f64) -> Option<f64> {
        self.points.iter().find(|(t, _)| *t == theta).map(|(_, r)| *r)
    }
}

/// Ray angles `θ_k = (π/2)(k+1)/(n+1)`, symmetric about `π/4`.
pub fn ray_angles(n_rays: usize) -> Vec<f64> {
    (0..n_rays)
        .map(|k| {
            if 2 * (k + 1) == n_rays + 1 {
                FRAC_PI_4
            } else {
                FRAC_PI_2 * (k + 1) as f64 / (n_rays + 1) as f64
            }
        })
        .collect()
}

pub fn level_curve(grid: &CharGrid, epsilon: f64) -> Result<LevelCurve> {
    level_curve_on(&RaySampler::new(grid), epsilon, &ray_angles(DEFAULT_RAYS))
}

pub fn level_curve_on(s: &RaySampler, epsilon: f64, rays: &[f64]) -> Result<LevelCurve> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Domain(format!("epsilon = {epsilon} must lie in (0, 1)")));
    }
    let target = epsilon.ln();
    let hits: Vec<Option<(f64, f64)>> = rays
        .par_iter()
        .map(|&t| s.crossing(t, target).map(|r| (t, r)))
        .collect();
    let uncovered_rays = hits.iter().filter(|h| h.is_none()).count();
    let points: Vec<(f64, f64)> = hits.into_iter().flatten().collect();
    let coverage = points.first().map(|f| (f.0, points.last().unwrap().0));
    Ok(LevelCurve {
        epsilon,
        points,
        coverage,
        uncovered_rays,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub c: f64,
    pub m0: f64,
    pub r_range: (f64, f64),
    pub r_squared: f64,
    pub n_points: usize,
}

/// Least-squares fit of `ln p = ln c - M0/r` to `(r, p)` samples.
pub fn fit_decay(samples: &[(f64, f64)]) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(r, p)| *r > 0.0 && *p > 0.0 && r.is_finite() && p.is_finite())
        .map(|(r, p)| (1.0 / r, p.ln()))
        .collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::TooFewSamples {
            found: pts.len(),
            needed: MIN_FIT_SAMPLES,
        });
    }
    let (slope, intercept, r_squared) = linear_fit(&pts);
    let (r0, r1) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (r, _)| (a.min(*r), b.max(*r)));
    Ok(DecayFit {
        c: intercept.exp(),
        m0: -slope,
        r_range: (r0, r1),
        r_squared,
        n_points: pts.len(),
    })
}

/// Ordinary least squares `y = slope·x + intercept`; returns the coefficient
/// of determination as well.
fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in pts {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r_squared)
}

/// Radial window of a decay fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitWindow {
    Radii(f64, f64),
    /// From the deepest usable point of the ray up to ten times its pressure.
    LowestDecade,
}

pub fn decay_fit(grid: &CharGrid, theta: f64, window: FitWindow) -> Result<DecayFit> {
    decay_fit_on(&RaySampler::new(grid), theta, window)
}

pub fn decay_fit_on(s: &RaySampler, theta: f64, window: FitWindow) -> Result<DecayFit> {
    let too_few = || Error::TooFewSamples {
        found: 0,
        needed: MIN_FIT_SAMPLES,
    };
    // only pressures clear of the vacuum floor enter the fit
    let floor = (10.0 * s.grid().config.p_floor * s.grid().scale).ln();
    let (r_lo, r_hi) = match window {
        FitWindow::Radii(a, b) => (a.min(b), a.max(b)),
        FitWindow::LowestDecade => {
            let (lo, hi) = s.coverage(theta).ok_or_else(too_few)?;
            let base = s.log_p(lo, theta).ok_or_else(too_few)?;
            let start = if base >= floor { lo } else { s.crossing(theta, floor).ok_or_else(too_few)? };
            let top = s.log_p(start, theta).ok_or_else(too_few)? + std::f64::consts::LN_10;
            let end = s.crossing(theta, top).unwrap_or(hi);
            (start, end)
        }
    };
    let samples: Vec<(f64, f64)> = (0..FIT_SAMPLES)
        .filter_map(|k| {
            let r = r_lo + (r_hi - r_lo) * k as f64 / (FIT_SAMPLES - 1) as f64;
            s.log_p(r, theta).filter(|&lp| lp >= floor).map(|lp| (r, lp.exp()))
        })
        .collect();
    fit_decay(&samples)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinPressure {
    pub value: f64,
    pub i: usize,
    pub j: usize,
    pub r: f64,
    pub theta: f64,
}

pub fn min_pressure(grid: &CharGrid) -> MinPressure {
    grid.valid_nodes()
        .map(|((i, j), nd)| MinPressure {
            value: nd.p,
            i,
            j,
            r: nd.r,
            theta: nd.theta,
        })
        .fold(None, |best: Option<MinPressure>, m| match best {
            Some(b) if b.value <= m.value => Some(b),
            _ => Some(m),
        })
        .expect("the corner is always a valid node")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BubbleRow {
    pub epsilon: f64,
    /// `sup r_ε(θ)` over covered rays in `[δ, π/2 - δ]`.
    pub sup_r: Option<f64>,
    pub theta_at_sup: Option<f64>,
    pub covered_rays: usize,
    pub model_r: Option<f64>,
    pub rel_err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BubbleReport {
    pub delta: f64,
    pub rows: Vec<BubbleRow>,
    /// Shrinkage model `r_ε = M0 / ln(c/ε)`, fitted as `1/r_ε` linear in `ln ε`.
    pub model_m0: Option<f64>,
    pub model_c: Option<f64>,
    pub strictly_decreasing: bool,
    pub max_rel_err: Option<f64>,
}

impl BubbleReport {
    /// Decades of ε spanned by rows with a covered level.
    pub fn decades(&self) -> f64 {
        let eps: Vec<f64> = self.rows.iter().filter(|r| r.sup_r.is_some()).map(|r| r.epsilon).collect();
        match (eps.first(), eps.last()) {
            (Some(a), Some(b)) => (a / b).log10().abs(),
            _ => 0.0,
        }
    }

    pub fn consistent(&self, tolerance: f64) -> bool {
        self.strictly_decreasing && self.max_rel_err.is_some_and(|e| e <= tolerance)
    }
}

pub fn bubble_report(grid: &CharGrid, epsilons: &[f64], delta: f64) -> Result<BubbleReport> {
    if !(0.0..FRAC_PI_4).contains(&delta) {
        return Err(Error::Domain(format!("delta = {delta} must lie in [0, pi/4)")));
    }
    let s = RaySampler::new(grid);
    let rays: Vec<f64> = ray_angles(DEFAULT_RAYS)
        .into_iter()
        .filter(|t| *t >= delta && *t <= FRAC_PI_2 - delta)
        .collect();
    let curves = epsilons
        .par_iter()
        .map(|&e| level_curve_on(&s, e, &rays))
        .collect::<Result<Vec<_>>>()?;
    let mut rows: Vec<BubbleRow> = curves
        .iter()
        .map(|c| {
            let best = c.points.iter().copied().fold(None, |b: Option<(f64, f64)>, p| match b {
                Some(x) if x.1 >= p.1 => Some(x),
                _ => Some(p),
            });
            BubbleRow {
                epsilon: c.epsilon,
                sup_r: best.map(|b| b.1),
                theta_at_sup: best.map(|b| b.0),
                covered_rays: c.points.len(),
                model_r: None,
                rel_err: None,
            }
        })
        .collect();

    let covered: Vec<&BubbleRow> = rows.iter().filter(|r| r.sup_r.is_some()).collect();
    let strictly_decreasing = covered.len() >= 2 && covered.windows(2).all(|w| w[1].sup_r < w[0].sup_r);
    let pts: Vec<(f64, f64)> = covered.iter().map(|r| (r.epsilon.ln(), 1.0 / r.sup_r.unwrap())).collect();
    let (mut model_m0, mut model_c, mut max_rel_err) = (None, None, None);
    if pts.len() >= 2 {
        // 1/r = (ln c - ln ε)/M0
        let (slope, intercept, _) = linear_fit(&pts);
        let m0 = -1.0 / slope;
        let c = (intercept * m0).exp();
        model_m0 = Some(m0);
        model_c = Some(c);
        let mut worst = 0.0f64;
        for row in rows.iter_mut().filter(|r| r.sup_r.is_some()) {
            let model = m0 / (c / row.epsilon).ln();
            let err = (model - row.sup_r.unwrap()).abs() / row.sup_r.unwrap();
            row.model_r = Some(model);
            row.rel_err = Some(err);
            worst = worst.max(err);
        }
        max_rel_err = Some(worst);
    }
    Ok(BubbleReport {
        delta,
        rows,
        model_m0,
        model_c,
        strictly_decreasing,
        max_rel_err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{solve_interior, SolverConfig};
    use approx::assert_relative_eq;
    use std::f64::consts::SQRT_2;
    use std::sync::OnceLock;

    fn critical(n: usize) -> &'static CharGrid {
        static G: [OnceLock<CharGrid>; 2] = [OnceLock::new(), OnceLock::new()];
        let k = if n == 65 { 0 } else { 1 };
        G[k].get_or_init(|| solve_interior(&SolverConfig::with_seeds(n)).unwrap())
    }

    /// The solved geometry carrying a synthetic pressure `c·exp(-M0/r)`.
    fn synthetic(c: f64, m0: f64) -> CharGrid {
        let mut g = critical(65).clone();
        for nd in g.nodes.iter_mut().filter(|nd| nd.status.is_valid()) {
            nd.p = c * (-m0 / nd.r).exp();
        }
        g
    }

    #[test]
    fn fit_recovers_its_own_model() {
        let samples: Vec<(f64, f64)> = (0..40)
            .map(|k| 0.1 + 0.02 * k as f64)
            .map(|r| (r, 2.0 * (-3.0 / r).exp()))
            .collect();
        let f = fit_decay(&samples).unwrap();
        assert_relative_eq!(f.c, 2.0, max_relative = 1e-10);
        assert_relative_eq!(f.m0, 3.0, max_relative = 1e-10);
        assert!((f.r_squared - 1.0).abs() <= 1e-10);
        assert_eq!(f.n_points, 40);
    }

    #[test]
    fn fit_needs_eight_samples() {
        let samples: Vec<(f64, f64)> = (1..8).map(|k| (k as f64, 1.0 / k as f64)).collect();
        assert!(matches!(fit_decay(&samples), Err(Error::TooFewSamples { found: 7, needed: 8 })));
        let g = critical(65);
        assert!(matches!(
            decay_fit(g, FRAC_PI_4, FitWindow::Radii(0.01, 0.02)),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn ray_sampling_is_exact_for_the_decay_law_on_the_diagonal() {
        let g = synthetic(2.0, 3.0);
        let f = decay_fit(&g, FRAC_PI_4, FitWindow::Radii(0.12, 0.6)).unwrap();
        assert_relative_eq!(f.c, 2.0, max_relative = 1e-9);
        assert_relative_eq!(f.m0, 3.0, max_relative = 1e-9);
        assert_eq!(f.n_points, FIT_SAMPLES);
    }

    #[test]
    fn diagonal_decay_is_log_linear_in_the_deepest_decade() {
        let (a, b) = (
            decay_fit(critical(65), FRAC_PI_4, FitWindow::LowestDecade).unwrap(),
            decay_fit(critical(129), FRAC_PI_4, FitWindow::LowestDecade).unwrap(),
        );
        for f in [a, b] {
            assert!(f.m0 > 0.0 && f.r_squared >= 0.999, "{f:?}");
            assert!(f.n_points >= MIN_FIT_SAMPLES);
        }
        assert!((a.m0 - b.m0).abs() / b.m0 <= 0.05, "{} vs {}", a.m0, b.m0);
    }

    #[test]
    fn level_epsilon_is_validated() {
        for e in [0.0, 1.0, -1e-3, f64::NAN] {
            assert!(matches!(level_curve(critical(65), e), Err(Error::Domain(_))));
        }
    }

    #[test]
    fn level_points_sit_on_the_level() {
        let g = critical(65);
        let s = RaySampler::new(g);
        let c = level_curve_on(&s, 1e-3, &ray_angles(DEFAULT_RAYS)).unwrap();
        assert!(!c.points.is_empty() && c.uncovered_rays > 0);
        assert_eq!(c.points.len() + c.uncovered_rays, DEFAULT_RAYS);
        for &(t, r) in &c.points {
            assert_relative_eq!(s.p(r, t).unwrap(), 1e-3, max_relative = 1e-9);
        }
    }

    #[test]
    fn level_near_one_approaches_the_corner() {
        let c = level_curve(critical(65), 1.0 - 1e-6).unwrap();
        let r = c.r_at(FRAC_PI_4).unwrap();
        assert!((r - SQRT_2).abs() < 1e-5, "{r}");
        for &(t, _) in &c.points {
            assert!((t - FRAC_PI_4).abs() < 0.01);
        }
    }

    #[test]
    fn below_the_deepest_pressure_nothing_is_covered() {
        let c = level_curve(critical(65), 1e-14).unwrap();
        assert!(c.points.is_empty() && c.coverage.is_none());
        assert_eq!(c.uncovered_rays, DEFAULT_RAYS);
    }

    #[test]
    fn level_curves_are_nested_and_symmetric() {
        let s = RaySampler::new(critical(65));
        let rays = ray_angles(DEFAULT_RAYS);
        let curves: Vec<LevelCurve> = [1e-1, 1e-2, 1e-3, 1e-5]
            .iter()
            .map(|&e| level_curve_on(&s, e, &rays).unwrap())
            .collect();
        for w in curves.windows(2) {
            for &(t, r) in &w[1].points {
                let outer = w[0].r_at(t).expect("deeper level is covered by the shallower one");
                assert!(r < outer);
            }
        }
        for c in &curves {
            for &(t, r) in &c.points {
                // the mirrored ray has the mirrored index
                let k = rays.iter().position(|&x| x == t).unwrap();
                let mirror = rays[DEFAULT_RAYS - 1 - k];
                if let Some(rm) = c.r_at(mirror) {
                    assert!((r - rm).abs() / r < 1e-6, "eps {} at {t}: {r} vs {rm}", c.epsilon);
                }
            }
        }
    }

    #[test]
    fn ray_angles_are_symmetric() {
        let a = ray_angles(181);
        assert_eq!(a[90], FRAC_PI_4);
        for k in 0..181 {
            assert!((a[k] + a[180 - k] - FRAC_PI_2).abs() < 1e-15);
        }
    }

    #[test]
    fn minimum_pressure_is_positive_and_at_the_frontier() {
        let g = critical(65);
        let m = min_pressure(g);
        assert!(m.value > 0.0 && m.value >= g.config.p_floor);
        let r_min = g.valid_nodes().map(|(_, nd)| nd.r).fold(f64::INFINITY, f64::min);
        assert!(m.r <= r_min * (1.0 + 1e-12));
        assert_eq!((m.i, m.j), (g.n - 1, g.n - 1));
    }

    #[test]
    fn deeper_floor_lowers_the_minimum() {
        let at = |floor: f64| {
            let cfg = SolverConfig {
                p_floor: floor,
                ..SolverConfig::with_seeds(33)
            };
            min_pressure(&solve_interior(&cfg).unwrap()).value
        };
        assert!(at(1e-12) < at(1e-10));
    }

    #[test]
    fn synthetic_shrinkage_inverts_the_model() {
        let g = synthetic(1.0, 1.0);
        let eps = (-10.0f64).exp();
        let s = RaySampler::new(&g);
        assert_relative_eq!(s.crossing(FRAC_PI_4, eps.ln()).unwrap(), 0.1, max_relative = 1e-9);
        let rep = bubble_report(&g, &[(-4.0f64).exp(), (-7.0f64).exp(), eps], DEFAULT_DELTA).unwrap();
        let last = rep.rows[2];
        assert_relative_eq!(last.sup_r.unwrap(), 0.1, max_relative = 1e-3);
        assert_relative_eq!(rep.model_m0.unwrap(), 1.0, max_relative = 1e-2);
        assert!(rep.consistent(0.01));
    }

    #[test]
    fn solved_grid_shrinks_like_the_decay_law() {
        let eps: Vec<f64> = (2..=10).map(|k| 10f64.powi(-k)).collect();
        let rep = bubble_report(critical(65), &eps, DEFAULT_DELTA).unwrap();
        assert!(rep.strictly_decreasing);
        assert!(rep.decades() >= 3.0);
        assert!(rep.consistent(0.10), "{:?}", rep.max_rel_err);
        assert!(bubble_report(critical(65), &eps, FRAC_PI_4).is_err());
    }
}
