//! Goursat data on the two circular-arc characteristics at unit scale.
//!
//! The lower arc `r = 2 sinθ`, `θ ∈ [0, π/4]`, carries `p = η² = 4 sin⁴θ` and is
//! a plus characteristic. The upper arc `r = 2 cosθ`, `θ ∈ [π/4, π/2]`, carries
//! `p = ξ² = 4 cos⁴θ` and is a minus characteristic. They meet at the corner
//! `(√2, π/4)` where `p = 1`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, SQRT_2};

use crate::error::{Error, Result};
use crate::solver::{CharGrid, StateNode};

/// Relative slack used when classifying points that sit exactly on a data circle.
const CIRCLE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arc {
    Lower,
    Upper,
}

/// A point on one of the data arcs with its exact Goursat data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArcSample {
    pub which: Arc,
    pub theta: f64,
    pub r: f64,
    pub p: f64,
    /// `dp/dθ` along the arc; equals `∂₊p` on the lower arc and `∂₋p` on the upper one.
    pub tangential_dp: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerState {
    pub r: f64,
    pub theta: f64,
    pub p: f64,
    pub dp_plus: f64,
    pub dp_minus: f64,
}

fn check_range(theta: f64, lo: f64, hi: f64, name: &str) -> Result<()> {
    if theta.is_finite() && theta >= lo && theta <= hi {
        Ok(())
    } else {
        Err(Error::Range(format!(
            "{name} arc angle {theta} outside [{lo}, {hi}]"
        )))
    }
}

pub fn lower_arc(theta: f64) -> Result<ArcSample> {
    check_range(theta, 0.0, FRAC_PI_4, "lower")?;
    let (s, c) = theta.sin_cos();
    Ok(ArcSample {
        which: Arc::Lower,
        theta,
        r: 2.0 * s,
        p: 4.0 * s.powi(4),
        tangential_dp: 16.0 * s.powi(3) * c,
    })
}

pub fn upper_arc(theta: f64) -> Result<ArcSample> {
    check_range(theta, FRAC_PI_4, FRAC_PI_2, "upper")?;
    let (s, c) = theta.sin_cos();
    Ok(ArcSample {
        which: Arc::Upper,
        theta,
        r: 2.0 * c,
        p: 4.0 * c.powi(4),
        tangential_dp: -16.0 * c.powi(3) * s,
    })
}

/// `∂₋p` on the lower arc.
///
/// Along the plus characteristic `r = 2 sinθ` the first decomposition equation
/// is a Bernoulli ODE for `w = ∂₋p`:
/// `dw/dθ = w / (sinθ cosθ) - w² / (16 sin⁴θ cos²θ)`, with `w(π/4) = -4`.
/// Its solution is
/// `w = tanθ / (-1/4 + (ln tanθ - cos2θ / sin²2θ) / 8)`.
pub fn lower_arc_transverse_dp(theta: f64) -> Result<f64> {
    check_range(theta, 0.0, FRAC_PI_4, "lower")?;
    if theta == 0.0 {
        return Ok(0.0);
    }
    let t = theta.tan();
    let (s2, c2) = (2.0 * theta).sin_cos();
    let denom = -0.25 + (t.ln() - c2 / (s2 * s2)) / 8.0;
    Ok(t / denom)
}

/// `∂₊p` on the upper arc, the mirror image of [`lower_arc_transverse_dp`].
pub fn upper_arc_transverse_dp(theta: f64) -> Result<f64> {
    check_range(theta, FRAC_PI_4, FRAC_PI_2, "upper")?;
    Ok(-lower_arc_transverse_dp(FRAC_PI_2 - theta)?)
}

pub fn corner_state() -> CornerState {
    CornerState {
        r: SQRT_2,
        theta: FRAC_PI_4,
        p: 1.0,
        dp_plus: 4.0,
        dp_minus: -4.0,
    }
}

fn rescale_node(node: &StateNode, sqrt_p1: f64, p1: f64) -> StateNode {
    StateNode {
        r: node.r * sqrt_p1,
        p: node.p * p1,
        dp_plus: node.dp_plus * p1,
        dp_minus: node.dp_minus * p1,
        ..*node
    }
}

/// Arc sample under the same scaling as [`rescale`].
pub fn rescale_seed(seed: &ArcSample, sqrt_p1: f64, p1: f64) -> ArcSample {
    ArcSample {
        r: seed.r * sqrt_p1,
        p: seed.p * p1,
        tangential_dp: seed.tangential_dp * p1,
        ..*seed
    }
}

/// Apply the scaling symmetry `(r, θ, p, ∂₊p, ∂₋p) -> (r√p1, θ, p·p1, ∂₊p·p1, ∂₋p·p1)`.
///
/// `∂±` carry no radial weight on their `∂θ` part and `1/λ` scales like `r`,
/// so both directional derivatives scale like `p`.
pub fn rescale(grid: &CharGrid, p1: f64) -> Result<CharGrid> {
    if !(p1 > 0.0 && p1.is_finite()) {
        return Err(Error::Domain(format!("scale factor p1 = {p1} must be positive")));
    }
    let sqrt_p1 = p1.sqrt();
    let mut out = grid.clone();
    for node in out.nodes.iter_mut() {
        *node = rescale_node(node, sqrt_p1, p1);
    }
    for seed in out.seeds_lower.iter_mut().chain(out.seeds_upper.iter_mut()) {
        *seed = rescale_seed(seed, sqrt_p1, p1);
    }
    out.scale *= p1;
    Ok(out)
}

/// Region of the first quadrant in the composite (unit scale) picture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    /// `ξ ≥ 1, η ≥ 1`: the undisturbed state `p = 1`.
    ConstantState,
    /// Plane rarefaction `p = ξ²` outside the circle `(ξ-1)² + η² = 1`, `ξ < 1`.
    RarefactionXi,
    /// Plane rarefaction `p = η²` outside the circle `ξ² + (η-1)² = 1`, `η < 1`.
    RarefactionEta,
    /// Inside both circles; covered by the characteristic solve.
    Interaction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExteriorValue {
    Pressure { region: Region, p: f64 },
    Interaction,
}

impl ExteriorValue {
    pub fn pressure(&self) -> Option<f64> {
        match self {
            ExteriorValue::Pressure { p, .. } => Some(*p),
            ExteriorValue::Interaction => None,
        }
    }
}

/// Note stored with composite plots: the lateral extent of the plane waves is
/// a drawing convention.
pub const EXTERIOR_REGION_NOTE: &str = "plane rarefactions are drawn between their data circle and the \
lines xi = 1 (p = xi^2) and eta = 1 (p = eta^2); lateral extents are a plotting convention";

/// Pressure outside the interaction zone, with `p1 = 1`.
pub fn exterior_field(xi: f64, eta: f64) -> Result<ExteriorValue> {
    if !(xi >= 0.0 && eta >= 0.0) {
        return Err(Error::Domain(format!("({xi}, {eta}) outside the first quadrant")));
    }
    let r2 = xi * xi + eta * eta;
    let outside_upper = r2 >= 2.0 * xi * (1.0 - CIRCLE_SLACK);
    let outside_lower = r2 >= 2.0 * eta * (1.0 - CIRCLE_SLACK);
    if !outside_upper && !outside_lower {
        return Ok(ExteriorValue::Interaction);
    }
    let (region, p) = if xi >= 1.0 && eta >= 1.0 {
        (Region::ConstantState, 1.0)
    } else if xi < 1.0 && outside_upper {
        (Region::RarefactionXi, xi * xi)
    } else {
        (Region::RarefactionEta, eta * eta)
    };
    Ok(ExteriorValue::Pressure { region, p })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coords::{lambda, Family};
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_3, FRAC_PI_6};

    #[test]
    fn lower_arc_examples() {
        let a = lower_arc(FRAC_PI_4).unwrap();
        assert_relative_eq!(a.r, SQRT_2, epsilon = 1e-15);
        assert_relative_eq!(a.p, 1.0, epsilon = 1e-15);
        assert_relative_eq!(a.tangential_dp, 4.0, epsilon = 1e-14);

        let a = lower_arc(FRAC_PI_6).unwrap();
        assert_relative_eq!(a.r, 1.0, epsilon = 1e-15);
        assert_relative_eq!(a.p, 0.25, epsilon = 1e-15);
        assert_relative_eq!(a.tangential_dp, 3f64.sqrt(), epsilon = 1e-14);

        let a = lower_arc(0.0).unwrap();
        assert_eq!((a.r, a.p, a.tangential_dp), (0.0, 0.0, 0.0));
    }

    #[test]
    fn upper_arc_examples() {
        let a = upper_arc(FRAC_PI_4).unwrap();
        assert_relative_eq!(a.r, SQRT_2, epsilon = 1e-15);
        assert_relative_eq!(a.p, 1.0, epsilon = 1e-15);
        assert_relative_eq!(a.tangential_dp, -4.0, epsilon = 1e-14);

        let a = upper_arc(FRAC_PI_3).unwrap();
        assert_relative_eq!(a.r, 1.0, epsilon = 1e-15);
        assert_relative_eq!(a.p, 0.25, epsilon = 1e-15);
        assert_relative_eq!(a.tangential_dp, -3f64.sqrt(), epsilon = 1e-14);

        let a = upper_arc(FRAC_PI_2).unwrap();
        assert!(a.r.abs() < 1e-15 && a.p.abs() < 1e-60 && a.tangential_dp.abs() < 1e-45);
    }

    #[test]
    fn arcs_reject_out_of_range_angles() {
        assert!(matches!(lower_arc(-0.01), Err(Error::Range(_))));
        assert!(matches!(lower_arc(FRAC_PI_4 + 1e-9), Err(Error::Range(_))));
        assert!(matches!(upper_arc(FRAC_PI_4 - 1e-9), Err(Error::Range(_))));
        assert!(matches!(upper_arc(f64::NAN), Err(Error::Range(_))));
    }

    #[test]
    fn corner_matches_both_arcs() {
        let c = corner_state();
        let (lo, up) = (lower_arc(FRAC_PI_4).unwrap(), upper_arc(FRAC_PI_4).unwrap());
        assert_eq!(c.r, SQRT_2);
        assert_eq!(c.p, 1.0);
        assert_relative_eq!(c.dp_plus, lo.tangential_dp, epsilon = 1e-14);
        assert_relative_eq!(c.dp_minus, up.tangential_dp, epsilon = 1e-14);
        assert_eq!(c.dp_plus, -c.dp_minus);
        assert_relative_eq!(lower_arc_transverse_dp(FRAC_PI_4).unwrap(), -4.0, epsilon = 1e-14);
    }

    #[test]
    fn arcs_are_characteristics() {
        for k in 1..200 {
            let t = FRAC_PI_4 * k as f64 / 200.0;
            let lo = lower_arc(t).unwrap();
            let dr = 2.0 * t.cos();
            assert_relative_eq!(dr, 1.0 / lambda(lo.r, lo.p).unwrap(), max_relative = 1e-12);

            let tu = FRAC_PI_4 + t;
            let up = upper_arc(tu).unwrap();
            let dr = -2.0 * tu.sin();
            let l = lambda(up.r, up.p).unwrap();
            assert_relative_eq!(dr, Family::Minus.sign() / l, max_relative = 1e-12);
            assert_relative_eq!(l, 1.0 / (2.0 * tu.sin()), max_relative = 1e-12);
        }
    }

    #[test]
    fn arc_symmetry_and_hyperbolicity() {
        for k in 1..100 {
            let t = FRAC_PI_4 * k as f64 / 100.0;
            let lo = lower_arc(t).unwrap();
            let up = upper_arc(FRAC_PI_2 - t).unwrap();
            assert_relative_eq!(lo.r, up.r, max_relative = 1e-14);
            assert_relative_eq!(lo.p, up.p, max_relative = 1e-13);
            assert_relative_eq!(lo.tangential_dp, -up.tangential_dp, max_relative = 1e-13);
            assert!(lo.p < lo.r * lo.r);
            assert_relative_eq!(lo.p / (lo.r * lo.r), t.sin().powi(2), max_relative = 1e-14);
        }
    }

    // RK4 integration of dw/dθ = q ∂₊p w - q w² along the lower arc from the
    // corner, written out independently of the closed form.
    fn transverse_by_rk4(theta_end: f64, steps: usize) -> f64 {
        let rhs = |t: f64, w: f64| {
            let (s, c) = t.sin_cos();
            let (r, p, a) = (2.0 * s, 4.0 * s.powi(4), 16.0 * s.powi(3) * c);
            let q = r * r / (4.0 * p * (r * r - p));
            q * a * w - q * w * w
        };
        let h = (theta_end - FRAC_PI_4) / steps as f64;
        let (mut t, mut w) = (FRAC_PI_4, -4.0);
        for _ in 0..steps {
            let k1 = rhs(t, w);
            let k2 = rhs(t + 0.5 * h, w + 0.5 * h * k1);
            let k3 = rhs(t + 0.5 * h, w + 0.5 * h * k2);
            let k4 = rhs(t + h, w + h * k3);
            w += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += h;
        }
        w
    }

    #[test]
    fn transverse_derivative_matches_ode_oracle() {
        for &t in &[0.7, 0.5, 0.3, 0.15, 0.05] {
            let oracle = transverse_by_rk4(t, 20_000);
            let closed = lower_arc_transverse_dp(t).unwrap();
            assert!(closed < 0.0);
            assert_relative_eq!(closed, oracle, max_relative = 1e-9);
        }
        // w ~ -32 θ³ towards the axis.
        let t = 1e-3;
        assert_relative_eq!(lower_arc_transverse_dp(t).unwrap(), -32.0 * t.powi(3), max_relative = 1e-3);
        assert_relative_eq!(
            upper_arc_transverse_dp(FRAC_PI_2 - 0.3).unwrap(),
            -lower_arc_transverse_dp(0.3).unwrap(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn exterior_field_regions() {
        let far = exterior_field(3.0, 2.5).unwrap();
        assert_eq!(far, ExteriorValue::Pressure { region: Region::ConstantState, p: 1.0 });

        for k in 1..20 {
            let phi = std::f64::consts::PI * (0.5 + 0.5 * k as f64 / 20.0);
            let (xi, eta) = (1.0 + phi.cos(), phi.sin());
            let v = exterior_field(xi, eta).unwrap();
            assert_eq!(v.pressure(), Some(xi * xi), "on the circle at ({xi}, {eta})");
            let v = exterior_field(eta, xi).unwrap();
            assert_eq!(v.pressure(), Some(xi * xi));
        }

        assert_eq!(exterior_field(1.0, 1.0).unwrap().pressure(), Some(1.0));
        assert_eq!(exterior_field(0.5, 0.5).unwrap(), ExteriorValue::Interaction);
        assert_eq!(exterior_field(0.5, 3.0).unwrap().pressure(), Some(0.25));
        assert_eq!(exterior_field(3.0, 0.2).unwrap().pressure(), Some(0.2 * 0.2));
        assert!(exterior_field(-1.0, 0.2).is_err());
    }
}
