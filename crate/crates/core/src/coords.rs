//! Self-similar polar coordinates and the pointwise coefficients of the
//! characteristic decomposition.
//!
//! All coefficients are only defined in the strictly hyperbolic regime
//! `0 < p < r²`. Outside of it the functions return a [`Degeneracy`] instead
//! of a clamped value, so callers can tell a vacuum stop from a sonic stop.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Degeneracy, Error};

/// Pressures at or below this value are treated as vacuum.
pub const DEFAULT_P_FLOOR: f64 = 1e-14;
/// Values of `r² - p` at or below this are treated as sonic.
pub const DEFAULT_SONIC_FLOOR: f64 = 1e-12;

/// A point of the first quadrant in self-similar polar coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarPoint {
    pub r: f64,
    pub theta: f64,
}

impl PolarPoint {
    pub fn new(r: f64, theta: f64) -> Self {
        Self { r, theta }
    }

    /// Cartesian self-similar coordinates `(xi, eta)`.
    pub fn to_cartesian(self) -> (f64, f64) {
        (self.r * self.theta.cos(), self.r * self.theta.sin())
    }
}

/// Family of a characteristic curve: `dr/dθ = +1/λ` (plus) or `-1/λ` (minus).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Plus,
    Minus,
}

impl Family {
    pub fn sign(self) -> f64 {
        match self {
            Family::Plus => 1.0,
            Family::Minus => -1.0,
        }
    }
}

/// Slopes of a characteristic in both parametrizations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharSlope {
    pub dr_dtheta: f64,
    pub dtheta_dr: f64,
}

/// The coefficients `λ`, `q` and `m` at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficients {
    pub lambda: f64,
    pub q: f64,
    pub m: f64,
}

/// Thresholds deciding when a state counts as degenerate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Guard {
    pub p_floor: f64,
    pub sonic_floor: f64,
}

impl Default for Guard {
    fn default() -> Self {
        Self {
            p_floor: DEFAULT_P_FLOOR,
            sonic_floor: DEFAULT_SONIC_FLOOR,
        }
    }
}

impl Guard {
    pub fn check(&self, r: f64, p: f64) -> Result<(), Degeneracy> {
        if !(p > self.p_floor) {
            return Err(Degeneracy::Vacuum { r, p });
        }
        if !(r * r - p > self.sonic_floor) {
            return Err(Degeneracy::Sonic { r, p });
        }
        Ok(())
    }
}

pub fn cartesian_to_polar(xi: f64, eta: f64) -> Result<PolarPoint, Error> {
    if xi < 0.0 || eta < 0.0 || !xi.is_finite() || !eta.is_finite() {
        return Err(Error::Domain(format!(
            "({xi}, {eta}) lies outside the first quadrant"
        )));
    }
    let r = xi.hypot(eta);
    if r == 0.0 {
        return Err(Error::Domain("angle undefined at the origin".into()));
    }
    let theta = eta.atan2(xi).clamp(0.0, FRAC_PI_2);
    Ok(PolarPoint { r, theta })
}

// Unchecked kernels. Callers guarantee 0 < p < r².

#[inline]
pub(crate) fn lambda_raw(r: f64, p: f64) -> f64 {
    (p / (r * r * (r * r - p))).sqrt()
}

#[inline]
pub(crate) fn q_raw(r: f64, p: f64) -> f64 {
    let r2 = r * r;
    r2 / (4.0 * p * (r2 - p))
}

#[inline]
pub(crate) fn m_raw(r: f64, p: f64) -> f64 {
    let r2 = r * r;
    lambda_raw(r, p) * r2 * r2 / (2.0 * p * p)
}

/// Characteristic slope magnitude `λ = sqrt(p / (r² (r² - p)))`, i.e. `|dθ/dr|`.
pub fn lambda(r: f64, p: f64) -> Result<f64, Degeneracy> {
    lambda_guarded(r, p, &Guard::default())
}

pub fn lambda_guarded(r: f64, p: f64, guard: &Guard) -> Result<f64, Degeneracy> {
    guard.check(r, p)?;
    Ok(lambda_raw(r, p))
}

/// Interaction coefficient `q = r² / (4p (r² - p))`.
pub fn q_coeff(r: f64, p: f64) -> Result<f64, Degeneracy> {
    Guard::default().check(r, p)?;
    Ok(q_raw(r, p))
}

/// Decomposition coefficient `m = λ r⁴ / (2p²)`.
pub fn m_coeff(r: f64, p: f64) -> Result<f64, Degeneracy> {
    Guard::default().check(r, p)?;
    Ok(m_raw(r, p))
}

pub fn coefficients(r: f64, p: f64) -> Result<Coefficients, Degeneracy> {
    Guard::default().check(r, p)?;
    Ok(Coefficients {
        lambda: lambda_raw(r, p),
        q: q_raw(r, p),
        m: m_raw(r, p),
    })
}

/// Slope of the characteristic of `family` through `(r, p)`.
pub fn char_slope(r: f64, p: f64, family: Family) -> Result<CharSlope, Degeneracy> {
    let l = lambda(r, p)?;
    let s = family.sign();
    Ok(CharSlope {
        dr_dtheta: s / l,
        dtheta_dr: s * l,
    })
}

/// Radial derivative recovered from the two directional derivatives,
/// `p_r = λ (∂₊p - ∂₋p) / 2`.
#[inline]
pub fn radial_derivative(lambda: f64, dp_plus: f64, dp_minus: f64) -> f64 {
    0.5 * lambda * (dp_plus - dp_minus)
}

/// Angular derivative `p_θ = (∂₊p + ∂₋p) / 2`.
#[inline]
pub fn angular_derivative(dp_plus: f64, dp_minus: f64) -> f64 {
    0.5 * (dp_plus + dp_minus)
}

/// Right sides of the decomposition written with `m` and `p_r`:
/// `(∂₊∂₋p, ∂₋∂₊p) = (m p_r ∂₋p, -m p_r ∂₊p)`.
pub fn decomposition_rhs_m(r: f64, p: f64, dp_plus: f64, dp_minus: f64) -> (f64, f64) {
    let pr = radial_derivative(lambda_raw(r, p), dp_plus, dp_minus);
    let m = m_raw(r, p);
    (m * pr * dp_minus, -m * pr * dp_plus)
}

/// Right sides of the decomposition written with `q`:
/// `(q ∂₊p ∂₋p - q (∂₋p)², q ∂₊p ∂₋p - q (∂₊p)²)`.
pub fn decomposition_rhs_q(r: f64, p: f64, dp_plus: f64, dp_minus: f64) -> (f64, f64) {
    let q = q_raw(r, p);
    (
        q * dp_minus * (dp_plus - dp_minus),
        q * dp_plus * (dp_minus - dp_plus),
    )
}
