//! Special functions of circle patterns.
//!
//! `f_θ(x)` is the half-angle at a circle center of the kite spanned by two
//! circles with log-radius difference `x` and intersection angle `θ`. Everything
//! else here (derivative, inverse, antiderivative, complex extension, hyperbolic
//! angle functions, boundary potentials) is built on top of it.

pub mod dilog;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

pub use dilog::li2;

/// Distance from the slit set below which `f_theta_complex` refuses to evaluate.
pub const BRANCH_CUT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("point x={x}, beta={beta} lies on the branch cut for theta={theta}")]
    BranchCut { theta: f64, x: f64, beta: f64 },
}

pub type KernelResult<T> = Result<T, KernelError>;

fn check_theta(theta: f64) -> KernelResult<()> {
    if theta > 0.0 && theta < PI {
        Ok(())
    } else {
        Err(KernelError::Domain(format!("intersection angle {theta} not in (0, pi)")))
    }
}

/// Unchecked `f_θ(x)`. Evaluated on the non-positive half-line and reflected so
/// that `exp` never overflows.
#[inline]
pub(crate) fn f_raw(theta: f64, x: f64) -> f64 {
    if x > 0.0 {
        PI - theta - f_raw(theta, -x)
    } else {
        let ex = x.exp();
        (ex * theta.sin()).atan2(1.0 - ex * theta.cos())
    }
}

/// Unchecked `f'_θ(x)`.
#[inline]
pub(crate) fn fp_raw(theta: f64, x: f64) -> f64 {
    theta.sin() / (2.0 * (x.cosh() - theta.cos()))
}

/// Unchecked `F_θ(x) = Im Li2(e^{x+iθ})`.
pub(crate) fn big_f_raw(theta: f64, x: f64) -> f64 {
    if x > 0.0 {
        // Integrate the functional equation f(x) + f(-x) = π - θ.
        (PI - theta) * x + big_f_raw(theta, -x)
    } else {
        li2(Complex64::from_polar(x.exp(), theta)).im
    }
}

/// Kite half-angle `f_θ(x)`, in `(0, π-θ)`.
pub fn f_theta(theta: f64, x: f64) -> KernelResult<f64> {
    check_theta(theta)?;
    if !x.is_finite() {
        return Err(KernelError::Domain(format!("non-finite argument {x}")));
    }
    Ok(f_raw(theta, x))
}

/// `f'_θ(x) = sin θ / (2(cosh x - cos θ))`.
pub fn f_theta_prime(theta: f64, x: f64) -> KernelResult<f64> {
    check_theta(theta)?;
    Ok(fp_raw(theta, x))
}

/// Inverse of `f_θ` on `(0, π-θ)`.
pub fn f_theta_inv(theta: f64, y: f64) -> KernelResult<f64> {
    check_theta(theta)?;
    if !(y > 0.0 && y < PI - theta) {
        return Err(KernelError::Domain(format!("{y} not in (0, pi - theta)")));
    }
    Ok((y.sin() / (y + theta).sin()).ln())
}

/// Antiderivative `F_θ(x) = ∫_{-∞}^x f_θ = Im Li2(e^{x+iθ})`.
pub fn big_f_theta(theta: f64, x: f64) -> KernelResult<f64> {
    check_theta(theta)?;
    Ok(big_f_raw(theta, x))
}

/// Continuation of `f_θ` to `x + iβ`, `β ∈ (-π, π)`, on the slit strip
/// `ℝ × (-π, π)` minus the vertical slits from `±iθ` to `±iπ`.
///
/// The branch is pinned by requiring the real part to lie in `(-θ/2, π - θ/2)`.
pub fn f_theta_complex(theta: f64, x: f64, beta: f64) -> KernelResult<Complex64> {
    check_theta(theta)?;
    if !(beta > -PI && beta < PI) || !x.is_finite() {
        return Err(KernelError::Domain(format!("beta {beta} not in (-pi, pi)")));
    }
    if x.abs() < BRANCH_CUT_TOL && beta.abs() >= theta - BRANCH_CUT_TOL {
        return Err(KernelError::BranchCut { theta, x, beta });
    }
    Ok(f_complex_raw(theta, x, beta))
}

pub(crate) fn f_complex_raw(theta: f64, x: f64, beta: f64) -> Complex64 {
    if x > 0.0 {
        return Complex64::new(PI - theta, 0.0) - f_complex_raw(theta, -x, -beta);
    }
    let one = Complex64::new(1.0, 0.0);
    let a = one - Complex64::from_polar(x.exp(), beta - theta);
    let b = one - Complex64::from_polar(x.exp(), beta + theta);
    let mut re = 0.5 * (a.arg() - b.arg());
    let shift = ((re + 0.5 * theta) / PI).floor();
    re -= shift * PI;
    let im = -0.5 * (a.norm().ln() - b.norm().ln());
    Complex64::new(re, im)
}

/// Angle at the center of circle 0 in the hyperbolic triangle formed by two
/// intersecting circles with log-tanh radii `rho0, rho1 < 0`.
pub fn phi_hyp(theta: f64, rho0: f64, rho1: f64) -> KernelResult<f64> {
    check_theta(theta)?;
    if !(rho0 < 0.0 && rho1 < 0.0) {
        return Err(KernelError::Domain(format!("rho ({rho0}, {rho1}) must be negative")));
    }
    Ok(f_raw(theta, rho1 - rho0) - f_raw(theta, rho1 + rho0))
}

/// Generalized angle for a disc circle (`rho < 0`) meeting a circle that crosses
/// the unit circle at exterior angle `beta`: `f_θ(iβ-ρ) - f_θ(iβ+ρ)`.
pub fn phi_gen(theta: f64, rho: f64, beta: f64) -> KernelResult<f64> {
    check_theta(theta)?;
    if !(rho < 0.0) || !(0.0..PI).contains(&beta) {
        return Err(KernelError::Domain(format!("phi_gen needs rho < 0 and beta in [0, pi), got ({rho}, {beta})")));
    }
    Ok(phi_gen_raw(theta, rho, beta))
}

#[inline]
pub(crate) fn phi_gen_raw(theta: f64, rho: f64, beta: f64) -> f64 {
    (f_complex_raw(theta, -rho, beta) - f_complex_raw(theta, rho, beta)).re
}

/// Same quantity from `(1/2i) log((cos β - cosh(ρ+iθ)) / (cos β - cosh(ρ-iθ)))`.
pub fn phi_gen_log_form(theta: f64, rho: f64, beta: f64) -> KernelResult<f64> {
    check_theta(theta)?;
    if !(rho < 0.0) {
        return Err(KernelError::Domain(format!("rho {rho} must be negative")));
    }
    // The ratio has modulus one; its half-argument is arg N taken in (0, π).
    let n_im = -rho.sinh() * theta.sin();
    let n_re = beta.cos() - rho.cosh() * theta.cos();
    Ok(n_im.atan2(n_re))
}

/// Boundary potential `F_{β,θ}(x)`, even in `x`.
///
/// For `x <= 0` this is `2∫_{-∞}^x (f_θ(η+iβ) + f_θ(η-iβ)) dη - 2(π-θ)x`; the
/// integral only runs over `η < 0`, where the dilogarithm form has no branch
/// ambiguity for any `β ∈ [0, π)`.
pub fn big_f_beta_theta(beta: f64, theta: f64, x: f64) -> KernelResult<f64> {
    check_theta(theta)?;
    if !(0.0..PI).contains(&beta) {
        return Err(KernelError::Domain(format!("beta {beta} not in [0, pi)")));
    }
    if (beta - theta).abs() < BRANCH_CUT_TOL && x.abs() < BRANCH_CUT_TOL {
        return Err(KernelError::BranchCut { theta, x, beta });
    }
    Ok(big_f_beta_theta_raw(beta, theta, x))
}

pub(crate) fn big_f_beta_theta_raw(beta: f64, theta: f64, x: f64) -> f64 {
    let x = -x.abs();
    let e = |im: f64| li2(Complex64::from_polar(x.exp(), im));
    let s = e(beta + theta) - e(beta - theta) + e(-beta + theta) - e(-beta - theta);
    s.im - 2.0 * (PI - theta) * x
}

/// The same potential written as eight dilogarithms evaluated on both sides of
/// the origin. On the principal sheet this agrees with [`big_f_beta_theta`]
/// only for `β < θ`; for `β > θ` the rays from `x` to `-x` cross the slit.
pub fn big_f_beta_theta_eight_term(beta: f64, theta: f64, x: f64) -> KernelResult<f64> {
    check_theta(theta)?;
    if !(0.0..theta).contains(&beta) {
        return Err(KernelError::BranchCut { theta, x, beta });
    }
    let x = -x.abs();
    let e = |re: f64, im: f64| li2(Complex64::from_polar(re.exp(), im));
    let s = e(x, beta + theta) - e(x, beta - theta) - e(-x, beta - theta) + e(-x, beta + theta) + e(x, -beta + theta)
        - e(x, -beta - theta)
        - e(-x, -beta - theta)
        + e(-x, -beta + theta);
    // (1/2i) s
    Ok(0.5 * s.im)
}

/// Closed form of `∂²F_{β,θ}/∂x²`.
pub fn big_f_beta_theta_second(beta: f64, theta: f64, x: f64) -> f64 {
    let a = x.cosh() * beta.cos() - theta.cos();
    let b = x.sinh() * beta.sin();
    2.0 * theta.sin() * a / (a * a + b * b)
}

/// Geometry of the kite spanned by two intersecting circles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KiteGeometry {
    pub theta: f64,
    pub r0: f64,
    pub r1: f64,
    /// Distance between the two centers (white diagonal).
    pub l: f64,
    /// Distance between the two intersection points (black diagonal).
    pub h: f64,
    pub half_angle0: f64,
    pub half_angle1: f64,
    pub convex: bool,
}

impl KiteGeometry {
    /// `H/L`, the conductance of the edge.
    pub fn diagonal_ratio(&self) -> f64 {
        self.h / self.l
    }
}

/// The angle between the two radii at an intersection point equals `θ`, hence
/// `L² = r0² + r1² - 2 r0 r1 cos θ` and `H L = 2 r0 r1 sin θ`.
pub fn kite(theta: f64, r0: f64, r1: f64) -> KernelResult<KiteGeometry> {
    check_theta(theta)?;
    if !(r0 > 0.0 && r1 > 0.0 && r0.is_finite() && r1.is_finite()) {
        return Err(KernelError::Domain(format!("radii ({r0}, {r1}) must be positive")));
    }
    Ok(kite_raw(theta, r0, r1))
}

pub(crate) fn kite_raw(theta: f64, r0: f64, r1: f64) -> KiteGeometry {
    let x = r1.ln() - r0.ln();
    let l = (r0 * r0 + r1 * r1 - 2.0 * r0 * r1 * theta.cos()).max(0.0).sqrt();
    let h = 2.0 * r0 * r1 * theta.sin() / l;
    let c = theta.cos();
    KiteGeometry {
        theta,
        r0,
        r1,
        l,
        h,
        half_angle0: f_raw(theta, x),
        half_angle1: f_raw(theta, -x),
        convex: r1 / r0 >= c && r0 / r1 >= c,
    }
}
