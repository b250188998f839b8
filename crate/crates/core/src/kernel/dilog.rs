//! Complex dilogarithm `Li2(z) = -∫_0^z log(1-t)/t dt` on the principal sheet.

use num_complex::Complex64;
use std::f64::consts::PI;

const PI2_6: f64 = PI * PI / 6.0;

/// Bernoulli numbers B_{2k} for k = 1..=20 (B_1 = -1/2 is handled separately).
const BERNOULLI_EVEN: [f64; 20] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
    -236364091.0 / 2730.0,
    8553103.0 / 6.0,
    -23749461029.0 / 870.0,
    8615841276005.0 / 14322.0,
    -7709321041217.0 / 510.0,
    2577687858367.0 / 6.0,
    -26315271553053477373.0 / 1919190.0,
    2929993913841559.0 / 6.0,
    -261082718496449122051.0 / 13530.0,
];

/// Principal branch of the dilogarithm (cut along `[1, ∞)`).
pub fn li2(z: Complex64) -> Complex64 {
    if z.re == 0.0 && z.im == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    if (z - 1.0).norm() == 0.0 {
        return Complex64::new(PI2_6, 0.0);
    }
    let r = z.norm();
    if r <= 0.5 {
        return power_series(z);
    }
    if r > 1.0 {
        // Li2(z) + Li2(1/z) = -π²/6 - ½ log²(-z)
        let l = (-z).ln();
        return -PI2_6 - 0.5 * l * l - li2_unit(z.inv());
    }
    li2_unit(z)
}

/// `|z| <= 1`, `z != 1`.
fn li2_unit(z: Complex64) -> Complex64 {
    if z.norm() <= 0.5 {
        return power_series(z);
    }
    if z.re > 0.5 {
        // Li2(z) + Li2(1-z) = π²/6 - log z log(1-z)
        let w = Complex64::new(1.0, 0.0) - z;
        if w.norm() == 0.0 {
            return Complex64::new(PI2_6, 0.0);
        }
        return PI2_6 - z.ln() * w.ln() - bernoulli_series(w);
    }
    bernoulli_series(z)
}

fn power_series(z: Complex64) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut p = z;
    for k in 1..200 {
        let kf = k as f64;
        let term = p / (kf * kf);
        sum += term;
        if term.norm() < 1e-17 * sum.norm().max(1e-300) {
            break;
        }
        p *= z;
    }
    sum
}

/// Series in `u = -log(1-z)`; valid for `|u| < 2π`, used for `|z| <= 1, Re z <= 1/2`.
fn bernoulli_series(z: Complex64) -> Complex64 {
    let u = -(Complex64::new(1.0, 0.0) - z).ln();
    let u2 = u * u;
    // u - u²/4 + Σ_{k>=1} B_{2k} u^{2k+1} / (2k+1)!
    let mut sum = u - u2 / 4.0;
    let mut upow = u; // u^{2k+1} / (2k+1)!
    for (k, b) in BERNOULLI_EVEN.iter().enumerate() {
        let n = 2 * (k + 1) + 1;
        upow = upow * u2 / ((n - 1) as f64 * n as f64);
        let term = upow * *b;
        sum += term;
        if term.norm() < 1e-17 * sum.norm() {
            break;
        }
    }
    sum
}
