//! Standard normal distribution helpers.
//!
//! `Φ` is computed through `erfc` so that the lower tail keeps full relative
//! precision. `Φ⁻¹` starts from `erfc_inv` and is polished with Halley steps
//! against `Φ`, which brings the round trip to a few ulps.

use libm::erfc;
use statrs::function::erf::erfc_inv;
use std::f64::consts::{FRAC_1_SQRT_2, PI, SQRT_2};

/// ln(2π)
pub const LN_2PI: f64 = 1.837_877_066_409_345_3;

pub fn pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub fn cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// Inverse of [`cdf`]. Returns ±∞ at the endpoints and NaN outside [0, 1].
pub fn quantile(u: f64) -> f64 {
    if !(0.0..=1.0).contains(&u) {
        return f64::NAN;
    }
    if u == 0.0 {
        return f64::NEG_INFINITY;
    }
    if u == 1.0 {
        return f64::INFINITY;
    }
    let mut z = -SQRT_2 * erfc_inv(2.0 * u);
    for _ in 0..2 {
        let r = (cdf(z) - u) / pdf(z);
        if !r.is_finite() {
            break;
        }
        z -= r / (1.0 + 0.5 * z * r);
    }
    z
}

/// Two-sided critical value z_{1−α/2} for a confidence level such as 0.95.
pub fn two_sided_critical(level: f64) -> f64 {
    quantile(0.5 + 0.5 * level)
}
