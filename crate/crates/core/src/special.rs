//! Gamma-family scalar functions.
//!
//! `gamma` uses a Lanczos approximation (g = 10.900511, Pugh's 11-term
//! coefficient set) with the reflection formula below 0.5. `rgamma` is the
//! entire reciprocal and returns exactly zero at the poles of `gamma`; the
//! symbolic power rule relies on that to annihilate terms.

use std::f64::consts::{E, PI};

use crate::error::{Error, Result};

/// Distance below which `gamma` reports a pole.
pub const GAMMA_POLE_TOL: f64 = 1e-12;

/// Distance below which `rgamma` returns exactly zero.
pub const RGAMMA_POLE_TOL: f64 = 1e-9;

const TWO_SQRT_E_OVER_PI: f64 = 1.860_382_734_205_265_7;

const LANCZOS_R: f64 = 10.900511;

const LANCZOS_DK: [f64; 11] = [
    2.485_740_891_387_535_5e-5,
    1.051_423_785_817_219_7,
    -3.456_870_972_220_162_5,
    4.512_277_094_668_948,
    -2.982_852_253_235_766_4,
    1.056_397_115_771_267,
    -1.954_287_731_916_458_7e-1,
    1.709_705_434_044_412e-2,
    -5.719_261_174_043_057e-4,
    4.633_994_733_599_057e-6,
    -2.719_949_084_886_077_2e-9,
];

/// Largest argument for which `gamma` is finite.
const GAMMA_OVERFLOW: f64 = 171.624_376_956_302_7;

/// Distance from `x` to the nearest non-positive integer, or `None` when
/// `x` is positive enough that no pole is near.
fn pole_distance(x: f64) -> Option<f64> {
    if x > 0.5 {
        return None;
    }
    Some((x - x.round()).abs())
}

fn is_pole(x: f64, tol: f64) -> bool {
    matches!(pole_distance(x), Some(d) if d <= tol)
}

/// `sin(pi * x)` with the argument reduced exactly before scaling.
pub(crate) fn sin_pi(x: f64) -> f64 {
    let r = x - 2.0 * (x / 2.0).round();
    if r > 0.5 {
        (PI * (1.0 - r)).sin()
    } else if r < -0.5 {
        -(PI * (1.0 + r)).sin()
    } else {
        (PI * r).sin()
    }
}

// Lanczos sum for x >= 0.5. The power is split in two halves so the
// intermediate stays finite up to the overflow threshold.
fn gamma_lanczos(x: f64) -> f64 {
    let s = LANCZOS_DK
        .iter()
        .enumerate()
        .skip(1)
        .fold(LANCZOS_DK[0], |s, (k, d)| s + d / (x + k as f64 - 1.0));
    let half = ((x - 0.5 + LANCZOS_R) / E).powf((x - 0.5) / 2.0);
    s * TWO_SQRT_E_OVER_PI * half * half
}

/// The gamma function.
///
/// Fails with [`Error::Pole`] when `x` lies within `1e-12` of a
/// non-positive integer.
pub fn gamma(x: f64) -> Result<f64> {
    if x.is_nan() {
        return Ok(f64::NAN);
    }
    if is_pole(x, GAMMA_POLE_TOL) {
        return Err(Error::Pole(x));
    }
    if x >= 0.5 {
        if x > GAMMA_OVERFLOW {
            return Ok(f64::INFINITY);
        }
        // Whole arguments are exact factorials in double precision up to 22!.
        if x.fract() == 0.0 && x <= 23.0 {
            return Ok((1..x as u64).fold(1.0, |acc, k| acc * k as f64));
        }
        Ok(gamma_lanczos(x))
    } else {
        Ok(PI / (sin_pi(x) * gamma_lanczos(1.0 - x)))
    }
}

/// The reciprocal gamma function `1/Γ(x)`, an entire function.
///
/// Returns exactly `0.0` within `1e-9` of a non-positive integer.
pub fn rgamma(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if is_pole(x, RGAMMA_POLE_TOL) {
        return 0.0;
    }
    if x >= 0.5 {
        if x > GAMMA_OVERFLOW {
            return 0.0;
        }
        1.0 / gamma(x).expect("no pole above 0.5")
    } else {
        sin_pi(x) * gamma_lanczos(1.0 - x) / PI
    }
}

/// Generalized binomial coefficient `Γ(q+1) / (Γ(j+1) Γ(q-j+1))`.
///
/// Evaluated as the falling-factorial product `q(q-1)...(q-j+1)/j!`, which is
/// the same quantity but total in `q`: it is exact for integer arguments and
/// vanishes when `q` is a non-negative integer below `j`.
pub fn gen_binomial(q: f64, j: u32) -> f64 {
    let mut acc = 1.0;
    for i in 0..j {
        let i = f64::from(i);
        acc *= (q - i) / (i + 1.0);
    }
    acc
}

/// `Γ(num) / Γ(den)` with exact handling of the cases the power rule hits.
///
/// Zero when `den` is a pole. When the arguments differ by a small whole
/// number the ratio is a finite rising product, which keeps whole-order
/// derivatives of whole powers exact.
pub fn gamma_ratio(num: f64, den: f64) -> Result<f64> {
    if is_pole(den, RGAMMA_POLE_TOL) {
        if is_pole(num, GAMMA_POLE_TOL) {
            return Err(Error::Pole(num));
        }
        return Ok(0.0);
    }
    let diff = num - den;
    let steps = diff.round();
    if (diff - steps).abs() <= RGAMMA_POLE_TOL && steps.abs() <= 64.0 {
        let n = steps.abs() as u32;
        let (lo, flip) = if steps >= 0.0 { (den, false) } else { (num, true) };
        let mut prod = 1.0;
        for i in 0..n {
            prod *= lo + f64::from(i);
        }
        if flip {
            if is_pole(num, GAMMA_POLE_TOL) {
                return Err(Error::Pole(num));
            }
            return Ok(1.0 / prod);
        }
        return Ok(prod);
    }
    Ok(gamma(num)? * rgamma(den))
}
