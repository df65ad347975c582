//! Scalar special functions used by the closed-form allocations.
//!
//! All logarithms are natural; rates computed from these helpers are in nats.

use crate::error::{Error, Result};

/// Result of a real Wright omega evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaResult {
    /// The unique `w > 0` with `w + ln(w) = z`.
    pub value: f64,
    /// `value + ln(value) - z`, evaluated in floating point.
    pub residual: f64,
    pub iterations: u32,
}

const OMEGA_MAX_ITER: u32 = 100;

/// Real Wright omega function: the unique positive solution of `w + ln(w) = z`.
///
/// The root is bracketed from monotonicity and refined with a safeguarded
/// Newton iteration; a Newton step that leaves the bracket is replaced by a
/// bisection step.
///
/// ```
/// use bandalloc::specialfn::wright_omega;
///
/// let w = wright_omega(1.0).unwrap();
/// assert_eq!(w.value, 1.0);
///
/// let omega_constant = wright_omega(0.0).unwrap().value;
/// assert!((omega_constant - 0.567_143_290_409_783_8).abs() < 1e-15);
/// ```
pub fn wright_omega(z: f64) -> Result<OmegaResult> {
    if !z.is_finite() {
        return Err(Error::Domain(format!("wright_omega: non-finite argument {z}")));
    }

    // w < 1 iff z < 1. Below 1: e^(z-1) < w <= e^z. Above: z - ln z <= w <= z.
    let (mut lo, mut hi, mut w) = if z < 1.0 {
        let hi = z.exp().min(1.0);
        let lo = (z - 1.0).exp();
        if hi == 0.0 {
            return Err(Error::Domain(format!(
                "wright_omega: omega({z}) underflows f64"
            )));
        }
        let w0 = if z < 0.0 { z.exp() } else { 0.5 };
        (lo, hi, w0.clamp(lo, hi))
    } else {
        (1.0_f64.max(z - z.ln()), z, z)
    };

    let tol = 1e-15 * z.abs().max(1.0);
    let mut iterations = 0;
    loop {
        let f = w + w.ln() - z;
        if f == 0.0 {
            break;
        }
        if f > 0.0 {
            hi = w;
        } else {
            lo = w;
        }
        if iterations >= OMEGA_MAX_ITER || hi - lo <= f64::EPSILON * hi {
            break;
        }
        iterations += 1;

        let newton = w - f * w / (w + 1.0);
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        let step = (next - w).abs();
        w = next;
        if step <= f64::EPSILON * w && f.abs() <= tol {
            break;
        }
    }

    Ok(OmegaResult {
        value: w,
        residual: w + w.ln() - z,
        iterations,
    })
}

/// `x * ln(1 + c / x)`, the rate of a unit-gain link of bandwidth `x` carrying
/// power `c`. Defined as zero at `x = 0`: an interface without bandwidth is
/// inactive.
pub fn rate_kernel(x: f64, c: f64) -> Result<f64> {
    if !(x >= 0.0) || !(c >= 0.0) {
        return Err(Error::Domain(format!(
            "rate_kernel: arguments must be nonnegative (x = {x}, c = {c})"
        )));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(x * (c / x).ln_1p())
}

/// `ln(1 + x) - x / (1 + x)`: the bandwidth derivative of `w ln(1 + p g / w)`
/// expressed in the per-mode SNR `x = p g / w`.
///
/// Uses a series for small `x`, where the direct difference cancels.
pub fn bandwidth_marginal(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        // sum_{k>=2} (-1)^k (k-1)/k x^k
        let mut term = x * x;
        let mut acc = 0.0;
        for k in 2..12 {
            let kf = k as f64;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * (kf - 1.0) / kf * term;
            term *= x;
        }
        acc
    } else {
        x.ln_1p() - x / (1.0 + x)
    }
}

/// `(1 + x) ln(1 + x) - x`, the antiderivative of `ln(1 + x)`; also the
/// quantity that pins the optimal single-interface SNR.
pub fn entropy_gap(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        // sum_{k>=2} (-1)^k x^k / (k (k-1))
        let mut term = x * x;
        let mut acc = 0.0;
        for k in 2..12 {
            let kf = k as f64;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * term / (kf * (kf - 1.0));
            term *= x;
        }
        acc
    } else {
        (1.0 + x) * x.ln_1p() - x
    }
}
