//! Exact PG(1, c) sampling by Devroye's alternating-series rejection method.
//!
//! `PG(1, c) = J*(1, c/2) / 4`, where `J*(1, z)` is the exponentially tilted
//! Jacobi law. Proposals come from a two-piece envelope: a truncated
//! inverse-Gaussian on `(0, t]` and a shifted exponential on `(t, ∞)`, with
//! `t = 0.64`. A proposal is accepted or rejected by sandwiching the Jacobi
//! density between successive partial sums of its alternating series.

use core::f64::consts::PI;

use crate::error::{Error, Result};
use crate::numerics::RngStream;
use crate::stats::normal_cdf;

/// Truncation point separating the two proposal pieces.
pub const TRUNCATION: f64 = 0.64;

const PI_SQ_OVER_8: f64 = PI * PI / 8.0;

/// `E[PG(1, c)] = tanh(c/2) / (2c)`, with the `c → 0` limit 1/4.
pub fn pg_mean(c: f64) -> f64 {
    let c = c.abs();
    if c < 1e-6 {
        // tanh(x)/x = 1 - x²/3 + ..., x = c/2.
        0.25 * (1.0 - c * c / 12.0)
    } else {
        libm::tanh(0.5 * c) / (2.0 * c)
    }
}

/// `Var[PG(1, c)]`; `1/24` at `c = 0`.
pub fn pg_variance(c: f64) -> f64 {
    let c = c.abs();
    if c < 0.05 {
        // Series of (sinh c - c) sech²(c/2) / (4c³) about 0.
        let c2 = c * c;
        1.0 / 24.0 - c2 / 120.0 + 17.0 * c2 * c2 / 13440.0
    } else {
        let sech = 1.0 / libm::cosh(0.5 * c);
        (libm::sinh(c) - c) * sech * sech / (4.0 * c * c * c)
    }
}

/// Laplace transform of PG(1, c): `E[exp(-tτ)] = cosh(c/2) / cosh(√(c²/4 + t/2))`.
pub fn pg_laplace_transform(c: f64, t: f64) -> f64 {
    libm::cosh(0.5 * c) / libm::cosh(libm::sqrt(0.25 * c * c + 0.5 * t))
}

/// n-th coefficient of the alternating series for the J*(1) density at `x`.
fn series_coefficient(n: usize, x: f64) -> f64 {
    let k = (n as f64 + 0.5) * PI;
    if x > TRUNCATION {
        k * libm::exp(-0.5 * k * k * x)
    } else if x > 0.0 {
        let e = -1.5 * (libm::log(0.5 * PI) + libm::log(x)) + libm::log(k)
            - 2.0 * (n as f64 + 0.5) * (n as f64 + 0.5) / x;
        libm::exp(e)
    } else {
        0.0
    }
}

/// Probability of choosing the exponential piece of the proposal.
fn exponential_mass(z: f64) -> f64 {
    let t = TRUNCATION;
    let fz = PI_SQ_OVER_8 + 0.5 * z * z;
    let rt = libm::sqrt(1.0 / t);
    let b = rt * (t * z - 1.0);
    let a = -rt * (t * z + 1.0);
    let x0 = libm::log(fz) + fz * t;
    let xb = x0 - z + libm::log(normal_cdf(b));
    let xa = x0 + z + libm::log(normal_cdf(a));
    let q_over_p = 4.0 / PI * (libm::exp(xb) + libm::exp(xa));
    1.0 / (1.0 + q_over_p)
}

/// IG(1/z, 1) truncated to `(0, TRUNCATION]`.
fn truncated_inverse_gaussian(z: f64, rng: &mut RngStream) -> f64 {
    let t = TRUNCATION;
    let mu = if z > 0.0 { 1.0 / z } else { f64::INFINITY };
    if mu > t {
        // Draw from the z = 0 law (a 1/χ²₁-type variable truncated at t) and
        // accept with probability exp(-z² x / 2).
        loop {
            let e1 = loop {
                let e1 = rng.exp1();
                let e2 = rng.exp1();
                if e1 * e1 <= 2.0 * e2 / t {
                    break e1;
                }
            };
            let x = 1.0 + e1 * t;
            let x = t / (x * x);
            if rng.uniform01() <= libm::exp(-0.5 * z * z * x) {
                return x;
            }
        }
    } else {
        loop {
            let x = rng.inverse_gaussian(mu, 1.0).expect("mu and lambda are positive");
            if x <= t {
                return x;
            }
        }
    }
}

/// One exact draw from PG(1, c).
pub fn sample_pg1(c: f64, rng: &mut RngStream) -> Result<f64> {
    if !c.is_finite() {
        return Err(Error::non_finite(alloc::format!("PG tilt c = {c}")));
    }
    if c < 0.0 {
        return Err(Error::invalid(alloc::format!("PG tilt must be non-negative, got {c}")));
    }
    let z = 0.5 * c;
    let fz = PI_SQ_OVER_8 + 0.5 * z * z;
    let p_exp = exponential_mass(z);
    loop {
        let x = if rng.uniform01() < p_exp {
            TRUNCATION + rng.exp1() / fz
        } else {
            truncated_inverse_gaussian(z, rng)
        };
        let mut s = series_coefficient(0, x);
        let y = rng.uniform01() * s;
        let mut n = 0;
        loop {
            n += 1;
            let a = series_coefficient(n, x);
            if n % 2 == 1 {
                s -= a;
                if y <= s {
                    return Ok(0.25 * x);
                }
            } else {
                s += a;
                if y > s {
                    break;
                }
            }
        }
    }
}

/// Draw from PG(1, 0) through its series representation
/// `(1 / (2π²)) Σ e_k / (k - 1/2)²`, truncated at `terms` terms with the
/// tail replaced by its mean. Only used as an independent oracle in tests
/// and diagnostics.
pub fn sample_pg1_series(terms: usize, rng: &mut RngStream) -> f64 {
    let mut sum = 0.0;
    for k in 1..=terms {
        let d = k as f64 - 0.5;
        sum += rng.exp1() / (d * d);
    }
    // Σ_{k>K} (k - 1/2)^{-2} ≈ 1 / K.
    sum += 1.0 / terms as f64;
    sum / (2.0 * PI * PI)
}
