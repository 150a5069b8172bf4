//! Exact sampling from a normal distribution truncated to an interval.
//!
//! Uses plain rejection when the interval holds appreciable mass, Robert's
//! shifted-exponential rejection for one-sided tails, and bounded uniform
//! rejection for narrow windows. Every accepted draw is an exact sample; no
//! inverse-CDF approximations are involved.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::norm;

/// Draw from N(mu, sigma²) restricted to [lo, hi].
///
/// Returns `None` when the window carries so little mass that no sampling
/// route is numerically viable (standardized bounds beyond ~38 sigma, or a
/// window of vanishing probability); callers decide how to fall back.
pub fn sample<R: Rng + ?Sized>(
    rng: &mut R,
    mu: f64,
    sigma: f64,
    lo: f64,
    hi: f64,
) -> Option<f64> {
    debug_assert!(sigma > 0.0 && lo < hi);
    let a = (lo - mu) / sigma;
    let b = (hi - mu) / sigma;
    let z = sample_std(rng, a, b)?;
    Some(mu + sigma * z)
}

/// Natural log of the window mass P(lo <= X <= hi) for X ~ N(mu, sigma²).
pub fn ln_mass(mu: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    let a = (lo - mu) / sigma;
    let b = (hi - mu) / sigma;
    // ln(Phi(b) - Phi(a)) computed from the side with less cancellation.
    if a > 0.0 {
        // Both bounds in the upper tail: sf(a) - sf(b).
        let la = norm::ln_sf(a);
        let lb = norm::ln_sf(b);
        la + ln_diff_exp(lb - la)
    } else if b < 0.0 {
        let lb = norm::ln_cdf(b);
        let la = norm::ln_cdf(a);
        lb + ln_diff_exp(la - lb)
    } else {
        (norm::cdf(b) - norm::cdf(a)).ln()
    }
}

/// ln(1 - e^d) for d <= 0.
fn ln_diff_exp(d: f64) -> f64 {
    if d >= 0.0 {
        f64::NEG_INFINITY
    } else {
        (-d.exp()).ln_1p()
    }
}

/// Standardized truncated draw on [a, b] with a < b.
fn sample_std<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> Option<f64> {
    if !(a.is_finite() && b.is_finite() && a < b) {
        return None;
    }
    if a > 38.0 || b < -38.0 {
        return None;
    }
    // Symmetry: reduce to the case where the interval is not entirely below 0.
    if b <= 0.0 {
        return sample_std(rng, -b, -a).map(|z| -z);
    }

    if a <= 0.0 {
        // Interval straddles the mode.
        if b - a > 1.0 {
            // Plain rejection from the untruncated normal.
            for _ in 0..10_000 {
                let z: f64 = rng.sample(StandardNormal);
                if z >= a && z <= b {
                    return Some(z);
                }
            }
            return None;
        }
        // Narrow window around the mode: uniform rejection against the density
        // maximum at z = 0 (or at the nearer endpoint).
        return uniform_rejection(rng, a, b, 0.0_f64.max(a).min(b));
    }

    // 0 < a < b: upper-tail sampling.
    if b - a < 0.1 || (a < 2.0 && b - a < 1.0) {
        return uniform_rejection(rng, a, b, a);
    }
    // Robert's translated-exponential proposal with optimal rate, retried
    // until the draw also lands below b.
    let lambda = 0.5 * (a + (a * a + 4.0).sqrt());
    for _ in 0..100_000 {
        let u: f64 = rng.random::<f64>();
        let z = a - (1.0 - u).ln() / lambda;
        if z > b {
            continue;
        }
        let accept = (-0.5 * (z - lambda) * (z - lambda)).exp();
        if rng.random::<f64>() <= accept {
            return Some(z);
        }
    }
    None
}

/// Uniform proposal on [a, b], accepted against the normal density scaled by
/// its maximum over the interval (attained at `mode_point`).
fn uniform_rejection<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64, mode_point: f64) -> Option<f64> {
    let ln_max = -0.5 * mode_point * mode_point;
    for _ in 0..1_000_000 {
        let z = rng.random_range(a..b);
        let ln_accept = -0.5 * z * z - ln_max;
        if rng.random::<f64>().ln() <= ln_accept {
            return Some(z);
        }
    }
    None
}

/// Mean and variance of the truncated distribution, in closed form. Used by
/// diagnostics and tests.
pub fn moments(mu: f64, sigma: f64, lo: f64, hi: f64) -> (f64, f64) {
    let a = (lo - mu) / sigma;
    let b = (hi - mu) / sigma;
    let z = norm::cdf(b) - norm::cdf(a);
    let (pa, pb) = (norm::pdf(a), norm::pdf(b));
    let mean = mu + sigma * (pa - pb) / z;
    let var = sigma * sigma * (1.0 + (a * pa - b * pb) / z - ((pa - pb) / z).powi(2));
    (mean, var)
}
