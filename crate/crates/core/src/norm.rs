//! Standard-normal helpers with tail-safe logarithms.
//!
//! Log detection probabilities routinely sit 20+ standard deviations into a
//! Gaussian tail, where `ln(cdf(x))` computed naively underflows. `ln_cdf`
//! switches to a Mills-ratio expansion once `erfc` loses precision.

use statrs::function::erf;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_74;
const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Standard normal density.
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Log standard normal density.
pub fn ln_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Standard normal CDF via `erfc`, accurate in both tails down to underflow.
pub fn cdf(x: f64) -> f64 {
    0.5 * erf::erfc(-x / SQRT_2)
}

/// Upper tail probability 1 - cdf(x).
pub fn sf(x: f64) -> f64 {
    0.5 * erf::erfc(x / SQRT_2)
}

/// ln(cdf(x)). For x <= -34 uses the asymptotic expansion
/// ln(cdf(x)) = -x²/2 - ln(-x) - ln√(2π) + ln(1 - 1/x² + 3/x⁴ - 15/x⁶).
pub fn ln_cdf(x: f64) -> f64 {
    if x >= 0.0 {
        // ln(1 - sf) with sf <= 0.5.
        return (-sf(x)).ln_1p();
    }
    if x > -34.0 {
        cdf(x).ln()
    } else {
        let inv2 = 1.0 / (x * x);
        let series = 1.0 - inv2 + 3.0 * inv2 * inv2 - 15.0 * inv2 * inv2 * inv2;
        -0.5 * x * x - (-x).ln() - LN_SQRT_2PI + series.ln()
    }
}

/// ln(1 - cdf(x)) = ln(cdf(-x)).
pub fn ln_sf(x: f64) -> f64 {
    ln_cdf(-x)
}

/// Standard normal quantile (inverse CDF).
pub fn quantile(p: f64) -> f64 {
    use statrs::distribution::ContinuousCDF;
    let n = statrs::distribution::Normal::new(0.0, 1.0).unwrap();
    n.inverse_cdf(p)
}
