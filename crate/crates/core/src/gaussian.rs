//! Standard normal primitives.
//!
//! Upper tails go straight through `erfc` so that the far right tail keeps
//! its relative accuracy. Beyond the point where the tail stops being
//! comfortably representable, [`log_tail`] switches to a continued-fraction
//! evaluation of the Mills ratio.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::error::{Error, Result};

/// `ln(sqrt(2*pi))`
pub(crate) const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Above this argument `log_tail` stops taking the log of `tail`.
const LOG_TAIL_SWITCH: f64 = 30.0;
/// Above this argument the Mills ratio comes from its continued fraction.
const MILLS_CF_SWITCH: f64 = 8.0;

/// Standard normal density.
#[inline]
pub fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal distribution function `Phi(x)`.
#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `1 - Phi(x)`, evaluated without forming `1 - cdf(x)`.
#[inline]
pub fn tail(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

/// Mills ratio `tail(x) / pdf(x)` for `x >= 0`.
///
/// Below the switch point the ratio is formed directly; above it the
/// continued fraction `1/(x + 1/(x + 2/(x + 3/(x + ...))))` is evaluated
/// with the modified Lentz method.
pub(crate) fn mills_ratio(x: f64) -> f64 {
    debug_assert!(x >= 0.0);
    if x < MILLS_CF_SWITCH {
        return tail(x) / pdf(x);
    }
    if x > 1e150 {
        return 1.0 / x;
    }
    const TINY: f64 = 1e-300;
    // f = b0 + a1/(b1 + a2/(b2 + ...)), b0 = 0, a1 = 1, a_n = n - 1, b_n = x
    let mut f = TINY;
    let mut c = f;
    let mut d = 0.0;
    for n in 1..500 {
        let a = if n == 1 { 1.0 } else { (n - 1) as f64 };
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    f
}

/// `ln(1 - Phi(x))`, accurate for arguments far into either tail.
pub fn log_tail(x: f64) -> f64 {
    if x < 0.0 {
        (-cdf(x)).ln_1p()
    } else if x < LOG_TAIL_SWITCH {
        tail(x).ln()
    } else {
        -0.5 * x * x - LN_SQRT_2PI + mills_ratio(x).ln()
    }
}

/// `ln(Phi(x))`
pub fn log_cdf(x: f64) -> f64 {
    log_tail(-x)
}

/// Inverse of the standard normal distribution function.
///
/// Acklam's rational approximation seeds two Newton steps against [`cdf`].
/// The lower half is solved directly and the upper half by reflection, which
/// is exact because `1 - p` carries no rounding for `p >= 0.5`.
pub fn quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain {
            what: "probability must lie strictly inside (0, 1)",
            value: p,
        });
    }
    Ok(quantile_unchecked(p))
}

pub(crate) fn quantile_unchecked(p: f64) -> f64 {
    if p > 0.5 {
        -lower_quantile(1.0 - p)
    } else {
        lower_quantile(p)
    }
}

fn lower_quantile(q: f64) -> f64 {
    let mut x = acklam(q);
    for _ in 0..2 {
        let density = pdf(x);
        if density == 0.0 {
            break;
        }
        x -= (cdf(x) - q) / density;
    }
    x
}

fn acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_690e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.024_25;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}
