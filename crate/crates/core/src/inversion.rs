//! Inversion of `theta -> F(x_obs; theta, rule)` for the quantile solutions
//! `theta(p)`.
//!
//! `F` is strictly decreasing in `theta`, so each `p` has exactly one root.
//! Near the margin of a one-sided rule that root runs off towards minus
//! infinity, so the bracket grows until it straddles the root instead of
//! being fixed up front.

use serde::Serialize;

use crate::conditional::{conditional_cdf_unchecked, SelectionRule};
use crate::error::{Error, Result};
use crate::gaussian::quantile;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveConfig {
    pub p_tolerance: f64,
    pub theta_tolerance: f64,
    pub max_bracket_expansions: usize,
    pub initial_bracket_halfwidth: f64,
    pub max_bisection_iters: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            p_tolerance: 1e-10,
            theta_tolerance: 1e-9,
            max_bracket_expansions: 200,
            initial_bracket_halfwidth: 20.0,
            max_bisection_iters: 200,
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("p_tolerance must be positive", self.p_tolerance),
            ("theta_tolerance must be positive", self.theta_tolerance),
            (
                "initial_bracket_halfwidth must be positive",
                self.initial_bracket_halfwidth,
            ),
        ];
        for (what, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::domain(what, v));
            }
        }
        if self.max_bracket_expansions < 1 {
            return Err(Error::domain("max_bracket_expansions must be at least 1", 0.0));
        }
        if self.max_bisection_iters < 1 {
            return Err(Error::domain("max_bisection_iters must be at least 1", 0.0));
        }
        Ok(())
    }
}

/// A root `theta(p)` and how it was reached.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuantileSolution {
    pub theta: f64,
    pub achieved_p: f64,
    pub iterations: usize,
    pub bracket: (f64, f64),
}

fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::domain("p must lie strictly inside (0, 1)", p))
    }
}

/// Solve `p = F(x_obs; theta, rule)` for `theta`.
pub fn solve_theta(
    p: f64,
    x_obs: f64,
    rule: &SelectionRule,
    cfg: &SolveConfig,
) -> Result<QuantileSolution> {
    check_probability(p)?;
    cfg.validate()?;
    if !x_obs.is_finite() {
        return Err(Error::domain("observed statistic must be finite", x_obs));
    }
    rule.check_statistic(x_obs)?;

    let eval = |theta: f64| -> Result<f64> {
        let f = conditional_cdf_unchecked(x_obs, theta, rule);
        if f.is_nan() {
            Err(Error::NonFinite { theta })
        } else {
            Ok(f)
        }
    };

    // F is decreasing in theta: the root has F(lo) > p > F(hi).
    let mut left_width = cfg.initial_bracket_halfwidth;
    let mut right_width = cfg.initial_bracket_halfwidth;
    let mut lo = x_obs - left_width;
    let mut hi = x_obs + right_width;
    let mut f_lo = eval(lo)?;
    let mut f_hi = eval(hi)?;
    let mut expansions = 0;
    let mut iterations = 0;
    loop {
        if f_lo == p {
            return Ok(QuantileSolution {
                theta: lo,
                achieved_p: f_lo,
                iterations,
                bracket: (lo, lo),
            });
        }
        if f_hi == p {
            return Ok(QuantileSolution {
                theta: hi,
                achieved_p: f_hi,
                iterations,
                bracket: (hi, hi),
            });
        }
        let left_ok = f_lo > p;
        let right_ok = f_hi < p;
        if left_ok && right_ok {
            break;
        }
        if expansions >= cfg.max_bracket_expansions {
            return Err(Error::NoSignChange { expansions, lo, hi });
        }
        if !left_ok {
            left_width *= 2.0;
            lo = x_obs - left_width;
            f_lo = eval(lo)?;
            expansions += 1;
        }
        if !right_ok && expansions < cfg.max_bracket_expansions {
            right_width *= 2.0;
            hi = x_obs + right_width;
            f_hi = eval(hi)?;
            expansions += 1;
        }
        iterations += 1;
    }

    for _ in 0..cfg.max_bisection_iters {
        iterations += 1;
        let mid = lo + 0.5 * (hi - lo);
        if !(mid > lo && mid < hi) {
            // the bracket is down to adjacent doubles
            let (theta, achieved_p) = if (f_lo - p).abs() <= (f_hi - p).abs() {
                (lo, f_lo)
            } else {
                (hi, f_hi)
            };
            return Ok(QuantileSolution {
                theta,
                achieved_p,
                iterations,
                bracket: (lo, hi),
            });
        }
        let f_mid = eval(mid)?;
        if f_mid > p {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
        if (f_mid - p).abs() <= cfg.p_tolerance || hi - lo <= cfg.theta_tolerance {
            return Ok(QuantileSolution {
                theta: mid,
                achieved_p: f_mid,
                iterations,
                bracket: (lo, hi),
            });
        }
    }
    Err(Error::NoConvergence {
        iterations,
        lo,
        hi,
    })
}

/// `theta*(p) = x_obs - Phi^{-1}(p)`, the quantile solution that ignores
/// selection.
pub fn conventional_theta(p: f64, x_obs: f64) -> Result<f64> {
    check_probability(p)?;
    Ok(x_obs - quantile(p)?)
}
