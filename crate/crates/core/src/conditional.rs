//! Selection-conditional distribution functions of the t-statistic.
//!
//! Every function here evaluates `P(X <= a | selection event)` for
//! `X ~ N(theta, 1)`. The one- and two-sided rules select on `X` itself; the
//! randomized rules select on `X + W` with independent `W ~ N(0, eta^2)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{cdf, log_cdf, log_tail, mills_ratio, tail};
use crate::quadrature::integrate_vec;

/// Relative tolerance of the randomized-rule quadrature.
const QUAD_REL_TOL: f64 = 1e-10;
/// Components below this fraction of the total mass count as converged.
const QUAD_MASS_FLOOR: f64 = 1e-16;
/// Integration stops where the truncated-normal weight has decayed by `e^-40`.
const QUAD_LOG_SPAN: f64 = 40.0;
/// Truncation points further left than this are clipped; the mass lost is
/// below `1e-38`.
const QUAD_LEFT_CLIP: f64 = -13.0;
/// A two-sided branch with less than this log share of the selection
/// probability is left out.
const NEGLIGIBLE_LOG_WEIGHT: f64 = -50.0;
/// Below this argument the one-sided ratio uses plain log tails.
const MILLS_FORM_SWITCH: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleKind {
    OneSided,
    TwoSided,
    #[serde(rename = "rand-one-sided")]
    RandomizedOneSided,
    #[serde(rename = "rand-two-sided")]
    RandomizedTwoSided,
}

impl RuleKind {
    pub const ALL: [RuleKind; 4] = [
        RuleKind::OneSided,
        RuleKind::TwoSided,
        RuleKind::RandomizedOneSided,
        RuleKind::RandomizedTwoSided,
    ];

    pub fn is_randomized(self) -> bool {
        matches!(
            self,
            RuleKind::RandomizedOneSided | RuleKind::RandomizedTwoSided
        )
    }

    pub fn is_two_sided(self) -> bool {
        matches!(self, RuleKind::TwoSided | RuleKind::RandomizedTwoSided)
    }

    pub fn label(self) -> &'static str {
        match self {
            RuleKind::OneSided => "one-sided",
            RuleKind::TwoSided => "two-sided",
            RuleKind::RandomizedOneSided => "rand-one-sided",
            RuleKind::RandomizedTwoSided => "rand-two-sided",
        }
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for RuleKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        RuleKind::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| {
                format!("unknown rule kind '{s}' (expected one-sided, two-sided, rand-one-sided or rand-two-sided)")
            })
    }
}

/// The significance event that decides whether an estimate is reported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SelectionRule {
    kind: RuleKind,
    c: f64,
    eta: Option<f64>,
}

impl SelectionRule {
    /// `eta` is required for randomized kinds and ignored otherwise.
    pub fn new(kind: RuleKind, c: f64, eta: Option<f64>) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::domain("critical value must be positive and finite", c));
        }
        let eta = if kind.is_randomized() {
            let eta = eta.ok_or(Error::domain("randomized rules need an eta", f64::NAN))?;
            check_eta(eta)?;
            Some(eta)
        } else {
            None
        };
        Ok(SelectionRule { kind, c, eta })
    }

    pub fn one_sided(c: f64) -> Result<Self> {
        Self::new(RuleKind::OneSided, c, None)
    }

    pub fn two_sided(c: f64) -> Result<Self> {
        Self::new(RuleKind::TwoSided, c, None)
    }

    pub fn randomized_one_sided(c: f64, eta: f64) -> Result<Self> {
        Self::new(RuleKind::RandomizedOneSided, c, Some(eta))
    }

    pub fn randomized_two_sided(c: f64, eta: f64) -> Result<Self> {
        Self::new(RuleKind::RandomizedTwoSided, c, Some(eta))
    }

    /// Data carving: select on the mean of the first `n1` of `n`
    /// observations, which gives `eta^2 = n / n1 - 1`.
    pub fn from_carving(kind: RuleKind, c: f64, n: u64, n1: u64) -> Result<Self> {
        if !kind.is_randomized() {
            return Err(Error::domain(
                "carving defines a randomized rule",
                f64::NAN,
            ));
        }
        Self::new(kind, c, Some(carving_eta(n, n1)?))
    }

    pub fn kind(&self) -> RuleKind {
        self.kind
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn eta(&self) -> Option<f64> {
        self.eta
    }

    /// Whether the statistic alone is compatible with the event. Randomized
    /// rules constrain `X + W`, so any finite statistic is admissible.
    pub fn admits(&self, x: f64) -> bool {
        match self.kind {
            RuleKind::OneSided => x >= self.c,
            RuleKind::TwoSided => x.abs() >= self.c,
            _ => !x.is_nan(),
        }
    }

    /// Whether a realization `(x, w)` is selected.
    pub fn selects(&self, x: f64, w: f64) -> bool {
        match self.kind {
            RuleKind::OneSided => x >= self.c,
            RuleKind::TwoSided => x.abs() >= self.c,
            RuleKind::RandomizedOneSided => x + w >= self.c,
            RuleKind::RandomizedTwoSided => (x + w).abs() >= self.c,
        }
    }

    pub(crate) fn check_statistic(&self, x: f64) -> Result<()> {
        if self.admits(x) {
            Ok(())
        } else {
            Err(Error::OutsideEvent {
                statistic: x,
                event: self.event_description(),
            })
        }
    }

    pub fn event_description(&self) -> String {
        match self.kind {
            RuleKind::OneSided => format!("X >= {}", self.c),
            RuleKind::TwoSided => format!("|X| >= {}", self.c),
            RuleKind::RandomizedOneSided => format!("X + W >= {}", self.c),
            RuleKind::RandomizedTwoSided => format!("|X + W| >= {}", self.c),
        }
    }

    /// `P(selected)` when `X ~ N(theta, 1)`.
    pub fn acceptance_probability(&self, theta: f64) -> f64 {
        let s = self.selection_sd();
        let upper = tail((self.c - theta) / s);
        if self.kind.is_two_sided() {
            upper + cdf((-self.c - theta) / s)
        } else {
            upper
        }
    }

    /// Standard deviation of the selected quantity, `sqrt(1 + eta^2)`.
    fn selection_sd(&self) -> f64 {
        self.eta.map_or(1.0, |eta| eta.hypot(1.0))
    }
}

impl fmt::Display for SelectionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.eta {
            Some(eta) => write!(f, "{}(c={}, eta^2={})", self.kind, self.c, eta * eta),
            None => write!(f, "{}(c={})", self.kind, self.c),
        }
    }
}

/// `eta` implied by carving `n1` of `n` observations off for selection.
pub fn carving_eta(n: u64, n1: u64) -> Result<f64> {
    if n1 == 0 || n1 >= n {
        return Err(Error::domain(
            "carving needs 0 < n1 < n",
            n1 as f64,
        ));
    }
    Ok((n as f64 / n1 as f64 - 1.0).sqrt())
}

/// A conditional probability together with the logs of the two masses in
/// its ratio form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionalCdfResult {
    pub p: f64,
    pub log_numerator: f64,
    pub log_denominator: f64,
}

struct Split {
    cdf: f64,
    sf: f64,
    log_denominator: f64,
}

impl Split {
    fn into_result(self) -> ConditionalCdfResult {
        ConditionalCdfResult {
            p: self.cdf,
            log_numerator: self.log_denominator + self.cdf.ln(),
            log_denominator: self.log_denominator,
        }
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if theta.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("theta must be finite", theta))
    }
}

fn check_c(c: f64) -> Result<()> {
    if c > 0.0 && c.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("critical value must be positive and finite", c))
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(
            "eta must be positive; use the non-randomized rule for eta = 0",
            eta,
        ))
    }
}

/// `ln(exp(x) + exp(y))`
fn log_add(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln P(lo < Z <= hi)` for `lo <= hi`.
fn log_mass(lo: f64, hi: f64) -> f64 {
    if hi <= 0.0 {
        log_cdf(hi) + (-(log_cdf(lo) - log_cdf(hi)).exp_m1()).ln()
    } else if lo >= 0.0 {
        log_tail(lo) + (-(log_tail(hi) - log_tail(lo)).exp_m1()).ln()
    } else {
        (1.0 - cdf(lo) - tail(hi)).ln()
    }
}

/// `ln(tail(v) / tail(u))` for `v >= u`, with `gap = v - u` supplied
/// separately so that it keeps full precision when `u` and `v` are huge.
fn log_tail_ratio(u: f64, v: f64, gap: f64) -> f64 {
    if gap == 0.0 {
        return 0.0;
    }
    if u >= MILLS_FORM_SWITCH {
        -0.5 * gap * (u + v) + mills_ratio(v).ln() - mills_ratio(u).ln()
    } else {
        log_tail(v) - log_tail(u)
    }
}

fn one_sided_split(a: f64, theta: f64, c: f64) -> Split {
    let u = c - theta;
    let v = a - theta;
    let ratio = log_tail_ratio(u, v, a - c);
    Split {
        cdf: -ratio.exp_m1(),
        sf: ratio.exp(),
        log_denominator: log_tail(u),
    }
}

fn two_sided_split(a: f64, theta: f64, c: f64) -> Split {
    let lower_edge = -c - theta;
    let upper_edge = c - theta;
    let v = a - theta;
    let lower = cdf(lower_edge);
    let upper = tail(upper_edge);
    let den = lower + upper;
    let (num, sf_num) = if a >= c {
        // a = c: the indicator vanishes and the min picks Phi(-c - theta)
        let ratio = log_tail_ratio(upper_edge, v, a - c);
        (lower + upper * -ratio.exp_m1(), tail(v))
    } else {
        // a <= -c: min(Phi(a - theta), Phi(-c - theta)) = Phi(a - theta)
        let rest = if a == -c {
            0.0
        } else {
            log_mass(v, lower_edge).exp()
        };
        (cdf(v), rest + upper)
    };
    Split {
        cdf: num / den,
        sf: sf_num / den,
        log_denominator: log_add(log_cdf(lower_edge), log_tail(upper_edge)),
    }
}

/// `(E[Phi(z)], E[Phi-bar(z)])` with `z = (b + dir * U) / eta`, up to a
/// common factor, where `U = T - tau` and `T` is standard normal truncated
/// to `T >= tau`.
///
/// The weight `exp(-u (2 tau + u) / 2)` is the truncated density relative to
/// its value at the truncation point, so it stays representable however far
/// `tau` sits in the tail.
fn truncated_masses(tau: f64, b: f64, dir: f64, eta: f64) -> [f64; 2] {
    let tau = tau.max(QUAD_LEFT_CLIP);
    let m = tau.max(0.0);
    let span = (m * m + 2.0 * QUAD_LOG_SPAN).sqrt();
    let upper = if tau >= 0.0 {
        2.0 * QUAD_LOG_SPAN / (span + tau)
    } else {
        span - tau
    };
    let integrand = |u: f64| {
        let w = (-0.5 * u * (2.0 * tau + u)).exp();
        let z = (b + dir * u) / eta;
        let (lo, hi) = if z <= 0.0 {
            let lo = cdf(z);
            (lo, 1.0 - lo)
        } else {
            let hi = tail(z);
            (1.0 - hi, hi)
        };
        [w * lo, w * hi]
    };
    // z changes sign at u = -dir * b
    let step = -dir * b;
    integrate_vec(
        integrand,
        0.0,
        upper,
        &[step],
        QUAD_REL_TOL,
        QUAD_MASS_FLOOR,
    )
}

fn branch(tau: f64, b: f64, dir: f64, eta: f64) -> (f64, f64) {
    let [lo, hi] = truncated_masses(tau, b, dir, eta);
    (lo / (lo + hi), hi / (lo + hi))
}

fn randomized_split(a: f64, theta: f64, c: f64, eta: f64, two_sided: bool) -> Split {
    let s = eta.hypot(1.0);
    let eta2 = eta * eta;
    let drift = eta2 * (a - theta);
    // X+W >= c branch: T = (S - theta)/s >= (c - theta)/s, and
    // P(X <= a | T) = Phi((((a - c) + eta^2 (a - theta)) / s - U) / eta).
    let tau_up = (c - theta) / s;
    let log_up = log_tail(tau_up);
    if !two_sided {
        let (cdf, sf) = branch(tau_up, ((a - c) + drift) / s, -1.0, eta);
        return Split {
            cdf,
            sf,
            log_denominator: log_up,
        };
    }
    // X+W <= -c branch, reflected: R = (theta - S)/s >= (c + theta)/s,
    // and P(X <= a | R) = Phi((((a + c) + eta^2 (a - theta)) / s + U) / eta).
    let tau_dn = (c + theta) / s;
    let log_dn = log_tail(tau_dn);
    let log_den = log_add(log_up, log_dn);
    let w_up = (log_up - log_den).exp();
    let w_dn = (log_dn - log_den).exp();
    let mut cdf = 0.0;
    let mut sf = 0.0;
    if log_up - log_den > NEGLIGIBLE_LOG_WEIGHT {
        let (g, gbar) = branch(tau_up, ((a - c) + drift) / s, -1.0, eta);
        cdf += w_up * g;
        sf += w_up * gbar;
    }
    if log_dn - log_den > NEGLIGIBLE_LOG_WEIGHT {
        let (g, gbar) = branch(tau_dn, ((a + c) + drift) / s, 1.0, eta);
        cdf += w_dn * g;
        sf += w_dn * gbar;
    }
    Split {
        cdf,
        sf,
        log_denominator: log_den,
    }
}

fn split(a: f64, theta: f64, rule: &SelectionRule) -> Split {
    match (rule.kind, rule.eta) {
        (RuleKind::OneSided, _) => one_sided_split(a, theta, rule.c),
        (RuleKind::TwoSided, _) => two_sided_split(a, theta, rule.c),
        (RuleKind::RandomizedOneSided, Some(eta)) => randomized_split(a, theta, rule.c, eta, false),
        (RuleKind::RandomizedTwoSided, Some(eta)) => randomized_split(a, theta, rule.c, eta, true),
        _ => unreachable!("randomized rules always carry eta"),
    }
}

fn checked_split(a: f64, theta: f64, rule: &SelectionRule) -> Result<Split> {
    check_theta(theta)?;
    rule.check_statistic(a)?;
    Ok(split(a, theta, rule))
}

/// `P(X <= a | X >= c)`.
pub fn one_sided_cdf(a: f64, theta: f64, c: f64) -> Result<f64> {
    conditional_cdf(a, theta, &SelectionRule::one_sided(c)?)
}

/// `P(X <= a | |X| >= c)`.
pub fn two_sided_cdf(a: f64, theta: f64, c: f64) -> Result<f64> {
    conditional_cdf(a, theta, &SelectionRule::two_sided(c)?)
}

/// `P(X <= a | X + W >= c)` with `W ~ N(0, eta^2)`.
pub fn randomized_one_sided_cdf(a: f64, theta: f64, c: f64, eta: f64) -> Result<f64> {
    check_c(c)?;
    check_eta(eta)?;
    conditional_cdf(a, theta, &SelectionRule::randomized_one_sided(c, eta)?)
}

/// `P(X <= a | |X + W| >= c)` with `W ~ N(0, eta^2)`.
pub fn randomized_two_sided_cdf(a: f64, theta: f64, c: f64, eta: f64) -> Result<f64> {
    check_c(c)?;
    check_eta(eta)?;
    conditional_cdf(a, theta, &SelectionRule::randomized_two_sided(c, eta)?)
}

/// Conditional distribution function for any rule.
pub fn conditional_cdf(a: f64, theta: f64, rule: &SelectionRule) -> Result<f64> {
    checked_split(a, theta, rule).map(|s| s.cdf)
}

/// Upper complement `P(X > a | event)`, evaluated directly so that it keeps
/// relative precision where the distribution function rounds to one.
pub fn conditional_sf(a: f64, theta: f64, rule: &SelectionRule) -> Result<f64> {
    checked_split(a, theta, rule).map(|s| s.sf)
}

pub fn conditional_cdf_detail(
    a: f64,
    theta: f64,
    rule: &SelectionRule,
) -> Result<ConditionalCdfResult> {
    checked_split(a, theta, rule).map(Split::into_result)
}

/// Unchecked evaluation for hot loops whose inputs were validated upstream.
pub(crate) fn conditional_cdf_unchecked(a: f64, theta: f64, rule: &SelectionRule) -> f64 {
    split(a, theta, rule).cdf
}
