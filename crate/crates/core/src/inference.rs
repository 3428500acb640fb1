//! Median-unbiased estimates, equal-tailed intervals and the analytic
//! thresholds of the location problem.

use rayon::prelude::*;
use serde::Serialize;

use crate::conditional::SelectionRule;
use crate::error::{Error, Result};
use crate::gaussian::{cdf, quantile};
use crate::inversion::{conventional_theta, solve_theta, SolveConfig};

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InferenceProblem {
    x_obs: f64,
    rule: SelectionRule,
    alpha: f64,
}

impl InferenceProblem {
    pub fn new(x_obs: f64, rule: SelectionRule, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        if !x_obs.is_finite() {
            return Err(Error::domain("observed statistic must be finite", x_obs));
        }
        rule.check_statistic(x_obs)?;
        Ok(InferenceProblem { x_obs, rule, alpha })
    }

    pub fn with_default_alpha(x_obs: f64, rule: SelectionRule) -> Result<Self> {
        Self::new(x_obs, rule, DEFAULT_ALPHA)
    }

    pub fn x_obs(&self) -> f64 {
        self.x_obs
    }

    pub fn rule(&self) -> &SelectionRule {
        &self.rule
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// The same rule and level at a different observation.
    pub fn at(&self, x_obs: f64) -> Result<Self> {
        Self::new(x_obs, self.rule.clone(), self.alpha)
    }
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 0.5 {
        Ok(())
    } else {
        Err(Error::domain("alpha must lie strictly inside (0, 0.5)", alpha))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntervalKind {
    Conditional,
    Conventional,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub kind: IntervalKind,
}

impl ConfidenceInterval {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, theta: f64) -> bool {
        self.lower <= theta && theta <= self.upper
    }
}

/// One grid point of figure data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveRow {
    pub x_obs: f64,
    pub mu: f64,
    pub lo: f64,
    pub hi: f64,
    pub conv_lo: f64,
    pub conv_hi: f64,
}

/// Rows for the admissible grid points, plus the points that were dropped
/// because they lie outside the rule's event.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Curve {
    pub rows: Vec<CurveRow>,
    pub dropped: Vec<f64>,
}

fn theta(p: f64, problem: &InferenceProblem) -> Result<f64> {
    Ok(solve_theta(p, problem.x_obs, &problem.rule, &SolveConfig::default())?.theta)
}

/// `theta(0.5)`.
pub fn median_unbiased(problem: &InferenceProblem) -> Result<f64> {
    theta(0.5, problem)
}

/// `[theta(1 - alpha/2), theta(alpha/2)]`.
pub fn confidence_interval(problem: &InferenceProblem) -> Result<ConfidenceInterval> {
    let half = 0.5 * problem.alpha;
    Ok(ConfidenceInterval {
        lower: theta(1.0 - half, problem)?,
        upper: theta(half, problem)?,
        level: 1.0 - problem.alpha,
        kind: IntervalKind::Conditional,
    })
}

pub fn conventional_interval(x_obs: f64, alpha: f64) -> Result<ConfidenceInterval> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::domain("alpha must lie strictly inside (0, 1)", alpha));
    }
    let half = 0.5 * alpha;
    Ok(ConfidenceInterval {
        lower: conventional_theta(1.0 - half, x_obs)?,
        upper: conventional_theta(half, x_obs)?,
        level: 1.0 - alpha,
        kind: IntervalKind::Conventional,
    })
}

fn check_threshold_inputs(p: f64, c: f64) -> Result<()> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain("p must lie strictly inside (0, 1)", p));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::domain("critical value must be positive and finite", c));
    }
    Ok(())
}

/// Below this observation the one-sided `theta(p)` lies under `c`.
pub fn threshold_upper_below_c(p: f64, c: f64) -> Result<f64> {
    check_threshold_inputs(p, c)?;
    Ok(quantile(0.5 * p + 0.5)? + c)
}

/// Below this observation the one-sided `theta(p)` is negative.
pub fn threshold_upper_below_zero(p: f64, c: f64) -> Result<f64> {
    check_threshold_inputs(p, c)?;
    let phi_c = cdf(c);
    quantile((1.0 - phi_c) * p + phi_c)
}

/// Both one-sided thresholds for one `p`, each cross-checked by solving at
/// `threshold -+ 0.01`. A check is `None` when `threshold - 0.01` falls
/// outside the event `x >= c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub p: f64,
    pub c: f64,
    pub below_c: f64,
    pub below_zero: f64,
    pub below_c_verified: Option<bool>,
    pub below_zero_verified: Option<bool>,
}

const THRESHOLD_PROBE: f64 = 0.01;

fn verify_threshold(p: f64, c: f64, threshold: f64, level: f64) -> Result<Option<bool>> {
    let below = threshold - THRESHOLD_PROBE;
    if below < c {
        return Ok(None);
    }
    let rule = SelectionRule::one_sided(c)?;
    let cfg = SolveConfig::default();
    let lo = solve_theta(p, below, &rule, &cfg)?.theta;
    let hi = solve_theta(p, threshold + THRESHOLD_PROBE, &rule, &cfg)?.theta;
    Ok(Some(lo < level && hi >= level))
}

pub fn threshold_row(p: f64, c: f64) -> Result<ThresholdRow> {
    let below_c = threshold_upper_below_c(p, c)?;
    let below_zero = threshold_upper_below_zero(p, c)?;
    Ok(ThresholdRow {
        p,
        c,
        below_c,
        below_zero,
        below_c_verified: verify_threshold(p, c, below_c, c)?,
        below_zero_verified: verify_threshold(p, c, below_zero, 0.0)?,
    })
}

fn curve_row(problem: &InferenceProblem) -> Result<CurveRow> {
    let ci = confidence_interval(problem)?;
    let conv = conventional_interval(problem.x_obs, problem.alpha)?;
    Ok(CurveRow {
        x_obs: problem.x_obs,
        mu: median_unbiased(problem)?,
        lo: ci.lower,
        hi: ci.upper,
        conv_lo: conv.lower,
        conv_hi: conv.upper,
    })
}

/// Evaluate the template's rule and level at every grid point. Rows are
/// computed concurrently and returned in grid order.
pub fn curve(template: &InferenceProblem, x_grid: &[f64]) -> Result<Curve> {
    let mut admitted = Vec::with_capacity(x_grid.len());
    let mut dropped = Vec::new();
    for &x in x_grid {
        if !x.is_finite() {
            return Err(Error::domain("grid point must be finite", x));
        }
        if template.rule.admits(x) {
            admitted.push(x);
        } else {
            dropped.push(x);
        }
    }
    let rows = admitted
        .par_iter()
        .map(|&x| {
            template
                .at(x)
                .and_then(|p| curve_row(&p))
                .map_err(|e| Error::AtDraw {
                    statistic: x,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Curve { rows, dropped })
}

/// Figure grid from `start` to `end`: steps of 0.005 up to `c + 0.5`, 0.01
/// beyond. Points are generated on an integer lattice so they do not drift.
pub fn figure_grid(c: f64, start: f64, end: f64) -> Vec<f64> {
    let fine_end = c + 0.5;
    let mut grid = Vec::new();
    let fine_steps = ((fine_end.min(end) - start) / 0.005 + 1e-9).floor();
    if fine_steps >= 0.0 {
        for i in 0..=fine_steps as u64 {
            grid.push(start + 0.005 * i as f64);
        }
    }
    let coarse_start = grid.last().map_or(start, |&x| x + 0.01);
    if coarse_start <= end + 1e-9 {
        let coarse_steps = ((end - coarse_start) / 0.01 + 1e-9).floor() as u64;
        for i in 0..=coarse_steps {
            grid.push(coarse_start + 0.01 * i as f64);
        }
    }
    grid.into_iter().map(|x| (x * 1e9).round() / 1e9).collect()
}

/// Uniform grid `start, start + step, ...` up to and including `end`.
pub fn uniform_grid(start: f64, end: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::domain("grid step must be positive", step));
    }
    if !(start.is_finite() && end.is_finite() && end >= start) {
        return Err(Error::domain("grid end must not precede its start", end));
    }
    let n = ((end - start) / step + 1e-9).floor() as u64;
    Ok((0..=n)
        .map(|i| ((start + step * i as f64) * 1e9).round() / 1e9)
        .collect())
}

/// Location and value of a maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Extremum {
    pub x: f64,
    pub value: f64,
}

/// Maximize `f` over `grid`, then refine by golden-section search over the
/// two grid cells around the best grid point.
pub fn grid_argmax<F>(f: F, grid: &[f64]) -> Result<Extremum>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    if grid.is_empty() {
        return Err(Error::domain("grid must not be empty", 0.0));
    }
    let values = grid.par_iter().map(|&x| f(x)).collect::<Result<Vec<_>>>()?;
    let best = values
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty grid");
    let lo = grid[best.saturating_sub(1)];
    let hi = grid[(best + 1).min(grid.len() - 1)];
    let refined = golden_section_max(&f, lo, hi, 1e-6)?;
    Ok(if refined.value >= values[best] {
        refined
    } else {
        Extremum {
            x: grid[best],
            value: values[best],
        }
    })
}

fn golden_section_max<F>(f: &F, mut lo: f64, mut hi: f64, tol: f64) -> Result<Extremum>
where
    F: Fn(f64) -> Result<f64>,
{
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 >= f2 {
        Extremum { x: x1, value: f1 }
    } else {
        Extremum { x: x2, value: f2 }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conditional::conditional_cdf;

    const C: f64 = 1.64;

    fn problem(x: f64, rule: SelectionRule) -> InferenceProblem {
        InferenceProblem::with_default_alpha(x, rule).unwrap()
    }

    #[test]
    fn one_sided_examples() {
        let rule = SelectionRule::one_sided(C).unwrap();
        assert!(confidence_interval(&problem(1.65, rule.clone())).unwrap().upper < 0.0);
        let ci = confidence_interval(&problem(10.0, rule.clone())).unwrap();
        assert!((ci.lower - 8.04).abs() < 1e-2 && (ci.upper - 11.96).abs() < 1e-2);
        assert!((median_unbiased(&problem(10.0, rule.clone())).unwrap() - 10.0).abs() < 1e-3);
        assert!(median_unbiased(&problem(1.645, rule)).unwrap() < -3.0);
    }

    #[test]
    fn two_sided_margin() {
        let p = problem(C + 1e-6, SelectionRule::two_sided(C).unwrap());
        assert!(median_unbiased(&p).unwrap().abs() < 1e-3);
        let len = confidence_interval(&p).unwrap().length();
        assert!((len - 1.77).abs() < 0.02, "length = {len}");
    }

    #[test]
    fn conventional_examples() {
        let ci = conventional_interval(0.0, 0.05).unwrap();
        assert!((ci.lower + 1.96).abs() < 1e-2 && (ci.upper - 1.96).abs() < 1e-2);
        assert_eq!(ci.kind, IntervalKind::Conventional);
        let ci = conventional_interval(2.0, 0.05).unwrap();
        assert!((ci.lower - 0.04).abs() < 1e-2 && (ci.upper - 3.96).abs() < 1e-2);
        assert!(conventional_interval(1.0, 1.0 - 1e-12).unwrap().length() < 1e-10);
        assert!(conventional_interval(1.0, 0.0).is_err());
    }

    #[test]
    fn thresholds() {
        let t = threshold_upper_below_c(0.025, C).unwrap();
        assert!((t - 1.671).abs() < 1e-3, "{t}");
        // quantile(0.95 * 0.025 + 0.95 + 0.05 * ...) evaluated with mpmath
        let z = threshold_upper_below_zero(0.025, C).unwrap();
        assert!((z - 1.652_267_469_311_12).abs() < 1e-9, "{z}");
        assert!(threshold_upper_below_zero(0.5, C).unwrap() > z);
        assert!(threshold_upper_below_c(0.5, C).unwrap() > t);
        assert!(threshold_upper_below_c(0.0, C).is_err());
        assert!(threshold_upper_below_zero(0.5, -1.0).is_err());

        let rule = SelectionRule::one_sided(C).unwrap();
        let cfg = SolveConfig::default();
        let th = |x: f64| solve_theta(0.025, x, &rule, &cfg).unwrap().theta;
        assert!(th(t - 0.01) < C && th(t + 0.01) >= C);
        assert!(th(z - 0.01) < 0.0 && th(z + 0.01) >= 0.0);
    }

    #[test]
    fn threshold_rows() {
        let row = threshold_row(0.025, C).unwrap();
        assert_eq!(row.below_c_verified, Some(true));
        assert_eq!(row.below_zero_verified, Some(true));
        let tiny = threshold_row(0.001, C).unwrap();
        assert_eq!(tiny.below_c_verified, None);
        assert!(threshold_row(0.5, C).unwrap().below_c > row.below_c);
    }

    #[test]
    fn nesting_and_equal_tails() {
        let rules = [
            SelectionRule::one_sided(C).unwrap(),
            SelectionRule::two_sided(C).unwrap(),
            SelectionRule::randomized_one_sided(C, 1.0).unwrap(),
            SelectionRule::randomized_two_sided(C, 1.0).unwrap(),
        ];
        for rule in rules {
            for &x in &[1.7, 2.5, 4.0] {
                let p95 = InferenceProblem::new(x, rule.clone(), 0.05).unwrap();
                let p90 = InferenceProblem::new(x, rule.clone(), 0.10).unwrap();
                let a = confidence_interval(&p95).unwrap();
                let b = confidence_interval(&p90).unwrap();
                assert!(a.lower <= b.lower && b.upper <= a.upper, "{rule} x={x}");
                let mu = median_unbiased(&p95).unwrap();
                assert!(a.lower < mu && mu < a.upper);
                let lo = conditional_cdf(x, a.lower, &rule).unwrap();
                let hi = conditional_cdf(x, a.upper, &rule).unwrap();
                assert!((lo - 0.975).abs() < 1e-8 && (hi - 0.025).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn problem_validation() {
        let rule = SelectionRule::one_sided(C).unwrap();
        assert!(InferenceProblem::new(2.0, rule.clone(), 0.5).is_err());
        assert!(InferenceProblem::new(2.0, rule.clone(), 0.0).is_err());
        assert!(InferenceProblem::new(1.0, rule, 0.05).is_err());
        let rand = SelectionRule::randomized_one_sided(C, 1.0).unwrap();
        assert!(InferenceProblem::new(-3.0, rand, 0.05).is_ok());
    }

    #[test]
    fn curve_rows_match_single_operations() {
        let p = problem(2.3, SelectionRule::two_sided(C).unwrap());
        let curve = curve(&p, &[2.3, 0.5, -2.0]).unwrap();
        assert_eq!(curve.dropped, vec![0.5]);
        assert_eq!(curve.rows.len(), 2);
        let row = curve.rows[0];
        let ci = confidence_interval(&p).unwrap();
        assert_eq!(row.mu, median_unbiased(&p).unwrap());
        assert_eq!((row.lo, row.hi), (ci.lower, ci.upper));
        assert_eq!(row.x_obs, 2.3);
        assert!(curve.rows[1].x_obs == -2.0 && curve.rows[1].mu < 0.0);
    }

    #[test]
    fn grids() {
        let g = figure_grid(C, 1.65, 6.0);
        assert_eq!(g[0], 1.65);
        assert_eq!(g[1], 1.655);
        assert_eq!(*g.last().unwrap(), 6.0);
        assert!(g.contains(&2.14) && g.contains(&2.15) && !g.contains(&2.145));
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        let u = uniform_grid(1.65, 6.0, 0.01).unwrap();
        assert_eq!(u.len(), 436);
        assert!(uniform_grid(1.0, 0.0, 0.1).is_err());
    }

    #[test]
    fn argmax_refines_between_grid_points() {
        let grid = uniform_grid(0.0, 1.0, 0.1).unwrap();
        let m = grid_argmax(|x| Ok(-(x - 0.537f64).powi(2)), &grid).unwrap();
        assert!((m.x - 0.537).abs() < 1e-5);
        assert!(m.value <= 0.0 && m.value > -1e-10);
    }
}
