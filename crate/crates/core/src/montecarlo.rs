//! Seeded simulation of the selection mechanism, used as an oracle for the
//! analytic conditional CDFs and to check conditional coverage.
//!
//! Draws are produced in fixed-size chunks. Chunk `k` uses a ChaCha8 stream
//! selected by `(seed, k)`, so the accepted sequence depends only on the seed
//! and the chunk size, never on how many threads generated it.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::conditional::{conditional_cdf, SelectionRule};
use crate::error::{Error, Result};
use crate::gaussian::quantile_unchecked;
use crate::inference::{
    check_alpha, confidence_interval, conventional_interval, ConfidenceInterval, InferenceProblem,
};

pub const DEFAULT_CHUNK_SIZE: usize = 1 << 16;
pub const DEFAULT_MAX_DRAWS: u64 = 1 << 36;
/// Acceptance rates below this are reported as too rare to simulate.
pub const RARE_RATE: f64 = 1e-9;
/// Draws required before the rare-event check applies.
pub const RARE_CHECK_DRAWS: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationPlan {
    pub theta_true: f64,
    pub rule: SelectionRule,
    pub n_target_accepted: usize,
    pub seed: u64,
    pub chunk_size: usize,
    pub max_draws: u64,
}

impl SimulationPlan {
    pub fn new(theta_true: f64, rule: SelectionRule, n_target_accepted: usize, seed: u64) -> Result<Self> {
        let plan = SimulationPlan {
            theta_true,
            rule,
            n_target_accepted,
            seed,
            chunk_size: DEFAULT_CHUNK_SIZE,
            max_draws: DEFAULT_MAX_DRAWS,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn with_chunk_size(mut self, chunk_size: usize) -> Result<Self> {
        self.chunk_size = chunk_size;
        self.validate()?;
        Ok(self)
    }

    pub fn with_max_draws(mut self, max_draws: u64) -> Result<Self> {
        self.max_draws = max_draws;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.theta_true.is_finite() {
            return Err(Error::domain("theta_true must be finite", self.theta_true));
        }
        if self.n_target_accepted < 1 {
            return Err(Error::domain("n_target_accepted must be at least 1", 0.0));
        }
        if self.chunk_size < 1 {
            return Err(Error::domain("chunk_size must be at least 1", 0.0));
        }
        if self.max_draws < 1 {
            return Err(Error::domain("max_draws must be at least 1", 0.0));
        }
        Ok(())
    }
}

/// Accepted statistics in generation order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AcceptedSample {
    pub values: Vec<f64>,
    /// Draws in all chunks consumed, including the tail of the last one.
    pub draws: u64,
    /// Accepted draws in those chunks; at least `values.len()`.
    pub hits: u64,
}

impl AcceptedSample {
    pub fn acceptance_rate(&self) -> f64 {
        self.hits as f64 / self.draws as f64
    }

    /// Fraction of accepted statistics at or below `a`.
    pub fn empirical_cdf(&self, a: f64) -> Estimate {
        let below = self.values.iter().filter(|&&x| x <= a).count();
        Estimate::proportion(below, self.values.len())
    }
}

/// A Monte Carlo proportion with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
    pub n: usize,
}

impl Estimate {
    fn proportion(hits: usize, n: usize) -> Self {
        let value = hits as f64 / n as f64;
        Estimate {
            value,
            std_error: (value * (1.0 - value) / n as f64).sqrt(),
            n,
        }
    }

    /// Whether `target` lies within `k` standard errors.
    pub fn agrees_with(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error
    }

    /// Deviation from a hypothesized proportion in units of the standard
    /// error implied by that proportion. Usable when the estimate is 0 or 1.
    pub fn z_score(&self, target: f64) -> f64 {
        let se = (target * (1.0 - target) / self.n as f64).sqrt();
        let diff = self.value - target;
        if diff == 0.0 {
            0.0
        } else {
            diff / se
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageReport {
    pub n_accepted: usize,
    pub n_covered: usize,
    pub coverage: f64,
    pub std_error: f64,
}

impl CoverageReport {
    fn new(n_covered: usize, n_accepted: usize) -> Self {
        let e = Estimate::proportion(n_covered, n_accepted);
        CoverageReport {
            n_accepted,
            n_covered,
            coverage: e.value,
            std_error: e.std_error,
        }
    }

    pub fn within_band(&self, target: f64, k: f64) -> bool {
        (self.coverage - target).abs() <= k * self.std_error
    }
}

/// Kolmogorov-Smirnov distance of a sample to Uniform(0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsReport {
    pub n: usize,
    pub statistic: f64,
    pub critical_value: f64,
    pub pass: bool,
}

/// Asymptotic 1% critical value of the KS statistic, times sqrt(n).
pub const KS_CRITICAL_1PCT: f64 = 1.628;

fn uniform(rng: &mut ChaCha8Rng) -> f64 {
    // midpoint of one of 2^53 equal cells, never 0 or 1
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    quantile_unchecked(uniform(rng))
}

fn run_chunk(plan: &SimulationPlan, index: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    rng.set_stream(index);
    let eta = plan.rule.eta();
    let mut accepted = Vec::new();
    for _ in 0..plan.chunk_size {
        let x = plan.theta_true + standard_normal(&mut rng);
        let w = match eta {
            Some(eta) => eta * standard_normal(&mut rng),
            None => 0.0,
        };
        if plan.rule.selects(x, w) {
            accepted.push(x);
        }
    }
    accepted
}

/// Draw until `n_target_accepted` statistics pass the rule.
pub fn simulate_accepted(plan: &SimulationPlan) -> Result<AcceptedSample> {
    plan.validate()?;
    let batch = (rayon::current_num_threads() * 4) as u64;
    let chunk = plan.chunk_size as u64;
    let mut values = Vec::with_capacity(plan.n_target_accepted);
    let mut draws = 0u64;
    let mut hits = 0u64;
    let mut next = 0u64;
    loop {
        let chunks: Vec<Vec<f64>> = (next..next + batch)
            .into_par_iter()
            .map(|k| run_chunk(plan, k))
            .collect();
        next += batch;
        for accepted in chunks {
            draws += chunk;
            hits += accepted.len() as u64;
            let room = plan.n_target_accepted - values.len();
            values.extend(accepted.into_iter().take(room));
            if values.len() == plan.n_target_accepted {
                return Ok(AcceptedSample { values, draws, hits });
            }
        }
        let rate = hits as f64 / draws as f64;
        if draws >= RARE_CHECK_DRAWS && rate < RARE_RATE {
            return Err(Error::SelectionTooRare { rate, draws });
        }
        if draws >= plan.max_draws {
            return Err(Error::DrawCapReached {
                cap: plan.max_draws,
                accepted: values.len(),
            });
        }
    }
}

/// Monte Carlo estimate of `P(X <= a | selected)`.
pub fn empirical_conditional_cdf(a: f64, plan: &SimulationPlan) -> Result<Estimate> {
    Ok(simulate_accepted(plan)?.empirical_cdf(a))
}

fn at_draw(x: f64) -> impl Fn(Error) -> Error {
    move |e| Error::AtDraw {
        statistic: x,
        source: Box::new(e),
    }
}

fn count_covered<F>(plan: &SimulationPlan, interval: F) -> Result<CoverageReport>
where
    F: Fn(f64) -> Result<ConfidenceInterval> + Sync,
{
    let sample = simulate_accepted(plan)?;
    let covered = sample
        .values
        .par_iter()
        .map(|&x| {
            interval(x)
                .map(|ci| ci.contains(plan.theta_true) as usize)
                .map_err(at_draw(x))
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(CoverageReport::new(covered, sample.values.len()))
}

/// Fraction of accepted draws whose conditional interval contains
/// `theta_true`.
pub fn coverage(plan: &SimulationPlan, alpha: f64) -> Result<CoverageReport> {
    check_alpha(alpha)?;
    count_covered(plan, |x| {
        confidence_interval(&InferenceProblem::new(x, plan.rule.clone(), alpha)?)
    })
}

/// Coverage of the conventional interval `x +- z` on the same accepted
/// draws, which ignores selection.
pub fn naive_coverage(plan: &SimulationPlan, alpha: f64) -> Result<CoverageReport> {
    check_alpha(alpha)?;
    count_covered(plan, |x| conventional_interval(x, alpha))
}

/// KS distance of `values` (each in [0, 1]) to Uniform(0, 1). Sorts in place.
pub fn ks_uniform(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    values
        .iter()
        .enumerate()
        .map(|(i, &u)| {
            let i = i as f64;
            ((i + 1.0) / n - u).max(u - i / n)
        })
        .fold(0.0, f64::max)
}

/// PIT check: `F(X_i; theta_true)` over accepted draws should be uniform.
pub fn pit_uniformity(plan: &SimulationPlan) -> Result<KsReport> {
    pit_uniformity_at(plan, plan.theta_true)
}

/// PIT check with the model CDF evaluated at `theta_model` instead of the
/// simulating value.
pub fn pit_uniformity_at(plan: &SimulationPlan, theta_model: f64) -> Result<KsReport> {
    let sample = simulate_accepted(plan)?;
    let mut u = sample
        .values
        .par_iter()
        .map(|&x| conditional_cdf(x, theta_model, &plan.rule).map_err(at_draw(x)))
        .collect::<Result<Vec<_>>>()?;
    let n = u.len();
    let statistic = ks_uniform(&mut u);
    let critical_value = KS_CRITICAL_1PCT / (n as f64).sqrt();
    Ok(KsReport {
        n,
        statistic,
        critical_value,
        pass: statistic < critical_value,
    })
}
