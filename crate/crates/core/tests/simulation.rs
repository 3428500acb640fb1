use filedrawer::gaussian::tail;
use filedrawer::montecarlo::{
    coverage, empirical_conditional_cdf, naive_coverage, pit_uniformity, pit_uniformity_at,
    simulate_accepted,
};
use filedrawer::{conditional_cdf, Error, SelectionRule, SimulationPlan};

const C: f64 = 1.64;

fn plan(theta: f64, rule: SelectionRule, n: usize, seed: u64) -> SimulationPlan {
    SimulationPlan::new(theta, rule, n, seed).unwrap()
}

fn one_sided() -> SelectionRule {
    SelectionRule::one_sided(C).unwrap()
}

fn two_sided() -> SelectionRule {
    SelectionRule::two_sided(C).unwrap()
}

#[test]
fn deterministic_given_seed_and_chunk_size() {
    let p = plan(0.5, SelectionRule::randomized_two_sided(C, 1.0).unwrap(), 5000, 42);
    let a = simulate_accepted(&p).unwrap();
    let b = simulate_accepted(&p).unwrap();
    assert_eq!(a, b);
    let other = simulate_accepted(&plan(0.5, p.rule.clone(), 5000, 43)).unwrap();
    assert_ne!(a.values, other.values);
    let prefix = simulate_accepted(&plan(0.5, p.rule.clone(), 1000, 42)).unwrap();
    assert_eq!(prefix.values[..], a.values[..1000]);
}

#[test]
fn acceptance_rates() {
    let sure = simulate_accepted(&plan(50.0, one_sided(), 10_000, 1)).unwrap();
    assert!(sure.acceptance_rate() > 0.999_999);
    for (rule, expected) in [(one_sided(), tail(C)), (two_sided(), 2.0 * tail(C))] {
        let s = simulate_accepted(&plan(0.0, rule, 50_000, 2)).unwrap();
        let se = (expected * (1.0 - expected) / s.draws as f64).sqrt();
        assert!((s.acceptance_rate() - expected).abs() < 3.0 * se);
    }
    assert!((tail(C) - 0.0505).abs() < 1e-4);
}

#[test]
fn accepted_values_respect_the_event() {
    let s = simulate_accepted(&plan(0.0, one_sided(), 20_000, 3)).unwrap();
    assert!(s.values.iter().all(|&x| x >= C));
    let s = simulate_accepted(&plan(0.0, two_sided(), 20_000, 3)).unwrap();
    assert!(s.values.iter().all(|&x| x.abs() >= C));
    let s = simulate_accepted(&plan(0.0, SelectionRule::randomized_one_sided(C, 1.0).unwrap(), 20_000, 3)).unwrap();
    assert!(s.values.iter().any(|&x| x < C));
}

#[test]
fn empirical_cdf_edges() {
    let p = plan(0.0, one_sided(), 20_000, 4);
    assert_eq!(empirical_conditional_cdf(f64::INFINITY, &p).unwrap().value, 1.0);
    assert_eq!(empirical_conditional_cdf(C, &p).unwrap().value, 0.0);
}

fn assert_oracle(a: f64, theta: f64, rule: SelectionRule, n: usize, seed: u64) {
    let analytic = conditional_cdf(a, theta, &rule).unwrap();
    let est = empirical_conditional_cdf(a, &plan(theta, rule.clone(), n, seed)).unwrap();
    let z = est.z_score(analytic);
    assert!(z.abs() < 3.0, "{rule} a={a} theta={theta}: {} vs {analytic} (z = {z:.2})", est.value);
}

#[test]
fn analytic_cdfs_match_simulation() {
    assert_oracle(2.0, 0.0, one_sided(), 400_000, 5);
    assert_oracle(2.5, 1.0, two_sided(), 1_000_000, 6);
    assert_oracle(C, 0.0, SelectionRule::randomized_one_sided(C, 1.0).unwrap(), 1_000_000, 7);
    assert_oracle(2.0, 0.5, SelectionRule::randomized_two_sided(C, 1.0).unwrap(), 1_000_000, 8);
}

#[test]
fn conditional_coverage_holds() {
    for (theta, rule) in [(0.0, one_sided()), (2.0, two_sided())] {
        let report = coverage(&plan(theta, rule.clone(), 100_000, 9), 0.05).unwrap();
        assert!(report.within_band(0.95, 3.0), "{rule}: {report:?}");
        assert!(report.n_covered <= report.n_accepted);
        let se = (report.coverage * (1.0 - report.coverage) / report.n_accepted as f64).sqrt();
        assert_eq!(report.std_error, se);
    }
}

#[test]
fn conventional_interval_undercovers_under_selection() {
    let report = naive_coverage(&plan(0.0, one_sided(), 50_000, 10), 0.05).unwrap();
    assert!(report.coverage < 0.9, "{report:?}");
    assert!(!report.within_band(0.95, 3.0));
}

#[test]
fn pit_detects_the_wrong_parameter() {
    let p = plan(1.0, SelectionRule::randomized_one_sided(C, 1.0).unwrap(), 20_000, 11);
    assert!(pit_uniformity(&p).unwrap().pass);
    let wrong = pit_uniformity_at(&p, 2.0).unwrap();
    assert!(!wrong.pass, "{wrong:?}");
    assert!(wrong.statistic <= 1.0);
}

#[test]
fn rare_selection_is_reported() {
    let err = simulate_accepted(&plan(-60.0, one_sided(), 10, 12)).unwrap_err();
    assert!(matches!(err, Error::SelectionTooRare { .. }), "{err}");
    let capped = plan(0.0, one_sided(), 1_000_000, 12).with_max_draws(100_000).unwrap();
    assert!(matches!(simulate_accepted(&capped), Err(Error::DrawCapReached { .. })));
}

#[test]
fn plan_validation() {
    assert!(SimulationPlan::new(0.0, one_sided(), 0, 1).is_err());
    assert!(SimulationPlan::new(f64::NAN, one_sided(), 10, 1).is_err());
    assert!(plan(0.0, one_sided(), 10, 1).with_chunk_size(0).is_err());
    assert!(coverage(&plan(0.0, one_sided(), 10, 1), 0.6).is_err());
}
