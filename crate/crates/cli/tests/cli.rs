use std::fs;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_filedrawer"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn parse_csv(text: &str) -> Vec<Vec<f64>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn ci_marginal_one_sided_warns() {
    let o = run(&["ci", "--kind", "one-sided", "--c", "1.64", "--alpha", "0.05", "--x-obs", "1.65", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["conditional"]["upper"].as_f64().unwrap() < 0.0);
    assert!(stderr(&o).contains("marginal significance: location problem"));
}

#[test]
fn ci_high_significance() {
    let o = run(&["ci", "--kind", "one-sided", "--c", "1.64", "--x-obs", "10", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let lo = v["conditional"]["lower"].as_f64().unwrap();
    let hi = v["conditional"]["upper"].as_f64().unwrap();
    assert!((lo - 8.04).abs() < 0.01 && (hi - 11.96).abs() < 0.01);
    assert!(stderr(&o).is_empty());
}

#[test]
fn ci_text_output() {
    let o = run(&["ci", "--kind", "two-sided", "--x-obs", "-2.5"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("median-unbiased"));
    assert!(out.contains("conventional 95% CI"));
}

#[test]
fn ci_not_significant() {
    let o = run(&["ci", "--kind", "one-sided", "--c", "1.64", "--x-obs", "1.0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not significant"));
}

#[test]
fn domain_errors_exit_2() {
    assert_eq!(run(&["ci", "--x-obs", "2", "--alpha", "0.7"]).status.code(), Some(2));
    assert_eq!(run(&["ci", "--x-obs", "2", "--kind", "rand-one-sided", "--eta2", "0"]).status.code(), Some(2));
    assert_eq!(run(&["thresholds", "--p", "1.5"]).status.code(), Some(2));
}

#[test]
fn estimate_matches_library() {
    let o = run(&["estimate", "--kind", "rand-one-sided", "--eta2", "1", "--x-obs", "2.0"]);
    assert_eq!(o.status.code(), Some(0));
    let mu: f64 = stdout(&o).trim().parse().unwrap();
    let rule = filedrawer::SelectionRule::randomized_one_sided(1.64, 1.0).unwrap();
    let p = filedrawer::InferenceProblem::new(2.0, rule, 0.05).unwrap();
    let expected = filedrawer::median_unbiased(&p).unwrap();
    assert!((mu - expected).abs() < 1e-9);
}

#[test]
fn figure1_preset() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("fig1.csv");
    let o = run(&["curve", "--preset", "figure1", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("x_obs,mu,lo,hi,conv_lo,conv_hi\n"));
    assert!(!text.contains('\r'));
    let rows = parse_csv(&text);
    let last = rows.last().unwrap();
    assert_eq!(last[0], 6.0);
    assert!((last[1] - 6.0).abs() < 1e-3);
    assert!(rows.iter().all(|r| r[2] <= r[1] && r[1] <= r[3]));
    // the interval is wider than the conventional one near c
    assert!(rows[0][3] - rows[0][2] > rows[0][5] - rows[0][4]);
    let second = text.lines().nth(1).unwrap();
    assert_eq!(second.split(',').next().unwrap(), "1.650000000");
}

#[test]
fn figure2_preset_is_stable() {
    let o = run(&["curve", "--preset", "figure2"]);
    assert_eq!(o.status.code(), Some(0));
    let rows = parse_csv(&stdout(&o));
    assert!(rows.len() > 400);
    assert!(rows.iter().flatten().all(|&v| v >= -10.0));
}

#[test]
fn curve_is_deterministic_and_single_point() {
    let a = run(&["curve", "--kind", "two-sided", "--x-obs", "2.3"]);
    let b = run(&["curve", "--kind", "two-sided", "--x-obs", "2.3"]);
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout(&a).lines().count(), 2);
}

#[test]
fn curve_drops_points_outside_event() {
    let o = run(&["curve", "--kind", "two-sided", "--x-obs", "-2,0.5,2"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).lines().count(), 3);
    assert!(stderr(&o).contains("dropped 1"));
}

#[test]
fn curve_unwritable_path() {
    let o = run(&["curve", "--x-obs", "2", "--out", "/nonexistent-dir/x.csv"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn coverage_strict_passes_and_naive_fails() {
    let args = ["coverage", "--kind", "one-sided", "--theta", "0", "--n", "20000", "--seed", "11", "--strict", "--json"];
    let a = run(&args);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
    let mut naive = args.to_vec();
    naive.push("--naive");
    let n = run(&naive);
    assert_eq!(n.status.code(), Some(4));
    let v: serde_json::Value = serde_json::from_str(&stdout(&n)).unwrap();
    assert!(v["report"]["coverage"].as_f64().unwrap() < 0.9);
}

#[test]
fn thresholds_table() {
    let o = run(&["thresholds", "--c", "1.64", "--p", "0.025,0.5", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let rows = v.as_array().unwrap();
    assert!((rows[0]["below_c"].as_f64().unwrap() - 1.671).abs() < 1e-3);
    assert!((rows[0]["below_zero"].as_f64().unwrap() - 1.6523).abs() < 1e-3);
    assert!(rows[1]["below_c"].as_f64().unwrap() > rows[0]["below_c"].as_f64().unwrap());
    assert_eq!(rows[0]["below_c_verified"], serde_json::Value::Bool(true));
}

#[test]
fn selfcheck_json_subset() {
    let o = run(&["selfcheck", "--only", "1,4,12", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let items = v.as_array().unwrap();
    assert_eq!(items.len(), 3);
    for item in items {
        for key in ["name", "expected", "observed", "tolerance", "pass"] {
            assert!(item.get(key).is_some(), "missing {key}");
        }
        assert_eq!(item["pass"], serde_json::Value::Bool(true));
    }
}

#[test]
fn selfcheck_failure_exits_4() {
    let o = run(&["selfcheck", "--only", "2"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).contains("[FAIL]"));
}
