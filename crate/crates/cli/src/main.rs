//! `filedrawer`: selection-adjusted estimates and intervals for statistics
//! reported only after a significance screen.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use filedrawer::acceptance::{run_all_with, run_criterion, SuiteConfig, DEFAULT_SEED};
use filedrawer::inference::{figure_grid, threshold_row, uniform_grid, Curve};
use filedrawer::montecarlo::{coverage, naive_coverage};
use filedrawer::{
    confidence_interval, conventional_interval, curve, median_unbiased, Error, InferenceProblem,
    RuleKind, SelectionRule, SimulationPlan,
};

const EXIT_PRECONDITION: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_STRICT: u8 = 4;
const EXIT_IO: u8 = 1;

#[derive(Parser)]
#[command(name = "filedrawer", version, about, long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Conditional and conventional confidence intervals for one observation
    Ci(PointArgs),
    /// Median-unbiased estimate for one observation
    Estimate(PointArgs),
    /// Figure data as CSV: estimate and both intervals over a grid
    Curve(CurveArgs),
    /// Simulated conditional coverage of the intervals
    Coverage(CoverageArgs),
    /// Observation thresholds below which theta(p) < c and theta(p) < 0
    Thresholds(ThresholdArgs),
    /// Run the acceptance suite
    Selfcheck(SelfcheckArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    OneSided,
    TwoSided,
    RandOneSided,
    RandTwoSided,
}

impl From<Kind> for RuleKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::OneSided => RuleKind::OneSided,
            Kind::TwoSided => RuleKind::TwoSided,
            Kind::RandOneSided => RuleKind::RandomizedOneSided,
            Kind::RandTwoSided => RuleKind::RandomizedTwoSided,
        }
    }
}

#[derive(Args, Clone)]
struct RuleArgs {
    /// Significance rule
    #[arg(long, value_enum, default_value = "one-sided")]
    kind: Kind,
    /// Critical value
    #[arg(long, default_value_t = 1.64)]
    c: f64,
    /// Randomization variance for the randomized rules
    #[arg(long, default_value_t = 1.0)]
    eta2: f64,
    /// One minus the confidence level
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

impl RuleArgs {
    fn rule(&self) -> Result<SelectionRule, Error> {
        let kind = RuleKind::from(self.kind);
        let eta = if kind.is_randomized() {
            if !(self.eta2 > 0.0) {
                return Err(Error::Domain {
                    what: "eta2 must be positive for randomized rules",
                    value: self.eta2,
                });
            }
            Some(self.eta2.sqrt())
        } else {
            None
        };
        SelectionRule::new(kind, self.c, eta)
    }
}

#[derive(Args)]
struct PointArgs {
    #[command(flatten)]
    rule: RuleArgs,
    /// Observed t-statistic
    #[arg(long, allow_hyphen_values = true)]
    x_obs: f64,
    /// Print JSON instead of text
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// One-sided, c = 1.64
    Figure1,
    /// Randomized one-sided, eta^2 = 1
    Figure2,
    /// Two-sided, c = 1.64
    Figure3,
    /// Randomized two-sided, eta^2 = 1
    Figure3Rand,
}

#[derive(Args)]
struct CurveArgs {
    #[command(flatten)]
    rule: RuleArgs,
    /// Figure settings; overrides the rule and grid options
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Grid start
    #[arg(long, allow_hyphen_values = true)]
    from: Option<f64>,
    /// Grid end
    #[arg(long, allow_hyphen_values = true)]
    to: Option<f64>,
    /// Grid step; without it the default figure stepping is used
    #[arg(long)]
    step: Option<f64>,
    /// Explicit grid points, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x_obs: Vec<f64>,
    /// Output CSV path; stdout if omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CoverageArgs {
    #[command(flatten)]
    rule: RuleArgs,
    /// True parameter used to simulate
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    theta: f64,
    /// Number of accepted draws
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Draws per generator chunk
    #[arg(long, default_value_t = filedrawer::montecarlo::DEFAULT_CHUNK_SIZE)]
    chunk_size: usize,
    /// Use the conventional interval that ignores selection
    #[arg(long)]
    naive: bool,
    /// Exit with status 4 unless coverage is within 3 standard errors of 1 - alpha
    #[arg(long)]
    strict: bool,
    /// Also write the report as CSV
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ThresholdArgs {
    /// Critical value
    #[arg(long, default_value_t = 1.64)]
    c: f64,
    /// Probabilities p, comma separated
    #[arg(long, value_delimiter = ',', default_value = "0.025,0.05,0.1,0.5,0.9,0.975")]
    p: Vec<f64>,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SelfcheckArgs {
    /// Monte Carlo sizes reduced tenfold
    #[arg(long)]
    quick: bool,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Run only these criteria (comma separated ids)
    #[arg(long, value_delimiter = ',')]
    only: Vec<u8>,
    #[arg(long)]
    json: bool,
}

enum Failure {
    Lib(Error),
    Io(io::Error, Option<PathBuf>),
    Strict(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Io(e, None)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ci(args) => cmd_ci(&args),
        Command::Estimate(args) => cmd_estimate(&args),
        Command::Curve(args) => cmd_curve(&args),
        Command::Coverage(args) => cmd_coverage(&args),
        Command::Thresholds(args) => cmd_thresholds(&args),
        Command::Selfcheck(args) => cmd_selfcheck(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            report_error(&e);
            ExitCode::from(if e.is_precondition() {
                EXIT_PRECONDITION
            } else {
                EXIT_SOLVER
            })
        }
        Err(Failure::Io(e, path)) => {
            match path {
                Some(p) => eprintln!("error: {}: {e}", p.display()),
                None => eprintln!("error: {e}"),
            }
            ExitCode::from(EXIT_IO)
        }
        Err(Failure::Strict(msg)) => {
            eprintln!("strict check failed: {msg}");
            ExitCode::from(EXIT_STRICT)
        }
    }
}

fn report_error(e: &Error) {
    let mut root = e;
    while let Error::AtDraw { source, .. } = root {
        root = source;
    }
    if let Error::OutsideEvent { statistic, event } = root {
        eprintln!("error: x_obs = {statistic} is not significant ({event} fails)");
    }
    eprintln!("error: {e}");
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable"));
}

fn cmd_ci(args: &PointArgs) -> Result<(), Failure> {
    let rule = args.rule.rule()?;
    let problem = InferenceProblem::new(args.x_obs, rule.clone(), args.rule.alpha)?;
    let mu = median_unbiased(&problem)?;
    let ci = confidence_interval(&problem)?;
    let conv = conventional_interval(args.x_obs, args.rule.alpha)?;
    if rule.kind() == RuleKind::OneSided && ci.upper < 0.0 {
        eprintln!(
            "warning: marginal significance: location problem (conditional upper bound {:.6} < 0)",
            ci.upper
        );
    }
    if args.json {
        print_json(&json!({
            "x_obs": args.x_obs,
            "rule": rule,
            "alpha": args.rule.alpha,
            "median_unbiased": mu,
            "conditional": ci,
            "conventional": conv,
        }));
    } else {
        let pct = 100.0 * ci.level;
        println!("rule:                {rule}");
        println!("x_obs:               {}", args.x_obs);
        println!("median-unbiased:     {mu:.6}");
        println!("conditional {pct}% CI: [{:.6}, {:.6}]", ci.lower, ci.upper);
        println!("conventional {pct}% CI: [{:.6}, {:.6}]", conv.lower, conv.upper);
    }
    Ok(())
}

fn cmd_estimate(args: &PointArgs) -> Result<(), Failure> {
    let rule = args.rule.rule()?;
    let problem = InferenceProblem::new(args.x_obs, rule.clone(), args.rule.alpha)?;
    let mu = median_unbiased(&problem)?;
    if args.json {
        print_json(&json!({ "x_obs": args.x_obs, "rule": rule, "median_unbiased": mu }));
    } else {
        println!("{mu:.9}");
    }
    Ok(())
}

fn preset_rule(preset: Preset, rule: &RuleArgs) -> RuleArgs {
    let kind = match preset {
        Preset::Figure1 => Kind::OneSided,
        Preset::Figure2 => Kind::RandOneSided,
        Preset::Figure3 => Kind::TwoSided,
        Preset::Figure3Rand => Kind::RandTwoSided,
    };
    RuleArgs {
        kind,
        c: 1.64,
        eta2: 1.0,
        alpha: rule.alpha,
    }
}

fn curve_grid(args: &CurveArgs, c: f64) -> Result<Vec<f64>, Error> {
    if args.preset.is_some() {
        return Ok(figure_grid(c, 1.65, 6.0));
    }
    if !args.x_obs.is_empty() {
        return Ok(args.x_obs.clone());
    }
    let from = args.from.unwrap_or(c + 0.01);
    let to = args.to.unwrap_or(6.0);
    match args.step {
        Some(step) => uniform_grid(from, to, step),
        None if to >= from => Ok(figure_grid(c, from, to)),
        None => Err(Error::Domain {
            what: "grid end must not precede its start",
            value: to,
        }),
    }
}

fn write_curve<W: Write>(out: W, curve: &Curve) -> io::Result<()> {
    let mut out = BufWriter::new(out);
    out.write_all(b"x_obs,mu,lo,hi,conv_lo,conv_hi\n")?;
    for r in &curve.rows {
        writeln!(
            out,
            "{:.9},{:.9},{:.9},{:.9},{:.9},{:.9}",
            r.x_obs, r.mu, r.lo, r.hi, r.conv_lo, r.conv_hi
        )?;
    }
    out.flush()
}

fn create(path: &Path) -> Result<File, Failure> {
    File::create(path).map_err(|e| Failure::Io(e, Some(path.to_path_buf())))
}

fn cmd_curve(args: &CurveArgs) -> Result<(), Failure> {
    let rule_args = match args.preset {
        Some(p) => preset_rule(p, &args.rule),
        None => args.rule.clone(),
    };
    let rule = rule_args.rule()?;
    let grid = curve_grid(args, rule.c())?;
    if grid.is_empty() {
        return Err(Error::Domain {
            what: "grid must not be empty",
            value: 0.0,
        }
        .into());
    }
    // the template only fixes rule and level; any admissible point will do
    let anchor = grid.iter().copied().find(|&x| rule.admits(x)).unwrap_or(rule.c());
    let template = InferenceProblem::new(anchor, rule.clone(), rule_args.alpha)?;
    let curve = curve(&template, &grid)?;
    if !curve.dropped.is_empty() {
        eprintln!(
            "note: dropped {} grid point(s) outside the event {}",
            curve.dropped.len(),
            rule.event_description()
        );
    }
    if rule.kind() == RuleKind::OneSided && curve.rows.iter().any(|r| r.hi < 0.0) {
        eprintln!("warning: marginal significance: location problem (some upper bounds < 0)");
    }
    match &args.out {
        Some(path) => {
            let file = create(path)?;
            write_curve(file, &curve).map_err(|e| Failure::Io(e, Some(path.clone())))?;
            eprintln!("wrote {} rows to {}", curve.rows.len(), path.display());
        }
        None => write_curve(io::stdout().lock(), &curve)?,
    }
    Ok(())
}

fn cmd_coverage(args: &CoverageArgs) -> Result<(), Failure> {
    let rule = args.rule.rule()?;
    let plan = SimulationPlan::new(args.theta, rule.clone(), args.n, args.seed)?
        .with_chunk_size(args.chunk_size)?;
    let report = if args.naive {
        naive_coverage(&plan, args.rule.alpha)?
    } else {
        coverage(&plan, args.rule.alpha)?
    };
    let target = 1.0 - args.rule.alpha;
    let within = report.within_band(target, 3.0);
    let interval = if args.naive { "conventional" } else { "conditional" };
    if args.json {
        print_json(&json!({
            "rule": rule,
            "theta_true": args.theta,
            "interval": interval,
            "seed": args.seed,
            "target": target,
            "report": report,
            "within_3se": within,
        }));
    } else {
        println!("rule:       {rule}");
        println!("theta_true: {}", args.theta);
        println!("interval:   {interval}");
        println!("n:          {}", report.n_accepted);
        println!("covered:    {}", report.n_covered);
        println!("coverage:   {:.6}", report.coverage);
        println!("std_error:  {:.6}", report.std_error);
        println!("within 3 SE of {target}: {within}");
    }
    if let Some(path) = &args.out {
        let write = |mut f: File| -> io::Result<()> {
            f.write_all(b"n_accepted,n_covered,coverage,std_error\n")?;
            writeln!(
                f,
                "{},{},{:.9},{:.9}",
                report.n_accepted, report.n_covered, report.coverage, report.std_error
            )
        };
        write(create(path)?).map_err(|e| Failure::Io(e, Some(path.clone())))?;
    }
    if args.strict && !within {
        return Err(Failure::Strict(format!(
            "coverage {:.6} is not within 3 SE ({:.6}) of {target}",
            report.coverage,
            3.0 * report.std_error
        )));
    }
    Ok(())
}

fn flag(v: Option<bool>) -> &'static str {
    match v {
        Some(true) => "ok",
        Some(false) => "FAIL",
        None => "n/a",
    }
}

fn cmd_thresholds(args: &ThresholdArgs) -> Result<(), Failure> {
    let rows = args
        .p
        .iter()
        .map(|&p| threshold_row(p, args.c))
        .collect::<Result<Vec<_>, _>>()?;
    if args.json {
        print_json(&json!(rows));
    } else {
        println!(
            "{:>8} {:>12} {:>8} {:>12} {:>8}",
            "p", "below_c", "check", "below_zero", "check"
        );
        for r in &rows {
            println!(
                "{:>8} {:>12.6} {:>8} {:>12.6} {:>8}",
                r.p,
                r.below_c,
                flag(r.below_c_verified),
                r.below_zero,
                flag(r.below_zero_verified)
            );
        }
    }
    if rows
        .iter()
        .any(|r| r.below_c_verified == Some(false) || r.below_zero_verified == Some(false))
    {
        return Err(Failure::Strict("solver cross-check disagrees with a threshold".into()));
    }
    Ok(())
}

fn cmd_selfcheck(args: &SelfcheckArgs) -> Result<(), Failure> {
    let cfg = SuiteConfig {
        quick: args.quick,
        seed: args.seed,
    };
    let show = |r: &filedrawer::acceptance::CriterionResult| {
        if !args.json {
            println!("{r}");
        }
    };
    let results = if args.only.is_empty() {
        run_all_with(&cfg, show)
    } else {
        let mut out = Vec::new();
        for &id in &args.only {
            let r = run_criterion(id, &cfg).ok_or(Error::Domain {
                what: "unknown criterion id",
                value: id as f64,
            })?;
            show(&r);
            out.push(r);
        }
        out
    };
    if args.json {
        let report: Vec<_> = results
            .iter()
            .map(|r| {
                json!({
                    "name": r.name,
                    "expected": r.expected,
                    "observed": r.observed,
                    "tolerance": r.tolerance,
                    "pass": r.pass,
                    "id": r.id,
                    "detail": r.detail,
                })
            })
            .collect();
        print_json(&json!(report));
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    if !args.json {
        println!("{} passed, {failed} failed", results.len() - failed);
    }
    if failed > 0 {
        return Err(Failure::Strict(format!("{failed} acceptance criteria failed")));
    }
    Ok(())
}
