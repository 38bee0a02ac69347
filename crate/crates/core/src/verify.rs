//! Self-verification suite for a single contract.
//!
//! Each check compares the closed form against an independent computation:
//! the pricing equation by finite differences, the boundary conditions, the
//! shape properties, the Monte Carlo oracle and quadrature of the exit-time
//! density.

use std::fmt::Write as _;

use crate::boundary::{gtilde_convexity_report, solve_boundary};
use crate::error::{Result, StockLoanError};
use crate::mc::{estimate_cap_wait_value, estimate_hitting_laplace, estimate_rule_value, SimConfig, StoppingRule};
use crate::model::{classify_regime_with, compute_roots, LoanTerms, MarketParams, RegimePolicy};
use crate::sweep::format_significant;
use crate::valuation::{
    hitting_expectation, laplace_by_quadrature, ode_residual, smooth_fit_defect, CapBranch, ValueFunction, ValueKind,
};

/// Number of interior points for the pricing-equation residual.
pub const RESIDUAL_POINTS: usize = 200;
/// Number of grid points for the shape checks.
pub const SHAPE_POINTS: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub sim: SimConfig,
    /// Run the Monte Carlo checks.
    pub monte_carlo: bool,
    /// Multiplies the solved boundary before building the value function.
    /// Anything other than 1 should make the smooth-fit check fail.
    pub boundary_factor: f64,
    pub policy: RegimePolicy,
    pub branch: CapBranch,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            sim: SimConfig::default(),
            monte_carlo: true,
            boundary_factor: 1.0,
            policy: RegimePolicy::Strict,
            branch: CapBranch::Printed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Pass,
    Fail,
    /// Diagnostic output that does not affect the verdict.
    Info,
    Skipped,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Info => "info",
            Status::Skipped => "skipped",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub status: Status,
    /// Measured quantity (error, z-score, …) compared against `threshold`.
    pub metric: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    fn judged(name: &'static str, metric: f64, threshold: f64, detail: String) -> Self {
        let status = if metric <= threshold { Status::Pass } else { Status::Fail };
        Self {
            name,
            status,
            metric,
            threshold,
            detail,
        }
    }

    fn skipped(name: &'static str, detail: impl Into<String>) -> Self {
        Self {
            name,
            status: Status::Skipped,
            metric: f64::NAN,
            threshold: f64::NAN,
            detail: detail.into(),
        }
    }

    fn failed(name: &'static str, detail: impl Into<String>) -> Self {
        Self {
            name,
            status: Status::Fail,
            metric: f64::NAN,
            threshold: f64::NAN,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub checks: Vec<Check>,
    pub boundary: Option<f64>,
    pub value_at_s0: Option<f64>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != Status::Fail)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Line-oriented `key=value` summary with 12 significant digits.
    pub fn to_key_value(&self) -> String {
        let num = |v: f64| {
            if v.is_finite() {
                format_significant(v, 12)
            } else {
                "nan".to_string()
            }
        };
        let mut out = String::new();
        if let Some(b) = self.boundary {
            let _ = writeln!(out, "boundary={}", num(b));
        }
        if let Some(v) = self.value_at_s0 {
            let _ = writeln!(out, "value_s0={}", num(v));
        }
        for c in &self.checks {
            let _ = writeln!(out, "check.{}.status={}", c.name, c.status.as_str());
            let _ = writeln!(out, "check.{}.metric={}", c.name, num(c.metric));
            let _ = writeln!(out, "check.{}.threshold={}", c.name, num(c.threshold));
            if !c.detail.is_empty() {
                let _ = writeln!(out, "check.{}.detail={}", c.name, c.detail.replace('\n', " "));
            }
        }
        let failed = self.checks.iter().filter(|c| c.status == Status::Fail).count();
        let _ = writeln!(out, "checks_failed={failed}");
        let _ = writeln!(out, "verdict={}", if self.passed() { "pass" } else { "fail" });
        out
    }
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn roots_check(m: &MarketParams, gamma: f64) -> Result<Check> {
    let roots = compute_roots(m, gamma)?;
    let s2 = m.sigma * m.sigma;
    let product = 2.0 * (gamma - m.r) / s2;
    let sum = 2.0 * (gamma - m.r + m.delta) / s2 + 1.0;
    let rel = |got: f64, want: f64| (got - want).abs() / want.abs().max(1e-300);
    let err = rel(roots.lambda1 * roots.lambda2, product).max(rel(roots.lambda1 + roots.lambda2, sum));
    let ordered = roots.lambda1 > 1.0 && roots.lambda2 <= 1.0;
    let mut check = Check::judged(
        "roots",
        err,
        1e-12,
        format!("lambda1={} lambda2={}", format_significant(roots.lambda1, 12), format_significant(roots.lambda2, 12)),
    );
    if !ordered {
        check.status = Status::Fail;
        check.detail.push_str(" (ordering lambda1>1>=lambda2 violated)");
    }
    Ok(check)
}

fn continuity_check(vf: &ValueFunction, terms: &LoanTerms) -> Check {
    let q = terms.q;
    let a = terms.a;
    let upper = vf.upper();
    let mut worst = (vf.interior(a) - terms.k * a).abs();
    let payoff_at_upper = terms.cap.map_or(upper, |l| l.min(upper)) - q;
    worst = worst.max((vf.interior(upper) - payoff_at_upper).abs());
    if let Some(l) = terms.cap {
        if vf.branch() == CapBranch::Printed || l >= upper {
            // the printed branch above L and the exercise payoff both meet L − q at L
            let above = vf.value(l * (1.0 + 1e-15)).unwrap_or(f64::NAN);
            worst = worst.max((above - (l - q)).abs());
        }
    }
    Check::judged("continuity", worst, 1e-10 * q, "mismatch at a, b∧L and L".into())
}

fn residual_check(vf: &ValueFunction, terms: &LoanTerms) -> Check {
    let (a, upper) = (terms.a, vf.upper());
    let margin = 1e-3 * (upper - a);
    let mut worst: f64 = 0.0;
    let mut worst_x = a;
    for x in linspace(a + margin, upper - margin, RESIDUAL_POINTS) {
        let h = crate::valuation::default_step(x, terms.q).min((x - a) / 4.0).min((upper - x) / 4.0);
        let res = match ode_residual(vf, x, Some(h)) {
            Ok(r) => r,
            Err(e) => return Check::failed("ode_residual", e.to_string()),
        };
        let scaled = res.abs() / (vf.interior(x).abs() + terms.q);
        if scaled > worst {
            worst = scaled;
            worst_x = x;
        }
    }
    Check::judged(
        "ode_residual",
        worst,
        1e-6,
        format!("worst at x={} over {} points", format_significant(worst_x, 6), RESIDUAL_POINTS),
    )
}

fn exercise_check(vf: &ValueFunction, terms: &LoanTerms) -> Check {
    let upper = vf.upper();
    let top = terms.cap.map_or(3.0 * upper, |l| l.min(3.0 * upper));
    if vf.kind() == ValueKind::CapBelowB || top <= upper {
        return Check::skipped("exercise_operator", "no uncapped exercise region");
    }
    let worst = linspace(upper, top, 100)
        .into_iter()
        .map(|x| vf.exercise_operator(x))
        .fold(f64::NEG_INFINITY, f64::max);
    Check::judged("exercise_operator", worst, 1e-9 * terms.q, "max of operator on x−q above b".into())
}

fn bounds_check(vf: &ValueFunction, terms: &LoanTerms) -> (Check, Option<Check>) {
    let q = terms.q;
    let top = 2.0 * vf.upper().max(terms.cap.unwrap_or(0.0));
    let grid = linspace(top / SHAPE_POINTS as f64, top, SHAPE_POINTS);
    let values: Vec<f64> = grid.iter().map(|&x| vf.value(x).unwrap_or(f64::NAN)).collect();
    let tol = 1e-10 * q;
    let mut worst: f64 = 0.0;
    for (&x, &f) in grid.iter().zip(&values) {
        let capped = terms.cap.map_or(x, |l| l.min(x));
        let lower = (capped - q).max(0.0).max(terms.k * x.min(terms.a));
        worst = worst.max(lower - f).max(f - x);
        if !f.is_finite() {
            worst = f64::INFINITY;
        }
    }
    for w in values.windows(2) {
        worst = worst.max(w[0] - w[1]);
    }
    let bounds = Check::judged("bounds", worst, tol, "(x∧L−q)+ ≤ f ≤ x and nondecreasing".into());
    let convexity = (vf.kind() == ValueKind::Basic).then(|| {
        let worst = values
            .windows(3)
            .map(|w| w[1] - (w[0] + w[2]) / 2.0)
            .fold(f64::NEG_INFINITY, f64::max);
        Check::judged("convexity", worst, tol, "midpoint convexity".into())
    });
    (bounds, convexity)
}

/// Runs every applicable check for the contract `terms` at `s0`.
pub fn run_suite(m: &MarketParams, terms: &LoanTerms, s0: f64, opts: &VerifyOptions) -> Result<Report> {
    m.validate()?;
    terms.validate()?;
    opts.sim.validate()?;
    if !(s0 > 0.0) {
        return Err(StockLoanError::Domain(format!("initial price must be positive, got {s0}")));
    }
    let mut checks = Vec::new();
    let regime = classify_regime_with(m, terms.gamma, opts.policy);
    regime.require_admissible()?;
    checks.push(Check {
        name: "regime",
        status: Status::Pass,
        metric: 0.0,
        threshold: 0.0,
        detail: regime.tag.to_string(),
    });
    checks.push(roots_check(m, terms.gamma)?);
    let roots = compute_roots(m, terms.gamma)?;

    let solution = match solve_boundary(&roots, terms) {
        Ok(s) => s,
        Err(e) => {
            checks.push(Check::failed("boundary_residual", e.to_string()));
            return Ok(Report {
                checks,
                boundary: None,
                value_at_s0: None,
            });
        }
    };
    checks.push(Check::judged(
        "boundary_residual",
        solution.residual,
        solution.tolerance,
        format!("y*={} after {} iterations", format_significant(solution.y_star, 12), solution.iterations),
    ));

    let qa = terms.q_over_a();
    let grid = linspace(qa, qa.max(3.0 * solution.y_star), 400);
    let convex = gtilde_convexity_report(&roots, qa, &grid);
    checks.push(Check {
        name: "gtilde_convexity",
        status: if convex.is_convex() && convex.left_value < 0.0 { Status::Pass } else { Status::Fail },
        metric: convex.min_second_difference,
        threshold: -convex.tolerance,
        detail: format!("left value {}", format_significant(convex.left_value, 6)),
    });

    let b = solution.b * opts.boundary_factor;
    let vf = ValueFunction::new(*terms, roots, b, opts.branch)?;

    checks.push(match smooth_fit_defect(&vf, None) {
        Ok(defect) => Check::judged("smooth_fit", defect, 1e-6, "|f'(b-) - 1|".into()),
        Err(e) => Check::skipped("smooth_fit", e.to_string()),
    });
    checks.push(continuity_check(&vf, terms));
    checks.push(residual_check(&vf, terms));
    checks.push(exercise_check(&vf, terms));
    let (bounds, convexity) = bounds_check(&vf, terms);
    checks.push(bounds);
    if let Some(c) = convexity {
        checks.push(c);
    }

    let upper = vf.upper();
    let interior = s0 > terms.a && s0 < upper;
    let value_s0 = vf.value(s0)?;

    if interior {
        let closed = hitting_expectation(s0, terms.a, upper, &roots)?;
        let quad = laplace_by_quadrature(s0, terms.a, upper, &roots)?;
        checks.push(Check::judged(
            "laplace_quadrature",
            (closed - quad).abs(),
            1e-4,
            format!("closed={} quadrature={}", format_significant(closed, 12), format_significant(quad, 12)),
        ));
    } else {
        checks.push(Check::skipped("laplace_quadrature", "s0 outside the continuation region"));
    }

    if opts.monte_carlo {
        let rule = StoppingRule::from_terms(terms, b);
        let est = estimate_rule_value(&rule, s0, m, terms.gamma, &opts.sim)?;
        let mut check = Check::judged(
            "mc_value",
            est.z_score(value_s0).abs(),
            3.0,
            format!(
                "closed={} mc={} stderr={} censored={}",
                format_significant(value_s0, 12),
                format_significant(est.mean, 12),
                format_significant(est.stderr, 6),
                est.n_censored
            ),
        );
        if est.stderr == 0.0 && (est.mean - value_s0).abs() <= 1e-10 * terms.q {
            check.status = Status::Pass;
            check.metric = 0.0;
        }
        checks.push(check);

        if interior {
            let closed = hitting_expectation(s0, terms.a, upper, &roots)?;
            let est = estimate_hitting_laplace(terms.a, upper, s0, m, terms.gamma, &opts.sim)?;
            checks.push(Check::judged(
                "laplace_mc",
                est.z_score(closed).abs(),
                3.0,
                format!(
                    "closed={} mc={} stderr={}",
                    format_significant(closed, 12),
                    format_significant(est.mean, 12),
                    format_significant(est.stderr, 6)
                ),
            ));
        }

        if let Some(cap) = terms.cap {
            checks.push(cap_branch_report(&vf, m, terms, cap, &opts.sim)?);
        }
    } else {
        checks.push(Check::skipped("mc_value", "Monte Carlo disabled"));
    }

    Ok(Report {
        checks,
        boundary: Some(b),
        value_at_s0: Some(value_s0),
    })
}

/// Compares the two readings of the value above the cap with the
/// simulated value of waiting for the price to fall back to `L`.
fn cap_branch_report(vf: &ValueFunction, m: &MarketParams, terms: &LoanTerms, cap: f64, sim: &SimConfig) -> Result<Check> {
    let x = 1.25 * cap;
    let roots = vf.roots();
    let printed = (cap - terms.q) * (x / cap).powf(roots.lambda2);
    let payoff = cap - terms.q;
    let wait = estimate_cap_wait_value(cap, terms.q, x, m, terms.gamma, sim)?;
    Ok(Check {
        name: "cap_branch",
        status: Status::Info,
        metric: printed - payoff,
        threshold: f64::NAN,
        detail: format!(
            "x={} printed={} exercise_payoff={} mc_wait_until_L={} stderr={}",
            format_significant(x, 6),
            format_significant(printed, 12),
            format_significant(payoff, 12),
            format_significant(wait.mean, 12),
            format_significant(wait.stderr, 6)
        ),
    })
}
