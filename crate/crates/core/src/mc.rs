//! Monte Carlo oracle for threshold stopping rules.
//!
//! The discounted price `S̃_t = e^{−γt}S_t` is simulated with exact
//! log-normal steps, so barrier monitoring is the only discretization
//! error. With `bridge_correction` the probability that the Brownian bridge
//! between two grid points crossed a barrier is credited as a partial stop,
//! which removes the leading `O(√dt)` monitoring bias.
//!
//! Path `i` draws from ChaCha8 keyed by `seed` on stream `i`, so an
//! estimate does not depend on how paths are scheduled across threads.
//! Per-path payoffs are reduced in index order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Result, StockLoanError};
use crate::model::{LoanTerms, MarketParams};
use crate::scalar::Scalar;

/// Censoring rate above which an estimate carries a horizon warning.
pub const CENSORING_WARNING_RATE: f64 = 1e-3;

// exp(−36) ≈ 2e−16: crossing probabilities below this are skipped.
const BRIDGE_CUTOFF: f64 = 36.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig<T = f64> {
    pub n_paths: usize,
    /// Time step in years.
    pub dt: T,
    /// Paths still running at this time are censored (payoff 0).
    pub horizon: T,
    pub seed: u64,
    pub bridge_correction: bool,
}

impl<T: Scalar> Default for SimConfig<T> {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            dt: T::of(1.0 / 2000.0),
            horizon: T::of(200.0),
            seed: 0x5eed_2011,
            bridge_correction: true,
        }
    }
}

impl<T: Scalar> SimConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(StockLoanError::Config("n_paths must be at least 1".into()));
        }
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(StockLoanError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon >= T::of(100.0) * self.dt) || !self.horizon.is_finite() {
            return Err(StockLoanError::Config(format!(
                "horizon {} must be at least 100·dt = {}",
                self.horizon,
                T::of(100.0) * self.dt
            )));
        }
        Ok(())
    }

    fn steps(&self) -> usize {
        (self.horizon / self.dt).ceil().to_usize().unwrap_or(usize::MAX)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MCEstimate<T = f64> {
    pub mean: T,
    /// Sample standard deviation over `√n_paths`.
    pub stderr: T,
    pub n_paths: usize,
    /// Paths that reached the horizon without stopping.
    pub n_censored: usize,
    pub seed: u64,
}

impl<T: Scalar> MCEstimate<T> {
    fn degenerate(value: T, n_paths: usize, seed: u64) -> Self {
        Self {
            mean: value,
            stderr: T::zero(),
            n_paths,
            n_censored: 0,
            seed,
        }
    }

    fn from_samples(samples: &[T], n_censored: usize, seed: u64) -> Self {
        let n = samples.len();
        let count = T::count(n);
        let mean = samples.iter().fold(T::zero(), |acc, &v| acc + v) / count;
        let stderr = if n > 1 {
            let ss = samples.iter().fold(T::zero(), |acc, &v| acc + (v - mean) * (v - mean));
            (ss / T::count(n - 1) / count).sqrt()
        } else {
            T::zero()
        };
        Self {
            mean,
            stderr,
            n_paths: n,
            n_censored,
            seed,
        }
    }

    pub fn censored_fraction(&self) -> f64 {
        self.n_censored as f64 / self.n_paths as f64
    }

    /// `true` when more than 0.1% of the paths hit the horizon.
    pub fn horizon_warning(&self) -> bool {
        self.censored_fraction() > CENSORING_WARNING_RATE
    }

    /// `(mean − target) / stderr`; infinite when the estimate is exact and
    /// differs from `target`.
    pub fn z_score(&self, target: T) -> T {
        let gap = self.mean - target;
        if self.stderr > T::zero() {
            gap / self.stderr
        } else if gap == T::zero() {
            T::zero()
        } else {
            T::infinity() * gap.signum()
        }
    }

    /// Whether `target` lies within `n_sigma` standard errors, with an
    /// additive slack for exact (zero-variance) estimates.
    pub fn agrees_with(&self, target: T, n_sigma: T, slack: T) -> bool {
        (self.mean - target).abs() <= n_sigma * self.stderr + slack
    }
}

/// Threshold rule: stop at the first of `τ_a` (pay `k·S̃`) and the first
/// passage above `b∧L` (pay `(S̃∧L − q)₊`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingRule<T = f64> {
    pub q: T,
    pub a: T,
    /// Redemption threshold; `+∞` never redeems below the cap.
    pub b: T,
    pub cap: Option<T>,
    pub k: T,
}

impl<T: Scalar> StoppingRule<T> {
    pub fn from_terms(terms: &LoanTerms<T>, b: T) -> Self {
        Self {
            q: terms.q,
            a: terms.a,
            b,
            cap: terms.cap,
            k: terms.k,
        }
    }

    fn upper(&self) -> T {
        self.cap.map_or(self.b, |cap| cap.min(self.b))
    }

    fn exercise_payoff(&self, x: T) -> T {
        let capped = self.cap.map_or(x, |cap| cap.min(x));
        (capped - self.q).max(T::zero())
    }
}

/// Log-price barrier with the payoff received on reaching it.
#[derive(Debug, Clone, Copy)]
struct Barrier<T> {
    log_level: T,
    payoff: T,
}

#[derive(Debug, Clone, Copy)]
struct ExitProblem<T> {
    log_start: T,
    lower: Option<Barrier<T>>,
    upper: Option<Barrier<T>>,
}

#[derive(Debug, Clone, Copy)]
struct Dynamics<T> {
    drift_step: T,
    vol_step: T,
    /// γ − r: payoffs at time τ are weighted by `e^{λτ}`.
    lambda: T,
    /// 2/(σ²dt), scale of the bridge crossing exponent.
    bridge_scale: T,
    dt: T,
    steps: usize,
    bridge: bool,
}

impl<T: Scalar> Dynamics<T> {
    fn new(m: &MarketParams<T>, gamma: T, cfg: &SimConfig<T>) -> Self {
        let s2 = m.sigma * m.sigma;
        Self {
            drift_step: (m.r - m.delta - gamma - s2 / T::of(2.0)) * cfg.dt,
            vol_step: m.sigma * cfg.dt.sqrt(),
            lambda: gamma - m.r,
            bridge_scale: T::of(2.0) / (s2 * cfg.dt),
            dt: cfg.dt,
            steps: cfg.steps(),
            bridge: cfg.bridge_correction,
        }
    }
}

fn path_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Discount-weighted payoff of one path and whether it was censored.
fn simulate_path<T: Scalar>(problem: &ExitProblem<T>, dynamics: &Dynamics<T>, rng: &mut ChaCha8Rng) -> (T, bool)
where
    StandardNormal: Distribution<T>,
{
    let cutoff = T::of(BRIDGE_CUTOFF);
    let lower = problem.lower.map_or(T::neg_infinity(), |b| b.log_level);
    let upper = problem.upper.map_or(T::infinity(), |b| b.log_level);
    let pay_lower = problem.lower.map_or(T::zero(), |b| b.payoff);
    let pay_upper = problem.upper.map_or(T::zero(), |b| b.payoff);

    let mut x = problem.log_start;
    let mut survival = T::one();
    let mut value = T::zero();
    for step in 1..=dynamics.steps {
        let z: T = rng.sample(StandardNormal);
        let next = x + dynamics.drift_step + dynamics.vol_step * z;
        let t = T::count(step) * dynamics.dt;
        if next >= upper {
            return (value + survival * (dynamics.lambda * t).exp() * pay_upper, false);
        }
        if next <= lower {
            return (value + survival * (dynamics.lambda * t).exp() * pay_lower, false);
        }
        if dynamics.bridge {
            let up_exp = dynamics.bridge_scale * (upper - x) * (upper - next);
            let down_exp = dynamics.bridge_scale * (x - lower) * (next - lower);
            if up_exp < cutoff || down_exp < cutoff {
                let p_up = if up_exp < cutoff { (-up_exp).exp() } else { T::zero() };
                let p_down = if down_exp < cutoff { (-down_exp).exp() } else { T::zero() };
                let weight = survival * (dynamics.lambda * t).exp();
                value = value + weight * (p_up * pay_upper + p_down * pay_lower);
                survival = survival * (T::one() - p_up - p_down).max(T::zero());
            }
        }
        x = next;
    }
    (value, true)
}

fn run_paths<T: Scalar>(problem: &ExitProblem<T>, dynamics: &Dynamics<T>, cfg: &SimConfig<T>) -> (Vec<T>, usize)
where
    StandardNormal: Distribution<T>,
{
    let results: Vec<(T, bool)> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|i| simulate_path(problem, dynamics, &mut path_rng(cfg.seed, i)))
        .collect();
    let censored = results.iter().filter(|(_, c)| *c).count();
    (results.into_iter().map(|(v, _)| v).collect(), censored)
}

/// Per-path payoffs of `rule`; `None` when the rule stops at time zero
/// (returned value is then the deterministic payoff).
fn rule_samples<T: Scalar>(
    rule: &StoppingRule<T>,
    s0: T,
    m: &MarketParams<T>,
    gamma: T,
    cfg: &SimConfig<T>,
) -> std::result::Result<(Vec<T>, usize), T>
where
    StandardNormal: Distribution<T>,
{
    if s0 <= rule.a {
        return Err(rule.k * s0);
    }
    let upper = rule.upper();
    if s0 >= upper {
        return Err(rule.exercise_payoff(s0));
    }
    let problem = ExitProblem {
        log_start: s0.ln(),
        lower: Some(Barrier {
            log_level: rule.a.ln(),
            payoff: rule.k * rule.a,
        }),
        upper: upper.is_finite().then(|| Barrier {
            log_level: upper.ln(),
            payoff: rule.exercise_payoff(upper),
        }),
    };
    Ok(run_paths(&problem, &Dynamics::new(m, gamma, cfg), cfg))
}

fn check_inputs<T: Scalar>(s0: T, m: &MarketParams<T>, cfg: &SimConfig<T>) -> Result<()> {
    cfg.validate()?;
    m.validate()?;
    if !(s0 > T::zero()) {
        return Err(StockLoanError::Domain(format!("initial price must be positive, got {}", s0)));
    }
    Ok(())
}

/// Estimates `E[e^{−r̃τ}(S̃_τ∧L − q)₊ 1{τ<τ_a} + k e^{−r̃τ_a} S̃_{τ_a} 1{τ_a≤τ}]`
/// with `τ = τ_b∧τ_L`.
pub fn estimate_rule_value<T: Scalar>(
    rule: &StoppingRule<T>,
    s0: T,
    m: &MarketParams<T>,
    gamma: T,
    cfg: &SimConfig<T>,
) -> Result<MCEstimate<T>>
where
    StandardNormal: Distribution<T>,
{
    check_inputs(s0, m, cfg)?;
    Ok(match rule_samples(rule, s0, m, gamma, cfg) {
        Ok((samples, censored)) => MCEstimate::from_samples(&samples, censored, cfg.seed),
        Err(value) => MCEstimate::degenerate(value, cfg.n_paths, cfg.seed),
    })
}

/// Estimates `E[e^{λτ_b} 1{τ_b < τ_a}]` with `λ = γ − r`.
pub fn estimate_hitting_laplace<T: Scalar>(
    a: T,
    b: T,
    s0: T,
    m: &MarketParams<T>,
    gamma: T,
    cfg: &SimConfig<T>,
) -> Result<MCEstimate<T>>
where
    StandardNormal: Distribution<T>,
{
    check_inputs(s0, m, cfg)?;
    if !(a > T::zero() && a < b) {
        return Err(StockLoanError::Domain(format!("need 0 < a < b, got a = {}, b = {}", a, b)));
    }
    if s0 <= a {
        return Ok(MCEstimate::degenerate(T::zero(), cfg.n_paths, cfg.seed));
    }
    if s0 >= b {
        return Ok(MCEstimate::degenerate(T::one(), cfg.n_paths, cfg.seed));
    }
    let problem = ExitProblem {
        log_start: s0.ln(),
        lower: Some(Barrier {
            log_level: a.ln(),
            payoff: T::zero(),
        }),
        upper: Some(Barrier {
            log_level: b.ln(),
            payoff: T::one(),
        }),
    };
    let (samples, censored) = run_paths(&problem, &Dynamics::new(m, gamma, cfg), cfg);
    Ok(MCEstimate::from_samples(&samples, censored, cfg.seed))
}

/// Value of waiting above the cap until the discounted price first falls
/// back to `L`, then redeeming for `L − q`: `(L−q)·E[e^{λτ_L}]`.
pub fn estimate_cap_wait_value<T: Scalar>(
    cap: T,
    q: T,
    s0: T,
    m: &MarketParams<T>,
    gamma: T,
    cfg: &SimConfig<T>,
) -> Result<MCEstimate<T>>
where
    StandardNormal: Distribution<T>,
{
    check_inputs(s0, m, cfg)?;
    let payoff = (cap - q).max(T::zero());
    if s0 <= cap {
        return Ok(MCEstimate::degenerate(payoff, cfg.n_paths, cfg.seed));
    }
    let problem = ExitProblem {
        log_start: s0.ln(),
        lower: Some(Barrier {
            log_level: cap.ln(),
            payoff,
        }),
        upper: None,
    };
    let (samples, censored) = run_paths(&problem, &Dynamics::new(m, gamma, cfg), cfg);
    Ok(MCEstimate::from_samples(&samples, censored, cfg.seed))
}

/// Value curve over candidate redemption thresholds, all evaluated on the
/// same random numbers.
#[derive(Debug, Clone)]
pub struct GridSearch<T = f64> {
    pub candidates: Vec<T>,
    pub curve: Vec<MCEstimate<T>>,
    pub best_index: usize,
    samples: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> GridSearch<T> {
    pub fn best_b(&self) -> T {
        self.candidates[self.best_index]
    }

    /// Estimate of `value(i) − value(j)` from paired per-path differences.
    pub fn paired_difference(&self, i: usize, j: usize) -> MCEstimate<T> {
        let seed = self.curve[i].seed;
        match (&self.samples[i], &self.samples[j]) {
            (Some(si), Some(sj)) => {
                let diffs: Vec<T> = si.iter().zip(sj).map(|(&x, &y)| x - y).collect();
                MCEstimate::from_samples(&diffs, 0, seed)
            }
            _ => {
                let (ci, cj) = (&self.curve[i], &self.curve[j]);
                MCEstimate {
                    mean: ci.mean - cj.mean,
                    stderr: (ci.stderr * ci.stderr + cj.stderr * cj.stderr).sqrt(),
                    n_paths: ci.n_paths,
                    n_censored: 0,
                    seed,
                }
            }
        }
    }
}

/// One path scored against several upper barriers at once.
///
/// `uppers` must be sorted ascending and all lie above the start. A path
/// crosses them in order, so the finished candidates always form a prefix.
fn simulate_path_multi<T: Scalar>(
    log_start: T,
    lower: Barrier<T>,
    uppers: &[Barrier<T>],
    dynamics: &Dynamics<T>,
    rng: &mut ChaCha8Rng,
) -> (Vec<T>, bool)
where
    StandardNormal: Distribution<T>,
{
    let cutoff = T::of(BRIDGE_CUTOFF);
    let n = uppers.len();
    let mut values = vec![T::zero(); n];
    let mut survival = vec![T::one(); n];
    let mut first_active = 0;
    let mut x = log_start;
    for step in 1..=dynamics.steps {
        let z: T = rng.sample(StandardNormal);
        let next = x + dynamics.drift_step + dynamics.vol_step * z;
        let discount = (dynamics.lambda * T::count(step) * dynamics.dt).exp();
        while first_active < n && next >= uppers[first_active].log_level {
            let u = &uppers[first_active];
            values[first_active] = values[first_active] + survival[first_active] * discount * u.payoff;
            first_active += 1;
        }
        if next <= lower.log_level {
            for j in first_active..n {
                values[j] = values[j] + survival[j] * discount * lower.payoff;
            }
            return (values, false);
        }
        if first_active == n {
            return (values, false);
        }
        if dynamics.bridge {
            let down_exp = dynamics.bridge_scale * (x - lower.log_level) * (next - lower.log_level);
            let p_down = if down_exp < cutoff { (-down_exp).exp() } else { T::zero() };
            for j in first_active..n {
                let u = &uppers[j];
                let up_exp = dynamics.bridge_scale * (u.log_level - x) * (u.log_level - next);
                // the exponent grows with the barrier level, so later candidates are farther still
                if up_exp >= cutoff && p_down == T::zero() {
                    break;
                }
                let p_up = if up_exp < cutoff { (-up_exp).exp() } else { T::zero() };
                values[j] = values[j] + survival[j] * discount * (p_up * u.payoff + p_down * lower.payoff);
                survival[j] = survival[j] * (T::one() - p_up - p_down).max(T::zero());
            }
        }
        x = next;
    }
    (values, true)
}

/// Evaluates the threshold rule for every candidate `b` on the same
/// simulated paths and returns the empirical maximizer.
pub fn grid_search_threshold<T: Scalar>(
    candidates: &[T],
    s0: T,
    m: &MarketParams<T>,
    gamma: T,
    terms: &LoanTerms<T>,
    cfg: &SimConfig<T>,
) -> Result<GridSearch<T>>
where
    StandardNormal: Distribution<T>,
{
    check_inputs(s0, m, cfg)?;
    if candidates.is_empty() {
        return Err(StockLoanError::Domain("empty candidate grid".into()));
    }
    let rules: Vec<StoppingRule<T>> = candidates.iter().map(|&b| StoppingRule::from_terms(terms, b)).collect();
    let mut curve: Vec<Option<MCEstimate<T>>> = vec![None; candidates.len()];
    let mut samples: Vec<Option<Vec<T>>> = vec![None; candidates.len()];

    // candidates that stop at time zero are exact
    let mut live: Vec<usize> = Vec::new();
    for (i, rule) in rules.iter().enumerate() {
        if s0 <= rule.a {
            curve[i] = Some(MCEstimate::degenerate(rule.k * s0, cfg.n_paths, cfg.seed));
        } else if s0 >= rule.upper() {
            curve[i] = Some(MCEstimate::degenerate(rule.exercise_payoff(s0), cfg.n_paths, cfg.seed));
        } else {
            live.push(i);
        }
    }
    live.sort_by(|&i, &j| rules[i].upper().partial_cmp(&rules[j].upper()).expect("finite thresholds"));

    if !live.is_empty() {
        let uppers: Vec<Barrier<T>> = live
            .iter()
            .map(|&i| Barrier {
                log_level: rules[i].upper().ln(),
                payoff: rules[i].exercise_payoff(rules[i].upper()),
            })
            .collect();
        let lower = Barrier {
            log_level: terms.a.ln(),
            payoff: terms.k * terms.a,
        };
        let dynamics = Dynamics::new(m, gamma, cfg);
        let log_start = s0.ln();
        let paths: Vec<(Vec<T>, bool)> = (0..cfg.n_paths)
            .into_par_iter()
            .map(|p| simulate_path_multi(log_start, lower, &uppers, &dynamics, &mut path_rng(cfg.seed, p)))
            .collect();
        let censored = paths.iter().filter(|(_, c)| *c).count();
        for (slot, &i) in live.iter().enumerate() {
            let column: Vec<T> = paths.iter().map(|(v, _)| v[slot]).collect();
            curve[i] = Some(MCEstimate::from_samples(&column, censored, cfg.seed));
            samples[i] = Some(column);
        }
    }

    let curve: Vec<MCEstimate<T>> = curve.into_iter().map(|e| e.expect("every candidate evaluated")).collect();
    let best_index = curve
        .iter()
        .enumerate()
        .fold(0, |best, (i, e)| if e.mean > curve[best].mean { i } else { best });
    Ok(GridSearch {
        candidates: candidates.to_vec(),
        curve,
        best_index,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn market() -> MarketParams {
        MarketParams::new(0.05, 0.15, 0.01).unwrap()
    }

    fn cfg(n_paths: usize, dt: f64) -> SimConfig {
        SimConfig {
            n_paths,
            dt,
            horizon: 200.0,
            seed: 11,
            bridge_correction: true,
        }
    }

    fn rule(a: f64, b: f64) -> StoppingRule {
        StoppingRule {
            q: 100.0,
            a,
            b,
            cap: None,
            k: 0.0,
        }
    }

    #[test]
    fn config_validation() {
        assert!(cfg(0, 0.01).validate().is_err());
        assert!(cfg(10, 0.0).validate().is_err());
        assert!(SimConfig { horizon: 0.5, ..cfg(10, 0.01) }.validate().is_err());
        assert!(cfg(10, 0.01).validate().is_ok());
        assert!(estimate_rule_value(&rule(50.0, 140.0), 100.0, &market(), 0.07, &cfg(0, 0.01)).is_err());
    }

    #[test]
    fn stops_at_time_zero() {
        let above = estimate_rule_value(&rule(50.0, 140.0), 150.0, &market(), 0.07, &cfg(100, 0.01)).unwrap();
        assert_eq!((above.mean, above.stderr), (50.0, 0.0));
        let below = estimate_rule_value(&rule(50.0, 140.0), 40.0, &market(), 0.07, &cfg(100, 0.01)).unwrap();
        assert_eq!((below.mean, below.stderr), (0.0, 0.0));
        let margin = StoppingRule { k: 0.3, ..rule(50.0, 140.0) };
        let with_margin = estimate_rule_value(&margin, 40.0, &market(), 0.07, &cfg(100, 0.01)).unwrap();
        assert!((with_margin.mean - 12.0).abs() < 1e-12);
        let capped = StoppingRule { cap: Some(120.0), ..rule(50.0, 140.0) };
        let at_cap = estimate_rule_value(&capped, 130.0, &market(), 0.07, &cfg(100, 0.01)).unwrap();
        assert_eq!(at_cap.mean, 20.0);
    }

    #[test]
    fn bit_identical_across_thread_counts() {
        let c = cfg(2000, 1.0 / 250.0);
        let serial = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let wide = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let one = serial.install(|| estimate_rule_value(&rule(50.0, 140.0), 100.0, &market(), 0.07, &c).unwrap());
        let four = wide.install(|| estimate_rule_value(&rule(50.0, 140.0), 100.0, &market(), 0.07, &c).unwrap());
        assert_eq!(one.mean.to_bits(), four.mean.to_bits());
        assert_eq!(one.stderr.to_bits(), four.stderr.to_bits());
        let other_seed = estimate_rule_value(&rule(50.0, 140.0), 100.0, &market(), 0.07, &SimConfig { seed: 12, ..c })
            .unwrap();
        assert_ne!(one.mean, other_seed.mean);
    }

    #[test]
    fn laplace_limits_and_censoring() {
        let c = cfg(200, 1.0 / 250.0);
        let m = market();
        assert_eq!(estimate_hitting_laplace(50.0, 140.0, 140.0, &m, 0.07, &c).unwrap().mean, 1.0);
        assert_eq!(estimate_hitting_laplace(50.0, 140.0, 50.0, &m, 0.07, &c).unwrap().mean, 0.0);
        let near_top = estimate_hitting_laplace(50.0, 140.0, 139.99, &m, 0.07, &c).unwrap();
        assert!(near_top.mean > 0.97);
        let near_bottom = estimate_hitting_laplace(50.0, 140.0, 50.01, &m, 0.07, &c).unwrap();
        assert!(near_bottom.mean < 0.03);

        let short = SimConfig { horizon: 1.0, ..c };
        let est = estimate_hitting_laplace(50.0, 140.0, 100.0, &m, 0.07, &short).unwrap();
        assert!(est.n_censored > 0);
        assert!(est.horizon_warning());
    }

    #[test]
    fn discretization_bias_shrinks_with_bridge() {
        let m = market();
        let r = rule(60.0, 130.0);
        let run = |dt: f64, bridge: bool| {
            estimate_rule_value(&r, 100.0, &m, 0.07, &SimConfig { bridge_correction: bridge, ..cfg(20_000, dt) }).unwrap()
        };
        let coarse = run(1.0 / 50.0, true);
        let fine = run(1.0 / 100.0, true);
        let gap = (coarse.mean - fine.mean).abs();
        assert!(gap < 3.0 * (coarse.stderr + fine.stderr) + 0.1, "{gap}");

        let raw_coarse = run(1.0 / 50.0, false);
        let raw_fine = run(1.0 / 100.0, false);
        let raw_gap = (raw_coarse.mean - raw_fine.mean).abs();
        assert!(gap < raw_gap, "bridge {gap} vs raw {raw_gap}");
    }

    #[test]
    fn grid_matches_single_rule_runs() {
        let t = LoanTerms::new(100.0, 0.07, 50.0).unwrap();
        let c = cfg(3000, 1.0 / 250.0);
        let grid = [90.0, 120.0, 140.0, 130.0];
        let g = grid_search_threshold(&grid, 100.0, &market(), 0.07, &t, &c).unwrap();
        for (i, &b) in grid.iter().enumerate() {
            let single = estimate_rule_value(&rule(50.0, b), 100.0, &market(), 0.07, &c).unwrap();
            assert!((g.curve[i].mean - single.mean).abs() < 1e-9, "b={b}");
        }
        assert_eq!(g.curve[0].stderr, 0.0);
        let diff = g.paired_difference(2, 3);
        assert!(diff.stderr < (g.curve[2].stderr.powi(2) + g.curve[3].stderr.powi(2)).sqrt());
    }

    #[test]
    fn single_point_grid() {
        let t = LoanTerms::new(100.0, 0.07, 50.0).unwrap();
        let g = grid_search_threshold(&[140.0], 100.0, &market(), 0.07, &t, &cfg(500, 1.0 / 100.0)).unwrap();
        assert_eq!(g.best_b(), 140.0);
        assert_eq!(g.curve.len(), 1);
        assert_eq!(g.paired_difference(0, 0).mean, 0.0);
    }

    #[test]
    fn cap_wait_value_is_at_least_immediate_payoff() {
        let c = cfg(4000, 1.0 / 250.0);
        let wait = estimate_cap_wait_value(120.0, 100.0, 150.0, &market(), 0.07, &c).unwrap();
        assert!(wait.mean > 20.0);
        let at = estimate_cap_wait_value(120.0, 100.0, 110.0, &market(), 0.07, &c).unwrap();
        assert_eq!(at.mean, 20.0);
    }

    #[test]
    fn single_precision_runs() {
        let m = MarketParams::<f32>::new(0.05, 0.15, 0.01).unwrap();
        let c = SimConfig::<f32> {
            n_paths: 500,
            dt: 0.01,
            horizon: 200.0,
            seed: 3,
            bridge_correction: true,
        };
        let r = StoppingRule::<f32> {
            q: 100.0,
            a: 50.0,
            b: 140.0,
            cap: None,
            k: 0.0,
        };
        let est = estimate_rule_value(&r, 100.0, &m, 0.07, &c).unwrap();
        assert!(est.mean > 0.0 && est.mean < 100.0);
    }
}
