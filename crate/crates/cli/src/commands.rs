use stockloan::sweep::{run_sweep, SweepParam, SweepRange};
use stockloan::verify::{run_suite, VerifyOptions};
use stockloan::{
    classify_regime_with, compute_roots, estimate_rule_value, negotiate, solve_boundary, CapBranch, LoanTerms,
    MarketParams, RegimePolicy, SimConfig, StoppingRule, ValueFunction,
};

use crate::config::{sim_config, ContractSpec, SimOverrides};
use crate::output::{write_file, Record};
use crate::{Args, CliError, Command, Mode};

struct Context {
    spec: ContractSpec,
    market: MarketParams,
    terms: LoanTerms,
    policy: RegimePolicy,
}

impl Context {
    fn load(args: &Args) -> Result<Self, CliError> {
        let path = args
            .config
            .as_ref()
            .ok_or_else(|| CliError::Usage("--config FILE is required".into()))?;
        let spec = ContractSpec::load(path)?;
        let market = spec.market()?;
        let terms = spec.terms()?;
        let policy = if args.permissive {
            RegimePolicy::Permissive
        } else {
            RegimePolicy::Strict
        };
        Ok(Self {
            spec,
            market,
            terms,
            policy,
        })
    }

    fn require_admissible(&self) -> Result<(), CliError> {
        classify_regime_with(&self.market, self.terms.gamma, self.policy).require_admissible()?;
        Ok(())
    }

    fn sim(&self, args: &Args) -> Result<SimConfig, CliError> {
        let env_seed = match std::env::var("STOCKLOAN_SEED") {
            Ok(v) => Some(
                v.trim()
                    .parse::<u64>()
                    .map_err(|_| CliError::Usage(format!("STOCKLOAN_SEED must be an unsigned integer, got `{v}`")))?,
            ),
            Err(_) => None,
        };
        let overrides = SimOverrides {
            seed: args.seed,
            env_seed,
            paths: args.paths,
            dt: args.dt,
        };
        sim_config(&self.spec, &overrides)
    }

    fn value_function(&self, branch: CapBranch) -> Result<ValueFunction, CliError> {
        let roots = compute_roots(&self.market, self.terms.gamma)?;
        let solution = solve_boundary(&roots, &self.terms)?;
        Ok(ValueFunction::new(self.terms, roots, solution.b, branch)?)
    }
}

fn branch(mode: Mode) -> CapBranch {
    match mode {
        Mode::Printed => CapBranch::Printed,
        Mode::ExercisePayoff => CapBranch::ExercisePayoff,
    }
}

fn emit(args: &Args, record: &Record) -> Result<(), CliError> {
    print!("{}", record.human());
    if let Some(path) = &args.out {
        write_file(path, &record.machine())?;
    }
    Ok(())
}

pub fn run(args: &Args) -> Result<(), CliError> {
    let ctx = Context::load(args)?;
    match args.command {
        Command::Roots => roots(args, &ctx),
        Command::Price => price(args, &ctx),
        Command::Fee => fee(args, &ctx),
        Command::Sweep => sweep(args, &ctx),
        Command::Verify => verify(args, &ctx),
    }
}

fn roots(args: &Args, ctx: &Context) -> Result<(), CliError> {
    ctx.require_admissible()?;
    let regime = classify_regime_with(&ctx.market, ctx.terms.gamma, ctx.policy);
    let r = compute_roots(&ctx.market, ctx.terms.gamma)?;
    let mut rec = Record::default();
    rec.text("regime", regime.tag.to_string())
        .num("mu", r.mu)
        .num("lambda", r.lambda)
        .num("discriminant", r.delta_disc)
        .num("lambda1", r.lambda1)
        .num("lambda2", r.lambda2);
    emit(args, &rec)
}

fn price(args: &Args, ctx: &Context) -> Result<(), CliError> {
    ctx.require_admissible()?;
    let vf = ctx.value_function(branch(args.mode))?;
    let x = args.at.unwrap_or(ctx.spec.s0);
    let value = vf.value(x)?;
    let mut rec = Record::default();
    rec.num("x", x)
        .num("value", value)
        .text("region", format!("{:?}", vf.region(x)))
        .text("kind", format!("{:?}", vf.kind()))
        .num("boundary", vf.boundary())
        .num("upper", vf.upper())
        .text(
            "mode",
            match args.mode {
                Mode::Printed => "printed",
                Mode::ExercisePayoff => "exercise-payoff",
            },
        );
    let mut failure = None;
    if args.verify {
        let cfg = ctx.sim(args)?;
        let rule = StoppingRule::from_terms(&ctx.terms, vf.boundary());
        let est = estimate_rule_value(&rule, x, &ctx.market, ctx.terms.gamma, &cfg)?;
        let agrees = est.agrees_with(value, 3.0, 1e-10 * ctx.terms.q);
        rec.num("mc_mean", est.mean)
            .num("mc_stderr", est.stderr)
            .num("mc_z", est.z_score(value))
            .int("mc_paths", est.n_paths as u64)
            .int("mc_censored", est.n_censored as u64)
            .int("seed", est.seed)
            .text("mc_verdict", if agrees { "agree" } else { "disagree" });
        if !agrees {
            failure = Some(format!("closed form {value} vs Monte Carlo {} ± {}", est.mean, est.stderr));
        }
    }
    emit(args, &rec)?;
    failure.map_or(Ok(()), |f| Err(CliError::Verification(f)))
}

fn fee(args: &Args, ctx: &Context) -> Result<(), CliError> {
    let quote = negotiate(&ctx.terms, &ctx.market, ctx.spec.s0)?;
    let mut rec = Record::default();
    rec.text("regime", quote.regime.tag.to_string())
        .num("lambda1", quote.roots.lambda1)
        .num("lambda2", quote.roots.lambda2);
    match &quote.boundary {
        Ok(sol) => rec.num("boundary", sol.b),
        Err(e) => rec.text("boundary_error", e.to_string()),
    };
    let fee = match quote.fee {
        Ok(fee) => fee,
        Err(e) => {
            emit(args, &rec)?;
            return Err(e.into());
        }
    };
    rec.num("s0", fee.s0)
        .text("case", fee.case.to_string())
        .num("c", fee.c)
        .num("initial_cash", fee.initial_cash())
        .num("value_s0", fee.value)
        .num("audit_gap", fee.audit_gap());
    emit(args, &rec)
}

fn sweep(args: &Args, ctx: &Context) -> Result<(), CliError> {
    ctx.require_admissible()?;
    let param: SweepParam = args
        .vary
        .as_deref()
        .ok_or_else(|| CliError::Usage("sweep needs --vary P".into()))?
        .parse()?;
    let range: SweepRange = args
        .range
        .as_deref()
        .ok_or_else(|| CliError::Usage("sweep needs --range lo:hi:n".into()))?
        .parse()?;
    let result = run_sweep(param, &range, &ctx.market, &ctx.terms, ctx.spec.s0);
    let mut csv = Vec::new();
    result
        .write_csv(&mut csv)
        .map_err(|e| CliError::Usage(format!("cannot render CSV: {e}")))?;
    let csv = String::from_utf8(csv).expect("CSV is UTF-8");

    let mut summary = String::new();
    let verdicts = result.verdicts();
    for v in &verdicts {
        summary.push_str(&format!(
            "{}: expected {}, observed {} ({})\n",
            v.column.name(),
            v.expected,
            v.observed,
            if v.passed() { "ok" } else { "MISMATCH" }
        ));
    }
    summary.push_str(&format!("rows={} failed_rows={}\n", result.rows.len(), result.failed_rows()));
    match &args.out {
        Some(path) => {
            write_file(path, &csv)?;
            print!("{summary}");
        }
        None => {
            print!("{csv}");
            eprint!("{summary}");
        }
    }
    if verdicts.iter().all(|v| v.passed()) {
        Ok(())
    } else {
        Err(CliError::Verification("sweep trends differ from the expected ones".into()))
    }
}

fn verify(args: &Args, ctx: &Context) -> Result<(), CliError> {
    let opts = VerifyOptions {
        sim: ctx.sim(args)?,
        monte_carlo: !args.no_mc,
        boundary_factor: args.perturb_boundary.unwrap_or(1.0),
        policy: ctx.policy,
        branch: branch(args.mode),
    };
    let report = run_suite(&ctx.market, &ctx.terms, ctx.spec.s0, &opts)?;
    let mut text = String::new();
    if opts.monte_carlo {
        text.push_str(&format!("seed={}\n", opts.sim.seed));
    }
    text.push_str(&report.to_key_value());
    print!("{text}");
    if let Some(path) = &args.out {
        write_file(path, &text)?;
    }
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| c.status == stockloan::verify::Status::Fail)
            .map(|c| c.name)
            .collect();
        Err(CliError::Verification(failed.join(", ")))
    }
}
