use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    let mut p = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    p.push("tests/fixtures");
    p.push(name);
    p.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stockloan"))
        .args(args)
        .env_remove("STOCKLOAN_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn field(text: &str, key: &str) -> Option<String> {
    text.lines().find_map(|l| {
        let mut parts = l.split_whitespace();
        (parts.next() == Some(key)).then(|| parts.next().unwrap_or("").to_string())
    })
}

fn temp_path(name: &str) -> PathBuf {
    std::env::temp_dir().join(format!("stockloan-cli-{}-{name}", std::process::id()))
}

#[test]
fn roots_reference() {
    let o = run(&["roots", "--config", &fixture("reference.toml")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(field(&out, "lambda1").as_deref(), Some("3.09164"));
    assert_eq!(field(&out, "lambda2").as_deref(), Some("0.575028"));
    assert_eq!(field(&out, "regime").as_deref(), Some("PositiveDividend"));
}

#[test]
fn roots_machine_output_has_twelve_digits() {
    let path = temp_path("roots.txt");
    let o = run(&["roots", "--config", &fixture("reference.toml"), "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).ok();
    assert!(text.contains("lambda1=3.09163907255\n"), "{text}");
    assert!(text.contains("lambda2=0.575027594122\n"), "{text}");
}

#[test]
fn inadmissible_exits_2_and_names_inequality() {
    let o = run(&["roots", "--config", &fixture("zero_dividend_inadmissible.toml")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("γ−r>σ²/2"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_64() {
    assert_eq!(run(&["roots", "--config", &fixture("missing_field.toml")]).status.code(), Some(64));
    assert_eq!(run(&["roots", "--config", &fixture("unknown_key.toml")]).status.code(), Some(64));
    assert_eq!(run(&["roots"]).status.code(), Some(64));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(64));
    assert_eq!(run(&[]).status.code(), Some(64));
    assert_eq!(run(&["roots", "--config", "/nonexistent/contract.toml"]).status.code(), Some(64));
    let sweep = run(&["sweep", "--config", &fixture("reference.toml"), "--vary", "a"]);
    assert_eq!(sweep.status.code(), Some(64));
    let bad_range = run(&["sweep", "--config", &fixture("reference.toml"), "--vary", "a", "--range", "5:1:3"]);
    assert_eq!(bad_range.status.code(), Some(64));
    let bad_param = run(&["sweep", "--config", &fixture("reference.toml"), "--vary", "zeta", "--range", "1:5:3"]);
    assert_eq!(bad_param.status.code(), Some(64));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn bad_seed_variable_is_a_usage_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_stockloan"))
        .args(["price", "--config", &fixture("reference.toml"), "--verify"])
        .env("STOCKLOAN_SEED", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(64));
}

#[test]
fn price_branches() {
    let cfg = fixture("reference.toml");
    let below = run(&["price", "--config", &cfg, "--at", "40"]);
    assert_eq!(field(&stdout(&below), "value").as_deref(), Some("0"));
    assert_eq!(field(&stdout(&below), "region").as_deref(), Some("Termination"));
    let above = run(&["price", "--config", &cfg, "--at", "200"]);
    assert_eq!(field(&stdout(&above), "value").as_deref(), Some("100"));
    assert_eq!(field(&stdout(&above), "region").as_deref(), Some("Exercise"));
}

#[test]
fn price_cap_modes_differ_above_cap() {
    let cfg = fixture("capped.toml");
    let printed = run(&["price", "--config", &cfg, "--at", "300"]);
    let payoff = run(&["price", "--config", &cfg, "--at", "300", "--mode", "exercise-payoff"]);
    assert_eq!(field(&stdout(&payoff), "value").as_deref(), Some("140"));
    let v: f64 = field(&stdout(&printed), "value").unwrap().parse().unwrap();
    assert!(v > 140.0);
}

#[test]
fn price_verify_agrees_and_seed_precedence() {
    let cfg = fixture("reference.toml");
    let o = run(&["price", "--config", &cfg, "--verify", "--paths", "4000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = stdout(&o);
    assert_eq!(field(&out, "mc_verdict").as_deref(), Some("agree"));
    assert_eq!(field(&out, "seed").as_deref(), Some("42"));

    let env = Command::new(env!("CARGO_BIN_EXE_stockloan"))
        .args(["price", "--config", &cfg, "--verify", "--paths", "4000"])
        .env("STOCKLOAN_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(field(&stdout(&env), "seed").as_deref(), Some("7"));
    assert_ne!(field(&stdout(&env), "mc_mean"), field(&out, "mc_mean"));

    let flag = Command::new(env!("CARGO_BIN_EXE_stockloan"))
        .args(["price", "--config", &cfg, "--verify", "--paths", "4000", "--seed", "3"])
        .env("STOCKLOAN_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(field(&stdout(&flag), "seed").as_deref(), Some("3"));

    let again = run(&["price", "--config", &cfg, "--verify", "--paths", "4000"]);
    assert_eq!(stdout(&again), out);
}

#[test]
fn fee_cases() {
    let o = run(&["fee", "--config", &fixture("reference.toml")]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert_eq!(field(&out, "case").as_deref(), Some("Active"));
    let c: f64 = field(&out, "c").unwrap().parse().unwrap();
    let v: f64 = field(&out, "value_s0").unwrap().parse().unwrap();
    assert_eq!(c, v);

    let capped = run(&["fee", "--config", &fixture("capped.toml")]);
    assert_eq!(capped.status.code(), Some(0));
    assert_eq!(field(&stdout(&capped), "case").as_deref(), Some("Active"));
}

#[test]
fn fee_edge_cases_from_generated_configs() {
    let base = std::fs::read_to_string(fixture("reference.toml")).unwrap();
    let write = |name: &str, text: String| {
        let p = temp_path(name);
        std::fs::write(&p, text).unwrap();
        p
    };
    let high = write("high.toml", base.replace("s0 = 100.0", "s0 = 150.0"));
    let o = run(&["fee", "--config", high.to_str().unwrap()]);
    assert_eq!(field(&stdout(&o), "case").as_deref(), Some("ImmediateExercise"));
    assert_eq!(field(&stdout(&o), "c").as_deref(), Some("0"));

    let low = write("low.toml", base.replace("s0 = 100.0", "s0 = 40.0"));
    let o = run(&["fee", "--config", low.to_str().unwrap()]);
    assert_eq!(field(&stdout(&o), "case").as_deref(), Some("TerminatedAtStart"));
    assert_eq!(field(&stdout(&o), "c").as_deref(), Some("60"));

    let at_q = write("atq.toml", base.replace("a = 50.0", "a = 100.0").replace("s0 = 100.0", "s0 = 120.0"));
    let o = run(&["fee", "--config", at_q.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(field(&stdout(&o), "boundary_error").is_some(), "{}", stdout(&o));

    for p in [high, low, at_q] {
        std::fs::remove_file(p).ok();
    }
}

#[test]
fn sweep_csv_is_deterministic_with_header() {
    let cfg = fixture("reference.toml");
    let o = run(&["sweep", "--config", &cfg, "--vary", "a", "--range", "10:90:9"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = stdout(&o);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("a,b,f_s0,c,q_minus_c"));
    assert_eq!(lines.count(), 9);
    assert!(stderr(&o).contains("b: expected nonincreasing, observed nonincreasing (ok)"));
    let again = run(&["sweep", "--config", &cfg, "--vary", "a", "--range", "10:90:9"]);
    assert_eq!(stdout(&again), csv);
    assert!(!csv.contains(|c: char| c == ';' || c == ' '));
}

#[test]
fn sweep_initial_cash_to_file() {
    let path = temp_path("s0.csv");
    let o = run(&[
        "sweep",
        "--config",
        &fixture("reference.toml"),
        "--vary",
        "s0",
        "--range",
        "50:143:20",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("q_minus_c: expected nondecreasing, observed nondecreasing (ok)"));
    let csv = std::fs::read_to_string(&path).unwrap();
    std::fs::remove_file(&path).ok();
    assert!(csv.starts_with("s0,b,f_s0,c,q_minus_c\n"));
    assert_eq!(csv.lines().count(), 21);
}

#[test]
fn verify_passes_on_reference() {
    let o = run(&["verify", "--config", &fixture("reference.toml"), "--paths", "4000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = stdout(&o);
    assert!(out.contains("verdict=pass"));
    assert!(out.contains("check.smooth_fit.status=pass"));
    assert!(out.contains("check.mc_value.status=pass"));
}

#[test]
fn verify_flags_perturbed_boundary() {
    let o = run(&["verify", "--config", &fixture("reference.toml"), "--no-mc", "--perturb-boundary", "1.05"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("check.smooth_fit.status=fail"));
    assert!(stdout(&o).contains("verdict=fail"));
}

#[test]
fn verify_reports_cap_branch() {
    let o = run(&["verify", "--config", &fixture("capped.toml"), "--paths", "4000"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("check.cap_branch.status=info"));
    assert!(stdout(&o).contains("mc_wait_until_L="));
}
