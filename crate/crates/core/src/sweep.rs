//! One-parameter sweeps of boundary, value and fee, with CSV output and
//! trend verdicts for the expected comparative statics.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use crate::boundary::solve_boundary;
use crate::error::{Result, StockLoanError};
use crate::fees::fair_fee;
use crate::model::{compute_roots, LoanTerms, MarketParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepParam {
    /// Termination barrier `a`.
    A,
    /// Initial price `S₀`.
    S0,
    /// Margin fraction `k`.
    K,
    /// Cap `L`.
    L,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::A => "a",
            SweepParam::S0 => "s0",
            SweepParam::K => "k",
            SweepParam::L => "L",
        }
    }

    /// Trends the model predicts for this parameter.
    pub fn expected_trends(self) -> &'static [(Column, Trend)] {
        match self {
            SweepParam::A => &[
                (Column::Boundary, Trend::Nonincreasing),
                (Column::Value, Trend::Nonincreasing),
                (Column::Fee, Trend::Nonincreasing),
            ],
            SweepParam::S0 => &[(Column::InitialCash, Trend::Nondecreasing)],
            SweepParam::K | SweepParam::L => &[],
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = StockLoanError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" => Ok(SweepParam::A),
            "s0" | "S0" => Ok(SweepParam::S0),
            "k" => Ok(SweepParam::K),
            "L" | "l" => Ok(SweepParam::L),
            other => Err(StockLoanError::Config(format!("unknown sweep parameter `{other}` (expected a, s0, k or L)"))),
        }
    }
}

/// Evenly spaced grid `lo, …, hi` with `n` points, written `lo:hi:n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRange {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl SweepRange {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() || n == 0 || (n > 1 && !(hi > lo)) {
            return Err(StockLoanError::Config(format!(
                "range needs finite lo < hi and n ≥ 1, got {lo}:{hi}:{n}"
            )));
        }
        Ok(Self { lo, hi, n })
    }

    pub fn points(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.n - 1) as f64;
        (0..self.n)
            .map(|i| if i + 1 == self.n { self.hi } else { self.lo + step * i as f64 })
            .collect()
    }
}

impl FromStr for SweepRange {
    type Err = StockLoanError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || StockLoanError::Config(format!("range `{s}` is not of the form lo:hi:n"));
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, n] = parts.as_slice() else {
            return Err(bad());
        };
        let lo = lo.trim().parse::<f64>().map_err(|_| bad())?;
        let hi = hi.trim().parse::<f64>().map_err(|_| bad())?;
        let n = n.trim().parse::<usize>().map_err(|_| bad())?;
        Self::new(lo, hi, n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Column {
    Boundary,
    Value,
    Fee,
    InitialCash,
}

impl Column {
    pub fn name(self) -> &'static str {
        match self {
            Column::Boundary => "b",
            Column::Value => "f_s0",
            Column::Fee => "c",
            Column::InitialCash => "q_minus_c",
        }
    }

    fn get(self, row: &SweepRow) -> f64 {
        match self {
            Column::Boundary => row.b,
            Column::Value => row.value,
            Column::Fee => row.c,
            Column::InitialCash => row.initial_cash,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Trend {
    Nonincreasing,
    Nondecreasing,
    Constant,
    Mixed,
}

impl Trend {
    /// Whether an observed trend is consistent with this claimed one.
    pub fn satisfied_by(self, observed: Trend) -> bool {
        observed == self || observed == Trend::Constant
    }
}

impl fmt::Display for Trend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Trend::Nonincreasing => "nonincreasing",
            Trend::Nondecreasing => "nondecreasing",
            Trend::Constant => "constant",
            Trend::Mixed => "mixed",
        })
    }
}

/// Trend of the finite entries of `values`, allowing a relative slack of
/// `1e−10` for rounding.
pub fn classify_trend(values: &[f64]) -> Trend {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let (mut up, mut down) = (false, false);
    for w in finite.windows(2) {
        let slack = 1e-10 * w[0].abs().max(w[1].abs()).max(1.0);
        if w[1] > w[0] + slack {
            up = true;
        }
        if w[1] < w[0] - slack {
            down = true;
        }
    }
    match (up, down) {
        (false, false) => Trend::Constant,
        (true, false) => Trend::Nondecreasing,
        (false, true) => Trend::Nonincreasing,
        (true, true) => Trend::Mixed,
    }
}

/// One grid point. Quantities that could not be computed are `NaN` and
/// the reason is kept in `error`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub x: f64,
    pub b: f64,
    pub value: f64,
    pub c: f64,
    pub initial_cash: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub column: Column,
    pub expected: Trend,
    pub observed: Trend,
}

impl Verdict {
    pub fn passed(&self) -> bool {
        self.expected.satisfied_by(self.observed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub param: SweepParam,
    pub rows: Vec<SweepRow>,
}

impl Sweep {
    pub fn column(&self, column: Column) -> Vec<f64> {
        self.rows.iter().map(|r| column.get(r)).collect()
    }

    pub fn verdicts(&self) -> Vec<Verdict> {
        self.param
            .expected_trends()
            .iter()
            .map(|&(column, expected)| Verdict {
                column,
                expected,
                observed: classify_trend(&self.column(column)),
            })
            .collect()
    }

    pub fn failed_rows(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    /// CSV with a header row; failed cells are left empty.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{},b,f_s0,c,q_minus_c", self.param.name())?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                format_significant(r.x, 12),
                csv_cell(r.b),
                csv_cell(r.value),
                csv_cell(r.c),
                csv_cell(r.initial_cash)
            )?;
        }
        Ok(())
    }
}

fn csv_cell(v: f64) -> String {
    if v.is_finite() {
        format_significant(v, 12)
    } else {
        String::new()
    }
}

/// Shortest decimal rendering of `x` rounded to `digits` significant
/// digits. Uses positional notation for magnitudes in `[1e−5, 1e15)` and
/// scientific notation otherwise. Never locale dependent.
pub fn format_significant(x: f64, digits: usize) -> String {
    let digits = digits.max(1);
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..15).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn sweep_row(param: SweepParam, x: f64, m: &MarketParams, base: &LoanTerms, s0: f64) -> SweepRow {
    let nan_row = |e: StockLoanError| SweepRow {
        x,
        b: f64::NAN,
        value: f64::NAN,
        c: f64::NAN,
        initial_cash: f64::NAN,
        error: Some(e.to_string()),
    };
    let (terms, s0) = match param {
        SweepParam::A => (base.with_barrier(x), s0),
        SweepParam::S0 => (Ok(*base), x),
        SweepParam::K => (base.with_margin(x), s0),
        SweepParam::L => (base.with_cap(x), s0),
    };
    let terms = match terms {
        Ok(t) => t,
        Err(e) => return nan_row(e),
    };
    let b = compute_roots(m, terms.gamma).and_then(|r| solve_boundary(&r, &terms)).map(|s| s.b);
    match fair_fee(s0, m, &terms) {
        Ok(fee) => SweepRow {
            x,
            b: b.as_ref().map_or(f64::NAN, |&b| b),
            value: fee.value,
            c: fee.c,
            initial_cash: fee.initial_cash(),
            error: b.err().map(|e| e.to_string()),
        },
        Err(e) => SweepRow {
            b: b.unwrap_or(f64::NAN),
            ..nan_row(e)
        },
    }
}

/// Evaluates boundary, value at `S₀`, fee and initial cash over `range`,
/// varying `param` and holding everything else at `base` / `s0`.
pub fn run_sweep(param: SweepParam, range: &SweepRange, m: &MarketParams, base: &LoanTerms, s0: f64) -> Sweep {
    let rows = range.points().into_iter().map(|x| sweep_row(param, x, m, base, s0)).collect();
    Sweep { param, rows }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_formatting() {
        assert_eq!(format_significant(147.80939566132656, 12), "147.809395661");
        assert_eq!(format_significant(147.80939566132656, 6), "147.809");
        assert_eq!(format_significant(0.5, 12), "0.5");
        assert_eq!(format_significant(-2.0, 12), "-2");
        assert_eq!(format_significant(1.23456789e-9, 6), "1.23457e-9");
        assert_eq!(format_significant(9.9999999999999, 6), "10");
        assert_eq!(format_significant(0.0, 12), "0");
    }

    #[test]
    fn range_parsing() {
        let r: SweepRange = "10:50:5".parse().unwrap();
        assert_eq!(r.points(), vec![10.0, 20.0, 30.0, 40.0, 50.0]);
        assert_eq!("3:3:1".parse::<SweepRange>().unwrap().points(), vec![3.0]);
        assert!("1:2".parse::<SweepRange>().is_err());
        assert!("2:1:4".parse::<SweepRange>().is_err());
        assert!("1:2:0".parse::<SweepRange>().is_err());
        assert!("a:2:3".parse::<SweepRange>().is_err());
    }

    #[test]
    fn trend_classification() {
        assert_eq!(classify_trend(&[3.0, 2.0, 2.0, 1.0]), Trend::Nonincreasing);
        assert_eq!(classify_trend(&[1.0, f64::NAN, 2.0]), Trend::Nondecreasing);
        assert_eq!(classify_trend(&[1.0, 1.0]), Trend::Constant);
        assert_eq!(classify_trend(&[1.0, 2.0, 1.0]), Trend::Mixed);
        assert!(Trend::Nonincreasing.satisfied_by(Trend::Constant));
        assert!(!Trend::Nonincreasing.satisfied_by(Trend::Mixed));
    }

    #[test]
    fn barrier_sweep_with_failing_endpoint() {
        let m = MarketParams::new(0.05, 0.15, 0.01).unwrap();
        let base = LoanTerms::new(100.0, 0.07, 50.0).unwrap();
        let sweep = run_sweep(SweepParam::A, &"10:100:10".parse().unwrap(), &m, &base, 100.0);
        assert_eq!(sweep.rows.len(), 10);
        // a = q terminates at start, but the boundary has no root
        let last = sweep.rows.last().unwrap();
        assert!(last.b.is_nan() && last.error.is_some());
        assert_eq!(last.c, 0.0);
        assert!(sweep.verdicts().iter().all(Verdict::passed), "{:?}", sweep.verdicts());

        let mut csv = Vec::new();
        sweep.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("a,b,f_s0,c,q_minus_c\n"));
        assert_eq!(text.lines().count(), 11);
        assert!(text.lines().last().unwrap().starts_with("100,,"));
    }
}
