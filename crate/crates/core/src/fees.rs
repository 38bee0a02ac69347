//! Fair service fee and the negotiation pipeline.
//!
//! The bank lends `q` against a share worth `S₀` and charges a fee `c`. The
//! fee is fair when the client's net position `S₀ − q + c` equals the value
//! of the contract they receive.

use std::fmt;

use crate::boundary::{solve_boundary, BoundarySolution};
use crate::error::{Result, StockLoanError};
use crate::model::{classify_regime, compute_roots, CharacteristicRoots, LoanTerms, MarketParams, ParameterRegime};
use crate::scalar::Scalar;
use crate::valuation::{CapBranch, ValueFunction, ValueKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeeCase {
    /// `S₀ ≤ a`: the contract terminates as soon as it is written.
    TerminatedAtStart,
    /// `S₀ ≥ b∧L`: the client redeems immediately, so no fee is due.
    ImmediateExercise,
    /// `a < S₀ < b∧L`.
    Active,
}

impl fmt::Display for FeeCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeeCase::TerminatedAtStart => "TerminatedAtStart",
            FeeCase::ImmediateExercise => "ImmediateExercise",
            FeeCase::Active => "Active",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeeQuote<T = f64> {
    pub case: FeeCase,
    pub c: T,
    pub s0: T,
    pub q: T,
    /// Redemption boundary; `None` when the case did not require it.
    pub boundary: Option<T>,
    /// Contract value at `S₀` (the termination payoff `k·S₀` when
    /// terminated at start).
    pub value: T,
}

impl<T: Scalar> FeeQuote<T> {
    /// Cash the client actually receives, `q − c`.
    pub fn initial_cash(&self) -> T {
        self.q - self.c
    }

    /// `S₀ − q + c − value`, zero up to rounding in the active case.
    pub fn audit_gap(&self) -> T {
        self.s0 - self.q + self.c - self.value
    }
}

fn check_price<T: Scalar>(s0: T) -> Result<()> {
    if !(s0 > T::zero()) || !s0.is_finite() {
        return Err(StockLoanError::Domain(format!("initial price must be positive, got {}", s0)));
    }
    Ok(())
}

fn terminated_quote<T: Scalar>(s0: T, t: &LoanTerms<T>) -> FeeQuote<T> {
    FeeQuote {
        case: FeeCase::TerminatedAtStart,
        c: t.k * s0 + t.q - s0,
        s0,
        q: t.q,
        boundary: None,
        value: t.k * s0,
    }
}

fn quote_from_value<T: Scalar>(s0: T, vf: &ValueFunction<T>) -> Result<FeeQuote<T>> {
    let t = vf.terms();
    let value = vf.value(s0)?;
    let boundary = Some(vf.boundary());
    if s0 >= vf.upper() {
        return Ok(FeeQuote {
            case: FeeCase::ImmediateExercise,
            c: T::zero(),
            s0,
            q: t.q,
            boundary,
            value,
        });
    }
    let c = value - s0 + t.q;
    if c < T::zero() {
        return Err(StockLoanError::NegativeFee(c.as_f64()));
    }
    Ok(FeeQuote {
        case: FeeCase::Active,
        c,
        s0,
        q: t.q,
        boundary,
        value,
    })
}

/// Fair fee for initial price `s0`.
pub fn fair_fee<T: Scalar>(s0: T, m: &MarketParams<T>, t: &LoanTerms<T>) -> Result<FeeQuote<T>> {
    check_price(s0)?;
    m.validate()?;
    t.validate()?;
    classify_regime(m, t).require_admissible()?;
    if s0 <= t.a {
        return Ok(terminated_quote(s0, t));
    }
    let roots = compute_roots(m, t.gamma)?;
    let solution = solve_boundary(&roots, t)?;
    let vf = ValueFunction::new(*t, roots, solution.b, CapBranch::default())?;
    quote_from_value(s0, &vf)
}

/// Every intermediate quantity of a negotiation, for audit.
///
/// Solver failures are kept in place rather than aborting, so a quote for
/// e.g. `a = q` still reports the regime and roots alongside the error.
#[derive(Debug, Clone)]
pub struct ContractQuote<T = f64> {
    pub terms: LoanTerms<T>,
    pub s0: T,
    pub regime: ParameterRegime,
    pub roots: CharacteristicRoots<T>,
    pub boundary: Result<BoundarySolution<T>>,
    pub value_kind: Option<ValueKind>,
    pub coefficients: Option<(T, T)>,
    pub fee: Result<FeeQuote<T>>,
}

impl<T: Scalar> ContractQuote<T> {
    pub fn is_complete(&self) -> bool {
        self.boundary.is_ok() && self.fee.is_ok()
    }
}

/// Accepts the draft terms, solves for the boundary, then prices the fee.
pub fn negotiate<T: Scalar>(draft: &LoanTerms<T>, m: &MarketParams<T>, s0: T) -> Result<ContractQuote<T>> {
    check_price(s0)?;
    m.validate()?;
    draft.validate()?;
    let regime = classify_regime(m, draft);
    regime.require_admissible()?;
    let roots = compute_roots(m, draft.gamma)?;

    let boundary = solve_boundary(&roots, draft);
    let vf = boundary
        .as_ref()
        .map_err(Clone::clone)
        .and_then(|sol| ValueFunction::new(*draft, roots, sol.b, CapBranch::default()));
    let fee = if s0 <= draft.a {
        Ok(terminated_quote(s0, draft))
    } else {
        vf.as_ref().map_err(Clone::clone).and_then(|vf| quote_from_value(s0, vf))
    };
    let (value_kind, coefficients) = match &vf {
        Ok(vf) => (Some(vf.kind()), Some(vf.coefficients())),
        Err(_) => (None, None),
    };
    Ok(ContractQuote {
        terms: *draft,
        s0,
        regime,
        roots,
        boundary,
        value_kind,
        coefficients,
        fee,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpliedBarrier<T = f64> {
    pub a: T,
    /// Fee at the returned barrier.
    pub c: T,
    pub iterations: usize,
    /// Fees at the ends of the search interval, `(c(a_lo), c(a_hi))`.
    pub achievable: (T, T),
}

/// Barrier `a` at which the fair fee equals `target_c`.
///
/// The `a` field of `terms` is ignored. The fee is evaluated at
/// `a_lo = 10⁻⁶q` and `a_hi = (1 − 10⁻⁶)q` first; the search only proceeds
/// when `c(a_lo) ≥ c(a_hi)` and the target lies between them.
pub fn implied_barrier<T: Scalar>(
    target_c: T,
    m: &MarketParams<T>,
    terms: &LoanTerms<T>,
    s0: T,
) -> Result<ImpliedBarrier<T>> {
    let q = terms.q;
    let fee_at = |a: T| -> Result<T> { Ok(fair_fee(s0, m, &terms.with_barrier(a)?)?.c) };
    let mut lo = q * T::of(1e-6);
    let mut hi = q * (T::one() - T::of(1e-6));
    let c_lo = fee_at(lo)?;
    let c_hi = fee_at(hi)?;
    if c_lo < c_hi {
        return Err(StockLoanError::MonotonicityViolation {
            at_low: c_lo.as_f64(),
            at_high: c_hi.as_f64(),
        });
    }
    if !(target_c >= c_hi && target_c <= c_lo) {
        return Err(StockLoanError::OutOfRange {
            target: target_c.as_f64(),
            low: c_hi.as_f64(),
            high: c_lo.as_f64(),
        });
    }
    let tol = q * T::of(1e-8).max(T::of(64.0) * T::epsilon());
    let mut best = if (c_lo - target_c).abs() <= (c_hi - target_c).abs() {
        (lo, c_lo)
    } else {
        (hi, c_hi)
    };
    let mut iterations = 0;
    while (best.1 - target_c).abs() > tol && iterations < 200 {
        iterations += 1;
        let mid = (lo + hi) / T::of(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        let c = fee_at(mid)?;
        if (c - target_c).abs() < (best.1 - target_c).abs() {
            best = (mid, c);
        }
        // c is nonincreasing in a: a larger fee means the root lies higher
        if c > target_c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ImpliedBarrier {
        a: best.0,
        c: best.1,
        iterations,
        achievable: (c_lo, c_hi),
    })
}
