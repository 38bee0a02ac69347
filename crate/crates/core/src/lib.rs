//! Valuation of perpetual stock loans with an automatic termination
//! barrier, an optional cap and a margin.
//!
//! A client borrows `q` against one share and may redeem it at any time by
//! repaying `q·e^{γt}`. The loan terminates automatically once the
//! discounted price `e^{−γt}S_t` falls to `a`, in which case the client
//! receives the margin `k·S`. Redemption proceeds are capped at `L`.
//!
//! The crate computes the optimal redemption boundary ([`boundary`]), the
//! closed-form contract value ([`valuation`]) and the fair service fee
//! ([`fees`]), and cross-checks them with a Monte Carlo oracle ([`mc`]).
//! Everything numerical is generic over [`Scalar`] (`f32` or `f64`); the
//! unsuffixed aliases below fix `f64`.

pub mod boundary;
pub mod error;
pub mod fees;
pub mod mc;
pub mod model;
pub mod scalar;
pub mod sweep;
pub mod valuation;
pub mod verify;

pub use boundary::{
    eval_g_basic, eval_g_capped, gtilde_convexity_report, limit_boundary, solve_boundary, BoundarySolution,
    ConvexityReport,
};
pub use error::{Result, StockLoanError};
pub use fees::{fair_fee, implied_barrier, negotiate, ContractQuote, FeeCase, FeeQuote, ImpliedBarrier};
pub use mc::{
    estimate_hitting_laplace, estimate_rule_value, grid_search_threshold, GridSearch, MCEstimate, SimConfig,
    StoppingRule,
};
pub use model::{
    classify_regime, classify_regime_with, compute_roots, margin_bound, CharacteristicRoots, LoanTerms,
    MarketParams, ParameterRegime, RegimePolicy, RegimeTag,
};
pub use scalar::{powr, Scalar};
pub use valuation::{
    exit_time_density, hitting_expectation, ode_residual, value_at_time, value_basic, value_capped, CapBranch,
    Region, ValueFunction, ValueKind,
};

pub type MarketParams32 = model::MarketParams<f32>;
pub type LoanTerms32 = model::LoanTerms<f32>;
pub type Roots = model::CharacteristicRoots<f64>;
pub type Roots32 = model::CharacteristicRoots<f32>;
pub type Boundary = boundary::BoundarySolution<f64>;
pub type Boundary32 = boundary::BoundarySolution<f32>;
pub type ValueFn = valuation::ValueFunction<f64>;
pub type ValueFn32 = valuation::ValueFunction<f32>;
pub type Fee = fees::FeeQuote<f64>;
pub type Estimate = mc::MCEstimate<f64>;
