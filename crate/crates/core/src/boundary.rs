//! Free-boundary equation and its bracketed solver.
//!
//! With `y = b/a` the smooth-fit conditions reduce to the scalar equation
//!
//! ```text
//! g(y) = (λ₁−1)y^{λ₁+1} − (q/a)λ₁y^{λ₁} + (1−λ₂)y^{λ₂+1} + (q/a)λ₂y^{λ₂}
//!        − k(λ₁−λ₂)y^{λ₁+λ₂} = 0
//! ```
//!
//! (`k = 0` without margin). `g(q/a) < 0`, `g → +∞`, and `y^{−λ₂}g(y)` is
//! convex on `[q/a, ∞)` whenever `k ≤ h(q/a)`, so bisection finds the
//! unique root.

use crate::error::{Result, StockLoanError};
use crate::model::{margin_bound, CharacteristicRoots, LoanTerms};
use crate::scalar::{powr, Scalar};

const MAX_ITERATIONS: usize = 200;
const MAX_DOUBLINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySolution<T = f64> {
    /// Root of the boundary equation, `y* > q/a`.
    pub y_star: T,
    /// Exercise boundary `b = a·y*`.
    pub b: T,
    pub iterations: usize,
    /// `|g(y*)|`.
    pub residual: T,
    /// Acceptance level for `residual`: the larger of the bisection stop
    /// level and the rounding floor of the terms of `g` at `y*`.
    pub tolerance: T,
    /// Final bracket `[lo, hi]` around `y*`.
    pub bracket: (T, T),
}

/// Terms of `g` at `y` (without the margin term).
fn g_terms<T: Scalar>(y: T, roots: &CharacteristicRoots<T>, q_over_a: T) -> [T; 4] {
    let one = T::one();
    let (l1, l2) = (roots.lambda1, roots.lambda2);
    [
        (l1 - one) * powr(y, l1 + one),
        -q_over_a * l1 * powr(y, l1),
        (one - l2) * powr(y, l2 + one),
        q_over_a * l2 * powr(y, l2),
    ]
}

pub fn eval_g_basic<T: Scalar>(y: T, roots: &CharacteristicRoots<T>, q_over_a: T) -> T {
    let [t0, t1, t2, t3] = g_terms(y, roots, q_over_a);
    t0 + t1 + t2 + t3
}

pub fn eval_g_capped<T: Scalar>(y: T, roots: &CharacteristicRoots<T>, q_over_a: T, k: T) -> Result<T> {
    check_margin(roots, q_over_a, k)?;
    Ok(eval_g_basic(y, roots, q_over_a) - margin_term(y, roots, k))
}

fn margin_term<T: Scalar>(y: T, roots: &CharacteristicRoots<T>, k: T) -> T {
    k * (roots.lambda1 - roots.lambda2) * powr(y, roots.lambda1 + roots.lambda2)
}

fn check_margin<T: Scalar>(roots: &CharacteristicRoots<T>, q_over_a: T, k: T) -> Result<()> {
    if k == T::zero() {
        return Ok(());
    }
    let bound = margin_bound(roots, q_over_a)?;
    if k > bound {
        return Err(StockLoanError::MarginTooLarge {
            k: k.as_f64(),
            bound: bound.as_f64(),
        });
    }
    Ok(())
}

/// `g(y)/y^{λ₁+1}` together with the sum of the absolute values of its
/// terms. Every exponent is nonpositive, so this never overflows.
fn scaled_g<T: Scalar>(y: T, roots: &CharacteristicRoots<T>, q_over_a: T, k: T) -> (T, T) {
    let one = T::one();
    let (l1, l2) = (roots.lambda1, roots.lambda2);
    let terms = [
        l1 - one,
        -q_over_a * l1 / y,
        (one - l2) * powr(y, l2 - l1),
        q_over_a * l2 * powr(y, l2 - l1 - one),
        -k * (l1 - l2) * powr(y, l2 - one),
    ];
    let value = terms.iter().fold(T::zero(), |acc, &t| acc + t);
    let magnitude = terms.iter().fold(T::zero(), |acc, &t| acc + t.abs());
    (value, magnitude)
}

/// Solves for the exercise boundary of `terms` (margin `k` included, cap
/// irrelevant: it only decides which branch of the value function applies).
pub fn solve_boundary<T: Scalar>(roots: &CharacteristicRoots<T>, terms: &LoanTerms<T>) -> Result<BoundarySolution<T>> {
    terms.validate()?;
    if !(roots.lambda1 > T::one()) {
        return Err(StockLoanError::Domain(format!("need λ₁ > 1, got {}", roots.lambda1)));
    }
    let q_over_a = terms.q_over_a();
    let k = terms.k;
    check_margin(roots, q_over_a, k)?;

    let one = T::one();
    let rounding = T::of(64.0) * T::epsilon();
    // y = 1 is a spurious algebraic root when q/a = 1; stay strictly above it.
    let lower = (q_over_a * (one + T::of(1e-12))).max(one + T::of(1e-9));
    let f = |y: T| scaled_g(y, roots, q_over_a, k);

    let (g_lo, mag_lo) = f(lower);
    if !(g_lo < -rounding * mag_lo) {
        return Err(StockLoanError::BracketFailure {
            lower: lower.as_f64(),
            upper: lower.as_f64(),
            reason: format!("g is not strictly negative at the left end (scaled g = {})", g_lo),
        });
    }

    let cap = q_over_a * T::of(2.0).powi(MAX_DOUBLINGS as i32);
    let mut lo = lower;
    let mut hi = lower * T::of(2.0);
    let mut g_hi = f(hi).0;
    while !(g_hi > T::zero()) {
        if hi >= cap {
            return Err(StockLoanError::BracketFailure {
                lower: lower.as_f64(),
                upper: hi.as_f64(),
                reason: "g stays nonpositive up to the expansion cap".into(),
            });
        }
        lo = hi;
        hi = hi * T::of(2.0);
        g_hi = f(hi).0;
    }

    let stop = T::of(1e-12) * g_hi.abs();
    let mut iterations = 0;
    let mut y_star = lo + (hi - lo) / T::of(2.0);
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mid = lo + (hi - lo) / T::of(2.0);
        if mid <= lo || mid >= hi {
            break;
        }
        y_star = mid;
        let g_mid = f(mid).0;
        if g_mid.abs() < stop {
            break;
        }
        if g_mid < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let terms_at_root = g_terms(y_star, roots, q_over_a);
    let margin = margin_term(y_star, roots, k);
    let residual = (terms_at_root.iter().fold(T::zero(), |acc, &t| acc + t) - margin).abs();
    let magnitude = terms_at_root.iter().fold(margin.abs(), |acc, &t| acc + t.abs());
    let scale = powr(y_star, roots.lambda1 + one);
    let tolerance = (stop * scale).max(rounding * magnitude);

    Ok(BoundarySolution {
        y_star,
        b: terms.a * y_star,
        iterations,
        residual,
        tolerance,
        bracket: (lo, hi),
    })
}

/// Boundary of the contract without termination clause, `qλ₁/(λ₁−1)`.
pub fn limit_boundary<T: Scalar>(roots: &CharacteristicRoots<T>, q: T) -> T {
    q * roots.lambda1 / (roots.lambda1 - T::one())
}

/// `g̃(y) = y^{−λ₂} g(y)` (no margin).
pub fn gtilde<T: Scalar>(y: T, roots: &CharacteristicRoots<T>, q_over_a: T) -> T {
    let one = T::one();
    let (l1, l2) = (roots.lambda1, roots.lambda2);
    (l1 - one) * powr(y, l1 + one - l2) - q_over_a * l1 * powr(y, l1 - l2) + (one - l2) * y + q_over_a * l2
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexityReport<T = f64> {
    /// `g̃(q/a)`; negative for admissible inputs.
    pub left_value: T,
    /// Smallest normalized second difference over the grid.
    pub min_second_difference: T,
    /// Grid points whose second difference falls below `−tolerance`
    /// (scaled by the local magnitude of `g̃`).
    pub violations: Vec<(T, T)>,
    pub tolerance: T,
    pub points: usize,
}

impl<T: Scalar> ConvexityReport<T> {
    pub fn is_convex(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks convexity of `g̃` on a sorted grid inside `[q/a, ∞)` through
/// second divided differences (scaled to `(Δy)²` so uniform grids give
/// plain second differences).
pub fn gtilde_convexity_report<T: Scalar>(roots: &CharacteristicRoots<T>, q_over_a: T, grid: &[T]) -> ConvexityReport<T> {
    gtilde_convexity_report_with(roots, q_over_a, grid, T::of(1e-8))
}

pub fn gtilde_convexity_report_with<T: Scalar>(
    roots: &CharacteristicRoots<T>,
    q_over_a: T,
    grid: &[T],
    tolerance: T,
) -> ConvexityReport<T> {
    let values: Vec<T> = grid.iter().map(|&y| gtilde(y, roots, q_over_a)).collect();
    let mut min_d2 = T::infinity();
    let mut violations = Vec::new();
    for i in 1..grid.len().saturating_sub(1) {
        let (y0, y1, y2) = (grid[i - 1], grid[i], grid[i + 1]);
        let (h0, h1) = (y1 - y0, y2 - y1);
        let (v0, v1, v2) = (values[i - 1], values[i], values[i + 1]);
        // uniform-grid equivalent of v0 − 2v1 + v2
        let mean_step = (h0 + h1) / T::of(2.0);
        let d2 = ((v2 - v1) / h1 - (v1 - v0) / h0) / mean_step * mean_step * mean_step;
        let scale = T::one().max(v0.abs() + v1.abs() + v2.abs());
        let normalized = d2 / scale;
        min_d2 = min_d2.min(normalized);
        if normalized < -tolerance {
            violations.push((y1, normalized));
        }
    }
    ConvexityReport {
        left_value: gtilde(q_over_a, roots, q_over_a),
        min_second_difference: min_d2,
        violations,
        tolerance,
        points: grid.len(),
    }
}
