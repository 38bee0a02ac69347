//! Two-sided exit of the scaled log-price `W_t + μt` from `(a₁, b₁)`.

use crate::error::{Result, StockLoanError};
use crate::model::CharacteristicRoots;
use crate::scalar::{powr, sinh_ratio, Scalar};

/// Image terms kept on each side of `n = 0` in [`exit_time_density`].
///
/// Term `n` carries `exp(−(2n(b₁−a₁)+b₁)²/2t)`; at `n = 50` this is below
/// machine precision for any `t ≤ (b₁−a₁)²·10³`.
pub const DENSITY_TERMS: usize = 50;

fn check_interval<T: Scalar>(x: T, a: T, b: T) -> Result<()> {
    if !(a > T::zero() && a < x && x < b) {
        return Err(StockLoanError::Domain(format!("need 0 < a < x < b, got a = {}, x = {}, b = {}", a, x, b)));
    }
    Ok(())
}

/// `E[e^{λτ_b} 1{τ_b < τ_a}]` for the discounted price started at `x`,
/// with `λ = γ − r`:
///
/// `(1/C)(b^{μ/σ}a^{−√Δ/σ}x^{λ₁} − b^{μ/σ}a^{√Δ/σ}x^{λ₂})`,
///
/// evaluated as `(x/b)^{−μ/σ}·sinh(ε ln(x/a))/sinh(ε ln(b/a))`, `ε = √Δ/σ`,
/// which stays finite as `Δ → 0`.
pub fn hitting_expectation<T: Scalar>(x: T, a: T, b: T, roots: &CharacteristicRoots<T>) -> Result<T> {
    check_interval(x, a, b)?;
    let ratio = sinh_ratio(roots.eps(), (x / a).ln(), (b / a).ln());
    Ok(powr(x / b, roots.nu()) * ratio)
}

/// `E[e^{λτ_a} 1{τ_a < τ_b}]`, the discount-weighted probability of
/// termination before redemption.
pub fn down_hitting_expectation<T: Scalar>(x: T, a: T, b: T, roots: &CharacteristicRoots<T>) -> Result<T> {
    check_interval(x, a, b)?;
    let ratio = sinh_ratio(roots.eps(), (b / x).ln(), (b / a).ln());
    Ok(powr(x / a, roots.nu()) * ratio)
}

/// Density of `τ_{b₁}` on `{τ_{b₁} < τ_{a₁}}` for `W_t + μt`, truncated to
/// `n ∈ [−n_terms, n_terms]`:
///
/// `e^{μb₁ − μ²t/2}/√(2πt³) · Σₙ (2n(b₁−a₁)+b₁) e^{−(2n(b₁−a₁)+b₁)²/2t}`.
pub fn exit_time_density<T: Scalar>(t: T, a1: T, b1: T, mu: T, n_terms: usize) -> T {
    if !(t > T::zero()) {
        return T::zero();
    }
    let two = T::of(2.0);
    let width = b1 - a1;
    let drift = mu * b1 - mu * mu * t / two;
    let norm = (two * T::PI() * t * t * t).sqrt();
    let n = n_terms as i64;
    let mut positive = T::zero();
    let mut negative = T::zero();
    for i in -n..=n {
        let shift = T::of(2.0 * i as f64) * width + b1;
        let term = shift * (drift - shift * shift / (two * t)).exp();
        if term >= T::zero() {
            positive = positive + term;
        } else {
            negative = negative + term;
        }
    }
    (positive + negative) / norm
}

/// `∫₀^∞ e^{λt} p(t) dt` for the truncated density `p` of
/// [`exit_time_density`], by double-exponential quadrature.
///
/// The integrand decays like `exp(−κt)` with
/// `κ = μ²/2 − λ + π²/(2(b₁−a₁)²)`; integration stops at `t = 45/κ`.
pub fn integrate_exit_density(a1: f64, b1: f64, mu: f64, lambda: f64, n_terms: usize) -> Result<f64> {
    if !(a1 < 0.0 && b1 > 0.0) {
        return Err(StockLoanError::Domain(format!("need a₁ < 0 < b₁, got a₁ = {a1}, b₁ = {b1}")));
    }
    let width = b1 - a1;
    let kappa = mu * mu / 2.0 - lambda + std::f64::consts::PI.powi(2) / (2.0 * width * width);
    if !(kappa > 0.0) {
        return Err(StockLoanError::Domain(format!("weighted density is not integrable (κ = {kappa})")));
    }
    let horizon = 45.0 / kappa;
    let integrand = |t: f64| (lambda * t).exp() * exit_time_density(t, a1, b1, mu, n_terms);
    // the mass sits near t ~ b₁²; geometric cuts keep each piece smooth
    let mut cuts = vec![0.0];
    let mut edge = horizon;
    while edge > 1e-6 * horizon {
        cuts.push(edge);
        edge /= 8.0;
    }
    cuts[1..].reverse();
    let total = cuts
        .windows(2)
        .map(|w| quadrature::double_exponential::integrate(integrand, w[0], w[1], 1e-14).integral)
        .sum();
    Ok(total)
}

/// [`hitting_expectation`] recomputed by integrating the exit-time density.
pub fn laplace_by_quadrature<T: Scalar>(x: T, a: T, b: T, roots: &CharacteristicRoots<T>) -> Result<f64> {
    check_interval(x, a, b)?;
    let sigma = roots.sigma.as_f64();
    let a1 = (a / x).ln().as_f64() / sigma;
    let b1 = (b / x).ln().as_f64() / sigma;
    integrate_exit_density(a1, b1, roots.mu.as_f64(), roots.lambda.as_f64(), DENSITY_TERMS)
}
