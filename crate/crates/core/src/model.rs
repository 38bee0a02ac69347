//! Market and contract parameters, regime classification and the
//! characteristic exponents of the pricing operator.

use std::fmt;

use crate::error::{invalid, Result, StockLoanError};
use crate::scalar::{powr, Scalar};

/// Black–Scholes market: risk-free rate, volatility and dividend yield,
/// all per year.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams<T = f64> {
    pub r: T,
    pub sigma: T,
    pub delta: T,
}

impl<T: Scalar> MarketParams<T> {
    pub fn new(r: T, sigma: T, delta: T) -> Result<Self> {
        let m = Self { r, sigma, delta };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r > T::zero()) || !self.r.is_finite() {
            return Err(invalid("r", format!("must be positive and finite, got {}", self.r)));
        }
        if !(self.sigma > T::zero()) || !self.sigma.is_finite() {
            return Err(invalid("sigma", format!("must be positive and finite, got {}", self.sigma)));
        }
        if !(self.delta >= T::zero()) || !self.delta.is_finite() {
            return Err(invalid("delta", format!("must be nonnegative and finite, got {}", self.delta)));
        }
        Ok(())
    }
}

/// Terms of the loan: principal `q`, loan rate `gamma`, termination
/// barrier `a`, optional cap `cap` (the level `L`) and margin fraction `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoanTerms<T = f64> {
    pub q: T,
    pub gamma: T,
    pub a: T,
    pub cap: Option<T>,
    pub k: T,
}

impl<T: Scalar> LoanTerms<T> {
    /// Contract with termination barrier only (no cap, no margin).
    pub fn new(q: T, gamma: T, a: T) -> Result<Self> {
        let t = Self {
            q,
            gamma,
            a,
            cap: None,
            k: T::zero(),
        };
        t.validate()?;
        Ok(t)
    }

    pub fn with_cap(mut self, cap: T) -> Result<Self> {
        self.cap = Some(cap);
        self.validate()?;
        Ok(self)
    }

    pub fn with_margin(mut self, k: T) -> Result<Self> {
        self.k = k;
        self.validate()?;
        Ok(self)
    }

    /// Same terms with a different barrier (validated).
    pub fn with_barrier(mut self, a: T) -> Result<Self> {
        self.a = a;
        self.validate()?;
        Ok(self)
    }

    pub fn q_over_a(&self) -> T {
        self.q / self.a
    }

    /// `true` when neither cap nor margin is present.
    pub fn is_basic(&self) -> bool {
        self.cap.is_none() && self.k == T::zero()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q > T::zero()) || !self.q.is_finite() {
            return Err(invalid("q", format!("principal must be positive, got {}", self.q)));
        }
        if !self.gamma.is_finite() {
            return Err(invalid("gamma", "loan rate must be finite"));
        }
        if !(self.a > T::zero() && self.a <= self.q) {
            return Err(invalid("a", format!("need 0 < a ≤ q, got a = {}, q = {}", self.a, self.q)));
        }
        if let Some(cap) = self.cap {
            if !(cap > self.q) {
                return Err(invalid("L", format!("cap must exceed q, got L = {}, q = {}", cap, self.q)));
            }
        }
        if !(self.k >= T::zero() && self.k < T::one()) {
            return Err(invalid("k", format!("margin must satisfy 0 ≤ k < 1, got {}", self.k)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RegimeTag {
    PositiveDividend,
    ZeroDividend,
    Inadmissible,
}

impl fmt::Display for RegimeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RegimeTag::PositiveDividend => "PositiveDividend",
            RegimeTag::ZeroDividend => "ZeroDividend",
            RegimeTag::Inadmissible => "Inadmissible",
        };
        f.write_str(s)
    }
}

/// Which admissibility hypothesis to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RegimePolicy {
    /// δ > 0 with γ−r+δ ≥ 0, or δ = 0 with γ−r > σ²/2.
    #[default]
    Strict,
    /// δ > 0 (any γ), or δ = 0 with γ−r > σ²/2. Only meaningful for the
    /// cap-and-margin contract.
    Permissive,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParameterRegime {
    pub tag: RegimeTag,
    pub detail: String,
}

impl ParameterRegime {
    pub fn is_admissible(&self) -> bool {
        self.tag != RegimeTag::Inadmissible
    }

    /// Converts an inadmissible regime into an error.
    pub fn require_admissible(&self) -> Result<()> {
        if self.is_admissible() {
            Ok(())
        } else {
            Err(StockLoanError::Inadmissible(self.detail.clone()))
        }
    }
}

pub fn classify_regime<T: Scalar>(m: &MarketParams<T>, t: &LoanTerms<T>) -> ParameterRegime {
    classify_regime_with(m, t.gamma, RegimePolicy::Strict)
}

pub fn classify_regime_with<T: Scalar>(m: &MarketParams<T>, gamma: T, policy: RegimePolicy) -> ParameterRegime {
    let spread = gamma - m.r;
    let half_var = m.sigma * m.sigma / T::of(2.0);
    if m.delta > T::zero() {
        let carry = spread + m.delta;
        if carry >= T::zero() {
            ParameterRegime {
                tag: RegimeTag::PositiveDividend,
                detail: format!("δ = {} > 0 and γ−r+δ = {} ≥ 0", m.delta, carry),
            }
        } else if policy == RegimePolicy::Permissive {
            ParameterRegime {
                tag: RegimeTag::PositiveDividend,
                detail: format!("δ = {} > 0 (permissive: γ−r+δ = {} < 0 accepted)", m.delta, carry),
            }
        } else {
            ParameterRegime {
                tag: RegimeTag::Inadmissible,
                detail: format!("γ−r+δ≥0 fails: γ−r+δ = {}", carry),
            }
        }
    } else if spread > half_var {
        ParameterRegime {
            tag: RegimeTag::ZeroDividend,
            detail: format!("δ = 0 and γ−r = {} > σ²/2 = {}", spread, half_var),
        }
    } else {
        ParameterRegime {
            tag: RegimeTag::Inadmissible,
            detail: format!("δ = 0 requires γ−r>σ²/2: γ−r = {} ≤ σ²/2 = {}", spread, half_var),
        }
    }
}

/// Exponents of the power solutions `x^λ` of
/// `½σ²x²f″ + (r−γ−δ)xf′ − (r−γ)f = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacteristicRoots<T = f64> {
    /// μ = −(σ/2 + (γ−r+δ)/σ), drift of the scaled log-price.
    pub mu: T,
    /// λ = γ − r.
    pub lambda: T,
    /// Δ = μ² − 2λ.
    pub delta_disc: T,
    pub sqrt_disc: T,
    pub lambda1: T,
    pub lambda2: T,
    pub sigma: T,
}

impl<T: Scalar> CharacteristicRoots<T> {
    /// −μ/σ, the midpoint of the two exponents.
    pub fn nu(&self) -> T {
        -self.mu / self.sigma
    }

    /// √Δ/σ, half the gap between the exponents.
    pub fn eps(&self) -> T {
        self.sqrt_disc / self.sigma
    }

    /// Discount rate r − γ of the scaled problem.
    pub fn r_tilde(&self) -> T {
        -self.lambda
    }
}

pub fn compute_roots<T: Scalar>(m: &MarketParams<T>, gamma: T) -> Result<CharacteristicRoots<T>> {
    let two = T::of(2.0);
    let sigma = m.sigma;
    let lambda = gamma - m.r;
    let mu = -(sigma / two + (lambda + m.delta) / sigma);
    let product = two * lambda / (sigma * sigma);

    if m.delta == T::zero() {
        // Δ factors as (λ/σ − σ/2)² and the roots are exactly 1 and 2λ/σ².
        let sqrt_disc = (lambda / sigma - sigma / two).abs();
        let (lambda1, lambda2) = if product >= T::one() {
            (product, T::one())
        } else {
            (T::one(), product)
        };
        return Ok(CharacteristicRoots {
            mu,
            lambda,
            delta_disc: sqrt_disc * sqrt_disc,
            sqrt_disc,
            lambda1,
            lambda2,
            sigma,
        });
    }

    let delta_disc = mu * mu - two * lambda;
    if delta_disc < T::zero() {
        return Err(StockLoanError::NegativeDiscriminant(delta_disc.as_f64()));
    }
    let sqrt_disc = delta_disc.sqrt();
    let (lambda1, lambda2) = if mu <= T::zero() {
        // −μ ≥ 0: λ₁ has no cancellation, recover λ₂ from the product.
        let l1 = (-mu + sqrt_disc) / sigma;
        (l1, product / l1)
    } else {
        let l2 = (-mu - sqrt_disc) / sigma;
        (product / l2, l2)
    };
    Ok(CharacteristicRoots {
        mu,
        lambda,
        delta_disc,
        sqrt_disc,
        lambda1,
        lambda2,
        sigma,
    })
}

/// `h(y)` for a contract with principal-to-barrier ratio `q_over_a`:
/// `((λ₁+1−λ₂)/λ₁)·y^{1−λ₂} − (q/a)((λ₁−1−λ₂)/(λ₁−1))·y^{−λ₂}`.
pub fn margin_function<T: Scalar>(roots: &CharacteristicRoots<T>, q_over_a: T, y: T) -> Result<T> {
    let (l1, l2) = (roots.lambda1, roots.lambda2);
    if l1 == T::one() || l1 == T::zero() {
        return Err(StockLoanError::Domain(format!("h(y) undefined for λ₁ = {}", l1)));
    }
    if !(y > T::zero()) {
        return Err(StockLoanError::Domain(format!("h(y) needs y > 0, got {}", y)));
    }
    let one = T::one();
    let lead = (l1 + one - l2) / l1;
    let tail = (l1 - one - l2) / (l1 - one);
    Ok(lead * powr(y, one - l2) - q_over_a * tail * powr(y, -l2))
}

/// Largest admissible margin fraction, `h(q/a)`.
pub fn margin_bound<T: Scalar>(roots: &CharacteristicRoots<T>, q_over_a: T) -> Result<T> {
    if !(q_over_a >= T::one()) {
        return Err(StockLoanError::Domain(format!("margin bound needs q/a ≥ 1, got {}", q_over_a)));
    }
    margin_function(roots, q_over_a, q_over_a)
}
