//! Closed-form value functions and the numerical checks run against them.

mod laplace;

pub use laplace::{
    down_hitting_expectation, exit_time_density, hitting_expectation, integrate_exit_density, laplace_by_quadrature,
    DENSITY_TERMS,
};

use crate::error::{Result, StockLoanError};
use crate::model::{margin_bound, CharacteristicRoots, LoanTerms};
use crate::scalar::{powr, Scalar};

/// How the value is reported above the cap `L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CapBranch {
    /// `(L−q)(x/L)^{λ₂}` for `x ≥ L`.
    #[default]
    Printed,
    /// `L−q` for `x ≥ L`, the payoff of stopping at once.
    ExercisePayoff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueKind {
    /// Termination barrier only.
    Basic,
    /// Margin and/or cap with `L ≥ b` (or no cap): redemption at `b`.
    CapAboveB,
    /// Cap below the unconstrained boundary: redemption at `L`.
    CapBelowB,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// `x ≤ a`: the loan is terminated.
    Termination,
    /// `a < x < b∧L`.
    Continuation,
    /// Immediate redemption below the cap.
    Exercise,
    /// `x > L`.
    AboveCap,
}

/// Piecewise value of the contract in the discounted price `x`.
///
/// Inside the continuation region the value is `C₁x^{λ₁} + C₂x^{λ₂}`, the
/// unique combination matching `k·a` at `a` and `β−q` at `β = b∧L`. The
/// coefficients are fixed at construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueFunction<T = f64> {
    kind: ValueKind,
    terms: LoanTerms<T>,
    roots: CharacteristicRoots<T>,
    b: T,
    upper: T,
    c1: T,
    c2: T,
    normalizer: T,
    branch: CapBranch,
}

impl<T: Scalar> ValueFunction<T> {
    pub fn new(terms: LoanTerms<T>, roots: CharacteristicRoots<T>, b: T, branch: CapBranch) -> Result<Self> {
        terms.validate()?;
        if !(b > terms.a) || !b.is_finite() {
            return Err(StockLoanError::Domain(format!("boundary b = {} must exceed a = {}", b, terms.a)));
        }
        if !(roots.sqrt_disc > T::zero()) {
            return Err(StockLoanError::Domain("value function needs μ²−2λ > 0".into()));
        }
        if terms.k > T::zero() {
            let bound = margin_bound(&roots, terms.q_over_a())?;
            if terms.k > bound {
                return Err(StockLoanError::MarginTooLarge {
                    k: terms.k.as_f64(),
                    bound: bound.as_f64(),
                });
            }
        }
        let (kind, upper) = match terms.cap {
            Some(cap) if cap < b => (ValueKind::CapBelowB, cap),
            _ if terms.is_basic() => (ValueKind::Basic, b),
            _ => (ValueKind::CapAboveB, b),
        };

        let a = terms.a;
        let eps = roots.eps();
        let mu_s = roots.mu / roots.sigma;
        let normalizer = powr(upper / a, eps) - powr(a / upper, eps);
        let margin = terms.k * a;
        let pay = upper - terms.q;
        let c1 = (pay * powr(upper, mu_s) * powr(a, -eps) - margin * powr(a, mu_s) * powr(upper, -eps)) / normalizer;
        let c2 = (margin * powr(a, mu_s) * powr(upper, eps) - pay * powr(upper, mu_s) * powr(a, eps)) / normalizer;

        Ok(Self {
            kind,
            terms,
            roots,
            b,
            upper,
            c1,
            c2,
            normalizer,
            branch,
        })
    }

    pub fn kind(&self) -> ValueKind {
        self.kind
    }

    pub fn terms(&self) -> &LoanTerms<T> {
        &self.terms
    }

    pub fn roots(&self) -> &CharacteristicRoots<T> {
        &self.roots
    }

    /// Exercise boundary `b` the function was built with.
    pub fn boundary(&self) -> T {
        self.b
    }

    /// Upper edge of the continuation region, `b∧L`.
    pub fn upper(&self) -> T {
        self.upper
    }

    pub fn coefficients(&self) -> (T, T) {
        (self.c1, self.c2)
    }

    /// `C(a, b∧L) = ((b∧L)/a)^{√Δ/σ} − (a/(b∧L))^{√Δ/σ}`.
    pub fn normalizer(&self) -> T {
        self.normalizer
    }

    pub fn branch(&self) -> CapBranch {
        self.branch
    }

    /// Whether the boundary is fixed by smooth fit (`f′(b⁻) = 1`).
    pub fn has_smooth_fit(&self) -> bool {
        self.kind != ValueKind::CapBelowB
    }

    pub fn region(&self, x: T) -> Region {
        if x <= self.terms.a {
            Region::Termination
        } else if x < self.upper {
            Region::Continuation
        } else if self.terms.cap.is_some_and(|cap| x > cap) {
            Region::AboveCap
        } else {
            Region::Exercise
        }
    }

    /// Interior combination `C₁x^{λ₁} + C₂x^{λ₂}`, valid on the whole
    /// positive axis as a solution of the pricing equation.
    pub fn interior(&self, x: T) -> T {
        self.c1 * powr(x, self.roots.lambda1) + self.c2 * powr(x, self.roots.lambda2)
    }

    fn interior_derivative(&self, x: T) -> T {
        let (l1, l2) = (self.roots.lambda1, self.roots.lambda2);
        self.c1 * l1 * powr(x, l1 - T::one()) + self.c2 * l2 * powr(x, l2 - T::one())
    }

    pub fn value(&self, x: T) -> Result<T> {
        if !(x >= T::zero()) {
            return Err(StockLoanError::Domain(format!("price must be nonnegative, got {}", x)));
        }
        Ok(match self.region(x) {
            Region::Termination => self.terms.k * x,
            Region::Continuation => self.interior(x),
            Region::Exercise => x - self.terms.q,
            Region::AboveCap => self.above_cap(x),
        })
    }

    fn above_cap(&self, x: T) -> T {
        let cap = self.terms.cap.expect("above-cap region requires a cap");
        match self.branch {
            CapBranch::Printed => (cap - self.terms.q) * powr(x / cap, self.roots.lambda2),
            CapBranch::ExercisePayoff => cap - self.terms.q,
        }
    }

    /// Analytic derivative; one-sided (from the left) at branch points.
    pub fn derivative(&self, x: T) -> Result<T> {
        if !(x > T::zero()) {
            return Err(StockLoanError::Domain(format!("derivative needs x > 0, got {}", x)));
        }
        let cap = self.terms.cap;
        Ok(if x <= self.terms.a {
            self.terms.k
        } else if x <= self.upper {
            self.interior_derivative(x)
        } else if cap.is_some_and(|l| x > l) {
            match self.branch {
                CapBranch::Printed => {
                    let l = cap.unwrap_or(x);
                    (l - self.terms.q) * self.roots.lambda2 * powr(x / l, self.roots.lambda2) / x
                }
                CapBranch::ExercisePayoff => T::zero(),
            }
        } else {
            T::one()
        })
    }

    /// Value of the pricing operator `½σ²x²f″ + (r̃−δ)xf′ − r̃f` with
    /// `r̃ = r − γ`, from its coefficients recovered through the roots.
    fn operator(&self, x: T, f: T, d1: T, d2: T) -> T {
        let r_tilde = self.roots.r_tilde();
        let s = self.roots.sigma;
        // r̃ − δ = σμ + σ²/2
        let drift = s * self.roots.mu + s * s / T::of(2.0);
        s * s / T::of(2.0) * x * x * d2 + drift * x * d1 - r_tilde * f
    }

    /// Pricing operator applied to the payoff `x − q`, i.e. `−(δx − r̃q)`.
    /// Nonpositive throughout the exercise region.
    pub fn exercise_operator(&self, x: T) -> T {
        self.operator(x, x - self.terms.q, T::one(), T::zero())
    }
}

/// Default finite-difference step at `x`: `max(1e−4·x, 1e−7·q)`.
pub fn default_step<T: Scalar>(x: T, q: T) -> T {
    (T::of(1e-4) * x).max(T::of(1e-7) * q)
}

/// `½σ²x²D²f + (r̃−δ)xDf − r̃f` with central differences of step `h`.
///
/// The stencil must stay `3h` inside the continuation region.
pub fn ode_residual<T: Scalar>(vf: &ValueFunction<T>, x: T, step: Option<T>) -> Result<T> {
    let h = step.unwrap_or_else(|| default_step(x, vf.terms.q));
    let three = T::of(3.0);
    if !(x - three * h >= vf.terms.a && x + three * h <= vf.upper) {
        return Err(StockLoanError::Domain(format!(
            "stencil around x = {} with h = {} leaves the continuation region ({}, {})",
            x, h, vf.terms.a, vf.upper
        )));
    }
    let fm = vf.interior(x - h);
    let f0 = vf.interior(x);
    let fp = vf.interior(x + h);
    let d1 = (fp - fm) / (T::of(2.0) * h);
    let d2 = (fp - T::of(2.0) * f0 + fm) / (h * h);
    Ok(vf.operator(x, f0, d1, d2))
}

/// `|Df(b⁻) − 1|` from a fourth-order backward difference.
pub fn smooth_fit_defect<T: Scalar>(vf: &ValueFunction<T>, step: Option<T>) -> Result<T> {
    if !vf.has_smooth_fit() {
        return Err(StockLoanError::Domain("cap below the boundary: no smooth-fit condition".into()));
    }
    let b = vf.b;
    let h = step.unwrap_or_else(|| default_step(b, vf.terms.q));
    if !(b - T::of(4.0) * h > vf.terms.a) {
        return Err(StockLoanError::Domain(format!("stencil below b = {} reaches a", b)));
    }
    let f = |i: f64| vf.interior(b - T::of(i) * h);
    let d = (T::of(25.0) * f(0.0) - T::of(48.0) * f(1.0) + T::of(36.0) * f(2.0) - T::of(16.0) * f(3.0)
        + T::of(3.0) * f(4.0))
        / (T::of(12.0) * h);
    Ok((d - T::one()).abs())
}

/// Value of the basic contract (termination barrier only).
pub fn value_basic<T: Scalar>(x: T, terms: &LoanTerms<T>, roots: &CharacteristicRoots<T>, b: T) -> Result<T> {
    if !terms.is_basic() {
        return Err(StockLoanError::Domain("value_basic takes terms without cap or margin".into()));
    }
    ValueFunction::new(*terms, *roots, b, CapBranch::Printed)?.value(x)
}

/// Value of the contract with cap and margin.
pub fn value_capped<T: Scalar>(
    x: T,
    terms: &LoanTerms<T>,
    roots: &CharacteristicRoots<T>,
    b: T,
    branch: CapBranch,
) -> Result<T> {
    ValueFunction::new(*terms, *roots, b, branch)?.value(x)
}

/// Time-`t` value `e^{γt}·f(e^{−γt}s_t)`.
pub fn value_at_time<T: Scalar>(t: T, s_t: T, vf: &ValueFunction<T>) -> Result<T> {
    if !(t >= T::zero()) || !(s_t > T::zero()) {
        return Err(StockLoanError::Domain(format!("need t ≥ 0 and s_t > 0, got t = {}, s_t = {}", t, s_t)));
    }
    let growth = (vf.terms.gamma * t).exp();
    Ok(growth * vf.value(s_t / growth)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::{limit_boundary, solve_boundary};
    use crate::model::{compute_roots, MarketParams};

    fn market() -> MarketParams {
        MarketParams::new(0.05, 0.15, 0.01).unwrap()
    }

    fn basic(a: f64) -> ValueFunction {
        let t = LoanTerms::new(100.0, 0.07, a).unwrap();
        let roots = compute_roots(&market(), 0.07).unwrap();
        let b = solve_boundary(&roots, &t).unwrap().b;
        ValueFunction::new(t, roots, b, CapBranch::Printed).unwrap()
    }

    fn capped(a: f64, k: f64, cap: f64, branch: CapBranch) -> ValueFunction {
        let t = LoanTerms::new(100.0, 0.07, a).unwrap().with_cap(cap).unwrap().with_margin(k).unwrap();
        let roots = compute_roots(&market(), 0.07).unwrap();
        let b = solve_boundary(&roots, &t).unwrap().b;
        ValueFunction::new(t, roots, b, branch).unwrap()
    }

    #[test]
    fn basic_branches() {
        let vf = basic(50.0);
        let b = vf.boundary();
        assert_eq!(vf.kind(), ValueKind::Basic);
        assert_eq!(vf.value(50.0).unwrap(), 0.0);
        assert_eq!(vf.value(10.0).unwrap(), 0.0);
        assert!((vf.interior(b) - (b - 100.0)).abs() < 1e-10);
        assert!(vf.interior(50.0).abs() < 1e-12);
        assert_eq!(vf.value(200.0).unwrap(), 100.0);
        assert!(vf.value(-1.0).is_err());
        assert_eq!(vf.region(120.0), Region::Continuation);
    }

    #[test]
    fn interior_matches_printed_coefficients() {
        // C₁ and C₂ exactly as printed for the basic contract
        let vf = basic(50.0);
        let r = vf.roots();
        let (a, b, q) = (50.0_f64, vf.boundary(), 100.0);
        let s = r.sqrt_disc / r.sigma;
        let c = (b / a).powf(s) - (a / b).powf(s);
        let c1 = (b - q) * b.powf(r.mu / r.sigma) * a.powf(-s) / c;
        let c2 = -(b - q) * b.powf(r.mu / r.sigma) * a.powf(s) / c;
        let (g1, g2) = vf.coefficients();
        assert!((g1 - c1).abs() <= 1e-12 * c1.abs());
        assert!((g2 - c2).abs() <= 1e-12 * c2.abs());
        assert!((vf.normalizer() - c).abs() < 1e-13);
    }

    #[test]
    fn interior_equals_payoff_times_laplace() {
        let vf = basic(50.0);
        let b = vf.boundary();
        for x in [55.0, 80.0, 100.0, 130.0] {
            let via_laplace = (b - 100.0) * hitting_expectation(x, 50.0, b, vf.roots()).unwrap();
            assert!((vf.value(x).unwrap() - via_laplace).abs() < 1e-11);
        }
    }

    #[test]
    fn smooth_fit_and_residual() {
        let vf = basic(50.0);
        assert!(smooth_fit_defect(&vf, None).unwrap() < 1e-8);
        assert!((vf.derivative(vf.boundary()).unwrap() - 1.0).abs() < 1e-10);
        for x in [60.0, 90.0, 120.0, 140.0] {
            let res = ode_residual(&vf, x, None).unwrap();
            assert!(res.abs() <= 1e-6 * (vf.value(x).unwrap().abs() + 100.0), "x = {x}: {res}");
        }
        assert!(ode_residual(&vf, 50.001, None).is_err());
        assert!(ode_residual(&vf, vf.boundary() - 1e-3, None).is_err());
    }

    #[test]
    fn perturbed_boundary_breaks_smooth_fit() {
        let good = basic(50.0);
        let moved = ValueFunction::new(*good.terms(), *good.roots(), good.boundary() * 1.05, CapBranch::Printed).unwrap();
        assert!(smooth_fit_defect(&moved, None).unwrap() > 1e-3);
        // the interior still solves the pricing equation
        assert!(ode_residual(&moved, 100.0, None).unwrap().abs() < 1e-6);
    }

    #[test]
    fn exercise_region_operator_is_nonpositive() {
        let vf = basic(50.0);
        let b = vf.boundary();
        for i in 0..100 {
            let x = b * (1.0 + i as f64 * 0.05);
            assert!(vf.exercise_operator(x) <= 0.0);
        }
    }

    #[test]
    fn bounds_monotone_convex() {
        let vf = basic(40.0);
        let b = vf.boundary();
        let xs: Vec<f64> = (0..500).map(|i| 20.0 + (2.0 * b - 20.0) * i as f64 / 499.0).collect();
        let fs: Vec<f64> = xs.iter().map(|&x| vf.value(x).unwrap()).collect();
        for (i, (&x, &f)) in xs.iter().zip(&fs).enumerate() {
            assert!((x - 100.0).max(0.0) <= f + 1e-12 && f <= x);
            if i > 0 {
                assert!(f >= fs[i - 1] - 1e-12);
            }
            if i > 0 && i + 1 < xs.len() {
                assert!(fs[i - 1] + fs[i + 1] - 2.0 * f >= -1e-9);
            }
        }
    }

    #[test]
    fn value_decreases_in_barrier() {
        let fns: Vec<ValueFunction> = [1.0, 40.0, 60.0, 80.0].iter().map(|&a| basic(a)).collect();
        for x in [85.0, 100.0, 120.0, 140.0] {
            let vals: Vec<f64> = fns.iter().map(|f| f.value(x).unwrap()).collect();
            assert!(vals.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{vals:?}");
        }
    }

    #[test]
    fn small_barrier_approaches_unterminated_value() {
        let vf = basic(0.1);
        let roots = vf.roots();
        let b0 = limit_boundary(roots, 100.0);
        let f0 = |x: f64| if x >= b0 { x - 100.0 } else { (b0 - 100.0) * (x / b0).powf(roots.lambda1) };
        let worst = (1..300).map(|i| i as f64).map(|x| (vf.value(x).unwrap() - f0(x)).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-3, "{worst}");
    }

    #[test]
    fn capped_branches() {
        let vf = capped(10.0, 0.5, 240.0, CapBranch::Printed);
        let b = vf.boundary();
        assert_eq!(vf.kind(), ValueKind::CapAboveB);
        assert!((vf.value(10.0).unwrap() - 5.0).abs() < 1e-14);
        assert!((vf.interior(10.0) - 5.0).abs() < 1e-10);
        assert!((vf.interior(b) - (b - 100.0)).abs() < 1e-10);
        assert!((vf.value(240.0).unwrap() - 140.0).abs() < 1e-12);
        let above = vf.value(300.0).unwrap();
        assert!((above - 140.0 * (300.0_f64 / 240.0).powf(vf.roots().lambda2)).abs() < 1e-10);
        assert!(smooth_fit_defect(&vf, None).unwrap() < 1e-7);

        let exercise = capped(10.0, 0.5, 240.0, CapBranch::ExercisePayoff);
        assert_eq!(exercise.value(300.0).unwrap(), 140.0);
        assert_eq!(exercise.value(120.0).unwrap(), vf.value(120.0).unwrap());
    }

    #[test]
    fn low_cap_replaces_boundary() {
        let vf = capped(10.0, 0.5, 130.0, CapBranch::Printed);
        assert_eq!(vf.kind(), ValueKind::CapBelowB);
        assert_eq!(vf.upper(), 130.0);
        assert!((vf.interior(130.0) - 30.0).abs() < 1e-10);
        assert!((vf.value(130.0).unwrap() - 30.0).abs() < 1e-12);
        assert!(smooth_fit_defect(&vf, None).is_err());
        assert!(ode_residual(&vf, 100.0, None).unwrap().abs() < 1e-6);
    }

    #[test]
    fn zero_margin_high_cap_matches_basic() {
        let plain = basic(30.0);
        let t = LoanTerms::new(100.0, 0.07, 30.0).unwrap().with_cap(1e4).unwrap();
        let vf = ValueFunction::new(t, *plain.roots(), plain.boundary(), CapBranch::Printed).unwrap();
        for x in [35.0, 70.0, 110.0] {
            assert!((vf.value(x).unwrap() - plain.value(x).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn margin_above_bound_rejected() {
        let roots = compute_roots(&market(), 0.07).unwrap();
        let t = LoanTerms::new(100.0, 0.07, 50.0).unwrap().with_margin(0.9).unwrap();
        assert!(matches!(
            value_capped(80.0, &t, &roots, 150.0, CapBranch::Printed),
            Err(StockLoanError::MarginTooLarge { .. })
        ));
        assert!(value_basic(80.0, &t, &roots, 150.0).is_err());
    }

    #[test]
    fn time_t_value() {
        let vf = basic(50.0);
        assert_eq!(value_at_time(0.0, 100.0, &vf).unwrap(), vf.value(100.0).unwrap());
        let t = 3.0;
        let g = (0.07_f64 * t).exp();
        assert_eq!(value_at_time(t, 40.0 * g, &vf).unwrap(), 0.0);
        let s = 200.0 * g;
        assert!((value_at_time(t, s, &vf).unwrap() - (s - 100.0 * g)).abs() < 1e-10);
        assert!(value_at_time(-1.0, 100.0, &vf).is_err());
    }

    #[test]
    fn single_precision_value() {
        let m = MarketParams::<f32>::new(0.05, 0.15, 0.01).unwrap();
        let roots = compute_roots(&m, 0.07).unwrap();
        let t = LoanTerms::<f32>::new(100.0, 0.07, 50.0).unwrap();
        let b = solve_boundary(&roots, &t).unwrap().b;
        let vf = ValueFunction::new(t, roots, b, CapBranch::Printed).unwrap();
        let v64 = basic(50.0).value(100.0).unwrap();
        assert!((vf.value(100.0).unwrap() as f64 - v64).abs() < 1e-3);
    }
}
