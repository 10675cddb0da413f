//! VaR-constrained optimal payoff in a (possibly drift-shifted) Black-Scholes
//! market, reduced to the scalars that matter: the rate, the norm of the
//! market price of risk, the CRRA exponent and the horizon.
//!
//! The optimal terminal wealth is a derivative of the unconstrained optimal
//! wealth `V` started from a fictitious budget `v_f <= v0`: the payoff is
//! lifted to the guarantee on the band `[k_eps, G]` and left untouched
//! elsewhere. The pair `(v_f, k_eps)` solves a budget equation and a
//! shortfall-probability equation; both sides are available in closed form,
//! so the solver is a nested 1-D bracketing scheme with guaranteed brackets.

use crate::error::{Error, Result};
use crate::math::{bisect, inverse_normal_cdf, normal_cdf, normal_pdf};

/// `E[e^{pX} 1{X in (l, u]}]` for standard normal `X`:
/// `e^{p^2/2} (Phi(u - p) - Phi(l - p))`. Infinite bounds are allowed.
pub fn truncated_mgf(p: f64, lower: f64, upper: f64) -> f64 {
    (0.5 * p * p).exp() * (normal_cdf(upper - p) - normal_cdf(lower - p))
}

/// VaR-modified terminal payoff: wealth lifted to the guarantee on the band
/// `[k_eps, guarantee]`, identity elsewhere.
pub fn constrained_payoff(v: f64, k_eps: f64, guarantee: f64) -> f64 {
    if v >= k_eps && v <= guarantee {
        guarantee
    } else {
        v
    }
}

/// Closed-form kernels of the constrained problem. `gamma_norm` is the
/// Euclidean norm of the (auxiliary) market price of risk; it must be
/// strictly positive for the `d1`/`d2` kernels to exist.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernels {
    pub rate: f64,
    pub gamma_norm: f64,
    pub crra: f64,
    pub horizon: f64,
}

impl Kernels {
    pub fn new(rate: f64, gamma_norm: f64, crra: f64, horizon: f64) -> Self {
        debug_assert!(horizon > 0.0 && crra < 1.0 && crra != 0.0 && gamma_norm >= 0.0);
        Kernels {
            rate,
            gamma_norm,
            crra,
            horizon,
        }
    }

    /// Total standard deviation of the log pricing kernel over the horizon.
    pub fn total_vol(&self) -> f64 {
        self.gamma_norm * self.horizon.sqrt()
    }

    /// Drift aggregate of the optimal unconstrained wealth; linear in the
    /// time to horizon and zero at the horizon.
    pub fn big_gamma(&self, t: f64) -> f64 {
        let q = self.crra / (1.0 - self.crra);
        let half_var = 0.5 * self.gamma_norm * self.gamma_norm;
        let ttm = self.horizon - t;
        (q * (self.rate + half_var) + q * q * half_var) * ttm
    }

    /// Exponent kernel `d2(x, v, t)`; `x` is a terminal wealth level, `v`
    /// the current unconstrained wealth.
    pub fn d2(&self, x: f64, v: f64, t: f64) -> Result<f64> {
        let ttm = self.horizon - t;
        if ttm <= 0.0 {
            return Err(Error::DegenerateHorizon);
        }
        debug_assert!(x >= 0.0 && v > 0.0 && self.gamma_norm > 0.0);
        let var = self.gamma_norm * self.gamma_norm;
        let num =
            (self.crra - 1.0) * ((x / v).ln() + self.big_gamma(t)) + (self.rate - 0.5 * var) * ttm;
        Ok(num / (self.gamma_norm * ttm.sqrt()))
    }

    /// `d1 = d2 + ||gamma|| sqrt(T - t) / (1 - b)`.
    pub fn d1(&self, x: f64, v: f64, t: f64) -> Result<f64> {
        let ttm = self.horizon - t;
        if ttm <= 0.0 {
            return Err(Error::DegenerateHorizon);
        }
        Ok(self.d2(x, v, t)? + self.gamma_norm * ttm.sqrt() / (1.0 - self.crra))
    }

    /// Optimal unconstrained wealth at time `t` driven by the realized
    /// pricing kernel: `V(t) = v_f * Z(t)^{1/(b-1)} * exp(Gamma(t) - Gamma(0))`.
    pub fn unconstrained_wealth(&self, v_f: f64, t: f64, pricing_kernel: f64) -> f64 {
        v_f * pricing_kernel.powf(1.0 / (self.crra - 1.0))
            * (self.big_gamma(t) - self.big_gamma(0.0)).exp()
    }

    /// Lognormal amplitude of the terminal unconstrained wealth:
    /// `V(T) = amplitude * exp(p * X)` with `X` standard normal and
    /// `p = total_vol / (1 - b)`.
    pub fn terminal_amplitude(&self, v_f: f64) -> f64 {
        let var = self.gamma_norm * self.gamma_norm;
        v_f * (-self.big_gamma(0.0) + (self.rate + 0.5 * var) * self.horizon / (1.0 - self.crra))
            .exp()
    }

    /// Exponent loading `p` of the terminal unconstrained wealth on its
    /// driving standard normal.
    pub fn terminal_loading(&self) -> f64 {
        self.total_vol() / (1.0 - self.crra)
    }

    /// Standard-normal threshold below which `V(T) <= level`.
    pub fn terminal_threshold(&self, v_f: f64, level: f64) -> f64 {
        if level <= 0.0 {
            return f64::NEG_INFINITY;
        }
        (level / self.terminal_amplitude(v_f)).ln() / self.terminal_loading()
    }

    /// `Q(V(T) < k)` for the unconstrained wealth started at `v_f`:
    /// `Phi(-d2(k, v_f, 0) - ||gamma|| sqrt(T))`.
    pub fn shortfall_probability(&self, v_f: f64, k: f64) -> f64 {
        if k <= 0.0 {
            return 0.0;
        }
        let d2 = self.d2(k, v_f, 0.0).expect("t = 0 is before the horizon");
        normal_cdf(-d2 - self.total_vol())
    }

    /// Present value of the modified payoff,
    /// `v_f (1 + Phi(d1(G)) - Phi(d1(k))) + e^{-rT} G (Phi(d2(k)) - Phi(d2(G)))`.
    pub fn budget_value(&self, v_f: f64, k: f64, guarantee: f64) -> f64 {
        if guarantee <= 0.0 {
            return v_f;
        }
        let d1_g = self.d1(guarantee, v_f, 0.0).expect("t = 0");
        let d2_g = self.d2(guarantee, v_f, 0.0).expect("t = 0");
        // k = 0 collapses to the portfolio-insurance budget through the
        // natural limits Phi(d1(0+)) = 1, Phi(d2(0+)) = 1.
        let (d1_k, d2_k) = if k <= 0.0 {
            (f64::INFINITY, f64::INFINITY)
        } else {
            (
                self.d1(k, v_f, 0.0).expect("t = 0"),
                self.d2(k, v_f, 0.0).expect("t = 0"),
            )
        };
        v_f * (1.0 + normal_cdf(d1_g) - normal_cdf(d1_k))
            + (-self.rate * self.horizon).exp() * guarantee * (normal_cdf(d2_k) - normal_cdf(d2_g))
    }

    /// Arbitrage-free value of the modified claim at `(t, V)`.
    pub fn claim_value(&self, k: f64, guarantee: f64, t: f64, v: f64) -> Result<f64> {
        if k >= guarantee {
            return Ok(v);
        }
        let disc = (-self.rate * (self.horizon - t)).exp() * guarantee;
        let (d1_k, d2_k) = if k <= 0.0 {
            (f64::INFINITY, f64::INFINITY)
        } else {
            (self.d1(k, v, t)?, self.d2(k, v, t)?)
        };
        let d1_g = self.d1(guarantee, v, t)?;
        let d2_g = self.d2(guarantee, v, t)?;
        Ok(v - (v * normal_cdf(-d1_g) - disc * normal_cdf(-d2_g))
            + (v * normal_cdf(-d1_k) - disc * normal_cdf(-d2_k)))
    }

    /// Relative exposure `V * dD/dV / D` of the claim; scales the
    /// constant-mix policy into the VaR-optimal one. Strictly positive
    /// before the horizon.
    pub fn exposure_multiplier(&self, k: f64, guarantee: f64, t: f64, v: f64) -> Result<f64> {
        if k >= guarantee {
            return Ok(1.0);
        }
        let ttm = self.horizon - t;
        if ttm <= 0.0 {
            return Err(Error::DegenerateHorizon);
        }
        let value = self.claim_value(k, guarantee, t, v)?;
        let disc = (-self.rate * ttm).exp();
        let d2_g = self.d2(guarantee, v, t)?;
        let d2_k = if k <= 0.0 {
            f64::INFINITY
        } else {
            self.d2(k, v, t)?
        };
        let plateau = disc * guarantee * (normal_cdf(-d2_g) - normal_cdf(-d2_k)) / value;
        let kink = (1.0 - self.crra) * (guarantee - k) * disc * normal_pdf(d2_k)
            / (value * self.gamma_norm * ttm.sqrt());
        Ok(1.0 - plateau + kink)
    }

    /// Closed-form expected CRRA utility of the modified terminal payoff.
    pub fn expected_utility(&self, v_f: f64, k: f64, guarantee: f64) -> f64 {
        let b = self.crra;
        let base = v_f.powf(b) / b * ((1.0 - b) * self.big_gamma(0.0)).exp();
        if k >= guarantee || guarantee <= 0.0 {
            return base;
        }
        let s = self.total_vol();
        let d1_g = self.d1(guarantee, v_f, 0.0).expect("t = 0");
        let d2_g = self.d2(guarantee, v_f, 0.0).expect("t = 0");
        let (d1_k, d2_k) = if k <= 0.0 {
            (f64::INFINITY, f64::INFINITY)
        } else {
            (
                self.d1(k, v_f, 0.0).expect("t = 0"),
                self.d2(k, v_f, 0.0).expect("t = 0"),
            )
        };
        base * (1.0 - normal_cdf(d1_k) + normal_cdf(d1_g))
            + guarantee.powf(b) / b * (normal_cdf(d2_k + s) - normal_cdf(d2_g + s))
    }

    /// Mean, standard deviation and shortfall probability of the modified
    /// terminal payoff, from truncated lognormal moments.
    pub fn terminal_statistics(&self, v_f: f64, k: f64, guarantee: f64) -> TerminalStats {
        if self.gamma_norm == 0.0 {
            let v = v_f * (self.rate * self.horizon).exp();
            let v = constrained_payoff(v, k, guarantee);
            return TerminalStats {
                mean: v,
                std_dev: 0.0,
                shortfall: if v < guarantee { 1.0 } else { 0.0 },
            };
        }
        let a = self.terminal_amplitude(v_f);
        let p = self.terminal_loading();
        let x_k = self.terminal_threshold(v_f, k.min(guarantee));
        let x_g = self.terminal_threshold(v_f, guarantee);
        let plateau = normal_cdf(x_g) - normal_cdf(x_k);
        let mean = a * truncated_mgf(p, f64::NEG_INFINITY, x_k)
            + guarantee * plateau
            + a * truncated_mgf(p, x_g, f64::INFINITY);
        let second = a * a * truncated_mgf(2.0 * p, f64::NEG_INFINITY, x_k)
            + guarantee * guarantee * plateau
            + a * a * truncated_mgf(2.0 * p, x_g, f64::INFINITY);
        TerminalStats {
            mean,
            std_dev: (second - mean * mean).max(0.0).sqrt(),
            shortfall: normal_cdf(x_k),
        }
    }
}

/// Law summary of a terminal payoff.
#[derive(Debug, Clone, Copy)]
pub struct TerminalStats {
    pub mean: f64,
    pub std_dev: f64,
    pub shortfall: f64,
}

/// Which branch of the solution applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// The unconstrained shortfall already satisfies the bound; the payoff
    /// modification is empty (`k_eps = guarantee`).
    NonBinding,
    /// Both equations bind; `0 < k_eps < guarantee`.
    Binding,
    /// Hard floor (`epsilon = 0`); `k_eps = 0` and the payoff is
    /// `max(V, guarantee)`.
    PortfolioInsurance,
}

/// Scalar statement of the VaR problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarProblem {
    pub rate: f64,
    pub gamma_norm: f64,
    pub crra: f64,
    pub horizon: f64,
    pub v0: f64,
    pub guarantee: f64,
    pub epsilon: f64,
}

/// Solver trace kept for reporting.
#[derive(Debug, Clone, Copy, Default)]
pub struct SolveDiagnostics {
    pub outer_iterations: u32,
    pub inner_iterations: u32,
    pub budget_residual: f64,
    pub probability_residual: f64,
    /// Sign changes of the budget residual over a coarse scan of the
    /// fictitious-budget bracket; more than one signals multiple roots.
    pub budget_sign_changes: u32,
}

/// Solved VaR parameters plus the kernels needed to evaluate the policy.
#[derive(Debug, Clone, Copy)]
pub struct VarSolution {
    pub problem: VarProblem,
    pub kernels: Kernels,
    pub v_f: f64,
    pub k_eps: f64,
    pub regime: Regime,
    pub diagnostics: SolveDiagnostics,
}

// The inner threshold solve runs to bracket exhaustion: leftover jitter in
// k_eps would otherwise feed ~1e-9 noise into the outer budget residual.
const INNER_TOL: f64 = 1e-16;
const OUTER_TOL: f64 = 1e-10;
const MAX_ITER: u32 = 200;

/// Solves the budget / shortfall system for `(v_f, k_eps)`.
///
/// Regime detection first: the constraint is vacuous when the unconstrained
/// shortfall already meets the bound; `epsilon = 0` reduces to the
/// portfolio-insurance budget in `v_f` alone; otherwise the shortfall
/// equation is solved for `k_eps` inside every budget evaluation and the
/// budget residual is driven to zero in `v_f`.
pub fn solve_var_parameters(problem: &VarProblem) -> Result<VarSolution> {
    let p = *problem;
    if p.v0.is_nan() || p.v0 <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "v0",
            message: format!("{}", p.v0),
        });
    }
    if p.horizon.is_nan() || p.horizon <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "T",
            message: format!("{}", p.horizon),
        });
    }
    if !(0.0..=1.0).contains(&p.epsilon) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            message: format!("{}", p.epsilon),
        });
    }
    if !(p.crra < 1.0 && p.crra != 0.0) {
        return Err(Error::InvalidParameter {
            name: "b",
            message: format!("{}", p.crra),
        });
    }
    let kernels = Kernels::new(p.rate, p.gamma_norm, p.crra, p.horizon);

    let non_binding = |diag: SolveDiagnostics| VarSolution {
        problem: p,
        kernels,
        v_f: p.v0,
        k_eps: p.guarantee,
        regime: Regime::NonBinding,
        diagnostics: diag,
    };

    if p.guarantee <= 0.0 || p.epsilon >= 1.0 {
        return Ok(non_binding(SolveDiagnostics::default()));
    }

    if p.gamma_norm == 0.0 {
        // Deterministic wealth: the guarantee is either met surely or missed
        // surely; nothing to optimize.
        if p.v0 * (p.rate * p.horizon).exp() >= p.guarantee {
            return Ok(non_binding(SolveDiagnostics::default()));
        }
        return Err(Error::Infeasible {
            message: "deterministic wealth below the guarantee".to_string(),
        });
    }

    let unconstrained_shortfall = kernels.shortfall_probability(p.v0, p.guarantee);
    if unconstrained_shortfall <= p.epsilon {
        return Ok(non_binding(SolveDiagnostics::default()));
    }

    // Infimum cost of any payoff meeting the shortfall bound: pay the
    // guarantee everywhere except on the most expensive epsilon-mass of
    // states. The system has a root if and only if the endowment exceeds it.
    let s = kernels.total_vol();
    let min_cost = p.guarantee
        * (-p.rate * p.horizon).exp()
        * normal_cdf(inverse_normal_cdf(1.0 - p.epsilon) - s);
    if p.v0 <= min_cost {
        return Err(Error::Infeasible {
            message: format!(
                "guarantee {} needs at least {:.6} initial capital at epsilon {}",
                p.guarantee, min_cost, p.epsilon
            ),
        });
    }

    if p.epsilon == 0.0 {
        // Hard floor: k = 0, budget equation alone determines v_f.
        let res = bisect(
            |v_f| kernels.budget_value(v_f, 0.0, p.guarantee) - p.v0,
            1e-12 * p.v0,
            p.v0,
            OUTER_TOL,
            MAX_ITER,
            "portfolio-insurance budget",
        )?;
        let v_f = res.root;
        return Ok(VarSolution {
            problem: p,
            kernels,
            v_f,
            k_eps: 0.0,
            regime: Regime::PortfolioInsurance,
            diagnostics: SolveDiagnostics {
                outer_iterations: res.iterations,
                inner_iterations: 0,
                budget_residual: res.residual,
                probability_residual: 0.0,
                budget_sign_changes: 1,
            },
        });
    }

    // Binding regime: nested bracketing.
    let k_lo = 1e-12 * p.guarantee;
    let k_hi = (1.0 - 1e-12) * p.guarantee;
    let inner_iters = std::cell::Cell::new(0u32);
    let solve_k = |v_f: f64| -> Result<f64> {
        let res = bisect(
            |k| kernels.shortfall_probability(v_f, k) - p.epsilon,
            k_lo,
            k_hi,
            INNER_TOL,
            MAX_ITER,
            "shortfall threshold",
        )?;
        inner_iters.set(inner_iters.get() + res.iterations);
        Ok(res.root)
    };
    let budget_residual = |v_f: f64| -> Result<f64> {
        let k = solve_k(v_f)?;
        Ok(kernels.budget_value(v_f, k, p.guarantee) - p.v0)
    };

    let v_lo = 1e-6 * p.v0;
    let fallible = std::cell::RefCell::new(None::<Error>);
    let res = bisect(
        |v_f| match budget_residual(v_f) {
            Ok(r) => r,
            Err(e) => {
                *fallible.borrow_mut() = Some(e);
                f64::NAN
            }
        },
        v_lo,
        p.v0,
        OUTER_TOL,
        MAX_ITER,
        "fictitious budget",
    );
    if let Some(e) = fallible.into_inner() {
        return Err(e);
    }
    let res = res?;
    let v_f = res.root;
    let k_eps = solve_k(v_f)?;

    // Coarse residual scan: more than one sign change would mean the
    // bracketing root is not unique.
    let mut sign_changes = 0u32;
    let mut prev = f64::NAN;
    for i in 0..=32 {
        let v = v_lo + (p.v0 - v_lo) * i as f64 / 32.0;
        let r = budget_residual(v).unwrap_or(f64::NAN);
        if prev.is_finite() && r.is_finite() && r.signum() != prev.signum() {
            sign_changes += 1;
        }
        prev = r;
    }

    Ok(VarSolution {
        problem: p,
        kernels,
        v_f,
        k_eps,
        regime: Regime::Binding,
        diagnostics: SolveDiagnostics {
            outer_iterations: res.iterations,
            inner_iterations: inner_iters.get(),
            budget_residual: (kernels.budget_value(v_f, k_eps, p.guarantee) - p.v0).abs(),
            probability_residual: (kernels.shortfall_probability(v_f, k_eps) - p.epsilon).abs(),
            budget_sign_changes: sign_changes,
        },
    })
}

impl VarSolution {
    /// Terminal payoff applied to a realized unconstrained wealth.
    pub fn terminal_payoff(&self, v: f64) -> f64 {
        constrained_payoff(v, self.k_eps, self.problem.guarantee)
    }

    /// Claim value `D(t, V)`; the identity map when the modification is
    /// empty, the closed form otherwise.
    pub fn claim_value(&self, t: f64, v: f64) -> Result<f64> {
        self.kernels
            .claim_value(self.k_eps, self.problem.guarantee, t, v)
    }

    /// Exposure multiplier `alpha(t, V)`.
    pub fn exposure_multiplier(&self, t: f64, v: f64) -> Result<f64> {
        self.kernels
            .exposure_multiplier(self.k_eps, self.problem.guarantee, t, v)
    }

    /// Optimal unconstrained wealth driven by a realized pricing kernel.
    pub fn unconstrained_wealth(&self, t: f64, pricing_kernel: f64) -> f64 {
        self.kernels
            .unconstrained_wealth(self.v_f, t, pricing_kernel)
    }

    /// Terminal unconstrained wealth from its driving standard normal.
    pub fn wealth_from_normal(&self, x: f64) -> f64 {
        self.kernels.terminal_amplitude(self.v_f) * (self.kernels.terminal_loading() * x).exp()
    }

    /// Terminal pricing kernel from the same driving standard normal.
    pub fn kernel_from_normal(&self, x: f64) -> f64 {
        let g2 = self.kernels.gamma_norm * self.kernels.gamma_norm;
        (-(self.kernels.rate + 0.5 * g2) * self.kernels.horizon - self.kernels.total_vol() * x)
            .exp()
    }

    /// Closed-form expected utility of the solved payoff.
    pub fn expected_utility(&self) -> f64 {
        self.kernels
            .expected_utility(self.v_f, self.k_eps, self.problem.guarantee)
    }

    /// Law summary of the solved terminal payoff.
    pub fn terminal_statistics(&self) -> TerminalStats {
        self.kernels
            .terminal_statistics(self.v_f, self.k_eps, self.problem.guarantee)
    }

    pub fn budget_residual(&self) -> f64 {
        (self
            .kernels
            .budget_value(self.v_f, self.k_eps, self.problem.guarantee)
            - self.problem.v0)
            .abs()
    }

    pub fn shortfall_residual(&self) -> f64 {
        match self.regime {
            Regime::Binding => (self.kernels.shortfall_probability(self.v_f, self.k_eps)
                - self.problem.epsilon)
                .abs(),
            _ => 0.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_kernels() -> Kernels {
        // Table-style base case: gamma from the two-asset market.
        Kernels::new(0.0102, 0.7009630673452065, -9.0, 10.0)
    }

    fn base_problem() -> VarProblem {
        VarProblem {
            rate: 0.0102,
            gamma_norm: 0.7009630673452065,
            crra: -9.0,
            horizon: 10.0,
            v0: 100.0,
            guarantee: 100.0,
            epsilon: 0.005,
        }
    }

    #[test]
    fn big_gamma_vanishes_for_log_utility_limit() {
        for &b in &[1e-9, -1e-9] {
            let k = Kernels::new(0.02, 0.5, b, 10.0);
            assert!(k.big_gamma(0.0).abs() < 1e-8);
        }
        assert_eq!(base_kernels().big_gamma(10.0), 0.0);
    }

    #[test]
    fn d1_d2_identity() {
        let k = base_kernels();
        for &(x, v, t) in &[(80.0, 100.0, 0.0), (100.0, 50.0, 3.0), (150.0, 120.0, 9.5)] {
            let gap = k.d1(x, v, t).unwrap() - k.d2(x, v, t).unwrap();
            let expected = k.gamma_norm * (k.horizon - t).sqrt() / (1.0 - k.crra);
            assert!((gap - expected).abs() < 1e-12);
        }
        assert_eq!(
            k.d2(100.0, 100.0, 10.0).unwrap_err(),
            Error::DegenerateHorizon
        );
    }

    #[test]
    fn shortfall_matches_lognormal_quantile_oracle() {
        // Independent route: V(T) = A e^{pX} is lognormal, so
        // Q(V(T) < x) = Phi(ln(x/A)/p). The d2-based form must agree, and
        // the variant without the ||gamma||sqrt(T) shift must not.
        let k = base_kernels();
        for &(v_f, x) in &[(100.0, 100.0), (97.0, 90.0), (50.0, 60.0), (100.0, 30.0)] {
            let direct = normal_cdf(k.terminal_threshold(v_f, x));
            let viad2 = k.shortfall_probability(v_f, x);
            assert!((direct - viad2).abs() < 1e-12, "v_f={v_f}, x={x}");
        }
        // The variant without the ||gamma||sqrt(T) shift disagrees wherever
        // the probability is material.
        for &(v_f, x) in &[(100.0, 100.0), (97.0, 90.0), (50.0, 60.0)] {
            let direct = normal_cdf(k.terminal_threshold(v_f, x));
            let unshifted = normal_cdf(-k.d2(x, v_f, 0.0).unwrap());
            assert!(
                (direct - unshifted).abs() > 1e-3,
                "shift must matter at {v_f}, {x}"
            );
        }
    }

    #[test]
    fn unconstrained_wealth_boundary_behaviour() {
        let k = base_kernels();
        assert_eq!(k.unconstrained_wealth(87.5, 0.0, 1.0), 87.5);
        // Extreme risk aversion: the kernel exponent vanishes and wealth
        // becomes deterministic.
        let stiff = Kernels::new(0.0102, 0.7, -1e9, 10.0);
        let a = stiff.unconstrained_wealth(100.0, 4.0, 0.2);
        let b = stiff.unconstrained_wealth(100.0, 4.0, 4.1);
        assert!((a / b - 1.0).abs() < 1e-6);
    }

    #[test]
    fn constrained_payoff_branches() {
        assert_eq!(constrained_payoff(50.0, 80.0, 100.0), 50.0);
        assert_eq!(constrained_payoff(90.0, 80.0, 100.0), 100.0);
        assert_eq!(constrained_payoff(130.0, 80.0, 100.0), 130.0);
        // Hard-floor limit: everything below the guarantee is lifted.
        assert_eq!(constrained_payoff(40.0, 0.0, 100.0), 100.0);
        assert_eq!(constrained_payoff(140.0, 0.0, 100.0), 140.0);
    }

    #[test]
    fn truncated_mgf_known_values() {
        assert!((truncated_mgf(0.0, f64::NEG_INFINITY, f64::INFINITY) - 1.0).abs() < 1e-15);
        assert!(
            (truncated_mgf(1.0, f64::NEG_INFINITY, f64::INFINITY) - 0.5f64.exp()).abs() < 1e-14
        );
    }

    #[test]
    fn truncated_mgf_matches_quadrature() {
        // Composite Simpson of e^{px} phi(x) over (-1, 2].
        let (p, l, u) = (0.7, -1.0, 2.0);
        let n = 40_000;
        let h = (u - l) / n as f64;
        let f = |x: f64| (p * x).exp() * normal_pdf(x);
        let mut acc = f(l) + f(u);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(l + i as f64 * h);
        }
        let oracle = acc * h / 3.0;
        assert!((truncated_mgf(p, l, u) - oracle).abs() < 1e-10);
    }

    #[test]
    fn budget_collapses_without_modification() {
        let k = base_kernels();
        // Guarantee of zero: the payoff is the unconstrained wealth.
        assert!((k.budget_value(73.0, 0.0, 0.0) - 73.0).abs() < 1e-12);
        // k at the guarantee: empty band, plain budget again.
        let b = k.budget_value(73.0, 100.0, 100.0);
        assert!((b - 73.0).abs() < 1e-10);
    }

    /// Second algebraic route to the budget: expand E[Z f(V)] directly with
    /// truncated-mgf pieces of the joint lognormal (Z, V).
    fn budget_oracle(k: &Kernels, v_f: f64, k_eps: f64, guarantee: f64) -> f64 {
        let s = k.total_vol();
        let p = k.terminal_loading();
        let a = k.terminal_amplitude(v_f);
        let disc = (-(k.rate + 0.5 * k.gamma_norm * k.gamma_norm) * k.horizon).exp();
        let x_k = k.terminal_threshold(v_f, k_eps.min(guarantee));
        let x_g = k.terminal_threshold(v_f, guarantee);
        a * disc
            * (truncated_mgf(p - s, f64::NEG_INFINITY, x_k)
                + truncated_mgf(p - s, x_g, f64::INFINITY))
            + guarantee * disc * truncated_mgf(-s, x_k, x_g)
    }

    #[test]
    fn budget_value_matches_independent_expansion() {
        let k = base_kernels();
        for &(v_f, k_eps) in &[(95.0, 80.0), (99.0, 92.0), (60.0, 10.0), (90.0, 0.0)] {
            let direct = k.budget_value(v_f, k_eps, 100.0);
            let oracle = budget_oracle(&k, v_f, k_eps, 100.0);
            assert!(
                ((direct - oracle) / direct).abs() < 1e-12,
                "v_f={v_f} k={k_eps}: {direct} vs {oracle}"
            );
        }
    }

    #[test]
    fn solve_non_binding_when_constraint_vacuous() {
        let mut p = base_problem();
        p.epsilon = 1.0;
        let sol = solve_var_parameters(&p).unwrap();
        assert_eq!(sol.regime, Regime::NonBinding);
        assert_eq!(sol.v_f, 100.0);
        assert_eq!(sol.k_eps, 100.0);
        // Loose epsilon above the unconstrained shortfall: also vacuous.
        p.epsilon = 0.2;
        assert_eq!(solve_var_parameters(&p).unwrap().regime, Regime::NonBinding);
    }

    #[test]
    fn solve_base_case_binds_with_tiny_residuals() {
        let sol = solve_var_parameters(&base_problem()).unwrap();
        assert_eq!(sol.regime, Regime::Binding);
        assert!(
            sol.budget_residual() < 1e-10,
            "budget {}",
            sol.budget_residual()
        );
        assert!(sol.shortfall_residual() < 1e-10);
        assert!(sol.v_f > 0.0 && sol.v_f < 100.0);
        assert!(sol.k_eps > 0.0 && sol.k_eps < 100.0);
        assert_eq!(sol.diagnostics.budget_sign_changes, 1);
        // Relative residual bound from the solution invariants.
        assert!(sol.budget_residual() / 100.0 < 1e-8);
    }

    #[test]
    fn solve_portfolio_insurance_limit() {
        let mut p = base_problem();
        p.epsilon = 0.0;
        p.guarantee = 100.0 * (0.0102f64 * 10.0).exp() - 1.0;
        let sol = solve_var_parameters(&p).unwrap();
        assert_eq!(sol.regime, Regime::PortfolioInsurance);
        assert_eq!(sol.k_eps, 0.0);
        assert!(sol.v_f < 100.0);
        assert!(sol.budget_residual() < 1e-10);
        // Independent route: budget = cost of V + cost of the put on V.
        let oracle = budget_oracle(&sol.kernels, sol.v_f, 0.0, p.guarantee);
        assert!((oracle - 100.0).abs() < 1e-8);
    }

    #[test]
    fn solve_rejects_unfinanceable_guarantee() {
        let mut p = base_problem();
        p.epsilon = 0.0;
        p.guarantee = 120.0 * (0.0102f64 * 10.0).exp();
        assert!(matches!(
            solve_var_parameters(&p),
            Err(Error::Infeasible { .. })
        ));
    }

    #[test]
    fn solve_allows_guarantee_beyond_super_replication_when_var_slack() {
        // With a probabilistic guarantee the system stays solvable even when
        // the discounted guarantee exceeds the endowment.
        let mut p = base_problem();
        p.guarantee = 128.0;
        let sol = solve_var_parameters(&p).unwrap();
        assert_eq!(sol.regime, Regime::Binding);
        assert!(sol.budget_residual() < 1e-10);
        assert!(sol.shortfall_residual() < 1e-10);
    }

    #[test]
    fn threshold_monotone_in_epsilon() {
        // A looser shortfall budget lifts a thinner band: k_eps grows from 0
        // (hard floor) toward the guarantee (empty modification) as epsilon
        // sweeps from 0 to the unconstrained shortfall, and stays capped at
        // the guarantee beyond it.
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=15 {
            let mut p = base_problem();
            p.epsilon = i as f64 * 0.001;
            let sol = solve_var_parameters(&p).unwrap();
            assert!(
                sol.k_eps >= prev - 1e-9,
                "k_eps not non-decreasing at {}",
                p.epsilon
            );
            assert!(sol.k_eps <= p.guarantee);
            prev = sol.k_eps;
        }
        let mut p = base_problem();
        p.epsilon = 0.0;
        assert_eq!(solve_var_parameters(&p).unwrap().k_eps, 0.0);
        p.epsilon = 0.015;
        assert_eq!(solve_var_parameters(&p).unwrap().k_eps, p.guarantee);
    }

    #[test]
    fn claim_value_identity_and_budget_consistency() {
        let sol = solve_var_parameters(&base_problem()).unwrap();
        // Empty modification: claim is the wealth itself.
        assert_eq!(
            sol.kernels.claim_value(100.0, 100.0, 3.0, 88.0).unwrap(),
            88.0
        );
        // At the solved parameters the claim reproduces the endowment.
        let d0 = sol.claim_value(0.0, sol.v_f).unwrap();
        assert!((d0 - 100.0).abs() < 1e-8, "D(0, v_f) = {d0}");
        // Near the horizon the claim approaches the payoff away from the band.
        let t = 10.0 - 1e-9;
        for &v in &[0.3 * sol.k_eps, 1.8 * 100.0] {
            let d = sol.claim_value(t, v).unwrap();
            assert!((d - sol.terminal_payoff(v)).abs() < 1e-6 * v.max(1.0));
        }
    }

    #[test]
    fn claim_value_lower_bound_and_monotonicity() {
        let sol = solve_var_parameters(&base_problem()).unwrap();
        let k = &sol.kernels;
        for &t in &[0.0, 2.5, 5.0, 7.5, 9.9] {
            let disc = (-(k.rate) * (k.horizon - t)).exp();
            let mut prev = f64::NEG_INFINITY;
            for i in 1..=60 {
                let v = 0.2 * 100.0 + (5.0 * 100.0 - 0.2 * 100.0) * i as f64 / 60.0;
                let d = sol.claim_value(t, v).unwrap();
                let d2g = k.d2(100.0, v, t).unwrap();
                let d2k = k.d2(sol.k_eps, v, t).unwrap();
                let bound = disc * 100.0 * (normal_cdf(-d2g) - normal_cdf(-d2k));
                assert!(d > bound, "positivity bound violated at t={t} v={v}");
                assert!(d > prev, "claim value not increasing at t={t} v={v}");
                prev = d;
            }
        }
    }

    #[test]
    fn exposure_multiplier_unconstrained_and_positive() {
        let sol = solve_var_parameters(&base_problem()).unwrap();
        assert_eq!(
            sol.kernels
                .exposure_multiplier(100.0, 100.0, 2.0, 50.0)
                .unwrap(),
            1.0
        );
        for &t in &[0.0, 2.5, 5.0, 7.5, 9.9] {
            for i in 1..=60 {
                let v = 20.0 + (500.0 - 20.0) * i as f64 / 60.0;
                let a = sol.exposure_multiplier(t, v).unwrap();
                assert!(a > 0.0, "alpha <= 0 at t={t} v={v}");
            }
        }
    }

    #[test]
    fn exposure_multiplier_matches_finite_difference() {
        let sol = solve_var_parameters(&base_problem()).unwrap();
        for &t in &[0.0, 2.5, 5.0, 7.5] {
            for &v in &[40.0, 80.0, 100.0, 140.0, 300.0] {
                let h = 1e-5 * v;
                let up = sol.claim_value(t, v + h).unwrap();
                let down = sol.claim_value(t, v - h).unwrap();
                let d = sol.claim_value(t, v).unwrap();
                let fd = (up - down) / (2.0 * h) * v / d;
                let alpha = sol.exposure_multiplier(t, v).unwrap();
                assert!((alpha - fd).abs() < 1e-6, "t={t} v={v}: {alpha} vs {fd}");
            }
        }
    }

    #[test]
    fn expected_utility_reduces_when_unconstrained() {
        let k = base_kernels();
        let direct = k.expected_utility(93.0, 100.0, 100.0);
        let expected = 93.0f64.powf(-9.0) / -9.0 * (10.0 * k.big_gamma(0.0)).exp();
        assert!(((direct - expected) / expected).abs() < 1e-12);
    }

    #[test]
    fn expected_utility_times_b_continuous_through_zero() {
        // Fixed payoff parameters, b -> 0 from both sides: b * E[U] tends to
        // E[f^b] -> 1 on either side.
        for &b in &[1e-6, -1e-6] {
            let k = Kernels::new(0.0102, 0.7, b, 10.0);
            let scaled = b * k.expected_utility(95.0, 90.0, 100.0);
            assert!((scaled - 1.0).abs() < 1e-3, "b={b}: {scaled}");
        }
    }

    #[test]
    fn payoff_shortfall_equivalence() {
        let sol = solve_var_parameters(&base_problem()).unwrap();
        for i in 0..400 {
            let v = 0.5 * sol.k_eps + i as f64;
            let short = sol.terminal_payoff(v) < 100.0;
            assert_eq!(short, v < sol.k_eps, "v = {v}");
        }
    }

    #[test]
    fn terminal_statistics_consistent_with_solution() {
        let sol = solve_var_parameters(&base_problem()).unwrap();
        let stats = sol.terminal_statistics();
        assert!((stats.shortfall - 0.005).abs() < 1e-10);
        assert!(stats.mean > 100.0 && stats.std_dev > 0.0);
    }
}
