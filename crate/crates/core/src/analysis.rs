//! Economic comparisons: when reinsurance enters the optimal portfolio, and
//! how much initial wealth (or extra guarantee) the optimal
//! investment-reinsurance strategy is worth against a reference strategy.

use crate::dual;
use crate::error::{Error, Result};
use crate::market::{MarketParams, ProductSpec};
use crate::math::{bisect, inverse_normal_cdf, normal_cdf};
use crate::strategy::ReferenceStrategy;
use crate::var_solver::{solve_var_parameters, VarProblem};

/// Sharpe ratios in the optimal auxiliary market and the resulting verdict:
/// partial reinsurance is optimal iff the reinsurable fund's Sharpe ratio is
/// below the correlation-scaled Sharpe ratio of the investable fund.
#[derive(Debug, Clone, Copy)]
pub struct ReinsuranceVerdict {
    pub sharpe_fund: f64,
    pub sharpe_reinsurable: f64,
    pub rho: f64,
    pub optimal: bool,
}

pub fn reinsurance_is_optimal(m: &MarketParams) -> Result<ReinsuranceVerdict> {
    let lambda = dual::optimal_dual_vector(m)?.as_vec();
    let sharpe_fund = (m.mu1 + lambda.0 - m.rate) / m.sigma1;
    let sharpe_reinsurable = (m.mu2 + lambda.1 - m.rate) / m.sigma2;
    Ok(ReinsuranceVerdict {
        sharpe_fund,
        sharpe_reinsurable,
        rho: m.rho,
        // Strict inequality up to the slackness tolerance: a suppressed
        // asset lands exactly on the boundary in exact arithmetic.
        optimal: sharpe_reinsurable < m.rho * sharpe_fund - 1e-10,
    })
}

/// Root search outcome for the welfare comparisons.
#[derive(Debug, Clone, Copy)]
pub struct WelfareRoot {
    pub value: f64,
    pub iterations: u32,
    /// Utility-equation residual normalized by the reference utility.
    pub residual: f64,
    pub reference_utility: f64,
}

const WELFARE_TOL: f64 = 1e-10;
const WELFARE_MAX_ITER: u32 = 100;

/// Expected utility of the optimal strategy for a given initial wealth and
/// guarantee, re-solving the VaR system from scratch.
fn optimal_utility(
    m: &MarketParams,
    product: &ProductSpec,
    v0: f64,
    guarantee: f64,
) -> Result<f64> {
    let gamma = dual::gamma_lambda(m, &dual::optimal_dual_vector(m)?)?;
    let sol = solve_var_parameters(&VarProblem {
        rate: m.rate,
        gamma_norm: gamma.norm(),
        crra: product.crra,
        horizon: product.horizon,
        v0,
        guarantee,
        epsilon: product.epsilon,
    })?;
    Ok(sol.expected_utility())
}

/// Infimum initial capital that keeps the VaR problem solvable for a given
/// guarantee: the cost of paying the guarantee off the most expensive
/// epsilon-mass of states.
fn minimal_capital(m: &MarketParams, product: &ProductSpec, guarantee: f64) -> Result<f64> {
    let gamma = dual::gamma_lambda(m, &dual::optimal_dual_vector(m)?)?;
    let s = gamma.norm() * product.horizon.sqrt();
    Ok(guarantee
        * (-m.rate * product.horizon).exp()
        * normal_cdf(inverse_normal_cdf(1.0 - product.epsilon) - s))
}

/// Wealth-equivalent utility loss against a reference strategy: the fraction
/// `l` of initial wealth the optimal strategy can forgo and still match the
/// reference's expected utility at the unchanged guarantee. Every candidate
/// evaluation re-solves the VaR system at wealth `v0 (1 - l)`; the value
/// function is not homothetic because the guarantee stays fixed.
pub fn weul(
    reference: &ReferenceStrategy,
    m: &MarketParams,
    product: &ProductSpec,
) -> Result<WelfareRoot> {
    weul_from_utility(reference.expected_utility(m, product), m, product)
}

pub fn weul_from_utility(
    reference_utility: f64,
    m: &MarketParams,
    product: &ProductSpec,
) -> Result<WelfareRoot> {
    let v0 = product.initial_wealth;
    let floor = minimal_capital(m, product, product.guarantee)?;
    if floor >= v0 {
        return Err(Error::Infeasible {
            message: "guarantee unreachable at any wealth reduction".to_string(),
        });
    }
    // Largest wealth reduction that keeps the system solvable, shaved by a
    // margin so the nested solver still brackets at the endpoint.
    let l_max = (1.0 - floor / v0) - 1e-5;
    if l_max <= 0.0 {
        return Err(Error::Infeasible {
            message: "guarantee leaves no room for a wealth reduction".to_string(),
        });
    }
    let scale = reference_utility.abs();
    let residual = |l: f64| match optimal_utility(m, product, v0 * (1.0 - l), product.guarantee) {
        Ok(u) => (u - reference_utility) / scale,
        Err(_) => f64::NAN,
    };
    let res = bisect(
        residual,
        0.0,
        l_max,
        WELFARE_TOL,
        WELFARE_MAX_ITER,
        "wealth-equivalent loss",
    )?;
    Ok(WelfareRoot {
        value: res.root,
        iterations: res.iterations,
        residual: res.residual,
        reference_utility,
    })
}

/// Guarantee-equivalent utility gain against a reference strategy: the
/// fractional guarantee increase `g` the optimal strategy supports at the
/// full initial wealth with the reference's expected utility. Candidate
/// evaluations re-solve the VaR system at guarantee `(1 + g) G`.
pub fn geug(
    reference: &ReferenceStrategy,
    m: &MarketParams,
    product: &ProductSpec,
) -> Result<WelfareRoot> {
    geug_from_utility(reference.expected_utility(m, product), m, product)
}

pub fn geug_from_utility(
    reference_utility: f64,
    m: &MarketParams,
    product: &ProductSpec,
) -> Result<WelfareRoot> {
    let unit_cost = minimal_capital(m, product, product.guarantee)? / product.guarantee;
    if unit_cost.is_nan() || unit_cost <= 0.0 {
        return Err(Error::NoConvergence {
            context: "guarantee-equivalent gain",
            residual: f64::NAN,
        });
    }
    // Feasibility cap: (1 + g) G must stay financeable from v0, with a
    // margin so the nested solver still brackets at the endpoint.
    let g_max = product.initial_wealth * (1.0 - 1e-5) / (unit_cost * product.guarantee) - 1.0;
    if g_max <= -0.5 {
        return Err(Error::Infeasible {
            message: "guarantee increase infeasible before the root is bracketed".to_string(),
        });
    }
    let scale = reference_utility.abs();
    let residual = |g: f64| match optimal_utility(
        m,
        product,
        product.initial_wealth,
        (1.0 + g) * product.guarantee,
    ) {
        Ok(u) => (u - reference_utility) / scale,
        Err(_) => f64::NAN,
    };
    let res = bisect(
        residual,
        -0.5,
        g_max,
        WELFARE_TOL,
        WELFARE_MAX_ITER,
        "guarantee-equivalent gain",
    )?;
    Ok(WelfareRoot {
        value: res.root,
        iterations: res.iterations,
        residual: res.residual,
        reference_utility,
    })
}

/// Annualized guaranteed return implied by a terminal guarantee fraction:
/// `((1 + g) G / v0)^(1/T) - 1`.
pub fn annualized_guarantee_return(g: f64, product: &ProductSpec) -> f64 {
    ((1.0 + g) * product.guarantee / product.initial_wealth).powf(1.0 / product.horizon) - 1.0
}

/// Bundle of both welfare measures against one reference.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub against: &'static str,
    pub weul: WelfareRoot,
    pub geug: WelfareRoot,
}

pub fn compare(
    reference: &ReferenceStrategy,
    m: &MarketParams,
    product: &ProductSpec,
) -> Result<ComparisonReport> {
    Ok(ComparisonReport {
        against: reference.label(),
        weul: weul(reference, m, product)?,
        geug: geug(reference, m, product)?,
    })
}
