//! From the basic-asset optimum to tradable positions, plus the two
//! reference strategies used in the welfare comparisons.
//!
//! The insurer trades the bank account, the investable fund and the
//! reinsurance put. A short position in the reinsurable fund maps one-to-one
//! into a long put position through a diagonal transformation whose put
//! entry is negative while the option is alive, so the no-short-selling
//! constraint in tradables is the cone image of the basic-asset cone.

use crate::dual::{self, DualVector, MertonPolicy};
use crate::error::{Error, Result};
use crate::market::{self, BenchmarkSpec, MarketParams, ProductSpec};
use crate::math::{normal_cdf, Mat2, Vec2};
use crate::var_solver::{self, VarProblem, VarSolution};

/// Relative weights in the tradable assets; the bond weight is implied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TradedPolicy {
    pub fund_weight: f64,
    pub put_weight: f64,
}

impl TradedPolicy {
    pub fn bond_weight(&self) -> f64 {
        1.0 - self.fund_weight - self.put_weight
    }
}

/// Converts weights into asset units at the given wealth and prices
/// (bond, fund, put). The value identity `units . prices = wealth` holds to
/// rounding.
pub fn units_from_weights(
    policy: &TradedPolicy,
    wealth: f64,
    prices: [f64; 3],
) -> Result<[f64; 3]> {
    if prices.iter().any(|&p| p.is_nan() || p <= 0.0) {
        return Err(Error::ZeroPrice);
    }
    Ok([
        policy.bond_weight() * wealth / prices[0],
        policy.fund_weight * wealth / prices[1],
        policy.put_weight * wealth / prices[2],
    ])
}

/// Fully solved investment-reinsurance strategy.
#[derive(Debug, Clone)]
pub struct OptimalStrategy {
    pub market: MarketParams,
    pub product: ProductSpec,
    pub benchmark: BenchmarkSpec,
    pub dual: DualVector,
    pub merton: MertonPolicy,
    pub gamma: Vec2,
    pub var: VarSolution,
}

impl OptimalStrategy {
    pub fn solve(
        market: MarketParams,
        product: ProductSpec,
        benchmark: BenchmarkSpec,
    ) -> Result<Self> {
        let lambda = dual::optimal_dual_vector(&market)?;
        let gamma = dual::gamma_lambda(&market, &lambda)?;
        let merton = dual::merton_policy(&market, &lambda, product.crra)?;
        let var = var_solver::solve_var_parameters(&VarProblem {
            rate: market.rate,
            gamma_norm: gamma.norm(),
            crra: product.crra,
            horizon: product.horizon,
            v0: product.initial_wealth,
            guarantee: product.guarantee,
            epsilon: product.epsilon,
        })?;
        Ok(OptimalStrategy {
            market,
            product,
            benchmark,
            dual: lambda,
            merton,
            gamma,
            var,
        })
    }

    /// Pricing kernel of the auxiliary market along the Brownian state.
    pub fn pricing_kernel(&self, t: f64, w: Vec2) -> f64 {
        market::pricing_kernel_for(self.market.rate, self.gamma, t, w)
    }

    /// Optimal unconstrained wealth at `(t, W(t))`.
    pub fn unconstrained_wealth(&self, t: f64, w: Vec2) -> f64 {
        self.var.unconstrained_wealth(t, self.pricing_kernel(t, w))
    }

    /// Basic-asset policy `pi*(t) = alpha(t, V) * pi_hat`; stays in the cone
    /// because `alpha > 0`.
    pub fn basic_policy(&self, t: f64, unconstrained_wealth: f64) -> Result<Vec2> {
        let alpha = self.var.exposure_multiplier(t, unconstrained_wealth)?;
        Ok(self.merton.weights.scale(alpha))
    }

    /// Diagonal map from the basic-asset policy to the (fund, put) policy.
    /// The put entry is strictly negative for a live option; degenerate
    /// states (expiry, worthless or certain put) are errors.
    pub fn transform_matrix(&self, t: f64, benchmark_value: f64) -> Result<Mat2> {
        let ttm = self.product.horizon - t;
        let price = market::put_price(
            &self.market,
            &self.benchmark,
            benchmark_value,
            self.product.guarantee,
            ttm,
        );
        let delta = market::put_delta(
            &self.market,
            &self.benchmark,
            benchmark_value,
            self.product.guarantee,
            ttm,
        )?;
        let denom = self.benchmark.weight * benchmark_value * delta;
        let entry = price / denom;
        if !entry.is_finite() || entry >= 0.0 {
            return Err(Error::DegenerateOption);
        }
        Ok(Mat2::diagonal(1.0, entry))
    }

    /// Tradable policy at an observable state `(t, V(t), V_B(t))`.
    pub fn traded_policy(
        &self,
        t: f64,
        unconstrained_wealth: f64,
        benchmark_value: f64,
    ) -> Result<TradedPolicy> {
        let basic = self.basic_policy(t, unconstrained_wealth)?;
        let a = self.transform_matrix(t, benchmark_value)?;
        let mapped = a.mul_vec(basic);
        Ok(TradedPolicy {
            fund_weight: mapped.0,
            put_weight: mapped.1,
        })
    }

    /// Time-zero snapshot: weights, units and the put price.
    pub fn initial_position(&self) -> Result<InitialPosition> {
        let v0 = self.product.initial_wealth;
        let put0 = market::put_price(
            &self.market,
            &self.benchmark,
            v0,
            self.product.guarantee,
            self.product.horizon,
        );
        let policy = self.traded_policy(0.0, self.var.v_f, v0)?;
        let units = units_from_weights(&policy, v0, [1.0, 1.0, put0])?;
        Ok(InitialPosition {
            policy,
            units,
            put_price: put0,
        })
    }
}

/// Time-zero position report.
#[derive(Debug, Clone, Copy)]
pub struct InitialPosition {
    pub policy: TradedPolicy,
    /// Holdings in (bond, fund, put) with unit initial bond and fund prices.
    pub units: [f64; 3],
    pub put_price: f64,
}

/// Optimal dynamic strategy when reinsurance is unavailable: a genuine
/// one-risky-asset market (the investable fund only) with the same VaR
/// machinery.
#[derive(Debug, Clone)]
pub struct DnStrategy {
    pub gamma: f64,
    pub merton_weight: f64,
    pub var: VarSolution,
}

pub fn solve_dn(m: &MarketParams, product: &ProductSpec) -> Result<DnStrategy> {
    // A non-positive excess return pins the no-short-sold single asset at
    // zero weight; the projected market is riskless.
    let (gamma, merton_weight) = if m.mu1 > m.rate {
        (
            (m.mu1 - m.rate) / m.sigma1,
            (m.mu1 - m.rate) / ((1.0 - product.crra) * m.sigma1 * m.sigma1),
        )
    } else {
        (0.0, 0.0)
    };
    let var = var_solver::solve_var_parameters(&VarProblem {
        rate: m.rate,
        gamma_norm: gamma,
        crra: product.crra,
        horizon: product.horizon,
        v0: product.initial_wealth,
        guarantee: product.guarantee,
        epsilon: product.epsilon,
    })?;
    Ok(DnStrategy {
        gamma,
        merton_weight,
        var,
    })
}

impl DnStrategy {
    /// Risky weight at an observable state.
    pub fn weight(&self, t: f64, unconstrained_wealth: f64) -> Result<f64> {
        Ok(self.var.exposure_multiplier(t, unconstrained_wealth)? * self.merton_weight)
    }

    pub fn initial_weight(&self) -> Result<f64> {
        self.weight(0.0, self.var.v_f)
    }

    /// Unconstrained wealth driven by the first Brownian coordinate only.
    pub fn unconstrained_wealth(&self, t: f64, w1: f64) -> f64 {
        let z =
            (-(self.var.kernels.rate + 0.5 * self.gamma * self.gamma) * t - self.gamma * w1).exp();
        self.var.unconstrained_wealth(t, z)
    }

    pub fn expected_utility(&self) -> f64 {
        self.var.expected_utility()
    }
}

/// Lognormal law of a constant-mix portfolio's terminal value:
/// `(log-drift * T, log-vol * sqrt(T))` of `ln(V(T) / v0)`.
pub fn constant_mix_log_law(weights: Vec2, m: &MarketParams, horizon: f64) -> (f64, f64) {
    let excess = m.excess_returns().dot(weights);
    let sig_pi = m.vol_matrix().transpose().mul_vec(weights);
    let var = sig_pi.dot(sig_pi);
    (
        (m.rate + excess - 0.5 * var) * horizon,
        (var * horizon).sqrt(),
    )
}

/// Closed-form CRRA expectation of a constant-mix terminal wealth.
pub fn cn_expected_utility(weights: Vec2, m: &MarketParams, product: &ProductSpec) -> f64 {
    let b = product.crra;
    let (log_drift, log_vol) = constant_mix_log_law(weights, m, product.horizon);
    product.initial_wealth.powf(b) / b * (b * log_drift + 0.5 * b * b * log_vol * log_vol).exp()
}

/// `Q(V(T) < guarantee)` for a constant-mix portfolio, by the lognormal CDF.
pub fn cn_shortfall_probability(weights: Vec2, m: &MarketParams, product: &ProductSpec) -> f64 {
    let (log_drift, log_vol) = constant_mix_log_law(weights, m, product.horizon);
    let target = (product.guarantee / product.initial_wealth).ln();
    if log_vol == 0.0 {
        return if log_drift < target { 1.0 } else { 0.0 };
    }
    normal_cdf((target - log_drift) / log_vol)
}

/// Reference strategies for the suboptimality analysis.
#[derive(Debug, Clone)]
pub enum ReferenceStrategy {
    /// Optimal dynamic strategy with the reinsurance leg forced to zero.
    DynamicNoReinsurance(DnStrategy),
    /// Fixed weights in (fund, reinsurable fund); the representative life
    /// insurer holds (15%, 0%).
    ConstantMix(Vec2),
}

impl ReferenceStrategy {
    pub fn expected_utility(&self, m: &MarketParams, product: &ProductSpec) -> f64 {
        match self {
            ReferenceStrategy::DynamicNoReinsurance(dn) => dn.expected_utility(),
            ReferenceStrategy::ConstantMix(w) => cn_expected_utility(*w, m, product),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ReferenceStrategy::DynamicNoReinsurance(_) => "dn",
            ReferenceStrategy::ConstantMix(_) => "cn",
        }
    }
}

/// The representative constant-mix reference.
pub fn cn_reference() -> ReferenceStrategy {
    ReferenceStrategy::ConstantMix(Vec2(0.15, 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::var_solver::Regime;

    fn base() -> (MarketParams, ProductSpec, BenchmarkSpec) {
        (
            MarketParams::new(0.0102, 0.1752, 0.1237, 0.2366, 0.2198, 0.8012).unwrap(),
            ProductSpec::new(100.0, 10.0, 100.0, 0.005, -9.0).unwrap(),
            BenchmarkSpec::new(0.2947).unwrap(),
        )
    }

    #[test]
    fn transform_matrix_base_case() {
        let (m, p, b) = base();
        let s = OptimalStrategy::solve(m, p, b).unwrap();
        let a = s.transform_matrix(0.0, 100.0).unwrap();
        assert_eq!(a.a11, 1.0);
        assert!((a.a22 + 0.4766).abs() < 1e-3, "a22 = {}", a.a22);
        let id = a.mul_mat(a.inverse().unwrap());
        assert!((id.a11 - 1.0).abs() < 1e-14 && (id.a22 - 1.0).abs() < 1e-14);
        // Expiry degenerates.
        assert!(s.transform_matrix(10.0, 100.0).is_err());
        // Worthless-put limit degenerates rather than dividing by zero.
        assert!(s.transform_matrix(0.0, 1e150).is_err());
    }

    #[test]
    fn traded_policy_base_case_matches_reported_values() {
        let (m, p, b) = base();
        let s = OptimalStrategy::solve(m, p, b).unwrap();
        let pos = s.initial_position().unwrap();
        assert!((pos.policy.fund_weight - 0.3348).abs() < 1e-3);
        assert!((pos.policy.put_weight - 0.0257).abs() < 1e-3);
        assert!((pos.policy.bond_weight() - 0.6395).abs() < 1e-3);
        assert!((pos.put_price - 3.85).abs() < 0.02);
        assert!((pos.units[1] - 33.48).abs() < 0.05);
        assert!((pos.units[2] - 0.67).abs() < 0.01);
    }

    #[test]
    fn bond_units_are_self_consistent() {
        // With unit bond price the bond units must close the budget:
        // units[0] = v0 - units[1] * 1 - units[2] * put_price. For the base
        // case that is 100 - 33.48 - 0.67 * 3.85 = 63.95, and any report of
        // 65.85 would break the identity by two currency units.
        let (m, p, b) = base();
        let s = OptimalStrategy::solve(m, p, b).unwrap();
        let pos = s.initial_position().unwrap();
        let implied = 100.0 - pos.units[1] - pos.units[2] * pos.put_price;
        assert!((pos.units[0] - implied).abs() < 1e-10);
        assert!((pos.units[0] - 63.95).abs() < 0.10);
        assert!((pos.units[0] - 65.85).abs() > 1.0);
    }

    #[test]
    fn value_identity_units_times_prices() {
        let policy = TradedPolicy {
            fund_weight: 0.41,
            put_weight: 0.07,
        };
        let prices = [1.3, 2.7, 0.35];
        let units = units_from_weights(&policy, 250.0, prices).unwrap();
        let value: f64 = units.iter().zip(prices.iter()).map(|(u, p)| u * p).sum();
        assert!((value - 250.0).abs() < 1e-10);
        assert_eq!(
            units_from_weights(&policy, 0.0, prices).unwrap(),
            [0.0, 0.0, 0.0]
        );
        assert!(units_from_weights(&policy, 10.0, [1.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn no_reinsurance_position_maps_to_zero_put_weight() {
        let (m, p, b) = base();
        let s = OptimalStrategy::solve(m, p, b).unwrap();
        let a = s.transform_matrix(0.0, 100.0).unwrap();
        let mapped = a.mul_vec(Vec2(0.25, 0.0));
        assert_eq!(mapped.1, 0.0);
        assert_eq!(mapped.0, 0.25);
    }

    #[test]
    fn sign_correspondence_on_state_grid() {
        let (m, p, b) = base();
        let s = OptimalStrategy::solve(m, p, b).unwrap();
        // Benchmark states stay inside the range where the put delta is
        // representable; the deep out-of-the-money guard has its own test.
        for &t in &[0.0, 2.0, 5.0, 9.0] {
            for &v in &[40.0, 90.0, 150.0, 400.0] {
                for &vb in &[50.0, 100.0, 150.0] {
                    let pol = s.traded_policy(t, v, vb).unwrap();
                    let basic = s.basic_policy(t, v).unwrap();
                    assert!(pol.fund_weight >= 0.0);
                    assert_eq!(pol.put_weight >= 0.0, basic.1 <= 0.0, "t={t} v={v} vb={vb}");
                    assert!(pol.put_weight >= 0.0);
                }
            }
        }
    }

    #[test]
    fn dn_anchor_matches_reported_weight() {
        let (m, p, _) = base();
        let dn = solve_dn(&m, &p).unwrap();
        let w = dn.initial_weight().unwrap();
        assert!((w - 0.2947).abs() < 5e-4, "dn weight = {w}");
        assert_eq!(dn.var.regime, Regime::Binding);
    }

    #[test]
    fn dn_unconstrained_is_pure_merton() {
        let (m, mut p, _) = base();
        p.epsilon = 1.0;
        let dn = solve_dn(&m, &p).unwrap();
        let w = dn.initial_weight().unwrap();
        let merton = (0.1752 - 0.0102) / (10.0 * 0.2366 * 0.2366);
        assert!((w - merton).abs() < 1e-12);
        assert!((merton - 0.2948).abs() < 1e-4);
    }

    #[test]
    fn dn_zero_excess_return_means_no_risky_holdings() {
        let m = MarketParams::new(0.0102, 0.0102, 0.1237, 0.2366, 0.2198, 0.8012).unwrap();
        let p = ProductSpec::new(100.0, 10.0, 90.0, 0.005, -9.0).unwrap();
        let dn = solve_dn(&m, &p).unwrap();
        assert_eq!(dn.initial_weight().unwrap(), 0.0);
        assert_eq!(dn.var.regime, Regime::NonBinding);
    }

    #[test]
    fn cn_utility_riskless_and_shortfall() {
        let (m, p, _) = base();
        let riskless = cn_expected_utility(Vec2(0.0, 0.0), &m, &p);
        let expected = 100.0f64.powf(-9.0) / -9.0 * (-9.0f64 * 0.0102 * 10.0).exp();
        assert!(((riskless - expected) / expected).abs() < 1e-12);

        // Raw probability, about 0.11%; pinned at the closed-form value.
        let shortfall = cn_shortfall_probability(Vec2(0.15, 0.0), &m, &p);
        assert!(
            (shortfall - 0.0011139).abs() < 1e-6,
            "cn shortfall = {shortfall}"
        );
    }
}
