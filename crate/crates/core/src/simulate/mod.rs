//! Monte Carlo engine: common-random-number path ensembles, loss-coverage
//! and risk-return estimates, discrete policy rollouts and delta-hedge
//! replication studies.
//!
//! Everything is reproducible from `(seed, n_paths, n_steps)`: each path owns
//! a dedicated generator stream, and reductions run over fixed-size path
//! blocks combined in index order, so results are bit-identical across rerun,
//! thread count, and the parallel/sequential execution paths.

pub mod rng;

use crate::error::{Error, Result};
use crate::market::{self, BenchmarkSpec, MarketParams, ProductSpec};
use crate::math::{normal_cdf, Vec2};
use crate::strategy::{constant_mix_log_law, DnStrategy, OptimalStrategy};
use crate::var_solver::TerminalStats;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Probability measure driving the simulated asset drifts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    RealWorld,
    RiskNeutral,
}

/// Simulation settings. Identical settings produce bit-identical draws.
#[derive(Debug, Clone, Copy)]
pub struct SimConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub measure: Measure,
}

impl SimConfig {
    pub fn new(n_paths: usize, n_steps: usize, seed: u64, measure: Measure) -> Result<Self> {
        if n_paths == 0 {
            return Err(Error::InvalidParameter {
                name: "paths",
                message: "must be >= 1".into(),
            });
        }
        if n_steps == 0 {
            return Err(Error::InvalidParameter {
                name: "steps",
                message: "must be >= 1".into(),
            });
        }
        Ok(SimConfig {
            n_paths,
            n_steps,
            seed,
            measure,
        })
    }
}

/// Mean, sample variance and count of a Monte Carlo estimate.
#[derive(Debug, Clone, Copy)]
pub struct McEstimate {
    pub mean: f64,
    pub variance: f64,
    pub n: u64,
}

impl McEstimate {
    pub fn std_error(&self) -> f64 {
        (self.variance / self.n as f64).sqrt()
    }
}

/// Paths per reduction block. Fixed so the combination order (and hence the
/// floating-point result) does not depend on the thread count.
const BLOCK: usize = 8192;

fn block_count(n_paths: usize) -> usize {
    n_paths.div_ceil(BLOCK)
}

/// Runs `per_block` over every path block and combines the partials in block
/// order; parallel over blocks when enabled.
fn reduce_blocks<T, F>(n_paths: usize, per_block: F, parallel: bool) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<usize>) -> T + Sync,
{
    let ranges: Vec<std::ops::Range<usize>> = (0..block_count(n_paths))
        .map(|b| (b * BLOCK)..(((b + 1) * BLOCK).min(n_paths)))
        .collect();
    #[cfg(feature = "parallel")]
    if parallel {
        return ranges.into_par_iter().map(&per_block).collect();
    }
    let _ = parallel;
    ranges.into_iter().map(per_block).collect()
}

fn terminal_estimate<F>(n_paths: usize, seed: u64, horizon: f64, f: F, parallel: bool) -> McEstimate
where
    F: Fn(Vec2) -> f64 + Sync,
{
    let sqrt_t = horizon.sqrt();
    let partials = reduce_blocks(
        n_paths,
        |range| {
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            for path in range {
                let mut r = rng::path_rng(seed, path as u64);
                let w = Vec2(
                    sqrt_t * rng::standard_normal(&mut r),
                    sqrt_t * rng::standard_normal(&mut r),
                );
                let v = f(w);
                sum += v;
                sum_sq += v * v;
            }
            (sum, sum_sq)
        },
        parallel,
    );
    let (sum, sum_sq) = partials
        .into_iter()
        .fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    let n = n_paths as f64;
    let mean = sum / n;
    McEstimate {
        mean,
        variance: (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0),
        n: n_paths as u64,
    }
}

/// Monte Carlo estimate of `E[f(W(T))]` from one terminal Brownian draw per
/// path (two normals, matching the first step of a one-step ensemble).
pub fn monte_carlo_terminal<F>(n_paths: usize, seed: u64, horizon: f64, f: F) -> McEstimate
where
    F: Fn(Vec2) -> f64 + Sync,
{
    terminal_estimate(n_paths, seed, horizon, f, cfg!(feature = "parallel"))
}

/// Sequential fallback of [`monte_carlo_terminal`]; same draws, same result.
pub fn monte_carlo_terminal_seq<F>(n_paths: usize, seed: u64, horizon: f64, f: F) -> McEstimate
where
    F: Fn(Vec2) -> f64 + Sync,
{
    terminal_estimate(n_paths, seed, horizon, f, false)
}

/// Materialized Brownian increments, `n_paths x n_steps x 2`, i.i.d.
/// `N(0, dt)` per coordinate.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub config: SimConfig,
    pub horizon: f64,
    increments: Vec<f64>,
}

impl PathEnsemble {
    pub fn generate(config: &SimConfig, horizon: f64) -> PathEnsemble {
        Self::generate_inner(config, horizon, cfg!(feature = "parallel"))
    }

    /// Sequential fallback of [`PathEnsemble::generate`]; bit-identical.
    pub fn generate_seq(config: &SimConfig, horizon: f64) -> PathEnsemble {
        Self::generate_inner(config, horizon, false)
    }

    fn generate_inner(config: &SimConfig, horizon: f64, parallel: bool) -> PathEnsemble {
        let per_path = 2 * config.n_steps;
        let dt_sqrt = (horizon / config.n_steps as f64).sqrt();
        let mut increments = vec![0.0; config.n_paths * per_path];
        let fill = |(path, chunk): (usize, &mut [f64])| {
            let mut r = rng::path_rng(config.seed, path as u64);
            for slot in chunk.iter_mut() {
                *slot = dt_sqrt * rng::standard_normal(&mut r);
            }
        };
        #[cfg(feature = "parallel")]
        if parallel {
            increments
                .par_chunks_mut(per_path)
                .enumerate()
                .for_each(fill);
            return PathEnsemble {
                config: *config,
                horizon,
                increments,
            };
        }
        let _ = parallel;
        increments.chunks_mut(per_path).enumerate().for_each(fill);
        PathEnsemble {
            config: *config,
            horizon,
            increments,
        }
    }

    /// Builds an ensemble from explicit increments (tests and deterministic
    /// scenarios). Length must be `n_paths * n_steps * 2`.
    pub fn from_increments(config: &SimConfig, horizon: f64, increments: Vec<f64>) -> Result<Self> {
        if increments.len() != config.n_paths * config.n_steps * 2 {
            return Err(Error::InvalidParameter {
                name: "increments",
                message: format!(
                    "expected {} values, got {}",
                    config.n_paths * config.n_steps * 2,
                    increments.len()
                ),
            });
        }
        Ok(PathEnsemble {
            config: *config,
            horizon,
            increments,
        })
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.config.n_steps as f64
    }

    /// Increment pairs `(dW1, dW2)` of one path.
    pub fn path_increments(&self, path: usize) -> &[f64] {
        let per_path = 2 * self.config.n_steps;
        &self.increments[path * per_path..(path + 1) * per_path]
    }
}

/// Drifts under the configured measure.
fn drifts(m: &MarketParams, measure: Measure) -> (f64, f64) {
    match measure {
        Measure::RealWorld => (m.mu1, m.mu2),
        Measure::RiskNeutral => (m.rate, m.rate),
    }
}

/// Exact lognormal state of the traded assets along one path.
#[derive(Debug, Clone, Copy)]
pub struct PathState {
    pub t: f64,
    pub ttm: f64,
    /// Brownian level `W(t)`.
    pub w: Vec2,
    pub fund_price: f64,
    pub benchmark_value: f64,
    pub put_price: f64,
    pub wealth: f64,
}

/// A strategy expressed as (bond, fund, put) weights at observable states.
pub trait RolloutPolicy: Sync {
    fn traded_weights(&self, state: &PathState) -> [f64; 3];
}

/// The solved optimal investment-reinsurance strategy. When the put leg is
/// numerically degenerate (delta underflow deep out of the money) the
/// reinsurance position is skipped for that instant.
pub struct OptimalRollout<'a>(pub &'a OptimalStrategy);

impl RolloutPolicy for OptimalRollout<'_> {
    fn traded_weights(&self, st: &PathState) -> [f64; 3] {
        let s = self.0;
        let v_hat = s.unconstrained_wealth(st.t, st.w);
        match s.traded_policy(st.t, v_hat, st.benchmark_value) {
            Ok(tp) => [tp.bond_weight(), tp.fund_weight, tp.put_weight],
            Err(_) => {
                let basic = s.basic_policy(st.t, v_hat).unwrap_or(Vec2(0.0, 0.0));
                [1.0 - basic.0, basic.0, 0.0]
            }
        }
    }
}

/// The optimal single-asset strategy without reinsurance.
pub struct DnRollout<'a>(pub &'a DnStrategy);

impl RolloutPolicy for DnRollout<'_> {
    fn traded_weights(&self, st: &PathState) -> [f64; 3] {
        let v_hat = self.0.unconstrained_wealth(st.t, st.w.0);
        let w = self.0.weight(st.t, v_hat).unwrap_or(0.0);
        [1.0 - w, w, 0.0]
    }
}

/// Fixed (bond, fund, put) weights.
pub struct FixedMixRollout(pub [f64; 3]);

impl RolloutPolicy for FixedMixRollout {
    fn traded_weights(&self, _: &PathState) -> [f64; 3] {
        self.0
    }
}

/// Terminal wealths of a discretely rebalanced self-financing rollout.
#[derive(Debug, Clone)]
pub struct RolloutResult {
    pub terminal_wealth: Vec<f64>,
    /// Paths whose wealth hit zero (flagged and frozen at zero).
    pub bankruptcies: usize,
}

/// Rolls a policy through an ensemble: holdings are fixed between grid
/// points and marked to model prices (the put is repriced from the
/// benchmark). The grid may stop before the product horizon (the ensemble
/// horizon is the grid span); option maturities always refer to the product
/// horizon. Inside the final 1e-6 years the previous holdings are kept,
/// since the policy map degenerates with the put delta at expiry.
pub fn rollout<P: RolloutPolicy>(
    policy: &P,
    ensemble: &PathEnsemble,
    m: &MarketParams,
    product: &ProductSpec,
    bench: &BenchmarkSpec,
) -> RolloutResult {
    rollout_inner(
        policy,
        ensemble,
        m,
        product,
        bench,
        cfg!(feature = "parallel"),
    )
}

/// Sequential fallback of [`rollout`]; bit-identical.
pub fn rollout_seq<P: RolloutPolicy>(
    policy: &P,
    ensemble: &PathEnsemble,
    m: &MarketParams,
    product: &ProductSpec,
    bench: &BenchmarkSpec,
) -> RolloutResult {
    rollout_inner(policy, ensemble, m, product, bench, false)
}

const EXPIRY_FREEZE: f64 = 1e-6;

fn rollout_inner<P: RolloutPolicy>(
    policy: &P,
    ensemble: &PathEnsemble,
    m: &MarketParams,
    product: &ProductSpec,
    bench: &BenchmarkSpec,
    parallel: bool,
) -> RolloutResult {
    let n_paths = ensemble.config.n_paths;
    let blocks = reduce_blocks(
        n_paths,
        |range| {
            let mut wealth_out = Vec::with_capacity(range.len());
            let mut bankrupt = 0usize;
            for path in range.clone() {
                let (w, b) = roll_one_path(policy, ensemble, m, product, bench, path);
                wealth_out.push(w);
                bankrupt += b as usize;
            }
            (wealth_out, bankrupt)
        },
        parallel,
    );
    let mut terminal_wealth = Vec::with_capacity(n_paths);
    let mut bankruptcies = 0;
    for (block, b) in blocks {
        terminal_wealth.extend(block);
        bankruptcies += b;
    }
    RolloutResult {
        terminal_wealth,
        bankruptcies,
    }
}

fn roll_one_path<P: RolloutPolicy>(
    policy: &P,
    ensemble: &PathEnsemble,
    m: &MarketParams,
    product: &ProductSpec,
    bench: &BenchmarkSpec,
    path: usize,
) -> (f64, bool) {
    let dt = ensemble.dt();
    let horizon = product.horizon;
    debug_assert!(ensemble.horizon <= horizon + 1e-12);
    let (mu1, mu2) = drifts(m, ensemble.config.measure);
    let v0 = product.initial_wealth;
    let guarantee = product.guarantee;
    let root = (1.0 - m.rho * m.rho).sqrt();
    let bench_drift = m.rate + bench.weight * (mu2 - m.rate) - 0.5 * bench.volatility(m).powi(2);
    let bench_vol = bench.volatility(m);
    let fund_drift = mu1 - 0.5 * m.sigma1 * m.sigma1;

    let increments = ensemble.path_increments(path);
    let mut w = Vec2(0.0, 0.0);
    let mut wealth = v0;
    let mut bankrupt = false;
    let mut units = [0.0f64; 3];
    let mut have_units = false;

    for step in 0..ensemble.config.n_steps {
        let t = step as f64 * dt;
        let ttm = horizon - t;
        let bond = (m.rate * t).exp();
        let fund = (fund_drift * t + m.sigma1 * w.0).exp();
        let benchmark = v0 * (bench_drift * t + bench_vol * (m.rho * w.0 + root * w.1)).exp();
        let put = market::put_price(m, bench, benchmark, guarantee, ttm);

        if !bankrupt && (ttm >= EXPIRY_FREEZE || !have_units) {
            let state = PathState {
                t,
                ttm,
                w,
                fund_price: fund,
                benchmark_value: benchmark,
                put_price: put,
                wealth,
            };
            let weights = policy.traded_weights(&state);
            units[1] = weights[1] * wealth / fund;
            // A put priced at the underflow floor cannot carry a position:
            // its unit count would overflow. The weight involved is itself
            // vanishing there, so the leg folds into the bank account.
            if weights[2] != 0.0 && put > 1e-12 {
                units[2] = weights[2] * wealth / put;
                units[0] = weights[0] * wealth / bond;
            } else {
                units[2] = 0.0;
                units[0] = (weights[0] + weights[2]) * wealth / bond;
            }
            have_units = true;
        }

        w = Vec2(w.0 + increments[2 * step], w.1 + increments[2 * step + 1]);
        let t_next = (step + 1) as f64 * dt;
        let ttm_next = horizon - t_next;
        let bond_next = (m.rate * t_next).exp();
        let fund_next = (fund_drift * t_next + m.sigma1 * w.0).exp();
        let benchmark_next =
            v0 * (bench_drift * t_next + bench_vol * (m.rho * w.0 + root * w.1)).exp();
        let put_next = market::put_price(m, bench, benchmark_next, guarantee, ttm_next.max(0.0));
        wealth = units[0] * bond_next + units[1] * fund_next + units[2] * put_next;
        if wealth <= 0.0 && !bankrupt {
            bankrupt = true;
            wealth = 0.0;
            units = [0.0; 3];
        }
    }
    (wealth, bankrupt)
}

/// Proportion of expected loss coverage at time zero: the numerator (puts
/// held times the expected benchmark shortfall) is analytic, the denominator
/// (the insurer's expected shortfall under the optimal terminal payoff) is
/// estimated by Monte Carlo as configured.
#[derive(Debug, Clone, Copy)]
pub struct PelcEstimate {
    pub pelc: f64,
    pub rho_adjusted: f64,
    pub put_units: f64,
    pub numerator: f64,
    pub denominator: McEstimate,
}

impl PelcEstimate {
    /// Three-sigma half width of the estimate (the numerator is exact).
    pub fn ci3(&self) -> f64 {
        self.pelc * 3.0 * self.denominator.std_error() / self.denominator.mean
    }
}

/// Real-world expected terminal put payoff on the benchmark (undiscounted).
pub fn expected_benchmark_shortfall(
    m: &MarketParams,
    bench: &BenchmarkSpec,
    v0: f64,
    guarantee: f64,
    horizon: f64,
) -> f64 {
    if guarantee <= 0.0 {
        return 0.0;
    }
    let vol = bench.volatility(m);
    let drift = bench.drift(m);
    if vol == 0.0 {
        return (guarantee - v0 * (drift * horizon).exp()).max(0.0);
    }
    let s = vol * horizon.sqrt();
    let d1 = ((v0 / guarantee).ln() + (drift + 0.5 * vol * vol) * horizon) / s;
    let d2 = d1 - s;
    guarantee * normal_cdf(-d2) - v0 * (drift * horizon).exp() * normal_cdf(-d1)
}

pub fn pelc(strategy: &OptimalStrategy, config: &SimConfig) -> Result<PelcEstimate> {
    let product = &strategy.product;
    if product.guarantee <= 0.0 {
        return Err(Error::ZeroDenominator);
    }
    let position = strategy.initial_position()?;
    let numerator_put = expected_benchmark_shortfall(
        &strategy.market,
        &strategy.benchmark,
        product.initial_wealth,
        product.guarantee,
        product.horizon,
    );
    let put_units = position.units[2];
    let guarantee = product.guarantee;
    let denominator = monte_carlo_terminal(config.n_paths, config.seed, product.horizon, |w| {
        let v_hat = strategy.unconstrained_wealth(product.horizon, w);
        (guarantee - strategy.var.terminal_payoff(v_hat)).max(0.0)
    });
    if denominator.mean.is_nan() || denominator.mean <= 0.0 {
        return Err(Error::ZeroDenominator);
    }
    let pelc = put_units * numerator_put / denominator.mean;
    Ok(PelcEstimate {
        pelc,
        rho_adjusted: strategy.market.rho * pelc,
        put_units,
        numerator: put_units * numerator_put,
        denominator,
    })
}

/// Annualized risk-return summary of a terminal wealth law.
#[derive(Debug, Clone, Copy)]
pub struct RiskReturnProfile {
    /// Geometric-mean annual return, `(E[V(T)]/v0)^(1/T) - 1`.
    pub annualized_return: f64,
    /// Standard deviation of the gross terminal return scaled to one year,
    /// `std(V(T)/v0) / sqrt(T)`.
    pub annualized_std: f64,
    /// `Q(V(T) < G)`.
    pub shortfall: f64,
}

fn profile_from_stats(stats: TerminalStats, v0: f64, horizon: f64) -> RiskReturnProfile {
    RiskReturnProfile {
        annualized_return: (stats.mean / v0).powf(1.0 / horizon) - 1.0,
        annualized_std: stats.std_dev / v0 / horizon.sqrt(),
        shortfall: stats.shortfall,
    }
}

/// Closed-form profile of the optimal investment-reinsurance strategy.
pub fn profile_optimal(strategy: &OptimalStrategy) -> RiskReturnProfile {
    profile_from_stats(
        strategy.var.terminal_statistics(),
        strategy.product.initial_wealth,
        strategy.product.horizon,
    )
}

/// Closed-form profile of the no-reinsurance dynamic strategy.
pub fn profile_dn(dn: &DnStrategy, product: &ProductSpec) -> RiskReturnProfile {
    profile_from_stats(
        dn.var.terminal_statistics(),
        product.initial_wealth,
        product.horizon,
    )
}

/// Closed-form profile of a constant-mix strategy.
pub fn profile_constant_mix(
    weights: Vec2,
    m: &MarketParams,
    product: &ProductSpec,
) -> RiskReturnProfile {
    let (log_drift, log_vol) = constant_mix_log_law(weights, m, product.horizon);
    let v0 = product.initial_wealth;
    let mean = v0 * (log_drift + 0.5 * log_vol * log_vol).exp();
    let std_dev = mean * ((log_vol * log_vol).exp_m1()).sqrt();
    let shortfall = crate::strategy::cn_shortfall_probability(weights, m, product);
    profile_from_stats(
        TerminalStats {
            mean,
            std_dev,
            shortfall,
        },
        v0,
        product.horizon,
    )
}

/// A claim on the benchmark with a model value and hedge ratio, for the
/// replication studies.
pub trait ClaimModel: Sync {
    fn value(&self, ttm: f64, underlying: f64) -> f64;
    fn hedge_ratio(&self, ttm: f64, underlying: f64) -> f64;
    fn payoff(&self, underlying: f64) -> f64;
}

/// The reinsurance put on the benchmark.
pub struct BenchmarkPutClaim<'a> {
    pub market: &'a MarketParams,
    pub bench: &'a BenchmarkSpec,
    pub guarantee: f64,
}

impl ClaimModel for BenchmarkPutClaim<'_> {
    fn value(&self, ttm: f64, underlying: f64) -> f64 {
        market::put_price(self.market, self.bench, underlying, self.guarantee, ttm)
    }

    fn hedge_ratio(&self, ttm: f64, underlying: f64) -> f64 {
        market::put_delta(self.market, self.bench, underlying, self.guarantee, ttm).unwrap_or(0.0)
    }

    fn payoff(&self, underlying: f64) -> f64 {
        (self.guarantee - underlying).max(0.0)
    }
}

/// A forward on the benchmark (linear payoff, static hedge).
pub struct ForwardClaim {
    pub strike: f64,
    pub rate: f64,
}

impl ClaimModel for ForwardClaim {
    fn value(&self, ttm: f64, underlying: f64) -> f64 {
        underlying - self.strike * (-self.rate * ttm).exp()
    }

    fn hedge_ratio(&self, _ttm: f64, _underlying: f64) -> f64 {
        1.0
    }

    fn payoff(&self, underlying: f64) -> f64 {
        underlying - self.strike
    }
}

/// Terminal hedge-error statistics of a discrete delta hedge.
#[derive(Debug, Clone, Copy)]
pub struct HedgeErrorStats {
    pub mean_abs: f64,
    pub max_abs: f64,
    pub n_steps: usize,
}

/// Delta-hedges a claim on the benchmark along simulated real-world paths:
/// the hedge portfolio starts at the model value, holds the hedge ratio in
/// the benchmark and the rest in the bank account, rebalancing on the grid.
pub fn replication_check<C: ClaimModel>(
    claim: &C,
    m: &MarketParams,
    bench: &BenchmarkSpec,
    config: &SimConfig,
    v0: f64,
    horizon: f64,
) -> HedgeErrorStats {
    let dt = horizon / config.n_steps as f64;
    let growth = (m.rate * dt).exp();
    let vol = bench.volatility(m);
    let drift = bench.drift(m) - 0.5 * vol * vol;
    let root = (1.0 - m.rho * m.rho).sqrt();
    let partials = reduce_blocks(
        config.n_paths,
        |range| {
            let mut sum_abs = 0.0;
            let mut max_abs = 0.0f64;
            for path in range {
                let mut r = rng::path_rng(config.seed, path as u64);
                let mut w = Vec2(0.0, 0.0);
                let mut value = v0;
                let mut hedge = claim.hedge_ratio(horizon, value);
                let mut portfolio = claim.value(horizon, value);
                let mut cash = portfolio - hedge * value;
                for step in 0..config.n_steps {
                    let z1 = rng::standard_normal(&mut r);
                    let z2 = rng::standard_normal(&mut r);
                    w = Vec2(w.0 + dt.sqrt() * z1, w.1 + dt.sqrt() * z2);
                    let t = (step + 1) as f64 * dt;
                    value = v0 * (drift * t + vol * (m.rho * w.0 + root * w.1)).exp();
                    portfolio = hedge * value + cash * growth;
                    let ttm = horizon - t;
                    if step + 1 < config.n_steps {
                        hedge = claim.hedge_ratio(ttm, value);
                        cash = portfolio - hedge * value;
                    }
                }
                let err = (portfolio - claim.payoff(value)).abs();
                sum_abs += err;
                max_abs = max_abs.max(err);
            }
            (sum_abs, max_abs)
        },
        cfg!(feature = "parallel"),
    );
    let (sum_abs, max_abs) = partials
        .into_iter()
        .fold((0.0, 0.0f64), |acc, p| (acc.0 + p.0, acc.1.max(p.1)));
    HedgeErrorStats {
        mean_abs: sum_abs / config.n_paths as f64,
        max_abs,
        n_steps: config.n_steps,
    }
}
