//! Two-risky-asset Black-Scholes market primitives: parameter validation,
//! market price of risk, pricing kernel, the reinsurable constant-mix
//! benchmark and put-option analytics on it.
//!
//! Conventions: rates, drifts and volatilities are per-year decimals, time is
//! in years and currency units are arbitrary. The volatility matrix is stored
//! lower-triangular,
//!
//! ```text
//!     sigma = | sigma1               0                      |
//!             | sigma2 * rho         sigma2 * sqrt(1-rho^2) |
//! ```
//!
//! so the first Brownian coordinate drives the investable fund and the
//! benchmark loads on both coordinates through its correlation.

use crate::error::{Error, Result};
use crate::math::{normal_cdf, Mat2, Vec2};

/// Parameters of the basic market: bank account rate, the investable fund
/// (drift `mu1`, volatility `sigma1`) and the reinsurable fund (drift `mu2`,
/// volatility `sigma2`, correlation `rho` with the first fund).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    pub rate: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub rho: f64,
}

impl MarketParams {
    /// Validates: positive volatilities, `rho` in [-1, 1], and at least one
    /// risky asset with a non-zero excess return.
    pub fn new(rate: f64, mu1: f64, mu2: f64, sigma1: f64, sigma2: f64, rho: f64) -> Result<Self> {
        for (name, v) in [
            ("rate", rate),
            ("mu1", mu1),
            ("mu2", mu2),
            ("sigma1", sigma1),
            ("sigma2", sigma2),
            ("rho", rho),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    message: format!("not finite: {v}"),
                });
            }
        }
        if sigma1 <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "sigma1",
                message: format!("must be > 0, got {sigma1}"),
            });
        }
        if sigma2 <= 0.0 {
            return Err(Error::InvalidParameter {
                name: "sigma2",
                message: format!("must be > 0, got {sigma2}"),
            });
        }
        if !(-1.0..=1.0).contains(&rho) {
            return Err(Error::InvalidParameter {
                name: "rho",
                message: format!("must lie in [-1, 1], got {rho}"),
            });
        }
        if mu1 == rate && mu2 == rate {
            return Err(Error::InvalidParameter {
                name: "mu1",
                message: "both excess returns are zero".to_string(),
            });
        }
        Ok(MarketParams {
            rate,
            mu1,
            mu2,
            sigma1,
            sigma2,
            rho,
        })
    }

    /// Lower-triangular volatility matrix.
    pub fn vol_matrix(&self) -> Mat2 {
        Mat2 {
            a11: self.sigma1,
            a12: 0.0,
            a21: self.sigma2 * self.rho,
            a22: self.sigma2 * (1.0 - self.rho * self.rho).sqrt(),
        }
    }

    /// Closed-form inverse of the volatility matrix.
    pub fn vol_inverse(&self) -> Result<Mat2> {
        if self.rho.abs() >= 1.0 {
            return Err(Error::SingularVolatility);
        }
        let root = (1.0 - self.rho * self.rho).sqrt();
        Ok(Mat2 {
            a11: 1.0 / self.sigma1,
            a12: 0.0,
            a21: -self.rho / (self.sigma1 * root),
            a22: 1.0 / (self.sigma2 * root),
        })
    }

    /// Instantaneous covariance matrix `C = sigma * sigma'`.
    pub fn covariance(&self) -> Mat2 {
        let s = self.vol_matrix();
        s.mul_mat(s.transpose())
    }

    /// Closed-form inverse of the covariance matrix.
    pub fn covariance_inverse(&self) -> Result<Mat2> {
        if self.rho.abs() >= 1.0 {
            return Err(Error::SingularVolatility);
        }
        let d = self.sigma1 * self.sigma1 * self.sigma2 * self.sigma2 * (1.0 - self.rho * self.rho);
        let cross = self.sigma1 * self.sigma2 * self.rho;
        Ok(Mat2 {
            a11: self.sigma2 * self.sigma2 / d,
            a12: -cross / d,
            a21: -cross / d,
            a22: self.sigma1 * self.sigma1 / d,
        })
    }

    /// Excess-return vector `mu - r*1`.
    pub fn excess_returns(&self) -> Vec2 {
        Vec2(self.mu1 - self.rate, self.mu2 - self.rate)
    }

    /// Market price of risk `gamma = sigma^-1 (mu - r*1)`.
    pub fn market_price_of_risk(&self) -> Result<Vec2> {
        Ok(self.vol_inverse()?.mul_vec(self.excess_returns()))
    }

    /// State-price density `Z(t)` evaluated on the Brownian state `w = W(t)`.
    /// `Z(0) = 1` and `E[Z(t) * payoff]` prices time-`t` payoffs.
    pub fn pricing_kernel(&self, t: f64, w: Vec2) -> Result<f64> {
        let gamma = self.market_price_of_risk()?;
        Ok(pricing_kernel_for(self.rate, gamma, t, w))
    }
}

/// State-price density for an arbitrary market price of risk; shared between
/// the basic market and auxiliary markets with shifted drifts.
pub fn pricing_kernel_for(rate: f64, gamma: Vec2, t: f64, w: Vec2) -> f64 {
    (-(rate + 0.5 * gamma.dot(gamma)) * t - gamma.dot(w)).exp()
}

/// Client contract: initial endowment, horizon, terminal capital guarantee,
/// shortfall probability bound and the CRRA exponent `b` of the insurer's
/// utility `U(x) = x^b / b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProductSpec {
    pub initial_wealth: f64,
    pub horizon: f64,
    pub guarantee: f64,
    pub epsilon: f64,
    pub crra: f64,
}

impl ProductSpec {
    pub fn new(
        initial_wealth: f64,
        horizon: f64,
        guarantee: f64,
        epsilon: f64,
        crra: f64,
    ) -> Result<Self> {
        if !(initial_wealth.is_finite() && initial_wealth > 0.0) {
            return Err(Error::InvalidParameter {
                name: "v0",
                message: format!("must be > 0, got {initial_wealth}"),
            });
        }
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::InvalidParameter {
                name: "T",
                message: format!("must be > 0, got {horizon}"),
            });
        }
        if !(guarantee.is_finite() && guarantee >= 0.0) {
            return Err(Error::InvalidParameter {
                name: "G",
                message: format!("must be >= 0, got {guarantee}"),
            });
        }
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                message: format!("must lie in [0, 1], got {epsilon}"),
            });
        }
        if !(crra.is_finite() && crra < 1.0 && crra != 0.0) {
            return Err(Error::InvalidParameter {
                name: "b",
                message: format!("must satisfy b < 1, b != 0, got {crra}"),
            });
        }
        Ok(ProductSpec {
            initial_wealth,
            horizon,
            guarantee,
            epsilon,
            crra,
        })
    }
}

/// The reinsurable constant-mix portfolio: a fixed proportion `weight` of its
/// value is held in the second fund, the remainder in the bank account.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkSpec {
    pub weight: f64,
}

impl BenchmarkSpec {
    pub fn new(weight: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(Error::InvalidParameter {
                name: "pi_b",
                message: format!("must lie in [0, 1], got {weight}"),
            });
        }
        Ok(BenchmarkSpec { weight })
    }

    /// Real-world drift of the benchmark value.
    pub fn drift(&self, m: &MarketParams) -> f64 {
        m.rate + self.weight * (m.mu2 - m.rate)
    }

    /// Lognormal volatility of the benchmark value.
    pub fn volatility(&self, m: &MarketParams) -> f64 {
        self.weight * m.sigma2
    }

    /// Benchmark value at time `t` given the Brownian state `w = W(t)`,
    /// started from `v0`. Strictly positive.
    pub fn value(&self, m: &MarketParams, v0: f64, t: f64, w: Vec2) -> f64 {
        let vol = self.volatility(m);
        let drift = self.drift(m) - 0.5 * vol * vol;
        let load = vol * (m.rho * w.0 + (1.0 - m.rho * m.rho).sqrt() * w.1);
        v0 * (drift * t + load).exp()
    }
}

/// `d+` of the Black-Scholes put on the benchmark with strike `guarantee`.
///
/// Errors with [`Error::DegenerateOption`] at zero time to maturity or zero
/// benchmark volatility; price and delta branch to intrinsic values there.
pub fn d_plus(
    m: &MarketParams,
    bench: &BenchmarkSpec,
    benchmark_value: f64,
    guarantee: f64,
    ttm: f64,
) -> Result<f64> {
    let vol = bench.volatility(m);
    if ttm <= 0.0 || vol <= 0.0 {
        return Err(Error::DegenerateOption);
    }
    let root = vol * ttm.sqrt();
    Ok(((benchmark_value / guarantee).ln() + (m.rate + 0.5 * vol * vol) * ttm) / root)
}

/// Fair price of the reinsurance put on the benchmark.
///
/// `guarantee * exp(-r*ttm) * Phi(-d-) - V_B * Phi(-d+)`, with explicit
/// branches to the intrinsic value at `ttm = 0` and to the discounted
/// forward intrinsic value at zero benchmark volatility.
pub fn put_price(
    m: &MarketParams,
    bench: &BenchmarkSpec,
    benchmark_value: f64,
    guarantee: f64,
    ttm: f64,
) -> f64 {
    if guarantee <= 0.0 {
        return 0.0;
    }
    if ttm <= 0.0 {
        return (guarantee - benchmark_value).max(0.0);
    }
    let vol = bench.volatility(m);
    let discounted_strike = guarantee * (-m.rate * ttm).exp();
    if vol <= 0.0 {
        return (discounted_strike - benchmark_value).max(0.0);
    }
    let dp = ((benchmark_value / guarantee).ln() + (m.rate + 0.5 * vol * vol) * ttm)
        / (vol * ttm.sqrt());
    let dm = dp - vol * ttm.sqrt();
    discounted_strike * normal_cdf(-dm) - benchmark_value * normal_cdf(-dp)
}

/// Hedge ratio of the put with respect to the benchmark value,
/// `Phi(d+) - 1`, in (-1, 0) for a live option.
///
/// At zero benchmark volatility the put is a deterministic claim and the
/// exact hedge ratio is -1 in the money forward and 0 otherwise. Zero time
/// to maturity errors with [`Error::DegenerateOption`].
pub fn put_delta(
    m: &MarketParams,
    bench: &BenchmarkSpec,
    benchmark_value: f64,
    guarantee: f64,
    ttm: f64,
) -> Result<f64> {
    if ttm <= 0.0 {
        return Err(Error::DegenerateOption);
    }
    if guarantee <= 0.0 {
        return Ok(0.0);
    }
    let vol = bench.volatility(m);
    if vol <= 0.0 {
        let discounted_strike = guarantee * (-m.rate * ttm).exp();
        return Ok(if discounted_strike > benchmark_value {
            -1.0
        } else {
            0.0
        });
    }
    // -Phi(-d+) rather than Phi(d+) - 1: same value, but the erfc route
    // keeps full relative precision deep out of the money, where the
    // policy transform divides by this quantity.
    Ok(-normal_cdf(-d_plus(
        m,
        bench,
        benchmark_value,
        guarantee,
        ttm,
    )?))
}
