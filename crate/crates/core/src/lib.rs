//! Optimal dynamic investment-reinsurance strategies for equity-linked
//! insurance products with capital guarantees.
//!
//! An insurer invests a client's endowment in a bank account, a risky fund
//! and a reinsurance contract (a put option on a constant-mix benchmark
//! portfolio), maximizing CRRA utility of terminal wealth subject to a
//! Value-at-Risk constraint on the guarantee and a no-short-selling
//! constraint. The solution machinery:
//!
//! * [`market`]: Black-Scholes market primitives and put analytics on the
//!   constant-mix benchmark;
//! * [`dual`]: cone projection of the market price of risk, the optimal
//!   dual vector and the associated constant-mix (Merton) policy;
//! * [`var_solver`]: the VaR-constrained payoff, its nonlinear system for the
//!   fictitious budget and shortfall threshold, claim valuation, exposure
//!   multiplier and closed-form expected utility;
//! * [`strategy`]: mapping into tradable (bond, fund, put) weights and
//!   units, plus the dynamic-no-reinsurance and constant-mix references;
//! * [`analysis`]: reinsurance optimality test, wealth-equivalent utility
//!   loss and guarantee-equivalent utility gain;
//! * [`simulate`]: reproducible Monte Carlo engine (loss coverage,
//!   risk-return profiles, hedge replication and policy rollouts).
//!
//! The Monte Carlo layer is data-parallel with rayon when the default
//! `parallel` feature is enabled and falls back to sequential execution
//! otherwise; both paths produce bit-identical results.

pub mod analysis;
pub mod dual;
pub mod error;
pub mod market;
pub mod math;
pub mod simulate;
pub mod strategy;
pub mod var_solver;

pub use error::{Error, Result};
pub use market::{BenchmarkSpec, MarketParams, ProductSpec};
