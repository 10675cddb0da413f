//! Auxiliary-market machinery for the no-short-selling constraint.
//!
//! The allocation cone for the basic-asset policy is
//! `K = [0, inf) x (-inf, 0]`: long the investable fund, short (or flat) the
//! reinsurable fund. Shifting the drifts by a dual vector from `K` defines an
//! auxiliary market in which the constraint disappears; the optimal dual
//! vector minimizes the squared market price of risk over the cone and the
//! resulting constant-mix policy satisfies complementary slackness.

use crate::error::{Error, Result};
use crate::market::MarketParams;
use crate::math::Vec2;

/// Constant dual vector in the cone `[0, inf) x (-inf, 0]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualVector {
    lambda: Vec2,
}

impl DualVector {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        if !(lambda1.is_finite() && lambda2.is_finite() && lambda1 >= 0.0 && lambda2 <= 0.0) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                message: format!("({lambda1}, {lambda2}) is outside [0, inf) x (-inf, 0]"),
            });
        }
        Ok(DualVector {
            lambda: Vec2(lambda1, lambda2),
        })
    }

    pub fn zero() -> Self {
        DualVector {
            lambda: Vec2(0.0, 0.0),
        }
    }

    pub fn as_vec(&self) -> Vec2 {
        self.lambda
    }

    pub fn is_zero(&self) -> bool {
        self.lambda.0 == 0.0 && self.lambda.1 == 0.0
    }
}

/// Market price of risk in the auxiliary market,
/// `gamma_lambda = sigma^-1 (mu + lambda - r*1)`.
pub fn gamma_lambda(m: &MarketParams, lambda: &DualVector) -> Result<Vec2> {
    let shifted = m.excess_returns() + lambda.as_vec();
    Ok(m.vol_inverse()?.mul_vec(shifted))
}

/// Constant-mix optimal policy of the wealth-unconstrained problem in the
/// auxiliary market.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MertonPolicy {
    pub weights: Vec2,
}

/// `pi_hat = C^-1 (mu + lambda - r*1) / (1 - b)` with `C = sigma * sigma'`.
pub fn merton_policy(m: &MarketParams, lambda: &DualVector, crra: f64) -> Result<MertonPolicy> {
    let shifted = m.excess_returns() + lambda.as_vec();
    let weights = m
        .covariance_inverse()?
        .mul_vec(shifted)
        .scale(1.0 / (1.0 - crra));
    Ok(MertonPolicy { weights })
}

/// Minimizer of `|| gamma + sigma^-1 x ||^2` over the cone, by exact
/// enumeration of the four active-set cases (interior minimum, each face,
/// the vertex). The objective is strictly convex for an invertible
/// volatility matrix, so the best candidate is the unique minimizer, and
/// clamping resolves boundary ties toward exact zero components.
pub fn optimal_dual_vector(m: &MarketParams) -> Result<DualVector> {
    let gamma = m.market_price_of_risk()?;
    let sigma_inv = m.vol_inverse()?;
    let objective = |x: Vec2| {
        let g = gamma + sigma_inv.mul_vec(x);
        g.dot(g)
    };

    // Interior: sigma^-1 x = -gamma, i.e. x = -(mu - r*1).
    let interior = m.excess_returns().scale(-1.0);
    if interior.0 >= 0.0 && interior.1 <= 0.0 {
        return DualVector::new(interior.0, interior.1);
    }

    let col1 = Vec2(sigma_inv.a11, sigma_inv.a21);
    let col2 = Vec2(sigma_inv.a12, sigma_inv.a22);
    // Face x1 = 0: 1-D quadratic in x2 <= 0.
    let t2 = (-gamma.dot(col2) / col2.dot(col2)).min(0.0);
    // Face x2 = 0: 1-D quadratic in x1 >= 0.
    let t1 = (-gamma.dot(col1) / col1.dot(col1)).max(0.0);

    let candidates = [Vec2(0.0, 0.0), Vec2(0.0, t2), Vec2(t1, 0.0)];
    let mut best = candidates[0];
    let mut best_val = objective(best);
    for &c in &candidates[1..] {
        let v = objective(c);
        if v < best_val {
            best = c;
            best_val = v;
        }
    }
    DualVector::new(best.0, best.1)
}

/// Verifies the optimality condition for a candidate policy against a dual
/// vector: every sampled allocation must lie in the cone and be orthogonal
/// to the dual vector (inner product within `1e-10`).
pub fn check_condition_b<I>(samples: I, lambda: &DualVector) -> bool
where
    I: IntoIterator<Item = Vec2>,
{
    let lam = lambda.as_vec();
    samples
        .into_iter()
        .all(|pi| pi.0 >= 0.0 && pi.1 <= 0.0 && pi.dot(lam).abs() <= 1e-10)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::Mat2;

    fn table1_market() -> MarketParams {
        MarketParams::new(0.0102, 0.1752, 0.1237, 0.2366, 0.2198, 0.8012).unwrap()
    }

    fn solve2(a: Mat2, rhs: Vec2) -> Vec2 {
        a.inverse().unwrap().mul_vec(rhs)
    }

    #[test]
    fn cone_membership_enforced() {
        assert!(DualVector::new(-0.1, 0.0).is_err());
        assert!(DualVector::new(0.0, 0.1).is_err());
        assert!(DualVector::new(0.3, -0.2).is_ok());
    }

    #[test]
    fn gamma_lambda_reduces_to_market_price_of_risk() {
        let m = table1_market();
        let g0 = gamma_lambda(&m, &DualVector::zero()).unwrap();
        let g = m.market_price_of_risk().unwrap();
        assert_eq!(g0, g);
    }

    #[test]
    fn gamma_lambda_suppressed_second_asset() {
        let m = table1_market();
        let lam = DualVector::new(0.0, -(m.mu2 - m.rate)).unwrap();
        let g = gamma_lambda(&m, &lam).unwrap();
        let root = (1.0 - m.rho * m.rho).sqrt();
        let expected = Vec2(
            (m.mu1 - m.rate) / m.sigma1,
            -m.rho * (m.mu1 - m.rate) / (m.sigma1 * root),
        );
        assert!((g.0 - expected.0).abs() < 1e-12);
        assert!((g.1 - expected.1).abs() < 1e-12);
        // Same answer from a generic 2x2 solve of sigma * g = mu + lambda - r.
        let numeric = solve2(m.vol_matrix(), m.excess_returns() + lam.as_vec());
        assert!((g.0 - numeric.0).abs() < 1e-12 && (g.1 - numeric.1).abs() < 1e-12);
    }

    #[test]
    fn gamma_lambda_risk_neutralizing_dual() {
        let m = MarketParams::new(0.05, 0.03, 0.09, 0.2, 0.25, 0.3).unwrap();
        let lam = DualVector::new(m.rate - m.mu1, m.rate - m.mu2).unwrap();
        let g = gamma_lambda(&m, &lam).unwrap();
        assert!(g.norm() < 1e-14);
    }

    #[test]
    fn merton_policy_base_case() {
        let m = table1_market();
        let pi = merton_policy(&m, &DualVector::zero(), -9.0)
            .unwrap()
            .weights;
        assert!((pi.0 - 0.335).abs() < 5e-4, "pi1 = {}", pi.0);
        assert!((pi.1 + 0.054).abs() < 5e-4, "pi2 = {}", pi.1);
        // Numeric linear solve oracle.
        let numeric = solve2(m.covariance(), m.excess_returns()).scale(0.1);
        assert!((pi.0 - numeric.0).abs() < 1e-12 && (pi.1 - numeric.1).abs() < 1e-12);
    }

    #[test]
    fn merton_policy_zero_and_homogeneity() {
        let m = MarketParams::new(0.01, 0.01, 0.05, 0.2, 0.25, 0.1).unwrap();
        let lam = DualVector::new(0.0, -0.04).unwrap();
        let pi = merton_policy(&m, &lam, -1.0).unwrap().weights;
        assert!(pi.norm() < 1e-14);

        let m2 = table1_market();
        let a = merton_policy(&m2, &DualVector::zero(), -1.0)
            .unwrap()
            .weights;
        let b = merton_policy(&m2, &DualVector::zero(), -3.0)
            .unwrap()
            .weights;
        assert!((a.0 - 2.0 * b.0).abs() < 1e-12 && (a.1 - 2.0 * b.1).abs() < 1e-12);
    }

    #[test]
    fn optimal_dual_base_case_is_zero() {
        let m = table1_market();
        let lam = optimal_dual_vector(&m).unwrap();
        assert!(lam.is_zero());
    }

    #[test]
    fn optimal_dual_suppresses_dominated_asset() {
        // Equal excess returns, uncorrelated: the reinsurable fund would be
        // held long by the unconstrained policy, so the dual pushes its
        // drift down to the rate.
        let delta = 0.04;
        let m = MarketParams::new(0.01, 0.01 + delta, 0.01 + delta, 0.2, 0.25, 0.0).unwrap();
        let lam = optimal_dual_vector(&m).unwrap().as_vec();
        assert!(lam.0.abs() < 1e-14);
        assert!((lam.1 + delta).abs() < 1e-12);
    }

    #[test]
    fn optimal_dual_matches_grid_search_base_case() {
        // Two-stage grid over the cone patch [0,1] x [-1,0]: coarse pass at
        // 1e-2, refinement at 1e-4 around the coarse winner.
        let m = table1_market();
        let gamma = m.market_price_of_risk().unwrap();
        let sigma_inv = m.vol_inverse().unwrap();
        let objective = |x: Vec2| {
            let g = gamma + sigma_inv.mul_vec(x);
            g.dot(g)
        };
        let mut best = Vec2(0.0, 0.0);
        let mut best_val = f64::INFINITY;
        for i in 0..=100 {
            for j in 0..=100 {
                let x = Vec2(i as f64 * 0.01, -(j as f64) * 0.01);
                let v = objective(x);
                if v < best_val {
                    best_val = v;
                    best = x;
                }
            }
        }
        for i in -100..=100i64 {
            for j in -100..=100i64 {
                let x = Vec2(
                    (best.0 + i as f64 * 1e-4).clamp(0.0, 1.0),
                    (best.1 + j as f64 * 1e-4).clamp(-1.0, 0.0),
                );
                let v = objective(x);
                if v < best_val {
                    best_val = v;
                    best = x;
                }
            }
        }
        let lam = optimal_dual_vector(&m).unwrap().as_vec();
        assert!((lam.0 - best.0).abs() <= 1e-4 && (lam.1 - best.1).abs() <= 1e-4);
        assert!(objective(lam) <= best_val + 1e-12);
    }

    #[test]
    fn condition_b_cases() {
        let m = table1_market();
        let lam = optimal_dual_vector(&m).unwrap();
        let pi = merton_policy(&m, &lam, -9.0).unwrap().weights;
        assert!(check_condition_b([pi, pi.scale(0.5)], &lam));

        let lam2 = DualVector::new(0.0, -1.0).unwrap();
        assert!(!check_condition_b([Vec2(1.0, 1.0)], &lam2));
        assert!(check_condition_b([Vec2(1.0, 0.0)], &lam2));
    }

    /// Deterministic pseudo-random market draws for the projection
    /// properties; plain LCG to stay independent of the simulation RNG.
    fn random_markets(n: usize) -> Vec<MarketParams> {
        let mut state = 0x853c49e6748fea9bu64;
        let mut unit = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut out = Vec::with_capacity(n);
        while out.len() < n {
            let m = MarketParams::new(
                -0.02 + 0.06 * unit(),
                -0.05 + 0.3 * unit(),
                -0.05 + 0.3 * unit(),
                0.05 + 0.45 * unit(),
                0.05 + 0.45 * unit(),
                -0.99 + 1.98 * unit(),
            );
            if let Ok(m) = m {
                out.push(m);
            }
        }
        out
    }

    #[test]
    fn projection_properties_over_random_markets() {
        let markets = random_markets(1000);
        let mut state = 0xda3e39cb94b95bdbu64;
        let mut unit = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for m in &markets {
            let lam = optimal_dual_vector(m).unwrap();
            let g_star = gamma_lambda(m, &lam).unwrap().norm();
            let pi = merton_policy(m, &lam, -9.0).unwrap().weights;

            // Complementary slackness and cone membership.
            assert!(lam.as_vec().dot(pi).abs() < 1e-10);
            assert!(pi.0 >= -1e-12 && pi.1 <= 1e-12);

            // lambda* = 0 exactly when the unconstrained policy is feasible.
            let unconstrained = merton_policy(m, &DualVector::zero(), -9.0).unwrap().weights;
            let interior = unconstrained.0 >= 0.0 && unconstrained.1 <= 0.0;
            assert_eq!(lam.is_zero(), interior, "market {m:?}");

            // Projection optimality against random cone points.
            let sigma_inv = m.vol_inverse().unwrap();
            let gamma = m.market_price_of_risk().unwrap();
            for _ in 0..1000 {
                let x = Vec2(unit(), -unit());
                let g = (gamma + sigma_inv.mul_vec(x)).norm();
                assert!(g_star <= g + 1e-12);
            }
        }
    }
}
