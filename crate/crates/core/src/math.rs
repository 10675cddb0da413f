//! Scalar and 2-D numerical primitives: normal distribution functions,
//! bracketed root finding and small fixed-size linear algebra.

use crate::error::{Error, Result};

/// Standard normal cumulative distribution function.
///
/// Computed through the complementary error function, which keeps the
/// absolute error well below 1e-14 everywhere on the real line. NaN maps
/// to NaN.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Inverse of [`normal_cdf`] on (0, 1), with `0 -> -inf` and `1 -> +inf`.
///
/// Rational initial guess refined by one Halley step against the erfc-based
/// CDF; the result is accurate to a few ulps.
pub fn inverse_normal_cdf(p: f64) -> f64 {
    if p.is_nan() {
        return f64::NAN;
    }
    if p <= 0.0 {
        return if p == 0.0 {
            f64::NEG_INFINITY
        } else {
            f64::NAN
        };
    }
    if p >= 1.0 {
        return if p == 1.0 { f64::INFINITY } else { f64::NAN };
    }
    let x = acklam_guess(p);
    // Halley refinement: one step takes the initial ~1e-9 guess to ~1e-16.
    let e = normal_cdf(x) - p;
    let u = e / normal_pdf(x);
    x - u / (1.0 + 0.5 * x * u)
}

/// Acklam's rational approximation to the probit function (|error| < 1.2e-9).
fn acklam_guess(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.38357751867269e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -acklam_guess(1.0 - p)
    }
}

/// Outcome of a bracketed root search.
#[derive(Debug, Clone, Copy)]
pub struct RootResult {
    pub root: f64,
    pub residual: f64,
    pub iterations: u32,
}

/// Bisection on `[lo, hi]` until `|f| < residual_tol` or the bracket width
/// falls below `width_tol` (relative to the bracket scale).
///
/// Requires a sign change on the initial bracket; `context` names the
/// equation in the error.
pub fn bisect<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    residual_tol: f64,
    max_iter: u32,
    context: &'static str,
) -> Result<RootResult> {
    let (mut lo, mut hi) = (lo, hi);
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(RootResult {
            root: lo,
            residual: 0.0,
            iterations: 0,
        });
    }
    if f_hi == 0.0 {
        return Ok(RootResult {
            root: hi,
            residual: 0.0,
            iterations: 0,
        });
    }
    if f_lo.signum() == f_hi.signum() || !f_lo.is_finite() || !f_hi.is_finite() {
        return Err(Error::NoConvergence {
            context,
            residual: f_lo.abs().min(f_hi.abs()),
        });
    }
    let width_tol = f64::EPSILON * (lo.abs() + hi.abs()).max(1.0);
    let mut mid = 0.5 * (lo + hi);
    let mut f_mid = f(mid);
    for it in 1..=max_iter {
        if f_mid.abs() < residual_tol || (hi - lo).abs() < width_tol {
            return Ok(RootResult {
                root: mid,
                residual: f_mid.abs(),
                iterations: it,
            });
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
        mid = 0.5 * (lo + hi);
        f_mid = f(mid);
    }
    // Bracket exhausted at max_iter; the midpoint is still the best estimate.
    if f_mid.abs() < residual_tol {
        return Ok(RootResult {
            root: mid,
            residual: f_mid.abs(),
            iterations: max_iter,
        });
    }
    Err(Error::NoConvergence {
        context,
        residual: f_mid.abs(),
    })
}

/// Column vector in R^2.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2(pub f64, pub f64);

impl Vec2 {
    pub fn dot(self, other: Vec2) -> f64 {
        self.0 * other.0 + self.1 * other.1
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn scale(self, a: f64) -> Vec2 {
        Vec2(a * self.0, a * self.1)
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;

    fn add(self, other: Vec2) -> Vec2 {
        Vec2(self.0 + other.0, self.1 + other.1)
    }
}

/// 2x2 matrix in row-major order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2 {
    pub a11: f64,
    pub a12: f64,
    pub a21: f64,
    pub a22: f64,
}

impl Mat2 {
    pub fn identity() -> Mat2 {
        Mat2 {
            a11: 1.0,
            a12: 0.0,
            a21: 0.0,
            a22: 1.0,
        }
    }

    pub fn diagonal(d1: f64, d2: f64) -> Mat2 {
        Mat2 {
            a11: d1,
            a12: 0.0,
            a21: 0.0,
            a22: d2,
        }
    }

    pub fn det(self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn mul_vec(self, v: Vec2) -> Vec2 {
        Vec2(
            self.a11 * v.0 + self.a12 * v.1,
            self.a21 * v.0 + self.a22 * v.1,
        )
    }

    pub fn mul_mat(self, m: Mat2) -> Mat2 {
        Mat2 {
            a11: self.a11 * m.a11 + self.a12 * m.a21,
            a12: self.a11 * m.a12 + self.a12 * m.a22,
            a21: self.a21 * m.a11 + self.a22 * m.a21,
            a22: self.a21 * m.a12 + self.a22 * m.a22,
        }
    }

    pub fn transpose(self) -> Mat2 {
        Mat2 {
            a11: self.a11,
            a12: self.a21,
            a21: self.a12,
            a22: self.a22,
        }
    }

    /// Closed-form inverse; errors on a vanishing determinant.
    pub fn inverse(self) -> Result<Mat2> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return Err(Error::SingularVolatility);
        }
        Ok(Mat2 {
            a11: self.a22 / det,
            a12: -self.a12 / det,
            a21: -self.a21 / det,
            a22: self.a11 / det,
        })
    }
}
