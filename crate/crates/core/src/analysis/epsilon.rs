//! Error bands around a retrieval threshold.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::bivariate::{mu, mu_between};
use super::{norm_sf, phase_region, threshold_h, PhaseRegion};
use crate::error::Side;
use crate::{Error, Result};

/// Berry-Esseen constant for i.i.d. summands.
pub const BERRY_ESSEEN_C0: f64 = 0.4748;

const OUTER_MARGIN: f64 = 1e-12;

fn check_eta(eta: f64) -> Result<()> {
    if !(eta >= 0.0) || !eta.is_finite() {
        return Err(Error::InvalidParams(format!("eta = {eta} must be finite and >= 0")));
    }
    Ok(())
}

fn sigma_of(mu: f64) -> f64 {
    (mu * (1.0 - mu)).sqrt()
}

/// Closed-form asymptotic half-width
/// `eps = C(lambda, r, m, eta) m^{-(lambda - (2r-1)) / (2(1+lambda))}` with
/// `C = sqrt(2 pi) (1+lambda) (1-lambda^2)^{1/4} eta / sqrt(2 r ln m)`.
///
/// Requires `lambda` in `(max(0, 2r-1), 1)`.
pub fn epsilon_asymptotic(lambda: f64, m: usize, r: f64, eta: f64) -> Result<f64> {
    threshold_h(m, r)?;
    check_eta(eta)?;
    let lo = (2.0 * r - 1.0).max(0.0);
    if !(lambda > lo && lambda < 1.0) {
        return Err(Error::OutOfPhaseRegion { lambda, lo });
    }
    let mf = m as f64;
    let c = (2.0 * PI).sqrt() * (1.0 + lambda) * (1.0 - lambda * lambda).powf(0.25) * eta
        / (2.0 * r * mf.ln()).sqrt();
    Ok(c * mf.powf(-(lambda - (2.0 * r - 1.0)) / (2.0 * (1.0 + lambda))))
}

/// Roots of the two defining equations; `None` when a side has no solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSolution {
    pub eps_minus: Option<f64>,
    pub eps_plus: Option<f64>,
    /// `|LHS - eta|` at the returned roots.
    pub residual_minus: Option<f64>,
    pub residual_plus: Option<f64>,
}

impl EpsilonSolution {
    pub fn minus(&self) -> Result<f64> {
        self.eps_minus.ok_or(Error::NoSolution { side: Side::Minus })
    }

    pub fn plus(&self) -> Result<f64> {
        self.eps_plus.ok_or(Error::NoSolution { side: Side::Plus })
    }

    pub fn both(&self) -> Result<(f64, f64)> {
        Ok((self.minus()?, self.plus()?))
    }
}

/// Bisection for the root of an increasing `g` on `[0, hi]` with `g(0) <= 0`.
fn bisect_increasing<G: Fn(f64) -> f64>(g: G, hi: f64) -> Option<(f64, f64)> {
    let g_hi = g(hi);
    if g_hi.is_nan() || g_hi < 0.0 {
        return None;
    }
    let (mut lo, mut hi) = (0.0f64, hi);
    let (mut g_lo, mut g_hi) = (g(lo), g_hi);
    if g_lo >= 0.0 {
        return Some((lo, g_lo.abs()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g_mid = g(mid);
        if g_mid.is_nan() {
            return None;
        }
        if g_mid < 0.0 {
            lo = mid;
            g_lo = g_mid;
        } else {
            hi = mid;
            g_hi = g_mid;
        }
    }
    Some(if g_hi.abs() <= g_lo.abs() {
        (hi, g_hi.abs())
    } else {
        (lo, g_lo.abs())
    })
}

/// Solve `(mu(l) - mu(l - e-)) / sigma(l - e-) * sqrt(m) = eta` and
/// `(mu(l + e+) - mu(l)) / sigma(l + e+) * sqrt(m) = eta` for `e-` and `e+`.
///
/// Both left-hand sides increase in `e`, so plain bisection applies; `e-` is
/// searched on `[0, l + 1 - 1e-12]` and `e+` on `[0, 1 - l]`.
pub fn solve_epsilons(lambda: f64, m: usize, r: f64, eta: f64) -> Result<EpsilonSolution> {
    let h = threshold_h(m, r)?;
    check_eta(eta)?;
    if phase_region(lambda, r) != PhaseRegion::Gaussian || lambda >= 1.0 {
        return Err(Error::OutOfPhaseRegion {
            lambda,
            lo: 2.0 * r - 1.0,
        });
    }
    if eta == 0.0 {
        return Ok(EpsilonSolution {
            eps_minus: Some(0.0),
            eps_plus: Some(0.0),
            residual_minus: Some(0.0),
            residual_plus: Some(0.0),
        });
    }
    let sqrt_m = (m as f64).sqrt();
    let lhs_minus = |e: f64| -> f64 {
        let other = lambda - e;
        let diff = mu_between(other, lambda, h).unwrap_or(f64::NAN);
        let s = sigma_of(mu(other, h).map(|t| t.mu).unwrap_or(f64::NAN));
        if diff == 0.0 {
            return 0.0 - eta;
        }
        diff / s * sqrt_m - eta
    };
    let lhs_plus = |e: f64| -> f64 {
        let other = (lambda + e).min(1.0);
        let diff = mu_between(lambda, other, h).unwrap_or(f64::NAN);
        let s = sigma_of(mu(other, h).map(|t| t.mu).unwrap_or(f64::NAN));
        if diff == 0.0 {
            return 0.0 - eta;
        }
        diff / s * sqrt_m - eta
    };
    let minus = bisect_increasing(lhs_minus, lambda + 1.0 - OUTER_MARGIN);
    let plus = bisect_increasing(lhs_plus, 1.0 - lambda);
    Ok(EpsilonSolution {
        eps_minus: minus.map(|(e, _)| e),
        residual_minus: minus.map(|(_, r)| r),
        eps_plus: plus.map(|(e, _)| e),
        residual_plus: plus.map(|(_, r)| r),
    })
}

/// Normal approximation of `P(S >= mu(lambda_cut))` for a document at
/// `lambda_true`, with the Berry-Esseen distance to the exact probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalProbability {
    /// `P(N(0,1) > (mu(cut) - mu(true)) / sigma(true) * sqrt(m))`.
    pub gauss_approx: f64,
    /// `1 / sqrt(mu(true) m)`.
    pub be_bound: f64,
}

pub fn retrieval_probability(
    lambda_cut: f64,
    lambda_true: f64,
    h: f64,
    m: usize,
) -> Result<RetrievalProbability> {
    let mu_true = mu(lambda_true, h)?.mu;
    mu(lambda_cut, h)?;
    let sigma = sigma_of(mu_true);
    if sigma == 0.0 {
        return Err(Error::DegenerateSigma(lambda_true));
    }
    let diff = if lambda_cut >= lambda_true {
        mu_between(lambda_true, lambda_cut, h)?
    } else {
        -mu_between(lambda_cut, lambda_true, h)?
    };
    Ok(RetrievalProbability {
        gauss_approx: norm_sf(diff / sigma * (m as f64).sqrt()),
        be_bound: 1.0 / (mu_true * m as f64).sqrt(),
    })
}

/// Berry-Esseen distance between the normalized score CDF and `Phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalApproxBound {
    pub c0: f64,
    /// `E|z|^3` for `z = 1[w>h]1[v>h] - mu`; never exceeds `sigma^2`.
    pub rho: f64,
    pub sigma: f64,
    /// `C0 rho / (sigma^3 sqrt(m))`, the raw Berry-Esseen value.
    pub c0_bound: f64,
    /// `1 / sqrt(mu m)`, which dominates `c0_bound` whenever `mu <= 1/2`.
    pub bound: f64,
}

pub fn normal_approx_bound(mu: f64, m: usize) -> NormalApproxBound {
    let sigma = sigma_of(mu);
    let rho = mu * (1.0 - mu) * ((1.0 - mu).powi(2) + mu * mu);
    let sqrt_m = (m as f64).sqrt();
    NormalApproxBound {
        c0: BERRY_ESSEEN_C0,
        rho,
        sigma,
        c0_bound: BERRY_ESSEEN_C0 * rho / (sigma.powi(3) * sqrt_m),
        bound: 1.0 / (mu * m as f64).sqrt(),
    }
}

/// Everything known about the error band at one `(lambda, m, r, eta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorBand {
    pub lambda: f64,
    pub eta: f64,
    pub m: usize,
    pub r: f64,
    pub h: f64,
    /// Closed-form asymptotic width; `None` outside `(max(0, 2r-1), 1)`.
    pub eps_asym: Option<f64>,
    pub eps_minus: Option<f64>,
    pub eps_plus: Option<f64>,
    /// `1 / sqrt(mu(lambda - eps-) m)`.
    pub be_bound: Option<f64>,
}

pub fn error_band(lambda: f64, m: usize, r: f64, eta: f64) -> Result<ErrorBand> {
    let h = threshold_h(m, r)?;
    let sol = solve_epsilons(lambda, m, r, eta)?;
    let be_bound = match sol.eps_minus {
        Some(e) => Some(1.0 / (mu(lambda - e, h)?.mu * m as f64).sqrt()),
        None => None,
    };
    Ok(ErrorBand {
        lambda,
        eta,
        m,
        r,
        h,
        eps_asym: epsilon_asymptotic(lambda, m, r, eta).ok(),
        eps_minus: sol.eps_minus,
        eps_plus: sol.eps_plus,
        be_bound,
    })
}
