//! The joint activation probability `mu(lambda) = P(w > h, v > h)` for a
//! standard bivariate normal pair with correlation `lambda`.
//!
//! Plackett's identity gives `d mu / d lambda = exp(-h^2/(1+lambda)) /
//! (2 pi sqrt(1 - lambda^2))`, so `mu(lambda) = (1 - Phi(h))^2 + int_0^lambda`
//! of that derivative. Substituting `t = sin(theta)` removes the endpoint
//! singularity; the integrand becomes `exp(-h^2 / (1 + sin theta)) / (2 pi)`.
//! For negative `lambda` the integral runs up from `mu(-1) = 0` instead, which
//! keeps tiny probabilities free of cancellation.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::{norm_sf, quadrature::integrate_rel, threshold_h};
use crate::{Error, Result};

/// Inputs with `|lambda| > 1 - CLAMP_MARGIN` use the closed forms at +-1.
pub const CLAMP_MARGIN: f64 = 1e-9;
/// Expected joint counts below this are flagged as the Poisson regime.
pub const POISSON_REGIME_COUNT: f64 = 10.0;

const QUAD_ABS_TOL: f64 = 1e-15;
const QUAD_REL_TOL: f64 = 1e-13;

/// `mu` with a flag recording whether the closed form at `+-1` was used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointTail {
    pub mu: f64,
    pub clamped: bool,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidLambda(lambda));
    }
    Ok(())
}

fn check_h(h: f64) -> Result<()> {
    if !(h >= 0.0) || !h.is_finite() {
        return Err(Error::InvalidParams(format!("h = {h} must be finite and >= 0")));
    }
    Ok(())
}

fn theta_integral(h: f64, from: f64, to: f64) -> f64 {
    let h2 = h * h;
    let f = |theta: f64| {
        let denom = 1.0 + theta.sin();
        if h2 == 0.0 {
            1.0
        } else if denom <= 0.0 {
            0.0
        } else {
            (-h2 / denom).exp()
        }
    };
    let (a, b) = (from.asin(), to.asin());
    integrate_rel(f, a, b, QUAD_ABS_TOL * 2.0 * PI, QUAD_REL_TOL) / (2.0 * PI)
}

pub fn mu(lambda: f64, h: f64) -> Result<JointTail> {
    check_lambda(lambda)?;
    check_h(h)?;
    if lambda >= 1.0 - CLAMP_MARGIN {
        return Ok(JointTail {
            mu: norm_sf(h),
            clamped: true,
        });
    }
    if lambda <= -1.0 + CLAMP_MARGIN {
        return Ok(JointTail {
            mu: 0.0,
            clamped: true,
        });
    }
    let q = norm_sf(h);
    let mu = if lambda >= 0.0 {
        q * q + theta_integral(h, 0.0, lambda)
    } else {
        theta_integral(h, -1.0, lambda)
    };
    let mu = mu.clamp(0.0, q);
    Ok(JointTail { mu, clamped: false })
}

/// `mu(hi) - mu(lo)` computed as one integral, without cancellation.
pub fn mu_between(lo: f64, hi: f64, h: f64) -> Result<f64> {
    check_lambda(lo)?;
    check_lambda(hi)?;
    check_h(h)?;
    let inner = |l: f64| l.clamp(-1.0 + CLAMP_MARGIN, 1.0 - CLAMP_MARGIN);
    if lo <= -1.0 + CLAMP_MARGIN || hi >= 1.0 - CLAMP_MARGIN {
        return Ok(mu(hi, h)?.mu - mu(lo, h)?.mu);
    }
    Ok(theta_integral(h, inner(lo), inner(hi)))
}

/// Statistics of one summand `1[w > h] 1[v > h]` of the score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreStats {
    pub lambda: f64,
    pub h: f64,
    pub m: usize,
    pub mu: f64,
    /// `sqrt(mu (1 - mu))`.
    pub sigma: f64,
    /// `d mu / d lambda`; `None` at `|lambda| = 1`.
    pub dmu: Option<f64>,
    /// `d^2 mu / d lambda^2`; `None` at `|lambda| = 1`.
    pub d2mu: Option<f64>,
    /// `m * mu`.
    pub expected_count: f64,
    /// Closed form at `lambda = +-1` used instead of quadrature.
    pub clamped: bool,
    /// `m * mu` is small enough that the score is better described as Poisson.
    pub poisson_regime: bool,
}

impl ScoreStats {
    pub fn dmu(&self) -> Result<f64> {
        self.dmu.ok_or(Error::DegenerateCorrelation(self.lambda))
    }

    pub fn d2mu(&self) -> Result<f64> {
        self.d2mu.ok_or(Error::DegenerateCorrelation(self.lambda))
    }
}

pub fn mu_sigma(lambda: f64, h: f64, m: usize) -> Result<ScoreStats> {
    let JointTail { mu, clamped } = mu(lambda, h)?;
    let (dmu, d2mu) = if clamped {
        (None, None)
    } else {
        let one_m = 1.0 - lambda * lambda;
        let d1 = (-h * h / (1.0 + lambda)).exp() / (2.0 * PI * one_m.sqrt());
        let d2 = (h * h / ((1.0 + lambda) * (1.0 + lambda)) + lambda / one_m) * d1;
        (Some(d1), Some(d2))
    };
    let expected_count = m as f64 * mu;
    Ok(ScoreStats {
        lambda,
        h,
        m,
        mu,
        sigma: (mu * (1.0 - mu)).sqrt(),
        dmu,
        d2mu,
        expected_count,
        clamped,
        poisson_regime: expected_count < POISSON_REGIME_COUNT,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MuAsymptotic {
    /// `C(lambda) m^{-2r/(1+lambda)} / (2 r ln m)`.
    pub mu_approx: f64,
    /// `m * mu_approx`.
    pub count_approx: f64,
    /// `C(lambda) = (1+lambda)^2 / (2 pi sqrt(1 - lambda^2))`.
    pub c_lambda: f64,
}

pub fn mu_asymptotic(lambda: f64, m: usize, r: f64) -> Result<MuAsymptotic> {
    threshold_h(m, r)?;
    check_lambda(lambda)?;
    if lambda.abs() >= 1.0 {
        return Err(Error::DegenerateCorrelation(lambda));
    }
    let mf = m as f64;
    let c_lambda = (1.0 + lambda).powi(2) / (2.0 * PI * (1.0 - lambda * lambda).sqrt());
    let mu_approx = c_lambda * mf.powf(-2.0 * r / (1.0 + lambda)) / (2.0 * r * mf.ln());
    Ok(MuAsymptotic {
        mu_approx,
        count_approx: mf * mu_approx,
        c_lambda,
    })
}
