//! Closed-form and numerical statistics of thresholded projections.
//!
//! Logarithms are natural throughout: `h = sqrt(2 r ln m)` is what makes
//! `exp(-h^2/2) = m^{-r}`.

mod bivariate;
mod epsilon;
pub mod quadrature;
mod tabulate;

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};

pub use bivariate::{
    mu, mu_asymptotic, mu_between, mu_sigma, JointTail, MuAsymptotic, ScoreStats,
    CLAMP_MARGIN, POISSON_REGIME_COUNT,
};
pub use epsilon::{
    epsilon_asymptotic, error_band, normal_approx_bound, retrieval_probability, solve_epsilons,
    ErrorBand, EpsilonSolution, NormalApproxBound, RetrievalProbability, BERRY_ESSEEN_C0,
};
pub use tabulate::{tabulate, write_tabulation_csv, TabulationRow};

use crate::{Error, Result};

/// `1 - Phi(x)`, the standard normal upper tail.
pub fn norm_sf(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

/// `Phi(x)`.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / SQRT_2)
}

/// Activation threshold `sqrt(2 r ln m)`.
pub fn threshold_h(m: usize, r: f64) -> Result<f64> {
    check_m_r(m, r)?;
    Ok((2.0 * r * (m as f64).ln()).sqrt())
}

fn check_m_r(m: usize, r: f64) -> Result<()> {
    if m < 2 {
        return Err(Error::InvalidParams(format!("m = {m} must be >= 2")));
    }
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidParams(format!("r = {r} must be > 0")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalTail {
    /// `1 - Phi(h)`.
    pub exact: f64,
    /// `exp(-h^2/2) / (h sqrt(2 pi))`, an upper bound on `exact`; only for `h > 0`.
    pub asymptotic: Option<f64>,
}

pub fn normal_tail(h: f64) -> NormalTail {
    let asymptotic = (h > 0.0).then(|| (-0.5 * h * h).exp() / (h * (2.0 * PI).sqrt()));
    NormalTail {
        exact: norm_sf(h),
        asymptotic,
    }
}

/// Expected number of active dimensions of a mapped vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sparsity {
    /// `m (1 - Phi(h))`.
    pub exact: f64,
    /// `m^{1-r} / sqrt(4 pi r ln m)`.
    pub asymptotic: f64,
    /// Same expression as `asymptotic`; it also bounds `exact` from above.
    pub upper: f64,
}

pub fn expected_sparsity(m: usize, r: f64) -> Result<Sparsity> {
    let h = threshold_h(m, r)?;
    let mf = m as f64;
    let asymptotic = mf.powf(1.0 - r) / (4.0 * PI * r * mf.ln()).sqrt();
    Ok(Sparsity {
        exact: mf * norm_sf(h),
        asymptotic,
        upper: asymptotic,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseRegion {
    /// `lambda < 2r - 1`: expected joint count `m mu -> 0`.
    Vanishing,
    /// `lambda = 2r - 1` (within 1e-12).
    Boundary,
    /// `lambda > 2r - 1`: the normalized score is asymptotically normal.
    Gaussian,
}

pub fn phase_region(lambda: f64, r: f64) -> PhaseRegion {
    let edge = 2.0 * r - 1.0;
    if (lambda - edge).abs() <= 1e-12 {
        PhaseRegion::Boundary
    } else if lambda < edge {
        PhaseRegion::Vanishing
    } else {
        PhaseRegion::Gaussian
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_values() {
        // sqrt(2 ln 8) and sqrt(16 ln 2), evaluated independently in 30-digit arithmetic.
        assert!((threshold_h(8, 1.0).unwrap() - 2.039_333_980_337_618).abs() < 1e-14);
        assert!((threshold_h(65536, 0.5).unwrap() - 3.330_218_444_630_791).abs() < 1e-14);
        assert!(threshold_h(65536, 1e-300).unwrap() < 1e-140);
        assert!(threshold_h(1, 0.5).is_err());
        assert!(threshold_h(16, 0.0).is_err());
        assert!(threshold_h(16, -1.0).is_err());
    }

    #[test]
    fn tail_values() {
        assert_eq!(normal_tail(0.0).exact, 0.5);
        assert!(normal_tail(0.0).asymptotic.is_none());
        // mpmath: erfc(3.3302/sqrt 2)/2
        let t = normal_tail(3.3302);
        assert!((t.exact - 4.339_181_237_592_052e-4).abs() < 1e-17);
        for h in [0.5, 1.0, 2.0, 5.0, 8.0] {
            let t = normal_tail(h);
            assert!(t.exact <= t.asymptotic.unwrap(), "h = {h}");
        }
    }

    #[test]
    fn sparsity_values() {
        let s = expected_sparsity(65536, 0.5).unwrap();
        // mpmath oracle: 65536 * (1 - Phi(sqrt(16 ln 2)))
        assert!((s.exact - 28.435_374_365_002_64).abs() < 1e-9, "{}", s.exact);
        assert!((s.upper - 30.667_424_819_361_8).abs() < 1e-9, "{}", s.upper);
        assert!(s.exact <= s.upper);
        assert_eq!(s.asymptotic, s.upper);
        let tiny_r = expected_sparsity(65536, 1e-12).unwrap();
        assert!((tiny_r.exact - 32768.0).abs() < 1.0);
        assert!(expected_sparsity(1, 0.5).is_err());
    }

    #[test]
    fn phases() {
        assert_eq!(phase_region(-0.2, 0.5), PhaseRegion::Vanishing);
        assert_eq!(phase_region(0.9, 0.5), PhaseRegion::Gaussian);
        assert_eq!(phase_region(0.0, 0.5), PhaseRegion::Boundary);
        assert_eq!(phase_region(-0.1, 0.45), PhaseRegion::Boundary);
    }
}
