use nalgebra::DVector;
use std::f64::consts::PI;

use crate::design::{sigma_unrestricted, DesignSet, MeVariances};
use crate::error::{Error, Result};
use crate::lagpoly::{beta_weights, jacobian_d, melted_coefficients, LagWeights};

fn check_sigma2(sigma2: f64) -> Result<()> {
    if sigma2 > 0.0 && sigma2.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("sigma_eps^2 must be positive, got {sigma2}")))
    }
}

fn residual(ds: &DesignSet, beta_m: &DVector<f64>) -> DVector<f64> {
    ds.response() - ds.x_unrestricted() * beta_m
}

/// Gaussian log-likelihood of the observed data that ignores measurement error.
pub fn log_likelihood(ds: &DesignSet, beta: &[f64], theta: f64, sigma2: f64) -> Result<f64> {
    check_sigma2(sigma2)?;
    let w = beta_weights(theta, ds.jmax())?;
    let r = residual(ds, &melted_coefficients(beta, &w, ds.p())?);
    let t = ds.periods() as f64;
    Ok(-0.5 * t * (2.0 * PI).ln() - 0.5 * t * sigma2.ln() - r.dot(&r) / (2.0 * sigma2))
}

/// Log-likelihood plus the corrected-score adjustment
/// `n (sigma_u^2 + beta_M' Sigma beta_M) / (2 sigma^2)`.
pub fn corrected_log_likelihood(ds: &DesignSet, me: MeVariances, beta: &[f64], theta: f64, sigma2: f64) -> Result<f64> {
    let base = log_likelihood(ds, beta, theta, sigma2)?;
    let w = beta_weights(theta, ds.jmax())?;
    let bm = melted_coefficients(beta, &w, ds.p())?;
    let sigma = sigma_unrestricted(me, ds.p(), ds.jmax());
    let quad = bm.dot(&(sigma * &bm));
    Ok(base + ds.rows() as f64 * (me.sigma_u2 + quad) / (2.0 * sigma2))
}

/// Gradient with respect to `eta = (beta, theta2)` and `sigma_eps^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Score {
    pub eta: DVector<f64>,
    pub sigma2: f64,
}

impl Score {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.eta.iter().copied().collect();
        v.push(self.sigma2);
        v
    }

    pub fn norm(&self) -> f64 {
        (self.eta.norm_squared() + self.sigma2 * self.sigma2).sqrt()
    }
}

/// Analytic gradient of [`log_likelihood`]:
/// `sigma^-2 D'X'r` and `-T/(2 sigma^2) + r'r/(2 sigma^4)` with `r = Y - X beta_M`.
pub fn naive_score(ds: &DesignSet, beta: &[f64], weights: &LagWeights, sigma2: f64) -> Result<Score> {
    check_sigma2(sigma2)?;
    let p = ds.p();
    let bm = melted_coefficients(beta, weights, p)?;
    let d = jacobian_d(beta, weights, p)?;
    let r = residual(ds, &bm);
    let xtr = ds.x_unrestricted().tr_mul(&r);
    let t = ds.periods() as f64;
    Ok(Score {
        eta: d.tr_mul(&xtr) / sigma2,
        sigma2: -0.5 * t / sigma2 + r.dot(&r) / (2.0 * sigma2 * sigma2),
    })
}

/// Analytic gradient of [`corrected_log_likelihood`].
pub fn corrected_score(ds: &DesignSet, me: MeVariances, beta: &[f64], weights: &LagWeights, sigma2: f64) -> Result<Score> {
    let base = naive_score(ds, beta, weights, sigma2)?;
    let p = ds.p();
    let bm = melted_coefficients(beta, weights, p)?;
    let d = jacobian_d(beta, weights, p)?;
    let sigma = sigma_unrestricted(me, p, ds.jmax());
    let sb = sigma * &bm;
    let n = ds.rows() as f64;
    Ok(Score {
        eta: base.eta + d.tr_mul(&sb) * (n / sigma2),
        sigma2: base.sigma2 - n * (me.sigma_u2 + bm.dot(&sb)) / (2.0 * sigma2 * sigma2),
    })
}
