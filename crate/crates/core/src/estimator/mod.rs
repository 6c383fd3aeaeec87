//! Profile-likelihood estimation of the ADL-MIDAS model.
//!
//! Both estimators profile out `sigma_eps^2` and `beta` in closed form and
//! search the remaining scalar criterion over `theta2` by golden section.
//! The corrected estimator subtracts `n Sigma_c` (with `n` usable rows) from the restricted
//! normal matrix, which removes the attenuation caused by additive
//! measurement error with known variances.

mod covariance;
mod likelihood;
mod search;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::design::{restricted_design, restricted_moments, sigma_c, weight_embedding, DesignSet, MeVariances};
use crate::error::{Error, Result};
use crate::lagpoly::{beta_weights, LagWeights};

pub use covariance::{asymptotic_covariance, standard_errors};
pub use likelihood::{corrected_log_likelihood, corrected_score, log_likelihood, naive_score, Score};
pub use search::{golden_section_max, golden_section_search, SearchConfig, SearchOutcome, INV_PHI};

/// Floor applied to a non-positive corrected variance estimate.
pub const VARIANCE_FLOOR: f64 = 1e-10;

/// Largest accepted condition number of a (corrected) normal matrix.
pub const MAX_CONDITION: f64 = 1e12;

/// Relative tolerance on negative eigenvalues of the corrected normal matrix.
pub const NEGATIVE_EIGEN_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorKind {
    Naive,
    Corrected,
}

impl EstimatorKind {
    pub fn tag(&self) -> &'static str {
        match self {
            EstimatorKind::Naive => "naive",
            EstimatorKind::Corrected => "corrected",
        }
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Output of one fit: `(beta, theta2, sigma_eps^2)` and bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub estimator: EstimatorKind,
    /// `(a, rho_1..rho_p, b)`
    pub beta_hat: Vec<f64>,
    pub theta_hat: f64,
    pub sigma_eps2_hat: f64,
    /// Concentrated criterion at `theta_hat`.
    pub objective: f64,
    pub clamped_variance: bool,
    /// Covariance of `(beta, theta2, sigma_eps^2)`, `(p + 4)` square, when computed.
    pub covariance: Option<DMatrix<f64>>,
}

impl FitResult {
    pub fn p(&self) -> usize {
        self.beta_hat.len() - 2
    }

    /// Parameter vector `(beta, theta2, sigma_eps^2)`.
    pub fn gamma(&self) -> Vec<f64> {
        let mut g = self.beta_hat.clone();
        g.push(self.theta_hat);
        g.push(self.sigma_eps2_hat);
        g
    }

    pub fn weights(&self, jmax: usize) -> Result<LagWeights> {
        beta_weights(self.theta_hat, jmax)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Check {
    Naive,
    Corrected,
}

/// Solve `a x = c` for a small symmetric `a`, rejecting ill-conditioned or
/// (for the corrected matrix) materially indefinite systems.
fn solve_checked(a: &DMatrix<f64>, c: &DVector<f64>, check: Check) -> Result<DVector<f64>> {
    let eig = SymmetricEigen::new(a.clone()).eigenvalues;
    let top = eig.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let bottom = eig.iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
    let min_eig = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let condition = if bottom > 0.0 { top / bottom } else { f64::INFINITY };
    let bad_condition = !condition.is_finite() || condition > MAX_CONDITION;
    match check {
        Check::Naive if bad_condition => return Err(Error::SingularDesign { condition }),
        Check::Corrected if bad_condition || min_eig < -NEGATIVE_EIGEN_TOL * top => {
            return Err(Error::NonInvertibleCorrection {
                condition,
                min_eigenvalue: min_eig,
            })
        }
        _ => {}
    }
    a.clone()
        .lu()
        .solve(c)
        .ok_or(Error::SingularDesign { condition })
}

/// Closed-form profile at a fixed `theta2`.
#[derive(Debug, Clone)]
pub struct Profile {
    pub weights: LagWeights,
    pub beta: DVector<f64>,
    pub objective: f64,
}

/// Profile out `beta` at `theta2`; `me = (0, 0)` gives the naive estimator.
pub fn profile_at(ds: &DesignSet, theta: f64, me: MeVariances) -> Result<Profile> {
    let weights = beta_weights(theta, ds.jmax())?;
    let (mut normal, cross) = restricted_moments(ds, &weights)?;
    let check = if me.is_zero() {
        Check::Naive
    } else {
        normal -= sigma_c(&weights, me, ds.p()) * ds.rows() as f64;
        Check::Corrected
    };
    let beta = solve_checked(&normal, &cross, check)?;
    let objective = cross.dot(&beta);
    Ok(Profile {
        weights,
        beta,
        objective,
    })
}

/// `Y'X(theta) [X(theta)'X(theta)]^{-1} X(theta)'Y`
pub fn naive_objective(theta: f64, ds: &DesignSet) -> Result<f64> {
    profile_at(ds, theta, MeVariances::none()).map(|p| p.objective)
}

/// `Y'X(theta) [X(theta)'X(theta) - n Sigma_c]^{-1} X(theta)'Y`
pub fn corrected_objective(theta: f64, ds: &DesignSet, me: MeVariances) -> Result<f64> {
    profile_at(ds, theta, me).map(|p| p.objective)
}

/// Corrected variance estimate at `(beta, theta)`:
/// `{RSS - n (sigma_u^2 + beta' Sigma_c beta)} / T`. Returns the raw value.
pub fn raw_variance(ds: &DesignSet, weights: &LagWeights, beta: &DVector<f64>, me: MeVariances) -> Result<f64> {
    let xr = restricted_design(ds, weights)?;
    let resid = ds.response() - xr * beta;
    let rss = resid.dot(&resid);
    let s = sigma_c(weights, me, ds.p());
    let penalty = ds.rows() as f64 * (me.sigma_u2 + beta.dot(&(s * beta)));
    Ok((rss - penalty) / ds.periods() as f64)
}

/// Derivative of the concentrated criterion with respect to `theta2`.
///
/// With `beta` the profile solution, this is
/// `2 b dw'(X'Y - X'X E beta)_hf + 2 n sigma_v^2 b^2 sum(w dw)`, where only the
/// high-frequency column of the embedding moves with `theta2`.
pub fn profile_derivative(ds: &DesignSet, theta: f64, me: MeVariances) -> Result<f64> {
    let prof = profile_at(ds, theta, me)?;
    let p = ds.p();
    let e = weight_embedding(&prof.weights, p);
    let gap = ds.cross() - ds.gram() * (e * &prof.beta);
    let dw = prof.weights.dweights_dtheta();
    let b = prof.beta[p + 1];
    let lin: f64 = dw.iter().enumerate().map(|(j, d)| d * gap[p + 1 + j]).sum();
    let wdw: f64 = prof.weights.weights().iter().zip(dw).map(|(w, d)| w * d).sum();
    Ok(2.0 * b * lin + 2.0 * ds.rows() as f64 * me.sigma_v2 * b * b * wdw)
}

/// Refine a golden-section maximizer by locating the root of the analytic
/// derivative near it. Comparing objective values alone pins a smooth
/// maximum only to about the square root of machine precision.
fn polish(ds: &DesignSet, me: MeVariances, cfg: &SearchConfig, out: &SearchOutcome) -> f64 {
    let span = (out.hi - out.lo).max(1e-6 * (1.0 + out.theta));
    let mut lo = (out.theta - span).max(cfg.theta_lo);
    let mut hi = (out.theta + span).min(cfg.theta_hi);
    let d = |t: f64| profile_derivative(ds, t, me).ok().filter(|v| v.is_finite());
    let (Some(mut dlo), Some(mut dhi)) = (d(lo), d(hi)) else {
        return out.theta;
    };
    if !(dlo > 0.0 && dhi < 0.0) {
        return out.theta;
    }
    // Illinois variant of regula falsi
    let mut side = 0i8;
    let mut root = out.theta;
    for _ in 0..100 {
        root = (lo * dhi - hi * dlo) / (dhi - dlo);
        if !(root > lo && root < hi) {
            root = 0.5 * (lo + hi);
        }
        let Some(dr) = d(root) else {
            return out.theta;
        };
        if dr == 0.0 || hi - lo <= 4.0 * f64::EPSILON * root.abs() {
            break;
        }
        if dr > 0.0 {
            lo = root;
            dlo = dr;
            if side == 1 {
                dhi *= 0.5;
            }
            side = 1;
        } else {
            hi = root;
            dhi = dr;
            if side == -1 {
                dlo *= 0.5;
            }
            side = -1;
        }
    }
    match corrected_objective(root, ds, me) {
        Ok(v) if v >= out.objective - 1e-12 * out.objective.abs() => root,
        _ => out.theta,
    }
}

fn fit_with(ds: &DesignSet, me: MeVariances, cfg: &SearchConfig, estimator: EstimatorKind) -> Result<FitResult> {
    let outcome = golden_section_search(|theta| corrected_objective(theta, ds, me), cfg)?;
    let theta_hat = polish(ds, me, cfg, &outcome);
    let Profile {
        weights,
        beta,
        objective,
    } = profile_at(ds, theta_hat, me)?;
    let raw = raw_variance(ds, &weights, &beta, me)?;
    let clamped_variance = raw <= 0.0;
    Ok(FitResult {
        estimator,
        beta_hat: beta.iter().copied().collect(),
        theta_hat,
        sigma_eps2_hat: if clamped_variance { VARIANCE_FLOOR } else { raw },
        objective,
        clamped_variance,
        covariance: None,
    })
}

/// Profile-likelihood estimator that ignores measurement error.
pub fn fit_naive(ds: &DesignSet, cfg: &SearchConfig) -> Result<FitResult> {
    fit_with(ds, MeVariances::none(), cfg, EstimatorKind::Naive)
}

/// Corrected-score profile estimator for known measurement-error variances.
pub fn fit_corrected(ds: &DesignSet, me: MeVariances, cfg: &SearchConfig) -> Result<FitResult> {
    fit_with(ds, me, cfg, EstimatorKind::Corrected)
}
