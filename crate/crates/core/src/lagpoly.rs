//! Beta-density MIDAS lag weights.
//!
//! The weight on high-frequency lag `j` is the Beta density evaluated on the
//! grid `x = j / jmax`, normalized over `j = 0..jmax-1`. The first shape
//! parameter is fixed at one, which leaves a single parameter controlling how
//! quickly weight decays with the lag.

use nalgebra::{DMatrix, DVector};
use statrs::function::beta::ln_beta;
use statrs::function::gamma::digamma;

use crate::error::{Error, Result};

/// Shape parameter held fixed during estimation.
pub const THETA1: f64 = 1.0;

/// Normalized lag weights `c(j; theta2)` together with `dc(j)/dtheta2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagWeights {
    theta2: f64,
    weights: Vec<f64>,
    dweights_dtheta: Vec<f64>,
}

impl LagWeights {
    pub fn theta2(&self) -> f64 {
        self.theta2
    }

    pub fn jmax(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn dweights_dtheta(&self) -> &[f64] {
        &self.dweights_dtheta
    }

    /// `sum_j c(j)^2`, the factor that maps the high-frequency error variance
    /// into the weighted regressor.
    pub fn sum_of_squares(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum()
    }

    /// Degenerate weight vector used to build test fixtures. Not normalized
    /// against any density; the derivative is zero.
    pub fn from_raw(theta2: f64, weights: Vec<f64>) -> Self {
        let n = weights.len();
        Self {
            theta2,
            weights,
            dweights_dtheta: vec![0.0; n],
        }
    }
}

fn check_shape(name: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive, got {value}")))
    }
}

fn ln_beta_density(x: f64, theta1: f64, theta2: f64) -> f64 {
    let lx = if theta1 == 1.0 { 0.0 } else { (theta1 - 1.0) * x.ln() };
    let l1mx = if theta2 == 1.0 { 0.0 } else { (theta2 - 1.0) * (-x).ln_1p() };
    lx + l1mx - ln_beta(theta1, theta2)
}

/// Beta probability density `x^(a-1) (1-x)^(b-1) / B(a, b)` on `[0, 1)`.
pub fn beta_density(x: f64, theta1: f64, theta2: f64) -> Result<f64> {
    check_shape("theta1", theta1)?;
    check_shape("theta2", theta2)?;
    if !(0.0..1.0).contains(&x) {
        return Err(Error::Domain(format!("x must lie in [0, 1), got {x}")));
    }
    if theta1 < 1.0 && x == 0.0 {
        return Err(Error::Domain(
            "density has a pole at x = 0 when theta1 < 1".into(),
        ));
    }
    Ok(ln_beta_density(x, theta1, theta2).exp())
}

/// Normalized Beta lag weights with `theta1 = 1` and their analytic derivative
/// with respect to `theta2`.
pub fn beta_weights(theta2: f64, jmax: usize) -> Result<LagWeights> {
    check_shape("theta2", theta2)?;
    if jmax == 0 {
        return Err(Error::Domain("jmax must be at least 1".into()));
    }
    let grid: Vec<f64> = (0..jmax).map(|j| j as f64 / jmax as f64).collect();
    let log_f: Vec<f64> = grid
        .iter()
        .map(|&x| ln_beta_density(x, THETA1, theta2))
        .collect();
    // Subtracting the largest log-density keeps every exponent <= 0.
    let top = log_f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let unnorm: Vec<f64> = log_f.iter().map(|l| (l - top).exp()).collect();
    let total: f64 = unnorm.iter().sum();
    let weights: Vec<f64> = unnorm.iter().map(|f| f / total).collect();

    // d log f / d theta2 = log(1 - x) - [psi(theta2) - psi(theta1 + theta2)].
    // The quotient rule gives dc_j = c_j (g_j - sum_k c_k g_k).
    let dlog_b = digamma(theta2) - digamma(THETA1 + theta2);
    let score: Vec<f64> = grid.iter().map(|&x| (-x).ln_1p() - dlog_b).collect();
    let mean_score: f64 = weights.iter().zip(&score).map(|(c, g)| c * g).sum();
    let dweights_dtheta = weights
        .iter()
        .zip(&score)
        .map(|(c, g)| c * (g - mean_score))
        .collect();

    Ok(LagWeights {
        theta2,
        weights,
        dweights_dtheta,
    })
}

fn check_beta_len(beta: &[f64], p: usize) -> Result<()> {
    if beta.len() != p + 2 {
        return Err(Error::Dimension(format!(
            "beta has {} entries, expected p + 2 = {}",
            beta.len(),
            p + 2
        )));
    }
    Ok(())
}

/// Coefficients in unrestricted coordinates:
/// `(a, rho_1..rho_p, b c(0), ..., b c(jmax-1))`.
pub fn melted_coefficients(beta: &[f64], weights: &LagWeights, p: usize) -> Result<DVector<f64>> {
    check_beta_len(beta, p)?;
    let b = beta[p + 1];
    let jmax = weights.jmax();
    Ok(DVector::from_fn(p + 1 + jmax, |i, _| {
        if i <= p {
            beta[i]
        } else {
            b * weights.weights[i - p - 1]
        }
    }))
}

/// Jacobian of the melted coefficients with respect to `(a, rho, b, theta2)`.
///
/// Shape is `(jmax + p + 1) x (p + 3)`; the last column is the `theta2` direction.
pub fn jacobian_d(beta: &[f64], weights: &LagWeights, p: usize) -> Result<DMatrix<f64>> {
    check_beta_len(beta, p)?;
    let b = beta[p + 1];
    let jmax = weights.jmax();
    let mut d = DMatrix::zeros(p + 1 + jmax, p + 3);
    for i in 0..=p {
        d[(i, i)] = 1.0;
    }
    for j in 0..jmax {
        d[(p + 1 + j, p + 1)] = weights.weights[j];
        d[(p + 1 + j, p + 2)] = b * weights.dweights_dtheta[j];
    }
    Ok(d)
}
