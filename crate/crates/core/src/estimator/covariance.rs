use nalgebra::{DMatrix, SymmetricEigen};

use crate::design::{sigma_unrestricted, DesignSet, MeVariances};
use crate::error::{Error, Result};
use crate::lagpoly::jacobian_d;

use super::FitResult;

/// Large-sample covariance of `(beta, theta2, sigma_eps^2)`:
/// `(1/T) blockdiag(sigma^2 (D'QD)^{-1}, 2 sigma^4)` with the plug-in
/// `Q = (X'X - n Sigma) / T` (with `n` usable rows) and `D` evaluated at the estimates.
///
/// Pass `MeVariances::none()` for a naive fit.
pub fn asymptotic_covariance(fit: &FitResult, ds: &DesignSet, me: MeVariances) -> Result<DMatrix<f64>> {
    let p = ds.p();
    if fit.beta_hat.len() != p + 2 {
        return Err(Error::Dimension(format!(
            "fit has {} coefficients, design expects {}",
            fit.beta_hat.len(),
            p + 2
        )));
    }
    let w = fit.weights(ds.jmax())?;
    let d = jacobian_d(&fit.beta_hat, &w, p)?;
    let t = ds.periods() as f64;
    let q = (ds.gram() - sigma_unrestricted(me, p, ds.jmax()) * ds.rows() as f64) / t;
    let info = d.tr_mul(&(q * &d));
    let info = (&info + info.transpose()) * 0.5;

    let eig = SymmetricEigen::new(info.clone()).eigenvalues;
    let top = eig.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let min_eigenvalue = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_eigenvalue > top * 1e-14) {
        return Err(Error::SingularInformation { min_eigenvalue });
    }
    let inv = info
        .cholesky()
        .ok_or(Error::SingularInformation { min_eigenvalue })?
        .inverse();

    let k = p + 3;
    let s2 = fit.sigma_eps2_hat;
    let mut cov = DMatrix::zeros(k + 1, k + 1);
    cov.view_mut((0, 0), (k, k)).copy_from(&(inv * (s2 / t)));
    cov[(k, k)] = 2.0 * s2 * s2 / t;
    Ok((&cov + cov.transpose()) * 0.5)
}

/// Square roots of the diagonal.
pub fn standard_errors(cov: &DMatrix<f64>) -> Vec<f64> {
    cov.diagonal().iter().map(|v| v.max(0.0).sqrt()).collect()
}
