//! Large-sample checks: the limit of the naive score under measurement
//! error, probability limits of the moment matrices, and interval coverage of
//! the asymptotic covariance.
//!
//! Standard errors for averages over design rows use batch means, because
//! the composite error is serially correlated through the lagged response
//! and the overlapping high-frequency windows.

use nalgebra::{DMatrix, DVector};

use crate::design::{align_mixed, sigma_unrestricted, DesignSet};
use crate::dgp::{simulate, DgpParams, Simulation};
use crate::error::{Error, Result};
use crate::estimator::{asymptotic_covariance, fit_corrected, fit_naive, naive_score, EstimatorKind, SearchConfig};
use crate::lagpoly::jacobian_d;
use crate::montecarlo::{map_indexed, Execution};

/// Smallest sample accepted by the probability-limit checks.
pub const MIN_LARGE_T: usize = 10_000;

/// Smallest replication count accepted by [`coverage_check`].
pub const MIN_COVERAGE_REPS: usize = 500;

const BATCHES: usize = 100;

/// Mean of `values` and its batch-means standard error.
pub fn batch_means(values: &[f64], batches: usize) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let batches = batches.min(n).max(2);
    let size = n / batches;
    if size == 0 {
        return (mean, f64::NAN);
    }
    let means: Vec<f64> = (0..batches)
        .map(|b| values[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let mb = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|v| (v - mb).powi(2)).sum::<f64>() / (batches as f64 - 1.0);
    (mean, (var / batches as f64).sqrt())
}

/// Empirical value against its predicted limit.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentCheck {
    pub empirical: f64,
    pub predicted: f64,
    pub se: f64,
}

impl ComponentCheck {
    pub fn deviation(&self) -> f64 {
        self.empirical - self.predicted
    }

    /// Deviation in standard errors.
    pub fn z(&self) -> f64 {
        self.deviation() / self.se
    }

    pub fn relative_deviation(&self) -> f64 {
        self.deviation().abs() / self.predicted.abs()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientLimitReport {
    pub t: usize,
    /// Components for `(beta, theta2)`.
    pub eta: Vec<ComponentCheck>,
    pub sigma2: ComponentCheck,
}

impl GradientLimitReport {
    pub fn max_abs_z(&self) -> f64 {
        self.eta
            .iter()
            .chain(std::iter::once(&self.sigma2))
            .map(|c| c.z().abs())
            .fold(0.0, f64::max)
    }
}

fn check_large(t: usize) -> Result<()> {
    if t < MIN_LARGE_T {
        return Err(Error::Domain(format!("large-sample checks need T >= {MIN_LARGE_T}, got {t}")));
    }
    Ok(())
}

fn sized(params: &DgpParams, t: usize) -> DgpParams {
    DgpParams { t, ..params.clone() }
}

struct Aligned {
    observed: DesignSet,
    latent: DesignSet,
}

fn aligned(sim: &Simulation, p: usize, jmax: usize) -> Result<Aligned> {
    Ok(Aligned {
        observed: align_mixed(&sim.observed, p, jmax)?,
        latent: align_mixed(&sim.latent, p, jmax)?,
    })
}

/// Score of the measurement-error-blind likelihood at the true parameters,
/// divided by `T`, against its limit
/// `(-sigma^-2 D' Sigma beta_M, sigma^-4 (sigma_u^2 + beta_M' Sigma beta_M) / 2)`.
pub fn naive_gradient_limit(params: &DgpParams, t_large: usize, seed: u64) -> Result<GradientLimitReport> {
    check_large(t_large)?;
    let params = sized(params, t_large);
    let sim = simulate(&params, seed, 0)?;
    let p = params.p();
    let ds = align_mixed(&sim.observed, p, params.jmax)?;
    let w = params.weights()?;
    let beta = params.beta();
    let s2 = params.sigma_eps2;
    let t = ds.periods() as f64;
    let n = ds.rows() as f64;

    let score = naive_score(&ds, &beta, &w, s2)?;
    let d = jacobian_d(&beta, &w, p)?;
    let bm = params.melted()?;
    let sigma = sigma_unrestricted(params.me, p, params.jmax);
    let sb = &sigma * &bm;
    let pred_eta = -(d.tr_mul(&sb)) / s2;
    let pred_sigma2 = (params.me.sigma_u2 + bm.dot(&sb)) / (2.0 * s2 * s2);

    // Per-row contributions for the standard errors.
    let x = ds.x_unrestricted();
    let r = ds.response() - x * &bm;
    let dx = x * &d;
    let eta = (0..d.ncols())
        .map(|k| {
            let contrib: Vec<f64> = (0..ds.rows()).map(|i| dx[(i, k)] * r[i] / s2).collect();
            let (_, se) = batch_means(&contrib, BATCHES);
            ComponentCheck {
                empirical: score.eta[k] / t,
                predicted: pred_eta[k],
                se: se * n / t,
            }
        })
        .collect();
    let sq: Vec<f64> = r.iter().map(|v| v * v / (2.0 * s2 * s2)).collect();
    let (_, se) = batch_means(&sq, BATCHES);
    Ok(GradientLimitReport {
        t: t_large,
        eta,
        sigma2: ComponentCheck {
            empirical: score.sigma2 / t,
            predicted: pred_sigma2,
            se: se * n / t,
        },
    })
}

/// Empirical moment matrix against its limit.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixCheck {
    pub empirical: DMatrix<f64>,
    pub target: DMatrix<f64>,
    /// Entrywise batch-means standard errors, where computed.
    pub se: Option<DMatrix<f64>>,
}

impl MatrixCheck {
    pub fn deviation_norm(&self) -> f64 {
        (&self.empirical - &self.target).norm()
    }

    /// Frobenius norm of the deviation relative to the target's norm.
    pub fn relative_deviation(&self) -> f64 {
        self.deviation_norm() / self.target.norm()
    }

    /// Largest entrywise deviation in standard errors.
    pub fn max_abs_z(&self) -> Option<f64> {
        let se = self.se.as_ref()?;
        Some(
            (&self.empirical - &self.target)
                .iter()
                .zip(se.iter())
                .map(|(d, s)| (d / s).abs())
                .fold(0.0, f64::max),
        )
    }
}

fn row_mean_se(rows: usize, scale: f64, f: impl Fn(usize) -> f64) -> f64 {
    let contrib: Vec<f64> = (0..rows).map(f).collect();
    batch_means(&contrib, BATCHES).1 * scale
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlimReport {
    pub t: usize,
    /// `X'T/T` against `-Sigma beta_M`.
    pub cross: MatrixCheck,
    /// `X'X/T` against `Psi'Psi/T + Sigma`.
    pub gram: MatrixCheck,
    /// `T'T/T` against `sigma_eps^2 + sigma_u^2 + beta_M' Sigma beta_M`.
    pub composite: MatrixCheck,
}

fn plim_single(params: &DgpParams, seed: u64, replication: u64) -> Result<PlimReport> {
    let sim = simulate(params, seed, replication)?;
    let p = params.p();
    let a = aligned(&sim, p, params.jmax)?;
    let t = a.observed.periods() as f64;
    let bm = params.melted()?;
    let sigma = sigma_unrestricted(params.me, p, params.jmax);
    let x = a.observed.x_unrestricted();
    // Y - X beta_M equals E + U - V beta_M row by row.
    let composite = a.observed.response() - x * &bm;

    let cross = x.tr_mul(&composite) / t;
    let cross_target = -(&sigma * &bm);
    let gram = a.observed.gram() / t;
    let gram_target = a.latent.gram() / t + &sigma;
    let tt = composite.dot(&composite) / t;
    let tt_target = params.sigma_eps2 + params.me.sigma_u2 + bm.dot(&(&sigma * &bm));

    let rows = a.observed.rows();
    let scale = rows as f64 / t;
    let cross_se = DMatrix::from_fn(x.ncols(), 1, |k, _| row_mean_se(rows, scale, |i| x[(i, k)] * composite[i]));
    let tt_se = row_mean_se(rows, scale, |i| composite[i] * composite[i]);
    Ok(PlimReport {
        t: params.t,
        cross: MatrixCheck {
            empirical: DMatrix::from_column_slice(cross.len(), 1, cross.as_slice()),
            target: DMatrix::from_column_slice(cross_target.len(), 1, cross_target.as_slice()),
            se: Some(cross_se),
        },
        gram: MatrixCheck {
            empirical: gram,
            target: gram_target,
            se: None,
        },
        composite: MatrixCheck {
            empirical: DMatrix::from_element(1, 1, tt),
            target: DMatrix::from_element(1, 1, tt_target),
            se: Some(DMatrix::from_element(1, 1, tt_se)),
        },
    })
}

/// Probability-limit checks on one simulated sample of size `t_large`.
pub fn plim_checks(params: &DgpParams, t_large: usize, seed: u64) -> Result<PlimReport> {
    check_large(t_large)?;
    plim_single(&sized(params, t_large), seed, 0)
}

/// Ratio of mean deviations at `4T` and at `T`, per check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateReport {
    pub cross: f64,
    pub gram: f64,
    pub composite: f64,
}

/// Deviations from the probability limits should halve when the sample
/// quadruples. A ratio of two single realizations is too noisy to test that,
/// so deviations are averaged over `datasets` independent samples per size.
pub fn plim_rate(params: &DgpParams, t_large: usize, datasets: usize, seed: u64, exec: Execution) -> Result<RateReport> {
    check_large(t_large)?;
    if datasets == 0 {
        return Err(Error::Domain("datasets must be at least 1".into()));
    }
    let mean_devs = |t: usize, offset: u64| -> Result<[f64; 3]> {
        let ps = sized(params, t);
        let reports = map_indexed(datasets, exec, |i| plim_single(&ps, seed, offset + i as u64));
        let mut acc = [0.0; 3];
        for r in reports {
            let r = r?;
            acc[0] += r.cross.deviation_norm();
            acc[1] += r.gram.deviation_norm();
            acc[2] += r.composite.deviation_norm();
        }
        Ok(acc.map(|v| v / datasets as f64))
    };
    let small = mean_devs(t_large, 0)?;
    let large = mean_devs(4 * t_large, datasets as u64)?;
    Ok(RateReport {
        cross: large[0] / small[0],
        gram: large[1] / small[1],
        composite: large[2] / small[2],
    })
}

/// Per-coordinate coverage of nominal 95% Wald intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub estimator: EstimatorKind,
    /// `(beta, theta2, sigma_eps^2)` order.
    pub coverage: Vec<f64>,
    pub reps_used: usize,
    pub failures: usize,
}

impl CoverageReport {
    pub fn failure_rate(&self) -> f64 {
        self.failures as f64 / (self.failures + self.reps_used) as f64
    }
}

/// Normal quantile for two-sided 95% intervals.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Relative accuracy below which an interval half-width is not resolved by
/// the fit itself. Only matters when the equation noise is (nearly) zero.
pub const NUMERICAL_RESOLUTION: f64 = 1e-9;

fn covers(params: &DgpParams, estimator: EstimatorKind, seed: u64, rep: usize, cfg: &SearchConfig) -> Result<Vec<bool>> {
    let sim = simulate(params, seed, rep as u64)?;
    let ds = align_mixed(&sim.observed, params.p(), params.jmax)?;
    let (fit, me) = match estimator {
        EstimatorKind::Naive => (fit_naive(&ds, cfg)?, crate::design::MeVariances::none()),
        EstimatorKind::Corrected => (fit_corrected(&ds, params.me, cfg)?, params.me),
    };
    let cov = asymptotic_covariance(&fit, &ds, me)?;
    let truth = params.gamma();
    Ok(fit
        .gamma()
        .iter()
        .zip(&truth)
        .enumerate()
        .map(|(k, (est, tr))| {
            let half = (Z_95 * cov[(k, k)].max(0.0).sqrt()).max(NUMERICAL_RESOLUTION * (1.0 + tr.abs()));
            (est - tr).abs() <= half
        })
        .collect())
}

/// Coverage of the asymptotic intervals over `reps` simulated samples.
pub fn coverage_check(
    params: &DgpParams,
    reps: usize,
    seed: u64,
    estimator: EstimatorKind,
    exec: Execution,
) -> Result<CoverageReport> {
    if reps < MIN_COVERAGE_REPS {
        return Err(Error::Domain(format!("coverage needs at least {MIN_COVERAGE_REPS} replications, got {reps}")));
    }
    params.validate()?;
    let cfg = SearchConfig::default();
    let outcomes = map_indexed(reps, exec, |r| covers(params, estimator, seed, r, &cfg));
    let k = params.p() + 4;
    let mut hits = vec![0usize; k];
    let mut used = 0;
    for o in outcomes.iter().flatten() {
        used += 1;
        for (h, &c) in hits.iter_mut().zip(o) {
            *h += c as usize;
        }
    }
    if used == 0 {
        return Err(Error::EmptySample);
    }
    Ok(CoverageReport {
        estimator,
        coverage: hits.iter().map(|&h| h as f64 / used as f64).collect(),
        reps_used: used,
        failures: reps - used,
    })
}

/// `D' Sigma beta_M` at the true parameters, exposed for reporting.
pub fn bias_direction(params: &DgpParams) -> Result<DVector<f64>> {
    let w = params.weights()?;
    let d = jacobian_d(&params.beta(), &w, params.p())?;
    let sigma = sigma_unrestricted(params.me, params.p(), params.jmax);
    Ok(d.tr_mul(&(sigma * params.melted()?)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::MeVariances;

    #[test]
    fn batch_means_of_iid_matches_naive_se() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let v: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let (mean, se) = batch_means(&v, 100);
        assert!(mean.abs() < 4.0 * 0.00316);
        assert!((se / (1.0 / (100_000f64).sqrt()) - 1.0).abs() < 0.3, "{se}");
    }

    #[test]
    fn preconditions() {
        let params = DgpParams::study(100, 9, 2.0, MeVariances::none());
        assert!(naive_gradient_limit(&params, 1000, 0).is_err());
        assert!(plim_checks(&params, 1000, 0).is_err());
        assert!(coverage_check(&params, 10, 0, EstimatorKind::Corrected, Execution::Serial).is_err());
    }

    #[test]
    fn gradient_limit_vanishes_without_me() {
        let params = DgpParams::study(0, 9, 2.0, MeVariances::none());
        let rep = naive_gradient_limit(&params, 20_000, 4).unwrap();
        for c in rep.eta.iter().chain([&rep.sigma2]) {
            assert_eq!(c.predicted, 0.0);
            assert!(c.z().abs() < 4.0, "{c:?}");
        }
    }

    #[test]
    fn gradient_limit_scales_with_sigma_u2() {
        let base = DgpParams::study(0, 9, 2.0, MeVariances::new(0.5, 0.5).unwrap());
        let tripled = DgpParams::study(0, 9, 2.0, MeVariances::new(1.5, 0.5).unwrap());
        let a = naive_gradient_limit(&base, 50_000, 9).unwrap();
        let b = naive_gradient_limit(&tripled, 50_000, 9).unwrap();
        // Only the sigma_u^2 part of the quadratic form changes.
        let bm = base.melted().unwrap();
        let rho_part = |su2: f64| su2 * (1.0 + bm[1] * bm[1] + bm[2] * bm[2]) / 2.0;
        assert!((b.sigma2.predicted - a.sigma2.predicted - (rho_part(1.5) - rho_part(0.5))).abs() < 1e-12);
        let emp_shift = b.sigma2.empirical - a.sigma2.empirical;
        let pred_shift = b.sigma2.predicted - a.sigma2.predicted;
        assert!((emp_shift / pred_shift - 1.0).abs() < 0.1, "{emp_shift} vs {pred_shift}");
    }

    #[test]
    fn noiseless_intervals_cover() {
        let params = DgpParams {
            sigma_eps2: 0.0,
            ..DgpParams::study(400, 9, 2.0, MeVariances::none())
        };
        let rep = coverage_check(&params, 500, 3, EstimatorKind::Corrected, Execution::default()).unwrap();
        assert!(rep.coverage.iter().all(|&c| c == 1.0), "{:?}", rep.coverage);
    }

    #[test]
    fn composite_target_formula() {
        let params = DgpParams::study(0, 9, 2.0, MeVariances::new(0.5, 0.5).unwrap());
        let rep = plim_checks(&params, 10_000, 1).unwrap();
        let c2: f64 = params.weights().unwrap().weights().iter().map(|c| c * c).sum();
        let expected = 1.0 + 0.5 + 0.5 * (0.09 + 0.04) + 0.5 * c2;
        assert!((rep.composite.target[(0, 0)] - expected).abs() < 1e-12);
    }

    #[test]
    fn cross_moment_target_is_zero_without_me() {
        let params = DgpParams::study(0, 6, 3.0, MeVariances::none());
        let rep = plim_checks(&params, 10_000, 2).unwrap();
        assert!(rep.cross.target.iter().all(|&v| v == 0.0));
        assert!(rep.cross.max_abs_z().unwrap() < 3.0, "{:?}", rep.cross.max_abs_z());
        assert_eq!(rep.gram.deviation_norm(), 0.0);
    }

    #[test]
    fn bias_direction_vanishes_without_me() {
        let params = DgpParams::study(0, 9, 2.0, MeVariances::none());
        assert!(bias_direction(&params).unwrap().iter().all(|&v| v == 0.0));
    }
}
