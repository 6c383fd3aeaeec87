//! Simulation of mixed-frequency data from the ADL-MIDAS model with additive
//! measurement error.
//!
//! Every random draw comes from a ChaCha stream selected by
//! `(master_seed, replication, role)`, so a replication's data does not
//! depend on which thread generates it or in what order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::design::{first_usable_period, MeVariances, MixedSeries};
use crate::error::{Error, Result};
use crate::lagpoly::{beta_weights, melted_coefficients, LagWeights};

/// Purpose of a random stream within one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamRole {
    HighFrequency = 0,
    Equation = 1,
    MeasurementError = 2,
}

const ROLES_PER_REPLICATION: u64 = 4;

/// Independent generator for `(master_seed, replication, role)`.
pub fn stream(master_seed: u64, replication: u64, role: StreamRole) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(replication * ROLES_PER_REPLICATION + role as u64);
    rng
}

/// Parameters of the data-generating process.
#[derive(Debug, Clone, PartialEq)]
pub struct DgpParams {
    pub a: f64,
    pub rho: Vec<f64>,
    pub b: f64,
    pub theta2: f64,
    pub jmax: usize,
    pub m: usize,
    pub t: usize,
    /// AR(1) coefficient of the latent high-frequency regressor.
    pub ar_coef: f64,
    pub innov_sd: f64,
    pub sigma_eps2: f64,
    pub me: MeVariances,
    /// High-frequency burn-in, in low-frequency periods.
    pub hf_burnin_periods: usize,
    /// Low-frequency periods simulated and discarded before the sample.
    pub lf_burnin: usize,
}

/// Autoregressive coefficients used by the simulation study for a given order.
pub fn default_rho(p: usize) -> Vec<f64> {
    let base = [0.3, 0.2];
    (0..p).map(|i| base.get(i).copied().unwrap_or(0.0)).collect()
}

impl DgpParams {
    /// Simulation-study design: `a = 0`, `rho = (0.3, 0.2)`, `b = 1`, `m = 3`,
    /// AR(1) regressor with coefficient 0.8 and unit innovations, `sigma_eps^2 = 1`.
    pub fn study(t: usize, jmax: usize, theta2: f64, me: MeVariances) -> Self {
        Self {
            a: 0.0,
            rho: default_rho(2),
            b: 1.0,
            theta2,
            jmax,
            m: 3,
            t,
            ar_coef: 0.8,
            innov_sd: 1.0,
            sigma_eps2: 1.0,
            me,
            hf_burnin_periods: 200,
            lf_burnin: 100,
        }
    }

    pub fn p(&self) -> usize {
        self.rho.len()
    }

    /// True `(a, rho, b)`.
    pub fn beta(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.p() + 2);
        v.push(self.a);
        v.extend_from_slice(&self.rho);
        v.push(self.b);
        v
    }

    /// True `(a, rho, b, theta2, sigma_eps^2)`.
    pub fn gamma(&self) -> Vec<f64> {
        let mut v = self.beta();
        v.push(self.theta2);
        v.push(self.sigma_eps2);
        v
    }

    pub fn weights(&self) -> Result<LagWeights> {
        beta_weights(self.theta2, self.jmax)
    }

    pub fn melted(&self) -> Result<nalgebra::DVector<f64>> {
        melted_coefficients(&self.beta(), &self.weights()?, self.p())
    }

    /// Hard errors for parameters the simulator cannot use; returns soft
    /// warnings (e.g. a possibly explosive AR polynomial) otherwise.
    pub fn validate(&self) -> Result<Vec<String>> {
        if !(self.ar_coef.abs() < 1.0) {
            return Err(Error::NonStationary(self.ar_coef));
        }
        if self.m == 0 || self.jmax == 0 || self.t == 0 {
            return Err(Error::Domain("m, jmax and T must be positive".into()));
        }
        if !(self.innov_sd > 0.0) || !(self.sigma_eps2 >= 0.0) {
            return Err(Error::Domain("innovation sd must be positive and sigma_eps2 non-negative".into()));
        }
        if !(self.theta2 > 0.0) {
            return Err(Error::Domain(format!("theta2 must be positive, got {}", self.theta2)));
        }
        let mut warnings = Vec::new();
        let rho_sum: f64 = self.rho.iter().map(|r| r.abs()).sum();
        if rho_sum >= 1.0 {
            warnings.push(format!("sum of |rho| = {rho_sum} >= 1; the low-frequency recursion may be explosive"));
        }
        Ok(warnings)
    }
}

fn normal_draw(rng: &mut impl Rng, sd: f64) -> f64 {
    sd * rng.sample::<f64, _>(StandardNormal)
}

/// Stationary AR(1) path of length `n` after discarding `burnin` values.
pub fn gen_ar1(n: usize, phi: f64, innov_sd: f64, burnin: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    if !(phi.abs() < 1.0) {
        return Err(Error::NonStationary(phi));
    }
    let mut x = 0.0;
    for _ in 0..burnin {
        x = phi * x + normal_draw(rng, innov_sd);
    }
    Ok((0..n)
        .map(|_| {
            x = phi * x + normal_draw(rng, innov_sd);
            x
        })
        .collect())
}

/// Equation shocks and the low-frequency path they generate.
#[derive(Debug, Clone)]
pub struct LowFrequencyPath {
    pub z: Vec<f64>,
    /// `eps[s]` entered period `s`; initial values that were drawn directly hold their draw.
    pub eps: Vec<f64>,
}

/// Low-frequency response driven by `x_high` under the same timing as
/// [`crate::design::align_mixed`], also returning the equation shocks.
pub fn gen_low_freq_path(x_high: &[f64], params: &DgpParams, rng: &mut impl Rng) -> Result<LowFrequencyPath> {
    let m = params.m;
    if m == 0 || x_high.len() % m != 0 {
        return Err(Error::Dimension(format!(
            "high-frequency length {} is not a multiple of m = {m}",
            x_high.len()
        )));
    }
    let periods = x_high.len() / m;
    let p = params.p();
    let start = first_usable_period(m, p, params.jmax);
    if periods <= start {
        return Err(Error::InsufficientHistory(format!(
            "{periods} periods of high-frequency history; the first complete lag window ends at period {}",
            start + 1
        )));
    }
    let w = params.weights()?;
    let sd = params.sigma_eps2.sqrt();
    let mut z = Vec::with_capacity(periods);
    let mut eps = Vec::with_capacity(periods);
    for _ in 0..start {
        let e = normal_draw(rng, sd);
        z.push(e);
        eps.push(e);
    }
    for s in start..periods {
        let ar: f64 = params.rho.iter().enumerate().map(|(j, r)| r * z[s - 1 - j]).sum();
        let hf: f64 = w
            .weights()
            .iter()
            .enumerate()
            .map(|(k, c)| c * x_high[m * s - 1 - k])
            .sum();
        let e = normal_draw(rng, sd);
        z.push(params.a + ar + params.b * hf + e);
        eps.push(e);
    }
    Ok(LowFrequencyPath { z, eps })
}

/// Low-frequency response driven by `x_high`.
pub fn gen_low_freq(x_high: &[f64], params: &DgpParams, rng: &mut impl Rng) -> Result<Vec<f64>> {
    gen_low_freq_path(x_high, params, rng).map(|p| p.z)
}

/// Add iid `N(0, sigma_u^2)` to `z` and iid `N(0, sigma_v^2)` to `x`.
pub fn contaminate(z: &[f64], x: &[f64], me: MeVariances, rng: &mut impl Rng) -> (Vec<f64>, Vec<f64>) {
    let add = |series: &[f64], var: f64, rng: &mut dyn rand::RngCore| -> Vec<f64> {
        if var == 0.0 {
            return series.to_vec();
        }
        let sd = var.sqrt();
        series
            .iter()
            .map(|v| v + sd * rng.sample::<f64, _>(StandardNormal))
            .collect()
    };
    let y = add(z, me.sigma_u2, rng);
    let x_obs = add(x, me.sigma_v2, rng);
    (y, x_obs)
}

/// One simulated sample with its latent components.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub observed: MixedSeries,
    pub latent: MixedSeries,
    /// Equation shocks aligned with the low-frequency sample.
    pub eps: Vec<f64>,
}

/// Simulate replication `replication` of `params` from `master_seed`.
pub fn simulate(params: &DgpParams, master_seed: u64, replication: u64) -> Result<Simulation> {
    params.validate()?;
    let m = params.m;
    let periods = params.lf_burnin + params.t;
    let mut hf_rng = stream(master_seed, replication, StreamRole::HighFrequency);
    let xi_full = gen_ar1(
        m * periods,
        params.ar_coef,
        params.innov_sd,
        m * params.hf_burnin_periods,
        &mut hf_rng,
    )?;
    let mut eq_rng = stream(master_seed, replication, StreamRole::Equation);
    let path = gen_low_freq_path(&xi_full, params, &mut eq_rng)?;

    let skip = params.lf_burnin;
    let z = path.z[skip..].to_vec();
    let eps = path.eps[skip..].to_vec();
    let xi = xi_full[m * skip..].to_vec();
    let mut me_rng = stream(master_seed, replication, StreamRole::MeasurementError);
    let (y, x) = contaminate(&z, &xi, params.me, &mut me_rng);
    Ok(Simulation {
        observed: MixedSeries::new(y, x, m)?,
        latent: MixedSeries::new(z, xi, m)?,
        eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::align_mixed;
    use crate::estimator::{fit_corrected, fit_naive, SearchConfig};

    fn moments(v: &[f64]) -> (f64, f64, f64, f64) {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let skew = v.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n / var.powf(1.5);
        let kurt = v.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n / (var * var);
        (mean, var, skew, kurt)
    }

    fn lag1_autocorr(v: &[f64]) -> f64 {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let num: f64 = v.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
        let den: f64 = v.iter().map(|x| (x - mean).powi(2)).sum();
        num / den
    }

    #[test]
    fn ar1_white_noise() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = gen_ar1(100_000, 0.0, 1.0, 0, &mut rng).unwrap();
        assert!(lag1_autocorr(&x).abs() < 0.01);
    }

    #[test]
    fn ar1_stationary_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = gen_ar1(100_000, 0.8, 1.0, 600, &mut rng).unwrap();
        let (_, var, _, _) = moments(&x);
        assert!((var / (1.0 / 0.36) - 1.0).abs() < 0.03, "{var}");
        assert!((lag1_autocorr(&x) - 0.8).abs() < 0.01);
    }

    #[test]
    fn ar1_rejects_unit_root() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(matches!(gen_ar1(10, 1.0, 1.0, 0, &mut rng), Err(Error::NonStationary(_))));
    }

    #[test]
    fn low_freq_constant_without_shocks() {
        let mut params = DgpParams::study(50, 3, 2.0, MeVariances::none());
        params.rho.clear();
        params.a = 5.0;
        params.b = 0.0;
        params.sigma_eps2 = 0.0;
        let x = vec![1.0; 3 * 50];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = gen_low_freq(&x, &params, &mut rng).unwrap();
        assert!(z[1..].iter().all(|&v| v == 5.0));
    }

    #[test]
    fn low_freq_passthrough_of_anchor() {
        let mut params = DgpParams::study(20, 1, 2.0, MeVariances::none());
        params.rho.clear();
        params.sigma_eps2 = 0.0;
        let x: Vec<f64> = (0..60).map(|i| i as f64).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z = gen_low_freq(&x, &params, &mut rng).unwrap();
        for s in 1..20 {
            assert_eq!(z[s], x[3 * s - 1]);
        }
    }

    #[test]
    fn low_freq_needs_history() {
        let params = DgpParams::study(2, 9, 2.0, MeVariances::none());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(matches!(gen_low_freq(&[0.0; 9], &params, &mut rng), Err(Error::InsufficientHistory(_))));
        assert!(gen_low_freq(&[0.0; 10], &params, &mut rng).is_err());
    }

    #[test]
    fn contaminate_identity_and_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
        let x: Vec<f64> = (0..300).map(|i| i as f64 * -0.2).collect();
        let (y, xo) = contaminate(&z, &x, MeVariances::none(), &mut rng);
        assert_eq!(y, z);
        assert_eq!(xo, x);

        let n = 100_000;
        let zeros = vec![0.0; n];
        let (u, v) = contaminate(&zeros, &zeros, MeVariances::new(1.5, 0.5).unwrap(), &mut rng);
        let (_, var_u, _, _) = moments(&u);
        let (_, var_v, _, _) = moments(&v);
        assert!((var_u / 1.5 - 1.0).abs() < 0.03);
        assert!((var_v / 0.5 - 1.0).abs() < 0.03);
        let corr: f64 = u.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() / (n as f64 * (var_u * var_v).sqrt());
        assert!(corr.abs() < 0.01);
    }

    #[test]
    fn shocks_are_gaussian() {
        let n = 1_000_000;
        let mut rng = stream(77, 0, StreamRole::Equation);
        let params = DgpParams::study(n, 3, 2.0, MeVariances::none());
        let x = vec![0.0; 3 * n];
        let path = gen_low_freq_path(&x, &params, &mut rng).unwrap();
        let zeros = vec![0.0; n];
        let mut me_rng = stream(77, 0, StreamRole::MeasurementError);
        let (u, v) = contaminate(&zeros, &zeros, MeVariances::new(0.5, 1.5).unwrap(), &mut me_rng);
        for draws in [&path.eps, &u, &v] {
            let (_, _, skew, kurt) = moments(draws);
            assert!(skew.abs() < 0.05, "skew {skew}");
            assert!((kurt - 3.0).abs() < 0.1, "kurtosis {kurt}");
        }
    }

    #[test]
    fn simulation_is_reproducible() {
        let params = DgpParams::study(60, 9, 2.0, MeVariances::new(0.5, 0.5).unwrap());
        let a = simulate(&params, 42, 7).unwrap();
        let b = simulate(&params, 42, 7).unwrap();
        assert_eq!(a.observed, b.observed);
        let c = simulate(&params, 42, 8).unwrap();
        assert_ne!(a.observed, c.observed);
        assert_eq!(a.observed.len(), 60);
        assert_eq!(a.observed.x_obs().len(), 180);
    }

    #[test]
    fn latent_sample_does_not_depend_on_me() {
        let clean = simulate(&DgpParams::study(40, 6, 2.0, MeVariances::none()), 3, 1).unwrap();
        let noisy = simulate(&DgpParams::study(40, 6, 2.0, MeVariances::new(1.0, 1.0).unwrap()), 3, 1).unwrap();
        assert_eq!(clean.latent, noisy.latent);
        assert_eq!(clean.observed, clean.latent);
    }

    #[test]
    fn stability_warning() {
        let mut params = DgpParams::study(40, 6, 2.0, MeVariances::none());
        assert!(params.validate().unwrap().is_empty());
        params.rho = vec![0.7, 0.4];
        assert_eq!(params.validate().unwrap().len(), 1);
        params.ar_coef = 1.2;
        assert!(params.validate().is_err());
    }

    #[test]
    fn estimator_recovers_dgp_without_me() {
        let params = DgpParams::study(5000, 9, 2.0, MeVariances::none());
        let sim = simulate(&params, 2024, 0).unwrap();
        let ds = align_mixed(&sim.observed, 2, 9).unwrap();
        let cfg = SearchConfig::default();
        let naive = fit_naive(&ds, &cfg).unwrap();
        for (b, t) in naive.beta_hat.iter().zip(params.beta()) {
            assert!((b - t).abs() < 0.05, "{b} vs {t}");
        }
        let corrected = fit_corrected(&ds, MeVariances::none(), &cfg).unwrap();
        for (b, t) in corrected.beta_hat.iter().zip(params.beta()) {
            assert!((b - t).abs() < 0.02, "{b} vs {t}");
        }
    }
}
