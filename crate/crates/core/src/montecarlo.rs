//! Replication engine and median-based quality metrics.
//!
//! Each replication draws its data from streams keyed by
//! `(master_seed, replication index)`, so running the replications serially
//! or on a thread pool yields identical results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::design::{align_mixed, MeVariances};
use crate::dgp::{default_rho, simulate, DgpParams};
use crate::error::{Error, Result};
use crate::estimator::{fit_corrected, fit_naive, EstimatorKind, FitResult, SearchConfig};

/// Share of failed replications at which a scenario row is reported as failed.
pub const MAX_FAILURE_RATE: f64 = 0.5;

/// Seed of the bootstrap resampling stream used for Monte Carlo standard errors.
pub const BOOTSTRAP_SEED: u64 = 0x5eed_b007;

/// One cell of the simulation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub t: usize,
    pub jmax: usize,
    pub theta2: f64,
    pub sigma_u2: f64,
    pub sigma_v2: f64,
    pub p: usize,
    pub m: usize,
    pub reps: usize,
    pub master_seed: u64,
    pub sigma_eps2: f64,
    pub search: SearchConfig,
}

impl Scenario {
    /// Scenario with `p = 2`, `m = 3`, 1000 replications, seed 0 and unit equation variance.
    pub fn new(t: usize, jmax: usize, theta2: f64, sigma_u2: f64, sigma_v2: f64) -> Self {
        Self {
            t,
            jmax,
            theta2,
            sigma_u2,
            sigma_v2,
            p: 2,
            m: 3,
            reps: 1000,
            master_seed: 0,
            sigma_eps2: 1.0,
            search: SearchConfig::default(),
        }
    }

    pub fn with_reps(mut self, reps: usize) -> Self {
        self.reps = reps;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.master_seed = seed;
        self
    }

    pub fn me(&self) -> Result<MeVariances> {
        MeVariances::new(self.sigma_u2, self.sigma_v2)
    }

    pub fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::Domain("reps must be at least 1".into()));
        }
        self.me()?;
        self.search.validate()?;
        self.dgp_params()?.validate()?;
        Ok(())
    }

    pub fn dgp_params(&self) -> Result<DgpParams> {
        let mut params = DgpParams::study(self.t, self.jmax, self.theta2, self.me()?);
        params.rho = default_rho(self.p);
        params.m = self.m;
        params.sigma_eps2 = self.sigma_eps2;
        Ok(params)
    }
}

/// Both fits of one replication; a failed fit keeps its error.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutcome {
    pub naive: Result<FitResult>,
    pub corrected: Result<FitResult>,
}

impl ReplicationOutcome {
    pub fn get(&self, kind: EstimatorKind) -> &Result<FitResult> {
        match kind {
            EstimatorKind::Naive => &self.naive,
            EstimatorKind::Corrected => &self.corrected,
        }
    }
}

/// Simulate replication `rep_index` of `sc` and fit both estimators.
pub fn run_replication(sc: &Scenario, rep_index: usize) -> ReplicationOutcome {
    let attempt = || -> Result<ReplicationOutcome> {
        let params = sc.dgp_params()?;
        let sim = simulate(&params, sc.master_seed, rep_index as u64)?;
        let ds = align_mixed(&sim.observed, sc.p, sc.jmax)?;
        Ok(ReplicationOutcome {
            naive: fit_naive(&ds, &sc.search),
            corrected: fit_corrected(&ds, params.me, &sc.search),
        })
    };
    attempt().unwrap_or_else(|e| ReplicationOutcome {
        naive: Err(e.clone()),
        corrected: Err(e),
    })
}

/// Median with the midpoint convention for even lengths. Reorders `v`.
pub fn median(v: &mut [f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = v.len();
    let (_, &mut upper, _) = v.select_nth_unstable_by(n / 2, f64::total_cmp);
    if n % 2 == 1 {
        return Ok(upper);
    }
    let lower = v[..n / 2].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(0.5 * (lower + upper))
}

fn check_vectors(estimates: &[Vec<f64>], truth: &[f64]) -> Result<()> {
    if estimates.is_empty() {
        return Err(Error::EmptySample);
    }
    if let Some(bad) = estimates.iter().find(|e| e.len() != truth.len()) {
        return Err(Error::Dimension(format!(
            "estimate of length {} against truth of length {}",
            bad.len(),
            truth.len()
        )));
    }
    Ok(())
}

/// Norm of the coordinatewise median bias.
pub fn nmedb(estimates: &[Vec<f64>], truth: &[f64]) -> Result<f64> {
    check_vectors(estimates, truth)?;
    let mut col = Vec::with_capacity(estimates.len());
    let mut ss = 0.0;
    for (k, &t) in truth.iter().enumerate() {
        col.clear();
        col.extend(estimates.iter().map(|e| e[k]));
        ss += (median(&mut col)? - t).powi(2);
    }
    Ok(ss.sqrt())
}

/// Trace of the entrywise median of `(b_i - b)(b_i - b)'`, which only needs
/// the diagonal entries.
pub fn trmed_sem(estimates: &[Vec<f64>], truth: &[f64]) -> Result<f64> {
    check_vectors(estimates, truth)?;
    let mut col = Vec::with_capacity(estimates.len());
    let mut trace = 0.0;
    for (k, &t) in truth.iter().enumerate() {
        col.clear();
        col.extend(estimates.iter().map(|e| (e[k] - t).powi(2)));
        trace += median(&mut col)?;
    }
    Ok(trace)
}

/// Absolute median bias of a scalar estimator.
pub fn medb(estimates: &[f64], truth: f64) -> Result<f64> {
    let mut v = estimates.to_vec();
    Ok((median(&mut v)? - truth).abs())
}

/// Which returned fits enter the medians.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InclusionRule {
    /// Every fit that returned values, including those with a clamped variance.
    #[default]
    IncludeClamped,
    ExcludeClamped,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub nmedb: f64,
    pub trmed_sem: f64,
    pub medb_theta: f64,
    pub medb_sigma2: f64,
}

/// Aggregated metrics for one scenario and estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub scenario_id: usize,
    pub scenario: Scenario,
    pub estimator: EstimatorKind,
    /// `None` when the failure rate reached [`MAX_FAILURE_RATE`] or no fit survived.
    pub metrics: Option<Metrics>,
    pub clamp_rate: f64,
    pub failure_rate: f64,
}

impl MetricsRow {
    pub fn failed(&self) -> bool {
        self.metrics.is_none()
    }
}

fn metrics_of(fits: &[&FitResult], sc: &Scenario) -> Result<Metrics> {
    let truth = sc.dgp_params()?.beta();
    let betas: Vec<Vec<f64>> = fits.iter().map(|f| f.beta_hat.clone()).collect();
    let thetas: Vec<f64> = fits.iter().map(|f| f.theta_hat).collect();
    let sigmas: Vec<f64> = fits.iter().map(|f| f.sigma_eps2_hat).collect();
    Ok(Metrics {
        nmedb: nmedb(&betas, &truth)?,
        trmed_sem: trmed_sem(&betas, &truth)?,
        medb_theta: medb(&thetas, sc.theta2)?,
        medb_sigma2: medb(&sigmas, sc.sigma_eps2)?,
    })
}

/// All replications of one scenario.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub scenario: Scenario,
    pub outcomes: Vec<ReplicationOutcome>,
}

/// How replications are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Serial,
    /// Runs on the current rayon pool; identical to `Serial` without the `parallel` feature.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Serial
        }
    }
}

/// `f(0..n)` in index order under the requested schedule.
pub fn map_indexed<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

impl ScenarioRun {
    pub fn execute(sc: &Scenario, exec: Execution) -> Result<Self> {
        sc.validate()?;
        let outcomes = map_indexed(sc.reps, exec, |r| run_replication(sc, r));
        Ok(Self {
            scenario: sc.clone(),
            outcomes,
        })
    }

    /// Successful fits of `kind` in replication order.
    pub fn fits(&self, kind: EstimatorKind) -> Vec<&FitResult> {
        self.outcomes.iter().filter_map(|o| o.get(kind).as_ref().ok()).collect()
    }

    fn summarize(&self, kind: EstimatorKind, picks: &[usize], rule: InclusionRule) -> (Option<Metrics>, f64, f64) {
        let n = picks.len() as f64;
        let fits: Vec<&FitResult> = picks
            .iter()
            .filter_map(|&i| self.outcomes[i].get(kind).as_ref().ok())
            .collect();
        let failure_rate = (picks.len() - fits.len()) as f64 / n;
        let clamped = fits.iter().filter(|f| f.clamped_variance).count();
        let clamp_rate = clamped as f64 / n;
        let used: Vec<&FitResult> = match rule {
            InclusionRule::IncludeClamped => fits,
            InclusionRule::ExcludeClamped => fits.into_iter().filter(|f| !f.clamped_variance).collect(),
        };
        let metrics = if failure_rate >= MAX_FAILURE_RATE {
            None
        } else {
            metrics_of(&used, &self.scenario).ok()
        };
        (metrics, clamp_rate, failure_rate)
    }

    pub fn metrics_row(&self, scenario_id: usize, kind: EstimatorKind, rule: InclusionRule) -> MetricsRow {
        let all: Vec<usize> = (0..self.outcomes.len()).collect();
        let (metrics, clamp_rate, failure_rate) = self.summarize(kind, &all, rule);
        MetricsRow {
            scenario_id,
            scenario: self.scenario.clone(),
            estimator: kind,
            metrics,
            clamp_rate,
            failure_rate,
        }
    }

    /// Bootstrap standard errors of the four metrics, resampling replications
    /// with replacement. Resamples whose metrics are undefined are skipped.
    pub fn bootstrap_se(&self, kind: EstimatorKind, resamples: usize, rule: InclusionRule) -> Result<Metrics> {
        let n = self.outcomes.len();
        if n == 0 || resamples < 2 {
            return Err(Error::EmptySample);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(BOOTSTRAP_SEED ^ self.scenario.master_seed);
        let mut draws: Vec<Metrics> = Vec::with_capacity(resamples);
        let mut picks = vec![0usize; n];
        for _ in 0..resamples {
            for p in picks.iter_mut() {
                *p = rng.random_range(0..n);
            }
            if let (Some(m), _, _) = self.summarize(kind, &picks, rule) {
                draws.push(m);
            }
        }
        if draws.len() < 2 {
            return Err(Error::EmptySample);
        }
        let sd = |f: fn(&Metrics) -> f64| {
            let k = draws.len() as f64;
            let mean = draws.iter().map(f).sum::<f64>() / k;
            (draws.iter().map(|d| (f(d) - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
        };
        Ok(Metrics {
            nmedb: sd(|m| m.nmedb),
            trmed_sem: sd(|m| m.trmed_sem),
            medb_theta: sd(|m| m.medb_theta),
            medb_sigma2: sd(|m| m.medb_sigma2),
        })
    }
}

/// Metrics for every scenario, naive row then corrected row, in grid order.
pub fn run_grid(grid: &[Scenario], exec: Execution) -> Result<Vec<MetricsRow>> {
    run_grid_with(grid, exec, InclusionRule::default())
}

pub fn run_grid_with(grid: &[Scenario], exec: Execution, rule: InclusionRule) -> Result<Vec<MetricsRow>> {
    let mut rows = Vec::with_capacity(2 * grid.len());
    for (id, sc) in grid.iter().enumerate() {
        let run = ScenarioRun::execute(sc, exec)?;
        for kind in [EstimatorKind::Naive, EstimatorKind::Corrected] {
            rows.push(run.metrics_row(id, kind, rule));
        }
    }
    Ok(rows)
}
