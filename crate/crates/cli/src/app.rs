use std::path::PathBuf;

use midas_me::design::MeVariances;
use midas_me::diagnostics::{coverage_check, naive_gradient_limit, plim_checks, plim_rate, MIN_COVERAGE_REPS, MIN_LARGE_T};
use midas_me::estimator::EstimatorKind;
use midas_me::montecarlo::{Execution, InclusionRule, MetricsRow, Scenario, ScenarioRun};
use thiserror::Error;

use crate::config::{ConfigError, Mode, RunConfig};
use crate::ingest::{fit_csv, FitOptions, IngestError};
use crate::output::{sig6, write_figure_data, write_metrics_csv, write_records, FigureAxis, OutputError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("{0}")]
    Model(#[from] midas_me::Error),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("cannot start thread pool: {0}")]
    ThreadPool(String),
}

impl CliError {
    /// 0 success, 1 configuration or input validation, 2 numerical failure, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(ConfigError::Io { .. }) => 3,
            CliError::Config(_) => 1,
            CliError::Output(OutputError::Empty(_)) => 2,
            CliError::Output(_) => 3,
            CliError::Ingest(IngestError::Io { .. }) | CliError::Ingest(IngestError::Csv { .. }) => 3,
            CliError::Ingest(IngestError::Model(_)) => 2,
            CliError::Ingest(_) => 1,
            CliError::Model(midas_me::Error::Domain(_)) => 1,
            CliError::Model(_) | CliError::Numerical(_) => 2,
            CliError::ThreadPool(_) => 3,
        }
    }
}

/// Run `f` on a pool with `threads` workers (all cores when `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CliError::ThreadPool(e.to_string()))?;
    Ok(pool.install(f))
}

fn execution(threads: Option<usize>) -> Execution {
    if threads == Some(1) {
        Execution::Serial
    } else {
        Execution::Parallel
    }
}

fn describe(sc: &Scenario) -> String {
    format!(
        "T={} jmax={} theta={} sigma_u2={} sigma_v2={}",
        sc.t, sc.jmax, sc.theta2, sc.sigma_u2, sc.sigma_v2
    )
}

/// Every scenario of the grid, naive row then corrected row.
pub fn simulate_grid(cfg: &RunConfig) -> Result<Vec<MetricsRow>, CliError> {
    let exec = execution(cfg.threads);
    let grid = cfg.scenarios();
    with_threads(cfg.threads, || {
        let mut rows = Vec::with_capacity(2 * grid.len());
        for (id, sc) in grid.iter().enumerate() {
            eprintln!("[{}/{}] {} ({} replications)", id + 1, grid.len(), describe(sc), sc.reps);
            let run = ScenarioRun::execute(sc, exec)?;
            for kind in [EstimatorKind::Naive, EstimatorKind::Corrected] {
                rows.push(run.metrics_row(id, kind, InclusionRule::default()));
            }
        }
        Ok::<_, CliError>(rows)
    })?
}

fn run_simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let rows = simulate_grid(cfg)?;
    let metrics = cfg.out_dir.join("metrics.csv");
    write_metrics_csv(&rows, &metrics)?;
    for axis in [FigureAxis::T, FigureAxis::Jmax] {
        write_figure_data(&rows, axis, &cfg.out_dir.join(axis.file_name()))?;
    }
    eprintln!("wrote {}", metrics.display());
    let failed: Vec<String> = rows
        .iter()
        .filter(|r| r.failed())
        .map(|r| format!("{} {}", describe(&r.scenario), r.estimator))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "half or more of the replications failed in: {}",
            failed.join("; ")
        )))
    }
}

const DIAGNOSTICS_HEADER: [&str; 10] = [
    "T", "jmax", "theta", "sigma_u2", "sigma_v2", "check", "component", "empirical", "target", "se",
];

fn parameter_names(p: usize) -> Vec<String> {
    let mut names = vec!["a".to_string()];
    names.extend((1..=p).map(|i| format!("rho{i}")));
    names.extend(["b".to_string(), "theta2".to_string(), "sigma_eps2".to_string()]);
    names
}

fn run_diagnose(cfg: &RunConfig) -> Result<(), CliError> {
    if let Some(&t) = cfg.t.iter().find(|&&t| t < MIN_LARGE_T) {
        return Err(ConfigError::Invalid {
            field: "T",
            message: format!("diagnose mode needs T >= {MIN_LARGE_T}, got {t}"),
        }
        .into());
    }
    if cfg.reps < MIN_COVERAGE_REPS {
        return Err(ConfigError::Invalid {
            field: "reps",
            message: format!("diagnose mode needs at least {MIN_COVERAGE_REPS} replications for coverage"),
        }
        .into());
    }
    let exec = execution(cfg.threads);
    let seed = cfg.seed.unwrap_or(0);
    let grid = cfg.scenarios();
    let records = with_threads(cfg.threads, || {
        let mut records: Vec<Vec<String>> = Vec::new();
        for (id, sc) in grid.iter().enumerate() {
            eprintln!("[{}/{}] diagnostics for {}", id + 1, grid.len(), describe(sc));
            let params = sc.dgp_params()?;
            let names = parameter_names(sc.p);
            let prefix = || {
                vec![
                    sc.t.to_string(),
                    sc.jmax.to_string(),
                    sig6(sc.theta2),
                    sig6(sc.sigma_u2),
                    sig6(sc.sigma_v2),
                ]
            };
            let mut push = |check: &str, component: &str, empirical: f64, target: f64, se: Option<f64>| {
                let mut r = prefix();
                r.extend([
                    check.to_string(),
                    component.to_string(),
                    sig6(empirical),
                    sig6(target),
                    se.map(sig6).unwrap_or_default(),
                ]);
                records.push(r);
            };

            let grad = naive_gradient_limit(&params, sc.t, seed)?;
            for (c, name) in grad.eta.iter().chain([&grad.sigma2]).zip(&names) {
                push("naive_gradient", name, c.empirical, c.predicted, Some(c.se));
            }

            let plim = plim_checks(&params, sc.t, seed)?;
            for (label, check) in [("plim_xii", &plim.cross), ("plim_xiii", &plim.gram), ("plim_xiv", &plim.composite)] {
                push(label, "relative_deviation", check.relative_deviation(), 0.0, None);
            }
            for (k, (e, t)) in plim.cross.empirical.iter().zip(plim.cross.target.iter()).enumerate() {
                let se = plim.cross.se.as_ref().map(|s| s[k]);
                push("plim_xii", &format!("x{k}"), *e, *t, se);
            }
            let rate = plim_rate(&params, sc.t, 4, seed, exec)?;
            for (label, r) in [("xii", rate.cross), ("xiii", rate.gram), ("xiv", rate.composite)] {
                push("plim_rate", label, r, 0.5, None);
            }

            let cov_params = midas_me::dgp::DgpParams {
                t: cfg.coverage_t,
                ..params.clone()
            };
            for kind in [EstimatorKind::Naive, EstimatorKind::Corrected] {
                let cov = coverage_check(&cov_params, cfg.reps, seed, kind, exec)?;
                for (name, c) in names.iter().zip(&cov.coverage) {
                    push(&format!("coverage_{kind}"), name, *c, 0.95, None);
                }
            }
        }
        Ok::<_, CliError>(records)
    })??;
    let path = cfg.out_dir.join("diagnostics.csv");
    write_records(&path, &DIAGNOSTICS_HEADER, records)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

/// Fit options from a fit-mode configuration.
pub fn fit_options(cfg: &RunConfig) -> Result<FitOptions, CliError> {
    Ok(FitOptions {
        p: cfg.p,
        jmax: cfg.jmax[0],
        me: MeVariances::new(cfg.sigma_u2[0], cfg.sigma_v2[0])?,
        search: cfg.search,
    })
}

fn run_fit(cfg: &RunConfig) -> Result<(), CliError> {
    let low: &PathBuf = cfg.low_csv.as_ref().expect("validated");
    let high: &PathBuf = cfg.high_csv.as_ref().expect("validated");
    let report = fit_csv(low, high, &fit_options(cfg)?)?;
    print!("{report}");
    Ok(())
}

/// Execute a validated configuration.
pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    match cfg.mode {
        Mode::Simulate => run_simulate(cfg),
        Mode::Diagnose => run_diagnose(cfg),
        Mode::Fit => run_fit(cfg),
    }
}
