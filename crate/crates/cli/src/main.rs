use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use midas_me::design::MeVariances;
use midas_me::dgp::{default_rho, simulate, DgpParams};
use midas_me::estimator::SearchConfig;
use midas_me_cli::ingest::{export_csv, fit_csv, FitOptions};
use midas_me_cli::{load_config, run, CliError};

#[derive(Parser)]
#[command(name = "midas-me", version, about = "ADL-MIDAS estimation under measurement error")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration file (simulate, diagnose or fit mode).
    Run { config: PathBuf },
    /// Fit the naive and corrected estimators to CSV data.
    Fit {
        #[arg(long)]
        low: PathBuf,
        #[arg(long)]
        high: PathBuf,
        #[arg(long, default_value_t = 2)]
        p: usize,
        #[arg(long)]
        jmax: usize,
        #[arg(long, default_value_t = 0.0)]
        sigma_u2: f64,
        #[arg(long, default_value_t = 0.0)]
        sigma_v2: f64,
        #[arg(long)]
        theta_lo: Option<f64>,
        #[arg(long)]
        theta_hi: Option<f64>,
        #[arg(long)]
        gss_iters: Option<usize>,
    },
    /// Simulate one sample and write it as CSV.
    Export {
        #[arg(long = "T")]
        t: usize,
        #[arg(long)]
        jmax: usize,
        #[arg(long)]
        theta: f64,
        #[arg(long, default_value_t = 0.0)]
        sigma_u2: f64,
        #[arg(long, default_value_t = 0.0)]
        sigma_v2: f64,
        #[arg(long, default_value_t = 2)]
        p: usize,
        #[arg(long, default_value_t = 3)]
        m: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        rep: u64,
        #[arg(long)]
        low: PathBuf,
        #[arg(long)]
        high: PathBuf,
    },
}

fn search(lo: Option<f64>, hi: Option<f64>, iters: Option<usize>) -> SearchConfig {
    let d = SearchConfig::default();
    SearchConfig {
        theta_lo: lo.unwrap_or(d.theta_lo),
        theta_hi: hi.unwrap_or(d.theta_hi),
        iterations: iters.unwrap_or(d.iterations),
    }
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Run { config } => run(&load_config(&config)?),
        Command::Fit {
            low,
            high,
            p,
            jmax,
            sigma_u2,
            sigma_v2,
            theta_lo,
            theta_hi,
            gss_iters,
        } => {
            let opts = FitOptions {
                p,
                jmax,
                me: MeVariances::new(sigma_u2, sigma_v2)?,
                search: search(theta_lo, theta_hi, gss_iters),
            };
            opts.search.validate()?;
            print!("{}", fit_csv(&low, &high, &opts)?);
            Ok(())
        }
        Command::Export {
            t,
            jmax,
            theta,
            sigma_u2,
            sigma_v2,
            p,
            m,
            seed,
            rep,
            low,
            high,
        } => {
            let mut params = DgpParams::study(t, jmax, theta, MeVariances::new(sigma_u2, sigma_v2)?);
            params.rho = default_rho(p);
            params.m = m;
            for w in params.validate()? {
                eprintln!("warning: {w}");
            }
            let sim = simulate(&params, seed, rep)?;
            export_csv(&sim.observed, &low, &high)?;
            eprintln!("wrote {} and {}", low.display(), high.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
