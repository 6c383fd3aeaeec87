//! CSV emission for metrics tables and figure data.

use std::path::{Path, PathBuf};

use midas_me::montecarlo::{Metrics, MetricsRow};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("nothing to write to {}", .0.display())]
    Empty(PathBuf),
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub const METRICS_HEADER: [&str; 14] = [
    "T",
    "jmax",
    "theta",
    "sigma_u2",
    "sigma_v2",
    "estimator",
    "NMedB",
    "trMedSEM",
    "medB_theta",
    "medB_sigma2",
    "clamp_rate",
    "failure_rate",
    "reps",
    "seed",
];

/// Six significant digits, printed without an exponent and without
/// trailing zeros. Non-finite values are written as `NaN`, `inf`, `-inf`.
pub fn sig6(v: f64) -> String {
    if !v.is_finite() {
        return format!("{v}");
    }
    let rounded: f64 = format!("{v:.5e}").parse().expect("formatted float parses");
    format!("{rounded}")
}

fn metric_fields(m: &Option<Metrics>) -> [String; 4] {
    match m {
        Some(m) => [sig6(m.nmedb), sig6(m.trmed_sem), sig6(m.medb_theta), sig6(m.medb_sigma2)],
        None => Default::default(),
    }
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, OutputError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| OutputError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    csv::Writer::from_path(path).map_err(|source| OutputError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

/// Header plus records, creating parent directories as needed.
pub fn write_records<I>(path: &Path, header: &[&str], records: I) -> Result<(), OutputError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let csv_err = |source| OutputError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = writer(path)?;
    w.write_record(header).map_err(csv_err)?;
    for r in records {
        w.write_record(&r).map_err(csv_err)?;
    }
    w.flush().map_err(|source| OutputError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// One line per scenario and estimator. Metric fields are empty for failed rows.
pub fn write_metrics_csv(rows: &[MetricsRow], path: &Path) -> Result<(), OutputError> {
    if rows.is_empty() {
        return Err(OutputError::Empty(path.to_path_buf()));
    }
    let records = rows.iter().map(|r| {
        let sc = &r.scenario;
        let mut rec = vec![
            sc.t.to_string(),
            sc.jmax.to_string(),
            sig6(sc.theta2),
            sig6(sc.sigma_u2),
            sig6(sc.sigma_v2),
            r.estimator.tag().to_string(),
        ];
        rec.extend(metric_fields(&r.metrics));
        rec.extend([sig6(r.clamp_rate), sig6(r.failure_rate), sc.reps.to_string(), sc.master_seed.to_string()]);
        rec
    });
    write_records(path, &METRICS_HEADER, records)
}

/// Axis along which figure data is laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureAxis {
    T,
    Jmax,
}

impl FigureAxis {
    pub fn file_name(&self) -> &'static str {
        match self {
            FigureAxis::T => "figdata_T.csv",
            FigureAxis::Jmax => "figdata_jmax.csv",
        }
    }
}

/// Metric series against one grid axis, grouped by the remaining axes so each
/// curve is a contiguous block sorted by the axis value.
pub fn write_figure_data(rows: &[MetricsRow], axis: FigureAxis, path: &Path) -> Result<(), OutputError> {
    if rows.is_empty() {
        return Err(OutputError::Empty(path.to_path_buf()));
    }
    let mut sorted: Vec<&MetricsRow> = rows.iter().collect();
    let key = |r: &MetricsRow| {
        let sc = &r.scenario;
        let (fixed, x) = match axis {
            FigureAxis::T => (sc.jmax, sc.t),
            FigureAxis::Jmax => (sc.t, sc.jmax),
        };
        (
            r.estimator,
            sc.sigma_u2.to_bits(),
            sc.sigma_v2.to_bits(),
            sc.theta2.to_bits(),
            fixed,
            x,
        )
    };
    sorted.sort_by_key(|r| key(r));
    let header: [&str; 10] = match axis {
        FigureAxis::T => ["estimator", "sigma_u2", "sigma_v2", "theta", "jmax", "T", "NMedB", "trMedSEM", "medB_theta", "medB_sigma2"],
        FigureAxis::Jmax => ["estimator", "sigma_u2", "sigma_v2", "theta", "T", "jmax", "NMedB", "trMedSEM", "medB_theta", "medB_sigma2"],
    };
    let records = sorted.into_iter().map(|r| {
        let sc = &r.scenario;
        let (fixed, x) = match axis {
            FigureAxis::T => (sc.jmax, sc.t),
            FigureAxis::Jmax => (sc.t, sc.jmax),
        };
        let mut rec = vec![
            r.estimator.tag().to_string(),
            sig6(sc.sigma_u2),
            sig6(sc.sigma_v2),
            sig6(sc.theta2),
            fixed.to_string(),
            x.to_string(),
        ];
        rec.extend(metric_fields(&r.metrics));
        rec
    });
    write_records(path, &header, records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.0575), "0.0575");
        assert_eq!(sig6(1.0 / 3.0), "0.333333");
        assert_eq!(sig6(123456789.0), "123457000");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(3.0e-5), "0.00003");
        assert_eq!(sig6(-2.5), "-2.5");
        assert_eq!(sig6(f64::NAN), "NaN");
    }

    #[test]
    fn sig6_round_trips_at_six_digits() {
        for v in [0.123456789, 98765.4321, 1.0e-7 * 3.14159265, 42.0] {
            let back: f64 = sig6(v).parse().unwrap();
            assert!(((back - v) / v).abs() < 5e-6, "{v} -> {back}");
            assert_eq!(sig6(back), sig6(v));
        }
    }
}
