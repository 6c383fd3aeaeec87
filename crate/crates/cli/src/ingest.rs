//! Mixed-frequency CSV input and output.
//!
//! Low-frequency files have columns `period,value`; high-frequency files have
//! `period,subperiod,value`, with the subperiods of each period on
//! consecutive rows in increasing order.

use std::fmt;
use std::path::{Path, PathBuf};

use midas_me::design::{align_mixed, MeVariances, MixedSeries};
use midas_me::estimator::{asymptotic_covariance, fit_corrected, fit_naive, standard_errors, FitResult, SearchConfig};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("missing-value: {} line {line}, column `{column}`", path.display())]
    MissingValue { path: PathBuf, line: u64, column: String },
    #[error("ragged-subperiods: period `{period}` has {found} subperiods, expected {expected}")]
    RaggedSubperiods { period: String, expected: usize, found: usize },
    #[error("insufficient-history: {0}")]
    InsufficientHistory(String),
    #[error("malformed: {} line {line}: {message}", path.display())]
    Malformed { path: PathBuf, line: u64, message: String },
    #[error("period-mismatch: low-frequency period {index} is `{low}`, high-frequency file has `{high}`")]
    PeriodMismatch { index: usize, low: String, high: String },
    #[error("estimation failed: {0}")]
    Model(#[from] midas_me::Error),
}

impl IngestError {
    /// Short stable name of the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            IngestError::Io { .. } => "io",
            IngestError::Csv { .. } => "csv",
            IngestError::MissingValue { .. } => "missing-value",
            IngestError::RaggedSubperiods { .. } => "ragged-subperiods",
            IngestError::InsufficientHistory(_) => "insufficient-history",
            IngestError::Malformed { .. } => "malformed",
            IngestError::PeriodMismatch { .. } => "period-mismatch",
            IngestError::Model(_) => "model",
        }
    }
}

fn open(path: &Path) -> Result<csv::Reader<std::fs::File>, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn check_header(reader: &mut csv::Reader<std::fs::File>, path: &Path, expected: &[&str]) -> Result<(), IngestError> {
    let header = reader.headers().map_err(|source| IngestError::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    let found: Vec<&str> = header.iter().collect();
    if found != expected {
        return Err(IngestError::Malformed {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header `{}`, found `{}`", expected.join(","), found.join(",")),
        });
    }
    Ok(())
}

struct Row {
    line: u64,
    fields: Vec<String>,
}

fn rows(path: &Path, expected: &[&str]) -> Result<Vec<Row>, IngestError> {
    let mut reader = open(path)?;
    check_header(&mut reader, path, expected)?;
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|source| IngestError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let fields: Vec<String> = rec.iter().map(str::to_string).collect();
        if let Some(i) = fields.iter().position(|f| f.is_empty() || f.eq_ignore_ascii_case("na")) {
            return Err(IngestError::MissingValue {
                path: path.to_path_buf(),
                line,
                column: expected[i].to_string(),
            });
        }
        out.push(Row { line, fields });
    }
    Ok(out)
}

fn number<T: std::str::FromStr>(path: &Path, row: &Row, idx: usize, column: &str) -> Result<T, IngestError> {
    row.fields[idx].parse().map_err(|_| IngestError::Malformed {
        path: path.to_path_buf(),
        line: row.line,
        message: format!("`{column}` value `{}` is not a number", row.fields[idx]),
    })
}

/// Low-frequency observations in file order.
pub fn read_low(path: &Path) -> Result<(Vec<String>, Vec<f64>), IngestError> {
    let mut periods = Vec::new();
    let mut values = Vec::new();
    for row in rows(path, &["period", "value"])? {
        values.push(number(path, &row, 1, "value")?);
        periods.push(row.fields[0].clone());
    }
    Ok((periods, values))
}

/// High-frequency observations grouped by period, with `m` inferred from
/// the first period and required to stay constant.
pub fn read_high(path: &Path) -> Result<(Vec<String>, Vec<f64>, usize), IngestError> {
    let all = rows(path, &["period", "subperiod", "value"])?;
    let mut periods: Vec<String> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    let mut values = Vec::with_capacity(all.len());
    let mut last_sub: Option<i64> = None;
    for row in &all {
        let sub: i64 = number(path, row, 1, "subperiod")?;
        let value: f64 = number(path, row, 2, "value")?;
        if periods.last() != Some(&row.fields[0]) {
            if periods.contains(&row.fields[0]) {
                return Err(IngestError::Malformed {
                    path: path.to_path_buf(),
                    line: row.line,
                    message: format!("period `{}` is not contiguous", row.fields[0]),
                });
            }
            periods.push(row.fields[0].clone());
            counts.push(0);
        } else if last_sub.is_some_and(|prev| sub <= prev) {
            return Err(IngestError::Malformed {
                path: path.to_path_buf(),
                line: row.line,
                message: format!("subperiod {sub} does not increase within period `{}`", row.fields[0]),
            });
        }
        last_sub = Some(sub);
        *counts.last_mut().expect("a period was pushed") += 1;
        values.push(value);
    }
    let m = counts.first().copied().unwrap_or(0);
    if let Some((i, &found)) = counts.iter().enumerate().find(|(_, &c)| c != m) {
        return Err(IngestError::RaggedSubperiods {
            period: periods[i].clone(),
            expected: m,
            found,
        });
    }
    Ok((periods, values, m))
}

/// Pair a low-frequency and a high-frequency file into one sample.
pub fn read_mixed(low: &Path, high: &Path) -> Result<MixedSeries, IngestError> {
    let (low_periods, y) = read_low(low)?;
    let (high_periods, x, m) = read_high(high)?;
    for (index, (l, h)) in low_periods.iter().zip(&high_periods).enumerate() {
        if l != h {
            return Err(IngestError::PeriodMismatch {
                index: index + 1,
                low: l.clone(),
                high: h.clone(),
            });
        }
    }
    if low_periods.len() != high_periods.len() {
        let index = low_periods.len().min(high_periods.len());
        return Err(IngestError::PeriodMismatch {
            index: index + 1,
            low: low_periods.get(index).cloned().unwrap_or_else(|| "<end>".into()),
            high: high_periods.get(index).cloned().unwrap_or_else(|| "<end>".into()),
        });
    }
    if m == 0 {
        return Err(IngestError::InsufficientHistory("no observations".into()));
    }
    Ok(MixedSeries::new(y, x, m)?)
}

/// Write `series` as the two CSV files, periods and subperiods numbered from 1.
/// Values use the shortest representation that parses back to the same bits.
pub fn export_csv(series: &MixedSeries, low: &Path, high: &Path) -> Result<(), IngestError> {
    let csv_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| IngestError::Csv { path, source }
    };
    let mut w = csv::Writer::from_path(low).map_err(csv_err(low))?;
    w.write_record(["period", "value"]).map_err(csv_err(low))?;
    for (i, v) in series.y_obs().iter().enumerate() {
        w.write_record([(i + 1).to_string(), v.to_string()]).map_err(csv_err(low))?;
    }
    w.flush().map_err(|source| IngestError::Io {
        path: low.to_path_buf(),
        source,
    })?;

    let m = series.m();
    let mut w = csv::Writer::from_path(high).map_err(csv_err(high))?;
    w.write_record(["period", "subperiod", "value"]).map_err(csv_err(high))?;
    for (i, v) in series.x_obs().iter().enumerate() {
        w.write_record([(i / m + 1).to_string(), (i % m + 1).to_string(), v.to_string()])
            .map_err(csv_err(high))?;
    }
    w.flush().map_err(|source| IngestError::Io {
        path: high.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub p: usize,
    pub jmax: usize,
    pub me: MeVariances,
    pub search: SearchConfig,
}

/// One estimator's results with standard errors, when the covariance exists.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateReport {
    pub fit: FitResult,
    pub standard_errors: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub m: usize,
    pub periods: usize,
    pub rows: usize,
    pub dropped_rows: usize,
    pub naive: EstimateReport,
    pub corrected: EstimateReport,
    /// `c(j; theta_hat)` of the corrected fit.
    pub weights: Vec<f64>,
}

/// Fit both estimators to an in-memory sample.
pub fn fit_series(series: &MixedSeries, opts: &FitOptions) -> Result<FitReport, IngestError> {
    let ds = align_mixed(series, opts.p, opts.jmax).map_err(|e| match e {
        midas_me::Error::InsufficientHistory(msg) => IngestError::InsufficientHistory(msg),
        other => IngestError::Model(other),
    })?;
    let report = |fit: FitResult, me: MeVariances| {
        let standard_errors = asymptotic_covariance(&fit, &ds, me).ok().map(|c| standard_errors(&c));
        EstimateReport { fit, standard_errors }
    };
    let naive = report(fit_naive(&ds, &opts.search)?, MeVariances::none());
    let corrected = report(fit_corrected(&ds, opts.me, &opts.search)?, opts.me);
    let weights = corrected.fit.weights(opts.jmax)?.weights().to_vec();
    Ok(FitReport {
        m: series.m(),
        periods: ds.periods(),
        rows: ds.rows(),
        dropped_rows: ds.dropped_rows(),
        naive,
        corrected,
        weights,
    })
}

/// Read the two CSV files and fit both estimators.
pub fn fit_csv(low: &Path, high: &Path, opts: &FitOptions) -> Result<FitReport, IngestError> {
    fit_series(&read_mixed(low, high)?, opts)
}

fn parameter_names(p: usize) -> Vec<String> {
    let mut names = vec!["a".to_string()];
    names.extend((1..=p).map(|i| format!("rho{i}")));
    names.extend(["b".to_string(), "theta2".to_string(), "sigma_eps2".to_string()]);
    names
}

impl fmt::Display for FitReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "sample: {} periods, m = {}, {} usable rows ({} dropped for lag history)",
            self.periods, self.m, self.rows, self.dropped_rows
        )?;
        let names = parameter_names(self.naive.fit.p());
        writeln!(f, "{:<12}{:>14}{:>14}{:>14}{:>14}", "parameter", "naive", "se", "corrected", "se")?;
        let gn = self.naive.fit.gamma();
        let gc = self.corrected.fit.gamma();
        let se = |r: &EstimateReport, i: usize| {
            r.standard_errors
                .as_ref()
                .map_or_else(|| "n/a".to_string(), |s| format!("{:.6}", s[i]))
        };
        for (i, name) in names.iter().enumerate() {
            writeln!(
                f,
                "{:<12}{:>14.6}{:>14}{:>14.6}{:>14}",
                name,
                gn[i],
                se(&self.naive, i),
                gc[i],
                se(&self.corrected, i)
            )?;
        }
        if self.corrected.fit.clamped_variance {
            writeln!(f, "note: corrected sigma_eps2 was non-positive and has been floored")?;
        }
        writeln!(f, "lag weights c(j; theta2) of the corrected fit:")?;
        for (j, w) in self.weights.iter().enumerate() {
            writeln!(f, "  j={j:<3} {w:.6}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn reads_well_formed_files() {
        let dir = tempfile::tempdir().unwrap();
        let low = write(dir.path(), "low.csv", "period,value\nq1,1.5\nq2,-2\n");
        let high = write(dir.path(), "high.csv", "period,subperiod,value\nq1,1,0.1\nq1,2,0.2\nq2,1,0.3\nq2,2,0.4\n");
        let s = read_mixed(&low, &high).unwrap();
        assert_eq!(s.m(), 2);
        assert_eq!(s.y_obs(), &[1.5, -2.0]);
        assert_eq!(s.x_obs(), &[0.1, 0.2, 0.3, 0.4]);
    }

    #[test]
    fn missing_value_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let high = write(dir.path(), "high.csv", "period,subperiod,value\n1,1,0.1\n1,2,\n");
        let err = read_high(&high).unwrap_err();
        assert_eq!(err.kind(), "missing-value");
        assert!(matches!(err, IngestError::MissingValue { line: 3, .. }), "{err}");
    }

    #[test]
    fn ragged_subperiods_detected() {
        let dir = tempfile::tempdir().unwrap();
        let high = write(dir.path(), "high.csv", "period,subperiod,value\n1,1,0\n1,2,0\n1,3,0\n2,1,0\n2,2,0\n");
        let err = read_high(&high).unwrap_err();
        assert_eq!(err.kind(), "ragged-subperiods");
    }

    #[test]
    fn header_and_number_checks() {
        let dir = tempfile::tempdir().unwrap();
        let bad_header = write(dir.path(), "a.csv", "date,value\n1,2\n");
        assert_eq!(read_low(&bad_header).unwrap_err().kind(), "malformed");
        let bad_number = write(dir.path(), "b.csv", "period,value\n1,abc\n");
        assert_eq!(read_low(&bad_number).unwrap_err().kind(), "malformed");
        let unordered = write(dir.path(), "c.csv", "period,subperiod,value\n1,2,0\n1,1,0\n");
        assert_eq!(read_high(&unordered).unwrap_err().kind(), "malformed");
        assert_eq!(read_low(&dir.path().join("none.csv")).unwrap_err().kind(), "io");
    }

    #[test]
    fn period_mismatch_detected() {
        let dir = tempfile::tempdir().unwrap();
        let low = write(dir.path(), "low.csv", "period,value\n1,1\n2,2\n");
        let high = write(dir.path(), "high.csv", "period,subperiod,value\n1,1,0\n3,1,0\n");
        assert_eq!(read_mixed(&low, &high).unwrap_err().kind(), "period-mismatch");
        let short = write(dir.path(), "short.csv", "period,subperiod,value\n1,1,0\n");
        assert_eq!(read_mixed(&low, &short).unwrap_err().kind(), "period-mismatch");
    }
}
