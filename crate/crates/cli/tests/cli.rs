use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use midas_me::design::MeVariances;
use midas_me::dgp::{simulate, DgpParams};
use midas_me::estimator::SearchConfig;
use midas_me_cli::ingest::{export_csv, fit_csv, fit_series, FitOptions, IngestError};
use midas_me_cli::output::METRICS_HEADER;
use midas_me_cli::{load_config, parse_config};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_midas-me"))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run_config(dir: &Path, name: &str, text: &str) -> Output {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    bin().arg("run").arg(&path).output().unwrap()
}

fn small_config(out: &Path, extra: &str) -> String {
    format!(
        "mode = simulate\nT = 48\njmax = 9\ntheta = 2\nsigma_u2 = 0.5\nsigma_v2 = 0.5\nreps = 40\nseed = 11\nout_dir = {}\n{extra}",
        out.display()
    )
}

fn read_rows(path: &Path) -> (csv::StringRecord, Vec<csv::StringRecord>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().clone();
    let rows = r.records().map(|r| r.unwrap()).collect();
    (header, rows)
}

#[test]
fn shipped_tables_expand_to_sixteen_scenarios() {
    for (i, (su, sv)) in [(0.5, 0.5), (1.5, 0.5), (0.5, 1.5), (1.5, 1.5)].into_iter().enumerate() {
        let cfg = load_config(&configs_dir().join(format!("table{}.cfg", i + 1))).unwrap();
        let grid = cfg.scenarios();
        assert_eq!(grid.len(), 16);
        assert_eq!(cfg.reps, 1000);
        assert!(grid.iter().all(|s| s.sigma_u2 == su && s.sigma_v2 == sv));
    }
}

#[test]
fn table_grid_writes_one_row_per_scenario_and_estimator() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let text = std::fs::read_to_string(configs_dir().join("table1.cfg"))
        .unwrap()
        .replace("reps = 1000", "reps = 10")
        .replace("out_dir = out/table1", &format!("out_dir = {}", out.display()));
    let result = run_config(dir.path(), "t1.cfg", &text);
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let (header, rows) = read_rows(&out.join("metrics.csv"));
    assert_eq!(header.iter().collect::<Vec<_>>(), METRICS_HEADER.to_vec());
    assert_eq!(rows.len(), 32);
    for pair in rows.chunks(2) {
        assert_eq!(&pair[0][5], "naive");
        assert_eq!(&pair[1][5], "corrected");
        assert_eq!(pair[0].iter().take(5).collect::<Vec<_>>(), pair[1].iter().take(5).collect::<Vec<_>>());
    }
    assert!(out.join("figdata_T.csv").exists());
    assert!(out.join("figdata_jmax.csv").exists());
}

#[test]
fn single_scenario_round_trips() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("one");
    let result = run_config(dir.path(), "one.cfg", &small_config(&out, ""));
    assert!(result.status.success(), "{}", String::from_utf8_lossy(&result.stderr));
    let text = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(text.lines().count(), 3);
    let (_, rows) = read_rows(&out.join("metrics.csv"));
    for row in &rows {
        assert_eq!(&row[0], "48");
        assert_eq!(&row[1], "9");
        assert_eq!(&row[12], "40");
        assert_eq!(&row[13], "11");
        for field in 6..12 {
            let v: f64 = row[field].parse().unwrap();
            assert!(v.is_finite() && v >= 0.0);
        }
    }
}

#[test]
fn same_seed_gives_identical_bytes_for_any_thread_count() {
    let dir = TempDir::new().unwrap();
    let mut outputs = Vec::new();
    for (i, threads) in ["threads = 1", "threads = 4", ""].iter().enumerate() {
        let out = dir.path().join(format!("run{i}"));
        let result = run_config(dir.path(), &format!("c{i}.cfg"), &small_config(&out, threads));
        assert!(result.status.success());
        outputs.push(std::fs::read(out.join("metrics.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn exported_sample_fits_bitwise_identically() {
    let dir = TempDir::new().unwrap();
    let (low, high) = (dir.path().join("low.csv"), dir.path().join("high.csv"));
    let status = bin()
        .args(["export", "--T", "120", "--jmax", "9", "--theta", "3", "--sigma-u2", "0.5", "--sigma-v2", "0.5"])
        .args(["--seed", "5", "--rep", "2", "--low"])
        .arg(&low)
        .arg("--high")
        .arg(&high)
        .status()
        .unwrap();
    assert!(status.success());

    let me = MeVariances::new(0.5, 0.5).unwrap();
    let params = DgpParams::study(120, 9, 3.0, me);
    let sim = simulate(&params, 5, 2).unwrap();
    let opts = FitOptions {
        p: 2,
        jmax: 9,
        me,
        search: SearchConfig::default(),
    };
    let direct = fit_series(&sim.observed, &opts).unwrap();
    let from_files = fit_csv(&low, &high, &opts).unwrap();
    assert_eq!(direct.naive.fit.gamma(), from_files.naive.fit.gamma());
    assert_eq!(direct.corrected.fit.gamma(), from_files.corrected.fit.gamma());
    for (a, b) in direct.corrected.fit.gamma().iter().zip(from_files.corrected.fit.gamma().iter()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }

    // Export from the library and from the binary agree byte for byte.
    let (low2, high2) = (dir.path().join("low2.csv"), dir.path().join("high2.csv"));
    export_csv(&sim.observed, &low2, &high2).unwrap();
    assert_eq!(std::fs::read(&low).unwrap(), std::fs::read(&low2).unwrap());
    assert_eq!(std::fs::read(&high).unwrap(), std::fs::read(&high2).unwrap());
}

#[test]
fn zero_measurement_error_reports_identical_estimators() {
    let dir = TempDir::new().unwrap();
    let (low, high) = (dir.path().join("low.csv"), dir.path().join("high.csv"));
    let params = DgpParams::study(200, 9, 2.0, MeVariances::none());
    export_csv(&simulate(&params, 3, 0).unwrap().observed, &low, &high).unwrap();
    let out = bin()
        .arg("fit")
        .arg("--low")
        .arg(&low)
        .arg("--high")
        .arg(&high)
        .args(["--jmax", "9"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let table: Vec<&str> = stdout.lines().skip(2).take(6).collect();
    assert_eq!(table.len(), 6);
    for line in table {
        let cols: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(cols[1], cols[3], "{line}");
        assert_eq!(cols[2], cols[4], "{line}");
    }
}

#[test]
fn missing_value_is_named_with_its_row() {
    let dir = TempDir::new().unwrap();
    let low = dir.path().join("low.csv");
    let high = dir.path().join("high.csv");
    let mut low_text = String::from("period,value\n");
    let mut high_text = String::from("period,subperiod,value\n");
    for t in 1..=40 {
        let v = if t == 17 { String::new() } else { format!("{}", t as f64 * 0.1) };
        low_text.push_str(&format!("{t},{v}\n"));
        for s in 1..=3 {
            high_text.push_str(&format!("{t},{s},{}\n", (t * s) as f64 * 0.01));
        }
    }
    std::fs::write(&low, low_text).unwrap();
    std::fs::write(&high, high_text).unwrap();

    let opts = FitOptions {
        p: 2,
        jmax: 6,
        me: MeVariances::none(),
        search: SearchConfig::default(),
    };
    match fit_csv(&low, &high, &opts) {
        Err(e @ IngestError::MissingValue { line, .. }) => {
            assert_eq!(e.kind(), "missing-value");
            assert_eq!(line, 18);
        }
        other => panic!("expected a missing value, got {other:?}"),
    }

    let out = bin()
        .arg("fit")
        .arg("--low")
        .arg(&low)
        .arg("--high")
        .arg(&high)
        .args(["--jmax", "6"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("missing-value") && stderr.contains("line 18"), "{stderr}");
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();

    let bad_key = run_config(dir.path(), "bad.cfg", "mode = simulate\nTT = 24\n");
    assert_eq!(bad_key.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad_key.stderr).contains("bad.cfg:2:"));

    let no_seed = run_config(dir.path(), "noseed.cfg", "T = 24\njmax = 9\ntheta = 2\n");
    assert_eq!(no_seed.status.code(), Some(1));

    let missing = bin().arg("run").arg(dir.path().join("absent.cfg")).output().unwrap();
    assert_eq!(missing.status.code(), Some(3));

    let usage = bin().arg("frobnicate").output().unwrap();
    assert_eq!(usage.status.code(), Some(1));

    // Measurement-error variance far above the regressor variance leaves the
    // corrected normal matrix indefinite.
    let (low, high) = (dir.path().join("low.csv"), dir.path().join("high.csv"));
    let params = DgpParams::study(120, 9, 2.0, MeVariances::none());
    export_csv(&simulate(&params, 1, 0).unwrap().observed, &low, &high).unwrap();
    let singular = bin()
        .arg("fit")
        .arg("--low")
        .arg(&low)
        .arg("--high")
        .arg(&high)
        .args(["--jmax", "9", "--sigma-u2", "1000"])
        .output()
        .unwrap();
    assert_eq!(singular.status.code(), Some(2), "{}", String::from_utf8_lossy(&singular.stderr));

    let ok = run_config(dir.path(), "ok.cfg", &small_config(&dir.path().join("ok"), ""));
    assert_eq!(ok.status.code(), Some(0));

    // Output directory that cannot be created: a regular file is in the way.
    let blocker = dir.path().join("blocker");
    std::fs::write(&blocker, "").unwrap();
    let io = run_config(dir.path(), "io.cfg", &small_config(&blocker.join("sub"), ""));
    assert_eq!(io.status.code(), Some(3));
}

#[test]
fn parse_errors_carry_line_numbers() {
    let err = parse_config("mode = simulate\n\n# c\njmax = 9,,24\n", "x.cfg").unwrap_err();
    assert!(err.to_string().starts_with("x.cfg:4:"), "{err}");
}
