//! End-to-end tests of the `loglin` binary: every subcommand against the
//! bundled fixture, plus the error paths that must exit nonzero.

mod common;

use std::path::Path;
use std::process::Command;

use common::{CONFIG, FIXTURE, THREE_PAIRWISE};
use loglin::{ContingencyTable, RealTable};
use tempfile::TempDir;

struct Run {
    success: bool,
    stdout: String,
    stderr: String,
}

fn loglin(args: &[&str]) -> Run {
    let output = Command::new(env!("CARGO_BIN_EXE_loglin"))
        .args(args)
        // keep the ambient environment from smuggling in a config file
        .env_remove("LOGLIN_CONFIG")
        .output()
        .expect("binary runs");
    Run {
        success: output.status.success(),
        stdout: String::from_utf8(output.stdout).expect("stdout is UTF-8"),
        stderr: String::from_utf8(output.stderr).expect("stderr is UTF-8"),
    }
}

fn loglin_ok(args: &[&str]) -> Run {
    let run = loglin(args);
    assert!(
        run.success,
        "command {args:?} failed:\nstdout:\n{}\nstderr:\n{}",
        run.stdout, run.stderr
    );
    run
}

/// `ingest` against the study config writes both table files and prints
/// the margins, including the dominant region share.
#[test]
fn ingest_reports_totals_and_writes_tables() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().to_str().unwrap();
    let run = loglin_ok(&[
        "ingest",
        "--config",
        CONFIG,
        "--input",
        FIXTURE,
        "--out-dir",
        out,
    ]);
    assert!(run.stdout.contains("total cases: 11290"));
    assert!(run.stdout.contains("| 北北基 | 9453 | 83.7% |"));
    assert!(run.stdout.contains("| 女性 | 5586 | 49.5% |"));

    let csv = std::fs::read_to_string(dir.path().join("table-a7.csv")).unwrap();
    let table = ContingencyTable::from_csv_str(&csv).unwrap();
    assert_eq!(table.n_cells(), 42);
    assert_eq!(table.total(), 11290);
    assert_eq!(table.cell(&["女性", "30-59", "北北基"]).unwrap(), 2530);
    assert!(dir.path().join("table-a7.json").exists());
}

#[test]
fn ingest_with_twelve_regions_counts_each_city() {
    let dir = TempDir::new().unwrap();
    let run = loglin_ok(&[
        "ingest",
        "--config",
        CONFIG,
        "--input",
        FIXTURE,
        "--scheme",
        "B12",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(run.stdout.contains("| 苗栗縣 | 409 |"));
    let csv = std::fs::read_to_string(dir.path().join("table-b12.csv")).unwrap();
    let table = ContingencyTable::from_csv_str(&csv).unwrap();
    assert_eq!(table.total(), 11290);
    let by_region = table.margin(&["縣市"]).unwrap();
    assert_eq!(by_region.cell(&["苗栗縣"]).unwrap(), 409);
    assert_eq!(by_region.cell(&["台北市"]).unwrap(), 3804);
}

#[test]
fn select_prints_the_ranked_lattice() {
    let run = loglin_ok(&["select", "--config", CONFIG, "--input", FIXTURE]);
    assert!(run.stdout.contains(&format!("best model by BIC: {THREE_PAIRWISE}")));
    assert!(run.stdout.contains("361.1369"));
    // the saturated row fits exactly and spends every degree of freedom
    assert!(run.stdout.contains("| 386.6376 | 0.0000 | 0 |"));
}

#[test]
fn fit_renders_the_coefficient_table() {
    let run = loglin_ok(&["fit", "--config", CONFIG, "--input", FIXTURE]);
    assert!(run.stdout.contains("| 年齡[30-59]*性別[女性] | 0.2842 | 0.0555 | <.0001 |"));
    assert!(run.stdout.contains("| Intercept | 2.8483 | 0.1897 | <.0001 |"));

    let run = loglin_ok(&[
        "fit",
        "--config",
        CONFIG,
        "--input",
        FIXTURE,
        "--scheme",
        "B12",
    ]);
    assert!(run.stdout.contains("| 年齡[60+]*縣市[苗栗縣] | -2.7328 | 0.3508 | <.0001 |"));
    assert!(run.stdout.contains("| 性別[女性]*縣市[苗栗縣] | -1.2242 | 0.1962 | <.0001 |"));
}

#[test]
fn contrast_between_ages_within_region() {
    let base = [
        "contrast", "--config", CONFIG, "--input", FIXTURE, "--scheme", "B12", "--factor", "年齡",
    ];
    let mut args = base.to_vec();
    args.extend(["--level-a", "60+", "--level-b", "30-59", "--within", "縣市=新北市"]);
    let run = loglin_ok(&args);
    assert!(run.stdout.contains("年齡[60+] - 年齡[30-59] (縣市=新北市)"));
    assert!(run.stdout.contains("0.4431"));

    let mut args = base.to_vec();
    args.extend(["--level-a", "60+", "--level-b", "30-59", "--within", "縣市=苗栗縣"]);
    let run = loglin_ok(&args);
    assert!(run.stdout.contains("<.0001"));

    // a level against itself is exactly no difference
    let mut args = base.to_vec();
    args.extend(["--level-a", "60+", "--level-b", "60+", "--within", "縣市=新北市"]);
    let run = loglin_ok(&args);
    assert!(run.stdout.contains("| 0.0000 | 0.0000 | 1.0000 |"));
}

#[test]
fn charts_are_emitted_as_svg() {
    let dir = TempDir::new().unwrap();
    loglin_ok(&[
        "charts",
        "--config",
        CONFIG,
        "--input",
        FIXTURE,
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    for name in ["a7-region", "a7-region-gender", "a7-age-gender", "a7-region-age"] {
        let svg = std::fs::read_to_string(dir.path().join(format!("{name}.svg")))
            .unwrap_or_else(|_| panic!("{name}.svg was written"));
        assert!(svg.starts_with("<svg"), "{name} is an SVG document");
        assert!(svg.contains("北北基") || svg.contains("0-29"));
    }
    let gendered = std::fs::read_to_string(dir.path().join("a7-region-gender.svg")).unwrap();
    assert!(gendered.contains("女性") && gendered.contains("男性"));
}

#[test]
fn report_bundles_selection_fit_and_charts() {
    let dir = TempDir::new().unwrap();
    let run = loglin_ok(&[
        "report",
        "--config",
        CONFIG,
        "--input",
        FIXTURE,
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(run.stdout.contains("best model by BIC"));
    assert!(run.stdout.contains("| Intercept | 2.8483 | 0.1897 | <.0001 |"));
    for name in ["selection.md", "fit-best.md", "fit-best-full.json", "a7-region.svg"] {
        assert!(dir.path().join(name).exists(), "{name} was written");
    }
    let full = std::fs::read_to_string(dir.path().join("fit-best-full.json")).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&full).unwrap();
    assert_eq!(doc["labels"].as_array().unwrap().len(), 30);
    assert!(doc["converged"].as_bool().unwrap());
}

/// An emitted table must analyze identically whether it is re-read from
/// CSV or JSON, down to the last bit of the printed full-precision CSV.
#[test]
fn emitted_tables_reproduce_the_fit_exactly() {
    let dir = TempDir::new().unwrap();
    loglin_ok(&[
        "ingest",
        "--config",
        CONFIG,
        "--input",
        FIXTURE,
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    let csv_table = dir.path().join("table-a7.csv");
    let json_table = dir.path().join("table-a7.json");

    let fit_args = |table: &Path| {
        let mut args = vec!["fit", "--config", CONFIG, "--format", "csv", "--table"];
        args.push(table.to_str().unwrap());
        args.iter().map(|s| s.to_string()).collect::<Vec<_>>()
    };
    let from_records = loglin_ok(&[
        "fit", "--config", CONFIG, "--input", FIXTURE, "--format", "csv",
    ]);
    let from_csv_args = fit_args(&csv_table);
    let from_csv = loglin_ok(&from_csv_args.iter().map(String::as_str).collect::<Vec<_>>());
    let from_json_args = fit_args(&json_table);
    let from_json = loglin_ok(&from_json_args.iter().map(String::as_str).collect::<Vec<_>>());

    assert_eq!(from_records.stdout, from_csv.stdout);
    assert_eq!(from_csv.stdout, from_json.stdout);
}

#[test]
fn empty_input_warns_and_writes_a_zero_table() {
    let dir = TempDir::new().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(
        &empty,
        "確定病名,個案研判日,縣市,鄉鎮,性別,是否為境外移入,年齡層,確定病例數\n",
    )
    .unwrap();
    let run = loglin_ok(&[
        "ingest",
        "--input",
        empty.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(run.stdout.contains("total cases: 0"));
    assert!(run.stderr.contains("all zeros"));
    let csv = std::fs::read_to_string(dir.path().join("table-a7.csv")).unwrap();
    let table = ContingencyTable::from_csv_str(&csv).unwrap();
    assert_eq!(table.n_cells(), 42);
    assert_eq!(table.total(), 0);
}

#[test]
fn malformed_rows_fail_only_in_strict_mode() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(
        &bad,
        "確定病名,個案研判日,縣市,鄉鎮,性別,是否為境外移入,年齡層,確定病例數\n\
         嚴重特殊傳染性肺炎,2021/05/20,台北市,萬華區,女,否,25-29,2\n\
         嚴重特殊傳染性肺炎,someday,台北市,萬華區,男,否,30-34,1\n",
    )
    .unwrap();

    let out = dir.path().to_str().unwrap();
    let lenient = loglin_ok(&["ingest", "--input", bad.to_str().unwrap(), "--out-dir", out]);
    assert!(lenient.stdout.contains("total cases: 2"));
    assert!(lenient.stderr.contains("line 3"), "stderr: {}", lenient.stderr);
    assert!(lenient.stderr.contains("row skipped"));

    let strict = loglin(&["ingest", "--input", bad.to_str().unwrap(), "--strict"]);
    assert!(!strict.success);
    assert!(strict.stderr.contains("line 3"), "stderr: {}", strict.stderr);
}

#[test]
fn unmapped_labels_exit_nonzero() {
    let dir = TempDir::new().unwrap();
    let odd = dir.path().join("odd.csv");
    std::fs::write(
        &odd,
        "確定病名,個案研判日,縣市,鄉鎮,性別,是否為境外移入,年齡層,確定病例數\n\
         嚴重特殊傳染性肺炎,2021/05/20,火星市,第一區,女,否,25-29,2\n",
    )
    .unwrap();
    let run = loglin(&["ingest", "--input", odd.to_str().unwrap()]);
    assert!(!run.success);
    assert!(run.stderr.contains("火星市"), "stderr: {}", run.stderr);
}

#[test]
fn missing_input_exits_nonzero() {
    let run = loglin(&["select"]);
    assert!(!run.success);
    assert!(run.stderr.contains("--input"), "stderr: {}", run.stderr);
}

#[test]
fn flags_override_the_config_file() {
    // config says A7; the flag forces the twelve-region grouping
    let dir = TempDir::new().unwrap();
    let run = loglin_ok(&[
        "ingest",
        "--config",
        CONFIG,
        "--input",
        FIXTURE,
        "--scheme",
        "B12",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(run.stdout.contains("新竹縣"));
    assert!(!run.stdout.contains("桃竹苗"));
}

#[test]
fn config_can_come_from_the_environment() {
    let dir = TempDir::new().unwrap();
    let output = Command::new(env!("CARGO_BIN_EXE_loglin"))
        .args(["ingest", "--input", FIXTURE, "--out-dir", dir.path().to_str().unwrap()])
        .env("LOGLIN_CONFIG", CONFIG)
        .output()
        .expect("binary runs");
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("total cases: 11290"));
}

/// The fitted means emitted with full precision re-load bit-for-bit.
#[test]
fn full_precision_fit_output_round_trips() {
    let dir = TempDir::new().unwrap();
    loglin_ok(&[
        "report",
        "--config",
        CONFIG,
        "--input",
        FIXTURE,
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    let full = std::fs::read_to_string(dir.path().join("fit-best-full.json")).unwrap();
    let doc: serde_json::Value = serde_json::from_str(&full).unwrap();
    let means = RealTable::from_json(&doc["fitted_means"].to_string()).unwrap();
    let total: f64 = means.cells().iter().sum();
    assert!((total - 11290.0).abs() < 1e-6);
}
