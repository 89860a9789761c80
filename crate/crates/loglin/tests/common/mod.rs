//! Helpers shared by the integration suites: loading the bundled case
//! records and building the study's two aggregated tables.

// Each integration target compiles this module separately, so not every
// helper is used by every target.
#![allow(dead_code)]

use chrono::NaiveDate;
use loglin::ingest::{
    aggregate, filter_cases, parse_csv, AgeScheme, CaseRecord, ColumnConfig, RegionScheme,
};
use loglin::{Baselines, ContingencyTable, ModelSpec};

/// Bundled surveillance extract (one row per reporting stratum and day).
pub const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/records.csv");

/// Config file matching the study pipeline, for CLI runs.
pub const CONFIG: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/config.json");

/// Canonical string of the all-pairwise-interactions model.
pub const THREE_PAIRWISE: &str = "年齡+性別+縣市+年齡*性別+年齡*縣市+性別*縣市";

/// Records within the study window (2020-01-22 ..= 2021-06-11), local
/// cases only.
pub fn study_records() -> Vec<CaseRecord> {
    let file = std::fs::File::open(FIXTURE).expect("fixture CSV is bundled with the tests");
    let outcome = parse_csv(file, &ColumnConfig::default()).expect("fixture parses");
    let records = outcome.into_strict().expect("fixture has no malformed rows");
    let from = NaiveDate::from_ymd_opt(2020, 1, 22).unwrap();
    let to = NaiveDate::from_ymd_opt(2021, 6, 11).unwrap();
    filter_cases(records, from, to, true).expect("window is valid")
}

/// 性別 × 年齡 × 縣市 under the seven-region grouping.
pub fn seven_region_table() -> ContingencyTable {
    aggregate(&study_records(), &RegionScheme::a7(), &AgeScheme::default())
        .expect("fixture aggregates cleanly")
}

/// 性別 × 年齡 × 縣市 under the twelve-region grouping.
pub fn twelve_region_table() -> ContingencyTable {
    aggregate(&study_records(), &RegionScheme::b12(), &AgeScheme::default())
        .expect("fixture aggregates cleanly")
}

/// The study's treatment-coding baselines.
pub fn study_baselines() -> Baselines {
    Baselines::new()
        .with("性別", "男性")
        .with("年齡", "0-29")
        .with("縣市", "宜花東")
}

/// The nine-model lattice in its reporting order.
pub fn study_lattice() -> Vec<ModelSpec> {
    loglin::enumerate_lattice(&["年齡", "性別", "縣市"]).expect("three factors")
}

/// The all-pairwise model (the BIC winner on both groupings).
pub fn three_pairwise() -> ModelSpec {
    THREE_PAIRWISE.parse().expect("canonical spec parses")
}
