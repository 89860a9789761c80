//! Parsing and aggregation of surveillance case-record CSV files.
//!
//! Raw exports carry one row per (date, township, gender, imported-status,
//! age-band) group with a case count. This module parses those rows,
//! filters them to a study window, drops imported cases on request, and
//! aggregates the remainder into a gender × age × region contingency
//! table under a configurable region scheme.

use std::collections::BTreeMap;
use std::io;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::contingency::{ContingencyTable, Factor, Table};
use crate::error::{Error, Result};

/// The three analysis age groups, in factor-level order.
pub const AGE_GROUPS: [&str; 3] = ["0-29", "30-59", "60+"];
/// Gender factor levels, in factor-level order.
pub const GENDERS: [&str; 2] = ["女性", "男性"];

/// One parsed case-record row, with gender already normalized to the
/// factor levels (女性/男性).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub date: NaiveDate,
    pub county: String,
    pub gender: String,
    pub age_band: String,
    pub imported: bool,
    pub count: u64,
}

/// Column names of the source CSV; defaults match the national
/// surveillance export (age/region/gender statistics by adjudication date).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnConfig {
    pub date: String,
    pub county: String,
    pub gender: String,
    pub imported: String,
    pub age_band: String,
    pub count: String,
}

impl Default for ColumnConfig {
    fn default() -> Self {
        Self {
            date: "個案研判日".to_string(),
            county: "縣市".to_string(),
            gender: "性別".to_string(),
            imported: "是否為境外移入".to_string(),
            age_band: "年齡層".to_string(),
            count: "確定病例數".to_string(),
        }
    }
}

/// A malformed data row, reported but not fatal unless strict mode is on.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseProblem {
    /// 1-based line number in the source file (header is line 1).
    pub line: u64,
    pub message: String,
}

/// Result of [`parse_csv`]: the good rows plus a report of the bad ones.
#[derive(Debug, Clone)]
pub struct ParseOutcome {
    pub records: Vec<CaseRecord>,
    pub problems: Vec<ParseProblem>,
}

impl ParseOutcome {
    /// Strict-mode view: any malformed row becomes an error summarizing
    /// how many rows failed and where the first failure was.
    pub fn into_strict(self) -> Result<Vec<CaseRecord>> {
        match self.problems.first() {
            None => Ok(self.records),
            Some(first) => Err(Error::StrictParse {
                count: self.problems.len(),
                line: first.line,
                message: first.message.clone(),
            }),
        }
    }
}

fn parse_date(text: &str) -> Option<NaiveDate> {
    let text = text.trim();
    NaiveDate::parse_from_str(text, "%Y/%m/%d")
        .or_else(|_| NaiveDate::parse_from_str(text, "%Y-%m-%d"))
        .ok()
}

fn parse_gender(text: &str) -> Option<&'static str> {
    match text.trim() {
        "女" | "女性" => Some(GENDERS[0]),
        "男" | "男性" => Some(GENDERS[1]),
        _ => None,
    }
}

fn parse_imported(text: &str) -> Option<bool> {
    match text.trim() {
        "是" => Some(true),
        "否" => Some(false),
        _ => None,
    }
}

/// Parses a case-record CSV. Structural faults (missing configured
/// columns) fail immediately; malformed data rows are collected with
/// their line numbers so non-strict callers can proceed with the rest.
pub fn parse_csv<R: io::Read>(reader: R, columns: &ColumnConfig) -> Result<ParseOutcome> {
    let mut r = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header = r.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let (ci_date, ci_county, ci_gender, ci_imported, ci_band, ci_count) = (
        col(&columns.date)?,
        col(&columns.county)?,
        col(&columns.gender)?,
        col(&columns.imported)?,
        col(&columns.age_band)?,
        col(&columns.count)?,
    );

    let mut records = Vec::new();
    let mut problems = Vec::new();
    for result in r.records() {
        let record = result?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let mut fault = |message: String| problems.push(ParseProblem { line, message });

        let date = match parse_date(field(ci_date)) {
            Some(d) => d,
            None => {
                fault(format!("unparseable date {:?}", field(ci_date)));
                continue;
            }
        };
        let gender = match parse_gender(field(ci_gender)) {
            Some(g) => g,
            None => {
                fault(format!("unknown gender label {:?}", field(ci_gender)));
                continue;
            }
        };
        let imported = match parse_imported(field(ci_imported)) {
            Some(b) => b,
            None => {
                fault(format!("unknown imported flag {:?}", field(ci_imported)));
                continue;
            }
        };
        let count: u64 = match field(ci_count).parse() {
            Ok(n) => n,
            Err(_) => {
                fault(format!("unparseable count {:?}", field(ci_count)));
                continue;
            }
        };
        records.push(CaseRecord {
            date,
            county: field(ci_county).to_string(),
            gender: gender.to_string(),
            age_band: field(ci_band).to_string(),
            imported,
            count,
        });
    }
    Ok(ParseOutcome { records, problems })
}

/// Keeps records dated within `[from, to]` inclusive, dropping imported
/// cases when `exclude_imported` is set.
pub fn filter_cases(
    records: Vec<CaseRecord>,
    from: NaiveDate,
    to: NaiveDate,
    exclude_imported: bool,
) -> Result<Vec<CaseRecord>> {
    if from > to {
        return Err(Error::InvalidWindow {
            from: from.to_string(),
            to: to.to_string(),
        });
    }
    Ok(records
        .into_iter()
        .filter(|r| r.date >= from && r.date <= to && !(exclude_imported && r.imported))
        .collect())
}

/// County → region grouping with a fixed region (factor-level) order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionScheme {
    name: String,
    regions: Vec<String>,
    mapping: BTreeMap<String, String>,
}

const NORTH_COUNTIES: [(&str, &str); 7] = [
    ("台北市", "北北基"),
    ("新北市", "北北基"),
    ("基隆市", "北北基"),
    ("桃園市", "桃竹苗"),
    ("新竹縣", "桃竹苗"),
    ("新竹市", "桃竹苗"),
    ("苗栗縣", "桃竹苗"),
];

const MERGED_COUNTIES: [(&str, &str); 15] = [
    ("台中市", "中彰投"),
    ("彰化縣", "中彰投"),
    ("南投縣", "中彰投"),
    ("雲林縣", "雲嘉南"),
    ("嘉義市", "雲嘉南"),
    ("嘉義縣", "雲嘉南"),
    ("台南市", "雲嘉南"),
    ("高雄市", "高屏"),
    ("屏東縣", "高屏"),
    ("宜蘭縣", "宜花東"),
    ("花蓮縣", "宜花東"),
    ("台東縣", "宜花東"),
    ("澎湖縣", "離島"),
    ("金門縣", "離島"),
    ("連江縣", "離島"),
];

/// Region order of the seven-region scheme.
pub const A7_REGIONS: [&str; 7] = [
    "北北基", "桃竹苗", "中彰投", "雲嘉南", "高屏", "宜花東", "離島",
];

/// Region order of the twelve-region scheme (northern counties kept
/// separate, the rest merged as in the seven-region scheme).
pub const B12_REGIONS: [&str; 12] = [
    "台北市", "新北市", "基隆市", "桃園市", "新竹縣", "新竹市", "苗栗縣",
    "中彰投", "雲嘉南", "高屏", "宜花東", "離島",
];

impl RegionScheme {
    /// Seven regions: the whole island grouped into standard areas.
    pub fn a7() -> Self {
        let mapping = NORTH_COUNTIES
            .iter()
            .chain(MERGED_COUNTIES.iter())
            .map(|&(c, r)| (c.to_string(), r.to_string()))
            .collect();
        Self {
            name: "A7".to_string(),
            regions: A7_REGIONS.iter().map(|s| s.to_string()).collect(),
            mapping,
        }
    }

    /// Twelve regions: the seven northern counties/cities stay separate.
    pub fn b12() -> Self {
        let mapping = NORTH_COUNTIES
            .iter()
            .map(|&(c, _)| (c.to_string(), c.to_string()))
            .chain(MERGED_COUNTIES.iter().map(|&(c, r)| (c.to_string(), r.to_string())))
            .collect();
        Self {
            name: "B12".to_string(),
            regions: B12_REGIONS.iter().map(|s| s.to_string()).collect(),
            mapping,
        }
    }

    /// A user-supplied scheme; every mapping target must be a declared
    /// region so the factor's level order stays explicit.
    pub fn custom(
        name: impl Into<String>,
        regions: Vec<String>,
        mapping: BTreeMap<String, String>,
    ) -> Result<Self> {
        for target in mapping.values() {
            if !regions.iter().any(|r| r == target) {
                return Err(Error::UnknownLevel {
                    factor: "縣市".to_string(),
                    level: target.clone(),
                });
            }
        }
        Ok(Self {
            name: name.into(),
            regions,
            mapping,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn regions(&self) -> &[String] {
        &self.regions
    }

    /// Maps a county/city label to its region. The 臺/台 spelling variants
    /// are treated as identical.
    pub fn map_county(&self, county: &str) -> Result<&str> {
        let county = county.trim();
        if let Some(region) = self.mapping.get(county) {
            return Ok(region);
        }
        let normalized = county.replace('臺', "台");
        self.mapping
            .get(&normalized)
            .map(String::as_str)
            .ok_or_else(|| Error::UnmappedCounty(county.to_string()))
    }

    /// Old-level → new-level pairs taking the twelve-region table onto the
    /// seven-region one (for `Table::collapse`).
    pub fn b12_to_a7_mapping() -> Vec<(String, String)> {
        B12_REGIONS
            .iter()
            .map(|&r| {
                let target = NORTH_COUNTIES
                    .iter()
                    .find(|&&(c, _)| c == r)
                    .map(|&(_, a)| a)
                    .unwrap_or(r);
                (r.to_string(), target.to_string())
            })
            .collect()
    }
}

/// Source age band → analysis age group. Bands not covered by explicit
/// overrides fall back to a numeric rule on the band's upper bound.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgeScheme {
    #[serde(default)]
    overrides: BTreeMap<String, String>,
}

impl AgeScheme {
    pub fn new(overrides: BTreeMap<String, String>) -> Result<Self> {
        for target in overrides.values() {
            if !AGE_GROUPS.contains(&target.as_str()) {
                return Err(Error::UnknownLevel {
                    factor: "年齡".to_string(),
                    level: target.clone(),
                });
            }
        }
        Ok(Self { overrides })
    }

    /// Maps one source band: explicit override first, then the rule
    /// (upper bound ≤ 29 → 0-29; 30–59 → 30-59; 60 up or open-ended → 60+).
    pub fn map_band(&self, band: &str) -> Result<&str> {
        let band = band.trim();
        if let Some(group) = self.overrides.get(band) {
            return Ok(group);
        }
        let upper: Option<u32> = if let Some(base) = band.strip_suffix('+') {
            // open-ended top band: only meaningful if it starts at 60+
            return if base.parse::<u32>().is_ok_and(|lo| lo >= 60) {
                Ok(AGE_GROUPS[2])
            } else {
                Err(Error::UnmappedAgeBand(band.to_string()))
            };
        } else if let Some((_, hi)) = band.split_once('-') {
            hi.parse().ok()
        } else {
            band.parse().ok()
        };
        match upper {
            Some(u) if u <= 29 => Ok(AGE_GROUPS[0]),
            Some(u) if u <= 59 => Ok(AGE_GROUPS[1]),
            Some(_) => Ok(AGE_GROUPS[2]),
            None => Err(Error::UnmappedAgeBand(band.to_string())),
        }
    }
}

/// Sums filtered records into a 性別 × 年齡 × 縣市 contingency table.
pub fn aggregate(
    records: &[CaseRecord],
    regions: &RegionScheme,
    ages: &AgeScheme,
) -> Result<ContingencyTable> {
    let factors = vec![
        Factor::new("性別", GENDERS)?,
        Factor::new("年齡", AGE_GROUPS)?,
        Factor::new("縣市", regions.regions().to_vec())?,
    ];
    let n_regions = regions.regions().len();
    let mut cells = vec![0u64; 2 * 3 * n_regions];
    for record in records {
        let g = GENDERS
            .iter()
            .position(|&g| g == record.gender)
            .ok_or_else(|| Error::UnknownGender(record.gender.clone()))?;
        let group = ages.map_band(&record.age_band)?;
        let a = AGE_GROUPS
            .iter()
            .position(|&b| b == group)
            .expect("age scheme targets are the three analysis groups");
        let region = regions.map_county(&record.county)?;
        let r = regions
            .regions()
            .iter()
            .position(|x| x == region)
            .expect("scheme regions contain every mapping target");
        cells[(g * 3 + a) * n_regions + r] += record.count;
    }
    Table::from_cells(factors, cells)
}
