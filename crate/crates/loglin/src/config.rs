//! Run configuration: JSON config file, CLI overrides, and the resolved
//! settings shared by all subcommands.
//!
//! Precedence is CLI flag over config file over built-in default. The
//! config file path comes from `--config` or the `LOGLIN_CONFIG`
//! environment variable.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::ingest::{AgeScheme, ColumnConfig, RegionScheme};
use crate::report::Format;

/// Environment variable naming the default config file.
pub const CONFIG_ENV: &str = "LOGLIN_CONFIG";

/// A user-defined region scheme in the config file.
#[derive(Debug, Clone, Deserialize)]
pub struct RegionSchemeConfig {
    pub name: String,
    /// Region labels in factor-level order.
    pub regions: Vec<String>,
    /// County/city label → region label.
    pub mapping: BTreeMap<String, String>,
}

/// Raw config-file contents; everything is optional so the file only
/// needs to mention what it changes.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub input: Vec<PathBuf>,
    pub from: Option<String>,
    pub to: Option<String>,
    pub exclude_imported: Option<bool>,
    pub scheme: Option<String>,
    pub columns: Option<ColumnConfig>,
    /// Source age band → analysis group overrides.
    pub age_groups: BTreeMap<String, String>,
    /// Factor → baseline level.
    pub baselines: BTreeMap<String, String>,
    pub model: Option<String>,
    pub format: Option<String>,
    pub out_dir: Option<PathBuf>,
    pub strict: Option<bool>,
    /// Custom region scheme; overrides `scheme` when present.
    pub region_scheme: Option<RegionSchemeConfig>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        serde_json::from_str(&text).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

/// CLI-level overrides, each `None`/empty when the flag was not given.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub inputs: Vec<PathBuf>,
    pub from: Option<String>,
    pub to: Option<String>,
    /// `Some(true)` when `--exclude-imported` was passed.
    pub exclude_imported: Option<bool>,
    pub scheme: Option<String>,
    pub baselines: Vec<(String, String)>,
    pub model: Option<String>,
    pub format: Option<String>,
    pub out_dir: Option<PathBuf>,
    pub strict: Option<bool>,
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub inputs: Vec<PathBuf>,
    pub window: Option<(NaiveDate, NaiveDate)>,
    pub exclude_imported: bool,
    pub regions: RegionScheme,
    pub columns: ColumnConfig,
    pub ages: AgeScheme,
    pub baselines: BTreeMap<String, String>,
    pub model: Option<String>,
    pub format: Format,
    /// Where to write emitted files; commands that only print leave the
    /// filesystem alone when this is unset.
    pub out_dir: Option<PathBuf>,
    pub strict: bool,
}

fn parse_date(text: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(text, "%Y-%m-%d")
        .or_else(|_| NaiveDate::parse_from_str(text, "%Y/%m/%d"))
        .map_err(|_| Error::InvalidValue {
            what: "date",
            value: text.to_string(),
        })
}

fn scheme_by_name(name: &str) -> Result<RegionScheme> {
    match name.to_ascii_uppercase().as_str() {
        "A7" => Ok(RegionScheme::a7()),
        "B12" => Ok(RegionScheme::b12()),
        _ => Err(Error::InvalidValue {
            what: "scheme",
            value: name.to_string(),
        }),
    }
}

impl RunConfig {
    /// Applies precedence (flags over file over defaults) and validates
    /// dates, scheme names, and the age/region mappings.
    pub fn resolve(file: FileConfig, cli: Overrides) -> Result<Self> {
        let inputs = if cli.inputs.is_empty() {
            file.input.clone()
        } else {
            cli.inputs
        };

        let from = cli.from.or(file.from.clone());
        let to = cli.to.or(file.to.clone());
        let window = match (from, to) {
            (None, None) => None,
            (Some(f), Some(t)) => {
                let (f, t) = (parse_date(&f)?, parse_date(&t)?);
                if f > t {
                    return Err(Error::InvalidWindow {
                        from: f.to_string(),
                        to: t.to_string(),
                    });
                }
                Some((f, t))
            }
            (f, t) => {
                return Err(Error::InvalidValue {
                    what: "date window",
                    value: format!("from={:?} to={:?} (give both or neither)", f, t),
                })
            }
        };

        let regions = match (&cli.scheme, &file.region_scheme) {
            // an explicit --scheme flag beats a config-file custom scheme
            (Some(name), _) => scheme_by_name(name)?,
            (None, Some(custom)) => RegionScheme::custom(
                custom.name.clone(),
                custom.regions.clone(),
                custom.mapping.clone(),
            )?,
            (None, None) => scheme_by_name(file.scheme.as_deref().unwrap_or("A7"))?,
        };

        let mut baselines = file.baselines.clone();
        for (factor, level) in cli.baselines {
            baselines.insert(factor, level);
        }

        let format = match cli.format.or(file.format.clone()) {
            Some(text) => text.parse()?,
            None => Format::Markdown,
        };

        Ok(Self {
            inputs,
            window,
            exclude_imported: cli
                .exclude_imported
                .or(file.exclude_imported)
                .unwrap_or(false),
            regions,
            columns: file.columns.clone().unwrap_or_default(),
            ages: AgeScheme::new(file.age_groups.clone())?,
            baselines,
            model: cli.model.or(file.model.clone()),
            format,
            out_dir: cli.out_dir.or(file.out_dir.clone()),
            strict: cli.strict.or(file.strict).unwrap_or(false),
        })
    }
}

/// Parses a `factor=level` pair (used by `--baseline` and `--within`).
pub fn parse_assignment(text: &str) -> Result<(String, String)> {
    match text.split_once('=') {
        Some((k, v)) if !k.trim().is_empty() && !v.trim().is_empty() => {
            Ok((k.trim().to_string(), v.trim().to_string()))
        }
        _ => Err(Error::InvalidValue {
            what: "factor=level assignment",
            value: text.to_string(),
        }),
    }
}
