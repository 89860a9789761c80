//! Command-line interface: argument parsing and the subcommand drivers.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::chart::standard_charts;
use crate::config::{parse_assignment, FileConfig, Overrides, RunConfig, CONFIG_ENV};
use crate::contingency::ContingencyTable;
use crate::design::{build_design, enumerate_lattice, Baselines, ModelSpec};
use crate::error::{Error, Result};
use crate::inference::{contrast_by_labels, select, wald_tests, Contrast};
use crate::ingest::{aggregate, filter_cases, parse_csv, CaseRecord};
use crate::irls::{fit, FitOptions, FitResult};
use crate::report::{render_contrast, render_selection, render_table_summary, render_wald_tests};

/// Log-linear analysis of categorical case-count data: ingest CSV case
/// records, aggregate them into contingency tables, fit and compare
/// hierarchical Poisson models, and report the results.
#[derive(Debug, Parser)]
#[command(name = "loglin", version)]
pub struct Cli {
    /// JSON config file; falls back to $LOGLIN_CONFIG when unset.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Raw case-record CSV file (repeatable).
    #[arg(long = "input", value_name = "CSV")]
    inputs: Vec<PathBuf>,
    /// Previously emitted contingency table (.csv or .json) to analyze
    /// instead of raw records.
    #[arg(long, value_name = "TABLE")]
    table: Option<PathBuf>,
    /// Region scheme: A7 (seven regions) or B12 (twelve).
    #[arg(long)]
    scheme: Option<String>,
    /// Start of the date window (YYYY-MM-DD), inclusive.
    #[arg(long, value_name = "DATE")]
    from: Option<String>,
    /// End of the date window (YYYY-MM-DD), inclusive.
    #[arg(long, value_name = "DATE")]
    to: Option<String>,
    /// Drop imported cases before aggregating.
    #[arg(long)]
    exclude_imported: bool,
    /// Baseline level for treatment coding, as factor=level (repeatable).
    #[arg(long = "baseline", value_name = "FACTOR=LEVEL")]
    baselines: Vec<String>,
    /// Model specification, e.g. "年齡+性別+縣市+年齡*性別".
    #[arg(long, value_name = "SPEC")]
    model: Option<String>,
    /// Output format: markdown, csv, or json.
    #[arg(long)]
    format: Option<String>,
    /// Directory for emitted files.
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Fail on any malformed input row instead of skipping it.
    #[arg(long)]
    strict: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and filter case records, write the aggregated table, and
    /// print its margins.
    Ingest(CommonArgs),
    /// Fit the nine-model lattice and rank the models by BIC.
    Select(CommonArgs),
    /// Fit one model and print its coefficient table.
    Fit(CommonArgs),
    /// Test the difference between two levels' coefficients.
    Contrast {
        #[command(flatten)]
        common: CommonArgs,
        /// Factor whose levels are compared.
        #[arg(long)]
        factor: String,
        /// First level (weight +1).
        #[arg(long)]
        level_a: String,
        /// Second level (weight −1).
        #[arg(long)]
        level_b: String,
        /// Compare within an interaction stratum, as factor=level.
        #[arg(long, value_name = "FACTOR=LEVEL")]
        within: Option<String>,
    },
    /// Write the standard SVG bar charts for the aggregated table.
    Charts(CommonArgs),
    /// Model selection, best-model fit, and charts in one pass.
    Report(CommonArgs),
}

impl Command {
    fn common(&self) -> &CommonArgs {
        match self {
            Command::Ingest(c)
            | Command::Select(c)
            | Command::Fit(c)
            | Command::Charts(c)
            | Command::Report(c) => c,
            Command::Contrast { common, .. } => common,
        }
    }
}

/// Entry point for the binary: parse `std::env::args` and run.
pub fn run_from_args() -> Result<()> {
    run(Cli::parse())
}

/// Runs one parsed invocation.
pub fn run(cli: Cli) -> Result<()> {
    let file_cfg = match cli
        .config
        .clone()
        .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from))
    {
        Some(path) => FileConfig::load(&path)?,
        None => FileConfig::default(),
    };
    let common = cli.command.common();
    let overrides = Overrides {
        inputs: common.inputs.clone(),
        from: common.from.clone(),
        to: common.to.clone(),
        exclude_imported: common.exclude_imported.then_some(true),
        scheme: common.scheme.clone(),
        baselines: common
            .baselines
            .iter()
            .map(|kv| parse_assignment(kv))
            .collect::<Result<_>>()?,
        model: common.model.clone(),
        format: common.format.clone(),
        out_dir: common.out_dir.clone(),
        strict: common.strict.then_some(true),
    };
    let cfg = RunConfig::resolve(file_cfg, overrides)?;
    let table = load_table(common.table.as_deref(), &cfg)?;
    let baselines = cfg
        .baselines
        .iter()
        .fold(Baselines::new(), |b, (f, l)| b.with(f.clone(), l.clone()));

    match &cli.command {
        Command::Ingest(_) => cmd_ingest(&cfg, &table),
        Command::Select(_) => cmd_select(&cfg, &table, &baselines),
        Command::Fit(_) => cmd_fit(&cfg, &table, &baselines),
        Command::Contrast {
            factor,
            level_a,
            level_b,
            within,
            ..
        } => {
            let within = within.as_deref().map(parse_assignment).transpose()?;
            cmd_contrast(&cfg, &table, &baselines, factor, level_a, level_b, within)
        }
        Command::Charts(_) => cmd_charts(&cfg, &table),
        Command::Report(_) => cmd_report(&cfg, &table, &baselines),
    }
}

/// Reads an already-aggregated table, or runs the full ingest pipeline
/// over the configured record files.
fn load_table(table_path: Option<&Path>, cfg: &RunConfig) -> Result<ContingencyTable> {
    if let Some(path) = table_path {
        let text = fs::read_to_string(path)?;
        return if path.extension().is_some_and(|e| e == "json") {
            ContingencyTable::from_json(&text)
        } else {
            ContingencyTable::from_csv_str(&text)
        };
    }
    if cfg.inputs.is_empty() {
        return Err(Error::NoInput);
    }
    let mut records: Vec<CaseRecord> = Vec::new();
    for path in &cfg.inputs {
        let file = fs::File::open(path)?;
        let outcome = parse_csv(file, &cfg.columns)?;
        if cfg.strict {
            records.extend(outcome.into_strict()?);
        } else {
            for problem in &outcome.problems {
                eprintln!(
                    "warning: {}: line {}: {} (row skipped)",
                    path.display(),
                    problem.line,
                    problem.message
                );
            }
            records.extend(outcome.records);
        }
    }
    if let Some((from, to)) = cfg.window {
        records = filter_cases(records, from, to, cfg.exclude_imported)?;
    } else if cfg.exclude_imported {
        records.retain(|r| !r.imported);
    }
    let table = aggregate(&records, &cfg.regions, &cfg.ages)?;
    if table.total() == 0 {
        eprintln!("warning: no cases remain after filtering; the table is all zeros");
    }
    Ok(table)
}

fn out_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn scheme_stem(cfg: &RunConfig) -> String {
    cfg.regions.name().to_ascii_lowercase().replace([' ', '/'], "-")
}

fn cmd_ingest(cfg: &RunConfig, table: &ContingencyTable) -> Result<()> {
    let dir = out_dir(cfg);
    let stem = scheme_stem(cfg);
    write_file(&dir, &format!("table-{stem}.csv"), &table.to_csv_string()?)?;
    write_file(&dir, &format!("table-{stem}.json"), &table.to_json()?)?;
    print!("{}", render_table_summary(table));
    Ok(())
}

/// The lattice's factor-name order: the conventional (年齡, 性別, 縣市)
/// when those are the table's factors, otherwise table order.
fn lattice_names(table: &ContingencyTable) -> Result<Vec<String>> {
    let names: Vec<String> = table
        .factors()
        .iter()
        .map(|f| f.name().to_string())
        .collect();
    if names.len() != 3 {
        return Err(Error::LatticeArity(names.len()));
    }
    let conventional = ["年齡", "性別", "縣市"];
    if conventional.iter().all(|n| names.iter().any(|m| m == n)) {
        Ok(conventional.iter().map(|s| s.to_string()).collect())
    } else {
        Ok(names)
    }
}

fn run_selection(
    table: &ContingencyTable,
    baselines: &Baselines,
) -> Result<crate::inference::SelectionReport> {
    let names = lattice_names(table)?;
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let lattice = enumerate_lattice(&name_refs)?;
    Ok(select(table, &lattice, baselines, &FitOptions::default()))
}

fn cmd_select(cfg: &RunConfig, table: &ContingencyTable, baselines: &Baselines) -> Result<()> {
    let report = run_selection(table, baselines)?;
    let rendered = render_selection(&report, cfg.format)?;
    print!("{rendered}");
    if let Some(dir) = &cfg.out_dir {
        write_file(dir, &format!("selection.{}", cfg.format.extension()), &rendered)?;
    }
    Ok(())
}

fn fit_model(
    table: &ContingencyTable,
    baselines: &Baselines,
    spec_text: &str,
) -> Result<FitResult> {
    let spec: ModelSpec = spec_text.parse()?;
    let design = build_design(table, &spec, baselines)?;
    fit(table, &design, &FitOptions::default())
}

fn require_model(cfg: &RunConfig) -> Result<&str> {
    cfg.model.as_deref().ok_or(Error::InvalidValue {
        what: "model",
        value: "missing (pass --model or set `model` in the config)".to_string(),
    })
}

fn cmd_fit(cfg: &RunConfig, table: &ContingencyTable, baselines: &Baselines) -> Result<()> {
    let result = fit_model(table, baselines, require_model(cfg)?)?;
    let tests = wald_tests(&result)?;
    let rendered = render_wald_tests(&tests, cfg.format)?;
    print!("{rendered}");
    if let Some(dir) = &cfg.out_dir {
        write_file(dir, &format!("fit.{}", cfg.format.extension()), &rendered)?;
        write_file(dir, "fit-full.json", &result.to_json()?)?;
    }
    Ok(())
}

/// Finds the fitted coefficient for `factor[level]`, optionally crossed
/// with a `within` stratum. Returns `None` when the requested level is a
/// baseline (its coefficient is identically zero).
fn term_label(
    table: &ContingencyTable,
    result: &FitResult,
    baselines: &Baselines,
    factor: &str,
    level: &str,
    within: Option<&(String, String)>,
) -> Result<Option<String>> {
    let axis = table.axis(factor)?;
    let def = &table.factors()[axis];
    if def.level_index(level).is_none() {
        return Err(Error::UnknownLevel {
            factor: factor.to_string(),
            level: level.to_string(),
        });
    }
    let baseline = &def.levels()[baselines.index_in(def)?];
    // a stratum at its baseline level contributes no interaction dummy,
    // so the comparison reduces to the main effect
    let stratum = match within {
        Some((wf, wl)) => {
            let w_axis = table.axis(wf)?;
            let w_def = &table.factors()[w_axis];
            if w_def.level_index(wl).is_none() {
                return Err(Error::UnknownLevel {
                    factor: wf.clone(),
                    level: wl.clone(),
                });
            }
            let w_baseline = &w_def.levels()[baselines.index_in(w_def)?];
            (wl != w_baseline).then(|| format!("{wf}[{wl}]"))
        }
        None => None,
    };
    if level == baseline {
        return Ok(None);
    }
    let main = format!("{factor}[{level}]");
    let wanted = match stratum {
        None => main.clone(),
        Some(stratum_label) => {
            let found = result.labels().iter().find(|l| {
                let parts: Vec<&str> = l.split('*').collect();
                parts.len() == 2
                    && ((parts[0] == main && parts[1] == stratum_label)
                        || (parts[0] == stratum_label && parts[1] == main))
            });
            return match found {
                Some(label) => Ok(Some(label.clone())),
                None => Err(Error::UnknownCoefficient(format!("{main}*{stratum_label}"))),
            };
        }
    };
    if result.labels().iter().any(|l| l == &wanted) {
        Ok(Some(wanted))
    } else {
        Err(Error::UnknownCoefficient(wanted))
    }
}

fn build_level_contrast(
    table: &ContingencyTable,
    result: &FitResult,
    baselines: &Baselines,
    factor: &str,
    level_a: &str,
    level_b: &str,
    within: Option<&(String, String)>,
) -> Result<Contrast> {
    let mut entries: Vec<(String, f64)> = Vec::new();
    if let Some(label) = term_label(table, result, baselines, factor, level_a, within)? {
        entries.push((label, 1.0));
    }
    if let Some(label) = term_label(table, result, baselines, factor, level_b, within)? {
        entries.push((label, -1.0));
    }
    let refs: Vec<(&str, f64)> = entries.iter().map(|(l, w)| (l.as_str(), *w)).collect();
    contrast_by_labels(result, &refs)
}

#[allow(clippy::too_many_arguments)]
fn cmd_contrast(
    cfg: &RunConfig,
    table: &ContingencyTable,
    baselines: &Baselines,
    factor: &str,
    level_a: &str,
    level_b: &str,
    within: Option<(String, String)>,
) -> Result<()> {
    let result = fit_model(table, baselines, require_model(cfg)?)?;
    let c = build_level_contrast(
        table,
        &result,
        baselines,
        factor,
        level_a,
        level_b,
        within.as_ref(),
    )?;
    let description = match &within {
        Some((wf, wl)) => format!("{factor}[{level_a}] - {factor}[{level_b}] ({wf}={wl})"),
        None => format!("{factor}[{level_a}] - {factor}[{level_b}]"),
    };
    let rendered = render_contrast(&description, &c, cfg.format)?;
    print!("{rendered}");
    if let Some(dir) = &cfg.out_dir {
        write_file(dir, &format!("contrast.{}", cfg.format.extension()), &rendered)?;
    }
    Ok(())
}

fn cmd_charts(cfg: &RunConfig, table: &ContingencyTable) -> Result<()> {
    let dir = out_dir(cfg);
    let stem = scheme_stem(cfg);
    for (name, chart) in standard_charts(table)? {
        write_file(&dir, &format!("{stem}-{name}.svg"), &chart.to_svg())?;
    }
    Ok(())
}

fn cmd_report(cfg: &RunConfig, table: &ContingencyTable, baselines: &Baselines) -> Result<()> {
    let report = run_selection(table, baselines)?;
    let rendered_selection = render_selection(&report, cfg.format)?;
    print!("{rendered_selection}");
    let best = report
        .best
        .clone()
        .ok_or_else(|| Error::InvalidValue {
            what: "selection",
            value: "no model could be fitted".to_string(),
        })?;
    let result = fit_model(table, baselines, &best)?;
    let tests = wald_tests(&result)?;
    let rendered_fit = render_wald_tests(&tests, cfg.format)?;
    println!();
    print!("{rendered_fit}");
    let dir = out_dir(cfg);
    write_file(&dir, &format!("selection.{}", cfg.format.extension()), &rendered_selection)?;
    write_file(&dir, &format!("fit-best.{}", cfg.format.extension()), &rendered_fit)?;
    write_file(&dir, "fit-best-full.json", &result.to_json()?)?;
    cmd_charts(cfg, table)
}
