//! Rendering of tables, fit summaries, selection reports, and contrasts
//! as markdown (4-decimal display), CSV, or JSON (full precision).

use std::str::FromStr;

use crate::contingency::ContingencyTable;
use crate::error::{Error, Result};
use crate::inference::{Contrast, SelectionReport, WaldTest};

/// Output format for rendered reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Markdown,
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        match text.to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(Self::Markdown),
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(Error::InvalidValue {
                what: "format",
                value: text.to_string(),
            }),
        }
    }
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Markdown => "md",
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

/// Fixed 4-decimal rendering used in displayed tables.
pub fn format_fixed(value: f64) -> String {
    format!("{value:.4}")
}

/// p-value rendering: values below 1e-4 print as the `<.0001` sentinel.
pub fn format_p(p: f64) -> String {
    if p < 1e-4 {
        "<.0001".to_string()
    } else {
        format!("{p:.4}")
    }
}

fn markdown_row(cells: &[String]) -> String {
    format!("| {} |\n", cells.join(" | "))
}

fn markdown_table(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut out = markdown_row(&header.iter().map(|s| s.to_string()).collect::<Vec<_>>());
    out.push_str(&markdown_row(
        &header.iter().map(|_| "---".to_string()).collect::<Vec<_>>(),
    ));
    for row in rows {
        out.push_str(&markdown_row(&row));
    }
    out
}

fn csv_table(header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::InvalidValue {
        what: "csv buffer",
        value: e.to_string(),
    })?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

/// Ingest summary: total count and per-factor margins with shares.
pub fn render_table_summary(table: &ContingencyTable) -> String {
    let total = table.total();
    let mut out = format!("total cases: {total}\n");
    for factor in table.factors() {
        let margin = table
            .margin(&[factor.name()])
            .expect("factor names come from the table itself");
        out.push('\n');
        out.push_str(&markdown_table(
            &[factor.name(), "count", "share"],
            factor
                .levels()
                .iter()
                .zip(margin.cells())
                .map(|(level, &count)| {
                    let share = if total > 0 {
                        100.0 * count as f64 / total as f64
                    } else {
                        0.0
                    };
                    vec![level.clone(), count.to_string(), format!("{share:.1}%")]
                })
                .collect(),
        ));
    }
    out
}

/// Lattice selection report in the requested format. Markdown mirrors
/// the BIC/deviance/df comparison-table layout.
pub fn render_selection(report: &SelectionReport, format: Format) -> Result<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(report)?),
        Format::Markdown => {
            let rows = report
                .rows
                .iter()
                .map(|r| match &r.error {
                    None => vec![
                        r.spec.clone(),
                        r.bic.map(format_fixed).unwrap_or_default(),
                        r.deviance.map(format_fixed).unwrap_or_default(),
                        r.residual_df.map(|d| d.to_string()).unwrap_or_default(),
                    ],
                    Some(e) => vec![r.spec.clone(), format!("error: {e}"), String::new(), String::new()],
                })
                .collect();
            let mut out = markdown_table(&["model", "BIC", "deviance", "df"], rows);
            if let Some(best) = &report.best {
                out.push_str(&format!("\nbest model by BIC: {best}\n"));
            }
            Ok(out)
        }
        Format::Csv => csv_table(
            &["model", "n_params", "deviance", "residual_df", "bic", "error"],
            report
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.spec.clone(),
                        r.n_params.map(|v| v.to_string()).unwrap_or_default(),
                        r.deviance.map(|v| v.to_string()).unwrap_or_default(),
                        r.residual_df.map(|v| v.to_string()).unwrap_or_default(),
                        r.bic.map(|v| v.to_string()).unwrap_or_default(),
                        r.error.clone().unwrap_or_default(),
                    ]
                })
                .collect(),
        ),
    }
}

/// Coefficient table for a fitted model. Markdown uses the 4-decimal /
/// `<.0001` display; CSV and JSON keep full precision.
pub fn render_wald_tests(tests: &[WaldTest], format: Format) -> Result<String> {
    match format {
        Format::Json => Ok(serde_json::to_string_pretty(tests)?),
        Format::Markdown => Ok(markdown_table(
            &["coefficient", "estimate", "std error", "p"],
            tests
                .iter()
                .map(|t| {
                    vec![
                        t.label.clone(),
                        format_fixed(t.estimate),
                        format_fixed(t.std_error),
                        format_p(t.p_value),
                    ]
                })
                .collect(),
        )),
        Format::Csv => csv_table(
            &["coefficient", "estimate", "std_error", "z", "p_value"],
            tests
                .iter()
                .map(|t| {
                    vec![
                        t.label.clone(),
                        t.estimate.to_string(),
                        t.std_error.to_string(),
                        t.z.to_string(),
                        t.p_value.to_string(),
                    ]
                })
                .collect(),
        ),
    }
}

/// A single contrast with a caller-supplied description line.
pub fn render_contrast(description: &str, c: &Contrast, format: Format) -> Result<String> {
    match format {
        Format::Json => {
            let doc = serde_json::json!({
                "contrast": description,
                "estimate": c.estimate,
                "std_error": c.std_error,
                "z": c.z,
                "p_value": c.p_value,
            });
            Ok(serde_json::to_string_pretty(&doc)?)
        }
        Format::Markdown => Ok(markdown_table(
            &["contrast", "estimate", "std error", "p"],
            vec![vec![
                description.to_string(),
                format_fixed(c.estimate),
                format_fixed(c.std_error),
                format_p(c.p_value),
            ]],
        )),
        Format::Csv => csv_table(
            &["contrast", "estimate", "std_error", "z", "p_value"],
            vec![vec![
                description.to_string(),
                c.estimate.to_string(),
                c.std_error.to_string(),
                c.z.to_string(),
                c.p_value.to_string(),
            ]],
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contingency::{Factor, Table};

    #[test]
    fn p_value_sentinel_kicks_in_below_1e4() {
        assert_eq!(format_p(0.000099), "<.0001");
        assert_eq!(format_p(0.0001), "0.0001");
        assert_eq!(format_p(0.3544), "0.3544");
        assert_eq!(format_p(1.0), "1.0000");
    }

    #[test]
    fn fixed_rendering_rounds_to_four_decimals() {
        assert_eq!(format_fixed(2.84834), "2.8483");
        assert_eq!(format_fixed(-0.89901), "-0.8990");
        assert_eq!(format_fixed(0.0), "0.0000");
    }

    #[test]
    fn format_parsing_accepts_aliases() {
        assert_eq!("md".parse::<Format>().unwrap(), Format::Markdown);
        assert_eq!("CSV".parse::<Format>().unwrap(), Format::Csv);
        assert_eq!("json".parse::<Format>().unwrap(), Format::Json);
        assert!("yaml".parse::<Format>().is_err());
    }

    #[test]
    fn summary_lists_margins_with_shares() {
        let t = Table::from_cells(
            vec![
                Factor::new("性別", ["女性", "男性"]).unwrap(),
                Factor::new("年齡", ["0-29", "30-59"]).unwrap(),
            ],
            vec![10u64, 30, 20, 40],
        )
        .unwrap();
        let text = render_table_summary(&t);
        assert!(text.contains("total cases: 100"));
        assert!(text.contains("| 女性 | 40 | 40.0% |"));
        assert!(text.contains("| 30-59 | 70 | 70.0% |"));
    }

    #[test]
    fn wald_markdown_uses_display_conventions() {
        let tests = vec![WaldTest {
            label: "年齡[30-59]".to_string(),
            estimate: 0.64114,
            std_error: 0.05551,
            z: 11.55,
            p_value: 3e-31,
        }];
        let md = render_wald_tests(&tests, Format::Markdown).unwrap();
        assert!(md.contains("| 年齡[30-59] | 0.6411 | 0.0555 | <.0001 |"));
        let csv = render_wald_tests(&tests, Format::Csv).unwrap();
        assert!(csv.contains("0.64114")); // full precision
        let json = render_wald_tests(&tests, Format::Json).unwrap();
        assert!(json.contains("\"estimate\": 0.64114"));
    }
}
