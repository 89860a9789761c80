//! Static SVG grouped bar charts for contingency-table margins.
//!
//! Charts are generated as plain SVG text with no plotting dependency:
//! one group of bars per category (factor level), one bar per series.

use crate::contingency::ContingencyTable;
use crate::error::Result;

const PALETTE: [&str; 4] = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759"];

/// Data behind one chart: categories along the x-axis and one or more
/// named series of counts.
#[derive(Debug, Clone, PartialEq)]
pub struct BarChart {
    pub title: String,
    pub categories: Vec<String>,
    pub series: Vec<(String, Vec<u64>)>,
}

impl BarChart {
    /// Index of the category with the largest combined count.
    pub fn tallest_category(&self) -> Option<&str> {
        (0..self.categories.len())
            .max_by_key(|&i| self.series.iter().map(|(_, v)| v[i]).sum::<u64>())
            .map(|i| self.categories[i].as_str())
    }

    /// Renders the chart as a standalone SVG document.
    pub fn to_svg(&self) -> String {
        let n_cat = self.categories.len().max(1);
        let n_ser = self.series.len().max(1);
        let bar_w = 26.0_f64.min(180.0 / n_ser as f64);
        let group_w = bar_w * n_ser as f64 + 18.0;
        let plot_w = group_w * n_cat as f64;
        let plot_h = 300.0;
        let (left, top, bottom, right) = (64.0, 46.0, 64.0, 16.0);
        let width = left + plot_w + right;
        let height = top + plot_h + bottom;

        let max_value = self
            .series
            .iter()
            .flat_map(|(_, v)| v.iter().copied())
            .max()
            .unwrap_or(0);
        let y_max = nice_ceiling(max_value);
        let scale = plot_h / y_max as f64;

        let mut svg = String::new();
        svg.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" \
             font-family=\"sans-serif\" font-size=\"12\">\n"
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
            width / 2.0,
            escape(&self.title)
        ));

        // y axis with 5 gridlines and tick labels
        for tick in 0..=5 {
            let value = y_max as f64 * tick as f64 / 5.0;
            let y = top + plot_h - value * scale;
            svg.push_str(&format!(
                "  <line x1=\"{left:.1}\" y1=\"{y:.1}\" x2=\"{:.1}\" y2=\"{y:.1}\" stroke=\"#ddd\"/>\n",
                left + plot_w
            ));
            svg.push_str(&format!(
                "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{}</text>\n",
                left - 6.0,
                y + 4.0,
                value.round() as u64
            ));
        }

        // bars, grouped by category
        for (ci, category) in self.categories.iter().enumerate() {
            let group_x = left + ci as f64 * group_w + 9.0;
            for (si, (_, values)) in self.series.iter().enumerate() {
                let v = values.get(ci).copied().unwrap_or(0);
                let h = v as f64 * scale;
                let x = group_x + si as f64 * bar_w;
                let y = top + plot_h - h;
                svg.push_str(&format!(
                    "  <rect x=\"{x:.1}\" y=\"{y:.1}\" width=\"{:.1}\" height=\"{h:.1}\" fill=\"{}\"/>\n",
                    bar_w - 2.0,
                    PALETTE[si % PALETTE.len()]
                ));
            }
            svg.push_str(&format!(
                "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n",
                group_x + (group_w - 18.0) / 2.0,
                top + plot_h + 18.0,
                escape(category)
            ));
        }

        // axis line and legend (legend only when there are named series)
        svg.push_str(&format!(
            "  <line x1=\"{left:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#333\"/>\n",
            top + plot_h,
            left + plot_w,
            top + plot_h
        ));
        if self.series.len() > 1 {
            for (si, (name, _)) in self.series.iter().enumerate() {
                let x = left + 10.0 + si as f64 * 110.0;
                svg.push_str(&format!(
                    "  <rect x=\"{x:.1}\" y=\"32\" width=\"12\" height=\"12\" fill=\"{}\"/>\n",
                    PALETTE[si % PALETTE.len()]
                ));
                svg.push_str(&format!(
                    "  <text x=\"{:.1}\" y=\"42\">{}</text>\n",
                    x + 16.0,
                    escape(name)
                ));
            }
        }
        svg.push_str("</svg>\n");
        svg
    }
}

/// Smallest value of the form {1,2,5}·10^k at or above `value` (axis top).
fn nice_ceiling(value: u64) -> u64 {
    if value == 0 {
        return 1;
    }
    let mut magnitude = 1u64;
    while magnitude * 10 <= value {
        magnitude *= 10;
    }
    for mult in [1, 2, 5, 10] {
        if mult * magnitude >= value {
            return mult * magnitude;
        }
    }
    unreachable!("10 × magnitude ≥ value by construction")
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Margins of `table` turned into a chart: totals per level of
/// `category`, optionally split into one series per level of `series`.
pub fn bar_chart(
    table: &ContingencyTable,
    category: &str,
    series: Option<&str>,
    title: &str,
) -> Result<BarChart> {
    let cat_axis = table.axis(category)?;
    let categories: Vec<String> = table.factors()[cat_axis].levels().to_vec();
    let series = match series {
        None => {
            let margin = table.margin(&[category])?;
            vec![("counts".to_string(), margin.cells().to_vec())]
        }
        Some(series_factor) => {
            let ser_axis = table.axis(series_factor)?;
            let margin = table.margin(&[category, series_factor])?;
            table.factors()[ser_axis]
                .levels()
                .iter()
                .map(|level| {
                    let values = categories
                        .iter()
                        .map(|cat| {
                            // the margin's factor order follows the parent table
                            let labels: Vec<&str> = if cat_axis < ser_axis {
                                vec![cat.as_str(), level.as_str()]
                            } else {
                                vec![level.as_str(), cat.as_str()]
                            };
                            margin.cell(&labels)
                        })
                        .collect::<Result<Vec<u64>>>()?;
                    Ok((level.clone(), values))
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(BarChart {
        title: title.to_string(),
        categories,
        series,
    })
}

/// The standard chart set for a gender × age × region table: region
/// totals, region × gender, age × gender, and region × age. Returned as
/// `(file stem, chart)` pairs.
pub fn standard_charts(table: &ContingencyTable) -> Result<Vec<(String, BarChart)>> {
    let gender = table.factors()[0].name().to_string();
    let age = table.factors()[1].name().to_string();
    let region = table.factors()[2].name().to_string();
    Ok(vec![
        (
            "region".to_string(),
            bar_chart(table, &region, None, &format!("確診數 by {region}"))?,
        ),
        (
            "region-gender".to_string(),
            bar_chart(table, &region, Some(&gender), &format!("確診數 by {region} × {gender}"))?,
        ),
        (
            "age-gender".to_string(),
            bar_chart(table, &age, Some(&gender), &format!("確診數 by {age} × {gender}"))?,
        ),
        (
            "region-age".to_string(),
            bar_chart(table, &region, Some(&age), &format!("確診數 by {region} × {age}"))?,
        ),
    ])
}
