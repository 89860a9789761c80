//! Hierarchical log-linear analysis of multiway contingency tables.
//!
//! This crate ingests categorical case records (CSV), aggregates them
//! into contingency tables, fits Poisson log-linear models by Fisher
//! scoring, and compares the hierarchical model lattice by BIC. It also
//! provides Wald tests, linear contrasts, closed-form estimators for the
//! independence-type models, report rendering, and SVG bar charts —
//! everything behind the `loglin` command-line tool.
//!
//! The typical pipeline:
//!
//! ```no_run
//! use loglin::contingency::ContingencyTable;
//! use loglin::design::{build_design, enumerate_lattice, Baselines};
//! use loglin::inference::{bic, select, wald_tests};
//! use loglin::irls::{fit, FitOptions};
//!
//! # fn main() -> loglin::Result<()> {
//! let table = ContingencyTable::from_csv_str(&std::fs::read_to_string("table.csv")?)?;
//! let lattice = enumerate_lattice(&["年齡", "性別", "縣市"])?;
//! let baselines = Baselines::new()
//!     .with("性別", "男性")
//!     .with("年齡", "0-29")
//!     .with("縣市", "宜花東");
//! let report = select(&table, &lattice, &baselines, &FitOptions::default());
//! println!("best model: {:?}", report.best);
//!
//! let design = build_design(&table, &lattice[7], &baselines)?;
//! let result = fit(&table, &design, &FitOptions::default())?;
//! for test in wald_tests(&result)? {
//!     println!("{}: {:.4} ± {:.4}", test.label, test.estimate, test.std_error);
//! }
//! println!("BIC: {:.4}", bic(&result, table.n_cells()));
//! # Ok(())
//! # }
//! ```

pub mod chart;
pub mod cli;
pub mod config;
pub mod contingency;
pub mod design;
pub mod error;
pub mod inference;
pub mod ingest;
pub mod irls;
pub mod report;

pub use contingency::{ContingencyTable, Factor, RealTable, Table};
pub use design::{build_design, enumerate_lattice, Baselines, DesignMatrix, ModelSpec};
pub use error::{Error, Result};
pub use inference::{bic, contrast, contrast_by_labels, select, wald_tests};
pub use irls::{closed_form_fit, deviance, fit, full_log_likelihood, FitOptions, FitResult};
