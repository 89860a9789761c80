//! Wald tests, linear contrasts, BIC, and selection across the model
//! lattice.

use nalgebra::DVector;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::contingency::ContingencyTable;
use crate::design::{build_design, Baselines, ModelSpec};
use crate::error::{Error, Result};
use crate::irls::{fit, FitOptions, FitResult};

/// Two-sided standard-normal p-value for a z statistic.
fn two_sided_p(z: f64) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    2.0 * (1.0 - normal.cdf(z.abs()))
}

/// One coefficient's Wald test.
#[derive(Debug, Clone, Serialize)]
pub struct WaldTest {
    pub label: String,
    pub estimate: f64,
    pub std_error: f64,
    pub z: f64,
    pub p_value: f64,
}

/// Wald z-tests (`z = β̂/SE`, two-sided normal p) for every coefficient,
/// intercept included, in design-column order.
pub fn wald_tests(fit: &FitResult) -> Result<Vec<WaldTest>> {
    if !fit.converged() {
        return Err(Error::NotConverged);
    }
    let se = fit.std_errors();
    Ok(fit
        .labels()
        .iter()
        .zip(fit.coefficients().iter())
        .zip(se)
        .map(|((label, &estimate), std_error)| {
            let z = estimate / std_error;
            WaldTest {
                label: label.clone(),
                estimate,
                std_error,
                z,
                p_value: two_sided_p(z),
            }
        })
        .collect())
}

/// A linear combination of coefficients with its Wald test.
#[derive(Debug, Clone, Serialize)]
pub struct Contrast {
    pub weights: Vec<f64>,
    pub estimate: f64,
    pub std_error: f64,
    pub z: f64,
    pub p_value: f64,
}

/// Tests `wᵀβ = 0` with variance `wᵀ Σ̂ w` from the fit's covariance.
pub fn contrast(fit: &FitResult, weights: &[f64]) -> Result<Contrast> {
    if !fit.converged() {
        return Err(Error::NotConverged);
    }
    if weights.len() != fit.n_params() {
        return Err(Error::WeightLength {
            got: weights.len(),
            want: fit.n_params(),
        });
    }
    let w = DVector::from_column_slice(weights);
    let estimate = fit.coefficients().dot(&w);
    let variance = (w.transpose() * fit.covariance() * &w)[(0, 0)];
    if variance < 0.0 {
        return Err(Error::NegativeVariance(variance));
    }
    let std_error = variance.sqrt();
    let z = if std_error == 0.0 {
        // degenerate contrast: zero variance means the value is exact
        if estimate == 0.0 {
            0.0
        } else {
            f64::INFINITY.copysign(estimate)
        }
    } else {
        estimate / std_error
    };
    Ok(Contrast {
        weights: weights.to_vec(),
        estimate,
        std_error,
        z,
        p_value: two_sided_p(z),
    })
}

/// Convenience form of [`contrast`]: weights given as
/// `(coefficient label, weight)` pairs, all other weights zero.
pub fn contrast_by_labels(fit: &FitResult, entries: &[(&str, f64)]) -> Result<Contrast> {
    let mut weights = vec![0.0; fit.n_params()];
    for (label, weight) in entries {
        let idx = fit
            .labels()
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownCoefficient(label.to_string()))?;
        weights[idx] += weight;
    }
    contrast(fit, &weights)
}

/// Bayesian information criterion under the full Poisson likelihood:
/// `−2ℓ + p·ln(C)` with `C` the number of table cells.
pub fn bic(fit: &FitResult, n_cells: usize) -> f64 {
    -2.0 * fit.full_log_likelihood() + fit.n_params() as f64 * (n_cells as f64).ln()
}

/// One row of a [`SelectionReport`]: either a fitted model's summary or
/// the error that prevented fitting it.
#[derive(Debug, Clone, Serialize)]
pub struct ModelRow {
    pub spec: String,
    pub n_params: Option<usize>,
    pub deviance: Option<f64>,
    pub residual_df: Option<usize>,
    pub bic: Option<f64>,
    pub error: Option<String>,
}

/// BIC comparison across a list of models over one table.
#[derive(Debug, Clone, Serialize)]
pub struct SelectionReport {
    pub rows: Vec<ModelRow>,
    /// Canonical spec string of the minimum-BIC model, if any fit succeeded.
    pub best: Option<String>,
    pub best_index: Option<usize>,
}

/// Fits every spec and ranks by BIC (ties go to the smaller model).
/// Individual fit failures are recorded in their row without aborting
/// the rest.
pub fn select(
    table: &ContingencyTable,
    lattice: &[ModelSpec],
    baselines: &Baselines,
    options: &FitOptions,
) -> SelectionReport {
    let n_cells = table.n_cells();
    let rows: Vec<ModelRow> = lattice
        .iter()
        .map(|spec| {
            let outcome = build_design(table, spec, baselines)
                .and_then(|design| fit(table, &design, options));
            match outcome {
                Ok(res) => ModelRow {
                    spec: spec.to_string(),
                    n_params: Some(res.n_params()),
                    deviance: Some(res.deviance()),
                    residual_df: Some(n_cells - res.n_params()),
                    bic: Some(bic(&res, n_cells)),
                    error: None,
                },
                Err(e) => ModelRow {
                    spec: spec.to_string(),
                    n_params: None,
                    deviance: None,
                    residual_df: None,
                    bic: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();

    let best_index = rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.bic.map(|b| (i, b, r.n_params.unwrap_or(usize::MAX))))
        .min_by(|a, b| {
            a.1.partial_cmp(&b.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.2.cmp(&b.2))
        })
        .map(|(i, _, _)| i);
    SelectionReport {
        best: best_index.map(|i| rows[i].spec.clone()),
        best_index,
        rows,
    }
}
