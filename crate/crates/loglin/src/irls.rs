//! Poisson log-linear model fitting by Fisher scoring (IRLS), plus the
//! closed-form estimators available for the independence-type models.

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::ln_gamma;

use crate::contingency::{ContingencyTable, RealTable};
use crate::design::{DesignMatrix, ModelSpec};
use crate::error::{Error, Result};

/// Iteration controls for [`fit`]. The defaults converge in a handful of
/// iterations on well-posed contingency tables.
#[derive(Debug, Clone)]
pub struct FitOptions {
    /// Hard cap on Fisher-scoring iterations.
    pub max_iterations: usize,
    /// Absolute deviance-change tolerance.
    pub abs_tol: f64,
    /// Relative deviance-change tolerance.
    pub rel_tol: f64,
    /// Step halvings allowed when an update increases the deviance.
    pub max_halvings: usize,
    /// Return a result flagged `converged: false` instead of erroring
    /// when the iteration cap is hit.
    pub allow_nonconvergence: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_halvings: 20,
            allow_nonconvergence: false,
        }
    }
}

impl FitOptions {
    fn tolerance(&self, deviance: f64) -> f64 {
        self.abs_tol.max(self.rel_tol * deviance.abs())
    }
}

/// A fitted Poisson log-linear model.
#[derive(Debug, Clone)]
pub struct FitResult {
    labels: Vec<String>,
    coefficients: DVector<f64>,
    covariance: DMatrix<f64>,
    fitted_means: RealTable,
    deviance: f64,
    full_log_likelihood: f64,
    iterations: usize,
    converged: bool,
}

impl FitResult {
    /// Coefficient labels, aligned with [`coefficients`](Self::coefficients).
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn coefficients(&self) -> &DVector<f64> {
        &self.coefficients
    }

    /// Inverse Fisher information at the estimate.
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    pub fn fitted_means(&self) -> &RealTable {
        &self.fitted_means
    }

    pub fn deviance(&self) -> f64 {
        self.deviance
    }

    pub fn full_log_likelihood(&self) -> f64 {
        self.full_log_likelihood
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn n_params(&self) -> usize {
        self.coefficients.len()
    }

    /// Standard errors: square roots of the covariance diagonal.
    pub fn std_errors(&self) -> Vec<f64> {
        (0..self.coefficients.len())
            .map(|i| self.covariance[(i, i)].sqrt())
            .collect()
    }

    /// `(estimate, standard error)` for one labeled coefficient.
    pub fn coefficient(&self, label: &str) -> Result<(f64, f64)> {
        let i = self
            .labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownCoefficient(label.to_string()))?;
        Ok((self.coefficients[i], self.covariance[(i, i)].sqrt()))
    }

    /// Full-precision JSON document (labels, estimates, standard errors,
    /// covariance, fitted means, deviance, log-likelihood).
    pub fn to_json(&self) -> Result<String> {
        let cov: Vec<Vec<f64>> = (0..self.covariance.nrows())
            .map(|i| self.covariance.row(i).iter().copied().collect())
            .collect();
        let doc = serde_json::json!({
            "labels": self.labels,
            "coefficients": self.coefficients.as_slice(),
            "std_errors": self.std_errors(),
            "covariance": cov,
            "fitted_means": serde_json::from_str::<serde_json::Value>(&self.fitted_means.to_json()?)?,
            "deviance": self.deviance,
            "full_log_likelihood": self.full_log_likelihood,
            "iterations": self.iterations,
            "converged": self.converged,
        });
        Ok(serde_json::to_string_pretty(&doc)?)
    }
}

/// Poisson deviance `2 Σ [y·log(y/μ) − (y − μ)]`, with `0·log 0 := 0`.
pub fn deviance(observed: &[f64], fitted: &[f64]) -> f64 {
    observed
        .iter()
        .zip(fitted)
        .map(|(&y, &mu)| {
            if y > 0.0 {
                2.0 * (y * (y / mu).ln() - (y - mu))
            } else {
                2.0 * mu
            }
        })
        .sum()
}

/// Full Poisson log-likelihood `Σ [y·log μ − μ − log(y!)]`, using the
/// log-gamma function for the factorial term. A zero fitted mean is only
/// admissible where the observed count is zero.
pub fn full_log_likelihood(table: &ContingencyTable, fitted_means: &RealTable) -> Result<f64> {
    let y = table.counts_f64();
    let mu = fitted_means.cells();
    if y.len() != mu.len() {
        return Err(Error::DesignShape {
            rows: mu.len(),
            cells: y.len(),
        });
    }
    let mut ell = 0.0;
    for (&yi, &mui) in y.iter().zip(mu) {
        if mui <= 0.0 {
            if yi > 0.0 {
                return Err(Error::ZeroFittedMean);
            }
            continue; // y = 0, μ = 0 contributes nothing
        }
        ell += yi * mui.ln() - mui - ln_gamma(yi + 1.0);
    }
    Ok(ell)
}

/// Solves the symmetric system `A x = b` by Cholesky, falling back to an
/// SVD solve. Rank deficiency is a hard error either way.
fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if let Some(chol) = a.clone().cholesky() {
        return Ok(chol.solve(b));
    }
    let svd = a.clone().svd(true, true);
    let eps = svd.singular_values.max() * 1e-12;
    let rank = svd.rank(eps);
    if rank < a.ncols() {
        return Err(Error::RankDeficient {
            rank,
            cols: a.ncols(),
        });
    }
    svd.solve(b, eps)
        .map(|m| DVector::from_column_slice(m.as_slice()))
        .map_err(|_| Error::RankDeficient {
            rank,
            cols: a.ncols(),
        })
}

fn invert_spd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(chol) = a.clone().cholesky() {
        return Ok(chol.inverse());
    }
    a.clone().try_inverse().ok_or(Error::RankDeficient {
        rank: 0,
        cols: a.ncols(),
    })
}

/// Weighted normal equations `(XᵀWX) β = XᵀWz` for diagonal weights.
fn weighted_solve(
    x: &DMatrix<f64>,
    weights: &DVector<f64>,
    z: &DVector<f64>,
) -> Result<DVector<f64>> {
    let xw = DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)] * weights[i]);
    let xtwx = x.transpose() * &xw;
    let xtwz = x.transpose() * weights.component_mul(z);
    solve_spd(&xtwx, &xtwz)
}

/// Fits the Poisson log-linear model `log μ = X β` by Fisher scoring.
///
/// Starts from `log(y + ½)` projected onto the design's column space with
/// weights `y + ½`, then iterates weighted least squares with `W = diag(μ)`
/// and working response `z = η + (y − μ)/μ` until the deviance change
/// drops below tolerance. Steps that increase the deviance are halved.
pub fn fit(
    table: &ContingencyTable,
    design: &DesignMatrix,
    options: &FitOptions,
) -> Result<FitResult> {
    let x = design.matrix();
    if x.nrows() != table.n_cells() {
        return Err(Error::DesignShape {
            rows: x.nrows(),
            cells: table.n_cells(),
        });
    }
    let y = DVector::from_vec(table.counts_f64());
    let n = y.len();

    // initialization: one weighted solve against log(y + 1/2)
    let w0 = y.add_scalar(0.5);
    let eta0 = w0.map(f64::ln);
    let mut beta = weighted_solve(x, &w0, &eta0)?;
    let mut eta = x * &beta;
    let mut mu = eta.map(f64::exp);
    let mut dev = deviance(y.as_slice(), mu.as_slice());

    let mut converged = false;
    let mut iterations = 0;
    for iter in 1..=options.max_iterations {
        iterations = iter;
        let z = &eta + (&y - &mu).component_div(&mu);
        let proposal = weighted_solve(x, &mu, &z)?;
        let mut step = &proposal - &beta;
        let mut new_beta = proposal;
        let mut new_eta = x * &new_beta;
        let mut new_mu = new_eta.map(f64::exp);
        let mut new_dev = deviance(y.as_slice(), new_mu.as_slice());
        let mut halvings = 0;
        while (!new_dev.is_finite() || new_dev > dev) && halvings < options.max_halvings {
            step /= 2.0;
            new_beta = &beta + &step;
            new_eta = x * &new_beta;
            new_mu = new_eta.map(f64::exp);
            new_dev = deviance(y.as_slice(), new_mu.as_slice());
            halvings += 1;
        }
        if !new_dev.is_finite() || new_dev > dev + options.tolerance(dev) {
            return Err(Error::DivergentStep(options.max_halvings));
        }
        let delta = (dev - new_dev).abs();
        beta = new_beta;
        eta = new_eta;
        mu = new_mu;
        dev = new_dev;
        if delta < options.tolerance(dev) {
            converged = true;
            break;
        }
    }
    if !converged && !options.allow_nonconvergence {
        return Err(Error::NoConvergence(options.max_iterations));
    }
    if converged {
        // one refinement past the deviance-based stop pins the score
        // equations well below the deviance tolerance would alone
        let z = &eta + (&y - &mu).component_div(&mu);
        if let Ok(polished) = weighted_solve(x, &mu, &z) {
            let p_eta = x * &polished;
            let p_mu = p_eta.map(f64::exp);
            let p_dev = deviance(y.as_slice(), p_mu.as_slice());
            if p_dev.is_finite() && p_dev <= dev + options.tolerance(dev) {
                beta = polished;
                mu = p_mu;
                dev = p_dev;
            }
        }
    }

    let xw = DMatrix::from_fn(n, x.ncols(), |i, j| x[(i, j)] * mu[i]);
    let information = x.transpose() * &xw;
    let covariance = invert_spd(&information)?;
    let fitted_means = table.with_real_cells(mu.as_slice().to_vec())?;
    let full_ell = full_log_likelihood(table, &fitted_means)?;

    Ok(FitResult {
        labels: design.labels().to_vec(),
        coefficients: beta,
        covariance,
        fitted_means,
        deviance: dev,
        full_log_likelihood: full_ell,
        iterations,
        converged,
    })
}

/// Maximum-likelihood fitted means for the three independence-type models,
/// computed from margins without iteration.
///
/// * no interactions — mutual independence, `μ = ∏ one-way margins / N^(k−1)`
/// * one pairwise term — joint independence of that pair from the third
///   factor, `μ_xyz = n_xy · n_z / N`
/// * two pairwise terms — conditional independence given their shared
///   factor, `μ_xyz = n_xz · n_yz / n_z`
///
/// Anything else (three pairwise terms, saturated, partial main effects)
/// has no closed form and must go through [`fit`].
pub fn closed_form_fit(table: &ContingencyTable, spec: &ModelSpec) -> Result<RealTable> {
    use std::collections::BTreeSet;
    let table_factors: BTreeSet<&str> = table.factors().iter().map(|f| f.name()).collect();
    let spec_mains: BTreeSet<&str> = spec.mains().iter().map(String::as_str).collect();
    if table_factors != spec_mains {
        return Err(Error::NoClosedForm(format!(
            "main effects {:?} must match the table's factors",
            spec.mains()
        )));
    }
    if spec.interactions().iter().any(|t| t.len() != 2) {
        return Err(Error::NoClosedForm(spec.to_string()));
    }

    let n = table.total() as f64;
    let cells = table.n_cells();
    let strides_coords: Vec<Vec<usize>> = (0..cells).map(|i| table.coords(i)).collect();

    match spec.interactions() {
        [] => {
            // product of all one-way margins over N^(k−1)
            if table.factors().len() < 2 {
                return Err(Error::NoClosedForm(spec.to_string()));
            }
            if n == 0.0 {
                return Err(Error::ZeroConditioningMargin);
            }
            let margins: Vec<Vec<f64>> = table
                .factors()
                .iter()
                .map(|f| {
                    table
                        .margin(&[f.name()])
                        .map(|m| m.cells().iter().map(|&c| c as f64).collect())
                })
                .collect::<Result<_>>()?;
            let scale = n.powi(table.factors().len() as i32 - 1);
            let fitted = strides_coords
                .iter()
                .map(|coords| {
                    coords
                        .iter()
                        .enumerate()
                        .map(|(a, &c)| margins[a][c])
                        .product::<f64>()
                        / scale
                })
                .collect();
            table.with_real_cells(fitted)
        }
        [pair] if table.factors().len() == 3 => {
            // (X,Y) jointly independent of Z
            if n == 0.0 {
                return Err(Error::ZeroConditioningMargin);
            }
            let (xa, ya) = (table.axis(&pair[0])?, table.axis(&pair[1])?);
            let za = (0..3).find(|a| *a != xa && *a != ya).expect("three axes");
            let z_name = table.factors()[za].name().to_string();
            let pair_margin = table.margin(&[&pair[0], &pair[1]])?;
            let z_margin = table.margin(&[&z_name])?;
            let fitted = strides_coords
                .iter()
                .map(|coords| {
                    let xy = lookup2(&pair_margin, table, (xa, coords[xa]), (ya, coords[ya]));
                    let z = z_margin.cells()[coords[za]] as f64;
                    xy * z / n
                })
                .collect();
            table.with_real_cells(fitted)
        }
        [p1, p2] if table.factors().len() == 3 => {
            // X ⊥ Y | Z where Z is the factor shared by both terms
            let s1: BTreeSet<&str> = p1.iter().map(String::as_str).collect();
            let s2: BTreeSet<&str> = p2.iter().map(String::as_str).collect();
            let shared: Vec<&&str> = s1.intersection(&s2).collect();
            if shared.len() != 1 {
                return Err(Error::NoClosedForm(spec.to_string()));
            }
            let z_name = shared[0].to_string();
            let za = table.axis(&z_name)?;
            let m1 = table.margin(&[&p1[0], &p1[1]])?;
            let m2 = table.margin(&[&p2[0], &p2[1]])?;
            let mz = table.margin(&[&z_name])?;
            if mz.cells().contains(&0) {
                return Err(Error::ZeroConditioningMargin);
            }
            let (x1a, x1b) = (table.axis(&p1[0])?, table.axis(&p1[1])?);
            let (x2a, x2b) = (table.axis(&p2[0])?, table.axis(&p2[1])?);
            let fitted = strides_coords
                .iter()
                .map(|coords| {
                    let a = lookup2(&m1, table, (x1a, coords[x1a]), (x1b, coords[x1b]));
                    let b = lookup2(&m2, table, (x2a, coords[x2a]), (x2b, coords[x2b]));
                    let z = mz.cells()[coords[za]] as f64;
                    a * b / z
                })
                .collect();
            table.with_real_cells(fitted)
        }
        _ => Err(Error::NoClosedForm(spec.to_string())),
    }
}

/// Value of a two-way margin at the given (axis, level-index) pair of the
/// parent table. Margins keep parent factor order, so the lower parent
/// axis is the margin's first factor.
fn lookup2(
    margin: &ContingencyTable,
    parent: &ContingencyTable,
    a: (usize, usize),
    b: (usize, usize),
) -> f64 {
    let ((_, ia), (ab, ib)) = if a.0 < b.0 { (a, b) } else { (b, a) };
    let cols = parent.factors()[ab].levels().len();
    margin.cells()[ia * cols + ib] as f64
}
