//! Airborne-fraction estimators.
//!
//! Four linear models are fit by least squares, all returning a
//! [`RegressionFit`] with Newey-West (HAC) standard errors:
//!
//! 1. ratio: `G_t/E_t = alpha + u_t` (intercept-only; alpha is the sample
//!    mean of the ratio),
//! 2. regression: `G_t = alpha E_t + u_t` (no intercept),
//! 3. ratio with covariates: `G_t/E_t = alpha + g1 ENSO_t + g2 VAI_t + u_t`,
//! 4. regression with covariates: `G_t = alpha E_t + g1 ENSO_t + g2 VAI_t + u_t`.
//!
//! ENSO is detrended over the fit window before entering a design (detrending
//! is idempotent, so pre-detrended input gives the same fit). Reported
//! `residual_sd` is `sqrt(SSR / (T - p))` and `r_squared` uses the centered
//! convention `1 - SSR / sum (y - ybar)^2`.

use serde::{Deserialize, Serialize};

use crate::dataset::CarbonDataset;
use crate::error::{AfError, Result};
use crate::linalg::{gram, invert_sym_small, qr_lstsq, xtx_inverse, xty, Matrix};
use crate::series::{detrend, AnnualSeries};

/// Which of the four models (or a generic design) produced a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelId {
    M1Ratio,
    M2Regression,
    M3RatioCov,
    M4RegressionCov,
    Generic,
}

/// Output of a least-squares fit with HAC inference.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionFit {
    pub model_id: ModelId,
    /// Estimated coefficients; the first entry is alpha for models 1-4.
    pub coefficients: Vec<f64>,
    /// Newey-West sandwich covariance of the coefficients.
    pub hac_covariance: Vec<Vec<f64>>,
    /// Square roots of the covariance diagonal.
    pub standard_errors: Vec<f64>,
    /// Per-coefficient 95% interval, `estimate ± 1.96 se`.
    pub ci_95: Vec<(f64, f64)>,
    pub residuals: AnnualSeries,
    /// `sqrt(SSR / (T - p))`.
    pub residual_sd: f64,
    /// Centered coefficient of determination (exactly 0 for model 1).
    pub r_squared: f64,
    pub hac_lag: usize,
}

impl RegressionFit {
    pub fn alpha(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn alpha_se(&self) -> f64 {
        self.standard_errors[0]
    }
}

/// Bartlett-weighted lag order `floor(4 (T/100)^{2/9})`, the standard
/// automatic Newey-West rule (3 at T = 64).
pub fn default_hac_lag(t: usize) -> usize {
    (4.0 * (t as f64 / 100.0).powf(2.0 / 9.0)).floor() as usize
}

/// Newey-West covariance `(X'X)^{-1} S (X'X)^{-1}` with Bartlett weights
/// `w_l = 1 - l/(lag+1)`; `S` is the weighted long-run sum of
/// `x_t u_t` cross products. At `lag = 0` this is White's
/// heteroskedasticity-only covariance.
pub fn newey_west(x: &Matrix, residuals: &[f64], lag: usize) -> Result<Matrix> {
    let n = x.rows;
    let p = x.cols;
    if residuals.len() != n {
        return Err(AfError::InvalidArgument("residual length != rows".into()));
    }
    if lag >= n {
        return Err(AfError::InvalidArgument(format!(
            "HAC lag {lag} out of range for T = {n}"
        )));
    }
    let xtx_inv = xtx_inverse(x)?;

    let mut s = Matrix::zeros(p, p);
    for t in 0..n {
        let row = x.row(t);
        let u = residuals[t];
        for a in 0..p {
            for b in 0..p {
                let v = s.get(a, b) + u * u * row[a] * row[b];
                s.set(a, b, v);
            }
        }
    }
    for l in 1..=lag {
        let w = 1.0 - l as f64 / (lag as f64 + 1.0);
        for t in l..n {
            let xt = x.row(t);
            let xl = x.row(t - l);
            let uu = residuals[t] * residuals[t - l];
            for a in 0..p {
                for b in 0..p {
                    let v = s.get(a, b) + w * uu * (xt[a] * xl[b] + xl[a] * xt[b]);
                    s.set(a, b, v);
                }
            }
        }
    }

    // Sandwich product.
    let mut tmp = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            let mut acc = 0.0;
            for k in 0..p {
                acc += xtx_inv.get(i, k) * s.get(k, j);
            }
            tmp.set(i, j, acc);
        }
    }
    let mut cov = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            let mut acc = 0.0;
            for k in 0..p {
                acc += tmp.get(i, k) * xtx_inv.get(k, j);
            }
            cov.set(i, j, acc);
        }
    }
    // Exact symmetry despite floating accumulation order.
    for i in 0..p {
        for j in (i + 1)..p {
            let v = 0.5 * (cov.get(i, j) + cov.get(j, i));
            cov.set(i, j, v);
            cov.set(j, i, v);
        }
    }
    Ok(cov)
}

fn build_design(
    regressors: &[Vec<f64>],
    intercept: bool,
    n: usize,
) -> Result<(Matrix, Vec<bool>)> {
    let mut columns: Vec<Vec<f64>> = Vec::new();
    if intercept {
        columns.push(vec![1.0; n]);
    }
    // Identically-zero regressors (e.g. a constant covariate after
    // detrending) are dropped from the solve and reported with a zero
    // coefficient; anything else collinear is a hard error.
    let mut active = Vec::new();
    if intercept {
        active.push(true);
    }
    for col in regressors {
        if col.len() != n {
            return Err(AfError::InvalidArgument("regressor length != y".into()));
        }
        let is_zero = col.iter().all(|&v| v == 0.0);
        active.push(!is_zero);
        if !is_zero {
            columns.push(col.clone());
        }
    }
    Ok((Matrix::from_columns(&columns)?, active))
}

/// Generic least squares of `y` on the given regressors.
///
/// `hac_lag` controls the Newey-West bandwidth of the reported covariance.
pub fn ols(
    y: &AnnualSeries,
    regressors: &[Vec<f64>],
    intercept: bool,
    hac_lag: usize,
    model_id: ModelId,
) -> Result<RegressionFit> {
    let n = y.len();
    let (x, active) = build_design(regressors, intercept, n)?;
    let p = x.cols;
    if n <= p {
        return Err(AfError::SampleTooShort { needed: p + 1, got: n });
    }

    let yv = y.values();
    let coef_active: Vec<f64> = if p <= 3 {
        let ginv = invert_sym_small(&gram(&x))?;
        let b = xty(&x, yv);
        (0..p)
            .map(|i| (0..p).map(|j| ginv.get(i, j) * b[j]).sum())
            .collect()
    } else {
        qr_lstsq(&x, yv)?.0
    };

    let mut residuals = Vec::with_capacity(n);
    for t in 0..n {
        let fitted: f64 = x
            .row(t)
            .iter()
            .zip(&coef_active)
            .map(|(xv, c)| xv * c)
            .sum();
        residuals.push(yv[t] - fitted);
    }
    let ssr: f64 = residuals.iter().map(|u| u * u).sum();
    let ybar = y.mean();
    let sst: f64 = yv.iter().map(|v| (v - ybar) * (v - ybar)).sum();

    let cov_active = newey_west(&x, &residuals, hac_lag)?;

    // Re-expand dropped zero columns.
    let total = active.len();
    let mut coefficients = vec![0.0; total];
    let mut covariance = vec![vec![0.0; total]; total];
    let mut ai = 0usize;
    let idx_map: Vec<Option<usize>> = active
        .iter()
        .map(|&a| {
            if a {
                let k = ai;
                ai += 1;
                Some(k)
            } else {
                None
            }
        })
        .collect();
    for (i, mi) in idx_map.iter().enumerate() {
        if let Some(k) = mi {
            coefficients[i] = coef_active[*k];
            for (j, mj) in idx_map.iter().enumerate() {
                if let Some(l) = mj {
                    covariance[i][j] = cov_active.get(*k, *l);
                }
            }
        }
    }

    let standard_errors: Vec<f64> = (0..total).map(|i| covariance[i][i].max(0.0).sqrt()).collect();
    let ci_95: Vec<(f64, f64)> = coefficients
        .iter()
        .zip(&standard_errors)
        .map(|(c, s)| (c - 1.96 * s, c + 1.96 * s))
        .collect();

    let dof = n - p;
    let residual_sd = (ssr / dof as f64).sqrt();
    let r_squared = if model_id == ModelId::M1Ratio {
        0.0
    } else if sst > 0.0 {
        1.0 - ssr / sst
    } else if ssr <= 1e-24 {
        1.0
    } else {
        0.0
    };

    Ok(RegressionFit {
        model_id,
        coefficients,
        hac_covariance: covariance,
        standard_errors,
        ci_95,
        residuals: y.with_values(residuals)?,
        residual_sd,
        r_squared,
        hac_lag,
    })
}

/// Ratio series `G_t / E_t`, failing loudly on any zero-emissions year.
pub fn ratio_series(ds: &CarbonDataset) -> Result<AnnualSeries> {
    let e = ds.total_emissions();
    for ((year, ev), gv) in e.iter().zip(ds.g.values()) {
        if ev == 0.0 {
            return Err(AfError::ZeroEmissions { year });
        }
        let _ = gv;
    }
    let values = ds
        .g
        .values()
        .iter()
        .zip(e.values())
        .map(|(g, e)| g / e)
        .collect();
    ds.g.with_values(values)
}

fn covariate_columns(ds: &CarbonDataset) -> Result<(Vec<f64>, Vec<f64>)> {
    let enso = ds
        .enso
        .as_ref()
        .ok_or_else(|| AfError::MissingCovariates("enso".into()))?;
    let vai = ds
        .vai
        .as_ref()
        .ok_or_else(|| AfError::MissingCovariates("vai".into()))?;
    let enso_detrended = detrend(enso)?;
    Ok((enso_detrended.values().to_vec(), vai.values().to_vec()))
}

/// Model 1: alpha is the sample mean of `G_t / E_t`.
pub fn ratio_af(ds: &CarbonDataset, hac_lag: usize) -> Result<RegressionFit> {
    let r = ratio_series(ds)?;
    let mut fit = ols(&r, &[], true, hac_lag, ModelId::M1Ratio)?;
    fit.r_squared = 0.0;
    Ok(fit)
}

/// Models 2 and 4: no-intercept least squares of `G` on `E`
/// (plus detrended ENSO and VAI when `covariates`).
pub fn regression_af(ds: &CarbonDataset, covariates: bool, hac_lag: usize) -> Result<RegressionFit> {
    let e = ds.total_emissions();
    if covariates {
        let (enso, vai) = covariate_columns(ds)?;
        ols(
            &ds.g,
            &[e.values().to_vec(), enso, vai],
            false,
            hac_lag,
            ModelId::M4RegressionCov,
        )
    } else {
        ols(
            &ds.g,
            &[e.values().to_vec()],
            false,
            hac_lag,
            ModelId::M2Regression,
        )
    }
}

/// Model 3: intercept-plus-covariates regression of the ratio series;
/// alpha is the intercept.
pub fn ratio_af_cov(ds: &CarbonDataset, hac_lag: usize) -> Result<RegressionFit> {
    let r = ratio_series(ds)?;
    let (enso, vai) = covariate_columns(ds)?;
    ols(&r, &[enso, vai], true, hac_lag, ModelId::M3RatioCov)
}
