//! Time-varying airborne fraction via a scalar state-space model.
//!
//! Observation: `G_t = alpha_t E_t + u_t`, `u_t ~ N(0, sigma_u^2)` with the
//! emissions path `E_t` as a time-varying loading. State: random walk
//! `alpha_{t+1} = alpha_t + eta_t`, except at the first negative-emissions
//! year `tau`, where the state reflects around one:
//! `alpha_tau = 1 - alpha_{tau-1} + eta`. Variances are estimated by maximum
//! likelihood (Nelder-Mead on the log-variances from deterministic
//! multi-starts); the smoother delivers the path estimate with 95% bands.

use serde::{Deserialize, Serialize};

use crate::error::{AfError, Result};
use crate::neldermead;
use crate::series::AnnualSeries;

/// Scalar state-space specification.
#[derive(Debug, Clone)]
pub struct StateSpaceSpec {
    /// Time-varying observation loadings (the emissions path).
    pub obs_loadings: AnnualSeries,
    /// Observation error variance `sigma_u^2`.
    pub obs_variance: f64,
    /// State innovation variance `sigma_eta^2`.
    pub state_variance: f64,
    /// First negative-emissions year, if any; the transition into this year
    /// reflects the state around one.
    pub switch_year: Option<i32>,
    pub initial_mean: f64,
    /// Diffuse-approximation prior variance.
    pub initial_variance: f64,
}

impl StateSpaceSpec {
    fn validate(&self) -> Result<()> {
        if self.obs_variance < 0.0 || self.state_variance < 0.0 || self.initial_variance <= 0.0 {
            return Err(AfError::InvalidArgument(
                "variances must be nonnegative (initial variance positive)".into(),
            ));
        }
        if !self.initial_mean.is_finite() {
            return Err(AfError::InvalidArgument("initial mean not finite".into()));
        }
        Ok(())
    }

    /// Transition `alpha_year = c + f alpha_{year-1} + eta` into `year`.
    fn transition_into(&self, year: i32) -> (f64, f64) {
        if Some(year) == self.switch_year {
            (-1.0, 1.0)
        } else {
            (1.0, 0.0)
        }
    }
}

/// Filtering pass output.
#[derive(Debug, Clone)]
pub struct FilterOutput {
    /// `E(alpha_t | G_1..t)`.
    pub filtered_mean: Vec<f64>,
    pub filtered_variance: Vec<f64>,
    /// One-step-ahead state moments `E(alpha_t | G_1..t-1)`.
    pub predicted_mean: Vec<f64>,
    pub predicted_variance: Vec<f64>,
    /// One-step-ahead observation errors and their variances.
    pub prediction_errors: Vec<f64>,
    pub prediction_error_variances: Vec<f64>,
    /// Gaussian prediction-error decomposition log-likelihood.
    pub loglik: f64,
}

/// First year with negative emissions, if any.
pub fn detect_switch(e: &AnnualSeries) -> Option<i32> {
    e.iter().find(|(_, v)| *v < 0.0).map(|(year, _)| year)
}

/// Runs the Kalman filter over the aligned observation series.
pub fn kalman_filter(g: &AnnualSeries, spec: &StateSpaceSpec) -> Result<FilterOutput> {
    spec.validate()?;
    let e = &spec.obs_loadings;
    if g.start_year() != e.start_year() || g.len() != e.len() {
        return Err(AfError::InvalidArgument(
            "g and obs_loadings must be aligned".into(),
        ));
    }
    let n = g.len();
    let mut out = FilterOutput {
        filtered_mean: Vec::with_capacity(n),
        filtered_variance: Vec::with_capacity(n),
        predicted_mean: Vec::with_capacity(n),
        predicted_variance: Vec::with_capacity(n),
        prediction_errors: Vec::with_capacity(n),
        prediction_error_variances: Vec::with_capacity(n),
        loglik: 0.0,
    };
    let ln_2pi = (2.0 * std::f64::consts::PI).ln();

    let mut a_pred = spec.initial_mean;
    let mut p_pred = spec.initial_variance;
    for (i, (year, gv)) in g.iter().enumerate() {
        if i > 0 {
            let (f, c) = spec.transition_into(year);
            a_pred = c + f * a_pred;
            p_pred = f * f * p_pred + spec.state_variance;
        }
        out.predicted_mean.push(a_pred);
        out.predicted_variance.push(p_pred);

        let ev = e.values()[i];
        let s = ev * ev * p_pred + spec.obs_variance;
        if s <= 0.0 {
            return Err(AfError::DegenerateLikelihood(format!(
                "zero prediction-error variance in year {year}"
            )));
        }
        let v = gv - ev * a_pred;
        out.prediction_errors.push(v);
        out.prediction_error_variances.push(s);
        out.loglik -= 0.5 * (ln_2pi + s.ln() + v * v / s);

        let gain = p_pred * ev / s;
        a_pred += gain * v;
        p_pred *= 1.0 - gain * ev;
        if p_pred < 0.0 {
            p_pred = 0.0;
        }
        out.filtered_mean.push(a_pred);
        out.filtered_variance.push(p_pred);
    }
    Ok(out)
}

/// Smoothed path estimate with maximum-likelihood metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TvafEstimate {
    pub smoothed_mean: AnnualSeries,
    pub smoothed_variance: AnnualSeries,
    pub band_low: AnnualSeries,
    pub band_high: AnnualSeries,
    pub filtered_mean: AnnualSeries,
    pub filtered_variance: AnnualSeries,
    pub loglik: f64,
    /// `(sigma_u^2, sigma_eta^2)`; the fixed input values when produced by
    /// [`kalman_smoother`] directly.
    pub ml_params: (f64, f64),
    pub switch_year: Option<i32>,
    pub optimizer: Option<OptimizerInfo>,
}

/// Summary of the simplex search behind a maximum-likelihood fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerInfo {
    pub starts: usize,
    pub evaluations: usize,
    pub converged: bool,
}

/// Fixed-interval smoothing of a filtering pass (same spec).
pub fn kalman_smoother(
    g: &AnnualSeries,
    filter: &FilterOutput,
    spec: &StateSpaceSpec,
) -> Result<TvafEstimate> {
    let n = g.len();
    if filter.filtered_mean.len() != n {
        return Err(AfError::InvalidArgument(
            "filter output does not match series length".into(),
        ));
    }
    let mut sm = vec![0.0; n];
    let mut sv = vec![0.0; n];
    sm[n - 1] = filter.filtered_mean[n - 1];
    sv[n - 1] = filter.filtered_variance[n - 1];
    for t in (0..n - 1).rev() {
        let year_next = g.start_year() + t as i32 + 1;
        let (f, _) = spec.transition_into(year_next);
        let p_pred_next = filter.predicted_variance[t + 1];
        let c = if p_pred_next > 0.0 {
            filter.filtered_variance[t] * f / p_pred_next
        } else {
            0.0
        };
        sm[t] = filter.filtered_mean[t] + c * (sm[t + 1] - filter.predicted_mean[t + 1]);
        sv[t] = filter.filtered_variance[t] + c * c * (sv[t + 1] - p_pred_next);
        if sv[t] < 0.0 {
            sv[t] = 0.0;
        }
    }
    let lo: Vec<f64> = sm
        .iter()
        .zip(&sv)
        .map(|(m, v)| m - 1.96 * v.sqrt())
        .collect();
    let hi: Vec<f64> = sm
        .iter()
        .zip(&sv)
        .map(|(m, v)| m + 1.96 * v.sqrt())
        .collect();
    Ok(TvafEstimate {
        smoothed_mean: g.with_values(sm)?,
        smoothed_variance: g.with_values(sv)?,
        band_low: g.with_values(lo)?,
        band_high: g.with_values(hi)?,
        filtered_mean: g.with_values(filter.filtered_mean.clone())?,
        filtered_variance: g.with_values(filter.filtered_variance.clone())?,
        loglik: filter.loglik,
        ml_params: (spec.obs_variance, spec.state_variance),
        switch_year: spec.switch_year,
        optimizer: None,
    })
}

/// Options for the maximum-likelihood fit.
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    /// Prior mean for the state at the first year (e.g. the historical
    /// regression estimate); defaults to 0.45.
    pub initial_mean: f64,
    /// Diffuse-approximation prior variance.
    pub initial_variance: f64,
    /// Simplex evaluation budget per start.
    pub max_evals_per_start: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            initial_mean: 0.45,
            initial_variance: 1e7,
            max_evals_per_start: 400,
        }
    }
}

/// Deterministic multi-start grid on `(ln sigma_u^2, ln sigma_eta^2)`.
fn start_grid() -> [[f64; 2]; 8] {
    let su: [f64; 4] = [0.1, 0.8, 3.0, 10.0];
    let se: [f64; 2] = [1e-4, 1e-2];
    let mut grid = [[0.0; 2]; 8];
    let mut k = 0;
    for u in su {
        for e in se {
            grid[k] = [u.ln(), e.ln()];
            k += 1;
        }
    }
    grid
}

/// Maximum-likelihood fit of the two variances followed by smoothing.
///
/// The switch year is detected from the emissions path. On optimizer
/// non-convergence the best point found is still returned, flagged in
/// [`TvafEstimate::optimizer`].
pub fn fit_tvaf(g: &AnnualSeries, e: &AnnualSeries, options: &FitOptions) -> Result<TvafEstimate> {
    if g.len() < 10 {
        return Err(AfError::SampleTooShort {
            needed: 10,
            got: g.len(),
        });
    }
    let switch_year = detect_switch(e);
    let spec_for = |log_params: &[f64]| StateSpaceSpec {
        obs_loadings: e.clone(),
        obs_variance: log_params[0].exp(),
        state_variance: log_params[1].exp(),
        switch_year,
        initial_mean: options.initial_mean,
        initial_variance: options.initial_variance,
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut total_evals = 0usize;
    let mut any_converged = false;
    for start in start_grid() {
        let res = neldermead::minimize(
            |p| {
                let spec = spec_for(p);
                match kalman_filter(g, &spec) {
                    Ok(f) => -f.loglik,
                    Err(_) => f64::INFINITY,
                }
            },
            &start,
            1.0,
            1e-9,
            1e-7,
            options.max_evals_per_start,
        );
        total_evals += res.evaluations;
        any_converged |= res.converged;
        if best.as_ref().map_or(true, |(fx, _)| res.fx < *fx) {
            best = Some((res.fx, res.x));
        }
    }
    let (neg_ll, log_params) = best.expect("at least one start");
    if !neg_ll.is_finite() {
        return Err(AfError::DegenerateLikelihood(
            "likelihood not finite at any start".into(),
        ));
    }
    let spec = spec_for(&log_params);
    let filter = kalman_filter(g, &spec)?;
    let mut estimate = kalman_smoother(g, &filter, &spec)?;
    estimate.optimizer = Some(OptimizerInfo {
        starts: 8,
        evaluations: total_evals,
        converged: any_converged,
    });
    Ok(estimate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::substream;
    use approx::assert_abs_diff_eq;
    use rand_distr::Distribution;

    fn series(start: i32, v: &[f64]) -> AnnualSeries {
        AnnualSeries::new(start, v.to_vec()).unwrap()
    }

    // ---- brute-force joint-Gaussian oracle (dense conditioning) ----

    struct Oracle {
        /// conditional mean/variance of each state given observations 0..=k
        /// for every k, plus the full-sample (smoothed) moments and loglik
        filtered: Vec<(f64, f64)>,
        smoothed: Vec<(f64, f64)>,
        loglik: f64,
    }

    fn solve(a: &mut Vec<Vec<f64>>, b: &mut Vec<Vec<f64>>) {
        // Gauss-Jordan with partial pivoting; sizes <= 6.
        let n = a.len();
        let m = b[0].len();
        for col in 0..n {
            let mut piv = col;
            for r in (col + 1)..n {
                if a[r][col].abs() > a[piv][col].abs() {
                    piv = r;
                }
            }
            a.swap(col, piv);
            b.swap(col, piv);
            let d = a[col][col];
            for j in 0..n {
                a[col][j] /= d;
            }
            for j in 0..m {
                b[col][j] /= d;
            }
            for r in 0..n {
                if r != col {
                    let f = a[r][col];
                    if f != 0.0 {
                        for j in 0..n {
                            a[r][j] -= f * a[col][j];
                        }
                        for j in 0..m {
                            b[r][j] -= f * b[col][j];
                        }
                    }
                }
            }
        }
    }

    fn oracle(g: &[f64], spec: &StateSpaceSpec, start_year: i32) -> Oracle {
        let n = g.len();
        let e = spec.obs_loadings.values();
        // state mean vector and deviation map A: dev_alpha = A [d0, eta_0..eta_{n-2}]
        let mut mean = vec![0.0; n];
        let mut a = vec![vec![0.0; n]; n]; // columns: d0, eta_0..eta_{n-2}
        mean[0] = spec.initial_mean;
        a[0][0] = 1.0;
        for t in 1..n {
            let (f, c) = spec.transition_into(start_year + t as i32);
            mean[t] = c + f * mean[t - 1];
            for j in 0..n {
                a[t][j] = f * a[t - 1][j];
            }
            a[t][t] = 1.0; // eta_{t-1} has unit coefficient
        }
        let vars: Vec<f64> = std::iter::once(spec.initial_variance)
            .chain(std::iter::repeat(spec.state_variance).take(n - 1))
            .collect();
        // Cov_alpha = A diag(vars) A'
        let mut cov_aa = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += a[i][k] * vars[k] * a[j][k];
                }
                cov_aa[i][j] = s;
            }
        }
        let cond = |upto: usize| -> (Vec<f64>, Vec<f64>, f64) {
            // condition all states on G_0..G_{upto}
            let m = upto + 1;
            let mut cov_gg = vec![vec![0.0; m]; m];
            for i in 0..m {
                for j in 0..m {
                    cov_gg[i][j] = e[i] * cov_aa[i][j] * e[j];
                    if i == j {
                        cov_gg[i][j] += spec.obs_variance;
                    }
                }
            }
            let mut cov_ag = vec![vec![0.0; m]; n];
            for i in 0..n {
                for j in 0..m {
                    cov_ag[i][j] = cov_aa[i][j] * e[j];
                }
            }
            let dev: Vec<f64> = (0..m).map(|i| g[i] - e[i] * mean[i]).collect();
            // loglik of G_0..G_{upto} and the conditional moments
            let mut lu = cov_gg.clone();
            let mut rhs: Vec<Vec<f64>> = dev.iter().map(|d| vec![*d]).collect();
            // also solve for cov_gg^{-1} cov_ga
            for row in rhs.iter_mut().zip(0..m) {
                let _ = row;
            }
            let mut aug: Vec<Vec<f64>> = (0..m)
                .map(|i| {
                    let mut r = vec![dev[i]];
                    r.extend((0..n).map(|s| cov_ag[s][i]));
                    r
                })
                .collect();
            // determinant before elimination (product of pivots)
            let mut det = 1.0;
            {
                let mut tmp = cov_gg.clone();
                for col in 0..m {
                    let mut piv = col;
                    for r in (col + 1)..m {
                        if tmp[r][col].abs() > tmp[piv][col].abs() {
                            piv = r;
                        }
                    }
                    if piv != col {
                        tmp.swap(col, piv);
                        det = -det;
                    }
                    det *= tmp[col][col];
                    for r in (col + 1)..m {
                        let f = tmp[r][col] / tmp[col][col];
                        for j in col..m {
                            tmp[r][j] -= f * tmp[col][j];
                        }
                    }
                }
            }
            solve(&mut lu, &mut aug);
            let solved_dev: Vec<f64> = (0..m).map(|i| aug[i][0]).collect();
            let mut cmean = vec![0.0; n];
            let mut cvar = vec![0.0; n];
            for s in 0..n {
                let mut proj = 0.0;
                let mut red = 0.0;
                for i in 0..m {
                    proj += cov_ag[s][i] * solved_dev[i];
                    red += cov_ag[s][i] * aug[i][1 + s];
                }
                cmean[s] = mean[s] + proj;
                cvar[s] = cov_aa[s][s] - red;
            }
            let quad: f64 = dev.iter().zip(&solved_dev).map(|(d, sd)| d * sd).sum();
            let ll = -0.5
                * (m as f64 * (2.0 * std::f64::consts::PI).ln() + det.ln() + quad);
            (cmean, cvar, ll)
        };
        let mut filtered = Vec::with_capacity(n);
        for t in 0..n {
            let (cm, cv, _) = cond(t);
            filtered.push((cm[t], cv[t]));
        }
        let (sm, sv, ll) = cond(n - 1);
        Oracle {
            filtered,
            smoothed: sm.into_iter().zip(sv).collect(),
            loglik: ll,
        }
    }

    fn four_point_instance() -> (AnnualSeries, StateSpaceSpec) {
        let e = series(1, &[1.0, 2.0, -1.0, -2.0]);
        let g = series(1, &[0.5, 0.8, -1.3, -2.6]);
        let spec = StateSpaceSpec {
            obs_loadings: e,
            obs_variance: 1.0,
            state_variance: 0.1,
            switch_year: Some(3),
            initial_mean: 0.5,
            initial_variance: 4.0,
        };
        (g, spec)
    }

    #[test]
    fn filter_matches_joint_gaussian_oracle_with_switch() {
        let (g, spec) = four_point_instance();
        let filter = kalman_filter(&g, &spec).unwrap();
        let oracle = oracle(g.values(), &spec, g.start_year());
        for t in 0..4 {
            assert_abs_diff_eq!(filter.filtered_mean[t], oracle.filtered[t].0, epsilon = 1e-8);
            assert_abs_diff_eq!(
                filter.filtered_variance[t],
                oracle.filtered[t].1,
                epsilon = 1e-8
            );
        }
        assert_abs_diff_eq!(filter.loglik, oracle.loglik, epsilon = 1e-8);
    }

    #[test]
    fn smoother_matches_joint_gaussian_oracle_with_switch() {
        let (g, spec) = four_point_instance();
        let filter = kalman_filter(&g, &spec).unwrap();
        let est = kalman_smoother(&g, &filter, &spec).unwrap();
        let oracle = oracle(g.values(), &spec, g.start_year());
        for t in 0..4 {
            assert_abs_diff_eq!(
                est.smoothed_mean.values()[t],
                oracle.smoothed[t].0,
                epsilon = 1e-8
            );
            assert_abs_diff_eq!(
                est.smoothed_variance.values()[t],
                oracle.smoothed[t].1,
                epsilon = 1e-8
            );
        }
    }

    #[test]
    fn six_point_no_switch_matches_oracle() {
        let e = series(2000, &[3.0, 2.5, 2.0, 1.5, 1.0, 0.5]);
        let g = series(2000, &[1.4, 1.1, 0.9, 0.8, 0.4, 0.3]);
        let spec = StateSpaceSpec {
            obs_loadings: e,
            obs_variance: 0.5,
            state_variance: 0.02,
            switch_year: None,
            initial_mean: 0.4,
            initial_variance: 10.0,
        };
        let filter = kalman_filter(&g, &spec).unwrap();
        let est = kalman_smoother(&g, &filter, &spec).unwrap();
        let oracle = oracle(g.values(), &spec, g.start_year());
        for t in 0..6 {
            assert_abs_diff_eq!(filter.filtered_mean[t], oracle.filtered[t].0, epsilon = 1e-8);
            assert_abs_diff_eq!(
                est.smoothed_mean.values()[t],
                oracle.smoothed[t].0,
                epsilon = 1e-8
            );
            assert_abs_diff_eq!(
                est.smoothed_variance.values()[t],
                oracle.smoothed[t].1,
                epsilon = 1e-8
            );
        }
        assert_abs_diff_eq!(filter.loglik, oracle.loglik, epsilon = 1e-8);
    }

    #[test]
    fn reflection_equals_transformed_no_switch_run() {
        // With-switch smoothed means at t >= tau equal 1 - m' of a no-switch
        // run on (G_t - E_t, -E_t) from tau onward.
        let (g, spec) = four_point_instance();
        let filter = kalman_filter(&g, &spec).unwrap();
        let est = kalman_smoother(&g, &filter, &spec).unwrap();

        let tau_idx = 2usize; // year 3
        let e2: Vec<f64> = spec
            .obs_loadings
            .values()
            .iter()
            .enumerate()
            .map(|(t, v)| if t >= tau_idx { -v } else { *v })
            .collect();
        let g2: Vec<f64> = g
            .values()
            .iter()
            .zip(spec.obs_loadings.values())
            .enumerate()
            .map(|(t, (gv, ev))| if t >= tau_idx { gv - ev } else { *gv })
            .collect();
        let spec2 = StateSpaceSpec {
            obs_loadings: series(1, &e2),
            obs_variance: spec.obs_variance,
            state_variance: spec.state_variance,
            switch_year: None,
            initial_mean: spec.initial_mean,
            initial_variance: spec.initial_variance,
        };
        let g2s = series(1, &g2);
        let filter2 = kalman_filter(&g2s, &spec2).unwrap();
        let est2 = kalman_smoother(&g2s, &filter2, &spec2).unwrap();
        for t in 0..4 {
            let expect = if t >= tau_idx {
                1.0 - est2.smoothed_mean.values()[t]
            } else {
                est2.smoothed_mean.values()[t]
            };
            assert_abs_diff_eq!(est.smoothed_mean.values()[t], expect, epsilon = 1e-8);
        }
    }

    #[test]
    fn static_limit_equals_running_mean() {
        // sigma_eta = 0, E = 1, diffuse prior: the filter tracks the running
        // sample mean of g.
        let g = series(1, &[1.0, 3.0, 2.0, 4.0, 2.5]);
        let spec = StateSpaceSpec {
            obs_loadings: series(1, &[1.0; 5]),
            obs_variance: 1.0,
            state_variance: 0.0,
            switch_year: None,
            initial_mean: 0.0,
            initial_variance: 1e7,
        };
        let filter = kalman_filter(&g, &spec).unwrap();
        let mut acc = 0.0;
        for (t, v) in g.values().iter().enumerate() {
            acc += v;
            let mean = acc / (t as f64 + 1.0);
            assert_abs_diff_eq!(filter.filtered_mean[t], mean, epsilon = 1e-6);
        }
    }

    #[test]
    fn zero_state_variance_smooths_to_gls() {
        // constant-state limit: smoothed mean is flat and equals the
        // no-intercept least-squares slope sum(EG)/sum(E^2)
        let e = series(1, &[4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0]);
        let g = series(1, &[1.9, 2.2, 2.5, 3.3, 3.4, 4.2, 4.3, 5.1]);
        let spec = StateSpaceSpec {
            obs_loadings: e.clone(),
            obs_variance: 0.8,
            state_variance: 0.0,
            switch_year: None,
            initial_mean: 0.0,
            initial_variance: 1e7,
        };
        let filter = kalman_filter(&g, &spec).unwrap();
        let est = kalman_smoother(&g, &filter, &spec).unwrap();
        let num: f64 = e.values().iter().zip(g.values()).map(|(a, b)| a * b).sum();
        let den: f64 = e.values().iter().map(|a| a * a).sum();
        let ols = num / den;
        for t in 0..8 {
            assert_abs_diff_eq!(est.smoothed_mean.values()[t], ols, epsilon = 1e-6);
        }
    }

    #[test]
    fn noiseless_observation_pins_state() {
        let e = series(1, &[2.0, 3.0, 4.0]);
        let g = e.with_values(e.values().iter().map(|v| 0.37 * v).collect()).unwrap();
        let spec = StateSpaceSpec {
            obs_loadings: e,
            obs_variance: 1e-12,
            state_variance: 0.0,
            switch_year: None,
            initial_mean: 0.0,
            initial_variance: 1e7,
        };
        let filter = kalman_filter(&g, &spec).unwrap();
        assert_abs_diff_eq!(filter.filtered_mean[0], 0.37, epsilon = 1e-6);
    }

    #[test]
    fn smoothing_never_increases_variance() {
        let mut rng = substream(4242, 0x77, 0);
        let n = 40;
        let e: Vec<f64> = (0..n).map(|t| 10.0 - 0.26 * t as f64).collect();
        let mut alpha = 0.45;
        let mut g = Vec::with_capacity(n);
        for ev in &e {
            let eta: f64 = rand_distr::StandardNormal.sample(&mut rng);
            let u: f64 = rand_distr::StandardNormal.sample(&mut rng);
            alpha += 0.05 * eta;
            g.push(alpha * ev + 0.5 * u);
        }
        let gs = series(2023, &g);
        let spec = StateSpaceSpec {
            obs_loadings: series(2023, &e),
            obs_variance: 0.25,
            state_variance: 0.0025,
            switch_year: None,
            initial_mean: 0.45,
            initial_variance: 1e7,
        };
        let filter = kalman_filter(&gs, &spec).unwrap();
        let est = kalman_smoother(&gs, &filter, &spec).unwrap();
        for t in 0..n {
            assert!(
                est.smoothed_variance.values()[t] <= est.filtered_variance.values()[t] + 1e-12
            );
            assert!(est.band_low.values()[t] <= est.smoothed_mean.values()[t]);
            assert!(est.smoothed_mean.values()[t] <= est.band_high.values()[t]);
        }
    }

    #[test]
    fn detect_switch_cases() {
        assert_eq!(detect_switch(&series(2070, &[2.0, 1.0, -0.5, -1.0])), Some(2072));
        assert_eq!(detect_switch(&series(2070, &[2.0, 1.0, 0.5])), None);
    }

    #[test]
    fn smoother_insensitive_to_diffuse_prior_scale() {
        let e = series(1, &[4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0, 11.0, 12.0, 13.0]);
        let g = series(1, &[1.9, 2.2, 2.5, 3.3, 3.4, 4.2, 4.3, 5.1, 5.3, 6.0]);
        let mut paths = Vec::new();
        for p0 in [1e6, 1e7, 1e8] {
            let spec = StateSpaceSpec {
                obs_loadings: e.clone(),
                obs_variance: 0.6,
                state_variance: 0.001,
                switch_year: None,
                initial_mean: 0.2,
                initial_variance: p0,
            };
            let filter = kalman_filter(&g, &spec).unwrap();
            let est = kalman_smoother(&g, &filter, &spec).unwrap();
            paths.push(est.smoothed_mean.values().to_vec());
        }
        for t in 0..10 {
            assert_abs_diff_eq!(paths[0][t], paths[1][t], epsilon = 1e-6);
            assert_abs_diff_eq!(paths[1][t], paths[2][t], epsilon = 1e-6);
        }
    }

    #[test]
    fn degenerate_likelihood_signaled() {
        let e = series(1, &[1.0, 1.0, 1.0]);
        let g = series(1, &[1.0, 2.0, 3.0]);
        let spec = StateSpaceSpec {
            obs_loadings: e,
            obs_variance: 0.0,
            state_variance: 0.0,
            switch_year: None,
            initial_mean: 0.0,
            initial_variance: 1.0,
        };
        // first step is fine (S = E^2 P0), but after the exact update the
        // prediction variance collapses to zero
        assert!(matches!(
            kalman_filter(&g, &spec),
            Err(AfError::DegenerateLikelihood(_))
        ));
    }

    #[test]
    fn ml_recovers_variances_on_simulated_data() {
        // median relative error of sigma_u^2 below 10% over replications
        let t = 500usize;
        let reps = 60usize;
        let (true_su, true_se) = (0.8f64, 0.01f64);
        let mut rel_err = Vec::new();
        for rep in 0..reps {
            let mut rng = substream(1001, 0x31, rep as u64);
            let e: Vec<f64> = (0..t).map(|i| 8.0 + 0.01 * i as f64).collect();
            let mut alpha = 0.45;
            let mut g = Vec::with_capacity(t);
            for ev in &e {
                let eta: f64 = rand_distr::StandardNormal.sample(&mut rng);
                let u: f64 = rand_distr::StandardNormal.sample(&mut rng);
                g.push(alpha * ev + true_su * u);
                alpha += true_se * eta;
            }
            let fit = fit_tvaf(
                &series(1, &g),
                &series(1, &e),
                &FitOptions {
                    initial_mean: 0.45,
                    ..FitOptions::default()
                },
            )
            .unwrap();
            let su2 = fit.ml_params.0;
            rel_err.push((su2 - true_su * true_su).abs() / (true_su * true_su));
        }
        rel_err.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = rel_err[reps / 2];
        assert!(median < 0.10, "median relative error {median}");
    }

    #[test]
    fn ml_zero_state_variance_detected() {
        // constant-alpha data: estimated sigma_eta^2 collapses and the
        // smoothed path stays inside the constant-alpha CI most of the time
        let t = 200usize;
        let reps = 40usize;
        let mut inside = 0usize;
        let mut small_eta = 0usize;
        for rep in 0..reps {
            let mut rng = substream(7007, 0x32, rep as u64);
            let e: Vec<f64> = (0..t).map(|i| 6.0 + 0.05 * i as f64).collect();
            let g: Vec<f64> = e
                .iter()
                .map(|ev| {
                    let u: f64 = rand_distr::StandardNormal.sample(&mut rng);
                    0.45 * ev + 0.9 * u
                })
                .collect();
            let fit = fit_tvaf(&series(1, &g), &series(1, &e), &FitOptions::default()).unwrap();
            if fit.ml_params.1 < 1e-4 {
                small_eta += 1;
            }
            let all_inside = fit
                .smoothed_mean
                .values()
                .iter()
                .zip(fit.band_low.values().iter().zip(fit.band_high.values()))
                .all(|(_, (lo, hi))| *lo <= 0.45 && 0.45 <= *hi);
            if all_inside {
                inside += 1;
            }
        }
        assert!(
            small_eta * 10 >= reps * 9,
            "sigma_eta^2 small in only {small_eta}/{reps} runs"
        );
        assert!(
            inside * 10 >= reps * 9,
            "true alpha inside band in only {inside}/{reps} runs"
        );
    }
}
