//! Reproducible Monte Carlo engine.
//!
//! Every replication draws from its own deterministically derived RNG
//! substream, so parallel and serial runs produce bit-identical aggregate
//! statistics. Aggregation collects per-replication values into
//! position-indexed buffers and reduces them in a fixed order with pairwise
//! summation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AfError, Result};
use crate::series::AnnualSeries;
use crate::stattests;

/// splitmix64 finalizer; the standard 64-bit mixer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Independent RNG substream for `(seed, domain, index)`.
///
/// `domain` separates logical uses (arms of a study, table cells), `index`
/// is the replication counter.
pub fn substream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let k1 = splitmix64(seed ^ 0x243f6a8885a308d3);
    let k2 = splitmix64(k1 ^ splitmix64(domain));
    let k3 = splitmix64(k2 ^ splitmix64(index.wrapping_mul(0x9e3779b97f4a7c15)));
    ChaCha8Rng::seed_from_u64(k3)
}

/// Sums a slice with pairwise recursion (error growth O(log n)).
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    let dev: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    (pairwise_sum(&dev) / (n - 1.0)).sqrt()
}

fn sample_skewness(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    let m2: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let m3: Vec<f64> = values.iter().map(|v| (v - mean).powi(3)).collect();
    let v2 = pairwise_sum(&m2) / n;
    let v3 = pairwise_sum(&m3) / n;
    v3 / v2.powf(1.5)
}

/// Data-generating process for emissions and atmospheric changes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DgpSpec {
    /// True airborne fraction.
    pub alpha: f64,
    /// SD of the observation error `u_t`.
    pub sigma_u: f64,
    /// Initial emissions level `E_0`.
    pub e0: f64,
    /// Random-walk drift of emissions.
    pub drift_b: f64,
    /// SD of the emissions increments `xi_t`.
    pub sigma_xi: f64,
    /// Sample length.
    pub t: usize,
    pub seed: u64,
}

impl DgpSpec {
    fn validate(&self) -> Result<()> {
        if self.t < 2 {
            return Err(AfError::InvalidArgument("T must be >= 2".into()));
        }
        if self.sigma_u < 0.0 || self.sigma_xi < 0.0 {
            return Err(AfError::InvalidArgument("SDs must be >= 0".into()));
        }
        Ok(())
    }
}

/// Simulates `E_t = E_{t-1} + b + xi_t` for `t = 1..T`, starting from `e0`
/// (the initial level itself is not part of the output).
pub fn simulate_emissions(spec: &DgpSpec, rng: &mut ChaCha8Rng) -> Result<AnnualSeries> {
    spec.validate()?;
    let mut values = Vec::with_capacity(spec.t);
    let mut e = spec.e0;
    for _ in 0..spec.t {
        let xi: f64 = StandardNormal.sample(rng);
        e += spec.drift_b + spec.sigma_xi * xi;
        values.push(e);
    }
    AnnualSeries::new(1, values)
}

/// Simulates `G_t = alpha E_t + u_t` with `u_t ~ N(0, sigma_u^2)`.
pub fn simulate_g(
    e: &AnnualSeries,
    alpha: f64,
    sigma_u: f64,
    rng: &mut ChaCha8Rng,
) -> Result<AnnualSeries> {
    if sigma_u < 0.0 {
        return Err(AfError::InvalidArgument("sigma_u must be >= 0".into()));
    }
    let values = e
        .values()
        .iter()
        .map(|ev| {
            let u: f64 = StandardNormal.sample(rng);
            alpha * ev + sigma_u * u
        })
        .collect();
    AnnualSeries::new(e.start_year(), values)
}

/// RMSE comparison of the ratio- and regression-based estimators.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimStudyResult {
    pub t_grid: Vec<usize>,
    pub rmse_ratio_est: Vec<f64>,
    pub rmse_regr_est: Vec<f64>,
    /// `rmse_regr / rmse_ratio` per sample size.
    pub relative_rmse: Vec<f64>,
    pub replications: usize,
    pub seed: u64,
}

/// Parameters of the RMSE study; defaults follow the historical 1959-2022
/// estimates (`alpha` from the ratio fit, error SDs from models 1 and 2).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RmseStudySpec {
    pub alpha: f64,
    /// SD of the ratio-model error (model 1).
    pub sigma_u1: f64,
    /// SD of the regression-model error (model 2).
    pub sigma_u2: f64,
    pub e0: f64,
    pub drift_b: f64,
    pub sigma_xi: f64,
}

impl Default for RmseStudySpec {
    fn default() -> Self {
        Self {
            alpha: 0.4386,
            sigma_u1: 0.1258,
            sigma_u2: 0.9088,
            e0: 4.3433,
            drift_b: 0.1043,
            sigma_xi: 0.1913,
        }
    }
}

const DOMAIN_RATIO: u64 = 1;
const DOMAIN_REGR: u64 = 2;
const DOMAIN_PERTURB: u64 = 3;
const DOMAIN_CLT: u64 = 4;

/// Runs the two-estimator RMSE study across sample sizes.
///
/// The ratio arm simulates the ratio data `y_t = alpha + u_t` directly and
/// estimates by the sample mean; the regression arm simulates emissions as a
/// random walk with drift, forms `G_t = alpha E_t + u_t`, and estimates by
/// no-intercept least squares.
pub fn rmse_study(
    spec: &RmseStudySpec,
    t_grid: &[usize],
    replications: usize,
    seed: u64,
) -> Result<SimStudyResult> {
    if replications < 1000 {
        return Err(AfError::InvalidArgument(
            "replications must be >= 1000".into(),
        ));
    }
    let mut rmse1 = Vec::with_capacity(t_grid.len());
    let mut rmse2 = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        if t < 2 {
            return Err(AfError::InvalidArgument("T must be >= 2".into()));
        }
        let tf = t as f64;
        let se1: Vec<f64> = (0..replications)
            .into_par_iter()
            .map(|rep| {
                let mut rng = substream(seed, DOMAIN_RATIO ^ (t as u64) << 20, rep as u64);
                let mut acc = 0.0;
                for _ in 0..t {
                    let u: f64 = StandardNormal.sample(&mut rng);
                    acc += spec.alpha + spec.sigma_u1 * u;
                }
                let err = acc / tf - spec.alpha;
                err * err
            })
            .collect();
        let se2: Vec<f64> = (0..replications)
            .into_par_iter()
            .map(|rep| {
                let mut rng = substream(seed, DOMAIN_REGR ^ (t as u64) << 20, rep as u64);
                let dgp = DgpSpec {
                    alpha: spec.alpha,
                    sigma_u: spec.sigma_u2,
                    e0: spec.e0,
                    drift_b: spec.drift_b,
                    sigma_xi: spec.sigma_xi,
                    t,
                    seed,
                };
                let e = simulate_emissions(&dgp, &mut rng).expect("valid spec");
                let g = simulate_g(&e, spec.alpha, spec.sigma_u2, &mut rng).expect("valid sigma");
                let (mut num, mut den) = (0.0, 0.0);
                for (ev, gv) in e.values().iter().zip(g.values()) {
                    num += ev * gv;
                    den += ev * ev;
                }
                let err = num / den - spec.alpha;
                err * err
            })
            .collect();
        rmse1.push((pairwise_sum(&se1) / replications as f64).sqrt());
        rmse2.push((pairwise_sum(&se2) / replications as f64).sqrt());
    }
    let relative = rmse2
        .iter()
        .zip(&rmse1)
        .map(|(a, b)| a / b)
        .collect::<Vec<_>>();
    Ok(SimStudyResult {
        t_grid: t_grid.to_vec(),
        rmse_ratio_est: rmse1,
        rmse_regr_est: rmse2,
        relative_rmse: relative,
        replications,
        seed,
    })
}

/// Exact finite-sample variance of `T (alpha_hat_1 - alpha)` under Gaussian
/// errors and deterministic trend emissions `E_t = z0 + b t`:
/// `sigma_u^2 sum_{t=1..T} (z0 + b t)^{-2}`.
pub fn asymptotic_var_ratio(sigma_u: f64, z0: f64, b: f64, t: usize) -> Result<f64> {
    let mut acc = 0.0;
    for ti in 1..=t {
        let d = z0 + b * ti as f64;
        if d == 0.0 {
            return Err(AfError::InvalidArgument(format!(
                "z0 + b t vanishes at t = {ti}"
            )));
        }
        acc += 1.0 / (d * d);
    }
    Ok(sigma_u * sigma_u * acc)
}

/// Error law for the convergence diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErrorLaw {
    Gaussian,
    /// Unit-rate exponential minus one: zero mean, third moment 2.
    Skewed,
}

/// Summary of the limiting-distribution diagnostic for the two estimators
/// under trend-only emissions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CltDiagnostic {
    pub law: ErrorLaw,
    pub t: usize,
    pub replications: usize,
    /// Empirical skewness of `T (alpha_hat_1 - alpha)`.
    pub skewness_ratio: f64,
    /// Empirical skewness of `T^{3/2} (alpha_hat_2 - alpha)`.
    pub skewness_regr: f64,
    /// Jarque-Bera rejection rate at the 5% level over batches of the
    /// standardized ratio-estimator errors.
    pub jb_rejection_ratio: f64,
    /// Same for the regression estimator.
    pub jb_rejection_regr: f64,
}

/// Size of the batches the scaled estimator draws are split into for the
/// Jarque-Bera summary.
pub const CLT_JB_BATCH: usize = 64;

/// Simulates `T (alpha_hat_1 - alpha)` and `T^{3/2} (alpha_hat_2 - alpha)`
/// under trend-only emissions (`x_t = 0`) and the requested error law, and
/// summarizes their skewness and batchwise Jarque-Bera rejections.
pub fn clt_diagnostic(
    law: ErrorLaw,
    z0: f64,
    b: f64,
    t: usize,
    replications: usize,
    seed: u64,
) -> Result<CltDiagnostic> {
    if t < 4 || replications < CLT_JB_BATCH {
        return Err(AfError::InvalidArgument("diagnostic too small".into()));
    }
    let alpha = 0.4386;
    let e: Vec<f64> = (1..=t).map(|ti| z0 + b * ti as f64).collect();
    if e.iter().any(|v| *v == 0.0) {
        return Err(AfError::InvalidArgument("trend emissions cross zero".into()));
    }
    let sum_e2: f64 = e.iter().map(|v| v * v).sum();
    let tf = t as f64;

    let draws: Vec<(f64, f64)> = (0..replications)
        .into_par_iter()
        .map(|rep| {
            let mut rng = substream(seed, DOMAIN_CLT ^ (t as u64) << 20, rep as u64);
            let (mut mean_ratio, mut num) = (0.0, 0.0);
            for ev in &e {
                let u: f64 = match law {
                    ErrorLaw::Gaussian => StandardNormal.sample(&mut rng),
                    ErrorLaw::Skewed => {
                        let x: f64 = Exp1.sample(&mut rng);
                        x - 1.0
                    }
                };
                let g = alpha * ev + u;
                mean_ratio += g / ev;
                num += ev * g;
            }
            let a1 = mean_ratio / tf;
            let a2 = num / sum_e2;
            (tf * (a1 - alpha), tf.powf(1.5) * (a2 - alpha))
        })
        .collect();

    let d1: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let d2: Vec<f64> = draws.iter().map(|d| d.1).collect();

    let jb_rate = |values: &[f64]| -> f64 {
        let sd = sample_sd(values);
        let mean = pairwise_sum(values) / values.len() as f64;
        let standardized: Vec<f64> = values.iter().map(|v| (v - mean) / sd).collect();
        let batches = standardized.len() / CLT_JB_BATCH;
        let mut rejections = 0usize;
        for b in 0..batches {
            let chunk = &standardized[b * CLT_JB_BATCH..(b + 1) * CLT_JB_BATCH];
            let res = stattests::jarque_bera(chunk, None).expect("non-degenerate batch");
            if res.reject_at_5pct {
                rejections += 1;
            }
        }
        rejections as f64 / batches as f64
    };

    Ok(CltDiagnostic {
        law,
        t,
        replications,
        skewness_ratio: sample_skewness(&d1),
        skewness_regr: sample_skewness(&d2),
        jb_rejection_ratio: jb_rate(&d1),
        jb_rejection_regr: jb_rate(&d2),
    })
}

/// Log-log RMSE rate fit for both estimators under trend-only emissions
/// `E_t = b t` (the regime where the theoretical rates are `T` for the ratio
/// estimator and `T^{3/2}` for the regression estimator).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateCheck {
    pub t_grid: Vec<usize>,
    pub slope_ratio: f64,
    pub slope_regr: f64,
}

pub fn rate_check(
    sigma_u: f64,
    b: f64,
    t_grid: &[usize],
    replications: usize,
    seed: u64,
) -> Result<RateCheck> {
    let alpha = 0.4386;
    let mut log_t = Vec::new();
    let mut log_rmse1 = Vec::new();
    let mut log_rmse2 = Vec::new();
    for &t in t_grid {
        let e: Vec<f64> = (1..=t).map(|ti| b * ti as f64).collect();
        let sum_e2: f64 = e.iter().map(|v| v * v).sum();
        let tf = t as f64;
        let errs: Vec<(f64, f64)> = (0..replications)
            .into_par_iter()
            .map(|rep| {
                let mut rng = substream(seed, 0x5a5a ^ (t as u64) << 20, rep as u64);
                let (mut mean_ratio, mut num) = (0.0, 0.0);
                for ev in &e {
                    let u: f64 = StandardNormal.sample(&mut rng);
                    let g = alpha * ev + sigma_u * u;
                    mean_ratio += g / ev;
                    num += ev * g;
                }
                let e1 = mean_ratio / tf - alpha;
                let e2 = num / sum_e2 - alpha;
                (e1 * e1, e2 * e2)
            })
            .collect();
        let s1: Vec<f64> = errs.iter().map(|v| v.0).collect();
        let s2: Vec<f64> = errs.iter().map(|v| v.1).collect();
        log_t.push(tf.ln());
        log_rmse1.push((pairwise_sum(&s1) / replications as f64).sqrt().ln());
        log_rmse2.push((pairwise_sum(&s2) / replications as f64).sqrt().ln());
    }
    let slope = |ys: &[f64]| -> f64 {
        let n = ys.len() as f64;
        let xbar = log_t.iter().sum::<f64>() / n;
        let ybar = ys.iter().sum::<f64>() / n;
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        for (x, y) in log_t.iter().zip(ys) {
            sxx += (x - xbar) * (x - xbar);
            sxy += (x - xbar) * (y - ybar);
        }
        sxy / sxx
    };
    Ok(RateCheck {
        t_grid: t_grid.to_vec(),
        slope_ratio: slope(&log_rmse1),
        slope_regr: slope(&log_rmse2),
    })
}

/// Adds independent Gaussian noise to a scenario's deterministic
/// trajectories; `sigma_g`/`sigma_e` default to the historical model-2
/// residual SD and the historical SD of the emissions increments.
pub fn perturb_scenario(
    g_det: &AnnualSeries,
    e_det: &AnnualSeries,
    sigma_g: f64,
    sigma_e: f64,
    seed: u64,
) -> Result<(AnnualSeries, AnnualSeries)> {
    if sigma_g < 0.0 || sigma_e < 0.0 {
        return Err(AfError::InvalidArgument("SDs must be >= 0".into()));
    }
    let mut rng = substream(seed, DOMAIN_PERTURB, 0);
    let g = g_det
        .values()
        .iter()
        .map(|v| {
            let z: f64 = StandardNormal.sample(&mut rng);
            v + sigma_g * z
        })
        .collect();
    let e = e_det
        .values()
        .iter()
        .map(|v| {
            let z: f64 = StandardNormal.sample(&mut rng);
            v + sigma_e * z
        })
        .collect();
    Ok((
        g_det.with_values(g)?,
        e_det.with_values(e)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn emissions_deterministic_line() {
        let spec = DgpSpec {
            alpha: 0.4386,
            sigma_u: 0.0,
            e0: 4.3433,
            drift_b: 0.1043,
            sigma_xi: 0.0,
            t: 64,
            seed: 1,
        };
        let mut rng = substream(1, 0, 0);
        let e = simulate_emissions(&spec, &mut rng).unwrap();
        assert_eq!(e.len(), 64);
        assert_abs_diff_eq!(
            *e.values().last().unwrap(),
            4.3433 + 64.0 * 0.1043,
            epsilon = 1e-12
        );
    }

    #[test]
    fn emissions_increment_variance() {
        let spec = DgpSpec {
            alpha: 0.0,
            sigma_u: 0.0,
            e0: 0.0,
            drift_b: 0.0,
            sigma_xi: 1.0,
            t: 10_000,
            seed: 7,
        };
        let mut rng = substream(7, 0, 0);
        let e = simulate_emissions(&spec, &mut rng).unwrap();
        let d = e.diff().unwrap();
        let var = d.values().iter().map(|v| v * v).sum::<f64>() / d.len() as f64;
        assert_relative_eq!(var, 1.0, max_relative = 0.05);
    }

    #[test]
    fn seeded_runs_identical() {
        let spec = DgpSpec {
            alpha: 0.4,
            sigma_u: 0.9,
            e0: 4.0,
            drift_b: 0.1,
            sigma_xi: 0.2,
            t: 50,
            seed: 11,
        };
        let a = simulate_emissions(&spec, &mut substream(11, 2, 5)).unwrap();
        let b = simulate_emissions(&spec, &mut substream(11, 2, 5)).unwrap();
        assert_eq!(a, b);
        let ga = simulate_g(&a, 0.4, 0.9, &mut substream(11, 3, 5)).unwrap();
        let gb = simulate_g(&b, 0.4, 0.9, &mut substream(11, 3, 5)).unwrap();
        assert_eq!(ga, gb);
    }

    #[test]
    fn simulate_g_zero_noise_is_proportional() {
        let e = AnnualSeries::new(1, vec![1.0, 2.0, 3.0]).unwrap();
        let g = simulate_g(&e, 0.45, 0.0, &mut substream(0, 0, 0)).unwrap();
        for (gv, ev) in g.values().iter().zip(e.values()) {
            assert_abs_diff_eq!(gv, &(0.45 * ev), epsilon = 1e-15);
        }
    }

    #[test]
    fn simulate_g_residual_sd() {
        let e = AnnualSeries::new(1, vec![5.0; 100_000]).unwrap();
        let g = simulate_g(&e, 0.45, 0.9088, &mut substream(3, 9, 0)).unwrap();
        let resid: Vec<f64> = g.values().iter().map(|v| v - 0.45 * 5.0).collect();
        let sd = sample_sd(&resid);
        assert_relative_eq!(sd, 0.9088, max_relative = 0.02);
    }

    #[test]
    fn asymptotic_var_hand_sum() {
        // sigma=1, z0=0, b=1, T=3: 1 + 1/4 + 1/9 = 49/36
        let v = asymptotic_var_ratio(1.0, 0.0, 1.0, 3).unwrap();
        assert_abs_diff_eq!(v, 49.0 / 36.0, epsilon = 1e-14);
    }

    #[test]
    fn asymptotic_var_series_limit() {
        // Basel series: sum 1/t^2 -> pi^2/6.
        let v = asymptotic_var_ratio(1.0, 0.0, 1.0, 1_000_000).unwrap();
        assert_abs_diff_eq!(v, std::f64::consts::PI.powi(2) / 6.0, epsilon = 1e-5);
    }

    #[test]
    fn asymptotic_var_rejects_zero_denominator() {
        assert!(asymptotic_var_ratio(1.0, -2.0, 1.0, 5).is_err());
    }

    #[test]
    fn perturb_zero_sigma_is_identity() {
        let g = AnnualSeries::new(2023, vec![1.0, 2.0]).unwrap();
        let e = AnnualSeries::new(2023, vec![10.0, 9.0]).unwrap();
        let (gp, ep) = perturb_scenario(&g, &e, 0.0, 0.0, 42).unwrap();
        assert_eq!(gp, g);
        assert_eq!(ep, e);
        let (gp1, _) = perturb_scenario(&g, &e, 0.5, 0.1, 42).unwrap();
        let (gp2, _) = perturb_scenario(&g, &e, 0.5, 0.1, 42).unwrap();
        assert_eq!(gp1, gp2);
    }

    #[test]
    fn perturbation_noise_sd_near_target() {
        let n = 78;
        let g = AnnualSeries::new(2023, vec![0.0; n]).unwrap();
        let e = AnnualSeries::new(2023, vec![0.0; n]).unwrap();
        let mut devs_g = Vec::new();
        let mut devs_e = Vec::new();
        for seed in 0..100u64 {
            let (gp, ep) = perturb_scenario(&g, &e, 0.9088, 0.1913, seed).unwrap();
            devs_g.extend_from_slice(gp.values());
            devs_e.extend_from_slice(ep.values());
        }
        assert_relative_eq!(sample_sd(&devs_g), 0.9088, max_relative = 0.10);
        assert_relative_eq!(sample_sd(&devs_e), 0.1913, max_relative = 0.10);
    }

    #[test]
    fn unbiased_under_trend_only_emissions() {
        // mean of alpha_hat_1 within 3 MC SEs of alpha under x_t = 0.
        let alpha = 0.4386;
        let t = 64usize;
        let reps = 20_000usize;
        let e: Vec<f64> = (1..=t).map(|ti| 4.3433 + 0.1043 * ti as f64).collect();
        let draws: Vec<f64> = (0..reps)
            .map(|rep| {
                let mut rng = substream(99, 1, rep as u64);
                let mut mean_ratio = 0.0;
                for ev in &e {
                    let u: f64 = StandardNormal.sample(&mut rng);
                    mean_ratio += (alpha * ev + 0.9088 * u) / ev;
                }
                mean_ratio / t as f64
            })
            .collect();
        let mean = pairwise_sum(&draws) / reps as f64;
        let mc_se = sample_sd(&draws) / (reps as f64).sqrt();
        assert!(
            (mean - alpha).abs() < 3.0 * mc_se,
            "bias {} vs 3 MC SE {}",
            mean - alpha,
            3.0 * mc_se
        );
    }
}
