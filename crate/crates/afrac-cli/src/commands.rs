//! Subcommand implementations: each validates its configuration, delegates
//! to the library, and writes CSV/JSON artifacts (plus a small SVG chart for
//! figure-like outputs) under `--out`.

use std::path::{Path, PathBuf};

use clap::Args;
use serde_json::json;

use afrac::caf::{caf_full, caf_window};
use afrac::dataset::{
    load_carbon_csv, load_covariates_csv, load_scenario_csv, CarbonDataset, LulccSource,
};
use afrac::deming::{deming_fit, DELTA_GRID};
use afrac::error::{AfError, Result};
use afrac::estimators::{
    default_hac_lag, ratio_af, ratio_af_cov, regression_af, RegressionFit,
};
use afrac::series::AnnualSeries;
use afrac::sim::{perturb_scenario, rmse_study, RmseStudySpec};
use afrac::stattests::{
    adf_test, engle_granger, jarque_bera, simulate_critical_values, AdfVariant, CvTables,
    TableKind,
};
use afrac::tvaf::{detect_switch, fit_tvaf, kalman_filter, kalman_smoother, FitOptions, StateSpaceSpec, TvafEstimate};

use crate::svg;

/// Historical defaults for scenario perturbation: the model-2 residual SD
/// and the SD of the emissions increments on 1959-2022.
const DEFAULT_SIGMA_G: f64 = 0.9088;
const DEFAULT_SIGMA_E: f64 = 0.1913;
/// Seed of the shipped critical-value tables and default CLI seed.
pub const DEFAULT_SEED: u64 = 1959;

#[derive(Args)]
pub struct DataArgs {
    /// Carbon-budget CSV (year,g,e_ff,e_lulcc_gcp,e_lulcc_hc,e_lulcc_vma)
    #[arg(long, default_value = "data/carbon.csv")]
    pub data: PathBuf,
    /// Covariates CSV (year,enso,vai)
    #[arg(long)]
    pub covariates: Option<PathBuf>,
    /// LULCC source for total emissions
    #[arg(long, default_value = "gcp")]
    pub lulcc: String,
    /// First year of the analysis window
    #[arg(long)]
    pub from: Option<i32>,
    /// Last year of the analysis window
    #[arg(long)]
    pub to: Option<i32>,
}

impl DataArgs {
    fn source(&self) -> Result<LulccSource> {
        self.lulcc.parse()
    }

    fn load(&self, need_covariates: bool) -> Result<CarbonDataset> {
        let mut ds = load_carbon_csv(&self.data, self.source()?)?;
        if need_covariates {
            let path = self
                .covariates
                .clone()
                .unwrap_or_else(|| default_sibling(&self.data, "covariates.csv"));
            if !path.exists() {
                return Err(AfError::Io {
                    path: path.display().to_string(),
                    source: std::io::Error::new(
                        std::io::ErrorKind::NotFound,
                        "covariates file not found",
                    ),
                });
            }
            let (enso, vai) = load_covariates_csv(&path)?;
            ds = ds.with_covariates(enso, vai)?;
        }
        let from = self.from.unwrap_or_else(|| ds.first_year());
        let to = self.to.unwrap_or_else(|| ds.last_year());
        ds.window(from, to)
    }
}

fn default_sibling(data: &Path, name: &str) -> PathBuf {
    data.parent().unwrap_or(Path::new(".")).join(name)
}

fn ensure_out(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| AfError::Io {
        path: dir.display().to_string(),
        source: e,
    })
}

fn write_text(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|e| AfError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    write_text(path, &format!("{:#}\n", value))
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Sample SD (ddof 1) of the demeaned emissions increments.
fn emission_increment_sd(e: &AnnualSeries) -> Result<(f64, f64)> {
    let d = e.diff()?;
    let n = d.len() as f64;
    let b = d.mean();
    let ss: f64 = d.values().iter().map(|v| (v - b) * (v - b)).sum();
    Ok((b, (ss / (n - 1.0)).sqrt()))
}

// ---------------------------------------------------------------- estimate

#[derive(Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Newey-West lag (default: floor(4 (T/100)^{2/9}))
    #[arg(long)]
    pub hac_lag: Option<usize>,
    /// Fit only the models without ENSO/VAI covariates
    #[arg(long)]
    pub no_covariates: bool,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Print the JSON artifact to stdout as well
    #[arg(long)]
    pub json: bool,
}

fn fit_row(fit: &RegressionFit, rel_to: f64) -> serde_json::Value {
    let gammas = if fit.coefficients.len() == 3 {
        json!({
            "gamma1": fit.coefficients[1],
            "gamma1_sd": fit.standard_errors[1],
            "gamma2": fit.coefficients[2],
            "gamma2_sd": fit.standard_errors[2],
        })
    } else {
        json!({})
    };
    let mut row = json!({
        "alpha": fit.alpha(),
        "se": fit.alpha_se(),
        "relative_se": fit.alpha_se() / rel_to,
        "ci95": [fit.ci_95[0].0, fit.ci_95[0].1],
        "sd_u": fit.residual_sd,
        "r2": fit.r_squared,
        "hac_lag": fit.hac_lag,
    });
    row.as_object_mut()
        .unwrap()
        .extend(gammas.as_object().unwrap().clone());
    row
}

pub fn estimate(args: &EstimateArgs) -> Result<()> {
    let ds = args.data.load(!args.no_covariates)?;
    let lag = args.hac_lag.unwrap_or_else(|| default_hac_lag(ds.len()));
    let m1 = ratio_af(&ds, lag)?;
    let m2 = regression_af(&ds, false, lag)?;
    let (m3, m4) = if args.no_covariates {
        (None, None)
    } else {
        (
            Some(ratio_af_cov(&ds, lag)?),
            Some(regression_af(&ds, true, lag)?),
        )
    };
    let se1 = m1.alpha_se();

    ensure_out(&args.out)?;
    let mut csv = String::from(
        "model,alpha,se,relative_se,ci_lo,ci_hi,sd_u,r2,gamma1,gamma1_sd,gamma2,gamma2_sd,hac_lag\n",
    );
    let mut models = serde_json::Map::new();
    let fits: Vec<(&str, &RegressionFit)> = [
        Some(("1_ratio", &m1)),
        Some(("2_regression", &m2)),
        m3.as_ref().map(|f| ("3_ratio_cov", f)),
        m4.as_ref().map(|f| ("4_regression_cov", f)),
    ]
    .into_iter()
    .flatten()
    .collect();
    for (name, fit) in &fits {
        let (g1, g1sd, g2, g2sd) = if fit.coefficients.len() == 3 {
            (
                Some(fit.coefficients[1]),
                Some(fit.standard_errors[1]),
                Some(fit.coefficients[2]),
                Some(fit.standard_errors[2]),
            )
        } else {
            (None, None, None, None)
        };
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            name,
            fit.alpha(),
            fit.alpha_se(),
            fit.alpha_se() / se1,
            fit.ci_95[0].0,
            fit.ci_95[0].1,
            fit.residual_sd,
            fit.r_squared,
            opt_cell(g1),
            opt_cell(g1sd),
            opt_cell(g2),
            opt_cell(g2sd),
            fit.hac_lag,
        ));
        models.insert(name.to_string(), fit_row(fit, se1));
    }
    write_text(&args.out.join("estimate.csv"), &csv)?;
    let payload = json!({
        "config": {
            "data": args.data.data.display().to_string(),
            "lulcc": ds.lulcc_source.to_string(),
            "from": ds.first_year(),
            "to": ds.last_year(),
            "hac_lag": lag,
            "covariates": !args.no_covariates,
        },
        "models": models,
    });
    write_json(&args.out.join("estimate.json"), &payload)?;
    if args.json {
        println!("{payload:#}");
    } else {
        for (name, fit) in &fits {
            println!(
                "{name}: alpha = {:.4} (se {:.4}), sd_u = {:.4}, R2 = {:.4}",
                fit.alpha(),
                fit.alpha_se(),
                fit.residual_sd,
                fit.r_squared
            );
        }
    }
    Ok(())
}

// ------------------------------------------------------------------- tests

#[derive(Args)]
pub struct TestsArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Directory of simulated critical-value tables
    #[arg(long)]
    pub tables: Option<PathBuf>,
    /// Largest ADF/Engle-Granger lag order
    #[arg(long, default_value_t = 5)]
    pub max_lags: usize,
    /// Report Jarque-Bera p-values from the finite-sample table instead of
    /// the chi-squared(2) asymptotics
    #[arg(long)]
    pub finite_sample: bool,
    /// Include an intercept in the Engle-Granger step-1 regression
    #[arg(long)]
    pub eg_intercept: bool,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub json: bool,
}

pub fn tests(args: &TestsArgs) -> Result<()> {
    let ds = args.data.load(false)?;
    let tables_dir = args
        .tables
        .clone()
        .unwrap_or_else(|| default_sibling(&args.data.data, "tables"));
    let tables = CvTables::load_dir(&tables_dir)?;
    let e = ds.total_emissions();
    let g = ds.g.clone();

    ensure_out(&args.out)?;
    let mut csv = String::from("series,test,lags,statistic,p_value\n");
    let mut rows = Vec::new();
    for (label, series) in [("G", &g), ("E", &e)] {
        for variant in AdfVariant::ALL {
            for lags in 0..=args.max_lags {
                let res = adf_test(series, variant, lags, &tables)?;
                csv.push_str(&format!(
                    "{label},adf_{},{lags},{},{}\n",
                    variant.label(),
                    res.statistic,
                    res.p_value
                ));
                rows.push(json!({
                    "series": label,
                    "test": format!("adf_{}", variant.label()),
                    "lags": lags,
                    "statistic": res.statistic,
                    "p_value": res.p_value,
                }));
            }
        }
    }
    let mut eg_slope = 0.0;
    for lags in 0..=args.max_lags {
        let fit = engle_granger(&g, &e, lags, args.eg_intercept, &tables)?;
        eg_slope = fit.slope;
        csv.push_str(&format!(
            "G~E,engle_granger,{lags},{},{}\n",
            fit.result.statistic, fit.result.p_value
        ));
        rows.push(json!({
            "series": "G~E",
            "test": "engle_granger",
            "lags": lags,
            "statistic": fit.result.statistic,
            "p_value": fit.result.p_value,
        }));
    }

    // normality of the cointegrating-regression residuals
    let eg0 = engle_granger(&g, &e, 0, args.eg_intercept, &tables)?;
    let jb_table = tables.get(TableKind::JarqueBera).ok();
    let jb_asym = jarque_bera(eg0.residuals.values(), None)?;
    let jb_fs = jb_table
        .map(|t| jarque_bera(eg0.residuals.values(), Some(t)))
        .transpose()?;
    let jb_resid_p = if args.finite_sample {
        jb_fs
            .as_ref()
            .map(|r| r.p_value)
            .ok_or_else(|| AfError::MissingTable {
                family: "jb".into(),
                variant: "gaussian".into(),
            })?
    } else {
        jb_asym.p_value
    };
    csv.push_str(&format!(
        "u_hat,jarque_bera,0,{},{}\n",
        jb_asym.statistic, jb_resid_p
    ));

    // normality of the emission increments around the drift
    let diffs = e.diff()?;
    let b = diffs.mean();
    let xi: Vec<f64> = diffs.values().iter().map(|v| v - b).collect();
    let jb_xi = jarque_bera(&xi, None)?;
    let jb_xi_p = if args.finite_sample {
        jb_table
            .map(|t| jarque_bera(&xi, Some(t)))
            .transpose()?
            .map(|r| r.p_value)
            .unwrap_or(jb_xi.p_value)
    } else {
        jb_xi.p_value
    };
    csv.push_str(&format!(
        "xi_hat,jarque_bera,0,{},{}\n",
        jb_xi.statistic, jb_xi_p
    ));
    write_text(&args.out.join("tests.csv"), &csv)?;

    let (b_hat, sd_xi) = emission_increment_sd(&e)?;
    let payload = json!({
        "config": {
            "data": args.data.data.display().to_string(),
            "lulcc": ds.lulcc_source.to_string(),
            "from": ds.first_year(),
            "to": ds.last_year(),
            "tables": tables_dir.display().to_string(),
            "max_lags": args.max_lags,
            "finite_sample": args.finite_sample,
            "eg_intercept": args.eg_intercept,
        },
        "adf_eg": rows,
        "cointegrating_slope": eg_slope,
        "jb_residuals": {
            "statistic": jb_asym.statistic,
            "p_asymptotic": jb_asym.p_value,
            "p_finite_sample": jb_fs.as_ref().map(|r| r.p_value),
        },
        "jb_emission_increments": {
            "statistic": jb_xi.statistic,
            "p_asymptotic": jb_xi.p_value,
        },
        "emissions_drift": { "b_hat": b_hat, "sd_xi": sd_xi },
    });
    write_json(&args.out.join("tests.json"), &payload)?;
    if args.json {
        println!("{payload:#}");
    } else {
        println!(
            "wrote {} test rows; JB(residuals) p = {:.4}, JB(increments) p = {:.2e}",
            rows.len(),
            jb_resid_p,
            jb_xi_p
        );
    }
    Ok(())
}

// ------------------------------------------------------------------ deming

#[derive(Args)]
pub struct DemingArgs {
    /// Carbon-budget CSV
    #[arg(long, default_value = "data/carbon.csv")]
    pub data: PathBuf,
    /// First year of the recent subsample
    #[arg(long, default_value_t = 1992)]
    pub sub_from: i32,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub json: bool,
}

pub fn deming(args: &DemingArgs) -> Result<()> {
    ensure_out(&args.out)?;
    let mut csv = String::from("dataset,window,delta,alpha\n");
    let mut grid = Vec::new();
    for source in LulccSource::ALL {
        let ds = load_carbon_csv(&args.data, source)?;
        let windows = [
            (ds.first_year(), ds.last_year()),
            (args.sub_from, ds.last_year()),
        ];
        for (from, to) in windows {
            let w = ds.window(from, to)?;
            let e = w.total_emissions();
            for delta in DELTA_GRID {
                let alpha = deming_fit(&w.g, &e, delta)?;
                csv.push_str(&format!("{source},{from}-{to},{delta},{alpha}\n"));
                grid.push(json!({
                    "dataset": source.to_string(),
                    "window": format!("{from}-{to}"),
                    "delta": delta,
                    "alpha": alpha,
                }));
            }
        }
    }
    write_text(&args.out.join("deming.csv"), &csv)?;
    let payload = json!({
        "config": { "data": args.data.display().to_string(), "sub_from": args.sub_from },
        "grid": grid,
    });
    write_json(&args.out.join("deming.json"), &payload)?;
    if args.json {
        println!("{payload:#}");
    } else {
        println!("wrote {} Deming estimates", grid.len());
    }
    Ok(())
}

// --------------------------------------------------------------------- caf

#[derive(Args)]
pub struct CafArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Trailing-window length for the per-year CAF series (default: full)
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub json: bool,
}

pub fn caf(args: &CafArgs) -> Result<()> {
    ensure_out(&args.out)?;
    let mut headline = serde_json::Map::new();
    for source in LulccSource::ALL {
        let full = load_carbon_csv(&args.data.data, source)?;
        let from = args.data.from.unwrap_or_else(|| full.first_year());
        let to = args.data.to.unwrap_or_else(|| full.last_year());
        let ds = full.window(from, to)?;
        let value = caf_full(&ds.g, &ds.total_emissions())?;
        headline.insert(source.to_string(), json!(value));
    }

    let ds = args.data.load(false)?;
    let e = ds.total_emissions();
    let w = args.window.unwrap_or(ds.len());
    let series = caf_window(&ds.g, &e, w)?;
    let mut csv = String::from("year,caf\n");
    for (year, v) in series.iter() {
        csv.push_str(&format!("{year},{}\n", opt_cell(v)));
    }
    write_text(&args.out.join("caf_series.csv"), &csv)?;

    let points: Vec<(f64, Option<f64>)> =
        series.iter().map(|(y, v)| (y as f64, v)).collect();
    svg::write_chart(
        &args.out.join("caf.svg"),
        &format!("Trailing-window CAF (w = {w}, {})", ds.lulcc_source),
        &[svg::Line { label: "CAF", points }],
        None,
    )
    .map_err(|e| AfError::Io {
        path: args.out.join("caf.svg").display().to_string(),
        source: e,
    })?;

    let payload = json!({
        "config": {
            "data": args.data.data.display().to_string(),
            "lulcc": ds.lulcc_source.to_string(),
            "from": ds.first_year(),
            "to": ds.last_year(),
            "window": w,
        },
        "caf_full": headline,
    });
    write_json(&args.out.join("caf.json"), &payload)?;
    if args.json {
        println!("{payload:#}");
    } else {
        for (k, v) in &headline {
            println!("CAF {k}: {:.4}", v.as_f64().unwrap());
        }
    }
    Ok(())
}

// -------------------------------------------------------------------- tvaf

#[derive(Args)]
pub struct TvafArgs {
    /// Scenario trajectory CSV (year,g,e); omit to run on historical data
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Label recorded with the scenario
    #[arg(long, default_value = "SSP1-2.6")]
    pub scenario_id: String,
    /// Historical carbon-budget CSV (initial mean, perturbation SDs,
    /// and the `--history` concatenation come from here)
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "gcp")]
    pub lulcc: String,
    /// Concatenate the historical sample ahead of the scenario years
    #[arg(long)]
    pub history: bool,
    /// Skip the Gaussian perturbation of the scenario trajectories
    #[arg(long)]
    pub no_perturb: bool,
    /// Perturbation SD for G (default: historical model-2 residual SD)
    #[arg(long)]
    pub sigma_g: Option<f64>,
    /// Perturbation SD for E (default: historical increment SD)
    #[arg(long)]
    pub sigma_e: Option<f64>,
    /// Fix sigma_u^2 instead of estimating it (requires --fixed-sigma-eta2)
    #[arg(long)]
    pub fixed_sigma_u2: Option<f64>,
    /// Fix sigma_eta^2 instead of estimating it (requires --fixed-sigma-u2)
    #[arg(long)]
    pub fixed_sigma_eta2: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub json: bool,
}

pub fn tvaf(args: &TvafArgs) -> Result<()> {
    ensure_out(&args.out)?;

    // Historical inputs, when provided, set the prior mean and noise scales.
    let historical = match &args.data {
        Some(path) => Some(load_carbon_csv(path, args.lulcc.parse()?)?),
        None => None,
    };
    let (hist_alpha2, hist_sigma_e) = match &historical {
        Some(ds) => {
            let lag = default_hac_lag(ds.len());
            let fit = regression_af(ds, false, lag)?;
            let (_, sd_xi) = emission_increment_sd(&ds.total_emissions())?;
            (Some(fit.alpha()), Some(sd_xi))
        }
        None => (None, None),
    };

    let (g, e, perturbed) = match &args.scenario {
        Some(path) => {
            let scenario = load_scenario_csv(path, &args.scenario_id)?;
            let (mut g, mut e) = (scenario.g_det.clone(), scenario.e_det.clone());
            let mut perturbed = false;
            if !args.no_perturb {
                let sg = args.sigma_g.unwrap_or(DEFAULT_SIGMA_G);
                let se = args
                    .sigma_e
                    .or(hist_sigma_e)
                    .unwrap_or(DEFAULT_SIGMA_E);
                let (gp, ep) = perturb_scenario(&g, &e, sg, se, args.seed)?;
                g = gp;
                e = ep;
                perturbed = true;
            }
            if args.history {
                let hist = historical.as_ref().ok_or_else(|| {
                    AfError::InvalidArgument("--history requires --data".into())
                })?;
                let he = hist.total_emissions();
                if he.end_year() + 1 != g.start_year() {
                    return Err(AfError::InvalidArgument(format!(
                        "historical data ends {} but scenario starts {}",
                        he.end_year(),
                        g.start_year()
                    )));
                }
                let mut gv = hist.g.values().to_vec();
                gv.extend_from_slice(g.values());
                let mut ev = he.values().to_vec();
                ev.extend_from_slice(e.values());
                g = AnnualSeries::new(hist.first_year(), gv)?;
                e = AnnualSeries::new(hist.first_year(), ev)?;
            }
            (g, e, perturbed)
        }
        None => {
            let hist = historical.as_ref().ok_or_else(|| {
                AfError::InvalidArgument("either --scenario or --data is required".into())
            })?;
            (hist.g.clone(), hist.total_emissions(), false)
        }
    };

    let options = FitOptions {
        initial_mean: hist_alpha2.unwrap_or(0.45),
        ..FitOptions::default()
    };
    let estimate: TvafEstimate = match (args.fixed_sigma_u2, args.fixed_sigma_eta2) {
        (Some(su2), Some(se2)) => {
            let spec = StateSpaceSpec {
                obs_loadings: e.clone(),
                obs_variance: su2,
                state_variance: se2,
                switch_year: detect_switch(&e),
                initial_mean: options.initial_mean,
                initial_variance: options.initial_variance,
            };
            let filter = kalman_filter(&g, &spec)?;
            kalman_smoother(&g, &filter, &spec)?
        }
        (None, None) => fit_tvaf(&g, &e, &options)?,
        _ => {
            return Err(AfError::InvalidArgument(
                "--fixed-sigma-u2 and --fixed-sigma-eta2 must be given together".into(),
            ))
        }
    };

    let mut csv = String::from("year,alpha_smoothed,var,lo95,hi95,alpha_filtered,ratio\n");
    for (i, (year, m)) in estimate.smoothed_mean.iter().enumerate() {
        let ev = e.values()[i];
        let ratio = if ev.abs() < 1e-9 {
            None
        } else {
            Some(g.values()[i] / ev)
        };
        csv.push_str(&format!(
            "{year},{m},{},{},{},{},{}\n",
            estimate.smoothed_variance.values()[i],
            estimate.band_low.values()[i],
            estimate.band_high.values()[i],
            estimate.filtered_mean.values()[i],
            opt_cell(ratio),
        ));
    }
    write_text(&args.out.join("tvaf.csv"), &csv)?;

    let smoothed: Vec<(f64, Option<f64>)> = estimate
        .smoothed_mean
        .iter()
        .map(|(y, v)| (y as f64, Some(v)))
        .collect();
    let ratio_pts: Vec<(f64, Option<f64>)> = estimate
        .smoothed_mean
        .iter()
        .enumerate()
        .map(|(i, (y, _))| {
            let ev = e.values()[i];
            let r = if ev.abs() < 1e-9 { None } else { Some(g.values()[i] / ev) };
            (y as f64, r)
        })
        .collect();
    let band = svg::Band {
        low: estimate.band_low.iter().map(|(y, v)| (y as f64, v)).collect(),
        high: estimate.band_high.iter().map(|(y, v)| (y as f64, v)).collect(),
    };
    svg::write_chart(
        &args.out.join("tvaf.svg"),
        &format!("Time-varying airborne fraction ({})", args.scenario_id),
        &[
            svg::Line { label: "ratio G/E", points: ratio_pts },
            svg::Line { label: "smoothed alpha", points: smoothed },
        ],
        Some(&band),
    )
    .map_err(|e| AfError::Io {
        path: args.out.join("tvaf.svg").display().to_string(),
        source: e,
    })?;

    let payload = json!({
        "config": {
            "scenario": args.scenario.as_ref().map(|p| p.display().to_string()),
            "scenario_id": args.scenario_id,
            "data": args.data.as_ref().map(|p| p.display().to_string()),
            "history": args.history,
            "perturbed": perturbed,
            "sigma_g": args.sigma_g.unwrap_or(DEFAULT_SIGMA_G),
            "sigma_e": args.sigma_e.or(hist_sigma_e).unwrap_or(DEFAULT_SIGMA_E),
            "seed": args.seed,
            "initial_mean": options.initial_mean,
        },
        "ml_params": { "sigma_u2": estimate.ml_params.0, "sigma_eta2": estimate.ml_params.1 },
        "loglik": estimate.loglik,
        "switch_year": estimate.switch_year,
        "optimizer": estimate.optimizer,
    });
    write_json(&args.out.join("tvaf.json"), &payload)?;
    if args.json {
        println!("{payload:#}");
    } else {
        println!(
            "tvaf: sigma_u2 = {:.4}, sigma_eta2 = {:.6}, loglik = {:.2}, switch = {:?}",
            estimate.ml_params.0, estimate.ml_params.1, estimate.loglik, estimate.switch_year
        );
    }
    Ok(())
}

// ---------------------------------------------------------------- simstudy

#[derive(Args)]
pub struct SimstudyArgs {
    /// Sample sizes, comma separated
    #[arg(long, default_value = "64,103,142", value_delimiter = ',')]
    pub t_grid: Vec<usize>,
    #[arg(long, default_value_t = 10_000)]
    pub replications: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Carbon-budget CSV for run-time estimation of the emissions-increment
    /// SD (falls back to the bundled historical value)
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value = "gcp")]
    pub lulcc: String,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long)]
    pub json: bool,
}

pub fn simstudy(args: &SimstudyArgs) -> Result<()> {
    ensure_out(&args.out)?;
    let mut spec = RmseStudySpec::default();
    if let Some(path) = &args.data {
        let ds = load_carbon_csv(path, args.lulcc.parse()?)?;
        let e = ds.total_emissions();
        let (b, sd_xi) = emission_increment_sd(&e)?;
        spec.sigma_xi = sd_xi;
        spec.drift_b = b;
        spec.e0 = ds.total_emissions().values()[0];
    }
    let result = rmse_study(&spec, &args.t_grid, args.replications, args.seed)?;

    let mut csv = String::from("T,rmse_ratio,rmse_regression,relative_rmse\n");
    for (i, t) in result.t_grid.iter().enumerate() {
        csv.push_str(&format!(
            "{t},{},{},{}\n",
            result.rmse_ratio_est[i], result.rmse_regr_est[i], result.relative_rmse[i]
        ));
    }
    write_text(&args.out.join("simstudy.csv"), &csv)?;

    let lines = vec![
        svg::Line {
            label: "RMSE ratio estimator",
            points: result
                .t_grid
                .iter()
                .zip(&result.rmse_ratio_est)
                .map(|(t, v)| (*t as f64, Some(*v)))
                .collect(),
        },
        svg::Line {
            label: "RMSE regression estimator",
            points: result
                .t_grid
                .iter()
                .zip(&result.rmse_regr_est)
                .map(|(t, v)| (*t as f64, Some(*v)))
                .collect(),
        },
    ];
    svg::write_chart(&args.out.join("simstudy.svg"), "Estimator RMSE by sample size", &lines, None)
        .map_err(|e| AfError::Io {
            path: args.out.join("simstudy.svg").display().to_string(),
            source: e,
        })?;

    let payload = json!({
        "config": {
            "t_grid": args.t_grid,
            "replications": args.replications,
            "seed": args.seed,
            "dgp": spec,
        },
        "result": result,
    });
    write_json(&args.out.join("simstudy.json"), &payload)?;
    if args.json {
        println!("{payload:#}");
    } else {
        for (i, t) in result.t_grid.iter().enumerate() {
            println!(
                "T = {t}: rmse1 = {:.5}, rmse2 = {:.5}, relative = {:.3}",
                result.rmse_ratio_est[i], result.rmse_regr_est[i], result.relative_rmse[i]
            );
        }
    }
    Ok(())
}

// ------------------------------------------------------------------ tables

#[derive(Args)]
pub struct TablesArgs {
    /// Table kinds to generate (default: all)
    #[arg(long, value_delimiter = ',')]
    pub kinds: Option<Vec<String>>,
    /// Sample-size grid override, comma separated
    #[arg(long, value_delimiter = ',')]
    pub t_grid: Option<Vec<usize>>,
    #[arg(long, default_value_t = 200_000)]
    pub replications: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value = "data/tables")]
    pub out: PathBuf,
}

pub fn tables(args: &TablesArgs) -> Result<()> {
    let selected: Vec<TableKind> = match &args.kinds {
        None => TableKind::ALL.to_vec(),
        Some(names) => {
            let mut kinds = Vec::new();
            for name in names {
                let kind = TableKind::ALL
                    .into_iter()
                    .find(|k| k.file_stem() == *name)
                    .ok_or_else(|| {
                        AfError::InvalidArgument(format!(
                            "unknown table kind `{name}` (expected one of {})",
                            TableKind::ALL
                                .iter()
                                .map(|k| k.file_stem())
                                .collect::<Vec<_>>()
                                .join(", ")
                        ))
                    })?;
                kinds.push(kind);
            }
            kinds
        }
    };
    ensure_out(&args.out)?;
    for kind in selected {
        let t_grid = args
            .t_grid
            .clone()
            .unwrap_or_else(|| afrac::stattests::default_t_grid(kind));
        let started = std::time::Instant::now();
        let table = simulate_critical_values(kind, &t_grid, args.replications, args.seed)?;
        table.save(&args.out)?;
        println!(
            "{}: {} sample sizes x {} reps in {:.1}s",
            kind.file_stem(),
            t_grid.len(),
            args.replications,
            started.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
