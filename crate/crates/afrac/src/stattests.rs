//! Unit-root, cointegration, and normality tests.
//!
//! ADF statistics are t-ratios on the lagged level in the regression of the
//! first difference on deterministic terms (per variant), the lagged level,
//! and lagged differences. P-values come from simulated finite-sample
//! quantile tables shipped with the repository and regenerable from recorded
//! seed metadata; values outside the tabulated range clamp to
//! `[0.001, 0.999]`.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AfError, Result};
use crate::linalg::{xtx_inverse, Matrix};
use crate::series::AnnualSeries;
use crate::sim::substream;

/// Deterministic-terms variant of the ADF regression.
///
/// * `Ar`: no deterministic terms (unit root vs AR).
/// * `Ard`: constant (unit root vs AR with drift).
/// * `Ts`: constant and linear trend (unit root with drift vs
///   trend-stationary AR).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AdfVariant {
    Ar,
    Ard,
    Ts,
}

impl AdfVariant {
    pub const ALL: [AdfVariant; 3] = [AdfVariant::Ar, AdfVariant::Ard, AdfVariant::Ts];

    fn n_deterministic(self) -> usize {
        match self {
            AdfVariant::Ar => 0,
            AdfVariant::Ard => 1,
            AdfVariant::Ts => 2,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            AdfVariant::Ar => "ar",
            AdfVariant::Ard => "ard",
            AdfVariant::Ts => "ts",
        }
    }
}

/// Which test produced a [`TestResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestId {
    AdfAr,
    AdfArd,
    AdfTs,
    EngleGranger,
    JarqueBera,
}

/// A single test outcome.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestResult {
    pub test_id: TestId,
    pub statistic: f64,
    /// Lag order of the test regression (0 for Jarque-Bera).
    pub lags: usize,
    /// Clamped to `[0.001, 0.999]` for table-based p-values.
    pub p_value: f64,
    pub reject_at_5pct: bool,
    pub sample_size: usize,
}

/// The ADF t-statistic and the regression sample size.
pub fn adf_statistic(y: &[f64], variant: AdfVariant, lags: usize) -> Result<(f64, usize)> {
    let n = y.len();
    if n < 2 + lags {
        return Err(AfError::SampleTooShort { needed: 2 + lags, got: n });
    }
    let nobs = n - 1 - lags;
    let n_det = variant.n_deterministic();
    let p = n_det + 1 + lags;
    if nobs < p + 2 {
        return Err(AfError::SampleTooShort {
            needed: p + 2 + 1 + lags,
            got: n,
        });
    }

    // Rows t = lags+1 .. n-1 (0-indexed): dy_t on deterministics,
    // y_{t-1}, dy_{t-1} .. dy_{t-lags}.
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(p);
    if n_det >= 1 {
        columns.push(vec![1.0; nobs]);
    }
    if n_det == 2 {
        columns.push((0..nobs).map(|i| i as f64).collect());
    }
    let mut level = Vec::with_capacity(nobs);
    let mut response = Vec::with_capacity(nobs);
    for t in (lags + 1)..n {
        level.push(y[t - 1]);
        response.push(y[t] - y[t - 1]);
    }
    columns.push(level);
    for l in 1..=lags {
        columns.push(((lags + 1)..n).map(|t| y[t - l] - y[t - l - 1]).collect());
    }

    let x = Matrix::from_columns(&columns)?;
    let xtx_inv = xtx_inverse(&x)?;
    let mut xty = vec![0.0; p];
    for (i, resp) in response.iter().enumerate() {
        let row = x.row(i);
        for (j, acc) in xty.iter_mut().enumerate() {
            *acc += row[j] * resp;
        }
    }
    let coef: Vec<f64> = (0..p)
        .map(|i| (0..p).map(|j| xtx_inv.get(i, j) * xty[j]).sum())
        .collect();
    let mut ssr = 0.0;
    for (i, resp) in response.iter().enumerate() {
        let fitted: f64 = x.row(i).iter().zip(&coef).map(|(a, b)| a * b).sum();
        let u = resp - fitted;
        ssr += u * u;
    }
    let sigma2 = ssr / (nobs - p) as f64;
    let level_idx = n_det;
    let se = (sigma2 * xtx_inv.get(level_idx, level_idx)).sqrt();
    if se == 0.0 {
        return Err(AfError::RankDeficient("zero standard error".into()));
    }
    Ok((coef[level_idx] / se, nobs))
}

/// Augmented Dickey-Fuller test with p-value from the simulated tables.
pub fn adf_test(
    y: &AnnualSeries,
    variant: AdfVariant,
    lags: usize,
    tables: &CvTables,
) -> Result<TestResult> {
    let (statistic, _) = adf_statistic(y.values(), variant, lags)?;
    let table = tables.get(TableKind::Adf(variant))?;
    let p_value = interpolate_pvalue(statistic, table, y.len())?;
    Ok(TestResult {
        test_id: match variant {
            AdfVariant::Ar => TestId::AdfAr,
            AdfVariant::Ard => TestId::AdfArd,
            AdfVariant::Ts => TestId::AdfTs,
        },
        statistic,
        lags,
        p_value,
        reject_at_5pct: p_value < 0.05,
        sample_size: y.len(),
    })
}

/// Engle-Granger output: the cointegrating slope, its residuals, and the
/// residual unit-root test.
#[derive(Debug, Clone)]
pub struct EngleGrangerFit {
    pub result: TestResult,
    pub slope: f64,
    pub intercept: Option<f64>,
    pub residuals: AnnualSeries,
}

/// Engle-Granger residual-based cointegration test.
///
/// Step 1 regresses `y` on `x` (no intercept by default, matching the
/// cointegrating equation `G_t = alpha E_t + u_t`); step 2 runs the
/// AR-variant ADF regression on the residuals, with p-values from tables
/// simulated under the null of two independent driftless random walks with
/// the same step-1 specification.
pub fn engle_granger(
    y: &AnnualSeries,
    x: &AnnualSeries,
    lags: usize,
    step1_intercept: bool,
    tables: &CvTables,
) -> Result<EngleGrangerFit> {
    if y.len() != x.len() || y.start_year() != x.start_year() {
        return Err(AfError::InvalidArgument(
            "series must share the same year range".into(),
        ));
    }
    let (slope, intercept, residuals) = eg_step1(y.values(), x.values(), step1_intercept)?;
    let (statistic, _) = adf_statistic(&residuals, AdfVariant::Ar, lags)?;
    let table = tables.get(TableKind::EngleGranger {
        intercept: step1_intercept,
    })?;
    let p_value = interpolate_pvalue(statistic, table, y.len())?;
    Ok(EngleGrangerFit {
        result: TestResult {
            test_id: TestId::EngleGranger,
            statistic,
            lags,
            p_value,
            reject_at_5pct: p_value < 0.05,
            sample_size: y.len(),
        },
        slope,
        intercept: step1_intercept.then_some(intercept),
        residuals: y.with_values(residuals)?,
    })
}

fn eg_step1(y: &[f64], x: &[f64], intercept: bool) -> Result<(f64, f64, Vec<f64>)> {
    let n = y.len();
    if intercept {
        let xbar = x.iter().sum::<f64>() / n as f64;
        let ybar = y.iter().sum::<f64>() / n as f64;
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        for (xv, yv) in x.iter().zip(y) {
            sxx += (xv - xbar) * (xv - xbar);
            sxy += (xv - xbar) * (yv - ybar);
        }
        if sxx == 0.0 {
            return Err(AfError::RankDeficient("constant regressor".into()));
        }
        let slope = sxy / sxx;
        let icept = ybar - slope * xbar;
        let resid = y
            .iter()
            .zip(x)
            .map(|(yv, xv)| yv - icept - slope * xv)
            .collect();
        Ok((slope, icept, resid))
    } else {
        let sxx: f64 = x.iter().map(|v| v * v).sum();
        if sxx == 0.0 {
            return Err(AfError::RankDeficient("zero regressor".into()));
        }
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let slope = sxy / sxx;
        let resid = y.iter().zip(x).map(|(yv, xv)| yv - slope * xv).collect();
        Ok((slope, 0.0, resid))
    }
}

/// Jarque-Bera statistic `(n/6) (S^2 + (K-3)^2 / 4)` and its moments.
pub fn jarque_bera_statistic(x: &[f64]) -> Result<(f64, f64, f64)> {
    let n = x.len();
    if n < 8 {
        return Err(AfError::SampleTooShort { needed: 8, got: n });
    }
    let nf = n as f64;
    let mean = x.iter().sum::<f64>() / nf;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    m2 /= nf;
    m3 /= nf;
    m4 /= nf;
    if m2 <= 0.0 {
        return Err(AfError::InvalidArgument(
            "degenerate (zero-variance) input".into(),
        ));
    }
    let skew = m3 / m2.powf(1.5);
    let kurt = m4 / (m2 * m2);
    let stat = nf / 6.0 * (skew * skew + (kurt - 3.0) * (kurt - 3.0) / 4.0);
    Ok((stat, skew, kurt))
}

/// Jarque-Bera normality test. With `table = None` the p-value is the
/// asymptotic chi-squared(2) upper tail `exp(-JB/2)`; with a simulated
/// finite-sample table it is interpolated at the sample size.
pub fn jarque_bera(x: &[f64], table: Option<&CriticalValueTable>) -> Result<TestResult> {
    let (statistic, _, _) = jarque_bera_statistic(x)?;
    let p_value = match table {
        None => (-statistic / 2.0).exp(),
        Some(t) => {
            if t.kind != TableKind::JarqueBera {
                return Err(AfError::MissingTable {
                    family: "jb".into(),
                    variant: "gaussian".into(),
                });
            }
            // Upper-tail test: p = 1 - F(stat).
            1.0 - interpolate_cdf(statistic, t, x.len())?
        }
    };
    Ok(TestResult {
        test_id: TestId::JarqueBera,
        statistic,
        lags: 0,
        p_value,
        reject_at_5pct: p_value < 0.05,
        sample_size: x.len(),
    })
}

/// Identity of one critical-value table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TableKind {
    Adf(AdfVariant),
    EngleGranger { intercept: bool },
    JarqueBera,
}

impl TableKind {
    pub const ALL: [TableKind; 6] = [
        TableKind::Adf(AdfVariant::Ar),
        TableKind::Adf(AdfVariant::Ard),
        TableKind::Adf(AdfVariant::Ts),
        TableKind::EngleGranger { intercept: false },
        TableKind::EngleGranger { intercept: true },
        TableKind::JarqueBera,
    ];

    pub fn family(self) -> &'static str {
        match self {
            TableKind::Adf(_) => "adf",
            TableKind::EngleGranger { .. } => "eg",
            TableKind::JarqueBera => "jb",
        }
    }

    pub fn variant(self) -> &'static str {
        match self {
            TableKind::Adf(v) => v.label(),
            TableKind::EngleGranger { intercept: false } => "nointercept",
            TableKind::EngleGranger { intercept: true } => "intercept",
            TableKind::JarqueBera => "gaussian",
        }
    }

    pub fn file_stem(self) -> String {
        format!("{}_{}", self.family(), self.variant())
    }

    fn parse(family: &str, variant: &str) -> Result<Self> {
        let kind = match (family, variant) {
            ("adf", "ar") => TableKind::Adf(AdfVariant::Ar),
            ("adf", "ard") => TableKind::Adf(AdfVariant::Ard),
            ("adf", "ts") => TableKind::Adf(AdfVariant::Ts),
            ("eg", "nointercept") => TableKind::EngleGranger { intercept: false },
            ("eg", "intercept") => TableKind::EngleGranger { intercept: true },
            ("jb", "gaussian") => TableKind::JarqueBera,
            _ => {
                return Err(AfError::MissingTable {
                    family: family.into(),
                    variant: variant.into(),
                })
            }
        };
        Ok(kind)
    }

    /// Lower-tail tests give `p = F(stat)`; Jarque-Bera is upper tail.
    fn lower_tail(self) -> bool {
        !matches!(self, TableKind::JarqueBera)
    }
}

/// Generation metadata recorded next to each table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableMeta {
    pub seed: u64,
    pub replications: usize,
    pub generator_version: u32,
}

/// Version of the simulation recipe; bump on any change that would alter
/// regenerated tables.
pub const GENERATOR_VERSION: u32 = 1;

/// Simulated null-distribution quantile grid for one test family/variant
/// across several sample sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalValueTable {
    pub kind: TableKind,
    pub sample_sizes: Vec<usize>,
    pub probs: Vec<f64>,
    /// `quantiles[i][j]` is the `probs[j]` quantile at `sample_sizes[i]`.
    pub quantiles: Vec<Vec<f64>>,
    pub meta: TableMeta,
}

/// Probability grid of the shipped tables (clamp bounds at the ends).
pub fn default_prob_grid() -> Vec<f64> {
    let mut probs = vec![0.001, 0.0025, 0.005, 0.0075];
    let mut p = 0.01;
    while p < 0.0999 {
        probs.push(p);
        p += 0.01;
    }
    let mut p = 0.10;
    while p < 0.9024 {
        probs.push(p);
        p += 0.025;
    }
    for p in [0.91, 0.92, 0.93, 0.94, 0.95, 0.96, 0.97, 0.975, 0.98, 0.985, 0.99, 0.9925, 0.995, 0.9975, 0.999] {
        probs.push(p);
    }
    probs
}

/// Default sample-size grids for the shipped tables.
pub fn default_t_grid(kind: TableKind) -> Vec<usize> {
    match kind {
        TableKind::JarqueBera => vec![16, 31, 64, 128, 256],
        _ => vec![25, 31, 50, 64, 100, 200, 500],
    }
}

/// Type-7 (linear) sample quantile on sorted data.
fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let h = (n as f64 - 1.0) * p;
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    if lo + 1 >= n {
        sorted[n - 1]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

fn simulate_null_stat(kind: TableKind, t: usize, rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
    use rand_distr::{Distribution, StandardNormal};
    match kind {
        TableKind::Adf(variant) => {
            let mut y = Vec::with_capacity(t);
            let mut level = 0.0;
            for _ in 0..t {
                let e: f64 = StandardNormal.sample(rng);
                level += e;
                y.push(level);
            }
            adf_statistic(&y, variant, 0)
                .expect("null simulation regression cannot be singular")
                .0
        }
        TableKind::EngleGranger { intercept } => {
            let mut x = Vec::with_capacity(t);
            let mut y = Vec::with_capacity(t);
            let (mut lx, mut ly) = (0.0, 0.0);
            for _ in 0..t {
                let ex: f64 = StandardNormal.sample(rng);
                let ey: f64 = StandardNormal.sample(rng);
                lx += ex;
                ly += ey;
                x.push(lx);
                y.push(ly);
            }
            let (_, _, resid) =
                eg_step1(&y, &x, intercept).expect("random walks are not degenerate");
            adf_statistic(&resid, AdfVariant::Ar, 0)
                .expect("null simulation regression cannot be singular")
                .0
        }
        TableKind::JarqueBera => {
            let sample: Vec<f64> = (0..t).map(|_| StandardNormal.sample(rng)).collect();
            jarque_bera_statistic(&sample)
                .expect("normal sample is not degenerate")
                .0
        }
    }
}

fn kind_domain(kind: TableKind, t: usize) -> u64 {
    let tag = match kind {
        TableKind::Adf(AdfVariant::Ar) => 0x10u64,
        TableKind::Adf(AdfVariant::Ard) => 0x11,
        TableKind::Adf(AdfVariant::Ts) => 0x12,
        TableKind::EngleGranger { intercept: false } => 0x20,
        TableKind::EngleGranger { intercept: true } => 0x21,
        TableKind::JarqueBera => 0x30,
    };
    tag ^ ((t as u64) << 16)
}

/// Simulates the null distribution of a test statistic and tabulates its
/// quantile grid. Deterministic in `(kind, t_grid, replications, seed)`
/// regardless of thread count.
pub fn simulate_critical_values(
    kind: TableKind,
    t_grid: &[usize],
    replications: usize,
    seed: u64,
) -> Result<CriticalValueTable> {
    if replications < 1000 {
        return Err(AfError::InvalidArgument(
            "replications must be >= 1000".into(),
        ));
    }
    let probs = default_prob_grid();
    let mut quantiles = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let mut stats: Vec<f64> = (0..replications)
            .into_par_iter()
            .map(|rep| {
                let mut rng = substream(seed, kind_domain(kind, t), rep as u64);
                simulate_null_stat(kind, t, &mut rng)
            })
            .collect();
        stats.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite statistics"));
        let row: Vec<f64> = probs.iter().map(|&p| sorted_quantile(&stats, p)).collect();
        quantiles.push(row);
    }
    let table = CriticalValueTable {
        kind,
        sample_sizes: t_grid.to_vec(),
        probs,
        quantiles,
        meta: TableMeta {
            seed,
            replications,
            generator_version: GENERATOR_VERSION,
        },
    };
    table.validate()?;
    Ok(table)
}

impl CriticalValueTable {
    /// Checks strict monotonicity of quantiles in probability per sample size.
    pub fn validate(&self) -> Result<()> {
        if self.sample_sizes.len() != self.quantiles.len() {
            return Err(AfError::InvalidArgument("table shape mismatch".into()));
        }
        for (i, row) in self.quantiles.iter().enumerate() {
            if row.len() != self.probs.len() {
                return Err(AfError::InvalidArgument("table row length mismatch".into()));
            }
            for w in row.windows(2) {
                if !(w[1] > w[0]) {
                    return Err(AfError::InvalidArgument(format!(
                        "quantiles not strictly monotone at T = {}",
                        self.sample_sizes[i]
                    )));
                }
            }
        }
        Ok(())
    }

    /// Writes `<stem>.csv` (`family,variant,T,prob,quantile`) and
    /// `<stem>.meta.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| AfError::Io {
            path: dir.display().to_string(),
            source: e,
        })?;
        let stem = self.kind.file_stem();
        let csv_path = dir.join(format!("{stem}.csv"));
        let mut out = String::from("family,variant,T,prob,quantile\n");
        for (i, &t) in self.sample_sizes.iter().enumerate() {
            for (j, &p) in self.probs.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    self.kind.family(),
                    self.kind.variant(),
                    t,
                    p,
                    self.quantiles[i][j]
                ));
            }
        }
        std::fs::write(&csv_path, out).map_err(|e| AfError::Io {
            path: csv_path.display().to_string(),
            source: e,
        })?;
        let meta_path = dir.join(format!("{stem}.meta.json"));
        let meta = serde_json::to_string_pretty(&self.meta).expect("serializable");
        std::fs::write(&meta_path, meta).map_err(|e| AfError::Io {
            path: meta_path.display().to_string(),
            source: e,
        })?;
        Ok(())
    }

    /// Loads a table previously written by [`CriticalValueTable::save`].
    pub fn load(dir: &Path, kind: TableKind) -> Result<Self> {
        let stem = kind.file_stem();
        let csv_path = dir.join(format!("{stem}.csv"));
        let content = std::fs::read_to_string(&csv_path).map_err(|e| AfError::Io {
            path: csv_path.display().to_string(),
            source: e,
        })?;
        let mut sample_sizes: Vec<usize> = Vec::new();
        let mut probs: Vec<f64> = Vec::new();
        let mut quantiles: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in content.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(AfError::Csv {
                    path: csv_path.display().to_string(),
                    msg: format!("line {}: expected 5 fields", lineno + 1),
                });
            }
            let parsed_kind = TableKind::parse(fields[0], fields[1])?;
            if parsed_kind != kind {
                return Err(AfError::Csv {
                    path: csv_path.display().to_string(),
                    msg: format!("line {}: table kind mismatch", lineno + 1),
                });
            }
            let t: usize = fields[2].parse().map_err(|_| AfError::Csv {
                path: csv_path.display().to_string(),
                msg: format!("line {}: bad T", lineno + 1),
            })?;
            let p: f64 = fields[3].parse().map_err(|_| AfError::Csv {
                path: csv_path.display().to_string(),
                msg: format!("line {}: bad prob", lineno + 1),
            })?;
            let q: f64 = fields[4].parse().map_err(|_| AfError::Csv {
                path: csv_path.display().to_string(),
                msg: format!("line {}: bad quantile", lineno + 1),
            })?;
            if sample_sizes.last() != Some(&t) {
                sample_sizes.push(t);
                quantiles.push(Vec::new());
            }
            if sample_sizes.len() == 1 {
                probs.push(p);
            }
            quantiles.last_mut().expect("pushed above").push(q);
        }
        let meta_path = dir.join(format!("{stem}.meta.json"));
        let meta_raw = std::fs::read_to_string(&meta_path).map_err(|e| AfError::Io {
            path: meta_path.display().to_string(),
            source: e,
        })?;
        let meta: TableMeta = serde_json::from_str(&meta_raw).map_err(|e| AfError::Csv {
            path: meta_path.display().to_string(),
            msg: e.to_string(),
        })?;
        let table = Self {
            kind,
            sample_sizes,
            probs,
            quantiles,
            meta,
        };
        table.validate()?;
        Ok(table)
    }
}

/// CDF value `F(stat)` at sample size `t`, interpolated linearly in
/// probability between bracketing quantiles and linearly in `1/T` between
/// bracketing sample sizes; clamped to `[0.001, 0.999]`.
fn interpolate_cdf(statistic: f64, table: &CriticalValueTable, t: usize) -> Result<f64> {
    if table.sample_sizes.is_empty() {
        return Err(AfError::MissingTable {
            family: table.kind.family().into(),
            variant: table.kind.variant().into(),
        });
    }
    let cdf_at = |row: &[f64]| -> f64 {
        let probs = &table.probs;
        if statistic <= row[0] {
            return probs[0];
        }
        if statistic >= row[row.len() - 1] {
            return probs[probs.len() - 1];
        }
        // binary search for the bracketing quantiles
        let mut lo = 0usize;
        let mut hi = row.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if row[mid] <= statistic {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        probs[lo] + (probs[hi] - probs[lo]) * (statistic - row[lo]) / (row[hi] - row[lo])
    };

    let sizes = &table.sample_sizes;
    let pos = sizes.iter().position(|&s| s >= t);
    let p = match pos {
        Some(0) => cdf_at(&table.quantiles[0]),
        None => cdf_at(&table.quantiles[sizes.len() - 1]),
        Some(i) if sizes[i] == t => cdf_at(&table.quantiles[i]),
        Some(i) => {
            let (t_lo, t_hi) = (sizes[i - 1] as f64, sizes[i] as f64);
            let p_lo = cdf_at(&table.quantiles[i - 1]);
            let p_hi = cdf_at(&table.quantiles[i]);
            // interpolate in 1/T, the natural scale for finite-sample drift
            let w = (1.0 / t_lo - 1.0 / t as f64) / (1.0 / t_lo - 1.0 / t_hi);
            p_lo + w * (p_hi - p_lo)
        }
    };
    Ok(p.clamp(0.001, 0.999))
}

/// Table-based p-value for a statistic at sample size `t`.
///
/// Lower-tail families (ADF, Engle-Granger) return `F(stat)`; upper-tail
/// families (Jarque-Bera) return `1 - F(stat)`. Clamped to `[0.001, 0.999]`.
pub fn interpolate_pvalue(statistic: f64, table: &CriticalValueTable, t: usize) -> Result<f64> {
    let cdf = interpolate_cdf(statistic, table, t)?;
    let p = if table.kind.lower_tail() { cdf } else { 1.0 - cdf };
    Ok(p.clamp(0.001, 0.999))
}

/// In-memory set of critical-value tables, loaded from a directory of
/// versioned CSVs.
#[derive(Debug, Clone)]
pub struct CvTables {
    tables: Vec<CriticalValueTable>,
}

impl CvTables {
    pub fn from_tables(tables: Vec<CriticalValueTable>) -> Self {
        Self { tables }
    }

    /// Loads every known table kind present in `dir`; at least one must load.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut tables = Vec::new();
        for kind in TableKind::ALL {
            let stem = dir.join(format!("{}.csv", kind.file_stem()));
            if stem.exists() {
                tables.push(CriticalValueTable::load(dir, kind)?);
            }
        }
        if tables.is_empty() {
            return Err(AfError::MissingTable {
                family: format!("no tables in {}", dir.display()),
                variant: String::new(),
            });
        }
        Ok(Self { tables })
    }

    pub fn get(&self, kind: TableKind) -> Result<&CriticalValueTable> {
        self.tables
            .iter()
            .find(|t| t.kind == kind)
            .ok_or_else(|| AfError::MissingTable {
                family: kind.family().into(),
                variant: kind.variant().into(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand_distr::Distribution;

    fn synthetic_table(kind: TableKind) -> CriticalValueTable {
        // strictly increasing quantiles -3.09 .. +3.09-ish via an inverse
        // normal approximation on the default grid
        let probs = default_prob_grid();
        let quantiles: Vec<f64> = probs
            .iter()
            .map(|&p| {
                // crude logit map, monotone is all that matters here
                (p / (1.0 - p)).ln()
            })
            .collect();
        CriticalValueTable {
            kind,
            sample_sizes: vec![64],
            probs,
            quantiles: vec![quantiles],
            meta: TableMeta {
                seed: 0,
                replications: 1000,
                generator_version: GENERATOR_VERSION,
            },
        }
    }

    #[test]
    fn pvalue_clamps_below_grid() {
        let t = synthetic_table(TableKind::Adf(AdfVariant::Ar));
        let p = interpolate_pvalue(-100.0, &t, 64).unwrap();
        assert_eq!(p, 0.001);
        let p = interpolate_pvalue(100.0, &t, 64).unwrap();
        assert_eq!(p, 0.999);
    }

    #[test]
    fn pvalue_exact_at_grid_node() {
        let t = synthetic_table(TableKind::Adf(AdfVariant::Ar));
        let idx = t.probs.iter().position(|&p| p == 0.05).unwrap();
        let stat = t.quantiles[0][idx];
        let p = interpolate_pvalue(stat, &t, 64).unwrap();
        assert_abs_diff_eq!(p, 0.05, epsilon = 1e-12);
    }

    #[test]
    fn pvalue_linear_between_nodes() {
        let t = synthetic_table(TableKind::Adf(AdfVariant::Ar));
        let i05 = t.probs.iter().position(|&p| p == 0.05).unwrap();
        let i10 = t.probs.iter().position(|&p| (p - 0.10).abs() < 1e-12).unwrap();
        // the grid has intermediate nodes between 0.05 and 0.10; use the
        // adjacent pair 0.05/0.06 for the midpoint rule instead
        assert_eq!(i10 - i05, 5);
        let q_lo = t.quantiles[0][i05];
        let q_hi = t.quantiles[0][i05 + 1];
        let stat = 0.5 * (q_lo + q_hi);
        let p = interpolate_pvalue(stat, &t, 64).unwrap();
        assert_abs_diff_eq!(p, 0.055, epsilon = 1e-12);
    }

    #[test]
    fn adf_statistic_scale_invariant() {
        let mut rng = substream(17, 0x5ca1e, 0);
        let mut level = 0.0;
        let y: Vec<f64> = (0..40)
            .map(|t| {
                let e: f64 = rand_distr::StandardNormal.sample(&mut rng);
                level += e;
                level + 0.1 * t as f64
            })
            .collect();
        for variant in AdfVariant::ALL {
            for lags in [0usize, 2] {
                let (s1, _) = adf_statistic(&y, variant, lags).unwrap();
                let scaled: Vec<f64> = y.iter().map(|v| v * 37.5).collect();
                let (s2, _) = adf_statistic(&scaled, variant, lags).unwrap();
                assert_abs_diff_eq!(s1, s2, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn adf_rejects_too_short_sample() {
        let y = vec![1.0, 2.0, 1.5, 2.5, 1.8];
        assert!(adf_statistic(&y, AdfVariant::Ts, 2).is_err());
        assert!(adf_statistic(&y, AdfVariant::Ar, 0).is_ok());
    }

    #[test]
    fn jb_statistic_symmetric_input_is_kurtosis_only() {
        let x: Vec<f64> = (0..16).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect();
        let (stat, skew, kurt) = jarque_bera_statistic(&x).unwrap();
        assert_abs_diff_eq!(skew, 0.0, epsilon = 1e-14);
        // two-point symmetric distribution has kurtosis 1
        assert_abs_diff_eq!(kurt, 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(stat, 16.0 / 6.0 * (2.0f64.powi(2) / 4.0), epsilon = 1e-12);
    }

    #[test]
    fn jb_degenerate_and_short_inputs_error() {
        assert!(jarque_bera(&[1.0; 12], None).is_err());
        assert!(jarque_bera(&[1.0, 2.0, 3.0], None).is_err());
    }

    #[test]
    fn jb_asymptotic_pvalue_is_chi2_tail() {
        let x = [0.93, -0.41, 1.22, -1.02, 0.35, -0.77, 1.64, -0.22, 0.18, -1.31];
        let res = jarque_bera(&x, None).unwrap();
        assert_abs_diff_eq!(res.p_value, (-res.statistic / 2.0).exp(), epsilon = 1e-14);
    }

    #[test]
    fn simulated_tables_deterministic_and_monotone() {
        let kind = TableKind::Adf(AdfVariant::Ar);
        let a = simulate_critical_values(kind, &[25], 2000, 7).unwrap();
        let b = simulate_critical_values(kind, &[25], 2000, 7).unwrap();
        assert_eq!(a.quantiles, b.quantiles);
        a.validate().unwrap();
        let c = simulate_critical_values(kind, &[25], 2000, 8).unwrap();
        assert_ne!(a.quantiles, c.quantiles);
    }

    #[test]
    fn table_roundtrip_through_csv() {
        let kind = TableKind::EngleGranger { intercept: false };
        let table = simulate_critical_values(kind, &[25, 50], 2000, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        table.save(dir.path()).unwrap();
        let back = CriticalValueTable::load(dir.path(), kind).unwrap();
        assert_eq!(back, table);
    }

    #[test]
    fn dickey_fuller_classical_quantiles() {
        // Cross-check the simulated 5% quantiles at T = 64 against the
        // published Dickey-Fuller values: -1.95 (no deterministics) and
        // -3.45 (constant + trend).
        let ar = simulate_critical_values(TableKind::Adf(AdfVariant::Ar), &[64], 100_000, 20240601)
            .unwrap();
        let idx = ar.probs.iter().position(|&p| p == 0.05).unwrap();
        let q_ar = ar.quantiles[0][idx];
        assert!(
            (q_ar - -1.95).abs() < 0.03,
            "AR 5% quantile {q_ar} not within 0.03 of -1.95"
        );
        let ts = simulate_critical_values(TableKind::Adf(AdfVariant::Ts), &[64], 100_000, 20240601)
            .unwrap();
        let q_ts = ts.quantiles[0][idx];
        assert!(
            (q_ts - -3.45).abs() < 0.05,
            "TS 5% quantile {q_ts} not within 0.05 of -3.45"
        );
    }

    #[test]
    fn adf_size_control_on_random_walks() {
        // Null rejection rate at nominal 5% within [0.04, 0.06].
        let kind = TableKind::Adf(AdfVariant::Ar);
        let table = simulate_critical_values(kind, &[200], 40_000, 5150).unwrap();
        let tables = CvTables::from_tables(vec![table]);
        let reps = 10_000;
        let mut rejections = 0usize;
        for rep in 0..reps {
            let mut rng = substream(777, 0xabc, rep as u64);
            let mut level = 0.0;
            let y: Vec<f64> = (0..200)
                .map(|_| {
                    let e: f64 = rand_distr::StandardNormal.sample(&mut rng);
                    level += e;
                    level
                })
                .collect();
            let s = AnnualSeries::new(1, y).unwrap();
            let res = adf_test(&s, AdfVariant::Ar, 0, &tables).unwrap();
            if res.reject_at_5pct {
                rejections += 1;
            }
        }
        let rate = rejections as f64 / reps as f64;
        assert!((0.04..=0.06).contains(&rate), "size {rate} out of band");
    }

    #[test]
    fn engle_granger_size_and_power() {
        let kind = TableKind::EngleGranger { intercept: false };
        let table = simulate_critical_values(kind, &[200], 40_000, 6003).unwrap();
        let tables = CvTables::from_tables(vec![table]);

        // size: two independent random walks
        let reps = 10_000;
        let mut rejections = 0usize;
        for rep in 0..reps {
            let mut rng = substream(31337, 0xdef, rep as u64);
            let (mut lx, mut ly) = (0.0, 0.0);
            let mut xs = Vec::with_capacity(200);
            let mut ys = Vec::with_capacity(200);
            for _ in 0..200 {
                let ex: f64 = rand_distr::StandardNormal.sample(&mut rng);
                let ey: f64 = rand_distr::StandardNormal.sample(&mut rng);
                lx += ex;
                ly += ey;
                xs.push(lx);
                ys.push(ly);
            }
            let x = AnnualSeries::new(1, xs).unwrap();
            let y = AnnualSeries::new(1, ys).unwrap();
            let fit = engle_granger(&y, &x, 0, false, &tables).unwrap();
            if fit.result.reject_at_5pct {
                rejections += 1;
            }
        }
        let size = rejections as f64 / reps as f64;
        assert!((0.03..=0.07).contains(&size), "EG size {size} out of band");

        // power: genuinely cointegrated pair
        let reps = 1_000;
        let mut rejections = 0usize;
        for rep in 0..reps {
            let mut rng = substream(909, 0xfeed, rep as u64);
            let mut e = 4.0;
            let mut xs = Vec::with_capacity(200);
            let mut ys = Vec::with_capacity(200);
            for _ in 0..200 {
                let xi: f64 = rand_distr::StandardNormal.sample(&mut rng);
                let u: f64 = rand_distr::StandardNormal.sample(&mut rng);
                e += 0.1 + 0.2 * xi;
                xs.push(e);
                ys.push(0.44 * e + u);
            }
            let x = AnnualSeries::new(1, xs).unwrap();
            let y = AnnualSeries::new(1, ys).unwrap();
            let fit = engle_granger(&y, &x, 0, false, &tables).unwrap();
            if fit.result.reject_at_5pct {
                rejections += 1;
            }
        }
        let power = rejections as f64 / reps as f64;
        assert!(power > 0.95, "EG power {power} too low");
    }

    #[test]
    fn jb_finite_sample_size_control() {
        let table =
            simulate_critical_values(TableKind::JarqueBera, &[64], 40_000, 112).unwrap();
        let reps = 1_000;
        let mut rejections_table = 0usize;
        for rep in 0..reps {
            let mut rng = substream(5151, 0x111, rep as u64);
            let x: Vec<f64> = (0..64)
                .map(|_| rand_distr::StandardNormal.sample(&mut rng))
                .collect();
            let res = jarque_bera(&x, Some(&table)).unwrap();
            if res.reject_at_5pct {
                rejections_table += 1;
            }
        }
        let rate = rejections_table as f64 / reps as f64;
        // binomial 99% band around 0.05 at 1000 reps is about +-0.018
        assert!((0.03..=0.07).contains(&rate), "JB size {rate} out of band");
    }

    #[test]
    fn jb_asymptotic_size_at_large_n() {
        let reps = 1_000;
        let mut rejections = 0usize;
        for rep in 0..reps {
            let mut rng = substream(2222, 0x222, rep as u64);
            let x: Vec<f64> = (0..10_000)
                .map(|_| rand_distr::StandardNormal.sample(&mut rng))
                .collect();
            let res = jarque_bera(&x, None).unwrap();
            if res.reject_at_5pct {
                rejections += 1;
            }
        }
        let rate = rejections as f64 / reps as f64;
        assert!((0.04..=0.06).contains(&rate), "JB size {rate} out of band");
    }

    #[test]
    fn pvalues_nonincreasing_in_statistic() {
        let t = synthetic_table(TableKind::Adf(AdfVariant::Ar));
        let mut prev = 0.0;
        for k in 0..50 {
            let stat = -6.0 + 0.25 * k as f64;
            let p = interpolate_pvalue(stat, &t, 64).unwrap();
            assert!(p >= prev);
            prev = p;
        }
    }
}
