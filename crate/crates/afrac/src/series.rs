//! Year-indexed series of annual values, the carrier type for all inputs.

use serde::{Deserialize, Serialize};

use crate::error::{AfError, Result};

/// A contiguous, year-indexed sequence of finite values.
///
/// Element `i` belongs to calendar year `start_year + i`. Units are declared
/// by the caller (GtC/yr for carbon series, index units for covariates).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnualSeries {
    start_year: i32,
    values: Vec<f64>,
}

impl AnnualSeries {
    /// Builds a series, rejecting empty input and non-finite values.
    pub fn new(start_year: i32, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(AfError::InvalidSeries("length must be >= 1".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(AfError::InvalidSeries(format!(
                "non-finite value in year {}",
                start_year + i as i32
            )));
        }
        Ok(Self { start_year, values })
    }

    pub fn start_year(&self) -> i32 {
        self.start_year
    }

    pub fn end_year(&self) -> i32 {
        self.start_year + self.values.len() as i32 - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: length >= 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value for a calendar year, if covered.
    pub fn get(&self, year: i32) -> Option<f64> {
        let idx = year.checked_sub(self.start_year)?;
        if idx < 0 {
            return None;
        }
        self.values.get(idx as usize).copied()
    }

    /// Iterates `(year, value)` pairs in year order.
    pub fn iter(&self) -> impl Iterator<Item = (i32, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, &v)| (self.start_year + i as i32, v))
    }

    /// Slice covering `[start, end]` (inclusive).
    pub fn window(&self, start: i32, end: i32) -> Result<Self> {
        if start > end || start < self.start_year || end > self.end_year() {
            return Err(AfError::WindowOutOfRange {
                start,
                end,
                first: self.start_year,
                last: self.end_year(),
            });
        }
        let lo = (start - self.start_year) as usize;
        let hi = (end - self.start_year) as usize;
        Ok(Self {
            start_year: start,
            values: self.values[lo..=hi].to_vec(),
        })
    }

    /// Elementwise sum; both series must share the same year range.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.start_year != other.start_year || self.len() != other.len() {
            return Err(AfError::InvalidSeries(format!(
                "year ranges differ: {}..{} vs {}..{}",
                self.start_year,
                self.end_year(),
                other.start_year,
                other.end_year()
            )));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + b)
            .collect();
        Self::new(self.start_year, values)
    }

    /// Sum of all values.
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.len() as f64
    }

    /// First differences; the result starts one year later.
    pub fn diff(&self) -> Result<Self> {
        if self.len() < 2 {
            return Err(AfError::SampleTooShort {
                needed: 2,
                got: self.len(),
            });
        }
        let values = self.values.windows(2).map(|w| w[1] - w[0]).collect();
        Self::new(self.start_year + 1, values)
    }

    /// Rebuilds the series with new values over the same years.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.len() {
            return Err(AfError::InvalidSeries("length mismatch".into()));
        }
        Self::new(self.start_year, values)
    }
}

/// Residuals of an OLS fit of the values on `{1, t}`.
///
/// The output has zero mean and zero sample covariance with the time index,
/// which is what makes a detrended covariate orthogonal to the trend within
/// the estimation sample.
pub fn detrend(series: &AnnualSeries) -> Result<AnnualSeries> {
    let n = series.len();
    if n < 2 {
        return Err(AfError::SampleTooShort { needed: 2, got: n });
    }
    let nf = n as f64;
    // Centered time index keeps the 2x2 normal equations diagonal.
    let tbar = (nf - 1.0) / 2.0;
    let y = series.values();
    let ybar = series.mean();
    let mut stt = 0.0;
    let mut sty = 0.0;
    for (i, &v) in y.iter().enumerate() {
        let tc = i as f64 - tbar;
        stt += tc * tc;
        sty += tc * (v - ybar);
    }
    let slope = sty / stt;
    let values = y
        .iter()
        .enumerate()
        .map(|(i, &v)| v - ybar - slope * (i as f64 - tbar))
        .collect();
    series.with_values(values)
}

/// One month of a monthly covariate record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonthlyValue {
    pub year: i32,
    pub month: u32,
    pub value: f64,
}

/// Annualizes monthly data as September-August means.
///
/// The value for year `t` is the mean of the 12 monthly values from September
/// of `t - 1` through August of `t`. Every month inside a window must be
/// present exactly once.
pub fn annualize_enso(
    monthly: &[MonthlyValue],
    first_year: i32,
    last_year: i32,
) -> Result<AnnualSeries> {
    if first_year > last_year {
        return Err(AfError::InvalidArgument(
            "first_year must be <= last_year".into(),
        ));
    }
    use std::collections::HashMap;
    let mut by_month: HashMap<(i32, u32), f64> = HashMap::new();
    for m in monthly {
        by_month.insert((m.year, m.month), m.value);
    }
    let mut values = Vec::with_capacity((last_year - first_year + 1) as usize);
    for year in first_year..=last_year {
        let mut sum = 0.0;
        let mut missing = Vec::new();
        for m in 9..=12 {
            match by_month.get(&(year - 1, m)) {
                Some(v) => sum += v,
                None => missing.push((year - 1, m)),
            }
        }
        for m in 1..=8 {
            match by_month.get(&(year, m)) {
                Some(v) => sum += v,
                None => missing.push((year, m)),
            }
        }
        if !missing.is_empty() {
            return Err(AfError::MissingMonths { year, missing });
        }
        values.push(sum / 12.0);
    }
    AnnualSeries::new(first_year, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn series(start: i32, v: &[f64]) -> AnnualSeries {
        AnnualSeries::new(start, v.to_vec()).unwrap()
    }

    #[test]
    fn rejects_nan_and_empty() {
        assert!(AnnualSeries::new(2000, vec![]).is_err());
        assert!(AnnualSeries::new(2000, vec![1.0, f64::NAN]).is_err());
        assert!(AnnualSeries::new(2000, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn year_indexing() {
        let s = series(1959, &[1.0, 2.0, 3.0]);
        assert_eq!(s.end_year(), 1961);
        assert_eq!(s.get(1960), Some(2.0));
        assert_eq!(s.get(1958), None);
        assert_eq!(s.get(1962), None);
    }

    #[test]
    fn window_slices_and_rejects() {
        let s = series(1959, &[1.0, 2.0, 3.0, 4.0]);
        let w = s.window(1960, 1961).unwrap();
        assert_eq!(w.start_year(), 1960);
        assert_eq!(w.values(), &[2.0, 3.0]);
        assert!(s.window(1958, 1960).is_err());
        assert!(s.window(1961, 1963).is_err());
        // identity and single-year slices
        assert_eq!(s.window(1959, 1962).unwrap(), s);
        assert_eq!(s.window(1961, 1961).unwrap().values(), &[3.0]);
    }

    #[test]
    fn detrend_perfect_line_is_zero() {
        let s = series(0, &[1.0, 2.0, 3.0, 4.0]);
        let d = detrend(&s).unwrap();
        for &v in d.values() {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
        }
        let c = series(0, &[5.0, 5.0, 5.0]);
        let d = detrend(&c).unwrap();
        for &v in d.values() {
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn detrend_matches_normal_equations_oracle() {
        // Direct 2x2 normal-equations solve on a fixed 10-point series.
        let y = [3.1, 2.9, 4.2, 3.8, 5.1, 4.7, 6.0, 5.5, 7.2, 6.4];
        let n = y.len() as f64;
        let (mut st, mut stt, mut sy, mut sty) = (0.0, 0.0, 0.0, 0.0);
        for (i, &v) in y.iter().enumerate() {
            let t = i as f64;
            st += t;
            stt += t * t;
            sy += v;
            sty += t * v;
        }
        let det = n * stt - st * st;
        let a = (stt * sy - st * sty) / det;
        let b = (n * sty - st * sy) / det;

        let s = series(1990, &y);
        let d = detrend(&s).unwrap();
        for (i, &v) in d.values().iter().enumerate() {
            assert_abs_diff_eq!(v, y[i] - a - b * i as f64, epsilon = 1e-10);
        }
        // zero mean, zero covariance with t
        assert_abs_diff_eq!(d.values().iter().sum::<f64>(), 0.0, epsilon = 1e-10);
        let cov: f64 = d.values().iter().enumerate().map(|(i, &v)| i as f64 * v).sum();
        assert_abs_diff_eq!(cov, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn detrend_is_idempotent() {
        let s = series(0, &[0.3, -1.2, 2.4, 0.9, -0.5, 1.8, 0.1, -2.2]);
        let d1 = detrend(&s).unwrap();
        let d2 = detrend(&d1).unwrap();
        for (a, b) in d1.values().iter().zip(d2.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn annualize_constant_window() {
        let mut monthly = Vec::new();
        for m in 9..=12 {
            monthly.push(MonthlyValue { year: 1999, month: m, value: 1.0 });
        }
        for m in 1..=8 {
            monthly.push(MonthlyValue { year: 2000, month: m, value: 1.0 });
        }
        let s = annualize_enso(&monthly, 2000, 2000).unwrap();
        assert_abs_diff_eq!(s.values()[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn annualize_linear_ramp_is_symmetric() {
        // Sep = -0.5 ... Aug = +0.5 in equal steps of 1/11.
        let mut monthly = Vec::new();
        for (k, (y, m)) in (9..=12)
            .map(|m| (1999, m))
            .chain((1..=8).map(|m| (2000, m)))
            .enumerate()
        {
            monthly.push(MonthlyValue {
                year: y,
                month: m,
                value: -0.5 + k as f64 / 11.0,
            });
        }
        let s = annualize_enso(&monthly, 2000, 2000).unwrap();
        assert_abs_diff_eq!(s.values()[0], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn annualize_reports_missing_months() {
        let monthly = vec![MonthlyValue { year: 1999, month: 9, value: 0.0 }];
        let err = annualize_enso(&monthly, 2000, 2000).unwrap_err();
        match err {
            AfError::MissingMonths { year, missing } => {
                assert_eq!(year, 2000);
                assert_eq!(missing.len(), 11);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn diff_shifts_start_year() {
        let s = series(1959, &[1.0, 3.0, 6.0]);
        let d = s.diff().unwrap();
        assert_eq!(d.start_year(), 1960);
        assert_eq!(d.values(), &[2.0, 3.0]);
    }
}
