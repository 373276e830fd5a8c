//! Cumulative airborne fraction over the full sample and trailing windows.

use serde::{Deserialize, Serialize};

use crate::error::{AfError, Result};
use crate::series::AnnualSeries;

/// Denominator sums below this threshold (GtC) are reported as gaps rather
/// than near-infinite ratios.
pub const GAP_THRESHOLD: f64 = 1e-9;

/// Trailing-window cumulative airborne fraction per year.
///
/// `values[i]` is `None` where the window emissions sum vanishes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CafSeries {
    pub start_year: i32,
    pub window: usize,
    pub values: Vec<Option<f64>>,
}

impl CafSeries {
    pub fn iter(&self) -> impl Iterator<Item = (i32, Option<f64>)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, v)| (self.start_year + i as i32, *v))
    }
}

fn check_aligned(g: &AnnualSeries, e: &AnnualSeries) -> Result<()> {
    if g.start_year() != e.start_year() || g.len() != e.len() {
        return Err(AfError::InvalidArgument(
            "g and e must share the same year range".into(),
        ));
    }
    Ok(())
}

/// Full-sample cumulative airborne fraction `sum G / sum E`.
pub fn caf_full(g: &AnnualSeries, e: &AnnualSeries) -> Result<f64> {
    check_aligned(g, e)?;
    let se = e.sum();
    if se.abs() < GAP_THRESHOLD {
        return Err(AfError::InvalidArgument(
            "cumulative emissions are zero".into(),
        ));
    }
    Ok(g.sum() / se)
}

/// Trailing-window CAF: the value at year `t` uses at most the preceding
/// `w` years (fewer at the start of the sample). `w = 1` reproduces the
/// per-year ratio `G_t / E_t`; `w = len` gives the running full-sample CAF.
pub fn caf_window(g: &AnnualSeries, e: &AnnualSeries, w: usize) -> Result<CafSeries> {
    check_aligned(g, e)?;
    if w == 0 {
        return Err(AfError::InvalidArgument("window must be >= 1".into()));
    }
    let gv = g.values();
    let ev = e.values();
    let n = gv.len();
    let mut values = Vec::with_capacity(n);
    for t in 0..n {
        let lo = t.saturating_sub(w - 1);
        let (mut sg, mut se) = (0.0, 0.0);
        for j in lo..=t {
            sg += gv[j];
            se += ev[j];
        }
        if se.abs() < GAP_THRESHOLD {
            values.push(None);
        } else {
            values.push(Some(sg / se));
        }
    }
    Ok(CafSeries {
        start_year: g.start_year(),
        window: w,
        values,
    })
}
