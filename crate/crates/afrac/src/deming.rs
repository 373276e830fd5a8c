//! Deming (errors-in-variables) regression for the airborne fraction.
//!
//! Both `G_t` and `E_t` are treated as noisy measurements; `delta` is the
//! ratio of the two measurement-error variances. The slope has a closed form
//! in the uncentered second moments of the data.

use serde::{Deserialize, Serialize};

use crate::error::{AfError, Result};
use crate::series::AnnualSeries;

/// Uncentered second moments `1/T sum G^2`, `1/T sum E^2`, `1/T sum E G`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentTriple {
    pub m_gg: f64,
    pub m_ee: f64,
    pub m_eg: f64,
}

impl MomentTriple {
    pub fn from_series(g: &AnnualSeries, e: &AnnualSeries) -> Result<Self> {
        if g.len() != e.len() {
            return Err(AfError::InvalidArgument("series lengths differ".into()));
        }
        let t = g.len() as f64;
        let (mut gg, mut ee, mut eg) = (0.0, 0.0, 0.0);
        for (gv, ev) in g.values().iter().zip(e.values()) {
            gg += gv * gv;
            ee += ev * ev;
            eg += ev * gv;
        }
        Ok(Self {
            m_gg: gg / t,
            m_ee: ee / t,
            m_eg: eg / t,
        })
    }
}

/// Deming slope
/// `(M_GG - d M_EE + sqrt((M_GG - d M_EE)^2 + 4 d M_EG^2)) / (2 M_EG)`.
pub fn deming_from_moments(m: MomentTriple, delta: f64) -> Result<f64> {
    if delta <= 0.0 {
        return Err(AfError::InvalidArgument(format!(
            "delta must be > 0, got {delta}"
        )));
    }
    if m.m_eg == 0.0 {
        return Err(AfError::InvalidArgument(
            "m_eg = 0: Deming slope undefined".into(),
        ));
    }
    let d = m.m_gg - delta * m.m_ee;
    Ok((d + (d * d + 4.0 * delta * m.m_eg * m.m_eg).sqrt()) / (2.0 * m.m_eg))
}

/// Deming estimate of the airborne fraction for a given error-variance ratio.
pub fn deming_fit(g: &AnnualSeries, e: &AnnualSeries, delta: f64) -> Result<f64> {
    deming_from_moments(MomentTriple::from_series(g, e)?, delta)
}

/// The conventional grid of error-variance ratios reported alongside the
/// least-squares estimates.
pub const DELTA_GRID: [f64; 5] = [0.2, 0.5, 1.0, 2.0, 5.0];
