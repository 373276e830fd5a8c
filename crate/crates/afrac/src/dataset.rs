//! Carbon-budget and scenario datasets with CSV ingestion.
//!
//! File schemas (one header row, comma separated, decimal point, UTF-8,
//! LF or CRLF):
//!
//! * `carbon.csv`     — `year,g,e_ff,e_lulcc_gcp,e_lulcc_hc,e_lulcc_vma` (GtC/yr)
//! * `covariates.csv` — `year,enso,vai`
//! * `enso_monthly.csv` — `year,month,value`
//! * `scenario_<id>.csv` — `year,g,e`

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{AfError, Result};
use crate::series::{AnnualSeries, MonthlyValue};

/// Which land-use and land-cover change series to use for total emissions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LulccSource {
    Gcp,
    Hc,
    VMa,
}

impl LulccSource {
    pub const ALL: [LulccSource; 3] = [LulccSource::Gcp, LulccSource::Hc, LulccSource::VMa];

    fn column(self) -> &'static str {
        match self {
            LulccSource::Gcp => "e_lulcc_gcp",
            LulccSource::Hc => "e_lulcc_hc",
            LulccSource::VMa => "e_lulcc_vma",
        }
    }
}

impl fmt::Display for LulccSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            LulccSource::Gcp => "GCP",
            LulccSource::Hc => "H&C",
            LulccSource::VMa => "vMa",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for LulccSource {
    type Err = AfError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gcp" => Ok(LulccSource::Gcp),
            "hc" | "h&c" => Ok(LulccSource::Hc),
            "vma" => Ok(LulccSource::VMa),
            other => Err(AfError::InvalidArgument(format!(
                "unknown LULCC source `{other}` (expected gcp, hc, or vma)"
            ))),
        }
    }
}

/// Aligned bundle of atmospheric changes, emissions, and optional covariates
/// over a contiguous year range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CarbonDataset {
    pub g: AnnualSeries,
    pub e_ff: AnnualSeries,
    pub e_lulcc: AnnualSeries,
    pub lulcc_source: LulccSource,
    pub enso: Option<AnnualSeries>,
    pub vai: Option<AnnualSeries>,
}

impl CarbonDataset {
    pub fn new(
        g: AnnualSeries,
        e_ff: AnnualSeries,
        e_lulcc: AnnualSeries,
        lulcc_source: LulccSource,
    ) -> Result<Self> {
        let ds = Self {
            g,
            e_ff,
            e_lulcc,
            lulcc_source,
            enso: None,
            vai: None,
        };
        ds.check_alignment()?;
        Ok(ds)
    }

    fn check_alignment(&self) -> Result<()> {
        let (sy, n) = (self.g.start_year(), self.g.len());
        let aligned = |s: &AnnualSeries| s.start_year() == sy && s.len() == n;
        if !aligned(&self.e_ff) || !aligned(&self.e_lulcc) {
            return Err(AfError::InvalidSeries(
                "g, e_ff, e_lulcc must share the same year range".into(),
            ));
        }
        if let Some(s) = &self.enso {
            if !aligned(s) {
                return Err(AfError::InvalidSeries("enso year range mismatch".into()));
            }
        }
        if let Some(s) = &self.vai {
            if !aligned(s) {
                return Err(AfError::InvalidSeries("vai year range mismatch".into()));
            }
        }
        Ok(())
    }

    pub fn first_year(&self) -> i32 {
        self.g.start_year()
    }

    pub fn last_year(&self) -> i32 {
        self.g.end_year()
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Total anthropogenic emissions: fossil plus the selected LULCC series.
    pub fn total_emissions(&self) -> AnnualSeries {
        self.e_ff.add(&self.e_lulcc).expect("aligned by invariant")
    }

    /// Attaches ENSO and VAI covariates (must cover the dataset's range).
    pub fn with_covariates(mut self, enso: AnnualSeries, vai: AnnualSeries) -> Result<Self> {
        let (sy, ey) = (self.first_year(), self.last_year());
        self.enso = Some(enso.window(sy, ey)?);
        self.vai = Some(vai.window(sy, ey)?);
        self.check_alignment()?;
        Ok(self)
    }

    /// Restricts every series to `[start, end]`.
    pub fn window(&self, start: i32, end: i32) -> Result<Self> {
        let ds = Self {
            g: self.g.window(start, end)?,
            e_ff: self.e_ff.window(start, end)?,
            e_lulcc: self.e_lulcc.window(start, end)?,
            lulcc_source: self.lulcc_source,
            enso: self.enso.as_ref().map(|s| s.window(start, end)).transpose()?,
            vai: self.vai.as_ref().map(|s| s.window(start, end)).transpose()?,
        };
        Ok(ds)
    }
}

/// Deterministic future trajectory for one emissions scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSeries {
    pub scenario_id: String,
    pub g_det: AnnualSeries,
    pub e_det: AnnualSeries,
}

impl ScenarioSeries {
    pub fn new(scenario_id: impl Into<String>, g_det: AnnualSeries, e_det: AnnualSeries) -> Result<Self> {
        if g_det.start_year() != e_det.start_year() || g_det.len() != e_det.len() {
            return Err(AfError::InvalidSeries(
                "scenario g and e must share the same year range".into(),
            ));
        }
        Ok(Self {
            scenario_id: scenario_id.into(),
            g_det,
            e_det,
        })
    }

    pub fn first_year(&self) -> i32 {
        self.g_det.start_year()
    }

    pub fn last_year(&self) -> i32 {
        self.g_det.end_year()
    }

    pub fn len(&self) -> usize {
        self.g_det.len()
    }
}

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

struct CsvTable {
    path: String,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    fn read(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| match e.kind() {
                csv::ErrorKind::Io(_) => AfError::Io {
                    path: path_str(path),
                    source: std::io::Error::new(std::io::ErrorKind::Other, e.to_string()),
                },
                _ => AfError::Csv {
                    path: path_str(path),
                    msg: e.to_string(),
                },
            })?;
        let header = reader
            .headers()
            .map_err(|e| AfError::Csv {
                path: path_str(path),
                msg: e.to_string(),
            })?
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| AfError::Csv {
                path: path_str(path),
                msg: e.to_string(),
            })?;
            rows.push(rec.iter().map(|s| s.to_string()).collect());
        }
        Ok(Self {
            path: path_str(path),
            header,
            rows,
        })
    }

    fn column_index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| AfError::MissingColumn {
                path: self.path.clone(),
                column: name.to_string(),
            })
    }

    /// Parses one named column as f64 with row/column context on failure.
    fn numeric_column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self.column_index(name)?;
        let mut out = Vec::with_capacity(self.rows.len());
        for (row_no, row) in self.rows.iter().enumerate() {
            let raw = row.get(idx).map(String::as_str).unwrap_or("");
            let v: f64 = raw.parse().map_err(|_| AfError::BadNumber {
                path: self.path.clone(),
                row: row_no + 2, // 1-based, after the header line
                column: name.to_string(),
                value: raw.to_string(),
            })?;
            out.push(v);
        }
        Ok(out)
    }

    /// Parses the `year` column and checks contiguity.
    fn year_column(&self) -> Result<Vec<i32>> {
        let idx = self.column_index("year")?;
        let mut years = Vec::with_capacity(self.rows.len());
        for (row_no, row) in self.rows.iter().enumerate() {
            let raw = row.get(idx).map(String::as_str).unwrap_or("");
            let y: i32 = raw.parse().map_err(|_| AfError::BadNumber {
                path: self.path.clone(),
                row: row_no + 2,
                column: "year".to_string(),
                value: raw.to_string(),
            })?;
            years.push(y);
        }
        if years.is_empty() {
            return Err(AfError::Csv {
                path: self.path.clone(),
                msg: "no data rows".into(),
            });
        }
        for (i, w) in years.windows(2).enumerate() {
            if w[1] != w[0] + 1 {
                return Err(AfError::YearGap {
                    path: self.path.clone(),
                    expected: years[i] + 1,
                    found: w[1],
                });
            }
        }
        Ok(years)
    }
}

/// Loads a carbon-budget CSV, selecting the LULCC column for `source`.
pub fn load_carbon_csv(path: impl AsRef<Path>, source: LulccSource) -> Result<CarbonDataset> {
    let table = CsvTable::read(path.as_ref())?;
    let years = table.year_column()?;
    let start = years[0];
    let g = AnnualSeries::new(start, table.numeric_column("g")?)?;
    let e_ff = AnnualSeries::new(start, table.numeric_column("e_ff")?)?;
    let e_lulcc = AnnualSeries::new(start, table.numeric_column(source.column())?)?;
    CarbonDataset::new(g, e_ff, e_lulcc, source)
}

/// Loads `covariates.csv`, returning `(enso, vai)` annual series.
pub fn load_covariates_csv(path: impl AsRef<Path>) -> Result<(AnnualSeries, AnnualSeries)> {
    let table = CsvTable::read(path.as_ref())?;
    let years = table.year_column()?;
    let start = years[0];
    let enso = AnnualSeries::new(start, table.numeric_column("enso")?)?;
    let vai = AnnualSeries::new(start, table.numeric_column("vai")?)?;
    Ok((enso, vai))
}

/// Loads a monthly ENSO file (`year,month,value`).
pub fn load_enso_monthly_csv(path: impl AsRef<Path>) -> Result<Vec<MonthlyValue>> {
    let table = CsvTable::read(path.as_ref())?;
    let year_idx = table.column_index("year")?;
    let month_idx = table.column_index("month")?;
    let value_idx = table.column_index("value")?;
    let mut out = Vec::with_capacity(table.rows.len());
    for (row_no, row) in table.rows.iter().enumerate() {
        let parse = |idx: usize, col: &str| -> Result<f64> {
            let raw = row.get(idx).map(String::as_str).unwrap_or("");
            raw.parse().map_err(|_| AfError::BadNumber {
                path: table.path.clone(),
                row: row_no + 2,
                column: col.to_string(),
                value: raw.to_string(),
            })
        };
        let year = parse(year_idx, "year")? as i32;
        let month = parse(month_idx, "month")? as u32;
        if !(1..=12).contains(&month) {
            return Err(AfError::Csv {
                path: table.path.clone(),
                msg: format!("row {}: month {} out of range", row_no + 2, month),
            });
        }
        out.push(MonthlyValue {
            year,
            month,
            value: parse(value_idx, "value")?,
        });
    }
    Ok(out)
}

/// Loads a scenario trajectory CSV (`year,g,e`).
pub fn load_scenario_csv(path: impl AsRef<Path>, scenario_id: &str) -> Result<ScenarioSeries> {
    let table = CsvTable::read(path.as_ref())?;
    let years = table.year_column()?;
    let start = years[0];
    let g = AnnualSeries::new(start, table.numeric_column("g")?)?;
    let e = AnnualSeries::new(start, table.numeric_column("e")?)?;
    ScenarioSeries::new(scenario_id, g, e)
}

/// Writes a dataset back out in the `carbon.csv` schema.
///
/// Values are printed with Rust's shortest round-trip float formatting, so a
/// write/reload cycle reproduces the dataset bit-exactly. Only the selected
/// LULCC column carries data; the other two are written as the same values
/// (callers holding all three sources should write from the original file).
pub fn write_carbon_csv(path: impl AsRef<Path>, ds: &CarbonDataset) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("year,g,e_ff,e_lulcc_gcp,e_lulcc_hc,e_lulcc_vma\n");
    for (i, (year, g)) in ds.g.iter().enumerate() {
        let ff = ds.e_ff.values()[i];
        let lu = ds.e_lulcc.values()[i];
        out.push_str(&format!("{year},{g},{ff},{lu},{lu},{lu}\n"));
    }
    std::fs::write(path, out).map_err(|e| AfError::Io {
        path: path_str(path),
        source: e,
    })
}
