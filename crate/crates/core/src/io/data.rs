//! CSV ingestion with FRED-style transformation codes.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TimeSeriesPanel;

/// Transformation codes: 1 level, 2 first difference, 5 100·Δlog, 6 100·Δ²log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Tcode {
    Level,
    Diff,
    LogDiff,
    LogDiff2,
}

impl TryFrom<u8> for Tcode {
    type Error = String;

    fn try_from(v: u8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Tcode::Level),
            2 => Ok(Tcode::Diff),
            5 => Ok(Tcode::LogDiff),
            6 => Ok(Tcode::LogDiff2),
            other => Err(format!("unsupported tcode {other} (expected 1, 2, 5 or 6)")),
        }
    }
}

impl From<Tcode> for u8 {
    fn from(t: Tcode) -> u8 {
        match t {
            Tcode::Level => 1,
            Tcode::Diff => 2,
            Tcode::LogDiff => 5,
            Tcode::LogDiff2 => 6,
        }
    }
}

impl Tcode {
    /// Observations lost at the start.
    pub fn order(self) -> usize {
        match self {
            Tcode::Level => 0,
            Tcode::Diff | Tcode::LogDiff => 1,
            Tcode::LogDiff2 => 2,
        }
    }

    fn uses_log(self) -> bool {
        matches!(self, Tcode::LogDiff | Tcode::LogDiff2)
    }
}

/// Transformed series, shorter by the differencing order. Missing values
/// (NaN) propagate; log codes reject non-positive observed values.
pub fn apply_tcode(series: &[f64], code: Tcode) -> Result<Vec<f64>> {
    let k = code.order();
    if series.len() < k + 1 {
        return Err(Error::Data(format!("{} observations are too few for tcode {}", series.len(), u8::from(code))));
    }
    let x: Vec<f64> = if code.uses_log() {
        series
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                if v.is_nan() {
                    Ok(f64::NAN)
                } else if v > 0.0 {
                    Ok(v.ln())
                } else {
                    Err(Error::Data(format!("non-positive value {v} at index {i} under a log transformation")))
                }
            })
            .collect::<Result<_>>()?
    } else {
        series.to_vec()
    };
    let d1 = |v: &[f64]| v.windows(2).map(|w| w[1] - w[0]).collect::<Vec<f64>>();
    Ok(match code {
        Tcode::Level => x,
        Tcode::Diff => d1(&x),
        Tcode::LogDiff => d1(&x).into_iter().map(|v| 100.0 * v).collect(),
        Tcode::LogDiff2 => d1(&d1(&x)).into_iter().map(|v| 100.0 * v).collect(),
    })
}

/// A column to load and how to transform it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableSpec {
    pub name: String,
    pub tcode: Tcode,
}

impl VariableSpec {
    pub fn new(name: &str, tcode: u8) -> Self {
        Self { name: name.to_string(), tcode: Tcode::try_from(tcode).expect("known tcode") }
    }
}

const FRED_MEDIUM: [(&str, u8); 10] = [
    ("UNRATE", 2),
    ("GDPC1", 5),
    ("CPIAUCSL", 6),
    ("PCECC96", 5),
    ("GPDIC1", 5),
    ("PRFIx", 5),
    ("CES3000000008x", 5),
    ("PCECTPI", 6),
    ("GS1", 2),
    ("S&P 500", 5),
];

const FRED_LARGE: [(&str, u8); 19] = [
    ("UNRATE", 2),
    ("GDPC1", 5),
    ("CPIAUCSL", 6),
    ("PCECC96", 5),
    ("GPDIC1", 5),
    ("PRFIx", 5),
    ("INDPRO", 5),
    ("CUMFNS", 2),
    ("SRVPRD", 5),
    ("CE16OV", 5),
    ("AWHMAN", 1),
    ("CES3000000008x", 5),
    ("PCECTPI", 6),
    ("GDPCTPI", 6),
    ("GPDICTPI", 6),
    ("FEDFUNDS", 2),
    ("BAA10YM", 2),
    ("M2REAL", 5),
    ("S&P 500", 5),
];

/// The medium FRED-QD selection; the three focus series come first.
pub fn fred_medium() -> Vec<VariableSpec> {
    FRED_MEDIUM.iter().map(|(n, t)| VariableSpec::new(n, *t)).collect()
}

/// The large FRED-QD selection; the three focus series come first.
pub fn fred_large() -> Vec<VariableSpec> {
    FRED_LARGE.iter().map(|(n, t)| VariableSpec::new(n, *t)).collect()
}

/// Raw CSV body: the first column holds dates, the others named series.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub dates: Vec<String>,
    pub names: Vec<String>,
    /// Column-major series, NaN for empty cells.
    pub columns: Vec<Vec<f64>>,
}

/// Rows whose date cell is a FRED-QD metadata label.
fn is_metadata_row(date: &str) -> bool {
    matches!(date.trim().to_ascii_lowercase().as_str(), "factors" | "transform")
}

pub fn read_table(path: &Path) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new().flexible(false).from_path(path)?;
    let header = rdr.headers()?.clone();
    if header.len() < 2 {
        return Err(Error::Data("expected a date column followed by series".into()));
    }
    let names: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    let mut dates = Vec::new();
    let mut columns = vec![Vec::new(); names.len()];
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let date = rec.get(0).unwrap_or("").trim().to_string();
        if date.is_empty() || is_metadata_row(&date) {
            continue;
        }
        for (c, col) in columns.iter_mut().enumerate() {
            let cell = rec.get(c + 1).unwrap_or("").trim();
            let v = if cell.is_empty() || cell.eq_ignore_ascii_case("nan") || cell == "NA" || cell == "." {
                f64::NAN
            } else {
                cell.parse::<f64>().map_err(|_| {
                    Error::Data(format!("row {} column `{}`: cannot parse `{cell}`", r + 2, names[c]))
                })?
            };
            col.push(v);
        }
        dates.push(date);
    }
    Ok(RawTable { dates, names, columns })
}

/// Selects and transforms the requested columns, then keeps the longest span
/// where every series is observed. Gaps inside that span are an error.
pub fn panel_from_table(table: &RawTable, spec: &[VariableSpec]) -> Result<TimeSeriesPanel> {
    if spec.is_empty() {
        return Err(Error::Data("no variables requested".into()));
    }
    let n = table.dates.len();
    let mut series = Vec::with_capacity(spec.len());
    for v in spec {
        let c = table
            .names
            .iter()
            .position(|x| *x == v.name)
            .ok_or_else(|| Error::Data(format!("column `{}` not found", v.name)))?;
        let t = apply_tcode(&table.columns[c], v.tcode)
            .map_err(|e| Error::Data(format!("series `{}`: {e}", v.name)))?;
        // Align to the raw row index.
        let mut aligned = vec![f64::NAN; n];
        aligned[v.tcode.order()..].copy_from_slice(&t);
        series.push(aligned);
    }
    let complete = |r: usize| series.iter().all(|s| s[r].is_finite());
    let first = (0..n).find(|&r| complete(r)).ok_or_else(|| Error::Data("no row observes every series".into()))?;
    let last = (0..n).rev().find(|&r| complete(r)).expect("a complete row exists");
    if let Some(r) = (first..=last).find(|&r| !complete(r)) {
        let bad = spec
            .iter()
            .zip(&series)
            .find(|(_, s)| !s[r].is_finite())
            .map(|(v, _)| v.name.clone())
            .unwrap_or_default();
        return Err(Error::Data(format!(
            "panel is unbalanced: `{bad}` is missing at {} inside the common sample",
            table.dates[r]
        )));
    }
    let rows = last - first + 1;
    let values = DMatrix::from_fn(rows, spec.len(), |r, c| series[c][first + r]);
    TimeSeriesPanel::new(
        values,
        spec.iter().map(|v| v.name.clone()).collect(),
        Some(table.dates[first..=last].to_vec()),
    )
}

pub fn load_panel(path: &Path, spec: &[VariableSpec]) -> Result<TimeSeriesPanel> {
    panel_from_table(&read_table(path)?, spec)
}

/// Writes a panel with its dates (or row numbers) as the first column.
pub fn write_panel<W: std::io::Write>(panel: &TimeSeriesPanel, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["date".to_string()];
    header.extend(panel.names().iter().cloned());
    w.write_record(&header)?;
    for r in 0..panel.n_obs() {
        let mut row = vec![panel.dates().map(|d| d[r].clone()).unwrap_or_else(|| (r + 1).to_string())];
        row.extend(panel.values().row(r).iter().map(|v| format!("{v:?}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
