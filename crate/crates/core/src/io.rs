//! Panel ingestion, run reports, key=value configuration and CSV summaries.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::moments::ReturnsPanel;
use crate::outcome::{Method, TestOutcome};
use crate::sim::{KsRow, RhoSweepRow, SimSummary};

/// Risk-free rate applied to every asset.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum RfrSpec {
    #[default]
    Zero,
    Constant(f64),
    /// Per-row rate read from a column of the file.
    Column(String),
}

/// A wide CSV returns file: one header row, an optional date column, one
/// column per asset.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelFile {
    pub path: PathBuf,
    /// Name of the date column. When `None`, a leading column named `date`
    /// (any case) or with an empty header is treated as dates.
    pub date_column: Option<String>,
    pub rfr: RfrSpec,
}

impl PanelFile {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        PanelFile { path: path.into(), date_column: None, rfr: RfrSpec::Zero }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedPanel {
    pub panel: ReturnsPanel,
    pub dates: Option<Vec<String>>,
    /// Constant rate to subtract when computing Sharpe ratios. A rate column
    /// is subtracted row by row at load time and leaves this at zero.
    pub rfr: f64,
}

fn is_date_header(h: &str) -> bool {
    let h = h.trim();
    h.is_empty() || h.eq_ignore_ascii_case("date")
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<f64> {
    let s = raw.trim();
    if s.is_empty() {
        return Err(Error::Parse { row, column: column.to_string(), message: "blank cell".into() });
    }
    let v: f64 = s.parse().map_err(|_| Error::Parse {
        row,
        column: column.to_string(),
        message: format!("`{s}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse { row, column: column.to_string(), message: format!("non-finite value `{s}`") });
    }
    Ok(v)
}

/// Reads a returns panel. Rows are numbered from 1 for the first data row.
pub fn load_panel(file: &PanelFile) -> Result<LoadedPanel> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(&file.path)
        .map_err(|e| Error::Data(format!("{}: {e}", file.path.display())))?;
    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if headers.is_empty() {
        return Err(Error::Data("missing header row".into()));
    }
    let date_idx = match &file.date_column {
        Some(name) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Data(format!("date column `{name}` not found")))?,
        ),
        None => is_date_header(&headers[0]).then_some(0),
    };
    let rfr_idx = match &file.rfr {
        RfrSpec::Column(name) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Data(format!("risk-free column `{name}` not found")))?,
        ),
        _ => None,
    };
    let asset_idx: Vec<usize> = (0..headers.len()).filter(|&i| Some(i) != date_idx && Some(i) != rfr_idx).collect();
    if asset_idx.is_empty() {
        return Err(Error::Data("no asset columns".into()));
    }
    let mut seen = HashSet::new();
    for &i in &asset_idx {
        if !seen.insert(headers[i].as_str()) {
            return Err(Error::Data(format!("duplicate asset name `{}`", headers[i])));
        }
    }

    let mut data: Vec<f64> = Vec::new();
    let mut dates = date_idx.map(|_| Vec::new());
    let mut rows = 0usize;
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        let row = r + 1;
        let rf = match rfr_idx {
            Some(i) => parse_cell(&record[i], row, &headers[i])?,
            None => 0.0,
        };
        for &i in &asset_idx {
            data.push(parse_cell(&record[i], row, &headers[i])? - rf);
        }
        if let (Some(d), Some(i)) = (dates.as_mut(), date_idx) {
            d.push(record[i].trim().to_string());
        }
        rows += 1;
    }
    if rows < 2 {
        return Err(Error::Data(format!("need at least 2 data rows, found {rows}")));
    }
    let values = DMatrix::from_row_slice(rows, asset_idx.len(), &data);
    let labels = asset_idx.iter().map(|&i| headers[i].clone()).collect();
    let panel = ReturnsPanel::new(values, labels)?;
    let rfr = match file.rfr {
        RfrSpec::Constant(c) => c,
        _ => 0.0,
    };
    Ok(LoadedPanel { panel, dates, rfr })
}

/// Writes a panel in the format `load_panel` reads. Values use the shortest
/// representation that parses back to the same double.
pub fn write_panel(path: &Path, panel: &ReturnsPanel, dates: Option<&[String]>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = Vec::new();
    if dates.is_some() {
        header.push("date".into());
    }
    header.extend(panel.labels().iter().cloned());
    w.write_record(&header)?;
    let x = panel.values();
    for t in 0..panel.n() {
        let mut rec: Vec<String> = Vec::with_capacity(header.len());
        if let Some(d) = dates {
            rec.push(d[t].clone());
        }
        rec.extend((0..panel.k()).map(|j| format!("{:?}", x[(t, j)])));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Hex SHA-256 of a file's bytes.
pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let got = f.read(&mut buf)?;
        if got == 0 {
            break;
        }
        hasher.update(&buf[..got]);
    }
    Ok(hex::encode(hasher.finalize()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputEcho {
    pub path: String,
    pub sha256: String,
    pub rows: usize,
    pub assets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetSharpe {
    pub label: String,
    pub sharpe: f64,
}

/// Result of a `test` or `ci` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool_version: String,
    pub command: String,
    pub input: InputEcho,
    /// Effective settings, as strings.
    pub config: BTreeMap<String, String>,
    pub selected_asset: String,
    /// Sharpe ratios in descending order, per period of the input.
    pub sharpe: Vec<AssetSharpe>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    pub outcomes: Vec<TestOutcome>,
    pub elapsed_ms: f64,
}

impl RunReport {
    /// Pretty JSON with object keys sorted at every level.
    pub fn to_json(&self) -> Result<String> {
        to_sorted_json(self)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn outcome(&self, method: Method) -> Option<&TestOutcome> {
        self.outcomes.iter().find(|o| o.method == method)
    }
}

/// Serializes through `serde_json::Value`, whose maps keep keys sorted.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    Ok(serde_json::to_string_pretty(&v)?)
}

/// Parses flat `key = value` text. Blank lines and lines starting with `#`
/// are skipped; a repeated key is an error.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got `{line}`", i + 1)))?;
        let k = k.trim();
        if k.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", i + 1)));
        }
        if out.insert(k.to_string(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: key `{k}` repeated", i + 1)));
        }
    }
    Ok(out)
}

pub fn read_key_values(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_key_values(&text)
}

#[derive(Debug, Serialize)]
struct SummaryRow<'a> {
    method: &'a str,
    metric: &'a str,
    q: Option<f64>,
    bin_lo: Option<f64>,
    bin_hi: Option<f64>,
    value: Option<f64>,
    band_lo: Option<f64>,
    band_hi: Option<f64>,
    trials: Option<usize>,
    low_confidence: Option<bool>,
}

impl<'a> SummaryRow<'a> {
    fn new(method: &'a str, metric: &'a str, value: Option<f64>) -> Self {
        SummaryRow {
            method,
            metric,
            q: None,
            bin_lo: None,
            bin_hi: None,
            value,
            band_lo: None,
            band_hi: None,
            trials: None,
            low_confidence: None,
        }
    }
}

/// Long-format summary: one row per method and metric. Delta-curve rows
/// carry `q` and the band; power rows carry the bin edges.
pub fn write_summary_csv<W: Write>(out: W, summary: &SimSummary) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.serialize(SummaryRow::new("all", "replications", Some(summary.replications as f64)))?;
    w.serialize(SummaryRow::new("all", "bad_selection_count", Some(summary.bad_selection_count as f64)))?;
    for m in &summary.methods {
        let tag = m.method.as_str();
        w.serialize(SummaryRow { trials: Some(m.trials), ..SummaryRow::new(tag, "rejection_rate", Some(m.rejection_rate)) })?;
        w.serialize(SummaryRow::new(tag, "failures", Some(m.failures as f64)))?;
        w.serialize(SummaryRow::new(tag, "ks_statistic", m.ks_statistic))?;
        for d in &m.delta_curve {
            w.serialize(SummaryRow {
                q: Some(d.q),
                band_lo: Some(d.band_lo),
                band_hi: Some(d.band_hi),
                ..SummaryRow::new(tag, "delta", Some(d.delta))
            })?;
        }
        for b in &m.power_by_selected_snr {
            w.serialize(SummaryRow {
                bin_lo: Some(b.lo),
                bin_hi: Some(b.hi),
                trials: Some(b.trials),
                low_confidence: Some(b.low_confidence),
                ..SummaryRow::new(tag, "power_by_selected_snr", b.rejection_rate)
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Retained p-values, one row per method and replication.
pub fn write_p_values_csv<W: Write>(out: W, summary: &SimSummary) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["method", "index", "p_value"])?;
    for m in &summary.methods {
        if let Some(ps) = &m.p_values {
            for (i, p) in ps.iter().enumerate() {
                w.write_record([m.method.as_str(), &i.to_string(), &format!("{p:?}")])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_rho_sweep_csv<W: Write>(out: W, rows: &[RhoSweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_ks_csv<W: Write>(out: W, rows: &[KsRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
