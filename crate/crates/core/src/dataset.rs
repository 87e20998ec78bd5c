//! Market time series: observed shares and raw input factors per period.
//!
//! File format (UTF-8, `\n` line endings):
//!
//! ```text
//! # optional comment lines, kept as provenance
//! label,share_1,...,share_n,y_1,...,y_ny
//! 2009Q1,0.15,0.85,1.2,0.35,440,700
//! ```
//!
//! Labels are `YYYY` or `YYYYQn` and must increase strictly. Share rows are
//! rescaled to sum 1; a row summing outside `[0.9, 1.1]` is rejected since
//! it usually means the columns are misaligned.

use std::fmt::Write as _;
use std::io::Read;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::SharesState;
use crate::error::{Error, Result};
use crate::influence::InputVector;

const BUNDLED_CSV: &str = include_str!("../data/smartphone_market.csv");

/// Accepted band for a raw share row's sum before rescaling.
pub const SHARE_SUM_BAND: (f64, f64) = (0.9, 1.1);

#[derive(Debug, Clone, PartialEq)]
pub struct MarketDataset {
    labels: Vec<String>,
    shares: Vec<SharesState>,
    inputs: Vec<InputVector>,
    provenance: String,
}

impl MarketDataset {
    pub fn new(
        labels: Vec<String>,
        shares: Vec<SharesState>,
        inputs: Vec<InputVector>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let len = labels.len();
        if shares.len() != len || inputs.len() != len {
            return Err(Error::data(format!(
                "series lengths differ: {len} labels, {} share rows, {} input rows",
                shares.len(),
                inputs.len()
            )));
        }
        if len < 2 {
            return Err(Error::data(format!(
                "length >= 2 required, dataset has {len} rows"
            )));
        }
        let n = shares[0].n();
        let n_y = inputs[0].len();
        if let Some(t) = shares.iter().position(|s| s.n() != n) {
            return Err(Error::data(format!(
                "share row {t} has {} strategies, expected {n}",
                shares[t].n()
            )));
        }
        if let Some(t) = inputs.iter().position(|y| y.len() != n_y) {
            return Err(Error::data(format!(
                "input row {t} has {} values, expected {n_y}",
                inputs[t].len()
            )));
        }
        for (t, label) in labels.iter().enumerate() {
            validate_label(label).map_err(|m| Error::data(format!("row {t}: {m}")))?;
        }
        if let Some(t) = labels.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::data(format!(
                "labels must increase strictly: `{}` is followed by `{}`",
                labels[t],
                labels[t + 1]
            )));
        }
        Ok(Self {
            labels,
            shares,
            inputs,
            provenance: provenance.into(),
        })
    }

    /// Example smartphone-market series shipped with the crate.
    pub fn bundled() -> Self {
        parse_csv(BUNDLED_CSV).expect("bundled dataset is valid")
    }

    pub fn bundled_csv() -> &'static str {
        BUNDLED_CSV
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n(&self) -> usize {
        self.shares[0].n()
    }

    pub fn n_y(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn shares(&self) -> &[SharesState] {
        &self.shares
    }

    pub fn inputs(&self) -> &[InputVector] {
        &self.inputs
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn initial_shares(&self) -> &SharesState {
        &self.shares[0]
    }

    /// Observed share of `strategy` over time.
    pub fn share_series(&self, strategy: usize) -> Vec<f64> {
        self.shares.iter().map(|s| s[strategy]).collect()
    }

    /// Same periods and inputs with every share row replaced by `shares`.
    pub fn with_constant_shares(&self, shares: SharesState) -> Result<Self> {
        if shares.n() != self.n() {
            return Err(Error::argument(format!(
                "constant shares have {} strategies, dataset has {}",
                shares.n(),
                self.n()
            )));
        }
        Ok(Self {
            shares: vec![shares; self.len()],
            ..self.clone()
        })
    }

    /// Same periods and shares with the input series replaced.
    pub fn with_inputs(&self, inputs: Vec<InputVector>) -> Result<Self> {
        Self::new(
            self.labels.clone(),
            self.shares.clone(),
            inputs,
            self.provenance.clone(),
        )
    }

    /// Serializes in the load format at full `f64` precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for line in self.provenance.lines() {
            writeln!(out, "# {line}").unwrap();
        }
        out.push_str("label");
        for i in 1..=self.n() {
            write!(out, ",share_{i}").unwrap();
        }
        for m in 1..=self.n_y() {
            write!(out, ",y_{m}").unwrap();
        }
        out.push('\n');
        for t in 0..self.len() {
            out.push_str(&self.labels[t]);
            for v in self.shares[t].iter().chain(self.inputs[t].iter()) {
                write!(out, ",{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

fn validate_label(label: &str) -> std::result::Result<(), String> {
    let bytes = label.as_bytes();
    let year_ok = bytes.len() >= 4 && bytes[..4].iter().all(u8::is_ascii_digit);
    let rest_ok = match &bytes[4.min(bytes.len())..] {
        [] => true,
        [b'Q', q] => (b'1'..=b'4').contains(q),
        _ => false,
    };
    if year_ok && rest_ok {
        Ok(())
    } else {
        Err(format!("label `{label}` is not of the form YYYY or YYYYQn"))
    }
}

/// Reads a dataset from any reader.
pub fn load_csv<R: Read>(mut reader: R) -> Result<MarketDataset> {
    let mut text = String::new();
    reader
        .read_to_string(&mut text)
        .map_err(|e| Error::io("<dataset stream>", e))?;
    parse_csv(&text)
}

pub fn load_csv_path(path: impl AsRef<Path>) -> Result<MarketDataset> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_csv(&text)
}

struct Header {
    n: usize,
    n_y: usize,
}

fn parse_header(line: &str, line_no: usize) -> Result<Header> {
    let cols: Vec<&str> = line.split(',').map(str::trim).collect();
    let parse_err = |message: String| Error::Parse {
        line: line_no,
        message,
    };
    if cols.first() != Some(&"label") {
        return Err(parse_err(format!(
            "header must start with `label`, found `{}`",
            cols.first().unwrap_or(&"")
        )));
    }
    let n = cols[1..]
        .iter()
        .take_while(|c| c.starts_with("share_"))
        .count();
    let n_y = cols.len() - 1 - n;
    for (i, c) in cols[1..=n].iter().enumerate() {
        if *c != format!("share_{}", i + 1) {
            return Err(parse_err(format!(
                "expected `share_{}`, found `{c}`",
                i + 1
            )));
        }
    }
    for (m, c) in cols[n + 1..].iter().enumerate() {
        if *c != format!("y_{}", m + 1) {
            return Err(parse_err(format!("expected `y_{}`, found `{c}`", m + 1)));
        }
    }
    if n < 2 || n_y < 1 {
        return Err(parse_err(format!(
            "need at least two share columns and one input column, found {n} and {n_y}"
        )));
    }
    Ok(Header { n, n_y })
}

fn parse_csv(text: &str) -> Result<MarketDataset> {
    let mut provenance = Vec::new();
    let mut header: Option<Header> = None;
    let mut labels = Vec::new();
    let mut shares = Vec::new();
    let mut inputs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if header.is_none() {
            if let Some(comment) = line.strip_prefix('#') {
                provenance.push(comment.trim().to_string());
                continue;
            }
        }
        if line.trim().is_empty() {
            continue;
        }
        let Some(h) = &header else {
            header = Some(parse_header(line, line_no)?);
            continue;
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 1 + h.n + h.n_y {
            return Err(Error::Parse {
                line: line_no,
                message: format!(
                    "expected {} fields, found {}",
                    1 + h.n + h.n_y,
                    fields.len()
                ),
            });
        }
        let mut values = Vec::with_capacity(h.n + h.n_y);
        for (col, f) in fields[1..].iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("column {} value `{f}` is not a number", col + 2),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("column {} value `{f}` is not finite", col + 2),
                });
            }
            values.push(v);
        }
        let row = &values[..h.n];
        let sum: f64 = row.iter().sum();
        if row.iter().any(|&s| s < 0.0) {
            return Err(Error::data(format!("line {line_no}: negative share")));
        }
        if !(SHARE_SUM_BAND.0..=SHARE_SUM_BAND.1).contains(&sum) {
            return Err(Error::data(format!(
                "line {line_no}: shares sum to {sum}, outside [{}, {}]; check the column order",
                SHARE_SUM_BAND.0, SHARE_SUM_BAND.1
            )));
        }
        let state = SharesState::new(row.iter().map(|s| s / sum).collect())
            .map_err(|e| Error::data(format!("line {line_no}: {e}")))?;
        labels.push(fields[0].to_string());
        shares.push(state);
        inputs.push(InputVector::new(values[h.n..].to_vec())?);
    }
    if header.is_none() {
        return Err(Error::data("length >= 2 required: no header or rows found"));
    }
    MarketDataset::new(labels, shares, inputs, provenance.join("\n"))
}

/// Input-only series, as used for user-supplied scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSeries {
    pub labels: Vec<String>,
    pub inputs: Vec<InputVector>,
}

/// Reads `label,y_1,...,y_ny` rows. A full dataset file is also accepted;
/// its share columns are ignored.
pub fn load_inputs_csv_path(path: impl AsRef<Path>) -> Result<InputSeries> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_inputs_csv(&text)
}

pub fn parse_inputs_csv(text: &str) -> Result<InputSeries> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .skip_while(|(_, l)| l.starts_with('#') || l.trim().is_empty());
    let Some((header_no, header)) = lines.next() else {
        return Err(Error::data("input series is empty"));
    };
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.iter().any(|c| c.starts_with("share_")) {
        let d = parse_csv(text)?;
        return Ok(InputSeries {
            labels: d.labels,
            inputs: d.inputs,
        });
    }
    let expected: Vec<String> = std::iter::once("label".to_string())
        .chain((1..cols.len()).map(|m| format!("y_{m}")))
        .collect();
    if cols.len() < 2 || cols != expected {
        return Err(Error::Parse {
            line: header_no,
            message: format!("expected header `{}`", expected.join(",")),
        });
    }
    let mut series = InputSeries {
        labels: Vec::new(),
        inputs: Vec::new(),
    };
    for (line_no, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != cols.len() {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected {} fields, found {}", cols.len(), fields.len()),
            });
        }
        let values = fields[1..]
            .iter()
            .enumerate()
            .map(|(col, f)| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Parse {
                        line: line_no,
                        message: format!("column {} value `{f}` is not a finite number", col + 2),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        series.labels.push(fields[0].to_string());
        series.inputs.push(InputVector::new(values)?);
    }
    Ok(series)
}

/// Per-input min-max statistics taken from a training window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRecord {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    /// Inputs with `max == min`; they map to 0.5.
    pub constant: Vec<bool>,
    pub window_start: usize,
    pub window_end: usize,
}

impl NormalizationRecord {
    /// Statistics of `inputs[window]`.
    pub fn fit(inputs: &[InputVector], window: Range<usize>) -> Result<Self> {
        if window.is_empty() || window.end > inputs.len() {
            return Err(Error::argument(format!(
                "normalization window {}..{} is empty or exceeds {} samples",
                window.start,
                window.end,
                inputs.len()
            )));
        }
        let n_y = inputs[window.start].len();
        let mut min = vec![f64::INFINITY; n_y];
        let mut max = vec![f64::NEG_INFINITY; n_y];
        for y in &inputs[window.clone()] {
            for (m, &v) in y.iter().enumerate() {
                min[m] = min[m].min(v);
                max[m] = max[m].max(v);
            }
        }
        let constant = min.iter().zip(&max).map(|(lo, hi)| lo == hi).collect();
        Ok(Self {
            min,
            max,
            constant,
            window_start: window.start,
            window_end: window.end,
        })
    }

    /// Scales one sample; values outside the window's range leave `[0, 1]`.
    pub fn apply(&self, y: &InputVector) -> Result<InputVector> {
        if y.len() != self.min.len() {
            return Err(Error::argument(format!(
                "input vector has {} values, normalization covers {}",
                y.len(),
                self.min.len()
            )));
        }
        let scaled = y
            .iter()
            .enumerate()
            .map(|(m, &v)| {
                if self.constant[m] {
                    0.5
                } else {
                    (v - self.min[m]) / (self.max[m] - self.min[m])
                }
            })
            .collect();
        InputVector::new(scaled)
    }

    pub fn apply_all(&self, inputs: &[InputVector]) -> Result<Vec<InputVector>> {
        inputs.iter().map(|y| self.apply(y)).collect()
    }
}

/// Min-max scales every input with statistics from `window` only.
pub fn normalize_inputs(
    dataset: &MarketDataset,
    window: Range<usize>,
) -> Result<(MarketDataset, NormalizationRecord)> {
    let record = NormalizationRecord::fit(&dataset.inputs, window)?;
    let inputs = record.apply_all(&dataset.inputs)?;
    Ok((dataset.with_inputs(inputs)?, record))
}
