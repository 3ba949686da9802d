//! CSV input and the raw-trial, summary and sweep output files.

use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use super::{ExperimentSummary, SweepPoint, TrialResult};
use crate::error::{Result, RrmError};
use crate::models::{ClassificationData, PointData, RegressionData};

/// Numeric table read from a CSV file, with its 1-based source line numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTable {
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
    pub lines: Vec<usize>,
}

/// Reads comma-separated numeric rows. A first row that does not parse as
/// numbers is treated as a header; blank lines are skipped.
pub fn read_numeric_csv(path: impl AsRef<Path>) -> Result<NumericTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| RrmError::io(path, e))?;
    parse_numeric_csv(file)
}

pub fn parse_numeric_csv(mut reader: impl std::io::Read) -> Result<NumericTable> {
    let mut text = Vec::new();
    reader.read_to_end(&mut text).map_err(|e| RrmError::Parse {
        row: 0,
        message: e.to_string(),
    })?;
    // The csv reader does not count skipped blank lines, so lines are recovered from byte offsets.
    let line_of = |byte: u64| {
        let mut start = byte as usize;
        while start < text.len() && matches!(text[start], b'\n' | b'\r') {
            start += 1;
        }
        1 + text[..start].iter().filter(|b| **b == b'\n').count()
    };
    let mut csv_reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_slice());
    let mut table = NumericTable {
        header: None,
        rows: Vec::new(),
        lines: Vec::new(),
    };
    for record in csv_reader.records() {
        let record = record.map_err(|e| RrmError::Parse {
            row: e.position().map_or(0, |p| line_of(p.byte())),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| line_of(p.byte()));
        if record.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(values) => {
                if let Some(first) = table.rows.first() {
                    if first.len() != values.len() {
                        return Err(RrmError::Parse {
                            row: line,
                            message: format!("expected {} fields, found {}", first.len(), values.len()),
                        });
                    }
                }
                if let Some(v) = values.iter().find(|v| !v.is_finite()) {
                    return Err(RrmError::Parse {
                        row: line,
                        message: format!("non-finite value {v}"),
                    });
                }
                table.rows.push(values);
                table.lines.push(line);
            }
            Err(_) if table.rows.is_empty() && table.header.is_none() => {
                table.header = Some(record.iter().map(str::to_owned).collect());
            }
            Err(e) => {
                return Err(RrmError::Parse {
                    row: line,
                    message: format!("non-numeric field ({e})"),
                });
            }
        }
    }
    if let (Some(h), Some(first)) = (&table.header, table.rows.first()) {
        if h.len() != first.len() {
            return Err(RrmError::Parse {
                row: table.lines[0],
                message: format!("header has {} fields but rows have {}", h.len(), first.len()),
            });
        }
    }
    Ok(table)
}

impl NumericTable {
    fn split_last(&self) -> Result<(DMatrix<f64>, Vec<f64>)> {
        let cols = self.rows.first().map_or(0, Vec::len);
        if cols < 2 {
            return Err(RrmError::Input(
                "need at least one feature column and a final outcome column".into(),
            ));
        }
        let features = DMatrix::from_fn(self.rows.len(), cols - 1, |i, j| self.rows[i][j]);
        let last = self.rows.iter().map(|r| r[cols - 1]).collect();
        Ok((features, last))
    }

    /// Features in all but the last column, real outcome in the last.
    pub fn to_regression(&self) -> Result<RegressionData> {
        let (features, y) = self.split_last()?;
        RegressionData::new(features, y.into())
    }

    /// Features in all but the last column, integer label `{0, 1}` in the last.
    pub fn to_classification(&self) -> Result<ClassificationData> {
        let (features, raw) = self.split_last()?;
        let mut labels = Vec::with_capacity(raw.len());
        for (value, line) in raw.iter().zip(&self.lines) {
            match *value {
                v if v == 0.0 => labels.push(0),
                v if v == 1.0 => labels.push(1),
                v => {
                    return Err(RrmError::Parse {
                        row: *line,
                        message: format!("label {v} is not 0 or 1"),
                    })
                }
            }
        }
        ClassificationData::new(features, labels)
    }

    pub fn to_points(&self) -> Result<PointData> {
        PointData::from_rows(&self.rows)
    }
}

/// 17 significant digits, enough to round-trip every `f64`.
pub fn format_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn csv_error(e: csv::Error) -> RrmError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => RrmError::io("<output>", io),
        other => RrmError::Numerical(format!("csv write failed: {other:?}")),
    }
}

pub fn write_trials_csv<W: Write>(writer: W, trials: &[TrialResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "experiment",
        "method",
        "metric",
        "seed",
        "value",
        "excluded_flag",
        "dataset_hash",
    ])
    .map_err(csv_error)?;
    for t in trials {
        w.write_record([
            t.experiment.as_str(),
            t.method.as_str(),
            t.metric.as_str(),
            &t.seed.to_string(),
            &format_value(t.value),
            if t.excluded { "1" } else { "0" },
            t.dataset_hash.as_str(),
        ])
        .map_err(csv_error)?;
    }
    w.flush().map_err(|e| RrmError::io("<output>", e))
}

pub fn write_sweep_csv<W: Write>(writer: W, points: &[SweepPoint]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["eps", "method", "mean_relative_error"])
        .map_err(csv_error)?;
    for p in points {
        w.write_record([
            format_value(p.eps),
            p.method.as_str().to_owned(),
            format_value(p.mean_relative_error),
        ])
        .map_err(csv_error)?;
    }
    w.flush().map_err(|e| RrmError::io("<output>", e))
}

pub fn summary_json(summary: &ExperimentSummary) -> Result<String> {
    serde_json::to_string_pretty(summary).map_err(|e| RrmError::Numerical(e.to_string()))
}
