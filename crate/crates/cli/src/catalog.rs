//! Event catalog and annual count files.

use std::collections::HashMap;
use std::path::Path;

use catbond_core::frequency::IntensitySeries;
use catbond_core::stats;
use chrono::NaiveDate;

use crate::error::{CliError, CliResult};

/// Validated event catalog: every indicator value positive, every date a
/// valid ISO calendar date, event ids unique.
#[derive(Debug, Clone, PartialEq)]
pub struct EventCatalog {
    pub labels: Vec<String>,
    pub event_ids: Vec<String>,
    pub dates: Vec<NaiveDate>,
    /// One row per event, values in `labels` order.
    pub rows: Vec<Vec<f64>>,
}

/// Row-major or column-major block of indicator values.
pub type Table = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSummary {
    pub label: String,
    pub n: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

fn open(path: &Path) -> CliResult<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(CliError::io(path))?;
    Ok(csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map(|p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => CliError::Io {
            path: path.to_path_buf(),
            source,
        },
        kind => CliError::Validation(format!(
            "{}{}: {kind:?}",
            path.display(),
            line.map(|l| format!(" line {l}")).unwrap_or_default()
        )),
    }
}

fn headers(path: &Path, rdr: &mut csv::Reader<std::fs::File>) -> CliResult<Vec<String>> {
    let h = rdr.headers().map_err(|e| csv_error(path, e))?;
    if h.iter().all(|f| f.is_empty()) {
        return Err(CliError::Validation(format!("{} is empty (no header row)", path.display())));
    }
    Ok(h.iter().map(str::to_string).collect())
}

impl EventCatalog {
    pub fn read(path: &Path) -> CliResult<Self> {
        let mut rdr = open(path)?;
        let header = headers(path, &mut rdr)?;
        if header.len() < 3 || header[0] != "event_id" || header[1] != "date" {
            return Err(CliError::Validation(format!(
                "{}: header must be `event_id,date,<label>,...`, got `{}`",
                path.display(),
                header.join(",")
            )));
        }
        let labels = header[2..].to_vec();
        if let Some(l) = labels.iter().find(|l| l.is_empty() || l.contains(['.', ',', '-'])) {
            return Err(CliError::Validation(format!(
                "{}: indicator label `{l}` must be non-empty without `.`, `,` or `-`",
                path.display()
            )));
        }
        let mut cat = Self {
            labels,
            event_ids: Vec::new(),
            dates: Vec::new(),
            rows: Vec::new(),
        };
        let mut first_line: HashMap<String, u64> = HashMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            let row = i + 1;
            let malformed =
                |msg: String| CliError::Validation(format!("{} line {line} (row {row}): {msg}", path.display()));
            if rec.len() != header.len() {
                return Err(malformed(format!("expected {} fields, found {}", header.len(), rec.len())));
            }
            let id = rec[0].to_string();
            if id.is_empty() {
                return Err(malformed("empty event_id".into()));
            }
            if let Some(first) = first_line.insert(id.clone(), line) {
                return Err(malformed(format!("duplicate event_id `{id}` (first seen on line {first})")));
            }
            let date = NaiveDate::parse_from_str(&rec[1], "%Y-%m-%d")
                .map_err(|e| malformed(format!("date `{}` is not ISO-8601 (YYYY-MM-DD): {e}", &rec[1])))?;
            let mut values = Vec::with_capacity(cat.labels.len());
            for (label, field) in cat.labels.iter().zip(rec.iter().skip(2)) {
                if field.is_empty() {
                    return Err(malformed(format!("missing value for `{label}`")));
                }
                let v: f64 = field
                    .parse()
                    .map_err(|_| malformed(format!("`{field}` for `{label}` is not a number")))?;
                if !(v > 0.0) || !v.is_finite() {
                    return Err(malformed(format!("value {v} for `{label}` must be positive")));
                }
                values.push(v);
            }
            cat.event_ids.push(id);
            cat.dates.push(date);
            cat.rows.push(values);
        }
        if cat.rows.is_empty() {
            return Err(CliError::Validation(format!("{} has a header but no events", path.display())));
        }
        Ok(cat)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[j]).collect()
    }

    /// Rows and columns for the requested labels, in that order.
    pub fn select(&self, labels: &[String]) -> CliResult<(Table, Table)> {
        let idx = labels
            .iter()
            .map(|l| {
                self.column_index(l).ok_or_else(|| {
                    CliError::config(
                        "indicators",
                        format!("`{l}` is not a catalog column (have {})", self.labels.join(", ")),
                    )
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        let rows = self.rows.iter().map(|r| idx.iter().map(|&j| r[j]).collect()).collect();
        let cols = idx.iter().map(|&j| self.column(j)).collect();
        Ok((rows, cols))
    }

    pub fn summary(&self) -> Vec<ColumnSummary> {
        (0..self.labels.len())
            .map(|j| summarize(&self.labels[j], &self.column(j)))
            .collect()
    }
}

pub fn summarize(label: &str, x: &[f64]) -> ColumnSummary {
    ColumnSummary {
        label: label.to_string(),
        n: x.len(),
        min: x.iter().copied().fold(f64::INFINITY, f64::min),
        max: x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean: stats::mean(x),
        median: stats::median(x),
        skewness: stats::skewness(x),
        kurtosis: stats::kurtosis(x),
    }
}

/// Annual counts from a `year,count` file.
pub fn read_counts(path: &Path) -> CliResult<IntensitySeries> {
    let mut rdr = open(path)?;
    let header = headers(path, &mut rdr)?;
    if header != ["year", "count"] {
        return Err(CliError::Validation(format!(
            "{}: header must be `year,count`, got `{}`",
            path.display(),
            header.join(",")
        )));
    }
    let (mut years, mut counts) = (Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |msg: String| CliError::Validation(format!("{} line {line}: {msg}", path.display()));
        if rec.len() != 2 {
            return Err(bad(format!("expected 2 fields, found {}", rec.len())));
        }
        years.push(rec[0].parse::<i32>().map_err(|_| bad(format!("year `{}` is not an integer", &rec[0])))?);
        let c: f64 = rec[1].parse().map_err(|_| bad(format!("count `{}` is not a number", &rec[1])))?;
        if !(c >= 0.0) || !c.is_finite() {
            return Err(bad(format!("count {c} must be non-negative")));
        }
        counts.push(c);
    }
    if years.is_empty() {
        return Err(CliError::Validation(format!("{} has a header but no years", path.display())));
    }
    IntensitySeries::new(years, counts).map_err(CliError::model(format!("counts in {}", path.display())))
}
