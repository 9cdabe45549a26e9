//! Daily price ingestion on a uniform trading-day grid, and return series.
//!
//! Each data row is one grid step: weekends and holidays are not
//! interpolated, so index `i` sits at `epoch + i * spacing` in trading days.

use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{invalid, Error, Result};

/// Which columns of a delimited price file to read.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSpec {
    pub date_col: String,
    pub price_col: String,
    pub delimiter: u8,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        Self {
            date_col: "Date".to_string(),
            price_col: "Close".to_string(),
            delimiter: b',',
        }
    }
}

/// Strictly positive price samples on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    name: String,
    values: Vec<f64>,
    spacing: f64,
    dates: Vec<NaiveDate>,
}

impl PriceSeries {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::TooShort {
                len: values.len(),
                min: 2,
            });
        }
        if let Some((i, &v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::NonPositivePrice {
                row: i + 1,
                value: v,
            });
        }
        Ok(Self {
            name: name.into(),
            values,
            spacing: 1.0,
            dates: Vec::new(),
        })
    }

    /// Attach calendar labels, one per sample, strictly increasing.
    pub fn with_dates(mut self, dates: Vec<NaiveDate>) -> Result<Self> {
        if dates.len() != self.values.len() {
            return Err(Error::LengthMismatch {
                left: dates.len(),
                right: self.values.len(),
            });
        }
        for (i, pair) in dates.windows(2).enumerate() {
            if pair[1] <= pair[0] {
                return Err(Error::NonMonotoneDates {
                    row: i + 2,
                    previous: pair[0].to_string(),
                    date: pair[1].to_string(),
                });
            }
        }
        self.dates = dates;
        Ok(self)
    }

    pub fn with_spacing(mut self, spacing: f64) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(invalid(
                "spacing",
                format!("must be positive, got {spacing}"),
            ));
        }
        self.spacing = spacing;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sample interval in trading days.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Calendar date of the first sample, when the series came from a file.
    pub fn epoch(&self) -> Option<NaiveDate> {
        self.dates.first().copied()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn date(&self, index: usize) -> Option<NaiveDate> {
        self.dates.get(index).copied()
    }

    /// Grid time of sample `index`, in trading days from the epoch.
    pub fn time(&self, index: usize) -> f64 {
        index as f64 * self.spacing
    }
}

fn parse_date(raw: &str) -> Option<NaiveDate> {
    let raw = raw.trim();
    NaiveDate::parse_from_str(raw, "%Y-%m-%d").ok().or_else(|| {
        raw.get(..10)
            .and_then(|d| NaiveDate::parse_from_str(d, "%Y-%m-%d").ok())
    })
}

/// Parse a delimited price table with a header row.
pub fn read_prices<R: Read>(reader: R, name: &str, columns: &ColumnSpec) -> Result<PriceSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(columns.delimiter)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |col: &str| {
        headers
            .iter()
            .position(|h| h == col)
            .ok_or_else(|| Error::MissingColumn(col.to_string()))
    };
    let date_idx = find(&columns.date_col)?;
    let price_idx = find(&columns.price_col)?;

    let mut dates: Vec<NaiveDate> = Vec::new();
    let mut values = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Unparsable {
            row,
            reason: e.to_string(),
        })?;
        let raw_date = record.get(date_idx).unwrap_or("");
        let raw_price = record.get(price_idx).unwrap_or("");
        let date = parse_date(raw_date).ok_or_else(|| Error::Unparsable {
            row,
            reason: format!("bad date `{raw_date}`"),
        })?;
        let price: f64 = raw_price.parse().map_err(|_| Error::Unparsable {
            row,
            reason: format!("bad price `{raw_price}`"),
        })?;
        if !price.is_finite() {
            return Err(Error::Unparsable {
                row,
                reason: format!("bad price `{raw_price}`"),
            });
        }
        if price <= 0.0 {
            return Err(Error::NonPositivePrice { row, value: price });
        }
        if let Some(&prev) = dates.last() {
            if date <= prev {
                return Err(Error::NonMonotoneDates {
                    row,
                    previous: prev.to_string(),
                    date: date.to_string(),
                });
            }
        }
        dates.push(date);
        values.push(price);
    }
    PriceSeries::new(name, values)?.with_dates(dates)
}

pub fn load_prices(path: impl AsRef<Path>, columns: &ColumnSpec) -> Result<PriceSeries> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let file = std::fs::File::open(path)
        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    read_prices(std::io::BufReader::new(file), &name, columns)
}

/// Re-emit a series in the same layout `read_prices` accepts. Values are
/// written in shortest round-trip form, so reading them back is lossless.
pub fn write_prices<W: Write>(series: &PriceSeries, writer: W, columns: &ColumnSpec) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .delimiter(columns.delimiter)
        .from_writer(writer);
    wtr.write_record([columns.date_col.as_str(), columns.price_col.as_str()])?;
    for (i, v) in series.values().iter().enumerate() {
        let date = series
            .date(i)
            .map(|d| d.to_string())
            .unwrap_or_else(|| i.to_string());
        wtr.write_record([date, v.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReturnKind {
    Simple,
    Logarithmic,
}

/// Returns between consecutive samples; value `i` is aligned to sample `i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries {
    pub kind: ReturnKind,
    pub values: Vec<f64>,
}

pub fn returns(series: &PriceSeries, kind: ReturnKind) -> ReturnSeries {
    let values = series
        .values()
        .windows(2)
        .map(|w| match kind {
            ReturnKind::Simple => (w[1] - w[0]) / w[0],
            ReturnKind::Logarithmic => (w[1] / w[0]).ln(),
        })
        .collect();
    ReturnSeries { kind, values }
}
