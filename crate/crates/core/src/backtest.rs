//! Walk-forward evaluation of the above/under-trend classifier.
//!
//! At every origin `t` and horizon `h` the classifier sees only samples up to
//! `t`. Its call is scored against the realized side of `price(t + h)`
//! relative to the trend the causal filter reports at `t + h`.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{invalid, Error, Result};
use crate::forecast::{ForecastConfig, Forecaster, Position, Side};
use crate::series::PriceSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub horizons: Vec<usize>,
    pub forecast: ForecastConfig,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            horizons: vec![1, 5],
            forecast: ForecastConfig::default(),
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizons.is_empty() {
            return Err(invalid("horizons", "at least one horizon is required"));
        }
        if self.horizons.contains(&0) {
            return Err(invalid("horizons", "horizons must be at least 1"));
        }
        self.forecast.validate()
    }

    /// Shortest series the harness accepts.
    pub fn min_length(&self) -> usize {
        self.forecast.first_origin() + self.horizons.iter().max().copied().unwrap_or(1) + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub exact_pct: f64,
    pub nodecision_pct: f64,
    pub wrong_pct: f64,
}

pub fn score_positions(predictions: &[Position], realized: &[Side]) -> Result<Scores> {
    if predictions.len() != realized.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: realized.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::TooShort { len: 0, min: 1 });
    }
    let (mut exact, mut nodecision, mut wrong) = (0usize, 0usize, 0usize);
    for (&p, &r) in predictions.iter().zip(realized) {
        match p {
            Position::NoDecision => nodecision += 1,
            p if p == Position::from(r) => exact += 1,
            _ => wrong += 1,
        }
    }
    let n = predictions.len() as f64;
    Ok(Scores {
        exact_pct: 100.0 * exact as f64 / n,
        nodecision_pct: 100.0 * nodecision as f64 / n,
        wrong_pct: 100.0 * wrong as f64 / n,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonStats {
    pub horizon: usize,
    pub exact_pct: f64,
    pub nodecision_pct: f64,
    pub wrong_pct: f64,
    /// Root mean square of `trend_hat - price(t + h)`.
    pub rmse: f64,
    /// Fraction of realized prices inside the forecast band.
    pub coverage: f64,
    pub origins: usize,
    pub skipped: usize,
    pub first_origin: usize,
    pub last_origin: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestReport {
    pub series_len: usize,
    pub horizons: Vec<HorizonStats>,
    /// Max/min of the rolling fluctuation std over the evaluated origins.
    pub heteroscedasticity: Option<f64>,
    pub metadata: BTreeMap<String, String>,
}

impl BacktestReport {
    pub fn horizon(&self, h: usize) -> Option<&HorizonStats> {
        self.horizons.iter().find(|s| s.horizon == h)
    }
}

/// One scored forecast, for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct OriginRecord {
    pub origin: usize,
    pub date: Option<NaiveDate>,
    pub horizon: usize,
    pub trend_hat: f64,
    pub price_hat: f64,
    pub lo: f64,
    pub hi: f64,
    pub position: Position,
    pub realized_price: f64,
    pub realized_trend: f64,
    pub realized: Side,
}

enum Outcome {
    Scored(OriginRecord),
    Skipped,
}

pub fn walk_forward(series: &PriceSeries, config: &BacktestConfig) -> Result<BacktestReport> {
    walk_forward_detailed(series, config).map(|(report, _)| report)
}

pub fn walk_forward_detailed(
    series: &PriceSeries,
    config: &BacktestConfig,
) -> Result<(BacktestReport, Vec<OriginRecord>)> {
    config.validate()?;
    let needed = config.min_length();
    if series.len() < needed {
        return Err(Error::TooShort {
            len: series.len(),
            min: needed,
        });
    }
    let forecaster = Forecaster::new(series, &config.forecast)?;
    let dec = forecaster.decomposition();
    let n = series.len();
    let first = forecaster.first_origin();

    let mut stats = Vec::with_capacity(config.horizons.len());
    let mut records = Vec::new();
    for &h in &config.horizons {
        let last = n - 1 - h;
        let outcomes: Vec<Outcome> = (first..=last)
            .into_par_iter()
            .map(|t| -> Result<Outcome> {
                if forecaster.ma2(t)? == 0.0 {
                    return Ok(Outcome::Skipped);
                }
                let point = match forecaster.point(t, h) {
                    Ok(p) => p,
                    Err(_) => return Ok(Outcome::Skipped),
                };
                let k = dec.aligned(t + h)?;
                let realized_price = dec.price()[k];
                let realized_trend = dec.trend()[k];
                let realized = if realized_price > realized_trend {
                    Side::Above
                } else if realized_price < realized_trend {
                    Side::Under
                } else {
                    return Ok(Outcome::Skipped);
                };
                Ok(Outcome::Scored(OriginRecord {
                    origin: t,
                    date: series.date(t),
                    horizon: h,
                    trend_hat: point.trend_hat,
                    price_hat: point.price_hat,
                    lo: point.lo,
                    hi: point.hi,
                    position: point.position,
                    realized_price,
                    realized_trend,
                    realized,
                }))
            })
            .collect::<Result<_>>()?;

        let skipped = outcomes
            .iter()
            .filter(|o| matches!(o, Outcome::Skipped))
            .count();
        let scored: Vec<OriginRecord> = outcomes
            .into_iter()
            .filter_map(|o| match o {
                Outcome::Scored(r) => Some(r),
                Outcome::Skipped => None,
            })
            .collect();
        if scored.is_empty() {
            return Err(Error::InsufficientHistory(format!(
                "no origin could be scored at horizon {h}"
            )));
        }
        let predictions: Vec<Position> = scored.iter().map(|r| r.position).collect();
        let realized: Vec<Side> = scored.iter().map(|r| r.realized).collect();
        let scores = score_positions(&predictions, &realized)?;
        let count = scored.len() as f64;
        let rmse = (scored
            .iter()
            .map(|r| (r.trend_hat - r.realized_price).powi(2))
            .sum::<f64>()
            / count)
            .sqrt();
        let inside = scored
            .iter()
            .filter(|r| r.lo <= r.realized_price && r.realized_price <= r.hi)
            .count();
        stats.push(HorizonStats {
            horizon: h,
            exact_pct: scores.exact_pct,
            nodecision_pct: scores.nodecision_pct,
            wrong_pct: scores.wrong_pct,
            rmse,
            coverage: inside as f64 / count,
            origins: scored.len(),
            skipped,
            first_origin: first,
            last_origin: last,
        });
        records.extend(scored);
    }

    let widest = n - 1 - config.horizons.iter().min().copied().unwrap_or(1);
    let heteroscedasticity = forecaster.moments().heteroscedasticity(first, widest)?;
    let cfg = &config.forecast;
    let metadata = BTreeMap::from([
        (
            "band".to_string(),
            format!("gaussian z, level {}", cfg.level),
        ),
        ("deadband_mult".to_string(), cfg.deadband_mult.to_string()),
        ("degree".to_string(), cfg.slow.degree.to_string()),
        ("fast_window".to_string(), cfg.fast.window.to_string()),
        ("moment_window".to_string(), cfg.moment_window.to_string()),
        ("smoothing".to_string(), cfg.slow.smoothing.to_string()),
        ("window".to_string(), cfg.slow.window.to_string()),
    ]);
    Ok((
        BacktestReport {
            series_len: n,
            horizons: stats,
            heteroscedasticity,
            metadata,
        },
        records,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Structured,
}

pub fn emit_report(report: &BacktestReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Text => render_text(report),
        ReportFormat::Structured => {
            let map = structured(report);
            let mut out = serde_json::to_string_pretty(&Value::Object(map))
                .expect("report maps always serialize");
            out.push('\n');
            out
        }
    }
}

fn render_text(report: &BacktestReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "walk-forward backtest over {} samples\n",
        report.series_len
    ));
    out.push_str("horizon: exact / no-decision / wrong (%)\n");
    for s in &report.horizons {
        out.push_str(&format!(
            "h={}: {:.2} / {:.2} / {:.2}   rmse={:.4} coverage={:.4} origins={} skipped={} range={}..={}\n",
            s.horizon,
            s.exact_pct,
            s.nodecision_pct,
            s.wrong_pct,
            s.rmse,
            s.coverage,
            s.origins,
            s.skipped,
            s.first_origin,
            s.last_origin
        ));
    }
    match report.heteroscedasticity {
        Some(r) => out.push_str(&format!(
            "heteroscedasticity (max/min rolling std): {r:.4}\n"
        )),
        None => out.push_str("heteroscedasticity (max/min rolling std): undefined\n"),
    }
    out
}

fn structured(report: &BacktestReport) -> Map<String, Value> {
    let mut map = Map::new();
    map.insert("series_len".into(), report.series_len.into());
    let horizons: Vec<String> = report
        .horizons
        .iter()
        .map(|s| s.horizon.to_string())
        .collect();
    map.insert("horizons".into(), horizons.join(",").into());
    map.insert(
        "heteroscedasticity".into(),
        report.heteroscedasticity.map_or(Value::Null, Value::from),
    );
    for s in &report.horizons {
        let key = |name: &str| format!("h{}.{name}", s.horizon);
        map.insert(key("exact_pct"), s.exact_pct.into());
        map.insert(key("nodecision_pct"), s.nodecision_pct.into());
        map.insert(key("wrong_pct"), s.wrong_pct.into());
        map.insert(key("rmse"), s.rmse.into());
        map.insert(key("coverage"), s.coverage.into());
        map.insert(key("origins"), s.origins.into());
        map.insert(key("skipped"), s.skipped.into());
        map.insert(key("first_origin"), s.first_origin.into());
        map.insert(key("last_origin"), s.last_origin.into());
    }
    for (k, v) in &report.metadata {
        map.insert(format!("meta.{k}"), v.clone().into());
    }
    map
}

/// Inverse of `emit_report(_, ReportFormat::Structured)`.
pub fn parse_report(text: &str) -> Result<BacktestReport> {
    let map: Map<String, Value> = serde_json::from_str(text)?;
    let missing = |k: &str| Error::MalformedReport(format!("missing or mistyped `{k}`"));
    let get_f64 = |k: &str| map.get(k).and_then(Value::as_f64).ok_or_else(|| missing(k));
    let get_usize = |k: &str| {
        map.get(k)
            .and_then(Value::as_u64)
            .map(|v| v as usize)
            .ok_or_else(|| missing(k))
    };
    let series_len = get_usize("series_len")?;
    let heteroscedasticity = match map.get("heteroscedasticity") {
        Some(Value::Null) => None,
        Some(v) => Some(v.as_f64().ok_or_else(|| missing("heteroscedasticity"))?),
        None => return Err(missing("heteroscedasticity")),
    };
    let horizon_list = map
        .get("horizons")
        .and_then(Value::as_str)
        .ok_or_else(|| missing("horizons"))?;
    let mut horizons = Vec::new();
    for h in horizon_list.split(',') {
        let h: usize = h
            .trim()
            .parse()
            .map_err(|_| Error::MalformedReport(format!("bad horizon `{h}`")))?;
        let key = |name: &str| format!("h{h}.{name}");
        horizons.push(HorizonStats {
            horizon: h,
            exact_pct: get_f64(&key("exact_pct"))?,
            nodecision_pct: get_f64(&key("nodecision_pct"))?,
            wrong_pct: get_f64(&key("wrong_pct"))?,
            rmse: get_f64(&key("rmse"))?,
            coverage: get_f64(&key("coverage"))?,
            origins: get_usize(&key("origins"))?,
            skipped: get_usize(&key("skipped"))?,
            first_origin: get_usize(&key("first_origin"))?,
            last_origin: get_usize(&key("last_origin"))?,
        });
    }
    let metadata = map
        .iter()
        .filter_map(|(k, v)| {
            k.strip_prefix("meta.")
                .map(|name| (name.to_string(), v.as_str().unwrap_or_default().to_string()))
        })
        .collect();
    Ok(BacktestReport {
        series_len,
        horizons,
        heteroscedasticity,
        metadata,
    })
}
