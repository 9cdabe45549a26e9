//! Short-horizon forecasts: second-order Taylor extrapolation of filtered
//! tracks, Gaussian confidence bands and above/under-trend classification.
//!
//! Two kernels are involved. The trend kernel gives the trend and its
//! derivatives; a separate price kernel, run on the raw prices, gives the
//! price forecast that is compared with the extrapolated trend.

use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Error, Result};
use crate::kernel::{build_kernel_bank, EstimatorSpec, KernelBank};
use crate::moments::{moment_tracks, MomentTrack};
use crate::series::PriceSeries;
use crate::trend::{sliding_filter, sliding_trend, Decomposition};

/// `value + h d1 + h^2/2 d2`
pub fn taylor_extrapolate(value: f64, d1: f64, d2: f64, h: f64) -> f64 {
    value + h * d1 + 0.5 * h * h * d2
}

/// Trend at source index `t` extrapolated `h` samples ahead.
pub fn forecast_trend(dec: &Decomposition, t: usize, h: usize) -> Result<f64> {
    let (v, d1, d2) = dec.state(t)?;
    Ok(taylor_extrapolate(v, d1, d2, h as f64 * dec.spacing()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentForecast {
    pub std: f64,
    /// `None` when the skewness track is undefined somewhere in the window.
    pub skew: Option<f64>,
    pub kurt: Option<f64>,
}

fn extrapolate_window(bank: &KernelBank, window: &[f64], h: f64) -> f64 {
    let d = |order: usize| {
        if order <= bank.degree() {
            bank.apply(order, window)
        } else {
            0.0
        }
    };
    taylor_extrapolate(d(0), d(1), d(2), h)
}

/// Filter the moment tracks with `bank` over the `W` values ending at `t` and
/// extrapolate `h` samples ahead. Std is floored at 0 and kurtosis at 1.
pub fn forecast_moments(
    track: &MomentTrack,
    bank: &KernelBank,
    t: usize,
    h: usize,
) -> Result<MomentForecast> {
    let w = bank.window();
    let pos = track.position(t)?;
    if pos + 1 < w {
        return Err(Error::InsufficientHistory(format!(
            "moment forecast at index {t} needs {w} defined values, {} available",
            pos + 1
        )));
    }
    let range = pos + 1 - w..=pos;
    let step = h as f64 * bank.spec().spacing;
    let std = extrapolate_window(bank, &track.std[range.clone()], step).max(0.0);
    let optional = |values: &[Option<f64>]| -> Option<f64> {
        let window: Option<Vec<f64>> = values[range.clone()].iter().copied().collect();
        window.map(|win| extrapolate_window(bank, &win, step))
    };
    Ok(MomentForecast {
        std,
        skew: optional(&track.skew),
        kurt: optional(&track.kurt).map(|k| k.max(1.0)),
    })
}

/// Two-sided standard normal quantile for confidence `level`.
pub fn normal_quantile(level: f64) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid("level", format!("must lie in (0, 1), got {level}")));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(normal.inverse_cdf(0.5 + 0.5 * level))
}

pub fn confidence_band(trend_hat: f64, std_hat: f64, level: f64) -> Result<(f64, f64)> {
    if !(std_hat >= 0.0) {
        return Err(invalid(
            "std_hat",
            format!("must be non-negative, got {std_hat}"),
        ));
    }
    let half = normal_quantile(level)? * std_hat;
    Ok((trend_hat - half, trend_hat + half))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Position {
    Above,
    Under,
    NoDecision,
}

/// Realized side of the price relative to the trend.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Above,
    Under,
}

impl From<Side> for Position {
    fn from(side: Side) -> Self {
        match side {
            Side::Above => Position::Above,
            Side::Under => Position::Under,
        }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Position::Above => "above",
            Position::Under => "under",
            Position::NoDecision => "no_decision",
        })
    }
}

pub fn classify_position(price_hat: f64, trend_hat: f64, deadband: f64) -> Position {
    if price_hat - trend_hat > deadband {
        Position::Above
    } else if trend_hat - price_hat > deadband {
        Position::Under
    } else {
        Position::NoDecision
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastConfig {
    /// Trend kernel.
    pub slow: EstimatorSpec,
    /// Kernel run on raw prices for the price forecast.
    pub fast: EstimatorSpec,
    /// Moment window `M`.
    pub moment_window: usize,
    pub level: f64,
    /// Deadband as a multiple of the forecast std.
    pub deadband_mult: f64,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            slow: EstimatorSpec::default(),
            fast: EstimatorSpec::new(2, 61),
            moment_window: 100,
            level: 0.95,
            deadband_mult: 0.02,
        }
    }
}

impl ForecastConfig {
    pub fn validate(&self) -> Result<()> {
        self.slow.validate()?;
        self.fast.validate()?;
        if self.slow.spacing != self.fast.spacing {
            return Err(invalid(
                "spacing",
                "trend and price kernels must share the sample spacing",
            ));
        }
        if self.moment_window < 1 {
            return Err(invalid("moment_window", "M must be at least 1"));
        }
        normal_quantile(self.level)?;
        if !(self.deadband_mult >= 0.0 && self.deadband_mult.is_finite()) {
            return Err(invalid("deadband_mult", "must be a non-negative number"));
        }
        Ok(())
    }

    /// First source index at which every forecast input is defined.
    pub fn first_origin(&self) -> usize {
        let moments_start = (self.slow.window - 1) + self.moment_window;
        (moments_start + self.slow.window - 1).max(self.fast.window - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastPoint {
    pub origin: usize,
    pub horizon: usize,
    pub trend_hat: f64,
    pub price_hat: f64,
    pub std_hat: f64,
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    pub position: Position,
    pub deadband: f64,
}

/// Everything needed to forecast from any origin of one price series.
#[derive(Debug, Clone)]
pub struct Forecaster {
    config: ForecastConfig,
    slow: KernelBank,
    fast: KernelBank,
    decomposition: Decomposition,
    price_tracks: Vec<Vec<f64>>,
    moments: MomentTrack,
}

impl Forecaster {
    pub fn new(series: &PriceSeries, config: &ForecastConfig) -> Result<Self> {
        config.validate()?;
        let needed = config.first_origin() + 1;
        if series.len() < needed {
            return Err(Error::TooShort {
                len: series.len(),
                min: needed,
            });
        }
        let slow = build_kernel_bank(&config.slow)?;
        let fast = build_kernel_bank(&config.fast)?;
        let decomposition = sliding_trend(series, &slow)?;
        let price_tracks = sliding_filter(series.values(), &fast)?;
        let moments = moment_tracks(decomposition.fluctuation(), config.moment_window)?
            .offset_by(decomposition.warmup());
        Ok(Self {
            config: *config,
            slow,
            fast,
            decomposition,
            price_tracks,
            moments,
        })
    }

    pub fn config(&self) -> &ForecastConfig {
        &self.config
    }

    pub fn decomposition(&self) -> &Decomposition {
        &self.decomposition
    }

    pub fn moments(&self) -> &MomentTrack {
        &self.moments
    }

    pub fn trend_bank(&self) -> &KernelBank {
        &self.slow
    }

    pub fn first_origin(&self) -> usize {
        self.config.first_origin()
    }

    pub fn last_origin(&self) -> usize {
        self.decomposition.last_index()
    }

    /// `MA_2` at source index `t`.
    pub fn ma2(&self, t: usize) -> Result<f64> {
        Ok(self.moments.ma2[self.moments.position(t)?])
    }

    pub fn price_forecast(&self, t: usize, h: usize) -> Result<f64> {
        let offset = self.fast.window() - 1;
        if t < offset || t > self.last_origin() {
            return Err(Error::OutOfRange {
                index: t,
                start: offset,
                end: self.last_origin(),
            });
        }
        let k = t - offset;
        let d = |order: usize| self.price_tracks.get(order).map_or(0.0, |v| v[k]);
        Ok(taylor_extrapolate(
            d(0),
            d(1),
            d(2),
            h as f64 * self.config.fast.spacing,
        ))
    }

    pub fn point(&self, t: usize, h: usize) -> Result<ForecastPoint> {
        let trend_hat = forecast_trend(&self.decomposition, t, h)?;
        let price_hat = self.price_forecast(t, h)?;
        let std_hat = forecast_moments(&self.moments, &self.slow, t, h)?.std;
        let deadband = self.config.deadband_mult * std_hat;
        let (lo, hi) = confidence_band(trend_hat, std_hat, self.config.level)?;
        Ok(ForecastPoint {
            origin: t,
            horizon: h,
            trend_hat,
            price_hat,
            std_hat,
            lo,
            hi,
            level: self.config.level,
            position: classify_position(price_hat, trend_hat, deadband),
            deadband,
        })
    }
}
