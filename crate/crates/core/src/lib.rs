//! Model-free trend extraction for uniformly sampled price series.
//!
//! A price series is split into a trend and a quickly fluctuating remainder
//! with causal finite-window polynomial estimators ([`kernel`], [`trend`]).
//! The remainder's rolling moments ([`moments`]) and the trend derivatives
//! feed short-horizon forecasts ([`forecast`]), which are scored walk-forward
//! ([`backtest`]). [`gbm`] checks whether geometric Brownian motion oscillates
//! around its mean path.

// `!(x > 0.0)` style checks are kept on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod cli;
pub mod error;
pub mod forecast;
pub mod gbm;
pub mod kernel;
pub mod moments;
pub mod series;
pub mod synthetic;
pub mod trend;

pub use backtest::{walk_forward, BacktestConfig, BacktestReport};
pub use error::{Error, Result};
pub use forecast::{ForecastConfig, Forecaster, Position, Side};
pub use gbm::GbmParams;
pub use kernel::{build_kernel_bank, EstimatorSpec, KernelBank};
pub use moments::MomentTrack;
pub use series::{load_prices, ColumnSpec, PriceSeries, ReturnKind, ReturnSeries};
pub use trend::{Decomposition, OscillationConfig, OscillationReport};
