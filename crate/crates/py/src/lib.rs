//! Python bindings for `algtrend`.
//!
//! Series cross the boundary as lists of floats; structured results come back
//! as dicts with the same field names as the Rust types.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use algtrend::backtest::walk_forward as rs_walk_forward;
use algtrend::forecast::{
    classify_position as rs_classify, confidence_band as rs_band, ForecastConfig,
};
use algtrend::gbm::{oscillation_probability as rs_probability, simulate_paths as rs_simulate};
use algtrend::kernel::{build_kernel_bank, EstimatorSpec};
use algtrend::moments::{moment_tracks as rs_tracks, rolling_central_moment as rs_rolling};
use algtrend::series::{
    load_prices as rs_load, returns as rs_returns, ColumnSpec, PriceSeries, ReturnKind,
};
use algtrend::trend::{
    oscillation_score as rs_score, sliding_trend as rs_sliding, OscillationConfig, Verdict,
};
use algtrend::{BacktestConfig, GbmParams};

fn err(e: algtrend::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn series(values: Vec<f64>, spacing: f64) -> PyResult<PriceSeries> {
    PriceSeries::new("series", values)
        .and_then(|s| s.with_spacing(spacing))
        .map_err(err)
}

/// Load a delimited price file; returns `(dates, prices)` with ISO dates.
#[pyfunction]
#[pyo3(signature = (path, date_col = "Date", price_col = "Close", delimiter = ","))]
fn load_prices(
    path: &str,
    date_col: &str,
    price_col: &str,
    delimiter: &str,
) -> PyResult<(Vec<String>, Vec<f64>)> {
    let delimiter = match delimiter.as_bytes() {
        [b] => *b,
        _ => return Err(PyValueError::new_err("delimiter must be a single byte")),
    };
    let columns = ColumnSpec {
        date_col: date_col.into(),
        price_col: price_col.into(),
        delimiter,
    };
    let s = rs_load(path, &columns).map_err(err)?;
    Ok((
        s.dates().iter().map(|d| d.to_string()).collect(),
        s.values().to_vec(),
    ))
}

/// Simple (`"simple"`) or logarithmic (`"log"`) returns.
#[pyfunction]
#[pyo3(signature = (prices, kind = "simple"))]
fn returns(prices: Vec<f64>, kind: &str) -> PyResult<Vec<f64>> {
    let kind = match kind {
        "simple" => ReturnKind::Simple,
        "log" => ReturnKind::Logarithmic,
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown return kind `{other}`"
            )))
        }
    };
    Ok(rs_returns(&series(prices, 1.0)?, kind).values)
}

/// Causal derivative-estimation weights, oldest sample first.
#[pyclass(frozen)]
struct KernelBank {
    inner: algtrend::KernelBank,
}

#[pymethods]
impl KernelBank {
    #[new]
    #[pyo3(signature = (degree = 2, window = 21, spacing = 1.0, smoothing = 1))]
    fn new(degree: usize, window: usize, spacing: f64, smoothing: usize) -> PyResult<Self> {
        let spec = EstimatorSpec::new(degree, window)
            .with_spacing(spacing)
            .with_smoothing(smoothing);
        Ok(Self {
            inner: build_kernel_bank(&spec).map_err(err)?,
        })
    }

    #[getter]
    fn degree(&self) -> usize {
        self.inner.degree()
    }

    #[getter]
    fn window(&self) -> usize {
        self.inner.window()
    }

    #[getter]
    fn condition_number(&self) -> f64 {
        self.inner.condition_number()
    }

    fn weights(&self, order: usize) -> PyResult<Vec<f64>> {
        self.inner.weights(order).map(<[f64]>::to_vec).map_err(err)
    }

    fn noise_gain(&self, order: usize) -> PyResult<f64> {
        self.inner.noise_gain(order).map_err(err)
    }

    fn apply(&self, order: usize, samples: Vec<f64>) -> PyResult<f64> {
        if samples.len() != self.inner.window() {
            return Err(PyValueError::new_err(format!(
                "expected {} samples, got {}",
                self.inner.window(),
                samples.len()
            )));
        }
        if order > self.inner.degree() {
            return Err(PyValueError::new_err(format!(
                "order {order} exceeds the degree"
            )));
        }
        Ok(self.inner.apply(order, &samples))
    }

    fn __repr__(&self) -> String {
        format!(
            "KernelBank(degree={}, window={})",
            self.inner.degree(),
            self.inner.window()
        )
    }
}

/// Trend, derivatives and fluctuation over the indices with a full window.
#[pyfunction]
#[pyo3(signature = (prices, bank, spacing = 1.0))]
fn sliding_trend<'py>(
    py: Python<'py>,
    prices: Vec<f64>,
    bank: &KernelBank,
    spacing: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let dec = rs_sliding(&series(prices, spacing)?, &bank.inner).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("warmup", dec.warmup())?;
    out.set_item("trend", dec.trend().to_vec())?;
    out.set_item("fluctuation", dec.fluctuation().to_vec())?;
    let derivatives: Vec<Vec<f64>> = (1..=bank.inner.degree())
        .filter_map(|order| dec.derivative(order).map(<[f64]>::to_vec))
        .collect();
    out.set_item("derivatives", derivatives)?;
    Ok(out)
}

#[pyfunction]
#[pyo3(signature = (fluctuation, min_window = 10, threshold = 0.05, scale = None))]
fn oscillation_score<'py>(
    py: Python<'py>,
    fluctuation: Vec<f64>,
    min_window: usize,
    threshold: f64,
    scale: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let config = OscillationConfig {
        min_window,
        threshold,
        ..OscillationConfig::default()
    };
    let r = rs_score(&fluctuation, &config, scale).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("score", r.score)?;
    out.set_item("scale", r.scale)?;
    out.set_item(
        "quickly_fluctuating",
        r.verdict == Verdict::QuicklyFluctuating,
    )?;
    out.set_item("worst_start", r.worst_start)?;
    out.set_item("worst_len", r.worst_len)?;
    Ok(out)
}

#[pyfunction]
fn rolling_central_moment(fluctuation: Vec<f64>, k: u32, m: usize) -> PyResult<Vec<f64>> {
    rs_rolling(&fluctuation, k, m).map_err(err)
}

/// Std, skewness and kurtosis tracks; undefined values are `None`.
#[pyfunction]
fn moment_tracks<'py>(
    py: Python<'py>,
    fluctuation: Vec<f64>,
    m: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let t = rs_tracks(&fluctuation, m).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("start", t.start)?;
    out.set_item("std", t.std)?;
    out.set_item("skew", t.skew)?;
    out.set_item("kurt", t.kurt)?;
    Ok(out)
}

#[pyfunction]
fn taylor_extrapolate(value: f64, d1: f64, d2: f64, h: f64) -> f64 {
    algtrend::forecast::taylor_extrapolate(value, d1, d2, h)
}

#[pyfunction]
#[pyo3(signature = (trend_hat, std_hat, level = 0.95))]
fn confidence_band(trend_hat: f64, std_hat: f64, level: f64) -> PyResult<(f64, f64)> {
    rs_band(trend_hat, std_hat, level).map_err(err)
}

/// `"above"`, `"under"` or `"no_decision"`.
#[pyfunction]
#[pyo3(signature = (price_hat, trend_hat, deadband = 0.0))]
fn classify_position(price_hat: f64, trend_hat: f64, deadband: f64) -> String {
    rs_classify(price_hat, trend_hat, deadband).to_string()
}

/// Walk-forward classifier scores keyed by horizon.
#[pyfunction]
#[pyo3(signature = (prices, horizons = vec![1, 5], window = 21, fast_window = 61, degree = 2, moment_window = 100, level = 0.95, deadband_mult = 0.02))]
#[allow(clippy::too_many_arguments)]
fn walk_forward<'py>(
    py: Python<'py>,
    prices: Vec<f64>,
    horizons: Vec<usize>,
    window: usize,
    fast_window: usize,
    degree: usize,
    moment_window: usize,
    level: f64,
    deadband_mult: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let config = BacktestConfig {
        horizons,
        forecast: ForecastConfig {
            slow: EstimatorSpec::new(degree, window),
            fast: EstimatorSpec::new(degree, fast_window),
            moment_window,
            level,
            deadband_mult,
        },
    };
    let report = rs_walk_forward(&series(prices, 1.0)?, &config).map_err(err)?;
    let out = PyDict::new(py);
    for h in &report.horizons {
        let row = PyDict::new(py);
        row.set_item("exact_pct", h.exact_pct)?;
        row.set_item("nodecision_pct", h.nodecision_pct)?;
        row.set_item("wrong_pct", h.wrong_pct)?;
        row.set_item("rmse", h.rmse)?;
        row.set_item("coverage", h.coverage)?;
        row.set_item("origins", h.origins)?;
        row.set_item("skipped", h.skipped)?;
        out.set_item(h.horizon, row)?;
    }
    Ok(out)
}

fn gbm_params(
    mu: f64,
    sigma: f64,
    s0: f64,
    t_end: f64,
    steps: usize,
    paths: usize,
    seed: u64,
) -> GbmParams {
    GbmParams {
        mu,
        sigma,
        s0,
        t_end,
        steps,
        paths,
        seed,
    }
}

#[pyfunction]
#[pyo3(signature = (mu = 0.05, sigma = 0.2, s0 = 1.0, t_end = 1.0, steps = 1000, paths = 100, seed = 0))]
fn simulate_paths(
    mu: f64,
    sigma: f64,
    s0: f64,
    t_end: f64,
    steps: usize,
    paths: usize,
    seed: u64,
) -> PyResult<Vec<Vec<f64>>> {
    rs_simulate(&gbm_params(mu, sigma, s0, t_end, steps, paths, seed)).map_err(err)
}

/// `(p_hat, stderr)` for `P(|integral of the residual| > epsilon)`.
#[pyfunction]
#[pyo3(signature = (epsilon = 0.05, mu = 0.05, sigma = 0.2, s0 = 1.0, t_end = 1.0, steps = 1000, paths = 10_000, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn oscillation_probability(
    epsilon: f64,
    mu: f64,
    sigma: f64,
    s0: f64,
    t_end: f64,
    steps: usize,
    paths: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let s = rs_probability(
        &gbm_params(mu, sigma, s0, t_end, steps, paths, seed),
        epsilon,
    )
    .map_err(err)?;
    Ok((s.p_hat, s.stderr))
}

#[pymodule]
fn pyalgtrend(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<KernelBank>()?;
    m.add_function(wrap_pyfunction!(load_prices, m)?)?;
    m.add_function(wrap_pyfunction!(returns, m)?)?;
    m.add_function(wrap_pyfunction!(sliding_trend, m)?)?;
    m.add_function(wrap_pyfunction!(oscillation_score, m)?)?;
    m.add_function(wrap_pyfunction!(rolling_central_moment, m)?)?;
    m.add_function(wrap_pyfunction!(moment_tracks, m)?)?;
    m.add_function(wrap_pyfunction!(taylor_extrapolate, m)?)?;
    m.add_function(wrap_pyfunction!(confidence_band, m)?)?;
    m.add_function(wrap_pyfunction!(classify_position, m)?)?;
    m.add_function(wrap_pyfunction!(walk_forward, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_paths, m)?)?;
    m.add_function(wrap_pyfunction!(oscillation_probability, m)?)?;
    Ok(())
}
