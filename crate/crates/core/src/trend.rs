//! Causal sliding-window decomposition `price = trend + fluctuation`, and the
//! finite-sample test of whether a remainder is quickly fluctuating.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernel::KernelBank;
use crate::series::PriceSeries;

/// Run every order of `bank` over the trailing windows of `values`.
///
/// Output `[order][i]` belongs to sample `i + W - 1`.
pub fn sliding_filter(values: &[f64], bank: &KernelBank) -> Result<Vec<Vec<f64>>> {
    let w = bank.window();
    if values.len() < w {
        return Err(Error::TooShort {
            len: values.len(),
            min: w,
        });
    }
    Ok((0..=bank.degree())
        .map(|order| {
            values
                .par_windows(w)
                .map(|win| bank.apply(order, win))
                .collect()
        })
        .collect())
}

/// Trend, derivative tracks and fluctuation on the aligned range
/// `warmup..n`, where `warmup = W - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    warmup: usize,
    spacing: f64,
    price: Vec<f64>,
    trend: Vec<f64>,
    derivatives: Vec<Vec<f64>>,
    fluctuation: Vec<f64>,
}

pub fn sliding_trend(series: &PriceSeries, bank: &KernelBank) -> Result<Decomposition> {
    let mut orders = sliding_filter(series.values(), bank)?.into_iter();
    let mut trend = orders.next().expect("order 0 always present");
    let derivatives: Vec<Vec<f64>> = orders.collect();
    let warmup = bank.window() - 1;
    let price = series.values()[warmup..].to_vec();
    let fluctuation = price
        .iter()
        .zip(trend.iter_mut())
        .map(|(&p, t)| split_exact(p, t))
        .collect();
    Ok(Decomposition {
        warmup,
        spacing: bank.spec().spacing,
        price,
        trend,
        derivatives,
        fluctuation,
    })
}

/// Returns `f = p - t`, nudging `t` so that `t + f == p` holds in floating
/// point. When `t` is within a factor two of `p` the subtraction is already
/// exact and nothing moves.
fn split_exact(p: f64, t: &mut f64) -> f64 {
    let mut f = p - *t;
    for _ in 0..8 {
        if *t + f == p {
            return f;
        }
        *t = p - f;
        f = p - *t;
    }
    // Pathological magnitudes: put everything in the fluctuation.
    *t = 0.0;
    p
}

impl Decomposition {
    /// Number of leading samples without an estimate (`W - 1`).
    pub fn warmup(&self) -> usize {
        self.warmup
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Number of aligned samples, `n - W + 1`.
    pub fn len(&self) -> usize {
        self.trend.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trend.is_empty()
    }

    /// Last source index.
    pub fn last_index(&self) -> usize {
        self.warmup + self.trend.len() - 1
    }

    /// Source prices on the aligned range.
    pub fn price(&self) -> &[f64] {
        &self.price
    }

    pub fn trend(&self) -> &[f64] {
        &self.trend
    }

    pub fn fluctuation(&self) -> &[f64] {
        &self.fluctuation
    }

    /// Derivative track of order `order >= 1`, if the model degree allows it.
    pub fn derivative(&self, order: usize) -> Option<&[f64]> {
        order
            .checked_sub(1)
            .and_then(|k| self.derivatives.get(k))
            .map(Vec::as_slice)
    }

    pub fn d1(&self) -> Option<&[f64]> {
        self.derivative(1)
    }

    pub fn d2(&self) -> Option<&[f64]> {
        self.derivative(2)
    }

    /// Position of source index `index` in the aligned arrays.
    pub fn aligned(&self, index: usize) -> Result<usize> {
        if index < self.warmup || index > self.last_index() {
            return Err(Error::OutOfRange {
                index,
                start: self.warmup,
                end: self.last_index(),
            });
        }
        Ok(index - self.warmup)
    }

    /// `(trend, d1, d2)` at source index `index`; missing orders read as 0.
    pub fn state(&self, index: usize) -> Result<(f64, f64, f64)> {
        let k = self.aligned(index)?;
        let d = |order| self.derivative(order).map_or(0.0, |v| v[k]);
        Ok((self.trend[k], d(1), d(2)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillationConfig {
    /// Shortest contiguous subwindow examined (samples).
    pub min_window: usize,
    /// Largest normalized windowed mean still counted as quick fluctuation.
    pub threshold: f64,
    /// Step between examined window starts and ends; 1 is exhaustive.
    pub stride: usize,
}

impl Default for OscillationConfig {
    fn default() -> Self {
        Self {
            min_window: 10,
            threshold: 0.05,
            stride: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    QuicklyFluctuating,
    NotQuicklyFluctuating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillationReport {
    pub score: f64,
    pub scale: f64,
    pub min_window: usize,
    pub threshold: f64,
    pub verdict: Verdict,
    /// Start index and length of the window attaining the score.
    pub worst_start: usize,
    pub worst_len: usize,
}

/// Largest `|mean|` of `fluctuation` over contiguous windows of at least
/// `min_window` samples, divided by `scale` (1 when absent).
pub fn oscillation_score(
    fluctuation: &[f64],
    config: &OscillationConfig,
    scale: Option<f64>,
) -> Result<OscillationReport> {
    let n = fluctuation.len();
    if n == 0 {
        return Err(Error::TooShort { len: 0, min: 1 });
    }
    if config.min_window < 1 || config.min_window > n {
        return Err(invalid(
            "min_window",
            format!("must lie in 1..={n}, got {}", config.min_window),
        ));
    }
    if config.stride < 1 {
        return Err(invalid("stride", "must be at least 1"));
    }
    let scale = scale.unwrap_or(1.0);
    if !(scale.is_finite() && scale > 0.0) {
        return Err(invalid("scale", format!("must be positive, got {scale}")));
    }
    let lmin = config.min_window;
    let stride = config.stride;

    let starts: Vec<usize> = (0..=n - lmin).step_by(stride).collect();
    let best = starts
        .into_par_iter()
        .map(|start| {
            let mut sum: f64 = fluctuation[start..start + lmin - 1].iter().sum();
            let mut best = (0.0f64, start, lmin);
            for (end, x) in fluctuation.iter().enumerate().skip(start + lmin - 1) {
                sum += x;
                let len = end + 1 - start;
                if !(len - lmin).is_multiple_of(stride) && end + 1 != n {
                    continue;
                }
                let m = (sum / len as f64).abs();
                if m > best.0 {
                    best = (m, start, len);
                }
            }
            best
        })
        .reduce(
            || (0.0, 0, n),
            |a, b| {
                if b.0 > a.0 || (b.0 == a.0 && b.1 < a.1) {
                    b
                } else {
                    a
                }
            },
        );

    let score = best.0 / scale;
    Ok(OscillationReport {
        score,
        scale,
        min_window: lmin,
        threshold: config.threshold,
        verdict: if score <= config.threshold {
            Verdict::QuicklyFluctuating
        } else {
            Verdict::NotQuicklyFluctuating
        },
        worst_start: best.1,
        worst_len: best.2,
    })
}

/// Mean absolute value, the default normalization for oscillation scores.
pub fn mean_abs(values: &[f64]) -> f64 {
    values.iter().map(|v| v.abs()).sum::<f64>() / values.len() as f64
}
