//! Rolling central moments of the fluctuation over trailing windows of
//! `M + 1` samples, and the std / skewness / kurtosis tracks built on them.
//!
//! Each window is recomputed from scratch (mean first, then centered powers,
//! both divided by `M + 1`), so every value matches a direct evaluation of
//! that window bit for bit.

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};

/// `sum (x - mean)^k / len` over one window.
pub fn central_moment(window: &[f64], k: u32) -> f64 {
    let len = window.len() as f64;
    let mean = window.iter().sum::<f64>() / len;
    window
        .iter()
        .map(|x| (x - mean).powi(k as i32))
        .sum::<f64>()
        / len
}

fn check(len: usize, m: usize) -> Result<()> {
    if m < 1 {
        return Err(invalid("moment_window", "M must be at least 1"));
    }
    if len <= m {
        return Err(Error::TooShort { len, min: m + 1 });
    }
    Ok(())
}

/// `MA_{k,M}` at every index with a full trailing window; value `i` belongs to
/// input index `i + M`.
pub fn rolling_central_moment(fluctuation: &[f64], k: u32, m: usize) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(invalid(
            "k",
            format!("moment order must be at least 2, got {k}"),
        ));
    }
    check(fluctuation.len(), m)?;
    Ok(fluctuation
        .par_windows(m + 1)
        .map(|w| central_moment(w, k))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentTrack {
    /// Window parameter `M` (the window holds `M + 1` samples).
    pub m: usize,
    /// Index (in the caller's coordinates) of the first defined value.
    pub start: usize,
    pub mean: Vec<f64>,
    pub ma2: Vec<f64>,
    pub ma3: Vec<f64>,
    pub ma4: Vec<f64>,
    pub std: Vec<f64>,
    /// `None` where `MA_2 = 0`.
    pub skew: Vec<Option<f64>>,
    /// `None` where `MA_2 = 0`.
    pub kurt: Vec<Option<f64>>,
}

pub fn moment_tracks(fluctuation: &[f64], m: usize) -> Result<MomentTrack> {
    check(fluctuation.len(), m)?;
    let ma2 = rolling_central_moment(fluctuation, 2, m)?;
    let ma3 = rolling_central_moment(fluctuation, 3, m)?;
    let ma4 = rolling_central_moment(fluctuation, 4, m)?;
    let mean = fluctuation
        .windows(m + 1)
        .map(|w| w.iter().sum::<f64>() / w.len() as f64)
        .collect();
    let std = ma2.iter().map(|v| v.sqrt()).collect();
    let skew = ma2
        .iter()
        .zip(&ma3)
        .map(|(&v, &t)| (v > 0.0).then(|| t / v.powf(1.5)))
        .collect();
    let kurt = ma2
        .iter()
        .zip(&ma4)
        .map(|(&v, &q)| (v > 0.0).then(|| q / (v * v)))
        .collect();
    Ok(MomentTrack {
        m,
        start: m,
        mean,
        ma2,
        ma3,
        ma4,
        std,
        skew,
        kurt,
    })
}

impl MomentTrack {
    /// Shift the index origin, e.g. by a decomposition's warm-up.
    pub fn offset_by(mut self, offset: usize) -> Self {
        self.start += offset;
        self
    }

    pub fn len(&self) -> usize {
        self.std.len()
    }

    pub fn is_empty(&self) -> bool {
        self.std.is_empty()
    }

    pub fn last_index(&self) -> usize {
        self.start + self.len() - 1
    }

    pub fn position(&self, index: usize) -> Result<usize> {
        if index < self.start || index > self.last_index() {
            return Err(Error::OutOfRange {
                index,
                start: self.start,
                end: self.last_index(),
            });
        }
        Ok(index - self.start)
    }

    /// Max/min of the std track over `[from, to]`; `None` if the minimum is 0.
    pub fn heteroscedasticity(&self, from: usize, to: usize) -> Result<Option<f64>> {
        let a = self.position(from)?;
        let b = self.position(to)?;
        let slice = &self.std[a.min(b)..=a.max(b)];
        let max = slice.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = slice.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok((min > 0.0).then(|| max / min))
    }
}
