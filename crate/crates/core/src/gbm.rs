//! Geometric Brownian motion ensembles and the probability that the residual
//! about the mean path, `F_t = S_t - S_0 e^(mu t)`, has a large time integral.
//!
//! Paths are generated in closed form on the grid,
//! `S_k = S_0 exp((mu - sigma^2/2) t_k + sigma W_k)`, with `W` a cumulative sum
//! of `sqrt(dt)` normal increments. Each path draws from its own ChaCha8
//! stream (`seed`, path index), so ensembles do not depend on thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::trend::{mean_abs, oscillation_score, OscillationConfig, OscillationReport};

/// Generator identification recorded alongside results.
pub const GENERATOR: &str = "chacha8 (per-path stream) + ziggurat standard normal";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    pub mu: f64,
    pub sigma: f64,
    pub s0: f64,
    pub t_end: f64,
    pub steps: usize,
    pub paths: usize,
    pub seed: u64,
}

impl Default for GbmParams {
    fn default() -> Self {
        Self {
            mu: 0.05,
            sigma: 0.2,
            s0: 1.0,
            t_end: 1.0,
            steps: 1000,
            paths: 10_000,
            seed: 0,
        }
    }
}

impl GbmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return Err(invalid(
                "s0",
                format!("initial price must be positive, got {}", self.s0),
            ));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(invalid(
                "sigma",
                format!("must be non-negative, got {}", self.sigma),
            ));
        }
        if !self.mu.is_finite() {
            return Err(invalid("mu", "must be finite"));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(invalid(
                "t_end",
                format!("must be positive, got {}", self.t_end),
            ));
        }
        if self.steps < 1 {
            return Err(invalid("steps", "at least one step is required"));
        }
        if self.paths < 1 {
            return Err(invalid("paths", "at least one path is required"));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.t_end / self.steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt()
    }

    /// `S_0 e^(mu t_k)`
    pub fn mean_path(&self, k: usize) -> f64 {
        self.s0 * (self.mu * self.time(k)).exp()
    }

    fn path(&self, index: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        let drift = self.mu - 0.5 * self.sigma * self.sigma;
        let sqrt_dt = self.dt().sqrt();
        let mut w = 0.0;
        let mut out = Vec::with_capacity(self.steps + 1);
        out.push(self.s0);
        for k in 1..=self.steps {
            let z: f64 = StandardNormal.sample(&mut rng);
            w += sqrt_dt * z;
            out.push(self.s0 * (drift * self.time(k) + self.sigma * w).exp());
        }
        out
    }
}

/// Every path of the ensemble, `steps + 1` values each.
pub fn simulate_paths(params: &GbmParams) -> Result<Vec<Vec<f64>>> {
    params.validate()?;
    Ok((0..params.paths)
        .into_par_iter()
        .map(|i| params.path(i))
        .collect())
}

/// Composite trapezoid rule on a uniform grid.
pub fn trapezoid(values: &[f64], dx: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => dx * (0.5 * (values[0] + values[n - 1]) + values[1..n - 1].iter().sum::<f64>()),
    }
}

/// Residual about the mean path at every grid point.
pub fn residual(path: &[f64], params: &GbmParams) -> Result<Vec<f64>> {
    if path.len() != params.steps + 1 {
        return Err(Error::LengthMismatch {
            left: path.len(),
            right: params.steps + 1,
        });
    }
    Ok(path
        .iter()
        .enumerate()
        .map(|(k, s)| s - params.mean_path(k))
        .collect())
}

/// Trapezoidal `integral_0^T (S_t - S_0 e^(mu t)) dt`.
pub fn residual_integral(path: &[f64], params: &GbmParams) -> Result<f64> {
    Ok(trapezoid(&residual(path, params)?, params.dt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualStat {
    pub epsilon: f64,
    pub p_hat: f64,
    pub stderr: f64,
    pub paths: usize,
}

impl ResidualStat {
    /// Normal-approximation interval `p_hat +- z stderr`, clipped to [0, 1].
    pub fn interval(&self, z: f64) -> (f64, f64) {
        (
            (self.p_hat - z * self.stderr).max(0.0),
            (self.p_hat + z * self.stderr).min(1.0),
        )
    }

    /// One-line comparison of `p_hat` with the quick-fluctuation threshold.
    pub fn verdict_line(&self, threshold: f64) -> String {
        let (lo, hi) = self.interval(1.959_963_984_540_054);
        let call = if lo > threshold {
            "not small: the residual about the mean path is not quickly fluctuating"
        } else {
            "small: no evidence against quick fluctuation"
        };
        format!(
            "P(|int F| > {}) = {:.4} (95% CI {:.4}..{:.4}, {} paths) vs threshold {}: {call}",
            self.epsilon, self.p_hat, lo, hi, self.paths, threshold
        )
    }
}

fn stat(epsilon: f64, exceed: usize, paths: usize) -> ResidualStat {
    let p_hat = exceed as f64 / paths as f64;
    ResidualStat {
        epsilon,
        p_hat,
        stderr: (p_hat * (1.0 - p_hat) / paths as f64).sqrt(),
        paths,
    }
}

/// Fraction of paths whose residual integral exceeds `epsilon` in magnitude.
pub fn oscillation_probability(params: &GbmParams, epsilon: f64) -> Result<ResidualStat> {
    Ok(oscillation_probabilities(params, &[epsilon])?.remove(0))
}

/// Same ensemble, several thresholds.
pub fn oscillation_probabilities(
    params: &GbmParams,
    epsilons: &[f64],
) -> Result<Vec<ResidualStat>> {
    params.validate()?;
    if let Some(&e) = epsilons.iter().find(|e| !(**e > 0.0)) {
        return Err(invalid("epsilon", format!("must be positive, got {e}")));
    }
    let integrals: Vec<f64> = (0..params.paths)
        .into_par_iter()
        .map(|i| residual_integral(&params.path(i), params).map(f64::abs))
        .collect::<Result<_>>()?;
    Ok(epsilons
        .iter()
        .map(|&e| {
            stat(
                e,
                integrals.iter().filter(|v| **v > e).count(),
                params.paths,
            )
        })
        .collect())
}

/// Oscillation scores of one GBM residual path and of white noise with the
/// same standard deviation, both normalized by the path's mean price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualComparison {
    pub gbm: OscillationReport,
    pub white_noise: OscillationReport,
    pub residual_std: f64,
}

pub fn compare_with_white_noise(
    params: &GbmParams,
    path_index: usize,
    config: &OscillationConfig,
) -> Result<ResidualComparison> {
    params.validate()?;
    if path_index >= params.paths {
        return Err(Error::OutOfRange {
            index: path_index,
            start: 0,
            end: params.paths - 1,
        });
    }
    let path = params.path(path_index);
    let res = residual(&path, params)?;
    let mean = res.iter().sum::<f64>() / res.len() as f64;
    let residual_std =
        (res.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / res.len() as f64).sqrt();
    let scale = mean_abs(&path);
    let noise =
        crate::synthetic::white_noise(res.len(), residual_std, params.seed ^ 0x9e37_79b9_7f4a_7c15);
    Ok(ResidualComparison {
        gbm: oscillation_score(&res, config, Some(scale))?,
        white_noise: oscillation_score(&noise, config, Some(scale))?,
        residual_std,
    })
}
