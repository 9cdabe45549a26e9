//! Finite-window estimators of a signal's value and first `N` derivatives at
//! the most recent sample.
//!
//! The construction follows the operational-calculus route. A degree-`N`
//! polynomial `x_N(t) = sum x^(v)(0) t^v / v!` has Laplace image
//! `X_N(s) = sum x^(v)(0) / s^(v+1)`, so `s^(N+1) X_N` is a polynomial in `s`.
//! Differentiating `alpha` times in `s` (time-domain multiplication by `-t`)
//! isolates the coefficients in a triangular system, and multiplying by
//! `s^-(N+1+kappa)` turns every term into iterated integrals over the window.
//! Solving that system gives one weight polynomial per derivative order.
//!
//! Those polynomials are sampled on the window grid and then projected onto
//! the affine set of weight vectors that reproduce all monomials of degree
//! `<= N` exactly (minimum-norm correction). The estimate is made at the
//! window origin of a time-reversed window, so all outputs refer to the
//! newest sample and the filter is causal.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest tolerated condition number of the exactness system.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec {
    /// Order `N` of the local polynomial model.
    pub degree: usize,
    /// Window length `W` in samples.
    pub window: usize,
    /// Sample interval (trading days).
    pub spacing: f64,
    /// Extra integration count `kappa >= 1`.
    pub smoothing: usize,
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        Self {
            degree: 2,
            window: 21,
            spacing: 1.0,
            smoothing: 1,
        }
    }
}

impl EstimatorSpec {
    pub fn new(degree: usize, window: usize) -> Self {
        Self {
            degree,
            window,
            ..Self::default()
        }
    }

    pub fn with_spacing(self, spacing: f64) -> Self {
        Self { spacing, ..self }
    }

    pub fn with_smoothing(self, smoothing: usize) -> Self {
        Self { smoothing, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window <= self.degree + 1 {
            return Err(Error::Underdetermined {
                window: self.window,
                degree: self.degree,
            });
        }
        if self.smoothing < 1 {
            return Err(invalid("smoothing", "integration count must be at least 1"));
        }
        if !(self.spacing.is_finite() && self.spacing > 0.0) {
            return Err(invalid(
                "spacing",
                format!("must be positive, got {}", self.spacing),
            ));
        }
        Ok(())
    }

    /// Time covered by the window, `(W - 1) * spacing`.
    pub fn span(&self) -> f64 {
        (self.window - 1) as f64 * self.spacing
    }
}

/// Dense polynomial, coefficients in ascending powers.
#[derive(Debug, Clone, PartialEq)]
struct Poly(Vec<f64>);

impl Poly {
    fn constant(c: f64) -> Self {
        Poly(vec![c])
    }

    fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }

    fn pow(&self, k: usize) -> Poly {
        (0..k).fold(Poly::constant(1.0), |acc, _| acc.mul(self))
    }

    fn add_scaled(&mut self, other: &Poly, c: f64) {
        if self.0.len() < other.0.len() {
            self.0.resize(other.0.len(), 0.0);
        }
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += c * b;
        }
    }

    fn eval(&self, u: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, c| acc * u + c)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// `n! / (n - k)!`
fn falling(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64)
}

fn binomial(n: usize, k: usize) -> f64 {
    falling(n, k) / factorial(k)
}

/// Weight polynomials `q_v` on the unit window `[0, 1]`, estimating at `u = 0`:
/// `x^(v)(0) = integral_0^1 q_v(u) x(u) du` for every polynomial `x` of degree
/// `<= degree`. Returned as ascending coefficient vectors.
pub fn continuous_weight_polynomials(degree: usize, smoothing: usize) -> Result<Vec<Vec<f64>>> {
    if smoothing < 1 {
        return Err(invalid("smoothing", "integration count must be at least 1"));
    }
    let n = degree;
    let one_minus_u = Poly(vec![1.0, -1.0]);
    let minus_u = Poly(vec![0.0, -1.0]);

    // Left-hand functionals: s^-(N+1+kappa) d^alpha/ds^alpha [s^(N+1) X].
    // Leibniz splits the derivative; the i-th term is an integral of order
    // kappa + i applied to (-t)^(alpha - i) x(t), evaluated at the window end.
    let functionals: Vec<Poly> = (0..=n)
        .map(|alpha| {
            let mut p = Poly::constant(0.0);
            for i in 0..=alpha {
                let order = smoothing + i;
                let coeff = binomial(alpha, i) * falling(n + 1, i) / factorial(order - 1);
                let term = one_minus_u.pow(order - 1).mul(&minus_u.pow(alpha - i));
                p.add_scaled(&term, coeff);
            }
            p
        })
        .collect();

    // Right-hand side: the same operator applied to sum x^(v)(0) s^(N-v).
    let system = DMatrix::from_fn(n + 1, n + 1, |alpha, nu| {
        if nu + alpha <= n {
            falling(n - nu, alpha) / factorial(smoothing + nu + alpha)
        } else {
            0.0
        }
    });
    let inverse = system
        .try_inverse()
        .ok_or_else(|| invalid("degree", "singular identification system"))?;

    Ok((0..=n)
        .map(|nu| {
            let mut q = Poly::constant(0.0);
            for (alpha, p) in functionals.iter().enumerate() {
                q.add_scaled(p, inverse[(nu, alpha)]);
            }
            q.0
        })
        .collect())
}

/// Per-order weight sequences with their noise gains.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelBank {
    spec: EstimatorSpec,
    weights: Vec<Vec<f64>>,
    noise_gains: Vec<f64>,
    condition: f64,
}

pub fn build_kernel_bank(spec: &EstimatorSpec) -> Result<KernelBank> {
    spec.validate()?;
    let n = spec.degree;
    let w = spec.window;
    let polys = continuous_weight_polynomials(n, spec.smoothing)?;

    let step = 1.0 / (w - 1) as f64;
    let grid: Vec<f64> = (0..w).map(|j| j as f64 * step).collect();
    let vander = DMatrix::from_fn(n + 1, w, |d, j| grid[j].powi(d as i32));

    let svd = vander.clone().svd(true, true);
    let (smax, smin) = svd
        .singular_values
        .iter()
        .fold((0.0f64, f64::INFINITY), |(hi, lo), &s| {
            (hi.max(s), lo.min(s))
        });
    let condition = smax / smin;
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(Error::IllConditioned(condition));
    }
    let pinv = svd
        .pseudo_inverse(0.0)
        .map_err(|e| invalid("window", e.to_string()))?;

    let span = spec.span();
    let mut weights = Vec::with_capacity(n + 1);
    for (nu, coeffs) in polys.into_iter().enumerate() {
        let q = Poly(coeffs);
        let mut unit = DVector::from_iterator(w, grid.iter().map(|&u| step * q.eval(u)));
        let mut target = DVector::zeros(n + 1);
        target[nu] = factorial(nu);
        // Two passes: the second removes the rounding left by the first.
        for _ in 0..2 {
            let residual = &target - &vander * &unit;
            unit += &pinv * residual;
        }
        let scale = if nu % 2 == 0 { 1.0 } else { -1.0 } / span.powi(nu as i32);
        weights.push(
            (0..w)
                .map(|j| scale * unit[w - 1 - j])
                .collect::<Vec<f64>>(),
        );
    }
    let noise_gains = weights.iter().map(|wv| l2_gain(wv)).collect();
    Ok(KernelBank {
        spec: *spec,
        weights,
        noise_gains,
        condition,
    })
}

/// Euclidean norm of a weight sequence: the factor by which independent
/// noise standard deviation passes through the filter.
pub fn l2_gain(weights: &[f64]) -> f64 {
    weights.iter().map(|w| w * w).sum::<f64>().sqrt()
}

pub fn kernel_noise_gain(bank: &KernelBank, order: usize) -> Result<f64> {
    bank.noise_gain(order)
}

impl KernelBank {
    pub fn spec(&self) -> &EstimatorSpec {
        &self.spec
    }

    pub fn window(&self) -> usize {
        self.spec.window
    }

    pub fn degree(&self) -> usize {
        self.spec.degree
    }

    /// Weights for derivative `order`, oldest sample first.
    pub fn weights(&self, order: usize) -> Result<&[f64]> {
        self.weights
            .get(order)
            .map(Vec::as_slice)
            .ok_or_else(|| self.order_error(order))
    }

    pub fn noise_gain(&self, order: usize) -> Result<f64> {
        self.noise_gains
            .get(order)
            .copied()
            .ok_or_else(|| self.order_error(order))
    }

    pub fn noise_gains(&self) -> &[f64] {
        &self.noise_gains
    }

    pub fn condition_number(&self) -> f64 {
        self.condition
    }

    /// Window offsets `(j - W + 1) * spacing`, so the newest sample sits at 0.
    pub fn offsets(&self) -> Vec<f64> {
        let w = self.spec.window as f64;
        (0..self.spec.window)
            .map(|j| (j as f64 - w + 1.0) * self.spec.spacing)
            .collect()
    }

    /// Apply the order-`order` weights to a window of `W` samples, oldest first.
    ///
    /// Panics if `order > N` or the window length differs from `W`.
    pub fn apply(&self, order: usize, samples: &[f64]) -> f64 {
        let w = &self.weights[order];
        assert_eq!(samples.len(), w.len(), "window length mismatch");
        w.iter().zip(samples).map(|(a, b)| a * b).sum()
    }

    /// Debug dump: `offset,w0,...,wN` per row.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header = vec!["offset".to_string()];
        header.extend((0..=self.spec.degree).map(|v| format!("w{v}")));
        wtr.write_record(&header)?;
        for (j, off) in self.offsets().iter().enumerate() {
            let mut row = vec![off.to_string()];
            row.extend(self.weights.iter().map(|wv| wv[j].to_string()));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    fn order_error(&self, order: usize) -> Error {
        invalid(
            "order",
            format!(
                "derivative order {order} exceeds model degree {}",
                self.spec.degree
            ),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    /// Exact integral of a polynomial times u^d over [0, 1].
    fn moment(coeffs: &[f64], d: usize) -> f64 {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c / (k + d + 1) as f64)
            .sum()
    }

    #[test]
    fn continuous_polynomials_are_exact() {
        for n in 0..=4 {
            for kappa in 1..=3 {
                let qs = continuous_weight_polynomials(n, kappa).unwrap();
                for (nu, q) in qs.iter().enumerate() {
                    for d in 0..=n {
                        let expect = if d == nu { factorial(d) } else { 0.0 };
                        let abs: Vec<f64> = q.iter().map(|c| c.abs()).collect();
                        assert!(
                            (moment(q, d) - expect).abs() <= 1e-12 * moment(&abs, d).max(1.0),
                            "n={n} kappa={kappa} nu={nu} d={d}: {}",
                            moment(q, d)
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn minimal_smoothing_gives_degree_n_polynomials() {
        let qs = continuous_weight_polynomials(2, 1).unwrap();
        for q in &qs {
            let deg = q.iter().rposition(|c| c.abs() > 1e-12).unwrap_or(0);
            assert!(deg <= 2, "{q:?}");
        }
        // N = 0: the plain window average
        assert_eq!(
            continuous_weight_polynomials(0, 1).unwrap(),
            vec![vec![1.0]]
        );
    }

    #[test]
    fn two_point_average() {
        let bank = build_kernel_bank(&EstimatorSpec::new(0, 2)).unwrap();
        let w = bank.weights(0).unwrap();
        assert!(close(w[0], 0.5, 1e-15) && close(w[1], 0.5, 1e-15), "{w:?}");
        assert!(close(bank.noise_gain(0).unwrap(), 0.5f64.sqrt(), 1e-15));
    }

    #[test]
    fn line_fit_weights() {
        let bank = build_kernel_bank(&EstimatorSpec::new(1, 3)).unwrap();
        let w0 = bank.weights(0).unwrap();
        let w1 = bank.weights(1).unwrap();
        for (a, b) in w0.iter().zip([-1.0 / 6.0, 1.0 / 3.0, 5.0 / 6.0]) {
            assert!((a - b).abs() < 1e-12, "{w0:?}");
        }
        for (a, b) in w1.iter().zip([-0.5, 0.0, 0.5]) {
            assert!((a - b).abs() < 1e-12, "{w1:?}");
        }
        assert!(close(
            bank.noise_gain(0).unwrap(),
            (5.0f64 / 6.0).sqrt(),
            1e-12
        ));
    }

    #[test]
    fn rejects_bad_specs() {
        let err = build_kernel_bank(&EstimatorSpec::new(2, 3)).unwrap_err();
        assert!(err.to_string().contains("underdetermined"), "{err}");
        let err = build_kernel_bank(&EstimatorSpec::new(2, 21).with_smoothing(0)).unwrap_err();
        assert!(matches!(
            err,
            Error::InvalidParameter {
                name: "smoothing",
                ..
            }
        ));
        assert!(build_kernel_bank(&EstimatorSpec::new(2, 21).with_spacing(0.0)).is_err());
    }

    #[test]
    fn ill_conditioned_rejected() {
        let err = build_kernel_bank(&EstimatorSpec::new(20, 22)).unwrap_err();
        assert!(matches!(err, Error::IllConditioned(_)), "{err}");
    }

    #[test]
    fn order_beyond_degree_rejected() {
        let bank = build_kernel_bank(&EstimatorSpec::default()).unwrap();
        assert!(bank.noise_gain(3).is_err());
        assert!(kernel_noise_gain(&bank, 2).is_ok());
        assert!(bank.weights(3).is_err());
    }

    #[test]
    fn zero_weights_have_zero_gain() {
        assert_eq!(l2_gain(&[0.0; 5]), 0.0);
    }

    #[test]
    fn sum_constraints() {
        for spec in [
            EstimatorSpec::default(),
            EstimatorSpec::new(1, 11).with_smoothing(2),
        ] {
            let bank = build_kernel_bank(&spec).unwrap();
            assert!((bank.weights(0).unwrap().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for nu in 1..=spec.degree {
                assert!(bank.weights(nu).unwrap().iter().sum::<f64>().abs() < 1e-12);
                assert!(bank.apply(nu, &vec![7.5; spec.window]).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn spacing_scales_derivative_weights() {
        let base = build_kernel_bank(&EstimatorSpec::default()).unwrap();
        let lambda = 2.5;
        let scaled = build_kernel_bank(&EstimatorSpec::default().with_spacing(lambda)).unwrap();
        for nu in 0..=2 {
            let f = lambda.powi(-(nu as i32));
            for (a, b) in base
                .weights(nu)
                .unwrap()
                .iter()
                .zip(scaled.weights(nu).unwrap())
            {
                assert!(close(*b, f * a, 1e-12), "nu={nu}");
            }
        }
        // t^2 sampled at spacing lambda: derivative estimates in physical units
        let samples: Vec<f64> = scaled.offsets().iter().map(|t| (t + 3.0).powi(2)).collect();
        assert!(close(scaled.apply(0, &samples), 9.0, 1e-9));
        assert!(close(scaled.apply(1, &samples), 6.0, 1e-9));
        assert!(close(scaled.apply(2, &samples), 2.0, 1e-9));
    }

    #[test]
    fn more_smoothing_keeps_exactness() {
        for kappa in 1..=4 {
            let spec = EstimatorSpec::default().with_smoothing(kappa);
            let bank = build_kernel_bank(&spec).unwrap();
            let offs = bank.offsets();
            for d in 0..=2 {
                let samples: Vec<f64> = offs.iter().map(|t| t.powi(d)).collect();
                for nu in 0..=2usize {
                    let expect = if nu == d as usize { factorial(nu) } else { 0.0 };
                    let got = bank.apply(nu, &samples);
                    let scale: f64 = bank
                        .weights(nu)
                        .unwrap()
                        .iter()
                        .zip(&samples)
                        .map(|(a, b)| (a * b).abs())
                        .sum();
                    assert!(
                        (got - expect).abs() <= 1e-9 * scale.max(1.0),
                        "kappa={kappa} d={d} nu={nu}"
                    );
                }
            }
        }
    }

    #[test]
    fn csv_dump_has_one_row_per_offset() {
        let bank = build_kernel_bank(&EstimatorSpec::new(1, 3)).unwrap();
        let mut buf = Vec::new();
        bank.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "offset,w0,w1");
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("0,"));
    }
}
