"""High-resolution Monte Carlo oracle for P(|int_0^T (S_t - S0 e^{mu t}) dt| > eps).

Independent of the crate: numpy PCG64 generator, vectorized exact log-space
stepping, trapezoidal integral.  Run: python3 gbm_oracle.py [paths] [steps]
"""
import sys
import numpy as np

MU, SIGMA, S0, T, EPS = 0.05, 0.2, 1.0, 1.0, 0.05


def residual_integrals(rng, paths, steps):
    dt = T / steps
    drift = (MU - 0.5 * SIGMA ** 2) * dt
    vol = SIGMA * np.sqrt(dt)
    t = np.arange(steps + 1) * dt
    mean_path = S0 * np.exp(MU * t)
    log_s = np.zeros(paths)
    # trapezoid: dt * (F0/2 + F1 + ... + F_{n-1} + Fn/2), F0 = 0
    acc = np.zeros(paths)
    for k in range(1, steps + 1):
        log_s += drift + vol * rng.standard_normal(paths)
        f = S0 * np.exp(log_s) - mean_path[k]
        acc += f if k < steps else 0.5 * f
    return acc * dt


if __name__ == "__main__":
    paths = int(sys.argv[1]) if len(sys.argv) > 1 else 100_000
    steps = int(sys.argv[2]) if len(sys.argv) > 2 else 10_000
    rng = np.random.default_rng(20240607)
    vals = residual_integrals(rng, paths, steps)
    p = np.mean(np.abs(vals) > EPS)
    se = np.sqrt(p * (1 - p) / paths)
    print(f"paths={paths} steps={steps} p_hat={p:.6f} stderr={se:.6f}")
    print(f"mean={vals.mean():.6e} std={vals.std():.6e}")
