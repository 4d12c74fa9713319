"""Walkthrough: the saturating-curve stopping rule.

Performance as a function of density is modeled as
P(rho) = P0 + A * (1 - exp(-beta * rho)).  This demo generates noisy
measurements from a known curve, fits it by nonlinear least squares, and
inverts the fit for the smallest density where the curve reaches 95% of its
plateau -- the density at which growth should stop.

Run:  python3 demos/03_stopping_rule.py
"""

import numpy as np

from pathgrow.stopping import (DensityTrace, fit_logistic, plateau_density,
                               saturating_curve)

p0, a, beta = 0.45, 0.42, 12.0
truth = plateau_density(p0, a, beta)
print(f"true curve: P0={p0}, A={a}, beta={beta}")
print(f"analytic 95%-plateau density: {truth:.4f}\n")

rng = np.random.default_rng(0)
trace = DensityTrace()
print("noisy measurements (sigma = 0.005):")
for rho in np.linspace(0.03, 0.45, 10):
    perf = saturating_curve(rho, p0, a, beta) + rng.normal(0.0, 0.005)
    trace.append(rho, perf)
    print(f"  rho={rho:.3f}  perf={perf:.4f}")

fit = fit_logistic(trace)
print(f"\nfit: P0={fit.p0:.4f}, A={fit.a:.4f}, beta={fit.beta:.3f} "
      f"(mse {fit.mse:.2e})")
print(f"estimated stopping density: {fit.rho_hat:.4f} "
      f"(error {abs(fit.rho_hat - truth) / truth:.1%})")

# with fewer than four points the fit abstains rather than extrapolate
short = DensityTrace()
for rho, perf in zip(trace.densities[:3], trace.performances[:3]):
    short.append(rho, perf)
print(f"\nfit on 3 points: {fit_logistic(short)} (needs at least 4)")

# a trace that is still rising linearly has no detectable plateau: the
# fitted beta collapses toward zero and the predicted stopping density
# lands far beyond the observed range, so growth continues
linear = DensityTrace()
for rho in np.linspace(0.05, 0.4, 8):
    linear.append(rho, 0.3 + 0.5 * rho)
lin_fit = fit_logistic(linear)
rho_hat = None if lin_fit is None else lin_fit.rho_hat
print(f"fit on a linear trace: stopping density {rho_hat} "
      f"-> keep growing" if rho_hat is None or rho_hat > 0.4 else "")
