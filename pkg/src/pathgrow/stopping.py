"""Density-performance trace and the saturating-curve stopping rule.

Performance as a function of density is modeled as
``P(rho) = P0 + A * (1 - exp(-beta * rho))`` and fit by nonlinear least
squares.  Growth stops at the smallest density where the fitted curve
reaches 95% of its asymptotic value.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

MIN_TRACE_POINTS = 4  # 3 unknowns + 1


@dataclass
class DensityTrace:
    densities: list = field(default_factory=list)
    performances: list = field(default_factory=list)

    def append(self, rho, perf):
        if self.densities and rho <= self.densities[-1]:
            raise ValueError("densities must be strictly increasing")
        self.densities.append(float(rho))
        self.performances.append(float(perf))

    def __len__(self):
        return len(self.densities)


@dataclass
class LogisticFit:
    p0: float
    a: float
    beta: float
    mse: float
    rho_hat: float | None  # None when the plateau lies beyond reach


def saturating_curve(rho, p0, a, beta):
    return p0 + a * (1.0 - np.exp(-beta * np.asarray(rho)))


def plateau_density(p0, a, beta, threshold=0.95, mode="absolute"):
    """Smallest density where the fitted curve reaches the plateau threshold.

    ``absolute`` mode: threshold * (P0 + A) of the asymptotic value (the
    literal reading).  ``increment`` mode: P0 + threshold * A (threshold of
    the fitted gain).  Returns None when the target is unreachable.
    """
    if a <= 0 or beta <= 0:
        return None
    if mode == "increment":
        frac = 1.0 - threshold  # exp(-beta rho) = 1 - threshold
    elif mode == "absolute":
        target = threshold * (p0 + a)
        if target <= p0:
            return 0.0
        frac = 1.0 - (target - p0) / a
        if frac <= 0.0:
            return None
    else:
        raise ValueError(f"unknown plateau mode {mode!r}")
    return float(-np.log(frac) / beta)


def fit_logistic(trace: DensityTrace, threshold=0.95, mode="absolute",
                 min_points=MIN_TRACE_POINTS) -> LogisticFit | None:
    """Least-squares fit of the saturating curve to the trace.

    Returns None (no-plateau-yet) when the trace is too short, the fit does
    not converge, or the fitted gain is non-positive.  Deterministic:
    multi-start from three fixed initializations, best MSE wins.
    """
    if len(trace) < min_points:
        return None
    rho = np.asarray(trace.densities)
    perf = np.asarray(trace.performances)
    p0_init = float(perf.min())
    a_init = max(float(perf.max() - perf.min()), 1e-6)
    beta_init = 1.0 / max(float(np.median(rho)), 1e-9)
    starts = [
        (p0_init, a_init, beta_init),
        (p0_init, 2.0 * a_init, 0.3 * beta_init),
        (0.0, p0_init + a_init, 3.0 * beta_init),
    ]
    best = None
    for start in starts:
        try:
            popt, _ = curve_fit(
                saturating_curve, rho, perf, p0=start,
                bounds=([-np.inf, 0.0, 1e-9], [np.inf, np.inf, np.inf]),
                maxfev=2000)
        except (RuntimeError, ValueError):
            continue
        mse = float(np.mean((saturating_curve(rho, *popt) - perf) ** 2))
        if best is None or mse < best[0]:
            best = (mse, popt)
    if best is None:
        return None
    mse, (p0, a, beta) = best
    if a <= 0:
        return None
    rho_hat = plateau_density(p0, a, beta, threshold, mode)
    return LogisticFit(p0=float(p0), a=float(a), beta=float(beta),
                       mse=mse, rho_hat=rho_hat)
