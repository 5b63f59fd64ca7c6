"""Threshold crossovers, bootstrap intervals and the threshold / slope fits."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

IDEALIZED_BETA = 0.75


class NoCrossover(ValueError):
    """The two curves do not change order inside the sampled range."""


def _log_rate(k, n):
    k = np.asarray(k, dtype=float)
    n = np.asarray(n, dtype=float)
    return np.log(np.where(k > 0, k, 0.5) / n)  # half a count stands in for zero failures


def crossover(p, k_small, n_small, k_large, n_large, max_rate: float | None = None) -> float:
    """Crossing point of the small-``d`` and large-``d`` failure curves.

    The log-rate difference is interpolated linearly in ``log p`` between the
    grid points that bracket each sign change; with several sign changes (noisy
    data) the median crossing is returned. Points where neither curve has a
    failure carry no ordering information and are skipped; a sign change across
    a run of exact ties is placed at the middle of the run. With ``max_rate``,
    points where both rates exceed it (curves near saturation) are skipped too.
    """
    p = np.asarray(p, dtype=float)
    order = np.argsort(p)
    p = p[order]
    diff = (_log_rate(k_large, n_large) - _log_rate(k_small, n_small))[order]
    seen = (np.asarray(k_small) > 0) | (np.asarray(k_large) > 0)
    if max_rate is not None:
        seen &= (np.asarray(k_small) / np.asarray(n_small) <= max_rate) | (
            np.asarray(k_large) / np.asarray(n_large) <= max_rate)
    seen = seen[order]
    if np.all(diff == 0):
        raise NoCrossover("curves coincide on the whole grid (degenerate crossover range)")
    lp = np.log(p)[seen]
    diff = diff[seen]
    nz = np.flatnonzero(diff)
    xs = []
    for i, j in zip(nz[:-1], nz[1:]):
        a, b = diff[i], diff[j]
        if a * b > 0:
            continue
        if j == i + 1:
            xs.append(lp[i] - a * (lp[j] - lp[i]) / (b - a))
        else:
            xs.append(lp[i + 1:j].mean())
    if not xs:
        raise NoCrossover("no crossover in range")
    return float(np.exp(np.median(xs)))


@dataclass
class ThresholdEstimate:
    p_th: float
    ci: tuple[float, float]
    resamples: int
    failed_resamples: int


def bootstrap_crossover(p, k_small, n_small, k_large, n_large, n_boot: int = 1000,
                        seed: int = 0, level: float = 0.95, max_rate: float | None = None) -> ThresholdEstimate:
    """Crossover with a parametric (binomial) bootstrap percentile interval."""
    est = crossover(p, k_small, n_small, k_large, n_large, max_rate)
    rng = np.random.default_rng(seed)
    n_small = np.asarray(n_small)
    n_large = np.asarray(n_large)
    f_small = np.asarray(k_small) / n_small
    f_large = np.asarray(k_large) / n_large
    vals, failed = [], 0
    for _ in range(n_boot):
        ks = rng.binomial(n_small, f_small)
        kl = rng.binomial(n_large, f_large)
        try:
            vals.append(crossover(p, ks, n_small, kl, n_large, max_rate))
        except NoCrossover:
            failed += 1
    if not vals:
        return ThresholdEstimate(est, (float("nan"), float("nan")), n_boot, failed)
    lo, hi = np.quantile(vals, [(1 - level) / 2, (1 + level) / 2])
    return ThresholdEstimate(est, (float(lo), float(hi)), n_boot, failed)


def threshold_model(r, alpha, beta):
    return alpha / (1 + beta * np.asarray(r, dtype=float))


@dataclass
class FitResult:
    alpha: float | None = None
    beta: float | None = None
    alpha_err: float | None = None
    beta_err: float | None = None
    residuals: list = field(default_factory=list)
    thresholds: dict = field(default_factory=dict)  # r -> p_th
    gamma: dict = field(default_factory=dict)  # d -> per-distance slope gamma
    gamma_residuals: dict = field(default_factory=dict)

    def idealized(self, r):
        """Overlay with the idealized beta = 3/4 and the fitted alpha."""
        return threshold_model(r, self.alpha, IDEALIZED_BETA)


def fit_threshold_decay(r, p_th) -> FitResult:
    """Least-squares fit of ``p_th(r) = alpha / (1 + beta r)``; needs four or more points."""
    r = np.asarray(r, dtype=float)
    p_th = np.asarray(p_th, dtype=float)
    if len(r) < 4 or len(np.unique(r)) < 4:
        raise ValueError("fitting alpha and beta needs thresholds at four or more r values")
    guess = (float(p_th[np.argmin(r)]), 1.0)
    (alpha, beta), cov = curve_fit(threshold_model, r, p_th, p0=guess, maxfev=10_000)
    err = np.sqrt(np.diag(cov))
    res = p_th - threshold_model(r, alpha, beta)
    return FitResult(float(alpha), float(beta), float(err[0]), float(err[1]), res.tolist(),
                     dict(zip(r.tolist(), p_th.tolist())))


def fit_gamma(p, rate, d: int) -> tuple[float, list[float]]:
    """Sub-threshold slope: ``log rate = log A + gamma d log p``; returns (gamma, residuals)."""
    p = np.asarray(p, dtype=float)
    rate = np.asarray(rate, dtype=float)
    ok = rate > 0
    if ok.sum() < 4:
        raise ValueError(f"gamma at d={d} needs four or more p values with failures")
    x, y = np.log(p[ok]), np.log(rate[ok])
    slope, icept = np.polyfit(x, y, 1)
    return float(slope / d), (y - (icept + slope * x)).tolist()
