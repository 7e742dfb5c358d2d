"""Power-law tail fitting of event costs.

The tail model is the CCDF ``(x / x_min) ** -alpha`` for ``x >= x_min``.
``alpha`` is reported in the CCDF convention; the matching density falls off
with exponent ``alpha + 1``. The cutoff ``x_min`` is chosen by minimizing the
Kolmogorov-Smirnov distance between the empirical tail and the fitted model.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

N_TAIL_MIN = 10
N_TAIL_WARN = 50
MAX_CANDIDATES = 500


class InsufficientTailError(ValueError):
    pass


class InfiniteMeanError(ValueError):
    pass


@dataclass(frozen=True)
class TailFit:
    alpha: float
    x_min: float
    n_tail: int
    ks_distance: float

    @property
    def alpha_pdf(self) -> float:
        return self.alpha + 1.0

    @property
    def mean_is_finite(self) -> bool:
        return self.alpha > 1.0

    def tail_mean(self) -> float:
        return tail_mean(self.alpha, self.x_min)

    def to_json(self) -> dict:
        return {"alpha": self.alpha, "x_min_usd": self.x_min, "n_tail": self.n_tail,
                "ks": self.ks_distance}


def model_ccdf(alpha: float, x_min: float, x):
    x = np.asarray(x, dtype=float)
    if np.any(x < x_min):
        raise ValueError(f"model_ccdf is defined only for x >= x_min ({x_min})")
    return (x / x_min) ** -alpha


def tail_mean(alpha: float, x_min: float) -> float:
    """Mean of the fitted tail distribution; refuses heavy tails where it diverges."""
    if not alpha > 1.0:
        raise InfiniteMeanError(
            f"tail slope magnitude alpha = {alpha:.4g} <= 1: the power-law tail has an "
            "infinite mean, so mean-based large-event measures (such as CVaR) are not usable; "
            "use the exceedance probability and alpha instead"
        )
    return alpha * x_min / (alpha - 1.0)


def fit_alpha_given_xmin(costs, x_min: float, n_tail_min: int = N_TAIL_MIN) -> float:
    """Continuous maximum-likelihood slope magnitude of the tail above ``x_min``.

    ``alpha = n_tail / sum(log(x_i / x_min))`` over ``x_i >= x_min``.
    """
    if not x_min > 0:
        raise ValueError("x_min must be positive")
    x = np.asarray(costs, dtype=float)
    tail = x[x >= x_min]
    if len(tail) < n_tail_min:
        raise InsufficientTailError(
            f"insufficient tail: {len(tail)} costs >= x_min, need {n_tail_min}")
    s = float(np.sum(np.log(tail / x_min)))
    if s <= 0:
        raise InsufficientTailError("insufficient tail: all tail costs equal x_min")
    return len(tail) / s


def ks_distance(tail, alpha: float, x_min: float) -> float:
    """KS distance between the empirical distribution of ``tail`` and the model.

    ``tail`` must be sorted ascending with every element ``>= x_min``.
    """
    tail = np.asarray(tail, dtype=float)
    m = len(tail)
    model_cdf = 1.0 - (tail / x_min) ** -alpha
    i = np.arange(1, m + 1)
    return float(max(np.max(i / m - model_cdf), np.max(model_cdf - (i - 1) / m)))


def candidate_indices(x_sorted: np.ndarray, n_tail_min: int = N_TAIL_MIN,
                      max_candidates: int = MAX_CANDIDATES) -> np.ndarray:
    """First-occurrence indices of candidate cutoffs among sorted positive costs.

    Candidates are the distinct costs leaving at least ``n_tail_min`` tail
    points, thinned to at most ``max_candidates`` roughly log-spaced values.
    """
    n = len(x_sorted)
    values, first = np.unique(x_sorted, return_index=True)
    keep = n - first >= n_tail_min
    values, first = values[keep], first[keep]
    if len(values) > max_candidates:
        targets = np.geomspace(values[0], values[-1], max_candidates)
        j = np.searchsorted(values, targets, side="left").clip(0, len(values) - 1)
        first = first[np.unique(j)]
    return first


def select_xmin(costs, n_tail_min: int = N_TAIL_MIN,
                max_candidates: int = MAX_CANDIDATES) -> TailFit:
    """Choose the cutoff minimizing KS distance; ties go to the smaller cutoff."""
    x = np.sort(np.asarray(costs, dtype=float))
    x = x[x > 0]
    n = len(x)
    if n < n_tail_min:
        raise InsufficientTailError(f"insufficient tail: {n} positive costs, need {n_tail_min}")
    logs = np.log(x)
    suffix = np.cumsum(logs[::-1])[::-1]

    best = None
    for k in candidate_indices(x, n_tail_min, max_candidates).tolist():
        m = n - k
        s = suffix[k] - m * logs[k]
        if s <= 0:
            continue
        alpha = m / s
        d = ks_distance(x[k:], alpha, x[k])
        if best is None or d < best[0]:
            best = (d, alpha, k)
    if best is None:
        raise InsufficientTailError("insufficient tail: no candidate cutoff has spread above it")
    d, alpha, k = best
    fit = TailFit(alpha=float(alpha), x_min=float(x[k]), n_tail=int(n - k), ks_distance=d)
    if fit.n_tail < N_TAIL_WARN:
        warnings.warn(f"tail fit uses only {fit.n_tail} points; alpha is poorly constrained",
                      stacklevel=2)
    return fit


def fit_tail(costs, x_min: float | None = None, n_tail_min: int = N_TAIL_MIN) -> TailFit:
    """Fit with a fixed cutoff when given, otherwise select it by KS minimization."""
    if x_min is None:
        return select_xmin(costs, n_tail_min)
    alpha = fit_alpha_given_xmin(costs, x_min, n_tail_min)
    tail = np.sort(np.asarray(costs, dtype=float))
    tail = tail[tail >= x_min]
    return TailFit(alpha, float(x_min), len(tail), ks_distance(tail, alpha, x_min))
