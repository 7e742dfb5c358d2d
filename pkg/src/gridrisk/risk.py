"""Event costs, the cost exceedance curve, and large-event risk metrics."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from . import tailfit
from .events import ResilienceEvent

log = logging.getLogger(__name__)

DEFAULT_BETA = 370.2  # USD per customer-hour (2022 USD)


class NoEventsError(ValueError):
    pass


@dataclass(frozen=True)
class CostConfig:
    beta: float = DEFAULT_BETA
    large_cost_percentile: float = 0.99
    c_large_override: float | None = None
    n_tail_min: int = tailfit.N_TAIL_MIN

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not 0.0 < self.large_cost_percentile < 1.0:
            raise ValueError("large_cost_percentile must lie in (0, 1)")

    @classmethod
    def from_config(cls, cfg) -> "CostConfig":
        return cls(beta=cfg.beta_usd_per_cust_hour,
                   large_cost_percentile=cfg.large_cost_percentile,
                   c_large_override=cfg.c_large_usd,
                   n_tail_min=cfg.n_tail_min)


def cost_from_customer_seconds(customer_seconds, beta: float):
    """USD cost for exact integer customer-seconds (scalar or array)."""
    return beta * (np.asarray(customer_seconds, dtype=np.int64) / 3600.0)


def event_cost(event: ResilienceEvent, config: CostConfig = CostConfig()) -> float:
    return float(cost_from_customer_seconds(event.customer_seconds, config.beta))


class ExceedanceCurve:
    """Empirical ``P[C > c]`` over a set of event costs."""

    def __init__(self, costs):
        costs = np.sort(np.asarray(costs, dtype=float))
        if len(costs) == 0:
            raise NoEventsError("no events")
        self.costs = costs

    @property
    def n(self) -> int:
        return len(self.costs)

    def __call__(self, c):
        above = self.n - np.searchsorted(self.costs, c, side="right")
        out = above / self.n
        return float(out) if np.ndim(out) == 0 else out

    def plot_points(self) -> tuple[np.ndarray, np.ndarray]:
        """Sorted costs against ``(n - i) / n`` for 1-based rank ``i``."""
        i = np.arange(1, self.n + 1)
        return self.costs.copy(), (self.n - i) / self.n


def exceedance_curve(costs) -> ExceedanceCurve:
    return ExceedanceCurve(costs)


def large_cost_threshold(costs, percentile: float = 0.99, override: float | None = None) -> float:
    """Nearest-rank quantile: the ceil(percentile * n)-th smallest cost."""
    if override is not None:
        return float(override)
    x = np.sort(np.asarray(costs, dtype=float))
    n = len(x)
    if n == 0:
        raise NoEventsError("no events")
    if n < 1.0 / (1.0 - percentile):
        log.warning("only %d events for a %.3g percentile threshold; p_large is unreliable",
                    n, percentile)
    # rounding guards against e.g. 0.07 * 100 = 7.000000000000001
    k = max(1, math.ceil(round(percentile * n, 9)))
    return float(x[k - 1])


def p_large(costs, c_large: float) -> float:
    x = np.asarray(costs, dtype=float)
    if len(x) == 0:
        raise NoEventsError("no events")
    return int(np.count_nonzero(x > c_large)) / len(x)


def annual_event_rate(n_events: int, years_observed: float) -> float:
    if not years_observed > 0:
        raise ValueError("years_observed must be positive")
    return n_events / years_observed


def f_large(p: float, r_event: float, rate_multiplier: float = 1.0) -> float:
    return p * r_event * rate_multiplier


@dataclass(frozen=True)
class RiskMetrics:
    alpha: float | None
    x_min: float | None
    c_large: float
    p_large: float
    r_event: float
    f_large: float
    n_events: int
    mean_is_finite: bool
    n_tail: int | None = None
    ks: float | None = None
    rate_multiplier: float = 1.0

    def tail_mean(self) -> float:
        if self.alpha is None or self.x_min is None:
            raise tailfit.InfiniteMeanError("no tail fit available; tail mean undefined")
        return tailfit.tail_mean(self.alpha, self.x_min)

    def check_identity(self) -> None:
        if self.f_large != f_large(self.p_large, self.r_event, self.rate_multiplier):
            raise AssertionError("f_large != p_large * r_event * rate_multiplier")

    def to_json(self) -> dict:
        return asdict(self)


def compute_metrics(costs: Sequence[float], years_observed: float, config: CostConfig = CostConfig(),
                    c_large: float | None = None, x_min: float | None = None,
                    rate_multiplier: float = 1.0) -> RiskMetrics:
    """Full metric bundle for one set of event costs.

    ``c_large`` pins the large-cost threshold (reruns compare against the
    baseline value); ``x_min`` pins the tail cutoff instead of reselecting it.
    """
    costs = np.asarray(costs, dtype=float)
    if len(costs) == 0:
        raise NoEventsError("no events")
    if c_large is None:
        c_large = large_cost_threshold(costs, config.large_cost_percentile, config.c_large_override)
    p = p_large(costs, c_large)
    r = annual_event_rate(len(costs), years_observed)
    try:
        fit = tailfit.fit_tail(costs, x_min, config.n_tail_min)
    except tailfit.InsufficientTailError as exc:
        log.info("tail fit skipped: %s", exc)
        fit = None
    return RiskMetrics(
        alpha=None if fit is None else fit.alpha,
        x_min=None if fit is None else fit.x_min,
        c_large=float(c_large),
        p_large=p,
        r_event=r,
        f_large=f_large(p, r, rate_multiplier),
        n_events=len(costs),
        mean_is_finite=fit is not None and fit.mean_is_finite,
        n_tail=None if fit is None else fit.n_tail,
        ks=None if fit is None else fit.ks_distance,
        rate_multiplier=rate_multiplier,
    )
