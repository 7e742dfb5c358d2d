"""Rerunning history with a counterfactual investment.

Two investments are modeled. Wind hardening lowers the outage rate at every
wind speed; it is rerun by randomly thinning the historical outages, many
times over, and re-extracting events from each sample. Faster restoration
compresses the restore times within each event around the event's first
restore; it is deterministic and keeps the event grouping fixed.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .events import areas_from_flags, new_event_flags, sweep_order
from .ingest import Dataset, OutageRecord, winds_at
from .risk import CostConfig, RiskMetrics, compute_metrics, cost_from_customer_seconds, f_large

log = logging.getLogger(__name__)

METRICS = ("alpha", "p_large", "r_event", "f_large")


class RateCurveError(ValueError):
    pass


# ---------------------------------------------------------------- area outage rate curve

@dataclass(frozen=True)
class RateBin:
    w_lo: float
    w_hi: float
    count: int
    exposure_hours: float

    @property
    def rate(self) -> float:
        return self.count / self.exposure_hours


@dataclass(frozen=True)
class RateCurve:
    bins: tuple[RateBin, ...]
    lambda0: float | None = None
    gamma: float | None = None

    @property
    def fitted(self) -> bool:
        return self.gamma is not None

    def rate(self, w):
        """Fitted outage rate per hour at wind speed ``w``."""
        if not self.fitted:
            raise RateCurveError("rate curve has no exponential fit")
        return self.lambda0 * np.exp(self.gamma * np.asarray(w, dtype=float))


def build_rate_curve(outage_winds, weather, bin_width: float = 1.0, min_count: int = 5) -> RateCurve:
    """Empirical outage rate versus wind speed, with an exponential fit when possible.

    ``outage_winds`` holds the wind speed at each outage start (NaN when
    unknown; those outages are skipped). Exposure in a bin is the number of
    observations in that bin times the station's observation cadence. The fit
    is least squares on log(rate), weighted by outage count, over bins holding
    at least ``min_count`` outages; fewer than two such bins leaves it unfitted.
    """
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    w = np.asarray(outage_winds, dtype=float)
    w = w[~np.isnan(w)]
    exposure: dict[int, float] = {}
    for s in weather.values():
        if len(s) == 0:
            continue
        keys, n_obs = np.unique(np.floor(s.speeds / bin_width).astype(np.int64), return_counts=True)
        for k, c in zip(keys.tolist(), n_obs.tolist()):
            exposure[k] = exposure.get(k, 0.0) + c * s.cadence / 3600.0
    counts: dict[int, int] = {}
    keys, n_out = np.unique(np.floor(w / bin_width).astype(np.int64), return_counts=True)
    for k, c in zip(keys.tolist(), n_out.tolist()):
        counts[k] = c
    orphans = sum(c for k, c in counts.items() if k not in exposure)
    if orphans:
        log.warning("%d outage(s) fall in wind bins with no exposure; ignored", orphans)

    bins = tuple(
        RateBin(k * bin_width, (k + 1) * bin_width, counts.get(k, 0), exposure[k])
        for k in sorted(exposure) if exposure[k] > 0
    )
    usable = [b for b in bins if b.count >= min_count]
    if len(usable) < 2:
        return RateCurve(bins)
    x = np.array([(b.w_lo + b.w_hi) / 2 for b in usable])
    y = np.log([b.rate for b in usable])
    wt = np.array([b.count for b in usable], dtype=float)
    xm, ym = np.average(x, weights=wt), np.average(y, weights=wt)
    gamma = float(np.sum(wt * (x - xm) * (y - ym)) / np.sum(wt * (x - xm) ** 2))
    lambda0 = float(np.exp(ym - gamma * xm))
    if gamma < 0:
        log.warning("fitted outage rate decreases with wind (gamma = %.3g)", gamma)
    return RateCurve(bins, lambda0, gamma)


# ---------------------------------------------------------------- scenario specs

@dataclass(frozen=True)
class HardeningSpec:
    reduction: float = 0.10
    mode: str = "multiplicative"
    n_samples: int = 2000
    seed: int = 0
    refit_xmin_per_sample: bool = True

    def __post_init__(self):
        if not 0.0 <= self.reduction < 1.0:
            raise ValueError("reduction must lie in [0, 1)")
        if self.mode not in ("multiplicative", "shift"):
            raise ValueError("mode must be 'multiplicative' or 'shift'")
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")


@dataclass(frozen=True)
class RestorationSpec:
    speedup: float = 0.10

    def __post_init__(self):
        if not 0.0 <= self.speedup < 1.0:
            raise ValueError("speedup must lie in [0, 1)")


def retention_probability(wind, curve: RateCurve, spec: HardeningSpec):
    """Probability that a historical outage at wind speed ``wind`` still happens.

    In shift mode the rate curve moves by ``delta`` m/s so that the fitted
    rate drops by ``reduction`` everywhere: ``exp(-gamma * delta) = 1 - reduction``.
    """
    wind = np.asarray(wind, dtype=float)
    if spec.mode == "multiplicative":
        return np.full(wind.shape, 1.0 - spec.reduction)
    if curve.gamma is None or curve.gamma <= 0:
        raise RateCurveError("shift undefined: rate curve needs a positive fitted gamma")
    delta = -math.log1p(-spec.reduction) / curve.gamma
    return curve.rate(wind - delta) / curve.rate(wind)


def sample_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for sample ``index``, reproducible from (seed, index) alone."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def thin_outages(outages: Sequence[OutageRecord], retention: Callable[[float], float] | Sequence[float],
                 rng: np.random.Generator, winds=None) -> list[OutageRecord]:
    """Keep each outage independently with its retention probability; order preserved.

    ``retention`` is either per-outage probabilities or a function of wind
    speed, in which case ``winds`` supplies the wind at each outage.
    """
    if callable(retention):
        p = np.array([retention(w) for w in winds], dtype=float)
    else:
        p = np.asarray(retention, dtype=float)
    keep = rng.random(len(outages)) < p
    return [o for o, k in zip(outages, keep.tolist()) if k]


# ---------------------------------------------------------------- shared arrays

@dataclass(frozen=True)
class OutageArrays:
    """Outages of a dataset as sweep-ordered arrays."""

    starts: np.ndarray
    restores: np.ndarray
    customers: np.ndarray
    winds: np.ndarray
    years: float

    @classmethod
    def from_dataset(cls, dataset: Dataset, max_gap: int = 3 * 3600) -> "OutageArrays":
        s = np.array([o.start for o in dataset.outages], dtype=np.int64)
        r = np.array([o.restore for o in dataset.outages], dtype=np.int64)
        c = np.array([o.customers for o in dataset.outages], dtype=np.int64)
        w = winds_at(dataset.outages, dataset.weather, max_gap) if dataset.outages else np.zeros(0)
        order = sweep_order(s, r)
        return cls(s[order], r[order], c[order], w[order], dataset.years_observed)

    def __len__(self) -> int:
        return len(self.starts)

    def event_costs(self, beta: float, keep=None) -> np.ndarray:
        s, r, c = self.starts, self.restores, self.customers
        if keep is not None:
            s, r, c = s[keep], r[keep], c[keep]
        flags = new_event_flags(s, r)
        return cost_from_customer_seconds(areas_from_flags(flags, s, r, c), beta)


def baseline_metrics(arrays: OutageArrays, cost_config: CostConfig = CostConfig()) -> RiskMetrics:
    return compute_metrics(arrays.event_costs(cost_config.beta), arrays.years, cost_config)


def _metrics_or_empty(costs, years, cost_config, c_large, x_min) -> RiskMetrics:
    if len(costs) == 0:
        return RiskMetrics(None, None, c_large, 0.0, 0.0, f_large(0.0, 0.0), 0, False)
    return compute_metrics(costs, years, cost_config, c_large=c_large, x_min=x_min)


# ---------------------------------------------------------------- results

def _mean(values: np.ndarray) -> float:
    # shifted by the first value so a constant sample reproduces it exactly
    return float(values[0] + np.mean(values - values[0]))


def percent_diff(before, after) -> float | None:
    if before is None or after is None or before == 0:
        return None
    return 100.0 * (after - before) / before


@dataclass
class RerunResult:
    scenario: str
    baseline: RiskMetrics
    after: dict
    percent_diff: dict
    n_samples: int = 1
    info: dict = field(default_factory=dict)
    per_sample: list[dict] | None = None

    def to_json(self) -> dict:
        return {
            "scenario": self.scenario,
            "n_samples": self.n_samples,
            "baseline": self.baseline.to_json(),
            "after": self.after,
            "percent_diff": self.percent_diff,
            "info": self.info,
        }


# ---------------------------------------------------------------- wind hardening

def _hardening_sample(i, arrays, retention, spec, cost_config, base):
    keep = sample_rng(spec.seed, i).random(len(arrays)) < retention
    costs = arrays.event_costs(cost_config.beta, keep)
    x_min = None if spec.refit_xmin_per_sample else base.x_min
    m = _metrics_or_empty(costs, arrays.years, cost_config, base.c_large, x_min)
    return {"sample": i, "kept": int(keep.sum()), "n_events": m.n_events,
            "alpha": m.alpha, "x_min": m.x_min, "p_large": m.p_large, "r_event": m.r_event,
            "f_large": m.f_large}


def rerun_hardening(dataset: Dataset, spec: HardeningSpec = HardeningSpec(),
                    cost_config: CostConfig = CostConfig(), *, curve: RateCurve | None = None,
                    bin_width: float = 1.0, max_gap: int = 3 * 3600, keep_samples: bool = False,
                    workers: int | None = None) -> RerunResult:
    """Monte-Carlo rerun of history with the outage rate reduced at every wind speed.

    The large-cost threshold stays at its baseline value in every sample.
    Results depend only on ``spec.seed``, not on ``workers``.
    """
    arrays = OutageArrays.from_dataset(dataset, max_gap)
    if curve is None:
        curve = build_rate_curve(arrays.winds, dataset.weather, bin_width)
    if not curve.fitted:
        raise RateCurveError("cannot fit the area outage rate curve: fewer than 2 usable wind bins")
    base = baseline_metrics(arrays, cost_config)
    if base.x_min is None and not spec.refit_xmin_per_sample:
        raise ValueError("fixed-x_min mode needs a baseline tail fit")
    retention = retention_probability(arrays.winds, curve, spec)

    def run(i):
        return _hardening_sample(i, arrays, retention, spec, cost_config, base)

    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(run, range(spec.n_samples)))
    else:
        rows = [run(i) for i in range(spec.n_samples)]

    after, diff = {}, {}
    for key in METRICS:
        vals = np.array([r[key] for r in rows if r[key] is not None], dtype=float)
        if len(vals) == 0:
            after[key] = {"mean": None, "sd": None}
            diff[key] = None
            continue
        sd = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
        after[key] = {"mean": _mean(vals), "sd": sd}
        diff[key] = percent_diff(getattr(base, key), after[key]["mean"])
    missing = sum(r["alpha"] is None for r in rows)
    if missing:
        log.warning("%d of %d samples had too few tail points for an alpha fit", missing, len(rows))
    info = {
        "reduction": spec.reduction, "mode": spec.mode, "seed": spec.seed,
        "refit_xmin_per_sample": spec.refit_xmin_per_sample,
        "rate_curve": {"lambda0_per_hour": curve.lambda0, "gamma_per_mps": curve.gamma},
        "alpha_missing_samples": missing,
        "mean_kept_outages": _mean(np.array([r["kept"] for r in rows], dtype=float)),
        "n_outages": len(arrays),
    }
    return RerunResult("harden", base, after, diff, spec.n_samples, info,
                       rows if keep_samples else None)


# ---------------------------------------------------------------- faster restoration

def compress_restores(starts: np.ndarray, restores: np.ndarray, flags: np.ndarray,
                      speedup: float) -> tuple[np.ndarray, int]:
    """New restore times for sweep-ordered outages grouped by ``flags``.

    Within each event, restores move toward the event's first restore ``r1``:
    ``r1 + (1 - speedup) * (r - r1)``, rounded to the second and never earlier
    than one second after the outage's own start. Returns the new restores and
    how many outages hit that floor.
    """
    if len(starts) == 0:
        return restores.copy(), 0
    heads = np.flatnonzero(flags)
    labels = np.cumsum(flags) - 1
    r1 = np.minimum.reduceat(restores, heads)[labels]
    compressed = r1 + np.rint((1.0 - speedup) * (restores - r1)).astype(np.int64)
    floor = starts + 1
    clamped = compressed < floor
    new = np.where(clamped, floor, compressed)
    single = np.bincount(labels)[labels] == 1
    new[single] = restores[single]
    return new, int(np.count_nonzero(clamped & ~single))


def speed_restoration(event, s: float) -> list[int]:
    """Restore times of ``event``'s members (in member order) after a speedup ``s``."""
    if not 0.0 <= s < 1.0:
        raise ValueError("speedup must lie in [0, 1)")
    starts = np.array([o.start for o in event.outages], dtype=np.int64)
    restores = np.array([o.restore for o in event.outages], dtype=np.int64)
    flags = np.zeros(len(starts), dtype=bool)
    flags[0] = True
    new, _ = compress_restores(starts, restores, flags, s)
    return new.tolist()


def rerun_restoration(dataset: Dataset, spec: RestorationSpec = RestorationSpec(),
                      cost_config: CostConfig = CostConfig(), *,
                      max_gap: int = 3 * 3600) -> RerunResult:
    """Deterministic rerun with every event's restoration sped up by ``spec.speedup``."""
    arrays = OutageArrays.from_dataset(dataset, max_gap)
    base = baseline_metrics(arrays, cost_config)
    flags = new_event_flags(arrays.starts, arrays.restores)
    new_restores, n_clamped = compress_restores(arrays.starts, arrays.restores, flags, spec.speedup)
    areas = areas_from_flags(flags, arrays.starts, new_restores, arrays.customers)
    costs = cost_from_customer_seconds(areas, cost_config.beta)
    m = compute_metrics(costs, arrays.years, cost_config, c_large=base.c_large)
    after = {k: getattr(m, k) for k in METRICS}
    diff = {k: percent_diff(getattr(base, k), after[k]) for k in METRICS}
    n_single = int(np.count_nonzero(np.diff(np.append(np.flatnonzero(flags), len(flags))) == 1))
    if n_clamped:
        log.info("restore clamp applied to %d of %d outages", n_clamped, len(arrays))
    info = {"speedup": spec.speedup, "clamped_outages": n_clamped, "n_outages": len(arrays),
            "single_outage_events": n_single, "after_metrics": m.to_json()}
    return RerunResult("restore", base, after, diff, 1, info)
