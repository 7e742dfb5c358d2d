"""Grouping of overlapping outages into resilience events.

An event opens when an outage starts while every component is in service and
closes at the first instant when all of its outages are restored. A start
that coincides exactly with that instant opens a new event.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ingest import OutageRecord


@dataclass(frozen=True)
class ResilienceEvent:
    event_id: int
    outages: tuple[OutageRecord, ...]
    start: int
    end: int

    @property
    def n_outages(self) -> int:
        return len(self.outages)

    @property
    def customer_seconds(self) -> int:
        return sum(o.customers * (o.restore - o.start) for o in self.outages)

    @property
    def area(self) -> float:
        """Customer-hours lost."""
        return self.customer_seconds / 3600.0


@dataclass(frozen=True)
class PerformanceCurve:
    """Right-continuous step function: ``levels[i]`` customers out on ``[times[i], times[i+1])``."""

    times: np.ndarray
    levels: np.ndarray

    def __call__(self, t) -> np.ndarray:
        i = np.searchsorted(self.times, t, side="right") - 1
        return np.where(i >= 0, self.levels[np.clip(i, 0, None)], 0)

    def integral_hours(self) -> float:
        """Exact area under the curve in customer-hours."""
        cust_sec = int(np.sum(self.levels[:-1].astype(np.int64) * np.diff(self.times)))
        return cust_sec / 3600.0


def sweep_order(starts: np.ndarray, restores: np.ndarray) -> np.ndarray:
    """Processing order for the sweep: by start, longer outage first on equal starts."""
    return np.lexsort((-np.asarray(restores), np.asarray(starts)))


def new_event_flags(starts: np.ndarray, restores: np.ndarray) -> np.ndarray:
    """For outages already in sweep order, True where an outage opens a new event.

    An outage joins the running event iff it starts strictly before the
    latest restore seen so far.
    """
    n = len(starts)
    flags = np.ones(n, dtype=bool)
    if n > 1:
        running_end = np.maximum.accumulate(restores[:-1])
        flags[1:] = starts[1:] >= running_end
    return flags


def group_outages(starts, restores) -> np.ndarray:
    """Event label (0-based, ordered by event start) for each outage in input order."""
    starts = np.asarray(starts, dtype=np.int64)
    restores = np.asarray(restores, dtype=np.int64)
    order = sweep_order(starts, restores)
    labels_sorted = np.cumsum(new_event_flags(starts[order], restores[order])) - 1
    labels = np.empty(len(starts), dtype=np.int64)
    labels[order] = labels_sorted
    return labels


def areas_from_flags(flags: np.ndarray, starts: np.ndarray, restores: np.ndarray,
                     customers: np.ndarray) -> np.ndarray:
    """Per-event customer-seconds for sweep-ordered outages (exact integers)."""
    if len(flags) == 0:
        return np.zeros(0, dtype=np.int64)
    cs = customers.astype(np.int64) * (restores - starts).astype(np.int64)
    return np.add.reduceat(cs, np.flatnonzero(flags))


def extract_events(outages: Sequence[OutageRecord]) -> list[ResilienceEvent]:
    """Group outages into resilience events ordered by start time."""
    if not outages:
        return []
    starts = np.array([o.start for o in outages], dtype=np.int64)
    restores = np.array([o.restore for o in outages], dtype=np.int64)
    order = sweep_order(starts, restores)
    flags = new_event_flags(starts[order], restores[order])
    bounds = np.append(np.flatnonzero(flags), len(order))
    events = []
    for k in range(len(bounds) - 1):
        idx = order[bounds[k]:bounds[k + 1]]
        members = tuple(outages[i] for i in idx.tolist())
        events.append(ResilienceEvent(
            event_id=k,
            outages=members,
            start=int(starts[idx].min()),
            end=int(restores[idx].max()),
        ))
    return events


def performance_curve(event: ResilienceEvent) -> PerformanceCurve:
    deltas: dict[int, int] = {}
    for o in event.outages:
        deltas[o.start] = deltas.get(o.start, 0) + o.customers
        deltas[o.restore] = deltas.get(o.restore, 0) - o.customers
    times = np.array(sorted(deltas), dtype=np.int64)
    levels = np.cumsum([deltas[t] for t in times.tolist()]).astype(np.int64)
    return PerformanceCurve(times, levels)


def event_area(event: ResilienceEvent) -> float:
    """Customer-hours lost in the event: sum of customers x duration over members."""
    return event.area
