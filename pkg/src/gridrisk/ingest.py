"""Loading, validation and filtering of outage logs and weather observations.

Timestamps are handled as integer UTC epoch seconds throughout the package.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)

SECONDS_PER_YEAR = 365.25 * 86400.0
MPH_TO_MS = 0.44704
EARTH_RADIUS_KM = 6371.0088

OUTAGE_COLUMNS = ("id", "start", "restore", "customers", "cause", "scheduled")
WEATHER_COLUMNS = ("station", "timestamp", "wind_speed")
STATION_COLUMNS = ("id", "lat", "lon")

_TRUE = {"1", "true", "t", "yes"}
_FALSE = {"0", "false", "f", "no"}


class ConfigError(Exception):
    """Input files or configuration are unusable (missing columns, bad keys)."""


class DataQualityError(Exception):
    """Too many rows were rejected for the run to continue."""


@dataclass(frozen=True)
class OutageRecord:
    id: str
    start: int
    restore: int
    customers: int
    cause: str = ""
    scheduled: bool = False
    station: str | None = None
    lat: float | None = None
    lon: float | None = None

    @property
    def duration(self) -> int:
        """Outage duration in seconds."""
        return self.restore - self.start


@dataclass(frozen=True)
class WeatherObservation:
    station: str
    timestamp: int
    wind_speed: float


@dataclass(frozen=True)
class Station:
    id: str
    lat: float
    lon: float


@dataclass(frozen=True)
class WindSeries:
    """Observations of one station, sorted with strictly increasing timestamps."""

    station: str
    times: np.ndarray
    speeds: np.ndarray

    def __len__(self) -> int:
        return len(self.times)

    @property
    def cadence(self) -> float:
        """Typical spacing between observations in seconds (median gap)."""
        if len(self.times) < 2:
            return 3600.0
        return float(np.median(np.diff(self.times)))


@dataclass
class Rejects:
    """Rows dropped while loading a file, with 1-based data row numbers."""

    rows: list[tuple[int, str]] = field(default_factory=list)
    total: int = 0

    def add(self, row: int, reason: str) -> None:
        self.rows.append((row, reason))

    @property
    def fraction(self) -> float:
        return len(self.rows) / self.total if self.total else 0.0


@dataclass
class Dataset:
    outages: list[OutageRecord]
    weather: dict[str, WindSeries]
    stations: list[Station]
    window_start: int
    window_end: int

    def __post_init__(self):
        if self.window_end <= self.window_start:
            raise ValueError("observation window must have positive length")

    @property
    def years_observed(self) -> float:
        return (self.window_end - self.window_start) / SECONDS_PER_YEAR


@dataclass
class Config:
    """Run configuration; the keys mirror the plain-text config file."""

    beta_usd_per_cust_hour: float = 370.2
    min_duration_s: int = 60
    wind_unit: str = "m/s"
    max_gap_s: int = 3 * 3600
    large_cost_percentile: float = 0.99
    c_large_usd: float | None = None
    n_tail_min: int = 10

    def __post_init__(self):
        if self.beta_usd_per_cust_hour <= 0:
            raise ConfigError("beta_usd_per_cust_hour must be positive")
        if not 0.0 < self.large_cost_percentile < 1.0:
            raise ConfigError("large_cost_percentile must lie in (0, 1)")
        if self.wind_unit not in ("m/s", "mph"):
            raise ConfigError(f"wind_unit must be 'm/s' or 'mph', got {self.wind_unit!r}")
        if self.min_duration_s < 0 or self.max_gap_s < 0:
            raise ConfigError("durations must be nonnegative")


_CONFIG_TYPES = {
    "beta_usd_per_cust_hour": float,
    "min_duration_s": int,
    "wind_unit": str,
    "max_gap_s": int,
    "large_cost_percentile": float,
    "c_large_usd": float,
    "n_tail_min": int,
}


def load_config(path: str | Path | None) -> Config:
    """Read ``key = value`` lines (``#`` starts a comment). Unknown keys are fatal."""
    if path is None:
        return Config()
    values = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":" if ":" in line else None
        if sep is None:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split(sep, 1))
        if key not in _CONFIG_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _CONFIG_TYPES[key](value)
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return Config(**values)


# ---------------------------------------------------------------- timestamps

def parse_timestamp(text: str) -> int:
    """ISO-8601 with an explicit offset or trailing ``Z`` -> UTC epoch seconds."""
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        raise ValueError(f"timestamp without UTC offset: {text!r}")
    return math.floor(dt.timestamp())


def format_timestamp(seconds: int) -> str:
    return datetime.fromtimestamp(int(seconds), tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in _TRUE:
        return True
    if t in _FALSE:
        return False
    raise ValueError(f"bad boolean {text!r}")


def _opt_float(text: str | None) -> float | None:
    if text is None or not text.strip():
        return None
    return float(text)


# ---------------------------------------------------------------- outages

def _check_columns(header: Sequence[str] | None, required: Iterable[str], path) -> None:
    missing = [c for c in required if c not in (header or ())]
    if missing:
        raise ConfigError(f"{path}: missing column(s) {', '.join(missing)}")


def read_outages(path: str | Path) -> tuple[list[OutageRecord], Rejects]:
    """Parse an outage CSV, collecting malformed rows instead of failing on them.

    Locations come from ``lat``/``lon`` columns or from a pre-assigned ``station``
    column; at least one of the two must be present.
    """
    rejects = Rejects()
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        _check_columns(header, OUTAGE_COLUMNS, path)
        has_coords = "lat" in header and "lon" in header
        if not has_coords and "station" not in header:
            raise ConfigError(f"{path}: need lat,lon columns or a station column")
        for rowno, row in enumerate(reader, 1):
            rejects.total += 1
            try:
                rec = OutageRecord(
                    id=row["id"].strip(),
                    start=parse_timestamp(row["start"]),
                    restore=parse_timestamp(row["restore"]),
                    customers=int(row["customers"]),
                    cause=(row["cause"] or "").strip(),
                    scheduled=_parse_bool(row["scheduled"]),
                    station=(row.get("station") or "").strip() or None,
                    lat=_opt_float(row.get("lat")),
                    lon=_opt_float(row.get("lon")),
                )
            except (ValueError, TypeError, AttributeError) as exc:
                rejects.add(rowno, f"unparseable: {exc}")
                continue
            if not rec.id:
                rejects.add(rowno, "empty id")
            elif rec.restore < rec.start:
                rejects.add(rowno, "negative duration")
            elif rec.customers < 0:
                rejects.add(rowno, "negative customers")
            elif rec.lat is not None and not -90 <= rec.lat <= 90:
                rejects.add(rowno, "latitude out of range")
            elif rec.lon is not None and not -180 <= rec.lon <= 180:
                rejects.add(rowno, "longitude out of range")
            else:
                records.append(rec)
    return records, rejects


def load_outages(path: str | Path, max_reject_fraction: float = 0.01) -> list[OutageRecord]:
    """Load outage records; fatal when the reject fraction reaches the limit."""
    records, rejects = read_outages(path)
    for rowno, reason in rejects.rows:
        log.warning("%s row %d rejected: %s", path, rowno, reason)
    if rejects.rows and rejects.fraction >= max_reject_fraction:
        raise DataQualityError(
            f"{path}: {len(rejects.rows)} of {rejects.total} rows rejected "
            f"({100 * rejects.fraction:.2f}%)"
        )
    return records


def write_outages(path: str | Path, records: Sequence[OutageRecord]) -> None:
    cols = list(OUTAGE_COLUMNS) + ["lat", "lon", "station"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in records:
            w.writerow([
                r.id, format_timestamp(r.start), format_timestamp(r.restore),
                r.customers, r.cause, int(r.scheduled),
                "" if r.lat is None else repr(r.lat),
                "" if r.lon is None else repr(r.lon),
                r.station or "",
            ])


def filter_unscheduled(records: Iterable[OutageRecord], min_duration: int = 60) -> list[OutageRecord]:
    return [r for r in records if not r.scheduled and r.restore - r.start >= min_duration]


# ---------------------------------------------------------------- weather, stations

def read_weather(path: str | Path, wind_unit: str = "m/s") -> tuple[list[WeatherObservation], Rejects]:
    scale = MPH_TO_MS if wind_unit == "mph" else 1.0
    rejects = Rejects()
    obs = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        _check_columns(reader.fieldnames, WEATHER_COLUMNS, path)
        for rowno, row in enumerate(reader, 1):
            rejects.total += 1
            try:
                o = WeatherObservation(
                    station=row["station"].strip(),
                    timestamp=parse_timestamp(row["timestamp"]),
                    wind_speed=float(row["wind_speed"]) * scale,
                )
            except (ValueError, TypeError, AttributeError) as exc:
                rejects.add(rowno, f"unparseable: {exc}")
                continue
            if not (o.wind_speed >= 0 and math.isfinite(o.wind_speed)):
                rejects.add(rowno, "negative or non-finite wind speed")
            else:
                obs.append(o)
    return obs, rejects


def build_weather(observations: Iterable[WeatherObservation]) -> dict[str, WindSeries]:
    """Group observations per station, sorted; duplicate timestamps keep the first seen."""
    by_station: dict[str, dict[int, float]] = {}
    for o in observations:
        by_station.setdefault(o.station, {}).setdefault(o.timestamp, o.wind_speed)
    series = {}
    for sid, obs in sorted(by_station.items()):
        times = np.array(sorted(obs), dtype=np.int64)
        speeds = np.array([obs[t] for t in times.tolist()], dtype=float)
        series[sid] = WindSeries(sid, times, speeds)
    return series


def write_weather(path: str | Path, weather: dict[str, WindSeries]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(WEATHER_COLUMNS)
        for sid, s in weather.items():
            for t, v in zip(s.times.tolist(), s.speeds.tolist()):
                w.writerow([sid, format_timestamp(t), repr(v)])


def read_stations(path: str | Path) -> list[Station]:
    stations = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        _check_columns(reader.fieldnames, STATION_COLUMNS, path)
        for rowno, row in enumerate(reader, 1):
            try:
                st = Station(row["id"].strip(), float(row["lat"]), float(row["lon"]))
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"{path} row {rowno}: {exc}") from None
            if not (-90 <= st.lat <= 90 and -180 <= st.lon <= 180):
                raise ConfigError(f"{path} row {rowno}: coordinates out of range")
            stations.append(st)
    ids = [s.id for s in stations]
    if len(set(ids)) != len(ids):
        raise ConfigError(f"{path}: duplicate station ids")
    return stations


def write_stations(path: str | Path, stations: Sequence[Station]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(STATION_COLUMNS)
        for s in stations:
            w.writerow([s.id, repr(s.lat), repr(s.lon)])


# ---------------------------------------------------------------- joins

def great_circle_km(lat1, lon1, lat2, lon2):
    """Haversine distance; broadcasts over numpy arrays."""
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dphi = p2 - p1
    dlmb = np.radians(np.asarray(lon2) - np.asarray(lon1))
    a = np.sin(dphi / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dlmb / 2) ** 2
    return 2 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def assign_stations(records: Sequence[OutageRecord], stations: Sequence[Station]) -> list[OutageRecord]:
    """Attach the nearest station to every record that carries coordinates.

    Ties go to the lexicographically smallest station id. Records without
    coordinates must already carry a station.
    """
    if not stations:
        raise ConfigError("empty station list")
    ordered = sorted(stations, key=lambda s: s.id)
    slat = np.array([s.lat for s in ordered])
    slon = np.array([s.lon for s in ordered])
    out = []
    for r in records:
        if r.lat is None or r.lon is None:
            if r.station is None:
                raise ValueError(f"outage {r.id} has neither coordinates nor a station")
            out.append(r)
            continue
        d = great_circle_km(r.lat, r.lon, slat, slon)
        out.append(replace(r, station=ordered[int(np.argmin(d))].id))
    return out


def _nearest_index(times: np.ndarray, t) -> np.ndarray:
    """Index of the observation nearest to each ``t``; ties go to the earlier one."""
    t = np.asarray(t, dtype=np.int64)
    hi = np.searchsorted(times, t, side="left").clip(0, len(times) - 1)
    lo = (hi - 1).clip(0, None)
    take_lo = np.abs(t - times[lo]) <= np.abs(times[hi] - t)
    return np.where(take_lo, lo, hi)


def wind_at(outage: OutageRecord, weather: dict[str, WindSeries], max_gap: int = 3 * 3600) -> float | None:
    """Wind speed at outage start from the assigned station, or None when unknown."""
    s = weather.get(outage.station) if outage.station is not None else None
    if s is None or len(s) == 0:
        return None
    i = int(_nearest_index(s.times, outage.start))
    if abs(int(s.times[i]) - outage.start) > max_gap:
        return None
    return float(s.speeds[i])


def winds_at(outages: Sequence[OutageRecord], weather: dict[str, WindSeries],
             max_gap: int = 3 * 3600) -> np.ndarray:
    """Vectorized :func:`wind_at`; unknown wind is NaN."""
    out = np.full(len(outages), np.nan)
    starts = np.array([o.start for o in outages], dtype=np.int64)
    stations = np.array([o.station or "" for o in outages], dtype=object)
    empty = []
    for sid in sorted(set(stations.tolist())):
        idx = np.flatnonzero(stations == sid)
        s = weather.get(sid)
        if s is None or len(s) == 0:
            empty.append(sid)
            continue
        j = _nearest_index(s.times, starts[idx])
        ok = np.abs(s.times[j] - starts[idx]) <= max_gap
        out[idx[ok]] = s.speeds[j[ok]]
    if empty:
        log.warning("no weather observations for station(s) %s; wind unknown", ", ".join(map(repr, empty)))
    return out


def make_dataset(outages: list[OutageRecord], weather: dict[str, WindSeries] | None = None,
                 stations: list[Station] | None = None,
                 window: tuple[int, int] | None = None) -> Dataset:
    """Bundle inputs; the window defaults to the span covered by outages and weather."""
    weather = weather or {}
    if window is None:
        lo = [o.start for o in outages] + [int(s.times[0]) for s in weather.values() if len(s)]
        hi = [o.restore for o in outages] + [int(s.times[-1]) for s in weather.values() if len(s)]
        if not lo:
            raise ValueError("cannot infer an observation window from empty inputs")
        window = (min(lo), max(hi))
    ds = Dataset(list(outages), weather, list(stations or []), int(window[0]), int(window[1]))
    bad = [o.id for o in ds.outages if o.start < ds.window_start or o.restore > ds.window_end]
    if bad:
        raise ValueError(f"{len(bad)} outage(s) fall outside the observation window, e.g. {bad[0]}")
    return ds


def select_station(dataset: Dataset, station_id: str) -> Dataset:
    """Restrict a dataset to one station area (outages and weather)."""
    outages = [o for o in dataset.outages if o.station == station_id]
    weather = {k: v for k, v in dataset.weather.items() if k == station_id}
    stations = [s for s in dataset.stations if s.id == station_id]
    return Dataset(outages, weather, stations, dataset.window_start, dataset.window_end)
