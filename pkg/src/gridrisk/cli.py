"""Command-line front end: validate -> events -> metrics -> rerun, plus synth."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import synth
from .events import extract_events
from .ingest import (
    ConfigError,
    DataQualityError,
    Dataset,
    assign_stations,
    build_weather,
    filter_unscheduled,
    format_timestamp,
    load_config,
    make_dataset,
    read_outages,
    read_stations,
    read_weather,
    select_station,
)
from .rerun import (
    METRICS,
    HardeningSpec,
    OutageArrays,
    RateCurveError,
    RestorationSpec,
    rerun_hardening,
    rerun_restoration,
)
from .risk import CostConfig, NoEventsError, compute_metrics, exceedance_curve
from .tailfit import InsufficientTailError

log = logging.getLogger("gridrisk")

SCHEMA = 1
EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
MAX_REJECT_FRACTION = 0.01


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- loading

@dataclass
class LoadReport:
    loaded: int
    rejected: list
    total_rows: int
    scheduled_removed: int
    short_removed: int
    unscheduled: int
    window_start: str | None = None
    window_end: str | None = None
    years_observed: float | None = None
    per_station: dict | None = None
    wind_unknown: int | None = None

    @property
    def reject_fraction(self) -> float:
        return len(self.rejected) / self.total_rows if self.total_rows else 0.0


def load_inputs(args, cfg) -> tuple[Dataset | None, LoadReport]:
    """Read, filter and join the input files; the dataset is None when no outages remain."""
    if not args.outages:
        raise UsageError("--outages is required")
    records, rejects = read_outages(args.outages)
    kept = filter_unscheduled(records, cfg.min_duration_s)
    n_sched = sum(r.scheduled for r in records)
    report = LoadReport(
        loaded=len(records), rejected=[list(r) for r in rejects.rows], total_rows=rejects.total,
        scheduled_removed=n_sched, short_removed=len(records) - n_sched - len(kept),
        unscheduled=len(kept),
    )
    weather = {}
    if args.weather:
        obs, w_rejects = read_weather(args.weather, cfg.wind_unit)
        for rowno, reason in w_rejects.rows:
            log.warning("%s row %d rejected: %s", args.weather, rowno, reason)
        weather = build_weather(obs)
    stations = read_stations(args.stations) if args.stations else []
    if stations:
        kept = assign_stations(kept, stations)
    if args.station:
        kept = [o for o in kept if o.station == args.station]
    if not kept:
        return None, report
    ds = make_dataset(kept, weather, stations)
    if args.station:
        ds = select_station(ds, args.station)
    report.window_start = format_timestamp(ds.window_start)
    report.window_end = format_timestamp(ds.window_end)
    report.years_observed = ds.years_observed
    counts: dict[str, int] = {}
    for o in ds.outages:
        counts[o.station or ""] = counts.get(o.station or "", 0) + 1
    report.per_station = dict(sorted(counts.items()))
    if weather:
        arrays = OutageArrays.from_dataset(ds, cfg.max_gap_s)
        report.wind_unknown = int(np.isnan(arrays.winds).sum())
    return ds, report


def _require_quality(report: LoadReport) -> None:
    if report.rejected and report.reject_fraction >= MAX_REJECT_FRACTION:
        raise DataQualityError(
            f"{len(report.rejected)} of {report.total_rows} outage rows rejected "
            f"({100 * report.reject_fraction:.2f}% >= {100 * MAX_REJECT_FRACTION:.0f}%)")


def _load_checked(args, cfg) -> Dataset:
    ds, report = load_inputs(args, cfg)
    _require_quality(report)
    if ds is None:
        raise NoEventsError("no events: no unscheduled outages remain after filtering")
    return ds


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _fmt(v, digits=4):
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.{digits}g}"
    return str(v)


# ---------------------------------------------------------------- commands

def cmd_validate(args, cfg) -> int:
    ds, report = load_inputs(args, cfg)
    doc = {"schema": SCHEMA, **asdict(report), "reject_fraction": report.reject_fraction}
    print(f"rows read         {report.total_rows}")
    print(f"rejected          {len(report.rejected)} ({100 * report.reject_fraction:.2f}%)")
    for rowno, reason in report.rejected[:20]:
        print(f"  row {rowno}: {reason}")
    print(f"scheduled removed {report.scheduled_removed}")
    print(f"short removed     {report.short_removed}")
    print(f"unscheduled       {report.unscheduled}")
    if ds is not None:
        print(f"window            {report.window_start} .. {report.window_end} "
              f"({report.years_observed:.3f} years)")
        for sid, n in report.per_station.items():
            print(f"  station {sid or '(none)'}: {n} outages")
        if report.wind_unknown is not None:
            print(f"wind unknown      {report.wind_unknown}")
    if args.out_dir:
        (_out_dir(args) / "validate.json").write_text(_dump(doc), encoding="utf-8")
    if ds is None:
        print("no events", file=sys.stderr)
        return EXIT_DATA
    if report.rejected and report.reject_fraction >= MAX_REJECT_FRACTION:
        print("too many rejected rows", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def cmd_events(args, cfg) -> int:
    ds = _load_checked(args, cfg)
    events = extract_events(ds.outages)
    fh = open(_out_dir(args) / "events.csv", "w", newline="", encoding="utf-8") if args.out_dir else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["event_id", "start", "end", "n_outages", "area_cust_hours"])
        for e in events:
            w.writerow([e.event_id, format_timestamp(e.start), format_timestamp(e.end),
                        e.n_outages, repr(e.area)])
    finally:
        if fh is not sys.stdout:
            fh.close()
    log.info("%d events from %d outages", len(events), len(ds.outages))
    return EXIT_OK


def metrics_report(ds: Dataset, cfg, rate_multiplier: float = 1.0):
    """Metric JSON document plus the event costs it was computed from."""
    cost_cfg = CostConfig.from_config(cfg)
    arrays = OutageArrays.from_dataset(ds, cfg.max_gap_s)
    costs = arrays.event_costs(cost_cfg.beta)
    m = compute_metrics(costs, arrays.years, cost_cfg, rate_multiplier=rate_multiplier)
    m.check_identity()
    notes = []
    if m.alpha is None:
        notes.append("too few events above any cutoff for a tail fit")
    elif not m.mean_is_finite:
        notes.append(f"alpha = {m.alpha:.3f} <= 1: the fitted tail has an infinite mean; "
                     "mean-based large-event measures are not meaningful")
    doc = {
        "schema": SCHEMA,
        "metrics": m.to_json(),
        "tail_fit": None if m.alpha is None else
        {"alpha": m.alpha, "x_min_usd": m.x_min, "n_tail": m.n_tail, "ks": m.ks},
        "inputs": {"n_outages": len(arrays), "years_observed": arrays.years,
                   "beta_usd_per_cust_hour": cost_cfg.beta,
                   "large_cost_percentile": cost_cfg.large_cost_percentile},
        "warnings": notes,
    }
    return doc, costs


GNUPLOT = """\
set logscale xy
set xlabel "event cost (USD)"
set ylabel "P[C > c]"
set datafile separator ","
set key autotitle columnhead
plot "exceedance.csv" using 1:2 with points title "events", \\
     "tail_fit.csv" using 1:2 with lines title "power-law tail", \\
     "c_large.csv" using 1:2 with lines dashtype 2 title "c_large"
"""


def _write_plot_files(out: Path, costs, metrics: dict) -> None:
    curve = exceedance_curve(costs)
    xs, ps = curve.plot_points()
    with open(out / "exceedance.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["cost_usd", "exceedance_prob"])
        for x, p in zip(xs.tolist(), ps.tolist()):
            if x > 0 and p > 0:
                w.writerow([repr(x), repr(p)])
    with open(out / "tail_fit.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["cost_usd", "model_exceedance_prob"])
        if metrics["alpha"] is not None:
            alpha, x_min = metrics["alpha"], metrics["x_min"]
            weight = metrics["n_tail"] / curve.n
            for x in np.geomspace(x_min, curve.costs[-1], 50).tolist():
                w.writerow([repr(x), repr(weight * (x / x_min) ** -alpha)])
    with open(out / "c_large.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(["cost_usd", "exceedance_prob"])
        w.writerow([repr(metrics["c_large"]), repr(1.0 / curve.n)])
        w.writerow([repr(metrics["c_large"]), "1.0"])
    (out / "exceedance.gp").write_text(GNUPLOT, encoding="utf-8")


def cmd_metrics(args, cfg) -> int:
    ds = _load_checked(args, cfg)
    doc, costs = metrics_report(ds, cfg, args.rate_multiplier)
    for note in doc["warnings"]:
        print(f"warning: {note}", file=sys.stderr)
    m = doc["metrics"]
    rows = [("alpha", m["alpha"]), ("x_min (USD)", m["x_min"]), ("c_large (USD)", m["c_large"]),
            ("p_large", m["p_large"]), ("r_event (/yr)", m["r_event"]), ("f_large (/yr)", m["f_large"]),
            ("n_events", m["n_events"]), ("mean_is_finite", m["mean_is_finite"])]
    table = sys.stdout if args.out_dir else sys.stderr  # keep stdout pure JSON
    for name, v in rows:
        print(f"{name:<16}{_fmt(v)}", file=table)
    if args.out_dir:
        out = _out_dir(args)
        (out / "metrics.json").write_text(_dump(doc), encoding="utf-8")
        _write_plot_files(out, costs, m)
    else:
        sys.stdout.write(_dump(doc))
    return EXIT_OK


def rerun_document(result) -> dict:
    """Before / after / percent-diff rows, one per metric."""
    rows = []
    for key in METRICS:
        if result.scenario == "restore" and key == "r_event":
            continue  # unchanged by construction
        after = result.after[key]
        row = {"metric": key, "before": getattr(result.baseline, key)}
        if isinstance(after, dict):
            row["after"], row["after_sd"] = after["mean"], after["sd"]
        else:
            row["after"] = after
        row["percent_diff"] = result.percent_diff[key]
        rows.append(row)
    return {"schema": SCHEMA, "scenario": result.scenario, "n_samples": result.n_samples,
            "table": rows, "baseline": result.baseline.to_json(), "info": result.info}


def cmd_rerun(args, cfg) -> int:
    ds = _load_checked(args, cfg)
    cost_cfg = CostConfig.from_config(cfg)
    if args.scenario == "harden":
        spec = HardeningSpec(reduction=args.reduction, n_samples=args.samples, seed=args.seed,
                             mode={"mult": "multiplicative", "shift": "shift"}[args.mode],
                             refit_xmin_per_sample=not args.fix_xmin)
        result = rerun_hardening(ds, spec, cost_cfg, bin_width=args.bin_width,
                                 max_gap=cfg.max_gap_s, keep_samples=bool(args.per_sample),
                                 workers=args.workers)
    else:
        result = rerun_restoration(ds, RestorationSpec(args.speedup), cost_cfg, max_gap=cfg.max_gap_s)
    doc = rerun_document(result)
    table = sys.stdout if args.out_dir else sys.stderr
    print(f"{'Metric':<10}{'Before':>12}{'After':>12}{'% diff.':>10}", file=table)
    for row in doc["table"]:
        pd = row["percent_diff"]
        print(f"{row['metric']:<10}{_fmt(row['before']):>12}{_fmt(row['after']):>12}"
              f"{'-' if pd is None else f'{pd:.1f}%':>10}", file=table)
    if args.out_dir:
        (_out_dir(args) / f"rerun_{args.scenario}.json").write_text(_dump(doc), encoding="utf-8")
    else:
        sys.stdout.write(_dump(doc))
    if args.per_sample and result.per_sample is not None:
        with open(args.per_sample, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=list(result.per_sample[0]), lineterminator="\r\n")
            w.writeheader()
            for r in result.per_sample:
                w.writerow({k: "" if v is None else v for k, v in r.items()})
    return EXIT_OK


def cmd_synth(args, cfg) -> int:
    if not args.out_dir:
        raise UsageError("synth needs --out-dir")
    spec = synth.preset(args.preset, seed=args.seed if args.seed is not None else 2024)
    paths = synth.write_dataset(spec, args.out_dir)
    for kind, p in paths.items():
        print(f"{kind:<9}{p}")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _global_flags(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = argparse.SUPPRESS if suppress else None
    p.add_argument("--config", default=d, help="plain-text key = value config file")
    p.add_argument("--station", default=d, help="restrict the analysis to one station area")
    p.add_argument("--out-dir", default=d, help="directory for JSON/CSV outputs")
    p.add_argument("--seed", type=int, default=d, help="random seed (rerun harden, synth)")
    p.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS if suppress else 0)


def _input_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--outages", help="outage CSV")
    p.add_argument("--weather", help="weather CSV (station,timestamp,wind_speed)")
    p.add_argument("--stations", help="station CSV (id,lat,lon)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gridrisk", description=__doc__)
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        _global_flags(p, suppress=True)
        p.set_defaults(func=func)
        return p

    p = add("validate", cmd_validate, "check input files and report counts")
    _input_flags(p)
    p = add("events", cmd_events, "extract resilience events as CSV")
    _input_flags(p)
    p = add("metrics", cmd_metrics, "large-event risk metrics and exceedance curve")
    _input_flags(p)
    p.add_argument("--rate-multiplier", type=float, default=1.0,
                   help="scale the annual event rate when reporting f_large")

    p = add("rerun", cmd_rerun, "rerun history with an investment")
    scen = p.add_subparsers(dest="scenario", required=True, parser_class=_Parser)
    h = scen.add_parser("harden", help="wind hardening (Monte-Carlo outage thinning)")
    _global_flags(h, suppress=True)
    _input_flags(h)
    h.add_argument("--reduction", type=float, default=0.10)
    h.add_argument("--samples", type=int, default=2000)
    h.add_argument("--mode", choices=("mult", "shift"), default="mult")
    h.add_argument("--fix-xmin", action="store_true", help="keep the baseline x_min in every sample")
    h.add_argument("--bin-width", type=float, default=1.0, help="rate-curve wind bin width (m/s)")
    h.add_argument("--workers", type=int, default=None)
    h.add_argument("--per-sample", help="write per-sample metrics to this CSV")
    r = scen.add_parser("restore", help="faster restoration (restore-time compression)")
    _global_flags(r, suppress=True)
    _input_flags(r)
    r.add_argument("--speedup", type=float, default=0.10)
    r.set_defaults(per_sample=None)

    p = add("synth", cmd_synth, "write a synthetic dataset")
    p.add_argument("--preset", default="paper-scale", choices=sorted(synth.PRESETS))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "rerun" and args.scenario == "harden" and args.seed is None:
        args.seed = 0
    try:
        cfg = load_config(args.config)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")  # per-sample tail warnings; summarized in reports
            return args.func(args, cfg)
    except (UsageError, ConfigError, ValueError) as exc:
        if isinstance(exc, (NoEventsError, InsufficientTailError, RateCurveError)):
            print(f"gridrisk: {exc}", file=sys.stderr)
            return EXIT_DATA
        print(f"gridrisk: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataQualityError as exc:
        print(f"gridrisk: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"gridrisk: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
