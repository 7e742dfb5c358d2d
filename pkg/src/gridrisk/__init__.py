"""Large-event risk metrics for distribution-grid outage logs."""

from .events import ResilienceEvent, extract_events
from .ingest import Config, Dataset, OutageRecord, load_config, make_dataset
from .rerun import HardeningSpec, RestorationSpec, rerun_hardening, rerun_restoration
from .risk import CostConfig, RiskMetrics, compute_metrics, exceedance_curve
from .tailfit import InfiniteMeanError, TailFit, fit_tail, select_xmin

__version__ = "0.1.0"

__all__ = [
    "Config", "CostConfig", "Dataset", "HardeningSpec", "InfiniteMeanError", "OutageRecord",
    "ResilienceEvent", "RestorationSpec", "RiskMetrics", "TailFit", "compute_metrics",
    "exceedance_curve", "extract_events", "fit_tail", "load_config", "make_dataset",
    "rerun_hardening", "rerun_restoration", "select_xmin",
]
