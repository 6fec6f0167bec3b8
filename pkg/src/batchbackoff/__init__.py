"""Single-batch contention resolution: backoff policies on a slotted
channel, collision-aware timing costs and a seeded experiment harness."""

__version__ = "0.1.0"

from .domain import (  # noqa: E402
    Algorithm, ParameterError, PolicySpec, RunStats, SlotRecord, TimingParams,
)
from .engine import TrialConfig, Trace, run_half, run_trial, run_windowed, simulate  # noqa: E402
from .costmodel import (  # noqa: E402
    CostBreakdown, PacketShape, decompose, detailed_total_time, simple_total_time,
    transmission_time,
)
from .harness import SweepSpec, fit_trend, percent_delta, run_sweep  # noqa: E402

__all__ = [
    "Algorithm", "CostBreakdown", "PacketShape", "ParameterError", "PolicySpec",
    "RunStats", "SlotRecord", "SweepSpec", "TimingParams", "Trace", "TrialConfig",
    "decompose", "detailed_total_time", "fit_trend", "percent_delta", "run_half",
    "run_sweep", "run_trial", "run_windowed", "simple_total_time", "simulate",
    "transmission_time",
]
