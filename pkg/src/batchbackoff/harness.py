"""Seeded trial batteries, robust summaries and trend fits.

A sweep runs ``trials`` independent trials for every (n, policy) pair.
Trial seeds come from the root seed through ``derive_seed`` so results
do not depend on worker count or on the order policies are listed in.
Each metric is summarised by its median after outlier removal, with a
bootstrap 95% interval.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from scipy import stats as sps

from . import __version__
from .costmodel import (
    PacketShape, decompose, simple_time_of, worst_station_ack_wait,
)
from .domain import ParameterError, PolicySpec, RunStats, TimingParams
from .engine import ENGINES, TrialConfig, simulate

log = logging.getLogger(__name__)

BOOTSTRAP_RESAMPLES = 2000
OUTLIER_SPREAD = 1.5


class TrialError(RuntimeError):
    """A trial inside a sweep failed; the message names the trial."""


def derive_seed(root: int, *keys: int) -> int:
    """64-bit seed for the child stream ``keys`` of ``root``."""
    words = np.random.SeedSequence(root, spawn_key=tuple(keys)).generate_state(2)
    return int(words[0]) | (int(words[1]) << 32)


def policy_key(policy: PolicySpec) -> int:
    return zlib.crc32(str(policy).encode())


# ---------------------------------------------------------------------------
# Metrics


def _total(s, shape, params):
    return decompose(s, shape, params).total_us


def _estimation_fraction(s, shape, params):
    c = decompose(s, shape, params)
    return c.estimation_time_us / c.total_us


def _estimate_min(s, shape, params):
    return min(s.estimates) if s.estimates else float("nan")


def _estimates_at_least_n(s, shape, params):
    return sum(1 for e in s.estimates if e >= s.n) if s.estimates else float("nan")


METRICS: dict[str, Callable[[RunStats, PacketShape, TimingParams], float]] = {
    "cw_slots": lambda s, shape, params: s.cw_slots,
    "collisions": lambda s, shape, params: s.disjoint_collisions,
    "half_done_slot": lambda s, shape, params: s.half_done_slot,
    "max_ack_timeouts": lambda s, shape, params: s.max_ack_timeouts,
    "ack_wait_us": lambda s, shape, params: worst_station_ack_wait(s, params),
    "total_time_us": _total,
    "simple_time_us": simple_time_of,
    "estimation_slots": lambda s, shape, params: s.estimation_slots,
    "estimation_fraction": _estimation_fraction,
    "estimate_min": _estimate_min,
    "estimates_at_least_n": _estimates_at_least_n,
}

MODES = ("abstract", "dcf")


# ---------------------------------------------------------------------------
# Sweep definition


def parse_n_values(text: str) -> tuple[int, ...]:
    """``"50,100,150"`` or ``"start:stop:step"`` (stop inclusive)."""
    text = text.strip()
    if ":" in text:
        parts = [int(float(p)) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ParameterError(f"bad n range {text!r}; expected start:stop:step")
        start, stop, step = parts
        return tuple(range(start, stop + 1, step))
    return tuple(int(float(p)) for p in text.split(",") if p.strip())


@dataclass(frozen=True)
class SweepSpec:
    n_values: tuple[int, ...]
    policies: tuple[PolicySpec, ...]
    trials: int = 30
    shape: PacketShape = field(default_factory=PacketShape)
    params: TimingParams = field(default_factory=TimingParams)
    seed: int = 0
    metrics: tuple[str, ...] = ("cw_slots", "collisions")
    engine: str = "slot"
    mode: str = "abstract"

    def __post_init__(self) -> None:
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        object.__setattr__(self, "policies", tuple(self.policies))
        object.__setattr__(self, "metrics", tuple(self.metrics))
        if self.trials < 1:
            raise ParameterError(f"trials must be >= 1, got {self.trials}")
        if not self.n_values or any(n < 1 for n in self.n_values):
            raise ParameterError("n values must be positive and nonempty")
        if any(b <= a for a, b in zip(self.n_values, self.n_values[1:])):
            raise ParameterError("n values must be strictly increasing")
        if not self.policies:
            raise ParameterError("at least one policy is required")
        if len({str(p) for p in self.policies}) != len(self.policies):
            raise ParameterError("policies must be distinct")
        unknown = [m for m in self.metrics if m not in METRICS]
        if unknown:
            raise ParameterError(f"unknown metrics {unknown}; known: {sorted(METRICS)}")
        if self.engine not in ENGINES:
            raise ParameterError(f"engine must be one of {ENGINES}, got {self.engine!r}")
        if self.mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0 <= self.seed < 2 ** 64:
            raise ParameterError("seed must be a 64-bit unsigned integer")

    def effective_policy(self, policy: PolicySpec) -> PolicySpec:
        """DCF mode caps every window at ``params.max_window``."""
        if self.mode == "dcf":
            return policy.with_cap(self.params.max_window)
        return policy

    def to_dict(self) -> dict:
        return {
            "n_values": list(self.n_values),
            "policies": [str(p) for p in self.policies],
            "trials": self.trials,
            "shape": self.shape.to_dict(),
            "params": self.params.to_dict(),
            "seed": self.seed,
            "metrics": list(self.metrics),
            "engine": self.engine,
            "mode": self.mode,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepSpec":
        return cls(
            n_values=tuple(d["n_values"]),
            policies=tuple(PolicySpec.parse(p) for p in d["policies"]),
            trials=d.get("trials", 30),
            shape=PacketShape.from_dict(d.get("shape", {})),
            params=TimingParams.from_dict(d.get("params", {})),
            seed=d.get("seed", 0),
            metrics=tuple(d.get("metrics", ("cw_slots", "collisions"))),
            engine=d.get("engine", "slot"),
            mode=d.get("mode", "abstract"),
        )

    @classmethod
    def from_flat(cls, d: dict) -> "SweepSpec":
        """Build from a flat key-value config (CLI config files).

        Shape and timing fields sit at top level next to the sweep fields;
        list-valued keys also accept comma-separated strings.
        """
        d = dict(d)
        unknown = set(d) - _FLAT_KEYS
        if unknown:
            raise ParameterError(f"unknown config keys: {sorted(unknown)}")
        shape = {k: d.pop(k) for k in ("payload_bytes", "overhead_bytes") if k in d}
        params = {k: d.pop(k) for k in _PARAM_KEYS if k in d}
        if "packet_overhead_bytes" in params and "overhead_bytes" not in shape:
            shape["overhead_bytes"] = params["packet_overhead_bytes"]
        n_values = d.pop("n_values", None)
        if n_values is None:
            raise ParameterError("config needs n_values")
        if isinstance(n_values, str):
            n_values = parse_n_values(n_values)
        policies = d.pop("policies", None)
        if policies is None:
            raise ParameterError("config needs policies")
        if isinstance(policies, str):
            policies = policies.split(",")
        metrics = d.pop("metrics", ("cw_slots", "collisions"))
        if isinstance(metrics, str):
            metrics = metrics.split(",")
        return cls(n_values=tuple(n_values),
                   policies=tuple(PolicySpec.parse(p) for p in policies),
                   shape=PacketShape(**shape), params=TimingParams(**params),
                   metrics=tuple(m.strip() for m in metrics), **d)


_PARAM_KEYS = frozenset(TimingParams.__dataclass_fields__)
_FLAT_KEYS = (frozenset({"n_values", "policies", "trials", "seed", "metrics", "engine",
                         "mode", "payload_bytes", "overhead_bytes"}) | _PARAM_KEYS)


# ---------------------------------------------------------------------------
# Summaries


def remove_outliers(samples: Sequence[float]) -> tuple[np.ndarray, int]:
    """Drop points farther than 1.5 IQR from the median.

    Returns the kept samples and the number removed.
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        return x, 0
    q1, q3 = np.percentile(x, [25, 75])
    keep = np.abs(x - np.median(x)) <= OUTLIER_SPREAD * (q3 - q1)
    return x[keep], int(x.size - keep.sum())


def ci_95(samples: Sequence[float], seed: int = 0,
          resamples: int = BOOTSTRAP_RESAMPLES) -> tuple[float, float]:
    """Bootstrap percentile 95% interval for the median.

    The interval is widened if needed so it always contains the sample
    median.
    """
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise ParameterError(f"need at least 2 samples for an interval, got {x.size}")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, x.size, size=(resamples, x.size))
    meds = np.median(x[idx], axis=1)
    lo, hi = np.percentile(meds, [2.5, 97.5])
    med = float(np.median(x))
    return min(float(lo), med), max(float(hi), med)


@dataclass(frozen=True)
class Summary:
    n: int
    policy: str
    metric: str
    median: float
    lo: float
    hi: float
    trials: int
    outliers: int


def summarize(samples: Sequence[float], *, n: int, policy: str, metric: str,
              seed: int) -> Summary:
    """Median and 95% CI after outlier removal; NaN samples (metric not
    applicable to the policy) are ignored."""
    x = np.asarray(samples, dtype=float)
    x = x[~np.isnan(x)]
    if x.size == 0:
        nan = float("nan")
        return Summary(n, policy, metric, nan, nan, nan, len(samples), 0)
    kept, dropped = remove_outliers(x)
    med = float(np.median(kept))
    if kept.size >= 2:
        lo, hi = ci_95(kept, seed)
    else:
        lo = hi = med
    return Summary(n, policy, metric, med, lo, hi, len(samples), dropped)


# ---------------------------------------------------------------------------
# Running


def _one_trial(task):
    n, policy, seed, engine, metrics, shape, params = task
    try:
        stats = simulate(TrialConfig(n, policy, seed), engine)
    except Exception as exc:  # re-raised with the trial's identity
        raise TrialError(f"trial failed (n={n}, policy={policy}, seed={seed}): {exc}") from exc
    return tuple(float(METRICS[m](stats, shape, params)) for m in metrics)


@dataclass(frozen=True)
class SweepResult:
    spec: SweepSpec
    summaries: tuple[Summary, ...]
    samples: dict  # (n, policy, metric) -> tuple of per-trial values, trial order

    def get(self, n: int, policy, metric: str) -> Summary:
        key = (n, str(policy), metric)
        for s in self.summaries:
            if (s.n, s.policy, s.metric) == key:
                return s
        raise KeyError(key)

    def median(self, n: int, policy, metric: str) -> float:
        return self.get(n, policy, metric).median

    def series(self, policy, metric: str) -> tuple[list[int], list[float]]:
        ns = list(self.spec.n_values)
        return ns, [self.median(n, policy, metric) for n in ns]

    def ratio_series(self, num, den, metric: str) -> tuple[list[int], list[float]]:
        ns = list(self.spec.n_values)
        return ns, [self.median(n, num, metric) / self.median(n, den, metric) for n in ns]

    def summary_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "policy", "metric", "median", "lo", "hi", "trials", "outliers"])
        for s in self.summaries:
            w.writerow([s.n, s.policy, s.metric, repr(s.median), repr(s.lo), repr(s.hi),
                        s.trials, s.outliers])
        return buf.getvalue()

    def samples_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "policy", "metric", "trial", "value"])
        for (n, policy, metric), values in self.samples.items():
            for t, v in enumerate(values):
                w.writerow([n, policy, metric, t, repr(v)])
        return buf.getvalue()

    def manifest(self) -> dict:
        return {"spec": self.spec.to_dict(), "version": __version__, "root_seed": self.spec.seed}

    def write(self, out_dir: str, name: str = "sweep") -> list[str]:
        """Write ``<name>.csv``, ``<name>_samples.csv`` and ``<name>.json``."""
        os.makedirs(out_dir, exist_ok=True)
        paths = []
        for suffix, text in ((".csv", self.summary_csv()),
                             ("_samples.csv", self.samples_csv()),
                             (".json", json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n")):
            path = os.path.join(out_dir, name + suffix)
            with open(path, "w", newline="") as fp:
                fp.write(text)
            paths.append(path)
        return paths


def run_sweep(spec: SweepSpec, workers: Optional[int] = 1) -> SweepResult:
    """Run every (n, policy, trial) of ``spec``.

    ``workers`` > 1 fans trials out to a process pool; ``None`` uses all
    CPUs. Output is identical for any worker count.
    """
    tasks, keys = [], []
    for n in spec.n_values:
        for policy in spec.policies:
            eff = spec.effective_policy(policy)
            for t in range(spec.trials):
                seed = derive_seed(spec.seed, n, policy_key(policy), t)
                tasks.append((n, eff, seed, spec.engine, spec.metrics, spec.shape, spec.params))
                keys.append((n, str(policy)))
    if workers is None:
        workers = os.cpu_count() or 1
    log.info("sweep: %d trials on %d worker(s)", len(tasks), workers)
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_one_trial, tasks, chunksize=max(1, len(tasks) // (8 * workers))))
    else:
        rows = [_one_trial(t) for t in tasks]

    samples: dict = {}
    for (n, pol), row in zip(keys, rows):
        for metric, value in zip(spec.metrics, row):
            samples.setdefault((n, pol, metric), []).append(value)
    summaries = []
    for (n, pol, metric), values in samples.items():
        ci_seed = derive_seed(spec.seed, n, zlib.crc32(pol.encode()), zlib.crc32(metric.encode()))
        summaries.append(summarize(values, n=n, policy=pol, metric=metric, seed=ci_seed))
    return SweepResult(spec, tuple(summaries), {k: tuple(v) for k, v in samples.items()})


# ---------------------------------------------------------------------------
# Trends


@dataclass(frozen=True)
class TrendFit:
    """Least-squares line through a ratio series.

    ``slope_ci`` is the two-sided 95% t-interval of the slope;
    ``crossing`` is the n at which the series first passes 1, by linear
    interpolation in the fitted coordinate, or None if it never brackets 1.
    """

    name: str
    transform: str
    slope: float
    intercept: float
    slope_stderr: float
    slope_ci: tuple[float, float]
    crossing: Optional[float]

    @property
    def flat(self) -> bool:
        return self.slope_ci[0] <= 0.0 <= self.slope_ci[1]

    def to_dict(self) -> dict:
        return {"name": self.name, "transform": self.transform, "slope": self.slope,
                "intercept": self.intercept, "slope_stderr": self.slope_stderr,
                "slope_ci": list(self.slope_ci), "crossing": self.crossing}


_TRANSFORMS = {"linear": (lambda x: x, lambda u: u), "log": (math.log10, lambda u: 10 ** u)}


def fit_trend(ns: Sequence[float], ratios: Sequence[float], name: str = "ratio",
              transform: str = "log") -> TrendFit:
    if len(ns) != len(ratios):
        raise ParameterError("ns and ratios differ in length")
    if len(ns) < 4:
        raise ParameterError(f"too few points for a trend fit: {len(ns)} < 4")
    fwd, back = _TRANSFORMS[transform]
    x = np.array([fwd(float(n)) for n in ns])
    y = np.asarray(ratios, dtype=float)
    fit = sps.linregress(x, y)
    half = float(sps.t.ppf(0.975, len(x) - 2)) * float(fit.stderr)
    crossing = None
    for (x0, y0), (x1, y1) in zip(zip(x, y), zip(x[1:], y[1:])):
        if y0 == 1.0:
            crossing = back(x0)
            break
        if (y0 - 1.0) * (y1 - 1.0) < 0 or y1 == 1.0:
            crossing = back(x0 + (1.0 - y0) * (x1 - x0) / (y1 - y0))
            break
    return TrendFit(name, transform, float(fit.slope), float(fit.intercept),
                    float(fit.stderr), (float(fit.slope) - half, float(fit.slope) + half),
                    None if crossing is None else float(crossing))


def percent_delta(a: float, b: float) -> float:
    """100 (a - b) / b, with b the baseline (BEB)."""
    if b == 0:
        raise ParameterError("percent delta against a zero baseline")
    return 100.0 * (a - b) / b


def spread_ratio(values: Iterable[float]) -> float:
    v = list(values)
    return max(v) / min(v)
