"""Core vocabulary shared by the policies, engine, cost model and harness.

Every type here is an immutable value with a canonical JSON form
(``to_dict`` / ``from_dict``), whose keys are the field names.
"""
from __future__ import annotations

import enum
import json
import math
import re
from dataclasses import asdict, dataclass
from typing import Any, Optional, Sequence


class ParameterError(ValueError):
    """A domain value violates one of its invariants."""


class StationAction(enum.Enum):
    TRANSMIT = "Transmit"
    LISTEN = "Listen"


class OwnOutcome(enum.Enum):
    NOT_SENT = "NotSent"
    SUCCESS = "Success"
    COLLISION = "Collision"


class ChannelState(enum.Enum):
    CLEAR = "Clear"
    BUSY = "Busy"


class PhaseTag(enum.Enum):
    CONTENTION_WINDOW = "ContentionWindow"
    ESTIMATION = "Estimation"


class OutcomeKind(enum.Enum):
    EMPTY = "Empty"
    SUCCESS = "Success"
    COLLISION = "Collision"


# ---------------------------------------------------------------------------
# Timing


@dataclass(frozen=True)
class TimingParams:
    """802.11g-style timing constants, all durations in microseconds.

    Defaults reproduce the experimental table (54 Mbit/s, 9 us slot,
    SIFS 16, DIFS 34, ACK timeout 75, preamble 20, 64 bytes overhead,
    window cap 1024). ``ack_duration_us`` is not part of that table and
    only matters to the detailed cost model's success events.
    ``max_window=None`` means unbounded windows.
    """

    slot_us: float = 9.0
    sifs_us: float = 16.0
    difs_us: float = 34.0
    ack_timeout_us: float = 75.0
    preamble_us: float = 20.0
    data_rate_mbps: float = 54.0
    packet_overhead_bytes: int = 64
    ack_duration_us: float = 24.0
    max_window: Optional[int] = 1024

    def __post_init__(self) -> None:
        validate(self)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TimingParams":
        return cls(**d)


_DURATIONS = ("slot_us", "sifs_us", "difs_us", "ack_timeout_us",
              "preamble_us", "ack_duration_us")


def validate(params: TimingParams) -> None:
    """Raise ParameterError naming the first violated invariant."""
    for name in _DURATIONS:
        value = getattr(params, name)
        if not (isinstance(value, (int, float)) and math.isfinite(value)) or value <= 0:
            raise ParameterError(f"nonpositive duration: {name}={value!r}")
    if not params.data_rate_mbps > 0:
        raise ParameterError(f"nonpositive rate: data_rate_mbps={params.data_rate_mbps!r}")
    if params.packet_overhead_bytes < 0:
        raise ParameterError(
            f"negative size: packet_overhead_bytes={params.packet_overhead_bytes!r}")
    if params.sifs_us >= params.difs_us:
        raise ParameterError(
            f"SIFS exceeds DIFS: sifs_us={params.sifs_us} difs_us={params.difs_us}")
    if params.max_window is not None and params.max_window < 1:
        raise ParameterError(f"nonpositive window cap: max_window={params.max_window!r}")


# ---------------------------------------------------------------------------
# Per-slot feedback and records


@dataclass(frozen=True)
class SlotFeedback:
    own_outcome: OwnOutcome
    channel_state: ChannelState

    def to_dict(self) -> dict[str, Any]:
        return {"own_outcome": self.own_outcome.value,
                "channel_state": self.channel_state.value}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SlotFeedback":
        return cls(OwnOutcome(d["own_outcome"]), ChannelState(d["channel_state"]))


@dataclass(frozen=True)
class Outcome:
    """Empty, Success(station) or Collision(count)."""

    kind: OutcomeKind
    station: Optional[int] = None
    count: int = 0

    @classmethod
    def classify(cls, transmitters: Sequence[int]) -> "Outcome":
        k = len(transmitters)
        if k == 0:
            return cls(OutcomeKind.EMPTY)
        if k == 1:
            return cls(OutcomeKind.SUCCESS, station=next(iter(transmitters)), count=1)
        return cls(OutcomeKind.COLLISION, count=k)

    def to_dict(self) -> dict[str, Any]:
        if self.kind is OutcomeKind.SUCCESS:
            return {"kind": self.kind.value, "station": self.station}
        if self.kind is OutcomeKind.COLLISION:
            return {"kind": self.kind.value, "count": self.count}
        return {"kind": self.kind.value}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Outcome":
        kind = OutcomeKind(d["kind"])
        if kind is OutcomeKind.SUCCESS:
            return cls(kind, station=int(d["station"]), count=1)
        if kind is OutcomeKind.COLLISION:
            return cls(kind, count=int(d["count"]))
        return cls(kind)


_KIND_BY_COUNT = (OutcomeKind.EMPTY, OutcomeKind.SUCCESS, OutcomeKind.COLLISION)


@dataclass(frozen=True)
class SlotRecord:
    slot_index: int
    transmitters: tuple[int, ...]
    outcome: Outcome
    phase_tag: PhaseTag = PhaseTag.CONTENTION_WINDOW

    def __post_init__(self) -> None:
        tx = self.transmitters
        if type(tx) is not tuple or any(a >= b for a, b in zip(tx, tx[1:])):
            tx = tuple(sorted(set(tx)))
            object.__setattr__(self, "transmitters", tx)
        expected = _KIND_BY_COUNT[min(len(tx), 2)]
        o = self.outcome
        if (o.kind is not expected
                or (expected is OutcomeKind.SUCCESS and o.station != tx[0])
                or (expected is OutcomeKind.COLLISION and o.count != len(tx))):
            raise ParameterError(
                f"slot {self.slot_index}: outcome {o} does not match transmitters {tx}")

    @classmethod
    def of(cls, slot_index: int, transmitters: Sequence[int],
           phase_tag: PhaseTag = PhaseTag.CONTENTION_WINDOW) -> "SlotRecord":
        tx = tuple(sorted(transmitters))
        return cls(slot_index, tx, Outcome.classify(tx), phase_tag)

    @property
    def is_collision(self) -> bool:
        return self.outcome.kind is OutcomeKind.COLLISION

    def to_dict(self) -> dict[str, Any]:
        return {"slot_index": self.slot_index,
                "transmitters": list(self.transmitters),
                "outcome": self.outcome.to_dict(),
                "phase_tag": self.phase_tag.value}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SlotRecord":
        return cls(int(d["slot_index"]), tuple(d["transmitters"]),
                   Outcome.from_dict(d["outcome"]), PhaseTag(d["phase_tag"]))


@dataclass(frozen=True)
class RunStats:
    """Per-trial aggregate.

    ``completion_slots[k]`` is the absolute slot index of the (k+1)-th
    success. ``cw_slots`` counts contention-window slots up to and
    including the final success; estimation slots are reported apart.
    """

    n: int
    cw_slots: int
    disjoint_collisions: int
    per_station_ack_timeouts: tuple[int, ...]
    completion_slots: tuple[int, ...]
    half_done_slot: int
    estimation_slots: int = 0
    estimates: Optional[tuple[int, ...]] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "per_station_ack_timeouts",
                           tuple(int(x) for x in self.per_station_ack_timeouts))
        object.__setattr__(self, "completion_slots",
                           tuple(int(x) for x in self.completion_slots))
        if self.estimates is not None:
            object.__setattr__(self, "estimates", tuple(int(x) for x in self.estimates))

    @property
    def max_ack_timeouts(self) -> int:
        return max(self.per_station_ack_timeouts, default=0)

    @property
    def empty_cw_slots(self) -> int:
        return self.cw_slots - self.n - self.disjoint_collisions

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["per_station_ack_timeouts"] = list(self.per_station_ack_timeouts)
        d["completion_slots"] = list(self.completion_slots)
        d["estimates"] = None if self.estimates is None else list(self.estimates)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "RunStats":
        est = d.get("estimates")
        return cls(n=d["n"], cw_slots=d["cw_slots"],
                   disjoint_collisions=d["disjoint_collisions"],
                   per_station_ack_timeouts=tuple(d["per_station_ack_timeouts"]),
                   completion_slots=tuple(d["completion_slots"]),
                   half_done_slot=d["half_done_slot"],
                   estimation_slots=d.get("estimation_slots", 0),
                   estimates=None if est is None else tuple(est))


def half_index(n: int) -> int:
    """Zero-based position of the ceil(n/2)-th success."""
    return (n + 1) // 2 - 1


# ---------------------------------------------------------------------------
# Policy selection


class Algorithm(enum.Enum):
    BEB = "beb"
    LB = "lb"
    LLB_MONOTONE = "llb"
    LLB_REPEATED = "llb-rep"
    STB = "stb"
    FIXED = "fixed"
    BEST_OF_K = "bestof"


_POLICY_RE = re.compile(r"^(beb|lb|llb|llb-rep|stb|fixed|bestof)(?::(\d+))?$")


@dataclass(frozen=True)
class PolicySpec:
    """Which backoff algorithm a station runs.

    ``param`` is the window size for ``fixed`` and ``k`` for ``bestof``.
    """

    algorithm: Algorithm
    param: Optional[int] = None
    window_cap: Optional[int] = None

    def __post_init__(self) -> None:
        if self.algorithm is Algorithm.FIXED and (self.param is None or self.param < 1):
            raise ParameterError(f"fixed backoff requires W >= 1, got {self.param!r}")
        if self.algorithm is Algorithm.BEST_OF_K and (self.param is None or self.param < 1):
            raise ParameterError(f"best-of-k requires k >= 1, got {self.param!r}")
        if self.algorithm not in (Algorithm.FIXED, Algorithm.BEST_OF_K) and self.param is not None:
            raise ParameterError(f"{self.algorithm.value} takes no parameter")
        if self.window_cap is not None and self.window_cap < 1:
            raise ParameterError(f"window_cap must be >= 1, got {self.window_cap!r}")

    @classmethod
    def parse(cls, text: str, window_cap: Optional[int] = None) -> "PolicySpec":
        m = _POLICY_RE.match(text.strip().lower())
        if not m:
            raise ParameterError(
                f"unknown policy {text!r}; expected beb, lb, llb, llb-rep, stb, fixed:W or bestof:k")
        name, arg = m.groups()
        algo = Algorithm(name)
        if algo in (Algorithm.FIXED, Algorithm.BEST_OF_K):
            if arg is None:
                raise ParameterError(f"policy {name!r} needs a parameter, e.g. {name}:4")
            return cls(algo, int(arg), window_cap)
        if arg is not None:
            raise ParameterError(f"policy {name!r} takes no parameter")
        return cls(algo, None, window_cap)

    def with_cap(self, cap: Optional[int]) -> "PolicySpec":
        """Return a copy capped at ``cap`` unless a cap is already set."""
        if self.window_cap is not None or cap is None:
            return self
        return PolicySpec(self.algorithm, self.param, cap)

    def __str__(self) -> str:
        if self.param is None:
            return self.algorithm.value
        return f"{self.algorithm.value}:{self.param}"

    def to_dict(self) -> dict[str, Any]:
        return {"algorithm": self.algorithm.value, "param": self.param,
                "window_cap": self.window_cap}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "PolicySpec":
        return cls(Algorithm(d["algorithm"]), d.get("param"), d.get("window_cap"))


def dumps(obj: Any) -> str:
    """Canonical JSON text for any domain value (sorted keys, compact)."""
    payload = obj.to_dict() if hasattr(obj, "to_dict") else obj
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


__all__ = [
    "Algorithm", "ChannelState", "Outcome", "OutcomeKind", "OwnOutcome",
    "ParameterError", "PhaseTag", "PolicySpec", "RunStats", "SlotFeedback",
    "SlotRecord", "StationAction", "TimingParams", "dumps", "half_index", "validate",
]
