"""Wall-clock cost of a batch under 802.11-style collision detection.

Two models:

* ``simple_total_time``: ``C * (P + preamble) + W * slot``, where C is
  the number of disjoint collisions and W the number of CW slots. It
  ignores inter-frame spaces, ACK timeouts and successful transmissions,
  so it is a lower-bound style estimate.
* ``detailed_total_time``: charges every slot of a trace by its outcome.

Detailed per-record charges (P = transmission time)::

    empty CW slot     slot
    success           preamble + P + SIFS + ACK + DIFS
    collision         preamble + P + ACK timeout + DIFS
    estimation slot   ESTIMATION_SLOT_US

A collision record is charged once however many stations took part.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Union

from .domain import ParameterError, RunStats, TimingParams
from .engine import Trace

#: Duration of one dummy-packet slot during Best-of-k size estimation.
ESTIMATION_SLOT_US = 35.0
MIN_PAYLOAD_BYTES = 12


@dataclass(frozen=True)
class PacketShape:
    payload_bytes: int = 64
    overhead_bytes: int = 64

    def __post_init__(self) -> None:
        if self.payload_bytes < MIN_PAYLOAD_BYTES:
            raise ParameterError(
                f"payload_bytes must be >= {MIN_PAYLOAD_BYTES}, got {self.payload_bytes}")
        if self.overhead_bytes < 0:
            raise ParameterError(f"overhead_bytes must be >= 0, got {self.overhead_bytes}")

    @property
    def total_bytes(self) -> int:
        return self.payload_bytes + self.overhead_bytes

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PacketShape":
        return cls(**d)


@dataclass(frozen=True)
class CostBreakdown:
    """Total time split into components, all in microseconds.

    ``transmission_time_us`` and ``ack_timeout_time_us`` cover collision
    events only. ``success_overhead_us`` holds the full charge of
    successful exchanges plus the DIFS that follows each collision.
    """

    transmission_time_us: float
    ack_timeout_time_us: float
    cw_slot_time_us: float
    success_overhead_us: float
    estimation_time_us: float

    @property
    def total_us(self) -> float:
        return (self.transmission_time_us + self.ack_timeout_time_us + self.cw_slot_time_us
                + self.success_overhead_us + self.estimation_time_us)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["total_us"] = self.total_us
        return {k: round(v, 2) for k, v in d.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "CostBreakdown":
        d = {k: v for k, v in d.items() if k != "total_us"}
        return cls(**d)


def transmission_time(shape: PacketShape, params: TimingParams) -> float:
    """Air time of one frame in microseconds, preamble excluded."""
    return shape.total_bytes * 8 / params.data_rate_mbps


def simple_total_time(collisions: float, cw_slots: float, packet_us: float,
                      params: TimingParams) -> float:
    if collisions < 0 or cw_slots < 0:
        raise ParameterError("collision and slot counts must be nonnegative")
    return collisions * (packet_us + params.preamble_us) + cw_slots * params.slot_us


def _charge(empty: int, successes: int, collisions: int, estimation: int,
            shape: PacketShape, params: TimingParams) -> CostBreakdown:
    p = transmission_time(shape, params)
    success_event = params.preamble_us + p + params.sifs_us + params.ack_duration_us + params.difs_us
    return CostBreakdown(
        transmission_time_us=collisions * (params.preamble_us + p),
        ack_timeout_time_us=collisions * params.ack_timeout_us,
        cw_slot_time_us=empty * params.slot_us,
        success_overhead_us=successes * success_event + collisions * params.difs_us,
        estimation_time_us=estimation * ESTIMATION_SLOT_US,
    )


def _stats_of(run: Union[Trace, RunStats]) -> RunStats:
    return run.stats if isinstance(run, Trace) else run


def decompose(run: Union[Trace, RunStats], shape: PacketShape,
              params: TimingParams) -> CostBreakdown:
    """Per-component cost of a finished trial.

    Accepts a trace or its ``RunStats``; the charges depend only on the
    counts of empty, success, collision and estimation slots.
    """
    s = _stats_of(run)
    return _charge(s.empty_cw_slots, s.n, s.disjoint_collisions, s.estimation_slots,
                   shape, params)


def detailed_total_time(run: Union[Trace, RunStats], shape: PacketShape,
                        params: TimingParams) -> CostBreakdown:
    return decompose(run, shape, params)


def worst_station_ack_wait(run: Union[Trace, RunStats], params: TimingParams) -> float:
    """Time the most-collided station spent waiting out ACK timeouts."""
    return _stats_of(run).max_ack_timeouts * params.ack_timeout_us


def simple_time_of(run: Union[Trace, RunStats], shape: PacketShape,
                   params: TimingParams) -> float:
    s = _stats_of(run)
    return simple_total_time(s.disjoint_collisions, s.cw_slots,
                             transmission_time(shape, params), params)
