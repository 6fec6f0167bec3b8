"""Slotted channel for a single batch of n stations.

Two simulators share the policy definitions:

``run_trial``
    steps every active station's policy once per slot, classifies the
    transmitter set (0 = empty, 1 = success, >= 2 = collision), feeds
    the result back and records a :class:`SlotRecord` per slot.

``run_windowed``
    a vectorised balls-into-bins version for batches in the tens of
    thousands. It relies on every station starting at slot 0, which
    keeps window boundaries shared by all active stations, and draws a
    whole window at once. It yields the same :class:`RunStats` law as
    ``run_trial`` (checked statistically in the tests) but no trace.

Randomness: ``run_trial`` gives station ``i`` its own stream derived
from ``(seed, i)`` (see :func:`station_stream`); ``run_windowed`` uses
one stream per trial seeded by ``seed``.
"""
from __future__ import annotations

import functools
import itertools
import json
import random
from dataclasses import dataclass
from typing import IO, Iterable, Optional

import numpy as np

from .domain import (
    Algorithm, ChannelState, OutcomeKind, OwnOutcome, ParameterError, PhaseTag,
    PolicySpec, RunStats, SlotFeedback, SlotRecord, StationAction, half_index,
)
from .policies import MAX_ROUND, make_policy, window_sizes

MAX_SLOTS_PER_STATION = 10_000


class RunawayTrial(RuntimeError):
    """A trial exceeded its ``max_slots`` safety bound."""


@dataclass(frozen=True)
class TrialConfig:
    n: int
    policy: PolicySpec
    seed: int
    max_slots: Optional[int] = None

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ParameterError(f"n must be >= 1, got {self.n}")
        if not 0 <= self.seed < 2 ** 64:
            raise ParameterError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.max_slots is None:
            object.__setattr__(self, "max_slots", MAX_SLOTS_PER_STATION * self.n)
        if self.max_slots < self.n:
            raise ParameterError(f"max_slots ({self.max_slots}) must be >= n ({self.n})")

    def to_dict(self) -> dict:
        return {"n": self.n, "policy": self.policy.to_dict(), "seed": self.seed,
                "max_slots": self.max_slots}

    @classmethod
    def from_dict(cls, d: dict) -> "TrialConfig":
        return cls(d["n"], PolicySpec.from_dict(d["policy"]), d["seed"], d.get("max_slots"))


def station_stream(seed: int, station: int) -> random.Random:
    """Independent stream for one station.

    Seeded with the bytes ``b"<seed>/<station>"``, which ``random.Random``
    hashes with SHA-512; the mapping is stable across runs and platforms.
    """
    return random.Random(f"{seed}/{station}".encode())


@dataclass(frozen=True)
class Trace:
    """Slot-by-slot record of one trial, indices contiguous from 0."""

    n: int
    records: tuple[SlotRecord, ...]
    estimates: Optional[tuple[int, ...]] = None

    @functools.cached_property
    def stats(self) -> RunStats:
        return count_metrics(self)


_LISTEN_CLEAR = SlotFeedback(OwnOutcome.NOT_SENT, ChannelState.CLEAR)
_LISTEN_BUSY = SlotFeedback(OwnOutcome.NOT_SENT, ChannelState.BUSY)
_SENT_OK = SlotFeedback(OwnOutcome.SUCCESS, ChannelState.BUSY)
_SENT_COLLIDED = SlotFeedback(OwnOutcome.COLLISION, ChannelState.BUSY)


def run_trial(config: TrialConfig) -> Trace:
    """Simulate one batch slot by slot until every station has succeeded."""
    n = config.n
    policies = [make_policy(config.policy, station_stream(config.seed, i)) for i in range(n)]
    active = list(range(n))
    records = []
    slot = 0
    transmit = StationAction.TRANSMIT
    estimation = PhaseTag.ESTIMATION
    while active:
        if slot >= config.max_slots:
            raise RunawayTrial(
                f"runaway trial: {len(active)} of {n} stations still active after "
                f"{slot} slots (policy {config.policy}, seed {config.seed})")
        tag = PhaseTag.CONTENTION_WINDOW
        tx = []
        for i in active:
            p = policies[i]
            if p.phase is estimation:
                tag = estimation
            if p.step() is transmit:
                tx.append(i)
        records.append(SlotRecord.of(slot, tx, tag))

        if not tx:
            for i in active:
                policies[i].feedback(_LISTEN_CLEAR)
        else:
            sent = _SENT_OK if len(tx) == 1 else _SENT_COLLIDED
            txset = set(tx)
            for i in active:
                policies[i].feedback(sent if i in txset else _LISTEN_BUSY)
            remaining = [i for i in active if not policies[i].done]
            if len(remaining) != len(active):
                finished = set(active).difference(remaining)
                # only a lone data transmission can complete a station
                if tag is estimation or len(tx) != 1 or finished != txset:
                    raise AssertionError(
                        f"slot {slot}: stations {sorted(finished)} finished with "
                        f"transmitters {tx} in a {tag.value} slot")
                active = remaining
        slot += 1
    estimates = None
    if config.policy.algorithm is Algorithm.BEST_OF_K:
        estimates = tuple(p.estimate for p in policies)
    return Trace(n, tuple(records), estimates)


def count_metrics(trace: Trace) -> RunStats:
    """Aggregate a complete trace.

    Successes, collisions and ACK timeouts are counted over
    contention-window slots only; estimation slots carry dummy packets
    and are tallied separately.
    """
    acks = [0] * trace.n
    completions = []
    collisions = 0
    estimation_slots = 0
    cw_seen = 0
    cw_at_last_success = 0
    for rec in trace.records:
        if rec.phase_tag is PhaseTag.ESTIMATION:
            estimation_slots += 1
            continue
        cw_seen += 1
        kind = rec.outcome.kind
        if kind is OutcomeKind.SUCCESS:
            completions.append(rec.slot_index)
            cw_at_last_success = cw_seen
        elif kind is OutcomeKind.COLLISION:
            collisions += 1
            for i in rec.transmitters:
                acks[i] += 1
    if len(completions) != trace.n:
        raise ValueError(f"incomplete trace: {len(completions)} successes for n={trace.n}")
    return RunStats(
        n=trace.n,
        cw_slots=cw_at_last_success,
        disjoint_collisions=collisions,
        per_station_ack_timeouts=tuple(acks),
        completion_slots=tuple(completions),
        half_done_slot=completions[half_index(trace.n)],
        estimation_slots=estimation_slots,
        estimates=trace.estimates,
    )


def run_half(config: TrialConfig) -> int:
    """Slot index at which the ceil(n/2)-th station succeeded."""
    return run_trial(config).stats.half_done_slot


def check_trace(trace: Trace) -> None:
    """Assert the structural invariants of a finished trace."""
    winners = []
    for pos, rec in enumerate(trace.records):
        if rec.slot_index != pos:
            raise AssertionError(f"slot indices not contiguous at position {pos}")
        if rec.phase_tag is PhaseTag.CONTENTION_WINDOW and rec.outcome.kind is OutcomeKind.SUCCESS:
            winners.append(rec.outcome.station)
    if sorted(winners) != list(range(trace.n)):
        raise AssertionError("every station must succeed exactly once")
    last_win = max(i for i, r in enumerate(trace.records)
                   if r.phase_tag is PhaseTag.CONTENTION_WINDOW
                   and r.outcome.kind is OutcomeKind.SUCCESS)
    if last_win != len(trace.records) - 1:
        raise AssertionError("trace must end on the final success")
    done = set()
    for rec in trace.records:
        if done.intersection(rec.transmitters):
            raise AssertionError(f"slot {rec.slot_index}: a finished station transmitted")
        if rec.phase_tag is PhaseTag.CONTENTION_WINDOW and rec.outcome.kind is OutcomeKind.SUCCESS:
            done.add(rec.outcome.station)


# ---------------------------------------------------------------------------
# Window-level simulator


def _estimate_size(rng: np.random.Generator, n: int, k: int) -> tuple[int, int]:
    """Best-of-k estimation on a shared channel; returns (estimate, slots used)."""
    used = 0
    for i in range(MAX_ROUND + 1):
        p = 2.0 ** -i
        clear = 0
        for _ in range(k):
            used += 1
            if rng.binomial(n, p) == 0:
                clear += 1
            if clear > k / 2:
                return 2 ** i, used
    return 2 ** MAX_ROUND, used


def run_windowed(config: TrialConfig) -> RunStats:
    """Simulate one batch a whole window at a time."""
    spec = config.policy
    n = config.n
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    ids = np.arange(n)
    acks = np.zeros(n, dtype=np.int64)
    done_at = []
    collisions = 0
    slot = 0
    cw = 0
    estimation_slots = 0
    estimates = None
    if spec.algorithm is Algorithm.BEST_OF_K:
        w, estimation_slots = _estimate_size(rng, n, spec.param)
        if spec.window_cap is not None:
            w = min(w, spec.window_cap)
        estimates = (w,) * n
        slot = estimation_slots
        windows: Iterable[int] = itertools.repeat(w)
    else:
        windows = window_sizes(spec)

    for w in windows:
        if slot >= config.max_slots:
            raise RunawayTrial(
                f"runaway trial: {ids.size} of {n} stations still active after "
                f"{slot} slots (policy {spec}, seed {config.seed})")
        picks = rng.integers(0, w, size=ids.size)
        counts = np.bincount(picks, minlength=w)
        won = counts[picks] == 1
        lost = ~won
        acks[ids[lost]] += 1
        collisions += int(np.count_nonzero(counts >= 2))
        won_slots = np.sort(picks[won])
        done_at.append(slot + won_slots)
        ids = ids[lost]
        if ids.size == 0:
            last = int(won_slots[-1]) + 1
            if slot + last > config.max_slots:
                raise RunawayTrial(f"runaway trial: finished past max_slots={config.max_slots}")
            cw += last
            break
        slot += w
        cw += w

    completion = np.concatenate(done_at)
    return RunStats(
        n=n,
        cw_slots=cw,
        disjoint_collisions=collisions,
        per_station_ack_timeouts=tuple(acks.tolist()),
        completion_slots=tuple(completion.tolist()),
        half_done_slot=int(completion[half_index(n)]),
        estimation_slots=estimation_slots,
        estimates=estimates,
    )


ENGINES = ("slot", "window")


def simulate(config: TrialConfig, engine: str = "slot") -> RunStats:
    if engine == "slot":
        return run_trial(config).stats
    if engine == "window":
        return run_windowed(config)
    raise ParameterError(f"unknown engine {engine!r}; expected one of {ENGINES}")


# ---------------------------------------------------------------------------
# Trace export: one JSON object per line, in slot order, transmitters sorted.


def write_trace(trace: Trace, fp: IO[str]) -> None:
    for rec in trace.records:
        fp.write(json.dumps(rec.to_dict(), sort_keys=True, separators=(",", ":")))
        fp.write("\n")


def read_trace(fp: IO[str], n: Optional[int] = None) -> Trace:
    """Parse a trace written by :func:`write_trace`.

    ``n`` defaults to the number of contention-window successes.
    """
    records = tuple(SlotRecord.from_dict(json.loads(line)) for line in fp if line.strip())
    if n is None:
        n = sum(1 for r in records
                if r.phase_tag is PhaseTag.CONTENTION_WINDOW
                and r.outcome.kind is OutcomeKind.SUCCESS)
    return Trace(n, records)
