"""Per-station backoff state machines.

Windowed policies (BEB, LB, LLB, STB, fixed) pick one uniformly random
slot in each contention window and leave once they transmit alone.
Best-of-k first estimates the batch size with dummy packets, then runs
fixed backoff with the estimate as its window.

All logarithms are base 2.
"""
from __future__ import annotations

import enum
import itertools
import math
import random
from typing import Iterator, Optional

from .domain import (
    Algorithm, ChannelState, OwnOutcome, ParameterError, PhaseTag,
    PolicySpec, SlotFeedback, StationAction,
)

#: Best-of-k rounds run i = 0..MAX_ROUND, transmitting with probability 2**-i.
MAX_ROUND = 10


class GrowthRule(enum.Enum):
    """Window growth factor r in W <- (1 + r) W."""

    DOUBLING = "r=1"
    LOG = "r=1/lg W"
    LOGLOG = "r=1/lg lg W"


class PolicyContractError(RuntimeError):
    """A policy was driven outside its protocol (e.g. stepped after finishing)."""


def next_window(rule: GrowthRule, w: int, cap: Optional[int] = None) -> int:
    """Size of the window that follows a window of ``w`` slots.

    Returns ``ceil((1 + r) * w)``. Where the growth factor's denominator
    is not positive (``lg w`` for LB at w = 1, ``lg lg w`` for LLB at
    w <= 2) the rule falls back to doubling.
    """
    if w < 1:
        raise ParameterError(f"window must be >= 1, got {w}")
    if rule is GrowthRule.DOUBLING:
        nxt = 2 * w
    else:
        denom = math.log2(w) if rule is GrowthRule.LOG else (
            math.log2(math.log2(w)) if w > 1 else 0.0)
        # ceil((1 + 1/d) w) == w + ceil(w / d) for integer w
        nxt = 2 * w if denom <= 0 else w + math.ceil(w / denom)
    if cap is not None:
        nxt = min(nxt, cap)
    return nxt


def _is_power_of_two(x: int) -> bool:
    return x >= 1 and x & (x - 1) == 0


def _stb_windows() -> Iterator[int]:
    outer = 2
    while True:
        w = outer
        while w >= 2:
            yield w
            w //= 2
        outer *= 2


def stb_schedule(up_to_outer: int) -> list[int]:
    """Sawtooth window sequence for outer sizes 2, 4, ..., ``up_to_outer``.

    Each outer size W contributes the backon run W, W/2, ..., 2.

    >>> stb_schedule(8)
    [2, 4, 2, 8, 4, 2]
    """
    if up_to_outer < 2 or not _is_power_of_two(up_to_outer):
        raise ParameterError(f"up_to_outer must be a power of two >= 2, got {up_to_outer}")
    levels = up_to_outer.bit_length() - 1
    count = sum(range(1, levels + 1))
    return list(itertools.islice(_stb_windows(), count))


def _llb_repeats(w: int) -> int:
    return max(1, math.floor(math.log2(math.log2(w)))) if w >= 4 else 1


def llb_repeated_schedule(up_to: int) -> list[int]:
    """Doubling windows 4, 8, ..., ``up_to``, each repeated floor(lg lg w) times."""
    if up_to < 4 or not _is_power_of_two(up_to):
        raise ParameterError(f"up_to must be a power of two >= 4, got {up_to}")
    out = []
    w = 4
    while w <= up_to:
        out.extend([w] * _llb_repeats(w))
        w *= 2
    return out


def _llb_repeated_windows() -> Iterator[int]:
    yield 1
    yield 2
    w = 4
    while True:
        for _ in range(_llb_repeats(w)):
            yield w
        w *= 2


def _growth_windows(rule: GrowthRule, cap: Optional[int]) -> Iterator[int]:
    w = 1 if cap is None else min(1, cap)
    while True:
        yield w
        w = next_window(rule, w, cap)


_RULES = {
    Algorithm.BEB: GrowthRule.DOUBLING,
    Algorithm.LB: GrowthRule.LOG,
    Algorithm.LLB_MONOTONE: GrowthRule.LOGLOG,
}


def window_sizes(spec: PolicySpec) -> Iterator[int]:
    """Infinite window-size sequence a windowed policy walks through."""
    cap = spec.window_cap
    if spec.algorithm in _RULES:
        return _growth_windows(_RULES[spec.algorithm], cap)
    if spec.algorithm is Algorithm.STB:
        base = _stb_windows()
    elif spec.algorithm is Algorithm.LLB_REPEATED:
        base = _llb_repeated_windows()
    elif spec.algorithm is Algorithm.FIXED:
        base = itertools.repeat(spec.param)
    else:
        raise ParameterError(f"{spec.algorithm.value} has no fixed window sequence")
    if cap is None:
        return base
    return (min(w, cap) for w in base)


class WindowedPolicy:
    """One station walking a sequence of contention windows.

    In every window the station transmits once, in a slot drawn
    uniformly at random. A collision only means it sits out the rest of
    the window; the next window starts on schedule.
    """

    phase = PhaseTag.CONTENTION_WINDOW

    def __init__(self, windows: Iterator[int], rng: random.Random):
        self._windows = windows
        self._rng = rng
        self.done = False
        self.windows_started = 0
        self._transmitted = False
        self._open_window()

    def _open_window(self) -> None:
        self.window = next(self._windows)
        self.position = 0
        self.chosen_slot = self._rng.randrange(self.window)
        self.windows_started += 1

    def step(self) -> StationAction:
        if self.done:
            raise PolicyContractError("stepped a station that already succeeded")
        self._transmitted = self.position == self.chosen_slot
        return StationAction.TRANSMIT if self._transmitted else StationAction.LISTEN

    def feedback(self, fb: SlotFeedback) -> None:
        if fb.own_outcome is OwnOutcome.SUCCESS:
            if not self._transmitted:
                raise PolicyContractError("success reported for a slot the station did not use")
            self.done = True
            return
        self.position += 1
        if self.position == self.window:
            self._open_window()


class BestOfKPolicy:
    """Size estimation with dummy packets, then fixed backoff.

    Round i lasts k slots; in each the station sends a dummy packet with
    probability 2**-i, otherwise it senses. Slots in which it sent count
    as busy. As soon as more than k/2 sensed slots of the current round
    were clear, the estimate is 2**i and the station switches to fixed
    backoff with that window from the next slot on. If no round
    triggers, the estimate is 2**MAX_ROUND.
    """

    def __init__(self, k: int, rng: random.Random, window_cap: Optional[int] = None):
        if k < 1:
            raise ParameterError(f"k must be >= 1, got {k}")
        self.k = k
        self._rng = rng
        self._cap = window_cap
        self.round = 0
        self.slot_in_round = 0
        self.clear_count = 0
        self.estimate: Optional[int] = None
        self.phase = PhaseTag.ESTIMATION
        self._sent = False
        self._fixed: Optional[WindowedPolicy] = None

    @property
    def done(self) -> bool:
        return self._fixed is not None and self._fixed.done

    @property
    def transmit_probability(self) -> float:
        return 2.0 ** -self.round

    def step(self) -> StationAction:
        if self._fixed is not None:
            return self._fixed.step()
        # round 0 sends with probability 1; no draw needed
        self._sent = self.round == 0 or self._rng.random() < self.transmit_probability
        return StationAction.TRANSMIT if self._sent else StationAction.LISTEN

    def feedback(self, fb: SlotFeedback) -> None:
        if self._fixed is not None:
            self._fixed.feedback(fb)
            return
        if not self._sent and fb.channel_state is ChannelState.CLEAR:
            self.clear_count += 1
        self.slot_in_round += 1
        if self.clear_count > self.k / 2:
            self._start_fixed(2 ** self.round)
        elif self.slot_in_round == self.k:
            self.round += 1
            self.slot_in_round = 0
            self.clear_count = 0
            if self.round > MAX_ROUND:
                self._start_fixed(2 ** MAX_ROUND)

    def _start_fixed(self, w: int) -> None:
        if self._cap is not None:
            w = min(w, self._cap)
        self.estimate = w
        self.phase = PhaseTag.CONTENTION_WINDOW
        self._fixed = WindowedPolicy(itertools.repeat(w), self._rng)


def make_policy(spec: PolicySpec, rng: random.Random):
    """Fresh per-station policy for ``spec`` drawing from ``rng``."""
    if spec.algorithm is Algorithm.BEST_OF_K:
        return BestOfKPolicy(spec.param, rng, spec.window_cap)
    return WindowedPolicy(window_sizes(spec), rng)


def estimate_distribution(n: int, k: int) -> dict[int, float]:
    """Exact law of the Best-of-k estimate for a batch of ``n`` stations.

    A slot is clear for a sensing station only if nobody sent, and a
    sender counts its own slot as busy, so all stations share one clear
    count and one estimate. The round-i trigger probability is the chance
    that some prefix of the k slots holds more than k/2 empty slots,
    which equals P[Binomial(k, q_i) > k/2] with q_i = (1 - 2**-i)**n.
    """
    from scipy.stats import binom

    need = k // 2 + 1
    out = {}
    survive = 1.0
    for i in range(MAX_ROUND + 1):
        q = (1.0 - 2.0 ** -i) ** n
        trigger = float(binom.sf(need - 1, k, q))
        out[2 ** i] = survive * trigger
        survive *= 1.0 - trigger
    out[2 ** MAX_ROUND] += survive
    return out
