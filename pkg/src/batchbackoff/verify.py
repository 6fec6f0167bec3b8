"""Named acceptance suites.

Each suite runs its sweeps, evaluates a list of checks and can write
every sweep plus a ``checks.csv`` table to an output directory. Suites:

``figures-small``  CW slots and total time at n = 150
``figures-large``  CW-slot ordering at n = 100,000
``claims``         collision growth of BEB, LB, LLB and STB up to 10^5
``bestofk``        Best-of-k estimates and total time
``model``          closed-form cost arithmetic and the exact-enumeration oracle
"""
from __future__ import annotations

import csv
import io
import itertools
import math
import os
from collections import Counter
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Callable, Optional

from .costmodel import PacketShape, simple_total_time, transmission_time
from .domain import PolicySpec, TimingParams
from .engine import TrialConfig, run_trial
from .harness import (
    SweepResult, SweepSpec, derive_seed, fit_trend, percent_delta, run_sweep, spread_ratio,
)

BEB, LB, LLB, STB = (PolicySpec.parse(p) for p in ("beb", "lb", "llb", "stb"))
BEST_OF_5 = PolicySpec.parse("bestof:5")

CLAIMS_N = (1_000, 3_000, 10_000, 30_000, 100_000)
CLAIMS_TRIALS = 200
LARGE_N = 100_000
LARGE_TRIALS = 50
SMALL_N = 150
SMALL_TRIALS = 30
BESTOFK_N = (50, 100, 150, 200)
BESTOFK_TRIALS = 20
ORACLE_TRIALS = 100_000
ORACLE_CASES = ((1, 1), (1, 2), (1, 3), (1, 4),
                (2, 2), (2, 3), (2, 4),
                (3, 2), (3, 3), (3, 4))


@dataclass(frozen=True)
class Check:
    criterion: str
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.criterion:>4}  {self.name}: {self.detail}"


@dataclass
class SuiteRun:
    suite: str
    checks: list
    sweeps: dict  # name -> SweepResult

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def table(self) -> str:
        return "\n".join(c.line() for c in self.checks)

    def checks_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["suite", "criterion", "name", "passed", "detail"])
        for c in self.checks:
            w.writerow([self.suite, c.criterion, c.name, int(c.passed), c.detail])
        return buf.getvalue()

    def write(self, out_dir: str) -> None:
        os.makedirs(out_dir, exist_ok=True)
        for name, result in self.sweeps.items():
            result.write(out_dir, name)
        with open(os.path.join(out_dir, f"{self.suite}_checks.csv"), "w", newline="") as fp:
            fp.write(self.checks_csv())


def _fmt(x: float) -> str:
    return f"{x:.4g}"


def _strictly_ordered(result: SweepResult, n: int, order, metric: str,
                      separated: bool) -> tuple[bool, str]:
    """Medians increase along ``order``; optionally with disjoint CIs."""
    rows = [result.get(n, p, metric) for p in order]
    ok = all(a.median < b.median for a, b in zip(rows, rows[1:]))
    if separated:
        ok = ok and all(a.hi < b.lo for a, b in zip(rows, rows[1:]))
    detail = " < ".join(f"{r.policy} {_fmt(r.median)} [{_fmt(r.lo)}, {_fmt(r.hi)}]" for r in rows)
    return ok, detail


# ---------------------------------------------------------------------------


def figures_small(seed: int, workers: Optional[int] = 1) -> SuiteRun:
    policies = (BEB, LB, LLB, STB)
    abstract = run_sweep(SweepSpec(
        (SMALL_N,), policies, SMALL_TRIALS, seed=seed,
        metrics=("cw_slots", "collisions", "half_done_slot", "max_ack_timeouts"),
        engine="slot", mode="abstract"), workers)
    total = {}
    for payload in (64, 1024):
        total[payload] = run_sweep(SweepSpec(
            (SMALL_N,), policies, SMALL_TRIALS, shape=PacketShape(payload), seed=seed,
            metrics=("total_time_us", "collisions", "cw_slots"), engine="slot", mode="dcf"),
            workers)

    checks = []
    beb_cw = abstract.median(SMALL_N, BEB, "cw_slots")
    checks.append(Check("1", "BEB CW slots at n=150 within 30% of 886",
                        abs(beb_cw - 886) <= 0.30 * 886, f"median {_fmt(beb_cw)}"))

    ok, detail = _strictly_ordered(abstract, SMALL_N, (STB, LB, LLB, BEB), "cw_slots", True)
    checks.append(Check("2", "CW slots STB < LB < LLB < BEB with separated CIs", ok, detail))

    deltas = {}
    for payload, res in total.items():
        ok, detail = _strictly_ordered(res, SMALL_N, (BEB, LLB, LB, STB), "total_time_us", False)
        checks.append(Check("7", f"total time BEB < LLB < LB < STB ({payload}B)", ok, detail))
        base = res.median(SMALL_N, BEB, "total_time_us")
        deltas[payload] = {str(p): percent_delta(res.median(SMALL_N, p, "total_time_us"), base)
                           for p in (LLB, LB, STB)}
    llb = deltas[64]["llb"]
    checks.append(Check("7", "LLB total-time delta vs BEB in (0%, 30%) at 64B",
                        0 < llb < 30, f"{llb:+.1f}%"))
    grow = all(deltas[1024][p] > deltas[64][p] for p in ("lb", "stb"))
    checks.append(Check("7", "LB and STB deltas larger at 1024B than at 64B", grow,
                        ", ".join(f"{p} {deltas[64][p]:+.1f}% -> {deltas[1024][p]:+.1f}%"
                                  for p in ("lb", "stb"))))
    return SuiteRun("figures-small", checks,
                    {"small_cw": abstract, "small_total_64": total[64],
                     "small_total_1024": total[1024]})


def figures_large(seed: int, workers: Optional[int] = 1) -> SuiteRun:
    res = run_sweep(SweepSpec((LARGE_N,), (BEB, LB, LLB, STB), LARGE_TRIALS, seed=seed,
                              metrics=("cw_slots", "collisions"), engine="window"), workers)
    ok, detail = _strictly_ordered(res, LARGE_N, (STB, LLB, LB, BEB), "cw_slots", False)
    return SuiteRun("figures-large",
                    [Check("3", "CW slots STB < LLB < LB < BEB at n=1e5", ok, detail)],
                    {"large_cw": res})


def claims(seed: int, workers: Optional[int] = 1) -> SuiteRun:
    res = run_sweep(SweepSpec(CLAIMS_N, (BEB, LB, LLB, STB), CLAIMS_TRIALS, seed=seed,
                              metrics=("collisions", "cw_slots"), engine="window"), workers)
    checks = []
    ns = list(CLAIMS_N)

    def per_n(policy):
        return [res.median(n, policy, "collisions") / n for n in ns]

    for crit, policy in (("4", BEB), ("5", STB)):
        r = per_n(policy)
        fit = fit_trend(ns, r, f"C_{policy}/n")
        spread = spread_ratio(r)
        checks.append(Check(
            crit, f"C_{policy}/n bounded (flat slope, max/min <= 1.5)",
            fit.flat and spread <= 1.5,
            f"ratios {[round(x, 3) for x in r]}, slope {fit.slope:.4g} "
            f"CI [{fit.slope_ci[0]:.4g}, {fit.slope_ci[1]:.4g}], max/min {spread:.3f}"))

    _, stb_beb = res.ratio_series(STB, BEB, "collisions")
    checks.append(Check("5", "C_STB/C_BEB in [1.4, 2.8] at every n",
                        all(1.4 <= x <= 2.8 for x in stb_beb), f"{[round(x, 3) for x in stb_beb]}"))

    _, lb_stb = res.ratio_series(LB, STB, "collisions")
    ok = all(x > 1 for x in lb_stb) and all(b > a for a, b in zip(lb_stb, lb_stb[1:]))
    checks.append(Check("6", "C_LB/C_STB > 1 and increasing", ok,
                        f"{[round(x, 3) for x in lb_stb]}"))

    _, llb_stb = res.ratio_series(LLB, STB, "collisions")
    fit = fit_trend(ns, llb_stb, "C_LLB/C_STB")
    ok = fit.crossing is not None and 1e4 <= fit.crossing <= 1e5
    cross = "none" if fit.crossing is None else f"{fit.crossing:.0f}"
    checks.append(Check("6", "C_LLB/C_STB crosses 1 within n in [1e4, 1e5]", ok,
                        f"{[round(x, 4) for x in llb_stb]}, crossing at n = {cross}"))
    return SuiteRun("claims", checks, {"claims": res})


def bestofk(seed: int, workers: Optional[int] = 1) -> SuiteRun:
    res = run_sweep(SweepSpec(
        BESTOFK_N, (BEST_OF_5,), BESTOFK_TRIALS, seed=seed,
        metrics=("estimate_min", "estimates_at_least_n", "estimation_fraction",
                 "total_time_us", "collisions"),
        engine="slot", mode="dcf"), workers)
    base = run_sweep(SweepSpec(BESTOFK_N, (BEB,), BESTOFK_TRIALS, seed=seed,
                               metrics=("total_time_us", "collisions"),
                               engine="slot", mode="dcf"), workers)
    checks = []
    worst = {n: min(res.samples[(n, str(BEST_OF_5), "estimate_min")]) for n in BESTOFK_N}
    ok = all(worst[n] >= n / math.log2(n) for n in BESTOFK_N)
    checks.append(Check("10", "every estimate >= n / lg n", ok,
                        ", ".join(f"n={n}: min {int(worst[n])} vs {n / math.log2(n):.1f}"
                                  for n in BESTOFK_N)))

    hits = int(sum(sum(res.samples[(n, str(BEST_OF_5), "estimates_at_least_n")]) for n in BESTOFK_N))
    total = sum(n * BESTOFK_TRIALS for n in BESTOFK_N)
    checks.append(Check("10", "at least 90% of estimates >= n", hits / total >= 0.90,
                        f"{hits}/{total} = {hits / total:.3f}"))

    fractions = {n: res.median(n, BEST_OF_5, "estimation_fraction") for n in BESTOFK_N}
    checks.append(Check("10", "estimation <= 5% of total time (median, n=150)",
                        fractions[150] <= 0.05,
                        ", ".join(f"n={n}: {100 * f:.2f}%" for n, f in fractions.items())))

    bok = res.median(150, BEST_OF_5, "total_time_us")
    beb = base.median(150, BEB, "total_time_us")
    d = percent_delta(bok, beb)
    checks.append(Check("10", "Best-of-5 total time >= 10% below BEB at n=150", d <= -10.0,
                        f"{_fmt(bok)} us vs {_fmt(beb)} us ({d:+.1f}%)"))
    return SuiteRun("bestofk", checks, {"bestofk": res, "bestofk_beb": base})


def _round_half_up(x: float) -> int:
    return int(Decimal(repr(x)).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def _first_window_outcome(n: int, w: int, seed: int) -> tuple[int, int]:
    trace = run_trial(TrialConfig(n, PolicySpec.parse(f"fixed:{w}"), seed))
    first = trace.records[:w]
    return (sum(1 for r in first if len(r.transmitters) == 1),
            sum(1 for r in first if len(r.transmitters) >= 2))


def exact_first_window(n: int, w: int) -> dict[tuple[int, int], float]:
    """(successes, collisions) law of one window by enumerating all w**n choices."""
    counts = Counter()
    for choice in itertools.product(range(w), repeat=n):
        occupancy = Counter(choice).values()
        counts[(sum(1 for c in occupancy if c == 1), sum(1 for c in occupancy if c >= 2))] += 1
    return {k: v / w ** n for k, v in counts.items()}


def total_variation(p: dict, q: dict) -> float:
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in set(p) | set(q))


def oracle_distance(n: int, w: int, trials: int, seed: int) -> float:
    counts = Counter(_first_window_outcome(n, w, derive_seed(seed, n, w, t)) for t in range(trials))
    empirical = {k: v / trials for k, v in counts.items()}
    return total_variation(empirical, exact_first_window(n, w))


def model(seed: int, workers: Optional[int] = 1, oracle_trials: int = ORACLE_TRIALS) -> SuiteRun:
    params = TimingParams()
    checks = []
    # the back-of-envelope inputs: 75 * 9/2 disjoint collisions, 19 us frames, 886 slots
    part1 = simple_total_time(75 * 9 / 2, 0, 19.0, params)
    part3 = simple_total_time(0, 886, 19.0, params)
    checks.append(Check("8", "collision transmission component ~ 13,163 us",
                        abs(part1 - 13_163) <= 1, f"{part1} us"))
    checks.append(Check("8", "CW-slot component = 7,974 us", part3 == 7_974, f"{part3} us"))
    assembled = _round_half_up(part1) + part3 + 1_100
    checks.append(Check("8", "assembled lower bound = 22,237 us", assembled == 22_237,
                        f"{_round_half_up(part1)} + {part3:g} + 1100 = {assembled:g} us"))

    small = transmission_time(PacketShape(64, 64), params)
    large = transmission_time(PacketShape(1024, 64), params)
    checks.append(Check("9", "128-byte frame = 18.96 us", abs(small - 18.96) < 0.005, f"{small:.4f} us"))
    checks.append(Check("9", "1,088-byte frame = 161.2 us", abs(large - 161.2) < 0.05, f"{large:.4f} us"))

    distances = {(n, w): oracle_distance(n, w, oracle_trials, seed) for n, w in ORACLE_CASES}
    worst = max(distances.values())
    checks.append(Check("11", "first-window outcome matches exact enumeration (TV <= 0.01)",
                        worst <= 0.01,
                        f"{oracle_trials} trials per case, worst TV {worst:.4f} over "
                        f"(n, W) in {list(distances)}"))
    return SuiteRun("model", checks, {})


SUITES: dict[str, Callable[..., SuiteRun]] = {
    "claims": claims,
    "figures-small": figures_small,
    "figures-large": figures_large,
    "bestofk": bestofk,
    "model": model,
}


def run_suite(name: str, seed: int, workers: Optional[int] = 1,
              out_dir: Optional[str] = None) -> SuiteRun:
    run = SUITES[name](seed, workers)
    if out_dir is not None:
        run.write(out_dir)
    return run
