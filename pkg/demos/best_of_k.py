"""
Estimating the batch size first
===============================

Best-of-k spends a few short rounds sending dummy packets with
probability 1/2**i. Once more than half of a round's k slots are quiet
every station adopts W = 2**i and runs fixed backoff with that window.
"""

import statistics

from batchbackoff import PolicySpec, TrialConfig, decompose, run_trial
from batchbackoff.costmodel import PacketShape
from batchbackoff.domain import TimingParams
from batchbackoff.policies import estimate_distribution

n, k = 150, 5

# exact law of the shared estimate
for w, p in estimate_distribution(n, k).items():
    if p > 1e-4:
        print(f"P[W = {w:4d}] = {p:.3f}")

# a few trials with the detailed cost model
params, shape = TimingParams(), PacketShape(64)
totals = {}
for name in ("bestof:5", "beb"):
    spec = PolicySpec.parse(name, window_cap=params.max_window)
    runs = [run_trial(TrialConfig(n, spec, seed)) for seed in range(10)]
    totals[name] = statistics.median(decompose(t, shape, params).total_us for t in runs)
    if name == "bestof:5":
        print("estimates seen:", sorted({t.estimates[0] for t in runs}))
        share = statistics.median(decompose(t, shape, params).estimation_time_us
                                  / decompose(t, shape, params).total_us for t in runs)
        print(f"estimation share of total time: {100 * share:.1f}%")
print({k: round(v) for k, v in totals.items()})
