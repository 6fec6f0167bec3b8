"""
How collisions scale with n
===========================

Disjoint collisions per station stay flat for BEB and sawtooth backoff,
while log backoff keeps climbing relative to sawtooth. This uses the
window-level engine, which handles tens of thousands of stations in
well under a second per trial.
"""

from batchbackoff import PolicySpec, SweepSpec, fit_trend, run_sweep

ns = (1_000, 3_000, 10_000, 30_000)
names = ("beb", "lb", "llb", "stb")
res = run_sweep(SweepSpec(ns, tuple(PolicySpec.parse(p) for p in names), trials=20, seed=3,
                          metrics=("collisions",), engine="window"))

for p in names:
    per_n = [res.median(n, p, "collisions") / n for n in ns]
    print(f"C_{p}/n  " + "  ".join(f"{x:6.3f}" for x in per_n))

# a ratio that drifts upward has a slope CI clear of zero
_, lb_stb = res.ratio_series("lb", "stb", "collisions")
fit = fit_trend(ns, lb_stb, "C_lb/C_stb")
print("C_lb/C_stb", [round(x, 2) for x in lb_stb], "slope per decade", round(fit.slope, 3),
      "flat" if fit.flat else "growing")
