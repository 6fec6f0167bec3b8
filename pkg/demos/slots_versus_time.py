"""
Fewer slots, more time
======================

With 150 stations the newer backoff rules finish in fewer contention
window slots than binary exponential backoff, but they collide more.
Once each collision is charged its ACK timeout the ranking flips.
"""

from batchbackoff import PacketShape, PolicySpec, SweepSpec, percent_delta, run_sweep

policies = tuple(PolicySpec.parse(p) for p in ("beb", "lb", "llb", "stb"))

# 30 trials per policy, windows capped at 1024 as in an 802.11g radio
spec = SweepSpec((150,), policies, trials=30, shape=PacketShape(64), seed=1,
                 metrics=("cw_slots", "collisions", "total_time_us"), mode="dcf")
res = run_sweep(spec)

base = {m: res.median(150, "beb", m) for m in spec.metrics}
print(f"{'policy':6} {'cw slots':>9} {'collisions':>11} {'total us':>10} {'vs BEB':>8}")
for p in policies:
    row = [res.median(150, p, m) for m in spec.metrics]
    delta = percent_delta(row[2], base["total_time_us"])
    print(f"{str(p):6} {row[0]:9.0f} {row[1]:11.0f} {row[2]:10.0f} {delta:+7.1f}%")

# the same batch with 1024-byte payloads makes every collision dearer
big = run_sweep(SweepSpec((150,), policies, trials=30, shape=PacketShape(1024), seed=1,
                          metrics=("total_time_us",), mode="dcf"))
for p in policies[1:]:
    d = percent_delta(big.median(150, p, "total_time_us"), big.median(150, "beb", "total_time_us"))
    print(f"1024B {p}: {d:+.1f}% vs BEB")
