"""
One contention window, simulated and enumerated
===============================================

A window of W slots with n stations is a balls-into-bins experiment.
Here the slot engine's first window is compared with the exact law of
(successes, collisions) obtained by listing all W**n slot choices.
"""

from batchbackoff.verify import exact_first_window, oracle_distance

# exact law for 3 stations in a 4-slot window
law = exact_first_window(3, 4)
for (succ, coll), p in sorted(law.items()):
    print(f"successes={succ} collisions={coll}  p={p:.4f}")

# the simulated first window over 20,000 seeded trials, as a total-variation distance
print("TV distance, 20000 trials:", round(oracle_distance(3, 4, 20_000, seed=1), 4))
