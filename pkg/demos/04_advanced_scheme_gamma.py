"""Selective polling: how many real positions can be hidden among omega?

The gate projects the ones frequency a covering detector would report over
the last two rounds and keeps it statistically close to what dummy tags alone
produce.
"""

# %%
import numpy as np

from crowdfind.owner import gamma_for_detector, initial_ones, new_owner_state, plan_positions

f, k, q, c, omega = 300, 10, 0.9, 19, 15
b0 = initial_ones(f, k, q, c, omega)
print(f"initial ones estimate b0 = {b0} of {omega}")

for p_thre in (0.0, 0.1, 0.2, 0.3, 0.5):
    counts = gamma_for_detector(b0, f=f, k=k, q=q, c=c, omega=omega, p_thre=p_thre, n=2 * omega)
    freq = gamma_for_detector(b0, f=f, k=k, q=q, c=c, omega=omega, p_thre=p_thre, n=1)
    print(f"p_thre={p_thre:.1f}: gamma {counts:2d} with counts, {freq:2d} with frequencies")

# %% A concrete plan mixes real and dummy slots in one sorted list.
state = new_owner_state(lost_id=0xFACE, n_detectors=10, scheme="advanced")
plan = plan_positions(state, 77, np.random.default_rng(0), f=f, k=k, omega=omega, q=q, c=c, p_thre=0.1)
print("real  :", plan.real_positions)
print("dummy :", plan.dummy_positions)
print("polled:", plan.positions)

# %% Whole runs: higher thresholds poll fewer real positions and need more rounds.
from crowdfind import desk_scale, run_once

for p_thre in (0.0, 0.3):
    rep = run_once(desk_scale().replace(p_thre=p_thre), seed=5)
    gammas = [r.gamma for r in rep.trace]
    print(f"p_thre={p_thre}: gammas {gammas}, {rep.metrics.tag_comm_bits} tag bits")
