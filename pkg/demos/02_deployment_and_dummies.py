"""Detectors in a square, neighbor queries and per-round dummy elections."""

# %%
import numpy as np

from crowdfind import SimConfig, desk_scale
from crowdfind.world import deploy

cfg = desk_scale()
dep = deploy(cfg, np.random.default_rng(7))
sizes = np.array([a.size for a in dep.neighbor_table()])
print(f"{dep.C} detectors on a {cfg.side:.0f} m square, R = {cfg.R:.0f} m")
print(f"neighbors per detector: mean {sizes.mean():.2f}, min {sizes.min()}, max {sizes.max()}")
print(f"c = floor(pi N R^2 / S) = {cfg.avg_neighbors}")

# %% The lost tag and who can hear it.
tag_id, loc = dep.lost_tag
print(f"lost tag at ({loc.x:.1f}, {loc.y:.1f}) heard by detectors {sorted(dep.covering_detectors())}")

# %% Each neighbor of a broadcaster turns into a dummy tag with probability q.
rng = np.random.default_rng(1)
e = dep.elect_dummies(round=1, broadcaster=0, q=cfg.q, rng=rng)
print(f"detector 0 has {dep.neighbor_array(0).size} neighbors; {len(e)} volunteered as dummies")
owners, members, pseudonyms = dep.elect_round(1, cfg.q, rng)
print(f"one round: {owners.size} dummy tags in total, {owners.size / dep.C:.1f} per frame")

# %% The provider only sees coarse zones.
print("zones of detectors 0..4:", [dep.zone_of(d) for d in range(5)])

# %% False-positive mode has no lost tag at all.
print("fp mode covering set:", set(deploy(SimConfig(C=50, side=200.0, fp_mode=True), rng).covering_detectors()))
