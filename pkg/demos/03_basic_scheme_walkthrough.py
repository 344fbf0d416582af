"""The basic scheme one round at a time.

The owner keeps every detector whose frame is busy in all of the lost tag's
slots.  Detectors that hear the lost tag always pass; others pass only when
dummy tags happen to fill those slots.
"""

# %%
from crowdfind import desk_scale, run_once

cfg = desk_scale().replace(scheme="basic")
rep = run_once(cfg, seed=3)

print(f"detectors covering the tag: {sorted(rep.covering)}")
for rec in rep.trace:
    print(f"round {rec.round}: {rec.candidates:4d} candidates left, "
          f"{len(rec.eliminated):4d} eliminated, {rec.tag_comm_bits} tag bits")

# %% Retrieval pads the survivors with decoys so the provider cannot single them out.
print(f"final candidates {sorted(rep.candidates)}; provider saw a request for {len(rep.requested)} locations")
est = rep.estimate
print(f"estimate: centre ({est.center.x:.1f}, {est.center.y:.1f}), radius {est.radius:.1f} m; "
      f"tag inside: {rep.tag_in_estimate()}")

m = rep.metrics
print(f"overhead: {m.tag_comm_bits} tag bits, {m.tag_hash_ops} hashes, {m.detector_comm_bits} detector bits")
