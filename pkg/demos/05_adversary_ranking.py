"""What the provider can guess from the reported bit vectors.

Normalized rank is the best position of a detector covering the tag in the
provider's suspicion list, divided by C.  Larger is safer.
"""

# %%
import numpy as np

from crowdfind import desk_scale, run_once

for scheme in ("basic", "advanced"):
    ranks = {"bit_ones": [], "p_value": []}
    for seed in range(20):
        m = run_once(desk_scale().replace(scheme=scheme), seed).metrics
        ranks["bit_ones"].append(m.rank_bit_ones)
        ranks["p_value"].append(m.rank_p_value)
    print(f"{scheme:8s}: mean rank by bit ones {np.mean(ranks['bit_ones']):.3f}, "
          f"by p-value {np.mean(ranks['p_value']):.3f}")

# %% The provider's view of one run.
rep = run_once(desk_scale(), seed=1)
bits = rep.provider.observed_bits()
print(f"provider holds a {bits.shape[0]} x {bits.shape[1]} bit matrix, "
      f"{len(rep.provider.sealed)} sealed locations and one retrieval of {len(rep.provider.retrievals[0])}")
top = rep.ranks["p_value"].ranking[:5]
print("five most suspected detectors:", top.tolist(), "| covering:", sorted(rep.covering))
