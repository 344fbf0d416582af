"""A small p_thre sweep written as CSV, read back and summarized."""

# %%
from crowdfind import SweepSpec, desk_scale, run_sweep
from crowdfind.harness import read_csv

spec = SweepSpec("p_thre", (0.0, 0.1, 0.3), replicates=5)
text = run_sweep(spec, desk_scale())
print(text.splitlines()[0])
print(text.splitlines()[1])

for row in read_csv(text):
    if row["replicate"] == "mean":
        print(f"p_thre={row['value']}: rounds {float(row['rounds']):.1f}, "
              f"tag bits {float(row['tag_comm_bits']):.0f}, p-value rank {float(row['rank_p_value']):.3f}")
