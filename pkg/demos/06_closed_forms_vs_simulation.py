"""Closed-form formulas next to their oracles."""

# %%
from crowdfind.analysis import (
    correctness_prob,
    expected_rounds,
    format_table,
    mu_as_written,
    mu_enumerate,
    mu_oracle,
    p_one,
    validate_analysis,
)

print("distinct slots for f=2, k=2:")
print(f"  summed formula {mu_as_written(2, 2)}, enumeration {mu_enumerate(2, 2)}, oracle {mu_oracle(2, 2)}")

f, k, q, c = 300, 10, 0.9, 19
po = p_one(f, k, q, c, mu_oracle(f, k))
print(f"survival chance of a fake detector per round at the defaults: {po:.2e}")
print(f"round count from C * p_e^t = 1 with p_e = 1 - p_one: {expected_rounds(f, k, q, c, mu_oracle(f, k), 625, cap=10**9)}")
print(f"coverage probability at the defaults: 1 - {1 - correctness_prob(10_000, 50, 2000**2):.2e}")

# %% The table the CLI prints.
print(format_table(validate_analysis(trials=20_000)))
