"""Framed slotted ALOHA frames and sealed locations.

Every tag hashes its id with the round seed k times and answers in those
slots.  A detector only learns which slots were busy.
"""

# %%
from crowdfind.protocol import (
    OwnerKey,
    PollRequest,
    open_location,
    reply_slots,
    run_frame,
    run_selected_frame,
    seal_location,
)

f, k, round_seed = 30, 3, 2024
tags = [101, 202, 303]

for t in tags:
    print(f"tag {t} answers in slots {sorted(reply_slots(t, round_seed, f, k))}")

# %% A full frame is the OR of every tag's slots.
frame, responses = run_frame(tags, round_seed, f, k)
print("frame    :", "".join("1" if b else "." for b in frame.bits))
print(f"{frame.ones()} busy slots, {responses} one-bit replies sent")

# %% Selective polling asks about a few positions only.
positions = (1, 5, 9, 17, 22, 28)
sub, responses = run_selected_frame(tags, PollRequest(round_seed, f, positions), k)
print("positions:", positions, "->", sub.bits.astype(int).tolist(), f"({responses} replies)")

# %% Only the owner can open a sealed location.
owner = OwnerKey()
sealed = seal_location((120.5, 80.25), 0xBEEF, owner.public)
print("sealed   :", sealed)
print("opened   :", open_location(sealed, owner))
try:
    open_location(sealed, OwnerKey())
except PermissionError as exc:
    print("stranger :", exc)
