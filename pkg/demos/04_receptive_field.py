# Receptive field of a dilated causal stack: the closed formula, and an
# empirical probe that finds the true reach by perturbing single frames.

import numpy as np

import tempconv as tc
from tempconv import Tensor
from tempconv.model import receptive_field

TCN_ONLY = "[model]\nfrontend = false\n"

# Dilation doubles per stage (1, 2, 4, 8, ...), so reach grows exponentially
# with depth while cost grows linearly. Each block contributes a fixed
# number of dilated taps.
print(f"{'kind':<18} {'stages':>6} {'receptive field':>16}")
for kind in ("baseline", "linear", "fusedmb", "invertedresidual", "cib",
             "uib", "starv"):
    for stages in (2, 4, 6):
        cfg = tc.parse_config(
            TCN_ONLY + f"[tcn]\nblock_kind = {kind}\nstages = {stages}\n")
        print(f"{kind:<18} {stages:>6} {receptive_field(cfg):>16}")
    print()

# The frontend's 3-frame temporal stem widens the field by 2 frames.
full = tc.parse_config("[tcn]\nblock_kind = baseline\n")
bare = tc.parse_config(TCN_ONLY + "[tcn]\nblock_kind = baseline\n")
print("baseline with frontend:", receptive_field(full),
      " temporal stack alone:", receptive_field(bare))

# Empirical check: bump one input frame at a time and watch which output
# frames move. The measured reach must equal the formula exactly.
cfg = tc.parse_config(TCN_ONLY + "[tcn]\nblock_kind = cib\nchannels = 8\nstages = 2\n")
model = tc.build_model(cfg, seed=0).eval()
rf = receptive_field(cfg)
t_len = rf + 5
x = np.random.default_rng(0).standard_normal((1, 8, t_len)).astype(np.float32)
base = model.tcn(Tensor(x)).data[0, :, -1]

measured = 0
for frame in range(t_len - 1, -1, -1):
    y = x.copy()
    y[:, :, frame] += 1.0
    moved = not np.array_equal(model.tcn(Tensor(y)).data[0, :, -1], base)
    if moved:
        measured = t_len - frame       # frames spanned back from the end
    else:
        break

print(f"\ncib 2-stage: formula {rf}, measured by perturbation {measured}")
assert measured == rf
