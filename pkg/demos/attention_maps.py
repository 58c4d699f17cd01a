"""Inspect the two attention representations for a single window.

For patch size p the patch-wise map is constant on p x p blocks and the
in-patch map repeats with period W / p. Their row-wise disagreement is the
anomaly score.
"""

import numpy as np

from dcdetector import DCDetector, DetectorConfig
from dcdetector.objective import anomaly_score

np.set_printoptions(precision=3, suppress=True, linewidth=120)

cfg = DetectorConfig(win_size=12, patch_sizes=[3], d_model=16, n_layers=1, channels=1)
model = DCDetector(cfg, seed=0)

t = np.arange(12)
window = np.sin(2 * np.pi * t / 6)[None, :, None]
spiked = window.copy()
spiked[0, 7, 0] += 4.0

for name, x in (("clean", window), ("spike at t=7", spiked)):
    patchwise, inpatch = model(x)
    print(f"-- {name}")
    print("patch-wise map, first 6 rows:\n", patchwise[0].data[0, 0, :6])
    print("in-patch map, first 6 rows:\n", inpatch[0].data[0, 0, :6])
    print("point-wise score:", anomaly_score(patchwise, inpatch)[0])
