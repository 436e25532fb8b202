"""
Stereo feature stacks
=====================

Build the six-channel MSIC stack for a synthetic panned source and look at
what each spatial channel says about it.
"""

import numpy as np

from stereoseld import StereoClip, assemble_stack
from stereoseld.stereo_features import CHANNELS

sr = 24000
t = np.arange(5 * sr) / sr
rng = np.random.default_rng(0)

# a noise burst panned hard towards the left, plus a little diffuse noise
src = rng.standard_normal(t.size) * (np.sin(2 * np.pi * 0.5 * t) > 0)
left = 0.3 * src + 0.01 * rng.standard_normal(t.size)
right = 0.1 * src + 0.01 * rng.standard_normal(t.size)
clip = StereoClip(left, right, sr)

stack = assemble_stack(clip, "MSIC")
print("stack shape (channels, frames, mel bands):", stack.shape)

# source active in the first half of every 2 s cycle (hop = 12.5 ms)
frame_time = np.arange(stack.shape[1]) * 300 / sr
phase = frame_time % 2.0
active = (phase > 0.1) & (phase < 0.9)
silent = (phase > 1.1) & (phase < 1.9)
for name, ch in zip(CHANNELS, stack):
    print(f"{name:>9}: active {ch[active].mean():9.3f}   silent {ch[silent].mean():9.3f}")

# the left-heavy pan shows up as a positive mid-side intensity; coherence
# drops when only the independent diffuse noise is left
