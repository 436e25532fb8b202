"""
Distance-normalised multi-ACCDDOA targets
=========================================

Fit the distance normaliser on a small corpus, then encode a few events.
"""

import numpy as np

from stereoseld import Event, encode_targets, fit_normalizer

corpus = np.array([0.5, 1.2, 1.9, 2.5, 3.1, 4.8, 6.0])
dn = fit_normalizer(corpus)
print(f"mean={dn.mean_m:.3f} m  std={dn.std_m:.3f} m  max_z={dn.max_z:.3f}")

# the farthest source maps to 1, everything round-trips
print(dn.normalize(corpus.max()), dn.denormalize(dn.normalize(2.0)))

events = [
    Event(0, 2, 0, 0.0, 0.0, 1.2),     # straight ahead
    Event(0, 2, 1, 90.0, 0.0, 3.1),    # same class, second source -> track 1
    Event(4, 7, 0, -45.0, 30.0, 6.0),
]
y = encode_targets(events, dn)
print("target shape (frames, tracks, classes, xyz+d):", y.shape)
print(y[0, :2, 2])
print(y[4, 0, 7])
