"""Distance normalisation and multi-ACCDDOA target encoding."""
from __future__ import annotations

import logging
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

N_CLASSES = 13
N_TRACKS = 3
N_LABEL_FRAMES = 50


@dataclass(frozen=True)
class DistanceNormalizer:
    """Z-score followed by division by the corpus' largest z-score.

    ``divide_by="absmax"`` divides by the largest absolute z-score instead,
    which bounds corpus members to [-1, 1] on both sides.
    """

    mean_m: float
    std_m: float
    max_z: float
    divide_by: str = "max"

    def __post_init__(self):
        if not self.std_m > 0:
            raise ValueError(f"std_m must be positive, got {self.std_m}")
        if not self.max_z > 0:
            raise ValueError(f"max_z must be positive, got {self.max_z}")

    def normalize(self, d):
        return ((d - self.mean_m) / self.std_m) / self.max_z

    def denormalize(self, y):
        return y * self.max_z * self.std_m + self.mean_m

    def save(self, path) -> None:
        Path(path).write_text(
            f"mean={self.mean_m!r}\nstd={self.std_m!r}\nmax_z={self.max_z!r}\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path) -> "DistanceNormalizer":
        values = {}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if not line:
                continue
            key, sep, val = line.partition("=")
            if not sep:
                raise ValueError(f"{path}: malformed line {line!r}")
            values[key.strip()] = float(val)
        missing = {"mean", "std", "max_z"} - values.keys()
        if missing:
            raise ValueError(f"{path}: missing keys {sorted(missing)}")
        return cls(values["mean"], values["std"], values["max_z"])


def fit_normalizer(distances, divide_by: str = "max") -> DistanceNormalizer:
    """Fit mean, population std and the maximum z-score over ``distances``."""
    if divide_by not in ("max", "absmax"):
        raise ValueError(f"divide_by must be 'max' or 'absmax', got {divide_by!r}")
    d = np.asarray(distances, dtype=np.float64).ravel()
    if d.size < 2:
        raise ValueError(f"need at least 2 distances, got {d.size}")
    if np.any(d <= 0) or not np.all(np.isfinite(d)):
        raise ValueError("distances must be positive and finite")
    mean = float(d.mean())
    std = float(d.std())
    if std == 0.0 or np.all(d == d[0]):
        raise ValueError("zero variance: all distances are identical")
    z = (d - mean) / std
    max_z = float(np.abs(z).max() if divide_by == "absmax" else z.max())
    return DistanceNormalizer(mean, std, max_z, divide_by)


def normalize(dn: DistanceNormalizer, d):
    return dn.normalize(d)


def denormalize(dn: DistanceNormalizer, y):
    return dn.denormalize(y)


def direction_vector(azimuth_deg, elevation_deg):
    """Unit vectors with x front, y left, z up."""
    az = np.deg2rad(azimuth_deg)
    el = np.deg2rad(elevation_deg)
    return np.stack([np.cos(az) * np.cos(el), np.sin(az) * np.cos(el), np.sin(el)], axis=-1)


def label_frame_count(n_samples: int, sample_rate: int) -> int:
    return max(1, math.ceil(n_samples / sample_rate / 0.1 - 1e-9))


def encode_targets(events, dn: DistanceNormalizer, n_frames: int = N_LABEL_FRAMES,
                   n_tracks: int = N_TRACKS, n_classes: int = N_CLASSES) -> np.ndarray:
    """Multi-ACCDDOA target of shape ``(n_frames, n_tracks, n_classes, 4)``.

    Simultaneous same-class events fill track slots in ascending source id
    order. Events beyond ``n_tracks`` or past ``n_frames`` are dropped with a
    warning.
    """
    target = np.zeros((n_frames, n_tracks, n_classes, 4), dtype=np.float32)
    groups = defaultdict(list)
    for e in events:
        if not 0 <= e.class_id < n_classes:
            raise ValueError(f"class_id {e.class_id} outside [0, {n_classes})")
        groups[(e.frame_index, e.class_id)].append(e)

    dropped = 0
    for (frame, cls), group in groups.items():
        if frame >= n_frames:
            dropped += len(group)
            continue
        group.sort(key=lambda e: e.source_id)
        dropped += max(0, len(group) - n_tracks)
        for track, e in enumerate(group[:n_tracks]):
            target[frame, track, cls, :3] = direction_vector(e.azimuth_deg, e.elevation_deg)
            target[frame, track, cls, 3] = dn.normalize(e.distance_m)
    if dropped:
        warnings.warn(f"encode_targets dropped {dropped} events", stacklevel=2)
    return target
