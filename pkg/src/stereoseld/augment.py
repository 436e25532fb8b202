"""Stereo-aware augmentation.

Waveform level: audio channel swapping (ACS) with azimuth reflection.
Spectrogram level: FilterAugment, mel-axis frequency shifting and
inter-channel-aware time-frequency masking (ITFM).

Spectrogram augmentations take and return channel-first stacks laid out as
produced by :func:`stereoseld.stereo_features.assemble_stack`. Outputs keep
the input dtype; arithmetic runs in float64.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace

import numpy as np

from .stereo_features import LR_PAIR, MS_PAIR, N_LOGMEL
from .wave_io import StereoClip

AUGMENT_MODES = ("ITFM", "FAFS")


@dataclass(frozen=True)
class AugmentConfig:
    seed: int = 0
    filteraug_min_bands: int = 3
    filteraug_max_bands: int = 6
    filteraug_min_gain_db: float = -6.0
    filteraug_max_gain_db: float = 6.0
    freqshift_max_bins: int = 10
    itfm_max_time_masks: int = 2
    itfm_max_time_width: int = 40
    itfm_max_freq_masks: int = 2
    itfm_max_freq_width: int = 16
    itfm_rectangles: bool = False

    def __post_init__(self):
        if not 1 <= self.filteraug_min_bands <= self.filteraug_max_bands:
            raise ValueError("filteraug band range must be nonempty and start at >= 1")
        if self.filteraug_min_gain_db > self.filteraug_max_gain_db:
            raise ValueError("filteraug gain range is empty")
        for name in ("freqshift_max_bins", "itfm_max_time_masks", "itfm_max_time_width",
                     "itfm_max_freq_masks", "itfm_max_freq_width"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")

    def check_shape(self, n_frames: int, n_bands: int):
        if self.itfm_max_time_width >= n_frames:
            raise ValueError(f"itfm_max_time_width {self.itfm_max_time_width} >= {n_frames} frames")
        if self.itfm_max_freq_width >= n_bands:
            raise ValueError(f"itfm_max_freq_width {self.itfm_max_freq_width} >= {n_bands} bands")
        if self.freqshift_max_bins >= n_bands:
            raise ValueError(f"freqshift_max_bins {self.freqshift_max_bins} >= {n_bands} bands")
        if self.filteraug_max_bands > n_bands:
            raise ValueError(f"filteraug_max_bands {self.filteraug_max_bands} > {n_bands} bands")

    @classmethod
    def from_mapping(cls, values: dict) -> "AugmentConfig":
        kw = {}
        for f in fields(cls):
            if f.name in values:
                kw[f.name] = _coerce(values[f.name], f.type)
        return cls(**kw)


def _coerce(value, typ):
    if not isinstance(value, str):
        return value
    if typ in ("bool", bool):
        return value.strip().lower() in ("1", "true", "yes", "on")
    if typ in ("int", int):
        return int(value)
    return float(value)


def clip_rng(seed: int, key, realization: int = 0) -> np.random.Generator:
    """RNG for one clip, independent of scheduling order.

    ``key`` may be an integer clip index or a string stem (hashed with
    SHA-256 so the mapping is stable across processes and runs).
    """
    if isinstance(key, str):
        key = int.from_bytes(hashlib.sha256(key.encode("utf-8")).digest()[:8], "little")
    return np.random.default_rng([int(seed) & (2**64 - 1), int(key), int(realization)])


# ---------------------------------------------------------------------------
# Waveform level
# ---------------------------------------------------------------------------

def negate_azimuth(az: float) -> float:
    """Reflect about the frontal axis, keeping the result in [-180, 180)."""
    out = -az
    return -180.0 if out == 180.0 else out


def acs(clip: StereoClip, events):
    """Swap left/right and reflect every event azimuth."""
    swapped = StereoClip(clip.right.copy(), clip.left.copy(), clip.sample_rate_hz, clip.encoding)
    mirrored = [replace(e, azimuth_deg=negate_azimuth(e.azimuth_deg)) for e in events]
    return swapped, mirrored


# ---------------------------------------------------------------------------
# Spectrogram level
# ---------------------------------------------------------------------------

def _check_stack(stack, n_logmel):
    stack = np.asarray(stack)
    if stack.ndim != 3:
        raise ValueError(f"expected (channels, frames, bands), got shape {stack.shape}")
    if not 2 <= n_logmel <= stack.shape[0]:
        raise ValueError(f"stack needs at least 2 log-mel channels, n_logmel={n_logmel}")
    return stack


def draw_filter_gains(n_bands_axis: int, cfg: AugmentConfig, rng) -> np.ndarray:
    """Step gain profile (dB) over the mel axis.

    Draw order: band count, interior boundaries (without replacement), gains.
    """
    n = int(rng.integers(cfg.filteraug_min_bands, cfg.filteraug_max_bands + 1))
    bounds = np.sort(rng.choice(np.arange(1, n_bands_axis), size=n - 1, replace=False))
    gains = rng.uniform(cfg.filteraug_min_gain_db, cfg.filteraug_max_gain_db, size=n)
    return np.repeat(gains, np.diff(np.concatenate([[0], bounds, [n_bands_axis]])))


def filter_augment(stack, cfg: AugmentConfig, rng, n_logmel: int = N_LOGMEL):
    """Add one random band-wise dB gain profile to the log-mel channels."""
    stack = _check_stack(stack, n_logmel)
    profile = draw_filter_gains(stack.shape[2], cfg, rng)
    out = stack.astype(np.float64, copy=True)
    out[:n_logmel] += profile[None, None, :]
    return out.astype(stack.dtype)


def shift_bands(stack, k: int, n_logmel: int = N_LOGMEL):
    """Shift every channel by ``k`` mel bands (positive = upwards).

    Vacated log-mel bands take that channel's minimum, spatial channels 0.
    """
    stack = _check_stack(stack, n_logmel)
    if k == 0:
        return stack.copy()
    n = stack.shape[2]
    if abs(k) >= n:
        raise ValueError(f"shift {k} exceeds band count {n}")
    fill = np.zeros(stack.shape[0], dtype=stack.dtype)
    fill[:n_logmel] = stack[:n_logmel].min(axis=(1, 2))
    out = np.broadcast_to(fill[:, None, None], stack.shape).copy()
    if k > 0:
        out[:, :, k:] = stack[:, :, :n - k]
    else:
        out[:, :, :n + k] = stack[:, :, -k:]
    return out


def freq_shift(stack, cfg: AugmentConfig, rng, n_logmel: int = N_LOGMEL):
    k = int(rng.integers(-cfg.freqshift_max_bins, cfg.freqshift_max_bins + 1))
    return shift_bands(stack, k, n_logmel)


@dataclass(frozen=True)
class MaskSet:
    """Masked regions as half-open ``(t0, t1, k0, k1)`` rectangles."""

    rects: tuple = ()

    def to_mask(self, n_frames: int, n_bands: int) -> np.ndarray:
        mask = np.zeros((n_frames, n_bands), dtype=bool)
        for t0, t1, k0, k1 in self.rects:
            if not (0 <= t0 <= t1 <= n_frames and 0 <= k0 <= k1 <= n_bands):
                raise ValueError(f"rectangle {(t0, t1, k0, k1)} outside {(n_frames, n_bands)}")
            mask[t0:t1, k0:k1] = True
        return mask


def draw_masks(n_frames: int, n_bands: int, cfg: AugmentConfig, rng) -> MaskSet:
    """Up to the configured number of time and frequency stripes.

    With ``itfm_rectangles`` each time mask is limited to a random band range
    and each frequency mask to a random frame range.
    """
    rects = []
    for _ in range(int(rng.integers(0, cfg.itfm_max_time_masks + 1))):
        w = int(rng.integers(0, cfg.itfm_max_time_width + 1))
        t0 = int(rng.integers(0, n_frames - w + 1))
        k0, k1 = 0, n_bands
        if cfg.itfm_rectangles:
            k0, k1 = sorted(int(v) for v in rng.integers(0, n_bands + 1, size=2))
        rects.append((t0, t0 + w, k0, k1))
    for _ in range(int(rng.integers(0, cfg.itfm_max_freq_masks + 1))):
        w = int(rng.integers(0, cfg.itfm_max_freq_width + 1))
        k0 = int(rng.integers(0, n_bands - w + 1))
        t0, t1 = 0, n_frames
        if cfg.itfm_rectangles:
            t0, t1 = sorted(int(v) for v in rng.integers(0, n_frames + 1, size=2))
        rects.append((t0, t1, k0, k0 + w))
    return MaskSet(tuple(rects))


def apply_itfm(stack, masks: MaskSet, n_logmel: int = N_LOGMEL):
    """Mask while keeping each pair's inter-channel difference intact.

    For the L/R and M/S log-mel pairs the reference channel (L, M) is set to
    its clip mean inside the mask and the partner to ``mean - difference``.
    Channels after the log-mel block are zeroed inside the mask.
    """
    stack = _check_stack(stack, n_logmel)
    mask = masks.to_mask(stack.shape[1], stack.shape[2])
    out = stack.astype(np.float64, copy=True)
    if not mask.any():
        return out.astype(stack.dtype)
    pairs = [p for p in (LR_PAIR, MS_PAIR) if max(p) < n_logmel]
    for ref, partner in pairs:
        diff = out[ref] - out[partner]
        fill = out[ref].mean()
        out[ref][mask] = fill
        out[partner][mask] = fill - diff[mask]
    out[n_logmel:, mask] = 0.0
    return out.astype(stack.dtype)


def itfm(stack, cfg: AugmentConfig, rng, n_logmel: int = N_LOGMEL):
    stack = _check_stack(stack, n_logmel)
    masks = draw_masks(stack.shape[1], stack.shape[2], cfg, rng)
    return apply_itfm(stack, masks, n_logmel)


def compose_pipeline(mode: str, cfg: AugmentConfig, n_logmel: int = N_LOGMEL):
    """Return ``augment(stack, key, realization=0)`` for ``ITFM`` or ``FAFS``.

    ``key`` identifies the clip (index or stem); output depends only on
    ``(cfg.seed, key, realization)`` and the input.
    """
    if mode not in AUGMENT_MODES:
        raise ValueError(f"unknown augmentation mode {mode!r}; expected one of {AUGMENT_MODES}")

    def augment(stack, key, realization: int = 0):
        stack = _check_stack(stack, n_logmel)
        cfg.check_shape(stack.shape[1], stack.shape[2])
        rng = clip_rng(cfg.seed, key, realization)
        if mode == "ITFM":
            return itfm(stack, cfg, rng, n_logmel)
        out = filter_augment(stack, cfg, rng, n_logmel)
        return freq_shift(out, cfg, rng, n_logmel)

    augment.mode = mode
    return augment
