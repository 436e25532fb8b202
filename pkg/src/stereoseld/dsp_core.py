"""STFT and mel filterbank shared by every feature extractor."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

LOG_FLOOR = 1e-10


@dataclass(frozen=True)
class StftParams:
    fft_size: int = 1024
    hop: int = 300
    win_length: int = 1024
    center_padding: str = "reflect"

    def __post_init__(self):
        n = self.fft_size
        if n <= 0 or n & (n - 1):
            raise ValueError(f"fft_size must be a power of two, got {n}")
        if not 0 < self.hop <= n:
            raise ValueError(f"hop must be in (0, fft_size], got {self.hop}")
        if not 0 < self.win_length <= n:
            raise ValueError(f"win_length must be in (0, fft_size], got {self.win_length}")

    @property
    def n_bins(self) -> int:
        return self.fft_size // 2 + 1


def hann_window(length: int, n_fft: int | None = None) -> np.ndarray:
    """Periodic Hann window, zero-padded symmetrically to ``n_fft``."""
    n = np.arange(length)
    w = 0.5 - 0.5 * np.cos(2.0 * np.pi * n / length)
    if n_fft is not None and n_fft > length:
        lpad = (n_fft - length) // 2
        w = np.pad(w, (lpad, n_fft - length - lpad))
    return w


def n_frames(n_samples: int, hop: int) -> int:
    """Frame count for centered framing; exact hop multiples drop the tail frame."""
    if n_samples % hop == 0:
        return n_samples // hop
    return n_samples // hop + 1


def stft(x, params: StftParams = StftParams()) -> np.ndarray:
    """Complex spectrogram of shape ``(frames, fft_size // 2 + 1)``.

    Frame ``t`` is centred on sample ``t * hop`` of the unpadded signal.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("stft expects a one-dimensional signal")
    if x.size == 0:
        raise ValueError("stft of an empty signal")
    n_fft, hop = params.fft_size, params.hop
    half = n_fft // 2
    if params.center_padding == "reflect" and x.size > 1:
        padded = np.pad(x, half, mode="reflect")
    elif params.center_padding in ("reflect", "constant"):
        padded = np.pad(x, half, mode="constant")
    else:
        raise ValueError(f"unknown center_padding {params.center_padding!r}")

    count = n_frames(x.size, hop)
    starts = np.arange(count) * hop
    frames = padded[starts[:, None] + np.arange(n_fft)[None, :]]
    frames = frames * hann_window(params.win_length, n_fft)
    return np.fft.rfft(frames, axis=1)


def hz_to_mel(freq, htk: bool = False):
    freq = np.asarray(freq, dtype=np.float64)
    if htk:
        return 2595.0 * np.log10(1.0 + freq / 700.0)
    f_sp = 200.0 / 3
    min_log_hz = 1000.0
    min_log_mel = min_log_hz / f_sp
    logstep = np.log(6.4) / 27.0
    lin = freq / f_sp
    return np.where(
        freq >= min_log_hz,
        min_log_mel + np.log(np.maximum(freq, min_log_hz) / min_log_hz) / logstep,
        lin,
    )


def mel_to_hz(mel, htk: bool = False):
    mel = np.asarray(mel, dtype=np.float64)
    if htk:
        return 700.0 * (10.0 ** (mel / 2595.0) - 1.0)
    f_sp = 200.0 / 3
    min_log_hz = 1000.0
    min_log_mel = min_log_hz / f_sp
    logstep = np.log(6.4) / 27.0
    return np.where(
        mel >= min_log_mel,
        min_log_hz * np.exp(logstep * (mel - min_log_mel)),
        f_sp * mel,
    )


def mel_band_edges(n_mels: int, f_min: float, f_max: float, htk: bool = False) -> np.ndarray:
    """``n_mels + 2`` frequencies (Hz): lower edge, centres, upper edge."""
    mels = np.linspace(hz_to_mel(f_min, htk), hz_to_mel(f_max, htk), n_mels + 2)
    return mel_to_hz(mels, htk)


@lru_cache(maxsize=16)
def _filterbank(sr, fft_size, n_mels, f_min, f_max, htk, norm):
    fft_freqs = np.linspace(0.0, sr / 2.0, fft_size // 2 + 1)
    edges = mel_band_edges(n_mels, f_min, f_max, htk)
    widths = np.diff(edges)
    ramps = edges[:, None] - fft_freqs[None, :]
    lower = -ramps[:-2] / widths[:-1, None]
    upper = ramps[2:] / widths[1:, None]
    weights = np.maximum(0.0, np.minimum(lower, upper))
    if norm == "slaney":
        weights *= (2.0 / (edges[2:] - edges[:-2]))[:, None]
    weights.setflags(write=False)
    return weights


def build_mel_filterbank(
    sr: int = 24000,
    fft_size: int = 1024,
    n_mels: int = 96,
    f_min: float = 0.0,
    f_max: float | None = None,
    htk: bool = False,
    norm: str | None = "slaney",
) -> np.ndarray:
    """Triangular mel filterbank of shape ``(n_mels, fft_size // 2 + 1)``.

    Defaults give the Slaney mel scale with area-normalised filters spanning
    0 Hz to Nyquist. The returned array is read-only and cached.
    """
    if f_max is None:
        f_max = sr / 2.0
    if n_mels < 1:
        raise ValueError(f"n_mels must be positive, got {n_mels}")
    if not 0.0 <= f_min < f_max <= sr / 2.0:
        raise ValueError(f"invalid band: f_min={f_min}, f_max={f_max}, sr={sr}")
    if norm not in (None, "slaney"):
        raise ValueError(f"unknown norm {norm!r}")
    fb = _filterbank(int(sr), int(fft_size), int(n_mels), float(f_min), float(f_max),
                     bool(htk), norm)
    empty = np.flatnonzero(fb.sum(axis=1) <= 0)
    if empty.size:
        raise ValueError(
            f"{empty.size} mel filters have no FFT bins; reduce n_mels or raise fft_size"
        )
    return fb


def mel_power(spec: np.ndarray, fb: np.ndarray) -> np.ndarray:
    return (np.abs(spec) ** 2) @ fb.T


def log_mel(spec: np.ndarray, fb: np.ndarray, floor: float = LOG_FLOOR) -> np.ndarray:
    """``10 * log10(|X|^2 @ fb.T + floor)`` with shape ``(frames, n_mels)``."""
    if spec.shape[-1] != fb.shape[1]:
        raise ValueError(f"spectrogram has {spec.shape[-1]} bins, filterbank {fb.shape[1]}")
    return 10.0 * np.log10(mel_power(spec, fb) + floor)
