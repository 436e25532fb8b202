"""Mid-side spectra, the MS intensity vector and inter-channel coherence.

Stacks are laid out channel-first as ``[logmel_L, logmel_R, logmel_M,
logmel_S, IV]`` (MSI) with ``MSC`` appended for MSIC.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .dsp_core import LOG_FLOOR, StftParams, build_mel_filterbank, log_mel, stft
from .wave_io import StereoClip

FEATURE_SETS = ("MSI", "MSIC")
CHANNELS = ("logmel_L", "logmel_R", "logmel_M", "logmel_S", "IV", "MSC")
N_LOGMEL = 4
LR_PAIR = (0, 1)
MS_PAIR = (2, 3)
IV_CHANNEL = 4
MSC_CHANNEL = 5

DEFAULT_EPS = 1e-8
# regularises a product of two powers, hence the square of a power-scale floor
COHERENCE_EPS = 1e-10


@dataclass
class MidSideClip:
    mid: np.ndarray
    side: np.ndarray

    def to_left_right(self):
        return self.mid + self.side, self.mid - self.side


def mid_side(clip: StereoClip) -> MidSideClip:
    return MidSideClip((clip.left + clip.right) / 2.0, (clip.left - clip.right) / 2.0)


def ms_intensity(M: np.ndarray, S: np.ndarray, eps: float = DEFAULT_EPS) -> np.ndarray:
    """Power-normalised real MS cross-spectrum; values lie in [-0.5, 0.5]."""
    if M.shape != S.shape:
        raise ValueError(f"shape mismatch {M.shape} vs {S.shape}")
    if eps <= 0:
        raise ValueError("eps must be positive")
    cross = M.real * S.real + M.imag * S.imag
    power = M.real ** 2 + M.imag ** 2 + S.real ** 2 + S.imag ** 2
    return cross / (power + eps)


def _project(values: np.ndarray, fb: np.ndarray) -> np.ndarray:
    if values.shape[-1] != fb.shape[1]:
        raise ValueError(f"input has {values.shape[-1]} bins, filterbank {fb.shape[1]}")
    return values @ fb.T


def project_iv_to_mel(iv: np.ndarray, fb: np.ndarray) -> np.ndarray:
    return _project(iv, fb)


def project_msc_to_mel(gamma: np.ndarray, fb: np.ndarray) -> np.ndarray:
    return _project(gamma, fb)


class CoherenceEstimator:
    """Recursively smoothed auto- and cross-PSDs of a channel pair.

    Each estimate follows ``phi[t] = lam * phi[t-1] + (1 - lam) * inst[t]``
    with ``phi[0] = inst[0]``. The estimator keeps the last frame's state so
    that a long clip can be fed in blocks.
    """

    def __init__(self, lam: float = 0.8, eps: float = COHERENCE_EPS):
        if not 0.0 <= lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {lam}")
        if eps <= 0:
            raise ValueError("eps must be positive")
        self.lam = lam
        self.eps = eps
        self.reset()

    def reset(self):
        self.phi_ll = None
        self.phi_rr = None
        self.phi_lr = None

    def _smooth(self, inst: np.ndarray, prev) -> np.ndarray:
        if prev is None:
            prev = inst[0]
        zi = (self.lam * prev)[None, :]
        out, _ = lfilter([1.0 - self.lam], [1.0, -self.lam], inst, axis=0, zi=zi)
        return out

    def update(self, XL: np.ndarray, XR: np.ndarray):
        """Feed frames ``(T, F)``; returns the smoothed ``(phi_ll, phi_rr, phi_lr)``."""
        if XL.shape != XR.shape:
            raise ValueError(f"shape mismatch {XL.shape} vs {XR.shape}")
        ll = self._smooth(XL.real ** 2 + XL.imag ** 2, self.phi_ll)
        rr = self._smooth(XR.real ** 2 + XR.imag ** 2, self.phi_rr)
        lr = self._smooth(XL * np.conj(XR), self.phi_lr)
        # rounding in lfilter can leave tiny negatives on near-silent bins
        ll = np.maximum(ll, 0.0)
        rr = np.maximum(rr, 0.0)
        self.phi_ll, self.phi_rr, self.phi_lr = ll[-1], rr[-1], lr[-1]
        return ll, rr, lr

    def coherence(self, XL: np.ndarray, XR: np.ndarray) -> np.ndarray:
        ll, rr, lr = self.update(XL, XR)
        num = lr.real ** 2 + lr.imag ** 2
        return np.clip(num / (ll * rr + self.eps), 0.0, 1.0)


def msc(L: np.ndarray, R: np.ndarray, est: CoherenceEstimator | None = None) -> np.ndarray:
    """Magnitude-squared coherence per TF bin, in [0, 1]."""
    if L.shape != R.shape:
        raise ValueError(f"shape mismatch {L.shape} vs {R.shape}")
    if est is None:
        est = CoherenceEstimator()
    return est.coherence(L, R)


@dataclass(frozen=True)
class FeatureParams:
    sample_rate: int = 24000
    stft: StftParams = StftParams()
    n_mels: int = 96
    f_min: float = 0.0
    f_max: float | None = None
    htk: bool = False
    log_floor: float = LOG_FLOOR
    coherence_lambda: float = 0.8
    eps: float = DEFAULT_EPS
    coherence_eps: float = COHERENCE_EPS

    def filterbank(self) -> np.ndarray:
        return build_mel_filterbank(self.sample_rate, self.stft.fft_size, self.n_mels,
                                    self.f_min, self.f_max, htk=self.htk)


def assemble_stack(clip: StereoClip, kind: str = "MSIC",
                   params: FeatureParams = FeatureParams()) -> np.ndarray:
    """Float32 feature stack of shape ``(5 or 6, frames, n_mels)``."""
    if kind not in FEATURE_SETS:
        raise ValueError(f"kind must be one of {FEATURE_SETS}, got {kind!r}")
    if clip.sample_rate_hz != params.sample_rate:
        raise ValueError(
            f"clip is at {clip.sample_rate_hz} Hz, features expect {params.sample_rate} Hz"
        )
    fb = params.filterbank()
    ms = mid_side(clip)
    XL = stft(clip.left, params.stft)
    XR = stft(clip.right, params.stft)
    XM = stft(ms.mid, params.stft)
    XS = stft(ms.side, params.stft)

    chans = [log_mel(X, fb, params.log_floor) for X in (XL, XR, XM, XS)]
    chans.append(project_iv_to_mel(ms_intensity(XM, XS, params.eps), fb))
    if kind == "MSIC":
        est = CoherenceEstimator(params.coherence_lambda, params.coherence_eps)
        chans.append(project_msc_to_mel(msc(XL, XR, est), fb))
    return np.stack(chans).astype(np.float32)
