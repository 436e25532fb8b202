import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from stereoseld.dsp_core import build_mel_filterbank, stft
from stereoseld.stereo_features import (
    CoherenceEstimator,
    assemble_stack,
    mid_side,
    ms_intensity,
    msc,
    project_iv_to_mel,
    project_msc_to_mel,
)
from stereoseld.wave_io import StereoClip

from conftest import noise_clip

FB = build_mel_filterbank()


def msc_oracle(XL, XR, lam=0.8, eps=1e-10):
    """Frame-by-frame recursion written out as scalar updates."""
    T, F = XL.shape
    out = np.empty((T, F))
    for f in range(F):
        ll = rr = lr = None
        for t in range(T):
            a, b = XL[t, f], XR[t, f]
            inst = (abs(a) ** 2, abs(b) ** 2, a * b.conjugate())
            if t == 0:
                ll, rr, lr = inst
            else:
                ll = lam * ll + (1 - lam) * inst[0]
                rr = lam * rr + (1 - lam) * inst[1]
                lr = lam * lr + (1 - lam) * inst[2]
            out[t, f] = abs(lr) ** 2 / (ll * rr + eps)
    return out


def random_spectra(rng, shape=(20, 513)):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def test_mid_side_hand_example():
    ms = mid_side(StereoClip([1, 1], [1, -1], 24000))
    np.testing.assert_array_equal(ms.mid, [1, 0])
    np.testing.assert_array_equal(ms.side, [0, 1])


def test_mid_side_identical_channels(rng):
    x = rng.standard_normal(1000)
    assert not np.any(mid_side(StereoClip(x, x, 24000)).side)


def test_mid_side_round_trip(rng):
    clip = StereoClip(*rng.uniform(-1, 1, (2, 10000)), 24000)
    left, right = mid_side(clip).to_left_right()
    assert np.max(np.abs(left - clip.left)) <= 1e-12
    assert np.max(np.abs(right - clip.right)) <= 1e-12


def test_ms_intensity_zero_side(rng):
    M = random_spectra(rng)
    assert not np.any(ms_intensity(M, np.zeros_like(M)))


def test_ms_intensity_equal_spectra(rng):
    M = random_spectra(rng)
    out = ms_intensity(M, M)
    power = np.abs(M) ** 2
    assert np.all(out < 0.5)
    np.testing.assert_allclose(out, power / (2 * power + 1e-8))
    assert np.all(out[power >= 1e-2] > 0.5 - 1e-6)


def test_ms_intensity_scalar_oracle(rng):
    M, S = random_spectra(rng, (6, 40)), random_spectra(rng, (6, 40))
    out = ms_intensity(M, S)
    for t in range(6):
        for f in range(40):
            m, s = complex(M[t, f]), complex(S[t, f])
            ref = (m * s.conjugate()).real / (abs(m) ** 2 + abs(s) ** 2 + 1e-8)
            assert abs(out[t, f] - ref) <= 1e-7


finite = st.floats(-1e4, 1e4)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (4, 3, 9), elements=finite))
def test_ms_intensity_bounds(parts):
    out = ms_intensity(parts[0] + 1j * parts[1], parts[2] + 1j * parts[3])
    assert np.all(out >= -0.5) and np.all(out <= 0.5)


def test_ms_intensity_shape_mismatch():
    with pytest.raises(ValueError):
        ms_intensity(np.zeros((2, 3)), np.zeros((3, 2)))


def test_project_iv():
    assert not np.any(project_iv_to_mel(np.zeros((5, 513)), FB))
    np.testing.assert_allclose(project_iv_to_mel(np.full((5, 513), 0.5), FB),
                               np.tile(0.5 * FB.sum(axis=1), (5, 1)), rtol=1e-12)


def test_projection_naive_matmul(rng):
    iv = rng.uniform(-0.5, 0.5, (3, 513))
    gamma = rng.uniform(0, 1, (3, 513))
    naive_iv = np.zeros((3, 96))
    naive_g = np.zeros((3, 96))
    for t in range(3):
        for k in range(96):
            for f in range(513):
                naive_iv[t, k] += iv[t, f] * FB[k, f]
                naive_g[t, k] += gamma[t, f] * FB[k, f]
    np.testing.assert_allclose(project_iv_to_mel(iv, FB), naive_iv, atol=1e-6)
    np.testing.assert_allclose(project_msc_to_mel(gamma, FB), naive_g, atol=1e-6)
    assert np.all(np.abs(project_iv_to_mel(iv, FB)) <= 0.5 * FB.sum(axis=1) + 1e-12)


def test_project_msc_constants():
    np.testing.assert_allclose(project_msc_to_mel(np.ones((2, 513)), FB),
                               np.tile(FB.sum(axis=1), (2, 1)), rtol=1e-12)
    assert not np.any(project_msc_to_mel(np.zeros((2, 513)), FB))


def test_msc_matches_scalar_recursion(rng):
    XL, XR = random_spectra(rng, (30, 12)), random_spectra(rng, (30, 12))
    np.testing.assert_allclose(msc(XL, XR), msc_oracle(XL, XR), rtol=1e-10, atol=1e-12)


def test_msc_blockwise_equals_one_shot(rng):
    XL, XR = random_spectra(rng, (40, 7)), random_spectra(rng, (40, 7))
    est = CoherenceEstimator()
    blocks = np.concatenate([est.coherence(XL[:15], XR[:15]), est.coherence(XL[15:], XR[15:])])
    np.testing.assert_allclose(blocks, msc(XL, XR), rtol=1e-12)


def test_msc_self_coherence():
    clip = noise_clip(3)
    X = stft(clip.left)
    est = CoherenceEstimator()
    power, _, _ = CoherenceEstimator().update(X, X)
    gamma = msc(X, X, est)
    active = power >= 1e-4
    assert active.mean() > 0.99
    assert np.all(gamma[active] >= 0.99)
    # the bound is tight: right at the threshold the regulariser costs ~1 %
    p = np.array([[1e-4]])
    assert CoherenceEstimator().coherence(np.sqrt(p) + 0j, np.sqrt(p) + 0j)[0, 0] >= 0.99


def test_msc_sign_invariance():
    X = stft(noise_clip(4).left)
    np.testing.assert_array_equal(msc(X, -X), msc(X, X))


def test_msc_independent_noise():
    clip = noise_clip(5)
    gamma = msc(stft(clip.left), stft(clip.right))
    assert gamma.shape[0] == 400
    assert gamma[-100:].mean() < 0.3


def test_msc_swap_invariance(rng):
    XL, XR = random_spectra(rng), random_spectra(rng)
    np.testing.assert_allclose(msc(XL, XR), msc(XR, XL), rtol=1e-12, atol=1e-15)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (4, 8, 5), elements=finite), st.floats(0.0, 1.0))
def test_msc_bounds(parts, lam):
    gamma = msc(parts[0] + 1j * parts[1], parts[2] + 1j * parts[3], CoherenceEstimator(lam))
    assert np.all(gamma >= 0) and np.all(gamma <= 1)


def test_estimator_validation():
    with pytest.raises(ValueError):
        CoherenceEstimator(lam=1.5)
    with pytest.raises(ValueError):
        CoherenceEstimator(eps=0)


def test_stack_shapes():
    clip = noise_clip(0)
    msic = assemble_stack(clip, "MSIC")
    assert msic.shape == (6, 400, 96) and msic.dtype == np.float32
    assert assemble_stack(clip, "MSI").shape == (5, 400, 96)
    np.testing.assert_array_equal(assemble_stack(clip, "MSI"), msic[:5])
    with pytest.raises(ValueError):
        assemble_stack(clip, "LR")


def test_stack_on_silence():
    silent = StereoClip(np.zeros(120000), np.zeros(120000), 24000)
    stack = assemble_stack(silent, "MSI")
    np.testing.assert_allclose(stack[:4], -100.0)
    assert not np.any(stack[4])
    assert not np.any(assemble_stack(silent, "MSIC")[5])


def test_stack_identical_channels():
    x = noise_clip(8).left
    stack = assemble_stack(StereoClip(x, x, 24000), "MSIC")
    np.testing.assert_allclose(stack[3], -100.0)
    assert not np.any(stack[4])
    # gamma is ~1 per bin, so each band carries its filter's weight sum; frame 0
    # is unsmoothed and may contain near-silent bins
    rowsum = FB.sum(axis=1)
    np.testing.assert_allclose(stack[5, 1:], np.tile(rowsum, (399, 1)), rtol=1e-5)
    assert np.all(stack[5] <= rowsum * (1 + 1e-6))
    np.testing.assert_array_equal(stack[0], stack[1])


def test_stack_deterministic():
    clip = noise_clip(9)
    assert assemble_stack(clip).tobytes() == assemble_stack(clip).tobytes()


def test_stack_rate_mismatch():
    with pytest.raises(ValueError, match="Hz"):
        assemble_stack(StereoClip(np.zeros(100), np.zeros(100), 48000))
