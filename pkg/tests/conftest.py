import wave
from pathlib import Path

import numpy as np
import pytest

from stereoseld.wave_io import StereoClip, write_wav


def noise_clip(seed=0, seconds=5.0, sr=24000, scale=0.1):
    rng = np.random.default_rng(seed)
    n = int(round(seconds * sr))
    return StereoClip(scale * rng.standard_normal(n), scale * rng.standard_normal(n), sr)


def write_pcm16(path, frames, sr=24000, channels=2):
    """Write int16 frames with the stdlib ``wave`` module (reference writer)."""
    data = np.asarray(frames, dtype="<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(channels)
        w.setsampwidth(2)
        w.setframerate(sr)
        w.writeframes(data.tobytes())


def make_dataset(root: Path, n_clips=3, seconds=5.0, seed=0, sr=24000):
    """Tiny corpus with ``audio/`` and ``metadata/`` directories."""
    rng = np.random.default_rng(seed)
    (root / "audio").mkdir(parents=True, exist_ok=True)
    (root / "metadata").mkdir(parents=True, exist_ok=True)
    stems = []
    for i in range(n_clips):
        stem = f"clip{i:03d}"
        n = int(seconds * sr)
        left = 0.2 * rng.standard_normal(n)
        right = 0.5 * left + 0.1 * rng.standard_normal(n)
        write_wav(root / "audio" / f"{stem}.wav",
                  StereoClip(np.clip(left, -1, 1), np.clip(right, -1, 1), sr, "pcm16"))
        rows = []
        for frame in range(0, int(seconds * 10), 3):
            cls = int(rng.integers(0, 13))
            az = int(rng.integers(-180, 180))
            el = int(rng.integers(-40, 41))
            dist = round(float(rng.uniform(0.04, 7.64)), 2)
            rows.append(f"{frame},{cls},0,{az},{el},{dist}")
        (root / "metadata" / f"{stem}.csv").write_text("\n".join(rows) + "\n")
        stems.append(stem)
    return stems


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py::test_ac" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        status = "PASS" if report.passed else "FAIL"
        ACCEPTANCE_LINES.append(f"[{status}] {name}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
