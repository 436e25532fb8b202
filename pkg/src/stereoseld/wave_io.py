"""Audio, metadata and tensor I/O.

WAV files are parsed directly from the RIFF chunk structure so that 16-bit,
24-bit and float-32 stereo files decode without extra dependencies. Tensors
are stored in the NPY v1.0 container (little-endian float32, C order).
"""
from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from math import gcd
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

PIPELINE_RATE = 24000
LABEL_RESOLUTION_S = 0.1

_WAVE_FORMAT_PCM = 0x0001
_WAVE_FORMAT_IEEE_FLOAT = 0x0003
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE

ENCODINGS = ("pcm16", "pcm24", "float32")


class WavError(ValueError):
    """Raised for malformed or unsupported WAV input."""


class MetadataError(ValueError):
    """Raised for malformed metadata rows."""


class TensorFileError(ValueError):
    """Raised when an NPY container is corrupt or of the wrong type."""


@dataclass
class StereoClip:
    """Two-channel clip with samples as float64 amplitudes.

    ``encoding`` records the on-disk sample format so a clip can be written
    back losslessly (used when mirroring a corpus).
    """

    left: np.ndarray
    right: np.ndarray
    sample_rate_hz: int
    encoding: str = "float32"

    def __post_init__(self):
        self.left = np.asarray(self.left, dtype=np.float64)
        self.right = np.asarray(self.right, dtype=np.float64)
        if self.left.ndim != 1 or self.right.ndim != 1:
            raise ValueError("channels must be one-dimensional")
        if self.left.shape != self.right.shape:
            raise ValueError(
                f"channel length mismatch: left={self.left.size}, right={self.right.size}"
            )
        if int(self.sample_rate_hz) <= 0:
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        self.sample_rate_hz = int(self.sample_rate_hz)

    @property
    def n_samples(self) -> int:
        return self.left.size

    @property
    def duration_s(self) -> float:
        return self.n_samples / self.sample_rate_hz


@dataclass(frozen=True)
class Event:
    frame_index: int
    class_id: int
    source_id: int
    azimuth_deg: float
    elevation_deg: float
    distance_m: float


# ---------------------------------------------------------------------------
# WAV
# ---------------------------------------------------------------------------

def _iter_chunks(buf: bytes):
    pos = 12
    while pos + 8 <= len(buf):
        cid, size = struct.unpack_from("<4sI", buf, pos)
        yield cid, pos + 8, size
        pos += 8 + size + (size & 1)


def read_wav(path) -> StereoClip:
    """Decode a stereo RIFF/WAVE file.

    Integer PCM codes are divided by ``2**(bits - 1)``; 24-bit samples are
    sign-extended to 32 bits first. Channel 0 is the left channel.
    """
    buf = Path(path).read_bytes()
    if len(buf) < 12 or buf[:4] != b"RIFF" or buf[8:12] != b"WAVE":
        raise WavError(f"{path}: malformed header: missing RIFF/WAVE signature")

    fmt = None
    data = None
    for cid, start, size in _iter_chunks(buf):
        if cid == b"fmt ":
            if size < 16 or start + size > len(buf):
                raise WavError(f"{path}: malformed header: fmt chunk size {size}")
            fmt = struct.unpack_from("<HHIIHH", buf, start)
            if fmt[0] == _WAVE_FORMAT_EXTENSIBLE:
                if size < 40:
                    raise WavError(f"{path}: malformed header: extensible fmt chunk size {size}")
                sub = struct.unpack_from("<H", buf, start + 24)[0]
                fmt = (sub,) + fmt[1:]
        elif cid == b"data":
            if start + size > len(buf):
                raise WavError(
                    f"{path}: malformed header: data chunk declares {size} bytes, "
                    f"{len(buf) - start} present"
                )
            data = buf[start:start + size]
    if fmt is None:
        raise WavError(f"{path}: malformed header: no fmt chunk")
    if data is None:
        raise WavError(f"{path}: malformed header: no data chunk")

    audio_format, channels, rate, _, block_align, bits = fmt
    if channels != 2:
        raise WavError(f"{path}: channel count ≠ 2 (got {channels})")
    if rate <= 0:
        raise WavError(f"{path}: malformed header: sample rate {rate}")

    if audio_format == _WAVE_FORMAT_PCM and bits == 16:
        encoding = "pcm16"
    elif audio_format == _WAVE_FORMAT_PCM and bits == 24:
        encoding = "pcm24"
    elif audio_format == _WAVE_FORMAT_IEEE_FLOAT and bits == 32:
        encoding = "float32"
    else:
        raise WavError(
            f"{path}: unsupported encoding: format tag {audio_format:#06x}, {bits} bits"
        )
    if block_align != channels * bits // 8:
        raise WavError(f"{path}: malformed header: block_align {block_align}")
    if len(data) % block_align:
        raise WavError(
            f"{path}: malformed data: {len(data)} bytes is not a whole number of frames"
        )

    samples = _decode(data, encoding).reshape(-1, 2)
    return StereoClip(samples[:, 0], samples[:, 1], rate, encoding)


def _decode(data: bytes, encoding: str) -> np.ndarray:
    if encoding == "pcm16":
        return np.frombuffer(data, dtype="<i2").astype(np.float64) / 32768.0
    if encoding == "pcm24":
        b = np.frombuffer(data, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
        v = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
        v = (v << 8) >> 8  # sign-extend from bit 23
        return v.astype(np.float64) / 8388608.0
    return np.frombuffer(data, dtype="<f4").astype(np.float64)


def _encode(samples: np.ndarray, encoding: str) -> bytes:
    if encoding == "pcm16":
        q = np.clip(np.round(samples * 32768.0), -32768, 32767).astype("<i2")
        return q.tobytes()
    if encoding == "pcm24":
        q = np.clip(np.round(samples * 8388608.0), -8388608, 8388607).astype(np.int32)
        b = q.astype("<i4").view(np.uint8).reshape(-1, 4)[:, :3]
        return np.ascontiguousarray(b).tobytes()
    return samples.astype("<f4").tobytes()


def write_wav(path, clip: StereoClip, encoding: str | None = None) -> None:
    """Write ``clip`` as an interleaved stereo WAV file."""
    encoding = encoding or clip.encoding
    if encoding not in ENCODINGS:
        raise ValueError(f"unknown encoding {encoding!r}")
    bits = {"pcm16": 16, "pcm24": 24, "float32": 32}[encoding]
    tag = _WAVE_FORMAT_IEEE_FLOAT if encoding == "float32" else _WAVE_FORMAT_PCM
    inter = np.empty(2 * clip.n_samples, dtype=np.float64)
    inter[0::2] = clip.left
    inter[1::2] = clip.right
    payload = _encode(inter, encoding)
    block = 2 * bits // 8
    fmt = struct.pack("<HHIIHH", tag, 2, clip.sample_rate_hz,
                      clip.sample_rate_hz * block, block, bits)
    pad = b"\x00" if len(payload) & 1 else b""
    body = (b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
            + b"data" + struct.pack("<I", len(payload)) + payload + pad)
    Path(path).write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)


def resample_if_needed(clip: StereoClip, target_hz: int = PIPELINE_RATE) -> StereoClip:
    """Polyphase windowed-sinc resampling of both channels to ``target_hz``."""
    if target_hz <= 0:
        raise ValueError(f"target_hz must be positive, got {target_hz}")
    if clip.sample_rate_hz == target_hz:
        return clip
    g = gcd(clip.sample_rate_hz, target_hz)
    up, down = target_hz // g, clip.sample_rate_hz // g
    left = resample_poly(clip.left, up, down)
    right = resample_poly(clip.right, up, down)
    return StereoClip(left, right, target_hz, clip.encoding)


# ---------------------------------------------------------------------------
# Metadata CSV
# ---------------------------------------------------------------------------

def wrap_azimuth(az: float) -> float:
    """Map a finite azimuth in degrees onto [-180, 180)."""
    if -180.0 <= az < 180.0:
        return az
    return (az + 180.0) % 360.0 - 180.0


def _parse_float(field: str, name: str, lineno: int) -> float:
    try:
        v = float(field)
    except ValueError:
        raise MetadataError(f"line {lineno}: non-numeric {name} field {field!r}") from None
    if not math.isfinite(v):
        raise MetadataError(f"line {lineno}: non-finite {name} field {field!r}")
    return v


def _parse_int(field: str, name: str, lineno: int) -> int:
    v = _parse_float(field, name, lineno)
    if v != int(v):
        raise MetadataError(f"line {lineno}: non-integer {name} field {field!r}")
    return int(v)


def read_metadata_rows(path) -> list[list[str]]:
    with open(path, newline="") as f:
        return [row for row in csv.reader(f) if row and any(c.strip() for c in row)]


def read_metadata_csv(path, distance_unit: str = "auto") -> list[Event]:
    """Parse a headerless DCASE metadata CSV.

    Rows have 5 columns (frame, class, source, azimuth, distance) or 6 columns
    (frame, class, source, azimuth, elevation, distance). ``distance_unit`` is
    ``"m"``, ``"cm"`` or ``"auto"``; ``auto`` treats the file as centimeters
    when every distance exceeds 50.
    """
    if distance_unit not in ("m", "cm", "auto"):
        raise ValueError(f"distance_unit must be m, cm or auto, got {distance_unit!r}")
    raw = []
    for lineno, row in enumerate(read_metadata_rows(path), start=1):
        row = [c.strip() for c in row]
        if len(row) == 5:
            fr, cl, src, az, dist = row
            el = "0"
        elif len(row) == 6:
            fr, cl, src, az, el, dist = row
        else:
            raise MetadataError(f"line {lineno}: expected 5 or 6 columns, got {len(row)}")
        frame = _parse_int(fr, "frame", lineno)
        cls = _parse_int(cl, "class", lineno)
        source = _parse_int(src, "source", lineno)
        azimuth = wrap_azimuth(_parse_float(az, "azimuth", lineno))
        elevation = _parse_float(el, "elevation", lineno)
        distance = _parse_float(dist, "distance", lineno)
        if frame < 0:
            raise MetadataError(f"line {lineno}: negative frame index {frame}")
        if cls < 0:
            raise MetadataError(f"line {lineno}: negative class id {cls}")
        if not -90.0 <= elevation <= 90.0:
            raise MetadataError(f"line {lineno}: elevation {elevation} outside [-90, 90]")
        if distance < 0:
            raise MetadataError(f"line {lineno}: negative distance {distance}")
        if distance == 0:
            raise MetadataError(f"line {lineno}: distance must be positive")
        raw.append((frame, cls, source, azimuth, elevation, distance))

    scale = 1.0
    if distance_unit == "cm" or (
        distance_unit == "auto" and raw and all(r[5] > 50.0 for r in raw)
    ):
        scale = 0.01

    events = []
    seen = set()
    for lineno, (frame, cls, source, az, el, d) in enumerate(raw, start=1):
        key = (frame, cls, source)
        if key in seen:
            raise MetadataError(f"line {lineno}: duplicate (frame, class, source) {key}")
        seen.add(key)
        events.append(Event(frame, cls, source, az, el, d * scale))
    return events


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def write_metadata_csv(path, events, with_elevation: bool = True) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        for e in events:
            row = [e.frame_index, e.class_id, e.source_id, _fmt(e.azimuth_deg)]
            if with_elevation:
                row.append(_fmt(e.elevation_deg))
            row.append(_fmt(e.distance_m))
            w.writerow(row)


# ---------------------------------------------------------------------------
# Tensors
# ---------------------------------------------------------------------------

def write_tensor(path, tensor) -> None:
    """Store ``tensor`` as an NPY v1.0 little-endian float32 array."""
    arr = np.ascontiguousarray(tensor, dtype="<f4")
    if not np.all(np.isfinite(arr)):
        raise ValueError("tensor contains non-finite values")
    with open(path, "wb") as f:
        np.lib.format.write_array(f, arr, version=(1, 0), allow_pickle=False)


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as f:
        try:
            version = np.lib.format.read_magic(f)
            if version != (1, 0):
                raise TensorFileError(f"{path}: unsupported NPY version {version}")
            shape, fortran, dtype = np.lib.format.read_array_header_1_0(f)
        except TensorFileError:
            raise
        except ValueError as exc:
            raise TensorFileError(f"{path}: bad NPY header: {exc}") from None
        if dtype != np.dtype("<f4") or fortran:
            raise TensorFileError(f"{path}: expected C-order <f4, got {dtype} fortran={fortran}")
        payload = f.read()
    expected = int(np.prod(shape, dtype=np.int64)) * 4
    if len(payload) != expected:
        raise TensorFileError(
            f"{path}: header declares {expected} payload bytes, found {len(payload)}"
        )
    return np.frombuffer(payload, dtype="<f4").reshape(shape).copy()
