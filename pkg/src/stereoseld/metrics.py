"""Location- and distance-aware SELD scoring.

Per (frame, class), predictions and references are paired by a minimum-cost
one-to-one assignment over angular error. A pair is a true positive when its
angular error is at most 20 degrees and its relative distance error at most
1; failing pairs count once as FP and once as FN.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

DOA_THRESHOLD_DEG = 20.0
DIST_THRESHOLD = 1.0


@dataclass
class ScoredFrame:
    """Predictions and references of one class in one label frame.

    ``preds`` and ``refs`` hold ``(azimuth_deg, elevation_deg, distance_m)``.
    ``frame`` is any hashable key (e.g. ``(stem, frame_index)``).
    """

    frame: object
    class_id: int
    preds: list = field(default_factory=list)
    refs: list = field(default_factory=list)


@dataclass
class ClassCounts:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    angular_errors: list = field(default_factory=list)
    distance_errors: list = field(default_factory=list)

    @property
    def n_ref(self) -> int:
        return self.tp + self.fn


@dataclass
class MetricsReport:
    f_score: float
    le_cd_deg: float
    rde_cd: float
    e_seld: float
    counts: dict

    def to_text(self) -> str:
        lines = [
            f"{'F20/1':<10}{self.f_score * 100:>10.2f} %",
            f"{'LE_CD':<10}{self.le_cd_deg:>10.2f} deg",
            f"{'RDE_CD':<10}{self.rde_cd:>10.3f}",
            f"{'E_SELD':<10}{self.e_seld:>10.3f}",
            "",
            f"{'class':>5} {'TP':>7} {'FP':>7} {'FN':>7}",
        ]
        for cls in sorted(self.counts):
            c = self.counts[cls]
            lines.append(f"{cls:>5} {c.tp:>7} {c.fp:>7} {c.fn:>7}")
        return "\n".join(lines)

    def to_keyvalue(self) -> str:
        lines = [
            f"f_score={self.f_score!r}",
            f"le_cd_deg={self.le_cd_deg!r}",
            f"rde_cd={self.rde_cd!r}",
            f"e_seld={self.e_seld!r}",
        ]
        for cls in sorted(self.counts):
            c = self.counts[cls]
            lines.append(f"class_{cls}_tp={c.tp}")
            lines.append(f"class_{cls}_fp={c.fp}")
            lines.append(f"class_{cls}_fn={c.fn}")
        return "\n".join(lines)


def angular_error(a, b):
    """Great-circle angle in degrees between ``(az, el)`` directions.

    Evaluated with the haversine form, which equals
    ``arccos(sin el_a sin el_b + cos el_a cos el_b cos(az_a - az_b))`` but
    stays exact for identical directions.
    """
    az_a, el_a = np.deg2rad(a[0]), np.deg2rad(a[1])
    az_b, el_b = np.deg2rad(b[0]), np.deg2rad(b[1])
    hav = (np.sin((el_a - el_b) / 2) ** 2
           + np.cos(el_a) * np.cos(el_b) * np.sin((az_a - az_b) / 2) ** 2)
    out = np.rad2deg(2.0 * np.arcsin(np.sqrt(np.clip(hav, 0.0, 1.0))))
    return float(out) if np.ndim(out) == 0 else out


def angular_error_matrix(preds, refs) -> np.ndarray:
    p = np.asarray(preds, dtype=np.float64).reshape(-1, 3)
    r = np.asarray(refs, dtype=np.float64).reshape(-1, 3)
    return angular_error((p[:, None, 0], p[:, None, 1]), (r[None, :, 0], r[None, :, 1]))


def optimal_assignment(cost) -> list[tuple[int, int]]:
    """Minimum-total-cost one-to-one pairing (rows to columns)."""
    cost = np.asarray(cost, dtype=np.float64)
    if cost.size == 0:
        return []
    rows, cols = linear_sum_assignment(cost)
    return sorted(zip(rows.tolist(), cols.tolist()))


def match_frame(preds, refs) -> list[tuple[int, int]]:
    """Pairs ``(pred_index, ref_index)`` minimising total angular error."""
    if len(preds) == 0 or len(refs) == 0:
        return []
    return optimal_assignment(angular_error_matrix(preds, refs))


def e_seld(f: float, le_deg: float, rde: float) -> float:
    return ((1.0 - f) + le_deg / 180.0 + rde) / 3.0


def accumulate(frames, doa_threshold: float = DOA_THRESHOLD_DEG,
               dist_threshold: float = DIST_THRESHOLD) -> dict:
    """Fold a stream of :class:`ScoredFrame` into per-class counts."""
    counts = defaultdict(ClassCounts)
    for fr in frames:
        c = counts[fr.class_id]
        pairs = match_frame(fr.preds, fr.refs)
        for i, j in pairs:
            p, r = fr.preds[i], fr.refs[j]
            ang = angular_error((p[0], p[1]), (r[0], r[1]))
            rel = abs(p[2] - r[2]) / r[2]
            c.angular_errors.append(ang)
            c.distance_errors.append(rel)
            if ang <= doa_threshold and rel <= dist_threshold:
                c.tp += 1
            else:
                c.fp += 1
                c.fn += 1
        c.fp += len(fr.preds) - len(pairs)
        c.fn += len(fr.refs) - len(pairs)
    return dict(counts)


def summarize(counts: dict, average: str = "macro") -> MetricsReport:
    if average not in ("macro", "micro"):
        raise ValueError(f"average must be 'macro' or 'micro', got {average!r}")
    active = {k: c for k, c in counts.items() if c.n_ref > 0}
    if not active:
        raise ValueError("reference stream contains no events")

    if average == "micro":
        tp = sum(c.tp for c in active.values())
        fp = sum(c.fp for c in counts.values())
        fn = sum(c.fn for c in active.values())
        ang = [a for c in active.values() for a in c.angular_errors]
        rel = [d for c in active.values() for d in c.distance_errors]
        f = 2 * tp / (2 * tp + fp + fn)
        le = math.fsum(ang) / len(ang) if ang else 180.0
        rde = math.fsum(rel) / len(rel) if rel else 1.0
    else:
        fs, les, rdes = [], [], []
        for cls in sorted(active):
            c = active[cls]
            fs.append(2 * c.tp / (2 * c.tp + c.fp + c.fn))
            if c.angular_errors:
                les.append(math.fsum(c.angular_errors) / len(c.angular_errors))
                rdes.append(math.fsum(c.distance_errors) / len(c.distance_errors))
            else:
                les.append(180.0)
                rdes.append(1.0)
        f = math.fsum(fs) / len(fs)
        le = math.fsum(les) / len(les)
        rde = math.fsum(rdes) / len(rdes)
    return MetricsReport(f, le, rde, e_seld(f, le, rde), counts)


def score(frames, average: str = "macro", doa_threshold: float = DOA_THRESHOLD_DEG,
          dist_threshold: float = DIST_THRESHOLD) -> MetricsReport:
    return summarize(accumulate(frames, doa_threshold, dist_threshold), average)


def frames_from_events(pred_events, ref_events, clip_key=None):
    """Group two event lists into :class:`ScoredFrame` items per (frame, class)."""
    grouped = defaultdict(lambda: ([], []))
    for e in pred_events:
        grouped[(e.frame_index, e.class_id)][0].append(
            (e.azimuth_deg, e.elevation_deg, e.distance_m))
    for e in ref_events:
        grouped[(e.frame_index, e.class_id)][1].append(
            (e.azimuth_deg, e.elevation_deg, e.distance_m))
    for (frame, cls) in sorted(grouped):
        preds, refs = grouped[(frame, cls)]
        yield ScoredFrame((clip_key, frame), cls, preds, refs)
