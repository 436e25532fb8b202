import itertools
import json
import math
from pathlib import Path

import numpy as np
import pytest

from stereoseld.labels import direction_vector
from stereoseld.metrics import (
    ScoredFrame,
    accumulate,
    angular_error,
    e_seld,
    frames_from_events,
    match_frame,
    optimal_assignment,
    score,
    summarize,
)
from stereoseld.wave_io import Event

FIXTURE = Path(__file__).parent / "fixtures" / "three_class_scoring.json"


def brute_force_cost(cost):
    """Minimum total cost over every injective row->column mapping."""
    n, m = cost.shape
    if n <= m:
        return min(sum(cost[i, p[i]] for i in range(n))
                   for p in itertools.permutations(range(m), n))
    return min(sum(cost[p[j], j] for j in range(m))
               for p in itertools.permutations(range(n), m))


def test_angular_error_examples():
    assert angular_error((10.0, 20.0), (10.0, 20.0)) == 0.0
    assert angular_error((0.0, 0.0), (90.0, 0.0)) == pytest.approx(90.0)
    assert angular_error((0.0, 90.0), (123.0, -90.0)) == pytest.approx(180.0)


def test_angular_error_vector_oracle(rng):
    a = np.column_stack([rng.uniform(-180, 180, 500), rng.uniform(-90, 90, 500)])
    b = np.column_stack([rng.uniform(-180, 180, 500), rng.uniform(-90, 90, 500)])
    ua, ub = direction_vector(a[:, 0], a[:, 1]), direction_vector(b[:, 0], b[:, 1])
    oracle = np.degrees(np.arccos(np.clip((ua * ub).sum(1), -1, 1)))
    got = angular_error((a[:, 0], a[:, 1]), (b[:, 0], b[:, 1]))
    np.testing.assert_allclose(got, oracle, atol=1e-6)


def test_match_trivial_cases():
    assert match_frame([(0, 0, 1)], [(5, 0, 1)]) == [(0, 0)]
    assert match_frame([], [(0, 0, 1), (1, 1, 1)]) == []


def test_match_optimal_not_greedy():
    # greedy pairs pred 0 with ref 0 (cost 10) then pred 1 with ref 1 (cost 60)
    preds = [(10.0, 0.0, 1.0), (-50.0, 0.0, 1.0)]
    refs = [(0.0, 0.0, 1.0), (20.0, 0.0, 1.0)]
    assert match_frame(preds, refs) == [(0, 1), (1, 0)]


@pytest.mark.parametrize("n,m", [(1, 1), (2, 3), (3, 2), (4, 4), (5, 5), (5, 2)])
def test_assignment_matches_brute_force(rng, n, m):
    for _ in range(20):
        cost = rng.uniform(0, 180, (n, m))
        pairs = optimal_assignment(cost)
        assert len(pairs) == min(n, m)
        assert sum(cost[i, j] for i, j in pairs) == pytest.approx(brute_force_cost(cost), abs=1e-9)


@pytest.mark.parametrize("row", [
    (0.2372, 20.8, 0.347, 0.408452),
    (0.2460, 17.0, 0.287, 0.378481),
    (0.4532, 13.2, 0.262, 0.294044),
])
def test_e_seld_arithmetic(row):
    f, le, rde, expected = row
    assert e_seld(f, le, rde) == pytest.approx(expected, abs=1e-6)
    assert e_seld(1, 0, 0) == 0


def frame(key, cls, preds, refs):
    return ScoredFrame(key, cls, list(preds), list(refs))


def test_perfect_predictions():
    refs = [frame(t, t % 3, [], [(10.0 * t, 0.0, 1.0 + t)]) for t in range(9)]
    for f in refs:
        f.preds = list(f.refs)
    r = score(refs)
    assert (r.f_score, r.le_cd_deg, r.rde_cd, r.e_seld) == (1.0, 0.0, 0.0, 0.0)


def test_threshold_semantics():
    r = score([frame(0, 0, [(25.0, 0.0, 2.0)], [(0.0, 0.0, 2.0)])])
    assert r.f_score == 0.0
    assert r.le_cd_deg == pytest.approx(25.0)
    assert r.counts[0].tp == 0 and r.counts[0].fp == 1 and r.counts[0].fn == 1


def test_distance_threshold():
    ok = score([frame(0, 0, [(0.0, 0.0, 3.9)], [(0.0, 0.0, 2.0)])])
    bad = score([frame(0, 0, [(0.0, 0.0, 4.1)], [(0.0, 0.0, 2.0)])])
    assert ok.f_score == 1.0 and bad.f_score == 0.0
    assert bad.rde_cd == pytest.approx(1.05)


def load_fixture():
    fixture = json.loads(FIXTURE.read_text())
    frames = [frame(tuple(f["frame"]), f["class"], [tuple(p) for p in f["preds"]],
                    [tuple(r) for r in f["refs"]]) for f in fixture["frames"]]
    return frames, fixture["expected"]


def test_three_class_fixture():
    frames, exp = load_fixture()
    counts = accumulate(frames)
    for cls, c in exp["counts"].items():
        got = counts[int(cls)]
        assert [got.tp, got.fp, got.fn] == c
    r = summarize(counts)
    assert r.f_score == pytest.approx(exp["f_macro"], abs=1e-12)
    assert r.le_cd_deg == pytest.approx(exp["le_macro"], abs=1e-9)
    assert r.rde_cd == pytest.approx(exp["rde_macro"], abs=1e-12)
    assert r.e_seld == pytest.approx(e_seld(r.f_score, r.le_cd_deg, r.rde_cd), abs=1e-12)
    m = summarize(counts, "micro")
    assert m.f_score == pytest.approx(exp["f_micro"], abs=1e-12)


def test_permutation_invariance(rng):
    frames, _ = load_fixture()
    base = score(frames)
    for _ in range(10):
        shuffled = [frames[i] for i in rng.permutation(len(frames))]
        shuffled = [frame(f.frame, f.class_id, [f.preds[i] for i in rng.permutation(len(f.preds))],
                          f.refs) for f in shuffled]
        r = score(shuffled)
        assert (r.f_score, r.le_cd_deg, r.rde_cd) == (base.f_score, base.le_cd_deg, base.rde_cd)


def test_distance_scaling_invariance(rng):
    frames = []
    for t in range(50):
        refs = [(rng.uniform(-180, 180), rng.uniform(-60, 60), rng.uniform(0.5, 5))]
        preds = [(r[0] + rng.normal(0, 15), r[1], r[2] * rng.uniform(0.3, 2.5)) for r in refs]
        frames.append(frame(t, t % 4, preds, refs))
    base = score(frames)
    scaled = [frame(f.frame, f.class_id, [(a, e, 3.7 * d) for a, e, d in f.preds],
                    [(a, e, 3.7 * d) for a, e, d in f.refs]) for f in frames]
    assert score(scaled).rde_cd == pytest.approx(base.rde_cd, rel=1e-12)


def test_zero_tp_class_penalty():
    frames = [frame(0, 0, [(0.0, 0.0, 1.0)], [(0.0, 0.0, 1.0)]),
              frame(1, 1, [], [(0.0, 0.0, 1.0)]),
              frame(2, 2, [(0.0, 0.0, 1.0)], [])]  # class 2 has no references
    r = score(frames)
    assert r.f_score == pytest.approx(0.5)
    assert r.le_cd_deg == pytest.approx(90.0)
    assert r.rde_cd == pytest.approx(0.5)


def test_empty_reference_stream():
    with pytest.raises(ValueError, match="no events"):
        score([frame(0, 0, [(0.0, 0.0, 1.0)], [])])
    with pytest.raises(ValueError):
        score([], average="weighted")


def test_frames_from_events():
    preds = [Event(0, 1, 0, 10.0, 0.0, 1.0), Event(2, 1, 0, 0.0, 0.0, 1.0)]
    refs = [Event(0, 1, 0, 0.0, 0.0, 1.0), Event(0, 1, 1, 50.0, 0.0, 1.0)]
    frames = list(frames_from_events(preds, refs, "a"))
    assert [(f.frame, f.class_id, len(f.preds), len(f.refs)) for f in frames] == [
        (("a", 0), 1, 1, 2), (("a", 2), 1, 1, 0)]


def test_report_formats():
    r = score([frame(0, 0, [(0.0, 0.0, 1.0)], [(0.0, 0.0, 1.0)])])
    kv = dict(line.split("=") for line in r.to_keyvalue().splitlines())
    assert float(kv["e_seld"]) == 0.0 and kv["class_0_tp"] == "1"
    assert "E_SELD" in r.to_text()
