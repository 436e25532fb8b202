"""
Location- and distance-aware scoring
====================================

A prediction counts only when it is within 20 degrees and within 100 %
relative distance error of the reference it is matched to.
"""

from stereoseld import ScoredFrame, score

frames = [
    # good on both direction and distance
    ScoredFrame(0, 0, preds=[(10.0, 0.0, 2.0)], refs=[(0.0, 0.0, 2.2)]),
    # right place, distance off by more than 100 %
    ScoredFrame(1, 0, preds=[(0.0, 0.0, 5.0)], refs=[(0.0, 0.0, 2.0)]),
    # two sources, predictions listed in the other order
    ScoredFrame(2, 1, preds=[(-90.0, 0.0, 1.0), (90.0, 0.0, 1.0)],
                refs=[(85.0, 5.0, 1.1), (-95.0, 0.0, 0.9)]),
    # missed event
    ScoredFrame(3, 1, preds=[], refs=[(30.0, 0.0, 3.0)]),
]
report = score(frames)
print(report.to_text())
