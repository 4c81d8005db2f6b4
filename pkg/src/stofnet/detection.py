"""Turning network score vectors into sub-sample arrival estimates."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter1d

from .errors import InvalidArgumentError, UndefinedTPRError

DEFAULT_NMS_WINDOW = 7
DEFAULT_GRID_SIZE = 64


@dataclass(frozen=True)
class Detection:
    position: float
    confidence: float
    degenerate: bool = False


def detect_single(scores, R: int = 1) -> Detection:
    """Global argmax, lowest index on ties. Constant scores yield a degenerate detection."""
    s = np.asarray(scores, dtype=np.float64)
    if s.size == 0:
        raise InvalidArgumentError("scores are empty")
    idx = int(np.argmax(s))
    return Detection(idx / R, float(s[idx]), degenerate=bool(np.all(s == s[0])))


def nms_1d(scores, threshold: float, window: int | float = DEFAULT_NMS_WINDOW, R: int = 1) -> list[Detection]:
    """Threshold + non-maximum suppression.

    A sample is a candidate when it reaches ``threshold`` and equals the
    maximum of its ``±window`` neighbourhood. Candidates are accepted in
    descending score order (lower index first on ties) unless an accepted
    peak lies within ``window``. Positions are ``index / R``.
    """
    s = np.asarray(scores, dtype=np.float64)
    if not window >= 1:
        raise InvalidArgumentError(f"window must be >= 1, got {window}")
    if s.size == 0:
        return []
    w = int(min(window, s.size)) if math.isfinite(window) else s.size
    local_max = maximum_filter1d(s, size=2 * w + 1, mode="constant", cval=-np.inf)
    cand = np.flatnonzero((s >= threshold) & (s == local_max))
    if cand.size == 0:
        return []
    order = cand[np.lexsort((cand, -s[cand]))]
    kept: list[int] = []
    for i in order:
        if all(abs(i - k) > w for k in kept):
            kept.append(int(i))
    kept.sort()
    return [Detection(i / R, float(s[i])) for i in kept]


def gmean(tpr: float, far: float) -> float:
    return math.sqrt(max(tpr, 0.0) * max(1.0 - far, 0.0))


def default_threshold_grid(val_scores, window: int = DEFAULT_NMS_WINDOW, size: int = DEFAULT_GRID_SIZE) -> np.ndarray:
    """Evenly spaced thresholds from the typical local-peak score up to the largest frame maximum.

    Quantile grids crowd into the (far more numerous) noise peaks and leave
    the gap between noise and echo scores empty, so the range is split
    linearly instead.
    """
    peaks = [d.confidence for s in val_scores for d in nms_1d(s, -np.inf, window)]
    if not peaks:
        return np.zeros(1)
    lo, hi = float(np.median(peaks)), float(max(peaks))
    return np.linspace(lo, hi, size)


def roc_points(val_scores, val_truth, R: int, tau: float = 1.0, window: int = DEFAULT_NMS_WINDOW, candidates=None):
    """``(threshold, TPR, FAR)`` for every candidate threshold.

    FAR is the fraction of detections that are false, ``FP / (TP + FP)``, and
    is 0 when nothing is detected.
    """
    from .evaluation import match_detections

    if candidates is None:
        candidates = default_threshold_grid(val_scores, window)
    points = []
    for thr in candidates:
        tp = fp = fn = 0
        for scores, truth in zip(val_scores, val_truth):
            est = [d.position for d in nms_1d(scores, thr, window, R)]
            m = match_detections(est, truth, tau)
            tp, fp, fn = tp + m.tp, fp + m.fp, fn + m.fn
        if tp + fn == 0:
            raise UndefinedTPRError("validation truth contains no positives")
        far = fp / (tp + fp) if tp + fp else 0.0
        points.append((float(thr), tp / (tp + fn), far))
    return points


def best_gmean_point(points):
    """Entry with the largest g-mean.

    When several candidates tie, the middle one (lower median, in candidate
    order) is returned so the threshold sits inside the optimal plateau
    rather than on its edge.
    """
    if not points:
        raise InvalidArgumentError("no candidate thresholds")
    g = [gmean(tpr, far) for _, tpr, far in points]
    best = max(g)
    tied = [i for i, v in enumerate(g) if v == best]
    return points[tied[(len(tied) - 1) // 2]]


def select_threshold_gmeans(
    val_scores, val_truth, R: int, tau: float = 1.0, window: int = DEFAULT_NMS_WINDOW, candidates=None
) -> float:
    """Threshold maximizing ``sqrt(TPR * (1 - FAR))`` over the candidate grid."""
    if not any(len(t) for t in val_truth):
        raise UndefinedTPRError("validation truth contains no positives")
    if candidates is not None and len(candidates) == 1:
        return float(candidates[0])
    return best_gmean_point(roc_points(val_scores, val_truth, R, tau, window, candidates))[0]
