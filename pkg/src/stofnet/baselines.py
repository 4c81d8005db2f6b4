"""Classical arrival-time detectors used as comparison anchors.

``gradient`` is a reconstruction: envelope-derivative sign changes refined by
a parabolic fit. The cited method is not described in enough detail to
reproduce it exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .detection import Detection
from .errors import InvalidArgumentError
from .signal_core import Frame, envelope


def parabolic_offset(y_left: float, y_center: float, y_right: float) -> float:
    """Vertex offset of the parabola through three equally spaced samples."""
    denom = 2.0 * (y_left - 2.0 * y_center + y_right)
    if denom == 0:
        return 0.0
    return (y_left - y_right) / denom


def _refine(y: np.ndarray, i: int) -> float:
    if 0 < i < len(y) - 1:
        return i + parabolic_offset(y[i - 1], y[i], y[i + 1])
    return float(i)


def gradient_peak_detect(frame: Frame, rel_threshold: float = 0.3) -> list[Detection]:
    env = envelope(frame)
    peak = env.max()
    if peak <= 0:
        return []
    d = np.diff(env)
    idx = np.flatnonzero((d[:-1] > 0) & (d[1:] < 0)) + 1
    idx = idx[env[idx] >= rel_threshold * peak]
    return [Detection(_refine(env, int(i)), float(env[i])) for i in idx]


def threshold_first_crossing(frame: Frame, rel_threshold: float = 0.5) -> Detection | None:
    """First upward crossing of ``rel_threshold * max(envelope)``, linearly interpolated."""
    env = envelope(frame)
    peak = env.max()
    if peak <= 0:
        return None
    level = rel_threshold * peak
    i = int(np.argmax(env >= level))
    if i == 0:
        return Detection(0.0, float(env[0]))
    lo, hi = env[i - 1], env[i]
    return Detection(i - 1 + (level - lo) / (hi - lo), float(level))


def xcorr_toa(frame: Frame, template) -> Detection:
    """Matched-filter arrival estimate.

    The reported position is where the template's center sample lands at the
    best lag, refined by a parabolic fit on the normalized correlation.
    Multi-channel frames are reduced to their envelope first.
    """
    t = np.asarray(template, dtype=np.float64)
    energy = float(np.dot(t, t))
    if t.size == 0 or energy == 0:
        raise InvalidArgumentError("template has zero energy")
    x = frame.samples[:, 0].astype(np.float64) if frame.channels == 1 else envelope(frame)
    if t.size > x.size:
        raise InvalidArgumentError(f"template of length {t.size} exceeds frame length {x.size}")
    norm = np.sqrt(energy * float(np.dot(x, x))) or 1.0
    # full correlation: entry k corresponds to the template start at lag k - (len(t) - 1)
    corr = np.correlate(x, t, mode="full") / norm
    k = int(np.argmax(corr))
    center = (t.size - 1) / 2
    return Detection(_refine(corr, k) - (t.size - 1) + center, float(corr[k]))


@dataclass
class BaselineConfig:
    method: str
    rel_threshold: float = 0.3
    template: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.method not in BASELINES:
            raise InvalidArgumentError(f"unknown baseline {self.method!r}; known: {sorted(BASELINES)}")
        if not 0 < self.rel_threshold <= 1:
            raise InvalidArgumentError("rel_threshold must be in (0, 1]")
        if self.method == "xcorr" and (self.template is None or len(self.template) == 0):
            raise InvalidArgumentError("xcorr needs a non-empty template")


class BaselineDetector:
    """Uniform ``detect(frame) -> list[Detection]`` wrapper around one baseline."""

    n_parameters = 0

    def __init__(self, config: BaselineConfig):
        self.config = config
        self.name = config.method

    def detect(self, frame: Frame) -> list[Detection]:
        cfg = self.config
        if cfg.method == "gradient":
            return gradient_peak_detect(frame, cfg.rel_threshold)
        if cfg.method == "threshold":
            det = threshold_first_crossing(frame, cfg.rel_threshold)
            return [] if det is None else [det]
        return [xcorr_toa(frame, cfg.template)]


BASELINES = ("gradient", "threshold", "xcorr")
