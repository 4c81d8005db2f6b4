"""Network-backed detector and resolution of ``--model`` arguments."""
from __future__ import annotations

from pathlib import Path

import numpy as np
import torch

from .baselines import BASELINES, BaselineConfig, BaselineDetector
from .dataset import SyntheticConfig, pulse_template
from .detection import DEFAULT_NMS_WINDOW, Detection, detect_single, nms_1d, select_threshold_gmeans
from .errors import InvalidArgumentError
from .model import StofNet, count_parameters, load_model, read_model_meta
from .signal_core import Frame, normalize_amplitude


def network_scores(net: StofNet, frames: list[Frame], batch_size: int = 16) -> list[np.ndarray]:
    """Scores for normalized frames, batched."""
    out = []
    net.eval()
    with torch.no_grad():
        for i in range(0, len(frames), batch_size):
            chunk = [normalize_amplitude(f).samples.T for f in frames[i : i + batch_size]]
            x = torch.from_numpy(np.ascontiguousarray(np.stack(chunk), dtype=np.float32))
            out.extend(net(x).numpy())
    return out


class NetworkDetector:
    """Argmax (``mode="single"``) or threshold + NMS (``mode="multi"``) on network scores."""

    def __init__(self, net: StofNet, mode: str = "single", threshold: float | None = None,
                 window: int = DEFAULT_NMS_WINDOW, name: str = "stofnet"):
        if mode not in ("single", "multi"):
            raise InvalidArgumentError(f"mode must be 'single' or 'multi', got {mode!r}")
        if mode == "multi" and threshold is None:
            raise InvalidArgumentError("multi mode needs a threshold")
        self.net, self.mode, self.threshold, self.window, self.name = net, mode, threshold, window, name
        self.n_parameters = count_parameters(net)

    def scores(self, frame: Frame) -> np.ndarray:
        return network_scores(self.net, [frame])[0]

    def detect_scores(self, scores: np.ndarray) -> list[Detection]:
        R = self.net.config.R
        if self.mode == "single":
            return [detect_single(scores, R)]
        return nms_1d(scores, self.threshold, self.window, R)

    def detect(self, frame: Frame) -> list[Detection]:
        return self.detect_scores(self.scores(frame))


def calibrate_threshold(net: StofNet, val_frames, tau: float = 1.0, window: int = DEFAULT_NMS_WINDOW) -> float:
    """G-means threshold on a labeled validation set."""
    scores = network_scores(net, [lf.frame for lf in val_frames])
    truth = [lf.truth_positions for lf in val_frames]
    return select_threshold_gmeans(scores, truth, net.config.R, tau, window)


def is_model_dir(tag: str) -> bool:
    return (Path(tag) / "model.json").exists()


def resolve_detector(tag: str, *, mode: str = "single", threshold=None, generator: dict | None = None,
                     rel_threshold: float = 0.3, window: int = DEFAULT_NMS_WINDOW):
    """Build a detector from a baseline tag or a model directory.

    ``threshold`` is a number, ``None`` or ``"auto"``; ``"auto"`` uses the
    threshold stored with the model at training time. The xcorr template is
    rebuilt from the dataset's generator settings.
    """
    if tag in BASELINES:
        template = None
        if tag == "xcorr":
            if not generator:
                raise InvalidArgumentError("xcorr needs a dataset produced by the synthetic generator (template source)")
            fields = SyntheticConfig.__dataclass_fields__
            template = pulse_template(SyntheticConfig(**{k: v for k, v in generator.items() if k in fields}))
        return BaselineDetector(BaselineConfig(tag, rel_threshold, template))
    if not is_model_dir(tag):
        raise InvalidArgumentError(f"unknown model {tag!r}; known tags: {list(BASELINES)} or a model directory")
    net = load_model(tag)
    if mode == "single":
        threshold = None
    elif threshold == "auto":
        threshold = read_model_meta(tag)["extra"].get("threshold")
        if threshold is None:
            raise InvalidArgumentError(f"model {tag} stores no calibrated threshold; pass a value or validation data")
    return NetworkDetector(net, mode, None if threshold is None else float(threshold), window, name=Path(tag).name)
