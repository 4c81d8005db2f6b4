"""Tolerance-gated matching, RMSE/Jaccard aggregation and the benchmark runner."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidArgumentError, NoTruePositivesWarning

log = logging.getLogger(__name__)

CSV_HEADER = ["model", "rmse_mean", "rmse_std", "jaccard_percent", "weights", "time_ms"]
DEFAULT_TAU = 1.0


@dataclass
class MatchResult:
    tp: int = 0
    fp: int = 0
    fn: int = 0
    matched_errors: list[float] = field(default_factory=list)


def match_detections(estimates, truth, tau: float = DEFAULT_TAU) -> MatchResult:
    """One-to-one matching of estimates to truths closer than ``tau``.

    The assignment maximizes the number of matches and, among those, minimizes
    the summed distance. Unmatched estimates are false positives, unmatched
    truths false negatives.
    """
    if not tau > 0:
        raise InvalidArgumentError(f"tau must be positive, got {tau}")
    est = np.asarray(estimates, dtype=np.float64).reshape(-1)
    tru = np.asarray(truth, dtype=np.float64).reshape(-1)
    if est.size == 0 or tru.size == 0:
        return MatchResult(0, int(est.size), int(tru.size), [])
    dist = np.abs(est[:, None] - tru[None, :])
    feasible = dist < tau
    # Each feasible pair is worth more than any total distance, so the
    # minimum-cost assignment first maximizes matches, then minimizes distance.
    bonus = tau * (min(est.size, tru.size) + 1)
    cost = np.where(feasible, dist - bonus, 0.0)
    rows, cols = linear_sum_assignment(cost)
    keep = feasible[rows, cols]
    errors = sorted(float(d) for d in dist[rows[keep], cols[keep]])
    tp = len(errors)
    return MatchResult(tp, int(est.size) - tp, int(tru.size) - tp, errors)


def jaccard(m: MatchResult) -> float | None:
    """``100 * TP / (TP + FP + FN)``, or ``None`` when all counts are zero."""
    denom = m.tp + m.fp + m.fn
    if denom == 0:
        return None
    return 100.0 * m.tp / denom


def frame_rmse(m: MatchResult) -> float | None:
    if not m.matched_errors:
        return None
    return math.sqrt(float(np.mean(np.square(m.matched_errors))))


def rmse_aggregate(per_frame: list[MatchResult]) -> tuple[float | None, float | None]:
    """Mean and population std of per-frame RMSE over frames with at least one TP."""
    values = [r for r in (frame_rmse(m) for m in per_frame) if r is not None]
    if not values:
        warnings.warn("no true positives; RMSE undefined", NoTruePositivesWarning, stacklevel=2)
        return None, None
    return float(np.mean(values)), float(np.std(values))


def pooled(per_frame: list[MatchResult]) -> MatchResult:
    total = MatchResult()
    for m in per_frame:
        total.tp += m.tp
        total.fp += m.fp
        total.fn += m.fn
        total.matched_errors.extend(m.matched_errors)
    return total


def format_rmse(mean: float | None, std: float | None) -> str:
    if mean is None:
        return "n/a"
    return f"{mean:.3f} ± {std:.3f}"


@dataclass
class ReportRow:
    model: str
    rmse_mean: float | None
    rmse_std: float | None
    jaccard_percent: float | None
    weights: int
    time_ms: float | None
    error: str | None = None


@dataclass
class EvalReport:
    rows: list[ReportRow]
    tau: float = DEFAULT_TAU
    detections: dict[str, list[dict]] = field(default_factory=dict)

    def to_dict(self, with_detections: bool = False) -> dict:
        out = {"tau": self.tau, "rows": [asdict(r) for r in self.rows]}
        if with_detections:
            out["detections"] = self.detections
        return out

    def to_json(self, with_detections: bool = False) -> str:
        return json.dumps(self.to_dict(with_detections), indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in self.rows:
            writer.writerow(
                [r.model] + ["" if v is None else v for v in (r.rmse_mean, r.rmse_std, r.jaccard_percent, r.weights, r.time_ms)]
            )
        return buf.getvalue()

    def table(self) -> str:
        lines = [f"{'Model':<14}{'RMSE [Sample]':>18}{'Jaccard [%]':>13}{'Weights [k#]':>14}{'Time [ms]':>11}"]
        for r in self.rows:
            if r.error:
                lines.append(f"{r.model:<14}  error: {r.error}")
                continue
            jac = "n/a" if r.jaccard_percent is None else f"{r.jaccard_percent:.3f}"
            lines.append(
                f"{r.model:<14}{format_rmse(r.rmse_mean, r.rmse_std):>18}{jac:>13}"
                f"{round(r.weights / 1000):>14}{r.time_ms:>11.3f}"
            )
        return "\n".join(lines)


REPORT_SCHEMA = {
    "type": "object",
    "required": ["tau", "rows"],
    "properties": {
        "tau": {"type": "number", "exclusiveMinimum": 0},
        "rows": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["model", "rmse_mean", "rmse_std", "jaccard_percent", "weights", "time_ms"],
                "properties": {
                    "model": {"type": "string"},
                    "rmse_mean": {"type": ["number", "null"], "minimum": 0},
                    "rmse_std": {"type": ["number", "null"], "minimum": 0},
                    "jaccard_percent": {"type": ["number", "null"], "minimum": 0, "maximum": 100},
                    "weights": {"type": "integer", "minimum": 0},
                    "time_ms": {"type": ["number", "null"], "minimum": 0},
                    "error": {"type": ["string", "null"]},
                },
            },
        },
        "detections": {"type": "object"},
    },
}


def evaluate_detector(detector, frames, tau: float = DEFAULT_TAU):
    """Run ``detector`` on every frame; return per-frame matches, detections and mean ms per frame."""
    matches, dets, elapsed = [], [], 0.0
    for i, lf in enumerate(frames):
        t0 = time.perf_counter()
        found = detector.detect(lf.frame)
        elapsed += time.perf_counter() - t0
        matches.append(match_detections([d.position for d in found], lf.truth_positions, tau))
        dets.extend({"frame_index": i, "position": d.position, "confidence": d.confidence} for d in found)
    return matches, dets, 1000.0 * elapsed / max(len(frames), 1)


def benchmark(models, dataset, tau: float = DEFAULT_TAU, seed: int = 0) -> EvalReport:
    """Evaluate each detector on ``dataset`` and collect one report row per model.

    A model that fails (for example on a shape mismatch) yields an error row
    and the run continues.
    """
    import torch

    rows, all_dets = [], {}
    for detector in models:
        torch.manual_seed(seed)
        try:
            matches, dets, ms = evaluate_detector(detector, dataset, tau)
        except Exception as exc:  # noqa: BLE001 - reported per model
            log.warning("model %s failed: %s", detector.name, exc)
            rows.append(ReportRow(detector.name, None, None, None, detector.n_parameters, None, str(exc)))
            continue
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NoTruePositivesWarning)
            mean, std = rmse_aggregate(matches)
        rows.append(ReportRow(detector.name, mean, std, jaccard(pooled(matches)), detector.n_parameters, ms))
        all_dets[detector.name] = dets
    return EvalReport(rows, tau, all_dets)
