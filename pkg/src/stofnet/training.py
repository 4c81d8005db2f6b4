"""Loss, learning-rate schedule, early stopping and the training loop."""
from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .dataset import LabeledFrame, make_target_mask, random_crop_pad
from .errors import InvalidArgumentError, ShapeError, TrainingDivergedError
from .model import StofNet
from .signal_core import add_noise_snr, normalize_amplitude

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    batch_size: int = 4
    weight_decay: float = 1e-8
    lr_start: float = 5e-4
    max_epochs: int = 80
    early_stop_delta: float = 1e-6
    early_stop_patience: int = 5
    lambda1: float = 1e-2
    sigma: float = 1.0
    noise_snr_db: float = 30.0
    crop: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1 or self.early_stop_patience < 1:
            raise InvalidArgumentError("batch_size and early_stop_patience must be >= 1")
        if not (self.lr_start > 0 and self.weight_decay >= 0 and self.lambda1 >= 0):
            raise InvalidArgumentError("lr_start must be positive; weight_decay and lambda1 non-negative")


@dataclass
class LossBreakdown:
    total: float
    l2_term: float
    l1_term: float


@dataclass
class EpochRecord:
    epoch: int
    lr: float
    train_loss: float
    val_loss: float | None


@dataclass
class TrainHistory:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int | None = None
    stopped_early: bool = False

    def to_dict(self) -> dict:
        return {
            "best_epoch": self.best_epoch,
            "stopped_early": self.stopped_early,
            "epochs": [vars(e) for e in self.epochs],
        }


def loss(prediction, target, lambda1: float) -> LossBreakdown:
    """Squared error against the scaled mask plus ``lambda1`` times the L1 norm of the prediction.

    Both terms are plain sums over the ``N*R`` grid. ``target`` is a
    ``TargetMask`` or a raw array of mask values.
    """
    values = getattr(target, "values", target)
    p = np.asarray(prediction, dtype=np.float64)
    t = np.asarray(values, dtype=np.float64)
    if p.shape != t.shape:
        raise ShapeError(f"prediction shape {p.shape} != target shape {t.shape}")
    l2 = float(np.sum((p - t) ** 2))
    l1 = float(lambda1 * np.sum(np.abs(p)))
    return LossBreakdown(l2 + l1, l2, l1)


def batch_loss(prediction: torch.Tensor, target: torch.Tensor, lambda1: float) -> torch.Tensor:
    """Mean over the batch of per-frame totals; torch counterpart of :func:`loss`."""
    per_frame = ((prediction - target) ** 2).sum(dim=1) + lambda1 * prediction.abs().sum(dim=1)
    return per_frame.mean()


def cosine_lr(step: int, total_steps: int, lr_start: float) -> float:
    if total_steps <= 0 or step >= total_steps:
        return 0.0
    step = max(step, 0)
    return max(0.0, 0.5 * lr_start * (1 + math.cos(math.pi * step / total_steps)))


def early_stop(history, delta: float, patience: int) -> bool:
    """True once the best loss has gone ``patience`` epochs without improving by more than ``delta``."""
    if not history:
        return False
    best = history[0]
    since = 0
    for value in history[1:]:
        if best - value > delta:
            best = value
            since = 0
        else:
            since += 1
    return since >= patience


def _prepare(lf: LabeledFrame, R: int, sigma: float, rng: np.random.Generator | None, cfg: TrainConfig):
    """Normalize and (for training frames) augment one frame; return input and mask arrays."""
    frame = normalize_amplitude(lf.frame)
    labels = lf.truth_positions
    if rng is not None:
        noise_seed, crop_seed = (int(s) for s in rng.integers(0, 2**63, size=2))
        if math.isfinite(cfg.noise_snr_db) and np.any(frame.samples):
            frame = add_noise_snr(frame, cfg.noise_snr_db, noise_seed)
        if cfg.crop:
            cropped = random_crop_pad(LabeledFrame(frame, labels), crop_seed)
            frame, labels = cropped.frame, cropped.truth_positions
    mask = make_target_mask(labels, frame.n_samples, R, sigma)
    return np.ascontiguousarray(frame.samples.T, dtype=np.float32), mask.values.astype(np.float32)


def _stack(items):
    xs, ys = zip(*items)
    return torch.from_numpy(np.stack(xs)), torch.from_numpy(np.stack(ys))


def evaluate_loss(net: StofNet, frames: list[LabeledFrame], cfg: TrainConfig) -> float:
    """Mean per-frame loss on clean (normalized, unaugmented) frames."""
    if not frames:
        return float("nan")
    net.eval()
    total = 0.0
    with torch.no_grad():
        for i in range(0, len(frames), cfg.batch_size):
            chunk = frames[i : i + cfg.batch_size]
            x, y = _stack([_prepare(lf, net.config.R, cfg.sigma, None, cfg) for lf in chunk])
            total += batch_loss(net(x), y, cfg.lambda1).item() * len(chunk)
    return total / len(frames)


def train(
    net: StofNet,
    train_set: list[LabeledFrame],
    val_set: list[LabeledFrame],
    config: TrainConfig,
    on_epoch=None,
) -> tuple[StofNet, TrainHistory]:
    """Fit ``net`` with AdamW and a per-epoch cosine schedule.

    Returns the parameters of the epoch with the lowest validation loss (the
    last epoch when there is no validation set). ``on_epoch`` is called with
    each ``EpochRecord``.
    """
    history = TrainHistory()
    if config.max_epochs <= 0:
        return net, history
    if not train_set:
        raise InvalidArgumentError("training set is empty")
    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    params = [p for p in net.parameters() if p.requires_grad]
    opt = torch.optim.AdamW(
        params, lr=config.lr_start, betas=(0.9, 0.999), eps=1e-8, weight_decay=config.weight_decay
    )
    R = net.config.R
    best_state, best_val = None, math.inf
    val_history = []
    for epoch in range(config.max_epochs):
        lr = cosine_lr(epoch, config.max_epochs, config.lr_start)
        for group in opt.param_groups:
            group["lr"] = lr
        net.train()
        order = rng.permutation(len(train_set))
        running, seen = 0.0, 0
        for start in range(0, len(order), config.batch_size):
            batch = [train_set[i] for i in order[start : start + config.batch_size]]
            x, y = _stack([_prepare(lf, R, config.sigma, rng, config) for lf in batch])
            opt.zero_grad(set_to_none=True)
            value = batch_loss(net(x), y, config.lambda1)
            if not torch.isfinite(value):
                raise TrainingDivergedError(
                    f"non-finite loss {value.item()} at epoch {epoch}, step {start // config.batch_size}"
                )
            value.backward()
            opt.step()
            running += value.item() * len(batch)
            seen += len(batch)
        train_loss = running / seen
        val_loss = evaluate_loss(net, val_set, config) if val_set else None
        record = EpochRecord(epoch, lr, train_loss, val_loss)
        history.epochs.append(record)
        log.info("epoch %d lr %.3g train %.4f val %s", epoch, lr, train_loss, val_loss)
        if on_epoch is not None:
            on_epoch(record)
        monitored = val_loss if val_loss is not None else train_loss
        if monitored < best_val:
            best_val = monitored
            best_state = copy.deepcopy(net.state_dict())
            history.best_epoch = epoch
        val_history.append(monitored)
        if early_stop(val_history, config.early_stop_delta, config.early_stop_patience):
            history.stopped_early = True
            break
    if best_state is not None:
        net.load_state_dict(best_state)
    net.eval()
    return net, history
