"""The StofNet 1-D super-resolution localization network.

Layer sequence for input ``(B, C, N)``::

    L1   conv C->F, k9, ReLU                                   -> a   (F, N)
    L2   conv F->F*S, k7, stride S, ReLU                             (F*S, N/S)
    L3   conv F*S->F*S, k3, ReLU, shuffle by S, + a            -> h0  (F, N)
    L4..L13   five residual pairs: h + conv7(ReLU(conv7(h)))
    L14  conv F->F, k7, + h0                                   (long skip)
    L15  conv F->F, k3
    head conv F->R, k3, shuffle by R                           -> (N*R,)

Convolutions that feed a residual add carry no ReLU.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .errors import ConfigMismatchError, FormatError, ShapeError, VersionError
from .signal_core import Frame

MODEL_FORMAT_VERSION = 1
N_RESIDUAL_PAIRS = 5


@dataclass(frozen=True)
class ModelConfig:
    F: int = 64
    R: int = 4
    S: int = 4
    C: int = 1
    k1: int = 9
    k_mid: int = 7
    k_tail: int = 3

    def __post_init__(self):
        for name in ("F", "R", "S", "C"):
            if getattr(self, name) < 1:
                raise ShapeError(f"{name} must be >= 1")
        for name in ("k1", "k_mid", "k_tail"):
            if getattr(self, name) % 2 != 1:
                raise ShapeError(f"kernel size {name} must be odd")


@dataclass(frozen=True)
class LayerSpec:
    name: str
    c_in: int
    c_out: int
    kernel: int
    stride: int = 1
    relu: bool = True


def layer_table(config: ModelConfig) -> list[LayerSpec]:
    """Ordered description of every convolution in the network."""
    f, s = config.F, config.S
    table = [
        LayerSpec("l1", config.C, f, config.k1),
        LayerSpec("l2", f, f * s, config.k_mid, stride=s),
        LayerSpec("l3", f * s, f * s, config.k_tail),
    ]
    for i in range(N_RESIDUAL_PAIRS):
        table.append(LayerSpec(f"l{4 + 2 * i}", f, f, config.k_mid))
        table.append(LayerSpec(f"l{5 + 2 * i}", f, f, config.k_mid, relu=False))
    table += [
        LayerSpec("l14", f, f, config.k_mid, relu=False),
        LayerSpec("l15", f, f, config.k_tail, relu=False),
        LayerSpec("head", f, config.R, config.k_tail, relu=False),
    ]
    return table


def shuffle1d(x: torch.Tensor, r: int) -> torch.Tensor:
    """Sample shuffle: ``(B, C*r, L) -> (B, C, L*r)``.

    ``out[b, c, l*r + j] = x[b, c*r + j, l]``.
    """
    b, cr, length = x.shape
    if cr % r:
        raise ShapeError(f"{cr} channels cannot be shuffled by {r}")
    return x.reshape(b, cr // r, r, length).transpose(2, 3).reshape(b, cr // r, length * r)


def sample_shuffle(t, r: int | None = None) -> np.ndarray:
    """Interleave an ``(M, r)`` array into length ``M*r``: ``out[m*r + j] = t[m][j]``."""
    t = np.asarray(t)
    if t.ndim != 2 or (r is not None and t.shape[1] != r):
        raise ShapeError(f"expected an (M, r) array, got shape {t.shape}")
    return t.reshape(-1).copy()


class StofNet(nn.Module):
    def __init__(self, config: ModelConfig | None = None, seed: int | None = 0):
        super().__init__()
        self.config = config or ModelConfig()
        self.table = layer_table(self.config)
        self.convs = nn.ModuleDict(
            {
                spec.name: nn.Conv1d(spec.c_in, spec.c_out, spec.kernel, stride=spec.stride, padding=spec.kernel // 2)
                for spec in self.table
            }
        )
        self.reset_parameters(seed)

    def reset_parameters(self, seed: int | None = 0):
        """He-uniform weights (bound ``sqrt(6 / fan_in)``) and zero biases."""
        gen = torch.Generator().manual_seed(seed) if seed is not None else None
        with torch.no_grad():
            for conv in self.convs.values():
                fan_in = conv.in_channels * conv.kernel_size[0]
                bound = math.sqrt(6.0 / fan_in)
                conv.weight.copy_(torch.rand(conv.weight.shape, generator=gen) * 2 * bound - bound)
                conv.bias.zero_()

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        """Map ``(B, C, N)`` to ``(B, N*R)`` scores."""
        cfg = self.config
        if x.ndim != 3 or x.shape[1] != cfg.C:
            raise ShapeError(f"expected input (B, {cfg.C}, N), got {tuple(x.shape)}")
        if x.shape[2] % cfg.S:
            raise ShapeError(f"input length {x.shape[2]} is not divisible by S={cfg.S}")
        c = self.convs
        a = F.relu(c["l1"](x))
        h = F.relu(c["l2"](a))
        h = F.relu(c["l3"](h))
        h = shuffle1d(h, cfg.S) + a
        context = h
        for i in range(N_RESIDUAL_PAIRS):
            h = h + c[f"l{5 + 2 * i}"](F.relu(c[f"l{4 + 2 * i}"](h)))
        h = c["l14"](h) + context
        h = c["l15"](h)
        return shuffle1d(c["head"](h), cfg.R).flatten(1)

    def freeze(self, *names: str):
        for name in names:
            self.convs[name].requires_grad_(False)

    def blocks(self) -> dict[str, torch.Tensor]:
        """Parameter blocks in file order: ``<layer>.weight`` then ``<layer>.bias``."""
        out = {}
        for spec in self.table:
            conv = self.convs[spec.name]
            out[f"{spec.name}.weight"] = conv.weight
            out[f"{spec.name}.bias"] = conv.bias
        return out


def _frame_tensor(net: StofNet, frame: Frame) -> torch.Tensor:
    samples = np.asarray(frame.samples)
    if samples.shape[1] != net.config.C:
        raise ShapeError(f"frame has {samples.shape[1]} channels, network expects {net.config.C}")
    dtype = next(net.parameters()).dtype
    return torch.as_tensor(np.ascontiguousarray(samples.T), dtype=dtype)[None]


def forward(net: StofNet, frame: Frame) -> np.ndarray:
    """Score vector of length ``N*R`` for one frame."""
    with torch.no_grad():
        return net(_frame_tensor(net, frame))[0].numpy()


def backward(net: StofNet, frame: Frame, upstream) -> dict[str, np.ndarray]:
    """Gradients of ``<upstream, forward(frame)>`` with respect to every parameter block.

    Frozen blocks report exact zeros.
    """
    x = _frame_tensor(net, frame)
    out = net(x)[0]
    g = torch.as_tensor(np.asarray(upstream), dtype=out.dtype)
    if g.shape != out.shape:
        raise ShapeError(f"upstream gradient shape {tuple(g.shape)} != output shape {tuple(out.shape)}")
    trainable = {k: p for k, p in net.blocks().items() if p.requires_grad}
    grads = torch.autograd.grad(out, list(trainable.values()), grad_outputs=g, allow_unused=True)
    result = {k: np.zeros(tuple(p.shape)) for k, p in net.blocks().items()}
    for k, gr in zip(trainable, grads):
        if gr is not None:
            result[k] = gr.detach().numpy().astype(np.float64)
    return result


def count_parameters(net: StofNet) -> int:
    return sum(p.numel() for p in net.parameters())


def save_model(net: StofNet, path, extra: dict | None = None):
    """Write ``model.json`` and ``model.f32`` into directory ``path``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    blocks = net.blocks()
    meta = {
        "format_version": MODEL_FORMAT_VERSION,
        "config": asdict(net.config),
        "blocks": [{"name": k, "shape": list(p.shape)} for k, p in blocks.items()],
        "extra": extra or {},
    }
    (path / "model.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    flat = [p.detach().cpu().numpy().astype("<f4").ravel() for p in blocks.values()]
    (path / "model.f32").write_bytes(np.concatenate(flat).tobytes())


def read_model_meta(path) -> dict:
    path = Path(path)
    try:
        meta = json.loads((path / "model.json").read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise FormatError(f"{path} has no model.json") from None
    if meta.get("format_version") != MODEL_FORMAT_VERSION:
        raise VersionError(
            f"unsupported model format_version {meta.get('format_version')!r} (expected {MODEL_FORMAT_VERSION})"
        )
    return meta


def load_model(path, expect: ModelConfig | None = None) -> StofNet:
    """Load a network. Its config always comes from the file.

    With ``expect`` given, a differing stored config raises
    ``ConfigMismatchError`` carrying the stored config as ``.found``.
    """
    path = Path(path)
    meta = read_model_meta(path)
    config = ModelConfig(**meta["config"])
    if expect is not None and expect != config:
        raise ConfigMismatchError(f"stored config {config} differs from expected {expect}", found=config)
    net = StofNet(config, seed=None)
    blocks = net.blocks()
    declared = [(b["name"], tuple(b["shape"])) for b in meta["blocks"]]
    actual = [(k, tuple(p.shape)) for k, p in blocks.items()]
    if declared != actual:
        raise FormatError("model.json block list is inconsistent with its config")
    raw = (path / "model.f32").read_bytes()
    total = sum(p.numel() for p in blocks.values())
    if len(raw) != total * 4:
        raise FormatError(f"model.f32 holds {len(raw)} bytes, config implies {total * 4}")
    flat = torch.from_numpy(np.frombuffer(raw, dtype="<f4").astype(np.float32))
    offset = 0
    with torch.no_grad():
        for p in blocks.values():
            p.copy_(flat[offset : offset + p.numel()].view_as(p))
            offset += p.numel()
    net.eval()
    return net
