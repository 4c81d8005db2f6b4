"""Labeled frames: synthetic generation, augmentation, target masks and file I/O.

Dataset directory layout::

    manifest.json   format_version, n_frames, N, C, R, sample_rate_hz, seed, generator
    frames.f32      little-endian float32, row-major [frame][channel][sample]
    labels.json     one list of float positions (input-sample units) per frame

IQ adapter layout (see :func:`load_iq_dataset`)::

    iq_header.json  {"n_records", "record_length", "sample_rate_hz"}
    iq.f32          little-endian float32, row-major [record][sample][I, Q]
    truth.json      optional, one list of native-rate positions per record
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ConfigError,
    DuplicateSpikeError,
    FormatError,
    InvalidArgumentError,
    InvalidInputError,
    MissingLabelsWarning,
    VersionError,
)
from .signal_core import Frame, add_noise_snr, convolve_same, gaussian_kernel, resample_interp

FORMAT_VERSION = 1
TARGET_PEAK = 20.0
MASK_KERNEL_LENGTH = 7


@dataclass
class LabeledFrame:
    frame: Frame
    truth_positions: list[float] = field(default_factory=list)

    def __post_init__(self):
        pos = [float(p) for p in self.truth_positions]
        n = self.frame.n_samples
        if any(not (0 <= p < n) for p in pos):
            raise InvalidInputError(f"truth positions must lie in [0, {n})")
        if any(b <= a for a, b in zip(pos, pos[1:])):
            raise InvalidInputError("truth positions must be sorted ascending and distinct")
        self.truth_positions = pos


@dataclass
class TargetMask:
    values: np.ndarray
    lambda0: float


@dataclass
class SyntheticConfig:
    """Parameters of the synthetic pulse-echo generator.

    Frequencies are fractions of the sample rate. ``bandwidth`` is the -6 dB
    width of the pulse spectrum. Each echo is a Gaussian-modulated cosine with
    a random carrier phase, so the waveform peak generally does not coincide
    with the envelope center that serves as ground truth.
    """

    n_frames: int = 100
    frame_length: int = 1024
    echoes_min: int = 1
    echoes_max: int = 3
    center_frequency: float = 0.1
    bandwidth: float = 0.05
    amplitude_min: float = 0.2
    amplitude_max: float = 1.0
    min_separation: float = 32.0
    snr_db: float = 30.0
    seed: int = 0
    sample_rate_hz: float = 1.0e6
    contraction: int = 4

    def validate(self):
        if self.n_frames < 0:
            raise ConfigError("n_frames must be >= 0")
        if self.echoes_min < 0 or self.echoes_max < self.echoes_min:
            raise ConfigError("need 0 <= echoes_min <= echoes_max")
        if self.min_separation < 1:
            raise ConfigError("min_separation must be >= 1")
        if self.frame_length < 1 or self.frame_length % self.contraction:
            raise ConfigError(
                f"frame_length {self.frame_length} must be divisible by the contraction factor {self.contraction}"
            )
        if not 0 < self.amplitude_min <= self.amplitude_max <= 1:
            raise ConfigError("amplitude range must satisfy 0 < min <= max <= 1")
        if not (0 < self.center_frequency < 0.5 and self.bandwidth > 0):
            raise ConfigError("center_frequency must be in (0, 0.5) and bandwidth positive")
        lo, hi = self._placement_range()
        if self.echoes_max and (hi - lo) < (self.echoes_max - 1) * self.min_separation:
            raise ConfigError(
                f"{self.echoes_max} echoes at separation {self.min_separation} do not fit a frame of {self.frame_length}"
            )

    @property
    def pulse_sigma(self) -> float:
        """Envelope standard deviation in samples."""
        return math.sqrt(2 * math.log(2)) / (math.pi * self.bandwidth)

    def _placement_range(self) -> tuple[float, float]:
        margin = 3 * self.pulse_sigma
        return margin, self.frame_length - 1 - margin


def gabor_pulse(t, center, sigma, frequency, phase=0.0, amplitude=1.0):
    """Gaussian-modulated cosine evaluated at sample positions ``t``."""
    d = np.asarray(t, dtype=np.float64) - center
    return amplitude * np.exp(-(d**2) / (2 * sigma**2)) * np.cos(2 * np.pi * frequency * d + phase)


def pulse_template(config: SyntheticConfig) -> np.ndarray:
    """Zero-phase unit pulse of the generator, centered in an odd-length window."""
    half = int(math.ceil(3 * config.pulse_sigma))
    t = np.arange(-half, half + 1)
    return gabor_pulse(t, 0.0, config.pulse_sigma, config.center_frequency)


def frame_seeds(master_seed: int, n_frames: int) -> list[np.random.SeedSequence]:
    """Per-frame seed sequences: child ``i`` of ``SeedSequence(master_seed)``.

    Frame ``i`` depends only on the master seed and ``i``, so frames can be
    generated in any order or in parallel.
    """
    return np.random.SeedSequence(master_seed).spawn(n_frames)


def _draw_positions(rng, n_echoes, lo, hi, min_sep):
    # Sample sorted gaps: place n points in a range shortened by the mandatory
    # spacing, then re-expand. Uniform over the feasible configurations.
    slack = (hi - lo) - (n_echoes - 1) * min_sep
    base = np.sort(rng.uniform(0.0, slack, size=n_echoes))
    return lo + base + np.arange(n_echoes) * min_sep


def generate_frame(config: SyntheticConfig, seed_seq: np.random.SeedSequence) -> LabeledFrame:
    rng = np.random.default_rng(seed_seq)
    n = config.frame_length
    n_echoes = int(rng.integers(config.echoes_min, config.echoes_max + 1))
    lo, hi = config._placement_range()
    positions = _draw_positions(rng, n_echoes, lo, hi, config.min_separation) if n_echoes else np.empty(0)
    amplitudes = rng.uniform(config.amplitude_min, config.amplitude_max, size=n_echoes)
    phases = rng.uniform(0, 2 * np.pi, size=n_echoes)
    t = np.arange(n)
    x = np.zeros(n)
    for p, a, ph in zip(positions, amplitudes, phases):
        x += gabor_pulse(t, p, config.pulse_sigma, config.center_frequency, ph, a)
    frame = Frame(x[:, None], config.sample_rate_hz)
    if n_echoes and math.isfinite(config.snr_db):
        frame = add_noise_snr(frame, config.snr_db, int(rng.integers(2**63)))
    frame = frame.with_samples(frame.samples.astype(np.float32))
    return LabeledFrame(frame, [float(p) for p in positions])


def generate_synthetic(config: SyntheticConfig) -> list[LabeledFrame]:
    config.validate()
    return [generate_frame(config, s) for s in frame_seeds(config.seed, config.n_frames)]


def upsampled_index(position: float, R: int) -> int:
    """Grid index of a position on the ``R``-times finer grid, rounding half up."""
    return int(math.floor(position * R + 0.5))


def make_target_mask(labels, N: int, R: int, sigma: float = 1.0) -> TargetMask:
    """Gaussian-smoothed spike mask scaled so that its maximum equals 20.

    ``lambda0`` is computed from this mask alone, so every frame carries its
    own scale. With no labels the mask is zero and ``lambda0`` is 1.
    """
    if R < 1:
        raise InvalidArgumentError(f"R must be >= 1, got {R}")
    size = N * R
    spikes = np.zeros(size)
    seen = set()
    for p in labels:
        if not 0 <= p < N:
            raise InvalidInputError(f"label {p} outside [0, {N})")
        idx = min(upsampled_index(p, R), size - 1)
        if idx in seen:
            raise DuplicateSpikeError(f"label {p} falls on an already occupied upsampled index {idx}")
        seen.add(idx)
        spikes[idx] = 1.0
    if not seen:
        return TargetMask(spikes, 1.0)
    smoothed = convolve_same(spikes, gaussian_kernel(sigma, MASK_KERNEL_LENGTH))
    lambda0 = 1.0 / (smoothed.max() / TARGET_PEAK)
    return TargetMask(lambda0 * smoothed, lambda0)


def random_crop_pad(lf: LabeledFrame, seed: int) -> LabeledFrame:
    """Keep a random contiguous window of 3/4 of the frame and zero the rest in place.

    Sample coordinates are preserved, so surviving labels are unchanged.
    Labels outside the window are dropped.
    """
    n = lf.frame.n_samples
    if n % 4:
        raise InvalidArgumentError(f"frame length {n} must be divisible by 4")
    keep = 3 * n // 4
    start = int(np.random.default_rng(seed).integers(0, n - keep + 1))
    samples = np.zeros_like(lf.frame.samples)
    samples[start : start + keep] = lf.frame.samples[start : start + keep]
    labels = [p for p in lf.truth_positions if start <= p < start + keep]
    return LabeledFrame(lf.frame.with_samples(samples), labels)


def split_train_val(frames: list, val_fraction: float = 0.1) -> tuple[list, list]:
    """Deterministic split by index: the last ``val_fraction`` of frames validate."""
    n_val = int(round(len(frames) * val_fraction))
    if len(frames) > 1:
        n_val = max(n_val, 1)
    return frames[: len(frames) - n_val], frames[len(frames) - n_val :]


def save_dataset(path, frames: list[LabeledFrame], *, R: int = 4, seed: int | None = None, generator: dict | None = None):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    if frames:
        shapes = {lf.frame.samples.shape for lf in frames}
        if len(shapes) != 1:
            raise FormatError(f"all frames must share one shape, got {sorted(shapes)}")
        (n, c), = shapes
        rate = frames[0].frame.sample_rate_hz
    else:
        n, c, rate = 0, 0, 1.0
    blob = np.stack([lf.frame.samples.T for lf in frames]) if frames else np.empty((0, c, n))
    manifest = {
        "format_version": FORMAT_VERSION,
        "n_frames": len(frames),
        "N": n,
        "C": c,
        "R": R,
        "sample_rate_hz": rate,
        "seed": seed,
        "generator": generator,
    }
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (path / "frames.f32").write_bytes(np.ascontiguousarray(blob, dtype="<f4").tobytes())
    labels = [lf.truth_positions for lf in frames]
    (path / "labels.json").write_text(json.dumps(labels) + "\n", encoding="utf-8")


def read_manifest(path) -> dict:
    path = Path(path)
    try:
        manifest = json.loads((path / "manifest.json").read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise FormatError(f"{path} has no manifest.json") from None
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionError(f"unsupported dataset format_version {version!r} (expected {FORMAT_VERSION})")
    return manifest


def load_dataset(path) -> list[LabeledFrame]:
    path = Path(path)
    manifest = read_manifest(path)
    m, n, c = manifest["n_frames"], manifest["N"], manifest["C"]
    raw = (path / "frames.f32").read_bytes()
    expected = m * n * c * 4
    if len(raw) != expected:
        raise FormatError(f"frames.f32 holds {len(raw)} bytes, manifest implies {expected}")
    blob = np.frombuffer(raw, dtype="<f4").reshape(m, c, n).astype(np.float32)
    labels = json.loads((path / "labels.json").read_text(encoding="utf-8"))
    if len(labels) != m:
        raise FormatError(f"labels.json has {len(labels)} entries, manifest says {m} frames")
    rate = manifest["sample_rate_hz"]
    return [LabeledFrame(Frame(np.ascontiguousarray(blob[i].T), rate), labels[i]) for i in range(m)]


def load_iq_dataset(path, interp_factor: int = 1, channel_mode: str = "magnitude") -> list[LabeledFrame]:
    """Load interleaved IQ records and interpolate them by ``interp_factor``.

    ``channel_mode`` is ``"magnitude"`` (one channel, ``|I + jQ|``) or ``"iq"``
    (two channels). Truth positions from ``truth.json`` are given at the native
    rate and are rescaled to the interpolated grid. Without the sidecar the
    frames load with empty labels and a ``MissingLabelsWarning``.
    """
    if channel_mode not in ("magnitude", "iq"):
        raise InvalidArgumentError(f"channel_mode must be 'magnitude' or 'iq', got {channel_mode!r}")
    path = Path(path)
    header = json.loads((path / "iq_header.json").read_text(encoding="utf-8"))
    m, n = header["n_records"], header["record_length"]
    raw = (path / "iq.f32").read_bytes()
    if len(raw) != m * n * 2 * 4:
        raise FormatError(f"iq.f32 holds {len(raw)} bytes, header implies {m * n * 2 * 4}")
    records = np.frombuffer(raw, dtype="<f4").reshape(m, n, 2).astype(np.float64)
    truth_file = path / "truth.json"
    if truth_file.exists():
        truth = json.loads(truth_file.read_text(encoding="utf-8"))
    else:
        warnings.warn(f"{path} has no truth.json; frames load without labels", MissingLabelsWarning, stacklevel=2)
        truth = [[] for _ in range(m)]
    rate = header.get("sample_rate_hz", 1.0) * interp_factor
    frames = []
    for rec, pos in zip(records, truth):
        i = resample_interp(rec[:, 0], interp_factor)
        q = resample_interp(rec[:, 1], interp_factor)
        samples = np.stack([i, q], axis=1) if channel_mode == "iq" else np.hypot(i, q)[:, None]
        frames.append(LabeledFrame(Frame(samples.astype(np.float32), rate), [p * interp_factor for p in pos]))
    return frames


def config_dict(config: SyntheticConfig) -> dict:
    return asdict(config)
