"""Deterministic 1-D signal primitives.

Everything here is a pure function of its arguments. Randomness is always
driven by an explicit integer seed.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import hilbert

from .errors import (
    InvalidArgumentError,
    InvalidInputError,
    UndefinedSNRError,
    ZeroFrameWarning,
)

INTERP_TAPS_PER_PHASE = 16


@dataclass
class Frame:
    """One captured signal of ``N`` samples and ``C`` channels.

    ``samples`` is stored as an ``(N, C)`` array. A 1-D array is promoted to a
    single channel.
    """

    samples: np.ndarray
    sample_rate_hz: float = 1.0

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim == 1:
            samples = samples[:, None]
        if samples.ndim != 2 or samples.shape[0] < 1 or samples.shape[1] < 1:
            raise InvalidInputError(f"frame samples must have shape (N, C) with N, C >= 1, got {samples.shape}")
        if not self.sample_rate_hz > 0:
            raise InvalidInputError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        self.samples = samples

    @property
    def n_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def channels(self) -> int:
        return self.samples.shape[1]

    def with_samples(self, samples: np.ndarray) -> Frame:
        return Frame(samples, self.sample_rate_hz)


@dataclass(frozen=True)
class Kernel1D:
    taps: np.ndarray = field(repr=False)
    sigma: float

    def __post_init__(self):
        if len(self.taps) % 2 != 1:
            raise InvalidArgumentError(f"kernel length must be odd, got {len(self.taps)}")

    def __len__(self):
        return len(self.taps)


def _check_finite(x: np.ndarray):
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("signal contains non-finite values")


def normalize_amplitude(frame: Frame) -> Frame:
    """Scale a frame so that its largest absolute sample equals one.

    An all-zero frame is returned unchanged and a ``ZeroFrameWarning`` is
    emitted instead of raising, so batch pipelines never stall on silence.
    """
    x = frame.samples
    _check_finite(x)
    peak = np.max(np.abs(x))
    if peak == 0:
        warnings.warn("all-zero frame left unnormalized", ZeroFrameWarning, stacklevel=2)
        return frame.with_samples(x.copy())
    return frame.with_samples(x / peak)


def add_noise_snr(frame: Frame, snr_db: float, seed: int) -> Frame:
    """Add white Gaussian noise at ``snr_db`` relative to the frame's RMS.

    ``snr_db=inf`` disables noise. Signal power is measured over all samples
    and channels together.
    """
    x = np.asarray(frame.samples, dtype=np.float64)
    if math.isinf(snr_db) and snr_db > 0:
        return frame.with_samples(x.copy())
    rms = math.sqrt(np.mean(x**2))
    if rms == 0 or not math.isfinite(rms):
        raise UndefinedSNRError("cannot add noise at a given SNR to a zero-power frame")
    noise_rms = rms * 10 ** (-snr_db / 20)
    rng = np.random.default_rng(seed)
    return frame.with_samples(x + rng.normal(0.0, noise_rms, size=x.shape))


def _interp_filter(factor: int) -> np.ndarray:
    # Hann-windowed sinc spanning INTERP_TAPS_PER_PHASE input samples, laid out
    # as (taps, phase) so that column p holds the coefficients for phase p.
    half = INTERP_TAPS_PER_PHASE // 2
    n = np.arange(-half * factor, half * factor + 1)
    h = np.sinc(n / factor) * np.hanning(len(n) + 2)[1:-1]
    h = h[:-1].reshape(INTERP_TAPS_PER_PHASE, factor)
    return h / h.sum(axis=0, keepdims=True)


def resample_interp(signal, factor: int) -> np.ndarray:
    """Band-limited integer-factor interpolation.

    Output sample ``i`` sits at input position ``i / factor``. Original samples
    are reproduced exactly at phase 0 and each polyphase branch has unit DC
    gain, so constants survive unchanged away from the zero-padded borders.
    """
    if int(factor) != factor or factor < 1:
        raise InvalidArgumentError(f"interpolation factor must be an integer >= 1, got {factor}")
    factor = int(factor)
    x = np.asarray(signal, dtype=np.float64)
    if factor == 1:
        return x.copy()
    half = INTERP_TAPS_PER_PHASE // 2
    phases = _interp_filter(factor)
    padded = np.concatenate([np.zeros(half), x, np.zeros(half)])
    # windows[m, j] = x[m - half + j + 1]; the tap order is reversed against
    # the filter layout, hence the flip.
    windows = np.lib.stride_tricks.sliding_window_view(padded, INTERP_TAPS_PER_PHASE)[1 : len(x) + 1]
    out = windows @ phases[::-1]
    return out.reshape(-1)


def gaussian_kernel(sigma: float, length: int = 7) -> Kernel1D:
    if not sigma > 0:
        raise InvalidArgumentError(f"sigma must be positive, got {sigma}")
    if length < 1 or length % 2 != 1:
        raise InvalidArgumentError(f"kernel length must be a positive odd integer, got {length}")
    k = np.arange(length) - (length - 1) / 2
    taps = np.exp(-(k**2) / (2 * sigma**2))
    return Kernel1D(taps / taps.sum(), float(sigma))


def convolve_same(signal, kernel: Kernel1D | np.ndarray) -> np.ndarray:
    """Centered convolution with zero-padded borders; output length equals input length."""
    taps = kernel.taps if isinstance(kernel, Kernel1D) else np.asarray(kernel, dtype=np.float64)
    x = np.asarray(signal, dtype=np.float64)
    if len(taps) > len(x):
        raise InvalidArgumentError(f"kernel of length {len(taps)} is longer than signal of length {len(x)}")
    if len(taps) % 2 != 1:
        raise InvalidArgumentError("kernel length must be odd for a centered convolution")
    return np.convolve(x, taps, mode="same")


def envelope(frame: Frame) -> np.ndarray:
    """Instantaneous amplitude: ``|I + jQ|`` for two channels, analytic-signal magnitude for one."""
    x = np.asarray(frame.samples, dtype=np.float64)
    if frame.channels == 2:
        return np.hypot(x[:, 0], x[:, 1])
    if frame.channels == 1:
        return np.abs(hilbert(x[:, 0]))
    raise InvalidArgumentError(f"envelope needs 1 (RF) or 2 (I, Q) channels, got {frame.channels}")
