import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stofnet.baselines import (
    BaselineConfig,
    BaselineDetector,
    gradient_peak_detect,
    parabolic_offset,
    threshold_first_crossing,
    xcorr_toa,
)
from stofnet.dataset import SyntheticConfig, gabor_pulse, generate_synthetic, pulse_template
from stofnet.errors import InvalidArgumentError
from stofnet.signal_core import Frame, envelope, resample_interp


def iq_frame(env):
    env = np.asarray(env, float)
    return Frame(np.stack([env, np.zeros_like(env)], axis=1))


def test_gradient_clean_echo_against_dense_envelope():
    cfg = SyntheticConfig(n_frames=10, echoes_min=1, echoes_max=1, snr_db=math.inf, seed=4)
    for lf in generate_synthetic(cfg):
        dense = envelope(Frame(resample_interp(lf.frame.samples[:, 0], 10)))
        oracle = np.argmax(dense) / 10
        dets = gradient_peak_detect(lf.frame, 0.5)
        assert len(dets) == 1
        assert abs(dets[0].position - oracle) <= 1


def test_gradient_monotone_ramp():
    assert gradient_peak_detect(iq_frame(np.linspace(0, 1, 50)), 0.1) == []


def test_gradient_deterministic(small_frames):
    f = small_frames[0].frame
    assert gradient_peak_detect(f) == gradient_peak_detect(f)


def test_first_crossing_examples():
    assert threshold_first_crossing(iq_frame([0, 0, 1, 1]), 0.5).position == 1.5
    assert threshold_first_crossing(iq_frame(np.zeros(8)), 0.5) is None
    assert threshold_first_crossing(iq_frame([0, 0.5, 1, 0]), 0.5).position == 1.0


def test_parabolic_offset_example():
    assert parabolic_offset(0.6, 1.0, 0.9) == pytest.approx(0.3)


@given(st.floats(0, 0.99), st.floats(0, 0.99))
def test_parabolic_offset_bounded(left, right):
    assert -0.5 < parabolic_offset(left, 1.0, right) < 0.5


def test_xcorr_unit_impulse():
    x = np.zeros(64)
    x[23] = 2.0
    x[40] = 0.5
    assert xcorr_toa(Frame(x), [1.0]).position == 23
    noisy = np.random.default_rng(0).normal(size=64)
    assert round(xcorr_toa(Frame(noisy), [1.0]).position) == int(np.argmax(noisy))


@pytest.mark.parametrize("d", [100, 257, 301])
def test_xcorr_embedded_template(d):
    cfg = SyntheticConfig()
    t = pulse_template(cfg)
    x = np.zeros(512)
    half = len(t) // 2
    x[d - half : d + half + 1] = t
    assert xcorr_toa(Frame(x), t).position == pytest.approx(d, abs=0.05)


def test_xcorr_fractional_shift():
    cfg = SyntheticConfig()
    t = pulse_template(cfg)
    x = gabor_pulse(np.arange(512), 200.3, cfg.pulse_sigma, cfg.center_frequency)
    assert xcorr_toa(Frame(x), t).position == pytest.approx(200.3, abs=0.05)


@given(st.integers(-60, 60))
def test_xcorr_shift_covariant(shift):
    cfg = SyntheticConfig()
    t = pulse_template(cfg)
    rng = np.random.default_rng(3)
    x = np.zeros(600)
    x[250:350] = rng.normal(size=100)
    a = xcorr_toa(Frame(x), t).position
    b = xcorr_toa(Frame(np.roll(x, shift)), t).position
    assert b - a == pytest.approx(shift, abs=1e-9)


def test_xcorr_zero_template():
    with pytest.raises(InvalidArgumentError):
        xcorr_toa(Frame(np.ones(10)), [0.0, 0.0])


def test_baseline_config_validation():
    with pytest.raises(InvalidArgumentError):
        BaselineConfig("nope")
    with pytest.raises(InvalidArgumentError):
        BaselineConfig("xcorr")
    with pytest.raises(InvalidArgumentError):
        BaselineConfig("gradient", rel_threshold=0)


def test_baseline_detector_interface(small_frames):
    f = small_frames[0].frame
    for method in ("gradient", "threshold"):
        det = BaselineDetector(BaselineConfig(method))
        assert det.n_parameters == 0
        assert isinstance(det.detect(f), list)
    x = BaselineDetector(BaselineConfig("xcorr", template=pulse_template(SyntheticConfig())))
    assert len(x.detect(f)) == 1
