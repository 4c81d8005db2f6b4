import hashlib
import json
import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from stofnet.dataset import (
    LabeledFrame,
    SyntheticConfig,
    generate_synthetic,
    load_dataset,
    load_iq_dataset,
    make_target_mask,
    random_crop_pad,
    save_dataset,
    split_train_val,
)
from stofnet.errors import ConfigError, DuplicateSpikeError, FormatError, MissingLabelsWarning, VersionError
from stofnet.signal_core import Frame, convolve_same, envelope, gaussian_kernel


def test_single_clean_echo_matches_envelope_peak():
    cfg = SyntheticConfig(n_frames=20, echoes_min=1, echoes_max=1, snr_db=math.inf, seed=11)
    for lf in generate_synthetic(cfg):
        (p,) = lf.truth_positions
        assert abs(int(np.argmax(envelope(lf.frame))) - p) <= 2


def test_generate_count_and_determinism(small_config):
    small_config.n_frames = 100
    a = generate_synthetic(small_config)
    b = generate_synthetic(small_config)
    assert len(a) == 100
    for x, y in zip(a, b):
        assert x.frame.samples.tobytes() == y.frame.samples.tobytes()
        assert x.truth_positions == y.truth_positions


def test_generate_label_constraints():
    cfg = SyntheticConfig(n_frames=200, frame_length=512, echoes_min=0, echoes_max=4, min_separation=25, seed=9)
    for lf in generate_synthetic(cfg):
        pos = lf.truth_positions
        assert 0 <= len(pos) <= 4
        assert all(b - a >= 25 - 1e-9 for a, b in zip(pos, pos[1:]))


def test_generate_infeasible_separation():
    with pytest.raises(ConfigError):
        generate_synthetic(SyntheticConfig(frame_length=256, echoes_max=20, min_separation=40))


def test_generate_length_not_divisible():
    with pytest.raises(ConfigError):
        generate_synthetic(SyntheticConfig(frame_length=1023))


def test_target_mask_single_label():
    # independent hand evaluation of the 7-tap kernel
    w = [math.exp(-k * k / 2) for k in range(-3, 4)]
    center = 1 / sum(w)
    mask = make_target_mask([10.25], N=32, R=4, sigma=1.0)
    assert int(np.argmax(mask.values)) == 41
    assert center == pytest.approx(0.39905, abs=1e-5)
    assert mask.lambda0 == pytest.approx(20 / center, abs=1e-9)
    assert mask.lambda0 == pytest.approx(50.12, abs=0.01)
    assert mask.values.max() == pytest.approx(20.0, abs=0.01)


def test_target_mask_empty():
    mask = make_target_mask([], N=16, R=4)
    assert mask.lambda0 == 1
    assert not mask.values.any()


def test_target_mask_two_labels_sum():
    mask = make_target_mask([5.0, 12.0], N=32, R=4)
    assert (mask.values / mask.lambda0).sum() == pytest.approx(2.0, abs=1e-9)


def test_target_mask_duplicate():
    with pytest.raises(DuplicateSpikeError):
        make_target_mask([3.0, 3.1], N=16, R=4)


def test_target_mask_rounds_half_up():
    assert int(np.argmax(make_target_mask([2.125], N=16, R=4).values)) == 9


@given(st.lists(st.integers(0, 63), min_size=1, max_size=10, unique=True), st.sampled_from([1, 2, 4]))
def test_target_mask_matches_convolution(idx, R):
    positions = sorted(i * 4 / R for i in idx if i * 4 < 64 * R)
    assume(positions)
    mask = make_target_mask(positions, N=64, R=R)
    spikes = np.zeros(64 * R)
    spikes[[round(p * R) for p in positions]] = 1
    pre = convolve_same(spikes, gaussian_kernel(1.0, 7))
    np.testing.assert_array_equal(mask.values, mask.lambda0 * pre)
    assert mask.lambda0 * pre.max() == pytest.approx(20.0, abs=1e-6)
    assert np.all(mask.values >= 0)


def test_crop_pad():
    x = np.arange(1, 1025, dtype=np.float32)
    lf = LabeledFrame(Frame(x), [10.0, 500.0, 1000.0])
    out = random_crop_pad(lf, seed=4)
    s = out.frame.samples[:, 0]
    assert len(s) == 1024
    assert np.count_nonzero(s) == 768
    assert (s == 0).sum() == 256
    start = int(np.flatnonzero(s)[0])
    np.testing.assert_array_equal(s[start : start + 768], x[start : start + 768])
    assert out.truth_positions == [p for p in lf.truth_positions if start <= p < start + 768]
    assert 500.0 in out.truth_positions  # always inside any window
    again = random_crop_pad(lf, seed=4)
    assert again.frame.samples.tobytes() == out.frame.samples.tobytes()


@given(st.integers(1, 64), st.integers(0, 2**32))
def test_crop_pad_keeps_length(quarter, seed):
    n = 4 * quarter
    out = random_crop_pad(LabeledFrame(Frame(np.ones(n))), seed)
    assert out.frame.n_samples == n
    assert int(out.frame.samples.sum()) == 3 * quarter


def test_split_is_90_10():
    tr, va = split_train_val(list(range(100)))
    assert tr == list(range(90)) and va == list(range(90, 100))


def test_dataset_round_trip(tmp_path, small_frames):
    save_dataset(tmp_path / "d", small_frames, seed=3)
    back = load_dataset(tmp_path / "d")
    assert len(back) == len(small_frames)
    for a, b in zip(small_frames, back):
        assert a.frame.samples.tobytes() == b.frame.samples.tobytes()
        assert a.truth_positions == b.truth_positions


def test_dataset_files_byte_stable(tmp_path, small_config):
    digests = []
    for name in ("a", "b"):
        save_dataset(tmp_path / name, generate_synthetic(small_config), seed=small_config.seed)
        digests.append([hashlib.sha256((tmp_path / name / f).read_bytes()).hexdigest()
                        for f in ("manifest.json", "frames.f32", "labels.json")])
    assert digests[0] == digests[1]


def test_dataset_truncated_blob(tmp_path, small_frames):
    save_dataset(tmp_path, small_frames)
    blob = tmp_path / "frames.f32"
    full = blob.stat().st_size
    blob.write_bytes(blob.read_bytes()[:-8])
    with pytest.raises(FormatError, match=f"{full - 8}.*{full}"):
        load_dataset(tmp_path)


def test_dataset_bad_version(tmp_path, small_frames):
    save_dataset(tmp_path, small_frames)
    m = json.loads((tmp_path / "manifest.json").read_text())
    m["format_version"] = "99"
    (tmp_path / "manifest.json").write_text(json.dumps(m))
    with pytest.raises(VersionError):
        load_dataset(tmp_path)


def _write_iq(path, records, truth=None, rate=1e6):
    path.mkdir(parents=True, exist_ok=True)
    m, n, _ = records.shape
    (path / "iq_header.json").write_text(json.dumps({"n_records": m, "record_length": n, "sample_rate_hz": rate}))
    (path / "iq.f32").write_bytes(records.astype("<f4").tobytes())
    if truth is not None:
        (path / "truth.json").write_text(json.dumps(truth))


def test_iq_identity(tmp_path, rng):
    rec = rng.normal(size=(2, 50, 2)).astype(np.float32)
    _write_iq(tmp_path, rec, [[3.5], []])
    frames = load_iq_dataset(tmp_path, 1, "iq")
    np.testing.assert_array_equal(frames[0].frame.samples, rec[0])
    mag = load_iq_dataset(tmp_path, 1, "magnitude")
    np.testing.assert_allclose(mag[1].frame.samples[:, 0], np.hypot(rec[1, :, 0], rec[1, :, 1]), rtol=1e-6)


def test_iq_interpolation_and_labels(tmp_path, rng):
    _write_iq(tmp_path, rng.normal(size=(1, 64, 2)), [[12.25]])
    (lf,) = load_iq_dataset(tmp_path, 10)
    assert lf.frame.n_samples == 640
    (lf20,) = load_iq_dataset(tmp_path, 20)
    assert lf20.truth_positions == [12.25 * 20]
    assert lf20.frame.sample_rate_hz == 20e6


def test_iq_missing_sidecar(tmp_path, rng):
    _write_iq(tmp_path, rng.normal(size=(3, 16, 2)))
    with pytest.warns(MissingLabelsWarning):
        frames = load_iq_dataset(tmp_path, 2)
    assert [lf.truth_positions for lf in frames] == [[], [], []]
