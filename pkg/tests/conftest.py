import numpy as np
import pytest
import torch

from stofnet.dataset import SyntheticConfig, generate_synthetic


@pytest.fixture(autouse=True)
def _single_thread():
    torch.set_num_threads(1)


@pytest.fixture
def small_config():
    return SyntheticConfig(n_frames=12, frame_length=256, echoes_min=1, echoes_max=2, min_separation=40, seed=3)


@pytest.fixture
def small_frames(small_config):
    return generate_synthetic(small_config)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_CRITERIA: dict[int, tuple[str, bool, list[str]]] = {}


def pytest_runtest_logreport(report):
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    n, title = marker
    failed = report.failed or report.skipped
    _, ok, details = _CRITERIA.get(n, (title, True, []))
    if report.when == "call":
        details += [str(v) for k, v in report.user_properties if k == "detail"]
    _CRITERIA[n] = (title, ok and not failed, details)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = tuple(marker.args)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, ok, details = _CRITERIA[n]
        suffix = f"  [{'; '.join(details)}]" if details else ""
        terminalreporter.write_line(f"criterion {n:2d} {'PASS' if ok else 'FAIL'}  {title}{suffix}")
