"""Shared test fixtures: deterministic synthetic corpus, frozen backbone.

All randomness flows through seeded ``np.random.RandomState`` instances, so
every test sees the same images and weights on every run and machine.  The
acceptance suite (test_acceptance.py) additionally gets a one-line PASS/FAIL
report per criterion appended to the terminal summary.
"""

import numpy as np
import pytest
from scipy import ndimage

from fusilli import vggfeat

# Mixed corpus shapes: multiples of 8, odd sizes, small and rectangular.
CORPUS_SHAPES = [
    (48, 64), (40, 56), (33, 47), (64, 48), (16, 16),
    (17, 19), (56, 40), (24, 36), (32, 32), (47, 33),
]


def synth_image(seed, shape):
    """Natural-looking test image: smooth blobs, a ramp, and fine texture."""
    rs = np.random.RandomState(seed)
    h, w = shape
    blobs = ndimage.gaussian_filter(rs.rand(h, w), sigma=max(2.0, min(h, w) / 8.0))
    texture = ndimage.gaussian_filter(rs.rand(h, w), sigma=0.8)
    ramp = rs.uniform(0.2, 0.8) * np.linspace(0.0, 1.0, w)[None, :]
    image = 0.45 * _stretch(blobs) + 0.3 * _stretch(texture) + 0.25 * ramp
    return np.clip(image, 0.0, 1.0)


def _stretch(image):
    lo, hi = image.min(), image.max()
    if hi == lo:
        return np.zeros_like(image)
    return (image - lo) / (hi - lo)


@pytest.fixture(scope="session")
def backbone():
    return vggfeat.random_backbone(seed=7)


@pytest.fixture(scope="session")
def weights_path(tmp_path_factory, backbone):
    path = tmp_path_factory.mktemp("weights") / "backbone.vgwf"
    vggfeat.write_backbone(backbone, path)
    return path


@pytest.fixture(scope="session")
def corpus():
    """Ten deterministic single images covering all corpus shapes."""
    return [synth_image(100 + i, shape) for i, shape in enumerate(CORPUS_SHAPES)]


@pytest.fixture(scope="session")
def corpus_pairs():
    """Five deterministic image pairs of matching shapes."""
    return [
        (synth_image(200 + i, shape), synth_image(300 + i, shape))
        for i, shape in enumerate(CORPUS_SHAPES[:5])
    ]


# Acceptance reporting: one terminal line per criterion.

_LABELS = {}
_RESULTS = {}


def pytest_collection_modifyitems(config, items):
    for item in items:
        if item.fspath.basename != "test_acceptance.py":
            continue
        doc = item.function.__doc__ or item.name
        _LABELS[item.nodeid] = doc.strip().splitlines()[0]


def pytest_runtest_logreport(report):
    if report.nodeid not in _LABELS:
        return
    if report.skipped:
        _RESULTS[report.nodeid] = "SKIP"
    elif report.when == "call" and report.nodeid not in _RESULTS:
        _RESULTS[report.nodeid] = "PASS" if report.passed else "FAIL"
    elif report.failed:
        _RESULTS[report.nodeid] = "FAIL"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, label in _LABELS.items():
        status = _RESULTS.get(nodeid)
        if status is not None:
            terminalreporter.write_line(f"{status:<5} {label}")
