import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from depscale.corpus.synth import generate_synthetic_session  # noqa: E402
from depscale.corpus.types import LandmarkFrame  # noqa: E402


@pytest.fixture(scope="session")
def synthetic_session(tmp_path_factory):
    return generate_synthetic_session(7, 12, tmp_path_factory.mktemp("session"), duration=30.0)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def make_frames(points, fps=30.0, valid=None):
    """LandmarkFrames from a (T, 68, 2) stack."""
    points = np.asarray(points, dtype=float)
    valid = np.ones(len(points), bool) if valid is None else valid
    return [LandmarkFrame(i, i / fps, 0.95 if v else 0.0, bool(v), p)
            for i, (p, v) in enumerate(zip(points, valid))]


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(RESULTS):
            terminalreporter.write_line(line)
