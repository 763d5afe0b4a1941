import numpy as np
import pytest

from basetrack.detmodel import ClutterModel


def flat_clutter(lam: float) -> ClutterModel:
    """Width-independent extraneous density ``lam`` (c_ex folded in)."""
    return ClutterModel(np.array([0.5, 1e5]), np.array([1.0]), float(lam))


@pytest.fixture
def clutter_model():
    return flat_clutter(1e-9)


def id_swap_fixture():
    """Two targets over 10 frames; target 1 is reported under a new id from frame 6.

    Returns ``(gt, reported)`` as ``(frame, id, cx, cy, w, h)`` tuples.
    """
    gt, hyp = [], []
    for k in range(1, 11):
        gt.append((k, 1, 100.0 + 5 * k, 200.0, 40.0, 100.0))
        gt.append((k, 2, 600.0 - 5 * k, 200.0, 40.0, 100.0))
        hyp.append((k, 10 if k <= 5 else 30, 100.0 + 5 * k, 200.0, 40.0, 100.0))
        hyp.append((k, 20, 600.0 - 5 * k, 200.0, 40.0, 100.0))
    return gt, hyp


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance check")


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
