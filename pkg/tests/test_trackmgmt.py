import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from basetrack.trackmgmt import (
    IdAllocator,
    ManageParams,
    Status,
    Track,
    initial_log_lr,
    lr_step,
    lr_step_blackman,
    ptilde,
    ptilde_rows,
    spawn_tracks,
    update_lifecycle,
)
from basetrack.motion import TrackState


def zero_root(P_D):
    """Where the increment changes sign: p + (1-P_D)(1-p) = P_D (1-p)."""
    return (2 * P_D - 1) / (2 * P_D)


def make_track(log_lr=0.0):
    return Track(1, TrackState(np.zeros(6), np.eye(6)), log_lr, birth_frame=1)


def test_ptilde_examples():
    assert ptilde([]) == 0.0
    assert ptilde([0.7]) == pytest.approx(0.7)
    assert ptilde([0.5, 0.5]) == pytest.approx(0.75)
    assert ptilde([1.0]) == 1.0 - 1e-6


def test_ptilde_rows_matches_scalar():
    rng = np.random.default_rng(0)
    P = rng.uniform(0, 0.4, (5, 7))
    np.testing.assert_allclose(ptilde_rows(P), [ptilde(r) for r in P], rtol=1e-12)
    assert ptilde_rows(np.zeros((3, 0))).tolist() == [0, 0, 0]


def test_lr_step_examples():
    assert lr_step(0.0, 0.95) == pytest.approx(-2.9444, abs=1e-4)
    assert lr_step(0.5, 0.95) == pytest.approx(0.1001, abs=1e-4)
    assert lr_step(0.0, 0.95) == pytest.approx(math.log(0.05 / 0.95), rel=1e-14)


@pytest.mark.parametrize("P_D", [0.55, 0.7, 0.9, 0.95, 0.99])
def test_lr_step_zero_crossing(P_D):
    assert abs(lr_step(zero_root(P_D), P_D)) < 1e-12


@pytest.mark.parametrize("P_D", [0.05, 0.5, 0.9, 0.95, 0.999])
def test_lr_step_increasing_on_grid(P_D):
    steps = lr_step(np.linspace(0, 1 - 1e-6, 2001), P_D)
    assert np.all(np.diff(steps) > 0)


@given(st.floats(0.01, 0.99), st.floats(0, 0.999))
def test_lr_step_positive_above_root(P_D, p):
    r = zero_root(P_D)
    if abs(p - r) > 1e-9:
        assert (lr_step(p, P_D) > 0) == (p > r)


def test_lr_step_vectorised():
    pts = np.linspace(0, 0.99, 11)
    np.testing.assert_allclose(lr_step(pts, 0.9), [lr_step(p, 0.9) for p in pts])


def test_blackman_examples():
    assert lr_step_blackman(None, 0.95, 1.0) == pytest.approx(math.log(0.05))
    y, S = np.zeros(4), np.eye(4)
    lam = (2 * np.pi) ** -2  # N(0; 0, I) / lambda = 1
    assert lr_step_blackman((y, S), 0.95, lam) == pytest.approx(math.log(0.95), abs=1e-12)
    with pytest.raises(ValueError):
        lr_step_blackman((y, S), 0.95, 0.0)


def test_confirmation_within_three_frames():
    mp = ManageParams()
    t = make_track()
    for k in range(1, 4):
        update_lifecycle(t, lr_step(0.9, mp.P_D), mp, frame=k)
    assert t.status is Status.CONFIRMED
    assert 3 * math.log(0.905 / 0.095) == pytest.approx(6.77, abs=1e-2)


def test_undetected_track_dies_and_stays_dead():
    mp = ManageParams()
    t = make_track(2.0)
    frames = 0
    while t.status is not Status.DEAD:
        frames += 1
        before = t.log_lr
        update_lifecycle(t, lr_step(0.0, mp.P_D), mp, frame=frames)
        assert t.log_lr - before == pytest.approx(math.log(0.05 / 0.95))
    assert frames == 3 and t.death_frame == 3
    update_lifecycle(t, 100.0, mp, frame=4)
    assert t.status is Status.DEAD and t.death_frame == 3


def test_peak_cap_and_coasting_limit():
    mp = ManageParams(max_coast_frames=2)
    t = make_track()
    update_lifecycle(t, 50.0, mp, frame=1)
    assert t.log_lr == mp.log_lr_confirm + mp.peak_margin
    t.frames_since_detection = 3
    update_lifecycle(t, 0.0, mp, frame=2)
    assert t.status is Status.DEAD


def test_initial_log_lr():
    assert initial_log_lr(0.5) == 0.0
    assert initial_log_lr(0.9) == 2.0
    assert initial_log_lr(0.6) == pytest.approx(math.log(1.5))
    assert initial_log_lr(0.0) == -2.0


def test_spawn_tracks():
    ids = IdAllocator()
    states = [TrackState(np.zeros(6), np.eye(6)) for _ in range(2)]
    out = spawn_tracks(states, [0.5, 0.9], 7, ids, ManageParams())
    assert [t.log_lr for t in out] == [0.0, 2.0]
    assert [t.id for t in out] == [1, 2]
    assert all(t.status is Status.TENTATIVE and t.birth_frame == 7 for t in out)
    assert spawn_tracks([], [], 8, ids, ManageParams()) == []
    assert ids() == 3


def test_ids_never_reused():
    ids = IdAllocator()
    seen = [ids() for _ in range(1000)]
    assert len(set(seen)) == 1000 and seen == sorted(seen)


def test_manage_params_validation():
    with pytest.raises(ValueError):
        ManageParams(P_D=1.0)
    with pytest.raises(ValueError):
        ManageParams(log_lr_confirm=-1.0)
    with pytest.raises(ValueError):
        ManageParams(ptilde_cap=1.0)
