import math

import numpy as np
import pytest

from basetrack.core import BoundingBox, Detection, FrameData
from basetrack.estimate import cex_base_scale, TrainingSequence
from basetrack.detmodel import fit_width_density
from basetrack.evalkit import SimConfig, evaluate, simulate
from basetrack.motion import MotionParams, TrackState
from basetrack.pipeline import (
    ReportedBox,
    Tracker,
    TrackerConfig,
    apply_lookahead,
    interpolate_gaps,
    relabel,
    run,
)
from basetrack.trackmgmt import HistoryEntry, Status, Track

from conftest import flat_clutter


def motion(**kw):
    d = dict(sigma_ca=0.05, sigma_sr=0.02, R=np.eye(4), P_cr=np.diag([100.0, 100.0]), dt=1 / 30)
    d.update(kw)
    return MotionParams(**d)


def tcfg(**kw):
    kw.setdefault("confidence", "off")
    return TrackerConfig(motion=kw.pop("motion", motion()), **kw)


def frame(k, boxes, conf=0.9):
    return FrameData(k, tuple(Detection(k, BoundingBox(*b), conf) for b in boxes))


def hist_track(tid, birth, confirm, frames, detected=None):
    t = Track(tid, TrackState(np.zeros(6), np.eye(6)), 0.0, birth_frame=birth)
    t.confirm_frame = confirm
    t.status = Status.CONFIRMED if confirm is not None else Status.DEAD
    detected = detected or frames
    for f in frames:
        t.history.append(HistoryEntry(f, np.array([f, 0.0, 10, 20]), f in detected, 5.0, t.status))
    return t


def test_empty_frame_decrements_log_lr(clutter_model):
    tr = Tracker(tcfg(), clutter_model)
    tr.step(frame(1, [(100, 100, 20, 50)]))
    before = tr.active[0].log_lr
    tr.step(frame(2, []))
    assert tr.active[0].log_lr - before == pytest.approx(math.log(0.05 / 0.95))
    assert tr.active[0].frames_since_detection == 1


def test_matched_track_gains_evidence(clutter_model):
    tr = Tracker(tcfg(), clutter_model)
    tr.step(frame(1, [(100, 100, 20, 50)]))
    before = tr.active[0].log_lr
    diag = tr.step(frame(2, [(100.5, 100, 20, 50)]))
    assert diag.n_matched == 1 and diag.n_spawned == 0
    assert tr.active[0].log_lr > before


def test_out_of_order_frames_rejected(clutter_model):
    tr = Tracker(tcfg(), clutter_model)
    tr.step(frame(5, []))
    with pytest.raises(ValueError):
        tr.step(frame(5, []))
    with pytest.raises(ValueError):
        tr.step(frame(3, []))


def test_detection_threshold_drops_weak_boxes(clutter_model):
    tr = Tracker(tcfg(detection_threshold=0.5), clutter_model)
    d = tr.step(frame(1, [(100, 100, 20, 50)], conf=0.3))
    assert d.n_detections == 0 and not tr.active


def test_calibrated_mode_needs_model(clutter_model):
    with pytest.raises(ValueError):
        Tracker(tcfg(confidence="calibrated"), clutter_model)


def test_config_validation():
    with pytest.raises(ValueError):
        tcfg(assoc="greedy")
    with pytest.raises(ValueError):
        tcfg(lookahead_frames=-1)
    with pytest.raises(ValueError):
        tcfg(detection_threshold=2.0)


def test_lookahead_delay_mode():
    t = hist_track(1, birth=1, confirm=3, frames=range(1, 11))
    assert [b.frame for b in apply_lookahead([t], 30)] == list(range(1, 11))
    assert [b.frame for b in apply_lookahead([t], 0)] == list(range(3, 11))
    assert [b.frame for b in apply_lookahead([t], 1)] == list(range(2, 11))


def test_lookahead_birth_window_mode():
    t = hist_track(1, birth=1, confirm=3, frames=range(1, 11))
    assert [b.frame for b in apply_lookahead([t], 30, "birth_window")] == list(range(1, 11))
    assert apply_lookahead([t], 1, "birth_window") == []


def test_lookahead_drops_unconfirmed():
    t = hist_track(1, birth=1, confirm=None, frames=range(1, 4))
    assert apply_lookahead([t], 30) == []


def test_interpolation():
    a = ReportedBox(1, 7, np.array([0.0, 0, 10, 20]), 0.5)
    b = ReportedBox(3, 7, np.array([10.0, 4, 12, 20]), 0.9)
    out = interpolate_gaps([a, b], 20)
    mid = [x for x in out if x.interpolated]
    assert len(mid) == 1 and mid[0].frame == 2
    np.testing.assert_allclose(mid[0].box, [5, 2, 11, 20])
    far = ReportedBox(30, 7, np.array([0.0, 0, 10, 20]), 0.5)
    assert interpolate_gaps([b, far], 20) == [b, far]


def test_relabel_orders_by_first_appearance():
    bs = [ReportedBox(2, 40, np.ones(4), 1.0), ReportedBox(1, 9, np.ones(4), 1.0)]
    assert [(b.frame, b.track_id) for b in relabel(bs)] == [(1, 1), (2, 2)]


def single_target_sim(**kw):
    d = dict(
        n_frames=120, n_targets=1, clutter_rate=0.0, P_D_true=1.0,
        R_true=np.eye(4) * 1e-6, inlier_conf=(50.0, 1.0), seed=3,
    )
    d.update(kw)
    return SimConfig(**d)


def test_noise_free_single_target():
    cfg = single_target_sim()
    sim = simulate(cfg)
    res = run(sim.frames, tcfg(motion=cfg.motion_params()), flat_clutter(1e-12))
    ids = {b.track_id for b in res.boxes}
    assert ids == {1}
    assert sorted(b.frame for b in res.boxes) == list(range(1, 121))
    m = evaluate(sim.gt, res.boxes)
    assert m.idsw == 0 and m.mota == 1.0


def test_determinism():
    cfg = SimConfig(n_frames=80, n_targets=8, clutter_rate=3.0, seed=4)
    sim = simulate(cfg)
    c = tcfg(motion=cfg.motion_params())
    a = run(sim.frames, c, flat_clutter(1e-9))
    b = run(sim.frames, c, flat_clutter(1e-9))
    assert [(x.frame, x.track_id, x.box.tobytes(), x.confidence) for x in a.boxes] == [
        (x.frame, x.track_id, x.box.tobytes(), x.confidence) for x in b.boxes
    ]


def test_streaming_matches_batch():
    cfg = SimConfig(n_frames=60, n_targets=5, clutter_rate=2.0, seed=5)
    sim = simulate(cfg)
    c = tcfg(motion=cfg.motion_params())
    tr = Tracker(c, flat_clutter(1e-9))
    for fd in sim.frames:
        tr.step(fd)
    batch = run(sim.frames, c, flat_clutter(1e-9))
    assert [(t.id, t.log_lr, t.state.x.tobytes()) for t in tr.all_tracks()] == [
        (t.id, t.log_lr, t.state.x.tobytes()) for t in batch.tracks
    ]


def test_pure_clutter_confirms_nothing():
    cfg = SimConfig(n_frames=1000, n_targets=0, clutter_rate=5.0, seed=6)
    sim = simulate(cfg)
    seq = TrainingSequence("c", sim.frames, sim.gt, cfg.framerate, True, cfg.image_size)
    clutter = fit_width_density(sim.detections(), cfg.n_frames)
    clutter = clutter.with_cex(cex_base_scale([seq]))
    tr = Tracker(tcfg(motion=SimConfig().motion_params()), clutter)
    for fd in sim.frames:
        tr.step(fd)
    assert not any(t.confirm_frame is not None for t in tr.all_tracks())


def crossing_frames(rng, n=60, R=2.0, P_D=0.95):
    frames = []
    for k in range(1, n + 1):
        boxes = []
        if rng.random() < P_D:
            boxes.append((100 + 8 * k, 300, 30, 75))
        if rng.random() < P_D:
            boxes.append((580 - 8 * k, 300, 80, 200))
        noisy = [tuple(np.array(b) + rng.normal(0, math.sqrt(R), 4)) for b in boxes]
        frames.append(frame(k, noisy))
    return frames


def test_crossing_targets_keep_identity():
    c = tcfg(motion=motion(sigma_ca=0.5, R=2.0 * np.eye(4), P_cr=np.diag([1e5, 1e5])))
    worst = 0
    for seed in range(100):
        res = run(crossing_frames(np.random.default_rng(seed)), c, flat_clutter(1e-12))
        gt = [(k, 1, 100 + 8 * k, 300, 30, 75) for k in range(1, 61)]
        gt += [(k, 2, 580 - 8 * k, 300, 80, 200) for k in range(1, 61)]
        m = evaluate(gt, res.boxes)
        assert len({b.track_id for b in res.boxes}) == 2
        worst = max(worst, m.idsw)
    assert worst <= 1
