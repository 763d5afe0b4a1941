import numpy as np
import pytest

from basetrack.evalkit import (
    SimConfig,
    clear_mot,
    combine,
    evaluate,
    heterogeneous_benchmark,
    idf1,
    simulate,
)
from basetrack.pipeline import ReportedBox

from conftest import id_swap_fixture


def test_noiseless_detections_equal_gt():
    cfg = SimConfig(n_frames=30, n_targets=5, clutter_rate=0.0, P_D_true=1.0, R_true=np.zeros((4, 4)), seed=1)
    sim = simulate(cfg)
    by_id = {(g.frame, g.target_id): g.bbox.as_array() for g in sim.gt}
    for fd, src in zip(sim.frames, sim.sources):
        assert len(fd.detections) == 5
        for d, tid in zip(fd.detections, src):
            np.testing.assert_allclose(d.bbox.as_array(), by_id[(fd.frame, tid)], atol=1e-5)


def test_detection_count_binomial_bound():
    cfg = SimConfig(n_frames=10_000, n_targets=2, clutter_rate=0.0, P_D_true=0.9, seed=2)
    sim = simulate(cfg)
    counts = np.bincount(np.concatenate(sim.sources), minlength=3)[1:]
    n, p = cfg.n_frames, cfg.P_D_true
    sd = np.sqrt(n * p * (1 - p))
    assert np.all(np.abs(counts - n * p) <= 3 * sd)


def test_clutter_rate_poisson_bound():
    cfg = SimConfig(n_frames=2000, n_targets=0, clutter_rate=4.0, seed=3)
    sim = simulate(cfg)
    per_frame = np.array([len(f.detections) for f in sim.frames])
    assert abs(per_frame.mean() - 4.0) <= 3 * np.sqrt(4.0 / len(per_frame))


def test_simulation_reproducible():
    cfg = heterogeneous_benchmark(seed=4, n_frames=40)
    a, b = simulate(cfg), simulate(cfg)
    assert [g.bbox for g in a.gt] == [g.bbox for g in b.gt]
    assert [d for f in a.frames for d in f.detections] == [d for f in b.frames for d in f.detections]
    c = simulate(heterogeneous_benchmark(seed=5, n_frames=40))
    assert [g.bbox for g in a.gt] != [g.bbox for g in c.gt]


def test_exit_mode_keeps_population():
    cfg = SimConfig(n_frames=200, n_targets=10, framerate=5.0, mode="exit", seed=6)
    sim = simulate(cfg)
    per_frame = np.bincount([g.frame for g in sim.gt])[1:]
    assert np.all(per_frame == 10)
    assert len({g.target_id for g in sim.gt}) > 10


def test_sources_align_with_detections():
    sim = simulate(SimConfig(n_frames=20, n_targets=4, clutter_rate=3.0, seed=7))
    for fd, src in zip(sim.frames, sim.sources):
        assert len(src) == len(fd.detections)


def test_invalid_config():
    with pytest.raises(ValueError):
        SimConfig(clutter_rate=-1)
    with pytest.raises(ValueError):
        SimConfig(mode="wrap")


def test_perfect_tracking():
    gt, _ = id_swap_fixture()
    m = evaluate(gt, gt)
    assert (m.mota, m.fp, m.fn, m.idsw, m.idf1) == (1.0, 0, 0, 0, 1.0)


def test_empty_report():
    gt, _ = id_swap_fixture()
    m = evaluate(gt, [])
    assert m.mota == 0.0 and m.fn == 20 and m.idf1 == 0.0


def test_id_swap_fixture():
    gt, hyp = id_swap_fixture()
    m = evaluate(gt, hyp)
    assert m.idsw == 1 and m.fp == 0 and m.fn == 0
    assert m.mota == pytest.approx(0.95, abs=1e-12)
    assert m.idf1 == pytest.approx(0.75, abs=1e-12)
    assert idf1(gt, hyp) == m.idf1
    assert m.mota == 1 - (m.fp + m.fn + m.idsw) / m.n_gt


def test_false_positive_and_miss():
    gt, _ = id_swap_fixture()
    hyp = [r for r in gt if r[0] != 3] + [(4, 99, 1000.0, 900.0, 20.0, 50.0)]
    m = clear_mot(gt, hyp)
    assert (m.fp, m.fn, m.idsw) == (1, 2, 0)


def test_relabel_invariance():
    gt, hyp = id_swap_fixture()
    relab = [(r[0], {10: 7, 30: 3, 20: 55}[r[1]], *r[2:]) for r in hyp]
    a, b = evaluate(gt, hyp), evaluate(gt, relab)
    assert (a.mota, a.idf1) == (b.mota, b.idf1)


def test_reported_boxes_accepted():
    gt, hyp = id_swap_fixture()
    boxes = [ReportedBox(r[0], r[1], np.array(r[2:]), 1.0) for r in hyp]
    assert evaluate(gt, boxes).idf1 == evaluate(gt, hyp).idf1


def test_combine_pools_counts():
    gt, hyp = id_swap_fixture()
    a = evaluate(gt, hyp)
    c = combine({"a": a, "b": evaluate(gt, gt)})
    assert c.n_gt == 40 and c.idsw == 1
    assert c.mota == pytest.approx(1 - 1 / 40)
    assert c.idf1 == pytest.approx((30 + 40) / 80)
