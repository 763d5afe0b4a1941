import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from basetrack.core import BoundingBox, Detection
from basetrack.detmodel import (
    ClutterModel,
    ConfidenceModel,
    conf_likelihood,
    fit_confidence,
    fit_width_density,
    lambda_ex,
    lambda_ex_widths,
)


def det(conf, w, frame=1):
    return Detection(frame, BoundingBox(100.0, 100.0, w, 2.5 * w), conf)


def test_ratio_from_counts():
    dets = [det(0.55, 50.0) for _ in range(5)]
    m = fit_confidence(dets[:2], dets, n_conf_bins=10, n_width_bins=1)
    assert conf_likelihood(m, 0.55, 50.0) == pytest.approx(0.4)


def test_all_inliers_gives_one_and_none_gives_floor():
    rng = np.random.default_rng(0)
    dets = [det(float(c), float(w)) for c, w in zip(rng.random(200), rng.uniform(10, 100, 200))]
    m = fit_confidence(dets, dets)
    assert np.all(m.ratio == 1.0)
    m0 = fit_confidence([], dets, floor=0.02)
    assert np.all(m0.ratio == 0.02)


def test_empty_input_rejected():
    with pytest.raises(ValueError, match="no detections"):
        fit_confidence([], [])
    with pytest.raises(ValueError):
        fit_width_density([], 3)


def test_empty_bins_take_nearest_confidence_bin():
    # detections only in the top and bottom confidence bins
    lo = [det(0.05, 50.0) for _ in range(4)]
    hi = [det(0.95, 50.0) for _ in range(4)]
    m = fit_confidence(hi[:3] + lo[:1], lo + hi, n_conf_bins=10, n_width_bins=1)
    assert conf_likelihood(m, 0.05, 50) == pytest.approx(0.25)
    assert conf_likelihood(m, 0.95, 50) == pytest.approx(0.75)
    assert conf_likelihood(m, 0.25, 50) == pytest.approx(0.25)
    assert conf_likelihood(m, 0.75, 50) == pytest.approx(0.75)


def test_width_clamped_to_edge_bins():
    dets = [det(0.5, 20.0)] * 3 + [det(0.5, 80.0)] * 2
    m = fit_confidence([det(0.5, 80.0)] * 2, dets, n_conf_bins=2, n_width_bins=2)
    assert conf_likelihood(m, 0.5, 1e4) == conf_likelihood(m, 0.5, 80.0) == 1.0
    assert conf_likelihood(m, 0.5, 1e-3) == conf_likelihood(m, 0.5, 20.0) == m.floor


def test_monotone_fixture():
    rng = np.random.default_rng(1)
    conf = rng.random(2000)
    dets = [det(float(c), 50.0) for c in conf]
    inl = [d for d, u in zip(dets, rng.random(2000)) if u < d.confidence]
    m = fit_confidence(inl, dets, n_width_bins=1)
    assert conf_likelihood(m, 0.9, 50) > conf_likelihood(m, 0.2, 50)


def test_density_arithmetic():
    dets = [det(0.5, 50.0, f) for f in range(1, 6) for _ in range(2)]
    m = fit_width_density(dets, 5, width_edges=np.array([40.0, 60.0]))
    assert m.density[0] == pytest.approx(0.1)
    assert lambda_ex(m, det(0.5, 50.0)) == pytest.approx(0.1)
    assert lambda_ex(m.with_cex(2.0), det(0.5, 50.0)) == pytest.approx(0.2)
    assert lambda_ex(m.with_cex(0.0), det(0.5, 50.0)) == 0.0
    m2 = fit_width_density(dets, 10, width_edges=np.array([40.0, 60.0]))
    assert m2.density[0] == pytest.approx(0.05)


def test_uniform_widths_give_flat_density():
    rng = np.random.default_rng(2)
    w = rng.uniform(20, 80, 60000)
    dets = [det(0.5, float(x)) for x in w]
    edges = np.linspace(20, 80, 7)
    m = fit_width_density(dets, 100, width_edges=edges)
    expected = 60000 / (100 * 60)
    sd = np.sqrt(10000) / (100 * 10)
    np.testing.assert_allclose(m.density, expected, atol=4 * sd)


def test_small_box_skew_fixture():
    rng = np.random.default_rng(3)
    # density proportional to w^-3 on [10, 200)
    w = 10 * (1 - rng.random(40000)) ** -0.5
    w = w[w < 200]
    m = fit_width_density([det(0.5, float(x)) for x in w], 50)
    assert np.all(np.diff(m.density) <= 0)


def test_refit_is_bit_identical():
    rng = np.random.default_rng(4)
    dets = [det(float(c), float(x)) for c, x in zip(rng.random(500), rng.uniform(10, 300, 500))]
    inl = dets[::3]
    a, b = fit_confidence(inl, dets), fit_confidence(inl, dets)
    assert a == b
    assert fit_width_density(dets, 7) == fit_width_density(dets, 7)


@settings(max_examples=50, deadline=None)
@given(
    st.lists(st.tuples(st.floats(0, 1), st.floats(1, 500), st.booleans()), min_size=1, max_size=60),
    st.floats(0, 1),
    st.floats(0.01, 1e4),
)
def test_likelihood_within_floor_and_one(rows, c, w):
    dets = [det(cf, wd) for cf, wd, _ in rows]
    inl = [d for d, (_, _, keep) in zip(dets, rows) if keep]
    m = fit_confidence(inl, dets)
    v = conf_likelihood(m, c, w)
    assert m.floor <= v <= 1.0


def test_model_validation():
    with pytest.raises(ValueError):
        ConfidenceModel(np.linspace(0, 1, 3), np.array([1.0, 2.0]), np.array([[0.5], [2.0]]))
    with pytest.raises(ValueError):
        ClutterModel(np.array([1.0, 2.0]), np.array([-1.0]))
    m = ClutterModel(np.array([1.0, 2.0, 4.0]), np.array([1.0, 4.0]), 3.0)
    np.testing.assert_array_equal(lambda_ex_widths(m, [0.5, 3.0, 9.0]), [3.0, 12.0, 12.0])
    assert m.mean_density() == pytest.approx((1.0 * 1 + 4.0 * 2) / 3)
