"""Detector performance models.

``ConfidenceModel`` turns a raw detector score into a calibrated likelihood:
the fraction of training detections in a (score, width) cell that matched a
ground-truth target. ``ClutterModel`` gives the density of extraneous
detections (clutter plus newly appearing targets) as a scaled histogram over
box width.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .core import Detection

DEFAULT_CONF_BINS = 10
DEFAULT_WIDTH_BINS = 12
DEFAULT_FLOOR = 0.01


def log_width_edges(widths, n_bins: int) -> np.ndarray:
    """Log-spaced edges covering ``widths``, padded so a single width still gets a bin."""
    widths = np.asarray(widths, dtype=float)
    lo, hi = float(widths.min()), float(widths.max())
    lo, hi = lo * 0.999, hi * 1.001
    if hi / lo < 1.01:
        lo, hi = lo / 1.1, hi * 1.1
    return np.geomspace(lo, hi, n_bins + 1)


def _bin_index(edges: np.ndarray, values) -> np.ndarray:
    """Bin index with clamping of out-of-range values to the edge bins."""
    idx = np.searchsorted(edges, values, side="right") - 1
    return np.clip(idx, 0, len(edges) - 2)


@dataclass(frozen=True)
class ConfidenceModel:
    conf_edges: np.ndarray
    width_edges: np.ndarray
    ratio: np.ndarray  # (n_conf_bins, n_width_bins)
    floor: float = DEFAULT_FLOOR

    def __post_init__(self):
        ratio = np.asarray(self.ratio, dtype=float)
        if ratio.shape != (len(self.conf_edges) - 1, len(self.width_edges) - 1):
            raise ValueError("ratio grid does not match the bin edges")
        if np.any(ratio < self.floor) or np.any(ratio > 1.0):
            raise ValueError("ratio cells must lie in [floor, 1]")

    def likelihood(self, conf, width) -> np.ndarray:
        ci = _bin_index(self.conf_edges, conf)
        wi = _bin_index(self.width_edges, width)
        return self.ratio[ci, wi]

    def __eq__(self, other):
        if not isinstance(other, ConfidenceModel):
            return NotImplemented
        return (
            np.array_equal(self.conf_edges, other.conf_edges)
            and np.array_equal(self.width_edges, other.width_edges)
            and np.array_equal(self.ratio, other.ratio)
            and self.floor == other.floor
        )


@dataclass(frozen=True)
class ClutterModel:
    width_edges: np.ndarray
    density: np.ndarray  # detections per frame per pixel of width
    c_ex: float = 1.0

    def __post_init__(self):
        if len(self.density) != len(self.width_edges) - 1:
            raise ValueError("density does not match the bin edges")
        if np.any(np.asarray(self.density) < 0):
            raise ValueError("density must be non-negative")
        if self.c_ex < 0:
            raise ValueError("c_ex must be non-negative")

    def with_cex(self, c_ex: float) -> "ClutterModel":
        return replace(self, c_ex=float(c_ex))

    def mean_density(self) -> float:
        """Width-weighted mean of the density histogram."""
        bw = np.diff(self.width_edges)
        return float(np.sum(self.density * bw) / np.sum(bw))

    def __eq__(self, other):
        if not isinstance(other, ClutterModel):
            return NotImplemented
        return (
            np.array_equal(self.width_edges, other.width_edges)
            and np.array_equal(self.density, other.density)
            and self.c_ex == other.c_ex
        )


def _fill_empty(ratio: np.ndarray, occupied: np.ndarray) -> np.ndarray:
    """Fill empty cells from the nearest occupied cell along the confidence axis.

    Width columns with no detections at all copy the nearest occupied column.
    """
    out = ratio.copy()
    n_conf, n_w = ratio.shape
    col_ok = occupied.any(axis=0)
    for j in range(n_w):
        if not col_ok[j]:
            continue
        rows = np.flatnonzero(occupied[:, j])
        for i in range(n_conf):
            if not occupied[i, j]:
                # ties go to the lower confidence bin
                k = rows[np.argmin(np.abs(rows - i))]
                out[i, j] = ratio[k, j]
    cols = np.flatnonzero(col_ok)
    for j in range(n_w):
        if not col_ok[j]:
            out[:, j] = out[:, cols[np.argmin(np.abs(cols - j))]]
    return out


def fit_confidence(
    inliers: Sequence[Detection],
    all_dets: Sequence[Detection],
    n_conf_bins: int = DEFAULT_CONF_BINS,
    n_width_bins: int = DEFAULT_WIDTH_BINS,
    floor: float = DEFAULT_FLOOR,
    width_edges: np.ndarray | None = None,
) -> ConfidenceModel:
    if len(all_dets) == 0:
        raise ValueError("no detections")
    conf_all = np.array([d.confidence for d in all_dets])
    w_all = np.array([d.bbox.w for d in all_dets])
    conf_edges = np.linspace(0.0, 1.0, n_conf_bins + 1)
    if width_edges is None:
        width_edges = log_width_edges(w_all, n_width_bins)
    width_edges = np.asarray(width_edges, dtype=float)
    shape = (len(conf_edges) - 1, len(width_edges) - 1)

    def counts(dets):
        c = np.zeros(shape)
        if len(dets):
            ci = _bin_index(conf_edges, [d.confidence for d in dets])
            wi = _bin_index(width_edges, [d.bbox.w for d in dets])
            np.add.at(c, (ci, wi), 1.0)
        return c

    n_all = counts(all_dets)
    n_in = counts(inliers)
    occupied = n_all > 0
    ratio = np.zeros(shape)
    ratio[occupied] = n_in[occupied] / n_all[occupied]
    ratio = _fill_empty(ratio, occupied)
    ratio = np.clip(ratio, floor, 1.0)
    return ConfidenceModel(conf_edges, width_edges, ratio, floor)


def conf_likelihood(m: ConfidenceModel, c: float, w: float) -> float:
    return float(m.likelihood(c, w))


def fit_width_density(
    all_dets: Sequence[Detection],
    n_frames: int,
    n_width_bins: int = DEFAULT_WIDTH_BINS,
    width_edges: np.ndarray | None = None,
) -> ClutterModel:
    if n_frames < 1:
        raise ValueError("n_frames must be >= 1")
    if len(all_dets) == 0:
        raise ValueError("no detections")
    widths = np.array([d.bbox.w for d in all_dets])
    if width_edges is None:
        width_edges = log_width_edges(widths, n_width_bins)
    width_edges = np.asarray(width_edges, dtype=float)
    counts = np.zeros(len(width_edges) - 1)
    np.add.at(counts, _bin_index(width_edges, widths), 1.0)
    density = counts / (n_frames * np.diff(width_edges))
    return ClutterModel(width_edges, density, 1.0)


def lambda_ex(m: ClutterModel, z: Detection) -> float:
    return float(lambda_ex_widths(m, z.bbox.w))


def lambda_ex_widths(m: ClutterModel, widths) -> np.ndarray:
    return m.c_ex * m.density[_bin_index(m.width_edges, widths)]
