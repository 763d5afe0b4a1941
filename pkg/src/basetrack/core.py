"""Shared value types and box geometry.

Boxes are kept in center format ``(cx, cy, w, h)`` everywhere inside the
tracker; the corner/top-left formats of MOT files are converted at the I/O
boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class BoundingBox:
    cx: float
    cy: float
    w: float
    h: float
    # top-left corner as read from a file; center -> corner -> center is not
    # exact in floating point, so the original values are kept for writing
    top_left: tuple[float, float] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        vals = (self.cx, self.cy, self.w, self.h)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite bounding box {vals}")
        if self.w <= 0 or self.h <= 0:
            raise ValueError(f"bounding box must have positive size, got w={self.w}, h={self.h}")

    def as_array(self) -> np.ndarray:
        return np.array([self.cx, self.cy, self.w, self.h], dtype=float)

    @classmethod
    def from_array(cls, a) -> "BoundingBox":
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))

    @classmethod
    def from_tlwh(cls, left: float, top: float, w: float, h: float) -> "BoundingBox":
        left, top, w, h = float(left), float(top), float(w), float(h)
        return cls(left + w / 2.0, top + h / 2.0, w, h, (left, top))

    def tlwh(self) -> tuple[float, float, float, float]:
        if self.top_left is not None:
            return (self.top_left[0], self.top_left[1], self.w, self.h)
        return (self.cx - self.w / 2.0, self.cy - self.h / 2.0, self.w, self.h)


@dataclass(frozen=True)
class Detection:
    frame: int
    bbox: BoundingBox
    confidence: float

    def __post_init__(self):
        if self.frame < 1:
            raise ValueError(f"frame index must be >= 1, got {self.frame}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must lie in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class GroundTruthBox:
    frame: int
    target_id: int
    bbox: BoundingBox
    visibility: float = 1.0

    def __post_init__(self):
        if self.target_id < 1:
            raise ValueError(f"target id must be >= 1, got {self.target_id}")


@dataclass(frozen=True)
class CameraMotion:
    """Affine pixel transform ``p_k = warp @ p_{k-1} + translation``."""

    warp: np.ndarray = field(default_factory=lambda: np.eye(2))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        warp = np.asarray(self.warp, dtype=float).reshape(2, 2)
        t = np.asarray(self.translation, dtype=float).reshape(2)
        if not (np.all(np.isfinite(warp)) and np.all(np.isfinite(t))):
            raise ValueError("camera motion must be finite")
        warp.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "warp", warp)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "CameraMotion":
        return cls()

    @property
    def is_invertible(self) -> bool:
        return abs(np.linalg.det(self.warp)) > 1e-12

    @property
    def is_identity(self) -> bool:
        return bool(np.array_equal(self.warp, np.eye(2)) and not np.any(self.translation))

    def __eq__(self, other):
        if not isinstance(other, CameraMotion):
            return NotImplemented
        return np.array_equal(self.warp, other.warp) and np.array_equal(
            self.translation, other.translation
        )

    def __hash__(self):
        return hash((self.warp.tobytes(), self.translation.tobytes()))


@dataclass(frozen=True)
class FrameData:
    frame: int
    detections: tuple[Detection, ...] = ()
    camera_motion: CameraMotion = field(default_factory=CameraMotion.identity)
    timestamp: float = 0.0

    def __post_init__(self):
        # canonical order: descending confidence, stable w.r.t. input order
        dets = tuple(sorted(self.detections, key=lambda d: -d.confidence))
        object.__setattr__(self, "detections", dets)


def bbox_to_corners(b: BoundingBox) -> tuple[float, float, float, float]:
    return (b.cx - b.w / 2.0, b.cy - b.h / 2.0, b.cx + b.w / 2.0, b.cy + b.h / 2.0)


def corners_to_bbox(x1: float, y1: float, x2: float, y2: float) -> BoundingBox:
    return BoundingBox((x1 + x2) / 2.0, (y1 + y2) / 2.0, x2 - x1, y2 - y1)


def iou(a: BoundingBox, b: BoundingBox) -> float:
    ax1, ay1, ax2, ay2 = bbox_to_corners(a)
    bx1, by1, bx2, by2 = bbox_to_corners(b)
    iw = min(ax2, bx2) - max(ax1, bx1)
    ih = min(ay2, by2) - max(ay1, by1)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    # areas from the same rounded corners so that iou(a, a) == 1 exactly
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return min(1.0, inter / union)


def iou_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise IOU between two arrays of center-format boxes, shapes (n, 4) and (m, 4)."""
    a = np.asarray(a, dtype=float).reshape(-1, 4)
    b = np.asarray(b, dtype=float).reshape(-1, 4)
    a1 = a[:, None, :2] - a[:, None, 2:] / 2.0
    a2 = a[:, None, :2] + a[:, None, 2:] / 2.0
    b1 = b[None, :, :2] - b[None, :, 2:] / 2.0
    b2 = b[None, :, :2] + b[None, :, 2:] / 2.0
    wh = np.clip(np.minimum(a2, b2) - np.maximum(a1, b1), 0.0, None)
    inter = wh[..., 0] * wh[..., 1]
    area_a = np.prod(a2 - a1, axis=-1)
    area_b = np.prod(b2 - b1, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(inter > 0, inter / (area_a + area_b - inter), 0.0)
    return np.minimum(out, 1.0)
