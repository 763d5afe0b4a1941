"""Probabilistic single-hypothesis visual multi-object tracker."""

from .core import BoundingBox, CameraMotion, Detection, FrameData, GroundTruthBox, iou
from .motion import MotionParams, TrackState
from .pipeline import SequenceResult, Tracker, TrackerConfig, run

__all__ = [
    "BoundingBox",
    "CameraMotion",
    "Detection",
    "FrameData",
    "GroundTruthBox",
    "MotionParams",
    "SequenceResult",
    "TrackState",
    "Tracker",
    "TrackerConfig",
    "iou",
    "run",
]

__version__ = "0.1.0"
