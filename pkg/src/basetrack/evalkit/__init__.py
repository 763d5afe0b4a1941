"""Synthetic scenes and tracking metrics for desk-scale verification."""

from .metrics import MetricsReport, clear_mot, combine, evaluate, idf1
from .simulate import SimConfig, SimData, heterogeneous_benchmark, simulate

__all__ = [
    "MetricsReport",
    "SimConfig",
    "SimData",
    "clear_mot",
    "combine",
    "evaluate",
    "heterogeneous_benchmark",
    "idf1",
    "simulate",
]
