"""Likelihood-ratio track lifecycle.

Each track keeps the natural log of the likelihood ratio for "this track is a
real target". The per-frame increment is computed from the probability that
at least one current detection belongs to the track, summed over all
detections rather than only the assigned one.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .motion import TrackState, gaussian_logpdf


class Status(enum.Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    DEAD = "dead"


@dataclass(frozen=True)
class ManageParams:
    P_D: float = 0.95
    log_lr_confirm: float = 4.6
    log_lr_delete: float = -4.6
    max_coast_frames: int = 30
    ptilde_cap: float = 1.0 - 1e-6
    peak_margin: float = 5.0
    init_log_lr_clamp: float = 2.0

    def __post_init__(self):
        if not 0.0 < self.P_D < 1.0:
            raise ValueError("P_D must lie in (0, 1)")
        if not self.log_lr_delete < 0.0 < self.log_lr_confirm:
            raise ValueError("need log_lr_delete < 0 < log_lr_confirm")
        if not 0.0 < self.ptilde_cap < 1.0:
            raise ValueError("ptilde_cap must lie in (0, 1)")


@dataclass
class HistoryEntry:
    frame: int
    box: np.ndarray  # (cx, cy, w, h)
    detected: bool
    log_lr: float
    status: Status


@dataclass
class Track:
    id: int
    state: TrackState
    log_lr: float
    birth_frame: int
    status: Status = Status.TENTATIVE
    frames_since_detection: int = 0
    confirm_frame: int | None = None
    death_frame: int | None = None
    history: list[HistoryEntry] = field(default_factory=list)

    @property
    def alive(self) -> bool:
        return self.status is not Status.DEAD


def ptilde(track_row, cap: float = 1.0 - 1e-6) -> float:
    """Probability that at least one detection in the row originates from the track."""
    row = np.asarray(track_row, dtype=float)
    if row.size == 0:
        return 0.0
    return float(min(1.0 - np.prod(1.0 - row), cap))


def ptilde_rows(assoc_prob: np.ndarray, cap: float = 1.0 - 1e-6) -> np.ndarray:
    if assoc_prob.shape[1] == 0:
        return np.zeros(assoc_prob.shape[0])
    # log1p keeps precision for many small probabilities
    with np.errstate(divide="ignore"):
        miss = np.exp(np.sum(np.log1p(-np.minimum(assoc_prob, 1.0)), axis=1))
    return np.minimum(1.0 - miss, cap)


def lr_step(pt, P_D: float):
    """Log-likelihood-ratio increment for a frame given ``ptilde``."""
    pt = np.asarray(pt, dtype=float)
    out = np.log((pt + (1.0 - P_D) * (1.0 - pt)) / (P_D * (1.0 - pt)))
    return float(out) if out.ndim == 0 else out


def lr_step_blackman(associated, P_D: float, lambda_c: float, lr_signal: float = 1.0) -> float:
    """Classic per-frame log-LR factor using only the associated detection.

    ``associated`` is ``None`` for a missed track, or the innovation ``(y, S)``.
    """
    if lambda_c <= 0:
        raise ValueError("lambda_c must be positive for the classic LR update")
    if associated is None:
        return math.log(1.0 - P_D)
    y, S = associated
    return float(math.log(P_D) + gaussian_logpdf(np.asarray(y, float), np.asarray(S, float))
                 - math.log(lambda_c) + math.log(lr_signal))


def update_lifecycle(t: Track, increment: float, mp: ManageParams, frame: int | None = None) -> Track:
    if t.status is Status.DEAD:
        return t
    t.log_lr = min(t.log_lr + float(increment), mp.log_lr_confirm + mp.peak_margin)
    if t.status is Status.TENTATIVE and t.log_lr >= mp.log_lr_confirm:
        t.status = Status.CONFIRMED
        t.confirm_frame = frame
    if t.log_lr <= mp.log_lr_delete or t.frames_since_detection > mp.max_coast_frames:
        t.status = Status.DEAD
        t.death_frame = frame
    return t


def initial_log_lr(conf_lik, clamp: float = 2.0):
    """Prior log-odds from the calibrated confidence of the spawning detection."""
    c = np.clip(np.asarray(conf_lik, dtype=float), 1e-12, 1.0 - 1e-12)
    return np.clip(np.log(c / (1.0 - c)), -clamp, clamp)


class IdAllocator:
    """Monotone track id source; ids are never reused within a run."""

    def __init__(self, start: int = 1):
        self._next = start

    def __call__(self) -> int:
        i = self._next
        self._next += 1
        return i


def spawn_tracks(states, conf_liks, frame: int, ids: IdAllocator, mp: ManageParams) -> list[Track]:
    """One tentative track per unclaimed detection, in the given order."""
    lrs = initial_log_lr(conf_liks, mp.init_log_lr_clamp)
    return [
        Track(id=ids(), state=s, log_lr=float(lr), birth_frame=frame)
        for s, lr in zip(states, np.atleast_1d(lrs))
    ]
