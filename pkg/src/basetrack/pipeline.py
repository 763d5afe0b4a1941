"""Per-frame tracking loop and the reporting layer.

``Tracker.step`` runs predict, gate, associate, update and track management
for one frame and never looks ahead. ``run`` drives a whole sequence and then
applies the two reporting-only post-processing steps: look-ahead (delay
reporting so a track can be emitted from its first detection once it is
confirmed) and linear interpolation over short gaps.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from . import assoc as assoc_mod
from . import motion
from . import trackmgmt as tm
from .core import FrameData
from .detmodel import ClutterModel, ConfidenceModel, lambda_ex_widths
from .motion import MotionParams, TrackState
from .trackmgmt import ManageParams, Status, Track

log = logging.getLogger(__name__)

ASSOC_MODES = ("probabilistic", "iou", "traditional")
CLUTTER_MODES = ("dynamic", "constant")
CONFIDENCE_MODES = ("off", "raw", "calibrated")
MGMT_MODES = ("ptilde", "blackman")
LOOKAHEAD_MODES = ("delay", "birth_window")


@dataclass
class TrackerConfig:
    motion: MotionParams
    manage: ManageParams = field(default_factory=ManageParams)
    P_G: float = 1e-3
    detection_threshold: float = 0.1
    lookahead_frames: int = 30
    max_interp_gap: int = 20
    assoc: str = "probabilistic"
    clutter: str = "dynamic"
    # lambda used in constant-clutter mode; None means c_EX times the mean fitted density
    constant_lambda: float | None = None
    distance_aware: bool = True
    confidence: str = "calibrated"
    track_mgmt: str = "ptilde"
    iou_gate: float = assoc_mod.DEFAULT_IOU_GATE
    renormalize_after_gate: bool = False
    lookahead_mode: str = "delay"

    def __post_init__(self):
        if not 0.0 <= self.detection_threshold <= 1.0:
            raise ValueError("detection_threshold must lie in [0, 1]")
        if self.lookahead_frames < 0:
            raise ValueError("lookahead_frames must be >= 0")
        for name, allowed in (
            ("assoc", ASSOC_MODES),
            ("clutter", CLUTTER_MODES),
            ("confidence", CONFIDENCE_MODES),
            ("track_mgmt", MGMT_MODES),
            ("lookahead_mode", LOOKAHEAD_MODES),
        ):
            if getattr(self, name) not in allowed:
                raise ValueError(f"{name} must be one of {allowed}, got {getattr(self, name)!r}")
        if self.motion.distance_aware != self.distance_aware:
            self.motion = self.motion.replace(distance_aware=self.distance_aware)

    def replace(self, **kw) -> "TrackerConfig":
        return replace(self, **kw)


@dataclass
class ReportedBox:
    frame: int
    track_id: int
    box: np.ndarray  # (cx, cy, w, h)
    confidence: float
    interpolated: bool = False


@dataclass
class FrameDiagnostics:
    frame: int
    n_detections: int
    n_tracks: int
    n_confirmed: int
    n_matched: int
    n_spawned: int
    cmc_rejected: bool
    seconds: float


@dataclass
class SequenceResult:
    boxes: list[ReportedBox]
    diagnostics: list[FrameDiagnostics] = field(default_factory=list)
    tracks: list[Track] = field(default_factory=list)

    def frames(self) -> dict[int, list[ReportedBox]]:
        out: dict[int, list[ReportedBox]] = {}
        for b in self.boxes:
            out.setdefault(b.frame, []).append(b)
        return out

    @property
    def n_interpolated(self) -> int:
        return sum(b.interpolated for b in self.boxes)


def confidence_proxy(log_lr: float) -> float:
    return float(min(1.0, np.exp(min(log_lr, 50.0)) / 100.0))


class Tracker:
    """Single-sequence online tracker."""

    def __init__(
        self,
        cfg: TrackerConfig,
        clutter_model: ClutterModel,
        confidence_model: ConfidenceModel | None = None,
    ):
        if cfg.confidence == "calibrated" and confidence_model is None:
            raise ValueError("calibrated confidence requires a confidence model")
        self.cfg = cfg
        self.clutter_model = clutter_model
        self.confidence_model = confidence_model
        self.active: list[Track] = []
        self.finished: list[Track] = []
        self.last_frame: int | None = None
        self._ids = tm.IdAllocator()
        if cfg.constant_lambda is not None:
            self._const_lambda = float(cfg.constant_lambda)
        else:
            self._const_lambda = clutter_model.c_ex * clutter_model.mean_density()

    # -- per-detection model terms -------------------------------------------

    def _conf_lik(self, conf: np.ndarray, widths: np.ndarray) -> np.ndarray:
        mode = self.cfg.confidence
        if mode == "off":
            return np.ones_like(conf)
        if mode == "raw":
            return np.clip(conf, 1e-3, 1.0)
        return self.confidence_model.likelihood(conf, widths)

    def _prior_conf(self, conf_lik: np.ndarray) -> np.ndarray:
        # without confidence information new tracks start at even odds
        if self.cfg.confidence == "off":
            return np.full_like(conf_lik, 0.5)
        return conf_lik

    def _lambda(self, widths: np.ndarray) -> np.ndarray:
        if self.cfg.clutter == "constant":
            return np.full(len(widths), self._const_lambda)
        return lambda_ex_widths(self.clutter_model, widths)

    # -- main loop -----------------------------------------------------------

    def step(self, fd: FrameData) -> FrameDiagnostics:
        t0 = time.perf_counter()
        cfg = self.cfg
        p = cfg.motion
        if self.last_frame is not None and fd.frame <= self.last_frame:
            raise ValueError(f"frame {fd.frame} presented after frame {self.last_frame}")
        gap = 1 if self.last_frame is None else fd.frame - self.last_frame
        self.last_frame = fd.frame

        cm, cm_ok = motion.resolve_camera_motion(fd.camera_motion)
        tracks = self.active
        n = len(tracks)
        if n:
            x = np.stack([t.state.x for t in tracks])
            P = np.stack([t.state.P for t in tracks])
            x, P = motion.predict_arrays(x, P, p, cm, dt=gap * p.dt)
        else:
            x, P = np.zeros((0, 6)), np.zeros((0, 6, 6))

        dets = [d for d in fd.detections if d.confidence >= cfg.detection_threshold]
        m = len(dets)
        Z = np.array([d.bbox.as_array() for d in dets]).reshape(m, 4)
        conf = np.array([d.confidence for d in dets], dtype=float)
        conf_lik = self._conf_lik(conf, Z[:, 2])
        lam = self._lambda(Z[:, 2])

        table = assoc_mod.build_table_arrays(
            x, P, Z, np.log(conf_lik), lam, p, cfg.P_G, cfg.renormalize_after_gate
        )
        if cfg.assoc == "probabilistic":
            asg = assoc_mod.solve_assignment(table, cfg.P_G)
        elif cfg.assoc == "iou":
            asg = assoc_mod.solve_iou(x[:, [0, 1, 4, 5]], Z, cfg.iou_gate)
        else:
            asg = assoc_mod.solve_traditional(table, cfg.P_G)

        matched = np.zeros(n, dtype=bool)
        if asg.pairs:
            ti = np.array([i for i, _ in asg.pairs])
            dj = np.array([j for _, j in asg.pairs])
            x[ti], P[ti] = motion.update_arrays(x[ti], P[ti], Z[dj], p)
            matched[ti] = True

        mp = cfg.manage
        if cfg.track_mgmt == "ptilde":
            incr = tm.lr_step(tm.ptilde_rows(table.assoc_prob, mp.ptilde_cap), mp.P_D)
            incr = np.atleast_1d(incr)
        else:
            incr = np.full(n, np.log(1.0 - mp.P_D))
            for i, j in asg.pairs:
                incr[i] = tm.lr_step_blackman(
                    (table.y[i, j], table.S[i]), mp.P_D, float(max(lam[j], 1e-300)), float(conf_lik[j])
                )

        for i, t in enumerate(tracks):
            t.state = TrackState(x[i], P[i])
            t.frames_since_detection = 0 if matched[i] else t.frames_since_detection + gap
            tm.update_lifecycle(t, incr[i], mp, fd.frame)
            t.history.append(
                tm.HistoryEntry(fd.frame, t.state.box.copy(), bool(matched[i]), t.log_lr, t.status)
            )

        spawned: list[Track] = []
        if asg.unmatched_dets:
            uj = np.array(asg.unmatched_dets)
            xs, Ps = motion.init_arrays(Z[uj], p)
            states = [TrackState(xs[k], Ps[k]) for k in range(len(uj))]
            spawned = tm.spawn_tracks(states, self._prior_conf(conf_lik[uj]), fd.frame, self._ids, mp)
            for t in spawned:
                t.history.append(tm.HistoryEntry(fd.frame, t.state.box.copy(), True, t.log_lr, t.status))

        self.active = [t for t in tracks if t.alive] + spawned
        self.finished.extend(t for t in tracks if not t.alive)
        return FrameDiagnostics(
            frame=fd.frame,
            n_detections=m,
            n_tracks=len(self.active),
            n_confirmed=sum(t.status is Status.CONFIRMED for t in self.active),
            n_matched=len(asg.pairs),
            n_spawned=len(spawned),
            cmc_rejected=not cm_ok,
            seconds=time.perf_counter() - t0,
        )

    def all_tracks(self) -> list[Track]:
        return sorted(self.finished + self.active, key=lambda t: t.id)

    def snapshot(self) -> list[tuple]:
        """Hashable view of the live internal state, for determinism checks."""
        return [
            (t.id, t.status.value, t.log_lr, t.state.x.tobytes(), t.state.P.tobytes())
            for t in self.active
        ]


# -- reporting ---------------------------------------------------------------


def report_tracks(tracks: Iterable[Track]) -> list[ReportedBox]:
    """Every detection-backed history box of every track, with no filtering."""
    out = []
    for t in tracks:
        for h in t.history:
            if h.detected:
                out.append(ReportedBox(h.frame, t.id, h.box.copy(), confidence_proxy(h.log_lr)))
    return out


def apply_lookahead(
    tracks: Sequence[Track], lookahead_frames: int, mode: str = "delay"
) -> list[ReportedBox]:
    """Detection-backed boxes that look-ahead reporting would emit.

    In ``delay`` mode a box at frame ``f`` is emitted when the track is
    confirmed by frame ``f + lookahead_frames``. ``birth_window`` emits the
    whole track from birth when it confirms within the window after birth, and
    nothing otherwise.
    """
    out = []
    for t in tracks:
        if t.confirm_frame is None:
            continue
        if mode == "birth_window":
            if t.confirm_frame - t.birth_frame > lookahead_frames:
                continue
            first = t.birth_frame
        else:
            first = t.confirm_frame - lookahead_frames
        for h in t.history:
            if h.detected and h.frame >= first:
                out.append(ReportedBox(h.frame, t.id, h.box.copy(), confidence_proxy(h.log_lr)))
    return out


def interpolate_gaps(boxes: Sequence[ReportedBox], max_interp_gap: int) -> list[ReportedBox]:
    """Fill within-track gaps of at most ``max_interp_gap`` frames linearly."""
    by_track: dict[int, list[ReportedBox]] = {}
    for b in boxes:
        by_track.setdefault(b.track_id, []).append(b)
    out = list(boxes)
    for tid, bs in by_track.items():
        bs = sorted(bs, key=lambda b: b.frame)
        for a, b in zip(bs, bs[1:]):
            g = b.frame - a.frame - 1
            if g <= 0 or g > max_interp_gap:
                continue
            for k in range(1, g + 1):
                alpha = k / (g + 1)
                box = (1 - alpha) * a.box + alpha * b.box
                out.append(ReportedBox(a.frame + k, tid, box, min(a.confidence, b.confidence), True))
    return out


def relabel(boxes: Sequence[ReportedBox]) -> list[ReportedBox]:
    """Sort by frame and renumber track ids 1..n in order of first appearance."""
    boxes = sorted(boxes, key=lambda b: (b.frame, b.track_id))
    mapping: dict[int, int] = {}
    for b in boxes:
        if b.track_id not in mapping:
            mapping[b.track_id] = len(mapping) + 1
    return [replace(b, track_id=mapping[b.track_id]) for b in boxes]


def run(
    frames: Sequence[FrameData],
    cfg: TrackerConfig,
    clutter_model: ClutterModel,
    confidence_model: ConfidenceModel | None = None,
) -> SequenceResult:
    if len(frames) == 0:
        raise ValueError("empty sequence")
    tracker = Tracker(cfg, clutter_model, confidence_model)
    diags = [tracker.step(fd) for fd in frames]
    tracks = tracker.all_tracks()
    boxes = apply_lookahead(tracks, cfg.lookahead_frames, cfg.lookahead_mode)
    boxes = interpolate_gaps(boxes, cfg.max_interp_gap)
    return SequenceResult(relabel(boxes), diags, tracks)
