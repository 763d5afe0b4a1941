"""Fitting model parameters from detections plus ground truth.

Detections are first matched to ground truth by mutual-best IOU above 0.7.
From the matches and the ground truth we get the initial center-rate
covariance, the measurement covariance, the detector confidence and width
histograms, and a maximum-likelihood fit of the two process-noise scales.
The extraneous-density scale ``c_EX`` is picked last by running the tracker
over the training set.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import detmodel
from .core import Detection, FrameData, GroundTruthBox, iou_matrix
from .detmodel import ClutterModel, ConfidenceModel
from .evalkit.metrics import combine, evaluate
from .motion import MotionParams, gaussian_logpdf
from .pipeline import TrackerConfig, run

log = logging.getLogger(__name__)

MATCH_IOU = 0.7
MIN_VISIBILITY = 0.1
CEX_EXPONENTS = np.arange(-3.0, 3.0 + 1e-9, 0.5)


@dataclass
class TrainingSequence:
    name: str
    frames: list[FrameData]
    gt: list[GroundTruthBox]
    framerate: float
    camera_stationary: bool = True
    image_size: tuple[float, float] = (1920.0, 1080.0)

    @property
    def dt(self) -> float:
        return 1.0 / self.framerate


@dataclass
class MatchedPair:
    det: Detection
    gt: GroundTruthBox


@dataclass
class FitReport:
    P_cr: np.ndarray
    R: np.ndarray
    sigma_ca: float
    sigma_sr: float
    confidence_model: ConfidenceModel
    clutter_model: ClutterModel
    reference_width: float
    counts: dict[str, int] = field(default_factory=dict)
    mle_trace: list[tuple[float, float, float]] = field(default_factory=list)
    cex_trace: list[tuple[float, float]] = field(default_factory=list)

    def motion_params(self, dt: float, **kw) -> MotionParams:
        return MotionParams(
            sigma_ca=self.sigma_ca,
            sigma_sr=self.sigma_sr,
            R=self.R,
            P_cr=self.P_cr,
            dt=dt,
            reference_width=self.reference_width,
            **kw,
        )


# -- matching ----------------------------------------------------------------


def match_frame(det_boxes: np.ndarray, gt_boxes: np.ndarray, min_iou: float = MATCH_IOU) -> list[tuple[int, int]]:
    """Mutual-best IOU pairs above ``min_iou`` as ``(det index, gt index)``."""
    if len(det_boxes) == 0 or len(gt_boxes) == 0:
        return []
    ious = iou_matrix(det_boxes, gt_boxes)
    best_gt = np.argmax(ious, axis=1)
    best_det = np.argmax(ious, axis=0)
    return [
        (j, int(best_gt[j]))
        for j in range(len(det_boxes))
        if best_det[best_gt[j]] == j and ious[j, best_gt[j]] > min_iou
    ]


def match_gt(
    dets: Sequence[Detection],
    gts: Sequence[GroundTruthBox],
    min_iou: float = MATCH_IOU,
    min_visibility: float = MIN_VISIBILITY,
) -> list[MatchedPair]:
    by_frame_d: dict[int, list[Detection]] = {}
    by_frame_g: dict[int, list[GroundTruthBox]] = {}
    for d in dets:
        by_frame_d.setdefault(d.frame, []).append(d)
    for g in gts:
        if g.visibility >= min_visibility:
            by_frame_g.setdefault(g.frame, []).append(g)
    out: list[MatchedPair] = []
    for f in sorted(by_frame_d):
        ds, gs = by_frame_d[f], by_frame_g.get(f, [])
        db = np.array([d.bbox.as_array() for d in ds]).reshape(-1, 4)
        gb = np.array([g.bbox.as_array() for g in gs]).reshape(-1, 4)
        out.extend(MatchedPair(ds[j], gs[i]) for j, i in match_frame(db, gb, min_iou))
    return out


# -- moment estimators -------------------------------------------------------


def estimate_pcr(sequences: Sequence[tuple[Sequence[GroundTruthBox], float]]) -> np.ndarray:
    """Second moment about zero of each target's first observed rate.

    ``sequences`` holds ``(ground truth, framerate)`` of stationary-camera
    sequences. The 4-D moment over ``(cx, cy, w, h)`` is reduced to the
    center block.
    """
    total = np.zeros((4, 4))
    n_g = 0
    for gts, fps in sequences:
        first: dict[int, list[GroundTruthBox]] = {}
        for g in sorted(gts, key=lambda g: (g.target_id, g.frame)):
            lst = first.setdefault(g.target_id, [])
            if len(lst) < 2:
                lst.append(g)
        for a, b in (v for v in first.values() if len(v) == 2):
            d = (b.bbox.as_array() - a.bbox.as_array()) / ((b.frame - a.frame) / fps)
            total += np.outer(d, d)
            n_g += 1
    if n_g < 2:
        raise ValueError(f"need at least 2 targets seen twice, got {n_g}")
    return (total / (n_g - 1))[:2, :2]


def estimate_r(pairs: Sequence[MatchedPair]) -> np.ndarray:
    if len(pairs) < 2:
        raise ValueError(f"need at least 2 matched pairs, got {len(pairs)}")
    res = np.array([p.det.bbox.as_array() - p.gt.bbox.as_array() for p in pairs])
    return res.T @ res / (len(res) - 1)


# -- process-noise MLE -------------------------------------------------------


@dataclass
class TrackletBatch:
    """Matched-detection tracklets laid out on a common frame grid.

    ``Z[b, k]`` is the detection of tracklet ``b`` at frame offset ``k`` where
    ``has_det[b, k]``; ``active[b, k]`` marks offsets inside the tracklet span.
    """

    Z: np.ndarray
    has_det: np.ndarray
    active: np.ndarray
    dt: np.ndarray

    def __len__(self):
        return len(self.Z)


def build_tracklets(
    pairs_by_seq: Sequence[tuple[Sequence[MatchedPair], float]], min_length: int = 3
) -> TrackletBatch:
    """Group matched detections by ground-truth target into tracklets."""
    items = []
    for pairs, fps in pairs_by_seq:
        by_id: dict[int, dict[int, np.ndarray]] = {}
        for p in pairs:
            by_id.setdefault(p.gt.target_id, {})[p.det.frame] = p.det.bbox.as_array()
        for tid in sorted(by_id):
            frames = by_id[tid]
            if len(frames) >= min_length:
                items.append((frames, 1.0 / fps))
    if not items:
        raise ValueError("no tracklets")
    T = max(max(f) - min(f) + 1 for f, _ in items)
    B = len(items)
    Z = np.zeros((B, T, 4))
    has_det = np.zeros((B, T), dtype=bool)
    active = np.zeros((B, T), dtype=bool)
    dt = np.zeros(B)
    for b, (frames, d) in enumerate(items):
        f0, f1 = min(frames), max(frames)
        active[b, : f1 - f0 + 1] = True
        for f, z in frames.items():
            Z[b, f - f0] = z
            has_det[b, f - f0] = True
        dt[b] = d
    return TrackletBatch(Z, has_det, active, dt)


def _batched_unit_noise(dt: np.ndarray) -> np.ndarray:
    Q = np.zeros((len(dt), 6, 6))
    for a, b in ((0, 2), (1, 3)):
        Q[:, a, a] = dt**3 / 3.0
        Q[:, a, b] = Q[:, b, a] = dt**2 / 2.0
        Q[:, b, b] = dt
    Q[:, 4, 4] = Q[:, 5, 5] = 1.0
    return Q


def tracklet_loglik(batch: TrackletBatch, sigma_ca: float, sigma_sr: float, R: np.ndarray, P_cr: np.ndarray) -> float:
    """Prediction-error decomposition of the tracklets' log-likelihood.

    Each tracklet is filtered from its first detection; the first detection
    only initialises the state and does not contribute.
    """
    B, T = batch.has_det.shape
    idx = np.array([0, 1, 4, 5])
    x = np.zeros((B, 6))
    x[:, idx] = batch.Z[:, 0]
    P = np.zeros((B, 6, 6))
    P[:, idx[:, None], idx[None, :]] = R
    P[:, 2:4, 2:4] = P_cr
    F = np.tile(np.eye(6), (B, 1, 1))
    F[:, 0, 2] = F[:, 1, 3] = batch.dt
    Qu = _batched_unit_noise(batch.dt)
    base = np.array([sigma_ca] * 4 + [sigma_sr] * 2)
    Ft = np.swapaxes(F, 1, 2)
    Hm = np.zeros((4, 6))
    Hm[np.arange(4), idx] = 1.0
    total = 0.0
    for k in range(1, T):
        act = batch.active[:, k]
        if not act.any():
            break
        s = np.maximum(x[:, 4], 1.0)[:, None] * base
        Q = s[:, :, None] * Qu * s[:, None, :]
        xp = np.einsum("bij,bj->bi", F, x)
        Pp = F @ P @ Ft + Q
        x = np.where(act[:, None], xp, x)
        P = np.where(act[:, None, None], Pp, P)
        upd = act & batch.has_det[:, k]
        if upd.any():
            xu, Pu = x[upd], P[upd]
            S = Pu[:, idx][:, :, idx] + R
            S = 0.5 * (S + np.swapaxes(S, 1, 2))
            y = batch.Z[upd, k] - xu[:, idx]
            total += float(np.sum(gaussian_logpdf(y, S)))
            PHt = Pu[:, :, idx]
            K = np.swapaxes(np.linalg.solve(S, np.swapaxes(PHt, 1, 2)), 1, 2)
            xu = xu + np.einsum("bij,bj->bi", K, y)
            xu[:, 4:6] = np.maximum(xu[:, 4:6], 1.0)
            IKH = np.eye(6) - K @ Hm
            Pu = IKH @ Pu @ np.swapaxes(IKH, 1, 2) + K @ R @ np.swapaxes(K, 1, 2)
            x[upd] = xu
            P[upd] = 0.5 * (Pu + np.swapaxes(Pu, 1, 2))
    return total


def mle_sigmas(
    batch: TrackletBatch,
    R: np.ndarray,
    P_cr: np.ndarray,
    log10_range: tuple[float, float] = (-4.0, 1.0),
    n_grid: int = 9,
    rounds: int = 3,
) -> tuple[float, float, list[tuple[float, float, float]]]:
    """Grid-refinement maximisation over ``(log sigma_ca, log sigma_sr)``.

    Each round evaluates an ``n_grid x n_grid`` grid and re-centres a grid two
    steps wide around the best point. Returns the estimates and the full trace
    of ``(sigma_ca, sigma_sr, loglik)`` evaluations.
    """
    if len(batch) == 0:
        raise ValueError("no tracklets")
    lo_a = lo_s = log10_range[0]
    hi_a = hi_s = log10_range[1]
    trace: list[tuple[float, float, float]] = []
    best = (np.nan, np.nan, -np.inf)
    for _ in range(rounds):
        ga = np.linspace(lo_a, hi_a, n_grid)
        gs = np.linspace(lo_s, hi_s, n_grid)
        for a in ga:
            for s in gs:
                ll = tracklet_loglik(batch, 10.0**a, 10.0**s, R, P_cr)
                trace.append((10.0**a, 10.0**s, ll))
                if ll > best[2]:
                    best = (a, s, ll)
        step_a, step_s = ga[1] - ga[0], gs[1] - gs[0]
        lo_a, hi_a = best[0] - step_a, best[0] + step_a
        lo_s, hi_s = best[1] - step_s, best[1] + step_s
    return 10.0 ** best[0], 10.0 ** best[1], trace


# -- c_EX search -------------------------------------------------------------


def cex_base_scale(sequences: Sequence[TrainingSequence]) -> float:
    """Unit conversion from the width histogram to a 4-D measurement density.

    The width histogram counts detections per frame per pixel of width; a
    density over ``(cx, cy, w, h)`` additionally spreads over the image area
    and over box heights. The median detection height stands in for the
    height spread.
    """
    areas = [s.image_size[0] * s.image_size[1] for s in sequences]
    heights = [d.bbox.h for s in sequences for f in s.frames for d in f.detections]
    h = float(np.median(heights)) if heights else 1.0
    return 1.0 / (float(np.mean(areas)) * h)


def search_cex(
    sequences: Sequence[TrainingSequence],
    confidence_model: ConfidenceModel | None,
    clutter_model: ClutterModel,
    cfg: TrackerConfig,
    exponents: Sequence[float] = CEX_EXPONENTS,
    base: float | None = None,
) -> tuple[float, list[tuple[float, float]]]:
    """Pick ``c_EX`` maximising pooled training MOTA; ties go to the larger value."""
    if base is None:
        base = cex_base_scale(sequences)
    trace = []
    for e in exponents:
        c = base * 10.0**e
        clm = clutter_model.with_cex(c)
        reports = {}
        for s in sequences:
            scfg = cfg.replace(motion=cfg.motion.replace(dt=s.dt))
            res = run(s.frames, scfg, clm, confidence_model)
            reports[s.name] = evaluate(s.gt, res.boxes)
        trace.append((c, combine(reports).mota))
    best_c, best_m = trace[0]
    for c, m in trace[1:]:
        if m >= best_m:
            best_c, best_m = c, m
    return best_c, trace


# -- full pipeline -----------------------------------------------------------


def fit(
    sequences: Sequence[TrainingSequence],
    cfg: TrackerConfig | None = None,
    n_conf_bins: int = detmodel.DEFAULT_CONF_BINS,
    n_width_bins: int = detmodel.DEFAULT_WIDTH_BINS,
    search: bool = True,
    exponents: Sequence[float] = CEX_EXPONENTS,
) -> FitReport:
    sequences = sorted(sequences, key=lambda s: s.name)
    thr = cfg.detection_threshold if cfg is not None else 0.0
    all_dets: list[Detection] = []
    matched: dict[str, list[MatchedPair]] = {}
    n_frames = 0
    for s in sequences:
        dets = [d for f in s.frames for d in f.detections if d.confidence >= thr]
        all_dets.extend(dets)
        matched[s.name] = match_gt(dets, s.gt)
        n_frames += len(s.frames)
    stationary = [s for s in sequences if s.camera_stationary]
    if not stationary:
        raise ValueError("no stationary-camera sequences to fit motion parameters")

    P_cr = estimate_pcr([(s.gt, s.framerate) for s in stationary])
    stat_pairs = [p for s in stationary for p in matched[s.name]]
    R = estimate_r(stat_pairs)
    inliers = [p.det for s in sequences for p in matched[s.name]]
    conf_model = detmodel.fit_confidence(inliers, all_dets, n_conf_bins, n_width_bins)
    clutter = detmodel.fit_width_density(all_dets, n_frames, n_width_bins)
    batch = build_tracklets([(matched[s.name], s.framerate) for s in stationary])
    sigma_ca, sigma_sr, mle_trace = mle_sigmas(batch, R, P_cr)
    ref_w = float(np.mean([p.det.bbox.w for p in stat_pairs]))

    report = FitReport(
        P_cr=P_cr,
        R=R,
        sigma_ca=sigma_ca,
        sigma_sr=sigma_sr,
        confidence_model=conf_model,
        clutter_model=clutter,
        reference_width=ref_w,
        counts={
            "n_detections": len(all_dets),
            "n_inliers": len(inliers),
            "n_stationary_pairs": len(stat_pairs),
            "n_tracklets": len(batch),
            "n_frames": n_frames,
        },
        mle_trace=mle_trace,
    )
    if search:
        if cfg is None:
            raise ValueError("c_EX search needs a tracker configuration")
        tcfg = cfg.replace(motion=report.motion_params(cfg.motion.dt, distance_aware=cfg.distance_aware))
        cm = conf_model if tcfg.confidence == "calibrated" else None
        c_ex, trace = search_cex(sequences, cm, clutter, tcfg, exponents)
        report.clutter_model = clutter.with_cex(c_ex)
        report.cex_trace = trace
    else:
        # without a search, fall back to the plain unit conversion
        report.clutter_model = clutter.with_cex(cex_base_scale(sequences))
    return report
