"""CLEAR-MOT accuracy and identity F1.

Both metrics take per-frame box sets keyed by id. ``to_frames`` accepts
ground-truth boxes, reported boxes or plain ``(frame, id, cx, cy, w, h)``
tuples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..core import GroundTruthBox, iou_matrix
from ..pipeline import ReportedBox

FrameBoxes = dict[int, tuple[np.ndarray, np.ndarray]]  # frame -> (ids (k,), boxes (k, 4))


def to_frames(records: Iterable) -> FrameBoxes:
    tmp: dict[int, list[tuple[int, np.ndarray]]] = {}
    for r in records:
        if isinstance(r, GroundTruthBox):
            f, i, b = r.frame, r.target_id, r.bbox.as_array()
        elif isinstance(r, ReportedBox):
            f, i, b = r.frame, r.track_id, np.asarray(r.box, dtype=float)
        else:
            f, i, b = int(r[0]), int(r[1]), np.asarray(r[2:6], dtype=float)
        tmp.setdefault(int(f), []).append((int(i), b))
    out: FrameBoxes = {}
    for f, items in tmp.items():
        ids = np.array([i for i, _ in items], dtype=int)
        boxes = np.array([b for _, b in items], dtype=float).reshape(-1, 4)
        out[f] = (ids, boxes)
    return out


@dataclass
class MetricsReport:
    mota: float
    fp: int
    fn: int
    idsw: int
    n_gt: int
    idf1: float = float("nan")
    matches: int = 0
    idtp: float = 0.0
    n_hyp: int = 0
    per_sequence: dict[str, "MetricsReport"] = field(default_factory=dict)

    def row(self) -> dict:
        return {
            "MOTA": self.mota,
            "IDF1": self.idf1,
            "FP": self.fp,
            "FN": self.fn,
            "IDSW": self.idsw,
            "GT": self.n_gt,
        }


def _mota(fp: int, fn: int, idsw: int, n_gt: int) -> float:
    if n_gt == 0:
        return float("nan")
    return 1.0 - (fp + fn + idsw) / n_gt


def clear_mot(gt, reported, iou_threshold: float = 0.5) -> MetricsReport:
    gt_f = gt if isinstance(gt, dict) else to_frames(gt)
    hyp_f = reported if isinstance(reported, dict) else to_frames(reported)
    empty = (np.zeros(0, dtype=int), np.zeros((0, 4)))
    fp = fn = idsw = n_gt = n_match = 0
    prev_frame: dict[int, int] = {}
    last_ever: dict[int, int] = {}
    for f in sorted(set(gt_f) | set(hyp_f)):
        gids, gb = gt_f.get(f, empty)
        hids, hb = hyp_f.get(f, empty)
        n_gt += len(gids)
        ious = iou_matrix(gb, hb)
        cur: dict[int, int] = {}
        used_g, used_h = set(), set()
        hpos = {int(h): k for k, h in enumerate(hids)}
        # keep last frame's correspondences while they still overlap
        for gi, g in enumerate(gids):
            h = prev_frame.get(int(g))
            if h is not None and h in hpos and hpos[h] not in used_h:
                hi = hpos[h]
                if ious[gi, hi] >= iou_threshold:
                    cur[int(g)] = h
                    used_g.add(gi)
                    used_h.add(hi)
        rg = [i for i in range(len(gids)) if i not in used_g]
        rh = [j for j in range(len(hids)) if j not in used_h]
        if rg and rh:
            sub = ious[np.ix_(rg, rh)]
            cost = np.where(sub >= iou_threshold, 1.0 - sub, 1e6)
            rows, cols = linear_sum_assignment(cost)
            for r, c in zip(rows, cols):
                if sub[r, c] >= iou_threshold:
                    cur[int(gids[rg[r]])] = int(hids[rh[c]])
        for g, h in cur.items():
            if g in last_ever and last_ever[g] != h:
                idsw += 1
            last_ever[g] = h
        n_match += len(cur)
        fn += len(gids) - len(cur)
        fp += len(hids) - len(cur)
        prev_frame = cur
    return MetricsReport(_mota(fp, fn, idsw, n_gt), fp, fn, idsw, n_gt, matches=n_match)


def _identity_counts(gt_f: FrameBoxes, hyp_f: FrameBoxes, iou_threshold: float):
    """(IDTP, number of reported boxes, number of GT boxes) under the best trajectory matching."""
    gt_ids = sorted({int(i) for ids, _ in gt_f.values() for i in ids})
    hyp_ids = sorted({int(i) for ids, _ in hyp_f.values() for i in ids})
    n_gt = sum(len(ids) for ids, _ in gt_f.values())
    n_hyp = sum(len(ids) for ids, _ in hyp_f.values())
    if not gt_ids or not hyp_ids:
        return 0.0, n_hyp, n_gt
    gpos = {g: k for k, g in enumerate(gt_ids)}
    hpos = {h: k for k, h in enumerate(hyp_ids)}
    overlap = np.zeros((len(gt_ids), len(hyp_ids)))
    for f, (gids, gb) in gt_f.items():
        if f not in hyp_f:
            continue
        hids, hb = hyp_f[f]
        gi, hi = np.nonzero(iou_matrix(gb, hb) >= iou_threshold)
        for a, b in zip(gi, hi):
            overlap[gpos[int(gids[a])], hpos[int(hids[b])]] += 1
    rows, cols = linear_sum_assignment(-overlap)
    return float(overlap[rows, cols].sum()), n_hyp, n_gt


def _f1(idtp: float, n_hyp: int, n_gt: int) -> float:
    if n_hyp + n_gt == 0:
        return 1.0
    # 2 IDTP / (2 IDTP + IDFP + IDFN) with IDFP = n_hyp - IDTP, IDFN = n_gt - IDTP
    return 2.0 * idtp / (n_hyp + n_gt)


def idf1(gt, reported, iou_threshold: float = 0.5) -> float:
    gt_f = gt if isinstance(gt, dict) else to_frames(gt)
    hyp_f = reported if isinstance(reported, dict) else to_frames(reported)
    return _f1(*_identity_counts(gt_f, hyp_f, iou_threshold))


def evaluate(gt, reported, iou_threshold: float = 0.5) -> MetricsReport:
    gt_f = gt if isinstance(gt, dict) else to_frames(gt)
    hyp_f = reported if isinstance(reported, dict) else to_frames(reported)
    rep = clear_mot(gt_f, hyp_f, iou_threshold)
    rep.idtp, rep.n_hyp, _ = _identity_counts(gt_f, hyp_f, iou_threshold)
    rep.idf1 = _f1(rep.idtp, rep.n_hyp, rep.n_gt)
    return rep


def combine(reports: dict[str, MetricsReport]) -> MetricsReport:
    """Pool counts over sequences."""
    rs = list(reports.values())
    fp, fn, idsw = (sum(getattr(r, k) for r in rs) for k in ("fp", "fn", "idsw"))
    n_gt = sum(r.n_gt for r in rs)
    idtp = sum(r.idtp for r in rs)
    n_hyp = sum(r.n_hyp for r in rs)
    return MetricsReport(
        _mota(fp, fn, idsw, n_gt), fp, fn, idsw, n_gt, _f1(idtp, n_hyp, n_gt),
        sum(r.matches for r in rs), idtp, n_hyp, dict(reports),
    )
