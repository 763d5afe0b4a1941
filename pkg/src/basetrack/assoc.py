"""Gating and detection-to-track association.

The association probability of track ``i`` and detection ``j`` is the
track's joint likelihood for the detection normalised by the extraneous
density plus every track's likelihood for that detection. Likelihoods are
handled in log space since 4-D Gaussian densities underflow quickly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import logsumexp

from . import motion
from .core import BoundingBox, Detection, iou, iou_matrix
from .detmodel import ClutterModel, ConfidenceModel, lambda_ex_widths
from .motion import MotionParams, TrackState

DEFAULT_IOU_GATE = 0.1


def gate_threshold(P_G: float) -> float:
    """Probability below which a pair is pruned.

    The gate is ``P_G / (1 - P_G)``; with the canonical ``P_G = 1e-3`` this
    prunes pairs less likely than about one in a thousand.
    """
    if not 0.0 < P_G < 1.0:
        raise ValueError("P_G must lie in (0, 1)")
    return P_G / (1.0 - P_G)


@dataclass
class AssocTable:
    log_lik: np.ndarray  # (n, m) log joint likelihood
    assoc_prob: np.ndarray  # (n, m)
    gated: np.ndarray  # (n, m) bool, True where the pair is kept
    lambda_ex: np.ndarray  # (m,)
    log_denominator: np.ndarray  # (m,)
    y: np.ndarray  # (n, m, 4)
    S: np.ndarray  # (n, 4, 4)

    @property
    def shape(self) -> tuple[int, int]:
        return self.assoc_prob.shape

    def extraneous_share(self) -> np.ndarray:
        """Probability that each detection is extraneous, ``lambda_EX / denominator``."""
        with np.errstate(divide="ignore"):
            return np.exp(np.log(self.lambda_ex) - self.log_denominator)


@dataclass
class Assignment:
    pairs: list[tuple[int, int]] = field(default_factory=list)
    unmatched_tracks: list[int] = field(default_factory=list)
    unmatched_dets: list[int] = field(default_factory=list)


def joint_log_likelihood(y, S, log_conf_lik) -> np.ndarray:
    """``log N(y; 0, S) + log lik(z_c)`` for ``y (n, m, 4)``, ``S (n, 4, 4)``, ``log_conf_lik (m,)``."""
    return motion.gaussian_logpdf(y, S[:, None, :, :]) + np.asarray(log_conf_lik)[None, :]


def joint_likelihood(s: TrackState, z: Detection, p: MotionParams, cm: ConfidenceModel | None) -> float:
    y, S = motion.innovation(s, z, p)
    lik_c = 1.0 if cm is None else float(cm.likelihood(z.confidence, z.bbox.w))
    return float(np.exp(motion.gaussian_logpdf(y, S)) * lik_c)


def table_from_loglik(
    log_lik: np.ndarray,
    lam: np.ndarray,
    P_G: float | None,
    y: np.ndarray | None = None,
    S: np.ndarray | None = None,
    renormalize_after_gate: bool = False,
) -> AssocTable:
    n, m = log_lik.shape
    lam = np.asarray(lam, dtype=float).reshape(m)
    with np.errstate(divide="ignore"):
        log_lam = np.log(lam)
    stacked = np.vstack([log_lam[None, :], log_lik]) if m else np.zeros((n + 1, 0))
    log_den = logsumexp(stacked, axis=0) if m else np.zeros(0)
    prob = np.exp(log_lik - log_den[None, :]) if n and m else np.zeros((n, m))
    if y is None:
        y = np.zeros((n, m, 4))
    if S is None:
        S = np.zeros((n, 4, 4))
    table = AssocTable(log_lik, prob, np.ones((n, m), dtype=bool), lam, log_den, y, S)
    if P_G is not None:
        table = gate(table, P_G, renormalize_after_gate)
    return table


def build_table_arrays(
    x: np.ndarray,
    P: np.ndarray,
    Z: np.ndarray,
    log_conf_lik: np.ndarray,
    lam: np.ndarray,
    p: MotionParams,
    P_G: float | None,
    renormalize_after_gate: bool = False,
) -> AssocTable:
    """Vectorised table construction from stacked track states and detection boxes."""
    n, m = len(x), len(Z)
    if n == 0 or m == 0:
        return table_from_loglik(np.zeros((n, m)), lam, P_G)
    y, S = motion.innovation_arrays(x, P, Z, p)
    log_lik = joint_log_likelihood(y, S, log_conf_lik)
    return table_from_loglik(log_lik, lam, P_G, y, S, renormalize_after_gate)


def build_assoc_table(
    tracks: Sequence[TrackState],
    dets: Sequence[Detection],
    p: MotionParams,
    cm: ConfidenceModel | None,
    clm: ClutterModel,
    P_G: float | None,
) -> AssocTable:
    x = np.array([t.x for t in tracks]).reshape(-1, 6)
    P = np.array([t.P for t in tracks]).reshape(-1, 6, 6)
    Z = np.array([d.bbox.as_array() for d in dets]).reshape(-1, 4)
    conf = np.array([d.confidence for d in dets])
    lik_c = np.ones(len(dets)) if cm is None else cm.likelihood(conf, Z[:, 2])
    lam = lambda_ex_widths(clm, Z[:, 2])
    return build_table_arrays(x, P, Z, np.log(lik_c), lam, p, P_G)


def gate(table: AssocTable, P_G: float, renormalize: bool = False) -> AssocTable:
    """Prune pairs whose association probability is below the gate threshold.

    By default the denominators are left untouched: gating only removes
    assignment candidates.
    """
    tau = gate_threshold(P_G)
    keep = table.gated & (table.assoc_prob >= tau)
    prob = np.where(keep, table.assoc_prob, 0.0)
    log_den = table.log_denominator
    if renormalize and prob.size:
        with np.errstate(divide="ignore"):
            ll = np.where(keep, table.log_lik, -np.inf)
            log_den = logsumexp(np.vstack([np.log(table.lambda_ex)[None, :], ll]), axis=0)
        prob = np.where(keep, np.exp(table.log_lik - log_den[None, :]), 0.0)
    return AssocTable(table.log_lik, prob, keep, table.lambda_ex, log_den, table.y, table.S)


def assign_nonpositive(cost: np.ndarray, feasible: np.ndarray) -> Assignment:
    """Optimal partial matching where feasible pairs cost <= 0 and non-assignment costs 0.

    Infeasible pairs are given cost 0, which makes them equivalent to leaving
    both ends unassigned; a full rectangular assignment then contains an
    optimal partial matching as its feasible subset.
    """
    n, m = cost.shape
    if n == 0 or m == 0 or not feasible.any():
        return Assignment([], list(range(n)), list(range(m)))
    c = np.where(feasible, np.minimum(cost, 0.0), 0.0)
    rows, cols = linear_sum_assignment(c)
    pairs = [(int(i), int(j)) for i, j in zip(rows, cols) if feasible[i, j]]
    pairs.sort()
    mt = {i for i, _ in pairs}
    md = {j for _, j in pairs}
    return Assignment(
        pairs,
        [i for i in range(n) if i not in mt],
        [j for j in range(m) if j not in md],
    )


def assignment_costs(table: AssocTable, P_G: float) -> np.ndarray:
    """Per-pair cost ``-log p + log tau``; gated pairs never cost more than non-assignment."""
    tau = gate_threshold(P_G)
    with np.errstate(divide="ignore"):
        return -np.log(table.assoc_prob) + np.log(tau)


def solve_assignment(table: AssocTable, P_G: float) -> Assignment:
    cost = assignment_costs(table, P_G)
    return assign_nonpositive(np.where(table.gated, cost, 0.0), table.gated)


# --- baselines -------------------------------------------------------------


def baseline_gate_traditional(y, S, lambda_c: float, lambda_nt: float, P_G: float) -> bool:
    """Match-to-noise likelihood-ratio gate."""
    lik = np.exp(motion.gaussian_logpdf(np.asarray(y, float), np.asarray(S, float)))
    return bool(lik / (lambda_c + lambda_nt) >= (1.0 - P_G) / P_G)


def baseline_score_traditional(y, S) -> float:
    """``y^T S^-1 y + log|S|``."""
    y = np.asarray(y, dtype=float)
    S = np.asarray(S, dtype=float)
    _, logdet = np.linalg.slogdet(S)
    return float(y @ np.linalg.solve(S, y) + logdet)


def baseline_score_iou(s: TrackState, z: Detection) -> float:
    return 1.0 - iou(BoundingBox.from_array(s.box), z.bbox)


def traditional_scores(table: AssocTable) -> np.ndarray:
    """Vectorised ``y^T S^-1 y + log|S|`` over a table's cached innovations."""
    n, m = table.shape
    if n == 0 or m == 0:
        return np.zeros((n, m))
    Sinv = np.linalg.inv(table.S)
    maha = np.einsum("nmi,nij,nmj->nm", table.y, Sinv, table.y)
    _, logdet = np.linalg.slogdet(table.S)
    return maha + logdet[:, None]


def solve_traditional(table: AssocTable, P_G: float) -> Assignment:
    """Traditional SHT association.

    Gate: Gaussian innovation likelihood over ``lambda_EX`` against the same
    threshold as the probabilistic gate. Score: Mahalanobis plus log-det,
    shifted so that the matching prefers more pairs, then lower total score.
    """
    n, m = table.shape
    if n == 0 or m == 0:
        return Assignment([], list(range(n)), list(range(m)))
    log_gauss = -0.5 * (traditional_scores(table) + 4 * np.log(2 * np.pi))
    with np.errstate(divide="ignore"):
        ratio = log_gauss - np.log(table.lambda_ex)[None, :]
    feasible = ratio >= np.log(gate_threshold(P_G))
    score = traditional_scores(table)
    if not feasible.any():
        return Assignment([], list(range(n)), list(range(m)))
    shift = score[feasible].max() + 1.0
    return assign_nonpositive(score - shift, feasible)


def iou_cost_matrix(track_boxes: np.ndarray, det_boxes: np.ndarray) -> np.ndarray:
    return 1.0 - iou_matrix(track_boxes, det_boxes)


def solve_iou(track_boxes: np.ndarray, det_boxes: np.ndarray, iou_gate: float = DEFAULT_IOU_GATE) -> Assignment:
    """IOU association: maximise total ``iou - iou_gate`` over pairs with IOU above the gate."""
    cost = iou_cost_matrix(track_boxes, det_boxes)
    feasible = (1.0 - cost) > iou_gate
    return assign_nonpositive(cost - (1.0 - iou_gate), feasible)
