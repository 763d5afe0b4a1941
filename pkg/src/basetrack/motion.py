"""Distance-aware planar Kalman filter.

State vector ``(cx, cy, vx, vy, w, h)``: a nearly-constant-velocity model for
the box center and a nearly-constant model for the box size. Process noise is
scaled by the previous box width so that near (large) objects are allowed to
be more agile than distant (small) ones. Rates are per second; ``dt`` is the
frame period in seconds.

All functions accept either single states or stacks with a leading batch
dimension, so the tracker can propagate every track with one call.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .core import CameraMotion, Detection

log = logging.getLogger(__name__)

MIN_SIZE = 1.0

#: 4x6 selector from state to measured (cx, cy, w, h)
H = np.zeros((4, 6))
H[0, 0] = H[1, 1] = H[2, 4] = H[3, 5] = 1.0
H.setflags(write=False)

_MEAS_IDX = np.array([0, 1, 4, 5])


@dataclass
class MotionParams:
    sigma_ca: float
    sigma_sr: float
    R: np.ndarray
    P_cr: np.ndarray
    dt: float = 1.0
    distance_aware: bool = True
    # width used in place of the track width when distance_aware is off
    reference_width: float = 50.0
    # scale R by (w / reference_width)^2; off by default
    scale_R_by_width: bool = False

    def __post_init__(self):
        self.R = np.asarray(self.R, dtype=float).reshape(4, 4)
        self.P_cr = np.asarray(self.P_cr, dtype=float).reshape(2, 2)
        if not (self.sigma_ca > 0 and self.sigma_sr > 0):
            raise ValueError("sigma_ca and sigma_sr must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        for name, m in (("R", self.R), ("P_cr", self.P_cr)):
            if not np.allclose(m, m.T):
                raise ValueError(f"{name} must be symmetric")
            if np.linalg.eigvalsh(m).min() < -1e-9 * max(1.0, np.trace(m)):
                raise ValueError(f"{name} must be positive semi-definite")

    def replace(self, **kw) -> "MotionParams":
        d = dict(
            sigma_ca=self.sigma_ca,
            sigma_sr=self.sigma_sr,
            R=self.R,
            P_cr=self.P_cr,
            dt=self.dt,
            distance_aware=self.distance_aware,
            reference_width=self.reference_width,
            scale_R_by_width=self.scale_R_by_width,
        )
        d.update(kw)
        return MotionParams(**d)

    def measurement_cov(self, width=None) -> np.ndarray:
        if not self.scale_R_by_width or width is None:
            return self.R
        s = (np.asarray(width, dtype=float) / self.reference_width) ** 2
        return self.R * s[..., None, None]


@dataclass
class TrackState:
    x: np.ndarray
    P: np.ndarray = field(default_factory=lambda: np.eye(6))

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float).reshape(6)
        self.P = np.asarray(self.P, dtype=float).reshape(6, 6)

    @property
    def box(self) -> np.ndarray:
        """Measured components ``(cx, cy, w, h)``."""
        return self.x[_MEAS_IDX]


def cv_blocks(dt: float) -> tuple[np.ndarray, np.ndarray]:
    F = np.array([[1.0, dt], [0.0, 1.0]])
    Q = np.array([[dt**3 / 3.0, dt**2 / 2.0], [dt**2 / 2.0, dt]])
    return F, Q


def transition_matrix(dt: float) -> np.ndarray:
    """``diag(F_cv (x) I_2, I_2)`` in state order."""
    F = np.eye(6)
    F[0, 2] = F[1, 3] = dt
    return F


def _unit_noise(dt: float) -> np.ndarray:
    _, qcv = cv_blocks(dt)
    Q = np.zeros((6, 6))
    # interleave the 1-D block over the (cx, vx) and (cy, vy) pairs
    Q[np.ix_([0, 2], [0, 2])] = qcv
    Q[np.ix_([1, 3], [1, 3])] = qcv
    Q[4, 4] = Q[5, 5] = 1.0
    return Q


def noise_scales(width, p: MotionParams) -> np.ndarray:
    """Per-component standard-deviation scaling, shape ``width.shape + (6,)``."""
    width = np.asarray(width, dtype=float)
    if not p.distance_aware:
        width = np.full_like(width, p.reference_width)
    base = np.array([p.sigma_ca] * 4 + [p.sigma_sr] * 2)
    return width[..., None] * base


def process_noise(width, p: MotionParams, dt: float | None = None) -> np.ndarray:
    """Width-scaled process noise ``Q_k`` for one width or an array of widths.

    The scaling vector enters as a diagonal matrix on both sides of the unit
    noise, which is the reading that yields a 6x6 PSD matrix.
    """
    q = _unit_noise(p.dt if dt is None else dt)
    s = noise_scales(width, p)
    return s[..., :, None] * q * s[..., None, :]


def resolve_camera_motion(cm: CameraMotion | None) -> tuple[CameraMotion, bool]:
    """Return a usable camera motion and whether the input was accepted."""
    if cm is None:
        return CameraMotion.identity(), True
    if not cm.is_invertible:
        log.warning("non-invertible camera warp rejected; using identity")
        return CameraMotion.identity(), False
    return cm, True


def _apply_warp(x, P, cm: CameraMotion):
    if cm.is_identity:
        return x, P
    T = np.kron(np.eye(3), cm.warp)
    x = x @ T.T
    x[..., :2] += cm.translation
    P = T @ P @ T.T
    return x, P


def _clamp_size(x):
    x[..., 4:6] = np.maximum(x[..., 4:6], MIN_SIZE)
    return x


def predict_arrays(x, P, p: MotionParams, cm: CameraMotion | None = None, dt: float | None = None):
    """Batched prediction over stacks ``x (..., 6)`` and ``P (..., 6, 6)``."""
    cm, _ = resolve_camera_motion(cm)
    dt = p.dt if dt is None else dt
    F = transition_matrix(dt)
    Q = process_noise(x[..., 4], p, dt)
    xp = x @ F.T
    Pp = F @ P @ F.T + Q
    xp, Pp = _apply_warp(xp, Pp, cm)
    Pp = 0.5 * (Pp + np.swapaxes(Pp, -1, -2))
    return _clamp_size(xp), Pp


def predict(s: TrackState, p: MotionParams, cm: CameraMotion | None = None, dt: float | None = None) -> TrackState:
    x, P = predict_arrays(s.x.copy(), s.P, p, cm, dt)
    return TrackState(x, P)


def condition_cov(S):
    """Symmetrize ``S`` and add jitter where it is not positive definite.

    Returns the conditioned matrix and a boolean (array) flag of what was fixed.
    """
    S = 0.5 * (S + np.swapaxes(S, -1, -2))
    eig_min = np.linalg.eigvalsh(S)[..., 0]
    bad = eig_min <= 0
    if np.any(bad):
        n = S.shape[-1]
        tr = np.trace(S, axis1=-2, axis2=-1)
        jitter = np.where(bad, np.maximum(1e-9 * tr / n, 1e-12) - np.minimum(eig_min, 0), 0.0)
        S = S + jitter[..., None, None] * np.eye(n)
    return S, bad


def innovation(s: TrackState, z: Detection, p: MotionParams) -> tuple[np.ndarray, np.ndarray]:
    y = z.bbox.as_array() - s.box
    S = p.measurement_cov(s.x[4]) + s.P[np.ix_(_MEAS_IDX, _MEAS_IDX)]
    S, fixed = condition_cov(S)
    if fixed:
        log.warning("innovation covariance was not positive definite; jitter added")
    return y, S


def innovation_arrays(x, P, Z, p: MotionParams):
    """Innovations for every (track, detection) pair.

    ``x (n, 6)``, ``P (n, 6, 6)``, ``Z (m, 4)`` give ``y (n, m, 4)`` and
    ``S (n, 4, 4)`` (S does not depend on the detection).
    """
    y = Z[None, :, :] - x[:, None, _MEAS_IDX]
    S = P[:, _MEAS_IDX][:, :, _MEAS_IDX] + p.measurement_cov(x[:, 4])
    S, _ = condition_cov(S)
    return y, S


def update_arrays(x, P, Z, p: MotionParams):
    """Joseph-form Kalman update of stacked states with one measurement each."""
    R = p.measurement_cov(x[..., 4])
    S = P[..., _MEAS_IDX, :][..., :, _MEAS_IDX] + R
    S, _ = condition_cov(S)
    PHt = P[..., :, _MEAS_IDX]
    K = np.swapaxes(np.linalg.solve(S, np.swapaxes(PHt, -1, -2)), -1, -2)
    y = Z - x[..., _MEAS_IDX]
    xn = x + (K @ y[..., None])[..., 0]
    IKH = np.eye(6) - K @ H
    Pn = IKH @ P @ np.swapaxes(IKH, -1, -2) + K @ R @ np.swapaxes(K, -1, -2)
    Pn = 0.5 * (Pn + np.swapaxes(Pn, -1, -2))
    return _clamp_size(xn), Pn


def update(s: TrackState, z: Detection, p: MotionParams) -> TrackState:
    x, P = update_arrays(s.x.copy(), s.P, z.bbox.as_array(), p)
    return TrackState(x, P)


def init_arrays(Z, p: MotionParams):
    """Initial states for stacked measurements ``Z (..., 4)``."""
    Z = np.asarray(Z, dtype=float)
    x = np.zeros(Z.shape[:-1] + (6,))
    x[..., _MEAS_IDX] = Z
    P = np.zeros(Z.shape[:-1] + (6, 6))
    R = p.measurement_cov(Z[..., 2])
    idx = _MEAS_IDX
    P[..., idx[:, None], idx[None, :]] = R
    P[..., 2:4, 2:4] = p.P_cr
    return _clamp_size(x), P


def init_track(z: Detection, p: MotionParams) -> TrackState:
    x, P = init_arrays(z.bbox.as_array(), p)
    return TrackState(x, P)


def gaussian_logpdf(y, S) -> np.ndarray:
    """``log N(y; 0, S)`` with broadcasting over leading dims of ``y`` and ``S``."""
    y = np.asarray(y, dtype=float)
    d = y.shape[-1]
    L = np.linalg.cholesky(S)
    # broadcast S to y's leading shape for the triangular solve
    Lb = np.broadcast_to(L, y.shape[:-1] + (d, d))
    sol = np.linalg.solve(Lb, y[..., None])[..., 0]
    maha = np.sum(sol * sol, axis=-1)
    logdet = 2.0 * np.sum(np.log(np.diagonal(L, axis1=-2, axis2=-1)), axis=-1)
    return -0.5 * (maha + logdet + d * np.log(2.0 * np.pi))
