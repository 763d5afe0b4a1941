"""MOTChallenge text formats, camera-motion files and sequence directories.

A sequence directory follows the MOTChallenge layout::

    <seq>/seqinfo.ini      [Sequence] name, frameRate, seqLength, imWidth, imHeight
    <seq>/det/det.txt      frame,-1,left,top,width,height,conf,-1,-1,-1
    <seq>/gt/gt.txt        frame,id,left,top,width,height,flag,class,visibility  (optional)
    <seq>/cmc.txt          w11 w12 w21 w22 t1 t2 per frame  (optional)

``seqinfo.ini`` may carry an extra ``cameraStationary`` key (0/1) used when
fitting motion parameters.
"""

from __future__ import annotations

import configparser
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import BoundingBox, CameraMotion, Detection, FrameData, GroundTruthBox

log = logging.getLogger(__name__)

#: MOT17/MOT20 pedestrian classes: pedestrian, static person
PEDESTRIAN_CLASSES = frozenset({1, 7})


class FormatError(ValueError):
    """Malformed input file; the message names the file and line."""


@dataclass
class SequenceSpec:
    name: str
    det_path: Path
    gt_path: Path | None = None
    cmc_path: Path | None = None
    framerate: float = 30.0
    image_size: tuple[float, float] = (1920.0, 1080.0)
    n_frames: int | None = None
    camera_stationary: bool = True

    def __post_init__(self):
        if not self.framerate > 0:
            raise ValueError("framerate must be positive")


def _lines(path: Path) -> Iterable[tuple[int, str]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if line and not line.startswith("#"):
                yield lineno, line


def _floats(path, lineno, fields, n_min) -> list[float]:
    if len(fields) < n_min:
        raise FormatError(f"{path}:{lineno}: expected at least {n_min} fields, got {len(fields)}")
    try:
        vals = [float(f) for f in fields]
    except ValueError as e:
        raise FormatError(f"{path}:{lineno}: {e}") from None
    if not all(math.isfinite(v) for v in vals):
        raise FormatError(f"{path}:{lineno}: non-finite value")
    return vals


def parse_mot_dets(path) -> dict[int, list[Detection]]:
    """Detections per frame, sorted by frame and then descending confidence."""
    path = Path(path)
    rows = []
    for lineno, line in _lines(path):
        fields = [f.strip() for f in line.split(",")]
        if len(fields) != 10 and len(fields) != 7:
            raise FormatError(f"{path}:{lineno}: expected 10 fields, got {len(fields)}")
        v = _floats(path, lineno, fields, 7)
        if v[1] != -1:
            raise FormatError(f"{path}:{lineno}: detection id must be -1, got {fields[1]}")
        if v[0] < 1 or v[0] != int(v[0]):
            raise FormatError(f"{path}:{lineno}: bad frame index {fields[0]}")
        rows.append((lineno, int(v[0]), v[2], v[3], v[4], v[5], v[6]))
    if not rows:
        return {}
    confs = np.array([r[6] for r in rows])
    lo, hi = float(confs.min()), float(confs.max())
    if lo < 0.0 or hi > 1.0:
        log.warning("%s: confidences outside [0, 1] (%.3g..%.3g); min-max normalising", path, lo, hi)
        span = hi - lo if hi > lo else 1.0
        confs = (confs - lo) / span
    out: dict[int, list[Detection]] = {}
    dropped = 0
    for (lineno, frame, left, top, w, h, _), c in zip(rows, confs):
        if w <= 0 or h <= 0:
            dropped += 1
            continue
        out.setdefault(frame, []).append(Detection(frame, BoundingBox.from_tlwh(left, top, w, h), float(c)))
    if dropped:
        log.warning("%s: dropped %d detections with non-positive size", path, dropped)
    return {f: sorted(out[f], key=lambda d: -d.confidence) for f in sorted(out)}


def parse_mot_gt(path, classes: frozenset[int] | None = PEDESTRIAN_CLASSES) -> list[GroundTruthBox]:
    """Ground-truth rows with ``flag != 0`` and a class in ``classes`` (None keeps all)."""
    path = Path(path)
    out = []
    for lineno, line in _lines(path):
        fields = [f.strip() for f in line.split(",")]
        v = _floats(path, lineno, fields, 6)
        flag = v[6] if len(v) > 6 else 1.0
        cls = int(v[7]) if len(v) > 7 else None
        vis = v[8] if len(v) > 8 else 1.0
        if flag == 0:
            continue
        if classes is not None and cls is not None and cls not in classes:
            continue
        if v[4] <= 0 or v[5] <= 0:
            continue
        out.append(GroundTruthBox(int(v[0]), int(v[1]), BoundingBox.from_tlwh(*v[2:6]), min(max(vis, 0.0), 1.0)))
    out.sort(key=lambda g: (g.frame, g.target_id))
    return out


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def format_result_row(frame: int, track_id: int, box, conf: float) -> str:
    cx, cy, w, h = (float(b) for b in box)
    left, top = cx - w / 2.0, cy - h / 2.0
    return f"{frame},{track_id},{_fmt(left)},{_fmt(top)},{_fmt(w)},{_fmt(h)},{conf:.4f},-1,-1,-1"


def write_results(boxes, path) -> None:
    """Write reported boxes in MOTChallenge result format, frames ascending."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = sorted(boxes, key=lambda b: (b.frame, b.track_id))
    with open(path, "w", encoding="utf-8") as fh:
        for b in rows:
            fh.write(format_result_row(b.frame, b.track_id, b.box, b.confidence) + "\n")


def parse_mot_results(path) -> list[tuple]:
    """Result rows as ``(frame, id, cx, cy, w, h, conf)``."""
    path = Path(path)
    out = []
    for lineno, line in _lines(path):
        v = _floats(path, lineno, [f.strip() for f in line.split(",")], 7)
        b = BoundingBox.from_tlwh(*v[2:6])
        out.append((int(v[0]), int(v[1]), b.cx, b.cy, b.w, b.h, v[6]))
    return out


def write_detections(frames: Sequence[FrameData], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for f in frames:
            for d in f.detections:
                left, top, w, h = d.bbox.tlwh()
                fh.write(f"{f.frame},-1,{left!r},{top!r},{w!r},{h!r},{d.confidence!r},-1,-1,-1\n")


def write_gt(gt: Sequence[GroundTruthBox], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for g in sorted(gt, key=lambda g: (g.frame, g.target_id)):
            left, top, w, h = g.bbox.tlwh()
            fh.write(f"{g.frame},{g.target_id},{left!r},{top!r},{w!r},{h!r},1,1,{g.visibility!r}\n")


def parse_cmc(path, n_frames: int | None = None) -> dict[int, CameraMotion]:
    """Per-frame camera motion; line ``k`` holds the transform into frame ``k``."""
    path = Path(path)
    out: dict[int, CameraMotion] = {}
    k = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            k += 1
            v = _floats(path, lineno, line.split(), 6)
            if len(v) != 6:
                raise FormatError(f"{path}:{lineno}: expected 6 values, got {len(v)}")
            out[k] = CameraMotion(np.array(v[:4]).reshape(2, 2), np.array(v[4:]))
    if n_frames is not None and k < n_frames:
        log.warning("%s: %d transforms for %d frames; identity for the rest", path, k, n_frames)
    return out


def write_cmc(motions: Sequence[CameraMotion], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for cm in motions:
            vals = list(cm.warp.ravel()) + list(cm.translation)
            fh.write(" ".join(repr(float(v)) for v in vals) + "\n")


# -- sequence directories ----------------------------------------------------


def read_seqinfo(seq_dir: Path) -> dict:
    ini = seq_dir / "seqinfo.ini"
    info = {"name": seq_dir.name, "framerate": 30.0, "image_size": (1920.0, 1080.0),
            "n_frames": None, "camera_stationary": True}
    if not ini.exists():
        return info
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp.read(ini, encoding="utf-8")
    s = cp["Sequence"] if "Sequence" in cp else {}
    info["name"] = s.get("name", seq_dir.name)
    info["framerate"] = float(s.get("frameRate", 30.0))
    info["image_size"] = (float(s.get("imWidth", 1920)), float(s.get("imHeight", 1080)))
    if "seqLength" in s:
        info["n_frames"] = int(s["seqLength"])
    info["camera_stationary"] = str(s.get("cameraStationary", "1")).strip() not in ("0", "false", "False")
    return info


def write_seqinfo(seq_dir: Path, name: str, framerate: float, n_frames: int, image_size, stationary: bool = True):
    seq_dir.mkdir(parents=True, exist_ok=True)
    with open(seq_dir / "seqinfo.ini", "w", encoding="utf-8") as fh:
        fh.write(
            "[Sequence]\n"
            f"name={name}\n"
            f"frameRate={framerate!r}\n"
            f"seqLength={n_frames}\n"
            f"imWidth={int(image_size[0])}\n"
            f"imHeight={int(image_size[1])}\n"
            f"cameraStationary={int(stationary)}\n"
        )


def sequence_spec(seq_dir) -> SequenceSpec:
    seq_dir = Path(seq_dir)
    det = seq_dir / "det" / "det.txt"
    if not det.exists():
        raise FileNotFoundError(f"missing detection file {det}")
    info = read_seqinfo(seq_dir)
    gt = seq_dir / "gt" / "gt.txt"
    cmc = seq_dir / "cmc.txt"
    return SequenceSpec(
        name=info["name"],
        det_path=det,
        gt_path=gt if gt.exists() else None,
        cmc_path=cmc if cmc.exists() else None,
        framerate=info["framerate"],
        image_size=info["image_size"],
        n_frames=info["n_frames"],
        camera_stationary=info["camera_stationary"],
    )


def load_frames(spec: SequenceSpec) -> list[FrameData]:
    """Every frame of the sequence (empty frames included) with its camera motion."""
    dets = parse_mot_dets(spec.det_path)
    n = spec.n_frames or (max(dets) if dets else 0)
    cmc = parse_cmc(spec.cmc_path, n) if spec.cmc_path else {}
    return [
        FrameData(k, tuple(dets.get(k, ())), cmc.get(k, CameraMotion.identity()), (k - 1) / spec.framerate)
        for k in range(1, n + 1)
    ]
