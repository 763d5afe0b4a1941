"""Plain-text model files.

Every file starts with ``basemodel v1 <kind>``. Numbers are written with
``repr`` so reading a file back reproduces the fitted values bit for bit.

A fitted model directory holds ``motion.model``, ``confidence.model`` and
``clutter.model``.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .detmodel import ClutterModel, ConfidenceModel
from .estimate import FitReport

VERSION = "v1"
MOTION_FILE = "motion.model"
CONFIDENCE_FILE = "confidence.model"
CLUTTER_FILE = "clutter.model"


class ModelFileError(ValueError):
    pass


def _vec(values) -> str:
    return " ".join(repr(float(v)) for v in np.ravel(values))


def _parse_vec(text: str) -> np.ndarray:
    return np.array([float(t) for t in text.split()], dtype=float)


def _header(kind: str) -> str:
    return f"basemodel {VERSION} {kind}\n"


def _read(path, kind: str) -> tuple[dict[str, str], list[str]]:
    """Key-value lines up to an optional ``rows:`` marker, then the raw rows."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"model file not found: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].split() != ["basemodel", VERSION, kind]:
        raise ModelFileError(f"{path}: expected header 'basemodel {VERSION} {kind}'")
    keys: dict[str, str] = {}
    rows: list[str] = []
    in_rows = False
    for lineno, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        if in_rows:
            rows.append(line)
            continue
        if line.strip() == "rows:":
            in_rows = True
            continue
        if ":" not in line:
            raise ModelFileError(f"{path}:{lineno}: expected 'key: value'")
        k, v = line.split(":", 1)
        keys[k.strip()] = v.strip()
    return keys, rows


def _need(keys, key, path):
    if key not in keys:
        raise ModelFileError(f"{path}: missing '{key}'")
    return keys[key]


def save_confidence(m: ConfidenceModel, path) -> None:
    text = _header("confidence")
    text += f"floor: {m.floor!r}\n"
    text += f"conf_edges: {_vec(m.conf_edges)}\n"
    text += f"width_edges: {_vec(m.width_edges)}\n"
    text += "rows:\n"
    text += "".join(_vec(row) + "\n" for row in m.ratio)
    Path(path).write_text(text, encoding="utf-8")


def load_confidence(path) -> ConfidenceModel:
    keys, rows = _read(path, "confidence")
    ratio = np.array([_parse_vec(r) for r in rows])
    try:
        return ConfidenceModel(
            _parse_vec(_need(keys, "conf_edges", path)),
            _parse_vec(_need(keys, "width_edges", path)),
            ratio,
            float(_need(keys, "floor", path)),
        )
    except ValueError as e:
        raise ModelFileError(f"{path}: {e}") from None


def save_clutter(m: ClutterModel, path) -> None:
    text = _header("clutter")
    text += f"c_ex: {float(m.c_ex)!r}\n"
    text += f"width_edges: {_vec(m.width_edges)}\n"
    text += f"density: {_vec(m.density)}\n"
    Path(path).write_text(text, encoding="utf-8")


def load_clutter(path) -> ClutterModel:
    keys, _ = _read(path, "clutter")
    try:
        return ClutterModel(
            _parse_vec(_need(keys, "width_edges", path)),
            _parse_vec(_need(keys, "density", path)),
            float(_need(keys, "c_ex", path)),
        )
    except ValueError as e:
        raise ModelFileError(f"{path}: {e}") from None


_MOTION_SCALARS = ("sigma_ca", "sigma_sr", "reference_width")


def save_motion(report: FitReport, path) -> None:
    text = _header("motion")
    for k in _MOTION_SCALARS:
        text += f"{k}: {float(getattr(report, k))!r}\n"
    text += f"R: {_vec(report.R)}\n"
    text += f"P_cr: {_vec(report.P_cr)}\n"
    for k in sorted(report.counts):
        text += f"count.{k}: {report.counts[k]}\n"
    if report.cex_trace:
        text += "cex_trace: " + " ".join(f"{float(c)!r}/{float(m)!r}" for c, m in report.cex_trace) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def load_motion(path) -> dict:
    keys, _ = _read(path, "motion")
    out: dict = {k: float(_need(keys, k, path)) for k in _MOTION_SCALARS}
    out["R"] = _parse_vec(_need(keys, "R", path)).reshape(4, 4)
    out["P_cr"] = _parse_vec(_need(keys, "P_cr", path)).reshape(2, 2)
    out["counts"] = {k[6:]: int(v) for k, v in keys.items() if k.startswith("count.")}
    out["cex_trace"] = [
        (float(a), float(b)) for a, b in (t.split("/") for t in keys.get("cex_trace", "").split())
    ]
    return out


def save_fit(report: FitReport, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    save_motion(report, d / MOTION_FILE)
    save_confidence(report.confidence_model, d / CONFIDENCE_FILE)
    save_clutter(report.clutter_model, d / CLUTTER_FILE)


def load_fit(directory) -> FitReport:
    d = Path(directory)
    mot = load_motion(d / MOTION_FILE)
    return FitReport(
        P_cr=mot["P_cr"],
        R=mot["R"],
        sigma_ca=mot["sigma_ca"],
        sigma_sr=mot["sigma_sr"],
        confidence_model=load_confidence(d / CONFIDENCE_FILE),
        clutter_model=load_clutter(d / CLUTTER_FILE),
        reference_width=mot["reference_width"],
        counts=mot["counts"],
        cex_trace=mot["cex_trace"],
    )
