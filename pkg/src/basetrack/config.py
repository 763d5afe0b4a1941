"""Run configuration files.

Flat ``key = value`` INI sections; unknown sections or keys are errors so a
typo in an experiment sweep fails loudly instead of silently using a default.

Example::

    [tracker]
    P_G = 0.001
    detection_threshold = 0.1
    lookahead_frames = 30

    [strategy]
    assoc = probabilistic
    confidence = calibrated

    [models]
    dir = models/

    [output]
    dir = results/
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from . import pipeline
from .estimate import FitReport
from .pipeline import TrackerConfig
from .trackmgmt import ManageParams


class ConfigError(ValueError):
    pass


def _bool(v: str) -> bool:
    s = v.strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _opt_float(v: str):
    return None if v.strip().lower() in ("", "none", "auto") else float(v)


SCHEMA = {
    "tracker": {
        "P_G": float,
        "detection_threshold": float,
        "lookahead_frames": int,
        "max_interp_gap": int,
        "iou_gate": float,
        "renormalize_after_gate": _bool,
        "lookahead_mode": str,
    },
    "manage": {
        "P_D": float,
        "log_lr_confirm": float,
        "log_lr_delete": float,
        "max_coast_frames": int,
        "ptilde_cap": float,
        "peak_margin": float,
        "init_log_lr_clamp": float,
    },
    "strategy": {
        "assoc": str,
        "clutter": str,
        "constant_lambda": _opt_float,
        "distance_aware": _bool,
        "confidence": str,
        "track_mgmt": str,
    },
    "motion": {
        "sigma_ca": _opt_float,
        "sigma_sr": _opt_float,
        "scale_R_by_width": _bool,
    },
    "models": {"dir": str},
    "output": {"dir": str},
}


_CHOICES = {
    "assoc": pipeline.ASSOC_MODES,
    "clutter": pipeline.CLUTTER_MODES,
    "confidence": pipeline.CONFIDENCE_MODES,
    "track_mgmt": pipeline.MGMT_MODES,
    "lookahead_mode": pipeline.LOOKAHEAD_MODES,
}


@dataclass
class RunConfig:
    tracker: dict = field(default_factory=dict)
    manage: dict = field(default_factory=dict)
    strategy: dict = field(default_factory=dict)
    motion: dict = field(default_factory=dict)
    model_dir: Path | None = None
    output_dir: Path | None = None

    def manage_params(self) -> ManageParams:
        return ManageParams(**self.manage)

    def tracker_config(self, fit: FitReport, dt: float) -> TrackerConfig:
        mkw = {k: v for k, v in self.motion.items() if k == "scale_R_by_width"}
        mp = fit.motion_params(dt, **mkw)
        over = {k: v for k, v in self.motion.items() if k in ("sigma_ca", "sigma_sr") and v is not None}
        if over:
            mp = mp.replace(**over)
        return TrackerConfig(motion=mp, manage=self.manage_params(), **self.tracker, **self.strategy)


def parse_config_text(text: str, base_dir: Path | None = None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(str(e)) from None
    cfg = RunConfig()
    base_dir = base_dir or Path(".")
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in cp[section].items():
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key '{key}' in [{section}]")
            try:
                val = SCHEMA[section][key](raw)
            except ValueError as e:
                raise ConfigError(f"[{section}] {key}: {e}") from None
            if section == "models":
                cfg.model_dir = base_dir / val
            elif section == "output":
                cfg.output_dir = base_dir / val
            else:
                getattr(cfg, section)[key] = val
    try:
        ManageParams(**cfg.manage)
    except ValueError as e:
        raise ConfigError(f"[manage] {e}") from None
    for key, allowed in _CHOICES.items():
        v = cfg.strategy.get(key, cfg.tracker.get(key))
        if v is not None and v not in allowed:
            raise ConfigError(f"{key} must be one of {allowed}, got {v!r}")
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"), path.parent)


def format_config(cfg: RunConfig) -> str:
    lines = []
    for section in ("tracker", "manage", "strategy", "motion"):
        vals = getattr(cfg, section)
        if vals:
            lines.append(f"[{section}]")
            lines += [f"{k} = {v}" for k, v in vals.items()]
            lines.append("")
    if cfg.model_dir is not None:
        lines += ["[models]", f"dir = {cfg.model_dir}", ""]
    if cfg.output_dir is not None:
        lines += ["[output]", f"dir = {cfg.output_dir}", ""]
    return "\n".join(lines)
